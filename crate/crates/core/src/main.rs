use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use beaconfold_core::channel::{AccessDelay, ChannelModel};
use beaconfold_core::harness::{
    duty_cycle_experiment, multiplex_experiment, overhead_report, ser_sweep, write_duty_csv,
    write_multiplex_csv, write_overhead_csv, write_ser_csv, DutyExperiment, ExperimentConfig,
    FloatList, KeyValues, MultiplexExperiment, RhoRange, DEFAULT_LEARN_ROWS,
};
use beaconfold_core::modem::{
    bit_rate, bit_width, demodulate_afreebee, demodulate_freebee, modulate, symbol_to_bits,
    BitsPerSymbol, IntervalConfig, Symbol, Variant,
};
use beaconfold_core::multiplex::{DemuxMode, IntervalAssignment};
use beaconfold_core::signal::{
    load_trace, packet_edge_filter, save_trace, DEFAULT_SAMPLE_PERIOD_US,
};
use beaconfold_core::{channel, Error, Result};

#[derive(Parser)]
#[command(
    name = "beaconfold",
    version,
    about = "Beacon-timing modem and channel simulator"
)]
struct Cli {
    /// Flat key=value file whose keys mirror the flags; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo symbol error rate over a (rho, occupancy) grid.
    SerSweep(SerSweepArgs),
    /// Analytic bit rate of one sender.
    Rate(RateArgs),
    /// Per-sender symbol error rate of concurrent senders.
    Multiplex(MultiplexArgs),
    /// Smallest receiver duty cycle that decodes every sender.
    Duty(DutyArgs),
    /// Decode one symbol from a trace file.
    Demod(DemodArgs),
    /// Receiver storage and work per symbol.
    Overhead(OverheadArgs),
    /// Simulate one symbol and write the raw trace.
    Render(RenderArgs),
}

#[derive(Args)]
struct SerSweepArgs {
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    x: Option<u32>,
    #[arg(long)]
    delta_us: Option<u64>,
    /// Inclusive range `a..b`, or a single value.
    #[arg(long)]
    rho: Option<RhoRange>,
    /// Comma-separated occupancies.
    #[arg(long)]
    occupancy: Option<FloatList>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sample_period_us: Option<u64>,
    /// Unmodulated intervals used to learn the reference; 0 = known reference.
    #[arg(long)]
    learn_rows: Option<u32>,
    #[arg(long)]
    p_fast: Option<f64>,
}

#[derive(Args)]
struct RateArgs {
    #[arg(long)]
    x: Option<u32>,
    #[arg(long)]
    delta_us: Option<u64>,
    #[arg(long)]
    rho: Option<u32>,
    /// Credit each symbol with ⌊log2 x⌋ bits instead of log2 x.
    #[arg(long)]
    floor: bool,
}

#[derive(Args)]
struct MultiplexArgs {
    /// CSV with columns sender_id,x,delta_us.
    #[arg(long)]
    assignment: Option<PathBuf>,
    #[arg(long)]
    occupancy: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Decode by ascending interval, cancelling each decoded sender.
    #[arg(long)]
    cancel: bool,
    #[arg(long)]
    rho: Option<u32>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    learn_rows: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DutyArgs {
    #[arg(long)]
    contact_s: Option<f64>,
    /// CSV with columns sender_id,x,delta_us.
    #[arg(long)]
    senders: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    occupancy: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    period_us: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DemodArgs {
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    x: Option<u32>,
    #[arg(long)]
    delta_us: Option<u64>,
    /// Reference column for synchronous decoding (default 0).
    #[arg(long, conflicts_with = "afreebee")]
    reference: Option<usize>,
    #[arg(long)]
    afreebee: bool,
    /// Decode the trace as stored, without packet-edge filtering.
    #[arg(long)]
    no_filter: bool,
}

#[derive(Args)]
struct OverheadArgs {
    #[arg(long)]
    x: Option<u32>,
    #[arg(long)]
    delta_us: Option<u64>,
    #[arg(long)]
    rho: Option<u32>,
    #[arg(long)]
    afreebee: bool,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    x: Option<u32>,
    #[arg(long)]
    delta_us: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    shift: Option<i64>,
    #[arg(long)]
    rho: Option<u32>,
    #[arg(long)]
    occupancy: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Unmodulated reference emission time.
    #[arg(long)]
    reference_us: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn flag(kv: &KeyValues, set: bool, key: &str) -> Result<bool> {
    kv.pick(set.then_some(true), key, false)
}

fn interval(kv: &KeyValues, x: Option<u32>, delta: Option<u64>, sp: u64) -> Result<IntervalConfig> {
    IntervalConfig::new(kv.require(delta, "delta-us")?, kv.require(x, "x")?, sp)
}

fn ser_sweep_cmd(kv: &KeyValues, a: SerSweepArgs) -> Result<()> {
    let sp = kv.pick(
        a.sample_period_us,
        "sample-period-us",
        DEFAULT_SAMPLE_PERIOD_US,
    )?;
    let mut cfg = ExperimentConfig::new(
        kv.pick(a.variant, "variant", Variant::FreeBee)?,
        interval(kv, a.x, a.delta_us, sp)?,
        kv.pick(a.rho, "rho", RhoRange::new(5, 5)?)?,
        kv.pick(a.occupancy, "occupancy", FloatList(vec![0.3]))?.0,
        kv.pick(a.trials, "trials", 1000)?,
        kv.pick(a.seed, "seed", 0)?,
    )?;
    cfg.channel.sample_period_us = sp;
    if let Some(p) = a.p_fast.or(kv.get("p-fast")?) {
        cfg.channel.access_delay = AccessDelay::TwoPiece { p_fast: p };
    }
    cfg.learn_rows = kv.pick(a.learn_rows, "learn-rows", DEFAULT_LEARN_ROWS)?;
    cfg.out = a.out.or_else(|| kv.raw("out").map(PathBuf::from));
    let points = ser_sweep(&cfg)?;
    let mut out = output(cfg.out.clone())?;
    write_ser_csv(&cfg, &points, &mut out)?;
    out.flush()?;
    Ok(())
}

fn rate_cmd(kv: &KeyValues, a: RateArgs) -> Result<()> {
    let cfg = interval(kv, a.x, a.delta_us, DEFAULT_SAMPLE_PERIOD_US)?;
    let rho = kv.require(a.rho, "rho")?;
    let floor = flag(kv, a.floor, "floor")?;
    let bits = if floor {
        BitsPerSymbol::Floor
    } else {
        BitsPerSymbol::Exact
    };
    let per_symbol = if floor {
        bit_width(&cfg) as f64
    } else {
        (cfg.x() as f64).log2()
    };
    let mut out = output(None)?;
    writeln!(
        out,
        "variant,x,delta_us,rho,interval_s,bits_per_symbol,rate_bps"
    )?;
    for v in [Variant::FreeBee, Variant::AFreeBee] {
        writeln!(
            out,
            "{v},{},{},{rho},{:.6},{:.6},{:.6}",
            cfg.x(),
            cfg.delta_us(),
            cfg.interval_s(),
            per_symbol,
            bit_rate(&cfg, rho, v, bits)?
        )?;
    }
    out.flush()?;
    Ok(())
}

fn multiplex_cmd(kv: &KeyValues, a: MultiplexArgs) -> Result<()> {
    let path: PathBuf = kv.require(a.assignment, "assignment")?;
    let assignment = IntervalAssignment::load(path)?;
    let occupancy = kv.pick(a.occupancy, "occupancy", 0.1)?;
    let e = MultiplexExperiment {
        assignment,
        variant: kv.pick(a.variant, "variant", Variant::FreeBee)?,
        channel: ChannelModel::with_occupancy(occupancy),
        rho: kv.pick(a.rho, "rho", 5)?,
        learn_rows: kv.pick(a.learn_rows, "learn-rows", DEFAULT_LEARN_ROWS)?,
        mode: if flag(kv, a.cancel, "cancel")? {
            DemuxMode::Cancelling
        } else {
            DemuxMode::Plain
        },
        trials: kv.pick(a.trials, "trials", 500)?,
        seed: kv.pick(a.seed, "seed", 0)?,
        duty: None,
    };
    let points = multiplex_experiment(&e)?;
    let mut out = output(a.out.or_else(|| kv.raw("out").map(PathBuf::from)))?;
    write_multiplex_csv(&e, &points, &mut out)?;
    out.flush()?;
    Ok(())
}

fn duty_cmd(kv: &KeyValues, a: DutyArgs) -> Result<()> {
    let contact: f64 = kv.require(a.contact_s, "contact-s")?;
    let path: PathBuf = kv.require(a.senders, "senders")?;
    let mut e = DutyExperiment::new(
        IntervalAssignment::load(path)?,
        kv.pick(a.occupancy, "occupancy", 0.05)?,
        kv.pick(a.trials, "trials", 100)?,
        kv.pick(a.seed, "seed", 0)?,
    );
    e.period_us = kv.pick(a.period_us, "period-us", e.period_us)?;
    let outcome = duty_cycle_experiment(&e, contact);
    let mut out = output(a.out.or_else(|| kv.raw("out").map(PathBuf::from)))?;
    write_duty_csv(&e, contact, &outcome, &mut out)?;
    out.flush()?;
    Ok(())
}

fn demod_cmd(kv: &KeyValues, a: DemodArgs) -> Result<()> {
    let path: PathBuf = kv.require(a.trace, "trace")?;
    let raw = load_trace(path)?;
    let cfg = interval(kv, a.x, a.delta_us, raw.sample_period_us())?;
    let trace = if flag(kv, a.no_filter, "no-filter")? {
        raw
    } else {
        packet_edge_filter(&raw)
    };
    let d = if flag(kv, a.afreebee, "afreebee")? {
        demodulate_afreebee(&trace, &cfg, None)?
    } else {
        let reference = kv.pick(a.reference, "reference", 0)?;
        demodulate_freebee(&trace, &cfg, reference, None)?
    };
    let bits = symbol_to_bits(d.symbol, &cfg).unwrap_or_default();
    let peaks: Vec<String> = d.peak_columns.iter().map(|c| c.to_string()).collect();
    let mut out = output(None)?;
    writeln!(
        out,
        "variant,x,delta_us,fold_period,peak_columns,offset_samples,shift,bits,confidence"
    )?;
    writeln!(
        out,
        "{},{},{},{},{},{},{},{bits},{:.6}",
        d.symbol.variant(),
        cfg.x(),
        cfg.delta_us(),
        d.fold_period,
        peaks.join(" "),
        d.offset_samples,
        d.symbol.shift(),
        d.confidence
    )?;
    out.flush()?;
    Ok(())
}

fn overhead_cmd(kv: &KeyValues, a: OverheadArgs) -> Result<()> {
    let cfg = interval(kv, a.x, a.delta_us, DEFAULT_SAMPLE_PERIOD_US)?;
    let rho = kv.require(a.rho, "rho")?;
    let variant = if flag(kv, a.afreebee, "afreebee")? {
        Variant::AFreeBee
    } else {
        Variant::FreeBee
    };
    let mut out = output(None)?;
    write_overhead_csv(&overhead_report(&cfg, rho, variant), variant, &mut out)?;
    out.flush()?;
    Ok(())
}

fn render_cmd(kv: &KeyValues, a: RenderArgs) -> Result<()> {
    let cfg = interval(kv, a.x, a.delta_us, DEFAULT_SAMPLE_PERIOD_US)?;
    let variant = kv.pick(a.variant, "variant", Variant::FreeBee)?;
    let sym = Symbol::new(kv.pick(a.shift, "shift", 0)?, variant, &cfg)?;
    let rho = kv.pick(a.rho, "rho", 5)?;
    let reference = kv.pick(a.reference_us, "reference-us", 0)?;
    let model =
        ChannelModel::with_occupancy(kv.pick(a.occupancy, "occupancy", 0.0)?).calibrated()?;
    let schedule =
        modulate(reference, &cfg, sym, rho)?.with_beacon_duration(model.beacon_len_us)?;
    let end = schedule.last_time_us().unwrap_or(0) + cfg.interval_us();
    let trace = channel::render(&[schedule], &model, end, kv.pick(a.seed, "seed", 0)?, None)?;
    let path: PathBuf = kv.require(a.out, "out")?;
    save_trace(&trace, path)
}

fn run(cli: Cli) -> Result<()> {
    let kv = match &cli.config {
        Some(p) => KeyValues::load(p)?,
        None => KeyValues::default(),
    };
    match cli.command {
        Command::SerSweep(a) => ser_sweep_cmd(&kv, a),
        Command::Rate(a) => rate_cmd(&kv, a),
        Command::Multiplex(a) => multiplex_cmd(&kv, a),
        Command::Duty(a) => duty_cmd(&kv, a),
        Command::Demod(a) => demod_cmd(&kv, a),
        Command::Overhead(a) => overhead_cmd(&kv, a),
        Command::Render(a) => render_cmd(&kv, a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
