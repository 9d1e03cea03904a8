//! One Monte-Carlo trial: draw symbols, modulate, render, filter, decode.
//!
//! Every sender transmits continuously so the receiver's window can start
//! anywhere. The window opens after a pre-roll of two fold periods and spans
//! `ρ` fold periods of the slowest sender (or an explicit length). FreeBee
//! receivers first learn each sender's reference column from an independent
//! render of the unmodulated beacons over a window that starts at the same
//! time, so learned columns carry over directly.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::stats::derive_seed;
use crate::channel::{render, ChannelModel, DutyCycleSchedule};
use crate::modem::{learn_reference, BeaconSchedule, IntervalConfig, Symbol, Variant};
use crate::multiplex::{cancel_beacons, demux, DemuxMode, IntervalAssignment, Receiver, SenderId};
use crate::signal::packet_edge_filter;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub sent: Symbol,
    /// `None` when the receiver reported no signal.
    pub decoded: Option<Symbol>,
}

impl TrialOutcome {
    pub fn is_error(&self) -> bool {
        self.decoded != Some(self.sent)
    }
}

/// Receiver duty cycle; each trial draws its own phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DutySpec {
    pub period_us: u64,
    pub active_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct TrialSetup<'a> {
    pub assignment: &'a IntervalAssignment,
    pub variant: Variant,
    /// Should already be calibrated; see [`ChannelModel::calibrated`].
    pub model: &'a ChannelModel,
    pub rho: u32,
    /// FreeBee only: unmodulated intervals used to learn references;
    /// 0 gives the receiver the true reference columns.
    pub learn_rows: u32,
    pub mode: DemuxMode,
    pub duty: Option<DutySpec>,
    /// Overrides the `ρ`-period window.
    pub window_us: Option<u64>,
}

struct Sender {
    id: SenderId,
    cfg: IntervalConfig,
    reference_us: u64,
    symbol: Symbol,
}

fn period_us(cfg: &IntervalConfig, variant: Variant) -> u64 {
    match variant {
        Variant::FreeBee => cfg.interval_us(),
        Variant::AFreeBee => 2 * cfg.interval_us(),
    }
}

/// All emissions of `s` in `[0, end_us)`.
fn continuous_schedule(
    s: &Sender,
    shift: i64,
    end_us: u64,
    beacon_us: u64,
) -> Result<BeaconSchedule> {
    let t = s.cfg.interval_us() as i64;
    let d = s.cfg.delta_us() as i64;
    let r = s.reference_us as i64;
    let end = end_us as i64;
    let mut times = Vec::new();
    match s.symbol.variant() {
        Variant::FreeBee => {
            let mut k = 0;
            while r + k * t + shift * d < end {
                let e = r + k * t + shift * d;
                if e >= 0 {
                    times.push(e as u64);
                }
                k += 1;
            }
        }
        Variant::AFreeBee => {
            let mut k = 0;
            while r + 2 * k * t < end {
                let base = r + 2 * k * t;
                times.push(base as u64);
                let other = base + t - shift * d;
                if other < end {
                    times.push(other as u64);
                }
                k += 1;
            }
        }
    }
    BeaconSchedule::new(times, beacon_us)
}

fn reference_columns(
    setup: &TrialSetup,
    senders: &[Sender],
    window_start_us: u64,
    seed: u64,
) -> Result<BTreeMap<SenderId, usize>> {
    let sp = setup.model.sample_period_us;
    let first_bin = (window_start_us / sp) as usize;
    let truth = |s: &Sender| {
        let t = s.cfg.interval_us();
        let k = (window_start_us.saturating_sub(s.reference_us)).div_ceil(t);
        let bin = ((s.reference_us + k * t) / sp) as usize;
        (bin - first_bin) % s.cfg.lambda()
    };
    if setup.learn_rows == 0 {
        return Ok(senders.iter().map(|s| (s.id, truth(s))).collect());
    }
    let lambda_max = senders.iter().map(|s| s.cfg.lambda()).max().unwrap_or(0);
    let t_max = senders
        .iter()
        .map(|s| s.cfg.interval_us())
        .max()
        .unwrap_or(0);
    let len = setup.learn_rows as usize * lambda_max;
    let end = window_start_us + (len as u64 + 1) * sp + t_max;
    let schedules = senders
        .iter()
        .map(|s| continuous_schedule(s, 0, end, setup.model.beacon_len_us))
        .collect::<Result<Vec<_>>>()?;
    let raw = render(&schedules, setup.model, end, seed, None)?;
    let mut window = packet_edge_filter(&raw).window(first_bin, len)?;
    let mut order: Vec<&Sender> = senders.iter().collect();
    order.sort_by_key(|s| (s.cfg.x(), s.id));
    let mut refs = BTreeMap::new();
    for s in order {
        match learn_reference(&window, &s.cfg) {
            Ok(c) => {
                if setup.mode == DemuxMode::Cancelling {
                    window = cancel_beacons(&window, s.cfg.lambda(), c, None);
                }
                refs.insert(s.id, c);
            }
            // an unlearnable reference still lets the other senders decode
            Err(Error::NoSignal) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(refs)
}

/// Runs one trial and reports every sender's outcome.
pub fn run_trial(setup: &TrialSetup, seed: u64) -> Result<BTreeMap<SenderId, TrialOutcome>> {
    let model = setup.model;
    let sp = model.sample_period_us;
    if setup.rho == 0 {
        return Err(Error::InvalidConfig("rho must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0]));
    let mut senders = Vec::with_capacity(setup.assignment.len());
    for (&id, &cfg) in setup.assignment.entries() {
        if cfg.sample_period_us() != sp {
            return Err(Error::InvalidConfig(format!(
                "sender {id} sampled at {} us, channel at {sp} us",
                cfg.sample_period_us()
            )));
        }
        let (lo, hi) = cfg.shift_range(setup.variant);
        let symbol = Symbol::new(rng.random_range(lo..=hi), setup.variant, &cfg)?;
        let reference_us = rng.random_range(0..period_us(&cfg, setup.variant));
        senders.push(Sender {
            id,
            cfg,
            reference_us,
            symbol,
        });
    }
    let slowest = senders
        .iter()
        .max_by_key(|s| s.cfg.lambda())
        .expect("assignment is never empty");
    let fold_max = slowest.cfg.fold_period(setup.variant);
    let pmax_us = period_us(&slowest.cfg, setup.variant);
    let window_start_us = 2 * pmax_us;
    let window_len = match setup.window_us {
        Some(w) => (w / sp) as usize,
        None => setup.rho as usize * fold_max,
    };
    let duration_us = window_start_us + (window_len as u64 + 1) * sp + pmax_us;

    let duty = match setup.duty {
        None => None,
        Some(d) => Some(DutyCycleSchedule::new(
            d.period_us,
            d.active_fraction,
            rng.random_range(0..d.period_us),
        )?),
    };
    let schedules = senders
        .iter()
        .map(|s| continuous_schedule(s, s.symbol.shift(), duration_us, model.beacon_len_us))
        .collect::<Result<Vec<_>>>()?;
    let raw = render(
        &schedules,
        model,
        duration_us,
        derive_seed(seed, &[1]),
        duty.as_ref(),
    )?;
    let window = packet_edge_filter(&raw).window((window_start_us / sp) as usize, window_len)?;

    let receiver = match setup.variant {
        Variant::FreeBee => Receiver::FreeBee {
            references: reference_columns(
                setup,
                &senders,
                window_start_us,
                derive_seed(seed, &[2]),
            )?,
        },
        Variant::AFreeBee => Receiver::AFreeBee,
    };
    let decoded = demux(&window, setup.assignment, &receiver, setup.mode);
    Ok(senders
        .iter()
        .map(|s| {
            let got = decoded
                .get(&s.id)
                .and_then(|r| r.as_ref().ok())
                .map(|d| d.symbol);
            (
                s.id,
                TrialOutcome {
                    sent: s.symbol,
                    decoded: got,
                },
            )
        })
        .collect())
}

/// Single-sender convenience wrapper around [`run_trial`].
pub fn symbol_trial(
    cfg: &IntervalConfig,
    variant: Variant,
    model: &ChannelModel,
    rho: u32,
    learn_rows: u32,
    seed: u64,
) -> Result<TrialOutcome> {
    let a = IntervalAssignment::from_pairs([(SenderId(0), *cfg)])?;
    let setup = TrialSetup {
        assignment: &a,
        variant,
        model,
        rho,
        learn_rows,
        mode: DemuxMode::Plain,
        duty: None,
        window_us: None,
    };
    Ok(run_trial(&setup, seed)?[&SenderId(0)])
}

/// Window actually sampled, for reporting.
pub fn sampling_duration_s(cfg: &IntervalConfig, variant: Variant, rho: u32) -> f64 {
    rho as f64 * period_us(cfg, variant) as f64 / 1e6
}
