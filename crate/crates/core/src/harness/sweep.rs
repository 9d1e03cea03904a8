//! SER sweeps over repetition count and occupancy, and per-sender SER of a
//! multiplexed channel.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::stats::{derive_seed, wilson_half_width, wilson_interval};
use super::trial::{run_trial, sampling_duration_s, DutySpec, TrialSetup};
use crate::channel::ChannelModel;
use crate::modem::Variant;
use crate::multiplex::{DemuxMode, IntervalAssignment, SenderId};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct SerPoint {
    pub rho: u32,
    pub occupancy: f64,
    pub sampling_duration_s: f64,
    pub trials: u64,
    pub errors: u64,
}

impl SerPoint {
    pub fn ser(&self) -> f64 {
        self.errors as f64 / self.trials as f64
    }

    pub fn wilson(&self) -> (f64, f64) {
        wilson_interval(self.errors, self.trials)
    }

    pub fn wilson_half_width(&self) -> f64 {
        wilson_half_width(self.errors, self.trials)
    }
}

/// Counts failed trials out of `trials`, each with its own derived seed.
fn count_errors(
    setup: &TrialSetup,
    trials: u64,
    seed: u64,
) -> Result<Vec<BTreeMap<SenderId, bool>>> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            run_trial(setup, derive_seed(seed, &[t]))
                .map(|o| o.into_iter().map(|(id, r)| (id, r.is_error())).collect())
        })
        .collect()
}

/// Calibrated copy of `template` at occupancy `b`.
pub fn channel_at(template: &ChannelModel, b: f64) -> Result<ChannelModel> {
    template.at_occupancy(b).calibrated()
}

/// Monte-Carlo SER for every `(ρ, B)` grid point, in grid order (occupancy
/// outer, ρ inner).
pub fn ser_sweep(cfg: &ExperimentConfig) -> Result<Vec<SerPoint>> {
    cfg.validate()?;
    let assignment = IntervalAssignment::from_pairs([(SenderId(0), cfg.interval)])?;
    let mut points = Vec::new();
    for (bi, &b) in cfg.occupancies.iter().enumerate() {
        let model = channel_at(&cfg.channel, b)?;
        for rho in cfg.rho.iter() {
            let setup = TrialSetup {
                assignment: &assignment,
                variant: cfg.variant,
                model: &model,
                rho,
                learn_rows: cfg.learn_rows,
                mode: DemuxMode::Plain,
                duty: None,
                window_us: None,
            };
            let seed = derive_seed(cfg.seed, &[bi as u64, rho as u64]);
            let errors = count_errors(&setup, cfg.trials, seed)?
                .iter()
                .filter(|m| m[&SenderId(0)])
                .count() as u64;
            points.push(SerPoint {
                rho,
                occupancy: b,
                sampling_duration_s: sampling_duration_s(&cfg.interval, cfg.variant, rho),
                trials: cfg.trials,
                errors,
            });
        }
    }
    Ok(points)
}

pub fn write_ser_csv<W: Write>(
    cfg: &ExperimentConfig,
    points: &[SerPoint],
    mut out: W,
) -> Result<()> {
    writeln!(
        out,
        "variant,x,delta_us,rho,occupancy,sampling_duration_s,trials,errors,ser,wilson_half_width"
    )?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{:.4},{:.6},{},{},{:.6},{:.6}",
            cfg.variant,
            cfg.interval.x(),
            cfg.interval.delta_us(),
            p.rho,
            p.occupancy,
            p.sampling_duration_s,
            p.trials,
            p.errors,
            p.ser(),
            p.wilson_half_width()
        )?;
    }
    Ok(())
}

/// Violations of a monotone trend along one axis of a sweep.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrendCheck {
    /// Adjacent pairs that move the wrong way but whose Wilson intervals overlap.
    pub tolerated: Vec<(SerPoint, SerPoint)>,
    /// Adjacent pairs that move the wrong way with disjoint intervals.
    pub significant: Vec<(SerPoint, SerPoint)>,
}

impl TrendCheck {
    /// At most one inversion, and that one within noise.
    pub fn holds(&self) -> bool {
        self.significant.is_empty() && self.tolerated.len() <= 1
    }
}

fn overlap(a: &SerPoint, b: &SerPoint) -> bool {
    let (alo, ahi) = a.wilson();
    let (blo, bhi) = b.wilson();
    alo <= bhi && blo <= ahi
}

fn check_sequence(seq: &[&SerPoint], increasing: bool, out: &mut TrendCheck) {
    for w in seq.windows(2) {
        let wrong = if increasing {
            w[1].ser() < w[0].ser()
        } else {
            w[1].ser() > w[0].ser()
        };
        if wrong {
            let pair = (w[0].clone(), w[1].clone());
            if overlap(w[0], w[1]) {
                out.tolerated.push(pair);
            } else {
                out.significant.push(pair);
            }
        }
    }
}

/// SER should not rise with `ρ` at fixed occupancy; checked per occupancy.
pub fn check_rho_trend(points: &[SerPoint]) -> BTreeMap<String, TrendCheck> {
    let mut by_b: BTreeMap<String, Vec<&SerPoint>> = BTreeMap::new();
    for p in points {
        by_b.entry(format!("{:.4}", p.occupancy))
            .or_default()
            .push(p);
    }
    by_b.into_iter()
        .map(|(k, mut v)| {
            v.sort_by_key(|p| p.rho);
            let mut c = TrendCheck::default();
            check_sequence(&v, false, &mut c);
            (k, c)
        })
        .collect()
}

/// SER should not fall with occupancy at fixed `ρ`; checked per `ρ`.
pub fn check_occupancy_trend(points: &[SerPoint]) -> BTreeMap<u32, TrendCheck> {
    let mut by_rho: BTreeMap<u32, Vec<&SerPoint>> = BTreeMap::new();
    for p in points {
        by_rho.entry(p.rho).or_default().push(p);
    }
    by_rho
        .into_iter()
        .map(|(k, mut v)| {
            v.sort_by(|a, b| a.occupancy.total_cmp(&b.occupancy));
            let mut c = TrendCheck::default();
            check_sequence(&v, true, &mut c);
            (k, c)
        })
        .collect()
}

/// Per-sender error counts for a multiplexed channel.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplexPoint {
    pub sender: SenderId,
    pub trials: u64,
    pub errors: u64,
}

impl MultiplexPoint {
    pub fn ser(&self) -> f64 {
        self.errors as f64 / self.trials as f64
    }
}

#[derive(Debug, Clone)]
pub struct MultiplexExperiment {
    pub assignment: IntervalAssignment,
    pub variant: Variant,
    pub channel: ChannelModel,
    pub rho: u32,
    pub learn_rows: u32,
    pub mode: DemuxMode,
    pub trials: u64,
    pub seed: u64,
    pub duty: Option<DutySpec>,
}

pub fn multiplex_experiment(e: &MultiplexExperiment) -> Result<Vec<MultiplexPoint>> {
    let model = channel_at(&e.channel, e.channel.occupancy)?;
    let setup = TrialSetup {
        assignment: &e.assignment,
        variant: e.variant,
        model: &model,
        rho: e.rho,
        learn_rows: e.learn_rows,
        mode: e.mode,
        duty: e.duty,
        window_us: None,
    };
    let runs = count_errors(&setup, e.trials, e.seed)?;
    Ok(e.assignment
        .entries()
        .keys()
        .map(|&id| MultiplexPoint {
            sender: id,
            trials: e.trials,
            errors: runs.iter().filter(|m| m[&id]).count() as u64,
        })
        .collect())
}

pub fn write_multiplex_csv<W: Write>(
    e: &MultiplexExperiment,
    points: &[MultiplexPoint],
    mut out: W,
) -> Result<()> {
    writeln!(
        out,
        "sender_id,x,delta_us,variant,mode,rho,occupancy,trials,errors,ser,wilson_half_width"
    )?;
    let mode = match e.mode {
        DemuxMode::Plain => "plain",
        DemuxMode::Cancelling => "cancelling",
    };
    for p in points {
        let c = e
            .assignment
            .get(p.sender)
            .expect("point for assigned sender");
        writeln!(
            out,
            "{},{},{},{},{},{},{:.4},{},{},{:.6},{:.6}",
            p.sender,
            c.x(),
            c.delta_us(),
            e.variant,
            mode,
            e.rho,
            e.channel.occupancy,
            p.trials,
            p.errors,
            p.ser(),
            wilson_half_width(p.errors, p.trials)
        )?;
    }
    Ok(())
}
