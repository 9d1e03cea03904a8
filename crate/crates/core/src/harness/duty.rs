//! Smallest receiver duty cycle that still decodes every sender within a
//! contact window.

use std::io::Write;

use rayon::prelude::*;

use super::stats::derive_seed;
use super::sweep::channel_at;
use super::trial::{run_trial, DutySpec, TrialSetup};
use crate::channel::ChannelModel;
use crate::modem::Variant;
use crate::multiplex::{DemuxMode, IntervalAssignment};
use crate::{Error, Result};

/// Active fractions are searched in steps of 0.5%.
pub const DUTY_STEP: f64 = 0.005;
/// Fraction of trials that must decode every sender.
pub const SUCCESS_BAR: f64 = 0.99;
pub const DEFAULT_DUTY_PERIOD_US: u64 = 10_000;

#[derive(Debug, Clone)]
pub struct DutyExperiment {
    pub assignment: IntervalAssignment,
    pub variant: Variant,
    pub channel: ChannelModel,
    pub period_us: u64,
    pub trials: u64,
    pub seed: u64,
}

impl DutyExperiment {
    pub fn new(assignment: IntervalAssignment, occupancy: f64, trials: u64, seed: u64) -> Self {
        Self {
            assignment,
            variant: Variant::AFreeBee,
            channel: ChannelModel::with_occupancy(occupancy),
            period_us: DEFAULT_DUTY_PERIOD_US,
            trials,
            seed,
        }
    }
}

/// Fraction of trials in which every sender decoded, at one active fraction.
/// Trial `i` uses the same seed at every fraction and window.
pub fn duty_success_rate(
    e: &DutyExperiment,
    model: &ChannelModel,
    contact_window_s: f64,
    active_fraction: f64,
) -> Result<f64> {
    let setup = TrialSetup {
        assignment: &e.assignment,
        variant: e.variant,
        model,
        rho: 1,
        learn_rows: 0,
        mode: DemuxMode::Plain,
        duty: (active_fraction < 1.0).then_some(DutySpec {
            period_us: e.period_us,
            active_fraction,
        }),
        window_us: Some((contact_window_s * 1e6) as u64),
    };
    let ok = (0..e.trials)
        .into_par_iter()
        .map(|t| {
            run_trial(&setup, derive_seed(e.seed, &[t])).map(|o| o.values().all(|r| !r.is_error()))
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(ok.iter().filter(|&&b| b).count() as f64 / e.trials as f64)
}

/// Binary search for the smallest multiple of [`DUTY_STEP`] at which at
/// least [`SUCCESS_BAR`] of trials decode every sender.
pub fn duty_cycle_experiment(e: &DutyExperiment, contact_window_s: f64) -> Result<f64> {
    let slowest = e
        .assignment
        .entries()
        .values()
        .map(|c| c.fold_period(e.variant) as u64 * c.sample_period_us())
        .max()
        .unwrap_or(0);
    if contact_window_s * 1e6 < 2.0 * slowest as f64 {
        return Err(Error::InvalidConfig(format!(
            "contact window {contact_window_s} s shorter than two fold periods"
        )));
    }
    if e.trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    let model = channel_at(&e.channel, e.channel.occupancy)?;
    let steps = (1.0 / DUTY_STEP).round() as u32;
    let passes = |k: u32| -> Result<bool> {
        let f = (k as f64 * DUTY_STEP).min(1.0);
        Ok(duty_success_rate(e, &model, contact_window_s, f)? >= SUCCESS_BAR)
    };
    if !passes(steps)? {
        return Err(Error::InsufficientContact);
    }
    let (mut lo, mut hi) = (0u32, steps);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if passes(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi as f64 * DUTY_STEP)
}

pub fn write_duty_csv<W: Write>(
    e: &DutyExperiment,
    contact_window_s: f64,
    outcome: &Result<f64>,
    mut out: W,
) -> Result<()> {
    writeln!(
        out,
        "contact_s,senders,variant,occupancy,trials,period_us,min_active_fraction,status"
    )?;
    let (fraction, status) = match outcome {
        Ok(f) => (format!("{f:.3}"), "ok"),
        Err(Error::InsufficientContact) => (String::new(), "insufficient contact"),
        Err(e) => return Err(Error::InvalidConfig(e.to_string())),
    };
    writeln!(
        out,
        "{contact_window_s:.3},{},{},{:.4},{},{},{fraction},{status}",
        e.assignment.len(),
        e.variant,
        e.channel.occupancy,
        e.trials,
        e.period_us
    )?;
    Ok(())
}
