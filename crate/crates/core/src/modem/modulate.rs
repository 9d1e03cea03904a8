use super::{IntervalConfig, Symbol, Variant};
use crate::{Error, Result};

/// Default on-air time of one beacon: two receiver samples.
pub const DEFAULT_BEACON_DURATION_US: u64 = 256;

/// Ideal beacon emission times, before any channel-access delay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeaconSchedule {
    times_us: Vec<u64>,
    beacon_duration_us: u64,
}

impl BeaconSchedule {
    pub fn new(times_us: Vec<u64>, beacon_duration_us: u64) -> Result<Self> {
        if beacon_duration_us == 0 {
            return Err(Error::InvalidConfig(
                "beacon duration must be positive".into(),
            ));
        }
        if times_us.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "beacon times must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            times_us,
            beacon_duration_us,
        })
    }

    pub fn times_us(&self) -> &[u64] {
        &self.times_us
    }

    pub fn beacon_duration_us(&self) -> u64 {
        self.beacon_duration_us
    }

    pub fn with_beacon_duration(mut self, duration_us: u64) -> Result<Self> {
        if duration_us == 0 {
            return Err(Error::InvalidConfig(
                "beacon duration must be positive".into(),
            ));
        }
        self.beacon_duration_us = duration_us;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.times_us.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_us.is_empty()
    }

    pub fn last_time_us(&self) -> Option<u64> {
        self.times_us.last().copied()
    }

    /// Mean gap between consecutive emissions.
    pub fn mean_gap_us(&self) -> Option<f64> {
        match (self.times_us.first(), self.times_us.last()) {
            (Some(a), Some(b)) if self.times_us.len() > 1 => {
                Some((b - a) as f64 / (self.times_us.len() - 1) as f64)
            }
            _ => None,
        }
    }
}

fn check(sym: &Symbol, cfg: &IntervalConfig, variant: Variant, rho: u32) -> Result<()> {
    if rho == 0 {
        return Err(Error::InvalidConfig(
            "repetition count must be at least 1".into(),
        ));
    }
    if sym.variant() != variant {
        return Err(Error::InvalidConfig(format!(
            "{} symbol passed to {} modulator",
            sym.variant(),
            variant
        )));
    }
    // re-validate against this cfg: the symbol may have been built for another x
    Symbol::new(sym.shift(), variant, cfg).map(|_| ())
}

/// `rho` beacons at `reference + k·T + s·Δ`, `k = 1..=rho`.
pub fn modulate_freebee(
    reference_time_us: u64,
    cfg: &IntervalConfig,
    sym: Symbol,
    rho: u32,
) -> Result<BeaconSchedule> {
    check(&sym, cfg, Variant::FreeBee, rho)?;
    let t = cfg.interval_us() as i64;
    let shift = sym.shift() * cfg.delta_us() as i64;
    let times = (1..=rho as i64)
        .map(|k| (reference_time_us as i64 + k * t + shift) as u64)
        .collect();
    BeaconSchedule::new(times, DEFAULT_BEACON_DURATION_US)
}

/// `rho` pairs: a base stream at `reference + k·2T` and a shifted stream at
/// `reference + k·2T + T − s·Δ`, `k = 0..rho`.
pub fn modulate_afreebee(
    reference_time_us: u64,
    cfg: &IntervalConfig,
    sym: Symbol,
    rho: u32,
) -> Result<BeaconSchedule> {
    check(&sym, cfg, Variant::AFreeBee, rho)?;
    let t = cfg.interval_us();
    let offset = t - sym.shift() as u64 * cfg.delta_us();
    let mut times = Vec::with_capacity(2 * rho as usize);
    for k in 0..rho as u64 {
        let base = reference_time_us + k * 2 * t;
        times.push(base);
        times.push(base + offset);
    }
    BeaconSchedule::new(times, DEFAULT_BEACON_DURATION_US)
}

/// Dispatches on the symbol's variant.
pub fn modulate(
    reference_time_us: u64,
    cfg: &IntervalConfig,
    sym: Symbol,
    rho: u32,
) -> Result<BeaconSchedule> {
    match sym.variant() {
        Variant::FreeBee => modulate_freebee(reference_time_us, cfg, sym, rho),
        Variant::AFreeBee => modulate_afreebee(reference_time_us, cfg, sym, rho),
    }
}
