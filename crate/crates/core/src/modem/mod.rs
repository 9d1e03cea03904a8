//! Beacon-timing modulation and fold-based demodulation.
//!
//! Two variants share the machinery:
//!
//! * **FreeBee** (synchronous): every beacon of a symbol is shifted by `s·Δ`
//!   from its reference position. The receiver folds at the interval `λ` and
//!   compares the peak column against a previously learned reference column.
//! * **A-FreeBee** (asynchronous): every other beacon is shifted, producing two
//!   interleaved streams of period `2T`. The receiver folds at `2λ` and reads
//!   the symbol from the distance between the two strongest columns.

mod bits;
mod demod;
mod fold;
mod modulate;
mod rate;

pub use bits::{bit_width, bits_to_symbol, symbol_to_bits};
pub use demod::{demodulate_afreebee, demodulate_freebee, learn_reference, Demodulated};
pub use fold::{fold, FoldSums};
pub use modulate::{modulate, modulate_afreebee, modulate_freebee, BeaconSchedule};
pub use rate::{bit_rate, BitsPerSymbol};

use crate::signal::DEFAULT_SAMPLE_PERIOD_US;
use crate::{Error, Result};

/// 802.11 TBTT granularity.
pub const WIFI_DELTA_US: u64 = 1024;
/// 802.15.4 beacon-order unit.
pub const ZIGBEE_DELTA_US: u64 = 15_360;
/// Bluetooth advertising slot.
pub const BLUETOOTH_DELTA_US: u64 = 625;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    FreeBee,
    AFreeBee,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::FreeBee => "freebee",
            Variant::AFreeBee => "afreebee",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "freebee" => Ok(Variant::FreeBee),
            "afreebee" | "a-freebee" => Ok(Variant::AFreeBee),
            other => Err(Error::InvalidConfig(format!("unknown variant `{other}`"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A sender's timing parameters: interval `T = x·Δ`, sampled by the receiver
/// every `sample_period_us`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IntervalConfig {
    delta_us: u64,
    x: u32,
    sample_period_us: u64,
}

impl IntervalConfig {
    pub fn new(delta_us: u64, x: u32, sample_period_us: u64) -> Result<Self> {
        if x < 2 {
            return Err(Error::InvalidConfig(format!("interval multiple {x} < 2")));
        }
        if delta_us == 0 || sample_period_us == 0 {
            return Err(Error::InvalidConfig(
                "shift unit and sample period must be positive".into(),
            ));
        }
        let cfg = Self {
            delta_us,
            x,
            sample_period_us,
        };
        if cfg.lambda() < 2 {
            return Err(Error::InvalidConfig(format!(
                "interval {} us spans fewer than 2 samples",
                cfg.interval_us()
            )));
        }
        Ok(cfg)
    }

    pub fn wifi(x: u32) -> Result<Self> {
        Self::new(WIFI_DELTA_US, x, DEFAULT_SAMPLE_PERIOD_US)
    }

    pub fn zigbee(x: u32) -> Result<Self> {
        Self::new(ZIGBEE_DELTA_US, x, DEFAULT_SAMPLE_PERIOD_US)
    }

    pub fn bluetooth(x: u32) -> Result<Self> {
        Self::new(BLUETOOTH_DELTA_US, x, DEFAULT_SAMPLE_PERIOD_US)
    }

    pub fn delta_us(&self) -> u64 {
        self.delta_us
    }

    pub fn x(&self) -> u32 {
        self.x
    }

    pub fn sample_period_us(&self) -> u64 {
        self.sample_period_us
    }

    pub fn interval_us(&self) -> u64 {
        self.x as u64 * self.delta_us
    }

    pub fn interval_s(&self) -> f64 {
        self.interval_us() as f64 * 1e-6
    }

    /// Sample bins per interval, `round(T / sample_period)` (half rounds up).
    pub fn lambda(&self) -> usize {
        ((2 * self.interval_us() + self.sample_period_us) / (2 * self.sample_period_us)) as usize
    }

    pub fn samples_per_delta(&self) -> f64 {
        self.delta_us as f64 / self.sample_period_us as f64
    }

    /// Inclusive shift range for `variant`.
    pub fn shift_range(&self, variant: Variant) -> (i64, i64) {
        let x = self.x as i64;
        match variant {
            Variant::FreeBee => (-((x - 1) / 2), x / 2),
            Variant::AFreeBee => (0, x - 1),
        }
    }

    /// Fold period used to demodulate `variant`.
    pub fn fold_period(&self, variant: Variant) -> usize {
        match variant {
            Variant::FreeBee => self.lambda(),
            Variant::AFreeBee => 2 * self.lambda(),
        }
    }

    /// Same timing with a different interval multiple.
    pub fn with_x(&self, x: u32) -> Result<Self> {
        Self::new(self.delta_us, x, self.sample_period_us)
    }

    /// Every valid symbol of `variant`, in ascending shift order.
    pub fn symbols(&self, variant: Variant) -> impl Iterator<Item = Symbol> {
        let (lo, hi) = self.shift_range(variant);
        (lo..=hi).map(move |shift| Symbol { shift, variant })
    }
}

/// An integer beacon shift, in shift units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Symbol {
    shift: i64,
    variant: Variant,
}

impl Symbol {
    pub fn new(shift: i64, variant: Variant, cfg: &IntervalConfig) -> Result<Self> {
        let (min, max) = cfg.shift_range(variant);
        if shift < min || shift > max {
            return Err(Error::SymbolOutOfRange { shift, min, max });
        }
        Ok(Self { shift, variant })
    }

    pub fn freebee(shift: i64, cfg: &IntervalConfig) -> Result<Self> {
        Self::new(shift, Variant::FreeBee, cfg)
    }

    pub fn afreebee(shift: i64, cfg: &IntervalConfig) -> Result<Self> {
        Self::new(shift, Variant::AFreeBee, cfg)
    }

    pub fn shift(&self) -> i64 {
        self.shift
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }
}

/// Nearest shift in `[lo, hi]` to an offset of `offset_samples` bins.
/// Ties go to the smaller magnitude.
fn nearest_shift(offset_samples: i64, cfg: &IntervalConfig, lo: i64, hi: i64) -> i64 {
    let offset_us = offset_samples * cfg.sample_period_us as i64;
    let delta = cfg.delta_us as i64;
    let below = offset_us.div_euclid(delta);
    let above = below + 1;
    let err = |s: i64| (offset_us - s * delta).abs();
    let best = match err(below).cmp(&err(above)) {
        std::cmp::Ordering::Less => below,
        std::cmp::Ordering::Greater => above,
        std::cmp::Ordering::Equal => {
            if below.abs() <= above.abs() {
                below
            } else {
                above
            }
        }
    };
    best.clamp(lo, hi)
}
