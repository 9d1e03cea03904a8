//! Binary RSSI traces.
//!
//! A receiver records channel energy at a fixed sample period and quantizes each
//! reading to busy (1) or idle (0). Everything downstream consumes only these
//! binaries.

mod trace_file;

pub use trace_file::{load_trace, read_trace, save_trace, write_trace, TRACE_MAGIC};

use crate::{Error, Result};

/// Sample period of an 802.15.4 RSSI register read (7.8 kHz sampling).
pub const DEFAULT_SAMPLE_PERIOD_US: u64 = 128;

/// Energy-detection threshold of the 802.15.4 CCA.
pub const DEFAULT_THRESHOLD_DBM: f64 = -75.0;

/// Number of leading samples of a busy run kept by [`packet_edge_filter`].
pub const EDGE_SAMPLES: usize = 2;

/// Fixed-rate binary channel-occupancy samples.
///
/// `awake` is present only for duty-cycled renders: `awake[i] == false` marks a
/// sample taken while the receiver radio was off. Such samples are stored as 0
/// so indices stay aligned with absolute time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RssiTrace {
    samples: Vec<u8>,
    sample_period_us: u64,
    origin_time_us: u64,
    awake: Option<Vec<bool>>,
}

impl RssiTrace {
    pub fn new(samples: Vec<u8>, sample_period_us: u64, origin_time_us: u64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyTrace);
        }
        if sample_period_us == 0 {
            return Err(Error::InvalidConfig(
                "sample period must be positive".into(),
            ));
        }
        if let Some(i) = samples.iter().position(|&s| s > 1) {
            return Err(Error::InvalidConfig(format!(
                "sample {i} has value {}, expected 0 or 1",
                samples[i]
            )));
        }
        Ok(Self {
            samples,
            sample_period_us,
            origin_time_us,
            awake: None,
        })
    }

    /// Builds a trace with the default 128 us sample period from booleans.
    pub fn from_bools(bits: &[bool]) -> Result<Self> {
        Self::new(
            bits.iter().map(|&b| b as u8).collect(),
            DEFAULT_SAMPLE_PERIOD_US,
            0,
        )
    }

    /// Trace of `len` samples with 1s at the given indices.
    pub fn from_ones(len: usize, ones: &[usize], sample_period_us: u64) -> Result<Self> {
        let mut samples = vec![0u8; len];
        for &i in ones {
            if i >= len {
                return Err(Error::InvalidConfig(format!(
                    "index {i} beyond length {len}"
                )));
            }
            samples[i] = 1;
        }
        Self::new(samples, sample_period_us, 0)
    }

    /// Attaches a receiver-awake mask. Samples where the receiver sleeps are forced to 0.
    pub fn with_awake_mask(mut self, awake: Vec<bool>) -> Result<Self> {
        if awake.len() != self.samples.len() {
            return Err(Error::InvalidConfig(format!(
                "awake mask has {} entries, trace has {}",
                awake.len(),
                self.samples.len()
            )));
        }
        for (s, &a) in self.samples.iter_mut().zip(&awake) {
            if !a {
                *s = 0;
            }
        }
        self.awake = Some(awake);
        Ok(self)
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_period_us(&self) -> u64 {
        self.sample_period_us
    }

    pub fn origin_time_us(&self) -> u64 {
        self.origin_time_us
    }

    pub fn awake(&self) -> Option<&[bool]> {
        self.awake.as_deref()
    }

    pub fn busy_count(&self) -> usize {
        self.samples.iter().filter(|&&s| s == 1).count()
    }

    pub fn busy_fraction(&self) -> f64 {
        self.busy_count() as f64 / self.samples.len() as f64
    }

    /// Absolute time of sample `index`.
    pub fn time_of(&self, index: usize) -> u64 {
        self.origin_time_us + index as u64 * self.sample_period_us
    }

    /// Sub-trace `[start, start + len)` with the origin moved accordingly.
    pub fn window(&self, start: usize, len: usize) -> Result<Self> {
        let end = start
            .checked_add(len)
            .filter(|&e| e <= self.samples.len())
            .ok_or(Error::TraceTooShort {
                len: self.samples.len(),
                needed: start.saturating_add(len),
            })?;
        let mut out = Self::new(
            self.samples[start..end].to_vec(),
            self.sample_period_us,
            self.time_of(start),
        )?;
        out.awake = self.awake.as_ref().map(|a| a[start..end].to_vec());
        Ok(out)
    }

    /// Same trace with sample `i` replaced by `f(i, sample)`. Used by cancellation.
    pub(crate) fn map_samples(&self, mut f: impl FnMut(usize, u8) -> u8) -> Self {
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, &s)| f(i, s) & 1)
            .collect();
        Self {
            samples,
            sample_period_us: self.sample_period_us,
            origin_time_us: self.origin_time_us,
            awake: self.awake.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerConfig {
    pub threshold_dbm: f64,
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        Self {
            threshold_dbm: DEFAULT_THRESHOLD_DBM,
        }
    }
}

/// Quantizes dBm readings to busy/idle. A reading exactly at the threshold is busy.
///
/// The result uses the default 128 us sample period and origin 0; use
/// [`RssiTrace::new`] on the samples to retime.
pub fn quantize(power_dbm: &[f64], cfg: &QuantizerConfig) -> Result<RssiTrace> {
    if power_dbm.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if !cfg.threshold_dbm.is_finite() {
        return Err(Error::InvalidConfig("threshold must be finite".into()));
    }
    let samples = power_dbm
        .iter()
        .map(|&p| (p >= cfg.threshold_dbm) as u8)
        .collect();
    RssiTrace::new(samples, DEFAULT_SAMPLE_PERIOD_US, 0)
}

/// Keeps only the first [`EDGE_SAMPLES`] samples of every busy run.
///
/// Data packets are much longer than beacons, so truncating every run to its
/// leading edge removes most background energy while a beacon's own footprint
/// survives intact. A run touching index 0 is treated as starting there.
pub fn packet_edge_filter(trace: &RssiTrace) -> RssiTrace {
    let mut run = 0usize;
    trace.map_samples(|_, s| {
        if s == 1 {
            run += 1;
            (run <= EDGE_SAMPLES) as u8
        } else {
            run = 0;
            0
        }
    })
}
