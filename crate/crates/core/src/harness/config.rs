//! Flat `key=value` experiment files and the sweep configuration.
//!
//! Keys mirror the CLI flag names (`delta-us`, `trials`, …); underscores and
//! dashes are interchangeable. Blank lines and lines starting with `#` are
//! skipped.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::channel::{AccessDelay, ChannelModel};
use crate::modem::{IntervalConfig, Variant};
use crate::signal::DEFAULT_SAMPLE_PERIOD_US;
use crate::{Error, Result};

/// Default number of unmodulated intervals used to learn a reference column.
/// Learning happens once at setup, so it is not limited to the per-symbol `ρ`.
pub const DEFAULT_LEARN_ROWS: u32 = 20;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyValues {
    map: BTreeMap<String, (usize, String)>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-")
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected key=value, got {line:?}"),
            })?;
            map.insert(normalize(k), (i + 1, v.trim().to_string()));
        }
        Ok(Self { map })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(&normalize(key)).map(|(_, v)| v.as_str())
    }

    /// Parsed value of `key`, if present.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.map.get(&normalize(key)) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|e| Error::Parse {
                line: *line,
                msg: format!("{key}: {e}"),
            }),
        }
    }

    /// `flag` if given, else the file value, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        Ok(match flag {
            Some(v) => v,
            None => self.get(key)?.unwrap_or(default),
        })
    }

    /// Like [`pick`](Self::pick) but the value must come from somewhere.
    pub fn require<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => self
                .get(key)?
                .ok_or_else(|| Error::InvalidConfig(format!("missing required setting {key}"))),
        }
    }
}

/// Inclusive range of repetition counts, written `a..b` or `a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RhoRange {
    pub start: u32,
    pub end: u32,
}

impl RhoRange {
    pub fn new(start: u32, end: u32) -> Result<Self> {
        if start == 0 || end < start {
            return Err(Error::InvalidConfig(format!(
                "bad rho range {start}..{end}"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> {
        self.start..=self.end
    }
}

impl FromStr for RhoRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |_| Error::InvalidConfig(format!("bad rho range {s:?}"));
        match s.split_once("..") {
            Some((a, b)) => Self::new(
                a.trim().parse().map_err(bad)?,
                b.trim().trim_start_matches('=').parse().map_err(bad)?,
            ),
            None => {
                let v = s.trim().parse().map_err(bad)?;
                Self::new(v, v)
            }
        }
    }
}

/// Comma-separated list of floats.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatList(pub Vec<f64>);

impl FromStr for FloatList {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidConfig(format!("bad number {p:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if v.is_empty() {
            return Err(Error::InvalidConfig("empty list".into()));
        }
        Ok(Self(v))
    }
}

/// One SER sweep: a grid of repetition counts × occupancies.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub variant: Variant,
    pub interval: IntervalConfig,
    pub rho: RhoRange,
    pub occupancies: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    /// Template for the channel; its occupancy is replaced per grid point.
    pub channel: ChannelModel,
    /// Unmodulated intervals observed to learn the FreeBee reference column;
    /// 0 hands the receiver the true reference.
    pub learn_rows: u32,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(
        variant: Variant,
        interval: IntervalConfig,
        rho: RhoRange,
        occupancies: Vec<f64>,
        trials: u64,
        seed: u64,
    ) -> Result<Self> {
        let c = Self {
            variant,
            interval,
            rho,
            occupancies,
            trials,
            seed,
            channel: ChannelModel::default(),
            learn_rows: DEFAULT_LEARN_ROWS,
            out: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.occupancies.is_empty() {
            return Err(Error::InvalidConfig("no occupancy values".into()));
        }
        for &b in &self.occupancies {
            self.channel.at_occupancy(b).validate()?;
        }
        RhoRange::new(self.rho.start, self.rho.end)?;
        Ok(())
    }

    /// Builds a sweep from a key=value file with optional overrides already
    /// merged in by the caller.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let variant: Variant = kv.pick(None, "variant", Variant::FreeBee)?;
        let x: u32 = kv.require(None, "x")?;
        let delta: u64 = kv.require(None, "delta-us")?;
        let sp: u64 = kv.pick(None, "sample-period-us", DEFAULT_SAMPLE_PERIOD_US)?;
        let rho: RhoRange = kv.pick(None, "rho", RhoRange::new(5, 5)?)?;
        let occ: FloatList = kv.pick(None, "occupancy", FloatList(vec![0.3]))?;
        let trials: u64 = kv.pick(None, "trials", 1000)?;
        let seed: u64 = kv.pick(None, "seed", 0)?;
        let mut c = Self::new(
            variant,
            IntervalConfig::new(delta, x, sp)?,
            rho,
            occ.0,
            trials,
            seed,
        )?;
        c.channel.sample_period_us = sp;
        if let Some(p) = kv.get::<f64>("p-fast")? {
            c.channel.access_delay = AccessDelay::TwoPiece { p_fast: p };
        }
        if let Some(b) = kv.get::<u64>("backoff-us")? {
            c.channel.backoff_extra_max_us = b;
        }
        c.learn_rows = kv.pick(None, "learn-rows", DEFAULT_LEARN_ROWS)?;
        c.out = kv.raw("out").map(PathBuf::from);
        c.validate()?;
        Ok(c)
    }
}
