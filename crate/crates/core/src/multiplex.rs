//! Interval multiplexing: coprime interval assignment, concurrent
//! demultiplexing keyed by interval, and successive beacon cancellation.
//!
//! Folding at one sender's period spreads every other sender's beacons over
//! distinct columns as long as the two periods are coprime and the trace is
//! shorter than their least common multiple, so each sender is decoded as if
//! alone. A sender is identified by its interval; no address is transmitted.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::modem::{demodulate_afreebee, demodulate_freebee, Demodulated, IntervalConfig, Variant};
use crate::signal::{RssiTrace, DEFAULT_SAMPLE_PERIOD_US, EDGE_SAMPLES};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SenderId(pub u32);

impl fmt::Display for SenderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for SenderId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        s.trim().parse().map(SenderId)
    }
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

/// Primes in `[lo, hi]` by sieve.
pub fn primes_in(lo: u32, hi: u32) -> Vec<u32> {
    if hi < 2 || lo > hi {
        return Vec::new();
    }
    let n = hi as usize;
    let mut composite = vec![false; n + 1];
    let mut i = 2;
    while i * i <= n {
        if !composite[i] {
            for m in (i * i..=n).step_by(i) {
                composite[m] = true;
            }
        }
        i += 1;
    }
    (lo.max(2)..=hi)
        .filter(|&p| !composite[p as usize])
        .collect()
}

/// Prime-counting estimate of how many senders fit in `[x_min, x_max]`.
pub fn prime_capacity_estimate(x_min: u32, x_max: u32) -> f64 {
    let f = |x: u32| x as f64 / (x as f64).ln();
    f(x_max) - f(x_min)
}

/// Senders and their intervals; the interval multiples are pairwise coprime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalAssignment {
    entries: BTreeMap<SenderId, IntervalConfig>,
}

impl IntervalAssignment {
    pub fn new(entries: BTreeMap<SenderId, IntervalConfig>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidConfig("assignment has no senders".into()));
        }
        let cfgs: Vec<_> = entries.iter().collect();
        for (i, (ida, a)) in cfgs.iter().enumerate() {
            for (idb, b) in &cfgs[i + 1..] {
                if gcd(a.x() as u64, b.x() as u64) != 1 {
                    return Err(Error::InvalidConfig(format!(
                        "senders {ida} (x={}) and {idb} (x={}) share a factor",
                        a.x(),
                        b.x()
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (SenderId, IntervalConfig)>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (id, cfg) in pairs {
            if entries.insert(id, cfg).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate sender id {id}")));
            }
        }
        Self::new(entries)
    }

    pub fn entries(&self) -> &BTreeMap<SenderId, IntervalConfig> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: SenderId) -> Option<&IntervalConfig> {
        self.entries.get(&id)
    }

    pub fn xs(&self) -> Vec<u32> {
        self.entries.values().map(|c| c.x()).collect()
    }

    /// Senders sorted by ascending interval, ids breaking ties.
    pub fn by_ascending_x(&self) -> Vec<(SenderId, IntervalConfig)> {
        let mut v: Vec<_> = self.entries.iter().map(|(&id, &c)| (id, c)).collect();
        v.sort_by_key(|(id, c)| (c.x(), *id));
        v
    }

    pub fn max_lambda(&self) -> usize {
        self.entries.values().map(|c| c.lambda()).max().unwrap_or(0)
    }

    /// Listen-before-talk check: can a newcomer take interval multiple `x`
    /// without breaking orthogonality with the senders already heard?
    pub fn check_conflict(&self, x: u32) -> Result<()> {
        match self
            .entries
            .iter()
            .find(|(_, c)| gcd(c.x() as u64, x as u64) != 1)
        {
            Some((id, c)) => Err(Error::InvalidConfig(format!(
                "x={x} conflicts with sender {id} (x={})",
                c.x()
            ))),
            None => Ok(()),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "sender_id,x,delta_us")?;
        for (id, c) in &self.entries {
            writeln!(out, "{id},{},{}", c.x(), c.delta_us())?;
        }
        Ok(())
    }

    /// Parses `sender_id,x,delta_us` rows (header required). Senders are
    /// sampled at `sample_period_us`.
    pub fn read_csv<R: BufRead>(input: R, sample_period_us: u64) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let parse_err = |line: usize, msg: String| Error::Parse {
            line: line + 1,
            msg,
        };
        match lines.next() {
            Some((_, Ok(h))) if h.trim().replace(' ', "") == "sender_id,x,delta_us" => {}
            Some((i, Ok(h))) => return Err(parse_err(i, format!("unexpected header {h:?}"))),
            Some((_, Err(e))) => return Err(e.into()),
            None => return Err(parse_err(0, "missing header".into())),
        }
        let mut pairs = Vec::new();
        for (i, line) in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(parse_err(
                    i,
                    format!("expected 3 columns, got {}", cols.len()),
                ));
            }
            let id: SenderId = cols[0]
                .parse()
                .map_err(|e| parse_err(i, format!("sender_id: {e}")))?;
            let x: u32 = cols[1]
                .parse()
                .map_err(|e| parse_err(i, format!("x: {e}")))?;
            let delta: u64 = cols[2]
                .parse()
                .map_err(|e| parse_err(i, format!("delta_us: {e}")))?;
            pairs.push((id, IntervalConfig::new(delta, x, sample_period_us)?));
        }
        Self::from_pairs(pairs)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f), DEFAULT_SAMPLE_PERIOD_US)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

/// The `n` smallest primes in `[x_min, x_max]`, all sharing `base`'s shift
/// unit and sample period. Sender ids are `0..n` in ascending interval order.
pub fn assign_intervals(
    n: usize,
    x_min: u32,
    x_max: u32,
    base: &IntervalConfig,
) -> Result<IntervalAssignment> {
    if n == 0 || x_min < 2 {
        return Err(Error::InvalidConfig(format!(
            "need n >= 1 and x_min >= 2, got n={n}, x_min={x_min}"
        )));
    }
    let primes = primes_in(x_min, x_max);
    if primes.len() < n {
        return Err(Error::Capacity {
            requested: n,
            available: primes.len(),
        });
    }
    let pairs = primes[..n]
        .iter()
        .enumerate()
        .map(|(i, &p)| Ok((SenderId(i as u32), base.with_x(p)?)))
        .collect::<Result<Vec<_>>>()?;
    IntervalAssignment::from_pairs(pairs)
}

/// Whether folding any one interval of `xs` keeps every other sender's
/// fold sum at most 1: all pairs coprime and the trace shorter than each
/// pair's least common period in samples.
pub fn verify_orthogonality(
    xs: &[u32],
    trace_len_samples: usize,
    cfg_common: &IntervalConfig,
) -> bool {
    let lambdas: Option<Vec<u64>> = xs
        .iter()
        .map(|&x| cfg_common.with_x(x).ok().map(|c| c.lambda() as u64))
        .collect();
    let Some(lambdas) = lambdas else {
        return false;
    };
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            if gcd(xs[i] as u64, xs[j] as u64) != 1
                || trace_len_samples as u64 >= lcm(lambdas[i], lambdas[j])
            {
                return false;
            }
        }
    }
    true
}

/// Zeroes the beacon footprint (the peak column and the sample after it) in
/// every row of the trace folded at `period`. `rho` limits cancellation to the
/// first `rho` rows.
pub fn cancel_beacons(
    trace: &RssiTrace,
    period: usize,
    peak_column: usize,
    rho: Option<u32>,
) -> RssiTrace {
    let limit = rho.map_or(usize::MAX, |r| r as usize * period);
    trace.map_samples(|i, s| {
        let d = (i % period + period - peak_column) % period;
        if i >= peak_column && i < limit && d < EDGE_SAMPLES {
            0
        } else {
            s
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemuxMode {
    /// Every sender folded independently over the same trace.
    Plain,
    /// Senders decoded by ascending interval, each one's beacons removed
    /// before the next fold.
    Cancelling,
}

/// What the receiver knows about the senders it listens to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Receiver {
    /// Synchronous senders with learned reference columns.
    FreeBee {
        references: BTreeMap<SenderId, usize>,
    },
    AFreeBee,
}

impl Receiver {
    pub fn variant(&self) -> Variant {
        match self {
            Receiver::FreeBee { .. } => Variant::FreeBee,
            Receiver::AFreeBee => Variant::AFreeBee,
        }
    }

    fn decode(&self, trace: &RssiTrace, id: SenderId, cfg: &IntervalConfig) -> Result<Demodulated> {
        match self {
            Receiver::FreeBee { references } => {
                let r = *references.get(&id).ok_or_else(|| {
                    Error::InvalidConfig(format!("no reference column for sender {id}"))
                })?;
                demodulate_freebee(trace, cfg, r, None)
            }
            Receiver::AFreeBee => demodulate_afreebee(trace, cfg, None),
        }
    }
}

pub type DemuxResult = BTreeMap<SenderId, Result<Demodulated>>;

/// Decodes every sender in `assignment` from one trace. Failures are kept
/// per sender rather than aborting the others.
pub fn demux(
    trace: &RssiTrace,
    assignment: &IntervalAssignment,
    receiver: &Receiver,
    mode: DemuxMode,
) -> DemuxResult {
    match mode {
        DemuxMode::Plain => assignment
            .entries()
            .par_iter()
            .map(|(&id, cfg)| (id, receiver.decode(trace, id, cfg)))
            .collect(),
        DemuxMode::Cancelling => {
            let mut residual = trace.clone();
            let mut out = BTreeMap::new();
            for (id, cfg) in assignment.by_ascending_x() {
                let r = receiver.decode(&residual, id, &cfg);
                if let Ok(d) = &r {
                    for &c in &d.peak_columns {
                        residual = cancel_beacons(&residual, d.fold_period, c, None);
                    }
                }
                out.insert(id, r);
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::{fold, Symbol};

    fn unit(x: u32) -> IntervalConfig {
        IntervalConfig::new(1, x, 1).unwrap()
    }

    #[test]
    fn smallest_primes() {
        let a = assign_intervals(2, 3, 10, &unit(2)).unwrap();
        assert_eq!(a.xs(), vec![3, 5]);
        assert_eq!(primes_in(53, 149).len(), 20);
        let wifi = IntervalConfig::wifi(2).unwrap();
        let five = assign_intervals(5, 89, 110, &wifi).unwrap();
        assert_eq!(five.xs(), vec![89, 97, 101, 103, 107]);
    }

    #[test]
    fn capacity_error_reports_available() {
        match assign_intervals(5, 3, 10, &unit(2)) {
            Err(Error::Capacity {
                requested: 5,
                available: 3,
            }) => {}
            other => panic!("{other:?}"),
        }
        assert!(assign_intervals(1, 1, 10, &unit(2)).is_err());
    }

    #[test]
    fn capacity_estimate_is_close() {
        let est = prime_capacity_estimate(53, 149);
        assert!((est - 20.0).abs() < 5.0, "{est}");
    }

    #[test]
    fn orthogonality_cases() {
        let c = unit(2);
        assert!(verify_orthogonality(&[3, 5], 14, &c));
        assert!(!verify_orthogonality(&[3, 5], 15, &c));
        assert!(!verify_orthogonality(&[2, 4], 3, &c));
    }

    #[test]
    fn non_coprime_assignment_rejected() {
        let r = IntervalAssignment::from_pairs([(SenderId(0), unit(4)), (SenderId(1), unit(6))]);
        assert!(r.is_err());
        let a = IntervalAssignment::from_pairs([(SenderId(0), unit(3))]).unwrap();
        assert!(a.check_conflict(9).is_err());
        assert!(a.check_conflict(4).is_ok());
    }

    #[test]
    fn csv_round_trip() {
        let a = assign_intervals(3, 89, 200, &IntervalConfig::wifi(2).unwrap()).unwrap();
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "sender_id,x,delta_us\n0,89,1024\n1,97,1024\n2,101,1024\n"
        );
        let b = IntervalAssignment::read_csv(buf.as_slice(), 128).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_errors_name_line() {
        let bad = "sender_id,x,delta_us\n0,3,1\n1,five,1\n";
        match IntervalAssignment::read_csv(bad.as_bytes(), 1) {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(IntervalAssignment::read_csv("x,y\n".as_bytes(), 1).is_err());
    }

    #[test]
    fn cancel_single_sender_clears_trace() {
        let ones: Vec<usize> = (0..6).flat_map(|r| [r * 7 + 2, r * 7 + 3]).collect();
        let t = RssiTrace::from_ones(42, &ones, 1).unwrap();
        let c = cancel_beacons(&t, 7, 2, None);
        assert_eq!(c.busy_count(), 0);
        assert_eq!(t.busy_count(), 12);
    }

    #[test]
    fn cancel_wraps_last_column() {
        let t = RssiTrace::from_ones(10, &[4, 5, 9], 1).unwrap();
        let c = cancel_beacons(&t, 5, 4, None);
        // column 4 and column 0 of the following row
        assert_eq!(c.samples(), &[0, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
        let z = RssiTrace::new(vec![0; 10], 1, 0).unwrap();
        assert_eq!(cancel_beacons(&z, 5, 1, None), z);
    }

    #[test]
    fn cancel_respects_row_limit() {
        let t = RssiTrace::from_ones(12, &[1, 5, 9], 1).unwrap();
        let c = cancel_beacons(&t, 4, 1, Some(2));
        assert_eq!(c.samples()[9], 1);
        assert_eq!(c.busy_count(), 1);
    }

    fn two_sender_trace(s3: usize, s5: usize, len: usize) -> RssiTrace {
        let mut ones: Vec<usize> = (0..len).filter(|i| i % 3 == s3).collect();
        ones.extend((0..len).filter(|i| i % 5 == s5));
        ones.sort();
        ones.dedup();
        RssiTrace::from_ones(len, &ones, 1).unwrap()
    }

    /// Two-sample beacons at `phase` every `period` samples.
    fn stream(period: usize, phase: usize, len: usize) -> Vec<usize> {
        (0..len)
            .filter(|i| (i + period - phase) % period < 2)
            .filter(|&i| i >= phase)
            .collect()
    }

    #[test]
    fn two_noiseless_senders_recovered() {
        let a = IntervalAssignment::from_pairs([(SenderId(0), unit(3)), (SenderId(1), unit(5))])
            .unwrap();
        let t = two_sender_trace(1, 3, 14);
        let rx = Receiver::FreeBee {
            references: [(SenderId(0), 0), (SenderId(1), 0)].into(),
        };
        for mode in [DemuxMode::Plain, DemuxMode::Cancelling] {
            let out = demux(&t, &a, &rx, mode);
            assert_eq!(out[&SenderId(0)].as_ref().unwrap().symbol.shift(), 1);
            assert_eq!(out[&SenderId(1)].as_ref().unwrap().symbol.shift(), -2);
        }
    }

    #[test]
    fn cancellation_matches_sender_alone() {
        let len = 76;
        for a in 0..7 {
            for b in 0..11 {
                let mut ones = stream(7, a, len);
                ones.extend(stream(11, b, len));
                ones.sort();
                ones.dedup();
                let both = RssiTrace::from_ones(len, &ones, 1).unwrap();
                let cancelled = cancel_beacons(&both, 7, a, None);
                let alone = RssiTrace::from_ones(len, &stream(11, b, len), 1).unwrap();
                let (fc, fa) = (fold(&cancelled, 11).unwrap(), fold(&alone, 11).unwrap());
                // each of sender 1's two footprint columns lands on a given
                // period-11 column at most once, so the peak loses at most 2
                // and stays inside sender 2's own two-column footprint
                let (pc, pa) = (fc.argmax(), fa.argmax());
                assert!(pc == pa || pc == (pa + 1) % 11, "a={a} b={b}");
                assert!(fc.sums[pc] + 2 >= fa.sums[pa]);
            }
        }
    }

    #[test]
    fn single_sender_demux_equals_demodulate() {
        let cfg = unit(7);
        let a = IntervalAssignment::from_pairs([(SenderId(4), cfg)]).unwrap();
        let t = RssiTrace::from_ones(28, &[3, 10, 17, 24], 1).unwrap();
        let rx = Receiver::FreeBee {
            references: [(SenderId(4), 1)].into(),
        };
        let out = demux(&t, &a, &rx, DemuxMode::Plain);
        assert_eq!(
            out[&SenderId(4)].as_ref().unwrap(),
            &demodulate_freebee(&t, &cfg, 1, None).unwrap()
        );
        assert_eq!(out.keys().copied().collect::<Vec<_>>(), vec![SenderId(4)]);
        let _ = Symbol::freebee(2, &cfg).unwrap();
    }

    #[test]
    fn missing_reference_is_per_sender_error() {
        let a = IntervalAssignment::from_pairs([(SenderId(0), unit(3)), (SenderId(1), unit(5))])
            .unwrap();
        let t = two_sender_trace(0, 0, 14);
        let rx = Receiver::FreeBee {
            references: [(SenderId(0), 0)].into(),
        };
        let out = demux(&t, &a, &rx, DemuxMode::Plain);
        assert!(out[&SenderId(0)].is_ok());
        assert!(out[&SenderId(1)].is_err());
    }
}
