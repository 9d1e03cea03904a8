use crate::signal::RssiTrace;
use crate::{Error, Result};

/// Column-wise sums of a trace cut into rows of `period` samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSums {
    pub sums: Vec<u32>,
    pub period: usize,
    pub rows: usize,
    /// Per-column count of rows in which the receiver was awake, for
    /// duty-cycled traces.
    pub awake_rows: Option<Vec<u32>>,
}

impl FoldSums {
    pub fn total(&self) -> u64 {
        self.sums.iter().map(|&s| s as u64).sum()
    }

    pub fn is_silent(&self) -> bool {
        self.sums.iter().all(|&s| s == 0)
    }

    /// Largest column, smallest index on ties.
    pub fn argmax(&self) -> usize {
        argmax_where(&self.sums, |_| true).unwrap_or(0)
    }

    /// Rows that could have contributed at column `c`.
    pub fn observed_rows(&self, c: usize) -> u32 {
        match &self.awake_rows {
            Some(a) => a[c],
            None => self.rows as u32,
        }
    }
}

pub(crate) fn argmax_where(sums: &[u32], keep: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (c, &v) in sums.iter().enumerate() {
        if keep(c) && best.is_none_or(|b| v > sums[b]) {
            best = Some(c);
        }
    }
    best
}

/// Folds the longest whole-row prefix of `trace` at `period`.
pub fn fold(trace: &RssiTrace, period: usize) -> Result<FoldSums> {
    if period < 2 {
        return Err(Error::InvalidConfig(format!("fold period {period} < 2")));
    }
    if trace.len() < period {
        return Err(Error::TraceTooShort {
            len: trace.len(),
            needed: period,
        });
    }
    let rows = trace.len() / period;
    let used = rows * period;
    let mut sums = vec![0u32; period];
    for row in trace.samples()[..used].chunks_exact(period) {
        for (acc, &s) in sums.iter_mut().zip(row) {
            *acc += s as u32;
        }
    }
    let awake_rows = trace.awake().map(|mask| {
        let mut counts = vec![0u32; period];
        for row in mask[..used].chunks_exact(period) {
            for (acc, &a) in counts.iter_mut().zip(row) {
                *acc += a as u32;
            }
        }
        counts
    });
    Ok(FoldSums {
        sums,
        period,
        rows,
        awake_rows,
    })
}
