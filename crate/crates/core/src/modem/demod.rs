use super::fold::{argmax_where, fold, FoldSums};
use super::{nearest_shift, IntervalConfig, Symbol, Variant};
use crate::signal::RssiTrace;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Demodulated {
    pub symbol: Symbol,
    /// Peak fold sum over the rows expected to carry a beacon, in `[0, 1]`.
    /// For A-FreeBee this is the weaker of the two streams.
    pub confidence: f64,
    /// Peak column(s): one for FreeBee, two (ascending) for A-FreeBee.
    pub peak_columns: Vec<usize>,
    /// Recovered offset in sample bins before rounding to shift units.
    pub offset_samples: i64,
    pub fold_period: usize,
}

fn ratio(peak: u32, rows: u32) -> f64 {
    if rows == 0 {
        0.0
    } else {
        (peak as f64 / rows as f64).min(1.0)
    }
}

fn expected_rows(f: &FoldSums, column: usize, rho_hint: Option<u32>) -> u32 {
    let observed = f.observed_rows(column);
    match rho_hint {
        Some(r) if r > 0 => observed.min(r),
        _ => observed,
    }
}

/// Column with the largest fold sum at period `λ`: the phase of an
/// unmodulated beacon stream.
pub fn learn_reference(trace: &RssiTrace, cfg: &IntervalConfig) -> Result<usize> {
    let f = fold(trace, cfg.lambda())?;
    if f.is_silent() {
        return Err(Error::NoSignal);
    }
    Ok(f.argmax())
}

/// Synchronous demodulation against a known reference column.
///
/// The trace is folded at `λ`; the peak column's cyclic offset from
/// `reference_position`, mapped into `(−λ/2, λ/2]`, is rounded to the nearest
/// whole shift unit. `rho_hint` caps the number of rows expected to carry a
/// beacon when computing the confidence.
pub fn demodulate_freebee(
    trace: &RssiTrace,
    cfg: &IntervalConfig,
    reference_position: usize,
    rho_hint: Option<u32>,
) -> Result<Demodulated> {
    let lambda = cfg.lambda();
    if reference_position >= lambda {
        return Err(Error::InvalidConfig(format!(
            "reference position {reference_position} outside [0, {lambda})"
        )));
    }
    let f = fold(trace, lambda)?;
    if f.is_silent() {
        return Err(Error::NoSignal);
    }
    let peak = f.argmax();
    let mut offset = ((peak + lambda - reference_position) % lambda) as i64;
    if 2 * offset > lambda as i64 {
        offset -= lambda as i64;
    }
    // Shifts are cyclic modulo x, so an offset that rounds just past the
    // half-period boundary wraps to the opposite end instead of clamping.
    let (lo, _) = cfg.shift_range(Variant::FreeBee);
    let raw = nearest_shift(offset, cfg, i64::MIN, i64::MAX);
    let shift = (raw - lo).rem_euclid(cfg.x as i64) + lo;
    Ok(Demodulated {
        symbol: Symbol {
            shift,
            variant: Variant::FreeBee,
        },
        confidence: ratio(f.sums[peak], expected_rows(&f, peak, rho_hint)),
        peak_columns: vec![peak],
        offset_samples: offset,
        fold_period: lambda,
    })
}

/// Columns closer than this to the strongest peak are treated as part of the
/// same beacon stream when searching for the second stream.
pub(crate) fn stream_guard(cfg: &IntervalConfig) -> usize {
    ((cfg.samples_per_delta() / 2.0).ceil() as usize).saturating_sub(1)
}

fn cyclic_distance(a: usize, b: usize, period: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(period - d)
}

/// Asynchronous demodulation: no reference needed.
///
/// Folds at `2λ`, takes the strongest column, then the strongest column at
/// least one guard distance away (a two-sample beacon footprint spreads over
/// neighbouring columns). The shorter arc between the two is `λ − s·Δ`.
/// Three or more equally strong, well-separated peaks are reported as
/// [`Error::NoSignal`].
pub fn demodulate_afreebee(
    trace: &RssiTrace,
    cfg: &IntervalConfig,
    rho_hint: Option<u32>,
) -> Result<Demodulated> {
    let lambda = cfg.lambda();
    let period = 2 * lambda;
    let f = fold(trace, period)?;
    if f.is_silent() {
        return Err(Error::NoSignal);
    }
    let guard = stream_guard(cfg);
    let first = f.argmax();
    let second = argmax_where(&f.sums, |c| cyclic_distance(c, first, period) > guard)
        .filter(|&c| f.sums[c] > 0)
        .ok_or(Error::NoSignal)?;
    if f.sums[first] == f.sums[second] {
        let third = argmax_where(&f.sums, |c| {
            cyclic_distance(c, first, period) > guard && cyclic_distance(c, second, period) > guard
        });
        if third.is_some_and(|c| f.sums[c] == f.sums[first]) {
            return Err(Error::NoSignal);
        }
    }
    let (c1, c2) = (first.min(second), first.max(second));
    let arc = cyclic_distance(c1, c2, period);
    let offset = (lambda - arc) as i64;
    let (lo, hi) = cfg.shift_range(Variant::AFreeBee);
    let shift = nearest_shift(offset, cfg, lo, hi);
    let confidence = ratio(f.sums[first], expected_rows(&f, first, rho_hint))
        .min(ratio(f.sums[second], expected_rows(&f, second, rho_hint)));
    Ok(Demodulated {
        symbol: Symbol {
            shift,
            variant: Variant::AFreeBee,
        },
        confidence,
        peak_columns: vec![c1, c2],
        offset_samples: offset,
        fold_period: period,
    })
}
