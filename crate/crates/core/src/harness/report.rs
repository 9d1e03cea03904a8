//! Analytic throughput and receiver-overhead reports.

use std::io::Write;

use crate::modem::{bit_rate, BitsPerSymbol, IntervalConfig, Variant};
use crate::multiplex::{IntervalAssignment, SenderId};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThroughputMode {
    PerSender,
    /// Per-sender rows followed by their sum.
    Aggregated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputRow {
    /// `None` for the aggregate row.
    pub sender: Option<SenderId>,
    pub x: Option<u32>,
    pub delta_us: Option<u64>,
    pub rate_exact_bps: f64,
    pub rate_floor_bps: f64,
}

pub fn throughput_report(
    assignment: &IntervalAssignment,
    rho: u32,
    variant: Variant,
    mode: ThroughputMode,
) -> Result<Vec<ThroughputRow>> {
    let mut rows = Vec::with_capacity(assignment.len() + 1);
    for (&id, cfg) in assignment.entries() {
        rows.push(ThroughputRow {
            sender: Some(id),
            x: Some(cfg.x()),
            delta_us: Some(cfg.delta_us()),
            rate_exact_bps: bit_rate(cfg, rho, variant, BitsPerSymbol::Exact)?,
            rate_floor_bps: bit_rate(cfg, rho, variant, BitsPerSymbol::Floor)?,
        });
    }
    if mode == ThroughputMode::Aggregated {
        rows.push(ThroughputRow {
            sender: None,
            x: None,
            delta_us: None,
            rate_exact_bps: rows.iter().map(|r| r.rate_exact_bps).sum(),
            rate_floor_bps: rows.iter().map(|r| r.rate_floor_bps).sum(),
        });
    }
    Ok(rows)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_throughput_csv<W: Write>(
    rows: &[ThroughputRow],
    rho: u32,
    variant: Variant,
    mut out: W,
) -> Result<()> {
    writeln!(
        out,
        "sender_id,x,delta_us,variant,rho,rate_exact_bps,rate_floor_bps"
    )?;
    for r in rows {
        let id = r
            .sender
            .map_or_else(|| "total".to_string(), |s| s.to_string());
        writeln!(
            out,
            "{id},{},{},{variant},{rho},{:.6},{:.6}",
            opt(r.x),
            opt(r.delta_us),
            r.rate_exact_bps,
            r.rate_floor_bps
        )?;
    }
    Ok(())
}

/// Receiver memory and work for collecting and folding one symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverheadReport {
    pub lambda: usize,
    pub rho: u32,
    pub fold_period: usize,
    /// One bit per binary sample kept.
    pub storage_bits: u64,
    pub storage_bytes: u64,
    /// Each sample costs one register fetch and one add.
    pub ops_per_sample: u64,
    pub sample_ops: u64,
    /// The final argmax scan touches every column once.
    pub scan_ops: u64,
}

impl OverheadReport {
    fn new(lambda: usize, rho: u32, fold_period: usize) -> Self {
        let bits = rho as u64 * fold_period as u64;
        Self {
            lambda,
            rho,
            fold_period,
            storage_bits: bits,
            storage_bytes: bits.div_ceil(8),
            ops_per_sample: 2,
            sample_ops: 2 * bits,
            scan_ops: fold_period as u64,
        }
    }
}

/// `ρ·λ` samples for FreeBee, `ρ·2λ` for A-FreeBee.
pub fn overhead_report(cfg: &IntervalConfig, rho: u32, variant: Variant) -> OverheadReport {
    OverheadReport::new(cfg.lambda(), rho, cfg.fold_period(variant))
}

/// A multiplexing receiver keeps `ρ` periods of its slowest sender.
pub fn overhead_report_multiplexed(
    assignment: &IntervalAssignment,
    rho: u32,
    variant: Variant,
) -> OverheadReport {
    let slowest = assignment
        .entries()
        .values()
        .max_by_key(|c| c.lambda())
        .expect("assignment is never empty");
    overhead_report(slowest, rho, variant)
}

pub fn write_overhead_csv<W: Write>(
    r: &OverheadReport,
    variant: Variant,
    mut out: W,
) -> Result<()> {
    writeln!(
        out,
        "variant,lambda,rho,fold_period,storage_bits,storage_bytes,ops_per_sample,sample_ops,scan_ops"
    )?;
    writeln!(
        out,
        "{variant},{},{},{},{},{},{},{},{}",
        r.lambda,
        r.rho,
        r.fold_period,
        r.storage_bits,
        r.storage_bytes,
        r.ops_per_sample,
        r.sample_ops,
        r.scan_ops
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overhead_for_standard_interval() {
        let cfg = IntervalConfig::new(1024, 97, 128).unwrap();
        let r = overhead_report(&cfg, 5, Variant::FreeBee);
        assert_eq!(
            (r.lambda, r.storage_bits, r.storage_bytes),
            (776, 3880, 485)
        );
        assert_eq!(
            overhead_report(&cfg, 5, Variant::AFreeBee).storage_bits,
            7760
        );
    }

    #[test]
    fn overhead_minimal() {
        let cfg = IntervalConfig::new(1, 2, 1).unwrap();
        let r = overhead_report(&cfg, 1, Variant::FreeBee);
        assert_eq!((r.lambda, r.storage_bits, r.storage_bytes), (2, 2, 1));
    }

    #[test]
    fn floor_rate_single_sender() {
        let a = IntervalAssignment::from_pairs([(SenderId(0), IntervalConfig::wifi(100).unwrap())])
            .unwrap();
        let rows = throughput_report(&a, 5, Variant::FreeBee, ThroughputMode::PerSender).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].rate_floor_bps - 6.0 / 0.512).abs() < 1e-9);
        assert!((rows[0].rate_exact_bps - 100f64.log2() / 0.512).abs() < 1e-9);
    }

    #[test]
    fn aggregate_is_sum() {
        let base = IntervalConfig::wifi(2).unwrap();
        let a = crate::multiplex::assign_intervals(4, 89, 200, &base).unwrap();
        let rows = throughput_report(&a, 5, Variant::AFreeBee, ThroughputMode::Aggregated).unwrap();
        let total = rows.last().unwrap();
        assert!(total.sender.is_none());
        let sum: f64 = rows[..4].iter().map(|r| r.rate_exact_bps).sum();
        assert!((total.rate_exact_bps - sum).abs() < 1e-12);
        let m = overhead_report_multiplexed(&a, 5, Variant::FreeBee);
        assert_eq!(m.lambda, 8 * 103);
    }
}
