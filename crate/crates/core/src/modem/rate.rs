use super::{bit_width, IntervalConfig, Variant};
use crate::{Error, Result};

/// How many bits a symbol is credited with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitsPerSymbol {
    /// `log2 x`
    Exact,
    /// `⌊log2 x⌋`, the bits actually addressable by the bit mapping.
    Floor,
}

/// Per-sender bit rate: `bits / (T·ρ)`, halved for A-FreeBee whose symbol
/// takes `ρ·2T` to collect.
pub fn bit_rate(
    cfg: &IntervalConfig,
    rho: u32,
    variant: Variant,
    bits: BitsPerSymbol,
) -> Result<f64> {
    if rho == 0 {
        return Err(Error::InvalidConfig(
            "repetition count must be at least 1".into(),
        ));
    }
    let per_symbol = match bits {
        BitsPerSymbol::Exact => (cfg.x() as f64).log2(),
        BitsPerSymbol::Floor => bit_width(cfg) as f64,
    };
    let r = per_symbol / (cfg.interval_s() * rho as f64);
    Ok(match variant {
        Variant::FreeBee => r,
        Variant::AFreeBee => r / 2.0,
    })
}
