//! Canonical symbol ↔ bit-string mapping.
//!
//! Only `2^⌊log2 x⌋` shifts carry whole bits. For FreeBee those are the
//! lowest-magnitude shifts `[−(2^(w−1) − 1), 2^(w−1)]`, addressed
//! two's-complement style with the most negative code standing for the
//! positive half-interval shift. For A-FreeBee they are `[0, 2^w − 1]`.
//! Bit strings are MSB first.

use super::{IntervalConfig, Symbol, Variant};
use crate::{Error, Result};

/// Whole bits per symbol, `⌊log2 x⌋`.
pub fn bit_width(cfg: &IntervalConfig) -> u32 {
    cfg.x().ilog2()
}

fn encodable_range(cfg: &IntervalConfig, variant: Variant) -> (i64, i64) {
    let n = 1i64 << bit_width(cfg);
    match variant {
        Variant::FreeBee => (-(n / 2 - 1), n / 2),
        Variant::AFreeBee => (0, n - 1),
    }
}

pub fn symbol_to_bits(sym: Symbol, cfg: &IntervalConfig) -> Result<String> {
    let w = bit_width(cfg);
    let (lo, hi) = encodable_range(cfg, sym.variant());
    let s = sym.shift();
    if s < lo || s > hi {
        return Err(Error::Unencodable(s));
    }
    let code = s.rem_euclid(1i64 << w) as u64;
    Ok((0..w)
        .rev()
        .map(|b| if code >> b & 1 == 1 { '1' } else { '0' })
        .collect())
}

pub fn bits_to_symbol(bits: &str, variant: Variant, cfg: &IntervalConfig) -> Result<Symbol> {
    let w = bit_width(cfg);
    if bits.len() != w as usize {
        return Err(Error::BitWidth {
            expected: w,
            got: bits.len(),
        });
    }
    let mut code = 0i64;
    for c in bits.chars() {
        code = code << 1
            | match c {
                '0' => 0,
                '1' => 1,
                other => {
                    return Err(Error::InvalidConfig(format!("invalid bit `{other}`")));
                }
            };
    }
    let n = 1i64 << w;
    let shift = match variant {
        Variant::FreeBee if code > n / 2 => code - n,
        _ => code,
    };
    Symbol::new(shift, variant, cfg)
}
