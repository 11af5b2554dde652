//! 8-bit µ-law companding with bin-centre decoding.
//!
//! `F(x) = sign(x)·ln(1 + µ|x|)/ln(1 + µ)` maps `[-1, 1]` onto itself; the
//! companded range is cut into 256 equal bins and symbol `s` covers
//! `[s/128 - 1, (s+1)/128 - 1)`, with `F = 1` folded into the top bin.

use crate::error::{Error, Result};

pub const MU: f64 = 255.0;
pub const LEVELS: usize = 256;

#[inline]
pub fn compand(x: f64) -> f64 {
    x.signum() * (MU * x.abs()).ln_1p() / MU.ln_1p()
}

#[inline]
pub fn expand(y: f64) -> f64 {
    y.signum() * ((y.abs() * MU.ln_1p()).exp() - 1.0) / MU
}

/// Encodes a sample, clamping `|x| > 1`.
pub fn mulaw_encode(x: f64) -> Result<u8> {
    if x.is_nan() {
        return Err(Error::NanInput);
    }
    let f = compand(x.clamp(-1.0, 1.0));
    let bin = ((f + 1.0) * 0.5 * LEVELS as f64).floor();
    Ok(bin.clamp(0.0, (LEVELS - 1) as f64) as u8)
}

/// Companded-domain centre of bin `symbol`, in `(-1, 1)`.
#[inline]
pub fn symbol_to_companded(symbol: u8) -> f64 {
    (2.0 * symbol as f64 + 1.0) / LEVELS as f64 - 1.0
}

/// Decodes to the linear value of the bin centre.
#[inline]
pub fn mulaw_decode(symbol: u8) -> f64 {
    expand(symbol_to_companded(symbol))
}

pub fn encode_all(xs: &[f64]) -> Result<Vec<u8>> {
    xs.iter().map(|&x| mulaw_encode(x)).collect()
}

pub fn decode_all(symbols: &[u8]) -> Vec<f64> {
    symbols.iter().map(|&s| mulaw_decode(s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchor_symbols() {
        assert_eq!(mulaw_encode(1.0).unwrap(), 255);
        assert_eq!(mulaw_encode(0.0).unwrap(), 128);
        assert_eq!(mulaw_encode(-1.0).unwrap(), 0);
        assert_eq!(mulaw_encode(1.5).unwrap(), 255);
        assert_eq!(mulaw_encode(-7.0).unwrap(), 0);
        assert!(matches!(mulaw_encode(f64::NAN), Err(Error::NanInput)));
    }

    #[test]
    fn compand_expand_inverse() {
        for i in -100..=100 {
            let x = i as f64 / 100.0;
            assert!((expand(compand(x)) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn decode_lies_inside_its_bin() {
        for s in 0..=255u8 {
            assert_eq!(mulaw_encode(mulaw_decode(s)).unwrap(), s);
        }
    }

    proptest::proptest! {
        #[test]
        fn encode_monotone(a in -1.2f64..1.2, b in -1.2f64..1.2) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            proptest::prop_assert!(mulaw_encode(lo).unwrap() <= mulaw_encode(hi).unwrap());
        }
    }
}
