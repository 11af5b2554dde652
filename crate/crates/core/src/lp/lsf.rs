//! LPC ⇄ line spectral frequency conversion.
//!
//! For `A(z) = 1 - Σ α_k z^-k` of order `p`, the sum and difference
//! polynomials `P(z) = A(z) + z^-(p+1) A(1/z)` and
//! `Q(z) = A(z) - z^-(p+1) A(1/z)` have interleaved roots on the unit circle
//! whenever `A` is minimum phase. Their angles in `(0, π)` are the LSFs.
//!
//! Roots are located by scanning the real-valued zero-phase forms of `P` and
//! `Q` on a uniform grid, then bisecting each bracketed sign change.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::filter::{CoeffTrack, TrackSource};
use super::grid::FrameGrid;
use super::levinson::is_stable;
use crate::error::{Error, Result};

const SCAN_POINTS: usize = 4096;
const FINE_SCAN_POINTS: usize = 65536;
const BISECT_TOL: f64 = 1e-12;

/// Per-frame LSF vectors in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsfTrack {
    pub order: usize,
    pub frames: Vec<Vec<f64>>,
    pub source: TrackSource,
}

impl LsfTrack {
    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn from_coeffs(track: &CoeffTrack) -> Result<Self> {
        let frames = track
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, a)| {
                lpc_to_lsf(a).map_err(|e| Error::LsfConversion(format!("frame {i}: {e}")))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            order: track.order,
            frames,
            source: track.source,
        })
    }

    pub fn to_coeffs(&self) -> Result<CoeffTrack> {
        let coeffs = self
            .frames
            .iter()
            .enumerate()
            .map(|(i, w)| lsf_to_lpc(w).map_err(|e| Error::LsfOrdering(format!("frame {i}: {e}"))))
            .collect::<Result<_>>()?;
        Ok(CoeffTrack {
            order: self.order,
            coeffs,
            source: self.source,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (i, w) in self.frames.iter().enumerate() {
            check_ordering(w).map_err(|e| Error::LsfOrdering(format!("frame {i}: {e}")))?;
        }
        Ok(())
    }

    /// Per-sample coefficients by linear interpolation of neighbouring frames'
    /// LSFs. Sample `n` in hop `i` blends frame `i` toward frame `i + 1` by
    /// `(n mod shift) / shift`. Returns a track on a one-sample grid.
    pub fn interpolate_per_sample(&self, grid: &FrameGrid) -> Result<(CoeffTrack, FrameGrid)> {
        if self.frames.len() != grid.n_frames {
            return Err(Error::LengthMismatch {
                what: "LSF track vs grid frames",
                expected: grid.n_frames,
                actual: self.frames.len(),
            });
        }
        let last = grid.n_frames - 1;
        let coeffs = (0..grid.n_samples)
            .map(|n| {
                let i = grid.frame_of(n);
                let t = (n - i * grid.shift) as f64 / grid.shift as f64;
                let (a, b) = (&self.frames[i], &self.frames[(i + 1).min(last)]);
                let w: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect();
                lsf_to_lpc(&w)
            })
            .collect::<Result<_>>()?;
        let fine = FrameGrid::new(grid.n_samples, 1, 1, grid.window, grid.align)?;
        Ok((
            CoeffTrack {
                order: self.order,
                coeffs,
                source: self.source,
            },
            fine,
        ))
    }
}

fn check_ordering(lsf: &[f64]) -> Result<()> {
    let mut prev = 0.0;
    for (i, &w) in lsf.iter().enumerate() {
        if !(w > prev) {
            return Err(Error::LsfOrdering(format!(
                "ω[{i}] = {w} not above previous {prev}"
            )));
        }
        prev = w;
    }
    if !(prev < PI) {
        return Err(Error::LsfOrdering(format!("last ω = {prev} not below π")));
    }
    Ok(())
}

/// Zero-phase real forms: `Pr(ω) = Σ P_k cos((m-k)ω)`, `Qr(ω) = Σ Q_k sin((m-k)ω)`
/// with `m = (p+1)/2`.
struct ZeroPhase {
    p: Vec<f64>,
    q: Vec<f64>,
    m: f64,
}

impl ZeroPhase {
    fn new(alpha: &[f64]) -> Self {
        let order = alpha.len();
        let mut a = vec![0.0; order + 2];
        a[0] = 1.0;
        for (k, &c) in alpha.iter().enumerate() {
            a[k + 1] = -c;
        }
        let n = order + 1;
        let p = (0..=n).map(|k| a[k] + a[n - k]).collect();
        let q = (0..=n).map(|k| a[k] - a[n - k]).collect();
        Self {
            p,
            q,
            m: n as f64 / 2.0,
        }
    }

    fn eval_p(&self, w: f64) -> f64 {
        self.p
            .iter()
            .enumerate()
            .map(|(k, c)| c * ((self.m - k as f64) * w).cos())
            .sum()
    }

    fn eval_q(&self, w: f64) -> f64 {
        self.q
            .iter()
            .enumerate()
            .map(|(k, c)| c * ((self.m - k as f64) * w).sin())
            .sum()
    }
}

fn roots_in_open_interval(f: impl Fn(f64) -> f64, points: usize) -> Vec<f64> {
    let mut roots = Vec::new();
    let step = PI / points as f64;
    let mut lo = step;
    let mut f_lo = f(lo);
    for j in 2..points {
        let hi = j as f64 * step;
        let f_hi = f(hi);
        if f_lo == 0.0 {
            roots.push(lo);
        } else if f_lo * f_hi < 0.0 {
            let (mut a, mut b, mut fa) = (lo, hi, f_lo);
            while b - a > BISECT_TOL {
                let mid = 0.5 * (a + b);
                let fm = f(mid);
                if fm == 0.0 {
                    a = mid;
                    b = mid;
                    break;
                }
                if fa * fm < 0.0 {
                    b = mid;
                } else {
                    a = mid;
                    fa = fm;
                }
            }
            roots.push(0.5 * (a + b));
        }
        lo = hi;
        f_lo = f_hi;
    }
    roots
}

/// Converts stable predictor coefficients to `p` strictly increasing LSFs.
pub fn lpc_to_lsf(alpha: &[f64]) -> Result<Vec<f64>> {
    let order = alpha.len();
    if order == 0 {
        return Ok(Vec::new());
    }
    if !is_stable(alpha) {
        return Err(Error::LsfConversion("predictor is not minimum phase".into()));
    }
    let zp = ZeroPhase::new(alpha);
    for points in [SCAN_POINTS, FINE_SCAN_POINTS] {
        let mut lsf = roots_in_open_interval(|w| zp.eval_p(w), points);
        let q_roots = roots_in_open_interval(|w| zp.eval_q(w), points);
        let (n_p, n_q) = (lsf.len(), q_roots.len());
        lsf.extend(q_roots);
        lsf.sort_by(f64::total_cmp);
        if lsf.len() == order && n_p == order.div_ceil(2) && n_q == order / 2 && check_ordering(&lsf).is_ok()
        {
            return Ok(lsf);
        }
    }
    Err(Error::LsfConversion(format!(
        "could not isolate {order} interleaved roots"
    )))
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Converts strictly increasing LSFs in `(0, π)` back to predictor coefficients.
pub fn lsf_to_lpc(lsf: &[f64]) -> Result<Vec<f64>> {
    let order = lsf.len();
    if order == 0 {
        return Ok(Vec::new());
    }
    check_ordering(lsf)?;
    let pair = |w: f64| [1.0, -2.0 * w.cos(), 1.0];
    let mut p = if order % 2 == 0 { vec![1.0, 1.0] } else { vec![1.0] };
    let mut q = if order % 2 == 0 {
        vec![1.0, -1.0]
    } else {
        vec![1.0, 0.0, -1.0]
    };
    for (i, &w) in lsf.iter().enumerate() {
        if i % 2 == 0 {
            p = poly_mul(&p, &pair(w));
        } else {
            q = poly_mul(&q, &pair(w));
        }
    }
    debug_assert_eq!(p.len(), order + 2);
    debug_assert_eq!(q.len(), order + 2);
    Ok((1..=order).map(|k| -0.5 * (p[k] + q[k])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_stable_predictor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn flat_filter_gives_uniform_grid() {
        for p in [1, 2, 5, 10, 16] {
            let lsf = lpc_to_lsf(&vec![0.0; p]).unwrap();
            for (i, w) in lsf.iter().enumerate() {
                let expect = (i + 1) as f64 * PI / (p + 1) as f64;
                assert!((w - expect).abs() < 1e-10, "p={p} i={i}: {w} vs {expect}");
            }
        }
    }

    #[test]
    fn round_trip_random_filters() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p in [1, 2, 3, 7, 10, 16, 24] {
            for _ in 0..30 {
                let alpha = random_stable_predictor(&mut rng, p, 0.9);
                let lsf = lpc_to_lsf(&alpha).unwrap();
                assert!(lsf.windows(2).all(|w| w[0] < w[1]));
                let back = lsf_to_lpc(&lsf).unwrap();
                let err = alpha
                    .iter()
                    .zip(&back)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                assert!(err < 1e-6, "p={p} err={err}");
            }
        }
    }

    #[test]
    fn unstable_and_unordered_rejected() {
        assert!(matches!(lpc_to_lsf(&[1.5]), Err(Error::LsfConversion(_))));
        assert!(matches!(
            lsf_to_lpc(&[0.5, 0.4]),
            Err(Error::LsfOrdering(_))
        ));
        assert!(matches!(lsf_to_lpc(&[0.0, 0.4]), Err(Error::LsfOrdering(_))));
        assert!(matches!(lsf_to_lpc(&[0.4, PI]), Err(Error::LsfOrdering(_))));
    }

    #[test]
    fn ordered_lsf_always_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        use rand::Rng;
        for _ in 0..200 {
            let p = rng.random_range(1..=20);
            let mut w: Vec<f64> = (0..p).map(|_| rng.random_range(0.01..PI - 0.01)).collect();
            w.sort_by(f64::total_cmp);
            w.dedup();
            let a = lsf_to_lpc(&w).unwrap();
            assert!(is_stable(&a));
        }
    }

    #[test]
    fn interpolation_hits_frame_values_at_hop_starts() {
        let grid =
            FrameGrid::new(20, 10, 10, super::super::Window::Hann, super::super::FrameAlign::Start)
                .unwrap();
        let track = LsfTrack {
            order: 2,
            frames: vec![vec![0.5, 1.5], vec![0.7, 2.0]],
            source: TrackSource::GroundTruth,
        };
        let (coeffs, fine) = track.interpolate_per_sample(&grid).unwrap();
        assert_eq!(fine.shift, 1);
        assert_eq!(coeffs.coeffs.len(), 20);
        assert_eq!(coeffs.coeffs[0], lsf_to_lpc(&[0.5, 1.5]).unwrap());
        let mid = lsf_to_lpc(&[0.6, 1.75]).unwrap();
        assert!(coeffs.coeffs[5].iter().zip(&mid).all(|(a, b)| (a - b).abs() < 1e-12));
        assert_eq!(coeffs.coeffs[15], lsf_to_lpc(&[0.7, 2.0]).unwrap());
    }
}
