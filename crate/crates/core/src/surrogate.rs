//! Acoustic-model error surrogate.
//!
//! Stands in for a trained acoustic model by corrupting ground-truth LSF
//! tracks the way generated parameters typically differ from analysed ones:
//! temporal over-smoothing (a centred moving average per dimension) plus
//! i.i.d. Gaussian jitter, followed by an ordering repair that keeps every
//! frame a valid, stable LSF vector.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{CoeffTrack, LsfTrack, TrackSource};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    /// Moving-average length in frames (odd, ≥ 1).
    pub smooth_frames: usize,
    pub noise_std_rad: f64,
    pub min_gap_rad: f64,
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            smooth_frames: 9,
            noise_std_rad: 0.01,
            min_gap_rad: 0.005,
            seed: 0,
        }
    }
}

impl SurrogateConfig {
    /// Configuration that reproduces its input exactly.
    pub fn identity() -> Self {
        Self {
            smooth_frames: 1,
            noise_std_rad: 0.0,
            ..Self::default()
        }
    }

    pub fn is_identity(&self) -> bool {
        self.smooth_frames == 1 && self.noise_std_rad == 0.0
    }

    pub fn validate(&self, order: usize) -> Result<()> {
        if self.smooth_frames == 0 || self.smooth_frames % 2 == 0 {
            return Err(Error::InvalidSurrogate(format!(
                "smooth_frames must be odd and positive, got {}",
                self.smooth_frames
            )));
        }
        if !(self.noise_std_rad >= 0.0) || !self.noise_std_rad.is_finite() {
            return Err(Error::InvalidSurrogate(format!(
                "noise_std_rad must be >= 0, got {}",
                self.noise_std_rad
            )));
        }
        if !(self.min_gap_rad > 0.0 && self.min_gap_rad * ((order + 1) as f64) < PI) {
            return Err(Error::InvalidSurrogate(format!(
                "min_gap_rad {} infeasible for order {order}",
                self.min_gap_rad
            )));
        }
        Ok(())
    }

    /// Copy with a seed derived from `stream`, for per-utterance draws.
    pub fn for_stream(&self, stream: u64) -> Self {
        Self {
            seed: self
                .seed
                .wrapping_mul(0x2545_F491_4F6C_DD1D)
                .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0x5851_F42D_4C95_7F2D),
            ..*self
        }
    }
}

/// Sorts, clamps into `[min_gap, π - min_gap]` and enforces consecutive gaps
/// of at least `min_gap` with a forward then a backward pass. Idempotent.
pub fn repair_ordering(frame: &[f64], min_gap: f64) -> Vec<f64> {
    let mut w: Vec<f64> = frame
        .iter()
        .map(|&v| if v.is_nan() { PI / 2.0 } else { v })
        .collect();
    w.sort_by(f64::total_cmp);
    let (lo, hi) = (min_gap, PI - min_gap);
    for v in &mut w {
        *v = v.clamp(lo, hi);
    }
    // Small slack so an already repaired frame is not nudged by rounding.
    let slack = min_gap * 1e-9;
    for i in 1..w.len() {
        if w[i] - w[i - 1] < min_gap - slack {
            w[i] = w[i - 1] + min_gap;
        }
    }
    if let Some(last) = w.last_mut() {
        if *last > hi {
            *last = hi;
        }
    }
    for i in (0..w.len().saturating_sub(1)).rev() {
        if w[i + 1] - w[i] < min_gap - slack {
            w[i] = w[i + 1] - min_gap;
        }
    }
    w
}

/// Over-smoothed, jittered and repaired copy of `gt`, tagged as generated.
pub fn generate_lsf(gt: &LsfTrack, config: &SurrogateConfig) -> Result<LsfTrack> {
    config.validate(gt.order)?;
    gt.validate()?;
    let n = gt.n_frames();
    let half = config.smooth_frames / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, config.noise_std_rad)
        .map_err(|e| Error::InvalidSurrogate(e.to_string()))?;

    let frames = (0..n)
        .map(|i| {
            let smoothed: Vec<f64> = if half == 0 {
                gt.frames[i].clone()
            } else {
                (0..gt.order)
                    .map(|d| {
                        let sum: f64 = (0..config.smooth_frames)
                            .map(|j| {
                                let src = (i + j).saturating_sub(half).min(n - 1);
                                gt.frames[src][d]
                            })
                            .sum();
                        sum / config.smooth_frames as f64
                    })
                    .collect()
            };
            if config.is_identity() {
                return smoothed;
            }
            let jittered: Vec<f64> = smoothed
                .iter()
                .map(|v| {
                    if config.noise_std_rad > 0.0 {
                        v + noise.sample(&mut rng)
                    } else {
                        *v
                    }
                })
                .collect();
            repair_ordering(&jittered, config.min_gap_rad)
        })
        .collect();
    Ok(LsfTrack {
        order: gt.order,
        frames,
        source: TrackSource::Generated,
    })
}

/// Mean over frames of the RMS difference (dB) between the LP envelopes
/// `1/|A(e^jω)|` of two coefficient tracks, on a 256-point grid over `(0, π)`.
pub fn envelope_distortion_db(a: &CoeffTrack, b: &CoeffTrack) -> f64 {
    const POINTS: usize = 256;
    let log_env = |alpha: &[f64], w: f64| {
        let (mut re, mut im) = (1.0, 0.0);
        for (k, c) in alpha.iter().enumerate() {
            let ph = w * (k + 1) as f64;
            re -= c * ph.cos();
            im += c * ph.sin();
        }
        -10.0 * (re * re + im * im).log10()
    };
    let total: f64 = a
        .coeffs
        .iter()
        .zip(&b.coeffs)
        .map(|(x, y)| {
            let ms: f64 = (0..POINTS)
                .map(|j| {
                    let w = PI * (j as f64 + 0.5) / POINTS as f64;
                    (log_env(x, w) - log_env(y, w)).powi(2)
                })
                .sum::<f64>()
                / POINTS as f64;
            ms.sqrt()
        })
        .sum();
    total / a.coeffs.len().max(1) as f64
}
