use serde::{Deserialize, Serialize};

use super::grid::{frame_signal, FrameGrid};
use super::levinson::{autocorrelate, is_stable, levinson_durbin, DEFAULT_FLOOR_EPS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackSource {
    /// Estimated from the recorded waveform.
    GroundTruth,
    /// Produced by an acoustic model (or its surrogate).
    Generated,
}

/// Per-frame predictor coefficients `α_1..α_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffTrack {
    pub order: usize,
    pub coeffs: Vec<Vec<f64>>,
    pub source: TrackSource,
}

impl CoeffTrack {
    pub fn zeros(order: usize, n_frames: usize, source: TrackSource) -> Self {
        Self {
            order,
            coeffs: vec![vec![0.0; order]; n_frames],
            source,
        }
    }

    pub fn n_frames(&self) -> usize {
        self.coeffs.len()
    }

    /// Index of the first frame that is not minimum phase, if any.
    pub fn first_unstable_frame(&self) -> Option<usize> {
        self.coeffs.iter().position(|a| !is_stable(a))
    }

    fn check_against(&self, grid: &FrameGrid, n_samples: usize) -> Result<()> {
        if self.coeffs.len() != grid.n_frames {
            return Err(Error::LengthMismatch {
                what: "coefficient track vs grid frames",
                expected: grid.n_frames,
                actual: self.coeffs.len(),
            });
        }
        if n_samples != grid.n_samples {
            return Err(Error::LengthMismatch {
                what: "signal vs grid samples",
                expected: grid.n_samples,
                actual: n_samples,
            });
        }
        if let Some(i) = self.coeffs.iter().position(|a| a.len() != self.order) {
            return Err(Error::LengthMismatch {
                what: "frame coefficient count",
                expected: self.order,
                actual: self.coeffs[i].len(),
            });
        }
        Ok(())
    }
}

/// Frame-wise autocorrelation LP analysis. Also returns the per-frame
/// degenerate (silent) flags from the recursion.
pub fn analyze_waveform(
    signal: &[f64],
    grid: &FrameGrid,
    order: usize,
) -> Result<(CoeffTrack, Vec<bool>)> {
    if order == 0 || order >= grid.length {
        return Err(Error::InvalidGrid(format!(
            "LP order {order} must be in 1..{}",
            grid.length
        )));
    }
    let frames = frame_signal(signal, grid)?;
    let mut coeffs = Vec::with_capacity(frames.len());
    let mut flags = Vec::with_capacity(frames.len());
    for frame in &frames {
        let r = autocorrelate(frame, order);
        let sol = levinson_durbin(&r, order, DEFAULT_FLOOR_EPS);
        flags.push(sol.degenerate);
        coeffs.push(sol.coeffs);
    }
    Ok((
        CoeffTrack {
            order,
            coeffs,
            source: TrackSource::GroundTruth,
        },
        flags,
    ))
}

#[inline]
fn prediction(alpha: &[f64], history: &[f64], n: usize) -> f64 {
    let mut acc = 0.0;
    for (k, a) in alpha.iter().enumerate().take(n) {
        acc += a * history[n - 1 - k];
    }
    acc
}

/// FIR inverse filter `e_n = x_n - Σ α_k(frame(n)) x_{n-k}` with zero history
/// before the first sample and coefficients held constant over each hop.
pub fn lp_analysis_filter(signal: &[f64], track: &CoeffTrack, grid: &FrameGrid) -> Result<Vec<f64>> {
    track.check_against(grid, signal.len())?;
    Ok((0..signal.len())
        .map(|n| signal[n] - prediction(&track.coeffs[grid.frame_of(n)], signal, n))
        .collect())
}

/// What synthesis does when a frame is not minimum phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityPolicy {
    #[default]
    Refuse,
    Warn,
}

/// All-pole recursion `x_n = e_n + Σ α_k(frame(n)) x_{n-k}`, the exact inverse
/// of [`lp_analysis_filter`] under the same track and history convention.
pub fn lp_synthesis_filter(
    excitation: &[f64],
    track: &CoeffTrack,
    grid: &FrameGrid,
    policy: StabilityPolicy,
) -> Result<Vec<f64>> {
    track.check_against(grid, excitation.len())?;
    if let Some(i) = track.first_unstable_frame() {
        match policy {
            StabilityPolicy::Refuse => {
                return Err(Error::UnstableFilter(format!("frame {i} is not minimum phase")))
            }
            StabilityPolicy::Warn => log::warn!("synthesis filter frame {i} is not minimum phase"),
        }
    }
    let mut out = vec![0.0; excitation.len()];
    for n in 0..excitation.len() {
        out[n] = excitation[n] + prediction(&track.coeffs[grid.frame_of(n)], &out, n);
    }
    Ok(out)
}
