//! Excitation extraction and coding.
//!
//! * plain: `e_n = x_n - Σ α_k x_{n-k}` with analysed (ground-truth) coefficients;
//! * closed-loop: `ê_n = x_n - Σ α̂_k x_{n-k}` with generated coefficients;
//! * intermediate prediction: `e^am_n = Σ (α_k - α̂_k) x_{n-k}`, so that
//!   `ê = e + e^am` holds sample by sample.

pub mod mulaw;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{lp_analysis_filter, CoeffTrack, FrameGrid, TrackSource};

pub use mulaw::{mulaw_decode, mulaw_encode, symbol_to_companded};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExcitationKind {
    Plain,
    Mbg,
    Intermediate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationTrack {
    pub kind: ExcitationKind,
    pub raw: Vec<f64>,
    /// Peak used for normalization; `None` until [`normalize`] succeeds.
    pub gain: Option<f64>,
    pub symbols: Option<Vec<u8>>,
}

impl ExcitationTrack {
    fn new(kind: ExcitationKind, raw: Vec<f64>) -> Self {
        Self {
            kind,
            raw,
            gain: None,
            symbols: None,
        }
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn peak(&self) -> f64 {
        self.raw.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// True for an all-zero residual (silent input).
    pub fn is_silent(&self) -> bool {
        self.peak() == 0.0
    }
}

/// Residual through the analysed (ground-truth) inverse filter.
pub fn extract_plain(x: &[f64], alpha: &CoeffTrack, grid: &FrameGrid) -> Result<ExcitationTrack> {
    Ok(ExcitationTrack::new(
        ExcitationKind::Plain,
        lp_analysis_filter(x, alpha, grid)?,
    ))
}

/// Closed-loop residual through the generated inverse filter. Ground-truth
/// tracks are rejected so modes cannot be mixed up silently.
pub fn extract_mbg(x: &[f64], alpha_hat: &CoeffTrack, grid: &FrameGrid) -> Result<ExcitationTrack> {
    if alpha_hat.source != TrackSource::Generated {
        return Err(Error::TrackSource(
            "closed-loop extraction needs a generated coefficient track".into(),
        ));
    }
    if let Some(i) = alpha_hat.first_unstable_frame() {
        return Err(Error::UnstableFilter(format!(
            "generated frame {i} is not minimum phase"
        )));
    }
    Ok(ExcitationTrack::new(
        ExcitationKind::Mbg,
        lp_analysis_filter(x, alpha_hat, grid)?,
    ))
}

/// `e^am_n = Σ (α_k - α̂_k)(frame(n)) x_{n-k}`, zero history before the signal.
pub fn intermediate_prediction(
    x: &[f64],
    alpha: &CoeffTrack,
    alpha_hat: &CoeffTrack,
    grid: &FrameGrid,
) -> Result<ExcitationTrack> {
    if alpha.n_frames() != alpha_hat.n_frames() || alpha.order != alpha_hat.order {
        return Err(Error::LengthMismatch {
            what: "ground-truth vs generated track frames",
            expected: alpha.n_frames(),
            actual: alpha_hat.n_frames(),
        });
    }
    if alpha.n_frames() != grid.n_frames {
        return Err(Error::LengthMismatch {
            what: "coefficient track vs grid frames",
            expected: grid.n_frames,
            actual: alpha.n_frames(),
        });
    }
    if x.len() != grid.n_samples {
        return Err(Error::LengthMismatch {
            what: "signal vs grid samples",
            expected: grid.n_samples,
            actual: x.len(),
        });
    }
    let raw = (0..x.len())
        .map(|n| {
            let f = grid.frame_of(n);
            alpha.coeffs[f]
                .iter()
                .zip(&alpha_hat.coeffs[f])
                .enumerate()
                .take(n)
                .map(|(k, (a, b))| (a - b) * x[n - 1 - k])
                .sum()
        })
        .collect();
    Ok(ExcitationTrack::new(ExcitationKind::Intermediate, raw))
}

/// Scales the residual to unit peak, stores the peak as gain and encodes the
/// µ-law symbols of the scaled signal.
pub fn normalize(track: &ExcitationTrack) -> Result<ExcitationTrack> {
    let peak = track.peak();
    if !(peak > 0.0) {
        return Err(Error::SilentExcitation);
    }
    let raw: Vec<f64> = track.raw.iter().map(|x| x / peak).collect();
    let symbols = mulaw::encode_all(&raw)?;
    Ok(ExcitationTrack {
        kind: track.kind,
        raw,
        gain: Some(peak),
        symbols: Some(symbols),
    })
}

/// Inverse of [`normalize`] on the raw samples.
pub fn denormalize(track: &ExcitationTrack) -> Result<ExcitationTrack> {
    let gain = track
        .gain
        .ok_or_else(|| Error::Shape("excitation has no gain".into()))?;
    Ok(ExcitationTrack {
        kind: track.kind,
        raw: track.raw.iter().map(|x| x * gain).collect(),
        gain: None,
        symbols: None,
    })
}

/// Excitation reconstructed from µ-law symbols and a gain.
pub fn decode_symbols(symbols: &[u8], gain: f64) -> Vec<f64> {
    symbols.iter().map(|&s| mulaw_decode(s) * gain).collect()
}
