//! Frame-level conditioning features: LSFs, log-F0, log-energy and the
//! voicing flag, with z-score statistics and frame-to-sample duplication.

use ndarray::Array2;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{autocorrelate, frame_signal, levinson_durbin, FrameGrid, LsfTrack, Window, DEFAULT_FLOOR_EPS};

/// Added inside the log of the frame energy.
pub const ENERGY_EPS: f64 = 1e-10;
/// Lower bound applied to every per-dimension standard deviation.
pub const STD_FLOOR: f64 = 1e-6;
/// Log-F0 written to unvoiced frames of an utterance with no voiced frame.
pub const DEFAULT_LOG_F0_FILL: f64 = 5.0106352940962555; // ln 150

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct F0Params {
    pub f0_min_hz: f64,
    pub f0_max_hz: f64,
    /// Minimum normalized autocorrelation peak for a voiced decision.
    pub voicing_threshold: f64,
    /// Mean-square frame level below which a frame is silent (unvoiced).
    pub silence_floor: f64,
}

impl Default for F0Params {
    fn default() -> Self {
        Self {
            f0_min_hz: 70.0,
            f0_max_hz: 350.0,
            voicing_threshold: 0.3,
            silence_floor: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchFrame {
    /// 0 when unvoiced.
    pub f0_hz: f64,
    pub voiced: bool,
}

/// Normalized autocorrelation `Σ f[n]f[n+τ] / sqrt(Σ f[n]² Σ f[n+τ]²)`.
fn normalized_lag_correlation(frame: &[f64], lag: usize) -> f64 {
    let n = frame.len() - lag;
    let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (a, b) = (frame[i], frame[i + lag]);
        xy += a * b;
        xx += a * a;
        yy += b * b;
    }
    let denom = (xx * yy).sqrt();
    if denom > 0.0 {
        xy / denom
    } else {
        0.0
    }
}

/// Order of the per-frame inverse filter applied before the lag search.
pub const PITCH_WHITEN_ORDER: usize = 8;

/// Residual of a low-order LP fit to the frame; removes formant ringing that
/// would otherwise correlate at pitch-range lags.
fn whiten(frame: &[f64]) -> Vec<f64> {
    let n = frame.len();
    let tapered: Vec<f64> = frame
        .iter()
        .enumerate()
        .map(|(i, x)| x * (0.5 - 0.5 * (2.0 * std::f64::consts::PI * (i as f64 + 0.5) / n as f64).cos()))
        .collect();
    let r = autocorrelate(&tapered, PITCH_WHITEN_ORDER);
    let lp = levinson_durbin(&r, PITCH_WHITEN_ORDER, DEFAULT_FLOOR_EPS);
    (PITCH_WHITEN_ORDER..n)
        .map(|i| frame[i] - lp.coeffs.iter().enumerate().map(|(k, a)| a * frame[i - 1 - k]).sum::<f64>())
        .collect()
}

/// Autocorrelation pitch estimator over the frames of `grid` (rectangular
/// window), run on the LP-whitened frame. The earliest local maximum within 90% of the global maximum in
/// the lag band `[rate/f0_max, rate/f0_min]` is refined by parabolic
/// interpolation.
pub fn estimate_f0(
    signal: &[f64],
    sample_rate: u32,
    grid: &FrameGrid,
    params: &F0Params,
) -> Result<Vec<PitchFrame>> {
    let rate = sample_rate as f64;
    if !(params.f0_min_hz > 0.0 && params.f0_min_hz < params.f0_max_hz && params.f0_max_hz < rate / 2.0)
    {
        return Err(Error::InvalidGrid(format!(
            "f0 band [{}, {}] Hz invalid at {} Hz",
            params.f0_min_hz, params.f0_max_hz, sample_rate
        )));
    }
    let min_lag = ((rate / params.f0_max_hz).floor() as usize).max(2);
    let max_lag = (rate / params.f0_min_hz).ceil() as usize;
    let length = grid.length.max(2 * max_lag + 1 + PITCH_WHITEN_ORDER);
    let pitch_grid = crate::lp::FrameGrid {
        length,
        window: Window::Rectangular,
        ..*grid
    };
    let frames = frame_signal(signal, &pitch_grid)?;
    Ok(frames
        .iter()
        .map(|frame| {
            let power = frame.iter().map(|x| x * x).sum::<f64>() / frame.len() as f64;
            if power < params.silence_floor {
                return PitchFrame {
                    f0_hz: 0.0,
                    voiced: false,
                };
            }
            let white = whiten(frame);
            let rho: Vec<f64> = (min_lag - 1..=max_lag + 1)
                .map(|lag| normalized_lag_correlation(&white, lag))
                .collect();
            // rho[i] corresponds to lag min_lag - 1 + i
            let best = rho[1..rho.len() - 1].iter().cloned().fold(f64::MIN, f64::max);
            if best < params.voicing_threshold {
                return PitchFrame {
                    f0_hz: 0.0,
                    voiced: false,
                };
            }
            let pick = (1..rho.len() - 1)
                .find(|&i| rho[i] >= 0.9 * best && rho[i] >= rho[i - 1] && rho[i] >= rho[i + 1])
                .unwrap_or_else(|| {
                    (1..rho.len() - 1)
                        .max_by(|&a, &b| rho[a].total_cmp(&rho[b]))
                        .unwrap()
                });
            let (l, c, r) = (rho[pick - 1], rho[pick], rho[pick + 1]);
            let curvature = l - 2.0 * c + r;
            let offset = if curvature < 0.0 {
                (0.5 * (l - r) / curvature).clamp(-0.5, 0.5)
            } else {
                0.0
            };
            let lag = (min_lag - 1 + pick) as f64 + offset;
            PitchFrame {
                f0_hz: rate / lag,
                voiced: true,
            }
        })
        .collect())
}

/// `ln(mean(f²) + ENERGY_EPS)` per windowed frame.
pub fn frame_energy(frames: &[Vec<f64>]) -> Vec<f64> {
    frames
        .iter()
        .map(|f| {
            let ms = if f.is_empty() {
                0.0
            } else {
                f.iter().map(|x| x * x).sum::<f64>() / f.len() as f64
            };
            (ms + ENERGY_EPS).ln()
        })
        .collect()
}

/// Per-dimension z-score statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    /// Population mean/std over every frame of every track. Std is floored
    /// at [`STD_FLOOR`].
    pub fn fit<'a>(tracks: impl IntoIterator<Item = &'a ConditionTrack>) -> Result<Self> {
        let mut dim = None;
        let mut count = 0usize;
        let mut sum: Vec<f64> = Vec::new();
        let mut rows: Vec<&[f64]> = Vec::new();
        for t in tracks {
            if t.normalized {
                return Err(Error::Shape("fitting stats on normalized features".into()));
            }
            match dim {
                None => {
                    dim = Some(t.dim);
                    sum = vec![0.0; t.dim];
                }
                Some(d) if d != t.dim => {
                    return Err(Error::LengthMismatch {
                        what: "condition dimension",
                        expected: d,
                        actual: t.dim,
                    })
                }
                _ => {}
            }
            for row in &t.values {
                for (s, v) in sum.iter_mut().zip(row) {
                    *s += v;
                }
                rows.push(row);
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::Shape("no frames to fit normalization".into()));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut var = vec![0.0; mean.len()];
        for row in rows {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var
            .iter()
            .map(|v| (v / count as f64).sqrt().max(STD_FLOOR))
            .collect();
        Ok(Self { mean, std })
    }
}

/// Frame-level conditioning matrix with layout `[lsf_1..lsf_p, log_f0, energy, vuv]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionTrack {
    pub order: usize,
    pub dim: usize,
    pub values: Vec<Vec<f64>>,
    pub stats: Option<NormStats>,
    pub normalized: bool,
}

impl ConditionTrack {
    pub fn n_frames(&self) -> usize {
        self.values.len()
    }

    pub fn log_f0_index(&self) -> usize {
        self.order
    }

    pub fn energy_index(&self) -> usize {
        self.order + 1
    }

    pub fn vuv_index(&self) -> usize {
        self.order + 2
    }

    /// Z-scores the values with `stats` and keeps the stats for inversion.
    pub fn normalize(&mut self, stats: &NormStats) -> Result<()> {
        if self.normalized {
            return Err(Error::Shape("track already normalized".into()));
        }
        if stats.mean.len() != self.dim {
            return Err(Error::LengthMismatch {
                what: "normalization stats dimension",
                expected: self.dim,
                actual: stats.mean.len(),
            });
        }
        for row in &mut self.values {
            for ((x, m), s) in row.iter_mut().zip(&stats.mean).zip(&stats.std) {
                *x = (*x - m) / s;
            }
        }
        self.stats = Some(stats.clone());
        self.normalized = true;
        Ok(())
    }

    pub fn denormalize(&mut self) -> Result<()> {
        let stats = match (&self.stats, self.normalized) {
            (Some(s), true) => s.clone(),
            _ => return Err(Error::Shape("track is not normalized".into())),
        };
        for row in &mut self.values {
            for ((x, m), s) in row.iter_mut().zip(&stats.mean).zip(&stats.std) {
                *x = *x * s + m;
            }
        }
        self.normalized = false;
        Ok(())
    }

    /// Copy of this track expressed under different normalization statistics.
    pub fn renormalized(&self, stats: &NormStats) -> Result<Self> {
        let mut t = self.clone();
        if t.normalized {
            t.denormalize()?;
        }
        t.normalize(stats)?;
        Ok(t)
    }
}

/// Stacks the per-frame features into an unnormalized [`ConditionTrack`].
/// Unvoiced frames receive the utterance's mean voiced log-F0.
pub fn assemble_conditions(
    lsf: &LsfTrack,
    pitch: &[PitchFrame],
    energy: &[f64],
) -> Result<ConditionTrack> {
    let n = lsf.n_frames();
    for (what, len) in [("pitch frames", pitch.len()), ("energy frames", energy.len())] {
        if len != n {
            return Err(Error::LengthMismatch {
                what,
                expected: n,
                actual: len,
            });
        }
    }
    let voiced: Vec<f64> = pitch
        .iter()
        .filter(|p| p.voiced)
        .map(|p| p.f0_hz.ln())
        .collect();
    let fill = if voiced.is_empty() {
        DEFAULT_LOG_F0_FILL
    } else {
        voiced.iter().sum::<f64>() / voiced.len() as f64
    };
    let values = lsf
        .frames
        .iter()
        .zip(pitch)
        .zip(energy)
        .map(|((w, p), &e)| {
            let mut row = w.clone();
            row.push(if p.voiced { p.f0_hz.ln() } else { fill });
            row.push(e);
            row.push(if p.voiced { 1.0 } else { 0.0 });
            row
        })
        .collect();
    Ok(ConditionTrack {
        order: lsf.order,
        dim: lsf.order + 3,
        values,
        stats: None,
        normalized: false,
    })
}

/// Duplicates frame rows to samples `start..start + len`: sample `n` takes
/// frame `min(n / shift, n_frames - 1)`.
pub fn upsample_range<A: Float>(
    track: &ConditionTrack,
    grid: &FrameGrid,
    start: usize,
    len: usize,
) -> Array2<A> {
    let mut out = Array2::zeros((len, track.dim));
    for (r, mut row) in out.rows_mut().into_iter().enumerate() {
        let frame = &track.values[grid.frame_of(start + r).min(track.n_frames() - 1)];
        for (dst, &v) in row.iter_mut().zip(frame) {
            *dst = A::from(v).unwrap();
        }
    }
    out
}

/// Sample-level condition matrix (`N × dim`) for the whole utterance.
pub fn upsample_conditions<A: Float>(track: &ConditionTrack, grid: &FrameGrid) -> Array2<A> {
    upsample_range(track, grid, 0, grid.n_samples)
}
