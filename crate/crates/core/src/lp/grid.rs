use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Hann,
    Rectangular,
}

impl Window {
    pub fn coefficients(self, length: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; length],
            Window::Hann => (0..length)
                .map(|n| {
                    let phase = std::f64::consts::TAU * (n as f64 + 0.5) / length as f64;
                    0.5 - 0.5 * phase.cos()
                })
                .collect(),
        }
    }
}

/// Where an analysis frame sits relative to the hop it describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameAlign {
    /// Frame `i` covers `[i·shift, i·shift + length)`.
    Start,
    /// Frame `i` is centred on the middle of hop `[i·shift, (i+1)·shift)`.
    Centered,
}

/// Frame geometry shared by analysis, filtering and conditioning.
///
/// Hop `i` owns samples `[i·shift, (i+1)·shift)`; per-frame parameters are
/// held constant over their hop. `n_frames = ceil(n_samples / shift)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameGrid {
    pub shift: usize,
    pub length: usize,
    pub n_frames: usize,
    pub n_samples: usize,
    pub window: Window,
    pub align: FrameAlign,
}

impl FrameGrid {
    pub fn new(
        n_samples: usize,
        shift: usize,
        length: usize,
        window: Window,
        align: FrameAlign,
    ) -> Result<Self> {
        if shift == 0 || shift > length {
            return Err(Error::InvalidGrid(format!(
                "need 0 < shift <= length, got shift {shift}, length {length}"
            )));
        }
        if n_samples == 0 {
            return Err(Error::EmptyWaveform);
        }
        Ok(Self {
            shift,
            length,
            n_frames: n_samples.div_ceil(shift),
            n_samples,
            window,
            align,
        })
    }

    /// Grid from millisecond durations, e.g. 5 ms hop at 16 kHz gives 80 samples.
    pub fn from_ms(
        n_samples: usize,
        sample_rate: u32,
        shift_ms: f64,
        length_ms: f64,
        window: Window,
    ) -> Result<Self> {
        let to_samples = |ms: f64| (ms * 1e-3 * sample_rate as f64).round() as usize;
        Self::new(
            n_samples,
            to_samples(shift_ms),
            to_samples(length_ms),
            window,
            FrameAlign::Centered,
        )
    }

    /// First sample index (possibly negative) covered by frame `i`.
    pub fn frame_start(&self, i: usize) -> isize {
        let hop = (i * self.shift) as isize;
        match self.align {
            FrameAlign::Start => hop,
            FrameAlign::Centered => hop + (self.shift / 2) as isize - (self.length / 2) as isize,
        }
    }

    /// Frame whose parameters apply to sample `n`.
    #[inline]
    pub fn frame_of(&self, n: usize) -> usize {
        (n / self.shift).min(self.n_frames - 1)
    }

    /// Same geometry for a signal of a different length.
    pub fn with_samples(&self, n_samples: usize) -> Result<Self> {
        Self::new(n_samples, self.shift, self.length, self.window, self.align)
    }
}

/// Cuts `signal` into windowed frames, zero-padding outside the signal.
pub fn frame_signal(signal: &[f64], grid: &FrameGrid) -> Result<Vec<Vec<f64>>> {
    if signal.is_empty() {
        return Err(Error::EmptyWaveform);
    }
    if signal.len() != grid.n_samples {
        return Err(Error::LengthMismatch {
            what: "signal vs grid",
            expected: grid.n_samples,
            actual: signal.len(),
        });
    }
    let window = grid.window.coefficients(grid.length);
    Ok((0..grid.n_frames)
        .map(|i| {
            let start = grid.frame_start(i);
            window
                .iter()
                .enumerate()
                .map(|(j, w)| {
                    let n = start + j as isize;
                    if n >= 0 && (n as usize) < signal.len() {
                        w * signal[n as usize]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect())
}
