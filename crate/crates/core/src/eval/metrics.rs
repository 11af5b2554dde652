//! Objective distortion measures between a reference and a test waveform.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::lp::Window;

pub const LSD_FFT: usize = 1024;
pub const LSD_HOP: usize = 256;
pub const LSD_FLOOR_DB: f64 = -80.0;
pub const SEG_FRAME: usize = 240;
pub const SEG_MIN_DB: f64 = -10.0;
pub const SEG_MAX_DB: f64 = 35.0;

/// `y` cut or zero-padded to `len`, logging the adjustment.
fn aligned(y: &[f64], len: usize, what: &str) -> Vec<f64> {
    if y.len() != len {
        log::warn!("{what}: test signal has {} samples, reference {len}; aligning", y.len());
    }
    let mut out: Vec<f64> = y.iter().take(len).copied().collect();
    out.resize(len, 0.0);
    out
}

fn log_spectra(x: &[f64], fft: usize, hop: usize) -> Vec<Vec<f64>> {
    let window = Window::Hann.coefficients(fft);
    let plan = FftPlanner::<f64>::new().plan_fft_forward(fft);
    let n_frames = if x.len() <= fft {
        1
    } else {
        (x.len() - fft).div_ceil(hop) + 1
    };
    (0..n_frames)
        .map(|i| {
            let start = i * hop;
            let mut buf: Vec<Complex64> = (0..fft)
                .map(|k| Complex64::new(x.get(start + k).copied().unwrap_or(0.0) * window[k], 0.0))
                .collect();
            plan.process(&mut buf);
            buf[..=fft / 2]
                .iter()
                .map(|c| (20.0 * c.norm().log10()).max(LSD_FLOOR_DB))
                .collect()
        })
        .collect()
}

/// Root mean square over frames of the per-frame RMS difference between the
/// dB magnitude spectra (Hann window, floor at -80 dB).
pub fn log_spectral_distortion_with(x: &[f64], y: &[f64], fft: usize, hop: usize) -> Result<f64> {
    if x.is_empty() || fft < 2 || hop == 0 {
        return Err(Error::Metric(format!(
            "degenerate input: {} samples, fft {fft}, hop {hop}",
            x.len()
        )));
    }
    let y = aligned(y, x.len(), "log-spectral distortion");
    let sx = log_spectra(x, fft, hop);
    let sy = log_spectra(&y, fft, hop);
    let per_frame: Vec<f64> = sx
        .iter()
        .zip(&sy)
        .map(|(a, b)| {
            a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>() / a.len() as f64
        })
        .collect();
    Ok((per_frame.iter().sum::<f64>() / per_frame.len() as f64).sqrt())
}

pub fn log_spectral_distortion(x: &[f64], y: &[f64]) -> Result<f64> {
    log_spectral_distortion_with(x, y, LSD_FFT, LSD_HOP)
}

/// Mean over non-overlapping frames of `10 log10(Σx² / Σ(x-y)²)`, each frame
/// clamped to `[-10, 35]` dB. The trailing partial frame counts as a frame.
pub fn segmental_snr_with(x: &[f64], y: &[f64], frame: usize) -> Result<f64> {
    if x.is_empty() || frame == 0 {
        return Err(Error::Metric(format!("degenerate input: {} samples, frame {frame}", x.len())));
    }
    let y = aligned(y, x.len(), "segmental SNR");
    let snrs: Vec<f64> = x
        .chunks(frame)
        .zip(y.chunks(frame))
        .map(|(a, b)| {
            let signal: f64 = a.iter().map(|v| v * v).sum();
            let noise: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum();
            let db = if noise == 0.0 {
                SEG_MAX_DB
            } else if signal == 0.0 {
                SEG_MIN_DB
            } else {
                10.0 * (signal / noise).log10()
            };
            db.clamp(SEG_MIN_DB, SEG_MAX_DB)
        })
        .collect();
    Ok(snrs.iter().sum::<f64>() / snrs.len() as f64)
}

pub fn segmental_snr(x: &[f64], y: &[f64]) -> Result<f64> {
    segmental_snr_with(x, y, SEG_FRAME)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::white_noise;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn noise(seed: u64, n: usize) -> Vec<f64> {
        white_noise(&mut ChaCha8Rng::seed_from_u64(seed), n, 0.3)
    }

    #[test]
    fn lsd_identity_and_gain() {
        let x = noise(1, 8000);
        assert_eq!(log_spectral_distortion(&x, &x).unwrap(), 0.0);
        let half: Vec<f64> = x.iter().map(|v| 0.5 * v).collect();
        let d = log_spectral_distortion(&x, &half).unwrap();
        assert!((d - 20.0 * 2f64.log10()).abs() < 1e-6, "{d}");
    }

    #[test]
    fn lsd_is_symmetric() {
        let (x, y) = (noise(2, 5000), noise(3, 5000));
        let a = log_spectral_distortion(&x, &y).unwrap();
        let b = log_spectral_distortion(&y, &x).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn lsd_independent_noise_is_stable_across_seeds() {
        let values: Vec<f64> = (0..5)
            .map(|s| log_spectral_distortion(&noise(10 + s, 16000), &noise(100 + s, 16000)).unwrap())
            .collect();
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo > 0.0);
        assert!(hi - lo < 2.0, "{values:?}");
        let mean = values.iter().sum::<f64>() / 5.0;
        assert!(values.iter().all(|v| (v - mean).abs() <= 1.0));
    }

    #[test]
    fn segsnr_anchors() {
        let x = noise(4, 2400);
        assert_eq!(segmental_snr(&x, &x).unwrap(), 35.0);
        let zero = vec![0.0; 2400];
        assert!(segmental_snr(&x, &zero).unwrap().abs() < 1e-12);
        let tiny: Vec<f64> = x.iter().zip(noise(5, 2400)).map(|(a, b)| a + 1e-6 * b).collect();
        assert!(segmental_snr(&x, &tiny).unwrap() > 34.9);
    }

    #[test]
    fn segsnr_decreases_with_noise_power() {
        let x = noise(6, 4800);
        let n = noise(7, 4800);
        let snr: Vec<f64> = [0.01, 0.1, 1.0]
            .iter()
            .map(|g| {
                let y: Vec<f64> = x.iter().zip(&n).map(|(a, b)| a + g * b).collect();
                segmental_snr(&x, &y).unwrap()
            })
            .collect();
        assert!(snr[0] > snr[1] && snr[1] > snr[2], "{snr:?}");
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(log_spectral_distortion(&[], &[]).is_err());
        assert!(segmental_snr(&[], &[]).is_err());
    }

    #[test]
    fn mismatched_lengths_are_aligned() {
        let x = noise(8, 3000);
        let d = log_spectral_distortion(&x, &x[..2000]).unwrap();
        assert!(d > 0.0);
        let mut longer = x.clone();
        longer.extend([0.5; 100]);
        assert_eq!(log_spectral_distortion(&x, &longer).unwrap(), 0.0);
    }
}
