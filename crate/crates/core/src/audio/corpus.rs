//! Seeded generator of speech-like utterances.
//!
//! Each utterance is a slowly time-varying all-pole process. The filter is a
//! cascade of wandering resonances (pole pairs with modulus capped at
//! [`MAX_POLE_RADIUS`]), driven by a pitch-pulse train with wandering F0,
//! white noise, or silence, depending on the segment type. The generator
//! returns the true per-block predictor coefficients and F0 alongside the
//! waveform so tests can compare estimates against ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::manifest::{DatasetManifest, ManifestEntry, Split};
use super::wav::quantize;
use super::Waveform;
use crate::error::{Error, Result};

pub const MAX_POLE_RADIUS: f64 = 0.98;

/// Samples between filter coefficient updates at 16 kHz (scaled with rate).
const BLOCK_MS: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExcitationMix {
    /// Silence, voiced and unvoiced segments.
    Mixed,
    PulseOnly,
    NoiseOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    pub n_utterances: usize,
    pub n_valid: usize,
    pub n_test: usize,
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    pub sample_rate: u32,
    /// Order of the generating all-pole filter.
    pub ar_order: usize,
    pub f0_min_hz: f64,
    pub f0_max_hz: f64,
    pub mix: ExcitationMix,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            n_utterances: 20,
            n_valid: 2,
            n_test: 3,
            min_duration_s: 0.8,
            max_duration_s: 1.2,
            sample_rate: 16000,
            ar_order: 10,
            f0_min_hz: 80.0,
            f0_max_hz: 300.0,
            mix: ExcitationMix::Mixed,
        }
    }
}

impl CorpusSpec {
    /// Every violated constraint.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_utterances == 0 {
            out.push("zero utterances".into());
        }
        if self.n_valid + self.n_test > self.n_utterances {
            out.push("valid + test exceed utterance count".into());
        }
        if !(self.min_duration_s > 0.0) || self.max_duration_s < self.min_duration_s {
            out.push(format!(
                "duration range [{}, {}] s",
                self.min_duration_s, self.max_duration_s
            ));
        }
        if self.sample_rate < 4000 {
            out.push(format!("sample rate {} Hz", self.sample_rate));
        }
        if self.ar_order < 1 {
            out.push("ar_order < 1".into());
        }
        if !(self.f0_min_hz > 0.0)
            || self.f0_max_hz < self.f0_min_hz
            || self.f0_max_hz >= self.sample_rate as f64 / 2.0
        {
            out.push(format!("f0 range [{}, {}] Hz", self.f0_min_hz, self.f0_max_hz));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.problems().into_iter().next() {
            Some(p) => Err(Error::InvalidCorpusSpec(p)),
            None => Ok(()),
        }
    }

    fn split_of(&self, index: usize) -> Split {
        let n_train = self.n_utterances - self.n_valid - self.n_test;
        if index < n_train {
            Split::Train
        } else if index < n_train + self.n_valid {
            Split::Valid
        } else {
            Split::Test
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthUtterance {
    pub id: String,
    pub split: Split,
    pub waveform: Waveform,
    /// Samples per entry of `true_coeffs` / `true_f0_hz`.
    pub block_len: usize,
    /// Generating predictor coefficients per block (`x_n = g·u_n + Σ c_k x_{n-k}`).
    pub true_coeffs: Vec<Vec<f64>>,
    /// F0 per block; 0 where the block is not voiced.
    pub true_f0_hz: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Segment {
    Silence,
    Voiced,
    Unvoiced,
}

/// Generates the whole corpus. Utterance `i` depends only on `(spec, seed, i)`.
pub fn synth_corpus(spec: &CorpusSpec, seed: u64) -> Result<(DatasetManifest, Vec<SynthUtterance>)> {
    spec.validate()?;
    let utterances: Vec<SynthUtterance> = (0..spec.n_utterances)
        .map(|i| synth_utterance(spec, seed, i))
        .collect::<Result<_>>()?;
    let manifest = DatasetManifest {
        seed,
        entries: utterances
            .iter()
            .map(|u| ManifestEntry {
                id: u.id.clone(),
                source: format!("wav/{}.wav", u.id),
                split: u.split,
            })
            .collect(),
    };
    Ok((manifest, utterances))
}

/// Resonance whose centre frequency and bandwidth wander sinusoidally.
struct Resonance {
    centre_hz: f64,
    depth: f64,
    rate_hz: f64,
    phase: f64,
    bandwidth_hz: f64,
}

impl Resonance {
    fn pole(&self, t: f64, sample_rate: f64) -> (f64, f64) {
        let f = self.centre_hz
            * (1.0 + self.depth * (2.0 * std::f64::consts::PI * self.rate_hz * t + self.phase).sin());
        let radius = (-std::f64::consts::PI * self.bandwidth_hz / sample_rate)
            .exp()
            .min(MAX_POLE_RADIUS);
        (radius, 2.0 * std::f64::consts::PI * f / sample_rate)
    }
}

/// Multiplies out `Π (1 - 2 r cos θ z^-1 + r² z^-2)` (times `(1 - r0 z^-1)` when
/// `real_pole` is set) and returns predictor coefficients.
fn predictor_from_poles(pairs: &[(f64, f64)], real_pole: Option<f64>) -> Vec<f64> {
    let mut poly = vec![1.0];
    let mut mul = |factor: &[f64]| {
        let mut next = vec![0.0; poly.len() + factor.len() - 1];
        for (i, &a) in poly.iter().enumerate() {
            for (j, &b) in factor.iter().enumerate() {
                next[i + j] += a * b;
            }
        }
        poly = next;
    };
    for &(r, theta) in pairs {
        mul(&[1.0, -2.0 * r * theta.cos(), r * r]);
    }
    if let Some(r0) = real_pole {
        mul(&[1.0, -r0]);
    }
    poly[1..].iter().map(|a| -a).collect()
}

fn derive_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((index as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9))
        ^ 0x94D0_49BB_1331_11EB
}

pub fn synth_utterance(spec: &CorpusSpec, seed: u64, index: usize) -> Result<SynthUtterance> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, index));
    let rate = spec.sample_rate as f64;
    let duration = rng.random_range(spec.min_duration_s..=spec.max_duration_s);
    let n = ((duration * rate).round() as usize).max(1);
    let block_len = ((BLOCK_MS * 1e-3 * rate).round() as usize).max(1);

    // Resonances spread over the band, one per pole pair.
    let n_pairs = spec.ar_order / 2;
    let nyquist = rate / 2.0;
    let resonances: Vec<Resonance> = (0..n_pairs)
        .map(|k| {
            let slot = nyquist * 0.9 / n_pairs as f64;
            Resonance {
                centre_hz: slot * (k as f64 + 0.5 + rng.random_range(-0.2..0.2)),
                depth: rng.random_range(0.03..0.12),
                rate_hz: rng.random_range(0.5..3.0),
                phase: rng.random_range(0.0..std::f64::consts::TAU),
                bandwidth_hz: rng.random_range(180.0..450.0) * (rate / 16000.0),
            }
        })
        .collect();
    let real_pole = (spec.ar_order % 2 == 1).then(|| rng.random_range(0.5..0.8));

    // Segment plan.
    let mut plan = Vec::new();
    let mut pos = 0;
    while pos < n {
        let len = ((rng.random_range(0.08..0.3) * rate) as usize).max(1);
        let kind = match spec.mix {
            ExcitationMix::PulseOnly => Segment::Voiced,
            ExcitationMix::NoiseOnly => Segment::Unvoiced,
            ExcitationMix::Mixed => {
                let u: f64 = rng.random();
                if u < 0.12 {
                    Segment::Silence
                } else if u < 0.75 {
                    Segment::Voiced
                } else {
                    Segment::Unvoiced
                }
            }
        };
        plan.push((pos, (pos + len).min(n), kind));
        pos += len;
    }
    // An utterance needs some excitation; an all-silent plan gets a voiced tail.
    if plan.iter().all(|&(_, _, k)| matches!(k, Segment::Silence)) {
        if let Some(last) = plan.last_mut() {
            last.2 = Segment::Voiced;
        }
    }

    // Smoothed gains per excitation type to avoid clicks at segment edges.
    let ramp = (0.01 * rate) as usize;
    let target = |kind: Segment| match kind {
        Segment::Silence => (0.0, 0.0),
        Segment::Voiced => (1.0, 0.03),
        Segment::Unvoiced => (0.0, 0.6),
    };
    let mut voiced_gain = vec![0.0; n];
    let mut noise_gain = vec![0.0; n];
    for &(start, end, kind) in &plan {
        let (v, u) = target(kind);
        for i in start..end {
            voiced_gain[i] = v;
            noise_gain[i] = u;
        }
    }
    let smooth = |g: &mut Vec<f64>| {
        if ramp < 2 {
            return;
        }
        let a = 1.0 / ramp as f64;
        let mut state = g[0];
        for x in g.iter_mut() {
            state += a * (*x - state);
            *x = state;
        }
    };
    smooth(&mut voiced_gain);
    smooth(&mut noise_gain);

    // F0 trajectory: bounded random walk in log frequency.
    let (lo, hi) = (spec.f0_min_hz.ln(), spec.f0_max_hz.ln());
    let mut log_f0 = rng.random_range(lo..=hi);
    let mut drift = 0.0;
    let mut phase = 1.0;
    let mut samples = vec![0.0; n];
    let mut coeffs = Vec::new();
    let mut f0_blocks = Vec::new();
    let mut current: Vec<f64> = Vec::new();

    for i in 0..n {
        if i % block_len == 0 {
            let t = i as f64 / rate;
            let poles: Vec<(f64, f64)> = resonances.iter().map(|r| r.pole(t, rate)).collect();
            current = predictor_from_poles(&poles, real_pole);
            drift = 0.95 * drift + 0.004 * rng.sample::<f64, _>(StandardNormal);
            log_f0 = (log_f0 + drift).clamp(lo, hi);
            if log_f0 <= lo || log_f0 >= hi {
                drift = -drift;
            }
            let voiced_block = voiced_gain[i] > 0.5;
            f0_blocks.push(if voiced_block { log_f0.exp() } else { 0.0 });
            coeffs.push(current.clone());
        }
        let f0 = log_f0.exp();
        let period = rate / f0;
        phase += 1.0 / period;
        let pulse = if phase >= 1.0 {
            phase -= 1.0;
            period.sqrt()
        } else {
            0.0
        };
        let noise: f64 = rng.sample(StandardNormal);
        let drive = voiced_gain[i] * pulse + noise_gain[i] * noise;
        let mut acc = drive;
        for (k, c) in current.iter().enumerate() {
            if i > k {
                acc += c * samples[i - k - 1];
            }
        }
        samples[i] = acc;
    }

    let peak = samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let level = rng.random_range(0.5..0.9);
    let scale = if peak > 0.0 { level / peak } else { 0.0 };
    // Land exactly on the PCM16 read grid so WAV export/import is lossless.
    let samples = samples
        .iter()
        .map(|x| quantize(x * scale) as f64 / 32768.0)
        .collect();

    Ok(SynthUtterance {
        id: format!("utt{index:04}"),
        split: spec.split_of(index),
        waveform: Waveform::new(samples, spec.sample_rate),
        block_len,
        true_coeffs: coeffs,
        true_f0_hz: f0_blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CorpusSpec {
        CorpusSpec {
            n_utterances: 4,
            n_valid: 1,
            n_test: 1,
            min_duration_s: 0.2,
            max_duration_s: 0.3,
            ..CorpusSpec::default()
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let (m1, a) = synth_corpus(&small(), 7).unwrap();
        let (m2, b) = synth_corpus(&small(), 7).unwrap();
        assert_eq!(m1, m2);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.waveform, y.waveform);
        }
        let (_, c) = synth_corpus(&small(), 8).unwrap();
        assert_ne!(a[0].waveform, c[0].waveform);
    }

    #[test]
    fn splits_are_assigned() {
        let (m, _) = synth_corpus(&small(), 1).unwrap();
        m.validate(true).unwrap();
        assert_eq!(m.split(Split::Train).count(), 2);
    }

    #[test]
    fn waveforms_are_normalized() {
        let (_, utts) = synth_corpus(&small(), 3).unwrap();
        for u in utts {
            assert!(u.waveform.is_normalized());
            assert!(u.waveform.samples.iter().any(|&x| x != 0.0));
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = small();
        s.ar_order = 0;
        assert!(synth_corpus(&s, 0).is_err());
        let mut s = small();
        s.min_duration_s = 0.0;
        s.max_duration_s = 0.0;
        assert!(synth_corpus(&s, 0).is_err());
    }

    #[test]
    fn generating_filters_are_stable() {
        for order in [1, 4, 9, 10, 16] {
            let spec = CorpusSpec {
                ar_order: order,
                ..small()
            };
            let u = synth_utterance(&spec, 11, 0).unwrap();
            for c in &u.true_coeffs {
                assert_eq!(c.len(), order);
                let k = crate::lp::reflection_from_predictor(c).unwrap();
                assert!(k.iter().all(|k| k.abs() < 1.0));
                let radius = crate::lp::max_pole_radius(c);
                assert!(radius <= MAX_POLE_RADIUS + 1e-9, "radius {radius}");
            }
        }
    }
}
