//! Audio containers, PCM16 WAV I/O, dataset manifests and the seeded
//! synthetic speech-like corpus used by every experiment.

mod corpus;
mod manifest;
mod wav;

pub use corpus::{synth_corpus, synth_utterance, CorpusSpec, ExcitationMix, SynthUtterance};
pub use manifest::{DatasetManifest, ManifestEntry, Split};
pub use wav::{read_wav, read_wav_bytes, write_wav, wav_bytes};

/// Mono sample sequence with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// True when every sample is finite and inside `[-1, 1]`.
    pub fn is_normalized(&self) -> bool {
        self.sample_rate > 0
            && self
                .samples
                .iter()
                .all(|x| x.is_finite() && x.abs() <= 1.0)
    }
}
