//! Mode-specific training data, synthesis and system comparison.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::container::{FeatureContainer, UtteranceRecord};
use super::metrics::{log_spectral_distortion, segmental_snr};
use crate::audio::Split;
use crate::error::{Error, Result};
use crate::excitation::decode_symbols;
use crate::features::upsample_conditions;
use crate::lp::{lp_synthesis_filter, StabilityPolicy, TrackSource};
use crate::vocoder::{sample, sequence_nll, ModelCheckpoint, Sequence, TrainMode, TrainSet};

fn sequence_for(record: &UtteranceRecord, mode: TrainMode, container: &FeatureContainer) -> Result<Sequence> {
    let source = mode.condition_source();
    let cond = record.condition(source).renormalized(container.norm(source))?;
    let symbols = record
        .excitation(mode.target())
        .and_then(|t| t.symbols.clone())
        .ok_or_else(|| Error::Training(format!("{}: no {:?} excitation symbols", record.id, mode.target())))?;
    Sequence::new(record.id.clone(), upsample_conditions(&cond, &record.grid), symbols)
        .map_err(|e| e.in_utterance(&record.id))
}

/// Training and validation sequences with the conditions and targets `mode`
/// calls for.
pub fn train_set(container: &FeatureContainer, mode: TrainMode) -> Result<TrainSet> {
    let seqs = |split: Split| {
        container
            .split(split)
            .map(|r| sequence_for(r, mode, container))
            .collect::<Result<Vec<_>>>()
    };
    let source = mode.condition_source();
    Ok(TrainSet {
        condition_source: source,
        target: mode.target(),
        norm: container.norm(source).clone(),
        train: seqs(Split::Train)?,
        valid: seqs(Split::Valid)?,
    })
}

/// Which conditions drive the network and which coefficients drive the
/// synthesis filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisSetup {
    pub conditions: TrackSource,
    pub filter: TrackSource,
}

impl SynthesisSetup {
    /// Generated conditions and generated coefficients, as in text-to-speech.
    pub const TTS: Self = Self {
        conditions: TrackSource::Generated,
        filter: TrackSource::Generated,
    };

    /// The setup a model's own training mode implies.
    pub fn for_mode(mode: TrainMode) -> Self {
        let s = mode.condition_source();
        Self {
            conditions: s,
            filter: s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub symbols: Vec<u8>,
    pub excitation: Vec<f64>,
    pub waveform: Vec<f64>,
}

/// Sampled excitation, scaled by the stored gain of the model's target
/// kind, through the all-pole synthesis filter.
pub fn synthesize(
    record: &UtteranceRecord,
    checkpoint: &ModelCheckpoint,
    setup: SynthesisSetup,
    seed: u64,
) -> Result<Synthesis> {
    let cond = record.condition(setup.conditions).renormalized(&checkpoint.norm)?;
    let rows = upsample_conditions::<f32>(&cond, &record.grid);
    let symbols = sample(&checkpoint.params, rows.view(), seed)?;
    let gain = record
        .excitation(checkpoint.provenance.target)
        .and_then(|t| t.gain)
        .ok_or_else(|| Error::Shape("record lacks the target excitation gain".into()))?;
    let excitation = decode_symbols(&symbols, gain);
    let waveform = lp_synthesis_filter(
        &excitation,
        record.coeffs(setup.filter),
        &record.grid,
        StabilityPolicy::Refuse,
    )?;
    Ok(Synthesis {
        symbols,
        excitation,
        waveform,
    })
}

/// Per-utterance sampling seed.
pub fn utterance_seed(seed: u64, mode: TrainMode, index: usize) -> u64 {
    let m = TrainMode::ALL.iter().position(|&x| x == mode).unwrap() as u64;
    seed ^ (m + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (index as u64 + 1).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UttMetrics {
    pub id: String,
    pub lsd_db: f64,
    pub seg_snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemReport {
    pub system: TrainMode,
    pub per_utt: Vec<UttMetrics>,
    pub median_lsd_db: f64,
    pub mean_lsd_db: f64,
    pub mean_seg_snr_db: f64,
    /// Mean NLL on the validation split under the system's own training data.
    pub final_valid_nll: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDelta {
    /// `first` minus `second`.
    pub first: TrainMode,
    pub second: TrainMode,
    pub per_utt: Vec<UttMetrics>,
    pub mean_lsd_db: f64,
    pub mean_seg_snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    pub systems: Vec<SystemReport>,
    /// Systems that could not be evaluated.
    pub gaps: Vec<String>,
    pub deltas: Vec<PairDelta>,
    /// LSD of an all-zero output per test utterance.
    pub silence_lsd_db: Vec<UttMetrics>,
}

/// Compared pairs, in report order.
pub const DELTA_PAIRS: [(TrainMode, TrainMode); 4] = [
    (TrainMode::Mbg, TrainMode::Plain),
    (TrainMode::G, TrainMode::Plain),
    (TrainMode::MbgStar, TrainMode::Plain),
    (TrainMode::MbgStar, TrainMode::Mbg),
];

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    s / n as f64
}

impl EvalReport {
    pub fn system(&self, mode: TrainMode) -> Option<&SystemReport> {
        self.systems.iter().find(|s| s.system == mode)
    }

    pub fn delta(&self, first: TrainMode, second: TrainMode) -> Option<&PairDelta> {
        self.deltas.iter().find(|d| d.first == first && d.second == second)
    }

    /// `system,utt,lsd_db,seg_snr_db` rows, silence baseline included as
    /// system `silence`.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("system,utt,lsd_db,seg_snr_db\n");
        for s in &self.systems {
            for u in &s.per_utt {
                out.push_str(&format!("{},{},{},{}\n", s.system, u.id, u.lsd_db, u.seg_snr_db));
            }
        }
        for u in &self.silence_lsd_db {
            out.push_str(&format!("silence,{},{},{}\n", u.id, u.lsd_db, u.seg_snr_db));
        }
        out
    }

    /// `pair,utt,delta_lsd_db,delta_seg_snr_db` rows.
    pub fn deltas_csv(&self) -> String {
        let mut out = String::from("pair,utt,delta_lsd_db,delta_seg_snr_db\n");
        for d in &self.deltas {
            for u in &d.per_utt {
                out.push_str(&format!(
                    "{}-{},{},{},{}\n",
                    d.first, d.second, u.id, u.lsd_db, u.seg_snr_db
                ));
            }
        }
        out
    }

    pub fn summary_text(&self) -> String {
        let mut out = format!("evaluation (sampling seed {})\n\n", self.seed);
        out.push_str("system     median LSD  mean LSD  segSNR   valid NLL\n");
        for s in &self.systems {
            out.push_str(&format!(
                "{:<10} {:>8.3}  {:>8.3}  {:>7.3}  {:>8.4}\n",
                s.system.as_str(),
                s.median_lsd_db,
                s.mean_lsd_db,
                s.mean_seg_snr_db,
                s.final_valid_nll
            ));
        }
        let silence: Vec<f64> = self.silence_lsd_db.iter().map(|u| u.lsd_db).collect();
        out.push_str(&format!("{:<10} {:>8.3}\n", "silence", median(&silence)));
        if !self.deltas.is_empty() {
            out.push_str("\npair            mean dLSD  mean dsegSNR\n");
            for d in &self.deltas {
                out.push_str(&format!(
                    "{:<15} {:>9.3}  {:>11.3}\n",
                    format!("{}-{}", d.first, d.second),
                    d.mean_lsd_db,
                    d.mean_seg_snr_db
                ));
            }
        }
        for g in &self.gaps {
            out.push_str(&format!("\nmissing: {g}"));
        }
        if !self.gaps.is_empty() {
            out.push('\n');
        }
        out
    }
}

/// Synthesizes every test utterance with every available system under
/// generated conditions and generated coefficients, and scores the result
/// against the recorded waveform.
pub fn evaluate_systems(
    container: &FeatureContainer,
    checkpoints: &BTreeMap<TrainMode, ModelCheckpoint>,
    seed: u64,
) -> Result<EvalReport> {
    let dim = container.analysis.condition_dim();
    for (mode, ckpt) in checkpoints {
        if ckpt.config().condition_dim != dim {
            return Err(Error::Shape(format!(
                "{mode} checkpoint expects {} condition dims, container has {dim}",
                ckpt.config().condition_dim
            )));
        }
        if ckpt.provenance.mode != *mode {
            return Err(Error::Training(format!(
                "checkpoint supplied as {mode} was trained as {}",
                ckpt.provenance.mode
            )));
        }
    }
    let test: Vec<&UtteranceRecord> = container.split(Split::Test).collect();
    if test.is_empty() {
        return Err(Error::InvalidManifest("no test utterances".into()));
    }
    let mut systems = Vec::new();
    let mut gaps = Vec::new();
    for mode in TrainMode::ALL {
        let Some(ckpt) = checkpoints.get(&mode) else {
            gaps.push(format!("{mode}: no checkpoint"));
            continue;
        };
        let per_utt = test
            .par_iter()
            .enumerate()
            .map(|(i, rec)| {
                let out = synthesize(rec, ckpt, SynthesisSetup::TTS, utterance_seed(seed, mode, i))
                    .map_err(|e| e.in_utterance(&rec.id))?;
                Ok(UttMetrics {
                    id: rec.id.clone(),
                    lsd_db: log_spectral_distortion(&rec.waveform, &out.waveform)?,
                    seg_snr_db: segmental_snr(&rec.waveform, &out.waveform)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let lsd: Vec<f64> = per_utt.iter().map(|u| u.lsd_db).collect();
        let valid = super::systems::train_set(container, mode)?.valid;
        systems.push(SystemReport {
            system: mode,
            median_lsd_db: median(&lsd),
            mean_lsd_db: mean(lsd.iter().copied()),
            mean_seg_snr_db: mean(per_utt.iter().map(|u| u.seg_snr_db)),
            final_valid_nll: sequence_nll(&ckpt.params, &valid)?,
            per_utt,
        });
    }
    let mut deltas = Vec::new();
    for (first, second) in DELTA_PAIRS {
        let (Some(a), Some(b)) = (
            systems.iter().find(|s| s.system == first),
            systems.iter().find(|s| s.system == second),
        ) else {
            continue;
        };
        let per_utt: Vec<UttMetrics> = a
            .per_utt
            .iter()
            .zip(&b.per_utt)
            .map(|(x, y)| UttMetrics {
                id: x.id.clone(),
                lsd_db: x.lsd_db - y.lsd_db,
                seg_snr_db: x.seg_snr_db - y.seg_snr_db,
            })
            .collect();
        deltas.push(PairDelta {
            first,
            second,
            mean_lsd_db: mean(per_utt.iter().map(|u| u.lsd_db)),
            mean_seg_snr_db: mean(per_utt.iter().map(|u| u.seg_snr_db)),
            per_utt,
        });
    }
    let silence_lsd_db = test
        .iter()
        .map(|rec| {
            let zeros = vec![0.0; rec.n_samples()];
            Ok(UttMetrics {
                id: rec.id.clone(),
                lsd_db: log_spectral_distortion(&rec.waveform, &zeros)?,
                seg_snr_db: segmental_snr(&rec.waveform, &zeros)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        seed,
        systems,
        gaps,
        deltas,
        silence_lsd_db,
    })
}
