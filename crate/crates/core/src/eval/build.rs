use std::path::Path;

use rayon::prelude::*;

use super::container::{AnalysisConfig, FeatureContainer, UtteranceRecord};
use crate::audio::{read_wav, DatasetManifest, ManifestEntry, Split, Waveform};
use crate::error::{Error, Result};
use crate::excitation::{
    extract_mbg, extract_plain, intermediate_prediction, mulaw, normalize, ExcitationTrack,
};
use crate::features::{
    assemble_conditions, estimate_f0, frame_energy, ConditionTrack, NormStats, PitchFrame,
};
use crate::lp::{analyze_waveform, frame_signal, CoeffTrack, LsfTrack, TrackSource};
use crate::surrogate::{generate_lsf, SurrogateConfig};

/// Largest tolerated `max |ê - e - e^am|` per utterance.
pub const DECOMPOSITION_TOL: f64 = 1e-10;

fn round32(v: f64) -> f64 {
    v as f32 as f64
}

fn round_rows(rows: &mut [Vec<f64>]) {
    rows.iter_mut().flatten().for_each(|v| *v = round32(*v));
}

fn round_conditions(mut c: ConditionTrack) -> ConditionTrack {
    round_rows(&mut c.values);
    c
}

/// Coefficients from LSFs, rounded to f32 and checked for stability.
fn coeffs_from(lsf: &LsfTrack) -> Result<CoeffTrack> {
    let mut track = lsf.to_coeffs()?;
    round_rows(&mut track.coeffs);
    if let Some(i) = track.first_unstable_frame() {
        return Err(Error::UnstableFilter(format!("frame {i} after f32 rounding")));
    }
    Ok(track)
}

/// Peak normalization with the stored (f32) samples as the source of truth
/// for the symbols.
fn canonical_excitation(track: &ExcitationTrack) -> Result<ExcitationTrack> {
    let mut t = normalize(track)?;
    t.raw.iter_mut().for_each(|v| *v = round32(*v));
    t.symbols = Some(mulaw::encode_all(&t.raw)?);
    Ok(t)
}

fn analyse_utterance(
    index: usize,
    entry: &ManifestEntry,
    wave: &Waveform,
    analysis: &AnalysisConfig,
    surrogate: &SurrogateConfig,
) -> Result<UtteranceRecord> {
    if wave.is_empty() {
        return Err(Error::EmptyWaveform);
    }
    let x: Vec<f64> = wave.samples.iter().map(|&v| round32(v)).collect();
    let grid = analysis.grid(x.len(), wave.sample_rate)?;

    let (analysed, _) = analyze_waveform(&x, &grid, analysis.order)?;
    let mut lsf_gt = LsfTrack::from_coeffs(&analysed)?;
    round_rows(&mut lsf_gt.frames);
    lsf_gt.validate()?;
    let alpha_gt = coeffs_from(&lsf_gt)?;

    let mut lsf_gen = generate_lsf(&lsf_gt, &surrogate.for_stream(index as u64))?;
    round_rows(&mut lsf_gen.frames);
    lsf_gen.validate()?;
    let alpha_gen = coeffs_from(&lsf_gen)?;

    let pitch: Vec<PitchFrame> = estimate_f0(&x, wave.sample_rate, &grid, &analysis.f0)?
        .into_iter()
        .map(|p| PitchFrame {
            f0_hz: round32(p.f0_hz),
            voiced: p.voiced,
        })
        .collect();
    let energy: Vec<f64> = frame_energy(&frame_signal(&x, &grid)?)
        .into_iter()
        .map(round32)
        .collect();
    let cond_gt = round_conditions(assemble_conditions(&lsf_gt, &pitch, &energy)?);
    let cond_gen = round_conditions(assemble_conditions(&lsf_gen, &pitch, &energy)?);

    let e = extract_plain(&x, &alpha_gt, &grid)?;
    let e_hat = extract_mbg(&x, &alpha_gen, &grid)?;
    let e_am = intermediate_prediction(&x, &alpha_gt, &alpha_gen, &grid)?;
    let residual = e_hat
        .raw
        .iter()
        .zip(&e.raw)
        .zip(&e_am.raw)
        .map(|((h, p), a)| (h - p - a).abs())
        .fold(0.0, f64::max);
    if !(residual < DECOMPOSITION_TOL) {
        return Err(Error::Decomposition(residual));
    }

    Ok(UtteranceRecord {
        id: entry.id.clone(),
        split: entry.split,
        sample_rate: wave.sample_rate,
        waveform: x,
        grid,
        lsf_gt,
        alpha_gt,
        lsf_gen,
        alpha_gen,
        pitch,
        energy,
        cond_gt,
        cond_gen,
        exc_plain: canonical_excitation(&e)?,
        exc_mbg: canonical_excitation(&e_hat)?,
        decomposition_residual: residual,
    })
}

/// Analysis, surrogate generation and excitation extraction for in-memory
/// waveforms. Condition statistics come from the training split.
pub fn build_from_waveforms(
    items: &[(ManifestEntry, Waveform)],
    analysis: &AnalysisConfig,
    surrogate: &SurrogateConfig,
) -> Result<FeatureContainer> {
    surrogate.validate(analysis.order)?;
    if let Some((_, first)) = items.first() {
        let problems = analysis.problems(first.sample_rate);
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        if let Some((entry, w)) = items.iter().find(|(_, w)| w.sample_rate != first.sample_rate) {
            return Err(Error::UnsupportedWav(format!(
                "{}: sample rate {} differs from {}",
                entry.id, w.sample_rate, first.sample_rate
            )));
        }
    }
    let records = items
        .par_iter()
        .enumerate()
        .map(|(i, (entry, wave))| {
            analyse_utterance(i, entry, wave, analysis, surrogate).map_err(|e| e.in_utterance(&entry.id))
        })
        .collect::<Result<Vec<_>>>()?;
    let train: Vec<&UtteranceRecord> = records.iter().filter(|r| r.split == Split::Train).collect();
    if train.is_empty() {
        return Err(Error::InvalidManifest("no training utterances to fit normalization".into()));
    }
    let norm_gt = NormStats::fit(train.iter().map(|r| &r.cond_gt))?;
    let norm_gen = NormStats::fit(train.iter().map(|r| &r.cond_gen))?;
    Ok(FeatureContainer {
        analysis: *analysis,
        surrogate: *surrogate,
        norm_gt,
        norm_gen,
        records,
    })
}

/// Reads every manifest entry (paths relative to `root`) and builds the
/// container.
pub fn build_features(
    manifest: &DatasetManifest,
    root: &Path,
    analysis: &AnalysisConfig,
    surrogate: &SurrogateConfig,
) -> Result<FeatureContainer> {
    manifest.validate(false)?;
    let items = manifest
        .entries
        .iter()
        .map(|e| {
            let path = root.join(&e.source);
            let wave = read_wav(&path).map_err(|err| err.in_utterance(&e.id))?;
            Ok((e.clone(), wave))
        })
        .collect::<Result<Vec<_>>>()?;
    build_from_waveforms(&items, analysis, surrogate)
}

/// Conditions of `record` for `source`, z-scored with `stats`.
pub fn normalized_conditions(
    record: &UtteranceRecord,
    source: TrackSource,
    stats: &NormStats,
) -> Result<ConditionTrack> {
    record.condition(source).renormalized(stats)
}
