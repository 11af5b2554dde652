use std::collections::{BTreeMap, BTreeSet};

use mbg_core::audio::{synth_corpus, write_wav, CorpusSpec, ExcitationMix, ManifestEntry, Split, Waveform};
use mbg_core::eval::*;
use mbg_core::features::{estimate_f0, F0Params};
use mbg_core::lp::{lp_synthesis_filter, FrameGrid, StabilityPolicy, TrackSource, Window};
use mbg_core::surrogate::SurrogateConfig;
use mbg_core::vocoder::{train, NetConfig, TrainControl, TrainHyper, TrainMode};

fn small_spec() -> CorpusSpec {
    CorpusSpec {
        n_utterances: 6,
        n_valid: 1,
        n_test: 1,
        min_duration_s: 0.3,
        max_duration_s: 0.4,
        ..CorpusSpec::default()
    }
}

fn items(spec: &CorpusSpec, seed: u64) -> Vec<(ManifestEntry, Waveform)> {
    let (manifest, utts) = synth_corpus(spec, seed).unwrap();
    manifest
        .entries
        .into_iter()
        .zip(utts)
        .map(|(e, u)| (e, u.waveform))
        .collect()
}

#[test]
fn container_round_trips_bit_exactly() {
    let c = build_from_waveforms(&items(&small_spec(), 1), &AnalysisConfig::default(), &SurrogateConfig::default())
        .unwrap();
    let bytes = c.to_bytes();
    assert_eq!(&bytes[..4], b"MBGF");
    let back = FeatureContainer::from_bytes(&bytes).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.to_bytes(), bytes);
    assert!(FeatureContainer::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    for r in &c.records {
        r.validate().unwrap();
        assert!(r.decomposition_residual < 1e-10);
        assert_eq!(r.alpha_gen.source, TrackSource::Generated);
    }
}

#[test]
fn build_is_deterministic_and_reads_files() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec();
    let (manifest, utts) = synth_corpus(&spec, 2).unwrap();
    for u in &utts {
        let path = dir.path().join(format!("wav/{}.wav", u.id));
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        write_wav(&u.waveform, &path).unwrap();
    }
    let a = build_features(&manifest, dir.path(), &AnalysisConfig::default(), &SurrogateConfig::default()).unwrap();
    let b = build_features(&manifest, dir.path(), &AnalysisConfig::default(), &SurrogateConfig::default()).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
    let mem = build_from_waveforms(&items(&spec, 2), &AnalysisConfig::default(), &SurrogateConfig::default()).unwrap();
    assert_eq!(a, mem);

    let mut broken = manifest.clone();
    broken.entries[0].source = "wav/missing.wav".into();
    let err = build_features(&broken, dir.path(), &AnalysisConfig::default(), &SurrogateConfig::default())
        .unwrap_err();
    assert!(err.to_string().contains(&broken.entries[0].id));
}

#[test]
fn identity_surrogate_makes_closed_loop_equal_plain() {
    let c = build_from_waveforms(&items(&small_spec(), 3), &AnalysisConfig::default(), &SurrogateConfig::identity())
        .unwrap();
    for r in &c.records {
        assert_eq!(r.lsf_gen.frames, r.lsf_gt.frames);
        assert_eq!(r.alpha_gen.coeffs, r.alpha_gt.coeffs);
        assert_eq!(r.exc_mbg.raw, r.exc_plain.raw);
        assert_eq!(r.exc_mbg.symbols, r.exc_plain.symbols);
        assert_eq!(r.decomposition_residual, 0.0);
    }
}

#[test]
fn surrogate_changes_the_closed_loop_target() {
    let c = build_from_waveforms(&items(&small_spec(), 4), &AnalysisConfig::default(), &SurrogateConfig::default())
        .unwrap();
    let r = &c.records[0];
    assert_ne!(r.exc_mbg.raw, r.exc_plain.raw);
    // Unnormalized residuals reconstruct the waveform through their own filters.
    for (exc, source) in [(&r.exc_plain, TrackSource::GroundTruth), (&r.exc_mbg, TrackSource::Generated)] {
        let gain = exc.gain.unwrap();
        let e: Vec<f64> = exc.raw.iter().map(|v| v * gain).collect();
        let y = lp_synthesis_filter(&e, r.coeffs(source), &r.grid, StabilityPolicy::Refuse).unwrap();
        let err = y.iter().zip(&r.waveform).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-5, "{err}");
    }
}

/// Fig. 1 style dataflow: each arrow of the analysis, closed-loop
/// extraction and synthesis paths, with the container field that stores it.
const DATAFLOW_EDGES: [(&str, &str); 13] = [
    ("speech waveform x", "waveform"),
    ("analysis framing", "grid"),
    ("LP analysis -> LSF", "lsf_gt"),
    ("LSF -> LP coefficients alpha", "alpha_gt"),
    ("acoustic model -> generated LSF", "lsf_gen"),
    ("generated LSF -> alpha_hat", "alpha_gen"),
    ("speech -> F0 and v/uv", "pitch"),
    ("speech -> energy", "energy"),
    ("analysed features -> condition h", "cond_gt"),
    ("generated features -> condition h_hat", "cond_gen"),
    ("x, alpha -> LP analysis filter -> e", "exc_plain"),
    ("x, alpha_hat -> LP analysis filter -> e_hat", "exc_mbg"),
    ("e_hat = e + e_am check", "decomposition_residual"),
];

#[test]
fn every_dataflow_edge_has_exactly_one_field() {
    let fields: BTreeSet<&str> = UtteranceRecord::FIELDS.into_iter().collect();
    assert_eq!(fields.len(), UtteranceRecord::FIELDS.len());
    let mut per_field: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, field) in DATAFLOW_EDGES {
        assert!(fields.contains(field), "edge stored in unknown field {field}");
        *per_field.entry(field).or_default() += 1;
    }
    for f in &fields {
        assert_eq!(per_field.get(f), Some(&1), "field {f} is not exactly one edge");
    }
    let c = build_from_waveforms(&items(&small_spec(), 5), &AnalysisConfig::default(), &SurrogateConfig::default())
        .unwrap();
    let r = &c.records[0];
    let populated = [
        !r.waveform.is_empty(),
        r.grid.n_frames > 0,
        !r.lsf_gt.frames.is_empty(),
        !r.alpha_gt.coeffs.is_empty(),
        !r.lsf_gen.frames.is_empty(),
        !r.alpha_gen.coeffs.is_empty(),
        !r.pitch.is_empty(),
        !r.energy.is_empty(),
        !r.cond_gt.values.is_empty(),
        !r.cond_gen.values.is_empty(),
        r.exc_plain.symbols.is_some(),
        r.exc_mbg.symbols.is_some(),
        r.decomposition_residual.is_finite(),
    ];
    assert!(populated.iter().all(|&p| p));
}

#[test]
fn train_sets_follow_the_mode() {
    let c = build_from_waveforms(&items(&small_spec(), 6), &AnalysisConfig::default(), &SurrogateConfig::default())
        .unwrap();
    let plain = train_set(&c, TrainMode::Plain).unwrap();
    let mbg = train_set(&c, TrainMode::Mbg).unwrap();
    let g = train_set(&c, TrainMode::G).unwrap();
    assert_eq!(plain.train.len(), 4);
    assert_eq!(plain.valid.len(), 1);
    assert_eq!(plain.train[0].symbols, g.train[0].symbols);
    assert_ne!(plain.train[0].symbols, mbg.train[0].symbols);
    assert_eq!(mbg.train[0].cond, g.train[0].cond);
    assert_ne!(plain.train[0].cond, g.train[0].cond);
    // Training-split conditions are z-scored.
    let rows: Vec<f32> = plain.train.iter().flat_map(|s| s.cond.column(0).to_vec()).collect();
    let mean = rows.iter().map(|&v| v as f64).sum::<f64>() / rows.len() as f64;
    assert!(mean.abs() < 0.2);
}

#[test]
fn evaluation_is_reproducible_and_reports_gaps() {
    let spec = CorpusSpec {
        n_utterances: 4,
        n_valid: 1,
        n_test: 1,
        min_duration_s: 0.2,
        max_duration_s: 0.25,
        ..CorpusSpec::default()
    };
    let c = build_from_waveforms(&items(&spec, 7), &AnalysisConfig::default(), &SurrogateConfig::default()).unwrap();
    let cfg = NetConfig {
        n_blocks: 1,
        layers_per_block: 4,
        residual_channels: 8,
        skip_channels: 8,
        ..NetConfig::desk(c.analysis.condition_dim())
    };
    let hyper = TrainHyper {
        learning_rate: 1e-3,
        segment_len: 500,
        max_steps: 5,
        batches_per_epoch: 5,
        ..TrainHyper::default()
    };
    let mut ckpts = BTreeMap::new();
    for mode in [TrainMode::Plain, TrainMode::Mbg] {
        let set = train_set(&c, mode).unwrap();
        let out = train(&set, mode, &cfg, &hyper, 1, None, TrainControl::default()).unwrap();
        ckpts.insert(mode, out.checkpoint);
    }
    let a = evaluate_systems(&c, &ckpts, 3).unwrap();
    let b = evaluate_systems(&c, &ckpts, 3).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.systems.len(), 2);
    assert_eq!(a.gaps.len(), 2);
    let d = a.delta(TrainMode::Mbg, TrainMode::Plain).unwrap();
    let (m, p) = (a.system(TrainMode::Mbg).unwrap(), a.system(TrainMode::Plain).unwrap());
    for ((du, mu), pu) in d.per_utt.iter().zip(&m.per_utt).zip(&p.per_utt) {
        assert_eq!(du.lsd_db, mu.lsd_db - pu.lsd_db);
        assert_eq!(du.seg_snr_db, mu.seg_snr_db - pu.seg_snr_db);
    }
    assert_eq!(m.per_utt.len(), c.split(Split::Test).count());
    assert!(a.metrics_csv().starts_with("system,utt,lsd_db,seg_snr_db\n"));
    assert!(a.summary_text().contains("missing: g"));

    let mut wrong = BTreeMap::new();
    wrong.insert(TrainMode::Mbg, ckpts[&TrainMode::Plain].clone());
    assert!(evaluate_systems(&c, &wrong, 3).is_err());
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn noise_only_corpus_is_mostly_unvoiced() {
    let spec = CorpusSpec {
        n_utterances: 3,
        n_valid: 0,
        n_test: 0,
        mix: ExcitationMix::NoiseOnly,
        ..CorpusSpec::default()
    };
    let (_, utts) = synth_corpus(&spec, 8).unwrap();
    let (mut voiced, mut total) = (0, 0);
    for u in &utts {
        let w = &u.waveform;
        let grid = FrameGrid::from_ms(w.len(), w.sample_rate, 5.0, 25.0, Window::Hann).unwrap();
        let pitch = estimate_f0(&w.samples, w.sample_rate, &grid, &F0Params::default()).unwrap();
        voiced += pitch.iter().filter(|p| p.voiced).count();
        total += pitch.len();
    }
    assert!(voiced as f64 <= 0.1 * total as f64, "{voiced}/{total}");
}

#[test]
fn pulse_only_corpus_at_200_hz() {
    let spec = CorpusSpec {
        n_utterances: 2,
        n_valid: 0,
        n_test: 0,
        f0_min_hz: 200.0,
        f0_max_hz: 200.0,
        mix: ExcitationMix::PulseOnly,
        ..CorpusSpec::default()
    };
    let (_, utts) = synth_corpus(&spec, 9).unwrap();
    for u in &utts {
        let w = &u.waveform;
        let grid = FrameGrid::from_ms(w.len(), w.sample_rate, 5.0, 25.0, Window::Hann).unwrap();
        let pitch = estimate_f0(&w.samples, w.sample_rate, &grid, &F0Params::default()).unwrap();
        let f0: Vec<f64> = pitch.iter().filter(|p| p.voiced).map(|p| p.f0_hz).collect();
        assert!(f0.len() as f64 > 0.8 * pitch.len() as f64);
        let m = median(f0);
        assert!((m - 200.0).abs() <= 5.0, "{m}");
    }
}
