//! Feature extraction for a whole corpus, system comparison and reporting.

mod build;
mod container;
mod curves;
mod metrics;
mod systems;

pub use build::{build_features, build_from_waveforms, normalized_conditions, DECOMPOSITION_TOL};
pub use container::{AnalysisConfig, FeatureContainer, UtteranceRecord};
pub use curves::{export_nll_curves, NllCurves};
pub use metrics::{
    log_spectral_distortion, log_spectral_distortion_with, segmental_snr, segmental_snr_with,
};
pub use systems::{
    evaluate_systems, synthesize, train_set, utterance_seed, EvalReport, PairDelta, Synthesis,
    SynthesisSetup, SystemReport, UttMetrics, DELTA_PAIRS,
};
