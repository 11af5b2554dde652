//! Linear prediction: framing, autocorrelation, Levinson-Durbin recursion,
//! LPC/LSF conversion and per-sample analysis/synthesis filtering.
//!
//! Predictor convention throughout: the inverse filter is
//! `A(z) = 1 - Σ_{k=1..p} α_k z^-k`, so the residual is
//! `e_n = x_n - Σ α_k x_{n-k}`.

mod filter;
mod grid;
mod levinson;
mod lsf;

pub use filter::{
    analyze_waveform, lp_analysis_filter, lp_synthesis_filter, CoeffTrack, StabilityPolicy,
    TrackSource,
};
pub use grid::{frame_signal, FrameAlign, FrameGrid, Window};
pub use levinson::{
    autocorrelate, is_stable, levinson_durbin, max_pole_radius, predictor_from_reflection,
    reflection_from_predictor, LpSolution, DEFAULT_FLOOR_EPS,
};
pub use lsf::{lpc_to_lsf, lsf_to_lpc, LsfTrack};
