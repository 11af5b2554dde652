//! Conditional autoregressive excitation model: gated dilated causal
//! convolutions over µ-law symbols.

mod adam;
mod checkpoint;
mod config;
mod net;
mod params;
mod sampler;
mod train;

pub use adam::{adam_step, clip_global_norm, AdamHyper, AdamState};
pub use checkpoint::ModelCheckpoint;
pub use config::NetConfig;
pub use net::{backward, forward, loss_and_grad, nll, nll_with_grad, softmax_row, ForwardCache};
pub use params::{init_params, LayerSlots, ModelParams, ParamLayout, Real, TensorSpec};
pub use sampler::{incremental_logits, sample, sample_naive};
pub use train::{
    sequence_nll, train, LogSplit, NllLog, NllRecord, ParentRef, Provenance, Sequence, TrainControl,
    TrainHyper, TrainMode, TrainOutcome, TrainSet,
};
