//! Excitation-vocoder laboratory with closed-loop excitation extraction.
//!
//! The crate covers the whole pipeline: a seeded speech-like corpus, LP
//! analysis and LSF conversion, conditioning features, plain and
//! closed-loop excitation extraction with µ-law coding, an acoustic-model
//! error surrogate, a small dilated-causal-convolution excitation model with
//! hand-written backpropagation, and objective evaluation.

pub mod audio;
mod binio;
pub mod error;
pub mod eval;
pub mod excitation;
pub mod features;
pub mod lp;
pub mod surrogate;
pub mod vocoder;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
