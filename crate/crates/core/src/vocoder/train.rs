//! Teacher-forced training with random contiguous crops.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, clip_global_norm, AdamHyper, AdamState};
use super::checkpoint::ModelCheckpoint;
use super::config::NetConfig;
use super::net::{forward, loss_and_grad, nll};
use super::params::{init_params, ModelParams};
use crate::error::{Error, Result};
use crate::excitation::{symbol_to_companded, ExcitationKind};
use crate::features::NormStats;
use crate::lp::TrackSource;

/// Which conditions and targets a model is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    /// Ground-truth conditions, plain excitation targets.
    Plain,
    /// Generated conditions, plain excitation targets.
    G,
    /// Generated conditions, closed-loop excitation targets.
    Mbg,
    /// As `Mbg`, initialized from a plain checkpoint.
    MbgStar,
}

impl TrainMode {
    pub const ALL: [TrainMode; 4] = [TrainMode::Plain, TrainMode::G, TrainMode::Mbg, TrainMode::MbgStar];

    pub fn condition_source(self) -> TrackSource {
        match self {
            TrainMode::Plain => TrackSource::GroundTruth,
            _ => TrackSource::Generated,
        }
    }

    pub fn target(self) -> ExcitationKind {
        match self {
            TrainMode::Plain | TrainMode::G => ExcitationKind::Plain,
            TrainMode::Mbg | TrainMode::MbgStar => ExcitationKind::Mbg,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TrainMode::Plain => "plain",
            TrainMode::G => "g",
            TrainMode::Mbg => "mbg",
            TrainMode::MbgStar => "mbg_star",
        }
    }
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TrainMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Training(format!("unknown mode {s:?} (expected plain, g, mbg or mbg_star)")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParentRef {
    pub path: String,
    pub sha256: String,
    pub mode: TrainMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub mode: TrainMode,
    pub seed: u64,
    pub condition_source: TrackSource,
    pub target: ExcitationKind,
    pub parent: Option<ParentRef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainHyper {
    pub learning_rate: f64,
    /// Loss positions per crop; receptive-field warm-up is added on top.
    pub segment_len: usize,
    pub segments_per_step: usize,
    /// Steps between validation passes.
    pub batches_per_epoch: usize,
    pub max_steps: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip_norm: f64,
    /// Learning-rate multiplier applied per `lr_decay_steps` steps,
    /// continuously (`1.0` keeps the rate fixed).
    pub lr_decay_rate: f64,
    pub lr_decay_steps: usize,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            segment_len: 12_000,
            segments_per_step: 1,
            batches_per_epoch: 100,
            max_steps: 2_000,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: 5.0,
            lr_decay_rate: 1.0,
            lr_decay_steps: 100_000,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("eps", self.eps),
            ("clip_norm", self.clip_norm),
        ] {
            if !(v.is_finite() && v > 0.0) {
                problems.push(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.lr_decay_rate > 0.0 && self.lr_decay_rate <= 1.0) {
            problems.push(format!("lr_decay_rate must lie in (0, 1], got {}", self.lr_decay_rate));
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                problems.push(format!("{name} must lie in [0, 1), got {v}"));
            }
        }
        for (name, v) in [
            ("segment_len", self.segment_len),
            ("segments_per_step", self.segments_per_step),
            ("batches_per_epoch", self.batches_per_epoch),
            ("max_steps", self.max_steps),
            ("lr_decay_steps", self.lr_decay_steps),
        ] {
            if v == 0 {
                problems.push(format!("{name} must be positive"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Training(problems.join("; ")))
        }
    }

    /// Rate used for update `step` (1-based).
    pub fn learning_rate_at(&self, step: u64) -> f64 {
        let t = step.saturating_sub(1) as f64 / self.lr_decay_steps as f64;
        self.learning_rate * self.lr_decay_rate.powf(t)
    }

    pub fn adam(&self) -> AdamHyper {
        AdamHyper {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

/// One utterance as the network sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub id: String,
    /// Sample-level normalized conditions, `N × D`.
    pub cond: Array2<f32>,
    pub symbols: Vec<u8>,
    /// Companded bin centres of `symbols`.
    pub inputs: Vec<f32>,
}

impl Sequence {
    pub fn new(id: impl Into<String>, cond: Array2<f32>, symbols: Vec<u8>) -> Result<Self> {
        if cond.nrows() != symbols.len() {
            return Err(Error::LengthMismatch {
                what: "condition rows vs target symbols",
                expected: symbols.len(),
                actual: cond.nrows(),
            });
        }
        if symbols.is_empty() {
            return Err(Error::EmptyWaveform);
        }
        let inputs = symbols.iter().map(|&s| symbol_to_companded(s) as f32).collect();
        Ok(Self {
            id: id.into(),
            cond,
            symbols,
            inputs,
        })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Training and validation sequences for one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSet {
    pub condition_source: TrackSource,
    pub target: ExcitationKind,
    pub norm: NormStats,
    pub train: Vec<Sequence>,
    pub valid: Vec<Sequence>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogSplit {
    Train,
    Valid,
}

impl LogSplit {
    pub fn as_str(self) -> &'static str {
        match self {
            LogSplit::Train => "train",
            LogSplit::Valid => "valid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NllRecord {
    pub step: u64,
    pub split: LogSplit,
    pub nll: f64,
}

/// Per-step training NLL and periodic validation NLL.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NllLog {
    pub records: Vec<NllRecord>,
}

impl NllLog {
    pub fn series(&self, split: LogSplit) -> Vec<(u64, f64)> {
        self.records
            .iter()
            .filter(|r| r.split == split)
            .map(|r| (r.step, r.nll))
            .collect()
    }

    pub fn final_valid(&self) -> Option<f64> {
        self.series(LogSplit::Valid).last().map(|&(_, v)| v)
    }

    /// First step whose validation NLL is at or below `target`.
    pub fn first_valid_at_or_below(&self, target: f64) -> Option<u64> {
        self.series(LogSplit::Valid)
            .into_iter()
            .find(|&(_, v)| v <= target)
            .map(|(s, _)| s)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,split,nll\n");
        for r in &self.records {
            out.push_str(&format!("{},{},{}\n", r.step, r.split.as_str(), r.nll));
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Training(format!("nll log line {line}: {msg}"));
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "step,split,nll")) => {}
            _ => return Err(bad(1, "missing header")),
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 3 {
                return Err(bad(i + 1, "expected three fields"));
            }
            let step = parts[0].parse().map_err(|_| bad(i + 1, "bad step"))?;
            let split = match parts[1] {
                "train" => LogSplit::Train,
                "valid" => LogSplit::Valid,
                _ => return Err(bad(i + 1, "bad split")),
            };
            let nll = parts[2].parse().map_err(|_| bad(i + 1, "bad nll"))?;
            records.push(NllRecord { step, split, nll });
        }
        Ok(Self { records })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: ModelCheckpoint,
    pub log: NllLog,
}

/// Extra run controls.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrainControl {
    /// Stop after the first validation pass at or below this NLL.
    pub stop_at_valid_nll: Option<f64>,
}

const VALID_CHUNK: usize = 4_000;

/// Mean NLL over whole sequences, evaluated in overlapping chunks so memory
/// stays bounded.
pub fn sequence_nll(params: &ModelParams<f32>, seqs: &[Sequence]) -> Result<f64> {
    let warm = params.config().receptive_field() - 1;
    let mut total = 0.0;
    let mut count = 0usize;
    for seq in seqs {
        let mut start = 0;
        while start < seq.len() {
            let end = (start + VALID_CHUNK).min(seq.len());
            let from = start.saturating_sub(warm);
            let cache = forward(
                params,
                &seq.inputs[from..end],
                seq.cond.slice(s![from..end, ..]),
            )?;
            let valid = (start - from)..(end - from);
            total += nll(cache.logits.view(), &seq.symbols[from..end], valid)? * (end - start) as f64;
            count += end - start;
            start = end;
        }
    }
    if count == 0 {
        return Err(Error::EmptyRange);
    }
    Ok(total / count as f64)
}

struct Crop {
    utt: usize,
    from: usize,
    start: usize,
    end: usize,
}

fn draw_crop(rng: &mut ChaCha8Rng, seqs: &[Sequence], segment: usize, warm: usize) -> Crop {
    let total: usize = seqs.iter().map(Sequence::len).sum();
    let mut pick = rng.random_range(0..total);
    let mut utt = 0;
    while pick >= seqs[utt].len() {
        pick -= seqs[utt].len();
        utt += 1;
    }
    let n = seqs[utt].len();
    let len = segment.min(n);
    let start = rng.random_range(0..=n - len);
    Crop {
        utt,
        from: start.saturating_sub(warm),
        start,
        end: start + len,
    }
}

fn check_mode(set: &TrainSet, mode: TrainMode, config: &NetConfig) -> Result<()> {
    if set.condition_source != mode.condition_source() {
        return Err(Error::Training(format!(
            "mode {mode} needs {:?} conditions, data has {:?}",
            mode.condition_source(),
            set.condition_source
        )));
    }
    if set.target != mode.target() {
        return Err(Error::Training(format!(
            "mode {mode} needs {:?} targets, data has {:?}",
            mode.target(),
            set.target
        )));
    }
    if set.train.is_empty() || set.valid.is_empty() {
        return Err(Error::Training("training and validation sets must be non-empty".into()));
    }
    for seq in set.train.iter().chain(&set.valid) {
        if seq.cond.ncols() != config.condition_dim {
            return Err(Error::Training(format!(
                "{}: condition dimension {} but network expects {}",
                seq.id,
                seq.cond.ncols(),
                config.condition_dim
            )));
        }
    }
    if set.norm.mean.len() != config.condition_dim {
        return Err(Error::Training("normalization stats do not match condition dimension".into()));
    }
    Ok(())
}

/// Trains one model. `parent` is required for, and only accepted by,
/// [`TrainMode::MbgStar`].
pub fn train(
    set: &TrainSet,
    mode: TrainMode,
    config: &NetConfig,
    hyper: &TrainHyper,
    seed: u64,
    parent: Option<(&ModelCheckpoint, ParentRef)>,
    control: TrainControl,
) -> Result<TrainOutcome> {
    config.validate()?;
    hyper.validate()?;
    check_mode(set, mode, config)?;
    let (mut params, parent_ref) = match (mode, parent) {
        (TrainMode::MbgStar, Some((ckpt, pref))) => {
            if ckpt.config() != config {
                return Err(Error::Training("parent checkpoint config differs".into()));
            }
            if ckpt.provenance.mode != TrainMode::Plain {
                return Err(Error::Training(format!(
                    "mbg_star parent must be a plain model, got {}",
                    ckpt.provenance.mode
                )));
            }
            (ckpt.params.clone(), Some(pref))
        }
        (TrainMode::MbgStar, None) => {
            return Err(Error::Training("mbg_star requires a parent checkpoint".into()))
        }
        (_, Some(_)) => {
            return Err(Error::Training(format!("mode {mode} does not take a parent")))
        }
        (_, None) => (init_params::<f32>(config, seed)?, None),
    };
    let mut adam = AdamState::for_params(&params);
    let mut adam_hyper = hyper.adam();
    let warm = config.receptive_field() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut log = NllLog::default();
    log.records.push(NllRecord {
        step: 0,
        split: LogSplit::Valid,
        nll: sequence_nll(&params, &set.valid)?,
    });
    let mut steps_done = 0;
    for step in 1..=hyper.max_steps as u64 {
        let crops: Vec<Crop> = (0..hyper.segments_per_step)
            .map(|_| draw_crop(&mut rng, &set.train, hyper.segment_len, warm))
            .collect();
        let results: Vec<Result<(f64, ModelParams<f32>)>> = crops
            .par_iter()
            .map(|c| {
                let seq = &set.train[c.utt];
                loss_and_grad(
                    &params,
                    &seq.inputs[c.from..c.end],
                    seq.cond.slice(s![c.from..c.end, ..]),
                    &seq.symbols[c.from..c.end],
                    (c.start - c.from)..(c.end - c.from),
                )
            })
            .collect();
        let mut loss = 0.0;
        let mut grads = params.zeros_like();
        for r in results {
            let (l, g) = r?;
            loss += l;
            grads.data.iter_mut().zip(&g.data).for_each(|(a, b)| *a += b);
        }
        let k = hyper.segments_per_step as f64;
        loss /= k;
        if hyper.segments_per_step > 1 {
            let inv = 1.0 / k as f32;
            grads.data.iter_mut().for_each(|g| *g *= inv);
        }
        if !loss.is_finite() {
            return Err(Error::Training(format!("non-finite loss at step {step}")));
        }
        clip_global_norm(&mut grads, hyper.clip_norm);
        adam_hyper.learning_rate = hyper.learning_rate_at(step);
        adam_step(&mut params, &grads, &mut adam, &adam_hyper);
        log.records.push(NllRecord {
            step,
            split: LogSplit::Train,
            nll: loss,
        });
        steps_done = step;
        if step % hyper.batches_per_epoch as u64 == 0 || step == hyper.max_steps as u64 {
            let v = sequence_nll(&params, &set.valid)?;
            log.records.push(NllRecord {
                step,
                split: LogSplit::Valid,
                nll: v,
            });
            if control.stop_at_valid_nll.is_some_and(|t| v <= t) {
                break;
            }
        }
    }
    if !params.is_finite() {
        return Err(Error::Training("parameters diverged".into()));
    }
    let checkpoint = ModelCheckpoint {
        params,
        adam,
        provenance: Provenance {
            mode,
            seed,
            condition_source: set.condition_source,
            target: set.target,
            parent: parent_ref,
        },
        hyper: *hyper,
        norm: set.norm.clone(),
        steps_done,
    };
    Ok(TrainOutcome { checkpoint, log })
}
