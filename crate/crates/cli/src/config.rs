//! Experiment configuration file.

use std::path::{Path, PathBuf};

use mbg_core::audio::CorpusSpec;
use mbg_core::eval::AnalysisConfig;
use mbg_core::surrogate::SurrogateConfig;
use mbg_core::vocoder::{NetConfig, TrainHyper, TrainMode};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Network topology; the condition width follows from the analysis order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetSection {
    pub n_blocks: usize,
    pub layers_per_block: usize,
    pub residual_channels: usize,
    pub skip_channels: usize,
    pub kernel_size: usize,
    pub quant_levels: usize,
}

impl Default for NetSection {
    fn default() -> Self {
        let d = NetConfig::desk(1);
        Self {
            n_blocks: d.n_blocks,
            layers_per_block: d.layers_per_block,
            residual_channels: d.residual_channels,
            skip_channels: d.skip_channels,
            kernel_size: d.kernel_size,
            quant_levels: d.quant_levels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Systems scored by `evaluate`; absent checkpoints become report gaps.
    pub systems: Vec<TrainMode>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            systems: TrainMode::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub corpus: u64,
    pub train: u64,
    pub eval: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            corpus: 1,
            train: 1,
            eval: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Relative paths resolve against the config file's directory.
    pub output_dir: PathBuf,
    /// Existing manifest to analyse instead of the generated corpus.
    pub manifest: Option<PathBuf>,
    pub corpus: CorpusSpec,
    pub lp: AnalysisConfig,
    pub surrogate: SurrogateConfig,
    pub net: NetSection,
    pub train: TrainHyper,
    pub eval: EvalSection,
    pub seeds: Seeds,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("run"),
            manifest: None,
            corpus: CorpusSpec::default(),
            lp: AnalysisConfig::default(),
            surrogate: SurrogateConfig::default(),
            net: NetSection::default(),
            train: TrainHyper::default(),
            eval: EvalSection::default(),
            seeds: Seeds::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(vec![e.message().to_string()]))
    }

    /// Reads and parses `path`, resolving relative paths inside it.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.output_dir = base.join(&cfg.output_dir);
        if let Some(m) = &cfg.manifest {
            cfg.manifest = Some(base.join(m));
        }
        Ok(cfg)
    }

    pub fn net_config(&self) -> NetConfig {
        NetConfig {
            n_blocks: self.net.n_blocks,
            layers_per_block: self.net.layers_per_block,
            residual_channels: self.net.residual_channels,
            skip_channels: self.net.skip_channels,
            condition_dim: self.lp.condition_dim(),
            kernel_size: self.net.kernel_size,
            quant_levels: self.net.quant_levels,
        }
    }

    /// Every violated constraint across all sections.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut push = |section: &str, items: Vec<String>| {
            out.extend(items.into_iter().map(|p| format!("{section}: {p}")));
        };
        push("corpus", self.corpus.problems());
        push("lp", self.lp.problems(self.corpus.sample_rate));
        if let Err(e) = self.surrogate.validate(self.lp.order) {
            push("surrogate", vec![e.to_string()]);
        }
        if let Err(e) = self.net_config().validate() {
            push("net", vec![e.to_string()]);
        }
        if let Err(e) = self.train.validate() {
            push("train", vec![e.to_string()]);
        }
        if self.eval.systems.is_empty() {
            push("eval", vec!["systems must not be empty".into()]);
        }
        out
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(problems))
        }
    }

    /// SHA-256 of the canonical JSON form of the effective configuration.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}
