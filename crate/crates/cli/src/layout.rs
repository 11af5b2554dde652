//! Artifact locations under the output directory, and provenance records.

use std::path::{Path, PathBuf};

use mbg_core::vocoder::TrainMode;
use serde::Serialize;
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.root.join("corpus")
    }

    pub fn manifest(&self) -> PathBuf {
        self.corpus_dir().join("manifest.tsv")
    }

    pub fn features_dir(&self) -> PathBuf {
        self.root.join("features")
    }

    pub fn features(&self) -> PathBuf {
        self.features_dir().join("features.mbgf")
    }

    pub fn models_dir(&self) -> PathBuf {
        self.root.join("models")
    }

    pub fn checkpoint(&self, mode: TrainMode) -> PathBuf {
        self.models_dir().join(format!("{mode}.ckpt"))
    }

    pub fn nll_log(&self, mode: TrainMode) -> PathBuf {
        self.models_dir().join(format!("{mode}.nll.csv"))
    }

    pub fn synth_dir(&self, mode: TrainMode) -> PathBuf {
        self.root.join("synth").join(mode.as_str())
    }

    pub fn eval_dir(&self) -> PathBuf {
        self.root.join("eval")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }
}

pub fn require(path: &Path, what: &str) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::MissingInput {
            what: what.into(),
            path: path.to_path_buf(),
        })
    }
}

pub fn write(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, bytes).map_err(io)
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Serialize)]
struct Provenance<'a> {
    stage: &'a str,
    config_sha256: String,
    seeds: Value,
    versions: Value,
    outputs: Vec<String>,
    config: &'a ExperimentConfig,
}

/// Writes `<stem>.provenance.json` next to the stage outputs.
pub fn write_provenance(
    dir: &Path,
    stem: &str,
    stage: &str,
    cfg: &ExperimentConfig,
    seeds: Value,
    outputs: &[PathBuf],
) -> CliResult<()> {
    let record = Provenance {
        stage,
        config_sha256: cfg.digest(),
        seeds,
        versions: serde_json::json!({
            "mbg": env!("CARGO_PKG_VERSION"),
            "container_format": 1,
            "checkpoint_format": 1,
        }),
        outputs: outputs
            .iter()
            .map(|p| {
                p.file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default()
            })
            .collect(),
        config: cfg,
    };
    let text = serde_json::to_string_pretty(&record).expect("provenance serializes");
    write(&dir.join(format!("{stem}.provenance.json")), text + "\n")
}
