use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidManifest(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    /// Path to a WAV file, relative to the manifest's directory when not absolute.
    pub source: String,
    pub split: Split,
}

/// Utterance list with split assignment.
///
/// Text form is one `id<TAB>source<TAB>split` line per utterance, preceded by
/// an optional `# seed=<n>` line.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub seed: u64,
}

impl DatasetManifest {
    pub fn validate(&self, require_all_splits: bool) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if e.id.is_empty() || e.id.contains(['\t', '\n']) {
                return Err(Error::InvalidManifest(format!("bad id {:?}", e.id)));
            }
            if !seen.insert(e.id.as_str()) {
                return Err(Error::InvalidManifest(format!("duplicate id {:?}", e.id)));
            }
        }
        if require_all_splits {
            for split in Split::ALL {
                if !self.entries.iter().any(|e| e.split == split) {
                    return Err(Error::InvalidManifest(format!("split {split} is empty")));
                }
            }
        }
        Ok(())
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# seed={}\n", self.seed);
        for e in &self.entries {
            out.push_str(&format!("{}\t{}\t{}\n", e.id, e.source, e.split));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut manifest = DatasetManifest::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(seed) = comment.trim().strip_prefix("seed=") {
                    manifest.seed = seed.trim().parse().map_err(|_| {
                        Error::InvalidManifest(format!("line {}: bad seed", lineno + 1))
                    })?;
                }
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::InvalidManifest(format!(
                    "line {}: expected 3 tab-separated fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            manifest.entries.push(ManifestEntry {
                id: fields[0].to_string(),
                source: fields[1].to_string(),
                split: fields[2].parse()?,
            });
        }
        manifest.validate(false)?;
        Ok(manifest)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let m = DatasetManifest {
            seed: 42,
            entries: vec![
                ManifestEntry {
                    id: "utt000".into(),
                    source: "wav/utt000.wav".into(),
                    split: Split::Train,
                },
                ManifestEntry {
                    id: "utt001".into(),
                    source: "wav/utt001.wav".into(),
                    split: Split::Test,
                },
            ],
        };
        assert_eq!(DatasetManifest::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn rejects_duplicates_and_bad_lines() {
        assert!(DatasetManifest::parse("a\tx\ttrain\na\ty\ttest\n").is_err());
        assert!(DatasetManifest::parse("a\tx\n").is_err());
        assert!(DatasetManifest::parse("a\tx\tholdout\n").is_err());
    }

    #[test]
    fn empty_split_fails_training_validation() {
        let m = DatasetManifest::parse("a\tx\ttrain\nb\ty\tvalid\n").unwrap();
        assert!(m.validate(false).is_ok());
        assert!(m.validate(true).is_err());
    }
}
