use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ablation::AblationMode;
use crate::classify::TrainConfig;
use crate::error::{Error, Result};
use crate::nn::ModelSpec;

pub const DEFAULT_PERMUTATIONS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Permutation,
    Transfer,
    Ablation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusPaths {
    pub train: PathBuf,
    pub val: PathBuf,
    pub test: PathBuf,
}

/// Training-domain corpora of a transfer run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourcePaths {
    pub train: PathBuf,
    pub val: PathBuf,
}

/// Relative paths are resolved against the manifest file's directory when
/// loaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub kind: ExperimentKind,
    /// Evaluation-domain corpora (D1 for transfer runs).
    pub corpora: CorpusPaths,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourcePaths>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation: Option<AblationMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<PathBuf>,
    pub model: ModelSpec,
    pub train: TrainConfig,
    #[serde(default = "default_permutations")]
    pub permutations: usize,
    /// Seed for permutation shuffles.
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
}

fn default_permutations() -> usize {
    DEFAULT_PERMUTATIONS
}

fn must_exist(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)))
    }
}

impl ExperimentManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: ExperimentManifest =
            serde_json::from_str(&text).map_err(|e| Error::format(e.line(), e.to_string()))?;
        if let Some(base) = path.parent() {
            m.resolve(base);
        }
        Ok(m)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpora.train);
        fix(&mut self.corpora.val);
        fix(&mut self.corpora.test);
        if let Some(a) = &mut self.anchor {
            fix(a);
        }
        if let Some(s) = &mut self.source {
            fix(&mut s.train);
            fix(&mut s.val);
        }
        if let Some(c) = &mut self.channels {
            fix(c);
        }
        fix(&mut self.output_dir);
    }

    /// Checks the fields the manifest's kind needs and that every referenced
    /// input exists.
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.model.validate()?;
        let missing = |what: &str| Err(Error::InvalidConfig(format!("{:?} manifest needs `{what}`", self.kind)));
        match self.kind {
            ExperimentKind::Permutation => {
                if self.anchor.is_none() {
                    return missing("anchor");
                }
                if self.permutations == 0 {
                    return Err(Error::InvalidConfig("permutation count must be at least 1".into()));
                }
            }
            ExperimentKind::Transfer => {
                if self.anchor.is_none() {
                    return missing("anchor");
                }
                if self.source.is_none() {
                    return missing("source");
                }
            }
            ExperimentKind::Ablation => match self.ablation {
                None => return missing("ablation"),
                Some(AblationMode::Channels) if self.channels.is_none() => return missing("channels"),
                _ => {}
            },
        }
        let c = &self.corpora;
        for p in [&c.train, &c.val, &c.test] {
            must_exist(p)?;
        }
        for p in self.anchor.iter().chain(&self.channels) {
            must_exist(p)?;
        }
        if let Some(s) = &self.source {
            must_exist(&s.train)?;
            must_exist(&s.val)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelKind;

    fn manifest(dir: &Path) -> ExperimentManifest {
        ExperimentManifest {
            kind: ExperimentKind::Permutation,
            corpora: CorpusPaths {
                train: "train.jsonl".into(),
                val: "val.jsonl".into(),
                test: "test.jsonl".into(),
            },
            anchor: Some("anchor.json".into()),
            source: None,
            ablation: None,
            channels: None,
            model: ModelSpec::default_lstm(1),
            train: TrainConfig::for_kind(ModelKind::Lstm),
            permutations: 5,
            seed: 1,
            output_dir: dir.join("out"),
        }
    }

    #[test]
    fn relative_paths_resolve_against_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(dir.path());
        let path = dir.path().join("m.json");
        std::fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
        let loaded = ExperimentManifest::load(&path).unwrap();
        assert_eq!(loaded.corpora.train, dir.path().join("train.jsonl"));
        match loaded.validate() {
            Err(Error::Io { path, .. }) => assert!(path.ends_with("train.jsonl")),
            other => panic!("{other:?}"),
        }
        for f in ["train.jsonl", "val.jsonl", "test.jsonl", "anchor.json"] {
            std::fs::write(dir.path().join(f), "").unwrap();
        }
        loaded.validate().unwrap();
    }

    #[test]
    fn kind_specific_fields_required() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = manifest(dir.path());
        m.permutations = 0;
        assert!(matches!(m.validate(), Err(Error::InvalidConfig(_))));
        m.kind = ExperimentKind::Transfer;
        assert!(matches!(m.validate(), Err(Error::InvalidConfig(_))));
        m.kind = ExperimentKind::Ablation;
        m.ablation = Some(AblationMode::Channels);
        assert!(matches!(m.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn permutation_count_defaults_to_five() {
        let dir = tempfile::tempdir().unwrap();
        let mut v = serde_json::to_value(manifest(dir.path())).unwrap();
        v.as_object_mut().unwrap().remove("permutations");
        let m: ExperimentManifest = serde_json::from_value(v).unwrap();
        assert_eq!(m.permutations, 5);
    }
}
