use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureVector, ForestConfig, RandomForest};
use crate::corpus::Label;
use crate::error::{Error, Result};

pub const DEFAULT_TOP_K: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub forest: ForestConfig,
    pub top_k: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            forest: ForestConfig::default(),
            top_k: DEFAULT_TOP_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub feature_id: String,
    pub importance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    /// Descending importance; equal importances ordered by id.
    pub ranking: Vec<RankedFeature>,
    pub selected: Vec<String>,
    pub forest_config: ForestConfig,
    pub seed: u64,
}

/// Rank features by random-forest Gini importance and keep the top `k`
/// (or all of them when fewer exist).
pub fn rank_by_gini(
    features: &[FeatureVector],
    config: &SelectionConfig,
    seed: u64,
) -> Result<SelectionReport> {
    let first = features
        .first()
        .ok_or_else(|| Error::Empty("feature set".into()))?;
    let ids: Vec<String> = first.values.keys().cloned().collect();
    for label in [Label::Condition, Label::Control] {
        let count = features.iter().filter(|f| f.label == label).count();
        if count == 0 {
            return Err(Error::SingleClass("feature set".into()));
        }
        if count < 2 {
            return Err(Error::Stratify {
                class: label.to_string(),
                count,
                needed: 2,
            });
        }
    }
    let x = features
        .iter()
        .map(|f| f.project(&ids))
        .collect::<Result<Vec<_>>>()?;
    let varies = (0..ids.len()).any(|j| x.iter().any(|row| row[j] != x[0][j]));
    if !varies {
        return Err(Error::ConstantFeatures);
    }
    let y: Vec<usize> = features.iter().map(|f| f.label.index()).collect();

    let forest = RandomForest::fit(&x, &y, &config.forest, seed)?;
    let mut ranking: Vec<RankedFeature> = ids
        .into_iter()
        .zip(forest.importances())
        .map(|(feature_id, importance)| RankedFeature {
            feature_id,
            importance,
        })
        .collect();
    ranking.sort_by(|a, b| {
        b.importance
            .total_cmp(&a.importance)
            .then_with(|| a.feature_id.cmp(&b.feature_id))
    });
    let k = config.top_k.min(ranking.len());
    let selected = ranking[..k].iter().map(|r| r.feature_id.clone()).collect();
    Ok(SelectionReport {
        ranking,
        selected,
        forest_config: config.forest.clone(),
        seed,
    })
}

pub fn select_top_k(report: &SelectionReport, k: usize) -> Result<Vec<String>> {
    if k > report.ranking.len() {
        return Err(Error::TooManyFeatures {
            requested: k,
            available: report.ranking.len(),
        });
    }
    Ok(report.ranking[..k].iter().map(|r| r.feature_id.clone()).collect())
}

pub fn write_features(features: &[FeatureVector], mut w: impl Write) -> Result<()> {
    let io = |e: std::io::Error| Error::io("<writer>", e);
    for f in features {
        serde_json::to_writer(&mut w, f).map_err(|e| io(e.into()))?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_features(reader: impl BufRead) -> Result<Vec<FeatureVector>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::format(i + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let fv: FeatureVector = serde_json::from_str(&line)
            .map_err(|e| Error::format(i + 1, format!("malformed feature record: {e}")))?;
        if fv.values.values().any(|v| !v.is_finite()) {
            return Err(Error::format(i + 1, "non-finite feature value"));
        }
        out.push(fv);
    }
    Ok(out)
}

pub fn save_features(features: &[FeatureVector], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_features(features, BufWriter::new(f))
}

pub fn load_features(path: impl AsRef<Path>) -> Result<Vec<FeatureVector>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_features(BufReader::new(f))
}

pub fn save_selection(report: &SelectionReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::format(0, e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_selection(path: impl AsRef<Path>) -> Result<SelectionReport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(e.line(), e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::collections::BTreeMap;

    /// f0 equals the label; f1..f9 are uniform noise.
    pub(crate) fn toy(seed: u64, n: usize) -> Vec<FeatureVector> {
        let mut rng = crate::rng::stream(seed, crate::rng::Purpose::Init, 99);
        (0..n)
            .map(|i| {
                let label = Label::from_index(i % 2);
                let mut values = BTreeMap::new();
                values.insert("f0".to_string(), label.index() as f64);
                for j in 1..10 {
                    values.insert(format!("f{j}"), rng.gen::<f64>());
                }
                FeatureVector {
                    user_id: format!("u{i}"),
                    label,
                    values,
                }
            })
            .collect()
    }

    #[test]
    fn planted_feature_ranks_first() {
        let report = rank_by_gini(&toy(1, 60), &SelectionConfig::default(), 3).unwrap();
        assert_eq!(report.ranking[0].feature_id, "f0");
        assert!(report.ranking[0].importance > 0.5, "{}", report.ranking[0].importance);
        let total: f64 = report.ranking.iter().map(|r| r.importance).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(report.ranking.iter().all(|r| r.importance >= 0.0));
        assert_eq!(report.selected.len(), 10);
        assert_eq!(select_top_k(&report, 1).unwrap(), vec!["f0".to_string()]);
    }

    #[test]
    fn duplicated_planted_feature_takes_top_two() {
        let mut data = toy(2, 60);
        for fv in &mut data {
            let v = fv.values["f0"];
            fv.values.insert("f0_dup".into(), v);
        }
        let report = rank_by_gini(&data, &SelectionConfig::default(), 4).unwrap();
        let mut top: Vec<&str> = report.ranking[..2].iter().map(|r| r.feature_id.as_str()).collect();
        top.sort_unstable();
        assert_eq!(top, ["f0", "f0_dup"]);
    }

    #[test]
    fn deterministic_under_seed() {
        let data = toy(3, 40);
        let a = rank_by_gini(&data, &SelectionConfig::default(), 9).unwrap();
        let b = rank_by_gini(&data, &SelectionConfig::default(), 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constant_features_rejected() {
        let mut data = toy(4, 10);
        for fv in &mut data {
            for v in fv.values.values_mut() {
                *v = 1.0;
            }
        }
        assert!(matches!(
            rank_by_gini(&data, &SelectionConfig::default(), 0),
            Err(Error::ConstantFeatures)
        ));
    }

    #[test]
    fn single_class_rejected() {
        let mut data = toy(5, 10);
        for fv in &mut data {
            fv.label = Label::Control;
        }
        assert!(matches!(
            rank_by_gini(&data, &SelectionConfig::default(), 0),
            Err(Error::SingleClass(_))
        ));
    }

    #[test]
    fn select_top_k_bounds_and_ties() {
        let report = SelectionReport {
            ranking: vec![
                RankedFeature { feature_id: "a".into(), importance: 0.5 },
                RankedFeature { feature_id: "b".into(), importance: 0.5 },
            ],
            selected: vec![],
            forest_config: ForestConfig::default(),
            seed: 0,
        };
        assert_eq!(select_top_k(&report, 2).unwrap(), vec!["a", "b"]);
        assert!(matches!(
            select_top_k(&report, 3),
            Err(Error::TooManyFeatures { requested: 3, available: 2 })
        ));
    }

    #[test]
    fn feature_file_round_trip() {
        let data = toy(6, 4);
        let mut buf = Vec::new();
        write_features(&data, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).contains("\"features\":{"));
        assert_eq!(read_features(buf.as_slice()).unwrap(), data);
    }
}
