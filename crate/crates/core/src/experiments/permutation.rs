use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{ExperimentKind, ExperimentManifest};
use super::{evaluate_splits, write_outputs, SplitSeries};
use crate::anchor::{build_series_set, load_anchor, SeriesSet};
use crate::classify::{EvaluationReport, TrainConfig};
use crate::corpus::load_corpus;
use crate::error::{Error, Result};
use crate::nn::ModelSpec;
use crate::rng::{derive_seed, stream, Purpose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationReport {
    /// Splits whose series were shuffled in the permuted arms.
    pub permuted_splits: Vec<String>,
    pub seed: u64,
    pub ordered: EvaluationReport,
    pub permuted: Vec<EvaluationReport>,
    pub ordered_f1: f64,
    pub permuted_f1: Vec<f64>,
    pub mean_permuted_f1: f64,
    /// `ordered_f1 - mean_permuted_f1`.
    pub gap: f64,
}

fn permute_set(set: &SeriesSet, seed: u64, split: u64) -> SeriesSet {
    let mut rng = stream(seed, Purpose::Permutation, split);
    SeriesSet {
        series: set.series.iter().map(|s| s.permuted(&mut rng)).collect(),
        ..set.clone()
    }
}

/// Permutation `index` of every user's series in all three splits.
pub fn permute_splits(splits: &SplitSeries, seed: u64, index: usize) -> SplitSeries {
    let s = derive_seed(seed, Purpose::Permutation, index as u64);
    SplitSeries {
        train: permute_set(&splits.train, s, 0),
        val: permute_set(&splits.val, s, 1),
        test: permute_set(&splits.test, s, 2),
    }
}

/// Trains on the ordered series, then once per permutation on series whose
/// steps were shuffled independently per user, and reports the F1 gap.
pub fn permutation_experiment(
    spec: &ModelSpec,
    splits: &SplitSeries,
    config: &TrainConfig,
    permutations: usize,
    seed: u64,
) -> Result<PermutationReport> {
    if permutations == 0 {
        return Err(Error::InvalidConfig("permutation count must be at least 1".into()));
    }
    let ordered = evaluate_splits(spec, splits, config)?;
    let permuted = (0..permutations)
        .into_par_iter()
        .map(|p| evaluate_splits(spec, &permute_splits(splits, seed, p), config))
        .collect::<Result<Vec<_>>>()?;
    let permuted_f1: Vec<f64> = permuted.iter().map(|r| r.mean.f1).collect();
    let mean_permuted_f1 = permuted_f1.iter().sum::<f64>() / permuted_f1.len() as f64;
    Ok(PermutationReport {
        permuted_splits: vec!["train".into(), "val".into(), "test".into()],
        seed,
        ordered_f1: ordered.mean.f1,
        gap: ordered.mean.f1 - mean_permuted_f1,
        ordered,
        permuted,
        permuted_f1,
        mean_permuted_f1,
    })
}

pub fn run_permutation(manifest: &ExperimentManifest) -> Result<PermutationReport> {
    if manifest.kind != ExperimentKind::Permutation {
        return Err(Error::InvalidConfig(format!("expected a permutation manifest, got {:?}", manifest.kind)));
    }
    manifest.validate()?;
    let anchor = load_anchor(manifest.anchor.as_ref().expect("validated"))?;
    let c = &manifest.corpora;
    let splits = SplitSeries {
        train: build_series_set(&load_corpus(&c.train)?, &anchor)?,
        val: build_series_set(&load_corpus(&c.val)?, &anchor)?,
        test: build_series_set(&load_corpus(&c.test)?, &anchor)?,
    };
    let report = permutation_experiment(&manifest.model, &splits, &manifest.train, manifest.permutations, manifest.seed)?;
    write_outputs(manifest, &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anchor::SimilaritySeries;
    use crate::corpus::Label;

    fn set(n: usize) -> SeriesSet {
        SeriesSet {
            channels: 1,
            disorder: "d".into(),
            anchor_disorder: None,
            series: (0..n)
                .map(|i| SimilaritySeries::scalar(format!("u{i}"), Label::from_index(i % 2), (0..8).map(f64::from).collect()))
                .collect(),
        }
    }

    #[test]
    fn shuffles_are_seeded_and_preserve_multisets() {
        let splits = SplitSeries {
            train: set(4),
            val: set(2),
            test: set(2),
        };
        let a = permute_splits(&splits, 9, 0);
        assert_eq!(a, permute_splits(&splits, 9, 0));
        assert_ne!(a, permute_splits(&splits, 9, 1));
        assert_ne!(a.test, splits.test);
        for s in &a.train.series {
            let mut v = s.values.clone();
            v.sort_by(f64::total_cmp);
            assert_eq!(v, (0..8).map(f64::from).collect::<Vec<_>>());
        }
        // users within a split get different orders
        assert_ne!(a.train.series[0].values, a.train.series[1].values);
    }
}
