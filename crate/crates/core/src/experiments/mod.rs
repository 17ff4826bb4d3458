//! Experiment runners: order permutation, cross-disorder transfer and
//! anchor-free multichannel ablations. Each has an in-memory entry point
//! and a manifest-driven wrapper that reads inputs from disk and writes a
//! manifest echo plus a JSON report.

mod ablation;
mod manifest;
mod permutation;
mod transfer;

use serde::Serialize;
use std::path::Path;

pub use ablation::{ablation_experiment, run_ablation, AblationMode, AblationReport};
pub use manifest::{CorpusPaths, ExperimentKind, ExperimentManifest, SourcePaths, DEFAULT_PERMUTATIONS};
pub use permutation::{permutation_experiment, permute_splits, run_permutation, PermutationReport};
pub use transfer::{run_transfer, transfer_experiment, TransferReport};

use crate::anchor::SeriesSet;
use crate::classify::{fit_and_evaluate, fit_and_evaluate_features, Dataset, EvaluationReport, TrainConfig};
use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureVector, SelectionConfig, CATALOG_SIZE};
use crate::nn::{ModelKind, ModelSpec};

/// Series for the three splits of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSeries {
    pub train: SeriesSet,
    pub val: SeriesSet,
    pub test: SeriesSet,
}

fn feature_rows(set: &SeriesSet) -> Result<Vec<FeatureVector>> {
    set.series.iter().map(extract_features).collect()
}

/// The standard train / threshold / evaluate pipeline on series. A
/// feedforward spec goes through feature extraction and Gini selection;
/// sequence specs consume the series directly, with their channel count
/// taken from the data.
pub fn evaluate_splits(spec: &ModelSpec, splits: &SplitSeries, config: &TrainConfig) -> Result<EvaluationReport> {
    match spec.kind() {
        ModelKind::Feedforward => {
            let selection = SelectionConfig {
                top_k: SelectionConfig::default().top_k.min(CATALOG_SIZE),
                ..SelectionConfig::default()
            };
            let run = fit_and_evaluate_features(
                spec,
                &feature_rows(&splits.train)?,
                &feature_rows(&splits.val)?,
                &feature_rows(&splits.test)?,
                &selection,
                config,
            )?;
            Ok(run.outcome.report)
        }
        ModelKind::Cnn1d | ModelKind::Lstm => {
            let channels = splits.train.channels;
            if splits.val.channels != channels || splits.test.channels != channels {
                return Err(Error::Shape("splits disagree on channel count".into()));
            }
            let spec = spec.with_input_size(channels);
            let out = fit_and_evaluate(
                &spec,
                &Dataset::from_series(&splits.train),
                &Dataset::from_series(&splits.val),
                &Dataset::from_series(&splits.test),
                config,
            )?;
            Ok(out.report)
        }
    }
}

pub(crate) fn write_json(value: &impl Serialize, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::format(0, e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Writes `manifest.json` and `report.json` into the manifest's output
/// directory.
pub(crate) fn write_outputs(manifest: &ExperimentManifest, report: &impl Serialize) -> Result<()> {
    let dir = &manifest.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_json(manifest, &dir.join("manifest.json"))?;
    write_json(report, &dir.join("report.json"))
}
