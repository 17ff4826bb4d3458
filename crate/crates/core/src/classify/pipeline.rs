use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::data::Dataset;
use super::metrics::{score_predictions, EvaluationReport, SeedMetrics};
use super::threshold::move_threshold;
use super::train::{predict, train};
use crate::error::Result;
use crate::features::{rank_by_gini, select_top_k, FeatureVector, SelectionConfig, SelectionReport};
use crate::nn::{ModelSpec, TrainedModel};

/// Report file contents: what was run and how it scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub spec: ModelSpec,
    pub config: TrainConfig,
    pub evaluation: EvaluationReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub report: EvaluationReport,
    /// One per seed, each carrying its validation threshold.
    pub models: Vec<TrainedModel>,
}

fn run_seed(
    spec: &ModelSpec,
    train_set: &Dataset,
    val: &Dataset,
    test: &Dataset,
    config: &TrainConfig,
    seed: u64,
) -> Result<(TrainedModel, SeedMetrics)> {
    let mut model = train(spec, train_set, val, config, seed)?;
    let choice = move_threshold(&predict(&model, val)?, &val.labels)?;
    model.threshold = Some(choice.threshold);
    let metrics = score_predictions(&predict(&model, test)?, &test.labels, choice.threshold, Some(seed))?;
    Ok((model, metrics))
}

/// Train, move the threshold on validation, score on test, once per seed in
/// `config.seeds`. Seeds run as parallel jobs; results keep seed order.
pub fn fit_and_evaluate(
    spec: &ModelSpec,
    train_set: &Dataset,
    val: &Dataset,
    test: &Dataset,
    config: &TrainConfig,
) -> Result<PipelineOutcome> {
    config.validate()?;
    let runs = config
        .seeds
        .par_iter()
        .map(|&seed| run_seed(spec, train_set, val, test, config, seed))
        .collect::<Result<Vec<_>>>()?;
    let (models, metrics): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    Ok(PipelineOutcome {
        report: EvaluationReport::from_seeds(metrics)?,
        models,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRun {
    pub outcome: PipelineOutcome,
    pub selections: Vec<SelectionReport>,
}

/// The feature pathway: per seed, rank features on the training rows with a
/// forest seeded by that seed, keep the top `selection.top_k`, and fit the
/// feedforward `spec` (its input width is set to `top_k`).
pub fn fit_and_evaluate_features(
    spec: &ModelSpec,
    train_rows: &[FeatureVector],
    val_rows: &[FeatureVector],
    test_rows: &[FeatureVector],
    selection: &SelectionConfig,
    config: &TrainConfig,
) -> Result<FeatureRun> {
    config.validate()?;
    let runs = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let ranking = rank_by_gini(train_rows, selection, seed)?;
            let ids = select_top_k(&ranking, selection.top_k)?;
            let spec = spec.with_input_size(ids.len());
            let train_set = Dataset::from_features(train_rows, &ids)?;
            let val = Dataset::from_features(val_rows, &ids)?;
            let test = Dataset::from_features(test_rows, &ids)?;
            let (mut model, metrics) = run_seed(&spec, &train_set, &val, &test, config, seed)?;
            model.feature_ids = Some(ids);
            Ok((model, metrics, ranking))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut models = Vec::new();
    let mut metrics = Vec::new();
    let mut selections = Vec::new();
    for (m, s, r) in runs {
        models.push(m);
        metrics.push(s);
        selections.push(r);
    }
    Ok(FeatureRun {
        outcome: PipelineOutcome {
            report: EvaluationReport::from_seeds(metrics)?,
            models,
        },
        selections,
    })
}
