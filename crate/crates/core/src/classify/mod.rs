//! Training, threshold moving, evaluation and the chunked majority-vote
//! baseline.

mod baseline;
mod config;
mod data;
mod grid;
mod metrics;
mod pipeline;
mod threshold;
mod train;

pub use baseline::{
    chunk_scores, fit_chunk_threshold, majority_vote, majority_vote_baseline, BaselineConfig, ChunkScorer,
    MeanCosineScorer, TieRule, DEFAULT_CHUNK_SIZE,
};
pub use config::{HyperGrid, TrainConfig, DEFAULT_PATIENCE, DEFAULT_SEEDS};
pub use data::Dataset;
pub use grid::{grid_search, GridResult, GridRow};
pub use metrics::{evaluate, score_predictions, ClassMetrics, Confusion, EvaluationReport, MeanMetrics, SeedMetrics};
pub use pipeline::{fit_and_evaluate, fit_and_evaluate_features, FeatureRun, PipelineOutcome, PipelineReport};
pub use threshold::{move_threshold, threshold_candidates, ThresholdChoice};
pub use train::{predict, train, validation_loss};
