use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{HyperGrid, TrainConfig};
use super::data::Dataset;
use super::threshold::move_threshold;
use super::train::{predict, train};
use crate::error::{Error, Result};
use crate::nn::ModelSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub best_epoch: usize,
    pub val_loss: f64,
    pub val_f1: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: TrainConfig,
    pub best_index: usize,
    pub rows: Vec<GridRow>,
}

/// Trains every grid point with `seed` and keeps the one with the highest
/// validation F1 after threshold moving; the first point wins ties.
pub fn grid_search(
    spec: &ModelSpec,
    grid: &HyperGrid,
    base: &TrainConfig,
    train_set: &Dataset,
    val: &Dataset,
    seed: u64,
) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("hyperparameter grid is empty".into()));
    }
    let points = grid.points(base);
    let rows = points
        .par_iter()
        .map(|cfg| {
            let model = train(spec, train_set, val, cfg, seed)?;
            let choice = move_threshold(&predict(&model, val)?, &val.labels)?;
            let val_loss = model.history[model.best_epoch - 1].val_loss;
            Ok(GridRow {
                lr: cfg.lr,
                batch_size: cfg.batch_size,
                epochs: cfg.epochs,
                best_epoch: model.best_epoch,
                val_loss,
                val_f1: choice.f1,
                threshold: choice.threshold,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best_index = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.val_f1 > rows[best_index].val_f1 {
            best_index = i;
        }
    }
    Ok(GridResult {
        best: points[best_index].clone(),
        best_index,
        rows,
    })
}
