use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ModelKind;

pub const DEFAULT_SEEDS: [u64; 5] = [11, 22, 33, 44, 55];
pub const DEFAULT_PATIENCE: usize = 10;

/// Optional per-hyperparameter candidate lists; an empty list keeps the
/// base configuration's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    #[serde(default)]
    pub lr: Vec<f64>,
    #[serde(default)]
    pub batch_size: Vec<usize>,
    #[serde(default)]
    pub epochs: Vec<usize>,
}

impl HyperGrid {
    pub fn is_empty(&self) -> bool {
        self.lr.is_empty() && self.batch_size.is_empty() && self.epochs.is_empty()
    }

    /// Cartesian product in `lr`, `batch_size`, `epochs` order.
    pub fn points(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        let or = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
        let or_u = |v: &Vec<usize>, d: usize| if v.is_empty() { vec![d] } else { v.clone() };
        let mut out = Vec::new();
        for &lr in &or(&self.lr, base.lr) {
            for &batch_size in &or_u(&self.batch_size, base.batch_size) {
                for &epochs in &or_u(&self.epochs, base.epochs) {
                    out.push(TrainConfig {
                        lr,
                        batch_size,
                        epochs,
                        grid: None,
                        ..base.clone()
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<HyperGrid>,
}

fn default_patience() -> usize {
    DEFAULT_PATIENCE
}

fn default_seeds() -> Vec<u64> {
    DEFAULT_SEEDS.to_vec()
}

impl TrainConfig {
    /// Learning rate, batch size and epoch budget per model family.
    pub fn for_kind(kind: ModelKind) -> Self {
        let (lr, batch_size, epochs) = match kind {
            ModelKind::Feedforward => (1e-3, 16, 200),
            ModelKind::Cnn1d => (1e-3, 16, 50),
            ModelKind::Lstm => (1e-2, 8, 50),
        };
        TrainConfig {
            lr,
            batch_size,
            epochs,
            patience: DEFAULT_PATIENCE,
            seeds: default_seeds(),
            grid: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::InvalidConfig(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::InvalidConfig("patience must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seed list is empty".into()));
        }
        Ok(())
    }
}
