use serde::{Deserialize, Serialize};

use super::data::Dataset;
use super::train::predict;
use crate::error::{Error, Result};
use crate::nn::TrainedModel;

/// Confusion counts with the condition class as positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Confusion {
    /// Predicts condition when `p >= threshold`.
    pub fn at_threshold(probs: &[f64], labels: &[usize], threshold: f64) -> Self {
        let preds: Vec<bool> = probs.iter().map(|&p| p >= threshold).collect();
        Confusion::from_predictions(&preds, labels)
    }

    pub fn from_predictions(predicted_condition: &[bool], labels: &[usize]) -> Self {
        let mut c = Confusion::default();
        for (&p, &y) in predicted_condition.iter().zip(labels) {
            match (p, y == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `2PR/(P+R)`, computed as `2TP/(2TP+FP+FN)`; 0 when there are no true
    /// positives.
    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    /// The same counts with the control class as positive.
    pub fn flipped(&self) -> Self {
        Confusion {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

impl ClassMetrics {
    fn from_confusion(c: &Confusion) -> Self {
        ClassMetrics {
            precision: c.precision(),
            recall: c.recall(),
            f1: c.f1(),
            support: c.tp + c.fn_,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub threshold: f64,
    pub confusion: Confusion,
    pub condition: ClassMetrics,
    pub control: ClassMetrics,
}

impl SeedMetrics {
    pub fn new(seed: Option<u64>, threshold: f64, confusion: Confusion) -> Self {
        SeedMetrics {
            seed,
            threshold,
            confusion,
            condition: ClassMetrics::from_confusion(&confusion),
            control: ClassMetrics::from_confusion(&confusion.flipped()),
        }
    }
}

/// Arithmetic means over seeds; `precision`, `recall` and `f1` refer to the
/// condition class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub control_f1: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub per_seed: Vec<SeedMetrics>,
    pub mean: MeanMetrics,
}

impl EvaluationReport {
    pub fn from_seeds(per_seed: Vec<SeedMetrics>) -> Result<Self> {
        if per_seed.is_empty() {
            return Err(Error::Empty("per-seed metrics".into()));
        }
        let n = per_seed.len() as f64;
        let avg = |f: &dyn Fn(&SeedMetrics) -> f64| per_seed.iter().map(f).sum::<f64>() / n;
        let mean = MeanMetrics {
            precision: avg(&|m| m.condition.precision),
            recall: avg(&|m| m.condition.recall),
            f1: avg(&|m| m.condition.f1),
            control_f1: avg(&|m| m.control.f1),
            threshold: avg(&|m| m.threshold),
        };
        Ok(EvaluationReport { per_seed, mean })
    }

    pub fn f1_values(&self) -> Vec<f64> {
        self.per_seed.iter().map(|m| m.condition.f1).collect()
    }
}

/// Scores probabilities against labels at a fixed threshold.
pub fn score_predictions(probs: &[f64], labels: &[usize], threshold: f64, seed: Option<u64>) -> Result<SeedMetrics> {
    if probs.is_empty() {
        return Err(Error::Empty("test set".into()));
    }
    if probs.len() != labels.len() {
        return Err(Error::Shape(format!("{} probabilities for {} labels", probs.len(), labels.len())));
    }
    Ok(SeedMetrics::new(seed, threshold, Confusion::at_threshold(probs, labels, threshold)))
}

/// Single-seed report of `model` on `test` at a threshold chosen on
/// validation data.
pub fn evaluate(model: &TrainedModel, test: &Dataset, threshold: f64) -> Result<EvaluationReport> {
    if test.is_empty() {
        return Err(Error::Empty("test set".into()));
    }
    let probs = predict(model, test)?;
    EvaluationReport::from_seeds(vec![score_predictions(&probs, &test.labels, threshold, Some(model.seed))?])
}
