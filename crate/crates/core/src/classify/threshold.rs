use serde::{Deserialize, Serialize};

use super::metrics::Confusion;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub threshold: f64,
    /// Condition-class F1 on the data the threshold was chosen on.
    pub f1: f64,
}

/// The distinct probabilities plus 0.5, ascending.
pub fn threshold_candidates(probs: &[f64]) -> Vec<f64> {
    let mut c: Vec<f64> = probs.iter().copied().chain(std::iter::once(0.5)).collect();
    c.sort_by(f64::total_cmp);
    c.dedup();
    c
}

/// Picks the candidate threshold maximising condition-class F1, predicting
/// condition when `p >= t`. Ties go to the largest threshold.
pub fn move_threshold(probs: &[f64], labels: &[usize]) -> Result<ThresholdChoice> {
    if probs.is_empty() {
        return Err(Error::Empty("validation probabilities".into()));
    }
    if probs.len() != labels.len() {
        return Err(Error::Shape(format!("{} probabilities for {} labels", probs.len(), labels.len())));
    }
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidConfig(format!("probability {p} outside [0, 1]")));
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::SingleClass("validation set".into()));
    }
    let mut best = ThresholdChoice {
        threshold: 0.5,
        f1: -1.0,
    };
    for t in threshold_candidates(probs) {
        let f1 = Confusion::at_threshold(probs, labels, t).f1();
        if f1 >= best.f1 {
            best = ThresholdChoice { threshold: t, f1 };
        }
    }
    Ok(best)
}
