use rand::seq::SliceRandom;

use super::config::TrainConfig;
use super::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{
    accumulate_gradients, adam_step, cross_entropy, forward, AdamConfig, AdamState, EpochRecord, ModelSpec, Sample,
    Scaler, TrainedModel,
};
use crate::rng::{stream, Purpose};

/// Mean cross-entropy of `samples` (already scaled) under `params`.
pub fn validation_loss(spec: &ModelSpec, params: &[f64], samples: &[Sample], labels: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for (s, &y) in samples.iter().zip(labels) {
        total += cross_entropy(forward(spec, params, s)?, y);
    }
    Ok(total / samples.len() as f64)
}

/// Trains one model with Adam on mini-batches reshuffled every epoch.
///
/// Inputs are standardised with a scaler fitted on `train`. The parameters
/// with the lowest validation loss are kept, and training stops once
/// `config.patience` epochs pass without improving on it. A non-finite loss
/// or gradient aborts with [`Error::Diverged`] carrying the best checkpoint
/// seen so far.
pub fn train(spec: &ModelSpec, train: &Dataset, val: &Dataset, config: &TrainConfig, seed: u64) -> Result<TrainedModel> {
    config.validate()?;
    spec.validate()?;
    train.require_both_classes("training set")?;
    val.require_both_classes("validation set")?;

    let scaler = Scaler::fit(&train.samples)?;
    let xs: Vec<Sample> = train.samples.iter().map(|s| scaler.transform(s)).collect();
    let vs: Vec<Sample> = val.samples.iter().map(|s| scaler.transform(s)).collect();

    let mut model = TrainedModel::untrained(spec.clone(), seed);
    model.scaler = Some(scaler);
    let mut params = model.parameters.clone();
    let mut best_loss = f64::INFINITY;
    let hyper = AdamConfig::with_lr(config.lr);
    let mut state = AdamState::new(params.len());
    let mut grad = vec![0.0; params.len()];
    let mut order: Vec<usize> = (0..xs.len()).collect();

    let diverged = |model: &TrainedModel, epoch: usize, reason: String| Error::Diverged {
        epoch,
        reason,
        checkpoint: Box::new(model.clone()),
    };

    for epoch in 1..=config.epochs {
        order.shuffle(&mut stream(seed, Purpose::Shuffle, epoch as u64));
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Sample> = chunk.iter().map(|&i| xs[i].clone()).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| train.labels[i]).collect();
            let loss = accumulate_gradients(spec, &params, &batch, &labels, &mut grad)
                .map_err(|e| diverged(&model, epoch, e.to_string()))?;
            if !loss.is_finite() {
                return Err(diverged(&model, epoch, format!("training loss {loss}")));
            }
            adam_step(&mut params, &grad, &mut state, &hyper).map_err(|e| diverged(&model, epoch, e.to_string()))?;
            total += loss * chunk.len() as f64;
        }
        let train_loss = total / xs.len() as f64;
        let val_loss = match validation_loss(spec, &params, &vs, &val.labels) {
            Ok(l) if l.is_finite() => l,
            Ok(l) => return Err(diverged(&model, epoch, format!("validation loss {l}"))),
            Err(e) => return Err(diverged(&model, epoch, e.to_string())),
        };
        model.history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < best_loss {
            best_loss = val_loss;
            model.best_epoch = epoch;
            model.parameters.clone_from(&params);
        } else if epoch - model.best_epoch >= config.patience {
            break;
        }
    }
    Ok(model)
}

/// Condition probabilities for every sample.
pub fn predict(model: &TrainedModel, data: &Dataset) -> Result<Vec<f64>> {
    model.predict_proba(&data.samples)
}
