use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::network::{self, softmax, Sample, Sequence};
use super::spec::{LayerShape, ModelSpec, N_CLASSES};
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// Uniform fan-in initialisation: weights in `±1/sqrt(fan_in)`, biases 0,
/// except LSTM forget-gate biases which start at 1.
pub fn init_params(spec: &ModelSpec, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, Purpose::Init, 0);
    let mut params = Vec::with_capacity(spec.param_count());
    for shape in spec.layer_shapes() {
        let bound = 1.0 / (shape.fan_in() as f64).sqrt();
        params.extend((0..shape.weight_count()).map(|_| rng.gen_range(-bound..bound)));
        match shape {
            LayerShape::Lstm { hidden, .. } => {
                for gate in 0..4 {
                    let b = if gate == 1 { 1.0 } else { 0.0 };
                    params.extend(std::iter::repeat_n(b, hidden));
                }
            }
            _ => params.extend(std::iter::repeat_n(0.0, shape.bias_count())),
        }
    }
    params
}

/// Per-channel standardisation fitted on training inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    /// Fits over every feature vector, or every valid step of every sequence.
    pub fn fit(samples: &[Sample]) -> Result<Self> {
        let width = match samples.first() {
            Some(Sample::Features(x)) => x.len(),
            Some(Sample::Sequence(s)) => s.channels,
            None => return Err(Error::Empty("scaler training set".into())),
        };
        let mut sum = vec![0.0; width];
        let mut sq = vec![0.0; width];
        let mut n = 0usize;
        let mut add = |row: &[f64]| {
            for (j, v) in row.iter().enumerate() {
                sum[j] += v;
                sq[j] += v * v;
            }
            n += 1;
        };
        for s in samples {
            match s {
                Sample::Features(x) if x.len() == width => add(x),
                Sample::Sequence(q) if q.channels == width => (0..q.len).for_each(|t| add(q.step(t))),
                _ => return Err(Error::Shape("mixed sample shapes in scaler input".into())),
            }
        }
        let n = n as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let var = (q / n - m * m).max(0.0);
                if var > 1e-24 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Scaler { mean, std })
    }

    fn scale_row(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
    }

    pub fn transform(&self, sample: &Sample) -> Sample {
        match sample {
            Sample::Features(x) => {
                let mut x = x.clone();
                self.scale_row(&mut x);
                Sample::Features(x)
            }
            Sample::Sequence(q) => {
                let mut values = q.values.clone();
                for t in 0..q.len {
                    self.scale_row(&mut values[t * q.channels..(t + 1) * q.channels]);
                }
                Sample::Sequence(Sequence {
                    channels: q.channels,
                    values,
                    len: q.len,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Model checkpoint. `parameters` follows [`ModelSpec::layout`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub parameters: Vec<f64>,
    pub history: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaler: Option<Scaler>,
    /// Decision threshold on the condition probability, set from validation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Feature ids the model consumes, in input order (feature models only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_ids: Option<Vec<String>>,
}

impl TrainedModel {
    pub fn untrained(spec: ModelSpec, seed: u64) -> Self {
        let parameters = init_params(&spec, seed);
        TrainedModel {
            spec,
            parameters,
            history: Vec::new(),
            best_epoch: 0,
            seed,
            scaler: None,
            threshold: None,
            feature_ids: None,
        }
    }

    fn prepare(&self, sample: &Sample) -> Sample {
        match &self.scaler {
            Some(s) => s.transform(sample),
            None => sample.clone(),
        }
    }

    pub fn forward(&self, batch: &[Sample]) -> Result<Vec<[f64; N_CLASSES]>> {
        batch
            .iter()
            .map(|s| network::forward(&self.spec, &self.parameters, &self.prepare(s)))
            .collect()
    }

    /// Condition-class probabilities.
    pub fn predict_proba(&self, batch: &[Sample]) -> Result<Vec<f64>> {
        Ok(self.forward(batch)?.into_iter().map(|l| softmax(l)[1]).collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).map_err(|e| Error::format(0, e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: TrainedModel =
            serde_json::from_str(&text).map_err(|e| Error::format(e.line(), e.to_string()))?;
        model.spec.validate()?;
        if model.parameters.len() != model.spec.param_count() {
            return Err(Error::format(
                1,
                format!(
                    "checkpoint holds {} parameters, spec needs {}",
                    model.parameters.len(),
                    model.spec.param_count()
                ),
            ));
        }
        Ok(model)
    }
}
