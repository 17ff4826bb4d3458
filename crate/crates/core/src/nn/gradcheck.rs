//! Central finite-difference verification of analytic gradients.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::model::init_params;
use super::network::{loss_and_gradients, Sample, Sequence};
use super::spec::ModelSpec;
use crate::error::Result;
use crate::rng::{stream, Purpose};

pub const FD_EPSILON: f64 = 1e-5;

/// Magnitudes below this are compared absolutely rather than relatively.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerError {
    pub layer: String,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub n_params: usize,
    pub max_rel_error: f64,
    pub per_layer: Vec<LayerError>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
    (analytic - numeric).abs() / scale
}

/// Compares `analytic` against central differences of `loss` around `params`
/// and returns the relative error of every coordinate.
pub fn check_gradient(
    loss: impl Fn(&[f64]) -> Result<f64>,
    params: &[f64],
    analytic: &[f64],
    eps: f64,
) -> Result<Vec<f64>> {
    let mut p = params.to_vec();
    (0..params.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + eps;
            let up = loss(&p)?;
            p[i] = orig - eps;
            let down = loss(&p)?;
            p[i] = orig;
            Ok(relative_error(analytic[i], (up - down) / (2.0 * eps)))
        })
        .collect()
}

/// Random inputs matching `spec`: three feature vectors, or two sequences
/// (sequence models; 10 steps, the second truncated to 7 valid steps).
pub fn random_batch(spec: &ModelSpec, seed: u64) -> (Vec<Sample>, Vec<usize>) {
    let mut rng = stream(seed, Purpose::Init, 1);
    let mut normal = |n: usize| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(&mut rng)).collect() };
    let batch: Vec<Sample> = match spec {
        ModelSpec::Feedforward { layers, .. } => {
            (0..3).map(|_| Sample::Features(normal(layers[0]))).collect()
        }
        ModelSpec::Cnn1d {
            in_channels,
            input_len,
            ..
        } => vec![
            Sample::Sequence(Sequence::new(*in_channels, normal(in_channels * input_len))),
            Sample::Sequence(Sequence::new(
                *in_channels,
                normal(in_channels * (input_len - input_len / 4)),
            )),
        ],
        ModelSpec::Lstm { in_channels, .. } => {
            let mut short = Sequence::new(*in_channels, normal(in_channels * 10));
            short.len = 7;
            vec![
                Sample::Sequence(Sequence::new(*in_channels, normal(in_channels * 10))),
                Sample::Sequence(short),
            ]
        }
    };
    let labels = (0..batch.len()).map(|_| rng.gen_range(0..2)).collect();
    (batch, labels)
}

/// Gradient check of `spec` at seeded random parameters and inputs. Biases
/// are randomised too so no coordinate sits at its initial zero.
pub fn grad_check(spec: &ModelSpec, seed: u64) -> Result<GradCheckReport> {
    spec.validate()?;
    let mut params = init_params(spec, seed);
    let mut rng = stream(seed, Purpose::Init, 2);
    for slot in spec.layout() {
        let start = slot.offset + slot.shape.weight_count();
        for b in &mut params[start..start + slot.shape.bias_count()] {
            *b += rng.gen_range(-0.5..0.5);
        }
    }
    let (batch, labels) = random_batch(spec, seed);
    let (_, analytic) = loss_and_gradients(spec, &params, &batch, &labels)?;
    let errors = check_gradient(
        |p| loss_and_gradients(spec, p, &batch, &labels).map(|(l, _)| l),
        &params,
        &analytic,
        FD_EPSILON,
    )?;
    let per_layer: Vec<LayerError> = spec
        .layout()
        .iter()
        .map(|slot| LayerError {
            layer: slot.shape.name(),
            max_rel_error: errors[slot.range()].iter().copied().fold(0.0, f64::max),
        })
        .collect();
    Ok(GradCheckReport {
        n_params: params.len(),
        max_rel_error: errors.iter().copied().fold(0.0, f64::max),
        per_layer,
    })
}
