//! Floating-point operation counts for one forward pass.
//!
//! Convention: multiplies and adds are counted separately, bias adds are
//! counted, comparisons (ReLU, max-pooling) are free.
//! - dense `in -> out`: `2*in*out + out`
//! - conv: `2*k*C_in*C_out*L_out + C_out*L_out`
//! - global average pool over `L` steps: `C*L` (adds plus one divide per channel)
//! - lstm step: `8*H*(I+H) + 4*H` for the gate affine maps, plus `13*H`
//!   elementwise: 3 sigmoids and 2 tanh at one op each, `f*c + i*g` (3 ops)
//!   and `o*tanh(c)` (1 op)
//! - transformer: `2*N + 2*n_layer*n_context*d_model`

use serde::{Deserialize, Serialize};

use super::spec::{LayerShape, ModelSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformerParams {
    pub n_params: u64,
    pub n_layer: u64,
    pub n_context: u64,
    pub d_model: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerFlops {
    pub layer: String,
    pub flops: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlopsEstimate {
    pub model: String,
    pub total: u64,
    pub breakdown: Vec<LayerFlops>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transformer: Option<TransformerParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FlopsTarget {
    /// A trainable model; `seq_len` is required for LSTMs (the CNN uses its
    /// padded input length).
    Model { spec: ModelSpec, seq_len: Option<usize> },
    Transformer(TransformerParams),
}

pub fn dense_flops(inp: u64, out: u64) -> u64 {
    2 * inp * out + out
}

pub fn conv_flops(kernel: u64, cin: u64, cout: u64, out_len: u64) -> u64 {
    2 * kernel * cin * cout * out_len + cout * out_len
}

pub fn lstm_step_flops(inp: u64, hidden: u64) -> (u64, u64) {
    (8 * hidden * (inp + hidden) + 4 * hidden, 13 * hidden)
}

pub fn transformer_flops(p: &TransformerParams) -> u64 {
    2 * p.n_params + 2 * p.n_layer * p.n_context * p.d_model
}

pub fn count_flops(target: &FlopsTarget) -> Result<FlopsEstimate> {
    let (model, breakdown, transformer) = match target {
        FlopsTarget::Transformer(p) => (
            "transformer".to_string(),
            vec![
                LayerFlops {
                    layer: "parameters (2N)".into(),
                    flops: 2 * p.n_params,
                },
                LayerFlops {
                    layer: "attention context (2 n_layer n_context d_model)".into(),
                    flops: 2 * p.n_layer * p.n_context * p.d_model,
                },
            ],
            Some(*p),
        ),
        FlopsTarget::Model { spec, seq_len } => {
            spec.validate()?;
            let mut rows = Vec::new();
            match spec {
                ModelSpec::Feedforward { .. } => {
                    for shape in spec.layer_shapes() {
                        if let LayerShape::Dense { inp, out } = shape {
                            rows.push(LayerFlops {
                                layer: shape.name(),
                                flops: dense_flops(inp as u64, out as u64),
                            });
                        }
                    }
                }
                ModelSpec::Cnn1d { .. } => {
                    let lengths = spec.conv_lengths();
                    let shapes = spec.layer_shapes();
                    for (shape, (conv_len, _)) in shapes.iter().zip(&lengths) {
                        if let LayerShape::Conv {
                            cin, cout, kernel, ..
                        } = *shape
                        {
                            rows.push(LayerFlops {
                                layer: shape.name(),
                                flops: conv_flops(kernel as u64, cin as u64, cout as u64, *conv_len as u64),
                            });
                        }
                    }
                    let last_len = lengths.last().map_or(0, |l| l.1) as u64;
                    if let Some(LayerShape::Dense { inp, out }) = shapes.last().copied() {
                        rows.push(LayerFlops {
                            layer: "global average pool".into(),
                            flops: inp as u64 * last_len,
                        });
                        rows.push(LayerFlops {
                            layer: format!("dense {inp}->{out}"),
                            flops: dense_flops(inp as u64, out as u64),
                        });
                    }
                }
                ModelSpec::Lstm {
                    in_channels,
                    hidden,
                } => {
                    let steps = seq_len.ok_or_else(|| {
                        Error::InvalidConfig("lstm FLOPs need a sequence length".into())
                    })? as u64;
                    let (gates, elementwise) = lstm_step_flops(*in_channels as u64, *hidden as u64);
                    rows.push(LayerFlops {
                        layer: format!("lstm gates x{steps} steps"),
                        flops: gates * steps,
                    });
                    rows.push(LayerFlops {
                        layer: format!("lstm elementwise x{steps} steps"),
                        flops: elementwise * steps,
                    });
                    rows.push(LayerFlops {
                        layer: format!("dense {hidden}->2"),
                        flops: dense_flops(*hidden as u64, 2),
                    });
                }
            }
            (format!("{:?}", spec.kind()).to_lowercase(), rows, None)
        }
    };
    let total = breakdown.iter().map(|r| r.flops).sum();
    Ok(FlopsEstimate {
        model,
        total,
        breakdown,
        transformer,
    })
}
