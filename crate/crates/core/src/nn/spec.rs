use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_CLASSES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Feedforward,
    Cnn1d,
    Lstm,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "feedforward" => Ok(ModelKind::Feedforward),
            "cnn1d" => Ok(ModelKind::Cnn1d),
            "lstm" => Ok(ModelKind::Lstm),
            other => Err(Error::InvalidConfig(format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub(crate) fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation output `a`.
    pub(crate) fn grad_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvBlock {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    /// Max-pool width after the activation; 1 disables pooling.
    pub pool: usize,
}

/// Architecture of a binary classifier. Every kind ends in two logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    /// Dense stack; `layers` lists widths from input to the 2-wide output.
    Feedforward {
        layers: Vec<usize>,
        activation: Activation,
    },
    /// Valid 1D convolutions over a right-padded/truncated input of
    /// `input_len` steps, masked global average pooling, dense head.
    Cnn1d {
        in_channels: usize,
        input_len: usize,
        blocks: Vec<ConvBlock>,
        activation: Activation,
    },
    /// Single-layer LSTM read at each sequence's last valid step, dense head.
    Lstm { in_channels: usize, hidden: usize },
}

/// One parameterised layer and its place in the flat parameter array.
/// Each layer stores its weights row-major, then its biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerShape {
    /// `out x inp` weights, `out` biases.
    Dense { inp: usize, out: usize },
    /// `cout x cin x kernel` weights, `cout` biases.
    Conv {
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
    },
    /// `4h x (inp + h)` weights, `4h` biases; gate rows ordered i, f, g, o.
    Lstm { inp: usize, hidden: usize },
}

impl LayerShape {
    pub fn weight_count(&self) -> usize {
        match *self {
            LayerShape::Dense { inp, out } => inp * out,
            LayerShape::Conv {
                cin, cout, kernel, ..
            } => cout * cin * kernel,
            LayerShape::Lstm { inp, hidden } => 4 * hidden * (inp + hidden),
        }
    }

    pub fn bias_count(&self) -> usize {
        match *self {
            LayerShape::Dense { out, .. } => out,
            LayerShape::Conv { cout, .. } => cout,
            LayerShape::Lstm { hidden, .. } => 4 * hidden,
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.bias_count()
    }

    pub fn fan_in(&self) -> usize {
        match *self {
            LayerShape::Dense { inp, .. } => inp,
            LayerShape::Conv { cin, kernel, .. } => cin * kernel,
            LayerShape::Lstm { hidden, .. } => hidden,
        }
    }

    pub fn name(&self) -> String {
        match *self {
            LayerShape::Dense { inp, out } => format!("dense {inp}->{out}"),
            LayerShape::Conv {
                cin, cout, kernel, ..
            } => format!("conv1d {cin}->{cout} k{kernel}"),
            LayerShape::Lstm { inp, hidden } => format!("lstm {inp}->{hidden}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSlot {
    pub shape: LayerShape,
    pub offset: usize,
}

impl LayerSlot {
    pub fn weights<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.offset..self.offset + self.shape.weight_count()]
    }

    pub fn biases<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        let start = self.offset + self.shape.weight_count();
        &params[start..start + self.shape.bias_count()]
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.shape.param_count()
    }
}

impl ModelSpec {
    /// 30 -> 64 -> 32 -> 2 with ReLU, for `inputs` features.
    pub fn default_feedforward(inputs: usize) -> Self {
        ModelSpec::Feedforward {
            layers: vec![inputs, 64, 32, N_CLASSES],
            activation: Activation::Relu,
        }
    }

    /// Two conv blocks (32 and 64 filters, kernel 5, max-pool 2) over 512 steps.
    pub fn default_cnn1d(in_channels: usize) -> Self {
        ModelSpec::Cnn1d {
            in_channels,
            input_len: 512,
            blocks: vec![
                ConvBlock {
                    out_channels: 32,
                    kernel: 5,
                    stride: 1,
                    pool: 2,
                },
                ConvBlock {
                    out_channels: 64,
                    kernel: 5,
                    stride: 1,
                    pool: 2,
                },
            ],
            activation: Activation::Relu,
        }
    }

    pub fn default_lstm(in_channels: usize) -> Self {
        ModelSpec::Lstm {
            in_channels,
            hidden: 64,
        }
    }

    pub fn default_for(kind: ModelKind, inputs: usize) -> Self {
        match kind {
            ModelKind::Feedforward => Self::default_feedforward(inputs),
            ModelKind::Cnn1d => Self::default_cnn1d(inputs),
            ModelKind::Lstm => Self::default_lstm(inputs),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Feedforward { .. } => ModelKind::Feedforward,
            ModelSpec::Cnn1d { .. } => ModelKind::Cnn1d,
            ModelSpec::Lstm { .. } => ModelKind::Lstm,
        }
    }

    pub fn is_sequence_model(&self) -> bool {
        !matches!(self, ModelSpec::Feedforward { .. })
    }

    /// Feature count (feedforward) or channel count (sequence models).
    pub fn input_size(&self) -> usize {
        match self {
            ModelSpec::Feedforward { layers, .. } => layers.first().copied().unwrap_or(0),
            ModelSpec::Cnn1d { in_channels, .. } | ModelSpec::Lstm { in_channels, .. } => *in_channels,
        }
    }

    /// Same architecture with the input width replaced.
    pub fn with_input_size(&self, n: usize) -> Self {
        let mut spec = self.clone();
        match &mut spec {
            ModelSpec::Feedforward { layers, .. } => {
                if let Some(first) = layers.first_mut() {
                    *first = n;
                }
            }
            ModelSpec::Cnn1d { in_channels, .. } | ModelSpec::Lstm { in_channels, .. } => {
                *in_channels = n
            }
        }
        spec
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        match self {
            ModelSpec::Feedforward { layers, .. } => {
                if layers.len() < 2 || layers.contains(&0) {
                    return bad(format!("feedforward widths must be positive, got {layers:?}"));
                }
                if *layers.last().unwrap() != N_CLASSES {
                    return bad(format!("feedforward output must be {N_CLASSES} wide"));
                }
            }
            ModelSpec::Cnn1d {
                in_channels,
                input_len,
                blocks,
                ..
            } => {
                if *in_channels == 0 || blocks.is_empty() {
                    return bad("cnn1d needs input channels and at least one block".into());
                }
                let mut len = *input_len;
                for (i, b) in blocks.iter().enumerate() {
                    if b.out_channels == 0 || b.kernel == 0 || b.stride == 0 || b.pool == 0 {
                        return bad(format!("cnn1d block {i} has a zero size"));
                    }
                    if len < b.kernel {
                        return bad(format!(
                            "cnn1d block {i}: length {len} shorter than kernel {}",
                            b.kernel
                        ));
                    }
                    len = (len - b.kernel) / b.stride + 1;
                    len /= b.pool;
                    if len == 0 {
                        return bad(format!("cnn1d block {i}: pooling leaves no steps"));
                    }
                }
            }
            ModelSpec::Lstm {
                in_channels,
                hidden,
            } => {
                if *in_channels == 0 || *hidden == 0 {
                    return bad("lstm sizes must be positive".into());
                }
            }
        }
        Ok(())
    }

    /// Lengths after each conv block: `(conv_len, pooled_len)`.
    pub fn conv_lengths(&self) -> Vec<(usize, usize)> {
        match self {
            ModelSpec::Cnn1d {
                input_len, blocks, ..
            } => {
                let mut len = *input_len;
                blocks
                    .iter()
                    .map(|b| {
                        let conv = (len - b.kernel) / b.stride + 1;
                        len = conv / b.pool;
                        (conv, len)
                    })
                    .collect()
            }
            _ => Vec::new(),
        }
    }

    pub fn layer_shapes(&self) -> Vec<LayerShape> {
        match self {
            ModelSpec::Feedforward { layers, .. } => layers
                .windows(2)
                .map(|w| LayerShape::Dense {
                    inp: w[0],
                    out: w[1],
                })
                .collect(),
            ModelSpec::Cnn1d {
                in_channels,
                blocks,
                ..
            } => {
                let mut cin = *in_channels;
                let mut shapes: Vec<LayerShape> = blocks
                    .iter()
                    .map(|b| {
                        let s = LayerShape::Conv {
                            cin,
                            cout: b.out_channels,
                            kernel: b.kernel,
                            stride: b.stride,
                        };
                        cin = b.out_channels;
                        s
                    })
                    .collect();
                shapes.push(LayerShape::Dense {
                    inp: cin,
                    out: N_CLASSES,
                });
                shapes
            }
            ModelSpec::Lstm {
                in_channels,
                hidden,
            } => vec![
                LayerShape::Lstm {
                    inp: *in_channels,
                    hidden: *hidden,
                },
                LayerShape::Dense {
                    inp: *hidden,
                    out: N_CLASSES,
                },
            ],
        }
    }

    pub fn layout(&self) -> Vec<LayerSlot> {
        let mut offset = 0;
        self.layer_shapes()
            .into_iter()
            .map(|shape| {
                let slot = LayerSlot { shape, offset };
                offset += shape.param_count();
                slot
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(LayerShape::param_count).sum()
    }
}
