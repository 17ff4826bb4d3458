//! A small neural-network engine: dense, 1D-convolution and LSTM layers over
//! a flat parameter array, exact backpropagation, Adam, finite-difference
//! checks and FLOPs accounting.

mod adam;
mod flops;
mod gradcheck;
mod model;
mod network;
mod spec;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use flops::{
    conv_flops, count_flops, dense_flops, lstm_step_flops, transformer_flops, FlopsEstimate,
    FlopsTarget, LayerFlops, TransformerParams,
};
pub use gradcheck::{
    check_gradient, grad_check, random_batch, relative_error, GradCheckReport, LayerError,
    FD_EPSILON, RELATIVE_FLOOR,
};
pub use model::{init_params, EpochRecord, Scaler, TrainedModel};
pub use network::{
    accumulate_gradients, conv_activations, cross_entropy, forward, loss_and_gradients, softmax,
    Sample, Sequence,
};
pub use spec::{Activation, ConvBlock, LayerShape, LayerSlot, ModelKind, ModelSpec, N_CLASSES};
