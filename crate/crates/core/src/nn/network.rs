//! Forward and backward passes over a flat parameter array.

use super::spec::{Activation, LayerShape, LayerSlot, ModelSpec, N_CLASSES};
use crate::error::{Error, Result};

/// One model input.
#[derive(Debug, Clone, PartialEq)]
pub enum Sample {
    Features(Vec<f64>),
    Sequence(Sequence),
}

/// Step-major multichannel sequence. Only the first `len` steps are real;
/// anything stored beyond them is padding and never read.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub channels: usize,
    pub values: Vec<f64>,
    pub len: usize,
}

impl Sequence {
    pub fn new(channels: usize, values: Vec<f64>) -> Self {
        let len = values.len() / channels.max(1);
        Sequence {
            channels,
            values,
            len,
        }
    }

    /// Zero-padded to `steps` steps, keeping the valid length.
    pub fn padded(&self, steps: usize) -> Self {
        let mut values = self.values.clone();
        values.resize(steps.max(self.len) * self.channels, 0.0);
        Sequence {
            channels: self.channels,
            values,
            len: self.len,
        }
    }

    pub fn step(&self, j: usize) -> &[f64] {
        &self.values[j * self.channels..(j + 1) * self.channels]
    }
}

pub fn softmax(logits: [f64; N_CLASSES]) -> [f64; N_CLASSES] {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

/// Cross-entropy of one sample, computed stably from logits.
pub fn cross_entropy(logits: [f64; N_CLASSES], label: usize) -> f64 {
    let m = logits[0].max(logits[1]);
    let lse = m + ((logits[0] - m).exp() + (logits[1] - m).exp()).ln();
    lse - logits[label]
}

fn dense_forward(slot: &LayerSlot, params: &[f64], x: &[f64]) -> Vec<f64> {
    let LayerShape::Dense { inp, .. } = slot.shape else {
        unreachable!("dense slot expected")
    };
    slot.weights(params)
        .chunks_exact(inp)
        .zip(slot.biases(params))
        .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
        .collect()
}

/// Accumulates parameter gradients; returns the input gradient when asked.
fn dense_backward(
    slot: &LayerSlot,
    params: &[f64],
    x: &[f64],
    dy: &[f64],
    grad: &mut [f64],
    want_dx: bool,
) -> Vec<f64> {
    let LayerShape::Dense { inp, out } = slot.shape else {
        unreachable!("dense slot expected")
    };
    let w = slot.weights(params);
    let g = &mut grad[slot.range()];
    let (gw, gb) = g.split_at_mut(inp * out);
    for (o, &d) in dy.iter().enumerate() {
        gb[o] += d;
        if d != 0.0 {
            gw[o * inp..(o + 1) * inp]
                .iter_mut()
                .zip(x)
                .for_each(|(gw, xv)| *gw += d * xv);
        }
    }
    if !want_dx {
        return Vec::new();
    }
    let mut dx = vec![0.0; inp];
    for (o, &d) in dy.iter().enumerate() {
        if d != 0.0 {
            dx.iter_mut()
                .zip(&w[o * inp..(o + 1) * inp])
                .for_each(|(dx, wv)| *dx += wv * d);
        }
    }
    dx
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

// ---------------------------------------------------------------- feedforward

struct FeedforwardTrace {
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
}

fn ff_forward(slots: &[LayerSlot], act: Activation, params: &[f64], x: &[f64]) -> FeedforwardTrace {
    let mut acts = vec![x.to_vec()];
    for (l, slot) in slots.iter().enumerate() {
        let mut z = dense_forward(slot, params, acts.last().unwrap());
        if l + 1 < slots.len() {
            z.iter_mut().for_each(|v| *v = act.apply(*v));
        }
        acts.push(z);
    }
    FeedforwardTrace { acts }
}

fn ff_backward(
    slots: &[LayerSlot],
    act: Activation,
    params: &[f64],
    trace: &FeedforwardTrace,
    dlogits: &[f64],
    grad: &mut [f64],
) {
    let mut dy = dlogits.to_vec();
    for l in (0..slots.len()).rev() {
        let dx = dense_backward(&slots[l], params, &trace.acts[l], &dy, grad, l > 0);
        if l > 0 {
            dy = dx
                .iter()
                .zip(&trace.acts[l])
                .map(|(d, a)| d * act.grad_from_output(*a))
                .collect();
        }
    }
}

// ---------------------------------------------------------------- cnn1d

struct ConvTrace {
    /// Channel-major input of this block.
    input: Vec<f64>,
    in_len: usize,
    /// Activated conv output, channel-major `cout x conv_len`.
    activated: Vec<f64>,
    conv_len: usize,
    /// Flat index into `activated` chosen by each pooled output.
    argmax: Vec<usize>,
    pooled_len: usize,
}

struct CnnTrace {
    blocks: Vec<ConvTrace>,
    /// Output of the last block, channel-major.
    last: Vec<f64>,
    valid: usize,
    pooled: Vec<f64>,
}

/// Valid length after a conv (`kernel`, `stride`) and a pool of width `pool`.
fn propagate_valid(valid: usize, kernel: usize, stride: usize, pool: usize, conv_len: usize, pooled_len: usize) -> (usize, usize) {
    let conv_valid = if valid >= kernel {
        ((valid - kernel) / stride + 1).min(conv_len)
    } else {
        1
    };
    let pooled_valid = (conv_valid / pool).clamp(1, pooled_len);
    (conv_valid, pooled_valid)
}

fn conv_forward(shape: LayerShape, slot: &LayerSlot, params: &[f64], x: &[f64], in_len: usize, out_len: usize) -> Vec<f64> {
    let LayerShape::Conv {
        cin,
        cout,
        kernel,
        stride,
    } = shape
    else {
        unreachable!("conv slot expected")
    };
    let w = slot.weights(params);
    let b = slot.biases(params);
    let mut out = vec![0.0; cout * out_len];
    for co in 0..cout {
        let row = &mut out[co * out_len..(co + 1) * out_len];
        row.iter_mut().for_each(|v| *v = b[co]);
        for ci in 0..cin {
            let wk = &w[(co * cin + ci) * kernel..(co * cin + ci + 1) * kernel];
            let xs = &x[ci * in_len..(ci + 1) * in_len];
            for (t, r) in row.iter_mut().enumerate() {
                let base = t * stride;
                *r += wk.iter().zip(&xs[base..base + kernel]).map(|(a, b)| a * b).sum::<f64>();
            }
        }
    }
    out
}

fn cnn_input(spec_in: usize, input_len: usize, seq: &Sequence) -> (Vec<f64>, usize) {
    let valid = seq.len.min(input_len);
    let mut x = vec![0.0; spec_in * input_len];
    for t in 0..valid {
        for (c, v) in seq.step(t).iter().enumerate() {
            x[c * input_len + t] = *v;
        }
    }
    (x, valid)
}

fn cnn_forward(spec: &ModelSpec, slots: &[LayerSlot], params: &[f64], seq: &Sequence) -> CnnTrace {
    let ModelSpec::Cnn1d {
        in_channels,
        input_len,
        blocks,
        activation,
    } = spec
    else {
        unreachable!("cnn spec expected")
    };
    let (mut x, mut valid) = cnn_input(*in_channels, *input_len, seq);
    let mut in_len = *input_len;
    let mut traces = Vec::with_capacity(blocks.len());
    for ((block, slot), (conv_len, pooled_len)) in blocks.iter().zip(slots).zip(spec.conv_lengths()) {
        let mut a = conv_forward(slot.shape, slot, params, &x, in_len, conv_len);
        a.iter_mut().for_each(|v| *v = activation.apply(*v));
        let cout = block.out_channels;
        let mut pooled = vec![0.0; cout * pooled_len];
        let mut argmax = vec![0; cout * pooled_len];
        for c in 0..cout {
            for t in 0..pooled_len {
                let start = c * conv_len + t * block.pool;
                let mut best = start;
                for i in start + 1..start + block.pool {
                    if a[i] > a[best] {
                        best = i;
                    }
                }
                pooled[c * pooled_len + t] = a[best];
                argmax[c * pooled_len + t] = best;
            }
        }
        valid = propagate_valid(valid, block.kernel, block.stride, block.pool, conv_len, pooled_len).1;
        traces.push(ConvTrace {
            input: std::mem::replace(&mut x, pooled),
            in_len,
            activated: a,
            conv_len,
            argmax,
            pooled_len,
        });
        in_len = pooled_len;
    }
    let cout = blocks.last().unwrap().out_channels;
    let pooled_global: Vec<f64> = (0..cout)
        .map(|c| x[c * in_len..c * in_len + valid].iter().sum::<f64>() / valid as f64)
        .collect();
    CnnTrace {
        blocks: traces,
        last: x,
        valid,
        pooled: pooled_global,
    }
}

fn cnn_backward(
    spec: &ModelSpec,
    slots: &[LayerSlot],
    params: &[f64],
    trace: &CnnTrace,
    dlogits: &[f64],
    grad: &mut [f64],
) {
    let ModelSpec::Cnn1d { activation, .. } = spec else {
        unreachable!("cnn spec expected")
    };
    let head = slots.last().unwrap();
    let dg = dense_backward(head, params, &trace.pooled, dlogits, grad, true);

    let last_len = trace.blocks.last().unwrap().pooled_len;
    let mut dout = vec![0.0; trace.last.len()];
    for (c, d) in dg.iter().enumerate() {
        let share = d / trace.valid as f64;
        dout[c * last_len..c * last_len + trace.valid]
            .iter_mut()
            .for_each(|v| *v = share);
    }

    for (bi, bt) in trace.blocks.iter().enumerate().rev() {
        let slot = &slots[bi];
        let LayerShape::Conv {
            cin,
            cout,
            kernel,
            stride,
        } = slot.shape
        else {
            unreachable!("conv slot expected")
        };
        // unpool, then through the activation
        let mut dz = vec![0.0; bt.activated.len()];
        for (i, &src) in bt.argmax.iter().enumerate() {
            dz[src] += dout[i];
        }
        dz.iter_mut()
            .zip(&bt.activated)
            .for_each(|(d, a)| *d *= activation.grad_from_output(*a));

        let w = slot.weights(params);
        let want_dx = bi > 0;
        let mut dx = if want_dx {
            vec![0.0; cin * bt.in_len]
        } else {
            Vec::new()
        };
        let g = &mut grad[slot.range()];
        let (gw, gb) = g.split_at_mut(cout * cin * kernel);
        for co in 0..cout {
            let dzr = &dz[co * bt.conv_len..(co + 1) * bt.conv_len];
            gb[co] += dzr.iter().sum::<f64>();
            for ci in 0..cin {
                let widx = (co * cin + ci) * kernel;
                let xs = &bt.input[ci * bt.in_len..(ci + 1) * bt.in_len];
                for (t, &d) in dzr.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let base = t * stride;
                    for j in 0..kernel {
                        gw[widx + j] += d * xs[base + j];
                    }
                    if want_dx {
                        let dxs = &mut dx[ci * bt.in_len..(ci + 1) * bt.in_len];
                        for j in 0..kernel {
                            dxs[base + j] += d * w[widx + j];
                        }
                    }
                }
            }
        }
        dout = dx;
    }
}

// ---------------------------------------------------------------- lstm

struct LstmStep {
    /// `[x_t; h_{t-1}]`
    xh: Vec<f64>,
    gates: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
}

struct LstmTrace {
    steps: Vec<LstmStep>,
    h: Vec<f64>,
}

fn lstm_forward(slot: &LayerSlot, params: &[f64], seq: &Sequence) -> LstmTrace {
    let LayerShape::Lstm { inp, hidden } = slot.shape else {
        unreachable!("lstm slot expected")
    };
    let w = slot.weights(params);
    let b = slot.biases(params);
    let cols = inp + hidden;
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    let mut steps = Vec::with_capacity(seq.len);
    for t in 0..seq.len {
        let mut xh = Vec::with_capacity(cols);
        xh.extend_from_slice(seq.step(t));
        xh.extend_from_slice(&h);
        let mut gates: Vec<f64> = w
            .chunks_exact(cols)
            .zip(b)
            .map(|(row, bias)| bias + row.iter().zip(&xh).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        for k in 0..hidden {
            gates[k] = sigmoid(gates[k]);
            gates[hidden + k] = sigmoid(gates[hidden + k]);
            gates[2 * hidden + k] = gates[2 * hidden + k].tanh();
            gates[3 * hidden + k] = sigmoid(gates[3 * hidden + k]);
        }
        let c_prev = c.clone();
        let mut tanh_c = vec![0.0; hidden];
        for k in 0..hidden {
            c[k] = gates[hidden + k] * c[k] + gates[k] * gates[2 * hidden + k];
            tanh_c[k] = c[k].tanh();
            h[k] = gates[3 * hidden + k] * tanh_c[k];
        }
        steps.push(LstmStep {
            xh,
            gates,
            c_prev,
            tanh_c,
        });
    }
    LstmTrace { steps, h }
}

fn lstm_backward(slot: &LayerSlot, params: &[f64], trace: &LstmTrace, dh_final: &[f64], grad: &mut [f64]) {
    let LayerShape::Lstm { inp, hidden } = slot.shape else {
        unreachable!("lstm slot expected")
    };
    let w = slot.weights(params);
    let cols = inp + hidden;
    let mut dh = dh_final.to_vec();
    let mut dc = vec![0.0; hidden];
    let mut dz = vec![0.0; 4 * hidden];
    let g = &mut grad[slot.range()];
    let (gw, gb) = g.split_at_mut(4 * hidden * cols);
    for step in trace.steps.iter().rev() {
        let gs = &step.gates;
        for k in 0..hidden {
            let (i, f, gg, o) = (gs[k], gs[hidden + k], gs[2 * hidden + k], gs[3 * hidden + k]);
            let tc = step.tanh_c[k];
            let d_o = dh[k] * tc;
            dc[k] += dh[k] * o * (1.0 - tc * tc);
            let d_i = dc[k] * gg;
            let d_g = dc[k] * i;
            let d_f = dc[k] * step.c_prev[k];
            dz[k] = d_i * i * (1.0 - i);
            dz[hidden + k] = d_f * f * (1.0 - f);
            dz[2 * hidden + k] = d_g * (1.0 - gg * gg);
            dz[3 * hidden + k] = d_o * o * (1.0 - o);
            dc[k] *= f;
        }
        let mut dxh = vec![0.0; cols];
        for (r, &d) in dz.iter().enumerate() {
            gb[r] += d;
            if d == 0.0 {
                continue;
            }
            let row = r * cols;
            gw[row..row + cols]
                .iter_mut()
                .zip(&step.xh)
                .for_each(|(gw, x)| *gw += d * x);
            dxh.iter_mut()
                .zip(&w[row..row + cols])
                .for_each(|(dx, wv)| *dx += d * wv);
        }
        dh.copy_from_slice(&dxh[inp..]);
    }
}

// ---------------------------------------------------------------- dispatch

enum Trace {
    Feedforward(FeedforwardTrace),
    Cnn(CnnTrace),
    Lstm(LstmTrace),
}

fn check_sample(spec: &ModelSpec, sample: &Sample) -> Result<()> {
    match (spec, sample) {
        (ModelSpec::Feedforward { layers, .. }, Sample::Features(x)) => {
            if x.len() != layers[0] {
                return Err(Error::Shape(format!(
                    "feedforward expects {} features, got {}",
                    layers[0],
                    x.len()
                )));
            }
        }
        (ModelSpec::Cnn1d { in_channels, .. } | ModelSpec::Lstm { in_channels, .. }, Sample::Sequence(s)) => {
            if s.channels != *in_channels {
                return Err(Error::Shape(format!(
                    "model expects {} channels, got {}",
                    in_channels, s.channels
                )));
            }
            if s.len == 0 || s.values.len() < s.len * s.channels {
                return Err(Error::Shape(format!(
                    "sequence of valid length {} holds only {} values",
                    s.len,
                    s.values.len()
                )));
            }
        }
        (ModelSpec::Feedforward { .. }, Sample::Sequence(_)) => {
            return Err(Error::Shape("feedforward model given a sequence".into()))
        }
        (_, Sample::Features(_)) => {
            return Err(Error::Shape("sequence model given a feature vector".into()))
        }
    }
    Ok(())
}

fn run_forward(spec: &ModelSpec, slots: &[LayerSlot], params: &[f64], sample: &Sample) -> Result<([f64; N_CLASSES], Trace)> {
    check_sample(spec, sample)?;
    let (logits, trace) = match (spec, sample) {
        (ModelSpec::Feedforward { activation, .. }, Sample::Features(x)) => {
            let t = ff_forward(slots, *activation, params, x);
            (t.acts.last().unwrap().clone(), Trace::Feedforward(t))
        }
        (ModelSpec::Cnn1d { .. }, Sample::Sequence(s)) => {
            let t = cnn_forward(spec, slots, params, s);
            (dense_forward(slots.last().unwrap(), params, &t.pooled), Trace::Cnn(t))
        }
        (ModelSpec::Lstm { .. }, Sample::Sequence(s)) => {
            let t = lstm_forward(&slots[0], params, s);
            (dense_forward(&slots[1], params, &t.h), Trace::Lstm(t))
        }
        _ => unreachable!("checked above"),
    };
    let logits = [logits[0], logits[1]];
    if !logits.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("logits".into()));
    }
    Ok((logits, trace))
}

fn run_backward(spec: &ModelSpec, slots: &[LayerSlot], params: &[f64], trace: &Trace, dlogits: &[f64], grad: &mut [f64]) {
    match (spec, trace) {
        (ModelSpec::Feedforward { activation, .. }, Trace::Feedforward(t)) => {
            ff_backward(slots, *activation, params, t, dlogits, grad)
        }
        (ModelSpec::Cnn1d { .. }, Trace::Cnn(t)) => cnn_backward(spec, slots, params, t, dlogits, grad),
        (ModelSpec::Lstm { .. }, Trace::Lstm(t)) => {
            let dh = dense_backward(&slots[1], params, &t.h, dlogits, grad, true);
            lstm_backward(&slots[0], params, t, &dh, grad);
        }
        _ => unreachable!("trace matches spec"),
    }
}

fn check_params(spec: &ModelSpec, params: &[f64]) -> Result<Vec<LayerSlot>> {
    let expected = spec.param_count();
    if params.len() != expected {
        return Err(Error::Shape(format!(
            "spec needs {expected} parameters, got {}",
            params.len()
        )));
    }
    Ok(spec.layout())
}

/// Logits for one sample.
pub fn forward(spec: &ModelSpec, params: &[f64], sample: &Sample) -> Result<[f64; N_CLASSES]> {
    let slots = check_params(spec, params)?;
    run_forward(spec, &slots, params, sample).map(|(l, _)| l)
}

/// Mean softmax cross-entropy over the batch and its gradient, laid out like
/// the parameters.
pub fn loss_and_gradients(
    spec: &ModelSpec,
    params: &[f64],
    batch: &[Sample],
    labels: &[usize],
) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; params.len()];
    let loss = accumulate_gradients(spec, params, batch, labels, &mut grad)?;
    Ok((loss, grad))
}

/// As [`loss_and_gradients`], writing into a caller-owned buffer (zeroed
/// first).
pub fn accumulate_gradients(
    spec: &ModelSpec,
    params: &[f64],
    batch: &[Sample],
    labels: &[usize],
    grad: &mut [f64],
) -> Result<f64> {
    let slots = check_params(spec, params)?;
    if batch.is_empty() || batch.len() != labels.len() {
        return Err(Error::Shape(format!(
            "batch of {} samples with {} labels",
            batch.len(),
            labels.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|&&l| l >= N_CLASSES) {
        return Err(Error::Shape(format!("label {bad} outside {{0, 1}}")));
    }
    grad.iter_mut().for_each(|g| *g = 0.0);
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for (sample, &label) in batch.iter().zip(labels) {
        let (logits, trace) = run_forward(spec, &slots, params, sample)?;
        loss += cross_entropy(logits, label) * scale;
        let p = softmax(logits);
        let dlogits = [
            (p[0] - f64::from(label == 0)) * scale,
            (p[1] - f64::from(label == 1)) * scale,
        ];
        run_backward(spec, &slots, params, &trace, &dlogits, grad);
    }
    Ok(loss)
}

/// Activated, pre-pooling outputs of every conv block for one sample,
/// channel-major. Empty for non-convolutional specs.
pub fn conv_activations(spec: &ModelSpec, params: &[f64], seq: &Sequence) -> Result<Vec<Vec<f64>>> {
    let slots = check_params(spec, params)?;
    if !matches!(spec, ModelSpec::Cnn1d { .. }) {
        return Ok(Vec::new());
    }
    check_sample(spec, &Sample::Sequence(seq.clone()))?;
    let trace = cnn_forward(spec, &slots, params, seq);
    Ok(trace.blocks.into_iter().map(|b| b.activated).collect())
}
