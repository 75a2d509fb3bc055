//! Epsilon-rule layer-wise relevance propagation.
//!
//! The retained top-class score is redistributed backward through the
//! recorded forward trace, one layer at a time, until it reaches the
//! input pixels. Linear and convolution layers use the epsilon rule
//!
//! ```text
//! R_in[i] = sum_j  (w[j,i] * x[i]) / (sum_k w[j,k] * x[k] +- eps) * R_out[j]
//! ```
//!
//! with the stabilizer taking the sign of the denominator. Biases take
//! no share, so conservation is exact only for bias-free networks; the
//! drift is observable through [`conservation_check`]. Max pooling is
//! winner-take-all, element-wise layers pass relevance through.

use crate::error::{Result, SrError};
use crate::netrt::{Conv2D, ForwardTrace, LayerSpec, MaxPool2D, Network};
use crate::tensor::Tensor;

/// Which scalar the backward pass starts from when the network ends in
/// a softmax layer. `FinalOutput` retains the post-softmax probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreSource {
    #[default]
    FinalOutput,
    PreSoftmaxLogit,
}

#[derive(Debug, Clone, Copy)]
pub struct LrpOptions {
    pub epsilon: f64,
    pub score: ScoreSource,
}

impl Default for LrpOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-9,
            score: ScoreSource::FinalOutput,
        }
    }
}

/// Relevance at every neuron layer of one propagation.
#[derive(Debug, Clone)]
pub struct RelevanceState {
    pub epsilon: f64,
    pub source_class: usize,
    /// The retained score: everything the backward pass redistributes.
    pub source_score: f64,
    /// Relevance vector at the network output (zero except the class).
    pub output_relevance: Tensor,
    /// `per_layer[l]` is the relevance at the input of layer `l`.
    pub per_layer: Vec<Tensor>,
}

impl RelevanceState {
    /// Relevance totals from the output layer down to the input layer.
    pub fn layer_sums(&self) -> Vec<f64> {
        let mut sums = Vec::with_capacity(self.per_layer.len() + 1);
        sums.push(self.output_relevance.sum());
        for r in self.per_layer.iter().rev() {
            sums.push(r.sum());
        }
        sums
    }
}

/// Channel-summed input relevance plus the retained class and score.
#[derive(Debug, Clone)]
pub struct PixelRelevanceMap {
    pub values: Tensor,
    pub source_class: usize,
    pub source_score: f64,
}

/// Zero vector except the retained class, which keeps its final value.
pub fn init_relevance(trace: &ForwardTrace, class_index: usize) -> Result<Tensor> {
    let out = &trace.output;
    if class_index >= out.len() {
        return Err(SrError::invalid(format!(
            "class index {class_index} out of range for output of size {}",
            out.len()
        )));
    }
    let mut r = Tensor::zeros(out.shape().to_vec());
    r.data_mut()[class_index] = out.data()[class_index];
    Ok(r)
}

#[inline]
fn stabilize(denom: f64, epsilon: f64) -> f64 {
    if denom >= 0.0 {
        denom + epsilon
    } else {
        denom - epsilon
    }
}

/// Epsilon rule over an explicit weight matrix [out, in].
pub fn lrp_linear(weights: &Tensor, input: &[f64], r_out: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    if epsilon < 0.0 {
        return Err(SrError::invalid("epsilon must be non-negative".to_string()));
    }
    let shape = weights.shape();
    if shape.len() != 2 || shape[0] != r_out.len() || shape[1] != input.len() {
        return Err(SrError::invalid(format!(
            "weight shape {shape:?} does not compose with {} inputs and {} outputs",
            input.len(),
            r_out.len()
        )));
    }
    let (out_dim, in_dim) = (shape[0], shape[1]);
    let w = weights.data();
    let mut r_in = vec![0.0; in_dim];
    for j in 0..out_dim {
        if r_out[j] == 0.0 {
            continue;
        }
        let row = &w[j * in_dim..(j + 1) * in_dim];
        let mut denom = 0.0;
        for (wk, xk) in row.iter().zip(input) {
            denom += wk * xk;
        }
        let stab = stabilize(denom, epsilon);
        if stab == 0.0 {
            // Dead neuron with eps = 0: the rule is undefined, drop it.
            continue;
        }
        let scale = r_out[j] / stab;
        for i in 0..in_dim {
            r_in[i] += row[i] * input[i] * scale;
        }
    }
    Ok(r_in)
}

/// Epsilon rule applied to a convolution; each output position is one
/// linear neuron over its receptive field (zero padding contributes
/// nothing to either the numerator or the denominator).
pub fn lrp_conv(c: &Conv2D, input: &Tensor, r_out: &Tensor, epsilon: f64) -> Result<Tensor> {
    if epsilon < 0.0 {
        return Err(SrError::invalid("epsilon must be non-negative".to_string()));
    }
    let expected = LayerSpec::Conv2D(c.clone())
        .output_shape(input.shape())
        .map_err(SrError::InvalidArgument)?;
    if r_out.shape() != expected.as_slice() {
        return Err(SrError::invalid(format!(
            "output relevance shape {:?} does not match conv output {:?}",
            r_out.shape(),
            expected
        )));
    }
    let (ih, iw, ic) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (oh, ow) = (expected[0], expected[1]);
    let x = input.data();
    let ro = r_out.data();
    let mut r_in = Tensor::zeros(input.shape().to_vec());
    let ri = r_in.data_mut();
    for oy in 0..oh {
        for ox in 0..ow {
            for oc in 0..c.out_channels {
                let rj = ro[(oy * ow + ox) * c.out_channels + oc];
                if rj == 0.0 {
                    continue;
                }
                let mut denom = 0.0;
                for ky in 0..c.kh {
                    let iy = (oy * c.stride + ky) as isize - c.pad as isize;
                    if iy < 0 || iy >= ih as isize {
                        continue;
                    }
                    for kx in 0..c.kw {
                        let ix = (ox * c.stride + kx) as isize - c.pad as isize;
                        if ix < 0 || ix >= iw as isize {
                            continue;
                        }
                        let base = (iy as usize * iw + ix as usize) * ic;
                        for ch in 0..ic {
                            denom += c.weight(oc, ch, ky, kx) * x[base + ch];
                        }
                    }
                }
                let stab = stabilize(denom, epsilon);
                if stab == 0.0 {
                    continue;
                }
                let scale = rj / stab;
                for ky in 0..c.kh {
                    let iy = (oy * c.stride + ky) as isize - c.pad as isize;
                    if iy < 0 || iy >= ih as isize {
                        continue;
                    }
                    for kx in 0..c.kw {
                        let ix = (ox * c.stride + kx) as isize - c.pad as isize;
                        if ix < 0 || ix >= iw as isize {
                            continue;
                        }
                        let base = (iy as usize * iw + ix as usize) * ic;
                        for ch in 0..ic {
                            ri[base + ch] += c.weight(oc, ch, ky, kx) * x[base + ch] * scale;
                        }
                    }
                }
            }
        }
    }
    Ok(r_in)
}

/// Winner-take-all: each output's relevance goes to the arg-max input
/// of its window, ties broken by lowest row-major window index.
pub fn lrp_maxpool(p: &MaxPool2D, input: &Tensor, r_out: &Tensor) -> Result<Tensor> {
    let expected = LayerSpec::MaxPool2D(p.clone())
        .output_shape(input.shape())
        .map_err(SrError::InvalidArgument)?;
    if r_out.shape() != expected.as_slice() {
        return Err(SrError::invalid(format!(
            "output relevance shape {:?} does not match pool output {:?}",
            r_out.shape(),
            expected
        )));
    }
    let (iw, ic) = (input.shape()[1], input.shape()[2]);
    let (oh, ow) = (expected[0], expected[1]);
    let x = input.data();
    let ro = r_out.data();
    let mut r_in = Tensor::zeros(input.shape().to_vec());
    let ri = r_in.data_mut();
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..ic {
                let mut best_idx = (oy * p.stride * iw + ox * p.stride) * ic + ch;
                let mut best = f64::NEG_INFINITY;
                for ky in 0..p.kh {
                    for kx in 0..p.kw {
                        let idx = ((oy * p.stride + ky) * iw + (ox * p.stride + kx)) * ic + ch;
                        if x[idx] > best {
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                }
                ri[best_idx] += ro[(oy * ow + ox) * ic + ch];
            }
        }
    }
    Ok(r_in)
}

/// ReLU and softmax carry relevance unchanged; flatten restores shape.
pub fn lrp_passthrough(r_out: &Tensor, input_shape: &[usize]) -> Result<Tensor> {
    r_out.reshape(input_shape.to_vec())
}

/// Run the per-kind rules from the last layer down to the first and
/// collapse the input relevance to a 2-D map by channel summation.
pub fn propagate(
    net: &Network,
    trace: &ForwardTrace,
    class_index: usize,
    epsilon: f64,
) -> Result<(PixelRelevanceMap, RelevanceState)> {
    propagate_with(
        net,
        trace,
        class_index,
        &LrpOptions {
            epsilon,
            score: ScoreSource::FinalOutput,
        },
    )
}

pub fn propagate_with(
    net: &Network,
    trace: &ForwardTrace,
    class_index: usize,
    opts: &LrpOptions,
) -> Result<(PixelRelevanceMap, RelevanceState)> {
    if trace.steps.len() != net.layers.len() {
        return Err(SrError::invalid(format!(
            "trace has {} steps but the network has {} layers",
            trace.steps.len(),
            net.layers.len()
        )));
    }
    if opts.epsilon < 0.0 {
        return Err(SrError::invalid("epsilon must be non-negative".to_string()));
    }

    let mut relevance = init_relevance(trace, class_index)?;
    if opts.score == ScoreSource::PreSoftmaxLogit {
        if let Some(LayerSpec::Softmax) = net.layers.last() {
            let logits = &trace.steps.last().expect("nonempty").input;
            relevance = Tensor::zeros(logits.shape().to_vec());
            relevance.data_mut()[class_index] = logits.data()[class_index];
        }
    }
    let source_score = relevance.data()[class_index];
    let output_relevance = relevance.clone();

    let mut per_layer = vec![Tensor::zeros(vec![1]); net.layers.len()];
    for (l, layer) in net.layers.iter().enumerate().rev() {
        let step = &trace.steps[l];
        relevance = match layer {
            LayerSpec::Dense(d) => {
                let r_in = lrp_linear(&d.weights, step.input.data(), relevance.data(), opts.epsilon)?;
                Tensor::new(step.input.shape().to_vec(), r_in)?
            }
            LayerSpec::Conv2D(c) => lrp_conv(c, &step.input, &relevance, opts.epsilon)?,
            LayerSpec::MaxPool2D(p) => lrp_maxpool(p, &step.input, &relevance)?,
            LayerSpec::ReLU | LayerSpec::Flatten | LayerSpec::Softmax => {
                lrp_passthrough(&relevance, step.input.shape())?
            }
        };
        per_layer[l] = relevance.clone();
    }

    let state = RelevanceState {
        epsilon: opts.epsilon,
        source_class: class_index,
        source_score,
        output_relevance,
        per_layer,
    };

    let input_rel = &state.per_layer[0];
    let (h, w, c) = (
        input_rel.shape()[0],
        input_rel.shape()[1],
        input_rel.shape()[2],
    );
    let mut map = Tensor::zeros(vec![h, w]);
    for y in 0..h {
        for x in 0..w {
            let base = (y * w + x) * c;
            let mut acc = 0.0;
            for ch in 0..c {
                acc += input_rel.data()[base + ch];
            }
            map.set2(y, x, acc);
        }
    }
    map.assert_finite("relevance propagation")?;

    Ok((
        PixelRelevanceMap {
            values: map,
            source_class: class_index,
            source_score,
        },
        state,
    ))
}

/// Per-layer residuals |sum R - source| / max(|source|, 1e-12), ordered
/// from the output layer down to the input layer.
pub fn conservation_check(state: &RelevanceState) -> Vec<f64> {
    let floor = state.source_score.abs().max(1e-12);
    state
        .layer_sums()
        .iter()
        .map(|s| (s - state.source_score).abs() / floor)
        .collect()
}
