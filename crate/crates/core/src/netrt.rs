//! Minimal CNN inference runtime.
//!
//! Networks are flat layer lists loaded from a one-layer-per-line text
//! manifest plus a little-endian f32 weight blob (widened to f64 in
//! memory). Forward passes record every layer's input and output
//! activations so relevance propagation can replay the network backward.
//!
//! Manifest grammar, one directive per line (`#` starts a comment):
//!
//! ```text
//! input <H> <W> <C>
//! labels <name> <name> ...          # optional
//! conv2d out=<Cout> kh=<K> kw=<K> stride=<S> pad=<P>
//! relu
//! maxpool2d kh=<K> kw=<K> stride=<S>
//! flatten
//! dense out=<N>
//! softmax
//! ```
//!
//! Weight blob layout follows manifest order: for each conv2d the kernel
//! `[Cout, Cin, Kh, Kw]` row-major then `Cout` biases; for each dense the
//! matrix `[out, in]` row-major then `out` biases.

use crate::error::{Result, SrError};
use crate::tensor::Tensor;
use std::fs;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct Conv2D {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    /// Kernel tensor [Cout, Cin, Kh, Kw].
    pub weights: Tensor,
    pub bias: Vec<f64>,
}

impl Conv2D {
    #[inline]
    pub fn weight(&self, oc: usize, ic: usize, ky: usize, kx: usize) -> f64 {
        self.weights.data()[((oc * self.in_channels + ic) * self.kh + ky) * self.kw + kx]
    }
}

#[derive(Debug, Clone)]
pub struct Dense {
    pub out_dim: usize,
    pub in_dim: usize,
    /// Weight matrix [out, in].
    pub weights: Tensor,
    pub bias: Vec<f64>,
}

impl Dense {
    #[inline]
    pub fn weight(&self, o: usize, i: usize) -> f64 {
        self.weights.data()[o * self.in_dim + i]
    }
}

#[derive(Debug, Clone)]
pub struct MaxPool2D {
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
}

#[derive(Debug, Clone)]
pub enum LayerSpec {
    Conv2D(Conv2D),
    Dense(Dense),
    ReLU,
    MaxPool2D(MaxPool2D),
    Flatten,
    Softmax,
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv2D(_) => "conv2d",
            LayerSpec::Dense(_) => "dense",
            LayerSpec::ReLU => "relu",
            LayerSpec::MaxPool2D(_) => "maxpool2d",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Softmax => "softmax",
        }
    }

    /// Output shape for the given input shape, or a message describing
    /// why the shapes do not compose.
    pub fn output_shape(&self, input: &[usize]) -> std::result::Result<Vec<usize>, String> {
        match self {
            LayerSpec::Conv2D(c) => {
                let [h, w, ch] = three_dims(input)?;
                if ch != c.in_channels {
                    return Err(format!(
                        "conv2d expects {} input channels, got {ch}",
                        c.in_channels
                    ));
                }
                let eh = h + 2 * c.pad;
                let ew = w + 2 * c.pad;
                if eh < c.kh || ew < c.kw {
                    return Err(format!(
                        "kernel {}x{} does not fit padded input {eh}x{ew}",
                        c.kh, c.kw
                    ));
                }
                Ok(vec![
                    (eh - c.kh) / c.stride + 1,
                    (ew - c.kw) / c.stride + 1,
                    c.out_channels,
                ])
            }
            LayerSpec::Dense(d) => {
                let n: usize = input.iter().product();
                if n != d.in_dim {
                    return Err(format!(
                        "dense expects {} inputs, got {n} (shape {input:?})",
                        d.in_dim
                    ));
                }
                Ok(vec![d.out_dim])
            }
            LayerSpec::ReLU => Ok(input.to_vec()),
            LayerSpec::MaxPool2D(p) => {
                let [h, w, ch] = three_dims(input)?;
                if h < p.kh || w < p.kw {
                    return Err(format!(
                        "pool window {}x{} does not fit input {h}x{w}",
                        p.kh, p.kw
                    ));
                }
                Ok(vec![(h - p.kh) / p.stride + 1, (w - p.kw) / p.stride + 1, ch])
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Softmax => {
                if input.len() != 1 {
                    return Err(format!("softmax expects a flat vector, got {input:?}"));
                }
                Ok(input.to_vec())
            }
        }
    }

    /// Number of f32 values this layer consumes from the weight blob.
    pub fn param_count(&self) -> usize {
        match self {
            LayerSpec::Conv2D(c) => c.out_channels * c.in_channels * c.kh * c.kw + c.out_channels,
            LayerSpec::Dense(d) => d.out_dim * d.in_dim + d.out_dim,
            _ => 0,
        }
    }
}

fn three_dims(shape: &[usize]) -> std::result::Result<[usize; 3], String> {
    if shape.len() != 3 {
        return Err(format!("expected an [H, W, C] input, got {shape:?}"));
    }
    Ok([shape[0], shape[1], shape[2]])
}

#[derive(Debug, Clone)]
pub struct Network {
    pub layers: Vec<LayerSpec>,
    pub input_shape: Vec<usize>,
    pub class_labels: Vec<String>,
}

impl Network {
    pub fn new(
        layers: Vec<LayerSpec>,
        input_shape: Vec<usize>,
        class_labels: Vec<String>,
    ) -> Result<Self> {
        let net = Self {
            layers,
            input_shape,
            class_labels,
        };
        net.validate()?;
        Ok(net)
    }

    /// Check layer count and eager shape composition; fills in nothing.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(SrError::Schema {
                layer: "network".to_string(),
                message: "network must have at least one layer".to_string(),
            });
        }
        self.layer_shapes().map(|_| ())
    }

    /// Per-layer output shapes, index i = output of layer i.
    pub fn layer_shapes(&self) -> Result<Vec<Vec<usize>>> {
        let mut shapes = Vec::with_capacity(self.layers.len());
        let mut current = self.input_shape.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            current = layer.output_shape(&current).map_err(|message| SrError::Schema {
                layer: format!("{} ({})", i, layer.kind()),
                message,
            })?;
            shapes.push(current.clone());
        }
        Ok(shapes)
    }

    pub fn output_dim(&self) -> Result<usize> {
        let shapes = self.layer_shapes()?;
        Ok(shapes.last().map(|s| s.iter().product()).unwrap_or(0))
    }

    pub fn forward(&self, input: &Tensor) -> Result<ForwardTrace> {
        if input.shape() != self.input_shape.as_slice() {
            return Err(SrError::invalid(format!(
                "input shape {:?} does not match network input {:?}",
                input.shape(),
                self.input_shape
            )));
        }
        let mut steps = Vec::with_capacity(self.layers.len());
        let mut current = input.clone();
        for layer in &self.layers {
            let output = forward_layer(layer, &current)?;
            steps.push(LayerTrace {
                input: current,
                output: output.clone(),
            });
            current = output;
        }
        current.assert_finite("forward pass")?;
        Ok(ForwardTrace {
            steps,
            output: current,
        })
    }

    /// Top class of the final vector, ties broken by lowest index.
    pub fn predict(&self, input: &Tensor) -> Result<(usize, f64)> {
        let trace = self.forward(input)?;
        let idx = trace.output.argmax();
        Ok((idx, trace.output.data()[idx]))
    }

    pub fn label(&self, class_index: usize) -> String {
        self.class_labels
            .get(class_index)
            .cloned()
            .unwrap_or_else(|| format!("class{class_index}"))
    }
}

#[derive(Debug, Clone)]
pub struct LayerTrace {
    pub input: Tensor,
    pub output: Tensor,
}

/// Activation record of one forward pass; `output` is the final vector.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub steps: Vec<LayerTrace>,
    pub output: Tensor,
}

fn forward_layer(layer: &LayerSpec, input: &Tensor) -> Result<Tensor> {
    let out_shape = layer
        .output_shape(input.shape())
        .map_err(SrError::InvalidArgument)?;
    Ok(match layer {
        LayerSpec::Conv2D(c) => conv2d_forward(c, input, &out_shape),
        LayerSpec::Dense(d) => dense_forward(d, input),
        LayerSpec::ReLU => {
            let mut out = input.clone();
            for v in out.data_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            out
        }
        LayerSpec::MaxPool2D(p) => maxpool_forward(p, input, &out_shape),
        LayerSpec::Flatten => input.reshape(out_shape)?,
        LayerSpec::Softmax => softmax(input),
    })
}

fn conv2d_forward(c: &Conv2D, input: &Tensor, out_shape: &[usize]) -> Tensor {
    let (ih, iw, ic) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (oh, ow) = (out_shape[0], out_shape[1]);
    let x = input.data();
    let mut out = Tensor::zeros(out_shape.to_vec());
    let o = out.data_mut();
    for oy in 0..oh {
        for ox in 0..ow {
            for oc in 0..c.out_channels {
                let mut acc = c.bias[oc];
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
                            acc += c.weight(oc, ch, ky, kx) * x[base + ch];
                        }
                    }
                }
                o[(oy * ow + ox) * c.out_channels + oc] = acc;
            }
        }
    }
    out
}

fn dense_forward(d: &Dense, input: &Tensor) -> Tensor {
    let x = input.data();
    let mut out = Tensor::zeros(vec![d.out_dim]);
    for oi in 0..d.out_dim {
        let row = &d.weights.data()[oi * d.in_dim..(oi + 1) * d.in_dim];
        let mut acc = d.bias[oi];
        for (w, v) in row.iter().zip(x) {
            acc += w * v;
        }
        out.data_mut()[oi] = acc;
    }
    out
}

fn maxpool_forward(p: &MaxPool2D, input: &Tensor, out_shape: &[usize]) -> Tensor {
    let (iw, ic) = (input.shape()[1], input.shape()[2]);
    let (oh, ow) = (out_shape[0], out_shape[1]);
    let x = input.data();
    let mut out = Tensor::zeros(out_shape.to_vec());
    let o = out.data_mut();
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..ic {
                let mut best = f64::NEG_INFINITY;
                for ky in 0..p.kh {
                    for kx in 0..p.kw {
                        let iy = oy * p.stride + ky;
                        let ix = ox * p.stride + kx;
                        let v = x[(iy * iw + ix) * ic + ch];
                        if v > best {
                            best = v;
                        }
                    }
                }
                o[(oy * ow + ox) * ic + ch] = best;
            }
        }
    }
    out
}

fn softmax(input: &Tensor) -> Tensor {
    let peak = input.max();
    let mut out = input.clone();
    let mut sum = 0.0;
    for v in out.data_mut() {
        *v = (*v - peak).exp();
        sum += *v;
    }
    for v in out.data_mut() {
        *v /= sum;
    }
    out
}

// ---------------------------------------------------------------------
// Manifest and weight blob loading
// ---------------------------------------------------------------------

pub fn load_network(manifest_path: &Path, weights_path: &Path) -> Result<Network> {
    let text = fs::read_to_string(manifest_path)
        .map_err(|e| SrError::io(manifest_path.display().to_string(), e.to_string()))?;
    let (mut net, _) = parse_manifest(&text)?;
    let blob = fs::read(weights_path)
        .map_err(|e| SrError::io(weights_path.display().to_string(), e.to_string()))?;
    if blob.len() % 4 != 0 {
        return Err(SrError::io(
            weights_path.display().to_string(),
            format!("weight blob length {} is not a multiple of 4", blob.len()),
        ));
    }
    let values: Vec<f64> = blob
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let needed: usize = net.layers.iter().map(LayerSpec::param_count).sum();
    if values.len() != needed {
        return Err(SrError::io(
            weights_path.display().to_string(),
            format!("expected {} values, found {}", needed, values.len()),
        ));
    }
    let mut cursor = 0;
    for layer in &mut net.layers {
        let take = layer.param_count();
        let chunk = &values[cursor..cursor + take];
        cursor += take;
        match layer {
            LayerSpec::Conv2D(c) => {
                let wlen = c.out_channels * c.in_channels * c.kh * c.kw;
                c.weights = Tensor::new(
                    vec![c.out_channels, c.in_channels, c.kh, c.kw],
                    chunk[..wlen].to_vec(),
                )?;
                c.bias = chunk[wlen..].to_vec();
            }
            LayerSpec::Dense(d) => {
                let wlen = d.out_dim * d.in_dim;
                d.weights = Tensor::new(vec![d.out_dim, d.in_dim], chunk[..wlen].to_vec())?;
                d.bias = chunk[wlen..].to_vec();
            }
            _ => {}
        }
    }
    net.validate()?;
    Ok(net)
}

/// Parse a manifest, leaving parameter tensors zero-filled. Returns the
/// network and the total f32 count the weight blob must supply.
pub fn parse_manifest(text: &str) -> Result<(Network, usize)> {
    let mut input_shape: Option<Vec<usize>> = None;
    let mut labels: Vec<String> = Vec::new();
    let mut layers: Vec<LayerSpec> = Vec::new();
    let mut current: Vec<usize> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let word = parts.next().unwrap();
        let schema = |message: String| SrError::Schema {
            layer: format!("line {} ({word})", lineno + 1),
            message,
        };
        match word {
            "input" => {
                let dims: Vec<usize> = parts
                    .map(|t| t.parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| schema(format!("bad input dimension: {e}")))?;
                if dims.len() != 3 || dims.contains(&0) {
                    return Err(schema(format!("input expects three positive dims, got {dims:?}")));
                }
                current = dims.clone();
                input_shape = Some(dims);
            }
            "labels" => {
                labels = parts.map(str::to_string).collect();
            }
            "conv2d" | "dense" | "maxpool2d" | "relu" | "flatten" | "softmax" => {
                if input_shape.is_none() {
                    return Err(schema("the input directive must precede layers".to_string()));
                }
                let kv = parse_kv(parts.collect::<Vec<_>>()).map_err(schema)?;
                let layer = build_layer(word, &kv, &current).map_err(schema)?;
                current = layer
                    .output_shape(&current)
                    .map_err(|m| SrError::Schema {
                        layer: format!("{} ({})", layers.len(), layer.kind()),
                        message: m,
                    })?;
                layers.push(layer);
            }
            other => {
                return Err(schema(format!("unknown directive `{other}`")));
            }
        }
    }

    let input_shape = input_shape.ok_or_else(|| SrError::Schema {
        layer: "manifest".to_string(),
        message: "missing input directive".to_string(),
    })?;
    let net = Network::new(layers, input_shape, labels)?;
    let count = net.layers.iter().map(LayerSpec::param_count).sum();
    Ok((net, count))
}

fn parse_kv(tokens: Vec<&str>) -> std::result::Result<Vec<(String, usize)>, String> {
    tokens
        .into_iter()
        .map(|t| {
            let (k, v) = t
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got `{t}`"))?;
            let v = v
                .parse::<usize>()
                .map_err(|e| format!("bad value for `{k}`: {e}"))?;
            Ok((k.to_string(), v))
        })
        .collect()
}

fn get(kv: &[(String, usize)], key: &str) -> std::result::Result<usize, String> {
    kv.iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| format!("missing `{key}`"))
}

fn get_or(kv: &[(String, usize)], key: &str, default: usize) -> usize {
    kv.iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| *v)
        .unwrap_or(default)
}

fn build_layer(
    word: &str,
    kv: &[(String, usize)],
    current: &[usize],
) -> std::result::Result<LayerSpec, String> {
    match word {
        "conv2d" => {
            let out = get(kv, "out")?;
            let kh = get(kv, "kh")?;
            let kw = get(kv, "kw")?;
            let stride = get_or(kv, "stride", 1);
            let pad = get_or(kv, "pad", 0);
            if stride == 0 || kh == 0 || kw == 0 || out == 0 {
                return Err("conv2d parameters must be positive".to_string());
            }
            let [_, _, in_channels] = three_dims(current)?;
            Ok(LayerSpec::Conv2D(Conv2D {
                out_channels: out,
                in_channels,
                kh,
                kw,
                stride,
                pad,
                weights: Tensor::zeros(vec![out, in_channels, kh, kw]),
                bias: vec![0.0; out],
            }))
        }
        "dense" => {
            let out = get(kv, "out")?;
            if out == 0 {
                return Err("dense out must be positive".to_string());
            }
            let in_dim: usize = current.iter().product();
            Ok(LayerSpec::Dense(Dense {
                out_dim: out,
                in_dim,
                weights: Tensor::zeros(vec![out, in_dim]),
                bias: vec![0.0; out],
            }))
        }
        "maxpool2d" => {
            let kh = get(kv, "kh")?;
            let kw = get(kv, "kw")?;
            let stride = get_or(kv, "stride", kh.max(1));
            if stride == 0 || kh == 0 || kw == 0 {
                return Err("maxpool2d parameters must be positive".to_string());
            }
            Ok(LayerSpec::MaxPool2D(MaxPool2D { kh, kw, stride }))
        }
        "relu" => Ok(LayerSpec::ReLU),
        "flatten" => Ok(LayerSpec::Flatten),
        "softmax" => Ok(LayerSpec::Softmax),
        _ => unreachable!(),
    }
}

/// Write the manifest + weight blob pair `load_network` reads back.
pub fn save_network(net: &Network, manifest_path: &Path, weights_path: &Path) -> Result<()> {
    net.validate()?;
    let mut text = String::new();
    text.push_str(&format!(
        "input {} {} {}\n",
        net.input_shape[0], net.input_shape[1], net.input_shape[2]
    ));
    if !net.class_labels.is_empty() {
        text.push_str(&format!("labels {}\n", net.class_labels.join(" ")));
    }
    for layer in &net.layers {
        match layer {
            LayerSpec::Conv2D(c) => text.push_str(&format!(
                "conv2d out={} kh={} kw={} stride={} pad={}\n",
                c.out_channels, c.kh, c.kw, c.stride, c.pad
            )),
            LayerSpec::Dense(d) => text.push_str(&format!("dense out={}\n", d.out_dim)),
            LayerSpec::ReLU => text.push_str("relu\n"),
            LayerSpec::MaxPool2D(p) => text.push_str(&format!(
                "maxpool2d kh={} kw={} stride={}\n",
                p.kh, p.kw, p.stride
            )),
            LayerSpec::Flatten => text.push_str("flatten\n"),
            LayerSpec::Softmax => text.push_str("softmax\n"),
        }
    }
    fs::write(manifest_path, text)
        .map_err(|e| SrError::io(manifest_path.display().to_string(), e.to_string()))?;

    let file = fs::File::create(weights_path)
        .map_err(|e| SrError::io(weights_path.display().to_string(), e.to_string()))?;
    let mut out = std::io::BufWriter::new(file);
    let mut write_all = |values: &[f64]| -> Result<()> {
        for v in values {
            out.write_all(&(*v as f32).to_le_bytes())
                .map_err(|e| SrError::io(weights_path.display().to_string(), e.to_string()))?;
        }
        Ok(())
    };
    for layer in &net.layers {
        match layer {
            LayerSpec::Conv2D(c) => {
                write_all(c.weights.data())?;
                write_all(&c.bias)?;
            }
            LayerSpec::Dense(d) => {
                write_all(d.weights.data())?;
                write_all(&d.bias)?;
            }
            _ => {}
        }
    }
    Ok(())
}
