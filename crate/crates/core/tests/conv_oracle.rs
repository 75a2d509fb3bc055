//! Forward-pass checks against a direct six-nested-loop convolution
//! oracle plus determinism and softmax properties.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srmap::netrt::{Conv2D, LayerSpec, Network};
use srmap::tensor::Tensor;

/// Reference convolution written independently of the runtime: plain
/// loops over output position, output channel, kernel, input channel.
#[allow(clippy::too_many_arguments)]
fn conv_oracle(
    input: &[f64],
    ih: usize,
    iw: usize,
    ic: usize,
    weights: &[f64],
    bias: &[f64],
    oc_n: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
) -> (Vec<f64>, usize, usize) {
    let oh = (ih + 2 * pad - kh) / stride + 1;
    let ow = (iw + 2 * pad - kw) / stride + 1;
    let mut out = vec![0.0; oh * ow * oc_n];
    for oy in 0..oh {
        for ox in 0..ow {
            for oc in 0..oc_n {
                let mut acc = bias[oc];
                for ky in 0..kh {
                    for kx in 0..kw {
                        for ch in 0..ic {
                            let iy = oy as isize * stride as isize + ky as isize - pad as isize;
                            let ix = ox as isize * stride as isize + kx as isize - pad as isize;
                            if iy < 0 || iy >= ih as isize || ix < 0 || ix >= iw as isize {
                                continue;
                            }
                            let x = input[(iy as usize * iw + ix as usize) * ic + ch];
                            let w = weights[((oc * ic + ch) * kh + ky) * kw + kx];
                            acc += w * x;
                        }
                    }
                }
                out[(oy * ow + ox) * oc_n + oc] = acc;
            }
        }
    }
    (out, oh, ow)
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>, lo: f64, hi: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
    Tensor::new(shape, data).unwrap()
}

#[test]
fn convolution_matches_six_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..25 {
        let (ih, iw, ic) = (8, 8, 2);
        let kh = rng.gen_range(1..=3);
        let kw = rng.gen_range(1..=3);
        let stride = rng.gen_range(1..=2);
        let pad = rng.gen_range(0..=1);
        let oc_n = rng.gen_range(1..=3);
        let input = random_tensor(&mut rng, vec![ih, iw, ic], -1.0, 1.0);
        let weights = random_tensor(&mut rng, vec![oc_n, ic, kh, kw], -1.0, 1.0);
        let bias: Vec<f64> = (0..oc_n).map(|_| rng.gen_range(-0.5..0.5)).collect();

        let layer = LayerSpec::Conv2D(Conv2D {
            out_channels: oc_n,
            in_channels: ic,
            kh,
            kw,
            stride,
            pad,
            weights: weights.clone(),
            bias: bias.clone(),
        });
        let net = Network::new(vec![layer], vec![ih, iw, ic], vec![]).unwrap();
        let trace = net.forward(&input).unwrap();

        let (expect, oh, ow) =
            conv_oracle(input.data(), ih, iw, ic, weights.data(), &bias, oc_n, kh, kw, stride, pad);
        assert_eq!(trace.output.shape(), &[oh, ow, oc_n], "case {case}");
        for (i, (got, want)) in trace.output.data().iter().zip(&expect).enumerate() {
            assert!(
                (got - want).abs() < 1e-10,
                "case {case} element {i}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn forward_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let input = random_tensor(&mut rng, vec![8, 8, 1], 0.0, 1.0);
    let conv = LayerSpec::Conv2D(Conv2D {
        out_channels: 3,
        in_channels: 1,
        kh: 3,
        kw: 3,
        stride: 1,
        pad: 1,
        weights: random_tensor(&mut rng, vec![3, 1, 3, 3], -1.0, 1.0),
        bias: vec![0.1, -0.2, 0.3],
    });
    let net = Network::new(
        vec![conv, LayerSpec::ReLU, LayerSpec::Flatten],
        vec![8, 8, 1],
        vec![],
    )
    .unwrap();
    let a = net.forward(&input).unwrap();
    let b = net.forward(&input).unwrap();
    assert_eq!(a.output.data(), b.output.data());
    for (sa, sb) in a.steps.iter().zip(&b.steps) {
        assert_eq!(sa.output.data(), sb.output.data());
    }
}

#[test]
fn concurrent_forward_on_shared_network() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let conv = LayerSpec::Conv2D(Conv2D {
        out_channels: 2,
        in_channels: 1,
        kh: 3,
        kw: 3,
        stride: 1,
        pad: 1,
        weights: random_tensor(&mut rng, vec![2, 1, 3, 3], -1.0, 1.0),
        bias: vec![0.0; 2],
    });
    let net = std::sync::Arc::new(
        Network::new(vec![conv, LayerSpec::ReLU], vec![6, 6, 1], vec![]).unwrap(),
    );
    let inputs: Vec<Tensor> = (0..4)
        .map(|_| random_tensor(&mut rng, vec![6, 6, 1], 0.0, 1.0))
        .collect();
    let sequential: Vec<Vec<f64>> = inputs
        .iter()
        .map(|i| net.forward(i).unwrap().output.data().to_vec())
        .collect();

    let handles: Vec<_> = inputs
        .into_iter()
        .map(|input| {
            let net = net.clone();
            std::thread::spawn(move || net.forward(&input).unwrap().output.data().to_vec())
        })
        .collect();
    for (h, expect) in handles.into_iter().zip(sequential) {
        assert_eq!(h.join().unwrap(), expect);
    }
}

#[test]
fn softmax_head_sums_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dense = srmap::netrt::Dense {
        out_dim: 4,
        in_dim: 6,
        weights: random_tensor(&mut rng, vec![4, 6], -2.0, 2.0),
        bias: vec![0.5, -0.5, 0.0, 1.0],
    };
    let net = Network::new(
        vec![LayerSpec::Dense(dense), LayerSpec::Softmax],
        vec![1, 6, 1],
        vec![],
    )
    .unwrap();
    for _ in 0..10 {
        let input = random_tensor(&mut rng, vec![1, 6, 1], 0.0, 1.0);
        let trace = net.forward(&input).unwrap();
        assert!((trace.output.sum() - 1.0).abs() < 1e-9);
        assert!(trace.output.data().iter().all(|&v| v >= 0.0));
    }
}
