//! Deterministic synthetic networks and inputs.
//!
//! Desk-scale stand-ins used by tests and the example generator: small random
//! stacks with healthy activation ranges, plus a purpose-built "skewed
//! channel" network whose first conv layer has one channel two orders of
//! magnitude quieter than the other and a head that amplifies that channel's
//! information back to O(1) — the situation where per-channel scaling pays
//! off over per-layer scaling.

use crate::netspec::{Activation, BatchNorm, LayerKind, LayerSpec, NetworkSpec, Padding};
use crate::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded, platform-stable RNG for reproducible fixtures.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform `[0, 1)` input tensor.
pub fn random_input(rng: &mut ChaCha8Rng, shape: [usize; 3]) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::from_vec(&shape, (0..n).map(|_| rng.gen_range(0.0..1.0)).collect())
}

pub fn random_inputs(rng: &mut ChaCha8Rng, shape: [usize; 3], count: usize) -> Vec<Tensor> {
    (0..count).map(|_| random_input(rng, shape)).collect()
}

fn random_weights(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> Tensor {
    let s = 1.5 / (fan_in as f32).sqrt();
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-s..s)).collect())
}

fn random_bias(rng: &mut ChaCha8Rng, n: usize) -> Vec<f32> {
    (0..n).map(|_| rng.gen_range(-0.1..0.1)).collect()
}

fn random_batchnorm(rng: &mut ChaCha8Rng, n: usize) -> BatchNorm {
    BatchNorm {
        gamma: (0..n).map(|_| rng.gen_range(0.5..1.5)).collect(),
        beta: (0..n).map(|_| rng.gen_range(-0.2..0.2)).collect(),
        mean: (0..n).map(|_| rng.gen_range(-0.2..0.2)).collect(),
        var: (0..n).map(|_| rng.gen_range(0.25..1.0)).collect(),
        eps: 1e-5,
    }
}

fn conv_layer(
    rng: &mut ChaCha8Rng,
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    padding: Padding,
    with_bn: bool,
) -> LayerSpec {
    LayerSpec {
        kind: LayerKind::Conv2d,
        out_ch,
        kernel,
        stride: 1,
        padding,
        weights: Some(random_weights(
            rng,
            &[out_ch, in_ch, kernel, kernel],
            in_ch * kernel * kernel,
        )),
        bias: Some(random_bias(rng, out_ch)),
        batchnorm: with_bn.then(|| random_batchnorm(rng, out_ch)),
        activation: Activation::LeakyRelu,
    }
}

fn pool_layer() -> LayerSpec {
    LayerSpec {
        kind: LayerKind::MaxPool2d,
        out_ch: 0, // inferred from input
        kernel: 2,
        stride: 2,
        padding: Padding::Valid,
        weights: None,
        bias: None,
        batchnorm: None,
        activation: Activation::None,
    }
}

fn dense_layer(
    rng: &mut ChaCha8Rng,
    in_features: usize,
    out: usize,
    activation: Activation,
) -> LayerSpec {
    LayerSpec {
        kind: LayerKind::Dense,
        out_ch: out,
        kernel: 0,
        stride: 1,
        padding: Padding::Valid,
        weights: Some(random_weights(rng, &[out, in_features], in_features)),
        bias: Some(random_bias(rng, out)),
        batchnorm: None,
        activation,
    }
}

/// Random 2–4 layer network: a conv stem (optionally with batch norm and a
/// pooling stage) ending in a small linear dense head. Weight scales keep
/// activations around unit range for uniform `[0, 1)` inputs.
pub fn random_network(rng: &mut ChaCha8Rng, with_batchnorm: bool) -> NetworkSpec {
    let h = rng.gen_range(4..=7);
    let w = rng.gen_range(4..=7);
    let in_ch = rng.gen_range(1..=2);
    let input_shape = [h, w, in_ch];

    let mut layers: Vec<LayerSpec> = Vec::new();
    let mut cur = input_shape;

    let n_hidden = rng.gen_range(1..=3);
    for _ in 0..n_hidden {
        let can_pool = cur[0] >= 2 && cur[1] >= 2 && !layers.is_empty();
        if can_pool && rng.gen_bool(0.3) {
            layers.push(pool_layer());
            cur = [cur[0] / 2, cur[1] / 2, cur[2]];
        } else {
            let kernel = if cur[0] >= 3 && cur[1] >= 3 && rng.gen_bool(0.7) { 3 } else { 1 };
            let padding = if rng.gen_bool(0.5) { Padding::Same } else { Padding::Valid };
            let out_ch = rng.gen_range(2..=8);
            let bn = with_batchnorm && rng.gen_bool(0.6);
            layers.push(conv_layer(rng, cur[2], out_ch, kernel, padding, bn));
            let spatial = |d: usize| match padding {
                Padding::Same => d,
                Padding::Valid => d - kernel + 1,
            };
            cur = [spatial(cur[0]), spatial(cur[1]), out_ch];
        }
    }

    let in_features = cur[0] * cur[1] * cur[2];
    let out = rng.gen_range(2..=4);
    layers.push(dense_layer(rng, in_features, out, Activation::None));

    let net = NetworkSpec { input_shape, leaky_slope: 0.01, layers };
    net.validate().expect("generated network is structurally valid");
    net
}

/// Scale factor between the loud and quiet channel of the skewed fixture.
pub const SKEW_FACTOR: f32 = 0.01;

/// Head amplification applied to the quiet channel's columns so its
/// information still matters at the output.
pub const SKEW_HEAD_GAIN: f32 = 40.0;

/// Two-layer network with a deliberately imbalanced first conv layer: channel
/// 1's weights (and bias) are channel-0-like values scaled by [`SKEW_FACTOR`],
/// so its calibrated maximum sits roughly two orders of magnitude below the
/// layer maximum, while the dense head scales channel 1's contribution back
/// up by [`SKEW_HEAD_GAIN`].
pub fn skewed_channel_network(rng: &mut ChaCha8Rng) -> NetworkSpec {
    let input_shape = [4, 4, 1];
    let k = 3;

    // Channel 0: healthy positive-leaning taps; channel 1: the same
    // distribution attenuated by SKEW_FACTOR.
    let mut w = Vec::with_capacity(2 * k * k);
    for _ in 0..k * k {
        w.push(rng.gen_range(-0.05..0.30));
    }
    for _ in 0..k * k {
        w.push(rng.gen_range(-0.05..0.30) * SKEW_FACTOR);
    }
    let conv = LayerSpec {
        kind: LayerKind::Conv2d,
        out_ch: 2,
        kernel: k,
        stride: 1,
        padding: Padding::Same,
        weights: Some(Tensor::from_vec(&[2, 1, k, k], w)),
        bias: Some(vec![rng.gen_range(0.0..0.05), rng.gen_range(0.0..0.05) * SKEW_FACTOR]),
        batchnorm: None,
        activation: Activation::LeakyRelu,
    };

    // Dense head over 4*4*2 = 32 features; channel-1 columns get SKEW_HEAD_GAIN.
    let in_features = 4 * 4 * 2;
    let out = 2;
    let mut w2 = Vec::with_capacity(out * in_features);
    for _ in 0..out {
        for i in 0..in_features {
            let base = rng.gen_range(-0.3..0.3);
            w2.push(if i % 2 == 1 { base * SKEW_HEAD_GAIN } else { base });
        }
    }
    let head = LayerSpec {
        kind: LayerKind::Dense,
        out_ch: out,
        kernel: 0,
        stride: 1,
        padding: Padding::Valid,
        weights: Some(Tensor::from_vec(&[out, in_features], w2)),
        bias: Some(random_bias(rng, out)),
        batchnorm: None,
        activation: Activation::None,
    };

    let net =
        NetworkSpec { input_shape, leaky_slope: 0.01, layers: vec![conv, head] };
    net.validate().expect("skewed fixture is structurally valid");
    net
}

/// Deterministic demo network for the example generator: conv (with batch
/// norm) → pool → conv → dense head.
pub fn example_network(seed: u64) -> NetworkSpec {
    let mut r = rng(seed);
    let input_shape = [8, 8, 1];
    let layers = vec![
        conv_layer(&mut r, 1, 4, 3, Padding::Same, true),
        pool_layer(),
        conv_layer(&mut r, 4, 6, 3, Padding::Valid, false),
        dense_layer(&mut r, 2 * 2 * 6, 3, Activation::None),
    ];
    let net = NetworkSpec { input_shape, leaky_slope: 0.01, layers };
    net.validate().expect("example network is structurally valid");
    net
}
