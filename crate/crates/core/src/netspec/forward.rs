//! Real-valued forward pass: conv / dense / maxpool with per-channel
//! batch norm and leaky-ReLU, recording every layer's post-activation tensor.

use super::{layer_geometries, Activation, LayerKind, LayerSpec, ModelError, NetworkSpec};
use crate::tensor::Tensor;

/// All per-layer post-activation tensors of one forward pass. The final
/// entry is the network's (linear) output.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub layers: Vec<Tensor>,
}

impl ForwardPass {
    pub fn output(&self) -> &Tensor {
        self.layers.last().expect("forward pass over a validated, non-empty network")
    }
}

#[inline]
pub fn leaky_relu(x: f32, slope: f32) -> f32 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

/// Runs the network on one input. Pure and deterministic: fixed accumulation
/// order, no shared state, bit-identical output for identical input.
pub fn forward(net: &NetworkSpec, input: &Tensor) -> Result<ForwardPass, ModelError> {
    if input.shape() != net.input_shape.as_slice() {
        return Err(ModelError::InvalidNetwork(format!(
            "input shape {:?} does not match network input {:?}",
            input.shape(),
            net.input_shape
        )));
    }
    let geos = layer_geometries(net)?;
    let mut layers = Vec::with_capacity(net.layers.len());
    let mut cur = input.clone();
    for (layer, geo) in net.layers.iter().zip(&geos) {
        let mut out = match layer.kind {
            LayerKind::Conv2d => conv2d(layer, &cur, geo.out_shape, geo.pad_top, geo.pad_left),
            LayerKind::Dense => dense(layer, &cur),
            LayerKind::MaxPool2d => {
                maxpool2d(layer, &cur, geo.out_shape, geo.pad_top, geo.pad_left)
            }
        };
        apply_batchnorm(layer, &mut out);
        if layer.activation == Activation::LeakyRelu {
            for v in out.data_mut() {
                *v = leaky_relu(*v, net.leaky_slope);
            }
        }
        layers.push(out.clone());
        cur = out;
    }
    Ok(ForwardPass { layers })
}

fn conv2d(
    layer: &LayerSpec,
    input: &Tensor,
    out_shape: [usize; 3],
    pad_top: usize,
    pad_left: usize,
) -> Tensor {
    let w = layer.weights.as_ref().expect("validated conv has weights");
    let [ih, iw, ic] = [input.shape()[0], input.shape()[1], input.shape()[2]];
    let [oh, ow, oc] = out_shape;
    let k = layer.kernel;
    let s = layer.stride;
    let mut out = Tensor::zeros(&out_shape);
    for oy in 0..oh {
        for ox in 0..ow {
            let iy0 = (oy * s) as isize - pad_top as isize;
            let ix0 = (ox * s) as isize - pad_left as isize;
            for o in 0..oc {
                let mut acc = layer.bias.as_ref().map_or(0.0, |b| b[o]);
                for ky in 0..k {
                    let iy = iy0 + ky as isize;
                    if iy < 0 || iy >= ih as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = ix0 + kx as isize;
                        if ix < 0 || ix >= iw as isize {
                            continue;
                        }
                        for i in 0..ic {
                            acc += w.at4(o, i, ky, kx) * input.at3(iy as usize, ix as usize, i);
                        }
                    }
                }
                out.set3(oy, ox, o, acc);
            }
        }
    }
    out
}

fn dense(layer: &LayerSpec, input: &Tensor) -> Tensor {
    let w = layer.weights.as_ref().expect("validated dense has weights");
    let n_in = input.len();
    let n_out = layer.out_ch;
    let mut out = Tensor::zeros(&[1, 1, n_out]);
    let x = input.data();
    for o in 0..n_out {
        let mut acc = layer.bias.as_ref().map_or(0.0, |b| b[o]);
        let row = &w.data()[o * n_in..(o + 1) * n_in];
        for (wi, xi) in row.iter().zip(x) {
            acc += wi * xi;
        }
        out.data_mut()[o] = acc;
    }
    out
}

fn maxpool2d(
    layer: &LayerSpec,
    input: &Tensor,
    out_shape: [usize; 3],
    pad_top: usize,
    pad_left: usize,
) -> Tensor {
    let [ih, iw, _] = [input.shape()[0], input.shape()[1], input.shape()[2]];
    let [oh, ow, oc] = out_shape;
    let k = layer.kernel;
    let s = layer.stride;
    let mut out = Tensor::zeros(&out_shape);
    for oy in 0..oh {
        for ox in 0..ow {
            let iy0 = (oy * s) as isize - pad_top as isize;
            let ix0 = (ox * s) as isize - pad_left as isize;
            for c in 0..oc {
                let mut best = f32::NEG_INFINITY;
                for ky in 0..k {
                    let iy = iy0 + ky as isize;
                    if iy < 0 || iy >= ih as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = ix0 + kx as isize;
                        if ix < 0 || ix >= iw as isize {
                            continue;
                        }
                        best = best.max(input.at3(iy as usize, ix as usize, c));
                    }
                }
                out.set3(oy, ox, c, best);
            }
        }
    }
    out
}

fn apply_batchnorm(layer: &LayerSpec, out: &mut Tensor) {
    let Some(bn) = &layer.batchnorm else { return };
    let c = layer.out_ch;
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        let j = i % c;
        *v = bn.gamma[j] * (*v - bn.mean[j]) / (bn.var[j] + bn.eps).sqrt() + bn.beta[j];
    }
}
