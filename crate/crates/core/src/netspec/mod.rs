//! Network description: layer stack, shape inference, validation, and
//! batch-norm folding.
//!
//! A [`NetworkSpec`] is an ordered list of layers over `(h, w, c)` activations.
//! Everything here is plain data plus pure functions, so a spec can be shared
//! freely across threads.

mod forward;
mod io;

pub use forward::{forward, leaky_relu, ForwardPass};
pub use io::{load_model, save_model};

use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

// ── Types ───────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    #[serde(rename = "conv2d")]
    Conv2d,
    #[serde(rename = "dense")]
    Dense,
    #[serde(rename = "maxpool2d")]
    MaxPool2d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    Same,
    Valid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    LeakyRelu,
    None,
}

/// Per-output-channel batch normalization parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub mean: Vec<f32>,
    pub var: Vec<f32>,
    pub eps: f32,
}

pub const DEFAULT_BN_EPS: f32 = 1e-5;

#[derive(Debug, Clone)]
pub struct LayerSpec {
    pub kind: LayerKind,
    /// Output channels (conv), output units (dense), or input channels
    /// passed through (maxpool).
    pub out_ch: usize,
    /// Square kernel side for conv/maxpool; unused for dense.
    pub kernel: usize,
    pub stride: usize,
    pub padding: Padding,
    /// Conv: `(out_ch, in_ch, kh, kw)`. Dense: `(out_ch, in_features)`.
    pub weights: Option<Tensor>,
    pub bias: Option<Vec<f32>>,
    pub batchnorm: Option<BatchNorm>,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn is_weighted(&self) -> bool {
        matches!(self.kind, LayerKind::Conv2d | LayerKind::Dense)
    }
}

#[derive(Debug, Clone)]
pub struct NetworkSpec {
    /// Input shape as `(h, w, c)`.
    pub input_shape: [usize; 3],
    /// Negative-region slope shared by all leaky-ReLU activations.
    pub leaky_slope: f32,
    pub layers: Vec<LayerSpec>,
}

// ── Errors ──────────────────────────────────────────────────────────────────

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("malformed manifest: {0}")]
    MalformedManifest(String),
    #[error("shape mismatch at layer {layer}: {detail}")]
    ShapeMismatch { layer: usize, detail: String },
    #[error("weight blob length mismatch at layer {layer}")]
    BlobLength { layer: usize },
    #[error("weight blob has {extra} unread bytes after the last layer")]
    BlobTrailing { extra: usize },
    #[error("invalid layer {layer}: {detail}")]
    InvalidLayer { layer: usize, detail: String },
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// ── Shape inference ─────────────────────────────────────────────────────────

/// Resolved geometry of one layer: input/output shapes plus the implicit
/// zero-padding offsets used by `same` convolutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerGeometry {
    pub in_shape: [usize; 3],
    pub out_shape: [usize; 3],
    pub pad_top: usize,
    pub pad_left: usize,
}

fn spatial_out(in_dim: usize, kernel: usize, stride: usize, padding: Padding) -> (usize, usize) {
    match padding {
        Padding::Same => {
            let out = in_dim.div_ceil(stride);
            let total_pad = ((out - 1) * stride + kernel).saturating_sub(in_dim);
            (out, total_pad / 2)
        }
        Padding::Valid => {
            let out = if in_dim >= kernel { (in_dim - kernel) / stride + 1 } else { 0 };
            (out, 0)
        }
    }
}

/// Infers per-layer geometry from the input shape down the stack.
pub fn layer_geometries(net: &NetworkSpec) -> Result<Vec<LayerGeometry>, ModelError> {
    let mut shapes = Vec::with_capacity(net.layers.len());
    let mut cur = net.input_shape;
    for (l, layer) in net.layers.iter().enumerate() {
        let geo = match layer.kind {
            LayerKind::Conv2d | LayerKind::MaxPool2d => {
                let (oh, pad_top) = spatial_out(cur[0], layer.kernel, layer.stride, layer.padding);
                let (ow, pad_left) = spatial_out(cur[1], layer.kernel, layer.stride, layer.padding);
                if oh == 0 || ow == 0 {
                    return Err(ModelError::InvalidLayer {
                        layer: l,
                        detail: format!(
                            "kernel {} with stride {} produces an empty output on {}x{} input",
                            layer.kernel, layer.stride, cur[0], cur[1]
                        ),
                    });
                }
                let oc = if layer.kind == LayerKind::MaxPool2d { cur[2] } else { layer.out_ch };
                LayerGeometry { in_shape: cur, out_shape: [oh, ow, oc], pad_top, pad_left }
            }
            LayerKind::Dense => LayerGeometry {
                in_shape: cur,
                out_shape: [1, 1, layer.out_ch],
                pad_top: 0,
                pad_left: 0,
            },
        };
        shapes.push(geo);
        cur = geo.out_shape;
    }
    Ok(shapes)
}

// ── Validation ──────────────────────────────────────────────────────────────

impl NetworkSpec {
    /// Checks structural consistency: slope range, weight/bias/batch-norm
    /// shapes against inferred layer geometry, and a linear final layer.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.layers.is_empty() {
            return Err(ModelError::InvalidNetwork("network has no layers".into()));
        }
        if self.input_shape.iter().any(|&d| d == 0) {
            return Err(ModelError::InvalidNetwork(format!(
                "input shape {:?} has a zero dimension",
                self.input_shape
            )));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope <= 1.0) {
            return Err(ModelError::InvalidNetwork(format!(
                "leaky slope must be in (0, 1], got {}",
                self.leaky_slope
            )));
        }
        let geos = layer_geometries(self)?;
        for (l, (layer, geo)) in self.layers.iter().zip(&geos).enumerate() {
            match layer.kind {
                LayerKind::Conv2d => {
                    let w = layer.weights.as_ref().ok_or_else(|| ModelError::InvalidLayer {
                        layer: l,
                        detail: "conv layer has no weights".into(),
                    })?;
                    let expect = [layer.out_ch, geo.in_shape[2], layer.kernel, layer.kernel];
                    if w.shape() != expect.as_slice() {
                        return Err(ModelError::ShapeMismatch {
                            layer: l,
                            detail: format!(
                                "conv weights are {:?}, expected {:?}",
                                w.shape(),
                                expect
                            ),
                        });
                    }
                    validate_channel_vecs(l, layer)?;
                }
                LayerKind::Dense => {
                    let w = layer.weights.as_ref().ok_or_else(|| ModelError::InvalidLayer {
                        layer: l,
                        detail: "dense layer has no weights".into(),
                    })?;
                    let in_features: usize = geo.in_shape.iter().product();
                    let expect = [layer.out_ch, in_features];
                    if w.shape() != expect.as_slice() {
                        return Err(ModelError::ShapeMismatch {
                            layer: l,
                            detail: format!(
                                "dense weights are {:?}, expected {:?}",
                                w.shape(),
                                expect
                            ),
                        });
                    }
                    validate_channel_vecs(l, layer)?;
                }
                LayerKind::MaxPool2d => {
                    if layer.weights.is_some()
                        || layer.bias.is_some()
                        || layer.batchnorm.is_some()
                        || layer.activation != Activation::None
                    {
                        return Err(ModelError::InvalidLayer {
                            layer: l,
                            detail: "maxpool carries no weights, bias, batchnorm, or activation"
                                .into(),
                        });
                    }
                    if layer.out_ch != 0 && layer.out_ch != geo.in_shape[2] {
                        return Err(ModelError::ShapeMismatch {
                            layer: l,
                            detail: format!(
                                "maxpool declares {} channels but input has {}",
                                layer.out_ch, geo.in_shape[2]
                            ),
                        });
                    }
                }
            }
        }
        let last = self.layers.last().unwrap();
        if !last.is_weighted() || last.activation != Activation::None {
            return Err(ModelError::InvalidNetwork(
                "final layer must be a weighted layer with a linear output".into(),
            ));
        }
        Ok(())
    }

    /// Output shape of the final layer.
    pub fn output_shape(&self) -> Result<[usize; 3], ModelError> {
        Ok(layer_geometries(self)?.last().unwrap().out_shape)
    }
}

fn validate_channel_vecs(l: usize, layer: &LayerSpec) -> Result<(), ModelError> {
    let n = layer.out_ch;
    if let Some(b) = &layer.bias {
        if b.len() != n {
            return Err(ModelError::ShapeMismatch {
                layer: l,
                detail: format!("bias has {} entries, expected {}", b.len(), n),
            });
        }
    }
    if let Some(bn) = &layer.batchnorm {
        for (name, v) in [
            ("gamma", &bn.gamma),
            ("beta", &bn.beta),
            ("mean", &bn.mean),
            ("var", &bn.var),
        ] {
            if v.len() != n {
                return Err(ModelError::ShapeMismatch {
                    layer: l,
                    detail: format!("batchnorm {name} has {} entries, expected {}", v.len(), n),
                });
            }
        }
        if bn.var.iter().any(|&v| v < 0.0) {
            return Err(ModelError::InvalidLayer {
                layer: l,
                detail: "batchnorm variance must be non-negative".into(),
            });
        }
    }
    Ok(())
}

// ── Batch-norm folding ──────────────────────────────────────────────────────

/// Folds every layer's batch normalization into its weights and bias, so the
/// returned network computes the same function with `batchnorm: None`
/// everywhere.
///
/// For scale `s_j = gamma_j / sqrt(var_j + eps)` the folded parameters are
/// `w'_j = w_j * s_j` and `b'_j = (b_j - mean_j) * s_j + beta_j`.
pub fn fold_batchnorm(net: &NetworkSpec) -> NetworkSpec {
    let mut out = net.clone();
    for layer in &mut out.layers {
        let Some(bn) = layer.batchnorm.take() else { continue };
        let scale: Vec<f32> =
            bn.gamma.iter().zip(&bn.var).map(|(&g, &v)| g / (v + bn.eps).sqrt()).collect();
        if let Some(w) = &mut layer.weights {
            let per_out = w.len() / layer.out_ch;
            for (oc, s) in scale.iter().enumerate() {
                for v in &mut w.data_mut()[oc * per_out..(oc + 1) * per_out] {
                    *v *= s;
                }
            }
        }
        let bias = layer.bias.get_or_insert_with(|| vec![0.0; layer.out_ch]);
        for j in 0..layer.out_ch {
            bias[j] = (bias[j] - bn.mean[j]) * scale[j] + bn.beta[j];
        }
    }
    out
}

/// True when no layer carries unfolded batch normalization.
pub fn is_folded(net: &NetworkSpec) -> bool {
    net.layers.iter().all(|l| l.batchnorm.is_none())
}
