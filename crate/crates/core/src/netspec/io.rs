//! Model persistence: a JSON manifest describing the topology plus a raw
//! little-endian f32 blob holding, per layer, weights, then bias, then
//! batch-norm `gamma, beta, mean, var`.

use super::{
    layer_geometries, Activation, BatchNorm, LayerKind, LayerSpec, ModelError, NetworkSpec,
    Padding, DEFAULT_BN_EPS,
};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    input_shape: [usize; 3],
    alpha: f32,
    layers: Vec<ManifestLayer>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestLayer {
    kind: LayerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    out_ch: Option<usize>,
    /// Optional declared input channels, cross-checked against the shape the
    /// previous layer actually produces.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    in_ch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kernel: Option<usize>,
    #[serde(default = "one")]
    stride: usize,
    #[serde(default = "valid")]
    padding: Padding,
    #[serde(default)]
    has_batchnorm: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bn_eps: Option<f32>,
    #[serde(default = "none")]
    activation: Activation,
}

fn one() -> usize {
    1
}
fn valid() -> Padding {
    Padding::Valid
}
fn none() -> Activation {
    Activation::None
}

struct BlobReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BlobReader<'a> {
    fn take(&mut self, layer: usize, count: usize) -> Result<Vec<f32>, ModelError> {
        let need = count * 4;
        if self.bytes.len() - self.pos < need {
            return Err(ModelError::BlobLength { layer });
        }
        let out = self.bytes[self.pos..self.pos + need]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        self.pos += need;
        Ok(out)
    }
}

/// Loads and validates a model from `manifest_path` + `blob_path`.
pub fn load_model(manifest_path: &Path, blob_path: &Path) -> Result<NetworkSpec, ModelError> {
    let manifest_text = std::fs::read_to_string(manifest_path)?;
    let manifest: Manifest = serde_json::from_str(&manifest_text)
        .map_err(|e| ModelError::MalformedManifest(e.to_string()))?;
    let blob = std::fs::read(blob_path)?;
    let mut reader = BlobReader { bytes: &blob, pos: 0 };

    let mut layers = Vec::with_capacity(manifest.layers.len());
    let mut cur = manifest.input_shape;
    for (l, ml) in manifest.layers.iter().enumerate() {
        if let Some(declared) = ml.in_ch {
            if declared != cur[2] {
                return Err(ModelError::ShapeMismatch {
                    layer: l,
                    detail: format!(
                        "declared in_ch {declared} but the previous layer produces {}",
                        cur[2]
                    ),
                });
            }
        }
        let layer = match ml.kind {
            LayerKind::Conv2d => {
                let out_ch = require(l, "out_ch", ml.out_ch)?;
                let kernel = require(l, "kernel", ml.kernel)?;
                let in_ch = cur[2];
                let weights = Tensor::from_vec(
                    &[out_ch, in_ch, kernel, kernel],
                    reader.take(l, out_ch * in_ch * kernel * kernel)?,
                );
                let bias = reader.take(l, out_ch)?;
                let batchnorm = read_batchnorm(&mut reader, l, ml, out_ch)?;
                LayerSpec {
                    kind: LayerKind::Conv2d,
                    out_ch,
                    kernel,
                    stride: ml.stride,
                    padding: ml.padding,
                    weights: Some(weights),
                    bias: Some(bias),
                    batchnorm,
                    activation: ml.activation,
                }
            }
            LayerKind::Dense => {
                let out_ch = require(l, "out_ch", ml.out_ch)?;
                let in_features: usize = cur.iter().product();
                let weights = Tensor::from_vec(
                    &[out_ch, in_features],
                    reader.take(l, out_ch * in_features)?,
                );
                let bias = reader.take(l, out_ch)?;
                let batchnorm = read_batchnorm(&mut reader, l, ml, out_ch)?;
                LayerSpec {
                    kind: LayerKind::Dense,
                    out_ch,
                    kernel: 0,
                    stride: 1,
                    padding: Padding::Valid,
                    weights: Some(weights),
                    bias: Some(bias),
                    batchnorm,
                    activation: ml.activation,
                }
            }
            LayerKind::MaxPool2d => {
                if ml.has_batchnorm || ml.activation != Activation::None {
                    return Err(ModelError::MalformedManifest(format!(
                        "layer {l}: maxpool2d cannot carry batchnorm or an activation"
                    )));
                }
                if let Some(declared) = ml.out_ch {
                    if declared != cur[2] {
                        return Err(ModelError::ShapeMismatch {
                            layer: l,
                            detail: format!(
                                "maxpool declares {declared} channels but input has {}",
                                cur[2]
                            ),
                        });
                    }
                }
                LayerSpec {
                    kind: LayerKind::MaxPool2d,
                    out_ch: cur[2],
                    kernel: require(l, "kernel", ml.kernel)?,
                    stride: ml.stride,
                    padding: ml.padding,
                    weights: None,
                    bias: None,
                    batchnorm: None,
                    activation: Activation::None,
                }
            }
        };
        cur = next_shape(cur, &layer);
        layers.push(layer);
    }
    if reader.pos != blob.len() {
        return Err(ModelError::BlobTrailing { extra: blob.len() - reader.pos });
    }

    let net = NetworkSpec {
        input_shape: manifest.input_shape,
        leaky_slope: manifest.alpha,
        layers,
    };
    net.validate()?;
    Ok(net)
}

fn require(layer: usize, field: &str, v: Option<usize>) -> Result<usize, ModelError> {
    v.ok_or_else(|| ModelError::MalformedManifest(format!("layer {layer}: missing {field}")))
}

/// Running output shape while streaming layers out of the blob; dense layers
/// flatten whatever precedes them.
fn next_shape(cur: [usize; 3], layer: &LayerSpec) -> [usize; 3] {
    match layer.kind {
        LayerKind::Dense => [1, 1, layer.out_ch],
        LayerKind::Conv2d | LayerKind::MaxPool2d => {
            let (oh, _) = super::spatial_out(cur[0], layer.kernel, layer.stride, layer.padding);
            let (ow, _) = super::spatial_out(cur[1], layer.kernel, layer.stride, layer.padding);
            let oc = if layer.kind == LayerKind::Conv2d { layer.out_ch } else { cur[2] };
            [oh, ow, oc]
        }
    }
}

fn read_batchnorm(
    reader: &mut BlobReader,
    layer: usize,
    ml: &ManifestLayer,
    out_ch: usize,
) -> Result<Option<BatchNorm>, ModelError> {
    if !ml.has_batchnorm {
        return Ok(None);
    }
    Ok(Some(BatchNorm {
        gamma: reader.take(layer, out_ch)?,
        beta: reader.take(layer, out_ch)?,
        mean: reader.take(layer, out_ch)?,
        var: reader.take(layer, out_ch)?,
        eps: ml.bn_eps.unwrap_or(DEFAULT_BN_EPS),
    }))
}

/// Writes a validated network as manifest + blob. Output bytes are a pure
/// function of the network, so repeated saves are identical.
pub fn save_model(
    net: &NetworkSpec,
    manifest_path: &Path,
    blob_path: &Path,
) -> Result<(), ModelError> {
    net.validate()?;
    let geos = layer_geometries(net)?;
    let mut mlayers = Vec::with_capacity(net.layers.len());
    let mut blob: Vec<u8> = Vec::new();
    for (layer, geo) in net.layers.iter().zip(&geos) {
        mlayers.push(ManifestLayer {
            kind: layer.kind,
            out_ch: Some(geo.out_shape[2]),
            in_ch: Some(geo.in_shape[2]),
            kernel: if layer.kind == LayerKind::Dense { None } else { Some(layer.kernel) },
            stride: layer.stride,
            padding: layer.padding,
            has_batchnorm: layer.batchnorm.is_some(),
            bn_eps: layer.batchnorm.as_ref().map(|bn| bn.eps),
            activation: layer.activation,
        });
        if let Some(w) = &layer.weights {
            extend_f32(&mut blob, w.data());
        }
        if let Some(b) = &layer.bias {
            extend_f32(&mut blob, b);
        }
        if let Some(bn) = &layer.batchnorm {
            for v in [&bn.gamma, &bn.beta, &bn.mean, &bn.var] {
                extend_f32(&mut blob, v);
            }
        }
    }
    let manifest = Manifest {
        input_shape: net.input_shape,
        alpha: net.leaky_slope,
        layers: mlayers,
    };
    let mut text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| ModelError::MalformedManifest(e.to_string()))?;
    text.push('\n');
    std::fs::write(manifest_path, text)?;
    std::fs::write(blob_path, blob)?;
    Ok(())
}

fn extend_f32(blob: &mut Vec<u8>, values: &[f32]) {
    for v in values {
        blob.extend_from_slice(&v.to_le_bytes());
    }
}
