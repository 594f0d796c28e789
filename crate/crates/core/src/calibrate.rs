//! Activation calibration and weight normalization.
//!
//! Calibration runs the real-valued network over a sample set and records,
//! for every layer and every channel, a scale statistic of the *positive*
//! activations (their maximum, or a nearest-rank 99.9th percentile pooled
//! over all samples). Normalization rescales weights and biases with those
//! statistics so that post-normalization activations sit in the unit range
//! that rate coding can represent, either with one scale per layer or one
//! scale per channel.

use crate::netspec::{
    forward, is_folded, layer_geometries, LayerKind, ModelError, NetworkSpec,
};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Channel scales at or below this floor are replaced by it and flagged, so
/// later divisions stay finite.
pub const LAMBDA_FLOOR: f32 = 1e-6;

/// Nearest-rank percentile used by [`StatMode::P999`].
pub const PERCENTILE: f64 = 99.9;

/// Scale assumed for network inputs; inputs are expected pre-scaled to
/// `[0, 1]` and are not rescaled by normalization.
pub const INPUT_SCALE: f32 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StatMode {
    #[serde(rename = "max")]
    Max,
    #[serde(rename = "p99.9")]
    P999,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormScheme {
    Layer,
    Channel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStats {
    pub lambda_layer: f32,
    pub lambda_chan: Vec<f32>,
    /// Channels whose statistic fell at or below [`LAMBDA_FLOOR`] (e.g. a
    /// channel that never goes positive on the calibration set).
    pub degenerate_channels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationStats {
    pub mode: StatMode,
    pub sample_count: usize,
    pub layers: Vec<LayerStats>,
}

/// A network with rescaled weights plus everything needed to undo the
/// rescaling on its outputs.
#[derive(Debug, Clone)]
pub struct NormalizedNetwork {
    pub net: NetworkSpec,
    pub scheme: NormScheme,
    pub stats: ActivationStats,
    /// Effective scale of each final-layer channel; multiply decoded outputs
    /// by this to return to the original network's output range.
    pub output_scale: Vec<f32>,
}

#[derive(Debug, thiserror::Error)]
pub enum CalibrateError {
    #[error("calibration set is empty")]
    EmptyCalibrationSet,
    #[error("network still has unfolded batchnorm; fold it before calibrating")]
    NotFolded,
    #[error("stats do not match network: {0}")]
    MismatchedStats(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed stats file: {0}")]
    MalformedStats(String),
}

// ── Statistics collection ───────────────────────────────────────────────────

/// Nearest-rank 99.9th percentile of an unsorted sample: sort ascending, take
/// the value at rank `ceil(0.999 * n)` (1-based). The rank is computed in
/// integer per-mille arithmetic — `ceil(99.9/100 * n)` in floating point
/// overshoots by one whenever `0.999 * n` is an exact integer (e.g. n = 1000).
/// Returns 0.0 for an empty sample.
fn nearest_rank_p999(values: &mut Vec<f32>) -> f32 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f32::total_cmp);
    let n = values.len();
    let rank = (999 * n).div_ceil(1000).clamp(1, n);
    values[rank - 1]
}

fn floor_scale(lambda: f32) -> (f32, bool) {
    if lambda <= LAMBDA_FLOOR {
        (LAMBDA_FLOOR, true)
    } else {
        (lambda, false)
    }
}

/// Runs the folded network over the calibration inputs and returns per-layer,
/// per-channel scale statistics of the positive activations.
///
/// Inputs are processed in slice order, so the result is deterministic for a
/// given `(net, inputs, mode)` triple.
pub fn collect_stats(
    net: &NetworkSpec,
    inputs: &[Tensor],
    mode: StatMode,
) -> Result<ActivationStats, CalibrateError> {
    if inputs.is_empty() {
        return Err(CalibrateError::EmptyCalibrationSet);
    }
    if !is_folded(net) {
        return Err(CalibrateError::NotFolded);
    }
    net.validate()?;
    let geos = layer_geometries(net)?;
    let channels: Vec<usize> = geos.iter().map(|g| g.out_shape[2]).collect();

    let layers = match mode {
        StatMode::Max => {
            let mut maxima: Vec<Vec<f32>> = channels.iter().map(|&c| vec![0.0; c]).collect();
            for input in inputs {
                let pass = forward(net, input)?;
                for (l, t) in pass.layers.iter().enumerate() {
                    let c = channels[l];
                    for (i, &v) in t.data().iter().enumerate() {
                        if v > 0.0 {
                            let ch = i % c;
                            if v > maxima[l][ch] {
                                maxima[l][ch] = v;
                            }
                        }
                    }
                }
            }
            maxima
                .into_iter()
                .map(|chan| {
                    let layer_max = chan.iter().fold(0.0f32, |m, &v| m.max(v));
                    finish_layer(layer_max, chan)
                })
                .collect()
        }
        StatMode::P999 => {
            let mut pools: Vec<Vec<Vec<f32>>> =
                channels.iter().map(|&c| vec![Vec::new(); c]).collect();
            for input in inputs {
                let pass = forward(net, input)?;
                for (l, t) in pass.layers.iter().enumerate() {
                    let c = channels[l];
                    for (i, &v) in t.data().iter().enumerate() {
                        if v > 0.0 {
                            pools[l][i % c].push(v);
                        }
                    }
                }
            }
            pools
                .into_iter()
                .map(|mut chans| {
                    let mut all: Vec<f32> = chans.iter().flatten().copied().collect();
                    let layer_stat = nearest_rank_p999(&mut all);
                    let chan_stats: Vec<f32> =
                        chans.iter_mut().map(nearest_rank_p999).collect();
                    finish_layer(layer_stat, chan_stats)
                })
                .collect()
        }
    };

    Ok(ActivationStats { mode, sample_count: inputs.len(), layers })
}

fn finish_layer(layer_stat: f32, chan_stats: Vec<f32>) -> LayerStats {
    let (lambda_layer, _) = floor_scale(layer_stat);
    let mut degenerate = Vec::new();
    let lambda_chan = chan_stats
        .into_iter()
        .enumerate()
        .map(|(j, v)| {
            let (lambda, floored) = floor_scale(v);
            if floored {
                degenerate.push(j);
            }
            lambda
        })
        .collect();
    LayerStats { lambda_layer, lambda_chan, degenerate_channels: degenerate }
}

// ── Normalization ───────────────────────────────────────────────────────────

/// Checks that `stats` structurally matches `net` (same layer count, same
/// channel counts per layer).
fn check_stats(net: &NetworkSpec, stats: &ActivationStats) -> Result<(), CalibrateError> {
    let geos = layer_geometries(net)?;
    if stats.layers.len() != net.layers.len() {
        return Err(CalibrateError::MismatchedStats(format!(
            "stats cover {} layers, network has {}",
            stats.layers.len(),
            net.layers.len()
        )));
    }
    for (l, (ls, geo)) in stats.layers.iter().zip(&geos).enumerate() {
        if ls.lambda_chan.len() != geo.out_shape[2] {
            return Err(CalibrateError::MismatchedStats(format!(
                "layer {l} has {} channels, stats carry {}",
                geo.out_shape[2],
                ls.lambda_chan.len()
            )));
        }
        if ls.lambda_layer <= 0.0 || ls.lambda_chan.iter().any(|&v| v <= 0.0) {
            return Err(CalibrateError::MismatchedStats(format!(
                "layer {l} has a non-positive scale"
            )));
        }
    }
    Ok(())
}

/// Effective per-channel scale of every layer under the given scheme.
///
/// Weighted layers take their calibrated statistic (broadcast per layer for
/// [`NormScheme::Layer`]); maxpool layers inherit their predecessor's scales
/// unchanged, because pooling divides through by whatever scale its input
/// carries — using the pool's own measured statistic would break exact
/// denormalization for percentile statistics.
fn effective_scales(
    net: &NetworkSpec,
    stats: &ActivationStats,
    scheme: NormScheme,
) -> Vec<Vec<f32>> {
    let mut eff: Vec<Vec<f32>> = Vec::with_capacity(net.layers.len());
    for (l, layer) in net.layers.iter().enumerate() {
        let scales = match layer.kind {
            LayerKind::MaxPool2d => {
                if l == 0 {
                    vec![INPUT_SCALE; net.input_shape[2]]
                } else {
                    eff[l - 1].clone()
                }
            }
            _ => match scheme {
                NormScheme::Layer => {
                    vec![stats.layers[l].lambda_layer; stats.layers[l].lambda_chan.len()]
                }
                NormScheme::Channel => stats.layers[l].lambda_chan.clone(),
            },
        };
        eff.push(scales);
    }
    eff
}

/// Rescales a folded network so every neuron's largest expected drive is at
/// most 1, per the chosen scheme, and records the output scales needed to
/// undo the rescaling.
pub fn normalize(
    net: &NetworkSpec,
    stats: &ActivationStats,
    scheme: NormScheme,
) -> Result<NormalizedNetwork, CalibrateError> {
    if !is_folded(net) {
        return Err(CalibrateError::NotFolded);
    }
    net.validate()?;
    check_stats(net, stats)?;
    let geos = layer_geometries(net)?;
    let eff = effective_scales(net, stats, scheme);

    let mut out = net.clone();
    for (l, layer) in out.layers.iter_mut().enumerate() {
        if !layer.is_weighted() {
            continue;
        }
        let prev: &[f32] = if l == 0 { &[INPUT_SCALE] } else { &eff[l - 1] };
        let prev_ch = geos[l].in_shape[2];
        let own = &eff[l];
        let prev_at = |ch: usize| if l == 0 { INPUT_SCALE } else { prev[ch] };

        match layer.kind {
            LayerKind::Conv2d => {
                let w = layer.weights.as_mut().unwrap();
                let k = layer.kernel;
                let per_in = k * k;
                let per_out = prev_ch * per_in;
                let data = w.data_mut();
                for o in 0..layer.out_ch {
                    for i in 0..prev_ch {
                        let scale = prev_at(i) / own[o];
                        let base = o * per_out + i * per_in;
                        for v in &mut data[base..base + per_in] {
                            *v *= scale;
                        }
                    }
                }
            }
            LayerKind::Dense => {
                let w = layer.weights.as_mut().unwrap();
                let in_features: usize = geos[l].in_shape.iter().product();
                let data = w.data_mut();
                for o in 0..layer.out_ch {
                    for i in 0..in_features {
                        // Flattened (y, x, c) order: element i belongs to
                        // input channel i % prev_ch.
                        data[o * in_features + i] *= prev_at(i % prev_ch) / own[o];
                    }
                }
            }
            LayerKind::MaxPool2d => unreachable!(),
        }
        if let Some(bias) = &mut layer.bias {
            for (o, b) in bias.iter_mut().enumerate() {
                *b /= own[o];
            }
        }
    }

    let output_scale = eff.last().unwrap().clone();
    Ok(NormalizedNetwork { net: out, scheme, stats: stats.clone(), output_scale })
}

/// One scale per layer: every weight of layer `l` is multiplied by
/// `lambda[l-1] / lambda[l]`, every bias divided by `lambda[l]`.
pub fn layer_norm(
    net: &NetworkSpec,
    stats: &ActivationStats,
) -> Result<NormalizedNetwork, CalibrateError> {
    normalize(net, stats, NormScheme::Layer)
}

/// One scale per channel: weight from input channel `i` to output channel
/// `j` of layer `l` is multiplied by `lambda[l-1][i] / lambda[l][j]`, bias
/// `j` divided by `lambda[l][j]`.
pub fn channel_norm(
    net: &NetworkSpec,
    stats: &ActivationStats,
) -> Result<NormalizedNetwork, CalibrateError> {
    normalize(net, stats, NormScheme::Channel)
}

/// Undoes output normalization: channel `j` of the final layer is multiplied
/// by `output_scale[j]`.
pub fn denormalize_output(
    values: &Tensor,
    norm: &NormalizedNetwork,
) -> Result<Tensor, CalibrateError> {
    let c = norm.output_scale.len();
    if values.is_empty() || values.shape().last() != Some(&c) {
        return Err(CalibrateError::MismatchedStats(format!(
            "output tensor {:?} does not end in {c} channels",
            values.shape()
        )));
    }
    let mut out = values.clone();
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        *v *= norm.output_scale[i % c];
    }
    Ok(out)
}

// ── Stats persistence ───────────────────────────────────────────────────────

/// Serializes stats as JSON. Byte-identical for identical stats.
pub fn stats_to_json(stats: &ActivationStats) -> String {
    let mut s = serde_json::to_string_pretty(stats).expect("stats serialize");
    s.push('\n');
    s
}

pub fn save_stats(stats: &ActivationStats, path: &Path) -> Result<(), CalibrateError> {
    std::fs::write(path, stats_to_json(stats))?;
    Ok(())
}

pub fn load_stats(path: &Path) -> Result<ActivationStats, CalibrateError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CalibrateError::MalformedStats(e.to_string()))
}
