//! Operation counting and energy estimation.
//!
//! Two independent views: per-operation energy (multiply-accumulate versus
//! pure accumulate, priced per 45 nm-process figures for 32-bit float and
//! integer arithmetic) and platform-level energy (a conventional accelerator
//! running dense FLOPs versus an event-driven processor whose power scales
//! with operation rate).

use crate::netspec::{layer_geometries, LayerKind, ModelError, NetworkSpec};
use crate::spikesim::{SimulationState, SpikingNetwork};
use serde::{Deserialize, Serialize};

// ── Per-operation costs ─────────────────────────────────────────────────────

/// 32-bit float multiply-accumulate, picojoules.
pub const MAC_FL32_PJ: f64 = 4.6;
/// 32-bit float accumulate, picojoules.
pub const AC_FL32_PJ: f64 = 0.9;
/// 32-bit integer multiply-accumulate, picojoules.
pub const MAC_INT32_PJ: f64 = 3.2;
/// 32-bit integer accumulate, picojoules.
pub const AC_INT32_PJ: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Fl32,
    Int32,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnergyModel {
    pub mac_pj: f64,
    pub ac_pj: f64,
}

impl EnergyModel {
    pub fn for_precision(p: Precision) -> Self {
        match p {
            Precision::Fl32 => EnergyModel { mac_pj: MAC_FL32_PJ, ac_pj: AC_FL32_PJ },
            Precision::Int32 => EnergyModel { mac_pj: MAC_INT32_PJ, ac_pj: AC_INT32_PJ },
        }
    }
}

// ── Operation counts ────────────────────────────────────────────────────────

/// Dense forward-pass operation count. MACs follow the full-kernel
/// convention (padding positions included): conv contributes
/// `out_h * out_w * out_ch * in_ch * k * k`, dense `out * in`. One bias add
/// per output element of each biased layer is counted separately as an
/// accumulate. Pooling comparisons are not arithmetic and count as neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DnnOpCount {
    pub macs: u64,
    pub bias_acs: u64,
}

pub fn count_dnn_ops(net: &NetworkSpec) -> Result<DnnOpCount, ModelError> {
    let geos = layer_geometries(net)?;
    let mut macs = 0u64;
    let mut bias_acs = 0u64;
    for (layer, geo) in net.layers.iter().zip(&geos) {
        let out_elems: u64 = geo.out_shape.iter().product::<usize>() as u64;
        match layer.kind {
            LayerKind::Conv2d => {
                macs += out_elems * (geo.in_shape[2] * layer.kernel * layer.kernel) as u64;
            }
            LayerKind::Dense => {
                macs += out_elems * geo.in_shape.iter().product::<usize>() as u64;
            }
            LayerKind::MaxPool2d => {}
        }
        if layer.bias.is_some() {
            bias_acs += out_elems;
        }
    }
    Ok(DnnOpCount { macs, bias_acs })
}

/// Spike-driven operation count: one accumulate per synapse touched by each
/// spike (boundary-aware fan-out), plus one accumulate per biased neuron per
/// tick. Matches the simulator's instrumented counters exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnnOpCount {
    pub synapse_acs: u64,
    pub bias_acs: u64,
}

impl SnnOpCount {
    pub fn total(&self) -> u64 {
        self.synapse_acs + self.bias_acs
    }
}

/// Closed-form recount of the accumulations a finished simulation executed,
/// derived from per-neuron spike totals and each source neuron's fan-out into
/// its consumer layer. Spikes consumed by pooling gates trigger no
/// accumulation; the pool's own forwarded spikes are counted into whatever
/// consumes the pool.
pub fn count_snn_ops(
    snn: &SpikingNetwork,
    state: &SimulationState,
) -> Result<SnnOpCount, ModelError> {
    let geos = layer_geometries(&snn.net)?;
    let mut synapse_acs = 0u64;
    let mut bias_acs = 0u64;
    for (nl, layer) in snn.net.layers.iter().enumerate() {
        let geo = &geos[nl];
        let out_elems = geo.out_shape.iter().product::<usize>() as u64;
        match layer.kind {
            LayerKind::Conv2d => {
                let source = &state.layers[nl]; // entity nl feeds network layer nl
                let [ih, iw, ic] = geo.in_shape;
                let oc = geo.out_shape[2] as u64;
                // Fan-out depends only on the spatial position; precompute
                // valid kernel-offset counts per row and per column.
                let count_dim = |in_dim: usize, out_dim: usize, pad: usize| -> Vec<u64> {
                    (0..in_dim)
                        .map(|i| {
                            (0..layer.kernel)
                                .filter(|&k| {
                                    let num = i as isize + pad as isize - k as isize;
                                    num >= 0
                                        && num % layer.stride as isize == 0
                                        && (num as usize / layer.stride) < out_dim
                                })
                                .count() as u64
                        })
                        .collect()
                };
                let rows = count_dim(ih, geo.out_shape[0], geo.pad_top);
                let cols = count_dim(iw, geo.out_shape[1], geo.pad_left);
                for flat in 0..source.neuron_count() {
                    let spikes = (source.spike_pos[flat] + source.spike_neg[flat]) as u64;
                    if spikes == 0 {
                        continue;
                    }
                    let ix = (flat / ic) % iw;
                    let iy = flat / (ic * iw);
                    synapse_acs += spikes * rows[iy] * cols[ix] * oc;
                }
            }
            LayerKind::Dense => {
                let source = &state.layers[nl];
                let spikes: u64 = (0..source.neuron_count())
                    .map(|i| (source.spike_pos[i] + source.spike_neg[i]) as u64)
                    .sum();
                synapse_acs += spikes * layer.out_ch as u64;
            }
            LayerKind::MaxPool2d => {}
        }
        if layer.bias.is_some() {
            bias_acs += state.t as u64 * out_elems;
        }
    }
    Ok(SnnOpCount { synapse_acs, bias_acs })
}

// ── Per-operation energy ────────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OpEnergyReport {
    pub model: EnergyModel,
    pub dnn_ops: DnnOpCount,
    pub snn_ops: SnnOpCount,
    /// `macs * mac_pj + bias_acs * ac_pj`, in joules.
    pub dnn_joules: f64,
    /// `(synapse_acs + bias_acs) * ac_pj`, in joules.
    pub snn_joules: f64,
    /// `dnn_joules / snn_joules`; absent when the spiking side executed no
    /// operations.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
}

pub fn op_energy(dnn: DnnOpCount, snn: SnnOpCount, model: EnergyModel) -> OpEnergyReport {
    let dnn_joules = (dnn.macs as f64 * model.mac_pj + dnn.bias_acs as f64 * model.ac_pj) * 1e-12;
    let snn_joules = snn.total() as f64 * model.ac_pj * 1e-12;
    let ratio = (snn_joules > 0.0).then(|| dnn_joules / snn_joules);
    OpEnergyReport { model, dnn_ops: dnn, snn_ops: snn, dnn_joules, snn_joules, ratio }
}

// ── Platform energy ─────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PlatformModel {
    /// Board power of the conventional accelerator, watts.
    pub gpu_power_w: f64,
    /// Peak throughput of the conventional accelerator, GFLOPS.
    pub gpu_gflops: f64,
    /// Efficiency of the event-driven processor, GFLOPS per watt.
    pub neuro_gflops_per_w: f64,
    /// Wall-clock duration of one simulation tick, seconds.
    pub timestep_s: f64,
}

impl Default for PlatformModel {
    fn default() -> Self {
        PlatformModel {
            gpu_power_w: 250.0,
            gpu_gflops: 14_000.0,
            neuro_gflops_per_w: 400.0,
            timestep_s: 1e-3,
        }
    }
}

/// Energy for one dense forward pass on the conventional accelerator:
/// `power * flops / throughput`.
pub fn gpu_energy(flops: f64, p: &PlatformModel) -> f64 {
    p.gpu_power_w * flops / (p.gpu_gflops * 1e9)
}

/// Energy on the event-driven processor. The operation rate (ops per second)
/// divided by efficiency gives draw in watts; energy is draw times simulated
/// wall-clock time (`timesteps * timestep_s`).
pub fn neuromorphic_energy(op_rate_per_s: f64, p: &PlatformModel, timesteps: u64) -> f64 {
    let power_w = op_rate_per_s / (p.neuro_gflops_per_w * 1e9);
    power_w * timesteps as f64 * p.timestep_s
}

/// Reference workload bundled with the platform model: per-image FLOPs of a
/// compact real-time detector, and the measured spiking operation rates and
/// step budgets of its layer-scaled and channel-scaled conversions.
pub mod reference {
    pub const GPU_FLOPS_PER_IMAGE: f64 = 6.97e9;
    pub const SNN_OP_RATE_LAYER_SCALED: f64 = 5.28e7;
    pub const SNN_OP_RATE_CHANNEL_SCALED: f64 = 4.90e7;
    pub const TIMESTEPS_LAYER_SCALED: u64 = 8_000;
    pub const TIMESTEPS_CHANNEL_SCALED: u64 = 3_500;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlatformEnergyRow {
    pub label: String,
    pub op_rate_per_s: f64,
    pub power_w: f64,
    pub timesteps: u64,
    pub joules: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlatformEnergyReport {
    pub model: PlatformModel,
    pub gpu_flops: f64,
    pub gpu_joules: f64,
    pub rows: Vec<PlatformEnergyRow>,
    /// GPU energy over the last row's energy.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gpu_over_last_row: Option<f64>,
    /// How the numbers are computed, recorded because the throughput column
    /// semantics (rates as ops per second, one tick = timestep_s) are a
    /// documented modeling choice.
    pub notes: Vec<String>,
}

/// Builds the standard platform comparison for a given workload.
pub fn platform_comparison(
    gpu_flops: f64,
    rows: &[(String, f64, u64)],
    model: &PlatformModel,
) -> PlatformEnergyReport {
    let gpu_joules = gpu_energy(gpu_flops, model);
    let rows: Vec<PlatformEnergyRow> = rows
        .iter()
        .map(|(label, rate, steps)| PlatformEnergyRow {
            label: label.clone(),
            op_rate_per_s: *rate,
            power_w: rate / (model.neuro_gflops_per_w * 1e9),
            timesteps: *steps,
            joules: neuromorphic_energy(*rate, model, *steps),
        })
        .collect();
    let gpu_over_last_row = rows.last().filter(|r| r.joules > 0.0).map(|r| gpu_joules / r.joules);
    PlatformEnergyReport {
        model: *model,
        gpu_flops,
        gpu_joules,
        rows,
        gpu_over_last_row,
        notes: vec![
            "gpu_joules = gpu_power_w * gpu_flops / (gpu_gflops * 1e9)".into(),
            "row power_w = op_rate_per_s / (neuro_gflops_per_w * 1e9); op rates are per second"
                .into(),
            "row joules = power_w * timesteps * timestep_s; one tick lasts timestep_s".into(),
        ],
    }
}

/// The bundled reference comparison (detector FLOPs vs. the two conversion
/// variants) under the default platform model.
pub fn reference_comparison() -> PlatformEnergyReport {
    platform_comparison(
        reference::GPU_FLOPS_PER_IMAGE,
        &[
            (
                "layer_scaled".into(),
                reference::SNN_OP_RATE_LAYER_SCALED,
                reference::TIMESTEPS_LAYER_SCALED,
            ),
            (
                "channel_scaled".into(),
                reference::SNN_OP_RATE_CHANNEL_SCALED,
                reference::TIMESTEPS_CHANNEL_SCALED,
            ),
        ],
        &PlatformModel::default(),
    )
}
