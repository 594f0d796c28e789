//! Readout of final-layer simulation state into real-valued outputs.
//!
//! Two schemes: spike counting (signed count scaled by threshold over time)
//! and membrane-potential readout (same, plus the un-fired residual), which
//! refines the quotient and never decodes worse for a constant drive.
//! Decoded values live in the normalized domain; [`denormalize`] applies the
//! network's output scales.

use crate::spikesim::{SimulationState, SpikingNetwork};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeScheme {
    SpikeCount,
    VMem,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecodedOutput {
    pub scheme: DecodeScheme,
    pub timesteps: u32,
    pub values: Tensor,
}

#[derive(Debug, thiserror::Error)]
pub enum DecodeError {
    #[error("nothing simulated yet: state has zero ticks")]
    ZeroTicks,
    #[error("final layer carries no membrane state")]
    NoMembrane,
}

fn final_v_th(snn: &SpikingNetwork) -> f32 {
    snn.neuron_configs.last().expect("network has layers").v_th_pos
}

/// Spike-count readout: `(pos - neg) * v_th_pos / T` per final-layer neuron.
pub fn decode_spike_count(
    state: &SimulationState,
    snn: &SpikingNetwork,
) -> Result<DecodedOutput, DecodeError> {
    if state.t == 0 {
        return Err(DecodeError::ZeroTicks);
    }
    let last = state.final_layer();
    let v_th = final_v_th(snn);
    let t = state.t as f32;
    let values: Vec<f32> = (0..last.neuron_count())
        .map(|i| last.signed_count(i) as f32 * v_th / t)
        .collect();
    Ok(DecodedOutput {
        scheme: DecodeScheme::SpikeCount,
        timesteps: state.t,
        values: Tensor::from_vec(&last.shape, values),
    })
}

/// Membrane-potential readout: `((pos - neg) * v_th_pos + v_mem) / T` per
/// final-layer neuron. The residual term recovers the input integrated since
/// the last spike, so for a never-firing accumulator the decoded value times
/// `T` is exactly the total integrated input.
pub fn decode_vmem(
    state: &SimulationState,
    snn: &SpikingNetwork,
) -> Result<DecodedOutput, DecodeError> {
    if state.t == 0 {
        return Err(DecodeError::ZeroTicks);
    }
    let last = state.final_layer();
    let v_mem = last.v_mem.as_ref().ok_or(DecodeError::NoMembrane)?;
    let v_th = final_v_th(snn);
    let t = state.t as f32;
    let values: Vec<f32> = (0..last.neuron_count())
        .map(|i| (last.signed_count(i) as f32 * v_th + v_mem[i]) / t)
        .collect();
    Ok(DecodedOutput {
        scheme: DecodeScheme::VMem,
        timesteps: state.t,
        values: Tensor::from_vec(&last.shape, values),
    })
}

pub fn decode(
    state: &SimulationState,
    snn: &SpikingNetwork,
    scheme: DecodeScheme,
) -> Result<DecodedOutput, DecodeError> {
    match scheme {
        DecodeScheme::SpikeCount => decode_spike_count(state, snn),
        DecodeScheme::VMem => decode_vmem(state, snn),
    }
}

/// Scales decoded values back to the original network's output range:
/// channel `j` is multiplied by `output_scale[j]`.
pub fn denormalize(decoded: &DecodedOutput, snn: &SpikingNetwork) -> DecodedOutput {
    let c = snn.output_scale.len();
    let mut values = decoded.values.clone();
    for (i, v) in values.data_mut().iter_mut().enumerate() {
        *v *= snn.output_scale[i % c];
    }
    DecodedOutput { scheme: decoded.scheme, timesteps: decoded.timesteps, values }
}
