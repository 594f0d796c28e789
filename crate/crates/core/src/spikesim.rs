//! Time-stepped spiking simulation of a converted network.
//!
//! One tick moves the whole stack one step in topological order: the input
//! encoder turns pixel values (constant analog currents) into signed spikes,
//! each weighted layer accumulates synaptic input from the previous entity's
//! spikes of the *same* tick, and every neuron emits at most one signed spike
//! per tick, resetting by subtraction of the crossed threshold.
//!
//! Simulation state indexes the input encoder as layer 0 and network layer
//! `l` as `l + 1`; all reports and trace exports use that convention.

use crate::calibrate::{NormScheme, NormalizedNetwork};
use crate::netspec::{
    is_folded, layer_geometries, Activation, LayerGeometry, LayerKind, ModelError, NetworkSpec,
};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

/// Relative guard band on threshold comparisons. Accumulating a constant
/// current like 0.7 in f32 drifts a few ulp below the exact partial sums, so
/// a strict `>=` would miss a crossing that exact arithmetic reaches (e.g.
/// ten ticks of 0.7 against a unit threshold). The guard admits values within
/// `1e-6 * |threshold|` of the threshold.
pub const THRESHOLD_GUARD: f32 = 1e-6;

// ── Neuron ──────────────────────────────────────────────────────────────────

/// Signed integrate-and-fire neuron with imbalanced thresholds: the positive
/// threshold is `v_th_pos`, the negative threshold `-v_th_pos / alpha`, so a
/// negative spike stands for `alpha` times more integrated magnitude than a
/// positive one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronConfig {
    pub v_th_pos: f32,
    /// Negative-region slope of the activation this neuron reproduces;
    /// 1.0 gives symmetric thresholds.
    pub alpha: f32,
    /// When false the negative path is disabled entirely (plain
    /// integrate-and-fire; only non-negative activations representable).
    pub signed: bool,
}

impl NeuronConfig {
    pub fn v_th_neg(&self) -> f32 {
        -self.v_th_pos / self.alpha
    }

    fn validate(&self) -> Result<(), SimError> {
        if !(self.v_th_pos > 0.0) {
            return Err(SimError::InvalidNeuron(format!(
                "v_th_pos must be positive, got {}",
                self.v_th_pos
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(SimError::InvalidNeuron(format!(
                "alpha must be in (0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Advances one neuron one tick: integrate `z`, fire at most one signed
/// spike, reset by subtracting the crossed threshold (excess carries over).
/// Returns the emitted spike sign (1, -1, or 0).
#[inline]
pub fn step_potential(cfg: &NeuronConfig, v: &mut f32, z: f32) -> i8 {
    *v += z;
    let pos = cfg.v_th_pos;
    if *v >= pos - THRESHOLD_GUARD * pos {
        *v -= pos;
        return 1;
    }
    if cfg.signed {
        let neg = cfg.v_th_neg();
        if *v <= neg - THRESHOLD_GUARD * neg {
            *v -= neg;
            return -1;
        }
    }
    0
}

// ── Conversion ──────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy)]
pub struct ConvertOptions {
    pub v_th_pos: f32,
    pub signed: bool,
    /// When false the final layer only accumulates membrane potential and
    /// never spikes (useful with membrane-potential decoding).
    pub final_layer_fires: bool,
}

impl Default for ConvertOptions {
    fn default() -> Self {
        ConvertOptions { v_th_pos: 1.0, signed: true, final_layer_fires: true }
    }
}

/// A normalized network paired with per-layer neuron configurations, ready to
/// simulate.
#[derive(Debug, Clone)]
pub struct SpikingNetwork {
    pub net: NetworkSpec,
    pub scheme: NormScheme,
    /// One config per network layer (placeholders for maxpool layers, which
    /// gate spikes instead of integrating).
    pub neuron_configs: Vec<NeuronConfig>,
    pub encoder_config: NeuronConfig,
    pub output_scale: Vec<f32>,
    pub final_layer_fires: bool,
}

/// Builds the spiking twin of a normalized network. Each layer's neuron
/// reproduces that layer's activation: leaky-ReLU layers get the network's
/// negative slope as their threshold imbalance, linear layers (the output
/// head) get symmetric thresholds (`alpha = 1`).
pub fn convert(
    norm: &NormalizedNetwork,
    opts: ConvertOptions,
) -> Result<SpikingNetwork, SimError> {
    if !is_folded(&norm.net) {
        return Err(SimError::NotFolded);
    }
    norm.net.validate()?;
    let neuron_configs: Vec<NeuronConfig> = norm
        .net
        .layers
        .iter()
        .map(|layer| NeuronConfig {
            v_th_pos: opts.v_th_pos,
            alpha: if layer.activation == Activation::LeakyRelu {
                norm.net.leaky_slope
            } else {
                1.0
            },
            signed: opts.signed,
        })
        .collect();
    for cfg in &neuron_configs {
        cfg.validate()?;
    }
    let encoder_config =
        NeuronConfig { v_th_pos: opts.v_th_pos, alpha: 1.0, signed: opts.signed };
    Ok(SpikingNetwork {
        net: norm.net.clone(),
        scheme: norm.scheme,
        neuron_configs,
        encoder_config,
        output_scale: norm.output_scale.clone(),
        final_layer_fires: opts.final_layer_fires,
    })
}

// ── State ───────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpikeEvent {
    pub t: u32,
    /// 0 = input encoder, `l + 1` = network layer `l`.
    pub layer: usize,
    pub neuron: usize,
    pub sign: i8,
}

#[derive(Debug, Clone)]
pub struct LayerSimState {
    pub shape: [usize; 3],
    /// Membrane potentials; `None` for maxpool layers (pure gates).
    pub v_mem: Option<Vec<f32>>,
    pub spike_pos: Vec<u32>,
    pub spike_neg: Vec<u32>,
}

impl LayerSimState {
    fn new(shape: [usize; 3], has_membrane: bool) -> Self {
        let n = shape.iter().product();
        LayerSimState {
            shape,
            v_mem: has_membrane.then(|| vec![0.0; n]),
            spike_pos: vec![0; n],
            spike_neg: vec![0; n],
        }
    }

    pub fn neuron_count(&self) -> usize {
        self.spike_pos.len()
    }

    /// Cumulative signed count `pos - neg` for one neuron.
    pub fn signed_count(&self, i: usize) -> i64 {
        self.spike_pos[i] as i64 - self.spike_neg[i] as i64
    }
}

#[derive(Debug, Clone)]
pub struct SimulationState {
    /// `layers[0]` is the input encoder; `layers[l + 1]` is network layer `l`.
    pub layers: Vec<LayerSimState>,
    /// Ticks simulated so far.
    pub t: u32,
    /// Synaptic accumulations actually executed (one per weight touched by a
    /// spike), for energy accounting.
    pub synapse_acs: u64,
    /// Bias accumulations actually executed (one per biased neuron per tick).
    pub bias_acs: u64,
    pub trace: Option<Vec<SpikeEvent>>,
}

impl SimulationState {
    pub fn final_layer(&self) -> &LayerSimState {
        self.layers.last().expect("state always has encoder + layers")
    }
}

// ── Errors ──────────────────────────────────────────────────────────────────

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("simulation requires at least one timestep")]
    ZeroTimesteps,
    #[error("input value {value} at index {index} is outside [0, 1]")]
    InputOutOfRange { index: usize, value: f32 },
    #[error("input shape {got:?} does not match network input {want:?}")]
    InputShape { got: Vec<usize>, want: [usize; 3] },
    #[error("network must be batchnorm-folded before conversion")]
    NotFolded,
    #[error("invalid neuron config: {0}")]
    InvalidNeuron(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

// ── Input encoding ──────────────────────────────────────────────────────────

/// Validates an image for constant-current encoding and returns the per-tick
/// input current: the image itself, injected unchanged into the encoder
/// neurons at every step. Values must lie in `[0, 1]`.
pub fn encode_input(image: &Tensor, input_shape: [usize; 3]) -> Result<Tensor, SimError> {
    if image.shape() != input_shape.as_slice() {
        return Err(SimError::InputShape { got: image.shape().to_vec(), want: input_shape });
    }
    for (i, &v) in image.data().iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(SimError::InputOutOfRange { index: i, value: v });
        }
    }
    Ok(image.clone())
}

// ── Simulation ──────────────────────────────────────────────────────────────

/// A network mid-simulation. `step` advances one tick; callers that need
/// intermediate readouts (convergence curves, checkpointed decoding) drive
/// the loop themselves.
pub struct Simulation<'a> {
    snn: &'a SpikingNetwork,
    current: Tensor,
    geos: Vec<LayerGeometry>,
    state: SimulationState,
    /// Per-entity output spikes of the current tick; index 0 = encoder.
    spike_buf: Vec<Vec<i8>>,
    /// Scratch synaptic-input buffers per network layer.
    z_buf: Vec<Vec<f32>>,
}

impl<'a> Simulation<'a> {
    pub fn new(snn: &'a SpikingNetwork, image: &Tensor, trace: bool) -> Result<Self, SimError> {
        let current = encode_input(image, snn.net.input_shape)?;
        let geos = layer_geometries(&snn.net)?;
        let mut layers = Vec::with_capacity(snn.net.layers.len() + 1);
        layers.push(LayerSimState::new(snn.net.input_shape, true));
        for (layer, geo) in snn.net.layers.iter().zip(&geos) {
            layers.push(LayerSimState::new(geo.out_shape, layer.is_weighted()));
        }
        let spike_buf: Vec<Vec<i8>> =
            layers.iter().map(|l| vec![0; l.neuron_count()]).collect();
        let z_buf: Vec<Vec<f32>> =
            layers[1..].iter().map(|l| vec![0.0; l.neuron_count()]).collect();
        Ok(Simulation {
            snn,
            current,
            geos,
            state: SimulationState {
                layers,
                t: 0,
                synapse_acs: 0,
                bias_acs: 0,
                trace: trace.then(Vec::new),
            },
            spike_buf,
            z_buf,
        })
    }

    pub fn state(&self) -> &SimulationState {
        &self.state
    }

    pub fn into_state(self) -> SimulationState {
        self.state
    }

    /// Advances every layer one tick in topological order; layer `l` consumes
    /// the spikes layer `l - 1` emitted this same tick.
    pub fn step(&mut self) {
        self.state.t += 1;
        let t = self.state.t;

        // Input encoder: pixels as constant currents.
        {
            let st = &mut self.state.layers[0];
            let v = st.v_mem.as_mut().expect("encoder has membranes");
            let buf = &mut self.spike_buf[0];
            for (i, &z) in self.current.data().iter().enumerate() {
                let s = step_potential(&self.snn.encoder_config, &mut v[i], z);
                buf[i] = s;
                match s {
                    1 => st.spike_pos[i] += 1,
                    -1 => st.spike_neg[i] += 1,
                    _ => {}
                }
                if s != 0 {
                    if let Some(tr) = &mut self.state.trace {
                        tr.push(SpikeEvent { t, layer: 0, neuron: i, sign: s });
                    }
                }
            }
        }

        let n_layers = self.snn.net.layers.len();
        for nl in 0..n_layers {
            let layer = &self.snn.net.layers[nl];
            let geo = self.geos[nl];
            // Split so we can read entity nl (input side) while writing
            // entity nl + 1 (this layer).
            let (prev_states, cur_states) = self.state.layers.split_at_mut(nl + 1);
            let prev_state = &prev_states[nl];
            let cur_state = &mut cur_states[0];
            let (prev_bufs, cur_bufs) = self.spike_buf.split_at_mut(nl + 1);
            let in_spikes: &[i8] = &prev_bufs[nl];
            let out_spikes: &mut Vec<i8> = &mut cur_bufs[0];

            match layer.kind {
                LayerKind::Conv2d | LayerKind::Dense => {
                    let z = &mut self.z_buf[nl];
                    // Per-tick bias injection.
                    match &layer.bias {
                        Some(bias) => {
                            let c = geo.out_shape[2];
                            for (i, zi) in z.iter_mut().enumerate() {
                                *zi = bias[i % c];
                            }
                            self.state.bias_acs += z.len() as u64;
                        }
                        None => z.fill(0.0),
                    }
                    let w = layer.weights.as_ref().expect("weighted layer");
                    if layer.kind == LayerKind::Conv2d {
                        accumulate_conv(
                            w,
                            geo,
                            layer.kernel,
                            layer.stride,
                            in_spikes,
                            z,
                            &mut self.state.synapse_acs,
                        );
                    } else {
                        accumulate_dense(
                            w,
                            layer.out_ch,
                            in_spikes,
                            z,
                            &mut self.state.synapse_acs,
                        );
                    }

                    let fires = nl + 1 < n_layers || self.snn.final_layer_fires;
                    let cfg = &self.snn.neuron_configs[nl];
                    let v = cur_state.v_mem.as_mut().expect("weighted layer has membranes");
                    if fires {
                        for (i, &zi) in z.iter().enumerate() {
                            let s = step_potential(cfg, &mut v[i], zi);
                            out_spikes[i] = s;
                            match s {
                                1 => cur_state.spike_pos[i] += 1,
                                -1 => cur_state.spike_neg[i] += 1,
                                _ => {}
                            }
                            if s != 0 {
                                if let Some(tr) = &mut self.state.trace {
                                    tr.push(SpikeEvent { t, layer: nl + 1, neuron: i, sign: s });
                                }
                            }
                        }
                    } else {
                        // Pure accumulator: integrate only, never fire.
                        for (vi, zi) in v.iter_mut().zip(z.iter()) {
                            *vi += zi;
                        }
                        out_spikes.fill(0);
                    }
                }
                LayerKind::MaxPool2d => {
                    pool_step(
                        geo,
                        layer.kernel,
                        layer.stride,
                        prev_state,
                        in_spikes,
                        out_spikes,
                    );
                    for (i, &s) in out_spikes.iter().enumerate() {
                        match s {
                            1 => cur_state.spike_pos[i] += 1,
                            -1 => cur_state.spike_neg[i] += 1,
                            _ => {}
                        }
                        if s != 0 {
                            if let Some(tr) = &mut self.state.trace {
                                tr.push(SpikeEvent { t, layer: nl + 1, neuron: i, sign: s });
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Transposed convolution scatter: each input spike adds its sign times the
/// kernel column into every output position it feeds, counting one synaptic
/// accumulation per weight touched.
fn accumulate_conv(
    w: &Tensor,
    geo: LayerGeometry,
    kernel: usize,
    stride: usize,
    in_spikes: &[i8],
    z: &mut [f32],
    acs: &mut u64,
) {
    let [_, iw, ic] = geo.in_shape;
    let [oh, ow, oc] = geo.out_shape;
    for (flat, &s) in in_spikes.iter().enumerate() {
        if s == 0 {
            continue;
        }
        let sf = s as f32;
        let i = flat % ic;
        let ix = (flat / ic) % iw;
        let iy = flat / (ic * iw);
        for ky in 0..kernel {
            let oy_num = iy as isize + geo.pad_top as isize - ky as isize;
            if oy_num < 0 || oy_num % stride as isize != 0 {
                continue;
            }
            let oy = oy_num as usize / stride;
            if oy >= oh {
                continue;
            }
            for kx in 0..kernel {
                let ox_num = ix as isize + geo.pad_left as isize - kx as isize;
                if ox_num < 0 || ox_num % stride as isize != 0 {
                    continue;
                }
                let ox = ox_num as usize / stride;
                if ox >= ow {
                    continue;
                }
                let base = (oy * ow + ox) * oc;
                for o in 0..oc {
                    z[base + o] += sf * w.at4(o, i, ky, kx);
                }
                *acs += oc as u64;
            }
        }
    }
}

fn accumulate_dense(w: &Tensor, out_ch: usize, in_spikes: &[i8], z: &mut [f32], acs: &mut u64) {
    let n_in = in_spikes.len();
    for (i, &s) in in_spikes.iter().enumerate() {
        if s == 0 {
            continue;
        }
        let sf = s as f32;
        for o in 0..out_ch {
            z[o] += sf * w.data()[o * n_in + i];
        }
        *acs += out_ch as u64;
    }
}

/// One tick of spike-gated max pooling: each output forwards the current
/// spike of the window input with the largest cumulative signed spike count
/// (including this tick's spikes), ties broken toward the lowest flat index.
fn pool_step(
    geo: LayerGeometry,
    kernel: usize,
    stride: usize,
    prev: &LayerSimState,
    in_spikes: &[i8],
    out_spikes: &mut [i8],
) {
    let [ih, iw, c] = geo.in_shape;
    let [oh, ow, _] = geo.out_shape;
    for oy in 0..oh {
        for ox in 0..ow {
            let iy0 = (oy * stride) as isize - geo.pad_top as isize;
            let ix0 = (ox * stride) as isize - geo.pad_left as isize;
            for ch in 0..c {
                let mut winner: Option<(i64, usize)> = None;
                for ky in 0..kernel {
                    let iy = iy0 + ky as isize;
                    if iy < 0 || iy >= ih as isize {
                        continue;
                    }
                    for kx in 0..kernel {
                        let ix = ix0 + kx as isize;
                        if ix < 0 || ix >= iw as isize {
                            continue;
                        }
                        let flat = (iy as usize * iw + ix as usize) * c + ch;
                        let count = prev.signed_count(flat);
                        let better = match winner {
                            None => true,
                            Some((best, best_flat)) => {
                                count > best || (count == best && flat < best_flat)
                            }
                        };
                        if better {
                            winner = Some((count, flat));
                        }
                    }
                }
                let out_flat = (oy * ow + ox) * c + ch;
                out_spikes[out_flat] = winner.map_or(0, |(_, flat)| in_spikes[flat]);
            }
        }
    }
}

/// Runs a fresh simulation for `steps` ticks.
pub fn run(
    snn: &SpikingNetwork,
    image: &Tensor,
    steps: u32,
    trace: bool,
) -> Result<SimulationState, SimError> {
    if steps == 0 {
        return Err(SimError::ZeroTimesteps);
    }
    let mut sim = Simulation::new(snn, image, trace)?;
    for _ in 0..steps {
        sim.step();
    }
    Ok(sim.into_state())
}

/// Renders spike events as CSV with a `t,layer,neuron_flat_index,sign`
/// header. Events keep emission order, so output is deterministic.
pub fn trace_to_csv(events: &[SpikeEvent]) -> String {
    let mut out = String::from("t,layer,neuron_flat_index,sign\n");
    for e in events {
        out.push_str(&format!("{},{},{},{}\n", e.t, e.layer, e.neuron, e.sign));
    }
    out
}
