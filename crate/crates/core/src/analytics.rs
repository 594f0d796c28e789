//! Firing-rate reports, channel utilization profiles, rasters, and
//! convergence curves comparing decoded spiking outputs against the
//! real-valued forward pass.

use crate::calibrate::{ActivationStats, CalibrateError, NormScheme, NormalizedNetwork};
use crate::decode::{decode, denormalize, DecodeError, DecodeScheme};
use crate::netspec::{forward, ModelError, NetworkSpec};
use crate::spikesim::{
    convert, ConvertOptions, SimError, Simulation, SimulationState, SpikeEvent,
};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

/// Default histogram bin width for firing rates (0.5 percentage points).
pub const DEFAULT_RATE_BIN_WIDTH: f32 = 0.005;

/// Rates below this are "underutilized" in reports: neurons this quiet carry
/// almost no information per tick and dominate conversion latency.
pub const LOW_RATE_THRESHOLD: f32 = 0.035;

/// Default neuron sample size for rasters.
pub const DEFAULT_RASTER_NEURONS: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum AnalyticsError {
    #[error("state has zero ticks; run the simulation first")]
    ZeroTicks,
    #[error("no inputs supplied")]
    EmptyInputs,
    #[error("bad checkpoint list: {0}")]
    BadCheckpoints(String),
    #[error("layer index {layer} out of range ({count} layers including encoder)")]
    LayerOutOfRange { layer: usize, count: usize },
    #[error("channel {channel} out of range for layer with {count} channels")]
    ChannelOutOfRange { channel: usize, count: usize },
    #[error("simulation was run without tracing; rasters need a trace")]
    TraceMissing,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Calibrate(#[from] CalibrateError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

// ── Firing rates ────────────────────────────────────────────────────────────

/// Per-neuron rates of one simulated entity (encoder or network layer).
#[derive(Debug, Clone)]
pub struct LayerRates {
    pub shape: [usize; 3],
    /// Activity rate `(pos + neg) / T`, sign-agnostic; at most one spike per
    /// tick, so always in `[0, 1]`.
    pub activity: Vec<f32>,
    /// Signed rate `(pos - neg) / T`.
    pub signed: Vec<f32>,
}

/// Rates for every simulated entity; index 0 is the input encoder.
pub fn firing_rates(state: &SimulationState) -> Result<Vec<LayerRates>, AnalyticsError> {
    if state.t == 0 {
        return Err(AnalyticsError::ZeroTicks);
    }
    let t = state.t as f32;
    Ok(state
        .layers
        .iter()
        .map(|l| LayerRates {
            shape: l.shape,
            activity: (0..l.neuron_count())
                .map(|i| (l.spike_pos[i] + l.spike_neg[i]) as f32 / t)
                .collect(),
            signed: (0..l.neuron_count()).map(|i| l.signed_count(i) as f32 / t).collect(),
        })
        .collect())
}

// ── Channel utilization profile ─────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerChannelProfile {
    /// Per-channel calibrated maxima divided by the scale the scheme actually
    /// applies to that channel. Under a per-layer scale, small channels show
    /// up as values far below 1; under per-channel scales every channel is 1.
    pub per_channel: Vec<f32>,
    pub mean: f32,
    pub min: f32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelProfile {
    pub scheme: NormScheme,
    pub layers: Vec<LayerChannelProfile>,
}

pub fn channel_activation_profile(stats: &ActivationStats, scheme: NormScheme) -> ChannelProfile {
    let layers = stats
        .layers
        .iter()
        .map(|ls| {
            let per_channel: Vec<f32> = match scheme {
                NormScheme::Layer => {
                    ls.lambda_chan.iter().map(|&c| c / ls.lambda_layer).collect()
                }
                NormScheme::Channel => vec![1.0; ls.lambda_chan.len()],
            };
            let n = per_channel.len() as f32;
            let mean = per_channel.iter().sum::<f32>() / n;
            let min = per_channel.iter().copied().fold(f32::INFINITY, f32::min);
            LayerChannelProfile { per_channel, mean, min }
        })
        .collect();
    ChannelProfile { scheme, layers }
}

// ── Histograms and report ───────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateHistogram {
    pub bin_width: f32,
    /// `counts[i]` covers rates in `[i * bin_width, (i + 1) * bin_width)`;
    /// a rate of exactly 1.0 lands in the last bin.
    pub counts: Vec<u64>,
}

pub fn rate_histogram(rates: &[f32], bin_width: f32) -> RateHistogram {
    let n_bins = (1.0 / bin_width).ceil() as usize;
    let mut counts = vec![0u64; n_bins];
    for &r in rates {
        let bin = ((r / bin_width) as usize).min(n_bins - 1);
        counts[bin] += 1;
    }
    RateHistogram { bin_width, counts }
}

/// Fraction of rates strictly below `threshold`.
pub fn fraction_below(rates: &[f32], threshold: f32) -> f32 {
    if rates.is_empty() {
        return 0.0;
    }
    rates.iter().filter(|&&r| r < threshold).count() as f32 / rates.len() as f32
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelRateSummary {
    pub mean: f32,
    pub min: f32,
    pub max: f32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerFiringSummary {
    /// Simulation index: 0 = input encoder, `l + 1` = network layer `l`.
    pub layer: usize,
    pub shape: [usize; 3],
    pub channels: Vec<ChannelRateSummary>,
    pub histogram: RateHistogram,
    /// Fraction of this layer's neurons with activity rate below
    /// [`LOW_RATE_THRESHOLD`].
    pub low_rate_fraction: f32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiringReport {
    pub timesteps: u32,
    pub low_rate_threshold: f32,
    pub layers: Vec<LayerFiringSummary>,
}

pub fn firing_report(
    state: &SimulationState,
    bin_width: f32,
) -> Result<FiringReport, AnalyticsError> {
    let rates = firing_rates(state)?;
    let layers = rates
        .iter()
        .enumerate()
        .map(|(idx, lr)| {
            let c = lr.shape[2];
            let channels = (0..c)
                .map(|ch| {
                    let vals: Vec<f32> = lr
                        .activity
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| i % c == ch)
                        .map(|(_, &v)| v)
                        .collect();
                    let n = vals.len() as f32;
                    ChannelRateSummary {
                        mean: vals.iter().sum::<f32>() / n,
                        min: vals.iter().copied().fold(f32::INFINITY, f32::min),
                        max: vals.iter().copied().fold(0.0, f32::max),
                    }
                })
                .collect();
            LayerFiringSummary {
                layer: idx,
                shape: lr.shape,
                channels,
                histogram: rate_histogram(&lr.activity, bin_width),
                low_rate_fraction: fraction_below(&lr.activity, LOW_RATE_THRESHOLD),
            }
        })
        .collect();
    Ok(FiringReport {
        timesteps: state.t,
        low_rate_threshold: LOW_RATE_THRESHOLD,
        layers,
    })
}

/// Renders a histogram as CSV rows `bin_lo,bin_hi,count`.
pub fn histogram_to_csv(h: &RateHistogram) -> String {
    let mut out = String::from("bin_lo,bin_hi,count\n");
    for (i, c) in h.counts.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{}\n",
            i as f32 * h.bin_width,
            (i + 1) as f32 * h.bin_width,
            c
        ));
    }
    out
}

// ── Raster sampling ─────────────────────────────────────────────────────────

/// Events of the first `n` neurons (lowest flat indices) of one channel of
/// one simulated layer, in emission order. Requires a traced run.
pub fn sample_raster(
    state: &SimulationState,
    layer: usize,
    channel: usize,
    n: usize,
) -> Result<Vec<SpikeEvent>, AnalyticsError> {
    let trace = state.trace.as_ref().ok_or(AnalyticsError::TraceMissing)?;
    let ls = state
        .layers
        .get(layer)
        .ok_or(AnalyticsError::LayerOutOfRange { layer, count: state.layers.len() })?;
    let c = ls.shape[2];
    if channel >= c {
        return Err(AnalyticsError::ChannelOutOfRange { channel, count: c });
    }
    let selected: Vec<usize> =
        (0..ls.neuron_count()).filter(|i| i % c == channel).take(n).collect();
    Ok(trace
        .iter()
        .filter(|e| e.layer == layer && selected.contains(&e.neuron))
        .copied()
        .collect())
}

// ── Error metrics and convergence ───────────────────────────────────────────

/// Mean absolute difference between two equally-shaped tensors.
pub fn mean_abs_error(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.shape(), b.shape(), "mean_abs_error over mismatched shapes");
    let n = a.len().max(1) as f64;
    a.data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x as f64 - y as f64).abs())
        .sum::<f64>()
        / n
}

/// Largest absolute difference between two equally-shaped tensors.
pub fn max_abs_error(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.shape(), b.shape(), "max_abs_error over mismatched shapes");
    a.data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x as f64 - y as f64).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub t: u32,
    pub mae: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceSeries {
    pub label: String,
    pub points: Vec<ConvergencePoint>,
    /// Smallest checkpoint whose mean error reached the target, if any.
    pub first_t_at_target: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub decode: DecodeScheme,
    pub target_mae: f64,
    pub series: Vec<ConvergenceSeries>,
}

/// Decoded-output error versus simulation length for one or more normalized
/// networks against the original network's forward pass.
///
/// Each candidate is simulated once per input up to the largest checkpoint;
/// at every checkpoint the final layer is decoded, denormalized, and compared
/// to the oracle, and errors are averaged over inputs.
pub fn convergence_curves(
    original: &NetworkSpec,
    candidates: &[(String, &NormalizedNetwork)],
    opts: ConvertOptions,
    inputs: &[Tensor],
    checkpoints: &[u32],
    scheme: DecodeScheme,
    target_mae: f64,
) -> Result<ConvergenceReport, AnalyticsError> {
    if inputs.is_empty() {
        return Err(AnalyticsError::EmptyInputs);
    }
    if checkpoints.is_empty() {
        return Err(AnalyticsError::BadCheckpoints("no checkpoints".into()));
    }
    if checkpoints[0] == 0 || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AnalyticsError::BadCheckpoints(
            "checkpoints must be strictly increasing and positive".into(),
        ));
    }
    let max_t = *checkpoints.last().unwrap();

    let mut series = Vec::with_capacity(candidates.len());
    for (label, norm) in candidates {
        let snn = convert(norm, opts)?;
        let mut sums = vec![0.0f64; checkpoints.len()];
        for input in inputs {
            let oracle = forward(original, input)?;
            let target = oracle.output();
            let mut sim = Simulation::new(&snn, input, false)?;
            let mut next = 0;
            for t in 1..=max_t {
                sim.step();
                if next < checkpoints.len() && checkpoints[next] == t {
                    let decoded = decode(sim.state(), &snn, scheme)?;
                    let denorm = denormalize(&decoded, &snn);
                    sums[next] += mean_abs_error(&denorm.values, target);
                    next += 1;
                }
            }
        }
        let n = inputs.len() as f64;
        let points: Vec<ConvergencePoint> = checkpoints
            .iter()
            .zip(&sums)
            .map(|(&t, &s)| ConvergencePoint { t, mae: s / n })
            .collect();
        let first_t_at_target = points.iter().find(|p| p.mae <= target_mae).map(|p| p.t);
        series.push(ConvergenceSeries { label: label.clone(), points, first_t_at_target });
    }
    Ok(ConvergenceReport { decode: scheme, target_mae, series })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::{collect_stats, normalize, LayerStats, StatMode};
    use crate::fixtures::{random_inputs, random_network, rng, skewed_channel_network};
    use crate::netspec::{Activation, LayerKind, LayerSpec, Padding};
    use crate::spikesim::LayerSimState;

    fn layer_state(shape: [usize; 3], pos: Vec<u32>, neg: Vec<u32>) -> LayerSimState {
        LayerSimState { shape, v_mem: None, spike_pos: pos, spike_neg: neg }
    }

    fn bare_state(layers: Vec<LayerSimState>, t: u32) -> SimulationState {
        SimulationState { layers, t, synapse_acs: 0, bias_acs: 0, trace: None }
    }

    /// Identity-ish single-neuron network wrapped with unit scales.
    fn passthrough_snn(w: f32) -> crate::spikesim::SpikingNetwork {
        let net = NetworkSpec {
            input_shape: [1, 1, 1],
            leaky_slope: 0.1,
            layers: vec![LayerSpec {
                kind: LayerKind::Dense,
                out_ch: 1,
                kernel: 0,
                stride: 1,
                padding: Padding::Valid,
                weights: Some(Tensor::from_vec(&[1, 1], vec![w])),
                bias: None,
                batchnorm: None,
                activation: Activation::None,
            }],
        };
        let norm = NormalizedNetwork {
            net,
            scheme: NormScheme::Channel,
            stats: ActivationStats {
                mode: StatMode::Max,
                sample_count: 1,
                layers: vec![LayerStats {
                    lambda_layer: 1.0,
                    lambda_chan: vec![1.0],
                    degenerate_channels: vec![],
                }],
            },
            output_scale: vec![1.0],
        };
        convert(&norm, ConvertOptions::default()).unwrap()
    }

    #[test]
    fn rates_divide_counts_by_elapsed_ticks() {
        let state = bare_state(
            vec![layer_state([1, 1, 3], vec![80, 0, 30], vec![0, 0, 20])],
            100,
        );
        let rates = firing_rates(&state).unwrap();
        assert_eq!(rates.len(), 1);
        assert_eq!(rates[0].activity, vec![0.8, 0.0, 0.5]);
        assert_eq!(rates[0].signed, vec![0.8, 0.0, 0.1]);
    }

    #[test]
    fn rates_need_at_least_one_tick() {
        let state = bare_state(vec![layer_state([1, 1, 1], vec![0], vec![0])], 0);
        assert!(matches!(firing_rates(&state), Err(AnalyticsError::ZeroTicks)));
    }

    #[test]
    fn encoder_rate_approximates_the_pixel() {
        let snn = passthrough_snn(1.0);
        let image = Tensor::from_vec(&[1, 1, 1], vec![0.55]);
        let state = crate::spikesim::run(&snn, &image, 200, false).unwrap();
        let rates = firing_rates(&state).unwrap();
        let encoder = &rates[0];
        assert!((encoder.activity[0] - 0.55).abs() <= 1.0 / 200.0 + 1e-6);
        assert_eq!(encoder.activity[0], encoder.signed[0], "pixel drive never goes negative");
    }

    #[test]
    fn per_layer_scaling_exposes_weak_channels() {
        let stats = ActivationStats {
            mode: StatMode::Max,
            sample_count: 4,
            layers: vec![LayerStats {
                lambda_layer: 0.8,
                lambda_chan: vec![0.8, 0.1],
                degenerate_channels: vec![],
            }],
        };
        let layer = channel_activation_profile(&stats, NormScheme::Layer);
        assert_eq!(layer.layers[0].per_channel, vec![1.0, 0.125]);
        assert!((layer.layers[0].mean - 0.5625).abs() < 1e-6);
        assert_eq!(layer.layers[0].min, 0.125);

        let chan = channel_activation_profile(&stats, NormScheme::Channel);
        assert_eq!(chan.layers[0].per_channel, vec![1.0, 1.0]);
        assert_eq!(chan.layers[0].min, 1.0);
    }

    #[test]
    fn skewed_fixture_profile_shows_a_starved_channel() {
        let mut r = rng(11);
        let net = skewed_channel_network(&mut r);
        let inputs = random_inputs(&mut r, net.input_shape, 16);
        let stats = collect_stats(&net, &inputs, StatMode::Max).unwrap();
        let profile = channel_activation_profile(&stats, NormScheme::Layer);
        let first = &profile.layers[0];
        assert!(
            first.min < 0.05,
            "weak channel should sit far below its layer maximum, got {}",
            first.min
        );
        assert!(first.per_channel.iter().any(|&v| v == 1.0));
    }

    #[test]
    fn histogram_buckets_cover_the_unit_interval() {
        let rates = [0.0, 0.0049, 0.005, 0.999, 1.0];
        let h = rate_histogram(&rates, DEFAULT_RATE_BIN_WIDTH);
        assert_eq!(h.counts.len(), 200);
        assert_eq!(h.counts[0], 2);
        assert_eq!(h.counts[1], 1);
        assert_eq!(h.counts[199], 2, "a rate of exactly 1.0 lands in the last bin");
        assert_eq!(h.counts.iter().sum::<u64>(), rates.len() as u64);
    }

    #[test]
    fn fraction_below_is_strict() {
        let rates = [0.01, 0.035, 0.05];
        assert!((fraction_below(&rates, 0.035) - 1.0 / 3.0).abs() < 1e-7);
        assert_eq!(fraction_below(&[], 0.5), 0.0);
    }

    #[test]
    fn report_summaries_are_internally_consistent() {
        let mut r = rng(23);
        let net = random_network(&mut r, false);
        let inputs = random_inputs(&mut r, net.input_shape, 4);
        let stats = collect_stats(&net, &inputs, StatMode::Max).unwrap();
        let norm = normalize(&net, &stats, NormScheme::Channel).unwrap();
        let snn = convert(&norm, ConvertOptions::default()).unwrap();
        let state = crate::spikesim::run(&snn, &inputs[0], 64, false).unwrap();

        let report = firing_report(&state, DEFAULT_RATE_BIN_WIDTH).unwrap();
        assert_eq!(report.timesteps, 64);
        assert_eq!(report.low_rate_threshold, LOW_RATE_THRESHOLD);
        assert_eq!(report.layers.len(), net.layers.len() + 1);
        let rates = firing_rates(&state).unwrap();
        for (summary, lr) in report.layers.iter().zip(&rates) {
            assert_eq!(summary.channels.len(), summary.shape[2]);
            let total: u64 = summary.histogram.counts.iter().sum();
            assert_eq!(total as usize, lr.activity.len());
            let expect_frac = fraction_below(&lr.activity, LOW_RATE_THRESHOLD);
            assert_eq!(summary.low_rate_fraction, expect_frac);
            for ch in &summary.channels {
                assert!(ch.min <= ch.mean + 1e-6 && ch.mean <= ch.max + 1e-6);
            }
        }
    }

    #[test]
    fn histogram_csv_has_one_row_per_bin() {
        let h = rate_histogram(&[0.0, 0.3, 1.0], 0.25);
        let csv = histogram_to_csv(&h);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "bin_lo,bin_hi,count");
        assert_eq!(lines.len(), 1 + h.counts.len());
        assert_eq!(lines[1], "0,0.25,1");
        assert_eq!(lines[2], "0.25,0.5,1");
    }

    #[test]
    fn raster_filters_by_layer_and_channel() {
        let events = vec![
            SpikeEvent { t: 1, layer: 0, neuron: 0, sign: 1 },
            SpikeEvent { t: 1, layer: 1, neuron: 0, sign: 1 },
            SpikeEvent { t: 1, layer: 1, neuron: 1, sign: 1 },
            SpikeEvent { t: 2, layer: 1, neuron: 0, sign: -1 },
            SpikeEvent { t: 2, layer: 1, neuron: 2, sign: 1 },
        ];
        let state = SimulationState {
            layers: vec![
                layer_state([1, 1, 1], vec![1], vec![0]),
                layer_state([1, 2, 2], vec![1, 1, 1, 0], vec![1, 0, 0, 0]),
            ],
            t: 2,
            synapse_acs: 0,
            bias_acs: 0,
            trace: Some(events),
        };
        // Channel 0 of the 2-channel layer owns flat indices {0, 2}.
        let both = sample_raster(&state, 1, 0, 20).unwrap();
        assert_eq!(both.len(), 3);
        assert!(both.iter().all(|e| e.layer == 1 && e.neuron % 2 == 0));
        // Limiting to one neuron keeps only the lowest flat index.
        let first = sample_raster(&state, 1, 0, 1).unwrap();
        assert_eq!(first.len(), 2);
        assert!(first.iter().all(|e| e.neuron == 0));

        assert!(matches!(
            sample_raster(&state, 5, 0, 1),
            Err(AnalyticsError::LayerOutOfRange { layer: 5, count: 2 })
        ));
        assert!(matches!(
            sample_raster(&state, 1, 7, 1),
            Err(AnalyticsError::ChannelOutOfRange { channel: 7, count: 2 })
        ));
    }

    #[test]
    fn raster_requires_a_traced_run() {
        let snn = passthrough_snn(1.0);
        let image = Tensor::from_vec(&[1, 1, 1], vec![0.5]);
        let silent = crate::spikesim::run(&snn, &image, 10, false).unwrap();
        assert!(matches!(
            sample_raster(&silent, 0, 0, 1),
            Err(AnalyticsError::TraceMissing)
        ));
        let traced = crate::spikesim::run(&snn, &image, 10, true).unwrap();
        let events = sample_raster(&traced, 0, 0, 1).unwrap();
        assert_eq!(events.len(), 5, "pixel 0.5 fires every other tick");
        assert!(events.iter().all(|e| e.sign == 1 && e.layer == 0));
    }

    #[test]
    fn error_metrics_match_hand_values() {
        let a = Tensor::from_vec(&[3], vec![1.0, 2.0, 3.0]);
        let b = Tensor::from_vec(&[3], vec![1.5, 2.0, 1.0]);
        assert!((mean_abs_error(&a, &b) - (0.5 + 0.0 + 2.0) / 3.0).abs() < 1e-12);
        assert!((max_abs_error(&a, &b) - 2.0).abs() < 1e-12);
        assert_eq!(mean_abs_error(&a, &a), 0.0);
    }

    #[test]
    fn longer_simulations_approach_the_forward_pass() {
        let mut r = rng(7);
        let net = random_network(&mut r, false);
        let inputs = random_inputs(&mut r, net.input_shape, 3);
        let stats = collect_stats(&net, &inputs, StatMode::Max).unwrap();
        let norm = normalize(&net, &stats, NormScheme::Channel).unwrap();
        let report = convergence_curves(
            &net,
            &[("channel".to_string(), &norm)],
            ConvertOptions::default(),
            &inputs[..2],
            &[20, 200, 2000],
            DecodeScheme::VMem,
            0.05,
        )
        .unwrap();
        let pts = &report.series[0].points;
        assert_eq!(pts.len(), 3);
        assert!(
            pts[2].mae < pts[0].mae,
            "error should shrink with time: {} -> {}",
            pts[0].mae,
            pts[2].mae
        );
        assert!(pts[2].mae < 0.05, "final error {}", pts[2].mae);
        let expect_first = pts.iter().find(|p| p.mae <= 0.05).map(|p| p.t);
        assert_eq!(report.series[0].first_t_at_target, expect_first);
    }

    #[test]
    fn identical_candidates_produce_identical_series() {
        let mut r = rng(31);
        let net = random_network(&mut r, false);
        let inputs = random_inputs(&mut r, net.input_shape, 2);
        let stats = collect_stats(&net, &inputs, StatMode::Max).unwrap();
        let norm = normalize(&net, &stats, NormScheme::Channel).unwrap();
        let report = convergence_curves(
            &net,
            &[("a".to_string(), &norm), ("b".to_string(), &norm)],
            ConvertOptions::default(),
            &inputs,
            &[10, 50],
            DecodeScheme::SpikeCount,
            0.02,
        )
        .unwrap();
        let (a, b) = (&report.series[0], &report.series[1]);
        assert_eq!(a.first_t_at_target, b.first_t_at_target);
        for (pa, pb) in a.points.iter().zip(&b.points) {
            assert_eq!(pa.t, pb.t);
            assert_eq!(pa.mae, pb.mae);
        }
    }

    #[test]
    fn convergence_validates_its_checkpoints() {
        let mut r = rng(5);
        let net = random_network(&mut r, false);
        let inputs = random_inputs(&mut r, net.input_shape, 1);
        let stats = collect_stats(&net, &inputs, StatMode::Max).unwrap();
        let norm = normalize(&net, &stats, NormScheme::Channel).unwrap();
        let cands = [("x".to_string(), &norm)];
        let opts = ConvertOptions::default();

        for bad in [&[][..], &[0, 5][..], &[5, 5][..], &[9, 3][..]] {
            let got = convergence_curves(
                &net, &cands, opts, &inputs, bad, DecodeScheme::VMem, 0.1,
            );
            assert!(
                matches!(got, Err(AnalyticsError::BadCheckpoints(_))),
                "checkpoints {bad:?} should be rejected"
            );
        }
        let none = convergence_curves(&net, &cands, opts, &[], &[5], DecodeScheme::VMem, 0.1);
        assert!(matches!(none, Err(AnalyticsError::EmptyInputs)));
    }

    #[test]
    fn target_crossing_is_the_first_checkpoint_that_reaches_it() {
        let mut r = rng(13);
        let net = random_network(&mut r, false);
        let inputs = random_inputs(&mut r, net.input_shape, 1);
        let stats = collect_stats(&net, &inputs, StatMode::Max).unwrap();
        let norm = normalize(&net, &stats, NormScheme::Channel).unwrap();
        let cands = [("x".to_string(), &norm)];
        let opts = ConvertOptions::default();

        let generous = convergence_curves(
            &net, &cands, opts, &inputs, &[3, 30], DecodeScheme::VMem, f64::INFINITY,
        )
        .unwrap();
        assert_eq!(generous.series[0].first_t_at_target, Some(3));

        let impossible = convergence_curves(
            &net, &cands, opts, &inputs, &[3, 30], DecodeScheme::VMem, -1.0,
        )
        .unwrap();
        assert_eq!(impossible.series[0].first_t_at_target, None);
    }
}
