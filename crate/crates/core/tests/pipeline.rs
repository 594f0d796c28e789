//! End-to-end journeys: real-valued network in, decoded spiking outputs and
//! reports out, checked against the real-valued forward pass as oracle.

use spikeconv_core::analytics::{firing_report, mean_abs_error, sample_raster};
use spikeconv_core::calibrate::{collect_stats, normalize, NormScheme, StatMode};
use spikeconv_core::decode::{decode, denormalize, DecodeScheme};
use spikeconv_core::energy::{
    count_dnn_ops, count_snn_ops, op_energy, EnergyModel, Precision,
};
use spikeconv_core::fixtures::{example_network, random_inputs, random_network, rng};
use spikeconv_core::netspec::{fold_batchnorm, forward};
use spikeconv_core::spikesim::{convert, run, ConvertOptions};

/// Decoded-output error budget for a 3,000-tick run on a desk-scale net.
const DECODE_MAE_TOL: f64 = 0.05;
const TICKS: u32 = 3_000;

fn decoded_mae(
    net: &spikeconv_core::NetworkSpec,
    norm: &spikeconv_core::NormalizedNetwork,
    input: &spikeconv_core::Tensor,
    ticks: u32,
) -> f64 {
    let snn = convert(norm, ConvertOptions::default()).unwrap();
    let state = run(&snn, input, ticks, false).unwrap();
    let decoded = decode(&state, &snn, DecodeScheme::VMem).unwrap();
    let denorm = denormalize(&decoded, &snn);
    let oracle = forward(net, input).unwrap();
    mean_abs_error(&denorm.values, oracle.output())
}

#[test]
fn converted_networks_approach_the_oracle_on_random_stacks() {
    for seed in 0..6u64 {
        let mut r = rng(100 + seed);
        let net = random_network(&mut r, false);
        let calib = random_inputs(&mut r, net.input_shape, 16);
        let eval = random_inputs(&mut r, net.input_shape, 2);
        let stats = collect_stats(&net, &calib, StatMode::Max).unwrap();
        for scheme in [NormScheme::Layer, NormScheme::Channel] {
            let norm = normalize(&net, &stats, scheme).unwrap();
            for (i, input) in eval.iter().enumerate() {
                let mae = decoded_mae(&net, &norm, input, TICKS);
                assert!(
                    mae <= DECODE_MAE_TOL,
                    "seed {seed} {scheme:?} input {i}: decoded MAE {mae:.4} \
                     exceeds {DECODE_MAE_TOL}"
                );
            }
        }
    }
}

#[test]
fn percentile_statistics_also_converge() {
    // A clipped (99.9th percentile) scale can under-estimate the true
    // maximum, which trades a little saturation for faster rates; the decoded
    // output must still approach the oracle.
    let mut r = rng(55);
    let net = random_network(&mut r, false);
    let calib = random_inputs(&mut r, net.input_shape, 24);
    let eval = random_inputs(&mut r, net.input_shape, 2);
    let stats = collect_stats(&net, &calib, StatMode::P999).unwrap();
    for scheme in [NormScheme::Layer, NormScheme::Channel] {
        let norm = normalize(&net, &stats, scheme).unwrap();
        for input in &eval {
            let mae = decoded_mae(&net, &norm, input, TICKS);
            assert!(mae <= DECODE_MAE_TOL, "{scheme:?}: decoded MAE {mae:.4}");
        }
    }
}

#[test]
fn full_journey_from_batchnorm_network_to_reports() {
    // Conv with batch norm -> pool -> conv -> dense head: fold, calibrate,
    // convert, simulate with tracing, decode, and cross-check every report
    // the pipeline can produce.
    let net = example_network(5);
    let folded = fold_batchnorm(&net);
    let mut r = rng(500);
    let calib = random_inputs(&mut r, folded.input_shape, 24);
    let eval = random_inputs(&mut r, folded.input_shape, 1);
    let stats = collect_stats(&folded, &calib, StatMode::Max).unwrap();

    for scheme in [NormScheme::Layer, NormScheme::Channel] {
        let norm = normalize(&folded, &stats, scheme).unwrap();
        let snn = convert(&norm, ConvertOptions::default()).unwrap();
        let state = run(&snn, &eval[0], TICKS, true).unwrap();

        // Decoded output vs. the *unfolded* original: folding and
        // normalization must compose transparently.
        let decoded = decode(&state, &snn, DecodeScheme::VMem).unwrap();
        let denorm = denormalize(&decoded, &snn);
        let oracle = forward(&net, &eval[0]).unwrap();
        let mae = mean_abs_error(&denorm.values, oracle.output());
        assert!(mae <= DECODE_MAE_TOL, "{scheme:?}: decoded MAE {mae:.4}");

        // The firing report covers encoder + one entry per layer, and its
        // histograms account for every neuron.
        let report = firing_report(&state, 0.005).unwrap();
        assert_eq!(report.layers.len(), folded.layers.len() + 1);
        for (summary, ls) in report.layers.iter().zip(&state.layers) {
            let total: u64 = summary.histogram.counts.iter().sum();
            assert_eq!(total as usize, ls.neuron_count());
        }

        // The closed-form operation recount agrees with the simulator's own
        // instrumentation, and the energy report prices it.
        let snn_ops = count_snn_ops(&snn, &state).unwrap();
        assert_eq!(snn_ops.synapse_acs, state.synapse_acs);
        assert_eq!(snn_ops.bias_acs, state.bias_acs);
        let dnn_ops = count_dnn_ops(&folded).unwrap();
        let op = op_energy(dnn_ops, snn_ops, EnergyModel::for_precision(Precision::Fl32));
        assert!(op.dnn_joules > 0.0 && op.snn_joules > 0.0);
        assert!(op.ratio.unwrap() > 0.0);

        // A raster of the first conv layer's channel 0 is available and
        // consistent with that layer's spike totals.
        let raster = sample_raster(&state, 1, 0, 4).unwrap();
        assert!(raster.iter().all(|e| e.layer == 1 && e.t >= 1 && e.t <= TICKS));
    }
}

#[test]
fn longer_runs_do_not_regress_on_the_same_input() {
    let mut r = rng(321);
    let net = random_network(&mut r, false);
    let calib = random_inputs(&mut r, net.input_shape, 16);
    let eval = random_inputs(&mut r, net.input_shape, 1);
    let stats = collect_stats(&net, &calib, StatMode::Max).unwrap();
    let norm = normalize(&net, &stats, NormScheme::Channel).unwrap();
    let short = decoded_mae(&net, &norm, &eval[0], 100);
    let long = decoded_mae(&net, &norm, &eval[0], 5_000);
    assert!(
        long <= short.max(0.01),
        "5000-tick MAE {long:.4} should not exceed 100-tick MAE {short:.4} \
         (beyond quantization noise)"
    );
    assert!(long <= 0.02, "long-run MAE {long:.4}");
}
