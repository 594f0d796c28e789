//! End-to-end tests of the `spikeconv` binary: artifact layout, exit codes,
//! flag/config precedence, and byte-stable reruns.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn spikeconv(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spikeconv"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(dir: &Path, args: &[&str]) -> Output {
    let out = spikeconv(dir, args);
    assert!(
        out.status.success(),
        "`spikeconv {}` failed:\n{}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr),
    );
    out
}

/// Writes the example model + config into `dir/ex` and returns the config path.
fn gen_example(dir: &Path) -> String {
    run_ok(dir, &["gen-example", "--output-dir", "ex", "--seed", "3"]);
    dir.join("ex/config.json").to_string_lossy().into_owned()
}

fn read_json(path: &Path) -> Value {
    let text = std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("parsing {}: {e}", path.display()))
}

// ── Happy paths ─────────────────────────────────────────────────────────────

#[test]
fn calibrate_writes_byte_stable_stats() {
    let tmp = TempDir::new().unwrap();
    let config = gen_example(tmp.path());

    run_ok(tmp.path(), &["calibrate", "--config", &config]);
    let stats_path = tmp.path().join("ex/run/stats.json");
    let first = std::fs::read(&stats_path).unwrap();
    assert!(!first.is_empty());

    run_ok(tmp.path(), &["calibrate", "--config", &config]);
    let second = std::fs::read(&stats_path).unwrap();
    assert_eq!(first, second, "recalibration on identical inputs must be byte-identical");
}

#[test]
fn run_writes_outputs_and_four_reports_deterministically() {
    let tmp = TempDir::new().unwrap();
    let config = gen_example(tmp.path());
    let args = ["run", "--config", &config, "--timesteps", "200"];

    run_ok(tmp.path(), &args);
    let out_dir = tmp.path().join("ex/run");
    let artifacts = [
        "outputs.json",
        "firing_report.json",
        "convergence.json",
        "energy_report.json",
        "config_echo.json",
    ];
    let first: Vec<Vec<u8>> =
        artifacts.iter().map(|f| std::fs::read(out_dir.join(f)).unwrap()).collect();

    let outputs = read_json(&out_dir.join("outputs.json"));
    assert_eq!(outputs["outputs"].as_array().unwrap().len(), 16);
    assert_eq!(outputs["timesteps"], 200);
    let echo = read_json(&out_dir.join("config_echo.json"));
    assert_eq!(echo["timesteps"], 200, "flag must override the config file");
    assert_eq!(echo["scheme"], "channel");

    run_ok(tmp.path(), &args);
    for (name, bytes) in artifacts.iter().zip(&first) {
        let again = std::fs::read(out_dir.join(name)).unwrap();
        assert_eq!(&again, bytes, "{name} changed across identical reruns");
    }

    // The echoed config alone must reproduce the run bit-for-bit.
    let echo_path = out_dir.join("config_echo.json").to_string_lossy().into_owned();
    run_ok(tmp.path(), &["run", "--config", &echo_path]);
    for (name, bytes) in artifacts.iter().zip(&first) {
        let again = std::fs::read(out_dir.join(name)).unwrap();
        assert_eq!(&again, bytes, "{name} not reproducible from its config echo");
    }
}

#[test]
fn a_single_timestep_is_a_valid_run() {
    let tmp = TempDir::new().unwrap();
    let config = gen_example(tmp.path());
    run_ok(tmp.path(), &["run", "--config", &config, "--timesteps", "1"]);

    let conv = read_json(&tmp.path().join("ex/run/convergence.json"));
    let points = conv["series"][0]["points"].as_array().unwrap();
    assert_eq!(points.len(), 1);
    assert_eq!(points[0]["t"], 1);
}

#[test]
fn convert_writes_a_loadable_normalized_model() {
    let tmp = TempDir::new().unwrap();
    let config = gen_example(tmp.path());
    run_ok(tmp.path(), &["convert", "--config", &config, "--scheme", "layer"]);

    let out_dir = tmp.path().join("ex/run");
    let net = spikeconv_core::netspec::load_model(
        &out_dir.join("normalized_model.json"),
        &out_dir.join("normalized_weights.bin"),
    )
    .expect("normalized model must round-trip through the loader");
    assert!(spikeconv_core::netspec::is_folded(&net));

    let summary = read_json(&out_dir.join("normalization.json"));
    assert_eq!(summary["scheme"], "layer");
    assert!(!summary["output_scale"].as_array().unwrap().is_empty());
}

#[test]
fn analyze_writes_profile_histograms_and_raster() {
    let tmp = TempDir::new().unwrap();
    let config = gen_example(tmp.path());
    run_ok(tmp.path(), &["analyze", "--config", &config, "--timesteps", "150"]);

    let out_dir = tmp.path().join("ex/run");
    let profile = read_json(&out_dir.join("channel_profile.json"));
    assert!(!profile["layers"].as_array().unwrap().is_empty());

    let hist = std::fs::read_to_string(out_dir.join("rate_histograms.csv")).unwrap();
    assert!(hist.starts_with("layer,bin_lo,bin_hi,count\n"));
    assert!(hist.lines().count() > 1, "histogram csv must have data rows");

    let raster = std::fs::read_to_string(out_dir.join("raster.csv")).unwrap();
    assert!(raster.starts_with("t,layer,neuron_flat_index,sign\n"));
}

#[test]
fn energy_report_carries_both_precisions_and_the_platform_table() {
    let tmp = TempDir::new().unwrap();
    let config = gen_example(tmp.path());
    run_ok(tmp.path(), &["energy", "--config", &config, "--timesteps", "100"]);

    let report = read_json(&tmp.path().join("ex/run/energy_report.json"));
    for key in ["per_op_fl32", "per_op_int32"] {
        assert!(report[key]["dnn_joules"].as_f64().unwrap() > 0.0);
        assert!(report[key]["snn_joules"].as_f64().unwrap() > 0.0);
    }
    assert_eq!(report["platform_reference"]["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn compare_report_equals_two_independent_single_scheme_runs() {
    let tmp = TempDir::new().unwrap();
    let config = gen_example(tmp.path());
    let t = "150";

    for scheme in ["layer", "channel"] {
        run_ok(
            tmp.path(),
            &[
                "run", "--config", &config, "--timesteps", t,
                "--scheme", scheme, "--output-dir", &format!("runs/{scheme}"),
            ],
        );
    }
    run_ok(
        tmp.path(),
        &["compare", "--config", &config, "--timesteps", t, "--output-dir", "runs/cmp"],
    );

    let layer = read_json(&tmp.path().join("runs/layer/convergence.json"));
    let channel = read_json(&tmp.path().join("runs/channel/convergence.json"));
    let cmp = read_json(&tmp.path().join("runs/cmp/convergence.json"));

    let series = cmp["series"].as_array().unwrap();
    assert_eq!(series.len(), 2);
    assert_eq!(series[0], layer["series"][0], "layer series must match its solo run");
    assert_eq!(series[1], channel["series"][0], "channel series must match its solo run");
}

// ── Exit codes ──────────────────────────────────────────────────────────────

#[test]
fn missing_calibration_dir_exits_2_and_names_the_path() {
    let tmp = TempDir::new().unwrap();
    let config = gen_example(tmp.path());
    let out = spikeconv(
        tmp.path(),
        &["calibrate", "--config", &config, "--calibration-dir", "/nonexistent/calib_xyz"],
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("/nonexistent/calib_xyz"),
        "error must name the missing path, got: {stderr}"
    );
}

#[test]
fn bad_inputs_exit_2() {
    let tmp = TempDir::new().unwrap();
    let config = gen_example(tmp.path());

    let cases: &[&[&str]] = &[
        &["run", "--config", &config, "--scheme", "banana"],
        &["run", "--config", &config, "--stat-mode", "p50"],
        &["run", "--config", &config, "--decode", "votes"],
        &["run", "--config", &config, "--timesteps", "0"],
        &["run", "--config", &config, "--alpha", "1.5"],
        &["run", "--config", &config, "--v-th", "0"],
        &["run", "--config", "no_such_config.json"],
        &["run"], // no config, no model
    ];
    for args in cases {
        let out = spikeconv(tmp.path(), args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "`spikeconv {}` should be a usage error, stderr: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr),
        );
    }
}

#[test]
fn malformed_calibration_tensors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let config = gen_example(tmp.path());
    std::fs::write(tmp.path().join("ex/calib/input_00.json"), "{not json").unwrap();
    let out = spikeconv(tmp.path(), &["calibrate", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("input_00.json"));
}
