//! Command-line front end wiring the conversion pipeline end to end:
//! calibrate → convert → simulate → decode → analyze → energy.
//!
//! A JSON run-configuration file is the single source of truth; command-line
//! flags override individual fields. Every artifact a run produces is written
//! into the configured output directory together with an echo of the
//! effective configuration, so any run is reproducible from its output
//! directory alone.
//!
//! Exit codes: 0 on success, 1 on internal pipeline errors, 2 on usage or
//! input errors (bad flags, missing or malformed files).

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use spikeconv_core::analytics::{
    channel_activation_profile, convergence_curves, firing_report, firing_rates,
    rate_histogram, sample_raster, ConvergenceReport, DEFAULT_RASTER_NEURONS,
    DEFAULT_RATE_BIN_WIDTH,
};
use spikeconv_core::calibrate::{
    collect_stats, load_stats, normalize, save_stats, ActivationStats, NormScheme,
    NormalizedNetwork, StatMode,
};
use spikeconv_core::decode::{decode, denormalize, DecodeScheme};
use spikeconv_core::energy::{
    count_dnn_ops, count_snn_ops, op_energy, reference_comparison, EnergyModel,
    OpEnergyReport, PlatformEnergyReport, Precision,
};
use spikeconv_core::fixtures::{example_network, random_inputs, rng};
use spikeconv_core::netspec::{fold_batchnorm, load_model, save_model, NetworkSpec};
use spikeconv_core::spikesim::{
    convert, run as simulate, trace_to_csv, ConvertOptions, SimError, SimulationState,
    SpikingNetwork,
};
use spikeconv_core::Tensor;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

/// Output error still counted as "converged" in convergence reports.
const CONVERGENCE_TARGET_MAE: f64 = 0.02;
/// Number of geometrically spaced convergence checkpoints up to `timesteps`.
const CONVERGENCE_POINTS: u32 = 24;

// ── Errors and exit codes ───────────────────────────────────────────────────

/// Marker for usage/input errors (exit code 2, as opposed to 1).
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: String) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg))
}

fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|c| c.downcast_ref::<UsageError>().is_some()) {
        2
    } else {
        1
    }
}

// ── Run configuration ───────────────────────────────────────────────────────

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_scheme() -> NormScheme {
    NormScheme::Channel
}
fn default_stat_mode() -> StatMode {
    StatMode::Max
}
fn default_v_th() -> f32 {
    1.0
}
fn default_timesteps() -> u32 {
    2_000
}
fn default_decode() -> DecodeScheme {
    DecodeScheme::VMem
}
fn default_signed() -> bool {
    true
}

/// One experiment, fully described. Serialized back out as `config_echo.json`
/// so a run can be reproduced from its artifacts.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    /// Model manifest path.
    #[serde(default)]
    model: PathBuf,
    /// Weight blob path; defaults to the manifest path with a `bin` extension.
    #[serde(default)]
    weights: Option<PathBuf>,
    /// Directory of input tensors (`*.json`), read in file-name order.
    #[serde(default)]
    calibration_dir: PathBuf,
    #[serde(default = "default_output_dir")]
    output_dir: PathBuf,
    #[serde(default = "default_scheme")]
    scheme: NormScheme,
    #[serde(default = "default_stat_mode")]
    stat_mode: StatMode,
    /// Overrides the model's negative-slope parameter when set.
    #[serde(default)]
    alpha: Option<f32>,
    #[serde(default = "default_v_th")]
    v_th: f32,
    #[serde(default = "default_timesteps")]
    timesteps: u32,
    #[serde(default = "default_decode")]
    decode: DecodeScheme,
    /// Signed neurons (two-sided thresholds). Turning this off clips negative
    /// activations to zero in the spiking domain.
    #[serde(default = "default_signed")]
    signed: bool,
    #[serde(default)]
    seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: PathBuf::new(),
            weights: None,
            calibration_dir: PathBuf::new(),
            output_dir: default_output_dir(),
            scheme: default_scheme(),
            stat_mode: default_stat_mode(),
            alpha: None,
            v_th: default_v_th(),
            timesteps: default_timesteps(),
            decode: default_decode(),
            signed: default_signed(),
            seed: 0,
        }
    }
}

impl RunConfig {
    fn weights_path(&self) -> PathBuf {
        self.weights.clone().unwrap_or_else(|| self.model.with_extension("bin"))
    }

    fn validate(&self) -> Result<()> {
        if self.model.as_os_str().is_empty() {
            return Err(usage(
                "no model path: set \"model\" in the config or pass --model".into(),
            ));
        }
        if self.calibration_dir.as_os_str().is_empty() {
            return Err(usage(
                "no calibration directory: set \"calibration_dir\" or pass --calibration-dir"
                    .into(),
            ));
        }
        if self.timesteps < 1 {
            return Err(usage("timesteps must be >= 1".into()));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a <= 1.0) {
                return Err(usage(format!("alpha must be in (0, 1], got {a}")));
            }
        }
        if !(self.v_th > 0.0 && self.v_th.is_finite()) {
            return Err(usage(format!("v_th must be positive and finite, got {}", self.v_th)));
        }
        Ok(())
    }
}

// ── Command line ────────────────────────────────────────────────────────────

#[derive(Parser)]
#[command(
    name = "spikeconv",
    version,
    about = "Convert real-valued networks to spiking ones, simulate, and report"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a small deterministic model, calibration inputs, and a starter
    /// config file.
    GenExample(GenExampleArgs),
    /// Measure activation statistics over the calibration inputs and write
    /// `stats.json`.
    Calibrate(ConfigArgs),
    /// Rescale the model for spiking and write the normalized manifest,
    /// weight blob, and output scales.
    Convert(ConfigArgs),
    /// Simulate every calibration input, decode, and write outputs plus
    /// firing, convergence, and energy reports.
    Run(ConfigArgs),
    /// Write channel utilization profiles, rate histograms, and a spike
    /// raster for the first input.
    Analyze(ConfigArgs),
    /// Write operation counts and platform energy estimates.
    Energy(ConfigArgs),
    /// Convergence comparison of the per-layer and per-channel schemes in a
    /// single report.
    Compare(ConfigArgs),
}

#[derive(Args)]
struct GenExampleArgs {
    /// Directory to create the example in.
    #[arg(long, default_value = "example")]
    output_dir: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

/// Configuration source plus per-field overrides.
#[derive(Args)]
struct ConfigArgs {
    /// Run configuration file (JSON). Flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    calibration_dir: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Normalization scheme: "layer" or "channel".
    #[arg(long)]
    scheme: Option<String>,
    /// Activation statistic: "max" or "p99.9".
    #[arg(long)]
    stat_mode: Option<String>,
    #[arg(long)]
    alpha: Option<f32>,
    #[arg(long)]
    v_th: Option<f32>,
    #[arg(long)]
    timesteps: Option<u32>,
    /// Decoding scheme: "spike_count" or "v_mem".
    #[arg(long)]
    decode: Option<String>,
    /// Signed neurons on/off: "true" or "false".
    #[arg(long)]
    signed: Option<bool>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    usage(format!("cannot read config {}: {e}", path.display()))
                })?;
                serde_json::from_str::<RunConfig>(&text).map_err(|e| {
                    usage(format!("malformed config {}: {e}", path.display()))
                })?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = &self.model {
            cfg.model = v.clone();
        }
        if let Some(v) = &self.weights {
            cfg.weights = Some(v.clone());
        }
        if let Some(v) = &self.calibration_dir {
            cfg.calibration_dir = v.clone();
        }
        if let Some(v) = &self.output_dir {
            cfg.output_dir = v.clone();
        }
        if let Some(v) = &self.scheme {
            cfg.scheme = parse_scheme(v)?;
        }
        if let Some(v) = &self.stat_mode {
            cfg.stat_mode = parse_stat_mode(v)?;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = Some(v);
        }
        if let Some(v) = self.v_th {
            cfg.v_th = v;
        }
        if let Some(v) = self.timesteps {
            cfg.timesteps = v;
        }
        if let Some(v) = &self.decode {
            cfg.decode = parse_decode(v)?;
        }
        if let Some(v) = self.signed {
            cfg.signed = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_scheme(s: &str) -> Result<NormScheme> {
    match s {
        "layer" => Ok(NormScheme::Layer),
        "channel" => Ok(NormScheme::Channel),
        other => Err(usage(format!("unknown scheme \"{other}\" (expected layer|channel)"))),
    }
}

fn parse_stat_mode(s: &str) -> Result<StatMode> {
    match s {
        "max" => Ok(StatMode::Max),
        "p99.9" => Ok(StatMode::P999),
        other => Err(usage(format!("unknown stat mode \"{other}\" (expected max|p99.9)"))),
    }
}

fn parse_decode(s: &str) -> Result<DecodeScheme> {
    match s {
        "spike_count" => Ok(DecodeScheme::SpikeCount),
        "v_mem" => Ok(DecodeScheme::VMem),
        other => {
            Err(usage(format!("unknown decode scheme \"{other}\" (expected spike_count|v_mem)")))
        }
    }
}

fn scheme_label(scheme: NormScheme) -> &'static str {
    match scheme {
        NormScheme::Layer => "layer",
        NormScheme::Channel => "channel",
    }
}

// ── Shared pipeline steps ───────────────────────────────────────────────────

/// Loads the model, folds batch normalization, and applies the configured
/// slope override.
fn load_effective_net(cfg: &RunConfig) -> Result<NetworkSpec> {
    let weights = cfg.weights_path();
    let net = load_model(&cfg.model, &weights).map_err(|e| {
        usage(format!(
            "cannot load model {} (+ weights {}): {e}",
            cfg.model.display(),
            weights.display()
        ))
    })?;
    let mut net = fold_batchnorm(&net);
    if let Some(alpha) = cfg.alpha {
        net.leaky_slope = alpha;
    }
    Ok(net)
}

/// Reads every `*.json` tensor in the calibration directory, in file-name
/// order.
fn load_inputs(dir: &Path) -> Result<Vec<(String, Tensor)>> {
    if !dir.is_dir() {
        return Err(usage(format!("calibration dir {} does not exist", dir.display())));
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| usage(format!("cannot read calibration dir {}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(usage(format!(
            "calibration dir {} contains no .json input tensors",
            dir.display()
        )));
    }
    let mut inputs = Vec::with_capacity(paths.len());
    for path in paths {
        let text = fs::read_to_string(&path)
            .map_err(|e| usage(format!("cannot read input {}: {e}", path.display())))?;
        let tensor: Tensor = serde_json::from_str(&text)
            .map_err(|e| usage(format!("malformed input tensor {}: {e}", path.display())))?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        inputs.push((name, tensor));
    }
    Ok(inputs)
}

/// Uses `<output_dir>/stats.json` when present (written by `calibrate`),
/// otherwise measures statistics inline.
fn obtain_stats(
    cfg: &RunConfig,
    net: &NetworkSpec,
    inputs: &[(String, Tensor)],
) -> Result<ActivationStats> {
    let path = cfg.output_dir.join("stats.json");
    if path.is_file() {
        return load_stats(&path)
            .map_err(|e| usage(format!("cannot load stats {}: {e}", path.display())));
    }
    let tensors: Vec<Tensor> = inputs.iter().map(|(_, t)| t.clone()).collect();
    collect_stats(net, &tensors, cfg.stat_mode)
        .map_err(|e| usage(format!("calibration failed: {e}")))
}

fn convert_options(cfg: &RunConfig) -> ConvertOptions {
    ConvertOptions { v_th_pos: cfg.v_th, signed: cfg.signed, final_layer_fires: true }
}

/// Simulation errors caused by the supplied input data are usage errors;
/// everything else is internal.
fn map_sim_error(e: SimError) -> anyhow::Error {
    match &e {
        SimError::InputOutOfRange { .. } | SimError::InputShape { .. } => usage(e.to_string()),
        _ => anyhow::Error::new(e),
    }
}

/// Geometrically spaced checkpoints `1 <= t <= t_max`, always ending at
/// `t_max`.
fn checkpoint_grid(t_max: u32) -> Vec<u32> {
    let mut grid: Vec<u32> = Vec::new();
    for i in 1..=CONVERGENCE_POINTS {
        let frac = i as f64 / CONVERGENCE_POINTS as f64;
        let t = (t_max as f64).powf(frac).round() as u32;
        let t = t.clamp(1, t_max);
        if grid.last() != Some(&t) {
            grid.push(t);
        }
    }
    grid
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)
        .with_context(|| format!("serializing {name}"))?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn ensure_output_dir(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("creating output dir {}", cfg.output_dir.display()))
}

// ── Report shapes ───────────────────────────────────────────────────────────

#[derive(Serialize)]
struct OutputRecord {
    input: String,
    decoded: Tensor,
}

#[derive(Serialize)]
struct OutputsArtifact {
    scheme: DecodeScheme,
    timesteps: u32,
    outputs: Vec<OutputRecord>,
}

#[derive(Serialize)]
struct EnergyArtifact {
    per_op_fl32: OpEnergyReport,
    per_op_int32: OpEnergyReport,
    platform_reference: PlatformEnergyReport,
}

fn energy_artifact(net: &NetworkSpec, snn: &SpikingNetwork, state: &SimulationState) -> Result<EnergyArtifact> {
    let dnn_ops = count_dnn_ops(net)?;
    let snn_ops = count_snn_ops(snn, state)?;
    Ok(EnergyArtifact {
        per_op_fl32: op_energy(dnn_ops, snn_ops, EnergyModel::for_precision(Precision::Fl32)),
        per_op_int32: op_energy(dnn_ops, snn_ops, EnergyModel::for_precision(Precision::Int32)),
        platform_reference: reference_comparison(),
    })
}

// ── Commands ────────────────────────────────────────────────────────────────

fn cmd_gen_example(args: &GenExampleArgs) -> Result<()> {
    let dir = &args.output_dir;
    let calib_dir = dir.join("calib");
    fs::create_dir_all(&calib_dir)
        .with_context(|| format!("creating {}", calib_dir.display()))?;

    let net = example_network(args.seed);
    let manifest = dir.join("model.json");
    let blob = dir.join("weights.bin");
    save_model(&net, &manifest, &blob)?;

    let mut r = rng(args.seed);
    for (i, input) in random_inputs(&mut r, net.input_shape, 16).into_iter().enumerate() {
        let path = calib_dir.join(format!("input_{i:02}.json"));
        let mut text = serde_json::to_string_pretty(&input)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }

    let cwd = std::env::current_dir().context("resolving working directory")?;
    let abs = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { cwd.join(p) };
    let cfg = RunConfig {
        model: abs(&manifest),
        weights: Some(abs(&blob)),
        calibration_dir: abs(&calib_dir),
        output_dir: abs(&dir.join("run")),
        seed: args.seed,
        ..RunConfig::default()
    };
    write_json(dir, "config.json", &cfg)?;

    println!("example written to {}", dir.display());
    println!("next: spikeconv run --config {}", dir.join("config.json").display());
    Ok(())
}

fn cmd_calibrate(cfg: &RunConfig) -> Result<()> {
    let net = load_effective_net(cfg)?;
    let inputs = load_inputs(&cfg.calibration_dir)?;
    let tensors: Vec<Tensor> = inputs.iter().map(|(_, t)| t.clone()).collect();
    let stats = collect_stats(&net, &tensors, cfg.stat_mode)
        .map_err(|e| usage(format!("calibration failed: {e}")))?;
    ensure_output_dir(cfg)?;
    let path = cfg.output_dir.join("stats.json");
    save_stats(&stats, &path).with_context(|| format!("writing {}", path.display()))?;
    println!("stats written to {}", path.display());
    Ok(())
}

fn cmd_convert(cfg: &RunConfig) -> Result<()> {
    let net = load_effective_net(cfg)?;
    let inputs = load_inputs(&cfg.calibration_dir)?;
    let stats = obtain_stats(cfg, &net, &inputs)?;
    let norm = normalize(&net, &stats, cfg.scheme)
        .map_err(|e| usage(format!("normalization failed: {e}")))?;
    ensure_output_dir(cfg)?;
    let manifest = cfg.output_dir.join("normalized_model.json");
    let blob = cfg.output_dir.join("normalized_weights.bin");
    save_model(&norm.net, &manifest, &blob)?;

    #[derive(Serialize)]
    struct NormalizationSummary<'a> {
        scheme: NormScheme,
        output_scale: &'a [f32],
    }
    write_json(
        &cfg.output_dir,
        "normalization.json",
        &NormalizationSummary { scheme: norm.scheme, output_scale: &norm.output_scale },
    )?;
    println!("normalized model written to {}", manifest.display());
    Ok(())
}

/// Shared by `run` and `compare`: loads everything up to normalized networks.
struct Prepared {
    net: NetworkSpec,
    inputs: Vec<(String, Tensor)>,
    stats: ActivationStats,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let net = load_effective_net(cfg)?;
    let inputs = load_inputs(&cfg.calibration_dir)?;
    let stats = obtain_stats(cfg, &net, &inputs)?;
    Ok(Prepared { net, inputs, stats })
}

fn convergence_report(
    cfg: &RunConfig,
    prepared: &Prepared,
    candidates: &[(String, &NormalizedNetwork)],
) -> Result<ConvergenceReport> {
    let tensors: Vec<Tensor> = prepared.inputs.iter().map(|(_, t)| t.clone()).collect();
    convergence_curves(
        &prepared.net,
        candidates,
        convert_options(cfg),
        &tensors,
        &checkpoint_grid(cfg.timesteps),
        cfg.decode,
        CONVERGENCE_TARGET_MAE,
    )
    .context("building convergence report")
}

fn cmd_run(cfg: &RunConfig) -> Result<()> {
    let prepared = prepare(cfg)?;
    let norm = normalize(&prepared.net, &prepared.stats, cfg.scheme)
        .map_err(|e| usage(format!("normalization failed: {e}")))?;
    let snn = convert(&norm, convert_options(cfg)).context("converting to spiking form")?;

    ensure_output_dir(cfg)?;
    let mut outputs = Vec::with_capacity(prepared.inputs.len());
    let mut first_state: Option<SimulationState> = None;
    for (name, input) in &prepared.inputs {
        let state =
            simulate(&snn, input, cfg.timesteps, false).map_err(map_sim_error)?;
        let decoded = decode(&state, &snn, cfg.decode).context("decoding")?;
        let denorm = denormalize(&decoded, &snn);
        outputs.push(OutputRecord { input: name.clone(), decoded: denorm.values });
        if first_state.is_none() {
            first_state = Some(state);
        }
    }
    let first_state = first_state.expect("at least one input");

    write_json(
        &cfg.output_dir,
        "outputs.json",
        &OutputsArtifact { scheme: cfg.decode, timesteps: cfg.timesteps, outputs },
    )?;
    write_json(
        &cfg.output_dir,
        "firing_report.json",
        &firing_report(&first_state, DEFAULT_RATE_BIN_WIDTH).context("firing report")?,
    )?;
    let label = scheme_label(cfg.scheme).to_string();
    write_json(
        &cfg.output_dir,
        "convergence.json",
        &convergence_report(cfg, &prepared, &[(label, &norm)])?,
    )?;
    write_json(
        &cfg.output_dir,
        "energy_report.json",
        &energy_artifact(&prepared.net, &snn, &first_state)?,
    )?;
    write_json(&cfg.output_dir, "config_echo.json", cfg)?;
    println!(
        "run complete: {} inputs, {} ticks; artifacts in {}",
        prepared.inputs.len(),
        cfg.timesteps,
        cfg.output_dir.display()
    );
    Ok(())
}

fn cmd_compare(cfg: &RunConfig) -> Result<()> {
    let prepared = prepare(cfg)?;
    let layer = normalize(&prepared.net, &prepared.stats, NormScheme::Layer)
        .map_err(|e| usage(format!("normalization failed: {e}")))?;
    let channel = normalize(&prepared.net, &prepared.stats, NormScheme::Channel)
        .map_err(|e| usage(format!("normalization failed: {e}")))?;
    let candidates =
        [("layer".to_string(), &layer), ("channel".to_string(), &channel)];

    ensure_output_dir(cfg)?;
    write_json(
        &cfg.output_dir,
        "convergence.json",
        &convergence_report(cfg, &prepared, &candidates)?,
    )?;
    write_json(&cfg.output_dir, "config_echo.json", cfg)?;
    println!("comparison written to {}", cfg.output_dir.join("convergence.json").display());
    Ok(())
}

fn cmd_analyze(cfg: &RunConfig) -> Result<()> {
    let prepared = prepare(cfg)?;
    let norm = normalize(&prepared.net, &prepared.stats, cfg.scheme)
        .map_err(|e| usage(format!("normalization failed: {e}")))?;
    let snn = convert(&norm, convert_options(cfg)).context("converting to spiking form")?;
    let (_, input) = &prepared.inputs[0];
    let state = simulate(&snn, input, cfg.timesteps, true).map_err(map_sim_error)?;

    ensure_output_dir(cfg)?;
    write_json(
        &cfg.output_dir,
        "channel_profile.json",
        &channel_activation_profile(&prepared.stats, cfg.scheme),
    )?;

    let rates = firing_rates(&state).context("firing rates")?;
    let mut csv = String::from("layer,bin_lo,bin_hi,count\n");
    for (idx, lr) in rates.iter().enumerate() {
        let hist = rate_histogram(&lr.activity, DEFAULT_RATE_BIN_WIDTH);
        for (b, count) in hist.counts.iter().enumerate() {
            if *count > 0 {
                csv.push_str(&format!(
                    "{idx},{},{},{count}\n",
                    b as f32 * hist.bin_width,
                    (b + 1) as f32 * hist.bin_width,
                ));
            }
        }
    }
    let hist_path = cfg.output_dir.join("rate_histograms.csv");
    fs::write(&hist_path, csv).with_context(|| format!("writing {}", hist_path.display()))?;

    let events = sample_raster(&state, 1, 0, DEFAULT_RASTER_NEURONS).context("raster")?;
    let raster_path = cfg.output_dir.join("raster.csv");
    fs::write(&raster_path, trace_to_csv(&events))
        .with_context(|| format!("writing {}", raster_path.display()))?;

    println!("analysis written to {}", cfg.output_dir.display());
    Ok(())
}

fn cmd_energy(cfg: &RunConfig) -> Result<()> {
    let prepared = prepare(cfg)?;
    let norm = normalize(&prepared.net, &prepared.stats, cfg.scheme)
        .map_err(|e| usage(format!("normalization failed: {e}")))?;
    let snn = convert(&norm, convert_options(cfg)).context("converting to spiking form")?;
    let (_, input) = &prepared.inputs[0];
    let state = simulate(&snn, input, cfg.timesteps, false).map_err(map_sim_error)?;

    ensure_output_dir(cfg)?;
    let path = write_json(
        &cfg.output_dir,
        "energy_report.json",
        &energy_artifact(&prepared.net, &snn, &state)?,
    )?;
    println!("energy report written to {}", path.display());
    Ok(())
}

// ── Entry point ─────────────────────────────────────────────────────────────

fn dispatch(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::GenExample(args) => cmd_gen_example(args),
        Command::Calibrate(args) => cmd_calibrate(&args.resolve()?),
        Command::Convert(args) => cmd_convert(&args.resolve()?),
        Command::Run(args) => cmd_run(&args.resolve()?),
        Command::Analyze(args) => cmd_analyze(&args.resolve()?),
        Command::Energy(args) => cmd_energy(&args.resolve()?),
        Command::Compare(args) => cmd_compare(&args.resolve()?),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = dispatch(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code(&err));
    }
}
