use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use prc_core::metrics::{MemoryCapacityReport, NonlinearityReport};
use prc_core::physics_sim::{
    simulate_diode_dataset, simulate_esn_dataset, simulate_rc_circuit_dataset, DiodeCircuitParams,
    EsnParams, MultiplexWindows, RcCircuitParams, SimError, DEFAULT_CURRENT_RANGE,
};
use prc_core::pipeline::Pipeline;
use prc_core::targets::{
    generate_mackey_glass, generate_sawtooth_wave, generate_sine_wave, generate_square_wave,
    load_series, normalize_list, save_series, MackeyGlassParams, SignalSeries,
};
use prc_core::training::RcResults;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{LoadedConfig, TargetKind, TargetSection};
use crate::error::CliError;

pub const RESULTS_FILE: &str = "results.json";

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn load_input(path: &Path) -> Result<SignalSeries, CliError> {
    load_series(path).map_err(CliError::data)
}

fn build_target(
    t: &TargetSection,
    rows: usize,
    cfg: &LoadedConfig,
) -> Result<SignalSeries, CliError> {
    let length = t.length.unwrap_or(rows);
    let periods = t.num_periods.unwrap_or(0);
    let series = match t.kind {
        TargetKind::Square => generate_square_wave(length, periods),
        TargetKind::Sawtooth => generate_sawtooth_wave(length, periods),
        TargetKind::Sine => match t.points_per_period {
            Some(ppp) => generate_sine_wave(
                t.length.unwrap_or(0),
                t.num_periods.unwrap_or(rows / ppp.max(1)),
                Some(ppp),
            ),
            None => generate_sine_wave(length, periods, None),
        },
        TargetKind::MackeyGlass => generate_mackey_glass(&MackeyGlassParams {
            length,
            ..t.mackey_glass.clone().unwrap_or_default()
        }),
        TargetKind::File => {
            let file = t.file.as_ref().expect("validated");
            return load_input(&cfg.resolve(file)).map(|s| maybe_normalize(s, t.normalize));
        }
    }
    .map_err(|e| CliError::Validation(format!("target: {e}")))?;
    Ok(maybe_normalize(series, t.normalize))
}

fn maybe_normalize(s: SignalSeries, normalize: bool) -> SignalSeries {
    if normalize {
        normalize_list(&s)
    } else {
        s
    }
}

fn predictions_csv(results_y: &[f64], pred: &[f64], first_index: usize) -> String {
    let mut out = String::from("index,target,prediction\n");
    for (k, (y, p)) in results_y.iter().zip(pred).enumerate() {
        writeln!(out, "{},{y},{p}", first_index + k).expect("writing to a String");
    }
    out
}

fn weights_csv(r: &RcResults, node_labels: &[String]) -> String {
    let mut out = String::from("name,weight\n");
    writeln!(out, "intercept,{}", r.readout.intercept).expect("writing to a String");
    for (label, w) in node_labels.iter().zip(r.readout.weights.iter()) {
        writeln!(out, "{label},{w}").expect("writing to a String");
    }
    out
}

fn compute_metrics(
    pipeline: &mut Pipeline,
    cfg: &LoadedConfig,
) -> Result<(NonlinearityReport, MemoryCapacityReport), CliError> {
    let input = load_input(&cfg.metrics_input())?;
    pipeline.define_input(input).map_err(CliError::data)?;
    let m = &cfg.config.metrics;
    let nl = pipeline.get_non_linearity().map_err(CliError::data)?;
    let lmc = pipeline
        .get_linear_memory_capacity(m.kmax, m.remove_auto_correlation)
        .map_err(CliError::data)?;
    Ok((nl, lmc))
}

fn open_pipeline(cfg: &LoadedConfig) -> Result<Pipeline, CliError> {
    let c = &cfg.config;
    Pipeline::new(&cfg.data_dir(), &c.data.prefix, &c.process).map_err(CliError::data)
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Runs the configured pipeline and writes results into `out_dir`.
pub fn run(config_path: &Path, out_dir: &Path) -> Result<Value, CliError> {
    let cfg = LoadedConfig::load(config_path)?;
    let rc = cfg.validate_run()?;
    let c = &cfg.config;

    let mut pipeline = open_pipeline(&cfg)?;
    let target = build_target(c.target.as_ref().expect("validated"), pipeline.get_df_length(), &cfg)?;
    pipeline.define_target(target).map_err(CliError::data)?;
    pipeline.run(&rc).map_err(CliError::data)?;
    let metrics = if c.metrics.enabled {
        Some(compute_metrics(&mut pipeline, &cfg)?)
    } else {
        None
    };
    let r = pipeline.get_rc_results().map_err(CliError::data)?;

    let mut doc = Map::new();
    doc.insert("train_error".into(), json!(r.train_error));
    doc.insert("test_error".into(), json!(r.test_error));
    if let Some((nl, lmc)) = &metrics {
        doc.insert("nl".into(), json!(nl.mean));
        doc.insert("lmc_total".into(), json!(lmc.total));
        doc.insert("lmc_per_lag".into(), json!(lmc.per_lag));
    }
    doc.insert(
        "config".into(),
        serde_json::to_value(c).expect("config serializes"),
    );
    let doc = Value::Object(doc);

    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out_dir.display())))?;
    write_file(&out_dir.join(RESULTS_FILE), &to_json(&doc))?;
    // Indices refer to the target series, so they start at tau.
    let n_train = r.y_train.len();
    write_file(
        &out_dir.join("train.csv"),
        &predictions_csv(r.y_train.as_slice(), r.train_pred.as_slice(), rc.tau),
    )?;
    write_file(
        &out_dir.join("test.csv"),
        &predictions_csv(r.y_test.as_slice(), r.test_pred.as_slice(), rc.tau + n_train),
    )?;
    write_file(
        &out_dir.join("weights.csv"),
        &weights_csv(r, &pipeline.matrix().node_labels),
    )?;
    log::info!("wrote results to {}", out_dir.display());
    Ok(doc)
}

/// Nonlinearity and memory capacity of the configured dataset.
pub fn metrics(config_path: &Path) -> Result<Value, CliError> {
    let cfg = LoadedConfig::load(config_path)?;
    cfg.validate_common()?;
    let mut pipeline = open_pipeline(&cfg)?;
    let (nl, lmc) = compute_metrics(&mut pipeline, &cfg)?;
    Ok(json!({
        "nl": nl.mean,
        "nl_per_channel": nl.per_channel,
        "lmc_total": lmc.total,
        "lmc_per_lag": lmc.per_lag,
        "kmax": lmc.kmax,
        "remove_auto_correlation": lmc.auto_correlation_removed,
    }))
}

pub fn write_json(value: &Value, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => write_file(path, &to_json(value)),
        None => {
            print!("{}", to_json(value));
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SignalKind {
    Square,
    Sawtooth,
    Sine,
    MackeyGlass,
}

#[derive(Debug, Clone, clap::Args)]
pub struct TargetArgs {
    #[arg(value_enum)]
    pub kind: SignalKind,
    #[arg(long, default_value_t = 500)]
    pub length: usize,
    #[arg(long, default_value_t = 10)]
    pub periods: usize,
    /// Sine only: sets the length to periods * points-per-period.
    #[arg(long)]
    pub points_per_period: Option<usize>,
    /// Rescale to [0, 1].
    #[arg(long)]
    pub normalize: bool,
    /// Mackey-Glass only.
    #[arg(long)]
    pub x0: Option<f64>,
    /// Mackey-Glass only: samples discarded before output.
    #[arg(long)]
    pub washout: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn generate_signal(a: &TargetArgs) -> Result<SignalSeries, CliError> {
    let series = match a.kind {
        SignalKind::Square => generate_square_wave(a.length, a.periods),
        SignalKind::Sawtooth => generate_sawtooth_wave(a.length, a.periods),
        SignalKind::Sine => match a.points_per_period {
            Some(ppp) => generate_sine_wave(0, a.periods, Some(ppp)),
            None => generate_sine_wave(a.length, a.periods, None),
        },
        SignalKind::MackeyGlass => {
            let d = MackeyGlassParams::default();
            generate_mackey_glass(&MackeyGlassParams {
                length: a.length,
                x0: a.x0.unwrap_or(d.x0),
                washout: a.washout.unwrap_or(d.washout),
                ..d
            })
        }
    }
    .map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(maybe_normalize(series, a.normalize))
}

pub fn targets(a: &TargetArgs) -> Result<(), CliError> {
    let s = generate_signal(a)?;
    save_series(&a.out, &s).map_err(CliError::data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum System {
    Diode,
    RcCircuit,
    Esn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum InputKind {
    Sine,
    MackeyGlass,
    File,
}

#[derive(Debug, Clone, clap::Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub system: System,
    #[arg(long, value_enum, default_value = "sine")]
    pub input: InputKind,
    /// Series to drive the system with when --input file.
    #[arg(long)]
    pub input_file: Option<PathBuf>,
    /// Input samples, one scan each.
    #[arg(long, default_value_t = 500)]
    pub length: usize,
    /// Sine periods over the whole input.
    #[arg(long, default_value_t = 10)]
    pub periods: usize,
    /// Operating windows (virtual nodes) of the circuits.
    #[arg(long, default_value_t = 20)]
    pub windows: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Capacitor circuit: farads.
    #[arg(long)]
    pub capacitance: Option<f64>,
    /// Capacitor circuit: integration step in seconds.
    #[arg(long)]
    pub timestep: Option<f64>,
    /// Capacitor circuit: integration steps per window.
    #[arg(long)]
    pub steps_per_window: Option<usize>,
    /// Network: number of nodes.
    #[arg(long, default_value_t = 50)]
    pub nodes: usize,
    #[arg(long, default_value_t = 0.9)]
    pub spectral_radius: f64,
    #[arg(long, default_value_t = 1.0)]
    pub input_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    pub leak_rate: f64,
}

fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::InvalidParams(_)
        | SimError::UnstableTimestep { .. }
        | SimError::EmptyInput => CliError::Validation(e.to_string()),
        other => CliError::data(other),
    }
}

/// Input series of a simulation. Mackey-Glass input is rescaled to [0, 1].
pub fn simulation_input(a: &SimulateArgs) -> Result<Vec<f64>, CliError> {
    let s = match a.input {
        InputKind::Sine => generate_sine_wave(a.length, a.periods, None)
            .map_err(|e| CliError::Validation(e.to_string()))?,
        InputKind::MackeyGlass => normalize_list(
            &generate_mackey_glass(&MackeyGlassParams {
                length: a.length,
                ..Default::default()
            })
            .map_err(|e| CliError::Validation(e.to_string()))?,
        ),
        InputKind::File => {
            let path = a.input_file.as_ref().ok_or_else(|| {
                CliError::Validation("--input-file is required with --input file".into())
            })?;
            load_input(path)?
        }
    };
    Ok(s.values)
}

pub fn simulate(a: &SimulateArgs) -> Result<(usize, usize), CliError> {
    let u = simulation_input(a)?;
    let m = match a.system {
        System::Diode | System::RcCircuit => {
            let w = MultiplexWindows::random(a.windows, a.seed, DEFAULT_CURRENT_RANGE)
                .map_err(sim_error)?;
            if a.system == System::Diode {
                simulate_diode_dataset(&u, &w, &DiodeCircuitParams::default(), &a.out)
            } else {
                let d = RcCircuitParams::default();
                let p = RcCircuitParams {
                    capacitance: a.capacitance.unwrap_or(d.capacitance),
                    timestep: a.timestep.unwrap_or(d.timestep),
                    steps_per_window: a.steps_per_window.unwrap_or(d.steps_per_window),
                    ..d
                };
                simulate_rc_circuit_dataset(&u, &w, &p, &a.out)
            }
        }
        System::Esn => {
            let p = EsnParams {
                n_nodes: a.nodes,
                spectral_radius: a.spectral_radius,
                input_scale: a.input_scale,
                leak_rate: a.leak_rate,
                seed: a.seed,
            };
            simulate_esn_dataset(&u, &p, &a.out)
        }
    }
    .map_err(sim_error)?;
    Ok((m.nrows(), m.ncols()))
}
