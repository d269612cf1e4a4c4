//! Subcommand dispatch.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use sysid_core::bounds::{notation_quantities, regime_error_bound};
use sysid_core::experiments::{
    concentration_suite, inconsistency_experiment, run_rate_sweep, spectrum_growth_experiment,
    structure_checks, TrialRecord,
};
use sysid_core::matrix::Mat;
use sysid_core::ols::ols_estimate;
use sysid_core::sim::{simulate, simulate_scaled, SystemSpec, Trajectory};
use sysid_core::{Error, Result};

use crate::config::{parse_config, ConfigFile, DEFAULT_DELTA};
use crate::output::{matrix_to_json, write_outputs, Summary};
use crate::plot::{PlotSpec, Scale};

#[derive(Debug, Parser)]
#[command(
    name = "sysid",
    version,
    about = "Finite-time identification lab for linear dynamical systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentKind {
    Rate,
    Inconsistency,
    Spectrum,
    Concentration,
    Structure,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a trajectory and write it as CSV + JSON sidecar.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        quiet: bool,
    },
    /// OLS-estimate the dynamics from a simulated trajectory directory.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
    /// Evaluate the notation table and the regime error bound.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        quiet: bool,
    },
    /// Run a Monte Carlo experiment.
    Experiment {
        #[arg(value_enum)]
        kind: ExperimentKind,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        quiet: bool,
    },
}

/// Run a parsed command; maps every failure to the exit-code contract.
pub fn run_command(cli: Cli) -> i32 {
    let (result, quiet) = match cli.command {
        Command::Simulate { config, out, seed, quiet } => (cmd_simulate(&config, &out, seed), quiet),
        Command::Estimate { config, out, quiet } => (cmd_estimate(&config, &out), quiet),
        Command::Bounds { config, out, delta, quiet } => (cmd_bounds(&config, &out, delta), quiet),
        Command::Experiment { kind, config, out, seed, trials, delta, quiet } => {
            (cmd_experiment(kind, &config, &out, seed, trials, delta), quiet)
        }
    };
    match result {
        Ok(msg) => {
            if !quiet {
                println!("{msg}");
            }
            crate::exit::OK
        }
        Err(err) => {
            eprintln!("error: {err}");
            crate::exit_code_for(&err)
        }
    }
}

fn base_dir(config_path: &Path) -> PathBuf {
    config_path.parent().unwrap_or(Path::new(".")).to_path_buf()
}

fn explicit_system(cfg: &ConfigFile, base: &Path) -> Result<SystemSpec> {
    cfg.build_system(base)?.build()
}

// ---- simulate ----------------------------------------------------------------

fn write_trajectory(dir: &Path, traj: &Trajectory, extra: serde_json::Value) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let d = traj.dim();
    let p = traj.inputs.as_ref().map_or(0, |u| u.ncols());

    // states (+inputs): header t,x1..xd[,u1..up]; inputs blank at t = T
    let mut csv = String::from("t");
    for j in 1..=d {
        csv.push_str(&format!(",x{j}"));
    }
    for j in 1..=p {
        csv.push_str(&format!(",u{j}"));
    }
    csv.push('\n');
    for t in 0..=traj.steps() {
        csv.push_str(&format!("{t}"));
        for j in 0..d {
            csv.push_str(&format!(",{}", traj.states[(t, j)]));
        }
        if let Some(u) = traj.inputs.as_ref() {
            for j in 0..p {
                if t < traj.steps() {
                    csv.push_str(&format!(",{}", u[(t, j)]));
                } else {
                    csv.push(',');
                }
            }
        }
        csv.push('\n');
    }
    std::fs::write(dir.join("trajectory.csv"), csv)?;

    // companion noise CSV: rows are η_1..η_T
    let mut ncsv = String::from("t");
    for j in 1..=d {
        ncsv.push_str(&format!(",e{j}"));
    }
    ncsv.push('\n');
    for t in 0..traj.steps() {
        ncsv.push_str(&format!("{}", t + 1));
        for j in 0..d {
            ncsv.push_str(&format!(",{}", traj.noises[(t, j)]));
        }
        ncsv.push('\n');
    }
    std::fs::write(dir.join("noises.csv"), ncsv)?;

    let meta = json!({
        "seed": traj.seed,
        "scaled": traj.scaled,
        "steps": traj.steps(),
        "dim": d,
        "input_dim": p,
        "model": extra,
    });
    std::fs::write(
        dir.join("meta.json"),
        serde_json::to_vec_pretty(&meta).expect("meta serializes"),
    )?;
    Ok(())
}

fn read_trajectory(dir: &Path) -> Result<Trajectory> {
    let meta: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("meta.json"))?,
    )
    .map_err(|e| Error::InvalidParameter(format!("meta.json: {e}")))?;
    let scaled = meta["scaled"].as_bool().unwrap_or(false);
    let seed = meta["seed"].as_u64().unwrap_or(0);
    let d = meta["dim"]
        .as_u64()
        .ok_or_else(|| Error::Missing("meta.json: dim".into()))? as usize;
    let p = meta["input_dim"].as_u64().unwrap_or(0) as usize;

    let parse_table = |path: &Path, cols: usize, skip_first_col: bool| -> Result<Vec<Vec<f64>>> {
        let text = std::fs::read_to_string(path)?;
        let mut rows = Vec::new();
        for line in text.lines().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let start = usize::from(skip_first_col);
            let mut row = Vec::with_capacity(cols);
            for f in fields.iter().skip(start).take(cols) {
                if f.is_empty() {
                    row.push(f64::NAN);
                } else {
                    row.push(f.parse::<f64>().map_err(|e| {
                        Error::InvalidParameter(format!("{}: {e}", path.display()))
                    })?);
                }
            }
            rows.push(row);
        }
        Ok(rows)
    };

    let srows = parse_table(&dir.join("trajectory.csv"), d + p, true)?;
    let t_steps = srows.len().saturating_sub(1);
    if t_steps == 0 {
        return Err(Error::InvalidParameter("trajectory too short".into()));
    }
    let noise_path = dir.join("noises.csv");
    if !noise_path.exists() {
        return Err(Error::Missing(format!(
            "noise record {} (required for diagnostics)",
            noise_path.display()
        )));
    }
    let nrows = parse_table(&noise_path, d, true)?;
    if nrows.len() != t_steps {
        return Err(Error::Missing("noise record length mismatch".into()));
    }

    let states = Mat::from_fn(t_steps + 1, d, |i, j| srows[i][j]);
    let noises = Mat::from_fn(t_steps, d, |i, j| nrows[i][j]);
    let inputs = if p > 0 {
        Some(Mat::from_fn(t_steps, p, |i, j| srows[i][d + j]))
    } else {
        None
    };
    if states.iter().any(|x| !x.is_finite()) || noises.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("trajectory files".into()));
    }
    Ok(Trajectory {
        states,
        noises,
        inputs,
        seed,
        scaled,
    })
}

fn cmd_simulate(config_path: &Path, out: &Path, seed_override: Option<u64>) -> Result<String> {
    let cfg = parse_config(config_path)?;
    let base = base_dir(config_path);
    let spec = explicit_system(&cfg, &base)?;
    let noise = cfg.build_noise()?;
    let sim_section = cfg.simulate.clone().unwrap_or_default();
    let t = sim_section
        .t
        .ok_or_else(|| Error::Missing("simulate.t".into()))?;
    let seed = seed_override.or(sim_section.seed).unwrap_or(0);
    let traj = if sim_section.scaled {
        simulate_scaled(&spec, &noise, t, seed)?
    } else {
        simulate(&spec, &noise, t, seed)?
    };
    let model = serde_json::to_value(&noise).expect("noise serializes");
    write_trajectory(out, &traj, model)?;
    Ok(format!(
        "wrote trajectory (T = {t}, d = {}) to {}",
        spec.dim(),
        out.display()
    ))
}

// ---- estimate ----------------------------------------------------------------

fn cmd_estimate(config_path: &Path, out: &Path) -> Result<String> {
    let cfg = parse_config(config_path)?;
    let base = base_dir(config_path);
    let dir = cfg
        .estimate
        .as_ref()
        .and_then(|e| e.trajectory_dir.as_ref())
        .ok_or_else(|| Error::Missing("estimate.trajectory_dir".into()))?;
    let dir = if Path::new(dir).is_absolute() {
        PathBuf::from(dir)
    } else {
        base.join(dir)
    };
    let traj = read_trajectory(&dir)?;
    let true_a = cfg
        .system
        .as_ref()
        .map(|_| explicit_system(&cfg, &base))
        .transpose()?
        .map(|s| s.a);
    let report = ols_estimate(&traj, true_a.as_ref(), 1e-12)?;

    std::fs::create_dir_all(out)?;
    let json = json!({
        "a_hat": matrix_to_json(&report.a_hat),
        "b_hat": report.b_hat.as_ref().map(matrix_to_json),
        "error_opnorm": report.error_opnorm,
        "yt_spectrum": report.yt_spectrum,
        "st": matrix_to_json(&report.st),
        "rank_deficient": report.rank_deficient,
    });
    std::fs::write(
        out.join("estimate.json"),
        serde_json::to_vec_pretty(&json).expect("report serializes"),
    )?;
    Ok(format!("wrote estimate.json to {}", out.display()))
}

// ---- bounds ------------------------------------------------------------------

fn cmd_bounds(config_path: &Path, out: &Path, delta_override: Option<f64>) -> Result<String> {
    let cfg = parse_config(config_path)?;
    let base = base_dir(config_path);
    let spec = explicit_system(&cfg, &base)?;
    let constants = cfg.build_constants();
    let bounds_section = cfg.bounds.clone().unwrap_or_default();
    let t = bounds_section
        .t
        .ok_or_else(|| Error::Missing("bounds.t".into()))?;
    let delta = delta_override
        .or(bounds_section.delta)
        .unwrap_or(DEFAULT_DELTA);

    let table = notation_quantities(&spec.a, spec.jordan.as_ref(), delta, t, &constants)?;
    let report = regime_error_bound(&spec.a, spec.jordan.as_ref(), delta, t, &constants)?;

    let results = json!({
        "notation": serde_json::to_value(&table).expect("table serializes"),
        "bound": serde_json::to_value(&report).expect("report serializes"),
    });
    let summary = Summary::new("bounds", 0, &cfg, results);
    write_outputs(out, &summary, &[], None)?;
    Ok(format!("wrote bounds summary to {}", out.display()))
}

// ---- experiments ---------------------------------------------------------------

fn experiment_params(
    cfg: &ConfigFile,
    seed: Option<u64>,
    trials: Option<usize>,
    delta: Option<f64>,
) -> (u64, usize, f64) {
    let exp = cfg.experiment.clone().unwrap_or_default();
    (
        seed.or(exp.seed).unwrap_or(0),
        trials.or(exp.trials).unwrap_or(100),
        delta.or(exp.delta).unwrap_or(DEFAULT_DELTA),
    )
}

fn cmd_experiment(
    kind: ExperimentKind,
    config_path: &Path,
    out: &Path,
    seed: Option<u64>,
    trials: Option<usize>,
    delta: Option<f64>,
) -> Result<String> {
    let cfg = parse_config(config_path)?;
    let base = base_dir(config_path);
    match kind {
        ExperimentKind::Rate => {
            let exp_config = cfg.build_experiment(&base, seed, trials, delta)?;
            let output = run_rate_sweep(&exp_config)?;
            let results = serde_json::to_value(&output).expect("sweep serializes");
            let summary = Summary::new("rate", exp_config.seed, &cfg, results);
            let plot = PlotSpec {
                title: "median estimation error vs horizon".into(),
                x_label: "T".into(),
                y_label: "median ||A - A_hat||".into(),
                x_scale: Scale::Log,
                y_scale: Scale::Log,
                series: vec![(
                    "median".into(),
                    output
                        .summary
                        .per_t
                        .iter()
                        .map(|p| (p.t as f64, p.median_error.max(f64::MIN_POSITIVE)))
                        .collect(),
                )],
            };
            write_outputs(out, &summary, &output.raw, Some(&plot))?;
            Ok(format!("rate sweep written to {}", out.display()))
        }
        ExperimentKind::Inconsistency => {
            let (seed, trials, _) = experiment_params(&cfg, seed, trials, delta);
            let t = cfg
                .experiment
                .as_ref()
                .and_then(|e| e.t)
                .unwrap_or(1000);
            let report = inconsistency_experiment(t, trials, seed)?;
            let raw: Vec<TrialRecord> = report
                .err_o
                .iter()
                .enumerate()
                .map(|(i, &e)| TrialRecord {
                    t,
                    trial: i,
                    error: e,
                    lambda_min_yt: f64::NAN,
                    selfnorm: f64::NAN,
                })
                .collect();
            let results = serde_json::to_value(&report).expect("report serializes");
            let summary = Summary::new("inconsistency", seed, &cfg, results);
            write_outputs(out, &summary, &raw, None)?;
            Ok(format!(
                "inconsistency report (modes {:?}) written to {}",
                report.modes_beta_o,
                out.display()
            ))
        }
        ExperimentKind::Spectrum => {
            let (seed, trials, _) = experiment_params(&cfg, seed, trials, delta);
            let exp = cfg.experiment.clone().unwrap_or_default();
            let a = exp.a.unwrap_or(1.1);
            let t_grid = exp
                .t_grid
                .unwrap_or_else(|| vec![50, 75, 100, 125, 150]);
            let report = spectrum_growth_experiment(a, &t_grid, trials, seed)?;
            let plot = PlotSpec {
                title: "covariance spectrum growth".into(),
                x_label: "T".into(),
                y_label: "log sigma_i(Y_T)".into(),
                x_scale: Scale::Linear,
                y_scale: Scale::Linear,
                series: vec![
                    (
                        "log sigma1".into(),
                        report.per_t.iter().map(|p| (p.t as f64, p.median_log_sigma1)).collect(),
                    ),
                    (
                        "log sigma2".into(),
                        report.per_t.iter().map(|p| (p.t as f64, p.median_log_sigma2)).collect(),
                    ),
                ],
            };
            let results = serde_json::to_value(&report).expect("report serializes");
            let summary = Summary::new("spectrum", seed, &cfg, results);
            write_outputs(out, &summary, &[], Some(&plot))?;
            Ok(format!("spectrum report written to {}", out.display()))
        }
        ExperimentKind::Concentration => {
            let exp_config = cfg.build_experiment(&base, seed, trials, delta)?;
            let constants = cfg.build_constants();
            let report = concentration_suite(&exp_config, &constants)?;
            let results = serde_json::to_value(&report).expect("report serializes");
            let summary = Summary::new("concentration", exp_config.seed, &cfg, results);
            write_outputs(out, &summary, &[], None)?;
            Ok(format!("concentration report written to {}", out.display()))
        }
        ExperimentKind::Structure => {
            let (seed, trials, _) = experiment_params(&cfg, seed, trials, delta);
            let specs = cfg.structure_specs()?;
            let t_grid = cfg
                .experiment
                .as_ref()
                .and_then(|e| e.t_grid.clone())
                .unwrap_or_else(|| vec![20, 30, 40, 50, 60]);
            let report = structure_checks(&specs, &t_grid, trials, seed)?;
            let results = serde_json::to_value(&report).expect("report serializes");
            let summary = Summary::new("structure", seed, &cfg, results);
            write_outputs(out, &summary, &[], None)?;
            Ok(format!("structure report written to {}", out.display()))
        }
    }
}
