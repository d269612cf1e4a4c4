//! Rate sweeps: per-horizon error distributions and the fitted decay
//! exponent of the median error.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{summary_stats, ExperimentConfig, McSummary, PerT, RateFit};
use crate::matrix::{lambda_min_sym, opnorm, Mat};
use crate::ols::{covariance_and_martingale, ols_error_scaled, ols_estimate, selfnorm_statistic};
use crate::rng::derive_seed;
use crate::sim::{simulate, simulate_scaled, SystemSpec};
use crate::spectral::{default_regularity_tol, spectral_report, Regime};
use crate::{Error, Result};

/// Which simulation/estimation path a sweep ran on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    /// Plain recursion + normal-equations OLS.
    Direct,
    /// Inverse-scaled recursion + scaled error identity (explosive systems).
    Scaled,
}

/// Which axes the rate fit ran on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitAxis {
    /// log(median error) against log T (stable/marginal power laws).
    LogTLogErr,
    /// log(median error) against T (explosive exponential decay).
    TLogErr,
}

/// One raw trial row (the `raw.csv` schema).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub t: usize,
    pub trial: usize,
    pub error: f64,
    pub lambda_min_yt: f64,
    pub selfnorm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutput {
    pub summary: McSummary,
    /// None when every median error is zero (noiseless degenerate runs).
    pub fit: Option<RateFit>,
    pub fit_axis: FitAxis,
    pub pipeline: Pipeline,
    pub raw: Vec<TrialRecord>,
    /// Cap applied to explosive grids: T ≤ 650/log ρ_max keeps U_T finite.
    pub t_capped_at: Option<usize>,
}

fn one_direct_trial(
    spec: &SystemSpec,
    config: &ExperimentConfig,
    t: usize,
    seed: u64,
    joint_error: bool,
) -> Result<(f64, f64, f64)> {
    let traj = simulate(spec, &config.noise, t, seed)?;
    let rep = ols_estimate(&traj, Some(&spec.a), 1e-12)?;
    let error = if joint_error {
        // stack [A B] against [Â B̂]
        let p = spec.input_dim();
        let d = spec.dim();
        let mut truth = Mat::zeros(d, d + p);
        truth.view_mut((0, 0), (d, d)).copy_from(&spec.a);
        truth
            .view_mut((0, d), (d, p))
            .copy_from(spec.b.as_ref().unwrap());
        let mut est = Mat::zeros(d, d + p);
        est.view_mut((0, 0), (d, d)).copy_from(&rep.a_hat);
        est.view_mut((0, d), (d, p))
            .copy_from(rep.b_hat.as_ref().unwrap());
        opnorm(&(&truth - &est))
    } else {
        rep.error_opnorm.unwrap()
    };
    let (y, s) = covariance_and_martingale(&traj)?;
    let lam_min = lambda_min_sym(&y);
    let selfnorm = selfnorm_statistic(&y, &s, &Mat::identity(y.nrows(), y.nrows()))?;
    Ok((error, lam_min, selfnorm))
}

fn one_scaled_trial(spec: &SystemSpec, config: &ExperimentConfig, t: usize, seed: u64) -> Result<(f64, f64, f64)> {
    let traj = simulate_scaled(spec, &config.noise, t, seed)?;
    let err_mat = ols_error_scaled(&traj, &spec.a)?;
    let error = opnorm(&err_mat);
    let diag = crate::ols::explosive_pair(&traj, &spec.a)?;
    Ok((error, diag.lambda_min_yt, diag.selfnorm_value))
}

/// Run `trials` independent simulate+estimate rounds at each horizon and fit
/// the decay exponent of the median error: log-log for stable/marginal
/// spectra, log-vs-T for explosive ones (auto-switching to the scaled
/// pipeline, with the horizon cap applied).
pub fn run_rate_sweep(config: &ExperimentConfig) -> Result<SweepOutput> {
    config.validate()?;
    let spec = config.system.build()?;
    let t_max = *config.t_grid.last().unwrap();
    let sr = spectral_report(&spec.a, t_max, 1.0, default_regularity_tol(&spec.a))?;
    if sr.has(Regime::S2) && !sr.regular {
        return Err(Error::Irregular(
            "rate sweep needs a regular system; the explosive spectrum here \
             has repeated geometric structure"
                .into(),
        ));
    }

    let rho_max = sr.moduli[0];
    let explosive = sr.is_pure(Regime::S2);
    let mut t_capped_at = None;
    let t_grid: Vec<usize> = if rho_max > 1.0 {
        let cap = (crate::sim::DEFAULT_OVERFLOW_CAP / rho_max.ln()).floor() as usize;
        let kept: Vec<usize> = config.t_grid.iter().copied().filter(|&t| t <= cap).collect();
        if kept.len() < config.t_grid.len() {
            t_capped_at = Some(cap);
        }
        if kept.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "every horizon exceeds the explosive cap {cap}"
            )));
        }
        kept
    } else {
        config.t_grid.clone()
    };

    let pipeline = if explosive {
        Pipeline::Scaled
    } else {
        Pipeline::Direct
    };
    let joint = spec.b.is_some();

    // flat (grid index, trial) jobs, collected back in index order
    let jobs: Vec<(usize, usize)> = (0..t_grid.len())
        .flat_map(|ti| (0..config.trials).map(move |tr| (ti, tr)))
        .collect();
    let results: Result<Vec<(f64, f64, f64)>> = jobs
        .par_iter()
        .map(|&(ti, trial)| {
            let t = t_grid[ti];
            let seed = derive_seed(config.seed, ti as u64, trial as u64);
            match pipeline {
                Pipeline::Scaled => one_scaled_trial(&spec, config, t, seed),
                Pipeline::Direct => match one_direct_trial(&spec, config, t, seed, joint) {
                    // overflow mid-grid: fall back to the scaled path
                    Err(Error::Overflow(_)) => one_scaled_trial(&spec, config, t, seed),
                    other => other,
                },
            }
        })
        .collect();
    let results = results?;

    let mut raw = Vec::with_capacity(results.len());
    let mut per_t = Vec::with_capacity(t_grid.len());
    for (ti, &t) in t_grid.iter().enumerate() {
        let rows = &results[ti * config.trials..(ti + 1) * config.trials];
        for (trial, &(error, lam, sn)) in rows.iter().enumerate() {
            raw.push(TrialRecord {
                t,
                trial,
                error,
                lambda_min_yt: lam,
                selfnorm: sn,
            });
        }
        let errors: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let (q10, median, q90, mean) = summary_stats(&errors);
        per_t.push(PerT {
            t,
            median_error: median,
            q10,
            q90,
            mean,
            violation_freq: Default::default(),
        });
    }

    let fit_axis = if explosive {
        FitAxis::TLogErr
    } else {
        FitAxis::LogTLogErr
    };
    let fit = if per_t.iter().all(|p| p.median_error > 0.0) {
        let pts: Vec<(f64, f64)> = match fit_axis {
            FitAxis::LogTLogErr => per_t.iter().map(|p| (p.t as f64, p.median_error)).collect(),
            FitAxis::TLogErr => per_t
                .iter()
                .map(|p| (p.t as f64, p.median_error.ln()))
                .collect(),
        };
        Some(match fit_axis {
            FitAxis::LogTLogErr => super::fit_loglog_slope(&pts)?,
            FitAxis::TLogErr => super::fit_linear(&pts)?,
        })
    } else {
        None
    };

    Ok(SweepOutput {
        summary: McSummary { per_t },
        fit,
        fit_axis,
        pipeline,
        raw,
        t_capped_at,
    })
}
