//! Seeded Monte Carlo drivers that turn the finite-time theory into
//! falsifiable desk-scale experiments.
//!
//! Determinism contract: per-trial RNG streams are keyed by
//! (experiment seed, grid index, trial index), trials are dispatched over
//! rayon by index and collected back in index order, and all reductions run
//! in that fixed order — so results are bit-identical no matter how many
//! worker threads run them, and enlarging a grid never perturbs existing
//! cells.

mod concentration;
mod inconsistency;
mod rate;
mod spectrum;
mod structure;

pub use concentration::{concentration_suite, ConcentrationReport, InequalityStats};
pub use inconsistency::{inconsistency_experiment, InconsistencyReport};
pub use rate::{run_rate_sweep, FitAxis, Pipeline, SweepOutput, TrialRecord};
pub use spectrum::{spectrum_growth_experiment, SpectrumReport};
pub use structure::{structure_checks, FtFloor, GapDecay, GramianGrowth, StructureReport};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::sim::{build_composite, CompositeBlueprint, NoiseModel, SystemSpec};
use crate::{Error, Result};

/// System under experiment: explicit matrices or a composite blueprint.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemDef {
    Explicit(SystemSpec),
    Composite(CompositeBlueprint),
}

impl SystemDef {
    pub fn build(&self) -> Result<SystemSpec> {
        match self {
            SystemDef::Explicit(s) => Ok(s.clone()),
            SystemDef::Composite(bp) => Ok(build_composite(bp)?.system),
        }
    }
}

/// Common experiment parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: SystemDef,
    pub noise: NoiseModel,
    /// Strictly ascending horizons.
    pub t_grid: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub delta: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_grid.is_empty() {
            return Err(Error::InvalidParameter("t_grid is empty".into()));
        }
        if self.t_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "t_grid must be strictly ascending".into(),
            ));
        }
        if self.t_grid[0] == 0 {
            return Err(Error::InvalidParameter("horizons must be >= 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be >= 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must be in (0,1), got {}",
                self.delta
            )));
        }
        self.noise.validate()
    }
}

/// Per-horizon summary row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerT {
    pub t: usize,
    pub median_error: f64,
    pub q10: f64,
    pub q90: f64,
    pub mean: f64,
    /// Violation frequency per named inequality, with binomial standard
    /// error alongside (freq, se).
    pub violation_freq: BTreeMap<String, (f64, f64)>,
}

/// Monte Carlo summary across the horizon grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub per_t: Vec<PerT>,
}

/// Least-squares fit of a rate exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// OLS on (log x, log y); rejects nonpositive inputs and needs two distinct x.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return Err(Error::InvalidParameter(
            "log-log fit needs strictly positive coordinates".into(),
        ));
    }
    let logged: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    fit_linear(&logged)
}

/// Plain least squares on raw (x, y) pairs.
pub fn fit_linear(points: &[(f64, f64)]) -> Result<RateFit> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InvalidParameter("need at least 2 points".into()));
    }
    let first_x = points[0].0;
    if points.iter().all(|&(x, _)| x == first_x) {
        return Err(Error::InvalidParameter("need two distinct x values".into()));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
        .sum();
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r_squared = if ss_tot <= f64::EPSILON * nf * (1.0 + my * my) {
        // flat data: an exact constant fit counts as perfect
        if ss_res <= f64::EPSILON * nf * (1.0 + my * my) {
            1.0
        } else {
            0.0
        }
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Linear-interpolation quantile of a sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

/// (q10, median, q90, mean) of raw samples.
pub fn summary_stats(samples: &[f64]) -> (f64, f64, f64, f64) {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    (
        quantile_sorted(&sorted, 0.1),
        quantile_sorted(&sorted, 0.5),
        quantile_sorted(&sorted, 0.9),
        mean,
    )
}

/// Binomial proportion and its standard error.
pub fn violation_stats(violations: usize, trials: usize) -> (f64, f64) {
    let f = violations as f64 / trials as f64;
    (f, (f * (1.0 - f) / trials as f64).sqrt())
}

/// Histogram with Freedman-Diaconis bins; modes are local maxima above half
/// the global maximum. Simple and auditable.
pub fn histogram_modes(samples: &[f64]) -> Vec<f64> {
    if samples.len() < 8 {
        return Vec::new();
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let span = sorted[sorted.len() - 1] - sorted[0];
    if span <= 0.0 {
        return vec![sorted[0]];
    }
    let width = if iqr > 0.0 {
        2.0 * iqr / (sorted.len() as f64).cbrt()
    } else {
        span / 16.0
    };
    let bins = ((span / width).ceil() as usize).clamp(4, 4096);
    let mut counts = vec![0usize; bins];
    for &x in &sorted {
        let idx = (((x - sorted[0]) / span) * bins as f64) as usize;
        counts[idx.min(bins - 1)] += 1;
    }
    let max = *counts.iter().max().unwrap();
    let mut modes = Vec::new();
    for i in 0..bins {
        let c = counts[i];
        if c * 2 < max {
            continue;
        }
        let left_ok = i == 0 || counts[i - 1] < c;
        let right_ok = i + 1 == bins || counts[i + 1] <= c;
        // plateau tie-break: count a run of equal bins once, at its left edge
        if left_ok && right_ok {
            let center = sorted[0] + (i as f64 + 0.5) / bins as f64 * span;
            modes.push(center);
        }
    }
    modes
}
