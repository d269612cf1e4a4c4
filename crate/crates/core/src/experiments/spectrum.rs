//! Covariance-spectrum growth for the irregular explosive pair a·I₂:
//! σ₁(Y_T) grows like a^{2T} while σ₂(Y_T) only like √T·a^T, so the
//! condition number explodes and OLS identification degenerates.
//!
//! With A = a·I the scaled representation is exact: σ_i(Y_T) = a^{2T}·σ_i(U_T),
//! so everything is computed in the log domain from U_T. The small singular
//! value is trustworthy only while σ₂/σ₁ stays above machine precision;
//! horizons past that point are flagged.

use rayon::prelude::*;
use serde::Serialize;

use super::{fit_linear, quantile_sorted, RateFit};
use crate::matrix::dense;
use crate::ols::explosive_pair;
use crate::rng::derive_seed;
use crate::sim::{simulate_scaled, NoiseModel, SystemSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumPoint {
    pub t: usize,
    pub median_log_sigma1: f64,
    pub median_log_sigma2: f64,
    pub median_log_cond: f64,
    /// σ₂/σ₁ fell below 1e-13: σ₂ is at the f64 noise floor here.
    pub precision_floor: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub a: f64,
    pub per_t: Vec<SpectrumPoint>,
    /// Fit of median log σ₁(Y_T) against T; theory: 2·log a.
    pub sigma1_fit: RateFit,
    /// Fit of median log σ₂(Y_T) against T; theory: log a + O(log T / T).
    pub sigma2_fit: RateFit,
    /// Difference of the two slopes; theory: close to log a.
    pub cond_slope: f64,
}

/// Sweep σ₁, σ₂ of Y_T for the system a·I₂ over the horizon grid.
pub fn spectrum_growth_experiment(
    a: f64,
    t_grid: &[usize],
    trials: usize,
    seed: u64,
) -> Result<SpectrumReport> {
    if !(a > 1.0) {
        return Err(Error::Regime(format!("need a > 1, got {a}")));
    }
    if t_grid.len() < 2 || t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "need an ascending grid of at least two horizons".into(),
        ));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    let a_mat = dense(2, 2, &[a, 0.0, 0.0, a])?;
    let spec = SystemSpec::new(a_mat.clone())?;

    let jobs: Vec<(usize, usize)> = (0..t_grid.len())
        .flat_map(|ti| (0..trials).map(move |tr| (ti, tr)))
        .collect();
    let rows: Result<Vec<(f64, f64)>> = jobs
        .par_iter()
        .map(|&(ti, trial)| {
            let t = t_grid[ti];
            let s = derive_seed(seed, ti as u64, trial as u64);
            let traj = simulate_scaled(&spec, &NoiseModel::GaussianIsotropic, t, s)?;
            let diag = explosive_pair(&traj, &a_mat)?;
            let sv = diag.ut.singular_values();
            // σ_i(Y_T) = a^{2T} σ_i(U_T), in logs
            let base = 2.0 * t as f64 * a.ln();
            Ok((base + sv.max().ln(), base + sv.min().max(f64::MIN_POSITIVE).ln()))
        })
        .collect();
    let rows = rows?;

    let mut per_t = Vec::with_capacity(t_grid.len());
    for (ti, &t) in t_grid.iter().enumerate() {
        let chunk = &rows[ti * trials..(ti + 1) * trials];
        let mut l1: Vec<f64> = chunk.iter().map(|r| r.0).collect();
        let mut l2: Vec<f64> = chunk.iter().map(|r| r.1).collect();
        l1.sort_by(|x, y| x.total_cmp(y));
        l2.sort_by(|x, y| x.total_cmp(y));
        let m1 = quantile_sorted(&l1, 0.5);
        let m2 = quantile_sorted(&l2, 0.5);
        per_t.push(SpectrumPoint {
            t,
            median_log_sigma1: m1,
            median_log_sigma2: m2,
            median_log_cond: m1 - m2,
            precision_floor: (m2 - m1) < (1e-13f64).ln(),
        });
    }

    let pts1: Vec<(f64, f64)> = per_t.iter().map(|p| (p.t as f64, p.median_log_sigma1)).collect();
    let pts2: Vec<(f64, f64)> = per_t.iter().map(|p| (p.t as f64, p.median_log_sigma2)).collect();
    let sigma1_fit = fit_linear(&pts1)?;
    let sigma2_fit = fit_linear(&pts2)?;

    Ok(SpectrumReport {
        a,
        cond_slope: sigma1_fit.slope - sigma2_fit.slope,
        per_t,
        sigma1_fit,
        sigma2_fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn growth_exponents_match_theory_smoke() {
        // Horizons stay where σ₂/σ₁ ~ T·a^{-2T} is above the f64 floor
        // (T ≲ 150 for a = 1.1); the full-tolerance check is an acceptance
        // criterion.
        let report = spectrum_growth_experiment(1.1, &[50, 75, 100, 125, 150], 40, 11).unwrap();
        let la = 1.1f64.ln();
        assert!(
            (report.sigma1_fit.slope - 2.0 * la).abs() < 0.25 * la,
            "σ₁ slope {}",
            report.sigma1_fit.slope
        );
        assert!(
            report.sigma2_fit.slope < la + 0.05,
            "σ₂ slope {}",
            report.sigma2_fit.slope
        );
        assert!(report.cond_slope > 0.5 * la);
        assert!(
            report.per_t.iter().all(|p| !p.precision_floor),
            "{:?}",
            report.per_t
        );
    }

    #[test]
    fn rejects_non_explosive_and_bad_grid() {
        assert!(spectrum_growth_experiment(0.9, &[10, 20], 4, 0).is_err());
        assert!(spectrum_growth_experiment(1.1, &[20], 4, 0).is_err());
        assert!(spectrum_growth_experiment(1.1, &[20, 10], 4, 0).is_err());
    }
}

