//! Finite-time error bounds per spectral regime, and the notation-table
//! quantities they are assembled from.
//!
//! The universal constants C, c in the bound formulas are unspecified by the
//! analysis; they default to 1 and are configuration knobs. Every check that
//! matters downstream is a rate (exponent) check, never a constant check.
//!
//! All Gramian traces go through the log-domain path so explosive systems at
//! large horizons do not overflow.

use serde::{Deserialize, Serialize};

use crate::matrix::{
    gramian, lambda_min_sym, ln1p_from_log, log_opnorm_power, log_trace_gramian, opnorm,
    require_square, Mat,
};
use crate::rng::NormalSource;
use crate::sim::simulate_scaled;
use crate::sim::{NoiseModel, SystemSpec};
use crate::spectral::{
    default_regularity_tol, outbox_phi, spectral_report, JordanStructure, Regime,
};
use crate::{Error, Result};

/// Free constants of the analysis plus Monte Carlo knobs for ψ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundConfig {
    /// Universal constant C (multiplies sample-size thresholds and bounds).
    pub universal_c: f64,
    /// Universal constant c (divides log(1/δ) in Hanson-Wright style terms).
    pub universal_small_c: f64,
    /// Sub-Gaussian variance-proxy floor R (1 for isotropic noise).
    pub r: f64,
    /// Class boundary constant in the S0/S1/S2 partition.
    pub class_boundary_c: f64,
    /// Monte Carlo sample count for ψ̂.
    pub psi_samples: usize,
    /// Seed for the ψ̂ sampler.
    pub psi_seed: u64,
    /// Grid density for the outbox norms.
    pub outbox_grid: usize,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self {
            universal_c: 1.0,
            universal_small_c: 1.0,
            r: 1.0,
            class_boundary_c: 1.0,
            psi_samples: 2000,
            psi_seed: 0,
            outbox_grid: 48,
        }
    }
}

/// Every notation-table quantity at one (A, δ, T). Entries that need the
/// Jordan structure (φ's, ψ̂, γ, γ_e) are `None` when it was not supplied.
#[derive(Debug, Clone, Serialize)]
pub struct NotationTable {
    pub delta: f64,
    pub horizon_t: usize,
    /// Noise sample-size threshold T_η(δ) = C(log(2/δ) + d log 5).
    pub t_eta: f64,
    /// Stable threshold T_s(δ) = C(d log(tr Γ_T + 1) + 2d log(5/δ)).
    pub t_s: f64,
    /// c(A, δ) = T_s(2δ/3T).
    pub c_a_delta: f64,
    /// Fixed point β₀(δ); `beta0_at_boundary` marks a grid boundary hit.
    pub beta0: f64,
    pub beta0_at_boundary: bool,
    /// Marginal sample-size threshold (scan of T ≥ C·c(A,δ)/σ_min(AA')).
    pub t_ms: Option<f64>,
    pub gamma_s: f64,
    pub gamma_ms: f64,
    pub gamma_e: Option<f64>,
    pub gamma_a_delta: Option<f64>,
    pub psi_hat: Option<f64>,
    pub psi_std_err: Option<f64>,
    pub phi_min: Option<f64>,
    pub phi_max: Option<f64>,
    /// Smallest stabilized member of T_u(δ), when explosive and found.
    pub min_t_u: Option<usize>,
    /// ln tr Γ_T(A), always finite (log-domain).
    pub log_trace_gramian: f64,
    pub universal_c: f64,
    pub universal_small_c: f64,
    pub r: f64,
}

/// Which qualitative rate the bound follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateClass {
    /// √(C/T): stable, or any mix containing S0.
    InvSqrtT,
    /// polylog(T)/T: pure marginal, or S1∪S2 mixes.
    InvT,
    /// ρ_min^{-T}: pure explosive.
    ExpDecay,
    /// mixed with poly-log factors (composite statement).
    MixedPolylog,
}

/// Which branch of the 1-D minimax lower bound fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerBoundBranch {
    /// C a² T² a^{-T} > δ²: the polynomial-in-δ branch.
    SmallHorizon,
    /// C a² T² a^{-T} ≤ δ²: the a^{-T}/δ branch.
    LargeHorizon,
}

/// Per-block bound inside a mixed-regime report.
#[derive(Debug, Clone, Serialize)]
pub struct BlockBound {
    pub eigenvalue_re: f64,
    pub eigenvalue_im: f64,
    pub size: usize,
    pub regime: Regime,
    pub error_upper_bound: Option<f64>,
}

/// The regime-specific finite-time error bound.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    /// Classes present in the spectrum.
    pub regimes: Vec<Regime>,
    pub rate_class: RateClass,
    /// Numeric bound for pure-regime systems (may underflow to 0 for very
    /// explosive horizons; see `log_error_upper_bound`).
    pub error_upper_bound: Option<f64>,
    /// ln of the bound, always finite when the bound is defined.
    pub log_error_upper_bound: Option<f64>,
    /// Were the regime's minimum-T conditions met at this (T, δ)?
    pub min_t_ok: bool,
    /// Human-readable description of the minimum-T condition checked.
    pub min_t_condition: String,
    /// 1-D explosive lower bound, when applicable (d = 1, a ≥ 1.1).
    pub lower_bound_1d: Option<(f64, LowerBoundBranch)>,
    pub assumptions_violated: Vec<String>,
    /// Per-block bounds for mixed spectra (needs the Jordan structure).
    pub per_block: Vec<BlockBound>,
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must be in (0,1), got {delta}"
        )));
    }
    Ok(())
}

/// T_η(δ) = C(log(2/δ) + d log 5).
pub fn t_eta(d: usize, delta: f64, config: &BoundConfig) -> f64 {
    config.universal_c * ((2.0 / delta).ln() + d as f64 * 5f64.ln())
}

/// T_s(δ) = C(d·log(tr Γ_T(A) + 1) + 2d·log(5/δ)), with the trace in the
/// log domain so explosive inputs cannot overflow.
pub fn t_s(a: &Mat, delta: f64, horizon_t: usize, config: &BoundConfig) -> Result<f64> {
    let d = require_square(a)?;
    let log_tr = log_trace_gramian(a, horizon_t)?;
    Ok(config.universal_c
        * (d as f64 * ln1p_from_log(log_tr) + 2.0 * d as f64 * (5.0 / delta).ln()))
}

/// c(A, δ) = T_s(2δ/(3T)).
pub fn c_a_delta(a: &Mat, delta: f64, horizon_t: usize, config: &BoundConfig) -> Result<f64> {
    t_s(a, 2.0 * delta / (3.0 * horizon_t as f64), horizon_t, config)
}

/// γ_s(A, δ) = sqrt(8d(log(5/δ) + ½·log(4·tr Γ_T(A) + 1))).
pub fn gamma_s(a: &Mat, delta: f64, horizon_t: usize) -> Result<f64> {
    let d = require_square(a)? as f64;
    let log_tr = log_trace_gramian(a, horizon_t)?;
    let log_4tr_p1 = ln1p_from_log(log_tr + 4f64.ln());
    Ok((8.0 * d * ((5.0 / delta).ln() + 0.5 * log_4tr_p1)).sqrt())
}

/// γ_ms(A, δ) = sqrt(16d·log(tr Γ_T(A) + 1) + 32d·log(15T/(2δ))).
pub fn gamma_ms(a: &Mat, delta: f64, horizon_t: usize) -> Result<f64> {
    let d = require_square(a)? as f64;
    let log_tr = log_trace_gramian(a, horizon_t)?;
    Ok((16.0 * d * ln1p_from_log(log_tr)
        + 32.0 * d * (15.0 * horizon_t as f64 / (2.0 * delta)).ln())
    .sqrt())
}

/// Fixed point β₀(δ): the infimum over the grid β ∈ {1/k} of
/// β² σ_min(Γ_{⌊1/β⌋}(A)) ≥ 16e·c(A,δ)/(T·R²·σ_min(AA')).
///
/// The envelope k ↦ σ_min(Γ_k)/k² is non-increasing for ρ(A) ≤ 1 + C/T, so
/// the smallest admissible β is 1/k* with k* the largest k still satisfying
/// the inequality. Returns (β₀, boundary_hit): `boundary_hit` marks both "no
/// k works" (β₀ = 1 reported) and "k ran into the resolution cap 1/tol".
pub fn solve_beta0(
    a: &Mat,
    delta: f64,
    horizon_t: usize,
    r: f64,
    tol: f64,
    config: &BoundConfig,
) -> Result<(f64, bool)> {
    require_square(a)?;
    check_delta(delta)?;
    let sig_min_aat = lambda_min_sym(&(a * a.transpose()));
    if !(sig_min_aat > 0.0) {
        return Err(Error::Singular("σ_min(AA') = 0; β₀ undefined".into()));
    }
    let c_val = c_a_delta(a, delta, horizon_t, config)?;
    let rhs = 16.0 * std::f64::consts::E * c_val / (horizon_t as f64 * r * r * sig_min_aat);

    let k_cap = ((1.0 / tol.max(1e-12)) as usize).clamp(1, 4_000_000);
    let ok = |k: usize| -> Result<bool> {
        let g = gramian(a, k)?;
        let smin = lambda_min_sym(&g);
        Ok(smin / (k as f64 * k as f64) >= rhs)
    };

    if !ok(1)? {
        return Ok((1.0, true));
    }
    // exponential search for the first failing k, then bisect the boundary
    let mut lo = 1usize; // satisfies
    let mut hi = 2usize;
    while hi <= k_cap && ok(hi)? {
        lo = hi;
        hi *= 2;
    }
    if hi > k_cap {
        return Ok((1.0 / lo as f64, true));
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((1.0 / lo as f64, false))
}

/// Scan for T_ms(δ) = inf{T : T ≥ C·c(A,δ)/σ_min(AA')} (c depends on T
/// through tr Γ_T and log T, hence the scan).
pub fn t_ms(a: &Mat, delta: f64, config: &BoundConfig) -> Result<Option<f64>> {
    let sig_min_aat = lambda_min_sym(&(a * a.transpose()));
    if !(sig_min_aat > 0.0) {
        return Ok(None);
    }
    let meets = |t: usize| -> Result<bool> {
        let c_val = c_a_delta(a, delta, t, config)?;
        Ok(t as f64 >= config.universal_c * c_val / sig_min_aat)
    };
    let cap = 1usize << 24;
    let mut hi = 1usize;
    while hi <= cap && !meets(hi)? {
        hi *= 2;
    }
    if hi > cap {
        return Ok(None);
    }
    let mut lo = hi / 2; // lo fails (or is 0)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if meets(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi as f64))
}

/// Monte Carlo estimate of ψ(A, δ): the δ-quantile of min_i |P_i' z_T| with
/// z_T sampled by scaled simulation at a horizon where the A^{-T} tail is
/// below 1e-12. Returns (ψ̂, bootstrap standard error).
pub fn estimate_psi(
    a: &Mat,
    jordan: &JordanStructure,
    delta: f64,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let d = require_square(a)?;
    check_delta(delta)?;
    if n_samples < 10 {
        return Err(Error::InvalidParameter("need at least 10 ψ samples".into()));
    }
    let rho_min = a
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(f64::INFINITY, f64::min);
    if !(rho_min > 1.0) {
        return Err(Error::Regime(format!(
            "ψ needs an explosive system (ρ_min = {rho_min:.4})"
        )));
    }
    // horizon with ρ_min^{-T} < 1e-12
    let t_star = ((12.0 * std::f64::consts::LN_10 / rho_min.ln()).ceil() as usize).clamp(4, 100_000);
    let spec = SystemSpec::new(a.clone())?;
    let p = &jordan.p;
    if p.nrows() != d {
        return Err(Error::DimensionMismatch("Jordan structure vs A".into()));
    }

    use rayon::prelude::*;
    let mins: Result<Vec<f64>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let traj = simulate_scaled(
                &spec,
                &NoiseModel::GaussianIsotropic,
                t_star,
                crate::rng::derive_seed(seed, 0x9e11, i as u64),
            )?;
            let z = traj.state(t_star);
            let proj = p * z;
            Ok(proj.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min))
        })
        .collect();
    let mut mins = mins?;
    mins.sort_by(|x, y| x.total_cmp(y));

    let quantile = |sorted: &[f64], q: f64| -> f64 {
        let pos = q * (sorted.len() - 1) as f64;
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        if i + 1 < sorted.len() {
            sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
        } else {
            sorted[i]
        }
    };
    let psi_hat = quantile(&mins, delta);

    // bootstrap standard error, seeded
    let b_reps = 200;
    let mut src = NormalSource::from_seed(seed ^ 0xb001, 7);
    let mut boot = Vec::with_capacity(b_reps);
    for _ in 0..b_reps {
        let mut resample: Vec<f64> = (0..mins.len())
            .map(|_| mins[(src.uniform01() * mins.len() as f64) as usize % mins.len()])
            .collect();
        resample.sort_by(|x, y| x.total_cmp(y));
        boot.push(quantile(&resample, delta));
    }
    let mean = boot.iter().sum::<f64>() / b_reps as f64;
    let var = boot.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (b_reps - 1) as f64;
    Ok((psi_hat, var.sqrt()))
}

/// LHS of the T_u membership inequality.
fn tu_lhs(a: &Mat, t: usize, delta: f64) -> Result<f64> {
    let a_inv = a
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("A not invertible".into()))?;
    let g_inv = gramian(&a_inv, t)?;
    let half = (t + 1) / 2;
    let log_s1_half = log_opnorm_power(&a_inv, half)?;
    let term1 = 4.0 * (t as f64).powi(2) * (2.0 * log_s1_half).exp() * g_inv.trace();
    let mut m = Mat::identity(a.nrows(), a.nrows());
    for _ in 0..=t {
        m = &a_inv * m;
    }
    let term2 = t as f64 * (&m * &g_inv * m.transpose()).trace() / delta;
    Ok(term1 + term2)
}

/// The T_u(δ) membership predicate for explosive systems:
/// 4T²σ₁²(A^{-⌊(T+1)/2⌋})·tr Γ_T(A⁻¹) + T·tr(A^{-T-1}Γ_T(A⁻¹)A^{-T-1'})/δ
///   ≤ φ_min² ψ̂² / (2σ_max(P)²).
pub fn in_tu(
    a: &Mat,
    jordan: &JordanStructure,
    t: usize,
    delta: f64,
    psi_hat: f64,
    config: &BoundConfig,
) -> Result<bool> {
    let phi = outbox_phi(&jordan.spec, t.clamp(4, 512), config.outbox_grid)?;
    let sig_max_p = opnorm(&jordan.p);
    let lhs = tu_lhs(a, t, delta)?;
    let rhs = phi.phi_min.powi(2) * psi_hat.powi(2) / (2.0 * sig_max_p.powi(2));
    Ok(lhs <= rhs)
}

/// Smallest T that satisfies the T_u predicate and keeps satisfying it for
/// the next few horizons (membership is non-monotone below the stabilization
/// point, so a single hit is not enough).
pub fn min_t_in_tu(
    a: &Mat,
    jordan: &JordanStructure,
    delta: f64,
    psi_hat: f64,
    config: &BoundConfig,
    t_cap: usize,
) -> Result<Option<usize>> {
    let stabilize = 4;
    let mut run = 0;
    let mut first = None;
    for t in 1..=t_cap {
        if in_tu(a, jordan, t, delta, psi_hat, config)? {
            if run == 0 {
                first = Some(t);
            }
            run += 1;
            if run > stabilize {
                return Ok(first);
            }
        } else {
            run = 0;
            first = None;
        }
    }
    Ok(None)
}

/// Evaluate every notation-table row at (A, δ, T). φ's, ψ̂, γ and γ_e are
/// populated only when the Jordan structure is supplied (and, for ψ̂/γ_e,
/// the system is explosive).
pub fn notation_quantities(
    a: &Mat,
    jordan: Option<&JordanStructure>,
    delta: f64,
    horizon_t: usize,
    config: &BoundConfig,
) -> Result<NotationTable> {
    let d = require_square(a)?;
    check_delta(delta)?;
    if horizon_t == 0 {
        return Err(Error::InvalidParameter("T must be >= 1".into()));
    }

    let log_tr = log_trace_gramian(a, horizon_t)?;
    let (beta0, beta0_at_boundary) = solve_beta0(a, delta, horizon_t, config.r, 1e-6, config)?;
    let rho_min = a
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(f64::INFINITY, f64::min);
    let explosive = rho_min > 1.0 + config.class_boundary_c / horizon_t as f64;

    let mut phi_min = None;
    let mut phi_max = None;
    let mut psi_hat = None;
    let mut psi_std_err = None;
    let mut gamma_a = None;
    let mut gamma_e_val = None;
    let mut min_t_u = None;

    if let Some(js) = jordan {
        if js.spec.all_nonzero() {
            let phi = outbox_phi(&js.spec, horizon_t.min(512), config.outbox_grid)?;
            phi_min = Some(phi.phi_min);
            phi_max = Some(phi.phi_max);
            if explosive {
                let (ph, pse) = estimate_psi(a, js, delta, config.psi_samples, config.psi_seed)?;
                psi_hat = Some(ph);
                psi_std_err = Some(pse);

                // γ(A,δ) = 4φ_max²σ_max²(A)/(φ_min²σ_min²(A)ψ(A,δ)²)
                //          · (1 + log(1/δ)/c) · tr(P Γ_T(A⁻¹) P')
                let a_inv = a
                    .clone()
                    .try_inverse()
                    .ok_or_else(|| Error::Singular("A not invertible".into()))?;
                let g_inv = gramian(&a_inv, horizon_t)?;
                let tr_p = (&js.p * &g_inv * js.p.transpose()).trace();
                let sv = a.clone().singular_values();
                let (smax, smin) = (sv.max(), sv.min());
                let g = 4.0 * phi.phi_max.powi(2) * smax.powi(2)
                    / (phi.phi_min.powi(2) * smin.powi(2) * ph.powi(2))
                    * (1.0 + (1.0 / delta).ln() / config.universal_small_c)
                    * tr_p;
                gamma_a = Some(g);

                // γ_e(A,δ) = √d σ_max(P)/(φ_min ψ(A,δ))
                //            · sqrt(log(2/δ) + 2log5 + log(1+γ))
                let sig_max_p = opnorm(&js.p);
                gamma_e_val = Some(
                    (d as f64).sqrt() * sig_max_p / (phi.phi_min * ph)
                        * ((2.0 / delta).ln() + 2.0 * 5f64.ln() + g.ln_1p()).sqrt(),
                );

                min_t_u = min_t_in_tu(a, js, delta, ph, config, 2000)?;
            }
        }
    }

    Ok(NotationTable {
        delta,
        horizon_t,
        t_eta: t_eta(d, delta, config),
        t_s: t_s(a, delta, horizon_t, config)?,
        c_a_delta: c_a_delta(a, delta, horizon_t, config)?,
        beta0,
        beta0_at_boundary,
        t_ms: t_ms(a, delta, config)?,
        gamma_s: gamma_s(a, delta, horizon_t)?,
        gamma_ms: gamma_ms(a, delta, horizon_t)?,
        gamma_e: gamma_e_val,
        gamma_a_delta: gamma_a,
        psi_hat,
        psi_std_err,
        phi_min,
        phi_max,
        min_t_u,
        log_trace_gramian: log_tr,
        universal_c: config.universal_c,
        universal_small_c: config.universal_small_c,
        r: config.r,
    })
}

/// The 1-D explosive minimax lower bound. Branches on C a² T² a^{-T} vs δ²:
/// the small-horizon branch gives C(1-a⁻²)δ/(a²(-log δ)³), the large-horizon
/// branch C(1-a⁻²)/(-δ log δ) · a^{-T}.
pub fn minimax_lower_bound_1d(
    a: f64,
    delta: f64,
    horizon_t: usize,
    config: &BoundConfig,
) -> Result<(f64, LowerBoundBranch)> {
    if !(a >= 1.1) {
        return Err(Error::InvalidParameter(format!(
            "lower bound stated for a >= 1.1, got {a}"
        )));
    }
    check_delta(delta)?;
    let c = config.universal_c;
    let t = horizon_t as f64;
    let one_minus = 1.0 - a.powi(-2);
    // compare in log domain: a^{-T} underflows long before the comparison stops mattering
    let log_lhs = c.ln() + 2.0 * a.ln() + 2.0 * t.ln() - t * a.ln();
    let log_delta_sq = 2.0 * delta.ln();
    if log_lhs > log_delta_sq {
        let v = c * one_minus * delta / (a * a * (-delta.ln()).powi(3));
        Ok((v, LowerBoundBranch::SmallHorizon))
    } else {
        let v = c * one_minus / (-delta * delta.ln()) * (-t * a.ln()).exp();
        Ok((v, LowerBoundBranch::LargeHorizon))
    }
}

/// The regime-specific error bound of the main theorem.
///
/// Pure regimes produce a numeric bound; mixed spectra produce the
/// qualitative composite rate class plus per-block bounds when the Jordan
/// structure is available. Irregular explosive systems are refused: OLS is
/// statistically inconsistent for them.
pub fn regime_error_bound(
    a: &Mat,
    jordan: Option<&JordanStructure>,
    delta: f64,
    horizon_t: usize,
    config: &BoundConfig,
) -> Result<BoundReport> {
    let d = require_square(a)?;
    check_delta(delta)?;
    let sr = spectral_report(
        a,
        horizon_t,
        config.class_boundary_c,
        default_regularity_tol(a),
    )?;
    if sr.has(Regime::S2) && !sr.regular {
        return Err(Error::Irregular(
            "an explosive eigenvalue has geometric multiplicity above one; \
             OLS is inconsistent for this system (no bound exists)"
                .into(),
        ));
    }

    let regimes: Vec<Regime> = sr.overall.iter().copied().collect();
    let mut assumptions: Vec<String> = Vec::new();
    let mut lower_bound_1d = None;
    if d == 1 {
        let a11 = a[(0, 0)].abs();
        if a11 >= 1.1 {
            lower_bound_1d = Some(minimax_lower_bound_1d(a11, delta, horizon_t, config)?);
        }
    }

    let t = horizon_t as f64;
    let c = config.universal_c;

    let (rate_class, log_bound, min_t_ok, min_t_condition) = if sr.is_pure(Regime::S1) {
        // sharper marginal bound: C σ_max(A⁻¹)/√(T σ_min(Γ_{⌊1/β₀⌋})) · γ_ms(δ/2)²
        let (beta0, hit) = solve_beta0(a, delta, horizon_t, config.r, 1e-6, config)?;
        if hit {
            assumptions.push("β₀ grid boundary hit".into());
        }
        let k = (1.0 / beta0).floor().max(1.0) as usize;
        let sig_min_gram = lambda_min_sym(&gramian(a, k)?);
        let a_inv = a
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Singular("A not invertible".into()))?;
        let g = gamma_ms(a, delta / 2.0, horizon_t)?;
        let bound = c * opnorm(&a_inv) / (t * sig_min_gram).sqrt() * g * g;
        let te = t_eta(d, delta / (3.0 * t), config);
        let ts = t_s(a, delta / (3.0 * t), horizon_t, config)?;
        let tms = t_ms(a, delta / 2.0, config)?.unwrap_or(f64::INFINITY);
        let need = (2.0 * te).max(2.0 * ts).max(tms);
        (
            RateClass::InvT,
            Some(bound.ln()),
            t >= need,
            format!("T >= max(2T_eta(d/3T), 2T_s(d/3T), T_ms(d/2)) = {need:.1}"),
        )
    } else if !sr.has(Regime::S2) {
        // S0 or S0∪S1: √(C/T)·γ_s(δ/4)
        let g = gamma_s(a, delta / 4.0, horizon_t)?;
        let bound = (c / t).sqrt() * g;
        let te = t_eta(d, delta / 4.0, config);
        let ts = t_s(a, delta / 4.0, horizon_t, config)?;
        let need = te.max(ts);
        (
            RateClass::InvSqrtT,
            Some(bound.ln()),
            t >= need,
            format!("T >= max(T_eta(d/4), T_s(d/4)) = {need:.1}"),
        )
    } else if sr.is_pure(Regime::S2) {
        // C σ_max(A^{-T}) γ_e(δ/5), in the log domain
        match jordan {
            Some(js) => {
                let table = notation_quantities(a, Some(js), delta / 5.0, horizon_t, config)?;
                match (table.gamma_e, table.psi_hat) {
                    (Some(ge), Some(ph)) => {
                        let a_inv = a
                            .clone()
                            .try_inverse()
                            .ok_or_else(|| Error::Singular("A not invertible".into()))?;
                        let log_sig = log_opnorm_power(&a_inv, horizon_t)?;
                        let log_bound = c.ln() + log_sig + ge.ln();
                        let ok = in_tu(a, js, horizon_t, delta / 5.0, ph, config)?;
                        (
                            RateClass::ExpDecay,
                            Some(log_bound),
                            ok,
                            "T in T_u(d/5) (stabilized membership)".to_string(),
                        )
                    }
                    _ => {
                        assumptions.push("γ_e unavailable (ψ̂ or φ missing)".into());
                        (RateClass::ExpDecay, None, false, "T in T_u(d/5)".to_string())
                    }
                }
            }
            None => {
                assumptions
                    .push("explosive bound needs the Jordan structure (φ_min, ψ, P)".into());
                (RateClass::ExpDecay, None, false, "T in T_u(d/5)".to_string())
            }
        }
    } else {
        // mixed spectrum: composite rate class
        let leading = if sr.has(Regime::S0) {
            "polylog/sqrt(T)"
        } else {
            "polylog/T"
        };
        (
            RateClass::MixedPolylog,
            None,
            t >= t_eta(d, delta, config),
            format!("composite rate {leading}; T >= poly(log(1/d))"),
        )
    };

    // per-block bounds when the structure is known
    let mut per_block = Vec::new();
    if regimes.len() > 1 {
        if let Some(js) = jordan {
            for &(lam, k) in &js.spec.blocks {
                let spec = crate::spectral::JordanSpec::new(vec![(lam, k)])?;
                let block_a = spec.real_form()?;
                let block_jordan = JordanStructure::plain(spec)?;
                let sub =
                    regime_error_bound(&block_a, Some(&block_jordan), delta, horizon_t, config);
                let bound = sub.ok().and_then(|r| r.error_upper_bound);
                per_block.push(BlockBound {
                    eigenvalue_re: lam.re,
                    eigenvalue_im: lam.im,
                    size: k,
                    regime: crate::spectral::classify_modulus(
                        lam.norm(),
                        horizon_t,
                        config.class_boundary_c,
                    ),
                    error_upper_bound: bound,
                });
            }
        }
    }

    Ok(BoundReport {
        regimes,
        rate_class,
        error_upper_bound: log_bound.map(|lb| if lb < -700.0 { 0.0 } else { lb.exp() }),
        log_error_upper_bound: log_bound,
        min_t_ok,
        min_t_condition,
        lower_bound_1d,
        assumptions_violated: assumptions,
        per_block,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::dense;
    use crate::spectral::JordanSpec;
    use approx::assert_relative_eq;

    fn cfg() -> BoundConfig {
        BoundConfig::default()
    }

    #[test]
    fn t_eta_matches_512_convention() {
        // with C = 512 the threshold is 512(log(2/δ) + d·log 5)
        let mut config = cfg();
        config.universal_c = 512.0;
        let d = 2;
        let delta = 0.05;
        let expect = 512.0 * ((2.0f64 / delta).ln() + 2.0 * 5f64.ln());
        assert_relative_eq!(t_eta(d, delta, &config), expect, epsilon = 1e-12);
    }

    #[test]
    fn gamma_s_hand_evaluated_zero_matrix() {
        // d=1, A=0: tr Γ_T = 1, γ_s = sqrt(8(log(5/δ) + ½ log 5))
        let a = dense(1, 1, &[0.0]).unwrap();
        let g = gamma_s(&a, 0.1, 100).unwrap();
        let expect = (8.0 * ((50.0f64).ln() + 0.5 * 5.0f64.ln())).sqrt();
        assert_relative_eq!(g, expect, epsilon = 1e-10);
    }

    #[test]
    fn gamma_s_increases_as_delta_shrinks() {
        let a = dense(1, 1, &[0.5]).unwrap();
        let hi = gamma_s(&a, 0.01, 100).unwrap();
        let lo = gamma_s(&a, 0.2, 100).unwrap();
        assert!(hi > lo);
    }

    #[test]
    fn notation_matches_hand_formulas_on_scalar_cases() {
        let mut src = crate::rng::NormalSource::from_seed(3, 0);
        for _ in 0..10 {
            let a_val = 0.2 + 0.7 * src.uniform01();
            let a = dense(1, 1, &[a_val]).unwrap();
            let t = 50 + (src.uniform01() * 200.0) as usize;
            let delta = 0.02 + 0.2 * src.uniform01();
            let tr: f64 = (0..=t).map(|k| a_val.powi(2 * k as i32)).sum();
            let ts_hand = (tr + 1.0).ln() + 2.0 * (5.0 / delta).ln();
            let ts_got = t_s(&a, delta, t, &cfg()).unwrap();
            assert_relative_eq!(ts_got, ts_hand, epsilon = 1e-8);

            let gms_hand =
                (16.0 * (tr + 1.0).ln() + 32.0 * (15.0 * t as f64 / (2.0 * delta)).ln()).sqrt();
            assert_relative_eq!(gamma_ms(&a, delta, t).unwrap(), gms_hand, epsilon = 1e-8);
        }
    }

    #[test]
    fn beta0_scalar_unit_root_closed_form() {
        // a = 1: σ_min(Γ_k) = k+1, so k* is the largest k with (k+1)/k² >= rhs
        // and β₀ ≈ rhs = 16e·c/(T·R²)
        let a = dense(1, 1, &[1.0]).unwrap();
        let t = 4000;
        let delta = 0.05;
        let (beta0, hit) = solve_beta0(&a, delta, t, 1.0, 1e-6, &cfg()).unwrap();
        assert!(!hit);
        let c_val = c_a_delta(&a, delta, t, &cfg()).unwrap();
        let rhs = 16.0 * std::f64::consts::E * c_val / (t as f64);
        assert!(
            (beta0 - rhs).abs() < 3.0 * rhs * beta0.max(0.01),
            "beta0 {beta0} vs rhs {rhs}"
        );
        // bisection contract: inequality holds at 1/β₀, fails one grid step finer
        let k = (1.0 / beta0).round() as usize;
        let g_k = lambda_min_sym(&gramian(&a, k).unwrap());
        assert!(g_k / (k as f64 * k as f64) >= rhs);
        let g_next = lambda_min_sym(&gramian(&a, k + 1).unwrap());
        assert!(g_next / ((k + 1) as f64 * (k + 1) as f64) < rhs);
    }

    #[test]
    fn beta0_decreases_in_t() {
        let a = dense(1, 1, &[1.0]).unwrap();
        let (b1, _) = solve_beta0(&a, 0.05, 1000, 1.0, 1e-6, &cfg()).unwrap();
        let (b2, _) = solve_beta0(&a, 0.05, 4000, 1.0, 1e-6, &cfg()).unwrap();
        assert!(b2 < b1, "{b2} !< {b1}");
    }

    #[test]
    fn minimax_branches() {
        // a = 1.5, T = 200, δ = 0.05: Ca²T²a^{-T} ~ 1e-31 << δ² -> large-horizon branch
        let (v, br) = minimax_lower_bound_1d(1.5, 0.05, 200, &cfg()).unwrap();
        assert_eq!(br, LowerBoundBranch::LargeHorizon);
        let expect = (1.0 - 1.5f64.powi(-2)) / (-0.05 * 0.05f64.ln()) * 1.5f64.powi(-200);
        assert_relative_eq!(v, expect, epsilon = 1e-10);

        // T = 20 same a, δ: small-horizon branch
        let (v, br) = minimax_lower_bound_1d(1.5, 0.05, 20, &cfg()).unwrap();
        assert_eq!(br, LowerBoundBranch::SmallHorizon);
        let expect = (1.0 - 1.5f64.powi(-2)) * 0.05 / (1.5 * 1.5 * (-(0.05f64.ln())).powi(3));
        assert_relative_eq!(v, expect, epsilon = 1e-10);

        // exact a^{-ΔT} scaling on the second branch
        let (v1, _) = minimax_lower_bound_1d(1.5, 0.05, 200, &cfg()).unwrap();
        let (v2, _) = minimax_lower_bound_1d(1.5, 0.05, 210, &cfg()).unwrap();
        assert_relative_eq!(v2 / v1, 1.5f64.powi(-10), epsilon = 1e-9);

        assert!(minimax_lower_bound_1d(1.05, 0.05, 100, &cfg()).is_err());
    }

    #[test]
    fn stable_bound_scales_as_inverse_sqrt_t() {
        // a = 0.5: tr Γ saturates, so bound(4T)/bound(T) = 1/2 exactly-ish
        let a = dense(1, 1, &[0.5]).unwrap();
        let b1 = regime_error_bound(&a, None, 0.05, 400, &cfg()).unwrap();
        let b4 = regime_error_bound(&a, None, 0.05, 1600, &cfg()).unwrap();
        let ratio = b4.error_upper_bound.unwrap() / b1.error_upper_bound.unwrap();
        assert_relative_eq!(ratio, 0.5, epsilon = 1e-6);
        assert_eq!(b1.rate_class, RateClass::InvSqrtT);
    }

    #[test]
    fn explosive_log_bound_steps_by_log_a() {
        let a = dense(1, 1, &[1.5]).unwrap();
        let spec = JordanSpec::real(&[(1.5, 1)]).unwrap();
        let js = JordanStructure::plain(spec).unwrap();
        let mut config = cfg();
        config.psi_samples = 500;
        let b1 = regime_error_bound(&a, Some(&js), 0.1, 60, &config).unwrap();
        let b2 = regime_error_bound(&a, Some(&js), 0.1, 61, &config).unwrap();
        let step = b1.log_error_upper_bound.unwrap() - b2.log_error_upper_bound.unwrap();
        // γ_e's trace term is saturated at these horizons: step = log 1.5 almost exactly
        assert_relative_eq!(step, 1.5f64.ln(), epsilon = 1e-3);
        assert_eq!(b1.rate_class, RateClass::ExpDecay);
    }

    #[test]
    fn irregular_explosive_is_refused() {
        let a = dense(2, 2, &[1.1, 0.0, 0.0, 1.1]).unwrap();
        let err = regime_error_bound(&a, None, 0.05, 1000, &cfg()).unwrap_err();
        assert!(matches!(err, Error::Irregular(_)));
        assert!(err.to_string().contains("inconsistent"));
    }

    #[test]
    fn bounds_monotone_in_t_and_delta() {
        let a = dense(2, 2, &[0.8, 0.1, 0.0, 0.7]).unwrap();
        let mut prev = f64::INFINITY;
        for t in [100usize, 200, 400, 800, 1600] {
            let b = regime_error_bound(&a, None, 0.05, t, &cfg()).unwrap();
            let v = b.error_upper_bound.unwrap();
            assert!(v <= prev, "bound not nonincreasing in T");
            prev = v;
        }
        // shrinking δ grows the bound (log(1/δ) factor)
        let loose = regime_error_bound(&a, None, 0.2, 500, &cfg()).unwrap();
        let tight = regime_error_bound(&a, None, 0.01, 500, &cfg()).unwrap();
        assert!(tight.error_upper_bound.unwrap() > loose.error_upper_bound.unwrap());
    }

    #[test]
    fn upper_bound_dominates_lower_bound_1d() {
        // Both sides carry unresolved universal constants (set to 1 here),
        // so dominance is asserted on the log scale with a fixed slack. A
        // rate mismatch would make the gap grow linearly in T and blow
        // through any fixed slack, which the second assertion pins down.
        const LOG_SLACK: f64 = 2.0;
        let mut config = cfg();
        config.psi_samples = 500;
        for &a_val in &[1.2, 1.5, 2.0] {
            let a = dense(1, 1, &[a_val]).unwrap();
            let spec = JordanSpec::real(&[(a_val, 1)]).unwrap();
            let js = JordanStructure::plain(spec).unwrap();
            for &delta in &[0.05, 0.1] {
                let mut gaps = Vec::new();
                for &t in &[30usize, 60, 120] {
                    let upper = regime_error_bound(&a, Some(&js), delta, t, &config).unwrap();
                    let (lower, branch) = minimax_lower_bound_1d(a_val, delta, t, &config).unwrap();
                    let gap = upper.log_error_upper_bound.unwrap() - lower.ln();
                    assert!(
                        gap >= -LOG_SLACK,
                        "a={a_val} T={t} δ={delta}: log gap {gap}"
                    );
                    if branch == LowerBoundBranch::LargeHorizon {
                        gaps.push(gap);
                    }
                }
                // same exponential rate: gap flat across T inside branch 2
                if gaps.len() >= 2 {
                    let spread = gaps
                        .iter()
                        .fold(f64::NEG_INFINITY, |m, &g| m.max(g))
                        - gaps.iter().fold(f64::INFINITY, |m, &g| m.min(g));
                    assert!(spread < 1.0, "gap drifting with T: {gaps:?}");
                }
            }
        }
    }

    #[test]
    fn mixed_spectrum_gets_composite_class_and_blocks() {
        use crate::sim::{build_composite, CompositeBlueprint, TaggedBlock};
        use nalgebra::Complex;
        let bp = CompositeBlueprint {
            blocks: vec![
                TaggedBlock { eigenvalue: Complex::new(0.5, 0.0), size: 1, regime: Regime::S0 },
                TaggedBlock { eigenvalue: Complex::new(1.0, 0.0), size: 1, regime: Regime::S1 },
                TaggedBlock { eigenvalue: Complex::new(1.5, 0.0), size: 1, regime: Regime::S2 },
            ],
            similarity_seed: 4,
            conditioning: 2.0,
        };
        let built = build_composite(&bp).unwrap();
        let mut config = cfg();
        config.psi_samples = 300;
        let report = regime_error_bound(
            &built.system.a,
            built.system.jordan.as_ref(),
            0.05,
            500,
            &config,
        )
        .unwrap();
        assert_eq!(report.rate_class, RateClass::MixedPolylog);
        assert_eq!(report.per_block.len(), 3);
        // stable and marginal blocks carry numeric bounds
        assert!(report
            .per_block
            .iter()
            .any(|b| b.regime == Regime::S0 && b.error_upper_bound.is_some()));
    }

    #[test]
    fn psi_estimate_scalar_matches_folded_gaussian() {
        // d=1, a=1.5: min|z_T| is |N(0, σ²)| with σ² = Σ_{τ>=1} a^{-2τ}
        let a = dense(1, 1, &[1.5]).unwrap();
        let js = JordanStructure::plain(JordanSpec::real(&[(1.5, 1)]).unwrap()).unwrap();
        let delta = 0.1;
        let (psi, se) = estimate_psi(&a, &js, delta, 4000, 9).unwrap();
        let var: f64 = 1.5f64.powi(-2) / (1.0 - 1.5f64.powi(-2));
        // δ-quantile of folded normal: σ·Φ⁻¹((1+δ)/2)
        let oracle = {
            use statrs::distribution::{ContinuousCDF, Normal};
            let n = Normal::new(0.0, 1.0).unwrap();
            var.sqrt() * n.inverse_cdf((1.0 + delta) / 2.0)
        };
        assert!(
            (psi - oracle).abs() <= 3.0 * se.max(1e-4),
            "psi {psi} oracle {oracle} se {se}"
        );
    }

    #[test]
    fn psi_monotone_in_delta_and_ratio_positive() {
        let a = dense(1, 1, &[1.5]).unwrap();
        let js = JordanStructure::plain(JordanSpec::real(&[(1.5, 1)]).unwrap()).unwrap();
        let mut prev = 0.0;
        for &delta in &[0.01, 0.05, 0.1, 0.2] {
            let (psi, _) = estimate_psi(&a, &js, delta, 3000, 5).unwrap();
            assert!(psi >= prev, "quantile must be nondecreasing in δ");
            // linear lower bound: ψ(A,δ)/δ bounded below away from zero
            assert!(psi / delta > 0.05, "ψ/δ = {}", psi / delta);
            prev = psi;
        }
    }

    #[test]
    fn psi_rejects_non_explosive() {
        let a = dense(1, 1, &[0.9]).unwrap();
        let js = JordanStructure::plain(JordanSpec::real(&[(0.9, 1)]).unwrap()).unwrap();
        assert!(matches!(
            estimate_psi(&a, &js, 0.1, 100, 0),
            Err(Error::Regime(_))
        ));
    }

    #[test]
    fn delta_validation() {
        let a = dense(1, 1, &[0.5]).unwrap();
        assert!(notation_quantities(&a, None, 0.0, 10, &cfg()).is_err());
        assert!(notation_quantities(&a, None, 1.0, 10, &cfg()).is_err());
    }
}
