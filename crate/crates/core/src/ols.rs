//! The least-squares estimator, its error decomposition, and the covariance
//! and martingale diagnostics the finite-time analysis is built on:
//!
//!   Y_T = Σ X_t X_t',   S_T = Σ X_t η_{t+1}',   Â - A = (Y_T⁺ S_T)'
//!
//! Regression pairs are (X_t, X_{t+1}) for t = 0..T-1, so the sums above run
//! over t = 0..T-1. That alignment makes the error identity exact; the
//! difference from summing through t = T is O(‖x_T‖²) and vanishes under the
//! default x_0 = 0 convention the analysis assumes.
//!
//! For explosive systems, everything is also computable in the inverse-scaled
//! domain: with z_t = A^{-t} x_t,
//!
//!   U_T = A^{-T} Y_T A^{-T'} = Σ A^{-(T-t)} z_t z_t' A^{-(T-t)'}
//!   W_T = A^{-T} S_T        = Σ A^{-(T-t)} z_t η_{t+1}'
//!   A - Â = -(A^{-T'} U_T⁻¹ W_T)'
//!
//! which never forms x_t and survives horizons far beyond f64 range.

use serde::Serialize;

use crate::matrix::{
    inv_sqrt_psd, lambda_max_sym, lambda_min_sym, log_opnorm_power, opnorm, pseudo_inverse,
    rank_deficient, require_square, symmetrize, Mat,
};
use crate::sim::Trajectory;
use crate::{Error, Result};

/// Output of [`ols_estimate`].
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub a_hat: Mat,
    /// Present when the trajectory carries control inputs.
    pub b_hat: Option<Mat>,
    /// ‖A - Â‖_op when the true A was supplied.
    pub error_opnorm: Option<f64>,
    /// Singular values of the regressor covariance, descending.
    pub yt_spectrum: Vec<f64>,
    /// Regressor-noise cross term Σ Z_t η_{t+1}' (Z stacks state and input).
    pub st: Mat,
    pub rank_deficient: bool,
}

/// Diagnostics for the explosive regime.
#[derive(Debug, Clone, Serialize)]
pub struct CovarianceDiagnostics {
    pub ut: Mat,
    pub ft: Mat,
    /// ‖U_T - F_T‖_op.
    pub gap_opnorm: f64,
    /// λ_min(Y_T), reconstructed from U_T; +inf when past f64 range.
    pub lambda_min_yt: f64,
    /// Scaled self-normalized statistic sqrt(λ_max(W' U⁺ W)).
    pub selfnorm_value: f64,
}

/// ‖A - Â‖_op (largest singular value of the difference).
pub fn estimation_error(a_hat: &Mat, a: &Mat) -> Result<f64> {
    if a_hat.shape() != a.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            a_hat.shape(),
            a.shape()
        )));
    }
    Ok(opnorm(&(a - a_hat)))
}

/// OLS estimate from an unscaled trajectory. With control inputs the
/// regression runs on stacked (X_t, U_t) and returns the (Â, B̂) split.
pub fn ols_estimate(traj: &Trajectory, true_a: Option<&Mat>, rel_tol: f64) -> Result<EstimateReport> {
    if traj.scaled {
        return Err(Error::InvalidParameter(
            "ols_estimate needs an unscaled trajectory".into(),
        ));
    }
    let t_steps = traj.steps();
    if t_steps == 0 {
        return Err(Error::InvalidParameter("empty trajectory".into()));
    }
    let d = traj.dim();
    let p = traj.inputs.as_ref().map_or(0, |u| u.ncols());
    let q = d + p;

    let mut y = Mat::zeros(q, q);
    let mut cross = Mat::zeros(q, d); // Σ Z_t X_{t+1}'
    let mut st = Mat::zeros(q, d);
    let mut z = Mat::zeros(q, 1);
    for t in 0..t_steps {
        for j in 0..d {
            z[(j, 0)] = traj.states[(t, j)];
        }
        if let Some(u) = traj.inputs.as_ref() {
            for j in 0..p {
                z[(d + j, 0)] = u[(t, j)];
            }
        }
        y += &z * z.transpose();
        let xn = traj.states.row(t + 1);
        let eta = traj.noises.row(t);
        for i in 0..q {
            for j in 0..d {
                cross[(i, j)] += z[(i, 0)] * xn[j];
                st[(i, j)] += z[(i, 0)] * eta[j];
            }
        }
    }
    let y = symmetrize(&y);

    let y_pinv = pseudo_inverse(&y, rel_tol)?;
    let coef = (&y_pinv * &cross).transpose(); // d×q, rows map Z -> next state
    let a_hat = coef.view((0, 0), (d, d)).clone_owned();
    let b_hat = (p > 0).then(|| coef.view((0, d), (d, p)).clone_owned());

    let mut sv: Vec<f64> = y.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));

    let error_opnorm = match true_a {
        Some(a) => Some(estimation_error(&a_hat, a)?),
        None => None,
    };

    Ok(EstimateReport {
        a_hat,
        b_hat,
        error_opnorm,
        yt_spectrum: sv,
        st,
        rank_deficient: rank_deficient(&y, rel_tol),
    })
}

/// Direct accumulation of (Y_T, S_T) over the regression range t = 0..T-1.
pub fn covariance_and_martingale(traj: &Trajectory) -> Result<(Mat, Mat)> {
    if traj.scaled {
        return Err(Error::InvalidParameter(
            "covariance accumulation needs an unscaled trajectory".into(),
        ));
    }
    let t_steps = traj.steps();
    if traj.noises.nrows() != t_steps || traj.noises.ncols() != traj.dim() {
        return Err(Error::Missing("noise record absent or misshapen".into()));
    }
    let d = traj.dim();
    let mut y = Mat::zeros(d, d);
    let mut s = Mat::zeros(d, d);
    for t in 0..t_steps {
        let x = traj.states.row(t);
        let eta = traj.noises.row(t);
        for i in 0..d {
            for j in 0..d {
                y[(i, j)] += x[i] * x[j];
                s[(i, j)] += x[i] * eta[j];
            }
        }
    }
    Ok((symmetrize(&y), s))
}

/// Self-normalized martingale statistic ‖(Y_T + V)^{-1/2} S_T‖_op for a
/// positive-definite V.
pub fn selfnorm_statistic(yt: &Mat, st: &Mat, v: &Mat) -> Result<f64> {
    let d = require_square(yt)?;
    if v.shape() != (d, d) || st.nrows() != d {
        return Err(Error::DimensionMismatch("selfnorm shapes".into()));
    }
    if lambda_min_sym(v) <= 0.0 {
        return Err(Error::InvalidParameter("V must be positive definite".into()));
    }
    let isqrt = inv_sqrt_psd(&(yt + v), 1e-14)?;
    Ok(opnorm(&(isqrt * st)))
}

fn z_sequence(traj: &Trajectory, a: &Mat) -> Result<Vec<Mat>> {
    let d = traj.dim();
    let t_steps = traj.steps();
    let mut zs = Vec::with_capacity(t_steps + 1);
    if traj.scaled {
        for t in 0..=t_steps {
            zs.push(traj.states.row(t).transpose().into_owned().reshape_generic(
                nalgebra::Dyn(d),
                nalgebra::Dyn(1),
            ));
        }
    } else {
        let a_inv = a
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Singular("A not invertible".into()))?;
        let mut inv_pow = Mat::identity(d, d);
        for t in 0..=t_steps {
            let x = traj.states.row(t).transpose();
            zs.push((&inv_pow * x).reshape_generic(nalgebra::Dyn(d), nalgebra::Dyn(1)));
            inv_pow = &a_inv * inv_pow;
        }
    }
    Ok(zs)
}

/// U_T and F_T with their gap, plus λ_min(Y_T) and the scaled self-normalized
/// statistic. Works from either representation; prefers scaled input for
/// large horizons.
pub fn explosive_pair(traj: &Trajectory, a: &Mat) -> Result<CovarianceDiagnostics> {
    let d = require_square(a)?;
    if traj.dim() != d {
        return Err(Error::DimensionMismatch("trajectory vs A".into()));
    }
    let t_steps = traj.steps();
    if t_steps == 0 {
        return Err(Error::InvalidParameter("empty trajectory".into()));
    }
    let a_inv = a
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("A not invertible".into()))?;
    let zs = z_sequence(traj, a)?;

    // U_T = Σ_{t=1}^T A^{-(T-t)} z_t z_t' A^{-(T-t)'} (the diagnostic range),
    // plus the regression-range pair used by the self-normalized statistic:
    //   U_reg = Σ_{t=0}^{T-1} A^{-(T-t)} z_t z_t' A^{-(T-t)'} = A^{-T} Y_T A^{-T'}
    //   W_T   = Σ_{t=0}^{T-1} A^{-(T-t)} z_t η_{t+1}'         = A^{-T} S_T
    let mut ut = Mat::zeros(d, d);
    let mut u_reg = Mat::zeros(d, d);
    let mut w = Mat::zeros(d, d);
    let mut pow = Mat::identity(d, d); // A^{-s}, s = T - t
    for s in 0..=t_steps {
        let t = t_steps - s;
        let zt = &pow * &zs[t];
        if t >= 1 {
            ut += &zt * zt.transpose();
        }
        if t < t_steps {
            u_reg += &zt * zt.transpose();
            let eta = traj.noises.row(t); // η_{t+1} is row t
            for i in 0..d {
                for j in 0..d {
                    w[(i, j)] += zt[(i, 0)] * eta[j];
                }
            }
        }
        if s < t_steps {
            pow = &a_inv * pow;
        }
    }
    let ut = symmetrize(&ut);
    let u_reg = symmetrize(&u_reg);

    // F_T = Σ_{t=0}^{T-1} A^{-t} z_T z_T' A^{-t'}
    let mut ft = Mat::zeros(d, d);
    let mut img = zs[t_steps].clone();
    for _ in 0..t_steps {
        ft += &img * img.transpose();
        img = &a_inv * img;
    }
    let ft = symmetrize(&ft);

    let gap_opnorm = opnorm(&(&ut - &ft));

    // λ_min(Y_T) = e^{2·log σ}·λ_min(M U M') with A^T = e^{log σ}·M
    let lambda_min_yt = {
        let log_pow = log_opnorm_power(a, t_steps)?;
        if log_pow.is_finite() {
            // renormalized power of A
            let mut m = Mat::identity(d, d);
            let mut log_scale = 0.0;
            for _ in 0..t_steps {
                m = a * m;
                let f = m.norm();
                log_scale += f.ln();
                m /= f;
            }
            let core = lambda_min_sym(&(&m * &ut * m.transpose()));
            let log_val = 2.0 * log_scale + core.max(0.0).ln();
            if log_val > 700.0 {
                f64::INFINITY
            } else {
                log_val.exp()
            }
        } else {
            0.0
        }
    };

    // scaled self-normalized statistic: ‖Y^{-1/2} S‖² = λ_max(W' U_reg⁻¹ W)
    let selfnorm_value = {
        let u_pinv = pseudo_inverse(&u_reg, 1e-12)?;
        lambda_max_sym(&symmetrize(&(w.transpose() * u_pinv * &w)))
            .max(0.0)
            .sqrt()
    };

    Ok(CovarianceDiagnostics {
        ut,
        ft,
        gap_opnorm,
        lambda_min_yt,
        selfnorm_value,
    })
}

/// Error matrix A - Â computed wholly in the scaled domain. With
/// U = A^{-T} Y A^{-T'} and W = A^{-T} S accumulated over the regression
/// range, Â - A = (Y⁻¹S)' gives
///
///   A - Â = -(A^{-T'} U⁻¹ W)'
///
/// evaluated right-to-left, so no quantity ever leaves f64 range for
/// explosive systems.
pub fn ols_error_scaled(traj: &Trajectory, a: &Mat) -> Result<Mat> {
    let d = require_square(a)?;
    if !traj.scaled {
        return Err(Error::InvalidParameter(
            "ols_error_scaled expects a scaled trajectory".into(),
        ));
    }
    let t_steps = traj.steps();
    let a_inv = a
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("A not invertible".into()))?;
    let zs = z_sequence(traj, a)?;

    // regression-range sums: t = 0..T-1 paired with η_{t+1}
    let mut u_reg = Mat::zeros(d, d);
    let mut w = Mat::zeros(d, d);
    let mut pow = a_inv.clone(); // A^{-(T-t)}, starting at t = T-1
    for s in 1..=t_steps {
        let t = t_steps - s;
        let zt = &pow * &zs[t];
        u_reg += &zt * zt.transpose();
        let eta = traj.noises.row(t);
        for i in 0..d {
            for j in 0..d {
                w[(i, j)] += zt[(i, 0)] * eta[j];
            }
        }
        if s < t_steps {
            pow = &a_inv * pow;
        }
    }
    let u_reg = symmetrize(&u_reg);
    let u_inv = pseudo_inverse(&u_reg, 1e-13)?;

    // (A - Â)' = -A^{-T'} (U⁻¹ W); apply A^{-1}' T times to the d×d core
    let mut core = &u_inv * &w;
    let a_inv_t = a_inv.transpose();
    for _ in 0..t_steps {
        core = &a_inv_t * core;
    }
    Ok(-core.transpose())
}
