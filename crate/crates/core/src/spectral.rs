//! Spectral-regime classification, regularity, Jordan structures and the
//! outbox norms φ_min/φ_max.
//!
//! Numerically computing a Jordan decomposition of an arbitrary matrix is
//! ill-posed, so this module never does: whatever needs the Jordan matrix Λ
//! takes an explicit [`JordanSpec`], and experiment systems are constructed
//! *from* such specs so the structure is known by construction.

use std::collections::BTreeSet;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::matrix::{
    complex_inverse, complex_rank, gramian, hermitian_eigenvalues, jordan_block,
    jordan_block_real, opnorm, require_square, CMat, Mat,
};
use crate::rng::NormalSource;
use crate::{Error, Result};

/// Eigenvalue class relative to the horizon-dependent boundary `C/T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Regime {
    /// ρ ≤ 1 - C/T
    S0,
    /// 1 - C/T < ρ ≤ 1 + C/T
    S1,
    /// ρ > 1 + C/T
    S2,
}

/// Classify one eigenvalue modulus. Boundary ties follow the defining
/// inequalities: ρ = 1 - C/T is S0, ρ = 1 + C/T is S1.
pub fn classify_modulus(rho: f64, horizon_t: usize, boundary_c: f64) -> Regime {
    let eps = boundary_c / horizon_t as f64;
    if rho <= 1.0 - eps {
        Regime::S0
    } else if rho <= 1.0 + eps {
        Regime::S1
    } else {
        Regime::S2
    }
}

/// Jordan structure given as (eigenvalue, block size) pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JordanSpec {
    pub blocks: Vec<(Complex<f64>, usize)>,
}

impl JordanSpec {
    pub fn new(blocks: Vec<(Complex<f64>, usize)>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidDimension("no Jordan blocks".into()));
        }
        if blocks.iter().any(|&(_, k)| k == 0) {
            return Err(Error::InvalidDimension("Jordan block of size 0".into()));
        }
        Ok(Self { blocks })
    }

    pub fn real(blocks: &[(f64, usize)]) -> Result<Self> {
        Self::new(
            blocks
                .iter()
                .map(|&(l, k)| (Complex::new(l, 0.0), k))
                .collect(),
        )
    }

    /// Ambient dimension: complex blocks stand for a conjugate pair and
    /// occupy 2k real dimensions.
    pub fn dim(&self) -> usize {
        self.blocks
            .iter()
            .map(|&(l, k)| if l.im == 0.0 { k } else { 2 * k })
            .sum()
    }

    /// Complex Jordan matrix Λ (conjugate blocks materialized for complex
    /// eigenvalues so Λ represents a real matrix).
    pub fn complex_form(&self) -> Result<CMat> {
        let mut blocks: Vec<CMat> = Vec::new();
        for &(l, k) in &self.blocks {
            blocks.push(jordan_block(l, k)?);
            if l.im != 0.0 {
                blocks.push(jordan_block(l.conj(), k)?);
            }
        }
        Ok(block_diag_c(&blocks))
    }

    /// Real Jordan form: real blocks verbatim; a complex eigenvalue
    /// r·e^{iθ} of block size k becomes the 2k×2k real block with 2×2
    /// rotation-scaling cells on the diagonal and I₂ on the superdiagonal.
    pub fn real_form(&self) -> Result<Mat> {
        let mut blocks: Vec<Mat> = Vec::new();
        for &(l, k) in &self.blocks {
            if l.im == 0.0 {
                blocks.push(jordan_block_real(l.re, k)?);
            } else {
                let mut b = Mat::zeros(2 * k, 2 * k);
                for i in 0..k {
                    b[(2 * i, 2 * i)] = l.re;
                    b[(2 * i, 2 * i + 1)] = -l.im;
                    b[(2 * i + 1, 2 * i)] = l.im;
                    b[(2 * i + 1, 2 * i + 1)] = l.re;
                    if i + 1 < k {
                        b[(2 * i, 2 * i + 2)] = 1.0;
                        b[(2 * i + 1, 2 * i + 3)] = 1.0;
                    }
                }
                blocks.push(b);
            }
        }
        Ok(block_diag(&blocks))
    }

    /// Eigenvalue moduli, one per real dimension, descending.
    pub fn moduli(&self) -> Vec<f64> {
        let mut m = Vec::new();
        for &(l, k) in &self.blocks {
            let reps = if l.im == 0.0 { k } else { 2 * k };
            m.extend(std::iter::repeat(l.norm()).take(reps));
        }
        m.sort_by(|a, b| b.total_cmp(a));
        m
    }

    /// Combinatorial regularity: at most one block per eigenvalue of
    /// modulus > 1 (conjugate pairs counted separately per eigenvalue).
    pub fn is_regular_rule(&self) -> bool {
        let unstable: Vec<Complex<f64>> = self
            .blocks
            .iter()
            .filter(|(l, _)| l.norm() > 1.0)
            .map(|&(l, _)| l)
            .collect();
        for (i, a) in unstable.iter().enumerate() {
            for b in unstable.iter().skip(i + 1) {
                if (a - b).norm() <= 1e-12 * (1.0 + a.norm()) {
                    return false;
                }
            }
        }
        true
    }

    pub fn all_nonzero(&self) -> bool {
        self.blocks.iter().all(|(l, _)| l.norm() > 0.0)
    }
}

/// A known decomposition A = P⁻¹ Λ P with Λ the real Jordan form of `spec`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JordanStructure {
    pub spec: JordanSpec,
    /// Similarity transform; identity when the system matrix *is* the real
    /// Jordan form.
    pub p: Mat,
}

impl JordanStructure {
    pub fn plain(spec: JordanSpec) -> Result<Self> {
        let d = spec.dim();
        Ok(Self {
            spec,
            p: Mat::identity(d, d),
        })
    }
}

fn block_diag(blocks: &[Mat]) -> Mat {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
        off += b.nrows();
    }
    out
}

fn block_diag_c(blocks: &[CMat]) -> CMat {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMat::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
        off += b.nrows();
    }
    out
}

/// Spectral classification of a system matrix at horizon `T`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralReport {
    /// Eigenvalue moduli ρ_1 ≥ … ≥ ρ_d.
    pub moduli: Vec<f64>,
    /// Class label per modulus, aligned with `moduli`.
    pub per_eigenvalue_class: Vec<Regime>,
    /// Classes present.
    pub overall: BTreeSet<Regime>,
    /// Every eigenvalue of modulus > 1 has geometric multiplicity one.
    pub regular: bool,
    pub horizon_t: usize,
    pub boundary_c: f64,
}

impl SpectralReport {
    pub fn is_pure(&self, r: Regime) -> bool {
        self.overall.len() == 1 && self.overall.contains(&r)
    }
    pub fn has(&self, r: Regime) -> bool {
        self.overall.contains(&r)
    }
}

/// Default rank tolerance for the regularity test: 1e-8 · ‖A‖.
pub fn default_regularity_tol(a: &Mat) -> f64 {
    1e-8 * opnorm(a).max(1.0)
}

/// Classify eigenvalue moduli of A against the `C/T` boundary and test
/// regularity (rank of A - λI against d - 1 for each |λ| > 1 + tol).
pub fn spectral_report(a: &Mat, horizon_t: usize, boundary_c: f64, tol: f64) -> Result<SpectralReport> {
    let d = require_square(a)?;
    if horizon_t == 0 {
        return Err(Error::InvalidParameter("horizon T must be >= 1".into()));
    }
    if !(boundary_c > 0.0) {
        return Err(Error::InvalidParameter("boundary C must be > 0".into()));
    }
    let eigs = a.complex_eigenvalues();
    if eigs.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numeric(format!(
            "eigen-solver returned non-finite eigenvalues for {d}x{d} input"
        )));
    }
    let mut moduli: Vec<f64> = eigs.iter().map(|z| z.norm()).collect();
    moduli.sort_by(|x, y| y.total_cmp(x));
    let classes: Vec<Regime> = moduli
        .iter()
        .map(|&r| classify_modulus(r, horizon_t, boundary_c))
        .collect();
    let overall: BTreeSet<Regime> = classes.iter().copied().collect();

    let ac = crate::matrix::complex_from_real(a);
    let mut regular = true;
    for z in eigs.iter() {
        if z.norm() > 1.0 + tol {
            let mut shifted = ac.clone();
            for i in 0..d {
                shifted[(i, i)] -= z;
            }
            let rank = complex_rank(&shifted, tol);
            if rank != d - 1 {
                regular = false;
                break;
            }
        }
    }

    Ok(SpectralReport {
        moduli,
        per_eigenvalue_class: classes,
        overall,
        regular,
        horizon_t,
        boundary_c,
    })
}

/// Regularity alone, with the default tolerance.
pub fn is_regular(a: &Mat) -> Result<bool> {
    Ok(spectral_report(a, 1, 1.0, default_regularity_tol(a))?.regular)
}

/// Outbox norms of a Jordan matrix Λ over `T` inverse powers:
///
///   φ_min² = inf over the outbox boundary (min_i |v_i| = 1) of
///            σ_min(Σ_{i=1}^T Λ^{-i+1} v v' Λ^{-i+1}'),
///   φ_max² = sup over the unit sphere of σ_max(same sum).
///
/// Both are grid estimates: φ_min is biased up, φ_max biased down. The grid
/// mixes all sign corners (every |v_i| = 1), seeded quasi-random directions
/// mapped to the respective domain, and the coordinate axes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutboxPhi {
    pub phi_min: f64,
    pub phi_max: f64,
    /// Number of directions evaluated (grid resolution actually used).
    pub directions: usize,
}

pub fn outbox_phi(spec: &JordanSpec, t: usize, grid_density: usize) -> Result<OutboxPhi> {
    if t == 0 {
        return Err(Error::InvalidParameter("outbox needs T >= 1".into()));
    }
    if grid_density == 0 {
        return Err(Error::InvalidParameter("grid density must be >= 1".into()));
    }
    if !spec.all_nonzero() {
        return Err(Error::Singular("outbox needs invertible Λ (zero eigenvalue)".into()));
    }
    let lambda = spec.complex_form()?;
    let d = lambda.nrows();
    let lambda_inv = complex_inverse(&lambda)?;

    // images of the basis under Λ^{-i+1}, i = 1..T: basis_pows[i] is d×d
    let mut basis_pows: Vec<CMat> = Vec::with_capacity(t);
    basis_pows.push(CMat::identity(d, d));
    for i in 1..t {
        let prev = &basis_pows[i - 1];
        basis_pows.push(&lambda_inv * prev);
    }

    let eval = |v: &[f64]| -> (f64, f64) {
        let vc = CMat::from_fn(d, 1, |i, _| Complex::new(v[i], 0.0));
        let mut s = CMat::zeros(d, d);
        for p in &basis_pows {
            let w = p * &vc;
            s += &w * w.adjoint();
        }
        let ev = hermitian_eigenvalues(&s);
        (ev[0].max(0.0), ev[ev.len() - 1].max(0.0))
    };

    let mut dirs: Vec<Vec<f64>> = Vec::new();
    // sign corners (capped: beyond 2^16 corners the quasi-random set carries it)
    if d <= 16 {
        for mask in 0u32..(1u32 << d) {
            dirs.push((0..d).map(|i| if mask >> i & 1 == 0 { 1.0 } else { -1.0 }).collect());
        }
    }
    // coordinate axes
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        dirs.push(e);
    }
    // seeded quasi-random directions from a fixed internal stream
    let n_random = grid_density.pow(d.min(3) as u32).min(20_000);
    let mut src = NormalSource::from_seed(0x00d1_4ec7, 1);
    for _ in 0..n_random {
        let v: Vec<f64> = (0..d).map(|_| src.standard_normal()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            dirs.push(v.iter().map(|x| x / norm).collect());
        }
    }

    let mut phi_min_sq = f64::INFINITY;
    let mut phi_max_sq: f64 = 0.0;
    for dir in &dirs {
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= 1e-12 {
            continue;
        }
        // unit sphere point for φ_max
        let unit: Vec<f64> = dir.iter().map(|x| x / norm).collect();
        let (_, smax) = eval(&unit);
        phi_max_sq = phi_max_sq.max(smax);
        // outbox boundary point (min_i |v_i| = 1) for φ_min
        let min_abs = dir.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
        if min_abs > 1e-9 {
            let boxed: Vec<f64> = dir.iter().map(|x| x / min_abs).collect();
            let (smin, _) = eval(&boxed);
            phi_min_sq = phi_min_sq.min(smin);
        }
    }

    Ok(OutboxPhi {
        phi_min: phi_min_sq.sqrt(),
        phi_max: phi_max_sq.sqrt(),
        directions: dirs.len(),
    })
}

/// λ₁(Γ_{t1} Γ_{t2}⁻¹) together with the polynomial growth check
/// λ₁ ≤ κ(P)² · d · β^{d²}, β = t1/t2. `kappa_p` is the condition number of
/// the similarity transform (1 when A is already in Jordan form); valid for
/// t1 > t2 ≥ 8d.
pub fn gramian_ratio_check(a: &Mat, t1: usize, t2: usize, kappa_p: f64) -> Result<(f64, bool)> {
    let d = require_square(a)?;
    if t2 < 8 * d || t1 <= t2 {
        return Err(Error::InvalidParameter(format!(
            "need t1 > t2 >= 8d (= {}), got t1 = {t1}, t2 = {t2}",
            8 * d
        )));
    }
    if !(kappa_p >= 1.0) {
        return Err(Error::InvalidParameter("kappa(P) must be >= 1".into()));
    }
    let g1 = gramian(a, t1)?;
    let g2 = gramian(a, t2)?;
    let chol = g2
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numeric("Γ_{t2} not PD".into()))?;
    // λ₁ of Γ1·Γ2⁻¹ = λ_max(L⁻¹ Γ1 L⁻ᵀ)
    let li = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::Singular("cholesky factor".into()))?;
    let m = &li * g1 * li.transpose();
    let lam1 = crate::matrix::lambda_max_sym(&m);
    let beta = t1 as f64 / t2 as f64;
    let bound = kappa_p * kappa_p * d as f64 * beta.powi((d * d) as i32);
    Ok((lam1, lam1 <= bound))
}
