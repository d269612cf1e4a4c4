//! Dense matrix utilities for the spectral objects the analysis lives on:
//! Jordan blocks, Gramians, pseudo-inverses, symmetric square roots, and
//! overflow-safe log-domain traces.
//!
//! Matrices are `nalgebra::DMatrix<f64>` (row-major construction helpers
//! validate finiteness); the complex variant is used only for spectral
//! intermediates.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::{Complex, DMatrix, DVector};

use crate::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex<f64>>;
pub type Vect = DVector<f64>;

/// Build a matrix from row-major entries, rejecting NaN/Inf and shape lies.
pub fn dense(rows: usize, cols: usize, entries: &[f64]) -> Result<Mat> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidDimension(format!("{rows}x{cols}")));
    }
    if entries.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!(
            "{rows}x{cols} needs {} entries, got {}",
            rows * cols,
            entries.len()
        )));
    }
    check_finite(entries)?;
    Ok(Mat::from_row_slice(rows, cols, entries))
}

/// Build a matrix from nested rows.
pub fn dense_from_rows(rows: &[Vec<f64>]) -> Result<Mat> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::InvalidDimension("empty matrix".into()));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::DimensionMismatch("ragged rows".into()));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    dense(rows.len(), cols, &flat)
}

fn check_finite(entries: &[f64]) -> Result<()> {
    match entries.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::NonFinite(format!("entry #{i} = {}", entries[i]))),
        None => Ok(()),
    }
}

pub fn require_square(m: &Mat) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows())
}

/// Operator (spectral) norm.
pub fn opnorm(m: &Mat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Symmetrize (M + M')/2; used after accumulating symmetric sums.
pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &Mat) -> Vec<f64> {
    let mut ev: Vec<f64> = symmetrize(m)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn lambda_min_sym(m: &Mat) -> f64 {
    sym_eigenvalues(m)[0]
}

pub fn lambda_max_sym(m: &Mat) -> f64 {
    *sym_eigenvalues(m).last().unwrap()
}

/// Jordan block J_d(λ): λ on the diagonal, ones on the first superdiagonal.
pub fn jordan_block(lambda: Complex<f64>, d: usize) -> Result<CMat> {
    if d == 0 {
        return Err(Error::InvalidDimension("Jordan block of size 0".into()));
    }
    let mut m = CMat::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = lambda;
        if i + 1 < d {
            m[(i, i + 1)] = Complex::new(1.0, 0.0);
        }
    }
    Ok(m)
}

/// Real Jordan block for a real eigenvalue.
pub fn jordan_block_real(lambda: f64, d: usize) -> Result<Mat> {
    if d == 0 {
        return Err(Error::InvalidDimension("Jordan block of size 0".into()));
    }
    let mut m = Mat::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = lambda;
        if i + 1 < d {
            m[(i, i + 1)] = 1.0;
        }
    }
    Ok(m)
}

/// Gramian Γ_t(A) = Σ_{k=0}^t A^k A^k'. Always contains the k = 0 identity
/// term, so Γ_t ⪰ I and Γ_t ⪰ Γ_{t-1}.
pub fn gramian(a: &Mat, t: usize) -> Result<Mat> {
    let d = require_square(a)?;
    let mut g = Mat::identity(d, d);
    let mut p = Mat::identity(d, d);
    for _ in 1..=t {
        p = &p * a;
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::Overflow(format!("A^k overflows within Γ_{t}")));
        }
        g += &p * p.transpose();
    }
    Ok(symmetrize(&g))
}

/// ln tr Γ_t(A), computed with running renormalization of the powers so the
/// result is available even when Γ_t itself overflows f64 range.
pub fn log_trace_gramian(a: &Mat, t: usize) -> Result<f64> {
    let d = require_square(a)?;
    // log ‖A^k‖_F² accumulated via scaled powers: after each step M_k is
    // Frobenius-normalized and the log of the scale is carried separately.
    let mut terms = Vec::with_capacity(t + 1);
    terms.push((d as f64).ln()); // ‖I‖_F² = d
    let mut m = a.clone();
    let mut log_scale = 0.0;
    for _ in 1..=t {
        let f = m.norm();
        if f == 0.0 {
            break; // nilpotent: all further powers vanish
        }
        log_scale += f.ln();
        m /= f;
        terms.push(2.0 * log_scale);
        m = &m * a;
    }
    Ok(log_sum_exp(&terms))
}

/// ln(x + 1) given ln x; saturates to ln x for large x.
pub fn ln1p_from_log(log_x: f64) -> f64 {
    if log_x > 36.0 {
        log_x
    } else {
        log_x.exp().ln_1p()
    }
}

pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + terms.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Moore-Penrose pseudo-inverse. Singular values at or below
/// `rel_tol · σ_max · max(rows, cols)` are treated as zero, so the zero
/// matrix maps to the zero matrix.
pub fn pseudo_inverse(m: &Mat, rel_tol: f64) -> Result<Mat> {
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().ok_or_else(|| Error::Numeric("svd: no U".into()))?;
    let v_t = svd.v_t.as_ref().ok_or_else(|| Error::Numeric("svd: no V'".into()))?;
    let smax = svd.singular_values.iter().copied().fold(0.0f64, f64::max);
    let cutoff = rel_tol * smax * m.nrows().max(m.ncols()) as f64;
    let k = svd.singular_values.len();
    let mut inv = Mat::zeros(k, k);
    for i in 0..k {
        let s = svd.singular_values[i];
        if s > cutoff && s > 0.0 {
            inv[(i, i)] = 1.0 / s;
        }
    }
    Ok(v_t.transpose() * inv * u.transpose())
}

/// Smallest singular value relative rank check used by the estimator.
pub fn rank_deficient(m: &Mat, rel_tol: f64) -> bool {
    let sv = m.clone().singular_values();
    let smax = sv.max();
    let cutoff = rel_tol * smax * m.nrows().max(m.ncols()) as f64;
    sv.min() <= cutoff
}

/// Symmetric inverse square root of an (almost) positive-definite matrix.
/// Eigenvalues are floored at `floor_rel · λ_max`; ill-conditioned inputs
/// from explosive runs land on the floor instead of exploding.
pub fn inv_sqrt_psd(m: &Mat, floor_rel: f64) -> Result<Mat> {
    require_square(m)?;
    let eig = symmetrize(m).symmetric_eigen();
    let lmax = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lmax > 0.0) {
        return Err(Error::Numeric(format!(
            "inverse square root needs a PD-ish matrix (λ_max = {lmax})"
        )));
    }
    let floor = floor_rel * lmax;
    let d = m.nrows();
    let mut scale = Mat::zeros(d, d);
    for i in 0..d {
        scale[(i, i)] = 1.0 / eig.eigenvalues[i].max(floor).sqrt();
    }
    Ok(&eig.eigenvectors * scale * eig.eigenvectors.transpose())
}

/// Is M symmetric PSD up to `tol` on the eigenvalues?
pub fn is_psd(m: &Mat, tol: f64) -> bool {
    lambda_min_sym(m) >= -tol
}

/// ln σ_max(A^k) via renormalized powers; exact up to rounding and immune to
/// overflow/underflow of the power itself.
pub fn log_opnorm_power(a: &Mat, k: usize) -> Result<f64> {
    require_square(a)?;
    if k == 0 {
        return Ok(0.0);
    }
    let mut m = a.clone();
    let mut log_scale = 0.0;
    for _ in 1..k {
        let f = m.norm();
        if f == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        log_scale += f.ln();
        m /= f;
        m = &m * a;
    }
    let s = opnorm(&m);
    if s == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(log_scale + s.ln())
}

// ---- complex helpers -------------------------------------------------------

/// Real 2d×2d representation [[Re, -Im], [Im, Re]] of a complex matrix; its
/// singular values are those of the complex matrix, each doubled.
pub fn real_representation(m: &CMat) -> Mat {
    let (r, c) = (m.nrows(), m.ncols());
    let mut out = Mat::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + c)] = -z.im;
            out[(i + r, j)] = z.im;
            out[(i + r, j + c)] = z.re;
        }
    }
    out
}

/// Numerical rank of a complex matrix: singular values above `tol`.
pub fn complex_rank(m: &CMat, tol: f64) -> usize {
    let rr = real_representation(m);
    let sv = rr.singular_values();
    sv.iter().filter(|&&s| s > tol).count() / 2
}

/// Eigenvalues (real) of a Hermitian complex matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let rr = real_representation(m);
    let sym = (&rr + rr.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    // doubled spectrum: keep every other entry
    ev.into_iter().step_by(2).collect()
}

pub fn complex_from_real(m: &Mat) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| Complex::new(m[(i, j)], 0.0))
}

pub fn complex_inverse(m: &CMat) -> Result<CMat> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("complex matrix not invertible".into()))
}

// ---- CSV I/O ---------------------------------------------------------------
// One row per matrix row, comma-separated, plain `f64` formatting (decimal
// point, never locale-dependent). Complex matrices are stored as two
// interleaved real files (re, im).

pub fn write_matrix_csv(m: &Mat, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        writeln!(f, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<Mat> {
    let f = std::fs::File::open(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            trimmed.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| {
            Error::InvalidParameter(format!("{}:{}: {e}", path.display(), ln + 1))
        })?;
        rows.push(row);
    }
    dense_from_rows(&rows)
}

pub fn write_complex_matrix_csv(m: &CMat, re_path: &Path, im_path: &Path) -> Result<()> {
    let re = Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].re);
    let im = Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].im);
    write_matrix_csv(&re, re_path)?;
    write_matrix_csv(&im, im_path)
}

pub fn read_complex_matrix_csv(re_path: &Path, im_path: &Path) -> Result<CMat> {
    let re = read_matrix_csv(re_path)?;
    let im = read_matrix_csv(im_path)?;
    if re.shape() != im.shape() {
        return Err(Error::DimensionMismatch(
            "re/im CSV shapes disagree".into(),
        ));
    }
    Ok(CMat::from_fn(re.nrows(), re.ncols(), |i, j| {
        Complex::new(re[(i, j)], im[(i, j)])
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dense_rejects_nan_and_bad_shape() {
        assert!(dense(2, 2, &[1.0, 2.0, 3.0, f64::NAN]).is_err());
        assert!(dense(2, 2, &[1.0, 2.0, 3.0]).is_err());
        assert!(dense(0, 2, &[]).is_err());
    }

    #[test]
    fn jordan_block_matches_definition() {
        let j = jordan_block(Complex::new(3.0, 0.0), 2).unwrap();
        assert_eq!(j[(0, 0)], Complex::new(3.0, 0.0));
        assert_eq!(j[(0, 1)], Complex::new(1.0, 0.0));
        assert_eq!(j[(1, 0)], Complex::new(0.0, 0.0));
        assert_eq!(j[(1, 1)], Complex::new(3.0, 0.0));

        let single = jordan_block(Complex::new(0.5, 0.25), 1).unwrap();
        assert_eq!(single[(0, 0)], Complex::new(0.5, 0.25));

        assert!(jordan_block(Complex::new(1.0, 0.0), 0).is_err());
    }

    #[test]
    fn nilpotent_block_cubes_to_zero() {
        let n = jordan_block_real(0.0, 3).unwrap();
        let n3 = &n * &n * &n;
        assert!(n3.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gramian_base_cases() {
        let a = dense(2, 2, &[0.0, 0.0, 0.0, 0.0]).unwrap();
        for t in [0usize, 1, 5] {
            let g = gramian(&a, t).unwrap();
            assert_relative_eq!(g, Mat::identity(2, 2), epsilon = 1e-14);
        }
        let any = dense(2, 2, &[0.3, -1.0, 0.7, 0.2]).unwrap();
        assert_relative_eq!(gramian(&any, 0).unwrap(), Mat::identity(2, 2), epsilon = 1e-15);
    }

    #[test]
    fn gramian_scalar_power_sum() {
        // scalar 2, t = 2: 1 + 4 + 16
        let a = dense(1, 1, &[2.0]).unwrap();
        let g = gramian(&a, 2).unwrap();
        assert_relative_eq!(g[(0, 0)], 21.0, epsilon = 1e-12);
    }

    #[test]
    fn gramian_matches_naive_power_summation() {
        // independent oracle: fresh powers per term
        let a = dense(3, 3, &[0.4, 0.1, 0.0, -0.2, 0.6, 0.3, 0.0, 0.05, -0.5]).unwrap();
        for t in [1usize, 7, 33, 64] {
            let mut oracle = Mat::zeros(3, 3);
            for k in 0..=t {
                let mut p = Mat::identity(3, 3);
                for _ in 0..k {
                    p = &p * &a;
                }
                oracle += &p * p.transpose();
            }
            let g = gramian(&a, t).unwrap();
            assert_relative_eq!(g, symmetrize(&oracle), epsilon = 1e-10);
        }
    }

    #[test]
    fn gramian_is_monotone_in_t() {
        let a = dense(2, 2, &[1.0, 1.0, 0.0, 1.0]).unwrap();
        let mut prev = gramian(&a, 0).unwrap();
        for t in 1..20 {
            let cur = gramian(&a, t).unwrap();
            assert!(is_psd(&(&cur - &prev), 1e-9 * opnorm(&cur)));
            prev = cur;
        }
    }

    #[test]
    fn log_trace_gramian_agrees_with_direct() {
        let a = dense(2, 2, &[1.1, 0.3, 0.0, 0.9]).unwrap();
        for t in [0usize, 1, 10, 50] {
            let direct = gramian(&a, t).unwrap().trace().ln();
            let logged = log_trace_gramian(&a, t).unwrap();
            assert_relative_eq!(direct, logged, epsilon = 1e-9);
        }
    }

    #[test]
    fn log_trace_gramian_survives_overflow_range() {
        let a = dense(1, 1, &[1.5]).unwrap();
        // Γ_t(1.5) ~ 1.5^{2t}; at t = 2000 the direct sum overflows
        let lt = log_trace_gramian(&a, 2000).unwrap();
        // geometric sum: log(1.5^{4002}/(1.5^2 - 1)) approx
        let expected = 4002.0 * 1.5f64.ln() - (1.5f64 * 1.5 - 1.0).ln();
        assert_relative_eq!(lt, expected, epsilon = 1e-6);
    }

    #[test]
    fn pseudo_inverse_trivial_cases() {
        let id = Mat::identity(3, 3);
        assert_relative_eq!(pseudo_inverse(&id, 1e-12).unwrap(), id, epsilon = 1e-12);

        let z = Mat::zeros(2, 3);
        assert_relative_eq!(pseudo_inverse(&z, 1e-12).unwrap(), Mat::zeros(3, 2), epsilon = 1e-14);

        let proj = dense(2, 2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(pseudo_inverse(&proj, 1e-12).unwrap(), proj, epsilon = 1e-12);
    }

    #[test]
    fn pseudo_inverse_moore_penrose_on_random_matrices() {
        use crate::rng::NormalSource;
        let mut src = NormalSource::from_seed(100, 0);
        for case in 0..100 {
            let (r, c) = (2 + case % 3, 2 + (case / 3) % 3);
            let mut m = Mat::from_fn(r, c, |_, _| src.standard_normal());
            if case % 4 == 0 {
                // force rank deficiency: duplicate a row
                let last = m.nrows() - 1;
                let first_row = m.row(0).into_owned();
                m.set_row(last, &first_row);
            }
            let p = pseudo_inverse(&m, 1e-12).unwrap();
            let mpm = &m * &p * &m;
            let pmp = &p * &m * &p;
            let scale = opnorm(&m).max(1.0);
            assert!(opnorm(&(&mpm - &m)) <= 1e-9 * scale, "case {case}");
            assert!(opnorm(&(&pmp - &p)) <= 1e-9 * opnorm(&p).max(1.0), "case {case}");
            // symmetry of the two projectors
            let mp = &m * &p;
            let pm = &p * &m;
            assert!(opnorm(&(&mp - mp.transpose())) <= 1e-9, "case {case}");
            assert!(opnorm(&(&pm - pm.transpose())) <= 1e-9, "case {case}");
        }
    }

    #[test]
    fn complex_rank_counts_doubled_singular_values() {
        let m = jordan_block(Complex::new(1.1, 0.0), 2).unwrap();
        let shifted = &m - CMat::from_diagonal_element(2, 2, Complex::new(1.1, 0.0));
        assert_eq!(complex_rank(&shifted, 1e-10), 1);
    }

    #[test]
    fn csv_roundtrip() {
        let dir = std::env::temp_dir().join(format!("sysid-mat-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.csv");
        let m = dense(2, 3, &[1.5, -2.0, 0.25, 1e-9, 3.0, -0.5]).unwrap();
        write_matrix_csv(&m, &path).unwrap();
        let back = read_matrix_csv(&path).unwrap();
        assert_eq!(m, back);
        std::fs::remove_dir_all(&dir).ok();
    }
}
