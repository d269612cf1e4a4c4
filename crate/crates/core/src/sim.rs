//! Trajectory generation for X_{t+1} = A X_t (+ B U_t) + η_{t+1}.
//!
//! Explosive systems blow past f64 range quickly, so there are two paths:
//! the plain recursion (refused when the predicted magnitude exceeds the
//! overflow cap) and the inverse-scaled one, which tracks z_t = A^{-t} x_t
//! via z_t = z_{t-1} + A^{-t} η_t and never forms the raw state.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::matrix::{dense, require_square, Mat, Vect};
use crate::rng::NormalSource;
use crate::spectral::{JordanSpec, JordanStructure, Regime};
use crate::{Error, Result};

/// Natural-log cap on the predicted state magnitude log(ρ_max)·T beyond
/// which the plain recursion refuses and demands the scaled path. Squares of
/// states must stay in f64 range, hence well under ln(f64::MAX) ≈ 709.
pub const DEFAULT_OVERFLOW_CAP: f64 = 650.0;

/// The system X_{t+1} = A X_t + B U_t + η_{t+1}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemSpec {
    pub a: Mat,
    pub b: Option<Mat>,
    /// Initial state; defaults to zero.
    pub x0: Vect,
    /// Known Jordan structure, when the system was built from one.
    pub jordan: Option<JordanStructure>,
}

impl SystemSpec {
    pub fn new(a: Mat) -> Result<Self> {
        let d = require_square(&a)?;
        Ok(Self {
            a,
            b: None,
            x0: Vect::zeros(d),
            jordan: None,
        })
    }

    pub fn scalar(a: f64) -> Self {
        Self::new(dense(1, 1, &[a]).unwrap()).unwrap()
    }

    pub fn with_input(mut self, b: Mat) -> Result<Self> {
        if b.nrows() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "B has {} rows, state dimension is {}",
                b.nrows(),
                self.dim()
            )));
        }
        self.b = Some(b);
        Ok(self)
    }

    pub fn with_x0(mut self, x0: Vect) -> Result<Self> {
        if x0.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "x0 has length {}, state dimension is {}",
                x0.len(),
                self.dim()
            )));
        }
        self.x0 = x0;
        Ok(self)
    }

    pub fn with_jordan(mut self, j: JordanStructure) -> Self {
        self.jordan = Some(j);
        self
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.as_ref().map_or(0, |b| b.ncols())
    }

    pub fn spectral_radius(&self) -> f64 {
        self.a
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Noise distribution for η_t (coordinates i.i.d.).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NoiseModel {
    /// Degenerate zero noise; for noiseless sanity runs.
    Zero,
    /// Standard normal coordinates (isotropic).
    GaussianIsotropic,
    /// Symmetric heavy-tailed variate with tail P(|η| > y) ≤ b·exp(-y^α/m),
    /// rejection-truncated at ν_T(δ) so the conditional law stays symmetric
    /// (hence zero-mean) and bounded.
    SubweibullTruncated {
        alpha: f64,
        b: f64,
        m: f64,
        delta_trunc: f64,
    },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if let NoiseModel::SubweibullTruncated { alpha, b, m, delta_trunc } = self {
            if !(*alpha > 0.0) || !(*b >= 1.0) || !(*m > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "sub-Weibull needs alpha > 0, b >= 1, m > 0; got ({alpha}, {b}, {m})"
                )));
            }
            if !(*delta_trunc > 0.0 && *delta_trunc < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "truncation delta must be in (0,1), got {delta_trunc}"
                )));
            }
        }
        Ok(())
    }

    /// Draw one coordinate. `threshold` is the truncation level for the
    /// sub-Weibull family (ignored otherwise).
    fn sample_coord(&self, src: &mut NormalSource, threshold: f64) -> f64 {
        match self {
            NoiseModel::Zero => 0.0,
            NoiseModel::GaussianIsotropic => src.standard_normal(),
            NoiseModel::SubweibullTruncated { alpha, b, m, .. } => loop {
                // inverse-CDF of the tail: |η| = (m·(-ln(u/b)))^{1/α}
                let u = src.uniform01_open_left();
                let mag = (m * -(u / b).ln()).powf(1.0 / alpha);
                if mag <= threshold {
                    return src.sign() * mag;
                }
            },
        }
    }

    fn threshold(&self, t: usize, d: usize) -> Result<f64> {
        match self {
            NoiseModel::SubweibullTruncated { alpha, b, m, delta_trunc } => {
                subweibull_truncation_threshold(*alpha, *b, *m, t, d, *delta_trunc)
            }
            _ => Ok(f64::INFINITY),
        }
    }
}

/// Truncation level ν_T(δ) = (m · ln(b·T·d/δ))^{1/α}: the event
/// max_t ‖η_t‖_∞ ≤ ν_T(δ) has probability at least 1 - δ.
pub fn subweibull_truncation_threshold(
    alpha: f64,
    b: f64,
    m: f64,
    t: usize,
    d: usize,
    delta: f64,
) -> Result<f64> {
    if !(alpha > 0.0) || !(b >= 1.0) || !(m > 0.0) || t == 0 || d == 0 {
        return Err(Error::InvalidParameter(
            "need alpha > 0, b >= 1, m > 0, T >= 1, d >= 1".into(),
        ));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must be in (0,1), got {delta}"
        )));
    }
    Ok((m * (b * t as f64 * d as f64 / delta).ln()).powf(1.0 / alpha))
}

/// A simulated path. Rows of `states` are X_0..X_T (or z_0..z_T when
/// `scaled`); rows of `noises` are η_1..η_T; rows of `inputs` are U_0..U_{T-1}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Mat,
    pub noises: Mat,
    pub inputs: Option<Mat>,
    pub seed: u64,
    pub scaled: bool,
}

impl Trajectory {
    /// Number of transitions T.
    pub fn steps(&self) -> usize {
        self.noises.nrows()
    }

    pub fn dim(&self) -> usize {
        self.states.ncols()
    }

    pub fn state(&self, t: usize) -> Vect {
        self.states.row(t).transpose()
    }

    pub fn noise(&self, t_plus_1: usize) -> Vect {
        self.noises.row(t_plus_1 - 1).transpose()
    }
}

fn draw_noise_and_inputs(
    spec: &SystemSpec,
    noise: &NoiseModel,
    t_steps: usize,
    seed: u64,
) -> Result<(Mat, Option<Mat>)> {
    noise.validate()?;
    let d = spec.dim();
    let p = spec.input_dim();
    let threshold = noise.threshold(t_steps, d)?;
    let mut src = NormalSource::from_seed(seed, 0);
    let mut noises = Mat::zeros(t_steps, d);
    let mut inputs = if p > 0 { Some(Mat::zeros(t_steps, p)) } else { None };
    for t in 0..t_steps {
        for j in 0..d {
            noises[(t, j)] = noise.sample_coord(&mut src, threshold);
        }
        if let Some(u) = inputs.as_mut() {
            for j in 0..p {
                u[(t, j)] = src.standard_normal();
            }
        }
    }
    Ok((noises, inputs))
}

/// Drive the recursion with explicitly supplied noises (and inputs). This is
/// the deterministic core `simulate` wraps, and the injection point for
/// oracle tests.
pub fn simulate_from_noises(
    spec: &SystemSpec,
    noises: &Mat,
    inputs: Option<&Mat>,
    seed: u64,
) -> Result<Trajectory> {
    let d = spec.dim();
    if noises.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "noise rows have {} entries, state dimension is {d}",
            noises.ncols()
        )));
    }
    let t_steps = noises.nrows();
    if t_steps == 0 {
        return Err(Error::InvalidParameter("need T >= 1".into()));
    }
    match (spec.b.as_ref(), inputs) {
        (Some(b), Some(u)) => {
            if u.nrows() != t_steps || u.ncols() != b.ncols() {
                return Err(Error::DimensionMismatch("inputs shape".into()));
            }
        }
        (Some(_), None) => {
            return Err(Error::Missing("system has B but no inputs supplied".into()))
        }
        (None, Some(_)) => {
            return Err(Error::InvalidParameter("inputs supplied without B".into()))
        }
        (None, None) => {}
    }

    let mut states = Mat::zeros(t_steps + 1, d);
    states.row_mut(0).tr_copy_from(&spec.x0);
    let mut x = spec.x0.clone();
    for t in 0..t_steps {
        let mut next = &spec.a * &x;
        if let (Some(b), Some(u)) = (spec.b.as_ref(), inputs) {
            next += b * u.row(t).transpose();
        }
        next += noises.row(t).transpose();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Overflow(format!("state non-finite at step {}", t + 1)));
        }
        states.row_mut(t + 1).tr_copy_from(&next);
        x = next;
    }

    Ok(Trajectory {
        states,
        noises: noises.clone(),
        inputs: inputs.cloned(),
        seed,
        scaled: false,
    })
}

/// Simulate `t_steps` transitions. Deterministic in `seed`; refuses with an
/// overflow error when log(ρ_max)·T exceeds `cap` (use
/// [`simulate_scaled`] then).
pub fn simulate_with_cap(
    spec: &SystemSpec,
    noise: &NoiseModel,
    t_steps: usize,
    seed: u64,
    cap: f64,
) -> Result<Trajectory> {
    let rho = spec.spectral_radius();
    if rho > 1.0 {
        let predicted = rho.ln() * t_steps as f64;
        if predicted > cap {
            return Err(Error::Overflow(format!(
                "log(rho_max)*T = {predicted:.1} exceeds cap {cap}"
            )));
        }
    }
    let (noises, inputs) = draw_noise_and_inputs(spec, noise, t_steps, seed)?;
    simulate_from_noises(spec, &noises, inputs.as_ref(), seed)
}

pub fn simulate(spec: &SystemSpec, noise: &NoiseModel, t_steps: usize, seed: u64) -> Result<Trajectory> {
    simulate_with_cap(spec, noise, t_steps, seed, DEFAULT_OVERFLOW_CAP)
}

/// Simulate in the inverse-scaled representation: z_t = z_{t-1} + A^{-t} η_t
/// with z_0 = x_0. The raw state x_t = A^t z_t is never formed, so explosive
/// systems of any horizon stay in range. Same seed ⇒ same noise sequence as
/// [`simulate`].
pub fn simulate_scaled(spec: &SystemSpec, noise: &NoiseModel, t_steps: usize, seed: u64) -> Result<Trajectory> {
    if spec.b.is_some() {
        return Err(Error::InvalidParameter(
            "control input is not supported on the scaled path".into(),
        ));
    }
    let d = spec.dim();
    let a_inv = spec
        .a
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("A not invertible; scaled simulation needs A^{-1}".into()))?;
    let (noises, _) = draw_noise_and_inputs(spec, noise, t_steps, seed)?;

    let mut states = Mat::zeros(t_steps + 1, d);
    states.row_mut(0).tr_copy_from(&spec.x0);
    let mut z = spec.x0.clone();
    let mut inv_pow = a_inv.clone(); // A^{-t} for the current step
    for t in 0..t_steps {
        z += &inv_pow * noises.row(t).transpose();
        states.row_mut(t + 1).tr_copy_from(&z);
        if t + 1 < t_steps {
            inv_pow = &a_inv * inv_pow;
        }
    }

    Ok(Trajectory {
        states,
        noises,
        inputs: None,
        seed,
        scaled: true,
    })
}

/// Stack the control form into one autonomous system:
/// Ā = [[A, B], [0, 0]]; its eigenvalues are those of A plus p zeros.
pub fn augment_control(a: &Mat, b: &Mat) -> Result<Mat> {
    let d = require_square(a)?;
    if b.nrows() != d {
        return Err(Error::DimensionMismatch(format!(
            "B has {} rows, expected {d}",
            b.nrows()
        )));
    }
    let p = b.ncols();
    let n = d + p;
    let mut out = Mat::zeros(n, n);
    out.view_mut((0, 0), (d, d)).copy_from(a);
    out.view_mut((0, d), (d, p)).copy_from(b);
    Ok(out)
}

/// One diagonal block of a composite system, tagged with the regime it is
/// meant to land in.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaggedBlock {
    pub eigenvalue: Complex<f64>,
    pub size: usize,
    pub regime: Regime,
}

/// Blueprint for a mixed-regime system A = P̃⁻¹ · diag(blocks) · P̃.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompositeBlueprint {
    pub blocks: Vec<TaggedBlock>,
    pub similarity_seed: u64,
    /// Target condition number of P̃ (exactly 1 ⇒ P̃ = I).
    pub conditioning: f64,
}

/// A built composite system: the spec carries the Jordan structure, and the
/// similarity transform is recorded explicitly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BuiltComposite {
    pub system: SystemSpec,
    pub similarity: Mat,
    pub blocks: Vec<TaggedBlock>,
}

/// Assemble a composite system from tagged Jordan blocks. Complex
/// eigenvalues become real 2×2 rotation-scaling blocks (conjugate pair
/// implicit). P̃ is a seeded random matrix rescaled so its condition number
/// equals `conditioning`; `conditioning == 1` yields P̃ = I exactly.
pub fn build_composite(blueprint: &CompositeBlueprint) -> Result<BuiltComposite> {
    if !(blueprint.conditioning >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "conditioning must be >= 1, got {}",
            blueprint.conditioning
        )));
    }
    if blueprint.blocks.is_empty() {
        return Err(Error::InvalidDimension("no blocks".into()));
    }
    let spec = JordanSpec::new(
        blueprint
            .blocks
            .iter()
            .map(|b| (b.eigenvalue, b.size))
            .collect(),
    )?;
    let lambda = spec.real_form()?;
    let d = lambda.nrows();

    let p = if blueprint.conditioning == 1.0 {
        Mat::identity(d, d)
    } else {
        // random Gaussian matrix, singular values replaced by a linear ramp
        // from 1 to `conditioning`
        let mut src = NormalSource::from_seed(blueprint.similarity_seed, 2);
        let g = Mat::from_fn(d, d, |_, _| src.standard_normal());
        let svd = g.svd(true, true);
        let u = svd.u.unwrap();
        let v_t = svd.v_t.unwrap();
        let mut s = Mat::zeros(d, d);
        for i in 0..d {
            let frac = if d > 1 { i as f64 / (d - 1) as f64 } else { 0.0 };
            s[(i, i)] = blueprint.conditioning - (blueprint.conditioning - 1.0) * frac;
        }
        u * s * v_t
    };
    let p_inv = p
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("similarity transform".into()))?;
    let a = &p_inv * &lambda * &p;

    let system = SystemSpec::new(a)?.with_jordan(JordanStructure { spec, p: p.clone() });
    Ok(BuiltComposite {
        system,
        similarity: p,
        blocks: blueprint.blocks.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::dense;
    use approx::assert_relative_eq;

    #[test]
    fn zero_noise_keeps_states_zero() {
        let spec = SystemSpec::new(dense(2, 2, &[0.4, 0.2, -0.1, 0.8]).unwrap()).unwrap();
        let traj = simulate(&spec, &NoiseModel::Zero, 10, 1).unwrap();
        assert!(traj.states.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn injected_unit_noise_cumulates() {
        // d=1, a=1, x0=0, η = (1,1,1): states 0,1,2,3
        let spec = SystemSpec::scalar(1.0);
        let noises = dense(3, 1, &[1.0, 1.0, 1.0]).unwrap();
        let traj = simulate_from_noises(&spec, &noises, None, 0).unwrap();
        let got: Vec<f64> = traj.states.column(0).iter().copied().collect();
        assert_eq!(got, vec![0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn simulate_is_bit_deterministic() {
        let spec = SystemSpec::new(dense(2, 2, &[0.9, 0.1, 0.0, 0.7]).unwrap()).unwrap();
        let a = simulate(&spec, &NoiseModel::GaussianIsotropic, 64, 42).unwrap();
        let b = simulate(&spec, &NoiseModel::GaussianIsotropic, 64, 42).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.noises, b.noises);
    }

    #[test]
    fn recurrence_residual_is_tiny() {
        let spec = SystemSpec::new(dense(2, 2, &[0.9, 0.5, -0.3, 0.6]).unwrap())
            .unwrap()
            .with_input(dense(2, 1, &[1.0, -0.5]).unwrap())
            .unwrap();
        let traj = simulate(&spec, &NoiseModel::GaussianIsotropic, 200, 7).unwrap();
        let u = traj.inputs.as_ref().unwrap();
        let mut max_state: f64 = 1.0;
        let mut max_resid: f64 = 0.0;
        for t in 0..traj.steps() {
            let pred = &spec.a * traj.state(t)
                + spec.b.as_ref().unwrap() * u.row(t).transpose()
                + traj.noise(t + 1);
            let resid = (traj.state(t + 1) - pred).norm();
            max_resid = max_resid.max(resid);
            max_state = max_state.max(traj.state(t).norm());
        }
        assert!(max_resid < 1e-9 * max_state);
    }

    #[test]
    fn overflow_cap_refuses_and_names_scaled_path() {
        let spec = SystemSpec::scalar(1.5);
        let err = simulate(&spec, &NoiseModel::GaussianIsotropic, 5000, 0).unwrap_err();
        assert!(matches!(err, Error::Overflow(_)));
        assert!(err.to_string().contains("scaled"));
    }

    #[test]
    fn scaled_zero_noise_stays_at_x0() {
        let spec = SystemSpec::new(dense(2, 2, &[1.5, 1.0, 0.0, 1.5]).unwrap())
            .unwrap()
            .with_x0(Vect::from_vec(vec![1.0, -2.0]))
            .unwrap();
        let traj = simulate_scaled(&spec, &NoiseModel::Zero, 12, 3).unwrap();
        for t in 0..=12 {
            assert_relative_eq!(traj.state(t)[0], 1.0, epsilon = 1e-12);
            assert_relative_eq!(traj.state(t)[1], -2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn scaled_matches_unscaled_through_inverse_powers() {
        // a = 1.5 scalar, T = 20: A^{-t} x_t from simulate equals z_t
        let spec = SystemSpec::scalar(1.5);
        let t_steps = 20;
        let plain = simulate(&spec, &NoiseModel::GaussianIsotropic, t_steps, 99).unwrap();
        let scaled = simulate_scaled(&spec, &NoiseModel::GaussianIsotropic, t_steps, 99).unwrap();
        assert_eq!(plain.noises, scaled.noises);
        for t in 0..=t_steps {
            let z_from_plain = plain.state(t)[0] * 1.5f64.powi(-(t as i32));
            let z = scaled.state(t)[0];
            assert!(
                (z_from_plain - z).abs() <= 1e-9 * z.abs().max(1e-9),
                "t = {t}: {z_from_plain} vs {z}"
            );
        }
    }

    #[test]
    fn scaled_terminal_variance_matches_geometric_series() {
        // Var(z_T) -> a^{-2}/(1 - a^{-2}) for scalar a
        let a = 1.5f64;
        let spec = SystemSpec::scalar(a);
        let n = 4000;
        let t_steps = 40;
        let mut sq = 0.0;
        for trial in 0..n {
            let traj = simulate_scaled(&spec, &NoiseModel::GaussianIsotropic, t_steps, trial as u64).unwrap();
            let z = traj.state(t_steps)[0];
            sq += z * z;
        }
        let var = sq / n as f64;
        let expect = a.powi(-2) / (1.0 - a.powi(-2));
        // MC tolerance: std of z² mean is about sqrt(2/n)·var
        assert!(
            (var - expect).abs() < 5.0 * (2.0 / n as f64).sqrt() * expect,
            "var {var} vs {expect}"
        );
    }

    #[test]
    fn stream_independence_between_adjacent_seeds() {
        let spec = SystemSpec::scalar(0.5);
        let t_steps = 1000;
        let a = simulate(&spec, &NoiseModel::GaussianIsotropic, t_steps, 5).unwrap();
        let b = simulate(&spec, &NoiseModel::GaussianIsotropic, t_steps, 6).unwrap();
        let xa: Vec<f64> = a.states.column(0).iter().copied().collect();
        let xb: Vec<f64> = b.states.column(0).iter().copied().collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (ma, mb) = (mean(&xa), mean(&xb));
        let mut num = 0.0;
        let (mut va, mut vb) = (0.0, 0.0);
        for i in 0..xa.len() {
            num += (xa[i] - ma) * (xb[i] - mb);
            va += (xa[i] - ma).powi(2);
            vb += (xb[i] - mb).powi(2);
        }
        let r = num / (va.sqrt() * vb.sqrt());
        assert!(r.abs() < 0.1, "correlation {r}");
    }

    #[test]
    fn augment_control_shapes_and_eigenvalues() {
        let a = dense(2, 2, &[0.5, 0.1, 0.0, 0.4]).unwrap();
        let b0 = Mat::zeros(2, 2);
        let aug = augment_control(&a, &b0).unwrap();
        // B = 0 gives block-diag(A, 0)
        assert_eq!(aug.view((0, 0), (2, 2)).clone_owned(), a);
        assert!(aug.view((2, 0), (2, 4)).iter().all(|&x| x == 0.0));
        assert!(aug.view((0, 2), (2, 2)).iter().all(|&x| x == 0.0));

        // eigenvalues of [[2]] with B=[1]: {2, 0}
        let a1 = dense(1, 1, &[2.0]).unwrap();
        let b1 = dense(1, 1, &[1.0]).unwrap();
        let aug = augment_control(&a1, &b1).unwrap();
        let mut eigs: Vec<f64> = aug.complex_eigenvalues().iter().map(|z| z.re).collect();
        eigs.sort_by(|x, y| x.total_cmp(y));
        assert_relative_eq!(eigs[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(eigs[1], 2.0, epsilon = 1e-12);

        // d=2, p=3 -> 5x5
        let b3 = Mat::zeros(2, 3);
        assert_eq!(augment_control(&a, &b3).unwrap().shape(), (5, 5));

        // mismatch
        let bad = Mat::zeros(3, 1);
        assert!(augment_control(&a, &bad).is_err());
    }

    #[test]
    fn subweibull_threshold_value() {
        // α=1, b=1, m=1, T=100, d=1, δ=0.1 -> ln(1000)
        let nu = subweibull_truncation_threshold(1.0, 1.0, 1.0, 100, 1, 0.1).unwrap();
        assert_relative_eq!(nu, 1000f64.ln(), epsilon = 1e-12);
        assert!(subweibull_truncation_threshold(1.0, 1.0, 1.0, 100, 1, 1.0).is_err());
        assert!(subweibull_truncation_threshold(1.0, 1.0, 1.0, 100, 1, 0.0).is_err());
    }

    #[test]
    fn subweibull_samples_bounded_and_centered() {
        let noise = NoiseModel::SubweibullTruncated {
            alpha: 1.0,
            b: 1.0,
            m: 1.0,
            delta_trunc: 0.05,
        };
        let t_steps = 100;
        let nu = subweibull_truncation_threshold(1.0, 1.0, 1.0, t_steps, 1, 0.05).unwrap();
        let spec = SystemSpec::scalar(0.0);
        // bounded always, across several trajectories
        for seed in 0..20 {
            let traj = simulate(&spec, &noise, t_steps, seed).unwrap();
            assert!(traj.noises.iter().all(|&x| x.abs() <= nu));
        }
        // symmetric truncation keeps the mean at zero: 10^6 draws
        let mut src = NormalSource::from_seed(123, 0);
        let n = 1_000_000usize;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let x = noise.sample_coord(&mut src, nu);
            sum += x;
            sq += x * x;
        }
        let mean = sum / n as f64;
        let sd = (sq / n as f64 - mean * mean).sqrt();
        assert!(mean.abs() < 4.0 * sd / (n as f64).sqrt(), "mean {mean}, sd {sd}");
    }

    #[test]
    fn composite_single_block_identity_similarity() {
        let bp = CompositeBlueprint {
            blocks: vec![TaggedBlock {
                eigenvalue: Complex::new(0.5, 0.0),
                size: 2,
                regime: Regime::S0,
            }],
            similarity_seed: 1,
            conditioning: 1.0,
        };
        let built = build_composite(&bp).unwrap();
        let expect = JordanSpec::real(&[(0.5, 2)]).unwrap().real_form().unwrap();
        assert_relative_eq!(built.system.a, expect, epsilon = 1e-14);
        assert_eq!(built.similarity, Mat::identity(2, 2));
    }

    #[test]
    fn composite_eigenvalues_match_block_union() {
        let bp = CompositeBlueprint {
            blocks: vec![
                TaggedBlock { eigenvalue: Complex::new(0.5, 0.0), size: 1, regime: Regime::S0 },
                TaggedBlock { eigenvalue: Complex::new(1.0, 0.0), size: 1, regime: Regime::S1 },
                TaggedBlock { eigenvalue: Complex::new(1.5, 0.0), size: 1, regime: Regime::S2 },
            ],
            similarity_seed: 9,
            conditioning: 4.0,
        };
        let built = build_composite(&bp).unwrap();
        // conditioning honored
        let sv = built.similarity.clone().singular_values();
        assert_relative_eq!(sv.max() / sv.min(), 4.0, epsilon = 1e-8);
        // eigenvalues preserved under similarity
        let mut eigs: Vec<f64> = built.system.a.complex_eigenvalues().iter().map(|z| z.norm()).collect();
        eigs.sort_by(|x, y| x.total_cmp(y));
        for (got, want) in eigs.iter().zip([0.5, 1.0, 1.5]) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
        // all three classes show up in the report
        let rep = crate::spectral::spectral_report(&built.system.a, 1000, 1.0, 1e-8).unwrap();
        assert_eq!(rep.overall.len(), 3);
    }

    #[test]
    fn composite_rejects_conditioning_below_one() {
        let bp = CompositeBlueprint {
            blocks: vec![TaggedBlock { eigenvalue: Complex::new(0.5, 0.0), size: 1, regime: Regime::S0 }],
            similarity_seed: 0,
            conditioning: 0.5,
        };
        assert!(build_composite(&bp).is_err());
    }
}
