//! Finite-time identification lab for linear time-invariant systems.
//!
//! The process under study is `X_{t+1} = A X_t + η_{t+1}` (optionally with a
//! control term `B U_t`). The crate simulates it across stable, marginally
//! stable and explosive spectral regimes, computes the OLS estimator together
//! with its covariance/martingale diagnostics, evaluates finite-time error
//! bounds per regime, and runs seeded Monte Carlo experiments that check the
//! bounds and rates empirically.
//!
//! Modules:
//! - [`matrix`]: dense matrix helpers (Gramians, Jordan blocks, pseudo-inverse,
//!   CSV I/O, log-domain traces).
//! - [`spectral`]: eigenvalue-regime classification, regularity, Jordan
//!   structures and the outbox norms.
//! - [`sim`]: trajectory simulation (plain and inverse-scaled), noise models,
//!   control augmentation, composite-system construction.
//! - [`ols`]: the least-squares estimator, its error decomposition and the
//!   `Y_T`/`S_T`/`U_T`/`F_T` diagnostics.
//! - [`bounds`]: the per-regime finite-time error bounds and the quantities
//!   they are built from.
//! - [`experiments`]: Monte Carlo drivers (rate sweeps, inconsistency demo,
//!   covariance-spectrum growth, concentration coverage, structural checks).

pub mod bounds;
pub mod error;
pub mod experiments;
pub mod matrix;
pub mod ols;
pub mod rng;
pub mod sim;
pub mod spectral;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
