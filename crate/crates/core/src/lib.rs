//! Learning the drift of a stochastic differential equation from one
//! high-frequency trajectory.
//!
//! The model class is
//!
//! ```text
//! dX(t) = b(X(t)) dt + σ₀(X(t)) ς dW(t),        X(0) = x₀ ∈ ℝ^d,
//! ```
//!
//! with the state-dependent factor σ₀ known and the drift `b` and the constant
//! d×d matrix ς unknown. Given observations X(t₁), …, X(t_m) on a uniform grid
//! with spacing Δ, the Euler–Maruyama transition density turns the path into a
//! Gaussian likelihood, and a representer argument reduces the unknown drift to
//! a finite kernel expansion
//!
//! ```text
//! b(·) = Σᵢ κ₀(·, X(tᵢ)) βᵢ,        βᵢ ∈ ℝ^d,
//! ```
//!
//! with one weight vector per observed state. The crate provides:
//!
//! * [`randdist`] — seeded, stream-addressed random variates and the density
//!   functions the shrinkage priors are built from,
//! * [`sde`] — model definitions, Euler–Maruyama simulation, and the
//!   discretized likelihood,
//! * [`rkhs`] — kernels, Gram systems, drift expansions, the ridge (MAP)
//!   baseline, and quadrature representer bases for integral-functional data,
//! * [`gibbs`] — two exact Gibbs samplers over the expansion weights: a
//!   t-prior sampler and a Horseshoe-type global–local sampler, both with an
//!   inverse-Wishart move for the diffusion parameter ςςᵀ,
//! * [`eval`] — MSE grids, 1-D stationary densities via the speed measure,
//!   the Kolmogorov metric, and figure-ready data bundles,
//! * [`estimator`] — a name-addressed registry of drift estimation strategies
//!   (`ridge`, `t`, `horseshoe`) behind one object-safe trait.
//!
//! Everything downstream of a seed is deterministic: the same configuration
//! and `(seed, stream)` pair reproduce results bit for bit.

pub mod error;
pub mod estimator;
pub mod eval;
pub mod gibbs;
pub mod linalg;
pub mod randdist;
pub mod rkhs;
pub mod sde;

pub use error::{Error, Result};

/// The dense matrix type appearing throughout the public API
/// (re-exported so downstream crates need not depend on `faer` directly).
pub use faer::Mat;
