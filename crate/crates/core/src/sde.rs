//! SDE models, Euler–Maruyama simulation, and the discretized likelihood.
//!
//! The continuous model is `dX = b(X) dt + σ₀(X) ς dW` with σ₀ known and ς a
//! constant d×d matrix. On a uniform grid with spacing Δ the Euler–Maruyama
//! scheme replaces the transition law by a Gaussian:
//!
//! ```text
//! X(tᵢ) = X(tᵢ₋₁) + b(X(tᵢ₋₁)) Δ + σ₀(X(tᵢ₋₁)) ς √Δ Zᵢ,   Zᵢ ~ N(0, I_d),
//! p(x′ | x) = N_d(x′ | x + b(x) Δ, σ₀(x) ςςᵀ σ₀(x)ᵀ Δ),
//! ```
//!
//! and the path log likelihood is the sum of these log densities over
//! consecutive pairs, the first pair being `(x₀, X(t₁))`. Drift and diffusion
//! are always evaluated at the *left* endpoint of each increment.

use std::sync::Arc;

use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::linalg;
use crate::randdist::{self, RngStream};
use crate::rkhs::DriftExpansion;

/// Simulation aborts when any state coordinate exceeds this magnitude;
/// heavy-tailed prior experiments can push unstable drifts into blow-up and a
/// loud error beats silent NaN propagation.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

// ---------------------------------------------------------------------------
// ModelSpec
// ---------------------------------------------------------------------------

type DriftFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type MatrixFn = Arc<dyn Fn(&[f64], &mut Mat<f64>) + Send + Sync>;

/// The known state-dependent diffusion factor σ₀.
#[derive(Clone)]
pub enum DiffusionBase {
    /// σ₀ ≡ I_d (additive noise up to ς).
    Identity,
    /// σ₀(x) = s(x) · I_d for a scalar field s.
    Scalar(ScalarFn),
    /// Fully general matrix-valued σ₀.
    Matrix(MatrixFn),
}

/// An SDE model `dX = b(X) dt + σ₀(X) ς dW`.
///
/// Immutable after construction; cloning shares the drift/diffusion closures.
#[derive(Clone)]
pub struct ModelSpec {
    name: String,
    dim: usize,
    drift: DriftFn,
    diffusion_base: DiffusionBase,
    /// The constant noise matrix ς.
    noise: Mat<f64>,
    /// Suggested starting state for simulations of this model.
    default_x0: Vec<f64>,
}

impl ModelSpec {
    /// General constructor. `noise` is ς (d×d); `default_x0` must have
    /// length d.
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        drift: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        diffusion_base: DiffusionBase,
        noise: Mat<f64>,
        default_x0: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("model dimension must be at least 1"));
        }
        if noise.nrows() != dim || noise.ncols() != dim {
            return Err(Error::dims(format!(
                "noise matrix is {}x{}, expected {dim}x{dim}",
                noise.nrows(),
                noise.ncols()
            )));
        }
        if default_x0.len() != dim {
            return Err(Error::dims(format!(
                "default x0 has length {}, expected {dim}",
                default_x0.len()
            )));
        }
        Ok(ModelSpec {
            name: name.into(),
            dim,
            drift: Arc::new(drift),
            diffusion_base,
            noise,
            default_x0,
        })
    }

    /// Convenience constructor for 1-D models: scalar drift, scalar σ₀, and
    /// scalar noise level ς.
    pub fn new_1d(
        name: impl Into<String>,
        drift: impl Fn(f64) -> f64 + Send + Sync + 'static,
        sigma0: Option<impl Fn(f64) -> f64 + Send + Sync + 'static>,
        sigma: f64,
        default_x0: f64,
    ) -> Self {
        let base = match sigma0 {
            Some(s) => DiffusionBase::Scalar(Arc::new(move |x: &[f64]| s(x[0]))),
            None => DiffusionBase::Identity,
        };
        let mut noise = Mat::<f64>::zeros(1, 1);
        noise[(0, 0)] = sigma;
        ModelSpec::new(
            name,
            1,
            move |x: &[f64], out: &mut [f64]| out[0] = drift(x[0]),
            base,
            noise,
            vec![default_x0],
        )
        .expect("1-D constructor dimensions are consistent by construction")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The constant noise matrix ς.
    pub fn noise(&self) -> MatRef<'_, f64> {
        self.noise.as_ref()
    }

    /// Returns a copy of this model with a different noise matrix ς.
    pub fn with_noise(&self, noise: Mat<f64>) -> Result<Self> {
        if noise.nrows() != self.dim || noise.ncols() != self.dim {
            return Err(Error::dims(format!(
                "noise matrix is {}x{}, expected {dim}x{dim}",
                noise.nrows(),
                noise.ncols(),
                dim = self.dim
            )));
        }
        let mut m = self.clone();
        m.noise = noise;
        Ok(m)
    }

    pub fn default_x0(&self) -> &[f64] {
        &self.default_x0
    }

    /// Evaluates the drift into `out`.
    pub fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        (self.drift)(x, out);
    }

    /// Evaluates the drift, allocating.
    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.drift_into(x, &mut out);
        out
    }

    /// True when σ₀ ≡ I (lets fitting code use the constant-diffusion fast
    /// path).
    pub fn has_identity_base(&self) -> bool {
        matches!(self.diffusion_base, DiffusionBase::Identity)
    }

    /// Evaluates σ₀(x) into a d×d matrix.
    pub fn sigma0_into(&self, x: &[f64], out: &mut Mat<f64>) {
        debug_assert_eq!(out.nrows(), self.dim);
        debug_assert_eq!(out.ncols(), self.dim);
        match &self.diffusion_base {
            DiffusionBase::Identity => {
                for j in 0..self.dim {
                    for i in 0..self.dim {
                        out[(i, j)] = if i == j { 1.0 } else { 0.0 };
                    }
                }
            }
            DiffusionBase::Scalar(s) => {
                let v = s(x);
                for j in 0..self.dim {
                    for i in 0..self.dim {
                        out[(i, j)] = if i == j { v } else { 0.0 };
                    }
                }
            }
            DiffusionBase::Matrix(f) => f(x, out),
        }
    }

    /// σ₀(x) as a fresh matrix.
    pub fn sigma0(&self, x: &[f64]) -> Mat<f64> {
        let mut out = Mat::<f64>::zeros(self.dim, self.dim);
        self.sigma0_into(x, &mut out);
        out
    }

    /// One-step transition covariance per unit time,
    /// `σ(x) σ(x)ᵀ = σ₀(x) ς ςᵀ σ₀(x)ᵀ`.
    pub fn diffusion_cov(&self, x: &[f64]) -> Mat<f64> {
        let s0 = self.sigma0(x);
        let s = &s0 * self.noise.as_ref();
        let mut c = &s * s.transpose();
        linalg::symmetrize(&mut c);
        c
    }
}

// ---------------------------------------------------------------------------
// Trajectory and increments
// ---------------------------------------------------------------------------

/// A uniformly sampled d-dimensional path: the data object of the whole
/// pipeline. `x0` is the (known) state at time 0; `states[i]` is `X(tᵢ₊₁)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub x0: Vec<f64>,
    pub delta: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Builds a trajectory, checking shape and grid uniformity.
    pub fn new(x0: Vec<f64>, delta: f64, times: Vec<f64>, states: Vec<Vec<f64>>) -> Result<Self> {
        let t = Trajectory {
            x0,
            delta,
            times,
            states,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    /// Number of observations m (excluding x₀).
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Checks the type's invariants: positive Δ, at least one observation,
    /// consistent dimensions, strictly increasing times with uniform gap Δ
    /// (to 1e-12 relative).
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::invalid(format!(
                "trajectory delta must be positive, got {}",
                self.delta
            )));
        }
        if self.states.is_empty() {
            return Err(Error::invalid("trajectory must contain at least one state"));
        }
        if self.times.len() != self.states.len() {
            return Err(Error::dims(format!(
                "trajectory has {} times but {} states",
                self.times.len(),
                self.states.len()
            )));
        }
        let d = self.x0.len();
        if d == 0 {
            return Err(Error::invalid("trajectory dimension must be at least 1"));
        }
        for (i, s) in self.states.iter().enumerate() {
            if s.len() != d {
                return Err(Error::dims(format!(
                    "state {i} has dimension {}, expected {d}",
                    s.len()
                )));
            }
        }
        let mut prev = 0.0;
        for (i, &t) in self.times.iter().enumerate() {
            // Gap errors from accumulated rounding grow with t; genuine
            // spacing mistakes are on the order of Δ itself.
            let tol = 1e-6 * self.delta + 1e-12 * t.abs();
            if t <= prev {
                return Err(Error::invalid(format!(
                    "trajectory times must be strictly increasing (index {i})"
                )));
            }
            if (t - prev - self.delta).abs() > tol {
                return Err(Error::invalid(format!(
                    "trajectory time gap at index {i} is {}, expected {}",
                    t - prev,
                    self.delta
                )));
            }
            prev = t;
        }
        Ok(())
    }

    /// The left endpoints of the m increments: `x₀, X(t₁), …, X(t_{m−1})`.
    pub fn left_endpoints(&self) -> Vec<Vec<f64>> {
        let mut pts = Vec::with_capacity(self.len());
        pts.push(self.x0.clone());
        pts.extend_from_slice(&self.states[..self.len() - 1]);
        pts
    }
}

/// The stacked increment vector ϑ = (X(t₁)−x₀, X(t₂)−X(t₁), …) together with
/// the left endpoint of each step.
#[derive(Debug, Clone)]
pub struct Increments {
    /// Stacked increments, length m·d; block k is `X(t_{k+1}) − X(t_k)`.
    pub theta: Vec<f64>,
    /// Left endpoint of each increment (m entries of dimension d).
    pub left: Vec<Vec<f64>>,
    pub delta: f64,
    pub dim: usize,
}

impl Increments {
    /// Increments of a trajectory, starting from its stored x₀.
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        Self::with_origin(traj, &traj.x0)
    }

    /// Increments with a caller-chosen origin in place of the stored x₀
    /// (the fitting pipeline substitutes the first observation here).
    pub fn with_origin(traj: &Trajectory, origin: &[f64]) -> Self {
        let d = traj.dim();
        let m = traj.len();
        let mut theta = Vec::with_capacity(m * d);
        let mut left = Vec::with_capacity(m);
        let mut prev: &[f64] = origin;
        for state in &traj.states {
            for k in 0..d {
                theta.push(state[k] - prev[k]);
            }
            left.push(prev.to_vec());
            prev = state;
        }
        Increments {
            theta,
            left,
            delta: traj.delta,
            dim: d,
        }
    }

    /// Number of increments m.
    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    /// View of increment k.
    pub fn block(&self, k: usize) -> &[f64] {
        &self.theta[k * self.dim..(k + 1) * self.dim]
    }
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Simulates `steps` Euler–Maruyama steps from `x0`, recording every state.
///
/// Errors with the offending step index if any state coordinate leaves
/// `[-1e6, 1e6]` or becomes non-finite.
pub fn euler_maruyama_simulate(
    model: &ModelSpec,
    x0: &[f64],
    delta: f64,
    steps: usize,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    euler_maruyama_simulate_discarding(model, x0, delta, steps, 0, rng)
}

/// Like [`euler_maruyama_simulate`], but runs `discard` extra initial steps
/// that are dropped from the record; the returned trajectory's `x0` is the
/// last discarded state and its times restart at Δ. Useful when the data
/// should look pre-equilibrated.
pub fn euler_maruyama_simulate_discarding(
    model: &ModelSpec,
    x0: &[f64],
    delta: f64,
    steps: usize,
    discard: usize,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    const OP: &str = "euler_maruyama_simulate";
    let d = model.dim();
    if x0.len() != d {
        return Err(Error::dims(format!(
            "x0 has length {}, expected {d}",
            x0.len()
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("delta must be positive, got {delta}")));
    }
    if steps == 0 {
        return Err(Error::invalid("steps must be at least 1"));
    }

    let sqrt_delta = delta.sqrt();
    let mut x = x0.to_vec();
    let mut b = vec![0.0; d];
    let mut z = vec![0.0; d];
    let mut noise_term = vec![0.0; d];
    let mut s0 = Mat::<f64>::zeros(d, d);
    let mut states = Vec::with_capacity(steps);
    let mut origin = x0.to_vec();

    for step in 0..discard + steps {
        model.drift_into(&x, &mut b);
        for zi in z.iter_mut() {
            *zi = randdist::sample_standard_normal(rng);
        }
        // noise_term = σ₀(x) ς (√Δ z)
        let w = linalg::mat_vec(model.noise(), &z);
        model.sigma0_into(&x, &mut s0);
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += s0[(i, j)] * w[j];
            }
            noise_term[i] = acc * sqrt_delta;
        }
        for i in 0..d {
            x[i] += b[i] * delta + noise_term[i];
            if !x[i].is_finite() || x[i].abs() > DIVERGENCE_LIMIT {
                let magnitude = if x[i].is_finite() { x[i].abs() } else { f64::INFINITY };
                return Err(Error::Diverged {
                    op: OP,
                    step,
                    magnitude,
                    limit: DIVERGENCE_LIMIT,
                });
            }
        }
        if step < discard {
            if step + 1 == discard {
                origin = x.clone();
            }
        } else {
            states.push(x.clone());
        }
    }

    let times: Vec<f64> = (1..=steps).map(|i| i as f64 * delta).collect();
    Trajectory::new(origin, delta, times, states)
}

// ---------------------------------------------------------------------------
// Likelihood
// ---------------------------------------------------------------------------

fn drift_at(model: &ModelSpec, expansion: Option<&DriftExpansion>, x: &[f64]) -> Vec<f64> {
    match expansion {
        Some(e) => e.eval(x),
        None => model.drift(x),
    }
}

/// Log of the Euler–Maruyama one-step transition density
/// `N_d(x_next | x + b(x) Δ, σ₀(x) ςςᵀ σ₀(x)ᵀ Δ)`.
///
/// When `beta_expansion` is given, the drift is the kernel expansion instead
/// of the model's own `b`; everything else still comes from `model`.
pub fn em_step_logdensity(
    model: &ModelSpec,
    x: &[f64],
    x_next: &[f64],
    delta: f64,
    beta_expansion: Option<&DriftExpansion>,
) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("delta must be positive, got {delta}")));
    }
    let d = model.dim();
    if x.len() != d || x_next.len() != d {
        return Err(Error::dims(
            "em_step_logdensity: state dimensions disagree with model".to_string(),
        ));
    }
    let b = drift_at(model, beta_expansion, x);
    let mean: Vec<f64> = (0..d).map(|i| x[i] + b[i] * delta).collect();
    let mut cov = model.diffusion_cov(x);
    for j in 0..d {
        for i in 0..d {
            cov[(i, j)] *= delta;
        }
    }
    randdist::mvnormal_logdensity(&mean, cov.as_ref(), x_next)
}

/// Path log likelihood: the sum of EM step log densities over consecutive
/// pairs, the first pair being `(x₀, X(t₁))`.
pub fn em_path_loglik(
    traj: &Trajectory,
    model: &ModelSpec,
    beta_expansion: Option<&DriftExpansion>,
) -> Result<f64> {
    traj.validate()?;
    if traj.dim() != model.dim() {
        return Err(Error::dims(format!(
            "trajectory dimension {} does not match model dimension {}",
            traj.dim(),
            model.dim()
        )));
    }
    let mut total = 0.0;
    let mut prev: &[f64] = &traj.x0;
    for state in &traj.states {
        total += em_step_logdensity(model, prev, state, traj.delta, beta_expansion)?;
        prev = state;
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Builtin models
// ---------------------------------------------------------------------------

/// Optional parameters for [`builtin_model`]. Every field has a documented
/// default, so `ModelParams::default()` works for all three builtins.
#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Scalar noise level; ς = sigma (1-D models) or ς = sigma·I (3-D model).
    /// Default 1.0 for the 1-D models and 0.1 for `michaelis_menten`.
    pub sigma: Option<f64>,
    /// Full ς matrix override (row-major, d×d). Takes precedence over `sigma`.
    pub noise: Option<Vec<Vec<f64>>>,
    /// Michaelis–Menten rate constants `(k₁, k₂, k₋₁, k₋₂)`.
    /// Default `(1, 1, 1, 0.5)`.
    pub rates: Option<[f64; 4]>,
    /// Michaelis–Menten conservation total `c_tot = x_E + x_ES`. Default 2.
    pub c_tot: Option<f64>,
    /// Starting-state override for simulations.
    pub x0: Option<Vec<f64>>,
}

/// Names accepted by [`builtin_model`].
pub const BUILTIN_MODEL_NAMES: [&str; 3] =
    ["double_well", "double_well_variant", "michaelis_menten"];

/// Looks up one of the built-in benchmark models by name.
///
/// * `double_well` — `b(x) = 4x(1−x²)`, σ₀ ≡ 1, default ς = 1, x₀ = 0.5.
///   Langevin dynamics in the potential `u(x) = x⁴ − 2x²`; bimodal stationary
///   law with modes at ±1.
/// * `double_well_variant` — `b(x) = x(1−x²)`, σ₀(x) = √(1+x²) (multiplicative
///   noise), default ς = 1, x₀ = 0.5. Stationary law bimodal iff ς < 1.
/// * `michaelis_menten` — reduced 3-D enzyme kinetics over
///   `(x_E, x_S, x_P)` with `x_ES = c_tot − x_E` substituted via the
///   conservation law `X_E + X_ES = c_tot`:
///
///   ```text
///   b_E = −k₁ x_E x_S − k₋₂ x_E x_P + (k₋₁ + k₂) x_ES
///   b_S = −k₁ x_E x_S + k₋₁ x_ES
///   b_P =  k₂ x_ES − k₋₂ x_E x_P
///   ```
///
///   σ₀ ≡ I₃, default ς = 0.1·I₃, rates `(k₁, k₂, k₋₁, k₋₂) = (1, 1, 1, 0.5)`,
///   `c_tot = 2`, x₀ = (1, 5, 0).
pub fn builtin_model(name: &str, params: &ModelParams) -> Result<ModelSpec> {
    let mut model = match name {
        "double_well" => ModelSpec::new_1d(
            name,
            |x| 4.0 * x * (1.0 - x * x),
            None::<fn(f64) -> f64>,
            params.sigma.unwrap_or(1.0),
            0.5,
        ),
        "double_well_variant" => ModelSpec::new_1d(
            name,
            |x| x * (1.0 - x * x),
            Some(|x: f64| (1.0 + x * x).sqrt()),
            params.sigma.unwrap_or(1.0),
            0.5,
        ),
        "michaelis_menten" => {
            let [k1, k2, km1, km2] = params.rates.unwrap_or([1.0, 1.0, 1.0, 0.5]);
            let c_tot = params.c_tot.unwrap_or(2.0);
            let sigma = params.sigma.unwrap_or(0.1);
            let mut noise = Mat::<f64>::zeros(3, 3);
            for i in 0..3 {
                noise[(i, i)] = sigma;
            }
            ModelSpec::new(
                name,
                3,
                move |x: &[f64], out: &mut [f64]| {
                    let (xe, xs, xp) = (x[0], x[1], x[2]);
                    let xes = c_tot - xe;
                    out[0] = -k1 * xe * xs - km2 * xe * xp + (km1 + k2) * xes;
                    out[1] = -k1 * xe * xs + km1 * xes;
                    out[2] = k2 * xes - km2 * xe * xp;
                },
                DiffusionBase::Identity,
                noise,
                vec![1.0, 5.0, 0.0],
            )?
        }
        other => {
            return Err(Error::unknown("model", other, &BUILTIN_MODEL_NAMES));
        }
    };

    if let Some(noise_rows) = &params.noise {
        let d = model.dim();
        if noise_rows.len() != d || noise_rows.iter().any(|r| r.len() != d) {
            return Err(Error::dims(format!(
                "noise override must be {d}x{d} for model `{name}`"
            )));
        }
        model = model.with_noise(linalg::mat_from_rows(noise_rows))?;
    }
    if let Some(x0) = &params.x0 {
        if x0.len() != model.dim() {
            return Err(Error::dims(format!(
                "x0 override has length {}, expected {}",
                x0.len(),
                model.dim()
            )));
        }
        model.default_x0 = x0.clone();
    }
    Ok(model)
}
