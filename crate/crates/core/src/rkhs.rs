//! Kernels, Gram systems, and finite drift expansions.
//!
//! The estimators in this crate all live in a vector-valued RKHS with a
//! separable matrix kernel `κ(u, v) = Σᵣ kᵣ(u, v) Bᵣ`, where each `kᵣ` is a
//! scalar kernel and each `Bᵣ` is symmetric psd. Every fitted drift is a
//! finite expansion over the observed states,
//!
//! ```text
//! b(·) = Σᵢ κ(·, cᵢ) βᵢ,    βᵢ ∈ ℝ^d,
//! ```
//!
//! and the block Gram matrix `𝒦 = Σᵣ Kᵣ ⊗ Bᵣ` turns fitting into finite
//! linear algebra. This module also houses the no-shrinkage ridge baseline
//! (the posterior mean under a fixed isotropic prior) and quadrature
//! representer bases for data observed through integral functionals.

use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::linalg;
use crate::sde::{Increments, ModelSpec, Trajectory};

// ---------------------------------------------------------------------------
// Scalar kernels
// ---------------------------------------------------------------------------

/// A positive-definite scalar kernel on ℝ^d.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarKernel {
    /// `k(u, v) = exp(−‖u − v‖² / (2ℓ²))` with bandwidth ℓ.
    Gaussian { bandwidth: f64 },
}

impl ScalarKernel {
    /// Gaussian kernel with bandwidth ℓ > 0. The benchmark setting is ℓ = 1,
    /// i.e. `κ₀(x, y) = exp(−(x − y)²/2)` in one dimension.
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::invalid(format!(
                "kernel bandwidth must be a positive real, got {bandwidth}"
            )));
        }
        Ok(ScalarKernel::Gaussian { bandwidth })
    }

    pub fn bandwidth(&self) -> f64 {
        match self {
            ScalarKernel::Gaussian { bandwidth } => *bandwidth,
        }
    }

    /// Evaluates the kernel on two points of equal dimension.
    pub fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), v.len());
        match self {
            ScalarKernel::Gaussian { bandwidth } => {
                let mut sq = 0.0;
                for (a, b) in u.iter().zip(v) {
                    let diff = a - b;
                    sq += diff * diff;
                }
                (-sq / (2.0 * bandwidth * bandwidth)).exp()
            }
        }
    }

    /// One-dimensional evaluation.
    pub fn eval_scalar(&self, u: f64, v: f64) -> f64 {
        self.eval(&[u], &[v])
    }
}

/// Dense scalar Gram matrix `K[i][j] = k(rows[i], cols[j])`; symmetrized when
/// the two point lists are identical.
pub fn scalar_gram(kernel: &ScalarKernel, rows: &[Vec<f64>], cols: &[Vec<f64>]) -> Mat<f64> {
    let mut k = Mat::<f64>::zeros(rows.len(), cols.len());
    for (j, c) in cols.iter().enumerate() {
        for (i, r) in rows.iter().enumerate() {
            k[(i, j)] = kernel.eval(r, c);
        }
    }
    if rows == cols {
        linalg::symmetrize(&mut k);
    }
    k
}

// ---------------------------------------------------------------------------
// Matrix kernels
// ---------------------------------------------------------------------------

/// A separable matrix-valued kernel `κ(u, v) = Σᵣ kᵣ(u, v) Bᵣ` with each `Bᵣ`
/// a symmetric psd n×n matrix. `κ(u, v) = κ(v, u)ᵀ` holds by construction.
#[derive(Clone)]
pub struct MatrixKernel {
    terms: Vec<(ScalarKernel, Mat<f64>)>,
    block_dim: usize,
}

impl MatrixKernel {
    /// Builds a kernel from its terms, validating that every `Bᵣ` is square
    /// of a common size, symmetric to 1e-12 relative, and psd (checked by a
    /// jittered Cholesky factorization, which admits semi-definite matrices
    /// up to roundoff).
    pub fn new(terms: Vec<(ScalarKernel, Mat<f64>)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::invalid("matrix kernel needs at least one term"));
        }
        let block_dim = terms[0].1.nrows();
        if block_dim == 0 {
            return Err(Error::invalid("matrix kernel blocks must be nonempty"));
        }
        for (r, (_, b)) in terms.iter().enumerate() {
            if b.nrows() != block_dim || b.ncols() != block_dim {
                return Err(Error::dims(format!(
                    "kernel term {r} has block {}x{}, expected {block_dim}x{block_dim}",
                    b.nrows(),
                    b.ncols()
                )));
            }
            if !linalg::is_symmetric(b.as_ref(), 1e-12) {
                return Err(Error::invalid(format!(
                    "kernel term {r}: block matrix must be symmetric"
                )));
            }
            if linalg::max_abs(b.as_ref()) == 0.0 {
                return Err(Error::invalid(format!(
                    "kernel term {r}: block matrix is identically zero"
                )));
            }
            linalg::cholesky(b.as_ref(), "matrix kernel psd check").map_err(|_| {
                Error::invalid(format!(
                    "kernel term {r}: block matrix is not positive semidefinite"
                ))
            })?;
        }
        Ok(MatrixKernel { terms, block_dim })
    }

    /// Single-term kernel `k(u, v) · B`.
    pub fn single(kernel: ScalarKernel, b: Mat<f64>) -> Result<Self> {
        MatrixKernel::new(vec![(kernel, b)])
    }

    /// Isotropic kernel `k(u, v) · I_n` — the benchmark choice (`κ₀ I₃` in
    /// the three-dimensional experiments and plain `κ₀` in one dimension).
    pub fn isotropic(kernel: ScalarKernel, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("matrix kernel blocks must be nonempty"));
        }
        MatrixKernel::single(kernel, Mat::identity(n, n))
    }

    pub fn terms(&self) -> &[(ScalarKernel, Mat<f64>)] {
        &self.terms
    }

    /// The output dimension n of the kernel blocks.
    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    /// True when the kernel is a single scalar term times the identity, in
    /// which case Grams are Kronecker products with the identity and solvers
    /// can use cheaper layouts.
    pub fn is_isotropic(&self) -> bool {
        if self.terms.len() != 1 {
            return false;
        }
        let b = &self.terms[0].1;
        for j in 0..self.block_dim {
            for i in 0..self.block_dim {
                let expected = if i == j { 1.0 } else { 0.0 };
                if b[(i, j)] != expected {
                    return false;
                }
            }
        }
        true
    }
}

/// Evaluates `κ(u, v) = Σᵣ kᵣ(u, v) Bᵣ` as an n×n matrix.
pub fn kernel_eval(kernel: &MatrixKernel, u: &[f64], v: &[f64]) -> Result<Mat<f64>> {
    if u.len() != v.len() {
        return Err(Error::dims(format!(
            "kernel_eval: points have dimensions {} and {}",
            u.len(),
            v.len()
        )));
    }
    let n = kernel.block_dim();
    let mut out = Mat::<f64>::zeros(n, n);
    for (k, b) in kernel.terms() {
        let w = k.eval(u, v);
        for j in 0..n {
            for i in 0..n {
                out[(i, j)] += w * b[(i, j)];
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Gram systems
// ---------------------------------------------------------------------------

/// A block Gram matrix `K` with block `(i, j) = κ(eval_points[i], centers[j])`,
/// stored dense as `(p·n) × (m·n)`. Square Grams (eval points equal to the
/// centers) are symmetrized to kill roundoff asymmetry before factorization.
#[derive(Clone)]
pub struct GramSystem {
    eval_points: Vec<Vec<f64>>,
    centers: Vec<Vec<f64>>,
    k: Mat<f64>,
    block_dim: usize,
}

impl GramSystem {
    pub fn matrix(&self) -> MatRef<'_, f64> {
        self.k.as_ref()
    }

    pub fn eval_points(&self) -> &[Vec<f64>] {
        &self.eval_points
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    /// Block size n (the kernel's output dimension).
    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn is_square(&self) -> bool {
        self.k.nrows() == self.k.ncols()
    }
}

/// Assembles the block Gram system; for separable kernels this is
/// `Σᵣ Kᵣ ⊗ Bᵣ` with `Kᵣ` the scalar Gram of the r-th term.
pub fn gram_matrix(
    kernel: &MatrixKernel,
    eval_points: &[Vec<f64>],
    centers: &[Vec<f64>],
) -> Result<GramSystem> {
    if eval_points.is_empty() || centers.is_empty() {
        return Err(Error::invalid("gram_matrix: point lists must be nonempty"));
    }
    let d = eval_points[0].len();
    if eval_points.iter().chain(centers).any(|x| x.len() != d) {
        return Err(Error::dims(
            "gram_matrix: all points must share one dimension".to_string(),
        ));
    }
    let n = kernel.block_dim();
    let (p, m) = (eval_points.len(), centers.len());
    let mut k = Mat::<f64>::zeros(p * n, m * n);
    for (scalar, b) in kernel.terms() {
        let ks = scalar_gram(scalar, eval_points, centers);
        for j in 0..m {
            for i in 0..p {
                let w = ks[(i, j)];
                for bj in 0..n {
                    for bi in 0..n {
                        k[(i * n + bi, j * n + bj)] += w * b[(bi, bj)];
                    }
                }
            }
        }
    }
    if eval_points == centers {
        linalg::symmetrize(&mut k);
    }
    Ok(GramSystem {
        eval_points: eval_points.to_vec(),
        centers: centers.to_vec(),
        k,
        block_dim: n,
    })
}

// ---------------------------------------------------------------------------
// Drift expansions
// ---------------------------------------------------------------------------

/// A finite kernel expansion `b(·) = Σᵢ κ(·, cᵢ) βᵢ` — the form every
/// estimator in this crate produces.
#[derive(Clone)]
pub struct DriftExpansion {
    kernel: MatrixKernel,
    centers: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DriftExpansion {
    /// Builds an expansion; `weights` is the stacked `(m·n)`-vector whose
    /// i-th block of length n is βᵢ.
    pub fn new(kernel: MatrixKernel, centers: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::invalid("drift expansion needs at least one center"));
        }
        let n = kernel.block_dim();
        if weights.len() != centers.len() * n {
            return Err(Error::dims(format!(
                "expansion has {} centers of block size {n} but {} weights",
                centers.len(),
                weights.len()
            )));
        }
        let d = centers[0].len();
        if centers.iter().any(|c| c.len() != d) {
            return Err(Error::dims(
                "expansion centers must share one dimension".to_string(),
            ));
        }
        Ok(DriftExpansion {
            kernel,
            centers,
            weights,
        })
    }

    /// The zero function over the given centers.
    pub fn zero(kernel: MatrixKernel, centers: Vec<Vec<f64>>) -> Result<Self> {
        let len = centers.len() * kernel.block_dim();
        DriftExpansion::new(kernel, centers, vec![0.0; len])
    }

    pub fn kernel(&self) -> &MatrixKernel {
        &self.kernel
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn num_centers(&self) -> usize {
        self.centers.len()
    }

    /// Output dimension n of the expansion.
    pub fn output_dim(&self) -> usize {
        self.kernel.block_dim()
    }

    /// The full stacked weight vector β.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The i-th weight block βᵢ ∈ ℝⁿ.
    pub fn weight_block(&self, i: usize) -> &[f64] {
        let n = self.kernel.block_dim();
        &self.weights[i * n..(i + 1) * n]
    }

    /// Same expansion with new weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        DriftExpansion::new(self.kernel.clone(), self.centers.clone(), weights)
    }

    /// Evaluates `Σᵢ κ(x, cᵢ) βᵢ` into `out`.
    ///
    /// Since the blocks Bᵣ do not depend on the center, the sum factors as
    /// `Σᵣ Bᵣ (Σᵢ kᵣ(x, cᵢ) βᵢ)`, one n-vector accumulation per term.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.kernel.block_dim();
        debug_assert_eq!(out.len(), n);
        out.fill(0.0);
        let mut acc = vec![0.0; n];
        for (scalar, b) in self.kernel.terms() {
            acc.fill(0.0);
            for (i, c) in self.centers.iter().enumerate() {
                let w = scalar.eval(x, c);
                let beta = &self.weights[i * n..(i + 1) * n];
                for (a, bk) in acc.iter_mut().zip(beta) {
                    *a += w * bk;
                }
            }
            for bi in 0..n {
                let mut s = 0.0;
                for bj in 0..n {
                    s += b[(bi, bj)] * acc[bj];
                }
                out[bi] += s;
            }
        }
    }

    /// Evaluates the expansion, allocating.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.kernel.block_dim()];
        self.eval_into(x, &mut out);
        out
    }
}

/// Free-function form of [`DriftExpansion::eval`].
pub fn expansion_eval(exp: &DriftExpansion, x: &[f64]) -> Vec<f64> {
    exp.eval(x)
}

// ---------------------------------------------------------------------------
// Weighted normal equations (shared by the ridge baseline and the samplers)
// ---------------------------------------------------------------------------

/// Given the rectangular block Gram `𝒦₀`, per-increment precision blocks
/// `D_k` (d×d), the stacked increments ϑ, and the step Δ, forms
/// `(Δ·𝒦₀ᵀD𝒦₀ symmetrized, 𝒦₀ᵀDϑ)` — the data part of the β full
/// conditional.
pub(crate) fn weighted_normal_equations(
    k0: MatRef<'_, f64>,
    d_blocks: &[Mat<f64>],
    theta: &[f64],
    delta: f64,
) -> (Mat<f64>, Vec<f64>) {
    let rows = k0.nrows();
    let cols = k0.ncols();
    let m = d_blocks.len();
    debug_assert!(m > 0);
    let d = rows / m;
    debug_assert_eq!(rows, m * d);
    debug_assert_eq!(theta.len(), rows);

    // dk = D·𝒦₀ block row by block row; dtheta = D·ϑ likewise.
    let mut dk = Mat::<f64>::zeros(rows, cols);
    let mut dtheta = vec![0.0; rows];
    for (k, dkk) in d_blocks.iter().enumerate() {
        debug_assert_eq!(dkk.nrows(), d);
        let base = k * d;
        for j in 0..cols {
            for bi in 0..d {
                let mut s = 0.0;
                for bj in 0..d {
                    s += dkk[(bi, bj)] * k0[(base + bj, j)];
                }
                dk[(base + bi, j)] = s;
            }
        }
        for bi in 0..d {
            let mut s = 0.0;
            for bj in 0..d {
                s += dkk[(bi, bj)] * theta[base + bj];
            }
            dtheta[base + bi] = s;
        }
    }

    let mut normal = k0.transpose() * dk.as_ref();
    for j in 0..cols {
        for i in 0..cols {
            normal[(i, j)] *= delta;
        }
    }
    linalg::symmetrize(&mut normal);
    let rhs = linalg::mat_transpose_vec(k0, &dtheta);
    (normal, rhs)
}

/// Scalar-weight specialization: `(𝒦₀ᵀ diag(w) 𝒦₀ symmetrized, 𝒦₀ᵀ(w∘ϑ))`.
/// Callers apply their own Δ and noise scalings — with σ₀ scalar and d = 1
/// the precision blocks are `ς⁻²·wₖ`, so these two products can be formed
/// once per chain and rescaled every sweep.
pub(crate) fn scalar_weighted_normal_equations(
    k0: MatRef<'_, f64>,
    w: &[f64],
    theta: &[f64],
) -> (Mat<f64>, Vec<f64>) {
    let rows = k0.nrows();
    let cols = k0.ncols();
    debug_assert_eq!(w.len(), rows);
    debug_assert_eq!(theta.len(), rows);
    let mut wk = Mat::<f64>::zeros(rows, cols);
    let mut wtheta = vec![0.0; rows];
    for i in 0..rows {
        for j in 0..cols {
            wk[(i, j)] = w[i] * k0[(i, j)];
        }
        wtheta[i] = w[i] * theta[i];
    }
    let mut normal = k0.transpose() * wk.as_ref();
    linalg::symmetrize(&mut normal);
    let rhs = linalg::mat_transpose_vec(k0, &wtheta);
    (normal, rhs)
}

/// Per-increment precision blocks `D_k = (σ₀(x_k) ςςᵀ σ₀(x_k)ᵀ)⁻¹` at the
/// left endpoints, using the model's own noise matrix.
pub(crate) fn model_precision_blocks(
    model: &ModelSpec,
    left: &[Vec<f64>],
) -> Result<Vec<Mat<f64>>> {
    left.iter()
        .map(|x| linalg::spd_inverse(model.diffusion_cov(x).as_ref(), "diffusion precision"))
        .collect()
}

// ---------------------------------------------------------------------------
// Ridge baseline
// ---------------------------------------------------------------------------

/// No-shrinkage ridge estimate: the posterior-mean formula with a fixed
/// isotropic prior covariance `η = γ⁻¹ I`,
///
/// ```text
/// β̂ = (Δ 𝒦₀ᵀ D 𝒦₀ + γI)⁻¹ 𝒦₀ᵀ D ϑ,
/// ```
///
/// where `𝒦₀` is the Gram block between the m left endpoints and the m
/// observed states, `D` holds the inverse diffusion covariances at the left
/// endpoints (from `sigma_model`'s σ₀ and ς), and ϑ stacks the increments.
/// Interpretable as the MAP drift under a fixed Gaussian prior; the Bayesian
/// samplers replace γ⁻¹I with learned shrinkage scales.
pub fn ridge_map_estimate(
    traj: &Trajectory,
    kernel: &MatrixKernel,
    sigma_model: &ModelSpec,
    ridge: f64,
) -> Result<DriftExpansion> {
    traj.validate()?;
    if !(ridge > 0.0) || !ridge.is_finite() {
        return Err(Error::invalid(format!(
            "ridge parameter must be a positive real, got {ridge}"
        )));
    }
    let d = traj.dim();
    if sigma_model.dim() != d {
        return Err(Error::dims(format!(
            "sigma model dimension {} does not match trajectory dimension {d}",
            sigma_model.dim()
        )));
    }
    if kernel.block_dim() != d {
        return Err(Error::dims(format!(
            "kernel block dimension {} does not match trajectory dimension {d}",
            kernel.block_dim()
        )));
    }

    let inc = Increments::from_trajectory(traj);
    let centers = traj.states.clone();
    let gram = gram_matrix(kernel, &inc.left, &centers)?;
    let d_blocks = model_precision_blocks(sigma_model, &inc.left)?;
    let (mut normal, rhs) =
        weighted_normal_equations(gram.matrix(), &d_blocks, &inc.theta, traj.delta);
    for i in 0..normal.nrows() {
        normal[(i, i)] += ridge;
    }
    let chol = linalg::cholesky(normal.as_ref(), "ridge normal equations")?;
    let mut beta = rhs;
    chol.solve_in_place(&mut beta);
    DriftExpansion::new(kernel.clone(), centers, beta)
}

/// The quadratic objective the ridge estimate minimizes: the Euler–Maruyama
/// weighted least squares plus the ridge penalty,
///
/// ```text
/// Σₖ ½ (ϑₖ − Δ·b(xₖ))ᵀ (Δ σσᵀ(xₖ))⁻¹ (ϑₖ − Δ·b(xₖ)) + (γ/2)‖β‖².
/// ```
///
/// Exposed as a diagnostic so optimality is testable directly.
pub fn em_quadratic_objective(
    traj: &Trajectory,
    sigma_model: &ModelSpec,
    ridge: f64,
    expansion: &DriftExpansion,
) -> Result<f64> {
    traj.validate()?;
    let d = traj.dim();
    let inc = Increments::from_trajectory(traj);
    let d_blocks = model_precision_blocks(sigma_model, &inc.left)?;
    let mut total = 0.0;
    let mut b = vec![0.0; d];
    for (k, x) in inc.left.iter().enumerate() {
        expansion.eval_into(x, &mut b);
        let theta_k = inc.block(k);
        let r: Vec<f64> = (0..d).map(|i| theta_k[i] - traj.delta * b[i]).collect();
        let dk = &d_blocks[k];
        let mut quad = 0.0;
        for i in 0..d {
            for j in 0..d {
                quad += r[i] * dk[(i, j)] * r[j];
            }
        }
        total += 0.5 * quad / traj.delta;
    }
    let penalty: f64 = expansion.weights().iter().map(|w| w * w).sum();
    Ok(total + 0.5 * ridge * penalty)
}

// ---------------------------------------------------------------------------
// Quadrature representer bases
// ---------------------------------------------------------------------------

/// Representer basis functions `fᵢ(u) = ∫ₐᵇ k(u, z) ρᵢ(z) dz` for data
/// observed through integral functionals `Lᵢ(h) = ∫ ρᵢ(z) h(z) dz`, with the
/// integrals replaced by composite-trapezoid quadrature on N nodes.
pub struct QuadratureBasis {
    kernel: ScalarKernel,
    nodes: Vec<f64>,
    quad_weights: Vec<f64>,
    /// ρᵢ evaluated at the nodes, one row per functional.
    rho: Vec<Vec<f64>>,
    system: Mat<f64>,
}

impl QuadratureBasis {
    /// Number of basis functions.
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Evaluates `fᵢ(u) = Σⱼ wⱼ k(u, zⱼ) ρᵢ(zⱼ)`.
    pub fn basis_eval(&self, i: usize, u: f64) -> f64 {
        let rho = &self.rho[i];
        let mut acc = 0.0;
        for ((&z, &w), &r) in self.nodes.iter().zip(&self.quad_weights).zip(rho) {
            acc += w * self.kernel.eval_scalar(u, z) * r;
        }
        acc
    }

    /// The induced m×m system matrix `Mᵢⱼ = Lᵢ(fⱼ)` (the double-quadrature
    /// Gram of the functionals), symmetrized; this is what a ridge solve for
    /// functional data factors.
    pub fn system_matrix(&self) -> MatRef<'_, f64> {
        self.system.as_ref()
    }
}

/// Weight function ρ(xᵢ, ·) of one integral functional.
pub type WeightFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Builds the representer basis for the given functionals on `[a, b]` using
/// composite-trapezoid quadrature with `nodes ≥ 2` points.
pub fn representer_basis_quadrature(
    kernel: &ScalarKernel,
    functionals: &[WeightFn],
    interval: (f64, f64),
    nodes: usize,
) -> Result<QuadratureBasis> {
    let (a, b) = interval;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::invalid(format!(
            "quadrature interval must be finite with a < b, got [{a}, {b}]"
        )));
    }
    if nodes < 2 {
        return Err(Error::invalid(format!(
            "composite trapezoid needs at least 2 nodes, got {nodes}"
        )));
    }
    if functionals.is_empty() {
        return Err(Error::invalid("at least one weight function is required"));
    }

    let n = nodes;
    let h = (b - a) / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|j| a + h * j as f64).collect();
    let mut quad_weights = vec![h; n];
    quad_weights[0] = 0.5 * h;
    quad_weights[n - 1] = 0.5 * h;

    let m = functionals.len();
    let rho: Vec<Vec<f64>> = functionals
        .iter()
        .map(|f| grid.iter().map(|&z| f(z)).collect())
        .collect();

    // f_j at the nodes, then M_ij = Σₐ wₐ ρ_i(zₐ) f_j(zₐ).
    let mut f_at_nodes = Mat::<f64>::zeros(n, m);
    for j in 0..m {
        for (ai, &za) in grid.iter().enumerate() {
            let mut acc = 0.0;
            for ((&zb, &wb), &r) in grid.iter().zip(&quad_weights).zip(&rho[j]) {
                acc += wb * kernel.eval_scalar(za, zb) * r;
            }
            f_at_nodes[(ai, j)] = acc;
        }
    }
    let mut system = Mat::<f64>::zeros(m, m);
    for j in 0..m {
        for i in 0..m {
            let mut acc = 0.0;
            for ai in 0..n {
                acc += quad_weights[ai] * rho[i][ai] * f_at_nodes[(ai, j)];
            }
            system[(i, j)] = acc;
        }
    }
    linalg::symmetrize(&mut system);

    Ok(QuadratureBasis {
        kernel: *kernel,
        nodes: grid,
        quad_weights,
        rho,
        system,
    })
}
