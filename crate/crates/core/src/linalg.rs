//! Thin dense-linear-algebra layer over [`faer`].
//!
//! Everything the samplers need funnels through here so the numeric policies
//! live in one place:
//!
//! * Cholesky factorization retries **once** with a jitter of
//!   `1e-10 · trace(M)/n` added to the diagonal, then fails. The jitter exists
//!   to absorb roundoff-scale indefiniteness, not to mask modeling errors.
//! * Square Gram matrices are symmetrized as `(K + Kᵀ)/2` before
//!   factorization.
//! * Solves against a Cholesky factor use triangular substitution, never an
//!   explicit inverse.

use faer::prelude::Solve;
use faer::{Mat, MatMut, MatRef};

use crate::error::{Error, Result};

/// Relative diagonal jitter applied on the single Cholesky retry.
pub const CHOLESKY_JITTER_REL: f64 = 1e-10;

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = A`.
pub struct Cholesky {
    lower: Mat<f64>,
    /// Whether the factorization needed the jitter retry.
    pub jittered: bool,
}

impl Cholesky {
    /// Dimension of the factored matrix.
    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    /// View of the lower factor (entries above the diagonal are zero).
    pub fn lower(&self) -> MatRef<'_, f64> {
        self.lower.as_ref()
    }

    /// Solves `A x = b` in place via forward/backward substitution.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        assert_eq!(x.len(), n, "rhs length must match factor dimension");
        let rhs = MatMut::from_column_major_slice_mut(x, n, 1);
        solve_lower(self.lower.as_ref(), rhs);
        let rhs = MatMut::from_column_major_slice_mut(x, n, 1);
        solve_upper(self.lower.transpose(), rhs);
    }

    /// Solves `A X = B` for a matrix right-hand side.
    pub fn solve_mat(&self, b: MatRef<'_, f64>) -> Mat<f64> {
        let mut x = b.to_owned();
        solve_lower(self.lower.as_ref(), x.as_mut());
        solve_upper(self.lower.transpose(), x.as_mut());
        x
    }

    /// Solves `Lᵀ x = z` in place. With `z ~ N(0, I)` this turns a factor of
    /// the *precision* matrix into a draw from the corresponding covariance.
    pub fn solve_upper_in_place(&self, z: &mut [f64]) {
        let n = self.dim();
        assert_eq!(z.len(), n, "rhs length must match factor dimension");
        let rhs = MatMut::from_column_major_slice_mut(z, n, 1);
        solve_upper(self.lower.transpose(), rhs);
    }

    /// Multiplies `L v` in place (used to push white noise through a
    /// covariance factor).
    pub fn apply_lower_in_place(&self, v: &mut [f64]) {
        let n = self.dim();
        assert_eq!(v.len(), n, "vector length must match factor dimension");
        for i in (0..n).rev() {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += self.lower[(i, j)] * v[j];
            }
            v[i] = acc;
        }
    }

    /// `log det A = 2 Σ log L_ii`.
    pub fn logdet(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim() {
            acc += self.lower[(i, i)].ln();
        }
        2.0 * acc
    }

    /// Explicit inverse `A⁻¹`, formed by solving against the identity.
    /// Intended for small matrices (per-center scale blocks and the like).
    pub fn inverse(&self) -> Mat<f64> {
        let n = self.dim();
        let mut inv = self.solve_mat(Mat::<f64>::identity(n, n).as_ref());
        symmetrize(&mut inv);
        inv
    }
}

fn solve_lower(tri: MatRef<'_, f64>, rhs: MatMut<'_, f64>) {
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(
        tri,
        rhs,
        faer::get_global_parallelism(),
    );
}

fn solve_upper(tri: MatRef<'_, f64>, rhs: MatMut<'_, f64>) {
    faer::linalg::triangular_solve::solve_upper_triangular_in_place(
        tri,
        rhs,
        faer::get_global_parallelism(),
    );
}

/// Cholesky-factors a symmetric positive-definite matrix with the crate's
/// jitter policy: one retry with `1e-10 · trace/n` on the diagonal, then an
/// error naming `op`.
pub fn cholesky(a: MatRef<'_, f64>, op: &'static str) -> Result<Cholesky> {
    debug_assert_eq!(a.nrows(), a.ncols());
    if let Ok(f) = a.llt(faer::Side::Lower) {
        return Ok(Cholesky {
            lower: f.L().to_owned(),
            jittered: false,
        });
    }
    let n = a.nrows();
    let mut trace = 0.0;
    for i in 0..n {
        trace += a[(i, i)];
    }
    let jitter = CHOLESKY_JITTER_REL * trace / n as f64;
    let mut aj = a.to_owned();
    for i in 0..n {
        aj[(i, i)] += jitter;
    }
    match aj.llt(faer::Side::Lower) {
        Ok(f) => Ok(Cholesky {
            lower: f.L().to_owned(),
            jittered: true,
        }),
        Err(_) => Err(Error::numeric(
            op,
            format!("Cholesky failed for {n}x{n} matrix even after jitter {jitter:.3e}"),
        )),
    }
}

/// Inverse of a symmetric positive-definite matrix via Cholesky solves.
pub fn spd_inverse(a: MatRef<'_, f64>, op: &'static str) -> Result<Mat<f64>> {
    Ok(cholesky(a, op)?.inverse())
}

/// Inverse of a general square matrix via partial-pivot LU. Fails when the
/// matrix is singular to working precision.
pub fn square_inverse(a: MatRef<'_, f64>, op: &'static str) -> Result<Mat<f64>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let lu = a.partial_piv_lu();
    let inv = lu.solve(Mat::<f64>::identity(n, n).as_ref());
    for j in 0..n {
        for i in 0..n {
            if !inv[(i, j)].is_finite() {
                return Err(Error::numeric(op, format!("singular {n}x{n} matrix")));
            }
        }
    }
    Ok(inv)
}

/// Replaces `a` by `(a + aᵀ)/2`.
pub fn symmetrize(a: &mut Mat<f64>) {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = s;
            a[(j, i)] = s;
        }
    }
}

/// Largest absolute entry (0 for empty matrices).
pub fn max_abs(a: MatRef<'_, f64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].abs());
        }
    }
    m
}

/// Checks symmetry up to `tol` relative to the largest entry.
pub fn is_symmetric(a: MatRef<'_, f64>, tol_rel: f64) -> bool {
    if a.nrows() != a.ncols() {
        return false;
    }
    let scale = max_abs(a).max(f64::MIN_POSITIVE);
    for i in 0..a.nrows() {
        for j in 0..i {
            if (a[(i, j)] - a[(j, i)]).abs() > tol_rel * scale {
                return false;
            }
        }
    }
    true
}

/// Builds a matrix from a row-major nested slice.
pub fn mat_from_rows(rows: &[Vec<f64>]) -> Mat<f64> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    Mat::from_fn(nrows, ncols, |i, j| rows[i][j])
}

/// `y = A x` for a slice-backed vector.
pub fn mat_vec(a: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.ncols(), x.len(), "matrix-vector shape mismatch");
    let mut y = vec![0.0; a.nrows()];
    for j in 0..a.ncols() {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        for i in 0..a.nrows() {
            y[i] += a[(i, j)] * xj;
        }
    }
    y
}

/// `y = Aᵀ x` for a slice-backed vector.
pub fn mat_transpose_vec(a: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.nrows(), x.len(), "matrix-vector shape mismatch");
    let mut y = vec![0.0; a.ncols()];
    for j in 0..a.ncols() {
        let mut acc = 0.0;
        for i in 0..a.nrows() {
            acc += a[(i, j)] * x[i];
        }
        y[j] = acc;
    }
    y
}
