//! Ground-truth comparison: MSE grids, 1-D stationary densities, the
//! Kolmogorov metric, and figure-data bundles.
//!
//! For an ergodic scalar diffusion `dX = b(X)dt + σ(X)dW` the stationary
//! density is the normalized speed measure
//!
//! ```text
//! π(x) ∝ σ⁻²(x) · exp( ∫ˣ 2 b(u)/σ²(u) du ),
//! ```
//!
//! which this module evaluates by cumulative trapezoid quadrature for
//! arbitrary drifts — in particular for fitted expansions, so estimated and
//! true long-run laws can be compared through `sup_x |F(x) − F̂(x)|`.

use crate::error::{Error, Result};
use crate::gibbs::PosteriorSummary;
use crate::sde::Trajectory;

/// Raw speed-measure exponents above this threshold abort with an overflow
/// error: `exp(700)` is the edge of f64 range, and an exponent that large
/// means the drift is not integrable on the grid.
pub const EXPONENT_OVERFLOW_LIMIT: f64 = 700.0;

/// Relative tail mass outside the grid above which a density is flagged as
/// truncated.
pub const TAIL_MASS_WARNING: f64 = 1e-4;

// ---------------------------------------------------------------------------
// DensityGrid
// ---------------------------------------------------------------------------

/// A probability density tabulated on a strictly increasing grid, normalized
/// so its trapezoid integral is 1, together with the matching CDF.
/// `tail_warning` is set when more than [`TAIL_MASS_WARNING`] of the
/// unnormalized mass lies outside the grid (estimated on a doubled-width
/// extension).
#[derive(Debug, Clone)]
pub struct DensityGrid {
    pub xs: Vec<f64>,
    pub pdf: Vec<f64>,
    pub cdf: Vec<f64>,
    pub tail_warning: bool,
}

impl DensityGrid {
    /// Normalizes `exp(log_unnorm)` on `xs` into a density. The caller may
    /// pass log values of any magnitude; they are max-shifted before
    /// exponentiation. `outside_mass_ratio` is the already-estimated
    /// fraction of mass beyond the grid, used only for the tail flag.
    fn from_log_unnormalized(
        xs: Vec<f64>,
        log_unnorm: &[f64],
        outside_mass_ratio: f64,
    ) -> Result<Self> {
        validate_axis(&xs)?;
        if log_unnorm.len() != xs.len() {
            return Err(Error::dims(format!(
                "{} log-density values for {} grid points",
                log_unnorm.len(),
                xs.len()
            )));
        }
        let shift = log_unnorm
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        if !shift.is_finite() {
            return Err(Error::numeric(
                "density normalization",
                "log density has no finite maximum".to_string(),
            ));
        }
        let mut pdf: Vec<f64> = log_unnorm.iter().map(|l| (l - shift).exp()).collect();
        let z = trapezoid(&xs, &pdf);
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::numeric(
                "density normalization",
                format!("non-positive normalizing constant {z}"),
            ));
        }
        for p in pdf.iter_mut() {
            *p /= z;
        }
        let mut cdf = cumulative_trapezoid(&xs, &pdf);
        // Roundoff can leave the last value at 1±1e-15 or a microscopic dip;
        // clamp into [0, 1] and enforce monotonicity, both within 1e-12.
        let mut prev = 0.0;
        for c in cdf.iter_mut() {
            *c = c.clamp(0.0, 1.0).max(prev);
            prev = *c;
        }
        Ok(DensityGrid {
            xs,
            pdf,
            cdf,
            tail_warning: outside_mass_ratio > TAIL_MASS_WARNING,
        })
    }

    /// CDF at an arbitrary point: 0 left of the grid, 1 right of it, linear
    /// interpolation inside.
    pub fn cdf_at(&self, x: f64) -> f64 {
        let xs = &self.xs;
        let n = xs.len();
        if x <= xs[0] {
            return 0.0;
        }
        if x >= xs[n - 1] {
            return 1.0;
        }
        let mut hi = match xs.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => return self.cdf[i],
            Err(i) => i,
        };
        hi = hi.clamp(1, n - 1);
        let lo = hi - 1;
        let t = (x - xs[lo]) / (xs[hi] - xs[lo]);
        self.cdf[lo] + t * (self.cdf[hi] - self.cdf[lo])
    }

    /// Smallest grid value whose CDF reaches `q` (linearly interpolated);
    /// clamps to the grid endpoints for `q` outside the covered mass.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::invalid(format!(
                "quantile level must lie in [0, 1], got {q}"
            )));
        }
        let n = self.xs.len();
        if q <= self.cdf[0] {
            return Ok(self.xs[0]);
        }
        if q >= self.cdf[n - 1] {
            return Ok(self.xs[n - 1]);
        }
        let hi = self.cdf.partition_point(|&c| c < q).clamp(1, n - 1);
        let lo = hi - 1;
        let span = self.cdf[hi] - self.cdf[lo];
        if span <= 0.0 {
            return Ok(self.xs[hi]);
        }
        let t = (q - self.cdf[lo]) / span;
        Ok(self.xs[lo] + t * (self.xs[hi] - self.xs[lo]))
    }
}

fn validate_axis(xs: &[f64]) -> Result<()> {
    if xs.len() < 2 {
        return Err(Error::invalid("density grid needs at least 2 points"));
    }
    for w in xs.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::invalid(
                "density grid must be strictly increasing".to_string(),
            ));
        }
    }
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("density grid must be finite"));
    }
    Ok(())
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 1..xs.len() {
        acc += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
    }
    acc
}

fn cumulative_trapezoid(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..xs.len() {
        acc += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
        out.push(acc);
    }
    out
}

/// Extends `xs` by its full range on both sides at the boundary spacing,
/// returning `(extended_axis, index of xs[0], index of xs[last])`.
fn extended_axis(xs: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = xs.len();
    let range = xs[n - 1] - xs[0];
    let h_left = xs[1] - xs[0];
    let h_right = xs[n - 1] - xs[n - 2];
    let n_left = (range / h_left).ceil() as usize;
    let n_right = (range / h_right).ceil() as usize;
    let mut out = Vec::with_capacity(n + n_left + n_right);
    for i in (1..=n_left).rev() {
        out.push(xs[0] - i as f64 * h_left);
    }
    out.extend_from_slice(xs);
    for i in 1..=n_right {
        out.push(xs[n - 1] + i as f64 * h_right);
    }
    (out, n_left, n_left + n - 1)
}

// ---------------------------------------------------------------------------
// Stationary densities
// ---------------------------------------------------------------------------

/// Speed-measure stationary density of a 1-D diffusion on `grid`:
/// `π(x) ∝ σ⁻²(x) exp(∫ 2b/σ² du)`, the exponent accumulated by trapezoid
/// quadrature and measured from the grid's left endpoint.
///
/// Errors if `σ²` is non-positive anywhere it is evaluated, or if the raw
/// exponent exceeds [`EXPONENT_OVERFLOW_LIMIT`] at a grid point (the error
/// names the point). Tail mass is probed on a doubled-width extension of the
/// grid and sets `tail_warning` rather than failing.
pub fn stationary_density_from_drift_1d(
    drift: impl Fn(f64) -> f64,
    diffusion_sq: impl Fn(f64) -> f64,
    grid: &[f64],
) -> Result<DensityGrid> {
    const OP: &str = "stationary_density_from_drift_1d";
    validate_axis(grid)?;
    let (ext, lo, hi) = extended_axis(grid);

    let mut f = Vec::with_capacity(ext.len());
    let mut log_s2 = Vec::with_capacity(ext.len());
    for &x in &ext {
        let s2 = diffusion_sq(x);
        if !(s2 > 0.0) || !s2.is_finite() {
            return Err(Error::numeric(
                OP,
                format!("diffusion σ²({x}) = {s2} is not positive"),
            ));
        }
        f.push(2.0 * drift(x) / s2);
        log_s2.push(s2.ln());
    }
    let exponent = cumulative_trapezoid(&ext, &f);
    let base = exponent[lo];
    for i in lo..=hi {
        let raw = exponent[i] - base;
        if raw > EXPONENT_OVERFLOW_LIMIT {
            return Err(Error::numeric(
                OP,
                format!(
                    "speed-measure exponent {raw:.1} exceeds {EXPONENT_OVERFLOW_LIMIT} at grid point x = {}",
                    ext[i]
                ),
            ));
        }
    }

    let log_unnorm: Vec<f64> = (0..ext.len())
        .map(|i| (exponent[i] - base) - log_s2[i])
        .collect();
    let ratio = outside_mass_ratio(&ext, &log_unnorm, lo, hi);
    let inner_log: Vec<f64> = log_unnorm[lo..=hi].to_vec();
    DensityGrid::from_log_unnormalized(grid.to_vec(), &inner_log, ratio)
}

/// Unnormalized-mass fraction outside `[lo, hi]`, max-shifted for safety.
fn outside_mass_ratio(ext: &[f64], log_unnorm: &[f64], lo: usize, hi: usize) -> f64 {
    let shift = log_unnorm
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return 1.0;
    }
    let vals: Vec<f64> = log_unnorm
        .iter()
        .map(|l| (l - shift).min(0.0).exp())
        .collect();
    let total = trapezoid(ext, &vals);
    let inside = trapezoid(&ext[lo..=hi], &vals[lo..=hi]);
    if total <= 0.0 {
        return 1.0;
    }
    ((total - inside) / total).max(0.0)
}

/// Model names accepted by [`true_stationary_density`].
pub const STATIONARY_MODEL_NAMES: [&str; 2] = ["double_well", "double_well_variant"];

/// Stationary density of a built-in 1-D benchmark model with noise level ς.
///
/// * `double_well` — `b(x) = 4x(1−x²)`, σ ≡ ς: evaluated through the
///   speed-measure quadrature (`π ∝ exp((4x² − 2x⁴)/ς²)`), so it is
///   bit-comparable with densities of fitted drifts on the same grid.
/// * `double_well_variant` — `b(x) = x(1−x²)`, σ²(x) = ς²(1+x²): closed form
///   `π(x) ∝ ς⁻²(1+x²)^{2ς⁻²−1} exp(−x²/ς²)`, bimodal iff ς < 1.
pub fn true_stationary_density(model_name: &str, sigma: f64, grid: &[f64]) -> Result<DensityGrid> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!(
            "noise level must be a positive real, got {sigma}"
        )));
    }
    match model_name {
        "double_well" => stationary_density_from_drift_1d(
            |x| 4.0 * x * (1.0 - x * x),
            |_| sigma * sigma,
            grid,
        ),
        "double_well_variant" => {
            validate_axis(grid)?;
            let s2 = sigma * sigma;
            let log_density = |x: f64| (2.0 / s2 - 1.0) * (x * x).ln_1p() - x * x / s2;
            let (ext, lo, hi) = extended_axis(grid);
            let log_ext: Vec<f64> = ext.iter().map(|&x| log_density(x)).collect();
            let ratio = outside_mass_ratio(&ext, &log_ext, lo, hi);
            let inner: Vec<f64> = log_ext[lo..=hi].to_vec();
            DensityGrid::from_log_unnormalized(grid.to_vec(), &inner, ratio)
        }
        other => Err(Error::unknown(
            "stationary model",
            other,
            &STATIONARY_MODEL_NAMES,
        )),
    }
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Kolmogorov metric `sup_x |F_a(x) − F_b(x)|`. On a shared grid this is the
/// max CDF gap; otherwise both CDFs are resampled by linear interpolation
/// onto the union of the two grids.
pub fn kolmogorov_metric(a: &DensityGrid, b: &DensityGrid) -> f64 {
    if a.xs == b.xs {
        return a
            .cdf
            .iter()
            .zip(&b.cdf)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
    }
    let mut union: Vec<f64> = a.xs.iter().chain(&b.xs).cloned().collect();
    union.sort_by(|x, y| x.total_cmp(y));
    union.dedup();
    union
        .iter()
        .map(|&x| (a.cdf_at(x) - b.cdf_at(x)).abs())
        .fold(0.0, f64::max)
}

/// Mean squared error of a fitted drift against the truth on a grid:
/// `(1/G) Σ_g ‖b̂(x_g) − b(x_g)‖²`.
pub fn mse_grid(
    estimate: &crate::rkhs::DriftExpansion,
    truth: impl Fn(&[f64]) -> Vec<f64>,
    grid: &[Vec<f64>],
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::invalid("MSE grid must be nonempty"));
    }
    let d = estimate.output_dim();
    let mut est = vec![0.0; d];
    let mut acc = 0.0;
    for x in grid {
        estimate.eval_into(x, &mut est);
        let t = truth(x);
        if t.len() != d {
            return Err(Error::dims(format!(
                "truth returned {} components, expected {d}",
                t.len()
            )));
        }
        for i in 0..d {
            let diff = est[i] - t[i];
            acc += diff * diff;
        }
    }
    Ok(acc / grid.len() as f64)
}

// ---------------------------------------------------------------------------
// Default grids
// ---------------------------------------------------------------------------

fn coordinate_range(traj: &Trajectory, c: usize) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in &traj.states {
        lo = lo.min(s[c]);
        hi = hi.max(s[c]);
    }
    (lo, hi)
}

fn coordinate_median(traj: &Trajectory, c: usize) -> f64 {
    let mut vals: Vec<f64> = traj.states.iter().map(|s| s[c]).collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    let n = vals.len();
    if n % 2 == 1 {
        vals[n / 2]
    } else {
        0.5 * (vals[n / 2 - 1] + vals[n / 2])
    }
}

/// Central-mass interval of one observed coordinate: linearly interpolated
/// order statistics at levels `p` and `1 − p`.
fn coordinate_trimmed_range(traj: &Trajectory, c: usize, p: f64) -> (f64, f64) {
    let mut vals: Vec<f64> = traj.states.iter().map(|s| s[c]).collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    let n = vals.len();
    let at = |level: f64| -> f64 {
        let idx = level * (n - 1) as f64;
        let i = idx.floor() as usize;
        let f = idx - i as f64;
        if i + 1 < n {
            vals[i] + f * (vals[i + 1] - vals[i])
        } else {
            vals[n - 1]
        }
    };
    (at(p), at(1.0 - p))
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + h * i as f64).collect()
}

/// Trim level of [`drift_eval_grid`]: the grid spans the central 99% of the
/// observations per coordinate.
pub const EVAL_GRID_TRIM: f64 = 0.005;

/// Default drift-evaluation grid. In one dimension: `points` equispaced
/// values spanning the central 99% of the observations (interpolated order
/// statistics). In higher dimensions: one axis slice per coordinate
/// (`points` values over that coordinate's trimmed range, the remaining
/// coordinates fixed at their path medians), pooled.
///
/// The trim drops the few most extreme visits: a point the path touched
/// once carries no identifying mass, and on models with polynomially
/// growing drift the squared error there would swamp the average.
pub fn drift_eval_grid(traj: &Trajectory, points: usize) -> Result<Vec<Vec<f64>>> {
    if points == 0 {
        return Err(Error::invalid("grid size must be positive"));
    }
    traj.validate()?;
    let d = traj.dim();
    if d == 1 {
        let (lo, hi) = coordinate_trimmed_range(traj, 0, EVAL_GRID_TRIM);
        return Ok(linspace(lo, hi, points).into_iter().map(|x| vec![x]).collect());
    }
    let medians: Vec<f64> = (0..d).map(|c| coordinate_median(traj, c)).collect();
    let mut grid = Vec::with_capacity(d * points);
    for c in 0..d {
        let (lo, hi) = coordinate_trimmed_range(traj, c, EVAL_GRID_TRIM);
        for x in linspace(lo, hi, points) {
            let mut point = medians.clone();
            point[c] = x;
            grid.push(point);
        }
    }
    Ok(grid)
}

/// Fixed drift-evaluation grid for a 1-D benchmark model: `points`
/// equispaced values spanning the central 99.5% interval of the model's
/// true stationary law.
///
/// Unlike [`drift_eval_grid`], the result depends only on the model and its
/// noise level — never on a particular path — so MSE values computed on it
/// are comparable across sample sizes and discretization steps, which is
/// what benchmark tables track. (A path-dependent grid widens with longer
/// observation windows, and the drift magnitude at the fringes then
/// dominates the average regardless of fit quality.)
pub fn benchmark_drift_grid(
    model_name: &str,
    sigma: f64,
    points: usize,
) -> Result<Vec<Vec<f64>>> {
    if points < 2 {
        return Err(Error::invalid("grid size must be at least 2"));
    }
    // Wide reference axis: all supported benchmark laws at their benchmark
    // noise levels keep well over 99.9% of their mass inside ±4.
    let reference = linspace(-4.0, 4.0, 4001);
    let density = true_stationary_density(model_name, sigma, &reference)?;
    let lo = density.quantile(0.0025)?;
    let hi = density.quantile(0.9975)?;
    Ok(linspace(lo, hi, points)
        .into_iter()
        .map(|x| vec![x])
        .collect())
}

/// Axis for stationary-density comparison: the observed 1-D range extended
/// by 20% of its width on each side, `points` equispaced values.
pub fn stationary_axis(traj: &Trajectory, points: usize) -> Result<Vec<f64>> {
    stationary_axis_padded(traj, points, 0.2)
}

/// [`stationary_axis`] with a configurable extension fraction per side.
pub fn stationary_axis_padded(
    traj: &Trajectory,
    points: usize,
    extension: f64,
) -> Result<Vec<f64>> {
    traj.validate()?;
    if traj.dim() != 1 {
        return Err(Error::invalid(
            "stationary-density comparison is one-dimensional".to_string(),
        ));
    }
    if points < 2 {
        return Err(Error::invalid("stationary axis needs at least 2 points"));
    }
    if !(extension >= 0.0) || !extension.is_finite() {
        return Err(Error::invalid(format!(
            "domain extension must be a nonnegative real, got {extension}"
        )));
    }
    let (lo, hi) = coordinate_range(traj, 0);
    let pad = extension * (hi - lo);
    Ok(linspace(lo - pad, hi + pad, points))
}

// ---------------------------------------------------------------------------
// Figure data
// ---------------------------------------------------------------------------

/// Stationary-law panels of a figure bundle (1-D only).
#[derive(Debug, Clone)]
pub struct StationaryFigure {
    pub xs: Vec<f64>,
    pub true_pdf: Vec<f64>,
    pub est_pdf: Vec<f64>,
    /// PP pairs: true CDF at each grid point …
    pub pp_true: Vec<f64>,
    /// … against the estimated CDF at the same point.
    pub pp_est: Vec<f64>,
}

/// CSV-ready arrays behind the standard result figure: drift curves with
/// credible bands, the posterior-weight histogram, and (in one dimension)
/// stationary densities with PP pairs.
#[derive(Debug, Clone)]
pub struct FigureData {
    pub drift_grid: Vec<Vec<f64>>,
    pub drift_true: Vec<Vec<f64>>,
    pub drift_mean: Vec<Vec<f64>>,
    pub drift_lower: Vec<Vec<f64>>,
    pub drift_upper: Vec<Vec<f64>>,
    /// 51 bin edges over the weight values.
    pub hist_edges: Vec<f64>,
    /// 50 bin counts; they sum to the number of centers.
    pub hist_counts: Vec<usize>,
    pub stationary: Option<StationaryFigure>,
}

/// Number of histogram bins in figure bundles.
pub const HIST_BINS: usize = 50;

fn weight_histogram(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let edges = linspace(lo, hi, HIST_BINS + 1);
    let width = (hi - lo) / HIST_BINS as f64;
    let mut counts = vec![0usize; HIST_BINS];
    for &v in values {
        let bin = (((v - lo) / width).floor() as usize).min(HIST_BINS - 1);
        counts[bin] += 1;
    }
    (edges, counts)
}

/// Assembles figure arrays from a posterior summary. The drift panel uses
/// the summary's band grid (it must be nonempty); the histogram bins the
/// posterior-mean weights (signed in one dimension, block norms otherwise);
/// the stationary panel appears when both densities are supplied and shares
/// the true density's grid, resampling the estimate if needed.
pub fn figure_data(
    summary: &PosteriorSummary,
    truth: impl Fn(&[f64]) -> Vec<f64>,
    true_density: Option<&DensityGrid>,
    est_density: Option<&DensityGrid>,
) -> Result<FigureData> {
    if summary.band_grid.is_empty() {
        return Err(Error::invalid(
            "figure_data needs a posterior summary with a nonempty band grid".to_string(),
        ));
    }
    let d = summary.mean_drift.output_dim();
    let drift_true: Vec<Vec<f64>> = summary
        .band_grid
        .iter()
        .map(|x| {
            let t = truth(x);
            if t.len() == d {
                Ok(t)
            } else {
                Err(Error::dims(format!(
                    "truth returned {} components, expected {d}",
                    t.len()
                )))
            }
        })
        .collect::<Result<_>>()?;

    let weights = summary.mean_drift.weights();
    let hist_values: Vec<f64> = if d == 1 {
        weights.to_vec()
    } else {
        summary.weight_magnitudes.clone()
    };
    let (hist_edges, hist_counts) = weight_histogram(&hist_values);

    let stationary = match (true_density, est_density) {
        (Some(t), Some(e)) => {
            let est_pdf: Vec<f64> = if t.xs == e.xs {
                e.pdf.clone()
            } else {
                // Resample the estimated pdf onto the true grid.
                t.xs
                    .iter()
                    .map(|&x| {
                        let n = e.xs.len();
                        if x <= e.xs[0] || x >= e.xs[n - 1] {
                            0.0
                        } else {
                            let hi = match e.xs.binary_search_by(|v| v.total_cmp(&x)) {
                                Ok(i) => return e.pdf[i],
                                Err(i) => i.clamp(1, n - 1),
                            };
                            let lo = hi - 1;
                            let s = (x - e.xs[lo]) / (e.xs[hi] - e.xs[lo]);
                            e.pdf[lo] + s * (e.pdf[hi] - e.pdf[lo])
                        }
                    })
                    .collect()
            };
            Some(StationaryFigure {
                xs: t.xs.clone(),
                true_pdf: t.pdf.clone(),
                est_pdf,
                pp_true: t.cdf.clone(),
                pp_est: t.xs.iter().map(|&x| e.cdf_at(x)).collect(),
            })
        }
        _ => None,
    };

    Ok(FigureData {
        drift_grid: summary.band_grid.clone(),
        drift_true,
        drift_mean: summary.band_mean.clone(),
        drift_lower: summary.band_lower.clone(),
        drift_upper: summary.band_upper.clone(),
        hist_edges,
        hist_counts,
        stationary,
    })
}
