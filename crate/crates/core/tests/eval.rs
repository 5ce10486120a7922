use driftlearn_core::eval::{
    benchmark_drift_grid, drift_eval_grid, figure_data, kolmogorov_metric, mse_grid,
    stationary_axis, stationary_axis_padded, stationary_density_from_drift_1d,
    true_stationary_density, DensityGrid, EVAL_GRID_TRIM, HIST_BINS, STATIONARY_MODEL_NAMES,
    TAIL_MASS_WARNING,
};
use driftlearn_core::gibbs::{summarize_posterior, ChainState, LocalScales, PosteriorSamples};
use driftlearn_core::rkhs::{DriftExpansion, MatrixKernel, ScalarKernel};
use driftlearn_core::sde::Trajectory;
use driftlearn_core::Mat;

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + h * i as f64).collect()
}

fn trapz(xs: &[f64], ys: &[f64]) -> f64 {
    (1..xs.len())
        .map(|i| 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]))
        .sum()
}

/// Hand-normalized density from explicit pdf values (trapezoid convention,
/// matching the library's normalization).
fn density_from_values(xs: Vec<f64>, raw: Vec<f64>) -> DensityGrid {
    let z = trapz(&xs, &raw);
    let pdf: Vec<f64> = raw.iter().map(|p| p / z).collect();
    let mut cdf = vec![0.0];
    for i in 1..xs.len() {
        let inc = 0.5 * (pdf[i] + pdf[i - 1]) * (xs[i] - xs[i - 1]);
        cdf.push(cdf[i - 1] + inc);
    }
    DensityGrid {
        xs,
        pdf,
        cdf,
        tail_warning: false,
    }
}

fn interior_maxima(pdf: &[f64]) -> usize {
    (1..pdf.len() - 1)
        .filter(|&i| pdf[i] > pdf[i - 1] && pdf[i] > pdf[i + 1])
        .count()
}

// --- speed-measure quadrature ---------------------------------------------------------

#[test]
fn linear_drift_yields_gaussian_law() {
    // b(x) = −x, σ² = 1: π = N(0, ½). The exponent integrand is linear, so
    // the trapezoid accumulation is exact and only normalization error
    // remains.
    let grid = linspace(-6.0, 6.0, 2001);
    let den = stationary_density_from_drift_1d(|x| -x, |_| 1.0, &grid).unwrap();
    let peak = (std::f64::consts::PI).sqrt().recip(); // 1/√(π·2·½)
    for (i, &x) in den.xs.iter().enumerate() {
        let want = peak * (-x * x).exp();
        assert!(
            (den.pdf[i] - want).abs() < 1e-4 * peak,
            "pdf({x}) = {} vs {want}",
            den.pdf[i]
        );
    }
    assert!((den.cdf_at(0.0) - 0.5).abs() < 1e-4);
    assert!((den.quantile(0.5).unwrap()).abs() < 1e-3);
    // Φ⁻¹(0.975)·√½ = 1.3859 to 4 decimals.
    assert!((den.quantile(0.975).unwrap() - 1.3859).abs() < 1e-3);
    assert!(!den.tail_warning);
}

#[test]
fn double_well_quadrature_matches_closed_form() {
    // π ∝ exp((4x² − 2x⁴)/ς²) for the quartic well at constant noise.
    let sigma = 1.0;
    let grid = linspace(-3.0, 3.0, 4001);
    let den = true_stationary_density("double_well", sigma, &grid).unwrap();
    let raw: Vec<f64> = grid
        .iter()
        .map(|&x| ((4.0 * x * x - 2.0 * x.powi(4)) / (sigma * sigma) - 2.0).exp())
        .collect();
    let want = density_from_values(grid.clone(), raw);
    let peak = want.pdf.iter().cloned().fold(0.0, f64::max);
    for i in 0..grid.len() {
        assert!(
            (den.pdf[i] - want.pdf[i]).abs() < 1e-3 * peak,
            "pdf at {}: {} vs {}",
            grid[i],
            den.pdf[i],
            want.pdf[i]
        );
    }
}

#[test]
fn double_well_law_is_symmetric_and_bimodal() {
    let grid = linspace(-3.0, 3.0, 1201);
    let den = true_stationary_density("double_well", 1.0, &grid).unwrap();
    let n = grid.len();
    for i in 0..n {
        assert!(
            (den.pdf[i] - den.pdf[n - 1 - i]).abs() < 1e-10,
            "asymmetry at {}",
            grid[i]
        );
    }
    assert_eq!(interior_maxima(&den.pdf), 2);
    // Wells of 4x(1−x²) sit at ±1.
    let argmax = (0..n).max_by(|&a, &b| den.pdf[a].total_cmp(&den.pdf[b])).unwrap();
    assert!((grid[argmax].abs() - 1.0).abs() < 0.006);
}

#[test]
fn variant_closed_form_at_unit_noise() {
    // ς = 1: π(x) ∝ (1+x²) e^{−x²}, unimodal.
    let grid = linspace(-3.0, 3.0, 1201);
    let den = true_stationary_density("double_well_variant", 1.0, &grid).unwrap();
    let raw: Vec<f64> = grid.iter().map(|&x| (1.0 + x * x) * (-x * x).exp()).collect();
    let want = density_from_values(grid.clone(), raw);
    for i in 0..grid.len() {
        assert!(
            (den.pdf[i] - want.pdf[i]).abs() < 1e-12,
            "pdf at {}: {} vs {}",
            grid[i],
            den.pdf[i],
            want.pdf[i]
        );
    }
    assert_eq!(interior_maxima(&den.pdf), 1);
    let argmax = (0..grid.len())
        .max_by(|&a, &b| den.pdf[a].total_cmp(&den.pdf[b]))
        .unwrap();
    assert_eq!(grid[argmax], 0.0);
}

#[test]
fn variant_turns_bimodal_below_unit_noise() {
    // ς = ½: log-density stationary points solve 7/(1+x²) = 4, i.e. x = ±√¾.
    let grid = linspace(-3.0, 3.0, 2401);
    let den = true_stationary_density("double_well_variant", 0.5, &grid).unwrap();
    assert_eq!(interior_maxima(&den.pdf), 2);
    let argmax = (0..grid.len())
        .max_by(|&a, &b| den.pdf[a].total_cmp(&den.pdf[b]))
        .unwrap();
    assert!((grid[argmax].abs() - 0.75f64.sqrt()).abs() < 0.0026);
}

#[test]
fn variant_quadrature_agrees_with_closed_form_path() {
    // Same law through the generic speed-measure quadrature with
    // b(x) = x(1−x²), σ²(x) = ς²(1+x²) — an independent code path.
    let sigma = 0.5f64;
    let s2 = sigma * sigma;
    let grid = linspace(-3.0, 3.0, 4001);
    let closed = true_stationary_density("double_well_variant", sigma, &grid).unwrap();
    let quad = stationary_density_from_drift_1d(
        |x| x * (1.0 - x * x),
        |x| s2 * (1.0 + x * x),
        &grid,
    )
    .unwrap();
    let peak = closed.pdf.iter().cloned().fold(0.0, f64::max);
    for i in 0..grid.len() {
        assert!(
            (closed.pdf[i] - quad.pdf[i]).abs() < 5e-4 * peak,
            "pdf at {}: closed {} vs quadrature {}",
            grid[i],
            closed.pdf[i],
            quad.pdf[i]
        );
    }
}

#[test]
fn refining_the_grid_leaves_the_law_unchanged() {
    let coarse = true_stationary_density("double_well", 1.0, &linspace(-3.0, 3.0, 2001)).unwrap();
    let fine = true_stationary_density("double_well", 1.0, &linspace(-3.0, 3.0, 4001)).unwrap();
    assert!(kolmogorov_metric(&coarse, &fine) < 1e-2);
}

#[test]
fn runaway_exponent_errors_and_names_the_point() {
    // b ≡ 800 pushes the raw exponent to 1600 across a unit grid.
    let grid = linspace(0.0, 1.0, 11);
    let err = stationary_density_from_drift_1d(|_| 800.0, |_| 1.0, &grid).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("exceeds"), "{msg}");
    assert!(msg.contains("x = "), "{msg}");
}

#[test]
fn non_positive_diffusion_is_rejected() {
    let grid = linspace(-1.0, 1.0, 21);
    let err = stationary_density_from_drift_1d(|x| -x, |x| x.abs(), &grid).unwrap_err();
    assert!(err.to_string().contains("not positive"));
}

#[test]
fn truncated_grid_sets_the_tail_warning() {
    // N(0, ½) keeps ~32% of its mass outside [−½, ½], far past the 1e-4 flag.
    let narrow = stationary_density_from_drift_1d(|x| -x, |_| 1.0, &linspace(-0.5, 0.5, 101))
        .unwrap();
    assert!(narrow.tail_warning);
    let wide =
        stationary_density_from_drift_1d(|x| -x, |_| 1.0, &linspace(-6.0, 6.0, 601)).unwrap();
    assert!(!wide.tail_warning);
    assert_eq!(TAIL_MASS_WARNING, 1e-4);
}

#[test]
fn stationary_density_input_validation() {
    assert!(stationary_density_from_drift_1d(|x| -x, |_| 1.0, &[0.0]).is_err());
    assert!(stationary_density_from_drift_1d(|x| -x, |_| 1.0, &[0.0, 0.0]).is_err());
    assert!(stationary_density_from_drift_1d(|x| -x, |_| 1.0, &[1.0, 0.0]).is_err());
    assert!(true_stationary_density("double_well", 0.0, &[0.0, 1.0]).is_err());
    assert!(true_stationary_density("double_well", f64::NAN, &[0.0, 1.0]).is_err());
    let err = true_stationary_density("brownian", 1.0, &[0.0, 1.0]).unwrap_err();
    assert!(err.to_string().contains("double_well"));
    assert_eq!(
        STATIONARY_MODEL_NAMES,
        ["double_well", "double_well_variant"]
    );
}

// --- cdf_at / quantile ---------------------------------------------------------------

#[test]
fn cdf_saturates_off_the_grid() {
    let grid = linspace(-6.0, 6.0, 601);
    let den = stationary_density_from_drift_1d(|x| -x, |_| 1.0, &grid).unwrap();
    assert_eq!(den.cdf_at(-7.0), 0.0);
    assert_eq!(den.cdf_at(7.0), 1.0);
    assert_eq!(den.cdf_at(grid[0]), 0.0);
    assert_eq!(den.cdf_at(grid[600]), 1.0);
}

#[test]
fn quantile_inverts_the_cdf() {
    let grid = linspace(-6.0, 6.0, 1201);
    let den = stationary_density_from_drift_1d(|x| -x, |_| 1.0, &grid).unwrap();
    for x in [-1.5, -0.4, 0.0, 0.9, 2.0] {
        let q = den.cdf_at(x);
        let back = den.quantile(q).unwrap();
        assert!((back - x).abs() < 1e-9, "round trip {x} -> {q} -> {back}");
    }
    assert_eq!(den.quantile(0.0).unwrap(), grid[0]);
    assert_eq!(den.quantile(1.0).unwrap(), grid[1200]);
    assert!(den.quantile(-0.1).is_err());
    assert!(den.quantile(1.5).is_err());
}

// --- Kolmogorov metric ----------------------------------------------------------------

#[test]
fn kolmogorov_of_identical_laws_is_zero() {
    let den = true_stationary_density("double_well", 1.0, &linspace(-3.0, 3.0, 501)).unwrap();
    assert_eq!(kolmogorov_metric(&den, &den.clone()), 0.0);
}

#[test]
fn kolmogorov_separates_nested_uniforms() {
    // U[0,1] vs U[0,2]: sup gap ½ at x = 1.
    let a = density_from_values(linspace(0.0, 1.0, 101), vec![1.0; 101]);
    let b = density_from_values(linspace(0.0, 2.0, 201), vec![1.0; 201]);
    let k = kolmogorov_metric(&a, &b);
    assert!((k - 0.5).abs() < 1e-12, "metric {k}");
}

#[test]
fn kolmogorov_is_symmetric_and_triangular() {
    let a = density_from_values(linspace(0.0, 1.0, 101), vec![1.0; 101]);
    let b = density_from_values(linspace(0.0, 2.0, 201), vec![1.0; 201]);
    let grid = linspace(-6.0, 6.0, 601);
    let c = stationary_density_from_drift_1d(|x| -x, |_| 1.0, &grid).unwrap();
    assert!((kolmogorov_metric(&a, &b) - kolmogorov_metric(&b, &a)).abs() < 1e-15);
    assert!(
        kolmogorov_metric(&a, &c)
            <= kolmogorov_metric(&a, &b) + kolmogorov_metric(&b, &c) + 1e-12
    );
}

#[test]
fn kolmogorov_ignores_grid_placement() {
    // The same law tabulated on shifted grids must be almost indistinguishable.
    let a = stationary_density_from_drift_1d(|x| -x, |_| 1.0, &linspace(-6.0, 6.0, 2001))
        .unwrap();
    let b = stationary_density_from_drift_1d(|x| -x, |_| 1.0, &linspace(-6.003, 5.997, 2001))
        .unwrap();
    assert!(kolmogorov_metric(&a, &b) < 1e-3);
}

// --- MSE -------------------------------------------------------------------------------

fn gaussian_kernel(dim: usize) -> MatrixKernel {
    MatrixKernel::isotropic(ScalarKernel::gaussian(1.0).unwrap(), dim).unwrap()
}

#[test]
fn mse_of_estimate_against_itself_is_zero() {
    let est =
        DriftExpansion::new(gaussian_kernel(1), vec![vec![0.0], vec![1.0]], vec![0.7, -0.3])
            .unwrap();
    let truth = est.clone();
    let grid: Vec<Vec<f64>> = (-10..=10).map(|i| vec![0.25 * i as f64]).collect();
    let mse = mse_grid(&est, |x| truth.eval(x), &grid).unwrap();
    assert_eq!(mse, 0.0);
}

#[test]
fn constant_offset_gives_square_error() {
    let est = DriftExpansion::zero(gaussian_kernel(1), vec![vec![0.0]]).unwrap();
    let grid: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64]).collect();
    let mse = mse_grid(&est, |_| vec![0.25], &grid).unwrap();
    assert!((mse - 0.0625).abs() < 1e-15);
}

#[test]
fn mse_sums_over_components() {
    // d = 3, one center, weights (1,2,3): at the center the estimate equals
    // the weight block, so against a zero truth the squared norm is 14; far
    // away the kernel has decayed to nothing.
    let est = DriftExpansion::new(
        gaussian_kernel(3),
        vec![vec![0.0, 0.0, 0.0]],
        vec![1.0, 2.0, 3.0],
    )
    .unwrap();
    let grid = vec![vec![0.0, 0.0, 0.0], vec![10.0, 10.0, 10.0]];
    let mse = mse_grid(&est, |_| vec![0.0, 0.0, 0.0], &grid).unwrap();
    assert!((mse - 7.0).abs() < 1e-6, "mse {mse}");
}

#[test]
fn mse_rejects_bad_inputs() {
    let est = DriftExpansion::zero(gaussian_kernel(1), vec![vec![0.0]]).unwrap();
    assert!(mse_grid(&est, |_| vec![0.0], &[]).is_err());
    assert!(mse_grid(&est, |_| vec![0.0, 0.0], &[vec![0.0]]).is_err());
}

// --- default grids ---------------------------------------------------------------------

fn ramp_trajectory(values: &[f64]) -> Trajectory {
    let times: Vec<f64> = (1..=values.len()).map(|k| k as f64).collect();
    let states: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
    Trajectory::new(vec![0.0], 1.0, times, states).unwrap()
}

#[test]
fn eval_grid_spans_trimmed_order_statistics() {
    let values: Vec<f64> = (1..=200).map(|k| k as f64).collect();
    let traj = ramp_trajectory(&values);
    let grid = drift_eval_grid(&traj, 11).unwrap();
    assert_eq!(grid.len(), 11);
    // Interpolated order statistics at levels 0.005 and 0.995 of 1..=200.
    assert!((grid[0][0] - 1.995).abs() < 1e-9);
    assert!((grid[10][0] - 199.005).abs() < 1e-9);
    assert_eq!(EVAL_GRID_TRIM, 0.005);
    assert!(drift_eval_grid(&traj, 0).is_err());
}

#[test]
fn eval_grid_slices_each_coordinate_at_the_medians() {
    let states = vec![
        vec![1.0, 10.0],
        vec![2.0, 20.0],
        vec![3.0, 30.0],
        vec![4.0, 40.0],
    ];
    let times = vec![1.0, 2.0, 3.0, 4.0];
    let traj = Trajectory::new(vec![0.0, 0.0], 1.0, times, states).unwrap();
    let grid = drift_eval_grid(&traj, 3).unwrap();
    assert_eq!(grid.len(), 6);
    let want = [
        [1.015, 25.0],
        [2.5, 25.0],
        [3.985, 25.0],
        [2.5, 10.15],
        [2.5, 25.0],
        [2.5, 39.85],
    ];
    for (got, want) in grid.iter().zip(&want) {
        for c in 0..2 {
            assert!(
                (got[c] - want[c]).abs() < 1e-9,
                "grid point {got:?} vs {want:?}"
            );
        }
    }
}

#[test]
fn benchmark_grid_is_path_independent_and_symmetric() {
    let grid = benchmark_drift_grid("double_well", 1.0, 101).unwrap();
    assert_eq!(grid.len(), 101);
    let lo = grid[0][0];
    let hi = grid[100][0];
    assert!((lo + hi).abs() < 1e-6, "asymmetric interval [{lo}, {hi}]");
    assert!(hi > 1.0 && hi < 2.5, "upper endpoint {hi}");
    for w in grid.windows(2) {
        assert!(w[1][0] > w[0][0]);
    }
    assert!(benchmark_drift_grid("double_well", 1.0, 1).is_err());
    assert!(benchmark_drift_grid("unknown", 1.0, 11).is_err());
    // The variant at ς = ½ is supported too, with its own symmetric interval.
    let variant = benchmark_drift_grid("double_well_variant", 0.5, 11).unwrap();
    let v_hi = variant[10][0];
    assert!((variant[0][0] + v_hi).abs() < 1e-6);
    assert!(v_hi > 0.75f64.sqrt() && v_hi < 3.0, "variant endpoint {v_hi}");
}

#[test]
fn stationary_axis_pads_the_observed_range() {
    let traj = ramp_trajectory(&[0.0, 2.5, 5.0, 7.5, 10.0]);
    let axis = stationary_axis(&traj, 5).unwrap();
    assert_eq!(axis.len(), 5);
    assert!((axis[0] - (-2.0)).abs() < 1e-12);
    assert!((axis[4] - 12.0).abs() < 1e-12);
    let tight = stationary_axis_padded(&traj, 3, 0.0).unwrap();
    assert_eq!(tight, vec![0.0, 5.0, 10.0]);
    assert!(stationary_axis_padded(&traj, 1, 0.2).is_err());
    assert!(stationary_axis_padded(&traj, 5, -0.1).is_err());
    let traj2 = Trajectory::new(
        vec![0.0, 0.0],
        1.0,
        vec![1.0, 2.0],
        vec![vec![0.0, 0.0], vec![1.0, 1.0]],
    )
    .unwrap();
    assert!(stationary_axis(&traj2, 5).is_err());
}

// --- figure bundles ----------------------------------------------------------------------

fn toy_samples(betas: Vec<Vec<f64>>, centers: Vec<Vec<f64>>) -> PosteriorSamples {
    let states: Vec<ChainState> = betas
        .into_iter()
        .map(|beta| ChainState {
            beta,
            sigma: Mat::full(1, 1, 1.0),
            local_scales: LocalScales::Scalar(vec![1.0; centers.len()]),
            global_scale: None,
            rate_hypers: None,
        })
        .collect();
    PosteriorSamples::from_parts(states, 0, 1, gaussian_kernel(1), centers, 1).unwrap()
}

#[test]
fn figure_histogram_accounts_for_every_center() {
    let samples = toy_samples(
        vec![vec![0.9, -0.4, 0.1, 2.0, 0.0]],
        (0..5).map(|i| vec![i as f64]).collect(),
    );
    let grid: Vec<Vec<f64>> = (0..9).map(|i| vec![0.5 * i as f64]).collect();
    let summary = summarize_posterior(&samples, &grid).unwrap();
    let fig = figure_data(&summary, |x| vec![-x[0]], None, None).unwrap();
    assert_eq!(fig.hist_edges.len(), HIST_BINS + 1);
    assert_eq!(fig.hist_counts.len(), HIST_BINS);
    assert_eq!(fig.hist_counts.iter().sum::<usize>(), 5);
    assert!(fig.stationary.is_none());
    assert_eq!(fig.drift_grid, grid);
    assert_eq!(fig.drift_true[2], vec![-1.0]);
    assert_eq!(fig.drift_mean.len(), grid.len());
}

#[test]
fn pp_pairs_sit_on_the_diagonal_for_identical_laws() {
    let samples = toy_samples(vec![vec![1.0]], vec![vec![0.0]]);
    let summary = summarize_posterior(&samples, &[vec![0.0]]).unwrap();
    let den = true_stationary_density("double_well", 1.0, &linspace(-3.0, 3.0, 301)).unwrap();
    let fig = figure_data(&summary, |x| vec![x[0]], Some(&den), Some(&den)).unwrap();
    let st = fig.stationary.expect("stationary panel");
    // cdf_at saturates to exactly 1 at the right endpoint while the stored
    // CDF may sit a few ulps under it, hence the tolerance.
    for (t, e) in st.pp_true.iter().zip(&st.pp_est) {
        assert!((t - e).abs() < 1e-12, "{t} vs {e}");
    }
    assert_eq!(st.est_pdf, den.pdf);
}

#[test]
fn figure_data_requires_a_band_grid() {
    let samples = toy_samples(vec![vec![1.0]], vec![vec![0.0]]);
    let summary = summarize_posterior(&samples, &[]).unwrap();
    assert!(figure_data(&summary, |x| vec![x[0]], None, None).is_err());
}
