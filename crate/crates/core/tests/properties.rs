//! Randomized invariants: determinism of seeded streams, structural
//! guarantees of trajectories and Gram matrices, and distribution-level
//! contracts of the stationary-density machinery.

use driftlearn_core::eval::{kolmogorov_metric, mse_grid, stationary_density_from_drift_1d};
use driftlearn_core::gibbs::near_zero_fraction;
use driftlearn_core::randdist::{sample_standard_normal, RngStream};
use driftlearn_core::rkhs::{
    gram_matrix, representer_basis_quadrature, DriftExpansion, MatrixKernel, ScalarKernel,
    WeightFn,
};
use driftlearn_core::sde::{builtin_model, euler_maruyama_simulate, Increments, ModelParams};
use proptest::prelude::*;

fn normals(seed: u64, stream: u64, n: usize) -> Vec<u64> {
    let mut rng = RngStream::new(seed, stream);
    (0..n)
        .map(|_| sample_standard_normal(&mut rng).to_bits())
        .collect()
}

proptest! {
    #[test]
    fn same_seed_and_stream_replay_bit_identically(seed: u64, stream: u64) {
        prop_assert_eq!(normals(seed, stream, 16), normals(seed, stream, 16));
    }

    #[test]
    fn distinct_streams_decouple(seed: u64, stream in 0u64..u64::MAX) {
        let a = normals(seed, stream, 16);
        let b = normals(seed, stream + 1, 16);
        prop_assert_ne!(a, b);
    }

    #[test]
    fn simulated_trajectories_validate(
        delta in 1e-3f64..0.1,
        steps in 2usize..150,
        seed: u64,
    ) {
        let model = builtin_model("double_well", &ModelParams::default()).unwrap();
        let mut rng = RngStream::new(seed, 0);
        // Coarse steps can trip the divergence guard on the cubic drift;
        // that is the guard's contract, not a trajectory defect.
        let sim = euler_maruyama_simulate(&model, &[0.5], delta, steps, &mut rng);
        prop_assume!(sim.is_ok());
        let traj = sim.unwrap();
        prop_assert!(traj.validate().is_ok());
        prop_assert_eq!(traj.len(), steps);
        for w in traj.times.windows(2) {
            prop_assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn increments_cumulate_back_to_the_states(
        delta in 1e-3f64..0.1,
        steps in 2usize..150,
        seed: u64,
    ) {
        let model = builtin_model("double_well", &ModelParams::default()).unwrap();
        let mut rng = RngStream::new(seed, 0);
        let sim = euler_maruyama_simulate(&model, &[0.5], delta, steps, &mut rng);
        prop_assume!(sim.is_ok());
        let traj = sim.unwrap();
        let inc = Increments::from_trajectory(&traj);
        let mut x = traj.x0[0];
        for (k, s) in traj.states.iter().enumerate() {
            x += inc.block(k)[0];
            let tol = 4.0 * f64::EPSILON * s[0].abs().max(1.0);
            prop_assert!((x - s[0]).abs() <= tol, "state {k}: {x} vs {}", s[0]);
        }
    }

    #[test]
    fn diffusion_cov_is_spd_along_builtin_paths(
        name in prop::sample::select(vec![
            "double_well",
            "double_well_variant",
            "michaelis_menten",
        ]),
        seed: u64,
    ) {
        let model = builtin_model(name, &ModelParams::default()).unwrap();
        let mut rng = RngStream::new(seed, 0);
        let traj =
            euler_maruyama_simulate(&model, &model.default_x0(), 0.01, 40, &mut rng).unwrap();
        for s in &traj.states {
            let cov = model.diffusion_cov(s);
            prop_assert!(cov.llt(faer::Side::Lower).is_ok(), "state {s:?}");
        }
    }

    #[test]
    fn gaussian_kernel_is_a_correlation(
        x in -10.0f64..10.0,
        y in -10.0f64..10.0,
        bw in 0.1f64..5.0,
    ) {
        let kernel = MatrixKernel::isotropic(ScalarKernel::gaussian(bw).unwrap(), 1).unwrap();
        let kxy = driftlearn_core::rkhs::kernel_eval(&kernel, &[x], &[y]).unwrap()[(0, 0)];
        let kyx = driftlearn_core::rkhs::kernel_eval(&kernel, &[y], &[x]).unwrap()[(0, 0)];
        let kxx = driftlearn_core::rkhs::kernel_eval(&kernel, &[x], &[x]).unwrap()[(0, 0)];
        // Mathematically positive; may underflow to +0 dozens of
        // bandwidths apart.
        prop_assert!(kxy >= 0.0 && kxy <= 1.0);
        prop_assert_eq!(kxy.to_bits(), kyx.to_bits());
        prop_assert_eq!(kxx, 1.0);
    }

    #[test]
    fn square_grams_are_psd(points in prop::collection::vec(-3.0f64..3.0, 3..10)) {
        let centers: Vec<Vec<f64>> = points.iter().map(|&x| vec![x]).collect();
        let kernel = MatrixKernel::isotropic(ScalarKernel::gaussian(1.0).unwrap(), 1).unwrap();
        let gram = gram_matrix(&kernel, &centers, &centers).unwrap();
        let eigs = gram
            .matrix()
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .unwrap();
        let max = eigs.last().copied().unwrap();
        let min = eigs[0];
        prop_assert!(min >= -1e-8 * max.max(1.0), "min eig {min}, max {max}");
    }

    #[test]
    fn expansions_reproduce_their_gram_action(
        centers in prop::collection::vec(-3.0f64..3.0, 1..6),
        scale in -2.0f64..2.0,
    ) {
        let kernel = MatrixKernel::isotropic(ScalarKernel::gaussian(1.0).unwrap(), 1).unwrap();
        let cs: Vec<Vec<f64>> = centers.iter().map(|&x| vec![x]).collect();
        let weights: Vec<f64> = (0..cs.len())
            .map(|i| scale * (0.3 + 0.1 * i as f64))
            .collect();
        let h = DriftExpansion::new(kernel.clone(), cs.clone(), weights.clone()).unwrap();
        let gram = gram_matrix(&kernel, &cs, &cs).unwrap();
        for i in 0..cs.len() {
            let at_center = h.eval(&cs[i])[0];
            let mut by_gram = 0.0;
            for j in 0..cs.len() {
                by_gram += gram.matrix()[(i, j)] * weights[j];
            }
            prop_assert!(
                (at_center - by_gram).abs() < 1e-10,
                "center {i}: {at_center} vs {by_gram}"
            );
        }
    }

    #[test]
    fn stationary_densities_normalize_and_accumulate(
        a in 0.2f64..3.0,
        c in 0.0f64..2.0,
        s2 in 0.3f64..4.0,
    ) {
        // Every drift of the form −ax − cx³ is ergodic with light tails.
        // On [−3, 3] the worst-case exponent swing is (9a + 40.5c)/s2 ≤ 360,
        // inside the overflow guard.
        let grid: Vec<f64> = (0..801).map(|i| -3.0 + i as f64 * 0.0075).collect();
        let den =
            stationary_density_from_drift_1d(|x| -a * x - c * x * x * x, |_| s2, &grid).unwrap();
        let integral: f64 = (1..grid.len())
            .map(|i| 0.5 * (den.pdf[i] + den.pdf[i - 1]) * (grid[i] - grid[i - 1]))
            .sum();
        prop_assert!((integral - 1.0).abs() < 1e-6, "integral {integral}");
        prop_assert!((den.cdf[800] - 1.0).abs() < 1e-6);
        for w in den.cdf.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
        prop_assert!(den.pdf.iter().all(|&p| p >= 0.0));
        for q in [0.1, 0.5, 0.9] {
            let x = den.quantile(q).unwrap();
            prop_assert!((den.cdf_at(x) - q).abs() < 1e-9);
        }
    }

    #[test]
    fn kolmogorov_is_a_metric_on_random_laws(
        a1 in 0.2f64..3.0,
        a2 in 0.2f64..3.0,
        a3 in 0.2f64..3.0,
    ) {
        let grid: Vec<f64> = (0..401).map(|i| -5.0 + i as f64 * 0.025).collect();
        let shifted: Vec<f64> = grid.iter().map(|x| x + 0.013).collect();
        let mk = |a: f64, g: &[f64]| {
            stationary_density_from_drift_1d(|x| -a * x, |_| 1.0, g).unwrap()
        };
        let (p, q, r) = (mk(a1, &grid), mk(a2, &shifted), mk(a3, &grid));
        prop_assert!((kolmogorov_metric(&p, &q) - kolmogorov_metric(&q, &p)).abs() < 1e-15);
        prop_assert!(
            kolmogorov_metric(&p, &r)
                <= kolmogorov_metric(&p, &q) + kolmogorov_metric(&q, &r) + 1e-12
        );
        prop_assert_eq!(kolmogorov_metric(&p, &p.clone()), 0.0);
    }

    #[test]
    fn mse_separates_distinct_drifts(
        center in -2.0f64..2.0,
        weight in 0.1f64..2.0,
        offset in 0.01f64..1.0,
    ) {
        let kernel = MatrixKernel::isotropic(ScalarKernel::gaussian(1.0).unwrap(), 1).unwrap();
        let est = DriftExpansion::new(kernel, vec![vec![center]], vec![weight]).unwrap();
        let truth = est.clone();
        let grid: Vec<Vec<f64>> = (-8..=8).map(|i| vec![0.5 * i as f64]).collect();
        prop_assert_eq!(mse_grid(&est, |x| truth.eval(x), &grid).unwrap(), 0.0);
        let off = mse_grid(&est, |x| vec![truth.eval(x)[0] + offset], &grid).unwrap();
        prop_assert!((off - offset * offset).abs() < 1e-12 * offset.max(1.0));
    }

    #[test]
    fn near_zero_fraction_is_a_fraction(
        magnitudes in prop::collection::vec(0.0f64..10.0, 0..20),
        tol in 1e-6f64..0.5,
    ) {
        let f = near_zero_fraction(&magnitudes, tol);
        prop_assert!((0.0..=1.0).contains(&f));
    }
}

#[test]
fn representer_quadrature_converges_at_second_order() {
    // Trapezoid error for the smooth weight ρ ≡ 1 halves twice per grid
    // doubling, so consecutive errors against a fine reference shrink by
    // about 4.
    let eval_at = |nodes: usize| {
        let kernel = ScalarKernel::gaussian(1.0).unwrap();
        let weights: Vec<WeightFn> = vec![Box::new(|_| 1.0)];
        let basis = representer_basis_quadrature(&kernel, &weights, (0.0, 1.0), nodes).unwrap();
        basis.basis_eval(0, 0.25)
    };
    let reference = eval_at(16_001);
    let coarse = (eval_at(501) - reference).abs();
    let fine = (eval_at(1_001) - reference).abs();
    assert!(fine > 0.0, "refinement already converged; pick coarser grids");
    let rate = coarse / fine;
    assert!(
        (3.0..5.5).contains(&rate),
        "error ratio {rate}, want ≈ 4 for O(N⁻²)"
    );
}
