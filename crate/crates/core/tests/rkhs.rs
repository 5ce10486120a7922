use driftlearn_core::randdist::{sample_standard_normal, RngStream};
use driftlearn_core::rkhs::{
    em_quadratic_objective, expansion_eval, gram_matrix, kernel_eval, representer_basis_quadrature,
    ridge_map_estimate, DriftExpansion, MatrixKernel, ScalarKernel, WeightFn,
};
use driftlearn_core::sde::{builtin_model, euler_maruyama_simulate, ModelParams, ModelSpec, Trajectory};
use driftlearn_core::Mat;

fn gaussian(bandwidth: f64) -> ScalarKernel {
    ScalarKernel::gaussian(bandwidth).unwrap()
}

fn gaussian_1d() -> MatrixKernel {
    MatrixKernel::isotropic(gaussian(1.0), 1).unwrap()
}

fn k0(x: f64, y: f64) -> f64 {
    (-(x - y) * (x - y) / 2.0).exp()
}

// --- kernel evaluation -------------------------------------------------------

#[test]
fn kernel_is_one_on_the_diagonal() {
    let k = gaussian_1d();
    let v = kernel_eval(&k, &[0.7], &[0.7]).unwrap();
    assert_eq!(v[(0, 0)], 1.0);
}

#[test]
fn kernel_matches_gaussian_formula() {
    let k = gaussian_1d();
    let v = kernel_eval(&k, &[0.0], &[2.0]).unwrap();
    assert!((v[(0, 0)] - (-2.0f64).exp()).abs() < 1e-15);
    assert!((v[(0, 0)] - 0.13534).abs() < 1e-5);
}

#[test]
fn kernel_is_symmetric_in_its_arguments() {
    let k = MatrixKernel::isotropic(gaussian(0.7), 2).unwrap();
    let uv = kernel_eval(&k, &[0.1, -0.4], &[1.0, 0.3]).unwrap();
    let vu = kernel_eval(&k, &[1.0, 0.3], &[0.1, -0.4]).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            assert_eq!(uv[(i, j)], vu[(j, i)]);
        }
    }
}

#[test]
fn two_term_kernel_is_the_sum_of_its_terms() {
    let mut b2 = Mat::<f64>::identity(2, 2);
    b2[(0, 1)] = 0.5;
    b2[(1, 0)] = 0.5;
    let term1 = MatrixKernel::isotropic(gaussian(1.0), 2).unwrap();
    let term2 = MatrixKernel::single(gaussian(2.0), b2.clone()).unwrap();
    let both = MatrixKernel::new(vec![
        (gaussian(1.0), Mat::identity(2, 2)),
        (gaussian(2.0), b2),
    ])
    .unwrap();
    let (u, v) = ([0.2, 1.1], [-0.5, 0.4]);
    let sum = kernel_eval(&term1, &u, &v).unwrap() + kernel_eval(&term2, &u, &v).unwrap();
    let joint = kernel_eval(&both, &u, &v).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            assert!((joint[(i, j)] - sum[(i, j)]).abs() < 1e-15);
        }
    }
}

#[test]
fn kernel_rejects_mismatched_points() {
    let k = gaussian_1d();
    assert!(kernel_eval(&k, &[0.0], &[0.0, 1.0]).is_err());
    assert!(ScalarKernel::gaussian(0.0).is_err());
    assert!(ScalarKernel::gaussian(-1.0).is_err());
}

// --- Gram systems ------------------------------------------------------------

#[test]
fn duplicate_centers_give_all_ones_gram() {
    let k = gaussian_1d();
    let pts = vec![vec![0.3], vec![0.3]];
    let g = gram_matrix(&k, &pts, &pts).unwrap();
    let m = g.matrix();
    assert_eq!((m.nrows(), m.ncols()), (2, 2));
    for i in 0..2 {
        for j in 0..2 {
            assert_eq!(m[(i, j)], 1.0);
        }
    }
}

#[test]
fn square_gram_is_symmetric_psd() {
    let k = gaussian_1d();
    let mut rng = RngStream::new(31, 0);
    let pts: Vec<Vec<f64>> = (0..5).map(|_| vec![sample_standard_normal(&mut rng)]).collect();
    let g = gram_matrix(&k, &pts, &pts).unwrap();
    let m = g.matrix();
    for i in 0..5 {
        for j in 0..5 {
            assert_eq!(m[(i, j)], m[(j, i)]);
        }
    }
    let eigs = m.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
    assert!(eigs[0] >= -1e-10, "min eigenvalue {}", eigs[0]);
}

#[test]
fn gram_psd_scales_with_spectrum() {
    // Many close points make the Gram nearly singular; the smallest
    // eigenvalue must still only dip below zero at roundoff scale.
    let k = MatrixKernel::isotropic(gaussian(1.0), 2).unwrap();
    let mut rng = RngStream::new(32, 0);
    let pts: Vec<Vec<f64>> = (0..12)
        .map(|_| {
            vec![
                0.05 * sample_standard_normal(&mut rng),
                0.05 * sample_standard_normal(&mut rng),
            ]
        })
        .collect();
    let g = gram_matrix(&k, &pts, &pts).unwrap();
    let eigs = g.matrix().self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
    let max = eigs[eigs.len() - 1];
    assert!(eigs[0] >= -1e-8 * max, "min {} vs max {max}", eigs[0]);
}

#[test]
fn isotropic_gram_is_kronecker_with_identity() {
    // d = 3 with B = I₃: the 6×6 block Gram must equal K_scalar ⊗ I₃.
    let k = MatrixKernel::isotropic(gaussian(1.0), 3).unwrap();
    let pts = vec![vec![0.0, 0.5, -1.0], vec![1.0, 0.0, 0.25]];
    let g = gram_matrix(&k, &pts, &pts).unwrap();
    let m = g.matrix();
    assert_eq!((m.nrows(), m.ncols()), (6, 6));
    let sq = |p: &[f64], q: &[f64]| -> f64 {
        p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
    };
    for i in 0..2 {
        for j in 0..2 {
            let scalar = (-sq(&pts[i], &pts[j]) / 2.0).exp();
            for bi in 0..3 {
                for bj in 0..3 {
                    let want = if bi == bj { scalar } else { 0.0 };
                    let got = m[(i * 3 + bi, j * 3 + bj)];
                    assert!(
                        (got - want).abs() < 1e-14,
                        "block ({i},{j}) entry ({bi},{bj})"
                    );
                }
            }
        }
    }
}

#[test]
fn rectangular_gram_has_expected_shape() {
    let k = gaussian_1d();
    let evals = vec![vec![0.0], vec![1.0], vec![2.0]];
    let centers = vec![vec![0.5], vec![1.5]];
    let g = gram_matrix(&k, &evals, &centers).unwrap();
    assert_eq!((g.matrix().nrows(), g.matrix().ncols()), (3, 2));
    assert!((g.matrix()[(0, 1)] - k0(0.0, 1.5)).abs() < 1e-15);
    assert!(gram_matrix(&k, &[], &centers).is_err());
}

// --- drift expansions ----------------------------------------------------------

#[test]
fn expansion_returns_weight_at_its_center() {
    let e = DriftExpansion::new(gaussian_1d(), vec![vec![0.4]], vec![2.5]).unwrap();
    assert_eq!(expansion_eval(&e, &[0.4]), vec![2.5]);
}

#[test]
fn zero_weights_evaluate_to_zero() {
    let e = DriftExpansion::zero(gaussian_1d(), vec![vec![0.0], vec![1.0]]).unwrap();
    for x in [-1.0, 0.0, 0.3, 2.0] {
        assert_eq!(expansion_eval(&e, &[x]), vec![0.0]);
    }
}

#[test]
fn two_center_expansion_matches_hand_formula() {
    let (c1, c2) = (-0.5, 1.0);
    let (b1, b2) = (1.2, -0.7);
    let e = DriftExpansion::new(gaussian_1d(), vec![vec![c1], vec![c2]], vec![b1, b2]).unwrap();
    for x in [0.0, 1.0] {
        let want = k0(x, c1) * b1 + k0(x, c2) * b2;
        let got = expansion_eval(&e, &[x])[0];
        assert!((got - want).abs() < 1e-15, "at x={x}: {got} vs {want}");
    }
}

#[test]
fn expansion_matches_gram_action_at_centers() {
    // Reproducing sanity: evaluating Σκ(·,cⱼ)βⱼ at center cᵢ is the i-th
    // block of 𝒦(centers, centers)·β.
    let k = MatrixKernel::isotropic(gaussian(1.0), 2).unwrap();
    let mut rng = RngStream::new(33, 0);
    let centers: Vec<Vec<f64>> = (0..6)
        .map(|_| vec![sample_standard_normal(&mut rng), sample_standard_normal(&mut rng)])
        .collect();
    let beta: Vec<f64> = (0..12).map(|_| sample_standard_normal(&mut rng)).collect();
    let e = DriftExpansion::new(k.clone(), centers.clone(), beta.clone()).unwrap();
    let g = gram_matrix(&k, &centers, &centers).unwrap();
    for (i, c) in centers.iter().enumerate() {
        let val = e.eval(c);
        for bi in 0..2 {
            let mut want = 0.0;
            for j in 0..12 {
                want += g.matrix()[(i * 2 + bi, j)] * beta[j];
            }
            assert!(
                (val[bi] - want).abs() < 1e-10,
                "center {i} component {bi}: {} vs {want}",
                val[bi]
            );
        }
    }
}

#[test]
fn expansion_rejects_bad_weight_length() {
    assert!(DriftExpansion::new(gaussian_1d(), vec![vec![0.0]], vec![1.0, 2.0]).is_err());
}

// --- ridge baseline ---------------------------------------------------------------

fn flat_unit_model() -> ModelSpec {
    ModelSpec::new_1d("flat", |_| 0.0, None::<fn(f64) -> f64>, 1.0, 0.0)
}

#[test]
fn huge_ridge_shrinks_weights_to_zero() {
    let model = builtin_model("double_well", &ModelParams::default()).unwrap();
    let mut rng = RngStream::new(41, 0);
    let traj = euler_maruyama_simulate(&model, &[0.5], 0.05, 60, &mut rng).unwrap();
    let kernel = gaussian_1d();
    let est = ridge_map_estimate(&traj, &kernel, &model, 1e8).unwrap();
    // With ς = 1 and σ₀ ≡ I the right-hand side is 𝒦₀ᵀϑ.
    let left: Vec<Vec<f64>> = std::iter::once(traj.x0.clone())
        .chain(traj.states[..traj.len() - 1].iter().cloned())
        .collect();
    let g = gram_matrix(&kernel, &left, &traj.states).unwrap();
    let theta: Vec<f64> = traj
        .states
        .iter()
        .zip(&left)
        .map(|(s, l)| s[0] - l[0])
        .collect();
    let mut rhs_norm_sq = 0.0;
    for j in 0..traj.len() {
        let mut acc = 0.0;
        for (i, t) in theta.iter().enumerate() {
            acc += g.matrix()[(i, j)] * t;
        }
        rhs_norm_sq += acc * acc;
    }
    let beta_norm = est.weights().iter().map(|w| w * w).sum::<f64>().sqrt();
    assert!(
        beta_norm < 1e-4 * rhs_norm_sq.sqrt(),
        "‖β‖ = {beta_norm} vs ‖rhs‖ = {}",
        rhs_norm_sq.sqrt()
    );
}

#[test]
fn two_point_ridge_matches_hand_solve() {
    // m = 2, d = 1, σ = 1: β = (Δ𝒦₀ᵀ𝒦₀ + γI)⁻¹𝒦₀ᵀϑ with 𝒦₀ the Gram
    // between left endpoints {0, 0.5} and centers (the states) {0.5, 1.2}.
    let (delta, gamma) = (0.1, 0.3);
    let traj = Trajectory::new(
        vec![0.0],
        delta,
        vec![delta, 2.0 * delta],
        vec![vec![0.5], vec![1.2]],
    )
    .unwrap();
    let est = ridge_map_estimate(&traj, &gaussian_1d(), &flat_unit_model(), gamma).unwrap();

    let k = [
        [k0(0.0, 0.5), k0(0.0, 1.2)],
        [k0(0.5, 0.5), k0(0.5, 1.2)],
    ];
    let theta = [0.5, 0.7];
    // a = Δ·KᵀK + γI, r = Kᵀθ, solved by Cramer's rule.
    let mut a = [[gamma, 0.0], [0.0, gamma]];
    let mut r = [0.0, 0.0];
    for i in 0..2 {
        for j in 0..2 {
            for l in 0..2 {
                a[i][j] += delta * k[l][i] * k[l][j];
            }
        }
        for l in 0..2 {
            r[i] += k[l][i] * theta[l];
        }
    }
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let want = [
        (r[0] * a[1][1] - r[1] * a[0][1]) / det,
        (a[0][0] * r[1] - a[1][0] * r[0]) / det,
    ];
    assert!((est.weights()[0] - want[0]).abs() < 1e-10);
    assert!((est.weights()[1] - want[1]).abs() < 1e-10);
    assert_eq!(est.centers(), traj.states);
}

#[test]
fn noiseless_ridge_interpolates_spanned_drift() {
    // Data generated by a drift inside the span of the expansion, with the
    // noise and the ridge both taken to zero: the estimate must reproduce the
    // true drift values along the path.
    let truth = |x: f64| k0(x, -1.0) * 1.0 + k0(x, 1.0) * 1.0;
    let model = ModelSpec::new_1d("spanned", truth, None::<fn(f64) -> f64>, 1e-6, 0.0);
    let mut rng = RngStream::new(43, 0);
    let traj = euler_maruyama_simulate(&model, &[0.0], 0.01, 50, &mut rng).unwrap();
    let est = ridge_map_estimate(&traj, &gaussian_1d(), &model, 1e-10).unwrap();
    for s in &traj.states {
        let got = est.eval(s)[0];
        let want = truth(s[0]);
        assert!((got - want).abs() < 1e-3, "at {}: {got} vs {want}", s[0]);
    }
}

#[test]
fn ridge_estimate_minimizes_its_objective() {
    let model = builtin_model("double_well", &ModelParams::default()).unwrap();
    let mut rng = RngStream::new(44, 0);
    let traj = euler_maruyama_simulate(&model, &[0.5], 0.05, 80, &mut rng).unwrap();
    let gamma = 0.5;
    let est = ridge_map_estimate(&traj, &gaussian_1d(), &model, gamma).unwrap();
    let at_min = em_quadratic_objective(&traj, &model, gamma, &est).unwrap();
    let m = est.weights().len();
    for _ in 0..100 {
        let dir: Vec<f64> = (0..m).map(|_| sample_standard_normal(&mut rng)).collect();
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        let perturbed: Vec<f64> = est
            .weights()
            .iter()
            .zip(&dir)
            .map(|(w, g)| w + 0.1 * g / norm)
            .collect();
        let nearby = est.with_weights(perturbed).unwrap();
        let val = em_quadratic_objective(&traj, &model, gamma, &nearby).unwrap();
        assert!(
            val >= at_min,
            "perturbation of norm 0.1 beat the ridge solution: {val} < {at_min}"
        );
    }
}

#[test]
fn ridge_rejects_bad_arguments() {
    let model = flat_unit_model();
    let traj = Trajectory::new(vec![0.0], 0.1, vec![0.1], vec![vec![0.5]]).unwrap();
    assert!(ridge_map_estimate(&traj, &gaussian_1d(), &model, 0.0).is_err());
    assert!(ridge_map_estimate(&traj, &gaussian_1d(), &model, -1.0).is_err());
    let k2 = MatrixKernel::isotropic(gaussian(1.0), 2).unwrap();
    assert!(ridge_map_estimate(&traj, &k2, &model, 1.0).is_err());
}

// --- quadrature representer bases --------------------------------------------------

#[test]
fn unit_weight_basis_matches_gaussian_integral() {
    // ρ ≡ 1 on [0,1]: f(0) = ∫₀¹ e^{−z²/2} dz ≈ 0.85562.
    let fns: Vec<WeightFn> = vec![Box::new(|_| 1.0)];
    let basis = representer_basis_quadrature(&gaussian(1.0), &fns, (0.0, 1.0), 1001).unwrap();
    let v = basis.basis_eval(0, 0.0);
    assert!((v - 0.85562).abs() < 1e-4, "f(0) = {v}");
}

#[test]
fn narrow_bump_recovers_the_kernel() {
    // A normalized triangular bump at x₀ = 0.3 of half-width 0.02 acts like a
    // point evaluation, so fᵢ(·) ≈ κ(·, 0.3) up to O(width²).
    let (x0, w) = (0.3, 0.02);
    let fns: Vec<WeightFn> = vec![Box::new(move |z: f64| {
        let t = 1.0 - (z - x0).abs() / w;
        if t > 0.0 {
            t / w
        } else {
            0.0
        }
    })];
    let basis = representer_basis_quadrature(&gaussian(1.0), &fns, (0.0, 1.0), 10_001).unwrap();
    for u in [-0.5, 0.0, 0.3, 1.0, 2.0] {
        let got = basis.basis_eval(0, u);
        let want = k0(u, x0);
        assert!((got - want).abs() < 1e-3, "at u={u}: {got} vs {want}");
    }
}

#[test]
fn identical_functionals_give_identical_bases() {
    let fns: Vec<WeightFn> = vec![
        Box::new(|z: f64| (1.0 - z * z).max(0.0)),
        Box::new(|z: f64| (1.0 - z * z).max(0.0)),
    ];
    let basis = representer_basis_quadrature(&gaussian(1.0), &fns, (-1.0, 1.0), 501).unwrap();
    for i in 0..40 {
        let u = -2.0 + i as f64 * 0.1;
        assert!((basis.basis_eval(0, u) - basis.basis_eval(1, u)).abs() < 1e-12);
    }
    let sys = basis.system_matrix();
    assert_eq!((sys.nrows(), sys.ncols()), (2, 2));
    assert!((sys[(0, 0)] - sys[(1, 1)]).abs() < 1e-12);
    assert!((sys[(0, 1)] - sys[(0, 0)]).abs() < 1e-12);
}

#[test]
fn quadrature_basis_rejects_bad_arguments() {
    let fns: Vec<WeightFn> = vec![Box::new(|_| 1.0)];
    assert!(representer_basis_quadrature(&gaussian(1.0), &fns, (0.0, 1.0), 1).is_err());
    assert!(representer_basis_quadrature(&gaussian(1.0), &fns, (1.0, 0.0), 10).is_err());
    assert!(representer_basis_quadrature(&gaussian(1.0), &[], (0.0, 1.0), 10).is_err());
}
