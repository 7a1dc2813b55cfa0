use nalgebra::DMatrix;
use proptest::prelude::*;
use starsolve_core::problems::{closed_form_by_name, SplitMix64};
use starsolve_core::{
    assemble, build_mas, continuous_star_oracle, function_coeff_matrix, gmres, rk45_solve, solve, star_product,
    theta_coeff_matrix, truncate_bandwidth, unvec, vec_of, CoeffMatrix, Complex64, FnOperator, GmresOptions,
    LegendreBasis, MatrixEquationForm, SeparableSystem, SolveOptions, SparseMatrix, Term, TimeProfile,
};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn norm2(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn dense_op(a: DMatrix<Complex64>) -> FnOperator<impl Fn(&[Complex64], &mut [Complex64])> {
    let n = a.nrows();
    FnOperator::new(n, move |x, y| {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = (0..n).map(|j| a[(i, j)] * x[j]).sum();
        }
    })
}

fn random_matrix(n: usize, seed: u64) -> DMatrix<Complex64> {
    let mut rng = SplitMix64::new(seed);
    let scale = 1.0 / (n as f64).sqrt();
    DMatrix::from_fn(n, n, |i, j| {
        let z = c(rng.next_f64() - 0.5, rng.next_f64() - 0.5) * scale;
        if i == j {
            z + c(1.5, 0.0)
        } else {
            z
        }
    })
}

fn random_vector(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = SplitMix64::new(seed);
    (0..n).map(|_| c(rng.next_f64() - 0.5, rng.next_f64() - 0.5)).collect()
}

fn profile_strategy() -> impl Strategy<Value = TimeProfile> {
    prop_oneof![
        (-2.0..2.0f64).prop_map(TimeProfile::Constant),
        (0.0..3.0f64, -1.0..1.0f64).prop_map(|(freq, phase)| TimeProfile::Cos { freq, phase }),
        prop::collection::vec(-1.0..1.0f64, 1..4).prop_map(TimeProfile::Poly),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn vec_unvec_round_trip(m in 1usize..12, n in 1usize..6, seed in any::<u64>()) {
        let x = random_vector(m * n, seed);
        let mat = unvec(&x, m, n).unwrap();
        prop_assert_eq!(vec_of(&mat), x.clone());
        for col in 0..n {
            for row in 0..m {
                prop_assert_eq!(mat[(row, col)], x[col * m + row]);
            }
        }
    }

    #[test]
    fn operator_matches_matrix_map(
        m in 2usize..16,
        n in 1usize..5,
        profiles in prop::collection::vec(profile_strategy(), 1..4),
        seed in any::<u64>(),
    ) {
        let mut rng = SplitMix64::new(seed);
        let terms: Vec<Term> = profiles
            .into_iter()
            .map(|p| {
                let trip: Vec<_> = (0..2 * n)
                    .map(|_| {
                        let i = (rng.next_u64() % n as u64) as usize;
                        let j = (rng.next_u64() % n as u64) as usize;
                        (i, j, c(rng.next_f64() - 0.5, rng.next_f64() - 0.5))
                    })
                    .collect();
                Term::new(SparseMatrix::from_triplets(n, &trip).unwrap(), p)
            })
            .collect();
        let sys = SeparableSystem::new(n, terms).unwrap();
        let op = assemble(&sys, m, 1e-13).unwrap();
        let v = random_vector(n, seed ^ 1);
        let form = MatrixEquationForm::from_operator(&op, &v).unwrap();
        let x = random_vector(m * n, seed ^ 2);
        let via_op = op.apply(&x).unwrap();
        let via_map = form.apply_map(&unvec(&x, m, n).unwrap()).unwrap();
        prop_assert!(max_diff(&via_op, via_map.as_slice()) <= 1e-14);
        // The right-hand side φ(0)vᵀ has rank exactly one.
        let sv = starsolve_core::singular_values(&form.rhs_matrix()).unwrap();
        prop_assert_eq!(starsolve_core::numerical_rank(&sv, 1e-10).unwrap(), 1);
    }

    #[test]
    fn star_product_associates(m in 1usize..20, seed in any::<u64>()) {
        let mut rng = SplitMix64::new(seed);
        let mut mk = || CoeffMatrix::new(DMatrix::from_fn(m, m, |_, _| rng.next_f64() - 0.5)).unwrap();
        let (f, g, h) = (mk(), mk(), mk());
        let left = star_product(&star_product(&f, &g).unwrap(), &h).unwrap();
        let right = star_product(&f, &star_product(&g, &h).unwrap()).unwrap();
        let scale = left.entries().norm().max(1e-300);
        prop_assert!((left.entries() - right.entries()).norm() <= 1e-12 * scale);
    }

    #[test]
    fn heaviside_complement(m in 1usize..300) {
        let t = theta_coeff_matrix(m).unwrap();
        let sum = t.entries() + t.entries().transpose();
        for i in 0..m {
            for j in 0..m {
                let want = if i == 0 && j == 0 { 1.0 } else { 0.0 };
                prop_assert!((sum[(i, j)] - want).abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn gmres_residuals_nonincreasing_and_linear(n in 2usize..40, seed in any::<u64>(), alpha_re in -3.0..3.0f64) {
        let op = dense_op(random_matrix(n, seed));
        let b = random_vector(n, seed ^ 7);
        let opts = GmresOptions { tol: 1e-12, max_iter: n };
        let (x, stats) = gmres(&op, &b, &opts).unwrap();
        for w in stats.residual_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-14);
        }
        prop_assume!(alpha_re.abs() > 1e-3);
        let alpha = c(alpha_re, 0.5);
        let scaled: Vec<_> = b.iter().map(|v| v * alpha).collect();
        let (xs, _) = gmres(&op, &scaled, &opts).unwrap();
        let want: Vec<_> = x.iter().map(|v| v * alpha).collect();
        prop_assert!(max_diff(&xs, &want) <= 1e-10 * norm2(&want).max(1.0));
    }
}

#[test]
fn star_product_approaches_continuous_oracle() {
    let f = |t: f64| (2.0 * std::f64::consts::PI * t).cos();
    let mut errors = Vec::new();
    for m in [20, 40, 80] {
        let basis = LegendreBasis::new(m).unwrap();
        let fm = truncate_bandwidth(&function_coeff_matrix(f, &basis).unwrap(), 1e-13).unwrap();
        let b = fm.bandwidth().unwrap();
        let prod = star_product(&fm, &fm).unwrap();
        let oracle = continuous_star_oracle(f, f, m, 2 * m + 40).unwrap();
        let keep = m - b;
        let diff = prod.entries().view((0, 0), (keep, keep)) - oracle.entries().view((0, 0), (keep, keep));
        errors.push(diff.norm());
    }
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
}

#[test]
fn gmres_finite_termination() {
    for n in [5usize, 20, 50, 100] {
        let op = dense_op(random_matrix(n, n as u64));
        let b = random_vector(n, 99);
        let opts = GmresOptions { tol: 1e-10, max_iter: n };
        let (_, stats) = gmres(&op, &b, &opts).unwrap();
        assert!(stats.iterations <= n);
        assert!(stats.final_residual <= 1e-10, "n={n}: {:e}", stats.final_residual);
    }
}

#[test]
fn gmres_on_scalar_volterra_operator() {
    let m = 40;
    let lambda = 0.7;
    let t = theta_coeff_matrix(m).unwrap();
    let t = truncate_bandwidth(&t, 1e-13).unwrap().into_entries();
    let op = FnOperator::new(m, move |x, y| {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = x[i] - (0..m).map(|j| x[j] * (lambda * t[(i, j)])).sum::<Complex64>();
        }
    });
    let b = random_vector(m, 3);
    let (_, stats) = gmres(&op, &b, &GmresOptions { tol: 1e-13, max_iter: m }).unwrap();
    assert!(stats.converged && stats.iterations <= m);
    for w in stats.residual_history.windows(2) {
        assert!(w[1] <= w[0] + 1e-14);
    }
}

#[test]
fn closed_forms_converge_spectrally() {
    let p = closed_form_by_name("cosexp").unwrap();
    let mut errs = Vec::new();
    for m in [15, 30, 60] {
        let sol = solve(&p.system, &p.initial, &SolveOptions::new(m)).unwrap();
        let e = (0..=100)
            .map(|i| {
                let t = i as f64 / 100.0;
                max_diff(&sol.evaluate(t).unwrap(), &(p.exact)(t))
            })
            .fold(0.0, f64::max);
        errs.push(e);
    }
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    assert!(errs[2] <= 1e-9);
}

#[test]
fn mas_rescaling_matches_physical_time() {
    let t_phys = 1e-3;
    let (sys, mas) = build_mas(2, 1e4, t_phys, 5).unwrap();
    let v = mas.initial_complex();
    let taus: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let rescaled = rk45_solve(&sys, &v, &taus, 1e-12, 1e-12).unwrap();
    let phys_times: Vec<f64> = taus.iter().map(|t| t * t_phys).collect();
    let opts = starsolve_core::Dopri5Options::new(1e-12, 1e-12);
    let (orig, _) =
        starsolve_core::oracle::integrate(|t, x, y| mas.physical_rhs(t, x, y), &v, 0.0, &phys_times, &opts).unwrap();
    let worst = rescaled.iter().zip(&orig).map(|(a, b)| max_diff(a, b)).fold(0.0, f64::max);
    assert!(worst <= 1e-10, "{worst:e}");
}

#[test]
fn rk45_preserves_norm_on_skew_hermitian_systems() {
    for k in [2usize, 4] {
        let (sys, mas) = build_mas(k, 1e4, 1e-3, 11).unwrap();
        let v = mas.initial_complex();
        let ts: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0).collect();
        let out = rk45_solve(&sys, &v, &ts, 1e-10, 1e-10).unwrap();
        let nv = norm2(&v);
        for u in &out {
            assert!((norm2(u) / nv - 1.0).abs() <= 100.0 * 1e-10);
        }
    }
}

#[test]
fn spectral_solution_preserves_norm_and_initial_value() {
    let (sys, mas) = build_mas(2, 1e4, 1e-3, 42).unwrap();
    let v = mas.initial_complex();
    let sol = solve(&sys, &v, &SolveOptions::new(1000)).unwrap();
    let nv = norm2(&v);
    for i in 0..=100 {
        let u = sol.evaluate(i as f64 / 100.0).unwrap();
        assert!((norm2(&u) - nv).abs() <= 5e-8 * nv);
    }
    assert!(max_diff(&sol.evaluate(0.0).unwrap(), &v) <= 1e-8);
}

#[test]
fn gmres_iterations_stable_in_m() {
    let (sys, mas) = build_mas(4, 1e4, 1e-3, 42).unwrap();
    let v = mas.initial_complex();
    let a = solve(&sys, &v, &SolveOptions::new(1000)).unwrap().stats().iterations;
    let b = solve(&sys, &v, &SolveOptions::new(2000)).unwrap().stats().iterations;
    assert!(a.abs_diff(b) <= 5, "{a} vs {b}");
}
