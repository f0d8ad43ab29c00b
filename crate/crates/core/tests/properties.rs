use proptest::prelude::*;
use qwass::classical_ot::{w2_1d_quantile, w2_1d_weighted, w2_discrete, w2_points};
use qwass::densop::{norms, partial_trace, tensor, trace_distance, DensityOperator};
use qwass::fock::FockBasis;
use qwass::linalg;
use qwass::qot::{dd_cq, dd_qq, SolverOptions};
use qwass::quantize::{husimi, toeplitz, PhaseGrid, PhaseMeasure};
use qwass::rng::{stream, Stream};

fn measure(max_points: usize, radius: f64) -> impl Strategy<Value = PhaseMeasure> {
    prop::collection::vec(((-radius..radius), (-radius..radius), 0.05f64..1.0), 1..=max_points).prop_map(|v| {
        let points = v.iter().map(|&(q, p, _)| [q, p]).collect();
        let weights = v.iter().map(|&(_, _, w)| w).collect();
        PhaseMeasure::normalized(points, weights).unwrap()
    })
}

fn state(n: usize, seed: u64, rank: usize) -> DensityOperator {
    DensityOperator::random(n, rank, &mut stream(seed, Stream::RandomStates)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn w2_is_a_metric_on_discrete_measures(a in measure(6, 2.0), b in measure(6, 2.0), c in measure(6, 2.0)) {
        let (ab, _) = w2_discrete(&a, &b).unwrap();
        let (ba, _) = w2_discrete(&b, &a).unwrap();
        let (bc, _) = w2_discrete(&b, &c).unwrap();
        let (ac, _) = w2_discrete(&a, &c).unwrap();
        let (aa, _) = w2_discrete(&a, &a).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-10);
        prop_assert!(ac <= ab + bc + 1e-10);
        prop_assert!(aa <= 1e-7);
        prop_assert!(ab >= 0.0);
    }

    #[test]
    fn optimal_plan_has_the_prescribed_marginals(a in measure(7, 3.0), b in measure(7, 3.0)) {
        let (w, plan) = w2_discrete(&a, &b).unwrap();
        for (r, m) in plan.row_sums().iter().zip(&a.weights) {
            prop_assert!((r - m).abs() <= 1e-10);
        }
        for (c, m) in plan.col_sums().iter().zip(&b.weights) {
            prop_assert!((c - m).abs() <= 1e-10);
        }
        // strong LP duality
        prop_assert!((plan.dual_value(&a.weights, &b.weights) - w * w).abs() <= 1e-9 * (1.0 + w * w));
    }

    #[test]
    fn quantile_formula_matches_lp(xs in prop::collection::vec(-5.0f64..5.0, 1..30), shift in -3.0f64..3.0, seed in any::<u64>()) {
        let k = xs.len();
        let mut ys: Vec<f64> = xs.iter().map(|x| x * 0.7 + shift).collect();
        // decorrelate the order so the plan is not the identity
        ys.rotate_left((seed % k as u64) as usize);
        let w = vec![1.0 / k as f64; k];
        let col = |v: &[f64]| v.iter().map(|&x| vec![x]).collect::<Vec<_>>();
        let lp = w2_points(&col(&xs), &w, &col(&ys), &w).unwrap().w2();
        prop_assert!((w2_1d_quantile(&xs, &ys).unwrap() - lp).abs() <= 1e-10);
        prop_assert!((w2_1d_weighted(&xs, &w, &ys, &w).unwrap() - lp).abs() <= 1e-10);
    }

    #[test]
    fn translation_moves_w2_by_the_shift(a in measure(6, 2.0), dq in -2.0f64..2.0, dp in -2.0f64..2.0) {
        let moved = PhaseMeasure::new(a.points.iter().map(|z| [z[0] + dq, z[1] + dp]).collect(), a.weights.clone()).unwrap();
        let (w, _) = w2_discrete(&a, &moved).unwrap();
        prop_assert!((w - (dq * dq + dp * dp).sqrt()).abs() <= 1e-9);
    }

    #[test]
    fn random_states_are_density_operators(n in 2usize..10, rank in 1usize..10, seed in any::<u64>()) {
        let r = state(n, seed, rank.min(n));
        prop_assert!(r.validate().passed());
        prop_assert!((r.trace() - 1.0).abs() <= 1e-12);
        let nr = norms(&r.matrix);
        prop_assert!(nr.chain_holds(1e-12));
        prop_assert!((nr.trace_norm - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn partial_traces_of_products_recover_the_factors(n in 2usize..5, m in 2usize..5, seed in any::<u64>()) {
        let (r, s) = (state(n, seed, n), state(m, seed.wrapping_add(1), m));
        let t = tensor(&r, &s);
        let first = partial_trace(&t, &[0]).unwrap();
        let second = partial_trace(&t, &[1]).unwrap();
        prop_assert!(linalg::max_abs(&linalg::sub(&first.matrix, &r.matrix)) <= 1e-12);
        prop_assert!(linalg::max_abs(&linalg::sub(&second.matrix, &s.matrix)) <= 1e-12);
    }

    #[test]
    fn trace_distance_is_a_bounded_metric(n in 2usize..8, seed in any::<u64>()) {
        let (a, b, c) = (state(n, seed, n), state(n, seed ^ 1, 1), state(n, seed ^ 2, 2.min(n)));
        let (ab, bc, ac) = (trace_distance(&a, &b), trace_distance(&b, &c), trace_distance(&a, &c));
        prop_assert!((ab - trace_distance(&b, &a)).abs() <= 1e-12);
        prop_assert!((0.0..=2.0 + 1e-12).contains(&ab));
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert!(trace_distance(&a, &a) <= 1e-12);
    }

    #[test]
    fn toeplitz_of_a_probability_measure_is_a_state(m in measure(5, 1.0)) {
        let basis = FockBasis::new(0.5, 24).unwrap();
        let t = toeplitz(&basis, &m);
        prop_assert!(t.validate().passed());
        prop_assert!(linalg::min_eig(&t.matrix) >= -1e-12);
    }

    #[test]
    fn husimi_is_a_nonnegative_unit_mass_density(n in 4usize..10, seed in any::<u64>()) {
        let basis = FockBasis::new(0.5, n).unwrap();
        let r = state(n, seed, n);
        let half = (2.0 * 0.5 * (n as f64 + 8.0 * (n as f64).sqrt() + 8.0)).sqrt() + 2.0;
        let h = husimi(&basis, &r.matrix, &PhaseGrid::square([0.0, 0.0], half, 96));
        prop_assert!(h.min() >= -1e-14);
        prop_assert!((h.integral() - 1.0).abs() <= 1e-6);
    }
}

proptest! {
    // SDP solves are the expensive part; fewer cases at a small truncation
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn qq_values_respect_the_floor_and_weak_duality(seed in any::<u64>(), hbar in 0.2f64..1.0) {
        let n = 5;
        let basis = FockBasis::new(hbar, n).unwrap();
        let (r, s) = (state(n, seed, 2), state(n, seed ^ 7, 2));
        let res = dd_qq(&basis, &r, &s, 1.0, &SolverOptions::with_tol(1e-6)).unwrap();
        prop_assert!(res.converged);
        prop_assert!(res.respects_floor(1e-5));
        prop_assert!(res.certificate.margin() >= -1e-8);
        let sym = dd_qq(&basis, &s, &r, 1.0, &SolverOptions::with_tol(1e-6)).unwrap();
        prop_assert!((sym.value - res.value).abs() <= 1e-4 * res.value);
    }

    #[test]
    fn cq_values_respect_the_floor_and_weak_duality(f in measure(3, 1.0), seed in any::<u64>()) {
        let n = 6;
        let basis = FockBasis::new(0.5, n).unwrap();
        let r = state(n, seed, 2);
        let res = dd_cq(&basis, &f, &r, 1.0, &SolverOptions::with_tol(1e-6)).unwrap();
        prop_assert!(res.converged);
        prop_assert!(res.respects_floor(1e-5));
    }
}
