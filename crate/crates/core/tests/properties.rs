use mtwv_core::cost::{build_cost, CostParams};
use mtwv_core::geometry::{cone_contains, CExpSolver, ConeSpec};
use mtwv_core::lemmas::margin;
use mtwv_core::mtw::MtwEvaluator;
use mtwv_core::report::{ConditionReport, Histogram, Verdict};
use mtwv_core::synthetic::{generate_probes, ProbeStrategy};
use mtwv_core::{CostModel, Vector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cost(name: &str) -> CostModel {
    build_cost(name, &CostParams::default(), None).unwrap()
}

fn v2(a: f64, b: f64) -> Vector {
    Vector::from_vec(vec![a, b])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exponential_round_trip(
        name in prop::sample::select(vec!["bilinear", "quadratic", "log"]),
        sx in 0.0..1.0f64, tx in 0.0..1.0f64, sy in 0.0..1.0f64, ty in 0.0..1.0f64,
    ) {
        let c = cost(name);
        let (xlo, xhi) = c.x_domain().bounding_box();
        let (ylo, yhi) = c.y_domain().bounding_box();
        let x = v2(xlo[0] + sx * (xhi[0] - xlo[0]), xlo[1] + tx * (xhi[1] - xlo[1]));
        let y = v2(ylo[0] + sy * (yhi[0] - ylo[0]), ylo[1] + ty * (yhi[1] - ylo[1]));
        let solver = CExpSolver::at_x(&c, &x).unwrap();
        let p = solver.forward(&y).unwrap();
        let back = solver.solve(&p).unwrap();
        prop_assert!(solver.residual(&back, &p).unwrap() <= 1e-10);
    }

    #[test]
    fn cone_samples_are_members(angle in 0.0..std::f64::consts::TAU, k in 1.0..50.0f64, seed in any::<u64>()) {
        let cone = ConeSpec::forward(v2(0.3, -0.2), v2(angle.cos(), angle.sin()), k);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..16 {
            let v = cone.sample(&mut rng, 0.5).unwrap();
            // the sample sits on the cap boundary up to rounding, so test a slightly wider cone
            let wide = ConeSpec::forward(cone.vertex.clone(), cone.axis.clone(), k * (1.0 + 1e-9));
            prop_assert!(cone_contains(&wide, &v).unwrap());
        }
    }

    #[test]
    fn margin_sign_matches_inequality(lhs in -10.0..10.0f64, rhs in 0.0..10.0f64, tol in 0.0..1e-3f64) {
        prop_assert_eq!(margin(lhs, rhs, tol) >= 0.0, lhs <= rhs + tol);
    }

    #[test]
    fn mtw_stencil_is_even_and_quadratic_in_xi(angle in 0.0..std::f64::consts::TAU, s in 0.2..0.8f64) {
        let c = cost("log");
        let x = v2(0.1, 0.1);
        let ev = MtwEvaluator::new(&c, &x).unwrap();
        let p = CExpSolver::at_x(&c, &x).unwrap().forward(&v2(1.0 + 0.2 * s, 1.2 - 0.2 * s)).unwrap();
        let xi = v2(angle.cos(), angle.sin());
        let eta = v2(-angle.sin(), angle.cos());
        let a = ev.eval(&p, &xi, &eta).unwrap().value;
        let b = ev.eval(&p, &xi, &(-&eta)).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-9);
        let d = ev.eval(&p, &(&xi * 2.0), &eta).unwrap().value;
        prop_assert!((d - 4.0 * a).abs() <= 1e-8 * (4.0 * a).abs());
    }

    #[test]
    fn histogram_counts_every_value(values in prop::collection::vec(-1e3..1e3f64, 1..200), bins in 1usize..64) {
        let h = Histogram::from_values(&values, bins).unwrap();
        prop_assert_eq!(h.total(), values.len() as u64);
    }

    #[test]
    fn report_round_trips(margin in -1e3..1e3f64, n in 0usize..1000, est in -1e9..1e9f64) {
        let mut r = ConditionReport::new("x");
        r.observe_margin(margin);
        r.estimate("e", est);
        r.n_checked = n;
        r.escalate(Verdict::Inconclusive);
        let back: ConditionReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        prop_assert_eq!(back, r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn doubling_extends_the_probe_list(seed in any::<u64>(), n in 1usize..24) {
        let c = cost("quadratic");
        let short = generate_probes(&c, n, seed, ProbeStrategy::Uniform).unwrap();
        let long = generate_probes(&c, 2 * n, seed, ProbeStrategy::Uniform).unwrap();
        prop_assert_eq!(&long[..short.len()], &short[..]);
    }
}
