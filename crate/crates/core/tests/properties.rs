use genflow::concave::solve_symmetric_concave;
use genflow::generate::{concave_instance, linear_instance, market_instance, Limits, MarketLimits};
use genflow::linear::solve_symmetric_linear;
use genflow::market::{solve_market, MarketMode};
use genflow::reference::{pwl_discretize, solve_symmetric_lp};
use genflow::report::SolverReport;
use genflow::sink::{solve_sink, solve_sink_linear};
use genflow::SolveOptions;
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn linear_runs_keep_invariants(seed in 0u64..100_000) {
        let net = linear_instance(seed, Limits::LINEAR).to_linear().unwrap();
        let sol = solve_symmetric_linear(&net, SolveOptions::checked()).unwrap();
        prop_assert!(sol.log.clean(), "{:?}", sol.log);
        prop_assert!(net.flow_within_bounds(&sol.flow));
        prop_assert_eq!(net.discrepancy_of_flow(&sol.flow), Some(sol.kappa.clone()));
        // the starting flow is feasible, so the optimum cannot be worse
        let start = net.discrepancy_of_flow(&net.lower_flow()).unwrap();
        prop_assert!(sol.kappa <= start);
        for p in &sol.phases {
            prop_assert!(p.augmentations <= p.augmentation_bound);
            prop_assert!(p.start_bound_ok && p.adjust_bound_ok && p.per_arc_ok);
        }
        for w in sol.phases.windows(2) {
            prop_assert_eq!(w[1].delta * 2.0, w[0].delta);
        }
    }

    #[test]
    fn concave_runs_keep_invariants(seed in 0u64..100_000) {
        let net = concave_instance(seed, Limits::CONCAVE).to_concave().unwrap();
        let sol = solve_symmetric_concave(&net, 1e-4, SolveOptions::checked()).unwrap();
        prop_assert!(sol.log.clean(), "{:?}", sol.log);
        prop_assert!(net.flow_within_bounds(&sol.flow));
        prop_assert!(sol.phase_count() <= sol.phase_limit);
        let measured = net.discrepancy_of_flow(&sol.flow).unwrap();
        prop_assert!((measured - sol.kappa).abs() <= 1e-9 * sol.kappa.abs().max(1.0));
    }

    #[test]
    fn exact_sink_excess_matches_kappa(seed in 0u64..100_000, pick in 0usize..64) {
        let net = linear_instance(seed, Limits::LINEAR).to_linear().unwrap();
        let t = pick % net.node_count();
        if let Some(s) = solve_sink_linear(&net, t, None, SolveOptions::default()).unwrap().feasible() {
            prop_assert_eq!(&s.sink_excess, &s.sink_excess_from_kappa);
            prop_assert_eq!(&s.excess[t], &s.sink_excess);
            prop_assert!(s.excess.iter().enumerate().all(|(i, e)| i == t || *e >= num_traits::Zero::zero()));
        }
    }

    #[test]
    fn approximate_sink_tracks_exact(seed in 0u64..100_000, pick in 0usize..64) {
        let inst = linear_instance(seed, Limits::LINEAR);
        let lin = inst.to_linear().unwrap();
        let t = pick % lin.node_count();
        let exact = solve_sink_linear(&lin, t, None, SolveOptions::default()).unwrap();
        let approx = solve_sink(&inst.to_concave().unwrap(), t, 1e-6, None, SolveOptions::default()).unwrap();
        prop_assert_eq!(exact.is_infeasible(), approx.is_infeasible());
        if let (Some(e), Some(a)) = (exact.feasible(), approx.feasible()) {
            let e_t = num_traits::ToPrimitive::to_f64(&e.sink_excess).unwrap();
            prop_assert!((e_t - a.sink_excess).abs() <= 1e-5 * e_t.abs().max(1.0), "{} vs {}", e_t, a.sink_excess);
        }
    }

    #[test]
    fn reports_survive_json(seed in 0u64..100_000) {
        let net = linear_instance(seed, Limits::LINEAR).to_linear().unwrap();
        let sol = solve_symmetric_linear(&net, SolveOptions::default()).unwrap();
        let text = SolverReport::linear("solve-linear", &sol).to_json();
        let back = SolverReport::from_json(&text).unwrap();
        prop_assert_eq!(back.to_json(), text);
    }

    #[test]
    fn fisher_markets_clear(seed in 0u64..100_000) {
        let m = market_instance(seed, MarketLimits::FISHER);
        let sol = solve_market(&m, MarketMode::Fisher, 1e-7, SolveOptions::default()).unwrap();
        let eq = sol.equilibrium.expect("fisher markets are always feasible");
        prop_assert!(eq.kkt.within(1e-4), "{:?}", eq.kkt);
        let spent: f64 = eq.prices.iter().sum();
        let money: f64 = m.budgets.iter().map(|&b| b as f64).sum();
        prop_assert!((spent - money).abs() <= 1e-4 * money);
    }
}

proptest! {
    #![proptest_config(config(8))]

    #[test]
    fn concave_optimum_within_secant_bounds(seed in 0u64..100_000) {
        let net = concave_instance(seed, Limits::CONCAVE).to_concave().unwrap();
        let eps = 1e-4;
        let sol = solve_symmetric_concave(&net, eps, SolveOptions::default()).unwrap();
        let d = pwl_discretize(&net, 16, 1e-4).unwrap();
        let lp = num_traits::ToPrimitive::to_f64(&solve_symmetric_lp(&d.network).unwrap().kappa).unwrap();
        let slack = 1e-9 * lp.abs().max(1.0);
        prop_assert!(sol.kappa <= lp + eps + slack, "{} > {}", sol.kappa, lp);
        prop_assert!(sol.kappa >= lp - d.gap - eps - slack, "{} < {} - {}", sol.kappa, lp, d.gap);
    }
}
