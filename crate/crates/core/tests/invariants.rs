use dualrisk::closed_form::ExponentialSolution;
use dualrisk::simulate::{self, Horizon, SimConfig};
use dualrisk::{JumpDistribution, ModelParams};
use proptest::prelude::*;

fn model() -> impl Strategy<Value = ModelParams> {
    (0.1f64..2.0, 0.5f64..5.0, 0.05f64..1.0, 0.5f64..3.0, 0.1f64..5.0).prop_map(|(rho, lambda, delta, nu, x0)| {
        ModelParams::new(rho, lambda, delta, JumpDistribution::exponential(nu).unwrap(), x0).unwrap()
    })
}

fn strategy() -> impl Strategy<Value = simulate::Strategy> {
    prop_oneof![
        Just(simulate::Strategy::NoDividend),
        (0.0f64..6.0).prop_map(|b| simulate::Strategy::Barrier { b }),
        (0.05f64..3.0).prop_map(|eps| simulate::Strategy::PayAllExcess { eps }),
        Just(simulate::Strategy::TerminalPayout),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn paths_respect_the_budget(m in model(), s in strategy(), t in 0.1f64..20.0, idx in 0u64..1000) {
        let cfg = SimConfig::new(1, 9, Horizon::Finite { t });
        let out = simulate::simulate_path(&m, &s, &cfg, idx).unwrap();
        prop_assert!(out.discounted_dividends >= 0.0);
        prop_assert!(out.discounted_dividends <= m.x0 + out.jump_total + 1e-9);
        if let Some(tau) = out.ruin_time {
            prop_assert!(tau >= 0.0 && tau <= t);
            prop_assert_eq!(out.terminal_surplus, 0.0);
        } else {
            prop_assert!(out.terminal_surplus >= 0.0);
        }
    }

    #[test]
    fn threshold_paths_respect_the_budget(m in model(), level in 0.1f64..5.0, eps in 0.05f64..0.95, idx in 0u64..1000) {
        prop_assume!(m.is_profitable());
        let s = simulate::Strategy::ThresholdYield { level, eps };
        let cfg = SimConfig::new(1, 3, Horizon::Finite { t: 10.0 });
        let out = simulate::simulate_path(&m, &s, &cfg, idx).unwrap();
        prop_assert!(out.discounted_dividends >= 0.0);
        prop_assert!(out.discounted_dividends <= m.x0 + out.jump_total + 1e-9);
        if !out.reached_threshold {
            // only the liquidation at the horizon can have paid
            let liquidation = if out.ruin_time.is_some() { 0.0 } else { (-m.delta * 10.0).exp() * out.terminal_surplus };
            prop_assert!((out.discounted_dividends - liquidation).abs() <= 1e-12 * (1.0 + liquidation));
        }
    }

    #[test]
    fn paths_are_reproducible(m in model(), s in strategy(), idx in 0u64..1_000_000) {
        let cfg = SimConfig::new(1, 1234, Horizon::Finite { t: 5.0 });
        prop_assert_eq!(
            simulate::simulate_path(&m, &s, &cfg, idx).unwrap(),
            simulate::simulate_path(&m, &s, &cfg, idx).unwrap()
        );
    }

    #[test]
    fn closed_form_dominates_pay_all_now(m in model()) {
        prop_assume!(m.is_profitable());
        let sol = ExponentialSolution::new(&m).unwrap();
        for x in [0.1, 1.0, 5.0] {
            prop_assert!(sol.value(x).unwrap() >= x - 1e-9);
        }
    }
}

#[test]
fn barrier_values_below_optimum() {
    let m = ModelParams::canonical();
    let sol = ExponentialSolution::new(&m).unwrap();
    let cfg = SimConfig::new(20_000, 77, Horizon::infinite());
    let optimal = sol.value(m.x0).unwrap();
    for b in [0.5, 2.0, 6.0] {
        let est = simulate::estimate_value(&m, &simulate::Strategy::Barrier { b }, &cfg).unwrap();
        assert!(est.mean <= optimal + 3.0 * est.std_error, "b={b}: {est:?} vs {optimal}");
    }
}
