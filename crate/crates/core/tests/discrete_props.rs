mod common;

use proptest::prelude::*;

use winrestart::analysis::fit_exponential;
use winrestart::discrete::{algorithm_step, run_algorithm, DiscreteConfig, RestartPolicy, RestartSemantics};
use winrestart::dynamics::{integrate_fixed, IntegratorOptions, SystemParams};
use winrestart::experiments::iterate_curve;
use winrestart::objectives::{gamma_for_oscillation, DiagonalQuadratic, Objective};

fn table3_cfg(eps: f64, policy: RestartPolicy) -> DiscreteConfig {
    let gamma = gamma_for_oscillation(3.0, 6.0, 10.0, 2, eps).unwrap();
    DiscreteConfig::new(SystemParams { alpha: 3.0, beta: 6.0, gamma }, 1e-3, 3000, policy)
}

fn fitted_b(cfg: &DiscreteConfig) -> f64 {
    let f = common::table_problem();
    let x0 = [1.0; 3];
    let recs = run_algorithm(&f, cfg, &x0).unwrap();
    fit_exponential(&iterate_curve(f.gap(&x0), &recs)).unwrap().b
}

#[test]
fn one_dimensional_step_arithmetic() {
    let f = DiagonalQuadratic::scalar(1.0).unwrap();
    let cfg = DiscreteConfig::new(SystemParams { alpha: 3.0, beta: 1.0, gamma: 1.0 }, 0.1, 1, RestartPolicy::None);
    let (y, x) = algorithm_step(&f, &cfg, &[1.0], &[0.9]);
    assert!((y[0] - 0.84).abs() < 1e-15);
    assert!((x[0] - 0.8316).abs() < 1e-15);
}

#[test]
fn iterates_approach_the_ode_as_h_shrinks() {
    let f = DiagonalQuadratic::scalar(1.0).unwrap();
    let p = SystemParams { alpha: 3.0, beta: 1.0, gamma: 1.0 };
    let h_ode = 1e-5;
    let opts = IntegratorOptions {
        h_ode,
        ..IntegratorOptions::default()
    };
    let horizon = 2.0;
    let ode = integrate_fixed(&f, &p, &[1.0], horizon, &opts).unwrap();

    let mut errors = Vec::new();
    for h in [1e-2, 1e-3, 1e-4] {
        let n = (horizon / h).round() as usize;
        let cfg = DiscreteConfig::new(p, h, n, RestartPolicy::None);
        let recs = run_algorithm(&f, &cfg, &[1.0]).unwrap();
        // record k holds x_{k+1}, which sits at t = k h since x_1 = x_0 is t = 0
        let stride = (h / h_ode).round() as usize;
        let err = recs
            .iter()
            .filter_map(|r| ode.get(r.k * stride).map(|s| (r.x[0] - s.x[0]).abs()))
            .fold(0.0_f64, f64::max);
        errors.push(err);
    }
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
    assert!(errors[2] < 1e-3, "{errors:?}");
}

#[test]
fn restart_gaps_decrease_across_cycles() {
    for eps in [0.1, 10.0, 1000.0] {
        let f = common::table_problem();
        let recs = run_algorithm(&f, &table3_cfg(eps, RestartPolicy::Speed), &[1.0; 3]).unwrap();
        let gaps: Vec<f64> = recs.iter().filter(|r| r.restarted).map(|r| r.f_gap).collect();
        assert!(gaps.len() > 3, "eps={eps}: {} restarts", gaps.len());
        for w in gaps.windows(2) {
            assert!(w[1] < w[0], "eps={eps}: {} then {}", w[0], w[1]);
        }
    }
}

#[test]
fn speed_restart_beats_no_restart() {
    for eps in [0.1, 10.0, 1000.0] {
        let speed = fitted_b(&table3_cfg(eps, RestartPolicy::Speed));
        let none = fitted_b(&table3_cfg(eps, RestartPolicy::None));
        assert!(speed > none, "eps={eps}: speed {speed} none {none}");
    }
}

#[test]
fn identical_inputs_give_identical_iterates() {
    let f = common::table_problem();
    for policy in RestartPolicy::ALL {
        let cfg = table3_cfg(10.0, policy);
        let a = run_algorithm(&f, &cfg, &[1.0; 3]).unwrap();
        let b = run_algorithm(&f, &cfg, &[1.0; 3]).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn warm_start_first_restart_is_a_function_value_increase() {
    let f = common::table_problem();
    let recs = run_algorithm(&f, &table3_cfg(10.0, RestartPolicy::WarmStart), &[1.0; 3]).unwrap();
    let first = recs.iter().position(|r| r.restarted).expect("no restart");
    assert!(first >= 1);
    // without the restart the step would have raised f
    let plain = run_algorithm(&f, &table3_cfg(10.0, RestartPolicy::None), &[1.0; 3]).unwrap();
    assert!(plain[first].f_gap > plain[first - 1].f_gap);
    assert_eq!(recs[..first], plain[..first]);
}

#[test]
fn literal_semantics_is_a_different_run() {
    let f = common::table_problem();
    let collapse = table3_cfg(0.1, RestartPolicy::Speed);
    let literal = DiscreteConfig {
        semantics: RestartSemantics::Literal,
        ..collapse
    };
    let a = run_algorithm(&f, &collapse, &[1.0; 3]).unwrap();
    let b = run_algorithm(&f, &literal, &[1.0; 3]).unwrap();
    assert_ne!(a, b);
    assert!(b.iter().all(|r| r.f_gap >= 0.0 && r.f_gap.is_finite()));
}

#[test]
fn start_at_minimizer_never_moves() {
    let f = common::table_problem();
    for policy in RestartPolicy::ALL {
        let recs = run_algorithm(&f, &table3_cfg(0.1, policy), &[0.0; 3]).unwrap();
        assert!(recs.iter().all(|r| r.x == vec![0.0; 3] && !r.restarted));
    }
}

proptest! {
    #[test]
    fn cold_start_is_a_gradient_step(
        z in prop::collection::vec(-5.0..5.0_f64, 3),
        gamma in 0.5..1000.0_f64,
        h in 1e-4..1e-2_f64,
    ) {
        let f = common::table_problem();
        let cfg = DiscreteConfig::new(SystemParams { alpha: 3.0, beta: 6.0, gamma }, h, 1, RestartPolicy::None);
        let (y, x) = algorithm_step(&f, &cfg, &z, &z);
        let g = f.grad(&z);
        for i in 0..3 {
            prop_assert_eq!(y[i], z[i]);
            prop_assert!((x[i] - (z[i] - gamma * h * h * g[i])).abs() <= 1e-12 * z[i].abs().max(1.0));
        }
    }

    #[test]
    fn gaps_stay_nonnegative(eps in 0.1..1000.0_f64, beta in 0.0..6.0_f64) {
        let f = common::table_problem();
        let gamma = gamma_for_oscillation(3.0, beta, 10.0, 2, eps).unwrap();
        let cfg = DiscreteConfig::new(SystemParams { alpha: 3.0, beta, gamma }, 1e-3, 300, RestartPolicy::Speed);
        for r in run_algorithm(&f, &cfg, &[1.0; 3]).unwrap() {
            prop_assert!(r.f_gap >= 0.0);
        }
    }
}
