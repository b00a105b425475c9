//! Acceptance gate. Every criterion prints one `PASS` or `FAIL` line; the
//! process exits nonzero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use winrestart::config::OutputFormat;
use winrestart::dynamics::{integrate_until_restart, IntegratorOptions, SystemParams};
use winrestart::experiments::{cmd_reproduce_paper, threads_from_env, ReproduceOptions, ReproduceReport};
use winrestart::objectives::{finite_difference_hvp, DiagonalQuadratic, FnObjective, Objective};
use winrestart::restart::{max_gap_increase, run_restarted, verify_cycle_contraction, RestartedTrajectory};
use winrestart::theory::{eval_g, eval_h, solve_tau, TheoreticalBounds};

type Outcome = (bool, String);

/// A quadratic whose `μ` and `L` are exact, with the parameters run on it.
struct ExactCase {
    name: String,
    obj: DiagonalQuadratic,
    params: SystemParams,
    x0: Vec<f64>,
}

fn exact_cases() -> Vec<ExactCase> {
    let mut v = Vec::new();
    for (beta, eps, params) in common::table_cells() {
        v.push(ExactCase {
            name: format!("table beta={beta} eps={eps}"),
            obj: common::table_problem(),
            params,
            x0: vec![1.0; 3],
        });
    }
    for gamma in [1.0, 4.0, 20.0] {
        v.push(ExactCase {
            name: format!("toy gamma={gamma}"),
            obj: DiagonalQuadratic::scalar(1.0).unwrap(),
            params: SystemParams { alpha: 3.0, beta: 1.0, gamma },
            x0: vec![1.0],
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..5 {
        let (params, l, mu) = common::random_params(&mut rng);
        v.push(ExactCase {
            name: format!("random #{i}"),
            obj: DiagonalQuadratic::new(vec![mu, (mu + l) / 2.0, l]).unwrap(),
            params,
            x0: vec![1.0, -1.0, 0.5],
        });
    }
    v
}

fn restarted(c: &ExactCase) -> RestartedTrajectory {
    run_restarted(&c.obj, &c.params, &c.x0, 5.0, &IntegratorOptions::default()).unwrap()
}

fn bounds(c: &ExactCase) -> TheoreticalBounds {
    TheoreticalBounds::compute(&c.params, c.obj.lipschitz(), c.obj.pl_mu()).unwrap()
}

fn c1_restart_oracle() -> Outcome {
    let start = Instant::now();
    let f = DiagonalQuadratic::scalar(1.0).unwrap();
    let mut worst = 0.0_f64;
    for p in common::random_scalar_configs(20, 7) {
        let t = integrate_until_restart(&f, &p, &[1.0], &IntegratorOptions::default())
            .unwrap()
            .restart_time
            .unwrap_or(f64::NAN);
        worst = worst.max((t - common::scalar_restart_time(&p, 1.0)).abs());
    }
    let el = start.elapsed();
    (
        worst < 1e-5 && el < Duration::from_secs(5),
        format!("max |T - T_exact| = {worst:.3e} over 20 configs (tol 1e-5), {:.2} s (limit 5 s)", el.as_secs_f64()),
    )
}

fn c2_sandwich() -> Outcome {
    let start = Instant::now();
    let mut cycles = 0;
    let mut bad = Vec::new();
    for c in exact_cases() {
        let b = bounds(&c);
        for &t in &restarted(&c).intervals {
            cycles += 1;
            if !(b.tau3 - 1e-7 <= t && t <= b.tau_upper + 1e-7) {
                bad.push(format!("{}: T={t:.6e} not in [{:.6e}, {:.6e}]", c.name, b.tau3, b.tau_upper));
            }
        }
    }
    let el = start.elapsed();
    (
        bad.is_empty() && cycles > 0 && el < Duration::from_secs(30),
        format!("{cycles} cycles, {} outside [tau3, tau_upper] +- 1e-7, {:.2} s (limit 30 s){}", bad.len(), el.as_secs_f64(), first(&bad)),
    )
}

fn c3_monotone() -> Outcome {
    let f = common::table_problem();
    let mut worst = f64::NEG_INFINITY;
    let mut runs = 0;
    for eps in [0.1, 10.0, 100.0, 1000.0] {
        for beta in [0.0, 6.0] {
            let gamma = winrestart::objectives::gamma_for_oscillation(3.0, beta, 10.0, 2, eps).unwrap();
            let p = SystemParams { alpha: 3.0, beta, gamma };
            let traj = run_restarted(&f, &p, &[1.0; 3], 5.0, &IntegratorOptions::default()).unwrap();
            worst = worst.max(max_gap_increase(&traj) / traj.initial_gap());
            runs += 1;
        }
    }
    (worst <= 1e-9, format!("largest forward difference / gap0 = {worst:.3e} over {runs} runs (tol 1e-9)"))
}

fn c4_envelope() -> Outcome {
    let mut worst = 0.0_f64;
    let mut samples = 0;
    for c in exact_cases() {
        let b = bounds(&c);
        let traj = restarted(&c);
        let g0 = traj.initial_gap();
        for s in &traj.samples {
            samples += 1;
            worst = worst.max(s.f_gap / (b.envelope(s.t) * g0));
        }
    }
    (worst <= 1.0, format!("max gap / (C e^(-Kt) gap0) = {worst:.6} over {samples} samples"))
}

fn c5_table2(r: &ReproduceReport, el: Duration) -> Outcome {
    checks_outcome(r, "table2", Some((el, Duration::from_secs(120))))
}

fn c6_table1(r: &ReproduceReport) -> Outcome {
    checks_outcome(r, "table1", None)
}

fn c7_table3(r: &ReproduceReport) -> Outcome {
    checks_outcome(r, "table3", None)
}

fn checks_outcome(r: &ReproduceReport, prefix: &str, budget: Option<(Duration, Duration)>) -> Outcome {
    let checks: Vec<_> = r.checks.iter().filter(|c| c.name.starts_with(prefix)).collect();
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{} = {:.4e} vs {:.4e}", c.name, c.value, c.target))
        .collect();
    let mut pass = !checks.is_empty() && failed.is_empty();
    let mut msg = format!("{}/{} checks pass", checks.len() - failed.len(), checks.len());
    if let Some((el, limit)) = budget {
        pass &= el < limit;
        msg += &format!(", grid {:.1} s (limit {} s)", el.as_secs_f64(), limit.as_secs());
    }
    if !failed.is_empty() {
        msg += &format!("; missed: {}", failed.join("; "));
    }
    (pass, msg)
}

fn c8_contraction() -> Outcome {
    let mut worst = 0.0_f64;
    let mut cycles = 0;
    for c in exact_cases() {
        let q = bounds(&c).q;
        for r in verify_cycle_contraction(&restarted(&c), &c.obj) {
            cycles += 1;
            worst = worst.max(r / q);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut q_ok = 0;
    for _ in 0..50 {
        let (p, l, mu) = common::random_params(&mut rng);
        if TheoreticalBounds::compute(&p, l, mu).is_ok_and(|b| b.q > 0.0 && b.q < 1.0) {
            q_ok += 1;
        }
    }
    (
        worst <= 1.0 && cycles > 0 && q_ok == 50,
        format!("max cycle ratio / Q = {worst:.4} over {cycles} cycles; Q in (0, 1) for {q_ok}/50 random sets"),
    )
}

fn c9_numerics() -> Outcome {
    let mut notes = Vec::new();

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let sets: Vec<(SystemParams, f64, f64)> = (0..50).map(|_| common::random_params(&mut rng)).collect();
    let limit = sets
        .iter()
        .flat_map(|(p, l, _)| [1e-12, 1e-14].map(|t| (eval_h(t, p, *l) - 1.0).abs().max((eval_g(t, p, *l) - 1.0).abs())))
        .fold(0.0, f64::max);
    notes.push(format!("|H-1|,|G-1| at 0+ = {limit:.1e}"));

    let residual = sets
        .iter()
        .map(|(p, l, _)| {
            let r = solve_tau(p, *l).unwrap();
            eval_h(r.tau1, p, *l)
                .abs()
                .max((eval_h(r.tau2, p, *l) - 0.5).abs())
                .max(eval_g(r.tau3, p, *l).abs())
        })
        .fold(0.0, f64::max);
    notes.push(format!("root residual = {residual:.1e}"));

    let f = DiagonalQuadratic::scalar(1.0).unwrap();
    let p = SystemParams { alpha: 3.0, beta: 1.0, gamma: 20.0 };
    let exact = common::scalar_restart_time(&p, 1.0);
    let err: Vec<f64> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&h| {
            let opts = IntegratorOptions {
                h_ode: h,
                event_tolerance: 1e-14,
                ..IntegratorOptions::default()
            };
            (integrate_until_restart(&f, &p, &[1.0], &opts).unwrap().restart_time.unwrap() - exact).abs()
        })
        .collect();
    let ratio = (err[0] / err[1]).min(err[1] / err[2]);
    notes.push(format!("step-halving ratio = {ratio:.1} (need >= 8)"));

    let fd = fd_agreement(&common::table_problem()).max(fd_agreement(&logcosh()));
    notes.push(format!("grad/hvp vs FD = {fd:.1e}"));

    (limit <= 1e-8 && residual <= 1e-10 && ratio >= 8.0 && fd <= 1e-6, notes.join(", "))
}

fn logcosh() -> FnObjective {
    FnObjective::new(
        3,
        |x| x.iter().map(|v| v.cosh().ln()).sum(),
        |x, g| {
            for (gi, v) in g.iter_mut().zip(x) {
                *gi = v.tanh();
            }
        },
    )
    .with_hvp(|x, v, out| {
        for i in 0..x.len() {
            out[i] = v[i] / x[i].cosh().powi(2);
        }
    })
}

/// Largest relative disagreement of `grad` and `hvp` with central differences.
fn fd_agreement<O: Objective>(obj: &O) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = obj.dim();
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let x: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut rng, -2.0..2.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut rng, -2.0..2.0)).collect();
        let g = obj.grad(&x);
        for i in 0..n {
            let h = 1e-5;
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[i] += h;
            xm[i] -= h;
            let d = (obj.value(&xp) - obj.value(&xm)) / (2.0 * h);
            worst = worst.max((g[i] - d).abs() / g[i].abs().max(1.0));
        }
        let mut hv = vec![0.0; n];
        obj.hvp(&x, &v, &mut hv);
        for (a, b) in hv.iter().zip(finite_difference_hvp(obj, &x, &v, 1e-5)) {
            worst = worst.max((a - b).abs() / a.abs().max(1.0));
        }
    }
    worst
}

fn csv_files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|x| x == "csv") {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn c10_determinism(a: &Path, b: &Path) -> Outcome {
    let (fa, fb) = (csv_files(a), csv_files(b));
    let differing: Vec<String> = fa
        .keys()
        .chain(fb.keys())
        .filter(|k| fa.get(*k) != fb.get(*k))
        .cloned()
        .collect();
    (
        !fa.is_empty() && differing.is_empty(),
        format!("{} CSV files compared, {} differ{}", fa.len(), differing.len(), first(&differing)),
    )
}

fn first(v: &[String]) -> String {
    v.first().map(|s| format!("; first: {s}")).unwrap_or_default()
}

fn reproduce(out: &Path) -> ReproduceReport {
    cmd_reproduce_paper(&ReproduceOptions {
        out: out.to_path_buf(),
        threads: threads_from_env(),
        format: OutputFormat::Csv,
        ..ReproduceOptions::default()
    })
    .unwrap()
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        (false, format!("panicked: {msg}"))
    })
}

fn main() -> ExitCode {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let report = reproduce(dir_a.path());
    let grid_time = start.elapsed();
    let _second = reproduce(dir_b.path());

    let results: Vec<(&str, Outcome)> = vec![
        ("restart-time oracle", guarded(c1_restart_oracle)),
        ("bound sandwich", guarded(c2_sandwich)),
        ("monotonicity", guarded(c3_monotone)),
        ("theorem envelope", guarded(c4_envelope)),
        ("restart-interval table", guarded(|| c5_table2(&report, grid_time))),
        ("continuous rate table", guarded(|| c6_table1(&report))),
        ("discrete rate table", guarded(|| c7_table3(&report))),
        ("per-cycle contraction", guarded(c8_contraction)),
        ("numerical properties", guarded(c9_numerics)),
        ("determinism", guarded(|| c10_determinism(dir_a.path(), dir_b.path()))),
    ];

    let mut failed = 0;
    for (i, (name, (pass, msg))) in results.iter().enumerate() {
        println!("criterion {:>2} {name}: {} ({msg})", i + 1, if *pass { "PASS" } else { "FAIL" });
        failed += usize::from(!pass);
    }
    println!("acceptance: {}/{} criteria pass", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
