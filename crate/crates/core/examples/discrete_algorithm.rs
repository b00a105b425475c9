//! The inertial gradient algorithm under each restart policy, with the
//! collapse and literal readings of the restart branch side by side.
//!
//!   cargo run --release --example discrete_algorithm

use winrestart::analysis::fit_exponential;
use winrestart::discrete::{run_algorithm, DiscreteConfig, RestartPolicy, RestartSemantics};
use winrestart::dynamics::SystemParams;
use winrestart::objectives::{gamma_for_oscillation, make_power_quadratic, Objective, PowerQuadraticSpec};

fn main() -> winrestart::Result<()> {
    let f = make_power_quadratic(PowerQuadraticSpec { n: 3, rho: 10.0 })?;
    let x0 = [1.0; 3];
    println!("{:>6} {:>11} {:>9} | {:>9} {:>12} {:>11}", "eps", "policy", "reading", "restarts", "final gap", "B");
    for eps in [0.1, 10.0, 1000.0] {
        let p = SystemParams::new(3.0, 6.0, gamma_for_oscillation(3.0, 6.0, 10.0, 2, eps)?)?;
        for policy in RestartPolicy::ALL {
            for semantics in [RestartSemantics::Collapse, RestartSemantics::Literal] {
                if policy == RestartPolicy::None && semantics == RestartSemantics::Literal {
                    continue;
                }
                let cfg = DiscreteConfig {
                    semantics,
                    ..DiscreteConfig::new(p, 1e-3, 3000, policy)
                };
                let recs = run_algorithm(&f, &cfg, &x0)?;
                let curve: Vec<(f64, f64)> = std::iter::once((0.0, f.gap(&x0)))
                    .chain(recs.iter().map(|r| (r.k as f64, r.f_gap)))
                    .collect();
                let b = fit_exponential(&curve)?.b;
                println!(
                    "{eps:>6} {:>11} {:>9} | {:>9} {:>12.3e} {b:>11.4e}",
                    policy.name(),
                    format!("{semantics:?}").to_lowercase(),
                    recs.iter().filter(|r| r.restarted).count(),
                    recs.last().map_or(f64::NAN, |r| r.f_gap),
                );
            }
        }
    }
    Ok(())
}
