//! Restart-time bounds and linear-rate constants for a few parameter sets.
//!
//! Run with:
//!   cargo run --example theory_bounds

use winrestart::dynamics::SystemParams;
use winrestart::objectives::gamma_for_oscillation;
use winrestart::theory::TheoreticalBounds;

fn main() -> winrestart::Result<()> {
    let mut cases = vec![("scalar, underdamped", SystemParams::new(3.0, 1.0, 20.0)?, 1.0, 1.0)];
    for beta in [0.0, 6.0] {
        for eps in [0.1, 10.0, 1000.0] {
            let gamma = gamma_for_oscillation(3.0, beta, 10.0, 2, eps)?;
            cases.push(("power quadratic n=3 rho=10", SystemParams::new(3.0, beta, gamma)?, 100.0, 1.0));
        }
    }

    println!(
        "{:<28} {:>5} {:>10} | {:>12} {:>12} {:>12} {:>12} {:>14} {:>14}",
        "problem", "beta", "gamma", "tau1", "tau2", "tau3", "tau_upper", "1-Q", "K"
    );
    for (name, p, l, mu) in cases {
        let b = TheoreticalBounds::compute(&p, l, mu)?;
        println!(
            "{:<28} {:>5} {:>10.4} | {:>12.6e} {:>12.6e} {:>12.6e} {:>12.6e} {:>14.6e} {:>14.6e}",
            name,
            p.beta,
            p.gamma,
            b.tau1,
            b.tau2,
            b.tau3,
            b.tau_upper,
            1.0 - b.q,
            b.k
        );
    }
    Ok(())
}
