//! Detected speed-restart times on `f(x) = c x²/2` against the closed form of
//! the linear ODE `ẍ + (α + βc)ẋ + γc x = 0`.
//!
//!   cargo run --release --example restart_time_oracle

use winrestart::dynamics::{integrate_until_restart, IntegratorOptions, SystemParams};
use winrestart::objectives::DiagonalQuadratic;

fn closed_form(a: f64, b: f64) -> f64 {
    let disc = a * a - 4.0 * b;
    if disc > 0.0 {
        let s = disc.sqrt();
        let (rp, rm) = ((-a + s) / 2.0, (-a - s) / 2.0);
        (rm / rp).ln() / (rp - rm)
    } else if disc == 0.0 {
        2.0 / a
    } else {
        let w = (-disc).sqrt() / 2.0;
        (2.0 * w / a).atan() / w
    }
}

fn main() -> winrestart::Result<()> {
    let opts = IntegratorOptions::default();
    println!("{:>5} {:>5} {:>6} {:>5} | {:>14} {:>14} {:>10}", "alpha", "beta", "gamma", "c", "detected", "exact", "error");
    for (alpha, beta, gamma, c) in [
        (3.0, 1.0, 1.0, 1.0),
        (3.0, 1.0, 4.0, 1.0),
        (3.0, 1.0, 20.0, 1.0),
        (1.0, 0.0, 10.0, 2.5),
        (0.5, 2.0, 30.0, 0.2),
    ] {
        let p = SystemParams::new(alpha, beta, gamma)?;
        let f = DiagonalQuadratic::scalar(c)?;
        let t = integrate_until_restart(&f, &p, &[1.0], &opts)?
            .restart_time
            .expect("restart within the default time cap");
        let exact = closed_form(alpha + beta * c, gamma * c);
        println!(
            "{alpha:>5} {beta:>5} {gamma:>6} {c:>5} | {t:>14.10} {exact:>14.10} {:>10.2e}",
            (t - exact).abs()
        );
    }
    Ok(())
}
