//! Runs the full experiment grid and prints the pass/fail report.
//!
//!     cargo run --release --example reproduce_tables -- [out_dir]

use std::path::PathBuf;
use std::time::Instant;

use winrestart::experiments::{cmd_reproduce_paper, ReproduceOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "out/reproduce".into());
    let opts = ReproduceOptions {
        out: out.clone(),
        ..ReproduceOptions::default()
    };
    let start = Instant::now();
    let report = cmd_reproduce_paper(&opts)?;

    println!("beta    eps      B          mean T      var T      restarts");
    for c in &report.continuous {
        let b = c.fit.map_or(f64::NAN, |f| f.b);
        let (m, v) = c.intervals.map_or((f64::NAN, f64::NAN), |s| (s.mean, s.variance));
        println!("{:<7} {:<8} {:<10.4} {:<11.4e} {:<10.3e} {}", c.beta, c.epsilon, b, m, v, c.restarts);
    }
    println!();
    for d in &report.discrete {
        for p in &d.policies {
            let (a, b) = p.fit.map_or((f64::NAN, f64::NAN), |f| (f.a, f.b));
            println!(
                "eps = {:<6} {:<11} A = {:<10.4e} B = {:<10.4e} restarts = {}",
                d.epsilon, p.policy, a, b, p.restarts
            );
        }
    }
    println!();
    print!("{}", report.to_text());
    println!("artifacts in {} ({:.2?})", out.display(), start.elapsed());
    Ok(())
}
