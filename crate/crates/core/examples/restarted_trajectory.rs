//! Restarted trajectory on the 3-D power quadratic: restart times, interval
//! statistics, a rate fit and a plot with the theoretical envelope.
//!
//!   cargo run --release --example restarted_trajectory [-- <out dir>]

use std::path::PathBuf;

use winrestart::analysis::{self, Envelope, FitWindow, PlotStyle, Series};
use winrestart::dynamics::{IntegratorOptions, SystemParams};
use winrestart::objectives::{gamma_for_oscillation, make_power_quadratic, Objective, PowerQuadraticSpec};
use winrestart::restart::run_restarted;
use winrestart::theory::TheoreticalBounds;

fn main() -> winrestart::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| PathBuf::from("out/example"), PathBuf::from);
    let f = make_power_quadratic(PowerQuadraticSpec { n: 3, rho: 10.0 })?;
    let gamma = gamma_for_oscillation(3.0, 6.0, 10.0, 2, 0.1)?;
    let p = SystemParams::new(3.0, 6.0, gamma)?;

    let traj = run_restarted(&f, &p, &[1.0; 3], 5.0, &IntegratorOptions::default())?;
    println!("gamma = {gamma}, {} restarts, {:?}", traj.restart_count(), traj.termination);
    for (i, t) in traj.restart_times.iter().take(5).enumerate() {
        println!("  restart {:>2} at t = {t:.6}", i + 1);
    }

    let stats = analysis::interval_stats(&traj.intervals)?;
    println!("intervals: mean {:.4e}, variance {:.4e}", stats.mean, stats.variance);
    let fit = analysis::fit_exponential_in(&traj.gap_curve(), FitWindow::up_to(0.7))?;
    println!("fit on t <= 0.7: A = {:.4}, B = {:.4}, r^2 = {:.5}", fit.a, fit.b, fit.r_squared);

    let b = TheoreticalBounds::compute(&p, f.lipschitz(), f.pl_mu())?;
    let style = PlotStyle {
        title: "restarted trajectory, beta = 6, eps = 0.1".into(),
        markers: traj.restart_gaps(),
        envelope: Some(Envelope { c: b.c, k: b.k, gap0: traj.initial_gap() }),
        ..PlotStyle::default()
    };
    analysis::export_continuous_csv(&traj.samples, &out.join("trajectory.csv"))?;
    analysis::emit_plot(&[Series::new("restarted", traj.gap_curve())], &out.join("trajectory.svg"), &style)?;
    println!("wrote {}", out.display());
    Ok(())
}
