#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use winrestart::dynamics::SystemParams;
use winrestart::objectives::{gamma_for_oscillation, make_power_quadratic, DiagonalQuadratic, PowerQuadraticSpec};

/// First time `d/dt ẋ² = 0` for `ẍ + a ẋ + b x = 0`, `x(0) = 1`, `ẋ(0) = 0`.
///
/// The velocity is proportional to `e^{r₊t} − e^{r₋t}` (real roots),
/// `t e^{−at/2}` (double root) or `e^{−at/2} sin(ωt)` (complex roots), and the
/// restart is the first critical point of `|ẋ|`.
pub fn linear_restart_time(a: f64, b: f64) -> f64 {
    let disc = a * a - 4.0 * b;
    if disc > 0.0 {
        let s = disc.sqrt();
        let rp = (-a + s) / 2.0;
        let rm = (-a - s) / 2.0;
        (rm / rp).ln() / (rp - rm)
    } else if disc == 0.0 {
        2.0 / a
    } else {
        let w = (-disc).sqrt() / 2.0;
        (2.0 * w / a).atan() / w
    }
}

/// Restart time of the WIN system on `f(x) = c x²/2` from rest.
pub fn scalar_restart_time(p: &SystemParams, c: f64) -> f64 {
    linear_restart_time(p.alpha + p.beta * c, p.gamma * c)
}

/// `n` random 1-D configurations, half of them underdamped.
pub fn random_scalar_configs(n: usize, seed: u64) -> Vec<SystemParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let (mut under, mut over) = (0, 0);
    while out.len() < n {
        let alpha = rng.random_range(0.5..5.0);
        let beta = rng.random_range(0.0..5.0);
        let gamma = rng.random_range(0.5..50.0);
        let underdamped = (alpha + beta) * (alpha + beta) < 4.0 * gamma;
        if underdamped && under < n / 2 {
            under += 1;
        } else if !underdamped && over < n - n / 2 {
            over += 1;
        } else {
            continue;
        }
        out.push(SystemParams { alpha, beta, gamma });
    }
    out
}

/// `(params, L, μ)` with `μ ≤ L`.
pub fn random_params(rng: &mut ChaCha8Rng) -> (SystemParams, f64, f64) {
    let p = SystemParams {
        alpha: rng.random_range(0.5..5.0),
        beta: rng.random_range(0.0..5.0),
        gamma: rng.random_range(0.5..50.0),
    };
    let l = rng.random_range(0.5..100.0);
    let mu = l * rng.random_range(0.01..1.0);
    (p, l, mu)
}

pub fn table_problem() -> DiagonalQuadratic {
    make_power_quadratic(PowerQuadraticSpec { n: 3, rho: 10.0 }).unwrap()
}

/// The six continuous table cells `(β, ε, params)` with the third column at ε = 1000.
pub fn table_cells() -> Vec<(f64, f64, SystemParams)> {
    let mut v = Vec::new();
    for eps in [0.1, 10.0, 1000.0] {
        for beta in [0.0, 6.0] {
            let gamma = gamma_for_oscillation(3.0, beta, 10.0, 2, eps).unwrap();
            v.push((beta, eps, SystemParams { alpha: 3.0, beta, gamma }));
        }
    }
    v
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
