//! Closed-form restart-time bounds and linear-rate constants.
//!
//! For coefficients `(α, β, γ)` and gradient Lipschitz constant `L`:
//!
//! * `H(t) = 1 + 2Lγ/α² − Lβ/α − L t (γ/α e^{αt} + γ/α − β) / (e^{αt} − 1)`
//!   decreases from 1; `τ₁` and `τ₂` solve `H = 0` and `H = ½`.
//! * `G(t) = 1 − L t e^{αt}(γ/α e^{αt} + γ/α − β)/(e^{αt} − 1)
//!   + 3Lγ/α² e^{αt} − 2Lβ/α e^{αt} − Lγ/α² + Lβ/α − Lγ/α t e^{αt}`
//!   decreases from 1; its zero `τ₃ < τ₁` is a lower bound on every restart time.
//! * `Ψ(τ) = (2 − 1/H(τ))²` on `(0, τ₂)`.
//! * With a PL constant `μ`, `T(z) ≤ τ + α / (2μγ(1 − e^{−ατ})² Ψ(τ))` and the
//!   gap contracts per cycle by
//!   `Q = 1 − (2μγ/α) Ψ(τ) (τ + 2/α e^{−ατ} − 1/(2α) e^{−2ατ} − 3/(2α))`.
//!
//! The feasible set for `τ` in the last two bounds is capped at `τ₃`, which
//! holds for every starting point, so all constants are independent of `z`.

use serde::Serialize;

use crate::dynamics::SystemParams;
use crate::error::{Error, Result};

/// Below this value of `αt`, H and G use their Taylor series.
pub const SERIES_CUTOFF: f64 = 0.1;

const BRACKET_START: f64 = 1e-8;
const BRACKET_END: f64 = 1e3;
const ROOT_REL_TOL: f64 = 1e-12;
const MAX_BISECTIONS: usize = 200;
const MINIMIZE_TOL: f64 = 1e-10;
const SCAN_POINTS: usize = 400;

fn check_l(l: f64) -> Result<()> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::invalid("lipschitz", format!("must be > 0, got {l}")));
    }
    Ok(())
}

// Taylor coefficients of the four shape functions below, from x⁰ to x¹².
const SER_A: [f64; 13] = [
    0.0, 0.0, -1.0 / 6.0, 0.0, 1.0 / 360.0, 0.0, -1.0 / 15120.0, 0.0, 1.0 / 604800.0, 0.0,
    -1.0 / 23950080.0, 0.0, 691.0 / 653837184000.0,
];
const SER_B: [f64; 13] = [
    0.0, 0.5, -1.0 / 12.0, 0.0, 1.0 / 720.0, 0.0, -1.0 / 30240.0, 0.0, 1.0 / 1209600.0, 0.0,
    -1.0 / 47900160.0, 0.0, 691.0 / 1307674368000.0,
];
const SER_CG: [f64; 13] = [
    0.0, 0.0, -2.0 / 3.0, -0.5, -37.0 / 180.0, -7.0 / 120.0, -19.0 / 1512.0, -11.0 / 5040.0,
    -97.0 / 302400.0, -1.0 / 24192.0, -283.0 / 59875200.0, -19.0 / 39916800.0, -13987.0 / 326918592000.0,
];
const SER_CB: [f64; 13] = [
    0.0, -1.5, -11.0 / 12.0, -1.0 / 3.0, -61.0 / 720.0, -1.0 / 60.0, -83.0 / 30240.0, -1.0 / 2520.0,
    -61.0 / 1209600.0, -1.0 / 181440.0, -127.0 / 239500800.0, -1.0 / 19958400.0, -6151.0 / 1307674368000.0,
];

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

// With x = αt, H = 1 + (Lγ/α²) A(x) − (Lβ/α) B(x) and
// G = 1 + (Lγ/α²) C_γ(x) + (Lβ/α) C_β(x). Each shape function vanishes at 0,
// so evaluating them separately keeps full relative accuracy when Lγ/α² is
// large and H or G is close to 1.

/// `2 − x coth(x/2)`
fn shape_a(x: f64) -> f64 {
    if x < SERIES_CUTOFF {
        return horner(&SER_A, x);
    }
    2.0 - x / (0.5 * x).tanh()
}

/// `1 − x / (e^x − 1)`
fn shape_b(x: f64) -> f64 {
    if x < SERIES_CUTOFF {
        return horner(&SER_B, x);
    }
    1.0 - x / x.exp_m1()
}

/// `e^x (3 − x − x coth(x/2)) − 1`
fn shape_cg(x: f64) -> f64 {
    if x < SERIES_CUTOFF {
        return horner(&SER_CG, x);
    }
    x.exp() * (3.0 - x - x / (0.5 * x).tanh()) - 1.0
}

/// `x / (1 − e^{−x}) − 2e^x + 1`
fn shape_cb(x: f64) -> f64 {
    if x < SERIES_CUTOFF {
        return horner(&SER_CB, x);
    }
    x / -(-x).exp_m1() - 2.0 * x.exp() + 1.0
}

pub fn eval_h(t: f64, p: &SystemParams, l: f64) -> f64 {
    let (a, b, g) = (p.alpha, p.beta, p.gamma);
    let x = a * t;
    1.0 + l * g / (a * a) * shape_a(x) - l * b / a * shape_b(x)
}

pub fn eval_g(t: f64, p: &SystemParams, l: f64) -> f64 {
    let (a, b, g) = (p.alpha, p.beta, p.gamma);
    let x = a * t;
    let gamma_part = l * g / (a * a) * shape_cg(x);
    // β = 0 must not turn an overflowed shape into NaN
    let beta_part = if b == 0.0 { 0.0 } else { l * b / a * shape_cb(x) };
    1.0 + gamma_part + beta_part
}

/// `Ψ(τ) = (2 − 1/H(τ))²`; defined only while `H(τ) > ½`, i.e. `τ < τ₂`.
pub fn eval_psi(tau: f64, p: &SystemParams, l: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("Psi needs tau > 0, got {tau}")));
    }
    let h = eval_h(tau, p, l);
    if !(h > 0.5) {
        return Err(Error::Domain(format!(
            "Psi needs tau < tau2 (H(tau) > 1/2); H({tau}) = {h}"
        )));
    }
    Ok(psi_unchecked(h))
}

fn psi_unchecked(h: f64) -> f64 {
    let s = 2.0 - 1.0 / h;
    s * s
}

/// `∫₀^τ (1 − e^{−αs})² ds = τ + 2/α e^{−ατ} − 1/(2α) e^{−2ατ} − 3/(2α)`.
pub fn decrease_integral(tau: f64, alpha: f64) -> f64 {
    let x = alpha * tau;
    if x < 1e-3 {
        // α²τ³/3 − α³τ⁴/4 + 7α⁴τ⁵/60 − α⁵τ⁶/24 + 31α⁶τ⁷/2520
        let poly = 1.0 / 3.0 + x * (-0.25 + x * (7.0 / 60.0 + x * (-1.0 / 24.0 + x * 31.0 / 2520.0)));
        return x * x * tau * poly;
    }
    let u = -(-x).exp_m1();
    tau - (u + 0.5 * u * u) / alpha
}

/// Roots of the bound functions together with the bisection counts used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauRoots {
    /// `H(τ₁) = 0`
    pub tau1: f64,
    /// `H(τ₂) = ½`
    pub tau2: f64,
    /// `G(τ₃) = 0`
    pub tau3: f64,
    pub iterations: [usize; 3],
}

/// Finds the crossing of a decreasing function through `level`: geometric
/// expansion from `1e-8` to bracket it, then bisection to relative `1e-12`.
pub fn bisect_decreasing<F: Fn(f64) -> f64>(
    f: F,
    level: f64,
    name: &'static str,
) -> Result<(f64, usize)> {
    let mut lo = 0.0;
    let mut hi = BRACKET_START;
    while f(hi) > level {
        lo = hi;
        hi *= 2.0;
        if hi > BRACKET_END {
            return Err(Error::BracketFailure {
                function: name,
                lo: BRACKET_START,
                hi: BRACKET_END,
            });
        }
    }
    let mut iters = 0;
    while iters < MAX_BISECTIONS && hi - lo > ROOT_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
        iters += 1;
    }
    // pick the bracket end with the smaller residual
    let root = if (f(lo) - level).abs() < (f(hi) - level).abs() { lo } else { hi };
    Ok((root, iters))
}

pub fn solve_tau(p: &SystemParams, l: f64) -> Result<TauRoots> {
    p.validate()?;
    check_l(l)?;
    let (tau1, i1) = bisect_decreasing(|t| eval_h(t, p, l), 0.0, "H")?;
    let (tau2, i2) = bisect_decreasing(|t| eval_h(t, p, l), 0.5, "H - 1/2")?;
    let (tau3, i3) = bisect_decreasing(|t| eval_g(t, p, l), 0.0, "G")?;
    Ok(TauRoots {
        tau1,
        tau2,
        tau3,
        iterations: [i1, i2, i3],
    })
}

/// Minimizes `f` on `[lo, hi]`: a uniform scan picks the best cell, then
/// golden-section search refines inside the neighbouring cells.
pub fn minimize_scalar<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let eval = |x: f64| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let n = SCAN_POINTS;
    let step = (hi - lo) / n as f64;
    let mut best = (hi, eval(hi));
    let mut best_i = n;
    for i in 0..n {
        let x = lo + step * i as f64;
        let v = eval(x);
        if v < best.1 {
            best = (x, v);
            best_i = i;
        }
    }
    let mut a = lo + step * best_i.saturating_sub(1) as f64;
    let mut b = (lo + step * (best_i + 1) as f64).min(hi);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = eval(c);
    let mut fd = eval(d);
    for _ in 0..300 {
        if b - a <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d);
        }
    }
    for x in [a, b, 0.5 * (a + b)] {
        let v = eval(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    best
}

/// `τ + α / (2μγ(1 − e^{−ατ})² Ψ(τ))`, infinite where `Ψ` is not positive.
pub fn upper_bound_objective(tau: f64, p: &SystemParams, l: f64, mu: f64) -> f64 {
    let h = eval_h(tau, p, l);
    if !(h > 0.5) || !(tau > 0.0) {
        return f64::INFINITY;
    }
    let em = -(-p.alpha * tau).exp_m1();
    let denom = 2.0 * mu * p.gamma * em * em * psi_unchecked(h);
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    tau + p.alpha / denom
}

/// `(2μγ/α) Ψ(τ) ∫₀^τ (1 − e^{−αs})² ds`, so that the contraction at `τ` is
/// `q(τ) = 1 − decrease`.
pub fn decrease_at(tau: f64, p: &SystemParams, l: f64, mu: f64) -> f64 {
    let h = eval_h(tau, p, l);
    if !(h > 0.5) || !(tau > 0.0) {
        return 0.0;
    }
    2.0 * mu * p.gamma / p.alpha * psi_unchecked(h) * decrease_integral(tau, p.alpha)
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::invalid("mu", format!("must be > 0, got {mu}")));
    }
    Ok(())
}

/// Minimizes the restart-time upper bound over `(0, min(τ₂, cap)]` where the
/// cap is `t_hint` if given, else `τ₃`. Returns `(τ*, τ_upper)`.
pub fn tau_upper_bound(p: &SystemParams, l: f64, mu: f64, t_hint: Option<f64>) -> Result<(f64, f64)> {
    check_mu(mu)?;
    let roots = solve_tau(p, l)?;
    upper_from_roots(p, l, mu, &roots, t_hint)
}

fn upper_from_roots(
    p: &SystemParams,
    l: f64,
    mu: f64,
    roots: &TauRoots,
    t_hint: Option<f64>,
) -> Result<(f64, f64)> {
    let cap = roots.tau2.min(t_hint.unwrap_or(roots.tau3));
    if !(cap > 0.0) {
        return Err(Error::Domain(format!("empty search interval (0, {cap}]")));
    }
    let (tau_star, value) = minimize_scalar(|t| upper_bound_objective(t, p, l, mu), 0.0, cap, MINIMIZE_TOL);
    if !value.is_finite() {
        return Err(Error::Domain("upper bound is infinite on the whole search interval".into()));
    }
    Ok((tau_star, value))
}

/// Best per-cycle contraction factor over `τ ∈ (0, min(τ₂, τ₃)]`, together
/// with the `τ` attaining it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Contraction {
    pub q: f64,
    /// `1 − Q`, kept separately because `Q` is often within 1e-6 of one.
    pub decrease: f64,
    pub tau: f64,
}

pub fn contraction(p: &SystemParams, l: f64, mu: f64) -> Result<Contraction> {
    check_mu(mu)?;
    let roots = solve_tau(p, l)?;
    contraction_from_roots(p, l, mu, &roots)
}

fn contraction_from_roots(p: &SystemParams, l: f64, mu: f64, roots: &TauRoots) -> Result<Contraction> {
    let cap = roots.tau2.min(roots.tau3);
    let (tau, neg) = minimize_scalar(|t| -decrease_at(t, p, l, mu), 0.0, cap, MINIMIZE_TOL);
    let decrease = -neg;
    let q = 1.0 - decrease;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidContraction { q });
    }
    Ok(Contraction { q, decrease, tau })
}

pub fn q_factor(p: &SystemParams, l: f64, mu: f64) -> Result<f64> {
    contraction(p, l, mu).map(|c| c.q)
}

/// `C = 1/Q` and `K = −ln(Q)/τ_upper` from a contraction and an upper bound
/// on the restart time.
pub fn constants_from(q: f64, tau_upper: f64) -> (f64, f64) {
    (1.0 / q, -q.ln() / tau_upper)
}

pub fn convergence_constants(p: &SystemParams, l: f64, mu: f64) -> Result<(f64, f64)> {
    let b = TheoreticalBounds::compute(p, l, mu)?;
    Ok((b.c, b.k))
}

/// Everything the bounds give for one parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoreticalBounds {
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    pub tau_star: f64,
    pub tau_upper: f64,
    pub q: f64,
    /// `τ` at which the contraction `q` is attained.
    pub q_tau: f64,
    pub c: f64,
    pub k: f64,
}

impl TheoreticalBounds {
    pub fn compute(p: &SystemParams, l: f64, mu: f64) -> Result<Self> {
        check_mu(mu)?;
        let roots = solve_tau(p, l)?;
        let (tau_star, tau_upper) = upper_from_roots(p, l, mu, &roots, None)?;
        let con = contraction_from_roots(p, l, mu, &roots)?;
        let c = 1.0 / con.q;
        let k = -(-con.decrease).ln_1p() / tau_upper;
        Ok(Self {
            tau1: roots.tau1,
            tau2: roots.tau2,
            tau3: roots.tau3,
            tau_star,
            tau_upper,
            q: con.q,
            q_tau: con.tau,
            c,
            k,
        })
    }

    /// `C e^{−Kt}`, the guaranteed bound on `gap(t) / gap(0)`.
    pub fn envelope(&self, t: f64) -> f64 {
        self.c * (-self.k * t).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(a: f64, b: f64, g: f64) -> SystemParams {
        SystemParams::new(a, b, g).unwrap()
    }

    #[test]
    fn limits_at_zero() {
        let q = p(3.0, 6.0, 909.1225);
        for t in [1e-12, 1e-10, 1e-9] {
            assert!((eval_h(t, &q, 100.0) - 1.0).abs() < 1e-5);
            assert!((eval_g(t, &q, 100.0) - 1.0).abs() < 1e-5);
        }
        let q = p(3.0, 1.0, 20.0);
        assert!((eval_h(1e-12, &q, 1.0) - 1.0).abs() < 1e-8);
        assert!((eval_g(1e-12, &q, 1.0) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn series_matches_closed_form_at_cutoff() {
        let x = SERIES_CUTOFF;
        let closed = [
            2.0 - x / (x / 2.0).tanh(),
            1.0 - x / x.exp_m1(),
            x.exp() * (3.0 - x - x / (x / 2.0).tanh()) - 1.0,
            x / -(-x).exp_m1() - 2.0 * x.exp() + 1.0,
        ];
        let series = [
            horner(&SER_A, x),
            horner(&SER_B, x),
            horner(&SER_CG, x),
            horner(&SER_CB, x),
        ];
        for (c, s) in closed.iter().zip(series) {
            assert!((c - s).abs() < 1e-12 * c.abs().max(1e-3), "{c} vs {s}");
        }
    }

    #[test]
    fn psi_domain() {
        let q = p(3.0, 1.0, 20.0);
        let r = solve_tau(&q, 1.0).unwrap();
        assert!((eval_psi(1e-12, &q, 1.0).unwrap() - 1.0).abs() < 1e-10);
        let near = eval_psi(r.tau2 - 1e-9, &q, 1.0).unwrap();
        assert!(near < 1e-6, "{near}");
        assert!(matches!(eval_psi(r.tau2 * 1.001, &q, 1.0), Err(Error::Domain(_))));
        assert!(eval_psi(0.0, &q, 1.0).is_err());
    }

    #[test]
    fn root_ordering_and_residuals() {
        let q = p(3.0, 1.0, 20.0);
        let r = solve_tau(&q, 1.0).unwrap();
        assert!(r.tau3 < r.tau1 && r.tau2 < r.tau1);
        assert!(eval_h(r.tau1, &q, 1.0).abs() <= 1e-10);
        assert!((eval_h(r.tau2, &q, 1.0) - 0.5).abs() <= 1e-10);
        assert!(eval_g(r.tau3, &q, 1.0).abs() <= 1e-10);
        assert!(r.iterations.iter().all(|&i| i <= 200));
    }

    #[test]
    fn decrease_integral_branches_agree() {
        let a = 3.0;
        let x = 1e-3 / a;
        let lo = decrease_integral(x * (1.0 - 1e-9), a);
        let hi = decrease_integral(x * (1.0 + 1e-9), a);
        assert!(((lo - hi) / hi).abs() < 1e-7, "{lo} {hi}");
        // large tau: τ − 3/(2α) asymptote
        let big = decrease_integral(50.0, a);
        assert!((big - (50.0 - 1.5 / a)).abs() < 1e-12);
    }

    #[test]
    fn constants_formula() {
        let (c, k) = constants_from(0.5, 1.0);
        assert!((c - 2.0).abs() < 1e-15);
        assert!((k - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn bounds_scalar_case() {
        let q = p(3.0, 1.0, 20.0);
        let b = TheoreticalBounds::compute(&q, 1.0, 1.0).unwrap();
        assert!(b.tau3 <= b.tau_upper);
        assert!(b.q > 0.0 && b.q < 1.0);
        assert!(b.c > 1.0 && b.k > 0.0);
        assert!((b.c * b.q - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_upper_interval() {
        let q = p(3.0, 1.0, 20.0);
        assert!(matches!(tau_upper_bound(&q, 1.0, 1.0, Some(0.0)), Err(Error::Domain(_))));
        assert!(tau_upper_bound(&q, 1.0, 0.0, None).is_err());
    }
}
