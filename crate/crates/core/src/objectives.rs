//! Objective functions: the trait every problem implements, the diagonal
//! power quadratic used throughout the experiments, and a closure-backed
//! objective for user-supplied functions.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg;

/// Default step for the central-difference Hessian-vector product.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// A twice-differentiable convex objective with the metadata the restart
/// analysis needs: the gradient Lipschitz constant `L`, the
/// Polyak-Lojasiewicz constant `mu` and the optimal value `f*`.
///
/// `hvp` defaults to a central difference of the gradient; implementors with
/// an analytic Hessian should override it.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);

    /// Hessian-vector product `∇²f(x) v`.
    fn hvp(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        let r = finite_difference_hvp(self, x, v, DEFAULT_FD_STEP);
        out.copy_from_slice(&r);
    }

    fn lipschitz(&self) -> f64;
    fn pl_mu(&self) -> f64;
    fn f_star(&self) -> f64;

    fn argmin_hint(&self) -> Option<Vec<f64>> {
        None
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.gradient(x, &mut g);
        g
    }

    fn gap(&self, x: &[f64]) -> f64 {
        self.value(x) - self.f_star()
    }
}

/// Central-difference Hessian-vector product,
/// `(∇f(x + h v) − ∇f(x − h v)) / 2h`.
///
/// Exact up to rounding for quadratics.
pub fn finite_difference_hvp<O: Objective + ?Sized>(obj: &O, x: &[f64], v: &[f64], h: f64) -> Vec<f64> {
    let n = obj.dim();
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    linalg::axpy(h, v, &mut xp);
    linalg::axpy(-h, v, &mut xm);
    let mut gp = vec![0.0; n];
    let mut gm = vec![0.0; n];
    obj.gradient(&xp, &mut gp);
    obj.gradient(&xm, &mut gm);
    gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect()
}

/// `f(x) = ½ Σ d_j x_j²` with positive diagonal `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalQuadratic {
    diag: Vec<f64>,
    lipschitz: f64,
    mu: f64,
}

impl DiagonalQuadratic {
    pub fn new(diag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::invalid("diag", "at least one coordinate is required"));
        }
        if diag.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::invalid("diag", "entries must be finite and positive"));
        }
        let lipschitz = diag.iter().cloned().fold(f64::MIN, f64::max);
        let mu = diag.iter().cloned().fold(f64::MAX, f64::min);
        Ok(Self { diag, lipschitz, mu })
    }

    /// The one-dimensional `f(x) = c x² / 2`.
    pub fn scalar(curvature: f64) -> Result<Self> {
        Self::new(vec![curvature])
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }
}

impl Objective for DiagonalQuadratic {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.diag.iter().zip(x).map(|(d, xi)| d * xi * xi).sum::<f64>()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for ((o, d), xi) in out.iter_mut().zip(&self.diag).zip(x) {
            *o = d * xi;
        }
    }

    fn hvp(&self, _x: &[f64], v: &[f64], out: &mut [f64]) {
        for ((o, d), vi) in out.iter_mut().zip(&self.diag).zip(v) {
            *o = d * vi;
        }
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn pl_mu(&self) -> f64 {
        self.mu
    }

    fn f_star(&self) -> f64 {
        0.0
    }

    fn argmin_hint(&self) -> Option<Vec<f64>> {
        Some(vec![0.0; self.dim()])
    }
}

/// Dimension and condition ratio of the power quadratic
/// `f(x) = ½ (x₁² + ρ x₂² + … + ρ^{n−1} x_n²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerQuadraticSpec {
    pub n: usize,
    pub rho: f64,
}

/// Builds the power quadratic. It is 1-strongly convex and `ρ^{n−1}`-smooth,
/// with minimum 0 at the origin.
pub fn make_power_quadratic(spec: PowerQuadraticSpec) -> Result<DiagonalQuadratic> {
    if spec.n == 0 {
        return Err(Error::invalid("n", "dimension must be at least 1"));
    }
    if !(spec.rho > 1.0) || !spec.rho.is_finite() {
        return Err(Error::invalid("rho", format!("must be > 1, got {}", spec.rho)));
    }
    let diag = (0..spec.n).map(|j| spec.rho.powi(j as i32)).collect();
    DiagonalQuadratic::new(diag)
}

/// `γ = (α + ρ^i β)² / (4 ρ^i) + ε`, the choice of γ that makes the `i`-th
/// coordinate of the power quadratic oscillate under the inertial dynamics.
pub fn gamma_for_oscillation(alpha: f64, beta: f64, rho: f64, i: u32, epsilon: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha", "must be > 0"));
    }
    if !(beta >= 0.0) {
        return Err(Error::invalid("beta", "must be >= 0"));
    }
    if !(rho > 1.0) {
        return Err(Error::invalid("rho", "must be > 1"));
    }
    if !(epsilon > 0.0) {
        return Err(Error::invalid("epsilon", format!("must be > 0, got {epsilon}")));
    }
    let r = rho.powi(i as i32);
    Ok((alpha + r * beta).powi(2) / (4.0 * r) + epsilon)
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type HvpFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;

/// Objective assembled from closures. Without an `hvp` closure the
/// Hessian-vector product falls back to central differences.
#[derive(Clone)]
pub struct FnObjective {
    dim: usize,
    value: Arc<ValueFn>,
    grad: Arc<GradFn>,
    hvp: Option<Arc<HvpFn>>,
    fd_step: f64,
    lipschitz: f64,
    mu: f64,
    f_star: f64,
    argmin: Option<Vec<f64>>,
}

impl fmt::Debug for FnObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnObjective")
            .field("dim", &self.dim)
            .field("analytic_hvp", &self.hvp.is_some())
            .field("lipschitz", &self.lipschitz)
            .field("mu", &self.mu)
            .field("f_star", &self.f_star)
            .finish()
    }
}

impl FnObjective {
    pub fn new<V, G>(dim: usize, value: V, grad: G) -> Self
    where
        V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            dim,
            value: Arc::new(value),
            grad: Arc::new(grad),
            hvp: None,
            fd_step: DEFAULT_FD_STEP,
            lipschitz: 1.0,
            mu: 1.0,
            f_star: 0.0,
            argmin: None,
        }
    }

    pub fn with_hvp<H>(mut self, hvp: H) -> Self
    where
        H: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.hvp = Some(Arc::new(hvp));
        self
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    pub fn with_constants(mut self, lipschitz: f64, mu: f64, f_star: f64) -> Self {
        self.lipschitz = lipschitz;
        self.mu = mu;
        self.f_star = f_star;
        self
    }

    pub fn with_argmin(mut self, x: Vec<f64>) -> Self {
        self.argmin = Some(x);
        self
    }
}

impl Objective for FnObjective {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (self.grad)(x, out)
    }

    fn hvp(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        match &self.hvp {
            Some(h) => h(x, v, out),
            None => out.copy_from_slice(&finite_difference_hvp(self, x, v, self.fd_step)),
        }
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn pl_mu(&self) -> f64 {
        self.mu
    }

    fn f_star(&self) -> f64 {
        self.f_star
    }

    fn argmin_hint(&self) -> Option<Vec<f64>> {
        self.argmin.clone()
    }
}


/// Worst-case violations of the standing assumptions observed on random
/// points of the box `[−2, 2]^dim`. Each field is a violation amount; zero or
/// negative means the property held on every sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledCheck {
    /// `max (f* − f(x))`
    pub below_f_star: f64,
    /// `max (2μ(f(x) − f*) − ‖∇f(x)‖²)`
    pub pl_violation: f64,
    /// `max (‖∇f(x) − ∇f(y)‖ − L‖x − y‖)`
    pub lipschitz_violation: f64,
    /// `max |⟨∇²f(x)u, v⟩ − ⟨∇²f(x)v, u⟩|`
    pub hvp_asymmetry: f64,
}

impl SampledCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.below_f_star <= tol
            && self.pl_violation <= tol
            && self.lipschitz_violation <= tol
            && self.hvp_asymmetry <= tol
    }
}

/// Samples the objective's invariants on `samples` seeded random points.
/// The PL constant of a user-supplied function can only be checked this way.
pub fn sample_check<O: Objective + ?Sized>(obj: &O, samples: usize, seed: u64) -> SampledCheck {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = obj.dim();
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-2.0..=2.0)).collect()
    };
    let mut out = SampledCheck {
        below_f_star: f64::NEG_INFINITY,
        pl_violation: f64::NEG_INFINITY,
        lipschitz_violation: f64::NEG_INFINITY,
        hvp_asymmetry: 0.0,
    };
    let mut hu = vec![0.0; n];
    let mut hv = vec![0.0; n];
    for _ in 0..samples {
        let x = draw(&mut rng);
        let y = draw(&mut rng);
        let u = draw(&mut rng);
        let v = draw(&mut rng);
        let fx = obj.value(&x);
        let gx = obj.grad(&x);
        let gy = obj.grad(&y);
        out.below_f_star = out.below_f_star.max(obj.f_star() - fx);
        let pl = 2.0 * obj.pl_mu() * (fx - obj.f_star()) - linalg::dot(&gx, &gx);
        out.pl_violation = out.pl_violation.max(pl);
        let lip = linalg::dist(&gx, &gy) - obj.lipschitz() * linalg::dist(&x, &y);
        out.lipschitz_violation = out.lipschitz_violation.max(lip);
        obj.hvp(&x, &u, &mut hu);
        obj.hvp(&x, &v, &mut hv);
        let asym = (linalg::dot(&hu, &v) - linalg::dot(&hv, &u)).abs();
        out.hvp_asymmetry = out.hvp_asymmetry.max(asym);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pq() -> DiagonalQuadratic {
        make_power_quadratic(PowerQuadraticSpec { n: 3, rho: 10.0 }).unwrap()
    }

    #[test]
    fn power_quadratic_values() {
        let f = pq();
        assert_eq!(f.value(&[1.0, 1.0, 1.0]), 55.5);
        assert_eq!(f.value(&[0.0; 3]), 0.0);
        assert_eq!(f.grad(&[0.0; 3]), vec![0.0; 3]);
        assert_eq!(f.lipschitz(), 100.0);
        assert_eq!(f.pl_mu(), 1.0);
        assert_eq!(f.f_star(), 0.0);
        assert_eq!(f.argmin_hint(), Some(vec![0.0; 3]));
    }

    #[test]
    fn power_quadratic_rejects_bad_specs() {
        assert!(make_power_quadratic(PowerQuadraticSpec { n: 0, rho: 10.0 }).is_err());
        assert!(make_power_quadratic(PowerQuadraticSpec { n: 3, rho: 1.0 }).is_err());
        assert!(make_power_quadratic(PowerQuadraticSpec { n: 3, rho: 0.5 }).is_err());
        assert!(make_power_quadratic(PowerQuadraticSpec { n: 3, rho: f64::NAN }).is_err());
    }

    #[test]
    fn gamma_rule() {
        let g = gamma_for_oscillation(3.0, 6.0, 10.0, 2, 0.1).unwrap();
        assert!((g - 909.1225).abs() < 1e-10);
        assert!((gamma_for_oscillation(3.0, 0.0, 10.0, 0, 1.0).unwrap() - 3.25).abs() < 1e-14);
        assert!((gamma_for_oscillation(3.0, 6.0, 10.0, 1, 0.1).unwrap() - 99.325).abs() < 1e-12);
    }

    #[test]
    fn gamma_rule_requires_positive_margin() {
        let err = gamma_for_oscillation(3.0, 6.0, 10.0, 2, 0.0).unwrap_err();
        assert!(err.to_string().contains("epsilon"));
        assert!(gamma_for_oscillation(3.0, 6.0, 10.0, 2, -1.0).is_err());
        assert!(gamma_for_oscillation(0.0, 6.0, 10.0, 2, 1.0).is_err());
    }

    #[test]
    fn fd_hvp_on_quadratic_is_exact() {
        let f = pq();
        let hv = finite_difference_hvp(&f, &[0.3, -1.2, 0.7], &[0.0, 1.0, 0.0], 1e-3);
        for (a, b) in hv.iter().zip([0.0, 10.0, 0.0]) {
            assert!((a - b).abs() < 1e-8, "{hv:?}");
        }
        let zero = finite_difference_hvp(&f, &[0.3, -1.2, 0.7], &[0.0; 3], 1e-3);
        assert_eq!(zero, vec![0.0; 3]);
    }

    #[test]
    fn fd_hvp_quartic() {
        // f = x⁴/4, f'' = 3x²
        let f = FnObjective::new(1, |x| x[0].powi(4) / 4.0, |x, g| g[0] = x[0].powi(3));
        let hv = finite_difference_hvp(&f, &[1.0], &[1.0], 1e-4);
        assert!((hv[0] - 3.0).abs() < 1e-6);
        // trait default goes through the same path
        let mut out = [0.0];
        f.hvp(&[1.0], &[1.0], &mut out);
        assert!((out[0] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn diagonal_quadratic_constants() {
        let q = DiagonalQuadratic::new(vec![4.0, 0.5, 2.0]).unwrap();
        assert_eq!(q.lipschitz(), 4.0);
        assert_eq!(q.pl_mu(), 0.5);
        assert!(DiagonalQuadratic::new(vec![]).is_err());
        assert!(DiagonalQuadratic::new(vec![1.0, 0.0]).is_err());
    }
}
