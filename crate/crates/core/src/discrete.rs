//! The inertial gradient algorithm with Hessian-driven damping, where the
//! Hessian term is replaced by a difference of consecutive gradients:
//!
//! ```text
//! y_k     = x_k + (1 − αh)(x_k − x_{k−1}) − βh(∇f(x_k) − ∇f(x_{k−1}))
//! x_{k+1} = y_k − γh² ∇f(y_k)
//! ```
//!
//! Speed restart is the discrete counterpart of the continuous rule: when the
//! step length `‖x_{k+1} − x_k‖` falls below the previous one, momentum is
//! dropped and the step is recomputed.

use serde::{Deserialize, Serialize};

use crate::dynamics::SystemParams;
use crate::error::{Error, Result};
use crate::linalg;
use crate::objectives::Objective;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RestartPolicy {
    None,
    Speed,
    /// One function-value cycle first, then speed restarts.
    WarmStart,
}

impl RestartPolicy {
    pub const ALL: [RestartPolicy; 3] = [RestartPolicy::None, RestartPolicy::Speed, RestartPolicy::WarmStart];

    pub fn name(&self) -> &'static str {
        match self {
            RestartPolicy::None => "none",
            RestartPolicy::Speed => "speed",
            RestartPolicy::WarmStart => "warm-start",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Some(RestartPolicy::None),
            "speed" => Some(RestartPolicy::Speed),
            "warm-start" | "warmstart" | "warm_start" => Some(RestartPolicy::WarmStart),
            _ => None,
        }
    }
}

/// How a triggered restart rewrites the iterates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RestartSemantics {
    /// Discard `x_{k+1}`, set `x_{k−1} := x_k` and recompute from the same `x_k`.
    Collapse,
    /// The pseudocode read word for word: `x_k := x_{k−1}`, then recompute.
    /// This moves the current iterate back one step.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteConfig {
    pub params: SystemParams,
    pub h: f64,
    pub max_iters: usize,
    pub policy: RestartPolicy,
    pub stop_grad_tol: f64,
    pub semantics: RestartSemantics,
}

impl DiscreteConfig {
    pub fn new(params: SystemParams, h: f64, max_iters: usize, policy: RestartPolicy) -> Self {
        Self {
            params,
            h,
            max_iters,
            policy,
            stop_grad_tol: 1e-13,
            semantics: RestartSemantics::Collapse,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::invalid("h", format!("must be > 0, got {}", self.h)));
        }
        if !(self.stop_grad_tol >= 0.0) {
            return Err(Error::invalid("stop_grad_tol", "must be >= 0"));
        }
        Ok(())
    }

    /// Step-size sanity checks; an empty list means none fired.
    pub fn warnings(&self, lipschitz: f64) -> Vec<String> {
        let mut w = Vec::new();
        let m = 1.0 - self.params.alpha * self.h;
        if !(m > 0.0 && m < 1.0) {
            w.push(format!("momentum factor 1 - alpha*h = {m} is outside (0, 1)"));
        }
        // the gradient step of the second update is γh²
        let s = self.h * self.h * self.params.gamma * lipschitz;
        if s > 4.0 {
            w.push(format!("gamma*h^2*L = {s} exceeds 4; iterates may diverge"));
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub k: usize,
    pub x: Vec<f64>,
    pub f_gap: f64,
    /// `‖x_k − x_{k−1}‖`
    pub step_norm: f64,
    /// Momentum was dropped while computing this iterate.
    pub restarted: bool,
}

/// One step of the algorithm from `(x_{k−1}, x_k)`; returns `(y_k, x_{k+1})`.
pub fn algorithm_step<O: Objective + ?Sized>(
    obj: &O,
    cfg: &DiscreteConfig,
    x_prev: &[f64],
    x_curr: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let g_curr = obj.grad(x_curr);
    let g_prev = obj.grad(x_prev);
    step_with_grads(obj, cfg, x_prev, x_curr, &g_prev, &g_curr)
}

fn step_with_grads<O: Objective + ?Sized>(
    obj: &O,
    cfg: &DiscreteConfig,
    x_prev: &[f64],
    x_curr: &[f64],
    g_prev: &[f64],
    g_curr: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let p = &cfg.params;
    let h = cfg.h;
    let momentum = 1.0 - p.alpha * h;
    let y: Vec<f64> = (0..x_curr.len())
        .map(|i| x_curr[i] + momentum * (x_curr[i] - x_prev[i]) - p.beta * h * (g_curr[i] - g_prev[i]))
        .collect();
    let gy = obj.grad(&y);
    let mut x_next = y.clone();
    linalg::axpy(-p.gamma * h * h, &gy, &mut x_next);
    (y, x_next)
}

/// Runs the algorithm from `x₀ = x₁` and returns the iterates `x_1, …, x_N`
/// (fewer if the gradient tolerance is met first).
///
/// The restart test is skipped on the iteration right after a restart.
pub fn run_algorithm<O: Objective + ?Sized>(obj: &O, cfg: &DiscreteConfig, x0: &[f64]) -> Result<Vec<IterateRecord>> {
    cfg.validate()?;
    if x0.len() != obj.dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.dim(),
            got: x0.len(),
        });
    }
    let mut out = Vec::with_capacity(cfg.max_iters);
    if cfg.max_iters == 0 {
        return Ok(out);
    }

    let mut x_prev = x0.to_vec();
    let mut x_curr = x0.to_vec();
    let mut g_prev = obj.grad(&x_prev);
    let mut g_curr = g_prev.clone();
    let mut warm_phase = cfg.policy == RestartPolicy::WarmStart;
    let mut refractory = false;

    for k in 1..=cfg.max_iters {
        let (_, mut x_next) = step_with_grads(obj, cfg, &x_prev, &x_curr, &g_prev, &g_curr);
        let mut restarted = false;

        let trigger = !refractory
            && match cfg.policy {
                RestartPolicy::None => false,
                RestartPolicy::WarmStart if warm_phase => obj.value(&x_next) > obj.value(&x_curr),
                RestartPolicy::Speed | RestartPolicy::WarmStart => {
                    linalg::dist(&x_next, &x_curr) < linalg::dist(&x_curr, &x_prev)
                }
            };

        if trigger {
            restarted = true;
            warm_phase = false;
            match cfg.semantics {
                RestartSemantics::Collapse => {
                    x_prev.clone_from(&x_curr);
                    g_prev.clone_from(&g_curr);
                }
                RestartSemantics::Literal => {
                    x_curr.clone_from(&x_prev);
                    g_curr.clone_from(&g_prev);
                }
            }
            x_next = step_with_grads(obj, cfg, &x_prev, &x_curr, &g_prev, &g_curr).1;
        }
        refractory = restarted;

        if !linalg::all_finite(&x_next) {
            return Err(Error::NonFiniteIterate { k });
        }
        let step_norm = linalg::dist(&x_next, &x_curr);
        let g_next = obj.grad(&x_next);
        let gnorm = linalg::norm(&g_next);
        out.push(IterateRecord {
            k,
            x: x_next.clone(),
            f_gap: obj.gap(&x_next),
            step_norm,
            restarted,
        });
        x_prev = std::mem::replace(&mut x_curr, x_next);
        g_prev = std::mem::replace(&mut g_curr, g_next);
        if gnorm <= cfg.stop_grad_tol {
            break;
        }
    }
    Ok(out)
}
