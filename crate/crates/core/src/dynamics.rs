//! The inertial system with Hessian-driven damping,
//!
//! ```text
//! ẍ + α ẋ + β ∇²f(x) ẋ + γ ∇f(x) = 0,
//! ```
//!
//! written as the first-order system `(ẋ, v̇) = (v, −αv − β∇²f(x)v − γ∇f(x))`
//! and integrated with the classical fourth-order Runge-Kutta method on a
//! fixed grid. The speed restart event, the first `t > 0` at which
//! `d/dt ‖ẋ‖² ≤ 0`, is bracketed on the grid and localized by bisection,
//! re-integrating a single partial step from the last grid point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::objectives::Objective;

/// Speeds at or below this value count as zero when arming the restart event.
pub const SPEED_FLOOR: f64 = 1e-30;

const MAX_BISECTIONS: usize = 200;

/// Coefficients `(α, β, γ)` with `α > 0`, `β ≥ 0`, `γ > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl SystemParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let p = Self { alpha, beta, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("alpha", format!("must be > 0, got {}", self.alpha)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid("beta", format!("must be >= 0, got {}", self.beta)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid("gamma", format!("must be > 0, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Position and velocity at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl PhaseState {
    /// State at rest at `z`.
    pub fn at_rest(t: f64, z: &[f64]) -> Self {
        Self {
            t,
            x: z.to_vec(),
            v: vec![0.0; z.len()],
        }
    }

    pub fn speed(&self) -> f64 {
        linalg::norm(&self.v)
    }

    fn is_finite(&self) -> bool {
        linalg::all_finite(&self.x) && linalg::all_finite(&self.v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    /// Base Runge-Kutta step.
    pub h_ode: f64,
    /// Width of the final bisection bracket around the restart time.
    pub event_tolerance: f64,
    pub max_time: f64,
    /// Integration stops once `‖∇f(x)‖` drops to this value.
    pub gradient_stop_tol: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            h_ode: 1e-4,
            event_tolerance: 1e-8,
            max_time: 100.0,
            gradient_stop_tol: 1e-13,
        }
    }
}

impl IntegratorOptions {
    pub fn validate(&self) -> Result<()> {
        self.validate_steps()?;
        if !(self.max_time > 0.0) {
            return Err(Error::invalid("max_time", "must be > 0"));
        }
        if self.h_ode > self.max_time {
            return Err(Error::invalid("h_ode", "must not exceed max_time"));
        }
        Ok(())
    }

    pub(crate) fn validate_steps(&self) -> Result<()> {
        if !(self.h_ode > 0.0 && self.h_ode.is_finite()) {
            return Err(Error::invalid("h_ode", "must be > 0"));
        }
        if !(self.event_tolerance > 0.0) || self.event_tolerance >= self.h_ode {
            return Err(Error::invalid(
                "event_tolerance",
                "must be positive and smaller than h_ode",
            ));
        }
        if !(self.gradient_stop_tol >= 0.0) {
            return Err(Error::invalid("gradient_stop_tol", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    RestartFound,
    GradientBelowTol,
    MaxTimeReached,
}

/// One trajectory piece started at rest. Times in `states` are local to the
/// segment (the first state is at `t = 0`). When a restart is found the last
/// state sits at `restart_time`.
#[derive(Debug, Clone)]
pub struct SegmentResult {
    pub states: Vec<PhaseState>,
    pub restart_time: Option<f64>,
    pub termination: Termination,
}

impl SegmentResult {
    pub fn last(&self) -> &PhaseState {
        self.states.last().expect("a segment always holds its initial state")
    }
}

/// Right-hand side of the first-order system: `(v, −αv − β∇²f(x)v − γ∇f(x))`.
pub fn win_vector_field<O: Objective + ?Sized>(
    obj: &O,
    params: &SystemParams,
    s: &PhaseState,
) -> (Vec<f64>, Vec<f64>) {
    let n = obj.dim();
    let mut dv = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    accel(obj, params, &s.x, &s.v, &mut dv, &mut scratch);
    (s.v.clone(), dv)
}

/// `d/dt ‖v‖² = 2 ⟨v, v̇⟩`. Its first down-crossing of zero after the speed
/// becomes positive is the speed restart time.
pub fn speed_derivative<O: Objective + ?Sized>(obj: &O, params: &SystemParams, s: &PhaseState) -> f64 {
    let (_, dv) = win_vector_field(obj, params, s);
    2.0 * linalg::dot(&s.v, &dv)
}

fn accel<O: Objective + ?Sized>(
    obj: &O,
    p: &SystemParams,
    x: &[f64],
    v: &[f64],
    out: &mut [f64],
    scratch: &mut [f64],
) {
    obj.gradient(x, out);
    for (o, vi) in out.iter_mut().zip(v) {
        *o = -p.gamma * *o - p.alpha * vi;
    }
    if p.beta != 0.0 {
        obj.hvp(x, v, scratch);
        linalg::axpy(-p.beta, scratch, out);
    }
}

/// Scratch buffers for allocation-free Runge-Kutta steps.
struct Rk4<'a, O: ?Sized> {
    obj: &'a O,
    params: SystemParams,
    kx: [Vec<f64>; 4],
    kv: [Vec<f64>; 4],
    xs: Vec<f64>,
    vs: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a, O: Objective + ?Sized> Rk4<'a, O> {
    fn new(obj: &'a O, params: SystemParams) -> Self {
        let n = obj.dim();
        let z = || vec![0.0; n];
        Self {
            obj,
            params,
            kx: [z(), z(), z(), z()],
            kv: [z(), z(), z(), z()],
            xs: z(),
            vs: z(),
            scratch: z(),
        }
    }

    fn stage(&mut self, i: usize, x: &[f64], v: &[f64], prev: Option<(usize, f64)>) {
        self.xs.copy_from_slice(x);
        self.vs.copy_from_slice(v);
        if let Some((j, c)) = prev {
            linalg::axpy(c, &self.kx[j], &mut self.xs);
            linalg::axpy(c, &self.kv[j], &mut self.vs);
        }
        self.kx[i].copy_from_slice(&self.vs);
        let (xs, vs) = (&self.xs, &self.vs);
        accel(self.obj, &self.params, xs, vs, &mut self.kv[i], &mut self.scratch);
    }

    fn step(&mut self, s: &PhaseState, h: f64) -> PhaseState {
        self.stage(0, &s.x, &s.v, None);
        self.stage(1, &s.x, &s.v, Some((0, 0.5 * h)));
        self.stage(2, &s.x, &s.v, Some((1, 0.5 * h)));
        self.stage(3, &s.x, &s.v, Some((2, h)));
        let mut x = s.x.clone();
        let mut v = s.v.clone();
        let w = [h / 6.0, h / 3.0, h / 3.0, h / 6.0];
        for i in 0..4 {
            linalg::axpy(w[i], &self.kx[i], &mut x);
            linalg::axpy(w[i], &self.kv[i], &mut v);
        }
        PhaseState { t: s.t + h, x, v }
    }

    fn event(&mut self, s: &PhaseState) -> f64 {
        let n = s.v.len();
        let mut a = vec![0.0; n];
        accel(self.obj, &self.params, &s.x, &s.v, &mut a, &mut self.scratch);
        2.0 * linalg::dot(&s.v, &a)
    }
}

/// One classical Runge-Kutta step of size `h`.
pub fn rk4_step<O: Objective + ?Sized>(obj: &O, params: &SystemParams, s: &PhaseState, h: f64) -> PhaseState {
    Rk4::new(obj, *params).step(s, h)
}

fn check_dim<O: Objective + ?Sized>(obj: &O, z: &[f64]) -> Result<()> {
    if z.len() != obj.dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.dim(),
            got: z.len(),
        });
    }
    Ok(())
}

/// Integrates from `x(0) = z`, `ẋ(0) = 0` until the speed restart time, the
/// gradient tolerance, or `max_time`, whichever comes first.
pub fn integrate_until_restart<O: Objective + ?Sized>(
    obj: &O,
    params: &SystemParams,
    z: &[f64],
    opts: &IntegratorOptions,
) -> Result<SegmentResult> {
    params.validate()?;
    opts.validate()?;
    check_dim(obj, z)?;
    segment(obj, params, z, opts)
}

/// Same as [`integrate_until_restart`] but `max_time` may be shorter than one
/// step; used when a horizon truncates the last cycle.
pub(crate) fn segment<O: Objective + ?Sized>(
    obj: &O,
    params: &SystemParams,
    z: &[f64],
    opts: &IntegratorOptions,
) -> Result<SegmentResult> {
    let mut rk = Rk4::new(obj, *params);
    let mut cur = PhaseState::at_rest(0.0, z);
    if !cur.is_finite() {
        return Err(Error::NonFiniteState { t: 0.0 });
    }
    let g0 = linalg::norm(&obj.grad(z));
    if g0 <= opts.gradient_stop_tol {
        return Ok(SegmentResult {
            states: vec![cur],
            restart_time: None,
            termination: Termination::GradientBelowTol,
        });
    }

    let h = opts.h_ode;
    let max_time = opts.max_time;
    let mut states = vec![cur.clone()];
    let mut event_prev = 0.0;
    let mut armed = false;
    let mut k: u64 = 0;
    let mut grad = vec![0.0; obj.dim()];

    while cur.t < max_time {
        k += 1;
        let t_next = (k as f64 * h).min(max_time);
        let step = t_next - cur.t;
        let mut next = rk.step(&cur, step);
        next.t = t_next;
        if !next.is_finite() {
            return Err(Error::NonFiniteState { t: t_next });
        }
        let event = rk.event(&next);

        if armed && event_prev > 0.0 && event <= 0.0 {
            let state = localize(&mut rk, &cur, step, opts.event_tolerance);
            if state.t < max_time {
                if !state.is_finite() {
                    return Err(Error::NonFiniteState { t: state.t });
                }
                let t_restart = state.t;
                states.push(state);
                return Ok(SegmentResult {
                    states,
                    restart_time: Some(t_restart),
                    termination: Termination::RestartFound,
                });
            }
        }

        if next.speed() > SPEED_FLOOR {
            armed = true;
        }
        event_prev = event;
        obj.gradient(&next.x, &mut grad);
        let gnorm = linalg::norm(&grad);
        states.push(next.clone());
        cur = next;
        if gnorm <= opts.gradient_stop_tol {
            return Ok(SegmentResult {
                states,
                restart_time: None,
                termination: Termination::GradientBelowTol,
            });
        }
    }

    if !armed {
        return Err(Error::ZeroSpeedStall { max_time });
    }
    Ok(SegmentResult {
        states,
        restart_time: None,
        termination: Termination::MaxTimeReached,
    })
}

/// Bisects the event on `(0, step]` measured from `from`, where the event is
/// positive at 0 and nonpositive at `step`. Returns the state at the
/// nonpositive end of the final bracket.
fn localize<O: Objective + ?Sized>(
    rk: &mut Rk4<'_, O>,
    from: &PhaseState,
    step: f64,
    tol: f64,
) -> PhaseState {
    let mut lo = 0.0;
    let mut hi = step;
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = rk.step(from, mid);
        if rk.event(&s) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut s = rk.step(from, hi);
    s.t = from.t + hi;
    s
}

/// Integrates without restarting from `(z, v0)` over `[0, horizon]`, stopping
/// early only when the gradient tolerance is met. Returns every grid state.
pub fn integrate_fixed<O: Objective + ?Sized>(
    obj: &O,
    params: &SystemParams,
    z: &[f64],
    horizon: f64,
    opts: &IntegratorOptions,
) -> Result<Vec<PhaseState>> {
    params.validate()?;
    opts.validate_steps()?;
    check_dim(obj, z)?;
    if !(horizon >= 0.0) {
        return Err(Error::invalid("horizon", "must be >= 0"));
    }
    let mut rk = Rk4::new(obj, *params);
    let mut cur = PhaseState::at_rest(0.0, z);
    let mut out = vec![cur.clone()];
    let mut grad = obj.grad(z);
    if linalg::norm(&grad) <= opts.gradient_stop_tol {
        return Ok(out);
    }
    let mut k: u64 = 0;
    while cur.t < horizon {
        k += 1;
        let t_next = (k as f64 * opts.h_ode).min(horizon);
        let mut next = rk.step(&cur, t_next - cur.t);
        next.t = t_next;
        if !next.is_finite() {
            return Err(Error::NonFiniteState { t: t_next });
        }
        obj.gradient(&next.x, &mut grad);
        out.push(next.clone());
        cur = next;
        if linalg::norm(&grad) <= opts.gradient_stop_tol {
            break;
        }
    }
    Ok(out)
}
