//! Restarted trajectories: segments of the inertial flow glued together at
//! the speed restart times, each one started again from rest.

use crate::dynamics::{self, IntegratorOptions, PhaseState, SegmentResult, SystemParams, Termination};
use crate::error::{Error, Result};
use crate::linalg;
use crate::objectives::Objective;

/// Relative per-cycle decrease below which a cycle counts as stalled.
pub const NO_PROGRESS_THRESHOLD: f64 = 1e-16;

/// Gaps at or below this are treated as zero when forming cycle ratios.
pub const GAP_FLOOR: f64 = 1e-30;

/// One point of the glued trajectory on the global time axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub f_gap: f64,
    pub speed: f64,
    /// Set on the sample taken at a restart time (speed is the pre-reset value).
    pub restarted: bool,
}

#[derive(Debug, Clone)]
pub struct RestartedTrajectory {
    /// Segments in order; local times start at 0 in each.
    pub segments: Vec<SegmentResult>,
    /// Global start time of each segment.
    pub segment_starts: Vec<f64>,
    /// Cumulative restart times `S_1 < S_2 < …`.
    pub restart_times: Vec<f64>,
    /// Durations of the completed cycles, `T_i = S_i − S_{i−1}` with `S_0 = 0`.
    pub intervals: Vec<f64>,
    /// Every grid point of every segment, in time order.
    pub samples: Vec<Sample>,
    pub termination: Termination,
}

impl RestartedTrajectory {
    pub fn restart_count(&self) -> usize {
        self.restart_times.len()
    }

    pub fn initial_gap(&self) -> f64 {
        self.samples.first().map_or(0.0, |s| s.f_gap)
    }

    pub fn final_state(&self) -> &PhaseState {
        self.segments.last().expect("at least one segment").last()
    }

    /// `(S_i, gap)` at each restart, preceded by `(0, f(z) − f*)`.
    pub fn restart_gaps(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.restart_times.len() + 1);
        if let Some(first) = self.samples.first() {
            out.push((first.t, first.f_gap));
        }
        out.extend(self.samples.iter().filter(|s| s.restarted).map(|s| (s.t, s.f_gap)));
        out
    }

    /// `(t, gap)` for every sample.
    pub fn gap_curve(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| (s.t, s.f_gap)).collect()
    }
}

/// Builds the restarted trajectory from `z` over `[0, horizon]`.
///
/// Each cycle integrates from rest until the speed restart time, then the
/// reached point becomes the next initial condition with zero velocity. The
/// run ends at the horizon (the last cycle is truncated and does not count as
/// completed) or when the gradient tolerance is met.
pub fn run_restarted<O: Objective + ?Sized>(
    obj: &O,
    params: &SystemParams,
    z: &[f64],
    horizon: f64,
    opts: &IntegratorOptions,
) -> Result<RestartedTrajectory> {
    params.validate()?;
    opts.validate_steps()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid("horizon", format!("must be > 0, got {horizon}")));
    }
    if z.len() != obj.dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.dim(),
            got: z.len(),
        });
    }

    let mut traj = RestartedTrajectory {
        segments: Vec::new(),
        segment_starts: Vec::new(),
        restart_times: Vec::new(),
        intervals: Vec::new(),
        samples: Vec::new(),
        termination: Termination::MaxTimeReached,
    };
    let mut start = z.to_vec();
    let mut s_prev = 0.0;
    let mut stalled_cycles = 0;

    loop {
        let remaining = horizon - s_prev;
        let seg_opts = IntegratorOptions {
            max_time: remaining,
            ..*opts
        };
        let seg = dynamics::segment(obj, params, &start, &seg_opts)?;
        let skip_first = !traj.segments.is_empty();
        for (i, st) in seg.states.iter().enumerate() {
            if skip_first && i == 0 {
                continue;
            }
            traj.samples.push(Sample {
                t: s_prev + st.t,
                f_gap: obj.gap(&st.x),
                speed: st.speed(),
                restarted: false,
            });
        }
        traj.segment_starts.push(s_prev);
        let termination = seg.termination;
        let restart = seg.restart_time;
        let end_x = seg.last().x.clone();
        traj.segments.push(seg);

        match (termination, restart) {
            (Termination::RestartFound, Some(t_local)) => {
                let s_next = s_prev + t_local;
                if let Some(last) = traj.samples.last_mut() {
                    last.restarted = true;
                }
                let gap_start = obj.gap(&start);
                let gap_end = obj.gap(&end_x);
                if gap_start > 0.0 && (gap_start - gap_end) / gap_start < NO_PROGRESS_THRESHOLD {
                    stalled_cycles += 1;
                    if stalled_cycles >= 2 {
                        return Err(Error::NoProgress {
                            t: s_next,
                            threshold: NO_PROGRESS_THRESHOLD,
                        });
                    }
                } else {
                    stalled_cycles = 0;
                }
                traj.restart_times.push(s_next);
                traj.intervals.push(t_local);
                s_prev = s_next;
                // velocity resets to zero; position carries over exactly
                start = end_x;
                if horizon - s_prev <= opts.event_tolerance {
                    traj.termination = Termination::MaxTimeReached;
                    break;
                }
            }
            (t, _) => {
                traj.termination = t;
                break;
            }
        }
    }
    Ok(traj)
}

/// Ratio of the gap at the end of each completed cycle to the gap at its
/// start. Cycles starting at a gap of at most [`GAP_FLOOR`] are skipped.
pub fn verify_cycle_contraction<O: Objective + ?Sized>(traj: &RestartedTrajectory, obj: &O) -> Vec<f64> {
    traj.segments
        .iter()
        .filter(|s| s.termination == Termination::RestartFound)
        .filter_map(|s| {
            let g0 = obj.gap(&s.states[0].x);
            let g1 = obj.gap(&s.last().x);
            (g0 > GAP_FLOOR).then(|| g1 / g0)
        })
        .collect()
}

/// Largest forward increase of the sampled gap, `max_k (g_{k+1} − g_k)`.
/// Zero or negative for a nonincreasing curve.
pub fn max_gap_increase(traj: &RestartedTrajectory) -> f64 {
    traj.samples
        .windows(2)
        .map(|w| w[1].f_gap - w[0].f_gap)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Checks that consecutive segments join exactly: the end point of segment
/// `i` is the start point of segment `i + 1`, and each segment starts at rest.
pub fn glue_is_exact(traj: &RestartedTrajectory) -> bool {
    traj.segments.windows(2).all(|w| {
        let end = w[0].last();
        let start = &w[1].states[0];
        end.x == start.x && linalg::norm(&start.v) == 0.0
    }) && traj
        .segments
        .first()
        .is_none_or(|s| linalg::norm(&s.states[0].v) == 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::DiagonalQuadratic;

    #[test]
    fn stationary_trajectory() {
        let f = DiagonalQuadratic::new(vec![1.0, 10.0]).unwrap();
        let p = SystemParams::new(3.0, 1.0, 20.0).unwrap();
        let tr = run_restarted(&f, &p, &[0.0, 0.0], 5.0, &IntegratorOptions::default()).unwrap();
        assert_eq!(tr.segments.len(), 1);
        assert_eq!(tr.restart_count(), 0);
        assert!(tr.samples.iter().all(|s| s.f_gap == 0.0));
        assert_eq!(tr.termination, Termination::GradientBelowTol);
        assert!(verify_cycle_contraction(&tr, &f).is_empty());
    }

    #[test]
    fn rejects_bad_horizon() {
        let f = DiagonalQuadratic::scalar(1.0).unwrap();
        let p = SystemParams::new(3.0, 1.0, 20.0).unwrap();
        assert!(run_restarted(&f, &p, &[1.0], 0.0, &IntegratorOptions::default()).is_err());
        assert!(run_restarted(&f, &p, &[1.0], f64::NAN, &IntegratorOptions::default()).is_err());
    }

    #[test]
    fn scalar_cycles_are_identical() {
        // For a 1-D quadratic every cycle is a scaled copy of the first.
        let f = DiagonalQuadratic::scalar(1.0).unwrap();
        let p = SystemParams::new(3.0, 1.0, 20.0).unwrap();
        let opts = IntegratorOptions {
            gradient_stop_tol: 1e-10,
            ..Default::default()
        };
        let tr = run_restarted(&f, &p, &[1.0], 3.0, &opts).unwrap();
        assert!(tr.intervals.len() > 3);
        for w in tr.intervals.windows(2) {
            assert!((w[0] - w[1]).abs() < 1e-7, "{:?}", tr.intervals);
        }
        assert!(glue_is_exact(&tr));
        assert!(max_gap_increase(&tr) <= 0.0);
        let ratios = verify_cycle_contraction(&tr, &f);
        assert_eq!(ratios.len(), tr.intervals.len());
        assert!(ratios.iter().all(|r| *r < 1.0));
    }

    #[test]
    fn restart_samples_flagged() {
        let f = DiagonalQuadratic::new(vec![1.0, 10.0, 100.0]).unwrap();
        let p = SystemParams::new(3.0, 0.0, 10.0225).unwrap();
        let tr = run_restarted(&f, &p, &[1.0, 1.0, 1.0], 2.0, &IntegratorOptions::default()).unwrap();
        let flagged = tr.samples.iter().filter(|s| s.restarted).count();
        assert_eq!(flagged, tr.restart_count());
        assert_eq!(flagged, tr.segments.len() - 1);
        for (s, t) in tr.samples.iter().filter(|s| s.restarted).zip(&tr.restart_times) {
            assert_eq!(s.t, *t);
        }
        assert!(tr.samples.windows(2).all(|w| w[0].t < w[1].t));
        assert_eq!(tr.samples.last().unwrap().t, 2.0);
    }
}
