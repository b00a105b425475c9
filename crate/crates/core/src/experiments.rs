//! The four experiment commands behind the `winrestart` binary.
//!
//! Each `cmd_*` function computes its results, writes artifacts under the
//! configured output directory and returns a serializable report. Printing is
//! left to the caller.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{
    self, discrete_csv, fit_exponential_in, interval_stats_with, Envelope, FitWindow, IntervalStats, PlotStyle,
    RegressionFit, Series,
};
use crate::config::{ExperimentConfig, FitMode, GammaSpec, Mode, OutputFormat, Problem};
use crate::discrete::{run_algorithm, IterateRecord, RestartPolicy};
use crate::dynamics::{integrate_fixed, integrate_until_restart, speed_derivative, IntegratorOptions, PhaseState, SystemParams};
use crate::error::{Error, Result};
use crate::linalg;
use crate::objectives::{gamma_for_oscillation, make_power_quadratic, DiagonalQuadratic, Objective, PowerQuadraticSpec};
use crate::restart::{run_restarted, RestartedTrajectory};
use crate::theory::{self, TheoreticalBounds};

/// Environment variable capping the number of grid cells run in parallel.
pub const THREADS_ENV: &str = "WINRESTART_THREADS";

#[derive(Debug, Clone, Serialize)]
pub struct ContinuousReport {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub already_optimal: bool,
    pub restarts: usize,
    pub termination: String,
    pub final_time: f64,
    pub initial_gap: f64,
    pub final_gap: f64,
    pub fit: Option<RegressionFit>,
    pub intervals: Option<IntervalStats>,
    pub baseline_fit: Option<RegressionFit>,
    pub notes: Vec<String>,
}

/// Raw output of one continuous run, before anything is written.
#[derive(Debug, Clone)]
pub struct ContinuousRun {
    pub report: ContinuousReport,
    pub trajectory: Option<RestartedTrajectory>,
    pub baseline: Option<Vec<(f64, f64)>>,
    pub bounds: Option<TheoreticalBounds>,
}

fn fit_or_note(samples: &[(f64, f64)], window: FitWindow, what: &str, notes: &mut Vec<String>) -> Option<RegressionFit> {
    match fit_exponential_in(samples, window) {
        Ok(f) => Some(f),
        Err(e) => {
            notes.push(format!("{what}: {e}"));
            None
        }
    }
}

fn window_of(cfg: &ExperimentConfig) -> FitWindow {
    cfg.fit_t_max.map_or(FitWindow::ALL, FitWindow::up_to)
}

/// Runs the restarted trajectory (and the baseline if requested) for `cfg`.
pub fn run_continuous(cfg: &ExperimentConfig) -> Result<ContinuousRun> {
    cfg.validate()?;
    let obj = cfg.problem.build()?;
    let params = cfg.params()?;
    let z = cfg.start_point();
    run_continuous_on(&obj, &params, &z, cfg)
}

pub fn run_continuous_on<O: Objective + ?Sized>(
    obj: &O,
    params: &SystemParams,
    z: &[f64],
    cfg: &ExperimentConfig,
) -> Result<ContinuousRun> {
    let mut notes = Vec::new();
    let gap0 = obj.gap(z);
    let mut report = ContinuousReport {
        alpha: params.alpha,
        beta: params.beta,
        gamma: params.gamma,
        already_optimal: false,
        restarts: 0,
        termination: String::new(),
        final_time: 0.0,
        initial_gap: gap0,
        final_gap: gap0,
        fit: None,
        intervals: None,
        baseline_fit: None,
        notes: Vec::new(),
    };
    if linalg::norm(&obj.grad(z)) <= cfg.integrator.gradient_stop_tol {
        report.already_optimal = true;
        report.termination = "already optimal".into();
        return Ok(ContinuousRun {
            report,
            trajectory: None,
            baseline: None,
            bounds: None,
        });
    }

    let traj = run_restarted(obj, params, z, cfg.horizon, &cfg.integrator)?;
    report.restarts = traj.restart_count();
    report.termination = format!("{:?}", traj.termination);
    let last = traj.samples.last().expect("trajectory has samples");
    report.final_time = last.t;
    report.final_gap = last.f_gap;
    let window = window_of(cfg);
    let fit_samples = match cfg.fit_mode {
        FitMode::AllSamples => traj.gap_curve(),
        FitMode::RestartPoints => traj.restart_gaps(),
    };
    report.fit = fit_or_note(&fit_samples, window, "regression", &mut notes);
    report.intervals = match interval_stats_with(&traj.intervals, cfg.variance) {
        Ok(s) => Some(s),
        Err(_) => {
            notes.push("no completed restart cycle".into());
            None
        }
    };

    let baseline = if cfg.baseline {
        let states = integrate_fixed(obj, params, z, cfg.horizon, &cfg.integrator)?;
        let curve: Vec<(f64, f64)> = states.iter().map(|s| (s.t, obj.gap(&s.x))).collect();
        report.baseline_fit = fit_or_note(&curve, window, "baseline regression", &mut notes);
        Some(curve)
    } else {
        None
    };

    let bounds = TheoreticalBounds::compute(params, obj.lipschitz(), obj.pl_mu()).ok();
    report.notes = notes;
    Ok(ContinuousRun {
        report,
        trajectory: Some(traj),
        baseline,
        bounds,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn fmt_fit(f: &Option<RegressionFit>) -> String {
    match f {
        Some(f) => format!(
            "A = {:.6e}, B = {:.6e}, r^2 = {:.6}, window = [{:.6}, {:.6}]",
            f.a, f.b, f.r_squared, f.window.0, f.window.1
        ),
        None => "n/a".into(),
    }
}

impl ContinuousReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "alpha = {}, beta = {}, gamma = {}", self.alpha, self.beta, self.gamma);
        if self.already_optimal {
            let _ = writeln!(s, "already optimal: the start point meets the gradient tolerance; 0 restarts");
            return s;
        }
        let _ = writeln!(s, "restarts: {}", self.restarts);
        let _ = writeln!(s, "termination: {} at t = {:.6}", self.termination, self.final_time);
        let _ = writeln!(s, "gap: {:.6e} -> {:.6e}", self.initial_gap, self.final_gap);
        let _ = writeln!(s, "fit: {}", fmt_fit(&self.fit));
        if let Some(st) = &self.intervals {
            let _ = writeln!(
                s,
                "restart intervals: count = {}, mean = {:.6e}, variance = {:.6e}",
                st.count, st.mean, st.variance
            );
        }
        if self.baseline_fit.is_some() {
            let _ = writeln!(s, "baseline fit: {}", fmt_fit(&self.baseline_fit));
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        s
    }

    fn to_csv(&self) -> String {
        let mut s = String::from("key,value\n");
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k},{v}");
        };
        kv("alpha", self.alpha.to_string());
        kv("beta", self.beta.to_string());
        kv("gamma", self.gamma.to_string());
        kv("already_optimal", self.already_optimal.to_string());
        kv("restarts", self.restarts.to_string());
        kv("termination", self.termination.clone());
        kv("final_time", self.final_time.to_string());
        kv("initial_gap", self.initial_gap.to_string());
        kv("final_gap", self.final_gap.to_string());
        if let Some(f) = &self.fit {
            kv("fit_a", f.a.to_string());
            kv("fit_b", f.b.to_string());
            kv("fit_r_squared", f.r_squared.to_string());
        }
        if let Some(st) = &self.intervals {
            kv("interval_count", st.count.to_string());
            kv("interval_mean", st.mean.to_string());
            kv("interval_variance", st.variance.to_string());
        }
        s
    }
}

fn continuous_plot(run: &ContinuousRun, title: &str, path: &Path) -> Result<()> {
    let Some(traj) = &run.trajectory else {
        return Ok(());
    };
    let mut series = vec![Series::new("restarted", traj.gap_curve())];
    if let Some(b) = &run.baseline {
        series.push(Series::new("no restart", b.clone()).dashed());
    }
    let style = PlotStyle {
        title: title.into(),
        markers: traj.restart_gaps().into_iter().skip(1).collect(),
        envelope: run.bounds.map(|b| Envelope {
            c: b.c,
            k: b.k,
            gap0: traj.initial_gap(),
        }),
        ..PlotStyle::default()
    };
    analysis::emit_plot(&series, path, &style)
}

/// `simulate`: restarted continuous run, CSV + plot + summary under `cfg.out`.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<ContinuousReport> {
    if cfg.mode != Mode::Continuous {
        return Err(Error::config("mode", "simulate needs mode = continuous"));
    }
    let run = run_continuous(cfg)?;
    let out = &cfg.out;
    let samples = run.trajectory.as_ref().map_or(&[][..], |t| &t.samples[..]);
    analysis::export_continuous_csv(samples, &out.join("trajectory.csv"))?;
    if let Some(b) = &run.baseline {
        let mut s = String::from("t,f_gap\n");
        for (t, g) in b {
            let _ = writeln!(s, "{t:.16e},{g:.16e}");
        }
        write_text(&out.join("baseline.csv"), &s)?;
    }
    continuous_plot(&run, "restarted trajectory", &out.join("gap.svg"))?;
    match cfg.format {
        OutputFormat::Json => write_text(&out.join("summary.json"), &json(&run.report))?,
        OutputFormat::Csv => write_text(&out.join("summary.csv"), &run.report.to_csv())?,
    }
    write_text(&out.join("config.txt"), &cfg.serialize())?;
    Ok(run.report)
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoryReport {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lipschitz: f64,
    pub mu: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    pub tau_star: f64,
    pub tau_upper: f64,
    pub q: f64,
    pub c: f64,
    pub k: f64,
    pub warnings: Vec<String>,
}

/// `theory`: restart-time and rate bounds for `(α, β, γ, L, μ)`.
pub fn cmd_theory(params: &SystemParams, l: f64, mu: f64) -> Result<TheoryReport> {
    params.validate()?;
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::invalid("L", format!("must be > 0, got {l}")));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::invalid("mu", format!("must be > 0, got {mu}")));
    }
    let mut warnings = Vec::new();
    if mu > l {
        warnings.push(format!(
            "mu = {mu} exceeds L = {l}; a PL constant cannot exceed the gradient Lipschitz constant"
        ));
    }
    let b = TheoreticalBounds::compute(params, l, mu)?;
    Ok(TheoryReport {
        alpha: params.alpha,
        beta: params.beta,
        gamma: params.gamma,
        lipschitz: l,
        mu,
        tau1: b.tau1,
        tau2: b.tau2,
        tau3: b.tau3,
        tau_star: b.tau_star,
        tau_upper: b.tau_upper,
        q: b.q,
        c: b.c,
        k: b.k,
        warnings,
    })
}

impl TheoryReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        let rows = [
            ("tau1", self.tau1),
            ("tau2", self.tau2),
            ("tau3", self.tau3),
            ("tau_star", self.tau_star),
            ("tau_upper", self.tau_upper),
            ("Q", self.q),
            ("C", self.c),
            ("K", self.k),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k:<10} {v:.12e}");
        }
        s
    }

    pub fn to_csv(&self) -> String {
        format!(
            "tau1,tau2,tau3,tau_star,tau_upper,q,c,k\n{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
            self.tau1, self.tau2, self.tau3, self.tau_star, self.tau_upper, self.q, self.c, self.k
        )
    }

    pub fn to_json(&self) -> String {
        json(self)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscreteReport {
    pub policy: String,
    pub iterations: usize,
    pub restarts: usize,
    pub initial_gap: f64,
    pub final_gap: f64,
    pub fit: Option<RegressionFit>,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

/// Gap against iteration count, starting with `(0, gap(x₀))`.
pub fn iterate_curve(gap0: f64, records: &[IterateRecord]) -> Vec<(f64, f64)> {
    std::iter::once((0.0, gap0))
        .chain(records.iter().map(|r| (r.k as f64, r.f_gap)))
        .collect()
}

/// Runs the algorithm under one policy and fits `gap_k ≈ A e^{−Bk}`.
pub fn run_discrete_policy<O: Objective + ?Sized>(
    obj: &O,
    cfg: &ExperimentConfig,
    policy: RestartPolicy,
    x0: &[f64],
) -> Result<(DiscreteReport, Vec<IterateRecord>)> {
    let dcfg = cfg.discrete(policy)?;
    let warnings = dcfg.warnings(obj.lipschitz());
    let records = run_algorithm(obj, &dcfg, x0)?;
    let gap0 = obj.gap(x0);
    let mut notes = Vec::new();
    let fit = if records.is_empty() {
        None
    } else {
        let curve = iterate_curve(gap0, &records);
        let samples = match cfg.fit_mode {
            FitMode::AllSamples => curve,
            FitMode::RestartPoints => {
                let mut v = vec![(0.0, gap0)];
                v.extend(records.iter().filter(|r| r.restarted).map(|r| (r.k as f64, r.f_gap)));
                v
            }
        };
        fit_or_note(&samples, window_of(cfg), "regression", &mut notes)
    };
    let report = DiscreteReport {
        policy: policy.name().into(),
        iterations: records.len(),
        restarts: records.iter().filter(|r| r.restarted).count(),
        initial_gap: gap0,
        final_gap: records.last().map_or(gap0, |r| r.f_gap),
        fit,
        warnings,
        notes,
    };
    Ok((report, records))
}

impl DiscreteReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        let _ = writeln!(
            s,
            "{:<11} iterations = {}, restarts = {}, gap {:.6e} -> {:.6e}",
            self.policy, self.iterations, self.restarts, self.initial_gap, self.final_gap
        );
        let _ = writeln!(s, "            fit: {}", fmt_fit(&self.fit));
        for n in &self.notes {
            let _ = writeln!(s, "            note: {n}");
        }
        s
    }
}

/// `discrete`: one CSV per policy, a comparison plot and a summary.
pub fn cmd_discrete(cfg: &ExperimentConfig) -> Result<Vec<DiscreteReport>> {
    cfg.validate()?;
    let obj = cfg.problem.build()?;
    let x0 = cfg.start_point();
    let out = &cfg.out;
    let mut reports = Vec::new();
    let mut series = Vec::new();
    for &policy in &cfg.policies {
        let (report, records) = run_discrete_policy(&obj, cfg, policy, &x0)?;
        analysis::export_discrete_csv(&records, &out.join(format!("discrete_{}.csv", policy.name())))?;
        if !records.is_empty() {
            series.push(Series::new(policy.name(), iterate_curve(report.initial_gap, &records)));
        }
        reports.push(report);
    }
    if !series.is_empty() {
        let style = PlotStyle {
            title: "algorithm iterates".into(),
            x_label: "k".into(),
            ..PlotStyle::default()
        };
        analysis::emit_plot(&series, &out.join("discrete.svg"), &style)?;
    }
    match cfg.format {
        OutputFormat::Json => write_text(&out.join("summary.json"), &json(&reports))?,
        OutputFormat::Csv => {
            let mut s = String::from("policy,iterations,restarts,initial_gap,final_gap,fit_a,fit_b,fit_r_squared\n");
            for r in &reports {
                let (a, b, r2) = r.fit.map_or((f64::NAN, f64::NAN, f64::NAN), |f| (f.a, f.b, f.r_squared));
                let _ = writeln!(
                    s,
                    "{},{},{},{:e},{:e},{:e},{:e},{}",
                    r.policy, r.iterations, r.restarts, r.initial_gap, r.final_gap, a, b, r2
                );
            }
            write_text(&out.join("summary.csv"), &s)?;
        }
    }
    write_text(&out.join("config.txt"), &cfg.serialize())?;
    Ok(reports)
}

/// Reference values for the three experiment tables, keyed by `(β, ε column)`.
pub mod reference {
    /// ε values of the three table columns.
    pub const EPSILONS: [f64; 3] = [0.1, 10.0, 100.0];
    pub const BETAS: [f64; 2] = [0.0, 6.0];
    /// Continuous regression `(A, B)`, `[column][β index]`.
    pub const TABLE1: [[(f64, f64); 2]; 3] = [
        [(63.24, 2.99), (7.34, 59.72)],
        [(5.92, 6.62), (6.68, 59.14)],
        [(8.99, 88.51), (14.62, 101.57)],
    ];
    /// Restart-interval `(mean, variance)`, `[column][β index]`.
    pub const TABLE2: [[(f64, f64); 2]; 3] = [
        [(7.01e-1, 3.76e-1), (3.79e-2, 2.85e-4)],
        [(3.70e-1, 3.50e-3), (3.76e-2, 2.79e-4)],
        [(3.39e-2, 3.48e-4), (2.59e-2, 1.51e-4)],
    ];
    /// Discrete regression `(A, B)` per column, β = 6.
    pub const TABLE3: [(f64, f64); 3] = [(1.07e5, 5.46e-2), (1.12e5, 5.55e-2), (6.83e4, 8.52e-2)];

    pub const TABLE1_TOL: f64 = 0.25;
    pub const TABLE2_TOL: f64 = 0.15;
    pub const TABLE3_TOL: f64 = 0.20;
}

#[derive(Debug, Clone)]
pub struct ReproduceOptions {
    pub out: PathBuf,
    /// ε used for the third table column. The figures of the source
    /// experiment label it 1000 while the table headers say 100.
    pub third_epsilon: f64,
    /// Upper end of the time window for the continuous regression.
    pub table1_fit_t_max: Option<f64>,
    pub threads: Option<usize>,
    pub format: OutputFormat,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        Self {
            out: PathBuf::from("out"),
            third_epsilon: 1000.0,
            table1_fit_t_max: Some(0.7),
            threads: threads_from_env(),
            format: OutputFormat::Csv,
        }
    }
}

/// Reads [`THREADS_ENV`]; unset, empty or invalid values mean "no cap".
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|n| *n > 0)
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuousCell {
    pub beta: f64,
    pub epsilon: f64,
    pub column: usize,
    pub gamma: f64,
    pub restarts: usize,
    pub fit: Option<RegressionFit>,
    pub intervals: Option<IntervalStats>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscreteCell {
    pub epsilon: f64,
    pub column: usize,
    pub policies: Vec<DiscreteReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn relative(name: String, value: f64, target: f64, tol: f64) -> Self {
        let pass = value.is_finite() && ((value - target) / target).abs() <= tol;
        Check {
            name,
            value,
            target,
            tolerance: tol,
            pass,
        }
    }

    fn holds(name: String, value: f64, pass: bool) -> Self {
        Check {
            name,
            value,
            target: f64::NAN,
            tolerance: f64::NAN,
            pass,
        }
    }

    pub fn line(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        if self.target.is_nan() {
            format!("{verdict} {}", self.name)
        } else {
            format!(
                "{verdict} {}: {:.4e} vs {:.4e} ({:+.1}%, tol {:.0}%)",
                self.name,
                self.value,
                self.target,
                100.0 * (self.value - self.target) / self.target,
                100.0 * self.tolerance
            )
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReproduceReport {
    pub continuous: Vec<ContinuousCell>,
    pub discrete: Vec<DiscreteCell>,
    pub checks: Vec<Check>,
}

impl ReproduceReport {
    pub fn cell_errors(&self) -> usize {
        self.continuous.iter().filter(|c| c.error.is_some()).count()
            + self.discrete.iter().filter(|c| c.error.is_some()).count()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "cells: {} continuous, {} discrete, {} with errors",
            self.continuous.len(),
            self.discrete.len(),
            self.cell_errors()
        );
        for c in &self.continuous {
            if let Some(e) = &c.error {
                let _ = writeln!(s, "ERROR continuous beta={} eps={}: {e}", c.beta, c.epsilon);
            }
        }
        for c in &self.discrete {
            if let Some(e) = &c.error {
                let _ = writeln!(s, "ERROR discrete eps={}: {e}", c.epsilon);
            }
        }
        for c in &self.checks {
            let _ = writeln!(s, "{}", c.line());
        }
        let passed = self.checks.iter().filter(|c| c.pass).count();
        let _ = writeln!(s, "{passed}/{} checks passed", self.checks.len());
        s
    }
}

fn table_problem() -> DiagonalQuadratic {
    make_power_quadratic(PowerQuadraticSpec { n: 3, rho: 10.0 }).expect("valid spec")
}

fn cell_config(beta: f64, epsilon: f64) -> ExperimentConfig {
    ExperimentConfig {
        beta,
        gamma: GammaSpec::Oscillation { i: 2, epsilon },
        ..ExperimentConfig::default()
    }
}

struct ContinuousOutput {
    cell: ContinuousCell,
    run: Option<ContinuousRun>,
}

fn continuous_cell(beta: f64, column: usize, epsilon: f64, fit_t_max: Option<f64>) -> ContinuousOutput {
    let mut cfg = cell_config(beta, epsilon);
    cfg.baseline = true;
    cfg.fit_t_max = fit_t_max;
    let gamma = cfg.gamma_value().unwrap_or(f64::NAN);
    match run_continuous(&cfg) {
        Ok(run) => ContinuousOutput {
            cell: ContinuousCell {
                beta,
                epsilon,
                column,
                gamma,
                restarts: run.report.restarts,
                fit: run.report.fit,
                intervals: run.report.intervals,
                error: None,
            },
            run: Some(run),
        },
        Err(e) => ContinuousOutput {
            cell: ContinuousCell {
                beta,
                epsilon,
                column,
                gamma,
                restarts: 0,
                fit: None,
                intervals: None,
                error: Some(e.to_string()),
            },
            run: None,
        },
    }
}

struct DiscreteOutput {
    cell: DiscreteCell,
    records: Vec<(RestartPolicy, Vec<IterateRecord>)>,
}

fn discrete_cell(column: usize, epsilon: f64) -> DiscreteOutput {
    let mut cfg = cell_config(6.0, epsilon);
    cfg.mode = Mode::Discrete;
    cfg.policies = RestartPolicy::ALL.to_vec();
    let obj = table_problem();
    let x0 = cfg.start_point();
    let mut policies = Vec::new();
    let mut records = Vec::new();
    for &p in &cfg.policies {
        match run_discrete_policy(&obj, &cfg, p, &x0) {
            Ok((r, rec)) => {
                policies.push(r);
                records.push((p, rec));
            }
            Err(e) => {
                return DiscreteOutput {
                    cell: DiscreteCell {
                        epsilon,
                        column,
                        policies,
                        error: Some(format!("policy {}: {e}", p.name())),
                    },
                    records,
                }
            }
        }
    }
    DiscreteOutput {
        cell: DiscreteCell {
            epsilon,
            column,
            policies,
            error: None,
        },
        records,
    }
}

fn eps_tag(eps: f64) -> String {
    eps.to_string().replace('.', "p")
}

fn write_tables(out: &Path, cont: &[ContinuousCell], disc: &[DiscreteCell]) -> Result<()> {
    use reference::*;
    let nan = f64::NAN;
    let mut t1 = String::from("beta,epsilon,A,B,r_squared,t_min,t_max,ref_A,ref_B\n");
    let mut t2 = String::from("beta,epsilon,count,mean,variance,ref_mean,ref_variance\n");
    for c in cont {
        let bi = usize::from(c.beta != 0.0);
        let (ra, rb) = TABLE1[c.column][bi];
        let (rm, rv) = TABLE2[c.column][bi];
        let f = c.fit.map_or((nan, nan, nan, nan, nan), |f| (f.a, f.b, f.r_squared, f.window.0, f.window.1));
        let _ = writeln!(
            t1,
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{ra},{rb}",
            c.beta, c.epsilon, f.0, f.1, f.2, f.3, f.4
        );
        let st = c.intervals.map_or((0, nan, nan), |s| (s.count, s.mean, s.variance));
        let _ = writeln!(
            t2,
            "{},{},{},{:.16e},{:.16e},{rm},{rv}",
            c.beta, c.epsilon, st.0, st.1, st.2
        );
    }
    let mut t3 = String::from("epsilon,policy,iterations,restarts,A,B,r_squared,ref_A,ref_B\n");
    for c in disc {
        let (ra, rb) = TABLE3[c.column];
        for p in &c.policies {
            let f = p.fit.map_or((nan, nan, nan), |f| (f.a, f.b, f.r_squared));
            let (ra, rb) = if p.policy == "speed" { (ra, rb) } else { (nan, nan) };
            let _ = writeln!(
                t3,
                "{},{},{},{},{:.16e},{:.16e},{:.16e},{ra},{rb}",
                c.epsilon, p.policy, p.iterations, p.restarts, f.0, f.1, f.2
            );
        }
    }
    write_text(&out.join("table1.csv"), &t1)?;
    write_text(&out.join("table2.csv"), &t2)?;
    write_text(&out.join("table3.csv"), &t3)
}

/// Builds the pass/fail checks against the reference tables.
pub fn table_checks(cont: &[ContinuousCell], disc: &[DiscreteCell]) -> Vec<Check> {
    use reference::*;
    let mut checks = Vec::new();
    let b_of = |c: &ContinuousCell| c.fit.map_or(f64::NAN, |f| f.b);
    for c in cont {
        let bi = usize::from(c.beta != 0.0);
        checks.push(Check::relative(
            format!("table1 beta={} eps={} B", c.beta, c.epsilon),
            b_of(c),
            TABLE1[c.column][bi].1,
            TABLE1_TOL,
        ));
    }
    let find = |beta: f64, col: usize| cont.iter().find(|c| c.beta == beta && c.column == col);
    for col in 0..3 {
        if let (Some(c0), Some(c6)) = (find(0.0, col), find(6.0, col)) {
            let (b0, b6) = (b_of(c0), b_of(c6));
            checks.push(Check::holds(
                format!("table1 ordering eps={}: B(beta=6) = {b6:.4} > B(beta=0) = {b0:.4}", c0.epsilon),
                b6 - b0,
                b6 > b0,
            ));
        }
    }
    let b0: Vec<f64> = (0..3).filter_map(|col| find(0.0, col)).map(b_of).collect();
    if b0.len() == 3 {
        checks.push(Check::holds(
            format!(
                "table1 ordering beta=0: B increases with eps ({:.4} < {:.4} < {:.4})",
                b0[0], b0[1], b0[2]
            ),
            b0[2] - b0[0],
            b0[0] < b0[1] && b0[1] < b0[2],
        ));
    }
    for c in cont {
        let bi = usize::from(c.beta != 0.0);
        checks.push(Check::relative(
            format!("table2 beta={} eps={} mean", c.beta, c.epsilon),
            c.intervals.map_or(f64::NAN, |s| s.mean),
            TABLE2[c.column][bi].0,
            TABLE2_TOL,
        ));
    }
    let speed_b = |c: &DiscreteCell, name: &str| {
        c.policies
            .iter()
            .find(|p| p.policy == name)
            .and_then(|p| p.fit)
            .map_or(f64::NAN, |f| f.b)
    };
    for c in disc {
        checks.push(Check::relative(
            format!("table3 eps={} B", c.epsilon),
            speed_b(c, "speed"),
            TABLE3[c.column].1,
            TABLE3_TOL,
        ));
        let (bs, bn) = (speed_b(c, "speed"), speed_b(c, "none"));
        checks.push(Check::holds(
            format!("table3 eps={}: B(speed) = {bs:.4e} > B(none) = {bn:.4e}", c.epsilon),
            bs - bn,
            bs > bn,
        ));
    }
    let fd = |col: usize| disc.iter().find(|c| c.column == col).map_or(f64::NAN, |c| speed_b(c, "speed"));
    let (b2, b3) = (fd(1), fd(2));
    checks.push(Check::holds(
        format!("table3 ordering: B(third eps) = {b3:.4e} > B(eps=10) = {b2:.4e}"),
        b3 - b2,
        b3 > b2,
    ));
    checks
}

fn hessian_figure(out: &Path, rho: f64) -> Result<()> {
    let obj = make_power_quadratic(PowerQuadraticSpec { n: 3, rho })?;
    let h_ode = if rho > 10.0 { 1e-5 } else { 1e-4 };
    let opts = IntegratorOptions {
        h_ode,
        ..IntegratorOptions::default()
    };
    let mut series = Vec::new();
    for beta in [0.0, 6.0] {
        let gamma = gamma_for_oscillation(3.0, beta, rho, 1, 0.1)?;
        let p = SystemParams::new(3.0, beta, gamma)?;
        let states = integrate_fixed(&obj, &p, &[1.0; 3], 5.0, &opts)?;
        let curve = states.iter().map(|s| (s.t, obj.gap(&s.x))).collect();
        series.push(Series::new(format!("beta = {beta}"), curve));
    }
    let style = PlotStyle {
        title: format!("no restart, i = 1, eps = 0.1, rho = {rho}"),
        x_range: Some((1.0, 5.0)),
        ..PlotStyle::default()
    };
    analysis::emit_plot(&series, &out.join(format!("fig_hessian_rho{rho}.svg")), &style)
}

/// Event function `⟨v, v̇⟩` along the 1-D trajectory from `x = 1` against `G`.
fn toy_figure(out: &Path, gamma: f64) -> Result<()> {
    let p = SystemParams::new(3.0, 1.0, gamma)?;
    let obj = DiagonalQuadratic::scalar(1.0)?;
    let b = theory::solve_tau(&p, 1.0)?;
    let seg = integrate_until_restart(&obj, &p, &[1.0], &IntegratorOptions::default())?;
    let t_end = 1.5 * seg.restart_time.unwrap_or(b.tau1).max(b.tau3);
    let opts = IntegratorOptions {
        h_ode: t_end / 2000.0,
        ..IntegratorOptions::default()
    };
    let states: Vec<PhaseState> = integrate_fixed(&obj, &p, &[1.0], t_end, &opts)?;
    let ev: Vec<(f64, f64)> = states.iter().map(|s| (s.t, speed_derivative(&obj, &p, s))).collect();
    let scale = ev.iter().map(|e| e.1.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let ev = ev.into_iter().map(|(t, e)| (t, e / scale)).collect();
    let g = states.iter().map(|s| (s.t, theory::eval_g(s.t, &p, 1.0))).collect();
    let style = PlotStyle {
        title: format!("alpha = 3, beta = 1, gamma = {gamma}"),
        y_label: "value".into(),
        log_y: false,
        markers: vec![(b.tau3, 0.0)].into_iter().chain(seg.restart_time.map(|t| (t, 0.0))).collect(),
        ..PlotStyle::default()
    };
    analysis::emit_plot(
        &[Series::new("speed derivative (scaled)", ev), Series::new("G", g).dashed()],
        &out.join(format!("fig_toy_gamma{gamma}.svg")),
        &style,
    )
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    let pool = b
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker threads: {e}")))?;
    Ok(pool.install(f))
}

/// `reproduce-paper`: the full grid of continuous and discrete cells, all
/// tables, all figures and a `report.txt` of pass/fail lines.
///
/// Cells run in parallel (capped by `opts.threads`) but every file is written
/// by exactly one cell, so the output does not depend on scheduling.
pub fn cmd_reproduce_paper(opts: &ReproduceOptions) -> Result<ReproduceReport> {
    if !(opts.third_epsilon > 0.0) {
        return Err(Error::config("third_epsilon", "must be > 0"));
    }
    let out = opts.out.as_path();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let eps = [reference::EPSILONS[0], reference::EPSILONS[1], opts.third_epsilon];

    let cont_jobs: Vec<(f64, usize)> = (0..3)
        .flat_map(|col| reference::BETAS.iter().map(move |&b| (b, col)))
        .collect();
    let (cont, disc) = in_pool(opts.threads, || {
        rayon::join(
            || {
                cont_jobs
                    .par_iter()
                    .map(|&(beta, col)| continuous_cell(beta, col, eps[col], opts.table1_fit_t_max))
                    .collect::<Vec<_>>()
            },
            || (0..3).into_par_iter().map(|col| discrete_cell(col, eps[col])).collect::<Vec<_>>(),
        )
    })?;

    let cells_dir = out.join("cells");
    let cont_files: Vec<Result<()>> = in_pool(opts.threads, || {
        cont.par_iter()
            .map(|c| {
                let Some(run) = &c.run else { return Ok(()) };
                let tag = format!("beta{}_eps{}", c.cell.beta, eps_tag(c.cell.epsilon));
                let samples = run.trajectory.as_ref().map_or(&[][..], |t| &t.samples[..]);
                analysis::export_continuous_csv(samples, &cells_dir.join(format!("continuous_{tag}.csv")))
            })
            .collect()
    })?;
    cont_files.into_iter().collect::<Result<()>>()?;
    for d in &disc {
        for (p, rec) in &d.records {
            let path = cells_dir.join(format!("discrete_eps{}_{}.csv", eps_tag(d.cell.epsilon), p.name()));
            write_text(&path, &discrete_csv(rec))?;
        }
    }

    let cont_cells: Vec<ContinuousCell> = cont.iter().map(|c| c.cell.clone()).collect();
    let disc_cells: Vec<DiscreteCell> = disc.iter().map(|d| d.cell.clone()).collect();
    write_tables(out, &cont_cells, &disc_cells)?;

    // figures
    let figs = out.join("figures");
    for rho in [10.0, 100.0] {
        hessian_figure(&figs, rho)?;
    }
    for col in 0..3 {
        let mut series = Vec::new();
        let mut markers = Vec::new();
        for c in cont.iter().filter(|c| c.cell.column == col) {
            let Some(run) = &c.run else { continue };
            if let Some(t) = &run.trajectory {
                series.push(Series::new(format!("beta = {}, restarted", c.cell.beta), t.gap_curve()));
                markers.extend(t.restart_gaps().into_iter().skip(1));
            }
            if let Some(b) = &run.baseline {
                series.push(Series::new(format!("beta = {}, no restart", c.cell.beta), b.clone()).dashed());
            }
        }
        if !series.is_empty() {
            let style = PlotStyle {
                title: format!("continuous, eps = {}", eps[col]),
                markers,
                ..PlotStyle::default()
            };
            analysis::emit_plot(&series, &figs.join(format!("fig_continuous_eps{}.svg", eps_tag(eps[col]))), &style)?;
        }
        if let Some(d) = disc.iter().find(|d| d.cell.column == col) {
            let gap0 = d.cell.policies.first().map_or(0.0, |p| p.initial_gap);
            let series: Vec<Series> = d
                .records
                .iter()
                .filter(|(_, r)| !r.is_empty())
                .map(|(p, r)| Series::new(p.name(), iterate_curve(gap0, r)))
                .collect();
            if !series.is_empty() {
                let style = PlotStyle {
                    title: format!("algorithm, eps = {}", eps[col]),
                    x_label: "k".into(),
                    ..PlotStyle::default()
                };
                analysis::emit_plot(&series, &figs.join(format!("fig_discrete_eps{}.svg", eps_tag(eps[col]))), &style)?;
            }
        }
    }
    for gamma in [1.0, 4.0, 20.0] {
        toy_figure(&figs, gamma)?;
    }

    let report = ReproduceReport {
        checks: table_checks(&cont_cells, &disc_cells),
        continuous: cont_cells,
        discrete: disc_cells,
    };
    write_text(&out.join("report.txt"), &report.to_text())?;
    if opts.format == OutputFormat::Json {
        write_text(&out.join("report.json"), &json(&report))?;
    }
    Ok(report)
}

/// Used by the binary for `--set` handling on problems given inline.
pub fn problem_summary(p: &Problem) -> String {
    match p {
        Problem::PowerQuadratic { n, rho } => format!("power quadratic, n = {n}, rho = {rho}"),
        Problem::Diagonal(d) => format!("diagonal quadratic {d:?}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_is_already_optimal() {
        let cfg = ExperimentConfig {
            x0: crate::config::StartPoint::Explicit(vec![0.0; 3]),
            ..ExperimentConfig::default()
        };
        let run = run_continuous(&cfg).unwrap();
        assert!(run.report.already_optimal);
        assert_eq!(run.report.restarts, 0);
        assert!(run.report.to_text().contains("already optimal"));
    }

    #[test]
    fn theory_warns_when_mu_exceeds_l() {
        let p = SystemParams::new(3.0, 1.0, 20.0).unwrap();
        let r = cmd_theory(&p, 1.0, 2.0);
        // the bounds may or may not exist for mu > L, but the warning must
        if let Ok(r) = r {
            assert!(!r.warnings.is_empty());
        }
        let r = cmd_theory(&p, 1.0, 1.0).unwrap();
        assert!(r.warnings.is_empty());
        assert!((r.c * r.q - 1.0).abs() < 1e-12);
        assert!(r.tau3 <= 0.276796 && 0.276796 <= r.tau_upper);
    }

    #[test]
    fn checks_format() {
        let c = Check::relative("x".into(), 1.1, 1.0, 0.15);
        assert!(c.pass);
        assert!(c.line().starts_with("PASS x"));
        assert!(!Check::relative("y".into(), f64::NAN, 1.0, 0.15).pass);
    }
}
