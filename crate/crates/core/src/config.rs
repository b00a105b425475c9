//! Plain-text `key = value` experiment configuration.
//!
//! Lines starting with `#` are comments. Keys not listed in [`KEYS`] are
//! rejected so that typos surface as config errors rather than silently
//! falling back to defaults.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::VarianceKind;
use crate::discrete::{DiscreteConfig, RestartPolicy, RestartSemantics};
use crate::dynamics::{IntegratorOptions, SystemParams};
use crate::error::{Error, Result};
use crate::objectives::{gamma_for_oscillation, make_power_quadratic, DiagonalQuadratic, PowerQuadraticSpec};

pub const KEYS: &[&str] = &[
    "mode",
    "problem",
    "n",
    "rho",
    "diag",
    "alpha",
    "beta",
    "gamma",
    "gamma_i",
    "gamma_eps",
    "policy",
    "baseline",
    "horizon",
    "h_ode",
    "event_tolerance",
    "gradient_stop_tol",
    "h",
    "max_iters",
    "semantics",
    "x0",
    "seed",
    "fit_mode",
    "fit_t_max",
    "variance",
    "out",
    "format",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    PowerQuadratic { n: usize, rho: f64 },
    Diagonal(Vec<f64>),
}

impl Problem {
    pub fn build(&self) -> Result<DiagonalQuadratic> {
        match self {
            Problem::PowerQuadratic { n, rho } => make_power_quadratic(PowerQuadraticSpec { n: *n, rho: *rho }),
            Problem::Diagonal(d) => DiagonalQuadratic::new(d.clone()),
        }
        .map_err(|e| Error::config("problem", e.to_string()))
    }

    pub fn dim(&self) -> usize {
        match self {
            Problem::PowerQuadratic { n, .. } => *n,
            Problem::Diagonal(d) => d.len(),
        }
    }
}

/// How γ is chosen: directly, or so that mode `i` is underdamped by `ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSpec {
    Value(f64),
    Oscillation { i: u32, epsilon: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum StartPoint {
    Ones,
    Random,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    AllSamples,
    RestartPoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::config("format", format!("expected csv or json, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub problem: Problem,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: GammaSpec,
    /// Discrete runs use each listed policy; continuous runs ignore it.
    pub policies: Vec<RestartPolicy>,
    /// Continuous only: also integrate without restarts.
    pub baseline: bool,
    pub horizon: f64,
    pub integrator: IntegratorOptions,
    pub h: f64,
    pub max_iters: usize,
    pub semantics: RestartSemantics,
    pub x0: StartPoint,
    pub seed: u64,
    pub fit_mode: FitMode,
    pub fit_t_max: Option<f64>,
    pub variance: VarianceKind,
    pub out: PathBuf,
    pub format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Continuous,
            problem: Problem::PowerQuadratic { n: 3, rho: 10.0 },
            alpha: 3.0,
            beta: 6.0,
            gamma: GammaSpec::Oscillation { i: 2, epsilon: 0.1 },
            policies: vec![RestartPolicy::Speed],
            baseline: false,
            horizon: 5.0,
            integrator: IntegratorOptions::default(),
            h: 1e-3,
            max_iters: 3000,
            semantics: RestartSemantics::Collapse,
            x0: StartPoint::Ones,
            seed: 0,
            fit_mode: FitMode::AllSamples,
            fit_t_max: None,
            variance: VarianceKind::Population,
            out: PathBuf::from("out"),
            format: OutputFormat::Csv,
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse::<T>()
        .map_err(|_| Error::config(key, format!("cannot parse {v:?} as a number")))
}

fn list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| num::<f64>(key, s.trim())).collect()
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(key, format!("expected true or false, got {v:?}"))),
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Accumulates raw key/value pairs before the γ and problem rules are checked.
#[derive(Default)]
struct Raw {
    problem: Option<String>,
    n: Option<usize>,
    rho: Option<f64>,
    diag: Option<Vec<f64>>,
    gamma: Option<f64>,
    gamma_i: Option<u32>,
    gamma_eps: Option<f64>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut raw = Raw::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}", lineno + 1), format!("expected key = value, got {line:?}"))
            })?;
            cfg.apply(k.trim(), v.trim(), &mut raw)?;
        }
        cfg.finish(raw)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Applies `key=value` overrides (command-line flags win over the file).
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        let mut text = self.serialize();
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::config(o.clone(), "override must look like key=value"))?;
            let k = k.trim();
            if !KEYS.contains(&k) {
                return Err(Error::config(k, "unknown key"));
            }
            // a new γ form replaces the other one
            let drop: &[&str] = match k {
                "gamma" => &["gamma_i", "gamma_eps"],
                "gamma_i" | "gamma_eps" => &["gamma"],
                "problem" => &["n", "rho", "diag"],
                _ => &[],
            };
            text = text
                .lines()
                .filter(|l| {
                    let key = l.split('=').next().unwrap_or("").trim();
                    key != k && !drop.contains(&key)
                })
                .map(|l| format!("{l}\n"))
                .collect();
            let _ = writeln!(text, "{k} = {}", v.trim());
        }
        Self::parse(&text)
    }

    fn apply(&mut self, k: &str, v: &str, raw: &mut Raw) -> Result<()> {
        match k {
            "mode" => {
                self.mode = match v {
                    "continuous" => Mode::Continuous,
                    "discrete" => Mode::Discrete,
                    _ => return Err(Error::config(k, format!("expected continuous or discrete, got {v:?}"))),
                }
            }
            "problem" => raw.problem = Some(v.to_string()),
            "n" => raw.n = Some(num(k, v)?),
            "rho" => raw.rho = Some(num(k, v)?),
            "diag" => raw.diag = Some(list(k, v)?),
            "alpha" => self.alpha = num(k, v)?,
            "beta" => self.beta = num(k, v)?,
            "gamma" => raw.gamma = Some(num(k, v)?),
            "gamma_i" => raw.gamma_i = Some(num(k, v)?),
            "gamma_eps" => raw.gamma_eps = Some(num(k, v)?),
            "policy" => {
                self.policies = if v == "all" {
                    RestartPolicy::ALL.to_vec()
                } else {
                    v.split(',')
                        .map(|p| {
                            RestartPolicy::parse(p.trim()).ok_or_else(|| {
                                Error::config(k, format!("unknown policy {p:?}; use none, speed, warm-start or all"))
                            })
                        })
                        .collect::<Result<_>>()?
                }
            }
            "baseline" => self.baseline = flag(k, v)?,
            "horizon" => self.horizon = num(k, v)?,
            "h_ode" => self.integrator.h_ode = num(k, v)?,
            "event_tolerance" => self.integrator.event_tolerance = num(k, v)?,
            "gradient_stop_tol" => self.integrator.gradient_stop_tol = num(k, v)?,
            "h" => self.h = num(k, v)?,
            "max_iters" => self.max_iters = num(k, v)?,
            "semantics" => {
                self.semantics = match v {
                    "collapse" => RestartSemantics::Collapse,
                    "literal" => RestartSemantics::Literal,
                    _ => return Err(Error::config(k, format!("expected collapse or literal, got {v:?}"))),
                }
            }
            "x0" => {
                self.x0 = match v {
                    "ones" => StartPoint::Ones,
                    "random" => StartPoint::Random,
                    _ => StartPoint::Explicit(list(k, v)?),
                }
            }
            "seed" => self.seed = num(k, v)?,
            "fit_mode" => {
                self.fit_mode = match v {
                    "all" => FitMode::AllSamples,
                    "restarts" => FitMode::RestartPoints,
                    _ => return Err(Error::config(k, format!("expected all or restarts, got {v:?}"))),
                }
            }
            "fit_t_max" => {
                self.fit_t_max = match v {
                    "none" | "inf" => None,
                    _ => Some(num(k, v)?),
                }
            }
            "variance" => {
                self.variance = match v {
                    "population" => VarianceKind::Population,
                    "sample" => VarianceKind::Sample,
                    _ => return Err(Error::config(k, format!("expected population or sample, got {v:?}"))),
                }
            }
            "out" => self.out = PathBuf::from(v),
            "format" => self.format = v.parse()?,
            _ => return Err(Error::config(k, "unknown key")),
        }
        Ok(())
    }

    fn finish(&mut self, raw: Raw) -> Result<()> {
        let problem = raw.problem.as_deref().unwrap_or(match raw.diag {
            Some(_) => "diagonal",
            None => "power-quadratic",
        });
        self.problem = match problem {
            "power-quadratic" => {
                if raw.diag.is_some() {
                    return Err(Error::config("diag", "only valid with problem = diagonal"));
                }
                Problem::PowerQuadratic {
                    n: raw.n.unwrap_or(3),
                    rho: raw.rho.unwrap_or(10.0),
                }
            }
            "diagonal" => {
                if raw.n.is_some() || raw.rho.is_some() {
                    return Err(Error::config("problem", "n and rho only apply to power-quadratic"));
                }
                Problem::Diagonal(raw.diag.ok_or_else(|| Error::config("diag", "required for problem = diagonal"))?)
            }
            other => {
                return Err(Error::config(
                    "problem",
                    format!("unknown problem {other:?}; use power-quadratic or diagonal"),
                ))
            }
        };
        self.gamma = match (raw.gamma, raw.gamma_i, raw.gamma_eps) {
            (Some(g), None, None) => GammaSpec::Value(g),
            (None, Some(i), Some(eps)) => GammaSpec::Oscillation { i, epsilon: eps },
            (None, None, None) => self.gamma,
            (Some(_), _, _) => {
                return Err(Error::config("gamma", "give either gamma or gamma_i with gamma_eps, not both"))
            }
            (None, None, Some(_)) => return Err(Error::config("gamma_i", "gamma_eps needs gamma_i")),
            (None, Some(_), None) => return Err(Error::config("gamma_eps", "gamma_i needs gamma_eps")),
        };
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |k: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::config(k, format!("must be a finite number > 0, got {x}")))
            }
        };
        pos("alpha", self.alpha)?;
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::config("beta", format!("must be >= 0, got {}", self.beta)));
        }
        match self.gamma {
            GammaSpec::Value(g) => pos("gamma", g)?,
            GammaSpec::Oscillation { i, epsilon } => {
                pos("gamma_eps", epsilon)?;
                if i as usize >= self.problem.dim() {
                    return Err(Error::config("gamma_i", format!("must be < problem dimension {}", self.problem.dim())));
                }
                if !matches!(self.problem, Problem::PowerQuadratic { .. }) {
                    return Err(Error::config("gamma_i", "the oscillation rule needs problem = power-quadratic"));
                }
            }
        }
        match &self.problem {
            Problem::PowerQuadratic { n, rho } => {
                if *n == 0 {
                    return Err(Error::config("n", "must be >= 1"));
                }
                if !(*rho > 1.0 && rho.is_finite()) {
                    return Err(Error::config("rho", format!("must be > 1, got {rho}")));
                }
            }
            Problem::Diagonal(d) => {
                if d.is_empty() || d.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                    return Err(Error::config("diag", "entries must be finite and > 0"));
                }
            }
        }
        if self.policies.is_empty() {
            return Err(Error::config("policy", "at least one policy is required"));
        }
        pos("horizon", self.horizon)?;
        pos("h_ode", self.integrator.h_ode)?;
        pos("event_tolerance", self.integrator.event_tolerance)?;
        if !(self.integrator.gradient_stop_tol >= 0.0) {
            return Err(Error::config("gradient_stop_tol", "must be >= 0"));
        }
        pos("h", self.h)?;
        if let StartPoint::Explicit(x) = &self.x0 {
            if x.len() != self.problem.dim() {
                return Err(Error::config(
                    "x0",
                    format!("has {} entries, problem dimension is {}", x.len(), self.problem.dim()),
                ));
            }
        }
        if let Some(t) = self.fit_t_max {
            if t.is_nan() {
                return Err(Error::config("fit_t_max", "must be a number"));
            }
        }
        Ok(())
    }

    /// Canonical text form; `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("mode", match self.mode {
            Mode::Continuous => "continuous",
            Mode::Discrete => "discrete",
        }
        .into());
        match &self.problem {
            Problem::PowerQuadratic { n, rho } => {
                kv("problem", "power-quadratic".into());
                kv("n", n.to_string());
                kv("rho", rho.to_string());
            }
            Problem::Diagonal(d) => {
                kv("problem", "diagonal".into());
                kv("diag", join(d));
            }
        }
        kv("alpha", self.alpha.to_string());
        kv("beta", self.beta.to_string());
        match self.gamma {
            GammaSpec::Value(g) => kv("gamma", g.to_string()),
            GammaSpec::Oscillation { i, epsilon } => {
                kv("gamma_i", i.to_string());
                kv("gamma_eps", epsilon.to_string());
            }
        }
        kv("policy", self.policies.iter().map(|p| p.name()).collect::<Vec<_>>().join(","));
        kv("baseline", self.baseline.to_string());
        kv("horizon", self.horizon.to_string());
        kv("h_ode", self.integrator.h_ode.to_string());
        kv("event_tolerance", self.integrator.event_tolerance.to_string());
        kv("gradient_stop_tol", self.integrator.gradient_stop_tol.to_string());
        kv("h", self.h.to_string());
        kv("max_iters", self.max_iters.to_string());
        kv("semantics", match self.semantics {
            RestartSemantics::Collapse => "collapse",
            RestartSemantics::Literal => "literal",
        }
        .into());
        kv("x0", match &self.x0 {
            StartPoint::Ones => "ones".into(),
            StartPoint::Random => "random".into(),
            StartPoint::Explicit(x) => join(x),
        });
        kv("seed", self.seed.to_string());
        kv("fit_mode", match self.fit_mode {
            FitMode::AllSamples => "all",
            FitMode::RestartPoints => "restarts",
        }
        .into());
        kv("fit_t_max", self.fit_t_max.map_or("none".into(), |t| t.to_string()));
        kv("variance", match self.variance {
            VarianceKind::Population => "population",
            VarianceKind::Sample => "sample",
        }
        .into());
        kv("out", self.out.display().to_string());
        kv("format", match self.format {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
        .into());
        s
    }

    pub fn gamma_value(&self) -> Result<f64> {
        match (self.gamma, &self.problem) {
            (GammaSpec::Value(g), _) => Ok(g),
            (GammaSpec::Oscillation { i, epsilon }, Problem::PowerQuadratic { rho, .. }) => {
                gamma_for_oscillation(self.alpha, self.beta, *rho, i, epsilon)
                    .map_err(|e| Error::config("gamma_eps", e.to_string()))
            }
            _ => Err(Error::config("gamma_i", "the oscillation rule needs problem = power-quadratic")),
        }
    }

    pub fn params(&self) -> Result<SystemParams> {
        SystemParams::new(self.alpha, self.beta, self.gamma_value()?).map_err(|e| Error::config("params", e.to_string()))
    }

    pub fn start_point(&self) -> Vec<f64> {
        let dim = self.problem.dim();
        match &self.x0 {
            StartPoint::Ones => vec![1.0; dim],
            StartPoint::Explicit(x) => x.clone(),
            StartPoint::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                (0..dim).map(|_| rng.random_range(-2.0..=2.0)).collect()
            }
        }
    }

    pub fn discrete(&self, policy: RestartPolicy) -> Result<DiscreteConfig> {
        let mut d = DiscreteConfig::new(self.params()?, self.h, self.max_iters, policy);
        d.semantics = self.semantics;
        d.stop_grad_tol = self.integrator.gradient_stop_tol;
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = ExperimentConfig::default();
        let s = c.serialize();
        assert_eq!(ExperimentConfig::parse(&s).unwrap(), c);
    }

    #[test]
    fn comments_and_blank_lines() {
        let c = ExperimentConfig::parse("# table 1\n\nbeta = 0 # no hessian\ngamma_i = 2\ngamma_eps = 10\n").unwrap();
        assert_eq!(c.beta, 0.0);
        assert_eq!(c.gamma, GammaSpec::Oscillation { i: 2, epsilon: 10.0 });
    }

    #[test]
    fn gamma_exclusive() {
        let e = ExperimentConfig::parse("gamma = 3\ngamma_i = 2\ngamma_eps = 1\n").unwrap_err();
        assert!(matches!(e, Error::Config { ref field, .. } if field == "gamma"));
        let e = ExperimentConfig::parse("gamma_eps = 1\n").unwrap_err();
        assert!(matches!(e, Error::Config { ref field, .. } if field == "gamma_i"));
    }

    #[test]
    fn bad_epsilon_names_field() {
        let e = ExperimentConfig::parse("gamma_i = 2\ngamma_eps = -1\n").unwrap_err();
        assert!(e.is_config_error());
        assert!(e.to_string().contains("gamma_eps"), "{e}");
    }

    #[test]
    fn unknown_key() {
        let e = ExperimentConfig::parse("alhpa = 3\n").unwrap_err();
        assert!(e.to_string().contains("alhpa"));
    }

    #[test]
    fn overrides_win() {
        let c = ExperimentConfig::default();
        let o = c.with_overrides(&["gamma=20".into(), "beta=1".into()]).unwrap();
        assert_eq!(o.gamma, GammaSpec::Value(20.0));
        assert_eq!(o.beta, 1.0);
        let back = o.with_overrides(&["gamma_i=1".into(), "gamma_eps=0.5".into()]).unwrap();
        assert_eq!(back.gamma, GammaSpec::Oscillation { i: 1, epsilon: 0.5 });
    }

    #[test]
    fn reference_gamma() {
        let c = ExperimentConfig::default();
        assert!((c.gamma_value().unwrap() - 909.1225).abs() < 1e-9);
    }

    #[test]
    fn random_start_is_seeded() {
        let c = ExperimentConfig::parse("x0 = random\nseed = 7\n").unwrap();
        assert_eq!(c.start_point(), c.start_point());
        let d = c.with_overrides(&["seed=8".into()]).unwrap();
        assert_ne!(c.start_point(), d.start_point());
        assert!(c.start_point().iter().all(|x| x.abs() <= 2.0));
    }
}
