use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use winrestart::config::{ExperimentConfig, Mode, OutputFormat};
use winrestart::dynamics::SystemParams;
use winrestart::experiments::{self, ReproduceOptions};
use winrestart::objectives::Objective;
use winrestart::Error;

#[derive(Parser)]
#[command(name = "winrestart", version, about = "Speed-restarted inertial dynamics with Hessian-driven damping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// key = value experiment file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for `x0 = random`
    #[arg(long)]
    seed: Option<u64>,
    /// Summary format: csv or json
    #[arg(long)]
    format: Option<String>,
    /// Override a config key, e.g. `--set beta=0`; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Restarted continuous trajectory with CSV, plot and regression summary
    Simulate(Common),
    /// Restart-time and convergence-rate bounds
    Theory {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        /// Gradient Lipschitz constant L
        #[arg(long = "lipschitz", visible_alias = "L")]
        lipschitz: Option<f64>,
        /// PL constant
        #[arg(long)]
        mu: Option<f64>,
    },
    /// Inertial gradient algorithm under each configured restart policy
    Discrete(Common),
    /// Full experiment grid: tables, figures and a pass/fail report
    ReproducePaper {
        #[command(flatten)]
        common: Common,
        /// epsilon of the third table column
        #[arg(long, default_value_t = 1000.0)]
        third_eps: f64,
        /// Regression window end for the continuous table; `none` for the full run
        #[arg(long, default_value = "0.7")]
        fit_t_max: String,
    },
}

fn load(common: &Common) -> winrestart::Result<ExperimentConfig> {
    let base = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let mut sets = common.set.clone();
    if let Some(out) = &common.out {
        sets.push(format!("out={}", out.display()));
    }
    if let Some(seed) = common.seed {
        sets.push(format!("seed={seed}"));
    }
    if let Some(f) = &common.format {
        sets.push(format!("format={f}"));
    }
    base.with_overrides(&sets)
}

fn run(cli: Cli) -> winrestart::Result<bool> {
    match cli.command {
        Command::Simulate(common) => {
            let mut cfg = load(&common)?;
            cfg.mode = Mode::Continuous;
            let report = experiments::cmd_simulate(&cfg)?;
            print!("{}", report.to_text());
            println!("wrote {}", cfg.out.display());
        }
        Command::Discrete(common) => {
            let mut cfg = load(&common)?;
            cfg.mode = Mode::Discrete;
            for r in experiments::cmd_discrete(&cfg)? {
                print!("{}", r.to_text());
            }
            println!("wrote {}", cfg.out.display());
        }
        Command::Theory {
            common,
            alpha,
            beta,
            gamma,
            lipschitz,
            mu,
        } => {
            let cfg = load(&common)?;
            let obj = cfg.problem.build()?;
            let base = if gamma.is_some() {
                SystemParams {
                    alpha: cfg.alpha,
                    beta: cfg.beta,
                    gamma: f64::NAN,
                }
            } else {
                cfg.params()?
            };
            let params = SystemParams {
                alpha: alpha.unwrap_or(base.alpha),
                beta: beta.unwrap_or(base.beta),
                gamma: gamma.unwrap_or(base.gamma),
            };
            let l = lipschitz.unwrap_or(obj.lipschitz());
            let mu = mu.unwrap_or(obj.pl_mu());
            let report = experiments::cmd_theory(&params, l, mu)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            match (&common.format, cfg.format) {
                (Some(_), OutputFormat::Json) => print!("{}", report.to_json()),
                (Some(_), OutputFormat::Csv) => print!("{}", report.to_csv()),
                (None, _) => print!("{}", report.to_text().lines().filter(|l| !l.starts_with("warning")).fold(
                    String::new(),
                    |acc, l| acc + l + "\n",
                )),
            }
        }
        Command::ReproducePaper {
            common,
            third_eps,
            fit_t_max,
        } => {
            let format = match &common.format {
                Some(f) => f.parse()?,
                None => OutputFormat::Csv,
            };
            let fit_t_max = match fit_t_max.as_str() {
                "none" | "inf" => None,
                v => Some(
                    v.parse::<f64>()
                        .map_err(|_| Error::Config {
                            field: "fit-t-max".into(),
                            message: format!("cannot parse {v:?}"),
                        })?,
                ),
            };
            let opts = ReproduceOptions {
                out: common.out.clone().unwrap_or_else(|| "out".into()),
                third_epsilon: third_eps,
                table1_fit_t_max: fit_t_max,
                threads: experiments::threads_from_env(),
                format,
            };
            let report = experiments::cmd_reproduce_paper(&opts)?;
            print!("{}", report.to_text());
            println!("wrote {}", opts.out.display());
            return Ok(report.cell_errors() == 0);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
