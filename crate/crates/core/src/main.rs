use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bpea_core::baselines::NoiseKind;
use bpea_core::bpea::{conditional_leakage_noisy, Mechanism, PrivacyRequirement, SolverMargin};
use bpea_core::harness::{
    calibration_scan, load_trace, run_tradeoff_on, save_traces, sweep_curves, synthesize_traces,
    write_curves, write_results, write_trace_results, AccessLog, ExperimentConfig, PolicyKind,
    TraceSets,
};
use bpea_core::leakage::{conditional_leakage, Precision};
use bpea_core::oracle::{empirical_conditional_leakage, grid_attacker_best, OracleConfig};
use bpea_core::streaming::SessionConfig;
use bpea_core::Error;

const EXIT_INVALID: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

/// Viewpoint-leakage analysis and B-PEA noise for proactive VR streaming.
#[derive(Parser)]
#[command(name = "bpea", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Leakage probability for an uploaded error, optionally with noise.
    Leakage {
        /// Prediction error in radians (`0.3`, `0.5pi`).
        #[arg(long, value_parser = parse_angle)]
        e: f64,
        /// Noise added to the uploaded error.
        #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
        n: Option<f64>,
        #[arg(long, value_parser = parse_angle, default_value = "0.1pi")]
        eps: f64,
        /// Report whether the leakage meets this requirement.
        #[arg(long)]
        q: Option<f64>,
    },
    /// Optimal noise for a prediction error and requirement.
    SolveNoise {
        #[arg(long, value_parser = parse_angle)]
        e: f64,
        #[arg(long)]
        q: f64,
        #[arg(long, value_parser = parse_angle, default_value = "0.1pi")]
        eps: f64,
        #[arg(long, default_value_t = 1e-4)]
        tau: f64,
    },
    /// Monte-Carlo attacker, and optionally the grid-search attacker.
    AttackSim {
        #[arg(long, value_parser = parse_angle)]
        e: f64,
        #[arg(long, value_parser = parse_angle, allow_hyphen_values = true, default_value = "0")]
        n: f64,
        #[arg(long, value_parser = parse_angle, default_value = "0.1pi")]
        eps: f64,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also search a sphere grid of this resolution for the best guess.
        #[arg(long)]
        grid_resolution: Option<f64>,
    },
    /// Smallest baseline noise scale meeting a requirement.
    Calibrate {
        #[arg(long)]
        q: f64,
        #[arg(long, value_enum, default_value = "both")]
        kind: KindArg,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Full privacy-utility experiment, written as CSV.
    Tradeoff {
        #[arg(long)]
        out: PathBuf,
        /// Also write uncalibrated privacy-utility curves here.
        #[arg(long)]
        curves: Option<PathBuf>,
        /// Also write one row per evaluated trace here.
        #[arg(long)]
        per_trace: Option<PathBuf>,
        /// Requirements to evaluate, comma separated (default 0, 0.05, ..., 1).
        #[arg(long, value_delimiter = ',')]
        q: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', value_parser = parse_policy)]
        policies: Option<Vec<PolicyKind>>,
        #[arg(long, default_value_t = 1e-4)]
        tau: f64,
        #[arg(long, default_value_t = SessionConfig::DEFAULT_BUDGET_MBIT)]
        budget_mbit: f64,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Write synthetic traces as CSV.
    GenTraces {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        concentration: Option<f64>,
        #[command(flatten)]
        data: DataArgs,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long, value_parser = parse_angle, default_value = "0.1pi")]
    eps: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Read traces from this CSV instead of synthesising them.
    #[arg(long)]
    traces: Option<PathBuf>,
    #[arg(long, default_value_t = 48)]
    users: u32,
    #[arg(long, default_value_t = 5)]
    train_videos: u32,
    #[arg(long, default_value_t = 4)]
    eval_videos: u32,
    #[arg(long, default_value_t = 60)]
    gops: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Gaussian,
    Laplace,
    Both,
}

impl KindArg {
    fn kinds(self) -> Vec<NoiseKind> {
        match self {
            KindArg::Gaussian => vec![NoiseKind::Gaussian],
            KindArg::Laplace => vec![NoiseKind::Laplace],
            KindArg::Both => vec![NoiseKind::Gaussian, NoiseKind::Laplace],
        }
    }
}

/// Accepts plain radians or a multiple of pi: `0.3`, `0.1pi`, `pi`.
fn parse_angle(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let value = match t.strip_suffix("pi") {
        Some("") => PI,
        Some("-") => -PI,
        Some(k) => k.trim().parse::<f64>().map_err(|e| e.to_string())? * PI,
        None => t.parse::<f64>().map_err(|e| e.to_string())?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("`{s}` is not a finite angle"))
    }
}

fn parse_policy(s: &str) -> Result<PolicyKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Failures that map to a dedicated exit status.
enum Failure {
    Invalid(Error),
    Other(Error),
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        match err.root() {
            Error::InvalidParameter { .. }
            | Error::NoiseOutOfRange { .. }
            | Error::UnknownName { .. }
            | Error::Empty(_) => Failure::Invalid(err),
            _ => Failure::Other(err),
        }
    }
}

impl DataArgs {
    fn config(&self) -> Result<ExperimentConfig, Error> {
        Ok(ExperimentConfig {
            eps: Precision::new(self.eps)?,
            num_users: self.users,
            train_videos: self.train_videos,
            eval_videos: self.eval_videos,
            gops_per_video: self.gops,
            seed: self.seed,
            ..ExperimentConfig::default()
        })
    }

    fn traces(&self, cfg: &ExperimentConfig) -> Result<TraceSets, Error> {
        match &self.traces {
            Some(path) => Ok(TraceSets::split(cfg, load_trace(path)?)),
            None => synthesize_traces(cfg),
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Leakage { e, n, eps, q } => {
            let eps = Precision::new(eps)?;
            let p = match n {
                Some(n) => conditional_leakage_noisy(e, n, eps)?,
                None => conditional_leakage(e, eps)?,
            };
            println!("leakage {p}");
            if let Some(q) = q {
                let q = PrivacyRequirement::new(q)?;
                println!("meets q = {}: {}", q.value(), p <= q.value());
            }
        }
        Command::SolveNoise { e, q, eps, tau } => {
            let mech = Mechanism::new(Precision::new(eps)?, PrivacyRequirement::new(q)?, SolverMargin::new(tau)?);
            let o = mech.apply(e)?;
            println!("noise {}", o.noise);
            println!("uploaded_error {}", o.uploaded);
            println!("leakage {}", o.leakage);
        }
        Command::AttackSim {
            e,
            n,
            eps,
            trials,
            seed,
            grid_resolution,
        } => {
            let eps = Precision::new(eps)?;
            let cfg = OracleConfig::new(trials, grid_resolution.unwrap_or(0.05), seed)?;
            let est = empirical_conditional_leakage(e, n, eps, &cfg)?;
            println!(
                "empirical {} +/- {} ({} trials)",
                est.value(),
                est.half_width().unwrap_or(0.0),
                trials
            );
            println!("analytic {}", conditional_leakage_noisy(e, n, eps)?);
            if grid_resolution.is_some() {
                let g = grid_attacker_best(e, eps, &cfg)?;
                println!(
                    "grid best distance {} (e = {e}), probability {} +/- {}, {} candidates",
                    g.best_distance,
                    g.prob.value(),
                    g.prob.half_width().unwrap_or(0.0),
                    g.candidates
                );
            }
        }
        Command::Calibrate { q, kind, step, data } => {
            let mut cfg = data.config()?;
            cfg.calibration_step = step;
            cfg.validate()?;
            let q = PrivacyRequirement::new(q)?;
            let traces = data.traces(&cfg)?;
            let log = AccessLog::default();
            let mut status = 0;
            for k in kind.kinds() {
                let r = calibration_scan(&cfg, &traces.train, k, &log)?.calibrate(q);
                match r.scale {
                    Some(s) => println!(
                        "{} scale {} leakage {} after {} evaluations",
                        k.name(),
                        s.value(),
                        r.achieved_leakage,
                        r.search_evals
                    ),
                    None => {
                        println!(
                            "{} infeasible: leakage {} at the largest scale",
                            k.name(),
                            r.achieved_leakage
                        );
                        status = EXIT_INFEASIBLE;
                    }
                }
            }
            return Ok(status);
        }
        Command::Tradeoff {
            out,
            curves,
            per_trace,
            q,
            policies,
            tau,
            budget_mbit,
            data,
        } => {
            let mut cfg = data.config()?;
            if let Some(q) = q {
                cfg.q_grid = q;
            }
            if let Some(p) = policies {
                cfg.policies = p;
            }
            cfg.tau = SolverMargin::new(tau)?;
            cfg.session = SessionConfig::with_budget(budget_mbit)?;
            cfg.output = Some(out.clone());
            cfg.validate()?;
            let traces = data.traces(&cfg)?;
            let report = run_tradeoff_on(&cfg, &traces)?;
            write_results(&report.rows, &out)?;
            if let Some(path) = per_trace {
                write_trace_results(&report.trace_rows, &path)?;
            }
            if let Some(path) = curves {
                write_curves(&sweep_curves(&cfg, &traces)?, &path)?;
            }
            for c in report.calibrations.iter().filter(|c| !c.result.is_feasible()) {
                eprintln!(
                    "q = {}: {} infeasible, evaluated at scale {}",
                    c.q,
                    c.result.kind.name(),
                    c.evaluated_scale.value()
                );
            }
            if report.any_infeasible() {
                return Ok(EXIT_INFEASIBLE);
            }
        }
        Command::GenTraces {
            out,
            concentration,
            data,
        } => {
            let mut cfg = data.config()?;
            if let Some(k) = concentration {
                cfg.synthesis.concentration = k;
            }
            let traces = synthesize_traces(&cfg)?;
            let all: Vec<_> = traces.all().cloned().collect();
            save_traces(&all, &out)?;
            println!("wrote {} traces to {}", all.len(), out.display());
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
