use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use infinitesimal::experiment::{
    self, ExperimentConfig, GridSpec, InitialSpec, McRequest, RunError, RunResult,
};
use infinitesimal::{eigenpair, GaussianState};

#[derive(Parser)]
#[command(name = "infsim", version, about = "Fisher infinitesimal model with quadratic selection")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_parser = ["weak", "strong"])]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Iterate the grid solver and fit convergence rates.
    Simulate {
        /// Inclusive generation window used for every rate fit, e.g. `10,150`.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        fit_window: Option<Vec<usize>>,
    },
    /// Closed-form trajectory of a Gaussian initial state.
    Oracle {
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        mass: f64,
        /// Mean vector, comma separated; its length sets the dimension.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0")]
        mean: Vec<f64>,
        #[arg(long)]
        sigma2: f64,
        #[arg(long, default_value_t = 40)]
        n: usize,
    },
    /// Print the Gaussian eigenpair as `alpha,dim,lambda,sigma2,k_bar,r_bar`.
    Eigen {
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 1)]
        dim: usize,
    },
    /// Monte Carlo profile ratios F_n(x)/F_n(0) against the grid solver.
    PedigreeMc {
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-2,-1,1,2")]
        x: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// `paper-step`, `eigen` or `gaussian:MU:SIGMA2`.
        #[arg(long, default_value = "paper-step")]
        initial: String,
        /// Comparison grid `X_MIN:X_MAX:DX`.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
    },
    /// Contraction, incompatibility and moment-bound checks.
    Diagnose {
        #[arg(long)]
        alpha: Option<f64>,
    },
}

fn base_config(c: &Common) -> RunResult<Option<ExperimentConfig>> {
    if let Some(path) = &c.config {
        return ExperimentConfig::load(path).map(Some);
    }
    match &c.preset {
        Some(p) => Ok(Some(ExperimentConfig::preset(p.parse().map_err(RunError::Config)?))),
        None => Ok(None),
    }
}

fn resolve_alpha(flag: Option<f64>, base: &Option<ExperimentConfig>) -> RunResult<f64> {
    flag.or(base.as_ref().map(|c| c.alpha))
        .ok_or_else(|| RunError::Config("--alpha is required without --config or --preset".into()))
}

fn out_dir(c: &Common, base: &Option<ExperimentConfig>, fallback: &str) -> PathBuf {
    c.out.clone().or(base.as_ref().map(|b| b.outputs.clone())).unwrap_or_else(|| PathBuf::from(fallback))
}

fn parse_initial(s: &str, alpha: f64) -> RunResult<InitialSpec> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |v: &str| v.parse::<f64>().map_err(|e| RunError::Config(format!("--initial {s}: {e}")));
    match parts.as_slice() {
        ["paper-step"] => Ok(InitialSpec::PaperStep),
        ["eigen"] => {
            let e = eigenpair(alpha, 1).map_err(|e| RunError::Config(e.to_string()))?;
            Ok(InitialSpec::Gaussian { mu: 0.0, sigma2: e.sigma2, mass: 1.0 })
        }
        ["gaussian", mu, s2] => Ok(InitialSpec::Gaussian { mu: num(mu)?, sigma2: num(s2)?, mass: 1.0 }),
        _ => Err(RunError::Config(format!("--initial {s}: expected paper-step, eigen or gaussian:MU:SIGMA2"))),
    }
}

fn parse_grid(s: &str) -> RunResult<GridSpec> {
    let v: Vec<f64> = s
        .split(':')
        .map(|t| t.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| RunError::Config(format!("--grid {s}: {e}")))?;
    match v.as_slice() {
        [x_min, x_max, dx] => Ok(GridSpec { x_min: *x_min, x_max: *x_max, dx: *dx }),
        _ => Err(RunError::Config(format!("--grid {s}: expected X_MIN:X_MAX:DX"))),
    }
}

fn run(cli: Cli) -> RunResult<()> {
    let c = &cli.common;
    let base = base_config(c)?;
    match cli.cmd {
        Command::Simulate { fit_window } => {
            let mut cfg = base.ok_or_else(|| RunError::Config("simulate needs --config or --preset".into()))?;
            if let Some(out) = &c.out {
                cfg.outputs = out.clone();
            }
            if let Some(seed) = c.seed {
                cfg.seed = seed;
            }
            if let Some(w) = fit_window {
                cfg.fit_window = Some([w[0], w[1]]);
            }
            cfg.validate()?;
            let out = experiment::run_simulate(&cfg)?;
            let last = out.trajectory.records.last().expect("generation 0 is always recorded");
            println!(
                "n = {}  lambda_n = {:.6}  mean = {:.6}  variance = {:.6}",
                last.n, last.lambda_n, last.mean, last.variance
            );
            for r in &out.rates {
                match &r.fit {
                    Ok(f) => println!("rate {:<11} {:.4}  window {}..={}", r.quantity, f.rate, f.window.0, f.window.1),
                    Err(e) => println!("rate {:<11} unavailable ({e})", r.quantity),
                }
            }
            println!("wrote {}", cfg.outputs.display());
        }
        Command::Oracle { alpha, mass, mean, sigma2, n } => {
            let alpha = resolve_alpha(alpha, &base)?;
            let s0 = GaussianState::new(mass, mean, sigma2).map_err(|e| RunError::Config(e.to_string()))?;
            let dir = out_dir(c, &base, "out");
            experiment::run_oracle(alpha, &s0, n, &dir)?;
            println!("wrote {}", dir.join("oracle.csv").display());
        }
        Command::Eigen { alpha, dim } => {
            let alpha = resolve_alpha(alpha, &base)?;
            let row = experiment::run_eigen(alpha, dim, c.out.as_deref())?;
            println!("{row}");
        }
        Command::PedigreeMc { alpha, n, x, samples, initial, grid } => {
            let alpha = resolve_alpha(alpha, &base)?;
            let grid = match grid {
                Some(g) => parse_grid(&g)?,
                None => base.as_ref().map_or(GridSpec::paper(), |b| b.grid),
            };
            let req = McRequest {
                alpha,
                n,
                xs: x,
                n_samples: samples,
                seed: c.seed.or(base.as_ref().map(|b| b.seed)).unwrap_or(0),
                initial: parse_initial(&initial, alpha)?,
                grid,
            };
            let dir = out_dir(c, &base, "out");
            let rows = experiment::run_pedigree_mc(&req, &dir)?;
            print!("{}", experiment::mc_csv(&rows));
        }
        Command::Diagnose { alpha } => {
            let alpha = resolve_alpha(alpha, &base)?;
            let seed = c.seed.or(base.as_ref().map(|b| b.seed)).unwrap_or(0);
            let dir = out_dir(c, &base, "out");
            let (checks, report) = experiment::run_diagnose(alpha, seed, &dir)?;
            print!("{report}");
            let bad: Vec<String> = checks.iter().filter(|c| !c.ok).map(|c| c.name.clone()).collect();
            if !bad.is_empty() {
                return Err(RunError::Violations(bad));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("infsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
