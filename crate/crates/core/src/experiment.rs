//! Configuration and runners behind the command-line subcommands.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, fit_geometric_rate, Check, RateFit, W2CheckKind};
use crate::error::Error;
use crate::gaussian_oracle::{eigenpair, gaussian_trajectory, Eigenpair, GaussianState};
use crate::grid::{self, fmt17, Grid, GridDistribution};
use crate::operators::{iterate, Mixer, Mode, ModelParams, Trajectory};
use crate::pedigree::{mc_profile_ratios, InitialDatum, McOptions};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("violated checks: {}", .0.join(", "))]
    Violations(Vec<String>),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Numerical(_) | Self::Violations(_) => 3,
            Self::Config(_) | Self::Io { .. } => 2,
        }
    }
}

pub type RunResult<T> = std::result::Result<T, RunError>;

fn config_err(e: Error) -> RunError {
    RunError::Config(e.to_string())
}

fn write(path: &Path, text: &str) -> RunResult<()> {
    fs::write(path, text).map_err(|source| RunError::Io { path: path.to_owned(), source })
}

fn ensure_dir(dir: &Path) -> RunResult<()> {
    fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.to_owned(), source })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
}

impl GridSpec {
    pub fn paper() -> Self {
        Self { x_min: -15.0, x_max: 60.0, dx: 0.001 }
    }

    pub fn build(&self) -> crate::Result<Grid> {
        Grid::new(self.x_min, self.x_max, self.dx)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialSpec {
    /// Heights (30, 20, 50, 30) on [-7,-3], [7.5,12.5], [30,40], [52.5,57.5], normalised.
    PaperStep,
    /// `[lo, hi, height]` triples, normalised.
    Step { pieces: Vec<[f64; 3]> },
    Gaussian {
        mu: f64,
        sigma2: f64,
        #[serde(default = "one")]
        mass: f64,
    },
    /// Two-column `x,value` file on the configured grid.
    Csv { path: PathBuf },
}

impl InitialSpec {
    fn pieces(&self) -> Option<Vec<(f64, f64, f64)>> {
        match self {
            Self::PaperStep => match InitialDatum::paper_step() {
                InitialDatum::Step(p) => Some(p),
                _ => None,
            },
            Self::Step { pieces } => Some(pieces.iter().map(|p| (p[0], p[1], p[2])).collect()),
            _ => None,
        }
    }

    pub fn build(&self, grid: Grid) -> RunResult<GridDistribution> {
        if let Some(p) = self.pieces() {
            return Ok(grid::normalize(&GridDistribution::step(grid, &p).map_err(config_err)?).map_err(config_err)?);
        }
        match self {
            Self::Gaussian { mu, sigma2, mass } => {
                if !(*mass > 0.0) {
                    return Err(RunError::Config(format!("initial.mass must be positive, got {mass}")));
                }
                Ok(grid::gaussian_profile(grid, *mu, *sigma2).map_err(config_err)?.scale(*mass))
            }
            Self::Csv { path } => {
                let text = fs::read_to_string(path).map_err(|source| RunError::Io { path: path.clone(), source })?;
                GridDistribution::from_csv(grid, &text)
                    .map_err(|e| RunError::Config(format!("initial.path {}: {e}", path.display())))
            }
            _ => unreachable!(),
        }
    }

    /// The exact initial datum used by the pedigree Monte Carlo.
    pub fn datum(&self) -> RunResult<InitialDatum> {
        if let Some(p) = self.pieces() {
            let z: f64 = p.iter().map(|(lo, hi, h)| (hi - lo) * h).sum();
            if !(z > 0.0) {
                return Err(RunError::Config("step datum has zero mass".into()));
            }
            return Ok(InitialDatum::Step(p.into_iter().map(|(lo, hi, h)| (lo, hi, h / z)).collect()));
        }
        match self {
            Self::Gaussian { mu, sigma2, .. } => {
                if !(*sigma2 > 0.0) {
                    return Err(config_err(Error::NonPositiveVariance(*sigma2)));
                }
                Ok(InitialDatum::Gaussian { mu: *mu, sigma2: *sigma2 })
            }
            _ => Err(RunError::Config("pedigree Monte Carlo needs a step or gaussian initial datum".into())),
        }
    }
}

fn one() -> f64 {
    1.0
}

fn default_outputs() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Weak,
    Strong,
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "weak" => Ok(Self::Weak),
            "strong" => Ok(Self::Strong),
            _ => Err(format!("unknown preset {s:?}, expected weak or strong")),
        }
    }
}

/// Tables (`grid`, `initial`) come last so the struct serialises to valid TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub alpha: f64,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default)]
    pub mode: Mode,
    pub n_iters: usize,
    #[serde(default)]
    pub snapshot_generations: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_outputs")]
    pub outputs: PathBuf,
    /// Inclusive `[n_lo, n_hi]` used for every rate fit instead of the auto-window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<[usize; 2]>,
    pub grid: GridSpec,
    pub initial: InitialSpec,
}

impl ExperimentConfig {
    pub fn preset(p: Preset) -> Self {
        let (alpha, n_iters, snaps, out) = match p {
            Preset::Weak => (0.015, 150, vec![0, 1, 2, 3, 4, 7, 150], "out/weak"),
            Preset::Strong => (0.4, 15, vec![0, 1, 2, 15], "out/strong"),
        };
        Self {
            alpha,
            beta: 1.0,
            mode: Mode::NonOverlapping,
            n_iters,
            snapshot_generations: snaps,
            seed: 0,
            outputs: PathBuf::from(out),
            fit_window: None,
            grid: GridSpec::paper(),
            initial: InitialSpec::PaperStep,
        }
    }

    pub fn from_toml(text: &str) -> RunResult<Self> {
        let c: Self = toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> RunResult<Self> {
        let text = fs::read_to_string(path).map_err(|source| RunError::Io { path: path.to_owned(), source })?;
        Self::from_toml(&text).map_err(|e| match e {
            RunError::Config(m) => RunError::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> RunResult<()> {
        self.params()?;
        let g = self.grid.build().map_err(config_err)?;
        if let Some(p) = self.initial.pieces() {
            for (lo, hi, h) in p {
                if !(lo < hi && h >= 0.0 && lo >= g.x_min && hi <= g.x_max) {
                    return Err(RunError::Config(format!(
                        "initial step piece [{lo}, {hi}] x {h} does not fit the grid [{}, {}]",
                        g.x_min, g.x_max
                    )));
                }
            }
        }
        if let InitialSpec::Gaussian { sigma2, .. } = self.initial {
            if !(sigma2 > 0.0) {
                return Err(config_err(Error::NonPositiveVariance(sigma2)));
            }
        }
        if let Some([lo, hi]) = self.fit_window {
            if hi < lo {
                return Err(RunError::Config(format!("fit_window [{lo}, {hi}] is empty")));
            }
        }
        Ok(())
    }

    pub fn params(&self) -> RunResult<ModelParams> {
        ModelParams::new(self.alpha, self.beta, self.mode).map_err(config_err)
    }
}

/// One line of `rates.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub quantity: &'static str,
    pub fit: std::result::Result<RateFit, String>,
}

pub const RATES_HEADER: &str = "quantity,rate,log_intercept,n_lo,n_hi,residual_rms,window";

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub trajectory: Trajectory,
    /// Reference `(growth factor, mean, variance)`; absent in overlapping mode.
    pub reference: Option<(f64, f64, f64)>,
    pub eigen: Eigenpair,
    pub rates: Vec<RateRow>,
}

impl SimulationOutput {
    pub fn rate(&self, quantity: &str) -> Option<f64> {
        self.rates.iter().find(|r| r.quantity == quantity).and_then(|r| r.fit.as_ref().ok()).map(|f| f.rate)
    }
}

pub fn eigen_row_header() -> &'static str {
    "alpha,dim,lambda,sigma2,k_bar,r_bar"
}

pub fn eigen_row(e: &Eigenpair) -> String {
    format!("{},{},{},{},{},{}", e.alpha, e.dim, e.lambda, e.sigma2, e.k_bar, e.r_bar)
}

pub fn rate_rows(tr: &Trajectory, reference: (f64, f64, f64), window: Option<[usize; 2]>) -> Vec<RateRow> {
    let (_, mu, s2) = reference;
    let series: [(&'static str, Vec<(usize, f64)>); 5] = [
        ("kl", tr.records.iter().map(|r| (r.n, r.kl_to_eigen)).collect()),
        ("w2_squared", tr.records.iter().map(|r| (r.n, r.w2_to_eigen * r.w2_to_eigen)).collect()),
        ("mass", tr.records.iter().skip(1).map(|r| (r.n, r.eps_mass)).collect()),
        ("variance", tr.records.iter().map(|r| (r.n, (r.variance - s2).abs())).collect()),
        ("mean", tr.records.iter().map(|r| (r.n, (r.mean - mu).abs())).collect()),
    ];
    series
        .into_iter()
        .map(|(quantity, e)| RateRow {
            quantity,
            fit: fit_geometric_rate(&e, window.map(|[a, b]| (a, b))).map_err(|e| e.to_string()),
        })
        .collect()
}

fn rates_csv(rows: &[RateRow], window: Option<[usize; 2]>) -> String {
    let mode = if window.is_some() { "fixed" } else { "auto" };
    let mut s = format!("{RATES_HEADER}\n");
    for r in rows {
        match &r.fit {
            Ok(f) => writeln!(
                s,
                "{},{},{},{},{},{},{mode}",
                r.quantity,
                fmt17(f.rate),
                fmt17(f.log_intercept),
                f.window.0,
                f.window.1,
                fmt17(f.residual_rms)
            ),
            Err(e) => writeln!(s, "{},NaN,NaN,,,NaN,{mode}: {}", r.quantity, e.replace(',', ";")),
        }
        .unwrap();
    }
    s
}

/// Grid run of `config` without touching the filesystem.
pub fn simulate(config: &ExperimentConfig) -> RunResult<SimulationOutput> {
    config.validate()?;
    let params = config.params()?;
    let grid = config.grid.build().map_err(config_err)?;
    let f0 = config.initial.build(grid)?;
    let eigen = eigenpair(config.alpha, 1).map_err(config_err)?;
    // flat selection: every G_{mu,2} is stationary; the initial centre of mass is kept
    let mu_ref = if config.alpha == 0.0 { f0.mean()? } else { 0.0 };
    let reference = match config.mode {
        Mode::NonOverlapping => Some((config.beta * eigen.lambda, mu_ref, eigen.sigma2)),
        Mode::Overlapping => None,
    };
    let state = match reference {
        Some((l, m, v)) => Some(GaussianState::scalar(l, m, v)?),
        None => None,
    };
    let trajectory = iterate(&f0, &params, config.n_iters, state.as_ref(), &config.snapshot_generations)?;
    let rates = match reference {
        Some(r) => rate_rows(&trajectory, r, config.fit_window),
        None => Vec::new(),
    };
    Ok(SimulationOutput { trajectory, reference, eigen, rates })
}

fn summary_csv(config: &ExperimentConfig, out: &SimulationOutput) -> String {
    let last = out.trajectory.records.last().expect("trajectory has generation 0");
    let mut s = String::from("key,value\n");
    let mut kv = |k: &str, v: String| writeln!(s, "{k},{v}").unwrap();
    kv("alpha", config.alpha.to_string());
    kv("beta", config.beta.to_string());
    kv("n_iters", config.n_iters.to_string());
    kv("lambda_final", fmt17(last.lambda_n));
    kv("mean_final", fmt17(last.mean));
    kv("variance_final", fmt17(last.variance));
    kv("kl_final", fmt17(last.kl_to_eigen));
    if let Some((l, m, v)) = out.reference {
        kv("lambda_ref", fmt17(l));
        kv("mean_ref", fmt17(m));
        kv("variance_ref", fmt17(v));
    }
    kv("two_k_bar", fmt17(2.0 * out.eigen.k_bar));
    kv("lambda_bar_4", fmt17(out.eigen.lambda.powi(4)));
    for r in &out.rates {
        kv(&format!("rate_{}", r.quantity), r.fit.as_ref().map_or("NaN".into(), |f| fmt17(f.rate)));
    }
    s
}

/// Writes `trajectory.csv`, `profile_nXXXX.csv` snapshots, `rates.csv`, `summary.csv`
/// and `eigen.csv` into `config.outputs`.
pub fn run_simulate(config: &ExperimentConfig) -> RunResult<SimulationOutput> {
    let out = simulate(config)?;
    let dir = &config.outputs;
    ensure_dir(dir)?;
    write(&dir.join("trajectory.csv"), &out.trajectory.to_csv())?;
    for (n, shape) in &out.trajectory.snapshots {
        write(&dir.join(format!("profile_n{n:04}.csv")), &shape.to_csv())?;
    }
    write(&dir.join("rates.csv"), &rates_csv(&out.rates, config.fit_window))?;
    write(&dir.join("summary.csv"), &summary_csv(config, &out))?;
    write(&dir.join("eigen.csv"), &format!("{}\n{}\n", eigen_row_header(), eigen_row(&out.eigen)))?;
    Ok(out)
}

pub fn oracle_csv(states: &[GaussianState]) -> String {
    let d = states.first().map_or(1, |s| s.dim());
    let mut s = String::from("n,mass,variance");
    if d == 1 {
        s.push_str(",mean");
    } else {
        for i in 1..=d {
            write!(s, ",mean_{i}").unwrap();
        }
    }
    s.push('\n');
    for (n, st) in states.iter().enumerate() {
        write!(s, "{n},{},{}", fmt17(st.mass), fmt17(st.variance)).unwrap();
        for m in &st.mean {
            write!(s, ",{}", fmt17(*m)).unwrap();
        }
        s.push('\n');
    }
    s
}

/// Closed-form Gaussian trajectory, written to `dir/oracle.csv`.
pub fn run_oracle(alpha: f64, state0: &GaussianState, n: usize, dir: &Path) -> RunResult<Vec<GaussianState>> {
    if !(alpha >= 0.0) {
        return Err(config_err(Error::NegativeAlpha(alpha)));
    }
    let states = gaussian_trajectory(state0, alpha, n);
    ensure_dir(dir)?;
    write(&dir.join("oracle.csv"), &oracle_csv(&states))?;
    Ok(states)
}

pub fn run_eigen(alpha: f64, dim: usize, dir: Option<&Path>) -> RunResult<String> {
    let e = eigenpair(alpha, dim).map_err(config_err)?;
    let row = eigen_row(&e);
    if let Some(dir) = dir {
        ensure_dir(dir)?;
        write(&dir.join("eigen.csv"), &format!("{}\n{row}\n", eigen_row_header()))?;
    }
    Ok(row)
}

#[derive(Debug, Clone, PartialEq)]
pub struct McRequest {
    pub alpha: f64,
    pub n: usize,
    pub xs: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
    pub initial: InitialSpec,
    /// Grid for the deterministic comparison ratio.
    pub grid: GridSpec,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McRow {
    pub x: f64,
    pub ratio_mc: f64,
    pub std_err: f64,
    pub ratio_grid: f64,
    pub abs_z: f64,
}

pub const MC_HEADER: &str = "x,ratio_mc,std_err,ratio_grid,abs_z";

fn interpolate(f: &GridDistribution, x: f64) -> f64 {
    let g = f.grid;
    let t = (x - g.x_min) / g.dx;
    if !(t >= 0.0 && t <= (g.n_points - 1) as f64) {
        return 0.0;
    }
    let k = (t.floor() as usize).min(g.n_points - 2);
    let w = t - k as f64;
    (1.0 - w) * f.values[k] + w * f.values[k + 1]
}

/// `F_n(x) / F_n(0)` from the grid solver.
pub fn grid_profile_ratios(initial: &InitialSpec, grid: Grid, alpha: f64, n: usize, xs: &[f64]) -> RunResult<Vec<f64>> {
    let f0 = initial.build(grid)?;
    let tr = iterate(&f0, &ModelParams::with_alpha(alpha).map_err(config_err)?, n, None, &[])?;
    let at0 = interpolate(&tr.last, 0.0);
    if !(at0 > 0.0) {
        return Err(Error::ZeroDensityAtLeaf.into());
    }
    Ok(xs.iter().map(|&x| interpolate(&tr.last, x) / at0).collect())
}

pub fn pedigree_mc(req: &McRequest) -> RunResult<Vec<McRow>> {
    if !(req.alpha >= 0.0) {
        return Err(config_err(Error::NegativeAlpha(req.alpha)));
    }
    if req.n == 0 {
        return Err(RunError::Config("pedigree depth n must be at least 1".into()));
    }
    let datum = req.initial.datum()?;
    let grid = req.grid.build().map_err(config_err)?;
    let est = mc_profile_ratios(&req.xs, &datum, req.n, req.alpha, req.n_samples, req.seed, &McOptions::default())
        .map_err(|e| match e {
            Error::TreeTooLarge { .. } | Error::InsufficientPoints { .. } => config_err(e),
            e => e.into(),
        })?;
    let reference = grid_profile_ratios(&req.initial, grid, req.alpha, req.n, &req.xs)?;
    Ok(est
        .iter()
        .zip(reference)
        .map(|(e, g)| McRow {
            x: e.x,
            ratio_mc: e.ratio,
            std_err: e.std_error,
            ratio_grid: g,
            abs_z: (e.ratio - g).abs() / e.std_error,
        })
        .collect())
}

pub fn mc_csv(rows: &[McRow]) -> String {
    let mut s = format!("{MC_HEADER}\n");
    for r in rows {
        writeln!(s, "{},{},{},{},{}", r.x, fmt17(r.ratio_mc), fmt17(r.std_err), fmt17(r.ratio_grid), fmt17(r.abs_z))
            .unwrap();
    }
    s
}

pub fn run_pedigree_mc(req: &McRequest, dir: &Path) -> RunResult<Vec<McRow>> {
    let rows = pedigree_mc(req)?;
    ensure_dir(dir)?;
    write(&dir.join("pedigree_mc.csv"), &mc_csv(&rows))?;
    Ok(rows)
}

/// Slope of `log(w2_out - eps)` against `log eps` on a log-spaced sweep.
pub fn dirac_loglog_slope(h: f64, alpha: f64, eps_lo: f64, eps_hi: f64, n: usize) -> crate::Result<f64> {
    let mut pts = Vec::with_capacity(n);
    for i in 0..n {
        let eps = eps_lo * (eps_hi / eps_lo).powf(i as f64 / (n - 1) as f64);
        let (_, w) = diagnostics::dirac_selection_gap(h, eps, alpha)?;
        pts.push((eps.ln(), (w - eps).ln()));
    }
    let m = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(sxy / sxx)
}

/// Contraction, incompatibility, identity and moment checks at `alpha`.
pub fn diagnose(alpha: f64, seed: u64) -> RunResult<Vec<Check>> {
    let e = eigenpair(alpha, 1).map_err(config_err)?;
    let mut checks = Vec::new();

    let id = (e.lambda.powi(4) - (2.0 * e.k_bar).powi(2)).abs();
    checks.push(Check::le("eigen_lambda4_vs_2kbar_sq", id, 1e-12, id <= 1e-12));
    let id = (e.r_bar - 2.0 * e.k_bar * e.k_bar).abs();
    checks.push(Check::le("eigen_rbar_vs_2kbar2", id, 1e-12, id <= 1e-12));

    let g = Grid::new(-25.0, 25.0, 0.005)?;
    let mixer = Mixer::new(g);
    let w2 = |name: String, p: &GridDistribution, q: &GridDistribution, out: &mut Vec<Check>| -> RunResult<()> {
        let c = diagnostics::verify_w2_contraction_with(&mixer, p, q)?;
        let tag = match c.kind {
            W2CheckKind::Contraction => "w2_contraction",
            W2CheckKind::NonExpansive => "w2_non_expansive",
        };
        out.push(Check::le(format!("{tag}_{name}"), c.lhs, c.rhs, c.ok));
        Ok(())
    };
    w2("gauss_1_vs_4".into(), &grid::gaussian_profile(g, 0.0, 1.0)?, &grid::gaussian_profile(g, 0.0, 4.0)?, &mut checks)?;
    w2("gauss_shifted".into(), &grid::gaussian_profile(g, 0.0, 1.0)?, &grid::gaussian_profile(g, 1.0, 2.0)?, &mut checks)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..5 {
        let (p, q) = diagnostics::random_bump_pair(&mut rng, g, true)?;
        w2(format!("mixture_{i}"), &p, &q, &mut checks)?;
    }

    if alpha > 0.0 {
        let eta = 0.9f64.max(0.5 / (1.0 + alpha).powi(2) + 0.05).min(0.99);
        let theta = alpha / 4.0;
        let coef = alpha / (1.0 + alpha) * theta / ((1.0 + alpha - 2.0 * theta) * (alpha - 2.0 * theta));
        let chi = coef;
        let inputs = [
            ("eigen", grid::gaussian_profile(g, 0.0, e.sigma2)?),
            ("bumps", diagnostics::random_bump_pair(&mut rng, g, false)?.0),
        ];
        for (name, f) in inputs {
            let r = diagnostics::verify_moment_bounds(&f, alpha, eta, theta, chi)?;
            checks.push(Check::le(format!("quadratic_moment_{name}"), r.quad_lhs, r.quad_rhs, r.quad_ok()));
            checks.push(Check::le(format!("exponential_moment_{name}"), r.exp_lhs, r.exp_rhs, r.exp_ok()));
        }

        let slope = dirac_loglog_slope(1.0, alpha, 1e-8, 1e-4, 41)?;
        let dev = (slope - 0.5).abs();
        checks.push(Check::le("dirac_sqrt_eps_slope", dev, 0.02, dev <= 0.02));
    }
    Ok(checks)
}

pub fn checks_csv(checks: &[Check]) -> String {
    let mut s = format!("{}\n", Check::CSV_HEADER);
    for c in checks {
        s.push_str(&c.csv_row());
        s.push('\n');
    }
    s
}

pub fn checks_report(alpha: f64, checks: &[Check]) -> String {
    let mut s = format!("diagnostics at alpha = {alpha}\n");
    for c in checks {
        writeln!(
            s,
            "  [{}] {:<34} lhs = {:.6e}  rhs = {:.6e}  slack = {:.3e}",
            if c.ok { " ok " } else { "FAIL" },
            c.name,
            c.lhs,
            c.rhs,
            c.slack()
        )
        .unwrap();
    }
    let bad = checks.iter().filter(|c| !c.ok).count();
    writeln!(s, "{} checks, {} violations", checks.len(), bad).unwrap();
    s
}

/// Writes `checks.csv` and `report.txt`; returns the checks and the report text.
pub fn run_diagnose(alpha: f64, seed: u64, dir: &Path) -> RunResult<(Vec<Check>, String)> {
    let checks = diagnose(alpha, seed)?;
    let report = checks_report(alpha, &checks);
    ensure_dir(dir)?;
    write(&dir.join("checks.csv"), &checks_csv(&checks))?;
    write(&dir.join("report.txt"), &report)?;
    Ok((checks, report))
}
