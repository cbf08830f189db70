//! The mixing operator `B`, selection, `T = beta e^{-m} B` and the generation driver.
//!
//! `B` is evaluated as one zero-padded FFT pipeline: the self-convolution `F * F`
//! lives on the half-spaced midpoint grid `u_j = x_min + j dx / 2`, and every
//! midpoint is smeared by the standard normal kernel sampled on that same
//! half-spaced grid, so no midpoint mass is dropped and discrete mass and centre
//! of mass are preserved to round-off.

use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{self, Transform};
use crate::gaussian_oracle::GaussianState;
use crate::grid::{self, mass, normalize, Grid, GridDistribution, ZERO_MASS};

/// Kernel support in standard deviations; G(12) / G(0) < 1e-31.
const KERNEL_HALF_WIDTH: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    NonOverlapping,
    Overlapping,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub mode: Mode,
}

impl ModelParams {
    pub fn new(alpha: f64, beta: f64, mode: Mode) -> Result<Self> {
        if !(alpha >= 0.0) {
            return Err(Error::NegativeAlpha(alpha));
        }
        if !(beta > 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { alpha, beta, mode })
    }

    pub fn with_alpha(alpha: f64) -> Result<Self> {
        Self::new(alpha, 1.0, Mode::NonOverlapping)
    }
}

/// Precomputed transform and kernel spectrum for `B` on a fixed grid.
pub struct Mixer {
    grid: Grid,
    offset: usize,
    transform: Transform,
    kernel_hat: Vec<Complex<f64>>,
}

impl Mixer {
    pub fn new(grid: Grid) -> Self {
        let half = grid.dx / 2.0;
        let k = (KERNEL_HALF_WIDTH / half).ceil() as usize;
        let c = (2.0 * std::f64::consts::PI).sqrt().recip();
        let kernel: Vec<f64> = (0..=2 * k)
            .map(|i| {
                let z = (i as f64 - k as f64) * half;
                c * (-0.5 * z * z).exp()
            })
            .collect();
        let n = grid.n_points;
        let transform = Transform::new(2 * n - 1 + kernel.len() - 1);
        let kernel_hat = transform.forward_real(&kernel);
        Self { grid, offset: k, transform, kernel_hat }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn apply(&self, f: &GridDistribution) -> Result<GridDistribution> {
        if f.grid != self.grid {
            return Err(Error::GridMismatch);
        }
        let m = mass(f);
        if !(m > ZERO_MASS) {
            return Err(Error::ZeroMass);
        }
        let spec: Vec<_> = self
            .transform
            .forward_real(&f.values)
            .into_iter()
            .zip(&self.kernel_hat)
            .map(|(a, g)| a * a * g)
            .collect();
        let full = self.transform.inverse_real(spec);
        let dx = self.grid.dx;
        let scale = dx * dx / m;
        let values = (0..self.grid.n_points)
            .map(|k| (full[2 * k + self.offset] * scale).max(0.0))
            .collect();
        Ok(GridDistribution { grid: self.grid, values })
    }
}

pub fn mixing_b(f: &GridDistribution) -> Result<GridDistribution> {
    Mixer::new(f.grid).apply(f)
}

fn survival(grid: Grid, alpha: f64) -> Vec<f64> {
    (0..grid.n_points)
        .map(|k| {
            let x = grid.x(k);
            (-0.5 * alpha * x * x).exp()
        })
        .collect()
}

fn times(f: &GridDistribution, w: &[f64], c: f64) -> GridDistribution {
    GridDistribution { grid: f.grid, values: f.values.iter().zip(w).map(|(v, s)| c * v * s).collect() }
}

/// `beta e^{-m} B[F]`, plus `e^{-m} F` in overlapping mode.
fn step_with(mixer: &Mixer, surv: &[f64], f: &GridDistribution, p: &ModelParams) -> Result<GridDistribution> {
    let b = mixer.apply(f)?;
    let mut out = times(&b, surv, p.beta);
    if p.mode == Mode::Overlapping {
        for ((o, v), s) in out.values.iter_mut().zip(&f.values).zip(surv) {
            *o += v * s;
        }
    }
    Ok(out)
}

/// `T[F] = beta e^{-m} B[F]` (the model parameters' mode is ignored here).
pub fn apply_t(f: &GridDistribution, params: &ModelParams) -> Result<GridDistribution> {
    let p = ModelParams { mode: Mode::NonOverlapping, ..*params };
    step_with(&Mixer::new(f.grid), &survival(f.grid, params.alpha), f, &p)
}

pub fn selection_m(f: &GridDistribution, alpha: f64) -> Result<GridDistribution> {
    normalize(&times(f, &survival(f.grid, alpha), 1.0))
}

pub fn normalized_step_s(f: &GridDistribution, params: &ModelParams) -> Result<GridDistribution> {
    normalize(&apply_t(f, params)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRecord {
    pub n: usize,
    pub log_mass: f64,
    /// `NaN` at `n = 0`.
    pub lambda_n: f64,
    pub mean: f64,
    pub variance: f64,
    pub kl_to_eigen: f64,
    pub w2_to_eigen: f64,
    pub eps_mass: f64,
}

impl TrajectoryRecord {
    pub const CSV_HEADER: &'static str = "n,log_mass,lambda_n,mean,variance,kl,w2,eps_mass";

    pub fn mass(&self) -> f64 {
        self.log_mass.exp()
    }

    pub fn csv_row(&self) -> String {
        let f = grid::fmt17;
        format!(
            "{},{},{},{},{},{},{},{}",
            self.n,
            f(self.log_mass),
            f(self.lambda_n),
            f(self.mean),
            f(self.variance),
            f(self.kl_to_eigen),
            f(self.w2_to_eigen),
            f(self.eps_mass)
        )
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    /// Unit-mass profiles at the requested generations.
    pub snapshots: Vec<(usize, GridDistribution)>,
    /// Unit-mass profile after the last generation.
    pub last: GridDistribution,
}

impl Trajectory {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(TrajectoryRecord::CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }
}

struct Reference {
    lambda: f64,
    mean: f64,
    variance: f64,
    /// `None` when the reference profile has no mass on the grid.
    profile: Option<GridDistribution>,
}

fn record(n: usize, log_mass: f64, lambda_n: f64, shape: &GridDistribution, r: Option<&Reference>) -> Result<TrajectoryRecord> {
    let (kl, w2, eps) = match r {
        Some(r) => (
            grid::kl_to_gaussian(shape, r.mean, r.variance)?,
            match &r.profile {
                Some(p) => grid::wasserstein2(shape, p)?,
                None => f64::NAN,
            },
            (lambda_n - r.lambda).abs(),
        ),
        None => (f64::NAN, f64::NAN, f64::NAN),
    };
    Ok(TrajectoryRecord {
        n,
        log_mass,
        lambda_n,
        mean: shape.mean()?,
        variance: shape.variance()?,
        kl_to_eigen: kl,
        w2_to_eigen: w2,
        eps_mass: eps,
    })
}

/// Runs `n_iters` generations from `f0`.
///
/// Profiles are kept at unit mass and the mass is carried as `log_mass`. When
/// `eigen_ref` is given its `mass` is read as the reference growth factor and
/// `(mean, variance)` as the reference profile `G_{mean, variance}`.
pub fn iterate(
    f0: &GridDistribution,
    params: &ModelParams,
    n_iters: usize,
    eigen_ref: Option<&GaussianState>,
    snapshot_at: &[usize],
) -> Result<Trajectory> {
    let grid = f0.grid;
    let m0 = mass(f0);
    if !(m0 > ZERO_MASS) {
        return Err(Error::ZeroMassAtStep { step: 0 });
    }
    let reference = match eigen_ref {
        Some(s) => {
            if s.dim() != 1 {
                return Err(Error::InvalidParameter("grid runs are one-dimensional".into()));
            }
            Some(Reference {
                lambda: s.mass,
                mean: s.mean[0],
                variance: s.variance,
                profile: Some(grid::gaussian_profile(grid, s.mean[0], s.variance)?)
                    .filter(|p| mass(p) > ZERO_MASS),
            })
        }
        None => None,
    };
    let mixer = Mixer::new(grid);
    let surv = survival(grid, params.alpha);

    let mut shape = f0.scale(1.0 / m0);
    let mut log_mass = m0.ln();
    let mut records = Vec::with_capacity(n_iters + 1);
    let mut snapshots = Vec::new();
    records.push(record(0, log_mass, f64::NAN, &shape, reference.as_ref())?);
    if snapshot_at.contains(&0) {
        snapshots.push((0, shape.clone()));
    }
    for n in 1..=n_iters {
        let prev_mass = mass(&shape);
        let next = step_with(&mixer, &surv, &shape, params).map_err(|e| match e {
            Error::ZeroMass => Error::ZeroMassAtStep { step: n },
            e => e,
        })?;
        let m = mass(&next);
        if !(m > ZERO_MASS) {
            return Err(Error::ZeroMassAtStep { step: n });
        }
        let lambda_n = m / prev_mass;
        log_mass += lambda_n.ln();
        shape = next.scale(1.0 / m);
        records.push(record(n, log_mass, lambda_n, &shape, reference.as_ref())?);
        if snapshot_at.contains(&n) {
            snapshots.push((n, shape.clone()));
        }
    }
    Ok(Trajectory { records, snapshots, last: shape })
}

/// `lambda = int int H dnu dnu` with `H = (1+alpha)^{-1/2} exp(-alpha/(2(1+alpha)) |(x1+x2)/2|^2)`,
/// reduced to one sum over the self-convolution of `nu = F / |F|`.
pub fn growth_rate_via_h(f: &GridDistribution, alpha: f64) -> Result<f64> {
    let nu = normalize(f)?;
    let c = fft::self_convolve(&nu.values);
    let g = f.grid;
    let w = alpha / (2.0 * (1.0 + alpha));
    let mut s = 0.0;
    for (j, cj) in c.iter().enumerate() {
        let u = g.x_min + j as f64 * g.dx / 2.0;
        s += cj.max(0.0) * (-w * u * u).exp();
    }
    Ok(s * g.dx * g.dx / (1.0 + alpha).sqrt())
}

/// Gaussian variance read off the tails: least squares of `log nu` on `(1, x, -x^2/2)`
/// over the points where the unit-mass density lies in `[lo, hi]`.
pub fn tail_fitted_variance(f: &GridDistribution, lo: f64, hi: f64) -> Result<f64> {
    let nu = normalize(f)?;
    let mut ata = [[0.0f64; 3]; 3];
    let mut aty = [0.0f64; 3];
    let mut count = 0usize;
    for (k, &v) in nu.values.iter().enumerate() {
        if v >= lo && v <= hi {
            let x = nu.grid.x(k);
            let row = [1.0, x, -0.5 * x * x];
            let y = v.ln();
            for i in 0..3 {
                aty[i] += row[i] * y;
                for j in 0..3 {
                    ata[i][j] += row[i] * row[j];
                }
            }
            count += 1;
        }
    }
    if count < 3 {
        return Err(Error::InsufficientPoints { need: 3, got: count });
    }
    let coef = solve3(ata, aty)
        .ok_or_else(|| Error::InvalidParameter("tail window is degenerate".into()))?;
    Ok(1.0 / coef[2])
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for c in col..3 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}
