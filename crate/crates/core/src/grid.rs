//! Densities sampled on a uniform 1-D grid.
//!
//! Every integral uses the left rectangle rule: the cell `[x_k, x_{k+1})`
//! carries `values[k] * dx` and the last grid point carries no weight.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Masses at or below this are treated as zero.
pub const ZERO_MASS: f64 = 1e-300;

const KL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
    pub n_points: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::InvalidGrid(format!("dx = {dx}")));
        }
        if !(x_min < x_max) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidGrid(format!("[{x_min}, {x_max}]")));
        }
        let n_points = ((x_max - x_min) / dx).round() as usize + 1;
        Ok(Self { x_min, x_max, dx, n_points })
    }

    /// The step-datum domain: [-15, 60] with step 0.001.
    pub fn paper() -> Self {
        Self::new(-15.0, 60.0, 1e-3).expect("valid grid")
    }

    #[inline]
    pub fn x(&self, k: usize) -> f64 {
        self.x_min + k as f64 * self.dx
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.x(k)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridDistribution {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridDistribution {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points {
            return Err(Error::InvalidGrid(format!(
                "{} values for {} grid points",
                values.len(),
                grid.n_points
            )));
        }
        if let Some(k) = values.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "density value {} at index {k} is negative or not finite",
                values[k]
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..grid.n_points).map(|k| f(grid.x(k))).collect();
        Self::new(grid, values)
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.n_points] }
    }

    /// Piecewise-constant density: `(lo, hi, height)` triples, indicator of `[lo, hi]`.
    pub fn step(grid: Grid, pieces: &[(f64, f64, f64)]) -> Result<Self> {
        Self::from_fn(grid, |x| {
            pieces
                .iter()
                .filter(|(lo, hi, _)| x >= *lo && x <= *hi)
                .map(|(_, _, h)| *h)
                .sum()
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn mean(&self) -> Result<f64> {
        moment(self, 1, false)
    }

    pub fn variance(&self) -> Result<f64> {
        moment(self, 2, true)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(48 * self.len() + 8);
        s.push_str("x,value\n");
        for (k, v) in self.values.iter().enumerate() {
            let _ = writeln!(s, "{},{}", fmt17(self.grid.x(k)), fmt17(*v));
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }

    /// Reads an `x,value` table onto `grid`. Rows must sit on the grid points.
    pub fn from_csv(grid: Grid, text: &str) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.n_points);
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (line_no == 0 && line.starts_with('x')) {
                continue;
            }
            let mut parts = line.split(',');
            let parse = |p: Option<&str>| -> Result<f64> {
                p.and_then(|s| s.trim().parse::<f64>().ok()).ok_or_else(|| {
                    Error::InvalidParameter(format!("line {}: expected `x,value`", line_no + 1))
                })
            };
            let x = parse(parts.next())?;
            let v = parse(parts.next())?;
            let k = values.len();
            if k >= grid.n_points || (x - grid.x(k)).abs() > 1e-3 * grid.dx {
                return Err(Error::InvalidGrid(format!(
                    "line {}: x = {x} is not grid point {k}",
                    line_no + 1
                )));
            }
            values.push(v);
        }
        Self::new(grid, values)
    }
}

/// 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn same_grid(p: &GridDistribution, q: &GridDistribution) -> Result<()> {
    if p.grid != q.grid || p.len() != q.len() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

pub fn mass(f: &GridDistribution) -> f64 {
    let n = f.len().saturating_sub(1);
    f.values[..n].iter().sum::<f64>() * f.grid.dx
}

pub fn normalize(f: &GridDistribution) -> Result<GridDistribution> {
    let m = mass(f);
    if !(m > ZERO_MASS) {
        return Err(Error::ZeroMass);
    }
    Ok(f.scale(1.0 / m))
}

pub fn gaussian_profile(grid: Grid, mu: f64, sigma2: f64) -> Result<GridDistribution> {
    if !(sigma2 > 0.0) {
        return Err(Error::NonPositiveVariance(sigma2));
    }
    let c = (2.0 * std::f64::consts::PI * sigma2).sqrt().recip();
    GridDistribution::from_fn(grid, |x| c * (-(x - mu) * (x - mu) / (2.0 * sigma2)).exp())
}

fn weighted_sum(f: &GridDistribution, g: impl Fn(f64) -> f64) -> f64 {
    let n = f.len().saturating_sub(1);
    let mut s = 0.0;
    for k in 0..n {
        let v = f.values[k];
        if v != 0.0 {
            s += v * g(f.grid.x(k));
        }
    }
    s * f.grid.dx
}

pub fn moment(f: &GridDistribution, p: u32, centered: bool) -> Result<f64> {
    let m = mass(f);
    if !(m > ZERO_MASS) {
        return Err(Error::ZeroMass);
    }
    let c = if centered { weighted_sum(f, |x| x) / m } else { 0.0 };
    Ok(weighted_sum(f, |x| (x - c).powi(p as i32)) / m)
}

pub fn exp_moment(f: &GridDistribution, theta: f64) -> Result<f64> {
    let m = mass(f);
    if !(m > ZERO_MASS) {
        return Err(Error::ZeroMass);
    }
    let n = f.len() - 1;
    let mut s = 0.0;
    for k in 0..n {
        let v = f.values[k];
        if v == 0.0 {
            continue;
        }
        let x = f.grid.x(k);
        let t = (theta * x * x + (v / m).ln()).exp();
        if !t.is_finite() {
            return Err(Error::Overflow { x });
        }
        s += t;
    }
    let out = s * f.grid.dx;
    if !out.is_finite() {
        return Err(Error::Overflow { x: f.grid.x_max });
    }
    Ok(out)
}

pub fn kl_divergence(p: &GridDistribution, q: &GridDistribution) -> Result<f64> {
    same_grid(p, q)?;
    let (mp, mq) = (mass(p), mass(q));
    if !(mp > ZERO_MASS) || !(mq > ZERO_MASS) {
        return Err(Error::ZeroMass);
    }
    let n = p.len() - 1;
    let mut s = 0.0;
    for k in 0..n {
        let pk = p.values[k] / mp;
        if pk > 0.0 {
            let qk = q.values[k] / mq;
            if !(qk > 0.0) {
                return Err(Error::SupportViolation { index: k });
            }
            s += pk * (pk / qk).ln();
        }
    }
    Ok((s * p.grid.dx).max(-KL_TOL))
}

/// KL divergence from `p` to the Gaussian `G_{mu, sigma2}` renormalised on the grid.
/// The reference is handled in log space, so its far tails never underflow.
pub fn kl_to_gaussian(p: &GridDistribution, mu: f64, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::NonPositiveVariance(sigma2));
    }
    let mp = mass(p);
    if !(mp > ZERO_MASS) {
        return Err(Error::ZeroMass);
    }
    let grid = p.grid;
    let n = p.len() - 1;
    let logq = |x: f64| -(x - mu) * (x - mu) / (2.0 * sigma2);
    let zq: f64 = (0..n).map(|k| logq(grid.x(k)).exp()).sum::<f64>() * grid.dx;
    let log_zq = zq.ln();
    let mut s = 0.0;
    for k in 0..n {
        let pk = p.values[k] / mp;
        if pk > 0.0 {
            s += pk * (pk.ln() - (logq(grid.x(k)) - log_zq));
        }
    }
    Ok((s * grid.dx).max(-KL_TOL))
}

/// Quantile function of the piecewise-constant density, sampled at the
/// midpoints of a uniform mesh of `m` cells on (0, 1).
fn quantiles(f: &GridDistribution, m: usize) -> Result<Vec<f64>> {
    let total = mass(f);
    if !(total > ZERO_MASS) {
        return Err(Error::ZeroMass);
    }
    let grid = f.grid;
    let cells = f.len() - 1;
    let mut out = Vec::with_capacity(m);
    let mut k = 0usize;
    let mut below = 0.0;
    let mut cell_mass = f.values[0] * grid.dx / total;
    for i in 0..m {
        let q = (i as f64 + 0.5) / m as f64;
        while k + 1 < cells && below + cell_mass < q {
            below += cell_mass;
            k += 1;
            cell_mass = f.values[k] * grid.dx / total;
        }
        let t = if cell_mass > 0.0 { ((q - below) / cell_mass).clamp(0.0, 1.0) } else { 1.0 };
        out.push(grid.x(k) + t * grid.dx);
    }
    Ok(out)
}

/// W2 through quantile functions on a mesh of `4 * n_points` cells.
pub fn wasserstein2(p: &GridDistribution, q: &GridDistribution) -> Result<f64> {
    same_grid(p, q)?;
    let m = 4 * p.len();
    let qp = quantiles(p, m)?;
    let qq = quantiles(q, m)?;
    let s: f64 = qp.iter().zip(&qq).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((s / m as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_step(grid: Grid) -> GridDistribution {
        GridDistribution::step(
            grid,
            &[(-7.0, -3.0, 30.0), (7.5, 12.5, 20.0), (30.0, 40.0, 50.0), (52.5, 57.5, 30.0)],
        )
        .unwrap()
    }

    #[test]
    fn unit_box_mass() {
        let g = Grid::new(0.0, 1.0, 0.1).unwrap();
        assert_eq!(g.n_points, 11);
        let f = GridDistribution::from_fn(g, |_| 1.0).unwrap();
        assert!((mass(&f) - 1.0).abs() < 1e-12);
        assert_eq!(mass(&GridDistribution::zeros(g)), 0.0);
    }

    #[test]
    fn step_mass_and_normalisation() {
        let f = paper_step(Grid::paper());
        assert!((mass(&f) - 870.0).abs() < 0.2, "{}", mass(&f));
        let nf = normalize(&f).unwrap();
        let k = ((-5.0 - nf.grid.x_min) / nf.grid.dx).round() as usize;
        assert!((nf.values[k] - 30.0 / mass(&f)).abs() < 1e-15);
        assert!((mass(&nf) - 1.0).abs() < 1e-12);
        let nnf = normalize(&nf).unwrap();
        for (a, b) in nf.values.iter().zip(&nnf.values) {
            assert!((a - b).abs() <= 1e-12 * a.abs());
        }
        assert_eq!(normalize(&GridDistribution::zeros(Grid::paper())), Err(Error::ZeroMass));
    }

    #[test]
    fn constant_two_normalises_to_one() {
        let g = Grid::new(0.0, 1.0, 0.01).unwrap();
        let f = GridDistribution::from_fn(g, |_| 2.0).unwrap();
        let n = normalize(&f).unwrap();
        assert!(n.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn gaussian_profile_values() {
        let g = Grid::new(-10.0, 10.0, 0.01).unwrap();
        let f = gaussian_profile(g, 0.0, 1.0).unwrap();
        assert!((f.values[1000] - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!((mass(&f) - 1.0).abs() < 1e-9);
        assert!(matches!(gaussian_profile(g, 0.0, 0.0), Err(Error::NonPositiveVariance(_))));
    }

    #[test]
    fn moments_on_paper_grid() {
        let g = Grid::paper();
        let f = gaussian_profile(g, 0.0, 2.0).unwrap();
        assert!((moment(&f, 2, true).unwrap() - 2.0).abs() < 1e-6);
        assert!(moment(&f, 1, false).unwrap().abs() < g.dx);
    }

    #[test]
    fn step_second_moment_matches_piecewise_integral() {
        let pieces = [(-7.0, -3.0, 30.0), (7.5, 12.5, 20.0), (30.0, 40.0, 50.0), (52.5, 57.5, 30.0)];
        let z: f64 = pieces.iter().map(|(a, b, h)| h * (b - a)).sum();
        let exact: f64 =
            pieces.iter().map(|(a, b, h)| h * (b * b * b - a * a * a) / 3.0).sum::<f64>() / z;
        let f = paper_step(Grid::paper());
        assert!((moment(&f, 2, false).unwrap() - exact).abs() < 1e-3 * exact.max(1.0));
    }

    #[test]
    fn exp_moment_closed_forms() {
        let g = Grid::new(-20.0, 20.0, 1e-3).unwrap();
        let f = gaussian_profile(g, 0.0, 1.5).unwrap();
        assert!((exp_moment(&f, 0.0).unwrap() - 1.0).abs() < 1e-12);
        let th = 0.2;
        let want = (1.0 - 2.0 * th * 1.5f64).powf(-0.5);
        assert!((exp_moment(&f, th).unwrap() - want).abs() < 1e-5);
        let f = gaussian_profile(g, 1.0, 1.0).unwrap();
        let want = 0.5f64.exp() / 0.5f64.sqrt();
        assert!((exp_moment(&f, 0.25).unwrap() - want).abs() < 1e-5);
        assert!((want - 2.3316).abs() < 1e-4);
        let flat = GridDistribution::from_fn(Grid::new(-40.0, 40.0, 0.01).unwrap(), |_| 1.0).unwrap();
        assert!(matches!(exp_moment(&flat, 1.0), Err(Error::Overflow { .. })));
    }

    #[test]
    fn kl_closed_forms() {
        let g = Grid::new(-20.0, 20.0, 1e-3).unwrap();
        let p = gaussian_profile(g, 1.0, 2.0).unwrap();
        let q = gaussian_profile(g, 0.0, 2.0).unwrap();
        assert!(kl_divergence(&p, &p).unwrap().abs() < 1e-10);
        assert!((kl_divergence(&p, &q).unwrap() - 0.25).abs() < 1e-4);
        let p = gaussian_profile(g, 0.0, 1.0).unwrap();
        let want = 0.5 * (0.5 - 1.0) - 0.5 * 0.5f64.ln();
        assert!((kl_divergence(&p, &q).unwrap() - want).abs() < 1e-4);
        assert!((kl_to_gaussian(&p, 0.0, 2.0).unwrap() - want).abs() < 1e-4);
    }

    #[test]
    fn kl_support_violation() {
        let g = Grid::new(0.0, 1.0, 0.1).unwrap();
        let p = GridDistribution::from_fn(g, |_| 1.0).unwrap();
        let q = GridDistribution::from_fn(g, |x| if x < 0.5 { 1.0 } else { 0.0 }).unwrap();
        assert!(matches!(kl_divergence(&p, &q), Err(Error::SupportViolation { .. })));
        let h = Grid::new(0.0, 2.0, 0.1).unwrap();
        let r = GridDistribution::from_fn(h, |_| 1.0).unwrap();
        assert_eq!(kl_divergence(&p, &r), Err(Error::GridMismatch));
    }

    #[test]
    fn w2_basics() {
        let g = Grid::new(-20.0, 20.0, 1e-3).unwrap();
        let p = gaussian_profile(g, 0.0, 1.0).unwrap();
        assert!(wasserstein2(&p, &p).unwrap() < 1e-6);
        let s = gaussian_profile(g, 1.7, 1.0).unwrap();
        assert!((wasserstein2(&p, &s).unwrap() - 1.7).abs() < 1e-3);
        let w = gaussian_profile(g, 0.0, 4.0).unwrap();
        assert!((wasserstein2(&p, &w).unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn csv_round_trip() {
        let g = Grid::new(-1.0, 1.0, 0.25).unwrap();
        let f = gaussian_profile(g, 0.1, 0.7).unwrap();
        let text = f.to_csv();
        assert!(text.starts_with("x,value\n"));
        let back = GridDistribution::from_csv(g, &text).unwrap();
        assert_eq!(back, f);
    }
}
