//! Rate fits and checks of the contraction, incompatibility and moment estimates.

use rand::Rng;

use crate::error::{Error, Result};
use crate::gaussian_oracle::moment_bound_constants;
use crate::grid::{self, exp_moment, moment, wasserstein2, Grid, GridDistribution};
use crate::operators::{apply_t, ModelParams, Mixer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub rate: f64,
    pub log_intercept: f64,
    /// Inclusive range of `n` used by the fit.
    pub window: (usize, usize),
    pub residual_rms: f64,
}

const MIN_POINTS: usize = 5;
const SLOPE_TOL: f64 = 0.05;

fn least_squares(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum();
    (slope, icpt, (rss / m).sqrt())
}

fn fit(pts: &[(usize, f64)]) -> RateFit {
    let logs: Vec<(f64, f64)> = pts.iter().map(|&(n, e)| (n as f64, e.ln())).collect();
    let (slope, icpt, rms) = least_squares(&logs);
    RateFit {
        rate: slope.exp(),
        log_intercept: icpt,
        window: (pts[0].0, pts[pts.len() - 1].0),
        residual_rms: rms,
    }
}

/// Least-squares line through `(n, log eps_n)`.
///
/// Without an explicit `window` the fit drops everything from the first point
/// below the noise floor `1e3 * EPSILON * max eps` on, then drops leading points
/// until every local slope in the window is within 5% of the fitted slope.
pub fn fit_geometric_rate(errors: &[(usize, f64)], window: Option<(usize, usize)>) -> Result<RateFit> {
    if let Some((lo, hi)) = window {
        let pts: Vec<(usize, f64)> = errors.iter().copied().filter(|p| p.0 >= lo && p.0 <= hi).collect();
        if let Some(p) = pts.iter().find(|p| !(p.1 > 0.0)) {
            return Err(Error::NonPositiveError { n: p.0 });
        }
        if pts.len() < MIN_POINTS {
            return Err(Error::InsufficientPoints { need: MIN_POINTS, got: pts.len() });
        }
        return Ok(fit(&pts));
    }

    let max = errors.iter().map(|p| p.1).filter(|e| e.is_finite()).fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::NonPositiveError { n: errors.first().map_or(0, |p| p.0) });
    }
    let floor = 1e3 * f64::EPSILON * max;
    let end = errors.iter().position(|p| !(p.1 >= floor) || !p.1.is_finite()).unwrap_or(errors.len());
    let pts = &errors[..end];
    if pts.len() < MIN_POINTS {
        return Err(Error::InsufficientPoints { need: MIN_POINTS, got: pts.len() });
    }
    let local: Vec<f64> = pts
        .windows(2)
        .map(|w| (w[1].1.ln() - w[0].1.ln()) / (w[1].0 as f64 - w[0].0 as f64))
        .collect();
    let mut lo = 0;
    while pts.len() - lo > MIN_POINTS {
        let f = fit(&pts[lo..]);
        let s = f.rate.ln();
        if local[lo..].iter().all(|l| (l - s).abs() <= SLOPE_TOL * s.abs()) {
            return Ok(f);
        }
        lo += 1;
    }
    Ok(fit(&pts[pts.len() - MIN_POINTS..]))
}

/// `(w2_in, w2_out)` for `F1 = (d_{-h} + d_h)/2` and `F2 = (d_{-h+eps} + d_{h+eps})/2`
/// before and after the normalised selection `M` with `m(x) = alpha x^2 / 2`.
pub fn dirac_selection_gap(h: f64, eps: f64, alpha: f64) -> Result<(f64, f64)> {
    if !(eps > 0.0 && eps < h) {
        return Err(Error::InvalidGeometry { eps, h });
    }
    if !(alpha >= 0.0) {
        return Err(Error::NegativeAlpha(alpha));
    }
    let m = |x: f64| 0.5 * alpha * x * x;
    // 1/2 - p_eps = tanh(z/2)/2 with z = m(h+eps) - m(-h+eps), free of cancellation
    let z = m(h + eps) - m(-h + eps);
    let half_minus_p = 0.5 * (0.5 * z).tanh();
    let w2_out = (eps * eps + 4.0 * h * (h - eps) * half_minus_p).sqrt();
    Ok((eps, w2_out))
}

/// `p_eps`: weight of the atom at `h + eps` after selection.
pub fn dirac_selected_weight(h: f64, eps: f64, alpha: f64) -> f64 {
    let m = |x: f64| 0.5 * alpha * x * x;
    let a = (-m(-h + eps)).exp();
    let b = (-m(h + eps)).exp();
    b / (a + b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum W2CheckKind {
    /// Equal means: `lhs = W2(BP, BQ)^2`, `rhs = W2(P, Q)^2 / 2`.
    Contraction,
    /// Unequal means: `lhs = W2(BP, BQ)`, `rhs = W2(P, Q)`.
    NonExpansive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct W2Check {
    pub kind: W2CheckKind,
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

const W2_SLACK: f64 = 1e-6;
const MEAN_MATCH: f64 = 1e-8;

pub fn verify_w2_contraction_with(mixer: &Mixer, p: &GridDistribution, q: &GridDistribution) -> Result<W2Check> {
    let bp = mixer.apply(p)?;
    let bq = mixer.apply(q)?;
    let before = wasserstein2(p, q)?;
    let after = wasserstein2(&bp, &bq)?;
    if (p.mean()? - q.mean()?).abs() <= MEAN_MATCH {
        let (lhs, rhs) = (after * after, 0.5 * before * before);
        Ok(W2Check { kind: W2CheckKind::Contraction, lhs, rhs, ok: lhs <= rhs + W2_SLACK })
    } else {
        Ok(W2Check { kind: W2CheckKind::NonExpansive, lhs: after, rhs: before, ok: after <= before + W2_SLACK })
    }
}

pub fn verify_w2_contraction(p: &GridDistribution, q: &GridDistribution) -> Result<W2Check> {
    verify_w2_contraction_with(&Mixer::new(p.grid), p, q)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentReport {
    pub m_const: f64,
    pub quad_lhs: f64,
    pub quad_rhs: f64,
    pub c_const: f64,
    pub delta: f64,
    pub exp_lhs: f64,
    pub exp_rhs: f64,
}

impl MomentReport {
    pub fn quad_ok(&self) -> bool {
        self.quad_lhs <= self.quad_rhs + 1e-6
    }

    pub fn exp_ok(&self) -> bool {
        self.exp_lhs <= self.exp_rhs * (1.0 + 1e-9) + 1e-6
    }
}

/// `delta` and `C` of the exponential-moment bound for the supplied `chi`.
pub fn exp_moment_constant(alpha: f64, theta: f64, chi: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    if !(theta >= 0.0 && theta < alpha / 2.0) {
        return Err(Error::InvalidParameter(format!("theta = {theta} outside [0, alpha/2)")));
    }
    let coef = alpha / (1.0 + alpha) * theta / ((1.0 + alpha - 2.0 * theta) * (alpha - 2.0 * theta));
    if !(chi > coef / 2.0) {
        return Err(Error::InvalidParameter(format!("chi = {chi} must exceed {}", coef / 2.0)));
    }
    let delta = 1.0 - coef / (2.0 * chi);
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter(format!("delta = {delta} outside (0, 1]")));
    }
    let c = ((1.0 + alpha) / (1.0 + alpha - 2.0 * theta)).sqrt() * (1.0 / delta).max(1.0);
    Ok((delta, c))
}

/// Both sides of the quadratic- and exponential-moment inequalities for `S[F]`.
pub fn verify_moment_bounds(f: &GridDistribution, alpha: f64, eta: f64, theta: f64, chi: f64) -> Result<MomentReport> {
    let m_const = moment_bound_constants(alpha, eta)?;
    let (delta, c_const) = exp_moment_constant(alpha, theta, chi)?;
    let s = grid::normalize(&apply_t(f, &ModelParams::with_alpha(alpha)?)?)?;
    let m2 = moment(f, 2, false)?;
    Ok(MomentReport {
        m_const,
        quad_lhs: moment(&s, 2, false)?,
        quad_rhs: m_const + eta * m2,
        c_const,
        delta,
        exp_lhs: exp_moment(&s, theta)?,
        exp_rhs: c_const * (1.0 + (chi * m2).exp()),
    })
}

fn bump_mixture(grid: Grid, bumps: &[(f64, f64, f64)]) -> Result<GridDistribution> {
    let parts: Vec<GridDistribution> =
        bumps.iter().map(|&(_, mu, s2)| grid::gaussian_profile(grid, mu, s2)).collect::<Result<_>>()?;
    let mut values = vec![0.0; grid.n_points];
    for (p, &(w, _, _)) in parts.iter().zip(bumps) {
        for (v, pv) in values.iter_mut().zip(&p.values) {
            *v += w * pv;
        }
    }
    GridDistribution::new(grid, values)
}

/// Two random mixtures of two Gaussian bumps on `grid`, centred in the middle third
/// of the domain. With `equal_mean` the second is shifted so both share the
/// analytic centre of mass.
pub fn random_bump_pair<R: Rng>(rng: &mut R, grid: Grid, equal_mean: bool) -> Result<(GridDistribution, GridDistribution)> {
    let span = grid.x_max - grid.x_min;
    let mid = 0.5 * (grid.x_min + grid.x_max);
    let draw = |rng: &mut R| {
        let w = rng.random_range(0.1..0.9);
        let mut b = [(w, 0.0, 0.0), (1.0 - w, 0.0, 0.0)];
        for bump in &mut b {
            bump.1 = mid + rng.random_range(-span / 8.0..span / 8.0);
            bump.2 = rng.random_range(0.3..3.0);
        }
        b
    };
    let a = draw(rng);
    let mut b = draw(rng);
    if equal_mean {
        let ma: f64 = a.iter().map(|p| p.0 * p.1).sum();
        let mb: f64 = b.iter().map(|p| p.0 * p.1).sum();
        for bump in &mut b {
            bump.1 += ma - mb;
        }
    }
    Ok((bump_mixture(grid, &a)?, bump_mixture(grid, &b)?))
}

/// One line of the `check,lhs,rhs,slack,ok` report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

impl Check {
    pub const CSV_HEADER: &'static str = "check,lhs,rhs,slack,ok";

    pub fn le(name: impl Into<String>, lhs: f64, rhs: f64, ok: bool) -> Self {
        Self { name: name.into(), lhs, rhs, ok }
    }

    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.name,
            grid::fmt17(self.lhs),
            grid::fmt17(self.rhs),
            grid::fmt17(self.slack()),
            self.ok
        )
    }
}
