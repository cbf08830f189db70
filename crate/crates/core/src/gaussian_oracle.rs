//! Closed-form Gaussian dynamics of `T = e^{-m} B` and the Gaussian eigenpair.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub mass: f64,
    pub mean: Vec<f64>,
    pub variance: f64,
}

impl GaussianState {
    pub fn new(mass: f64, mean: Vec<f64>, variance: f64) -> Result<Self> {
        if !(mass > 0.0) {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
        }
        if !(variance > 0.0) {
            return Err(Error::NonPositiveVariance(variance));
        }
        if mean.is_empty() {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        Ok(Self { mass, mean, variance })
    }

    pub fn scalar(mass: f64, mean: f64, variance: f64) -> Result<Self> {
        Self::new(mass, vec![mean], variance)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn mean_norm2(&self) -> f64 {
        self.mean.iter().map(|m| m * m).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenpair {
    pub lambda: f64,
    pub sigma2: f64,
    pub k_bar: f64,
    pub r_bar: f64,
    pub alpha: f64,
    pub dim: usize,
    /// Set for alpha = 0, where every translate of G_{mu,2} is an eigenfunction.
    pub non_unique: bool,
}

pub fn eigenpair(alpha: f64, dim: usize) -> Result<Eigenpair> {
    if !(alpha >= 0.0) {
        return Err(Error::NegativeAlpha(alpha));
    }
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    let a = 1.0 + 2.0 * alpha;
    let disc = (a * a + 8.0 * alpha).sqrt();
    // (disc - a) / (2 alpha) rewritten to stay accurate as alpha -> 0
    let sigma2 = 4.0 / (disc + a);
    let lambda = (1.0 + alpha * (1.0 + sigma2 / 2.0)).powf(-(dim as f64) / 2.0);
    // smaller root of 2k^2 - (3 + 2 alpha) k + 1 = 0, in cancellation-free form
    let k_bar = 2.0 / ((3.0 + 2.0 * alpha) + disc);
    let r_bar = 8.0 / ((2.0 * alpha + 3.0) + disc).powi(2);
    Ok(Eigenpair { lambda, sigma2, k_bar, r_bar, alpha, dim, non_unique: alpha == 0.0 })
}

fn denom(alpha: f64, sigma2: f64) -> f64 {
    1.0 + alpha * (1.0 + sigma2 / 2.0)
}

pub fn evaluate_on_gaussian(state: &GaussianState, alpha: f64) -> GaussianState {
    let d = denom(alpha, state.variance);
    let dim = state.dim() as f64;
    let mass = state.mass * (-0.5 * alpha * state.mean_norm2() / d).exp() / d.powf(dim / 2.0);
    GaussianState {
        mass,
        mean: state.mean.iter().map(|m| m / d).collect(),
        variance: (1.0 + state.variance / 2.0) / d,
    }
}

/// `state0` followed by `n` applications of `evaluate_on_gaussian`.
pub fn gaussian_trajectory(state0: &GaussianState, alpha: f64, n: usize) -> Vec<GaussianState> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(state0.clone());
    for i in 0..n {
        let next = evaluate_on_gaussian(&out[i], alpha);
        out.push(next);
    }
    out
}

/// Returns `(k, kappa)` with `k[m-1] = k_m` for `m = 1..=n` and `kappa[m] = k_1 ... k_m`
/// for `m = 0..=n`.
pub fn coefficients(alpha: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut k = Vec::with_capacity(n);
    let mut kappa = Vec::with_capacity(n + 1);
    kappa.push(1.0);
    for m in 0..n {
        let km = if m == 0 { 1.0 / (2.0 * (1.0 + alpha)) } else { 1.0 / (3.0 + 2.0 * alpha - 2.0 * k[m - 1]) };
        k.push(km);
        kappa.push(kappa[m] * km);
    }
    (k, kappa)
}

/// Upper and lower tail-variance barriers `sigma_n^2`, `n = 1..=n`, both following
/// `1/s_{n+1} = alpha + 1/(1 + s_n/2)`; the upper one is seeded with `1/alpha`.
pub fn tail_variance_barriers(alpha: f64, n: usize, sigma_lower_1: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let hi = 1.0 / (1.0 + alpha);
    if !(sigma_lower_1 > 0.0 && sigma_lower_1 < hi) {
        return Err(Error::InvalidLowerSeed { seed: sigma_lower_1, hi });
    }
    let step = |s: f64| 1.0 / (alpha + 1.0 / (1.0 + s / 2.0));
    let mut upper = Vec::with_capacity(n);
    let mut lower = Vec::with_capacity(n);
    let (mut u, mut l) = (1.0 / alpha, sigma_lower_1);
    for _ in 0..n {
        upper.push(u);
        lower.push(l);
        u = step(u);
        l = step(l);
    }
    Ok((upper, lower))
}

/// The constant `M(alpha, eta)` of the quadratic-moment bound, with gamma = delta
/// chosen so that `(1 - gamma)(1 - delta) = 1 / (2 eta (1 + alpha)^2)`.
pub fn moment_bound_constants(alpha: f64, eta: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let lo = 1.0 / (2.0 * (1.0 + alpha).powi(2));
    if !(eta > lo && eta < 1.0) {
        return Err(Error::EtaOutOfRange { eta, lo });
    }
    let g = 1.0 - (2.0 * eta * (1.0 + alpha).powi(2)).powf(-0.5);
    Ok(1.0 / (1.0 + alpha) + 2.0 / (std::f64::consts::E * g * g) / (alpha * (1.0 + alpha)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_eigenpairs() {
        let e = eigenpair(0.015, 1).unwrap();
        assert!((e.lambda - 0.9857).abs() < 5e-5 && (e.sigma2 - 1.8897).abs() < 5e-5);
        let e = eigenpair(0.4, 1).unwrap();
        assert!((e.lambda - 0.7944).abs() < 5e-5 && (e.sigma2 - 0.9221).abs() < 5e-5);
    }

    #[test]
    fn flat_selection_limit() {
        let e = eigenpair(0.0, 1).unwrap();
        assert_eq!((e.lambda, e.sigma2, e.k_bar, e.r_bar), (1.0, 2.0, 0.5, 0.5));
        assert!(e.non_unique);
        let near = eigenpair(1e-12, 1).unwrap();
        assert!((near.sigma2 - 2.0).abs() < 1e-10 && !near.non_unique);
        assert_eq!(eigenpair(-1.0, 1), Err(Error::NegativeAlpha(-1.0)));
    }

    #[test]
    fn textbook_root_formula_agrees() {
        for &alpha in &[0.015, 0.4, 1.0, 7.0] {
            let a: f64 = 1.0 + 2.0 * alpha;
            let s = ((a * a + 8.0 * alpha).sqrt() - a) / (2.0 * alpha);
            assert!((eigenpair(alpha, 1).unwrap().sigma2 - s).abs() < 1e-12);
        }
    }

    #[test]
    fn evaluation_examples() {
        let s = GaussianState::scalar(1.0, 0.0, 2.0).unwrap();
        assert_eq!(evaluate_on_gaussian(&s, 0.0), s);
        let s = GaussianState::scalar(1.0, 1.0, 1.0).unwrap();
        let t = evaluate_on_gaussian(&s, 1.0);
        assert!((t.mass - (-0.2f64).exp() / 2.5f64.sqrt()).abs() < 1e-15);
        assert!((t.mean[0] - 0.4).abs() < 1e-15 && (t.variance - 0.6).abs() < 1e-15);
        let e = eigenpair(0.4, 3).unwrap();
        let t = evaluate_on_gaussian(&GaussianState::new(1.0, vec![0.0; 3], e.sigma2).unwrap(), 0.4);
        assert!((t.mass - e.lambda).abs() < 1e-14 && (t.variance - e.sigma2).abs() < 1e-14);
    }

    #[test]
    fn stationary_trajectory() {
        let e = eigenpair(0.4, 1).unwrap();
        let tr = gaussian_trajectory(&GaussianState::scalar(1.0, 0.0, e.sigma2).unwrap(), 0.4, 20);
        for (n, s) in tr.iter().enumerate() {
            assert!((s.mass - e.lambda.powi(n as i32)).abs() < 1e-13);
            assert!((s.variance - e.sigma2).abs() < 1e-14);
        }
    }

    #[test]
    fn coefficient_examples() {
        let (k, kappa) = coefficients(0.0, 6);
        assert!(k.iter().all(|&v| v == 0.5));
        for (m, v) in kappa.iter().enumerate() {
            assert_eq!(*v, 0.5f64.powi(m as i32));
        }
        let (k, kappa) = coefficients(1.0, 2);
        assert!((k[0] - 0.25).abs() < 1e-15 && (k[1] - 1.0 / 4.5).abs() < 1e-15);
        assert!((kappa[2] - 0.25 / 4.5).abs() < 1e-15);
        assert!((kappa[2] - 0.05556).abs() < 1e-5);
    }

    #[test]
    fn barrier_examples() {
        let (u, l) = tail_variance_barriers(0.4, 60, 0.5).unwrap();
        assert!((u[0] - 2.5).abs() < 1e-15);
        assert!((u[1] - 1.0 / (0.4 + 1.0 / 2.25)).abs() < 1e-14);
        assert!((u[1] - 1.18421).abs() < 1e-5);
        let s = eigenpair(0.4, 1).unwrap().sigma2;
        assert!((u[59] - s).abs() < 1e-10 && (l[59] - s).abs() < 1e-10);
        assert!(u.windows(2).all(|w| w[1] <= w[0]));
        assert!(l.windows(2).all(|w| w[1] >= w[0]));
        assert!(matches!(tail_variance_barriers(0.4, 3, 0.8), Err(Error::InvalidLowerSeed { .. })));
    }

    #[test]
    fn moment_constant_example() {
        // 2 eta (1 + alpha)^2 = 4, so 1 - gamma = 1/2
        let m = moment_bound_constants(1.0, 0.5).unwrap();
        let want = 0.5 + 2.0 / (std::f64::consts::E * 0.25) / 2.0;
        assert!((m - want).abs() < 1e-12, "{m}");
        assert!((m - 1.9715).abs() < 1e-4);
        let near = moment_bound_constants(1.0, 0.125 + 1e-9).unwrap();
        assert!(near > 1e6);
        assert!(matches!(moment_bound_constants(1.0, 0.1), Err(Error::EtaOutOfRange { .. })));
    }
}
