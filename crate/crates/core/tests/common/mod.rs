#![allow(dead_code)]

use infinitesimal::gaussian_oracle::coefficients;
use infinitesimal::pedigree::{pair_covariance, TreeVector};

/// Inverse of a dense symmetric positive definite matrix by Gauss-Jordan with partial pivoting.
pub fn dense_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        let d = m[c][c];
        for v in m[c].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                if f != 0.0 {
                    for k in 0..2 * n {
                        m[r][k] -= f * m[c][k];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Full covariance matrix of the tree Gaussian of height `n` in d = 1, vertex order as stored.
pub fn tree_covariance(n: usize, alpha: f64) -> Vec<Vec<f64>> {
    let (k, _) = coefficients(alpha, n);
    let size = 2 * ((1usize << n) - 1);
    let mut s = vec![vec![0.0; size]; size];
    for m in 0..n {
        let (a, b) = pair_covariance(k[n - m - 1]);
        let base = (1usize << (m + 1)) - 2;
        for p in 0..1usize << m {
            let (i, j) = (base + 2 * p, base + 2 * p + 1);
            s[i][i] = a;
            s[j][j] = a;
            s[i][j] = -b;
            s[j][i] = -b;
        }
    }
    s
}

/// `y^T S^{-1} y / 2`.
pub fn half_mahalanobis(inv: &[Vec<f64>], y: &TreeVector) -> f64 {
    let v = &y.values;
    let mut q = 0.0;
    for (i, row) in inv.iter().enumerate() {
        q += v[i] * row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
    0.5 * q
}

/// `F_1(x) / F_1(0)` from the n = 1 change-of-variables integral, by a 2-D trapezoid rule
/// in the pair variables with weight `exp(-Q_1)`.
pub fn reformulated_ratio_n1(x: f64, log_bar: impl Fn(f64) -> f64, alpha: f64) -> f64 {
    let (k, kappa) = coefficients(alpha, 1);
    let k1 = k[0];
    let q = |a: f64, b: f64| (a * a + b * b) / (4.0 * k1) - (a - b) * (a - b) / 8.0;
    let e = |x: f64| {
        let (l, h) = (12.0, 0.01);
        let n = (2.0 * l / h) as usize;
        let mut s = 0.0;
        for i in 0..=n {
            let a = -l + i as f64 * h;
            let la = log_bar(kappa[1] * x + a);
            for j in 0..=n {
                let b = -l + j as f64 * h;
                s += (la + log_bar(kappa[1] * x + b) - q(a, b)).exp();
            }
        }
        s
    };
    (-0.5 * (1.0 + alpha - k1) * x * x).exp() * e(x) / e(0.0)
}
