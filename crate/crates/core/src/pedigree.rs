//! Pedigree trees, the tree quadratic form and lineage maps, the tree Gaussian
//! `G_n`, and a Monte Carlo estimator of `F_n(x) / F_n(0)` built on them.
//!
//! Vertices of `T^n_*` are stored level by level (levels `1..=n`) and, inside a
//! level, in lexicographic order of their addresses. Within level `l` the address
//! `w_1 ... w_l` sits at position `sum_i (w_i - 1) 2^{l-i}`, after the
//! `2^l - 2` vertices of the lower levels.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian_oracle::coefficients;

/// Default bound on `2 (2^n - 1) n_samples`.
pub const DEFAULT_SCALAR_BUDGET: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TreeAddress {
    word: Vec<u8>,
}

impl TreeAddress {
    pub fn root() -> Self {
        Self::default()
    }

    pub fn new(word: Vec<u8>) -> Result<Self> {
        if word.iter().any(|&c| c != 1 && c != 2) {
            return Err(Error::InvalidParameter(format!("address letters must be 1 or 2: {word:?}")));
        }
        Ok(Self { word })
    }

    pub fn word(&self) -> &[u8] {
        &self.word
    }

    pub fn level(&self) -> usize {
        self.word.len()
    }

    pub fn is_root(&self) -> bool {
        self.word.is_empty()
    }

    pub fn child(&self) -> Result<Self> {
        if self.is_root() {
            return Err(Error::RootHasNoChild);
        }
        Ok(Self { word: self.word[..self.word.len() - 1].to_vec() })
    }

    /// `(i1, i2)`; `height` is the height of the enclosing tree.
    pub fn parents(&self, height: usize) -> Result<(Self, Self)> {
        if self.level() >= height {
            return Err(Error::LeafHasNoParents);
        }
        let mut a = self.word.clone();
        let mut b = self.word.clone();
        a.push(1);
        b.push(2);
        Ok((Self { word: a }, Self { word: b }))
    }

    pub fn mate(&self) -> Result<Self> {
        let mut w = self.word.clone();
        let last = w.last_mut().ok_or(Error::RootHasNoChild)?;
        *last = 3 - *last;
        Ok(Self { word: w })
    }

    /// Highest common descendant: the longest common prefix.
    pub fn meet(&self, other: &Self) -> Self {
        let l = self.word.iter().zip(&other.word).take_while(|(a, b)| a == b).count();
        Self { word: self.word[..l].to_vec() }
    }

    /// Position inside its level.
    pub fn position(&self) -> usize {
        self.word.iter().fold(0, |p, &c| 2 * p + (c - 1) as usize)
    }

    /// Index in the `TreeVector` layout (root excluded).
    pub fn index(&self) -> Option<usize> {
        if self.is_root() {
            None
        } else {
            Some((1usize << self.level()) - 2 + self.position())
        }
    }

    fn from_position(level: usize, p: usize) -> Self {
        let word = (0..level).rev().map(|b| 1 + ((p >> b) & 1) as u8).collect();
        Self { word }
    }
}

impl fmt::Display for TreeAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.word.is_empty() {
            return f.write_str("∅");
        }
        for c in &self.word {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for TreeAddress {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "∅" {
            return Ok(Self::root());
        }
        let word = s
            .chars()
            .map(|c| match c {
                '1' => Ok(1),
                '2' => Ok(2),
                _ => Err(Error::InvalidParameter(format!("bad address `{s}`"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(Self { word })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PerfectTree {
    pub height: usize,
}

impl PerfectTree {
    pub fn new(height: usize) -> Result<Self> {
        if height == 0 || height > 40 {
            return Err(Error::InvalidParameter(format!("tree height {height} outside 1..=40")));
        }
        Ok(Self { height })
    }

    /// `L^n_m`, lexicographic.
    pub fn level(&self, m: usize) -> Vec<TreeAddress> {
        (0..1usize << m).map(|p| TreeAddress::from_position(m, p)).collect()
    }

    pub fn leaves(&self) -> Vec<TreeAddress> {
        self.level(self.height)
    }

    /// `T^n_*` in layout order.
    pub fn vertices_no_root(&self) -> Vec<TreeAddress> {
        (1..=self.height).flat_map(|m| self.level(m)).collect()
    }

    /// `T^n` minus the leaves.
    pub fn internal(&self) -> Vec<TreeAddress> {
        (0..self.height).flat_map(|m| self.level(m)).collect()
    }

    pub fn n_vertices_no_root(&self) -> usize {
        2 * ((1usize << self.height) - 1)
    }

    pub fn contains(&self, i: &TreeAddress) -> bool {
        i.level() <= self.height
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeVector {
    pub height: usize,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl TreeVector {
    pub fn zeros(height: usize, dim: usize) -> Self {
        Self { height, dim, values: vec![0.0; 2 * ((1usize << height) - 1) * dim] }
    }

    pub fn from_values(height: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        let want = 2 * ((1usize << height) - 1) * dim;
        if values.len() != want {
            return Err(Error::InvalidParameter(format!(
                "tree vector of height {height}, dim {dim} needs {want} values, got {}",
                values.len()
            )));
        }
        Ok(Self { height, dim, values })
    }

    fn check(&self) -> Result<()> {
        let want = 2 * ((1usize << self.height) - 1) * self.dim;
        if self.values.len() != want || self.height == 0 {
            return Err(Error::HeightMismatch { expected: want, got: self.values.len() });
        }
        Ok(())
    }

    pub fn get(&self, i: &TreeAddress) -> Option<&[f64]> {
        let idx = i.index()?;
        self.values.get(idx * self.dim..(idx + 1) * self.dim)
    }

    pub fn get_mut(&mut self, i: &TreeAddress) -> Option<&mut [f64]> {
        let idx = i.index()?;
        self.values.get_mut(idx * self.dim..(idx + 1) * self.dim)
    }

    pub fn norm2(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// Diagonal `a` and negated off-diagonal `b` of the pair covariance for coefficient `k`.
pub fn pair_covariance(k: f64) -> (f64, f64) {
    ((2.0 - k) * k / (1.0 - k), k * k / (1.0 - k))
}

/// `Q_n(y) = sum_{m<n} sum_{i in L_m} (|y_i1|^2 + |y_i2|^2)/(4 k_{n-m}) - |y_i1 - y_i2|^2/8`.
pub fn quadratic_form_q(y: &TreeVector, alpha: f64) -> Result<f64> {
    y.check()?;
    let n = y.height;
    let d = y.dim;
    let (k, _) = coefficients(alpha, n);
    let mut q = 0.0;
    for m in 0..n {
        let km = k[n - m - 1];
        let base = (1usize << (m + 1)) - 2;
        for p in 0..1usize << m {
            let i1 = (base + 2 * p) * d;
            let i2 = (base + 2 * p + 1) * d;
            for c in 0..d {
                let (a, b) = (y.values[i1 + c], y.values[i2 + c]);
                q += (a * a + b * b) / (4.0 * km) - (a - b) * (a - b) / 8.0;
            }
        }
    }
    Ok(q)
}

/// `Phi_n^j(x; y) = kappa_n x + sum_{m<n} kappa_m y_{child^m(j)}`.
pub fn lineage_map(x: &[f64], j: &TreeAddress, y: &TreeVector, alpha: f64) -> Result<Vec<f64>> {
    y.check()?;
    let n = y.height;
    if j.level() != n {
        return Err(Error::NotALeaf(j.to_string()));
    }
    if x.len() != y.dim {
        return Err(Error::InvalidParameter(format!("x has dimension {}, tree has {}", x.len(), y.dim)));
    }
    let (_, kappa) = coefficients(alpha, n);
    let mut out: Vec<f64> = x.iter().map(|v| kappa[n] * v).collect();
    let mut v = j.clone();
    for kap in kappa.iter().take(n) {
        let yv = y.get(&v).expect("address inside tree");
        for (o, yc) in out.iter_mut().zip(yv) {
            *o += kap * yc;
        }
        v = v.child()?;
    }
    Ok(out)
}

struct PairFactors {
    /// Per internal level m: Cholesky factor (l11, l21, l22) of [[a, -b], [-b, a]].
    chol: Vec<(f64, f64, f64)>,
}

impl PairFactors {
    fn new(n: usize, alpha: f64) -> Result<Self> {
        let (k, _) = coefficients(alpha, n);
        let mut chol = Vec::with_capacity(n);
        for m in 0..n {
            let (a, b) = pair_covariance(k[n - m - 1]);
            if !(a > 0.0) || !(a * a > b * b) {
                return Err(Error::DegenerateCovariance { a, b });
            }
            let l11 = a.sqrt();
            let l21 = -b / l11;
            let l22 = (a - l21 * l21).sqrt();
            chol.push((l11, l21, l22));
        }
        Ok(Self { chol })
    }

    fn fill(&self, n: usize, dim: usize, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        for m in 0..n {
            let (l11, l21, l22) = self.chol[m];
            let base = (1usize << (m + 1)) - 2;
            for p in 0..1usize << m {
                let i1 = (base + 2 * p) * dim;
                let i2 = (base + 2 * p + 1) * dim;
                for c in 0..dim {
                    let z1: f64 = StandardNormal.sample(rng);
                    let z2: f64 = StandardNormal.sample(rng);
                    out[i1 + c] = l11 * z1;
                    out[i2 + c] = l21 * z1 + l22 * z2;
                }
            }
        }
    }
}

fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draw number `index` of `G_n` under `seed`; a pure function of `(seed, index)`.
pub fn sample_tree_gaussian(n: usize, alpha: f64, dim: usize, seed: u64, index: u64) -> Result<TreeVector> {
    PerfectTree::new(n)?;
    let f = PairFactors::new(n, alpha)?;
    let mut y = TreeVector::zeros(n, dim);
    f.fill(n, dim, &mut stream(seed, index), &mut y.values);
    Ok(y)
}

/// Coefficient of `I_d` in `Cov(Phi_n^i, Phi_n^j)`.
pub fn leaf_covariance(i: &TreeAddress, j: &TreeAddress, n: usize, alpha: f64) -> Result<f64> {
    for l in [i, j] {
        if l.level() != n {
            return Err(Error::NotALeaf(l.to_string()));
        }
    }
    let (k, kappa) = coefficients(alpha, n);
    let a = |q: usize| pair_covariance(k[q]).0;
    let b = |q: usize| pair_covariance(k[q]).1;
    let l = i.meet(j).level();
    let shared: f64 = (n - l.min(n)..n).map(|q| kappa[q] * kappa[q] * a(q)).sum();
    Ok(if l == n {
        shared
    } else {
        let c = n - l - 1;
        -kappa[c] * kappa[c] * b(c) + shared
    })
}

/// One-dimensional initial data whose rescaled form
/// `bar F_0(x) = e^{alpha x^2/2} F_0(x) / G_{0,2}(x)` is evaluated exactly.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialDatum {
    /// `(lo, hi, height)`: sum of `height * 1_[lo, hi]`.
    Step(Vec<(f64, f64, f64)>),
    Gaussian { mu: f64, sigma2: f64 },
}

impl InitialDatum {
    pub fn paper_step() -> Self {
        Self::Step(vec![(-7.0, -3.0, 30.0), (7.5, 12.5, 20.0), (30.0, 40.0, 50.0), (52.5, 57.5, 30.0)])
    }

    pub fn density(&self, x: f64) -> f64 {
        match self {
            Self::Step(p) => p.iter().filter(|(lo, hi, _)| x >= *lo && x <= *hi).map(|(_, _, h)| h).sum(),
            Self::Gaussian { mu, sigma2 } => {
                (-(x - mu) * (x - mu) / (2.0 * sigma2)).exp() / (2.0 * std::f64::consts::PI * sigma2).sqrt()
            }
        }
    }

    fn log_density(&self, x: f64) -> f64 {
        match self {
            Self::Step(_) => self.density(x).ln(),
            Self::Gaussian { mu, sigma2 } => {
                -(x - mu) * (x - mu) / (2.0 * sigma2) - 0.5 * (2.0 * std::f64::consts::PI * sigma2).ln()
            }
        }
    }

    /// `log bar F_0(x)`; `-inf` off the support.
    pub fn log_bar(&self, x: f64, alpha: f64) -> f64 {
        0.5 * alpha * x * x + self.log_density(x) + 0.25 * x * x + 0.5 * (4.0 * std::f64::consts::PI).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub scalar_budget: f64,
    /// Reject sample sets where every draw hits a zero of `bar F_0`.
    pub strict: bool,
}

impl Default for McOptions {
    fn default() -> Self {
        Self { scalar_budget: DEFAULT_SCALAR_BUDGET, strict: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioEstimate {
    pub x: f64,
    pub ratio: f64,
    pub std_error: f64,
}

/// Monte Carlo estimates of `F_n(x) / F_n(0)` for every `x` in `xs`, sharing draws.
pub fn mc_profile_ratios(
    xs: &[f64],
    f0: &InitialDatum,
    n: usize,
    alpha: f64,
    n_samples: usize,
    seed: u64,
    opts: &McOptions,
) -> Result<Vec<RatioEstimate>> {
    let tree = PerfectTree::new(n)?;
    let scalars = tree.n_vertices_no_root() as f64 * n_samples as f64;
    if scalars > opts.scalar_budget {
        return Err(Error::TreeTooLarge { scalars, budget: opts.scalar_budget });
    }
    if n_samples < 2 {
        return Err(Error::InsufficientPoints { need: 2, got: n_samples });
    }
    let factors = PairFactors::new(n, alpha)?;
    let (k, kappa) = coefficients(alpha, n);
    let nv = tree.n_vertices_no_root();
    let n_leaves = 1usize << n;
    let leaf_base = (1usize << n) - 2;
    // column 0 is x = 0
    let cols: Vec<f64> = std::iter::once(0.0).chain(xs.iter().copied()).collect();
    let nc = cols.len();

    let mut logw = vec![0.0f64; n_samples * nc];
    logw.par_chunks_mut(nc).enumerate().for_each_init(
        || (vec![0.0f64; nv], vec![0.0f64; nv]),
        |(y, acc), (s, out)| {
            factors.fill(n, 1, &mut stream(seed, s as u64), y);
            // acc[v] = sum of kappa_{n - level(u)} y_u along the path from level 1 to v
            for p in 0..2 {
                acc[p] = kappa[n - 1] * y[p];
            }
            for l in 2..=n {
                let base = (1usize << l) - 2;
                let below = (1usize << (l - 1)) - 2;
                for p in 0..1usize << l {
                    acc[base + p] = acc[below + p / 2] + kappa[n - l] * y[base + p];
                }
            }
            for (o, &x) in out.iter_mut().zip(&cols) {
                let shift = kappa[n] * x;
                let mut lw = 0.0;
                for leaf in 0..n_leaves {
                    lw += f0.log_bar(shift + acc[leaf_base + leaf], alpha);
                    if lw == f64::NEG_INFINITY {
                        break;
                    }
                }
                *o = lw;
            }
        },
    );

    let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut est = Vec::with_capacity(xs.len());
    if top == f64::NEG_INFINITY {
        if opts.strict {
            return Err(Error::ZeroDensityAtLeaf);
        }
        for &x in xs {
            est.push(RatioEstimate { x, ratio: f64::NAN, std_error: f64::NAN });
        }
        return Ok(est);
    }
    let w = |s: usize, c: usize| (logw[s * nc + c] - top).exp();
    let nf = n_samples as f64;
    let mean0 = (0..n_samples).map(|s| w(s, 0)).sum::<f64>() / nf;
    if !(mean0 > 0.0) {
        if opts.strict {
            return Err(Error::ZeroDensityAtLeaf);
        }
    }
    let decay = 1.0 + alpha - k[n - 1];
    for (c, &x) in cols.iter().enumerate().skip(1) {
        let mean_x = (0..n_samples).map(|s| w(s, c)).sum::<f64>() / nf;
        let r = mean_x / mean0;
        let mut ss = 0.0;
        for s in 0..n_samples {
            let e = w(s, c) - r * w(s, 0);
            ss += e * e;
        }
        let var = ss / (nf - 1.0);
        let pre = (-0.5 * decay * x * x).exp();
        est.push(RatioEstimate { x, ratio: pre * r, std_error: pre * (var / nf).sqrt() / mean0 });
    }
    Ok(est)
}

pub fn mc_profile_ratio(
    x: f64,
    f0: &InitialDatum,
    n: usize,
    alpha: f64,
    n_samples: usize,
    seed: u64,
) -> Result<RatioEstimate> {
    Ok(mc_profile_ratios(&[x], f0, n, alpha, n_samples, seed, &McOptions::default())?[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(s: &str) -> TreeAddress {
        s.parse().unwrap()
    }

    #[test]
    fn word_operations() {
        assert_eq!(a("121").child().unwrap(), a("12"));
        assert_eq!(a("121").mate().unwrap(), a("122"));
        assert_eq!(a("12").parents(3).unwrap(), (a("121"), a("122")));
        assert_eq!(a("121").meet(&a("122")), a("12"));
        assert_eq!(a("11").meet(&a("22")), TreeAddress::root());
        assert_eq!(TreeAddress::root().level(), 0);
        assert_eq!(a("121").level(), 3);
        assert_eq!(TreeAddress::root().child(), Err(Error::RootHasNoChild));
        assert_eq!(a("121").parents(3), Err(Error::LeafHasNoParents));
        assert_eq!(TreeAddress::root().to_string(), "∅");
    }

    #[test]
    fn layout_is_level_major_lexicographic() {
        let t = PerfectTree::new(3).unwrap();
        let v = t.vertices_no_root();
        assert_eq!(v.len(), 14);
        let names: Vec<String> = v.iter().map(|i| i.to_string()).collect();
        assert_eq!(&names[..6], &["1", "2", "11", "12", "21", "22"]);
        for (idx, i) in v.iter().enumerate() {
            assert_eq!(i.index(), Some(idx));
        }
        assert_eq!(t.leaves().len(), 8);
        assert_eq!(t.internal().len(), 7);
    }

    #[test]
    fn q_examples() {
        let y = TreeVector::from_values(1, 1, vec![1.0, 1.0]).unwrap();
        assert!((quadratic_form_q(&y, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(quadratic_form_q(&TreeVector::zeros(4, 2), 0.3).unwrap(), 0.0);
        let bad = TreeVector { height: 2, dim: 1, values: vec![0.0; 3] };
        assert!(matches!(quadratic_form_q(&bad, 0.1), Err(Error::HeightMismatch { .. })));
    }

    #[test]
    fn lineage_examples() {
        let mut y = TreeVector::zeros(2, 1);
        y.get_mut(&a("1")).unwrap()[0] = 1.0;
        y.get_mut(&a("11")).unwrap()[0] = 1.0;
        let v = lineage_map(&[1.0], &a("11"), &y, 0.0).unwrap();
        assert!((v[0] - 1.75).abs() < 1e-15);
        let z = TreeVector::zeros(3, 1);
        let (_, kappa) = coefficients(0.7, 3);
        assert_eq!(lineage_map(&[2.0], &a("212"), &z, 0.7).unwrap()[0], kappa[3] * 2.0);
        assert!(matches!(lineage_map(&[0.0], &a("21"), &z, 0.7), Err(Error::NotALeaf(_))));
    }

    #[test]
    fn lineage_matches_named_terms() {
        let alpha = 0.4;
        let y = sample_tree_gaussian(3, alpha, 1, 5, 0).unwrap();
        let (_, kappa) = coefficients(alpha, 3);
        let x = 0.8;
        let want = kappa[3] * x
            + kappa[2] * y.get(&a("1")).unwrap()[0]
            + kappa[1] * y.get(&a("12")).unwrap()[0]
            + y.get(&a("121")).unwrap()[0];
        assert!((lineage_map(&[x], &a("121"), &y, alpha).unwrap()[0] - want).abs() < 1e-15);
    }

    #[test]
    fn leaf_covariance_examples() {
        let c = leaf_covariance(&a("1"), &a("1"), 1, 0.0).unwrap();
        assert!((c - 1.5).abs() < 1e-15);
        let c = leaf_covariance(&a("1"), &a("2"), 1, 0.0).unwrap();
        assert!((c + 0.5).abs() < 1e-15);
        assert!(matches!(leaf_covariance(&a("1"), &a("12"), 2, 0.0), Err(Error::NotALeaf(_))));
    }

    #[test]
    fn sampling_is_a_function_of_seed_and_index() {
        let a1 = sample_tree_gaussian(3, 0.4, 2, 11, 7).unwrap();
        let a2 = sample_tree_gaussian(3, 0.4, 2, 11, 7).unwrap();
        let b = sample_tree_gaussian(3, 0.4, 2, 11, 8).unwrap();
        assert_eq!(a1, a2);
        assert_ne!(a1, b);
    }

    #[test]
    fn ratio_at_origin_is_one() {
        let f0 = InitialDatum::Gaussian { mu: 0.5, sigma2: 0.7 };
        let r = mc_profile_ratios(&[0.0], &f0, 2, 0.4, 1000, 3, &McOptions::default()).unwrap();
        assert_eq!(r[0].ratio, 1.0);
        assert_eq!(r[0].std_error, 0.0);
    }

    #[test]
    fn budget_guard() {
        let f0 = InitialDatum::Gaussian { mu: 0.0, sigma2: 1.0 };
        let opts = McOptions { scalar_budget: 1e3, strict: true };
        assert!(matches!(
            mc_profile_ratios(&[1.0], &f0, 4, 0.4, 1000, 1, &opts),
            Err(Error::TreeTooLarge { .. })
        ));
    }

    #[test]
    fn all_zero_draws_are_rejected_in_strict_mode() {
        let f0 = InitialDatum::Step(vec![(40.0, 41.0, 1.0)]);
        let r = mc_profile_ratios(&[1.0], &f0, 1, 0.4, 100, 1, &McOptions::default());
        assert_eq!(r.unwrap_err(), Error::ZeroDensityAtLeaf);
        let lax = McOptions { strict: false, ..Default::default() };
        assert!(mc_profile_ratios(&[1.0], &f0, 1, 0.4, 100, 1, &lax).unwrap()[0].ratio.is_nan());
    }
}
