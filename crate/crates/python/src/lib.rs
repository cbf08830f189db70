//! Python bindings: grids, operators, the Gaussian oracle, pedigree Monte Carlo and rate fits.

use infinitesimal::diagnostics;
use infinitesimal::experiment::{self, ExperimentConfig, Preset, RunError};
use infinitesimal::gaussian_oracle;
use infinitesimal::grid;
use infinitesimal::operators::{self, ModelParams};
use infinitesimal::pedigree::{self, InitialDatum, McOptions};
use infinitesimal::{Error, GaussianState};
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: Error) -> PyErr {
    match e {
        Error::ZeroMass
        | Error::ZeroMassAtStep { .. }
        | Error::Overflow { .. }
        | Error::ZeroDensityAtLeaf
        | Error::DegenerateCovariance { .. } => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn run_err(e: RunError) -> PyErr {
    match e {
        RunError::Numerical(e) => err(e),
        e => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(name = "Grid", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyGrid(grid::Grid);

#[pymethods]
impl PyGrid {
    #[new]
    fn new(x_min: f64, x_max: f64, dx: f64) -> PyResult<Self> {
        grid::Grid::new(x_min, x_max, dx).map(Self).map_err(err)
    }

    /// The domain [-15, 60] with dx = 0.001.
    #[staticmethod]
    fn paper() -> Self {
        Self(grid::Grid::paper())
    }

    #[getter]
    fn x_min(&self) -> f64 {
        self.0.x_min
    }

    #[getter]
    fn x_max(&self) -> f64 {
        self.0.x_max
    }

    #[getter]
    fn dx(&self) -> f64 {
        self.0.dx
    }

    #[getter]
    fn n_points(&self) -> usize {
        self.0.n_points
    }

    fn points(&self) -> Vec<f64> {
        self.0.points()
    }

    fn __repr__(&self) -> String {
        format!("Grid({}, {}, {}; {} points)", self.0.x_min, self.0.x_max, self.0.dx, self.0.n_points)
    }
}

#[pyclass(name = "GridDistribution", frozen, from_py_object)]
#[derive(Clone)]
struct PyDist(grid::GridDistribution);

#[pymethods]
impl PyDist {
    #[new]
    fn new(grid: PyGrid, values: Vec<f64>) -> PyResult<Self> {
        grid::GridDistribution::new(grid.0, values).map(Self).map_err(err)
    }

    #[staticmethod]
    fn gaussian(grid: PyGrid, mu: f64, sigma2: f64) -> PyResult<Self> {
        grid::gaussian_profile(grid.0, mu, sigma2).map(Self).map_err(err)
    }

    /// Sum of `height * 1_[lo, hi]` over `(lo, hi, height)` triples.
    #[staticmethod]
    fn step(grid: PyGrid, pieces: Vec<(f64, f64, f64)>) -> PyResult<Self> {
        grid::GridDistribution::step(grid.0, &pieces).map(Self).map_err(err)
    }

    /// The normalised four-piece step datum of the numerical experiments.
    #[staticmethod]
    fn paper_step(grid: PyGrid) -> PyResult<Self> {
        let InitialDatum::Step(p) = InitialDatum::paper_step() else { unreachable!() };
        let f = grid::GridDistribution::step(grid.0, &p).map_err(err)?;
        grid::normalize(&f).map(Self).map_err(err)
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(self.0.grid)
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values.clone()
    }

    fn mass(&self) -> f64 {
        grid::mass(&self.0)
    }

    fn normalize(&self) -> PyResult<Self> {
        grid::normalize(&self.0).map(Self).map_err(err)
    }

    fn mean(&self) -> PyResult<f64> {
        self.0.mean().map_err(err)
    }

    fn variance(&self) -> PyResult<f64> {
        self.0.variance().map_err(err)
    }

    #[pyo3(signature = (p, centered = false))]
    fn moment(&self, p: u32, centered: bool) -> PyResult<f64> {
        grid::moment(&self.0, p, centered).map_err(err)
    }

    fn exp_moment(&self, theta: f64) -> PyResult<f64> {
        grid::exp_moment(&self.0, theta).map_err(err)
    }

    fn to_csv(&self) -> String {
        self.0.to_csv()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyfunction]
fn kl_divergence(p: &PyDist, q: &PyDist) -> PyResult<f64> {
    grid::kl_divergence(&p.0, &q.0).map_err(err)
}

#[pyfunction]
fn wasserstein2(p: &PyDist, q: &PyDist) -> PyResult<f64> {
    grid::wasserstein2(&p.0, &q.0).map_err(err)
}

#[pyfunction]
fn mixing_b(f: &PyDist) -> PyResult<PyDist> {
    operators::mixing_b(&f.0).map(PyDist).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (f, alpha, beta = 1.0))]
fn apply_t(f: &PyDist, alpha: f64, beta: f64) -> PyResult<PyDist> {
    let p = ModelParams::new(alpha, beta, Default::default()).map_err(err)?;
    operators::apply_t(&f.0, &p).map(PyDist).map_err(err)
}

#[pyfunction]
fn growth_rate_via_h(f: &PyDist, alpha: f64) -> PyResult<f64> {
    operators::growth_rate_via_h(&f.0, alpha).map_err(err)
}

/// Grid iteration; returns one dict per generation and the final unit-mass profile.
#[pyfunction]
#[pyo3(signature = (f0, alpha, n_iters, beta = 1.0, overlapping = false))]
fn iterate<'py>(
    py: Python<'py>,
    f0: &PyDist,
    alpha: f64,
    n_iters: usize,
    beta: f64,
    overlapping: bool,
) -> PyResult<(Vec<Bound<'py, PyDict>>, PyDist)> {
    let mode = if overlapping { operators::Mode::Overlapping } else { operators::Mode::NonOverlapping };
    let p = ModelParams::new(alpha, beta, mode).map_err(err)?;
    let reference = if overlapping {
        None
    } else {
        let e = gaussian_oracle::eigenpair(alpha, 1).map_err(err)?;
        let mu = if alpha == 0.0 { f0.0.mean().map_err(err)? } else { 0.0 };
        Some(GaussianState::scalar(beta * e.lambda, mu, e.sigma2).map_err(err)?)
    };
    let tr = py.detach(|| operators::iterate(&f0.0, &p, n_iters, reference.as_ref(), &[])).map_err(err)?;
    let mut out = Vec::with_capacity(tr.records.len());
    for r in &tr.records {
        let d = PyDict::new(py);
        d.set_item("n", r.n)?;
        d.set_item("log_mass", r.log_mass)?;
        d.set_item("lambda_n", r.lambda_n)?;
        d.set_item("mean", r.mean)?;
        d.set_item("variance", r.variance)?;
        d.set_item("kl", r.kl_to_eigen)?;
        d.set_item("w2", r.w2_to_eigen)?;
        d.set_item("eps_mass", r.eps_mass)?;
        out.push(d);
    }
    Ok((out, PyDist(tr.last)))
}

#[pyfunction]
#[pyo3(signature = (alpha, dim = 1))]
fn eigenpair<'py>(py: Python<'py>, alpha: f64, dim: usize) -> PyResult<Bound<'py, PyDict>> {
    let e = gaussian_oracle::eigenpair(alpha, dim).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("alpha", e.alpha)?;
    d.set_item("dim", e.dim)?;
    d.set_item("lambda", e.lambda)?;
    d.set_item("sigma2", e.sigma2)?;
    d.set_item("k_bar", e.k_bar)?;
    d.set_item("r_bar", e.r_bar)?;
    d.set_item("non_unique", e.non_unique)?;
    Ok(d)
}

/// `[(mass, mean, variance)]` for generations `0..=n`.
#[pyfunction]
fn gaussian_trajectory(
    alpha: f64,
    mass: f64,
    mean: Vec<f64>,
    variance: f64,
    n: usize,
) -> PyResult<Vec<(f64, Vec<f64>, f64)>> {
    let s0 = GaussianState::new(mass, mean, variance).map_err(err)?;
    Ok(gaussian_oracle::gaussian_trajectory(&s0, alpha, n).into_iter().map(|s| (s.mass, s.mean, s.variance)).collect())
}

#[pyfunction]
fn coefficients(alpha: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    gaussian_oracle::coefficients(alpha, n)
}

#[pyfunction]
fn leaf_covariance(i: &str, j: &str, n: usize, alpha: f64) -> PyResult<f64> {
    let i = i.parse().map_err(err)?;
    let j = j.parse().map_err(err)?;
    pedigree::leaf_covariance(&i, &j, n, alpha).map_err(err)
}

/// Monte Carlo `F_n(x)/F_n(0)`; `initial` is `"paper-step"` or `(mu, sigma2)`.
/// Returns `(x, ratio, std_error)` triples.
#[pyfunction]
#[pyo3(signature = (xs, n, alpha, n_samples, seed, initial = None))]
fn mc_profile_ratios(
    py: Python<'_>,
    xs: Vec<f64>,
    n: usize,
    alpha: f64,
    n_samples: usize,
    seed: u64,
    initial: Option<(f64, f64)>,
) -> PyResult<Vec<(f64, f64, f64)>> {
    let f0 = match initial {
        None => InitialDatum::paper_step(),
        Some((mu, sigma2)) => InitialDatum::Gaussian { mu, sigma2 },
    };
    let f0 = match f0 {
        InitialDatum::Step(p) => {
            let z: f64 = p.iter().map(|(lo, hi, h)| (hi - lo) * h).sum();
            InitialDatum::Step(p.into_iter().map(|(lo, hi, h)| (lo, hi, h / z)).collect())
        }
        g => g,
    };
    let est = py
        .detach(|| pedigree::mc_profile_ratios(&xs, &f0, n, alpha, n_samples, seed, &McOptions::default()))
        .map_err(err)?;
    Ok(est.into_iter().map(|e| (e.x, e.ratio, e.std_error)).collect())
}

/// Returns `(rate, log_intercept, (n_lo, n_hi), residual_rms)`.
#[pyfunction]
#[pyo3(signature = (errors, window = None))]
fn fit_geometric_rate(
    errors: Vec<(usize, f64)>,
    window: Option<(usize, usize)>,
) -> PyResult<(f64, f64, (usize, usize), f64)> {
    let f = diagnostics::fit_geometric_rate(&errors, window).map_err(err)?;
    Ok((f.rate, f.log_intercept, f.window, f.residual_rms))
}

#[pyfunction]
fn dirac_selection_gap(h: f64, eps: f64, alpha: f64) -> PyResult<(f64, f64)> {
    diagnostics::dirac_selection_gap(h, eps, alpha).map_err(err)
}

/// Runs the `weak` or `strong` preset in memory and returns the fitted rates.
#[pyfunction]
fn simulate_preset<'py>(py: Python<'py>, name: &str) -> PyResult<Bound<'py, PyDict>> {
    let preset: Preset = name.parse().map_err(PyValueError::new_err)?;
    let cfg = ExperimentConfig::preset(preset);
    let out = py.detach(|| experiment::simulate(&cfg)).map_err(run_err)?;
    let last = out.trajectory.records.last().expect("generation 0 is always recorded");
    let d = PyDict::new(py);
    d.set_item("lambda_final", last.lambda_n)?;
    d.set_item("mean_final", last.mean)?;
    d.set_item("variance_final", last.variance)?;
    for r in &out.rates {
        d.set_item(format!("rate_{}", r.quantity), r.fit.as_ref().map_or(f64::NAN, |f| f.rate))?;
    }
    Ok(d)
}

#[pymodule]
fn infinitesimal_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyDist>()?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(wasserstein2, m)?)?;
    m.add_function(wrap_pyfunction!(mixing_b, m)?)?;
    m.add_function(wrap_pyfunction!(apply_t, m)?)?;
    m.add_function(wrap_pyfunction!(growth_rate_via_h, m)?)?;
    m.add_function(wrap_pyfunction!(iterate, m)?)?;
    m.add_function(wrap_pyfunction!(eigenpair, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(leaf_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(mc_profile_ratios, m)?)?;
    m.add_function(wrap_pyfunction!(fit_geometric_rate, m)?)?;
    m.add_function(wrap_pyfunction!(dirac_selection_gap, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_preset, m)?)?;
    Ok(())
}
