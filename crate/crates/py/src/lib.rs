//! Python bindings for the sampling library: schedules, potentials, exact
//! laws, divergence metrics, rate fitting, and independent-ensemble runs.

use std::cell::RefCell;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use sgld::law;
use sgld::metrics;
use sgld::model;
use sgld::sampler;
use sgld::schedule;

fn to_py(e: sgld::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Step-size sequence: constant, polynomial decay, or explicit list.
#[pyclass(name = "Schedule", from_py_object)]
#[derive(Clone)]
struct PySchedule {
    inner: schedule::StepSchedule,
}

#[pymethods]
impl PySchedule {
    #[staticmethod]
    fn constant(eta: f64) -> PyResult<Self> {
        Ok(PySchedule {
            inner: schedule::StepSchedule::constant(eta).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn poly_decay(ell: u64, theta: f64) -> PyResult<Self> {
        Ok(PySchedule {
            inner: schedule::StepSchedule::poly_decay(ell, theta).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn explicit(steps: Vec<f64>) -> PyResult<Self> {
        Ok(PySchedule {
            inner: schedule::StepSchedule::explicit(steps).map_err(to_py)?,
        })
    }

    fn step(&self, k: usize) -> PyResult<f64> {
        self.inner.step(k).map_err(to_py)
    }

    fn grid_time(&self, k: usize) -> PyResult<f64> {
        self.inner.grid_time(k).map_err(to_py)
    }

    fn weight_f(&self, t: f64) -> PyResult<f64> {
        self.inner.weight_f(t).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Schedule({:?})", self.inner)
    }
}

/// Diagonal-covariance Gaussian law.
#[pyclass(name = "GaussianLaw", from_py_object)]
#[derive(Clone)]
struct PyGaussianLaw {
    inner: law::GaussianLaw,
}

#[pymethods]
impl PyGaussianLaw {
    #[new]
    fn new(mean: Vec<f64>, var: Vec<f64>) -> PyResult<Self> {
        Ok(PyGaussianLaw {
            inner: law::GaussianLaw::new(mean, var).map_err(to_py)?,
        })
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.inner.mean().to_vec()
    }

    #[getter]
    fn var(&self) -> Vec<f64> {
        self.inner.var().to_vec()
    }

    fn __repr__(&self) -> String {
        format!(
            "GaussianLaw(mean={:?}, var={:?})",
            self.inner.mean(),
            self.inner.var()
        )
    }
}

/// Drift field with declared metadata and optional finite-sum structure.
#[pyclass(name = "Potential", from_py_object)]
#[derive(Clone)]
struct PyPotential {
    inner: model::Potential,
}

#[pymethods]
impl PyPotential {
    #[staticmethod]
    fn linear_drift(a: f64, offsets: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(PyPotential {
            inner: model::Potential::linear_drift(a, offsets).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn gaussian_mixture_1d(weights: Vec<f64>, means: Vec<f64>, variance: f64) -> PyResult<Self> {
        Ok(PyPotential {
            inner: model::Potential::gaussian_mixture_1d(weights, means, variance)
                .map_err(to_py)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn n_components(&self) -> Option<usize> {
        self.inner.n_components()
    }

    #[getter]
    fn lipschitz(&self) -> f64 {
        self.inner.meta().lipschitz
    }

    #[getter]
    fn batch_deviation(&self) -> Option<f64> {
        self.inner.meta().batch_deviation
    }

    /// Full-gradient drift `b(x)`.
    fn drift(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.drift_full(&x).map_err(to_py)
    }

    /// Monte Carlo batch-consistency check; returns `(mc_mean, deviation)`.
    #[pyo3(signature = (batch_size, x, samples, seed, replacement = true))]
    fn check_consistency(
        &self,
        batch_size: usize,
        x: Vec<f64>,
        samples: usize,
        seed: u64,
        replacement: bool,
    ) -> PyResult<(Vec<f64>, f64)> {
        use rand::SeedableRng;
        let spec = model::BatchSpec::new(batch_size, replacement).map_err(to_py)?;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let rep =
            model::check_consistency(&self.inner, &spec, &x, samples, &mut rng).map_err(to_py)?;
        Ok((rep.mc_mean, rep.deviation))
    }
}

/// Cross-chain snapshot of an ensemble at one grid index.
#[pyclass(name = "Snapshot")]
struct PySnapshot {
    inner: sampler::Snapshot,
}

#[pymethods]
impl PySnapshot {
    #[getter]
    fn step(&self) -> usize {
        self.inner.step
    }

    #[getter]
    fn time(&self) -> f64 {
        self.inner.time
    }

    fn mean(&self) -> Vec<f64> {
        self.inner.mean()
    }

    fn var(&self) -> Vec<f64> {
        self.inner.var()
    }

    fn second_moment(&self) -> f64 {
        self.inner.mean_sq_norm()
    }

    /// All chain values of one coordinate.
    fn coordinate(&self, c: usize) -> Vec<f64> {
        self.inner.coordinate(c)
    }

    fn __repr__(&self) -> String {
        format!(
            "Snapshot(step={}, time={}, chains={})",
            self.inner.step,
            self.inner.time,
            self.inner.chains()
        )
    }
}

#[pyfunction]
fn ou_exact_law(
    a: f64,
    beta_inv: f64,
    m0: Vec<f64>,
    v0: Vec<f64>,
    t: f64,
) -> PyResult<PyGaussianLaw> {
    Ok(PyGaussianLaw {
        inner: law::ou_exact_law(a, beta_inv, &m0, &v0, t).map_err(to_py)?,
    })
}

#[pyfunction]
fn em_law(
    a: f64,
    beta_inv: f64,
    m0: Vec<f64>,
    v0: Vec<f64>,
    schedule: PySchedule,
    k: usize,
) -> PyResult<PyGaussianLaw> {
    Ok(PyGaussianLaw {
        inner: law::em_law(a, beta_inv, &m0, &v0, &schedule.inner, k).map_err(to_py)?,
    })
}

/// Returns `(moment_matched_law, is_gaussian)`.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn sgld_moment_law(
    a: f64,
    beta_inv: f64,
    s2: f64,
    m0: Vec<f64>,
    v0: Vec<f64>,
    schedule: PySchedule,
    k: usize,
) -> PyResult<(PyGaussianLaw, bool)> {
    let ml = law::sgld_moment_law(a, beta_inv, s2, &m0, &v0, &schedule.inner, k).map_err(to_py)?;
    let gaussian = ml.gaussian;
    Ok((
        PyGaussianLaw {
            inner: ml.surrogate().map_err(to_py)?,
        },
        gaussian,
    ))
}

#[pyfunction]
fn gaussian_kl(p: PyGaussianLaw, q: PyGaussianLaw) -> PyResult<f64> {
    law::gaussian_kl(&p.inner, &q.inner).map_err(to_py)
}

#[pyfunction]
fn kl_mean_lower_bound(p: PyGaussianLaw, q: PyGaussianLaw) -> PyResult<f64> {
    law::kl_mean_lower_bound(&p.inner, &q.inner).map_err(to_py)
}

#[pyfunction]
fn gaussian_w2(p: PyGaussianLaw, q: PyGaussianLaw) -> PyResult<f64> {
    law::gaussian_w2(&p.inner, &q.inner).map_err(to_py)
}

#[pyfunction]
fn mean_gap_lower_bound(ex0: f64, t: f64, eta: f64) -> PyResult<f64> {
    law::mean_gap_lower_bound(ex0, t, eta).map_err(to_py)
}

#[pyfunction]
fn bound_envelope(
    schedule: PySchedule,
    a0: f64,
    c1: f64,
    c2: f64,
    dim: usize,
    k: usize,
) -> PyResult<f64> {
    let params = schedule::BoundParams::new(a0, c1, c2, dim).map_err(to_py)?;
    schedule::bound_envelope(&schedule.inner, &params, k).map_err(to_py)
}

#[pyfunction]
fn empirical_w1_1d(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    let a = metrics::SampleSet::new(a).map_err(to_py)?;
    let b = metrics::SampleSet::new(b).map_err(to_py)?;
    Ok(metrics::empirical_w1_1d(&a, &b))
}

#[pyfunction]
fn empirical_w2_1d(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    let a = metrics::SampleSet::new(a).map_err(to_py)?;
    let b = metrics::SampleSet::new(b).map_err(to_py)?;
    Ok(metrics::empirical_w2_1d(&a, &b))
}

#[pyfunction]
fn empirical_tv_hist(a: Vec<f64>, b: Vec<f64>, bins: usize, lo: f64, hi: f64) -> PyResult<f64> {
    let a = metrics::SampleSet::new(a).map_err(to_py)?;
    let b = metrics::SampleSet::new(b).map_err(to_py)?;
    metrics::empirical_tv_hist(&a, &b, bins, (lo, hi)).map_err(to_py)
}

/// Simpson estimate of `integral p log(p/q)` from Python log-density callables.
#[pyfunction]
fn kl_quadrature_1d(
    logp: Bound<'_, PyAny>,
    logq: Bound<'_, PyAny>,
    lo: f64,
    hi: f64,
    n: usize,
) -> PyResult<f64> {
    let caught: RefCell<Option<PyErr>> = RefCell::new(None);
    let eval = |f: &Bound<'_, PyAny>, x: f64| -> f64 {
        match f.call1((x,)).and_then(|v| v.extract::<f64>()) {
            Ok(v) => v,
            Err(e) => {
                caught.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let out = metrics::kl_quadrature_1d(|x| eval(&logp, x), |x| eval(&logq, x), lo, hi, n);
    if let Some(e) = caught.into_inner() {
        return Err(e);
    }
    out.map_err(to_py)
}

/// Least-squares log-log fit; returns `(slope, intercept, r2)`.
#[pyfunction]
fn loglog_slope(points: Vec<(f64, f64)>) -> PyResult<(f64, f64, f64)> {
    let fit = metrics::loglog_slope(&points).map_err(to_py)?;
    Ok((fit.slope, fit.intercept, fit.r2))
}

/// Evolve independent chains and return snapshots at the checkpoints.
///
/// `init_var` all zero means a point mass at `init_mean`. `batch_size = None`
/// steps with the full gradient.
#[pyfunction]
#[pyo3(signature = (potential, beta_inv, schedule, seed, chains, horizon, checkpoints,
                    init_mean, init_var = None, batch_size = None, batch_replacement = true))]
#[allow(clippy::too_many_arguments)]
fn run_ensemble(
    potential: PyPotential,
    beta_inv: f64,
    schedule: PySchedule,
    seed: u64,
    chains: usize,
    horizon: usize,
    checkpoints: Vec<usize>,
    init_mean: Vec<f64>,
    init_var: Option<Vec<f64>>,
    batch_size: Option<usize>,
    batch_replacement: bool,
) -> PyResult<Vec<PySnapshot>> {
    let init = match init_var {
        Some(v) if v.iter().any(|x| *x > 0.0) => {
            sampler::InitialLaw::gaussian(init_mean, v).map_err(to_py)?
        }
        _ => sampler::InitialLaw::point(init_mean).map_err(to_py)?,
    };
    let batch = match batch_size {
        Some(s) => Some(model::BatchSpec::new(s, batch_replacement).map_err(to_py)?),
        None => None,
    };
    let cfg =
        sampler::SamplerConfig::new(beta_inv, schedule.inner, batch, seed, init).map_err(to_py)?;
    let run = sampler::run_ensemble(&potential.inner, &cfg, chains, horizon, &checkpoints)
        .map_err(to_py)?;
    Ok(run
        .snapshots
        .into_iter()
        .map(|inner| PySnapshot { inner })
        .collect())
}

#[pymodule]
fn sgld_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySchedule>()?;
    m.add_class::<PyGaussianLaw>()?;
    m.add_class::<PyPotential>()?;
    m.add_class::<PySnapshot>()?;
    m.add_function(wrap_pyfunction!(ou_exact_law, m)?)?;
    m.add_function(wrap_pyfunction!(em_law, m)?)?;
    m.add_function(wrap_pyfunction!(sgld_moment_law, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_kl, m)?)?;
    m.add_function(wrap_pyfunction!(kl_mean_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_w2, m)?)?;
    m.add_function(wrap_pyfunction!(mean_gap_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(bound_envelope, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_w1_1d, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_w2_1d, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_tv_hist, m)?)?;
    m.add_function(wrap_pyfunction!(kl_quadrature_1d, m)?)?;
    m.add_function(wrap_pyfunction!(loglog_slope, m)?)?;
    m.add_function(wrap_pyfunction!(run_ensemble, m)?)?;
    Ok(())
}
