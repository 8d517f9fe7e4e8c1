//! Python bindings: `import pymflqg`.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use mflqg::control;
use mflqg::error::Error;
use mflqg::model::{self, MeasureMoments};
use mflqg::partial_obs;
use mflqg::riccati::{self, default_steps};
use mflqg::simulate::{self, InitialLaw, SimConfig};

create_exception!(
    pymflqg,
    MflqgError,
    PyException,
    "Raised for every library error; the message starts with `[category]`."
);

fn py_err(e: Error) -> PyErr {
    MflqgError::new_err(format!("[{}] {e}", e.category()))
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for mflqg::error::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// Fully observed scalar problem with constant coefficients.
#[pyclass(name = "ProblemSpec", frozen)]
struct ProblemSpec(model::ProblemSpec);

#[pymethods]
impl ProblemSpec {
    #[new]
    #[pyo3(signature = (a, b, sigma, q, d1, d2, horizon))]
    fn new(a: f64, b: f64, sigma: f64, q: f64, d1: f64, d2: f64, horizon: f64) -> Self {
        ProblemSpec(model::ProblemSpec::constant(
            a, b, sigma, q, d1, d2, horizon,
        ))
    }

    #[staticmethod]
    #[pyo3(signature = (horizon = 1.0))]
    fn example1(horizon: f64) -> Self {
        ProblemSpec(model::ProblemSpec::example1(horizon))
    }

    #[staticmethod]
    #[pyo3(signature = (horizon = 1.0))]
    fn example2(horizon: f64) -> Self {
        ProblemSpec(model::ProblemSpec::example2(horizon))
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.0.horizon
    }

    #[getter]
    fn d1(&self) -> f64 {
        self.0.d1
    }

    #[getter]
    fn d2(&self) -> f64 {
        self.0.d2
    }

    fn validate(&self) -> PyResult<()> {
        self.0
            .validate(default_steps(self.0.horizon) + 1)
            .into_result()
            .py()
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

#[pyclass(name = "RiccatiSolution", frozen)]
struct RiccatiSolution(riccati::RiccatiSolution);

#[pymethods]
impl RiccatiSolution {
    #[getter]
    fn grid(&self) -> Vec<f64> {
        self.0.grid().to_vec()
    }

    #[getter]
    fn phi1(&self) -> Vec<f64> {
        self.0.values().iter().map(|p| p.phi1).collect()
    }

    #[getter]
    fn phi2(&self) -> Vec<f64> {
        self.0.values().iter().map(|p| p.phi2).collect()
    }

    #[getter]
    fn phi3(&self) -> Vec<f64> {
        self.0.values().iter().map(|p| p.phi3).collect()
    }

    /// `(phi1, phi2, phi3)` at `t`, linearly interpolated between nodes.
    fn sample(&self, t: f64) -> PyResult<(f64, f64, f64)> {
        let p = self.0.sample(t).py()?;
        Ok((p.phi1, p.phi2, p.phi3))
    }

    fn __len__(&self) -> usize {
        self.0.grid().len()
    }
}

#[pyclass(name = "FeedbackLaw", frozen)]
struct FeedbackLaw(control::FeedbackLaw);

#[pymethods]
impl FeedbackLaw {
    #[getter]
    fn grid(&self) -> Vec<f64> {
        self.0.grid().to_vec()
    }

    #[getter]
    fn alpha(&self) -> Vec<f64> {
        self.0.alpha().to_vec()
    }

    #[getter]
    fn beta(&self) -> Vec<f64> {
        self.0.beta().to_vec()
    }

    /// `(alpha(t), beta(t))`; the control is `alpha x + beta E[X]`.
    fn gains(&self, t: f64) -> PyResult<(f64, f64)> {
        self.0.gains(t).py()
    }

    fn perturbed(&self, d_alpha: f64, d_beta: f64) -> Self {
        FeedbackLaw(self.0.perturbed(d_alpha, d_beta))
    }
}

#[pyclass(name = "CostReport", frozen, get_all)]
struct CostReport {
    total: f64,
    running: f64,
    terminal: f64,
    std_error: f64,
    n_paths: usize,
}

#[pymethods]
impl CostReport {
    fn __repr__(&self) -> String {
        format!(
            "CostReport(total={}, running={}, terminal={}, std_error={}, n_paths={})",
            self.total, self.running, self.terminal, self.std_error, self.n_paths
        )
    }
}

impl From<simulate::CostReport> for CostReport {
    fn from(r: simulate::CostReport) -> Self {
        CostReport {
            total: r.total,
            running: r.running,
            terminal: r.terminal,
            std_error: r.std_error,
            n_paths: r.n_paths,
        }
    }
}

/// Partially observed problem on `[s, T]`.
#[pyclass(name = "PartialObsSpec", frozen)]
struct PartialObsSpec(partial_obs::PartialObsSpec);

#[pymethods]
impl PartialObsSpec {
    #[staticmethod]
    fn example3() -> Self {
        PartialObsSpec(partial_obs::PartialObsSpec::example3())
    }

    #[staticmethod]
    fn example4() -> Self {
        PartialObsSpec(partial_obs::PartialObsSpec::example4())
    }

    #[staticmethod]
    fn with_observability(observability: f64, d1: f64, d2: f64) -> PyResult<Self> {
        Ok(PartialObsSpec(
            partial_obs::PartialObsSpec::with_observability(observability, d1, d2).py()?,
        ))
    }

    /// Copy with `sigma_hat^2 = observability`, optionally moving `s` and `x`.
    #[pyo3(signature = (observability = None, s = None, x = None))]
    fn replace(
        &self,
        observability: Option<f64>,
        s: Option<f64>,
        x: Option<f64>,
    ) -> PyResult<Self> {
        let mut spec = match observability {
            Some(o) => self.0.reweighted(o).py()?,
            None => self.0.clone(),
        };
        if let Some(s) = s {
            spec.s = s;
        }
        if let Some(x) = x {
            spec.x = x;
        }
        spec.validate().py()?;
        Ok(PartialObsSpec(spec))
    }

    #[getter]
    fn sigma_hat(&self) -> f64 {
        self.0.sigma_hat
    }

    #[getter]
    fn sigma_tilde(&self) -> f64 {
        self.0.sigma_tilde
    }

    #[getter]
    fn s(&self) -> f64 {
        self.0.s
    }

    #[getter]
    fn x(&self) -> f64 {
        self.0.x
    }

    /// The fully observed problem for the prediction, on `[0, T - s]`.
    fn reduced_problem(&self) -> ProblemSpec {
        ProblemSpec(partial_obs::reduced_problem(&self.0))
    }

    fn error_variance(&self, t: f64) -> PyResult<f64> {
        partial_obs::error_variance(&self.0, t).py()
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

#[pyfunction]
#[pyo3(signature = (spec, steps = None))]
fn solve_riccati(spec: &ProblemSpec, steps: Option<usize>) -> PyResult<RiccatiSolution> {
    let steps = steps.unwrap_or_else(|| default_steps(spec.0.horizon));
    Ok(RiccatiSolution(
        riccati::solve_riccati(&spec.0, steps).py()?,
    ))
}

#[pyfunction]
fn analytic_riccati(preset: &str, horizon: f64, t: f64) -> PyResult<(f64, f64, f64)> {
    let p = riccati::analytic_riccati(preset, horizon, t).py()?;
    Ok((p.phi1, p.phi2, p.phi3))
}

/// `v(t, mu)` for a measure with moments `(m1, m2)`.
#[pyfunction]
fn value_function(sol: &RiccatiSolution, t: f64, m1: f64, m2: f64) -> PyResult<f64> {
    let mu = MeasureMoments::new(m1, m2).py()?;
    control::value_function(&sol.0, t, mu).py()
}

#[pyfunction]
fn optimal_feedback(spec: &ProblemSpec, sol: &RiccatiSolution) -> PyResult<FeedbackLaw> {
    Ok(FeedbackLaw(
        control::optimal_feedback(&spec.0, &sol.0).py()?,
    ))
}

#[pyfunction]
fn master_residual(
    spec: &ProblemSpec,
    sol: &RiccatiSolution,
    t: f64,
    m1: f64,
    m2: f64,
) -> PyResult<f64> {
    let mu = MeasureMoments::new(m1, m2).py()?;
    control::master_residual(&spec.0, &sol.0, t, mu).py()
}

/// Exact cost of `law` from the moment ODEs.
#[pyfunction]
#[pyo3(signature = (spec, law, m1, m2, steps = None))]
fn cost_oracle(
    spec: &ProblemSpec,
    law: &FeedbackLaw,
    m1: f64,
    m2: f64,
    steps: Option<usize>,
) -> PyResult<CostReport> {
    let steps = steps.unwrap_or_else(|| 2 * default_steps(spec.0.horizon));
    Ok(simulate::cost_oracle(&spec.0, &law.0, m1, m2, steps)
        .py()?
        .into())
}

/// Monte Carlo cost of `law` from a Dirac start at `x`.
#[pyfunction]
#[pyo3(signature = (spec, law, x, n_paths = 100_000, dt = 1e-3, seed = 42))]
fn simulate_mc(
    py: Python<'_>,
    spec: &ProblemSpec,
    law: &FeedbackLaw,
    x: f64,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> PyResult<CostReport> {
    let config = SimConfig::new(n_paths, dt, seed);
    let (spec, law) = (&spec.0, &law.0);
    let report = py.detach(|| simulate::simulate_mc(spec, law, &InitialLaw::Dirac(x), &config));
    Ok(report.py()?.into())
}

/// Optimal cost `V*(s, x)` of the partially observed problem.
#[pyfunction]
#[pyo3(signature = (spec, steps = None))]
fn partial_value(spec: &PartialObsSpec, steps: Option<usize>) -> PyResult<f64> {
    let reduced = partial_obs::reduced_problem(&spec.0);
    let steps = steps.unwrap_or_else(|| default_steps(spec.0.duration()));
    let sol = riccati::solve_riccati(&reduced, steps).py()?;
    partial_obs::partial_value(&spec.0, &sol).py()
}

/// Monte Carlo cost of the optimal law for the partially observed problem.
#[pyfunction]
#[pyo3(signature = (spec, n_paths = 100_000, dt = 1e-3, seed = 42, steps = None))]
fn simulate_partial(
    py: Python<'_>,
    spec: &PartialObsSpec,
    n_paths: usize,
    dt: f64,
    seed: u64,
    steps: Option<usize>,
) -> PyResult<CostReport> {
    let spec = &spec.0;
    let report = py.detach(|| {
        let reduced = partial_obs::reduced_problem(spec);
        let sol = riccati::solve_riccati(
            &reduced,
            steps.unwrap_or_else(|| default_steps(spec.duration())),
        )?;
        let law = control::optimal_feedback(&reduced, &sol)?;
        partial_obs::simulate_partial(spec, &law, &SimConfig::new(n_paths, dt, seed))
    });
    Ok(report.py()?.into())
}

#[pymodule]
fn pymflqg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("MflqgError", m.py().get_type::<MflqgError>())?;
    m.add_class::<ProblemSpec>()?;
    m.add_class::<RiccatiSolution>()?;
    m.add_class::<FeedbackLaw>()?;
    m.add_class::<CostReport>()?;
    m.add_class::<PartialObsSpec>()?;
    m.add_function(wrap_pyfunction!(solve_riccati, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_riccati, m)?)?;
    m.add_function(wrap_pyfunction!(value_function, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_feedback, m)?)?;
    m.add_function(wrap_pyfunction!(master_residual, m)?)?;
    m.add_function(wrap_pyfunction!(cost_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_mc, m)?)?;
    m.add_function(wrap_pyfunction!(partial_value, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_partial, m)?)?;
    Ok(())
}
