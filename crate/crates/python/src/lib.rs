//! Python bindings for `collapse_core`.
//!
//! States and parameters are opaque handles; grids, amplitudes and tables
//! cross the boundary as plain lists of floats or complex numbers.

use std::collections::HashMap;

use collapse_core::bounds::{self, InterferometryExperiment};
use collapse_core::csl::{self, CslParams};
use collapse_core::dp::{self, MassDistribution};
use collapse_core::experiment;
use collapse_core::grw::{self, CollapseParams, TrajectoryConfig};
use collapse_core::master;
use collapse_core::propagator::{self, Hamiltonian};
use collapse_core::qstate::{self, DensityMatrix, Grid1D, WaveFunction};
use collapse_core::CollapseError;
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

create_exception!(collapse_lab, CollapseLabError, PyValueError);

fn py_err(e: CollapseError) -> PyErr {
    CollapseLabError::new_err(e.to_string())
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for collapse_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn hamiltonian(omega: Option<f64>) -> PyResult<Hamiltonian> {
    match omega {
        Some(w) => Hamiltonian::harmonic(w).py(),
        None => Ok(Hamiltonian::free()),
    }
}

/// Periodic 1D grid centred on zero.
#[pyclass(name = "Grid", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGrid(Grid1D);

#[pymethods]
impl PyGrid {
    #[new]
    fn new(half_width: f64, n_points: usize) -> PyResult<Self> {
        Ok(PyGrid(Grid1D::centered(half_width, n_points).py()?))
    }

    #[getter]
    fn n_points(&self) -> usize {
        self.0.n_points()
    }

    #[getter]
    fn dx(&self) -> f64 {
        self.0.dx()
    }

    #[getter]
    fn x_min(&self) -> f64 {
        self.0.x_min()
    }

    fn points(&self) -> Vec<f64> {
        self.0.points()
    }

    fn __repr__(&self) -> String {
        format!(
            "Grid(x_min={:e}, dx={:e}, n_points={})",
            self.0.x_min(),
            self.0.dx(),
            self.0.n_points()
        )
    }
}

#[pyclass(name = "WaveFunction", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyWaveFunction(WaveFunction);

#[pymethods]
impl PyWaveFunction {
    #[staticmethod]
    #[pyo3(signature = (grid, center, width, mass, momentum=0.0))]
    fn gaussian(grid: &PyGrid, center: f64, width: f64, mass: f64, momentum: f64) -> PyResult<Self> {
        Ok(PyWaveFunction(
            qstate::gaussian_packet(&grid.0, center, width, momentum, mass).py()?,
        ))
    }

    /// `a |left> + b |right>` with lobes `separation` apart about the grid midpoint.
    #[staticmethod]
    fn two_peak(grid: &PyGrid, a: Complex64, b: Complex64, separation: f64, width: f64, mass: f64) -> PyResult<Self> {
        Ok(PyWaveFunction(
            qstate::two_peak_superposition(&grid.0, a, b, separation, width, mass).py()?,
        ))
    }

    #[staticmethod]
    fn product(first: &PyWaveFunction, second: &PyWaveFunction) -> PyResult<Self> {
        Ok(PyWaveFunction(WaveFunction::product(&first.0, &second.0).py()?))
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(*self.0.grid())
    }

    #[getter]
    fn n_particles(&self) -> usize {
        self.0.n_particles()
    }

    fn amplitudes(&self) -> Vec<Complex64> {
        self.0.amplitudes().to_vec()
    }

    fn norm_squared(&self) -> f64 {
        self.0.norm_squared()
    }

    fn fidelity(&self, other: &PyWaveFunction) -> f64 {
        self.0.fidelity(&other.0)
    }

    #[pyo3(signature = (particle=0))]
    fn left_probability(&self, particle: usize) -> f64 {
        self.0.left_probability(particle)
    }

    /// Norm, position mean and variance, momentum mean and kinetic energy.
    fn observables(&self) -> Sample {
        let o = qstate::observables(&self.0);
        let mut out = sample(&o);
        out.insert("norm", o.norm);
        out.insert("mean_p", o.mean_p);
        out
    }

    /// Unitary evolution, free unless a harmonic `omega` is given.
    #[pyo3(signature = (t, dt, omega=None))]
    fn evolve(&self, t: f64, dt: f64, omega: Option<f64>) -> PyResult<Self> {
        Ok(PyWaveFunction(
            propagator::evolve(&self.0, &hamiltonian(omega)?, t, dt).py()?,
        ))
    }
}

#[pyclass(name = "CollapseParams", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCollapseParams(CollapseParams);

#[pymethods]
impl PyCollapseParams {
    #[new]
    fn new(lam: f64, r_c: f64) -> PyResult<Self> {
        Ok(PyCollapseParams(CollapseParams::new(lam, r_c).py()?))
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.0.lambda()
    }

    #[getter]
    fn r_c(&self) -> f64 {
        self.0.r_c()
    }

    fn decay_kernel(&self, d: f64) -> f64 {
        master::decay_kernel(d, &self.0)
    }

    fn effective_rate(&self, n_constituents: f64) -> PyResult<f64> {
        grw::effective_rate(n_constituents, &self.0).py()
    }

    fn heating_rate(&self, mass: f64, n_constituents: f64) -> PyResult<f64> {
        bounds::heating_rate(&self.0, mass, n_constituents).py()
    }

    fn __repr__(&self) -> String {
        format!("CollapseParams(lam={:e}, r_c={:e})", self.0.lambda(), self.0.r_c())
    }
}

#[pyclass(name = "DensityMatrix", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDensityMatrix(DensityMatrix);

#[pymethods]
impl PyDensityMatrix {
    #[staticmethod]
    fn from_pure(state: &PyWaveFunction) -> PyResult<Self> {
        Ok(PyDensityMatrix(DensityMatrix::from_pure(&state.0).py()?))
    }

    fn trace(&self) -> f64 {
        self.0.trace()
    }

    fn purity(&self) -> f64 {
        self.0.purity()
    }

    fn element(&self, i: usize, j: usize) -> Complex64 {
        self.0.element(i, j)
    }

    fn trace_distance(&self, other: &PyDensityMatrix) -> PyResult<f64> {
        self.0.trace_distance(&other.0).py()
    }

    /// Master-equation evolution under the collapse term.
    #[pyo3(signature = (params, t, dt, omega=None))]
    fn evolve(&self, params: &PyCollapseParams, t: f64, dt: f64, omega: Option<f64>) -> PyResult<Self> {
        let h = hamiltonian(omega)?;
        Ok(PyDensityMatrix(
            master::evolve_density_matrix(&self.0, &h, &params.0, t, dt).py()?,
        ))
    }
}

/// `p(c)` over every grid centre for one particle.
#[pyfunction]
#[pyo3(signature = (state, params, particle=0))]
fn collapse_probability_density(
    state: &PyWaveFunction,
    params: &PyCollapseParams,
    particle: usize,
) -> PyResult<Vec<f64>> {
    grw::collapse_probability_density(&state.0, particle, &params.0).py()
}

#[pyfunction]
#[pyo3(signature = (state, center, params, particle=0))]
fn apply_collapse(
    state: &PyWaveFunction,
    center: f64,
    params: &PyCollapseParams,
    particle: usize,
) -> PyResult<PyWaveFunction> {
    Ok(PyWaveFunction(
        grw::apply_collapse(&state.0, particle, center, &params.0).py()?,
    ))
}

type Sample = HashMap<&'static str, f64>;
type Table = (Vec<String>, Vec<Vec<f64>>, Vec<(String, f64)>);

fn sample(o: &qstate::Observables) -> Sample {
    HashMap::from([
        ("mean_x", o.mean_x),
        ("var_x", o.var_x),
        ("kinetic_energy", o.kinetic_energy),
    ])
}

/// One GRW trajectory. Returns `(event_times, observables_per_sample)`.
#[pyfunction]
#[pyo3(signature = (state, params, t_final, dt, sample_times, seed, omega=None))]
#[allow(clippy::too_many_arguments)]
fn grw_trajectory(
    py: Python<'_>,
    state: &PyWaveFunction,
    params: &PyCollapseParams,
    t_final: f64,
    dt: f64,
    sample_times: Vec<f64>,
    seed: u64,
    omega: Option<f64>,
) -> PyResult<(Vec<f64>, Vec<Sample>)> {
    let h = hamiltonian(omega)?;
    let config = TrajectoryConfig::new(t_final, dt, sample_times);
    let record = py
        .detach(|| grw::run_trajectory(&state.0, &h, &params.0, &config, seed))
        .py()?;
    let obs = record.observables.iter().map(sample).collect();
    Ok((record.events.iter().map(|e| e.time).collect(), obs))
}

/// One CSL trajectory with rates matched to `params`; returns observables per sample.
#[pyfunction]
#[pyo3(signature = (state, params, t_final, dt, sample_times, seed))]
fn csl_trajectory(
    py: Python<'_>,
    state: &PyWaveFunction,
    params: &PyCollapseParams,
    t_final: f64,
    dt: f64,
    sample_times: Vec<f64>,
    seed: u64,
) -> PyResult<Vec<Sample>> {
    let csl: CslParams = csl::match_parameters(&params.0);
    let config = TrajectoryConfig::new(t_final, dt, sample_times);
    let record = py
        .detach(|| csl::run_csl_trajectory(&state.0, &Hamiltonian::free(), &csl, &config, seed))
        .py()?;
    Ok(record.observables.iter().map(sample).collect())
}

fn distribution(kind: &str, mass: f64, size: f64, center: [f64; 3]) -> PyResult<MassDistribution> {
    match kind {
        "sphere" => MassDistribution::uniform_sphere(mass, size, center).py(),
        "gaussian" => MassDistribution::gaussian(mass, size, center).py(),
        other => Err(PyValueError::new_err(format!(
            "unknown shape `{other}`; use sphere or gaussian"
        ))),
    }
}

/// Self-energy of the difference of two copies of a body displaced by `displacement`.
#[pyfunction]
#[pyo3(signature = (mass, size, displacement, shape="sphere"))]
fn delta_e(mass: f64, size: f64, displacement: [f64; 3], shape: &str) -> PyResult<f64> {
    let a = distribution(shape, mass, size, [0.0; 3])?;
    let b = distribution(shape, mass, size, displacement)?;
    dp::delta_e(&a, &b).py()
}

#[pyfunction]
fn collapse_time(delta_e: f64) -> PyResult<f64> {
    dp::collapse_time(delta_e).py()
}

#[pyfunction]
fn visibility(mass_amu: f64, separation: f64, duration: f64, lam: f64, r_c: f64) -> PyResult<f64> {
    let exp = InterferometryExperiment::new(mass_amu, separation, duration, 0.5).py()?;
    bounds::visibility(&exp, lam, r_c).py()
}

#[pyfunction]
fn lambda_upper_bound(mass_amu: f64, separation: f64, duration: f64, visibility_floor: f64, r_c: f64) -> PyResult<f64> {
    let exp = InterferometryExperiment::new(mass_amu, separation, duration, visibility_floor).py()?;
    Ok(bounds::lambda_upper_bound(&exp, r_c).py()?.lambda_upper)
}

/// Runs a TOML experiment config. Returns `(columns, rows, summary)`.
#[pyfunction]
fn run_experiment(py: Python<'_>, config_toml: &str) -> PyResult<Table> {
    let config = experiment::parse_config(config_toml).py()?;
    let result = py.detach(|| experiment::run(&config)).py()?;
    Ok((result.columns, result.rows, result.summary))
}

/// CSV text, provenance block included, for a TOML experiment config.
#[pyfunction]
fn run_experiment_csv(py: Python<'_>, config_toml: &str) -> PyResult<String> {
    let config = experiment::parse_config(config_toml).py()?;
    let result = py.detach(|| experiment::run(&config)).py()?;
    experiment::render_csv(&result).py()
}

#[pymodule]
fn collapse_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CollapseLabError", m.py().get_type::<CollapseLabError>())?;
    m.add("HBAR", collapse_core::HBAR)?;
    m.add("AMU", collapse_core::AMU)?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyWaveFunction>()?;
    m.add_class::<PyCollapseParams>()?;
    m.add_class::<PyDensityMatrix>()?;
    m.add_function(wrap_pyfunction!(collapse_probability_density, m)?)?;
    m.add_function(wrap_pyfunction!(apply_collapse, m)?)?;
    m.add_function(wrap_pyfunction!(grw_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(csl_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(delta_e, m)?)?;
    m.add_function(wrap_pyfunction!(collapse_time, m)?)?;
    m.add_function(wrap_pyfunction!(visibility, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_upper_bound, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment_csv, m)?)?;
    Ok(())
}
