//! Python bindings. The extension module is named `scar_metrology`.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use scar_metrology as core;
use scar_metrology::{Backend, CollectiveKind, SpinBasis};

fn err(e: core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn backend(name: &str) -> PyResult<Backend> {
    match name {
        "auto" => Ok(Backend::Auto),
        "dense-eig" => Ok(Backend::DenseEig),
        "krylov" => Ok(Backend::Krylov),
        other => Err(PyValueError::new_err(format!(
            "unknown backend `{other}` (expected auto, dense-eig or krylov)"
        ))),
    }
}

/// Model parameters on a `d`-dimensional lattice of `n_sites` spin-1 sites.
#[pyclass(name = "HamiltonianSpec", from_py_object)]
#[derive(Clone)]
struct PySpec {
    inner: core::HamiltonianSpec,
}

#[pymethods]
impl PySpec {
    #[new]
    #[pyo3(signature = (n_sites, omega, eta, chi, perturbation=0.0, side_length=10.0, gamma=2.0, lam=1.0, d=1))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        n_sites: usize,
        omega: f64,
        eta: f64,
        chi: f64,
        perturbation: f64,
        side_length: f64,
        gamma: f64,
        lam: f64,
        d: usize,
    ) -> PyResult<Self> {
        let lattice = core::LatticeSpec {
            d,
            side_length,
            n_sites,
            gamma,
            lambda: lam,
        };
        let inner = core::HamiltonianSpec::new(lattice, omega, eta, chi).with_perturbation(perturbation);
        inner.validate().map_err(err)?;
        Ok(PySpec { inner })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(PySpec {
            inner: core::HamiltonianSpec::from_toml_str(text).map_err(err)?,
        })
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    #[getter]
    fn n_sites(&self) -> usize {
        self.inner.n_sites()
    }

    #[getter]
    fn omega(&self) -> f64 {
        self.inner.omega
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta
    }

    #[getter]
    fn chi(&self) -> f64 {
        self.inner.chi
    }

    #[getter]
    fn perturbation(&self) -> f64 {
        self.inner.perturbation
    }

    fn is_dmi_point(&self) -> bool {
        self.inner.is_dmi_point()
    }

    fn __repr__(&self) -> String {
        let s = &self.inner;
        format!(
            "HamiltonianSpec(n_sites={}, omega={}, eta={}, chi={}, perturbation={})",
            s.n_sites(),
            s.omega,
            s.eta,
            s.chi,
            s.perturbation
        )
    }
}

/// Normalized state in the full `3^N` product basis.
#[pyclass(name = "State", from_py_object)]
#[derive(Clone)]
struct PyState {
    inner: core::StateVector,
}

#[pymethods]
impl PyState {
    #[new]
    fn new(n_sites: usize, amplitudes: Vec<Complex64>) -> PyResult<Self> {
        let inner = core::StateVector::normalized(core::Basis::Full { n_sites }, amplitudes).map_err(err)?;
        Ok(PyState { inner })
    }

    #[getter]
    fn n_sites(&self) -> usize {
        self.inner.basis().n_sites()
    }

    fn __len__(&self) -> usize {
        self.inner.dim()
    }

    fn amplitudes(&self) -> Vec<Complex64> {
        self.inner.amplitudes().to_vec()
    }

    fn norm(&self) -> f64 {
        self.inner.norm()
    }

    fn fidelity(&self, other: &PyState) -> f64 {
        self.inner.fidelity(&other.inner)
    }

    /// QFI density `4 Var(Q^axis) / N` for `axis` in x, y, z.
    #[pyo3(signature = (axis="y"))]
    fn qfi_density(&self, axis: &str) -> PyResult<f64> {
        let kind = match axis {
            "x" => CollectiveKind::X,
            "y" => CollectiveKind::Y,
            "z" => CollectiveKind::Z,
            _ => return Err(PyValueError::new_err("axis must be x, y or z")),
        };
        let n = self.n_sites();
        let op = SpinBasis::new(n).map_err(err)?.collective_operator(kind);
        Ok(core::qfi_pure(&self.inner, &op, axis).map_err(err)?.density)
    }

    /// Weight of the state inside the scar tower.
    fn scar_weight(&self) -> PyResult<f64> {
        let tower = core::ScarTower::build(self.n_sites()).map_err(err)?;
        Ok(tower.states().iter().map(|s| s.fidelity(&self.inner)).sum())
    }

    /// Husimi function `|<theta, phi|psi>|^2`.
    fn husimi(&self, theta: f64, phi: f64) -> PyResult<f64> {
        core::husimi::husimi_value(&self.inner, theta, phi).map_err(err)
    }

    /// Localization integral on the minimal exact quadrature.
    fn localization(&self) -> PyResult<f64> {
        let n = self.n_sites();
        core::husimi::localization_integral(&self.inner, &core::husimi::SphereQuadrature::minimal(n)).map_err(err)
    }
}

/// Time series along one trajectory.
#[pyclass(name = "Trajectory", get_all)]
struct PyTrajectory {
    times: Vec<f64>,
    f: Vec<f64>,
    localization: Vec<f64>,
    fidelity: Vec<f64>,
    backend: String,
}

impl From<core::dynamics::TrajectoryRecord> for PyTrajectory {
    fn from(r: core::dynamics::TrajectoryRecord) -> Self {
        PyTrajectory {
            times: r.times,
            f: r.f_series,
            localization: r.i_series,
            fidelity: r.fidelity_series,
            backend: r.backend,
        }
    }
}

#[pymethods]
impl PyTrajectory {
    fn max_f(&self) -> (f64, f64) {
        self.f
            .iter()
            .zip(&self.times)
            .fold((f64::NEG_INFINITY, f64::NAN), |acc, (&f, &t)| if f > acc.0 { (f, t) } else { acc })
    }
}

#[pyfunction]
fn coherent_state(n_sites: usize, theta: f64, phi: f64) -> PyResult<PyState> {
    Ok(PyState {
        inner: core::dynamics::coherent_state(n_sites, theta, phi).map_err(err)?,
    })
}

/// Evolves `psi0` under the total Hamiltonian and returns the state at `t`.
#[pyfunction]
#[pyo3(signature = (spec, psi0, t, backend="auto"))]
fn evolve(spec: &PySpec, psi0: &PyState, t: f64, backend: &str) -> PyResult<PyState> {
    let h = core::build_total(&spec.inner).map_err(err)?;
    let prop = core::Propagator::new(&h, self::backend(backend)?).map_err(err)?;
    let out = prop.apply(psi0.inner.amplitudes(), t).map_err(err)?;
    Ok(PyState {
        inner: core::StateVector::normalized(psi0.inner.basis(), out).map_err(err)?,
    })
}

/// Trajectory of the `theta = pi/2, phi = 0` coherent state.
#[pyfunction]
#[pyo3(signature = (spec, times, backend="auto", localization=false))]
fn trajectory(spec: &PySpec, times: Vec<f64>, backend: &str, localization: bool) -> PyResult<PyTrajectory> {
    let psi0 = core::dynamics::coherent_state(spec.inner.n_sites(), std::f64::consts::FRAC_PI_2, 0.0).map_err(err)?;
    let rec = core::dynamics::trajectory(&spec.inner, &psi0, &times, self::backend(backend)?, localization)
        .map_err(err)?;
    Ok(rec.into())
}

/// Same trajectory computed in the `(N+1)`-dimensional tower.
#[pyfunction]
fn collective_trajectory(spec: &PySpec, times: Vec<f64>) -> PyResult<PyTrajectory> {
    let rec = core::oracle::collective_trajectory(&spec.inner, std::f64::consts::FRAC_PI_2, 0.0, &times)
        .map_err(err)?;
    Ok(rec.into())
}

#[pyfunction]
fn twisting_time(n_sites: usize, chi: f64) -> f64 {
    core::dynamics::twisting_time(n_sites, chi)
}

/// Eigenstate scan: `(energies, qfi_densities, scar_overlaps)`.
#[pyfunction]
#[allow(clippy::type_complexity)]
fn eigenstate_scan(spec: &PySpec) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let r = core::spectrum::eigenstate_qfi_scan(&spec.inner).map_err(err)?;
    Ok((r.energies, r.qfi_densities, r.scar_overlaps))
}

#[pyfunction]
fn gap_ratio(energies: Vec<f64>) -> PyResult<f64> {
    core::spectrum::gap_ratio(&energies).map_err(err)
}

#[pyfunction]
fn goe_gap_ratio(dim: usize, samples: usize, seed: u64) -> PyResult<f64> {
    core::spectrum::goe_gap_ratio(dim, samples, seed).map_err(err)
}

/// Echo estimation error at preparation time `t`, with `omega = -chi/N`.
#[pyfunction]
#[pyo3(signature = (n_sites, eta, chi, t, backend="auto", side_length=10.0, gamma=2.0, lam=1.0))]
#[allow(clippy::too_many_arguments)]
fn estimation_error(
    n_sites: usize,
    eta: f64,
    chi: f64,
    t: f64,
    backend: &str,
    side_length: f64,
    gamma: f64,
    lam: f64,
) -> PyResult<f64> {
    let lattice = core::LatticeSpec::chain(n_sites, side_length, gamma, lam);
    let echo = core::metrology::EchoSpec::new(lattice, eta, chi, t);
    Ok(core::metrology::estimation_error(&echo, self::backend(backend)?)
        .map_err(err)?
        .delta_eps)
}

/// Collective-model value of the same estimation error at `eta = pi/2`.
#[pyfunction]
fn oracle_estimation_error(n_sites: usize, chi: f64, t: f64) -> PyResult<f64> {
    Ok(core::oracle::oracle_estimation_error(n_sites, chi, t).map_err(err)?.delta_eps)
}

/// Dispersive nonlinearity `N J^2 / (omega - omega_a)`.
#[pyfunction]
fn chi_eff(n_sites: usize, omega: f64, omega_a: f64, coupling: f64) -> PyResult<f64> {
    let base = core::HamiltonianSpec::new(
        core::LatticeSpec::chain(n_sites, 10.0, 2.0, 1.0),
        omega,
        std::f64::consts::FRAC_PI_2,
        0.0,
    );
    core::boson::BosonCoupledSpec::new(base, omega_a, coupling).chi_eff().map_err(err)
}

#[pyfunction]
fn witness_bound(f: f64) -> i64 {
    core::witness_bound(f)
}

/// Structural checks as `(name, value, tolerance, passed)` tuples.
#[pyfunction]
fn verify(n_sites: usize) -> PyResult<Vec<(String, f64, f64, bool)>> {
    let r = core::verification::verify(n_sites).map_err(err)?;
    Ok(r.checks
        .into_iter()
        .map(|c| (c.name, c.value, c.tolerance, c.passed))
        .collect())
}

#[pymodule]
#[pyo3(name = "scar_metrology")]
fn py_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpec>()?;
    m.add_class::<PyState>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(coherent_state, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(collective_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(twisting_time, m)?)?;
    m.add_function(wrap_pyfunction!(eigenstate_scan, m)?)?;
    m.add_function(wrap_pyfunction!(gap_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(goe_gap_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(estimation_error, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_estimation_error, m)?)?;
    m.add_function(wrap_pyfunction!(chi_eff, m)?)?;
    m.add_function(wrap_pyfunction!(witness_bound, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
