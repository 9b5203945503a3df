//! Coherent-state preparation, unitary evolution and QFI time series.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::{build_total, HamiltonianSpec};
use crate::husimi::{LocalizationEvaluator, SphereQuadrature};
use crate::model::{CollectiveKind, SpinBasis};
use crate::propagate::{Backend, Propagator};
use crate::sparse::{SparseOperator, C64};
use crate::state::{Basis, StateVector};

/// Points in the default twisting grid.
pub const TWISTING_POINTS: usize = 400;

/// Product state `prod_n [cos(theta/2)|-1> + e^{-i phi} sin(theta/2)|+1>]`.
pub fn coherent_state(n_sites: usize, theta: f64, phi: f64) -> Result<StateVector> {
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::spec("theta", "must lie in [0, pi]"));
    }
    let basis = SpinBasis::new(n_sites)?;
    let down = C64::new((theta / 2.0).cos(), 0.0);
    let up = C64::from_polar((theta / 2.0).sin(), -phi);
    let mut amps = vec![C64::new(0.0, 0.0); basis.dim()];
    // only configurations without a 0 level contribute
    for mask in 0u32..(1 << n_sites) {
        let mut idx = 0;
        let mut amp = C64::new(1.0, 0.0);
        for site in 0..n_sites {
            if mask >> site & 1 == 1 {
                idx += 2 * 3usize.pow(site as u32);
                amp *= up;
            } else {
                amp *= down;
            }
        }
        amps[idx] = amp;
    }
    StateVector::from_normalized(Basis::Full { n_sites }, amps)
}

/// Evolves `psi0` under `h` and streams each snapshot to `visit`.
/// Returns the backend that was actually used.
pub fn evolve_with<F>(
    h: &SparseOperator,
    psi0: &StateVector,
    times: &[f64],
    backend: Backend,
    mut visit: F,
) -> Result<Backend>
where
    F: FnMut(usize, f64, &StateVector) -> Result<()>,
{
    check_input(h, psi0)?;
    let prop = Propagator::new(h, backend)?;
    let basis = psi0.basis();
    prop.evolve_with(psi0.amplitudes(), times, |k, t, amps| {
        let s = StateVector::from_normalized(basis, amps.to_vec())?;
        visit(k, t, &s)
    })?;
    Ok(prop.backend())
}

/// Collects every snapshot. Memory grows with `times.len() * dim`.
pub fn evolve(
    h: &SparseOperator,
    psi0: &StateVector,
    times: &[f64],
    backend: Backend,
) -> Result<Vec<StateVector>> {
    let mut out = Vec::with_capacity(times.len());
    evolve_with(h, psi0, times, backend, |_, _, s| {
        out.push(s.clone());
        Ok(())
    })?;
    Ok(out)
}

fn check_input(h: &SparseOperator, psi0: &StateVector) -> Result<()> {
    if h.dim() != psi0.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: psi0.dim(),
        });
    }
    let n = psi0.norm();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized(n));
    }
    Ok(())
}

/// `f(t_k) = 4 Var(O) / N` for each snapshot.
pub fn qfi_timeseries(states: &[StateVector], op: &SparseOperator) -> Result<Vec<f64>> {
    states
        .iter()
        .map(|s| crate::qfi::qfi_pure(s, op, "O").map(|r| r.density))
        .collect()
}

/// A trajectory summary: QFI density, localization and return fidelity per time.
#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryRecord {
    pub spec: HamiltonianSpec,
    pub times: Vec<f64>,
    pub f_series: Vec<f64>,
    /// Localization integral; `NaN` where it was not computed.
    pub i_series: Vec<f64>,
    pub fidelity_series: Vec<f64>,
    pub backend: String,
}

#[derive(Serialize)]
struct TrajectoryRow {
    t: f64,
    f: f64,
    #[serde(rename = "I")]
    i: f64,
    fidelity: f64,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest `f` and the time where it occurs.
    pub fn max_f(&self) -> (f64, f64) {
        self.f_series
            .iter()
            .zip(&self.times)
            .fold((f64::NEG_INFINITY, f64::NAN), |acc, (&f, &t)| if f > acc.0 { (f, t) } else { acc })
    }

    /// Mean of `f` over the samples with `t` in `[t0, t1]`.
    pub fn mean_f(&self, t0: f64, t1: f64) -> Option<f64> {
        let vals: Vec<f64> = self
            .times
            .iter()
            .zip(&self.f_series)
            .filter(|(t, _)| (t0..=t1).contains(*t))
            .map(|(_, f)| *f)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    /// CSV with columns `t, f, I, fidelity`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for k in 0..self.len() {
            out.serialize(TrajectoryRow {
                t: self.times[k],
                f: self.f_series[k],
                i: self.i_series[k],
                fidelity: self.fidelity_series[k],
            })
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Evolves `psi0` under `H_tot(spec)` and records `f` (with `Q^y`), the
/// return fidelity and, when `localization` is set, the integral `I`.
pub fn trajectory(
    spec: &HamiltonianSpec,
    psi0: &StateVector,
    times: &[f64],
    backend: Backend,
    localization: bool,
) -> Result<TrajectoryRecord> {
    let h = build_total(spec)?;
    let basis = SpinBasis::new(spec.n_sites())?;
    let qy = basis.collective_operator(CollectiveKind::Y);
    let evaluator = if localization {
        Some(LocalizationEvaluator::new(
            spec.n_sites(),
            SphereQuadrature::minimal(spec.n_sites()),
        )?)
    } else {
        None
    };
    let n = spec.n_sites() as f64;
    let mut f_series = Vec::with_capacity(times.len());
    let mut i_series = Vec::with_capacity(times.len());
    let mut fidelity_series = Vec::with_capacity(times.len());
    let used = evolve_with(&h, psi0, times, backend, |_, _, s| {
        f_series.push(4.0 * s.variance(&qy) / n);
        i_series.push(match &evaluator {
            Some(e) => e.integral(s)?,
            None => f64::NAN,
        });
        fidelity_series.push(psi0.fidelity(s));
        Ok(())
    })?;
    Ok(TrajectoryRecord {
        spec: spec.clone(),
        times: times.to_vec(),
        f_series,
        i_series,
        fidelity_series,
        backend: used.label().to_string(),
    })
}

/// The twisting time `t* = pi N / (2 chi)`.
pub fn twisting_time(n_sites: usize, chi: f64) -> f64 {
    PI * n_sites as f64 / (2.0 * chi)
}

/// `points` equally spaced times over `[0, 1.2 t*]`.
pub fn twisting_times(n_sites: usize, chi: f64, points: usize) -> Vec<f64> {
    linspace(0.0, 1.2 * twisting_time(n_sites, chi), points)
}

pub fn linspace(a: f64, b: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![a],
        _ => (0..points)
            .map(|k| a + (b - a) * k as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// One row of the fixed-volume scan.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaxQfiRow {
    #[serde(rename = "N")]
    pub n_sites: usize,
    pub eta: f64,
    pub chi: f64,
    pub max_f: f64,
    pub argmax_t: f64,
}

/// For each `N`, evolves the `theta = pi/2` coherent state on the default
/// twisting grid and records the largest QFI density. The lattice keeps
/// `base`'s side length, so the couplings strengthen as `N` grows.
pub fn max_qfi_scan(
    base: &HamiltonianSpec,
    sizes: &[usize],
    points: usize,
    backend: Backend,
) -> Result<Vec<MaxQfiRow>> {
    sizes
        .par_iter()
        .map(|&n| {
            let mut spec = base.clone();
            spec.lattice.n_sites = n;
            spec.validate()?;
            let times = twisting_times(n, spec.chi, points);
            let step = times.get(1).copied().unwrap_or(f64::INFINITY) - times[0];
            let needed = 0.02 * n as f64 / spec.chi.abs();
            if !(step <= needed) {
                return Err(Error::UnderResolved(format!(
                    "time step {step} exceeds 0.02 N/chi = {needed}"
                )));
            }
            let psi0 = coherent_state(n, PI / 2.0, 0.0)?;
            let rec = trajectory(&spec, &psi0, &times, backend, false)?;
            let (max_f, argmax_t) = rec.max_f();
            Ok(MaxQfiRow {
                n_sites: n,
                eta: spec.eta,
                chi: spec.chi,
                max_f,
                argmax_t,
            })
        })
        .collect()
}

/// CSV with columns `N, eta, chi, max_f, argmax_t`.
pub fn write_sweep_csv<W: Write>(rows: &[MaxQfiRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}
