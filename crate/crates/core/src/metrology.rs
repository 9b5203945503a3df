//! Echo phase estimation: prepare with `U(omega, chi; t)`, encode
//! `e^{i eps Q^y}`, reverse `(omega, chi)` for another `t`, read out `Q^y`.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::dynamics::{coherent_state, csv_err, linspace};
use crate::error::{Error, Result};
use crate::hamiltonian::{build_total, HamiltonianSpec};
use crate::model::{CollectiveKind, LatticeSpec, SpinBasis};
use crate::propagate::{Backend, Propagator};
use crate::sparse::{inner, SparseOperator, C64};
use crate::state::StateVector;

/// Derivatives below this are treated as a vanished signal.
pub const SIGNAL_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EchoSpec {
    pub base: HamiltonianSpec,
    /// Preparation time.
    pub t: f64,
    pub epsilon: f64,
    pub fd_step: f64,
}

impl EchoSpec {
    /// Echo on `lattice` with `omega = -chi/N`.
    pub fn new(lattice: LatticeSpec, eta: f64, chi: f64, t: f64) -> Self {
        let omega = -chi / lattice.n_sites as f64;
        EchoSpec {
            base: HamiltonianSpec::new(lattice, omega, eta, chi),
            t,
            epsilon: 0.0,
            fd_step: 1e-5,
        }
    }

    pub fn with_time(&self, t: f64) -> Self {
        EchoSpec { t, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.base.omega != -self.base.chi / self.base.n_sites() as f64 {
            return Err(Error::spec("omega", "the echo requires omega = -chi/N"));
        }
        if !(self.t >= 0.0) || !self.t.is_finite() {
            return Err(Error::spec("t", "must be finite and >= 0"));
        }
        if !self.epsilon.is_finite() || !(self.fd_step > 0.0) {
            return Err(Error::spec("fd_step", "must be positive"));
        }
        Ok(())
    }

    /// The spec with `omega` and `chi` negated; `H_int` is unchanged.
    pub fn reversed(&self) -> HamiltonianSpec {
        let mut s = self.base.clone();
        s.omega = -s.omega;
        s.chi = -s.chi;
        s
    }
}

/// `e^{i eps Q^y}` as a product of single-site rotations on the
/// `{|-1>, |+1>}` pair of each site.
pub fn encode(psi: &[C64], n_sites: usize, eps: f64) -> Vec<C64> {
    let (c, s) = ((eps / 2.0).cos(), (eps / 2.0).sin());
    let mut out = psi.to_vec();
    for site in 0..n_sites {
        let stride = 3usize.pow(site as u32);
        for idx in 0..out.len() {
            if (idx / stride) % 3 == 0 {
                let (down, up) = (out[idx], out[idx + 2 * stride]);
                out[idx] = c * down - s * up;
                out[idx + 2 * stride] = s * down + c * up;
            }
        }
    }
    out
}

/// Forward and backward propagators plus `Q^y` for one echo family.
pub struct EchoEngine {
    n_sites: usize,
    forward: Propagator<'static>,
    backward: Propagator<'static>,
    qy: SparseOperator,
    psi0: StateVector,
}

/// Readout statistics at `eps = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EchoResult {
    pub t: f64,
    pub delta_eps: f64,
    pub derivative: f64,
    pub variance: f64,
}

impl EchoEngine {
    pub fn new(echo: &EchoSpec, backend: Backend) -> Result<Self> {
        echo.validate()?;
        let n = echo.base.n_sites();
        Ok(EchoEngine {
            n_sites: n,
            forward: Propagator::owned(build_total(&echo.base)?, backend)?,
            backward: Propagator::owned(build_total(&echo.reversed())?, backend)?,
            qy: SpinBasis::new(n)?.collective_operator(CollectiveKind::Y),
            psi0: coherent_state(n, PI / 2.0, 0.0)?,
        })
    }

    /// `|psi(t)> = U(omega, chi; t) |theta = pi/2, phi = 0>`.
    pub fn prepared(&self, t: f64) -> Result<StateVector> {
        let amps = self.forward.apply(self.psi0.amplitudes(), t)?;
        StateVector::normalized(self.psi0.basis(), amps)
    }

    pub fn final_state(&self, t: f64, eps: f64) -> Result<StateVector> {
        let phi = self.prepared(t)?;
        let out = self.backward.apply(&encode(phi.amplitudes(), self.n_sites, eps), t)?;
        StateVector::normalized(self.psi0.basis(), out)
    }

    pub fn backend(&self) -> Backend {
        self.forward.backend()
    }

    /// `d<Q^y>/d eps = <phi| i[B, Q^y] |phi>` with `B = U_b^dag Q^y U_b`,
    /// evaluated as `-2 Im <U_b phi| Q^y |U_b Q^y phi>`.
    pub fn error(&self, t: f64) -> Result<EchoResult> {
        let phi = self.prepared(t)?;
        let a = self.backward.apply(phi.amplitudes(), t)?;
        let b = self.backward.apply(&self.qy.apply(phi.amplitudes()), t)?;
        let derivative = -2.0 * inner(&a, &self.qy.apply(&b)).im;
        let a = StateVector::normalized(self.psi0.basis(), a)?;
        let variance = a.variance(&self.qy);
        let delta_eps = if derivative.abs() < SIGNAL_FLOOR {
            f64::INFINITY
        } else {
            variance.sqrt() / derivative.abs()
        };
        Ok(EchoResult {
            t,
            delta_eps,
            derivative,
            variance,
        })
    }

    /// Central finite difference of `<Q^y>` in `eps`.
    pub fn finite_difference(&self, t: f64, step: f64) -> Result<f64> {
        let plus = self.final_state(t, step)?.expectation(&self.qy);
        let minus = self.final_state(t, -step)?.expectation(&self.qy);
        Ok((plus - minus) / (2.0 * step))
    }
}

pub fn echo_final_state(echo: &EchoSpec, backend: Backend) -> Result<StateVector> {
    EchoEngine::new(echo, backend)?.final_state(echo.t, echo.epsilon)
}

pub fn estimation_error(echo: &EchoSpec, backend: Backend) -> Result<EchoResult> {
    EchoEngine::new(echo, backend)?.error(echo.t)
}

/// Default preparation times: 40 points over `(0, pi N / (4 chi)]`.
pub fn default_times(n_sites: usize, chi: f64) -> Vec<f64> {
    let t_max = PI * n_sites as f64 / (4.0 * chi.abs());
    linspace(0.0, t_max, 41)[1..].to_vec()
}

fn inf_as_string<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_infinite() && *x > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorPoint {
    pub t: f64,
    #[serde(serialize_with = "inf_as_string")]
    pub delta_eps: f64,
    pub eta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorMinimum {
    #[serde(rename = "N")]
    pub n_sites: usize,
    #[serde(serialize_with = "inf_as_string")]
    pub min_delta_eps: f64,
    pub argmin_t: f64,
    pub eta: f64,
    pub sql: f64,
    pub hl: f64,
}

/// `delta eps` at each preparation time.
pub fn error_vs_time(echo: &EchoSpec, times: &[f64], backend: Backend) -> Result<Vec<ErrorPoint>> {
    let engine = EchoEngine::new(echo, backend)?;
    times
        .par_iter()
        .map(|&t| {
            Ok(ErrorPoint {
                t,
                delta_eps: engine.error(t)?.delta_eps,
                eta: echo.base.eta,
            })
        })
        .collect()
}

/// Minimum of `delta eps` over `times`, refined by golden-section search
/// between the neighbours of the best grid point.
pub fn minimize_error(echo: &EchoSpec, times: &[f64], backend: Backend, refine: bool) -> Result<ErrorMinimum> {
    let engine = EchoEngine::new(echo, backend)?;
    let values: Vec<f64> = times
        .par_iter()
        .map(|&t| engine.error(t).map(|r| r.delta_eps))
        .collect::<Result<_>>()?;
    let (k, mut best) = values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, v)| if v < acc.1 { (k, v) } else { acc });
    let mut arg = times.get(k).copied().unwrap_or(f64::NAN);
    if refine && best.is_finite() && times.len() >= 3 {
        let lo = times[k.saturating_sub(1)];
        let hi = times[(k + 1).min(times.len() - 1)];
        let (t, v) = golden_section(|t| engine.error(t).map(|r| r.delta_eps), lo, hi, 1e-6 * hi.max(1.0))?;
        if v < best {
            best = v;
            arg = t;
        }
    }
    let n = echo.base.n_sites() as f64;
    Ok(ErrorMinimum {
        n_sites: echo.base.n_sites(),
        min_delta_eps: best,
        argmin_t: arg,
        eta: echo.base.eta,
        sql: n.powf(-0.5),
        hl: 1.0 / n,
    })
}

fn golden_section<F>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}

/// Minimum error for each `N` on a fixed-volume lattice.
pub fn error_scaling(
    lattice: &LatticeSpec,
    eta: f64,
    chi: f64,
    sizes: &[usize],
    backend: Backend,
    refine: bool,
) -> Result<Vec<ErrorMinimum>> {
    sizes
        .iter()
        .map(|&n| {
            let mut l = lattice.clone();
            l.n_sites = n;
            let echo = EchoSpec::new(l, eta, chi, 0.0);
            minimize_error(&echo, &default_times(n, chi), backend, refine)
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// CSV `t, delta_eps, eta`.
pub fn write_time_csv<W: Write>(rows: &[ErrorPoint], w: W) -> Result<()> {
    write_rows(rows, w)
}

/// CSV `N, min_delta_eps, argmin_t, eta, sql, hl`.
pub fn write_scaling_csv<W: Write>(rows: &[ErrorMinimum], w: W) -> Result<()> {
    write_rows(rows, w)
}

fn write_rows<T: Serialize, W: Write>(rows: &[T], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use crate::scars::ScarTower;

    fn echo(n: usize, eta: f64, t: f64) -> EchoSpec {
        EchoSpec::new(LatticeSpec::chain(n, 10.0, 2.0, 1.0), eta, 2.0, t)
    }

    #[test]
    fn encode_matches_exponential_of_qy() {
        let n = 3;
        let qy = SpinBasis::new(n).unwrap().collective_operator(CollectiveKind::Y);
        let psi: Vec<C64> = (0..27).map(|i| C64::new((i as f64).cos(), 0.1 * i as f64)).collect();
        let eps = 0.37;
        // e^{i eps Q^y} = e^{-i (-eps) Q^y}
        let p = Propagator::new(&qy, Backend::DenseEig).unwrap();
        let exact = p.apply(&psi, -eps).unwrap();
        let fast = encode(&psi, n, eps);
        for (a, b) in exact.iter().zip(&fast) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn omega_is_enforced() {
        let mut e = echo(4, PI / 2.0, 1.0);
        assert!(e.validate().is_ok());
        e.base.omega = 0.0;
        assert!(e.validate().is_err());
        let mut e = echo(4, PI / 2.0, -1.0);
        assert!(e.validate().is_err());
        e.t = 0.0;
        assert!(e.validate().is_ok());
    }

    #[test]
    fn zero_time_gives_sentinel() {
        let r = estimation_error(&echo(4, PI / 2.0, 0.0), Backend::DenseEig).unwrap();
        assert!(r.delta_eps.is_infinite());
    }

    #[test]
    fn scarred_echo_stays_in_tower() {
        let psi = echo_final_state(&echo(5, PI / 2.0, 1.7), Backend::DenseEig).unwrap();
        let tower = ScarTower::build(5).unwrap();
        assert!((tower.weight(psi.amplitudes()) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for eta in [PI / 2.0, 0.0] {
            let e = echo(4, eta, 1.1);
            let engine = EchoEngine::new(&e, Backend::DenseEig).unwrap();
            let r = engine.error(e.t).unwrap();
            let fd = engine.finite_difference(e.t, e.fd_step).unwrap();
            assert!((fd - r.derivative).abs() < 1e-5 * r.derivative.abs(), "{fd} {}", r.derivative);
        }
    }

    #[test]
    fn scarred_echo_matches_oracle() {
        let n = 6;
        for t in [0.4, 1.7, 3.0] {
            let full = estimation_error(&echo(n, PI / 2.0, t), Backend::DenseEig).unwrap();
            let orc = oracle::oracle_estimation_error(n, 2.0, t).unwrap();
            assert!((full.delta_eps - orc.delta_eps).abs() < 1e-6);
        }
    }

    #[test]
    fn inf_is_written_literally() {
        let rows = [ErrorPoint {
            t: 0.0,
            delta_eps: f64::INFINITY,
            eta: 0.0,
        }];
        let mut buf = Vec::new();
        write_time_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,delta_eps,eta\n0.0,inf,0.0\n");
    }

    #[test]
    fn slope_of_power_law() {
        let x = [4.0, 6.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        assert!((log_log_slope(&x, &y) + 0.5).abs() < 1e-12);
    }
}
