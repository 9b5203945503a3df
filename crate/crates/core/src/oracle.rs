//! Collective spin-J (J = N/2) model in the (N+1)-dimensional Dicke basis.
//!
//! Nothing here reuses the full-space operator builders, so agreement with
//! the 3^N calculation is a genuine cross-check.

use std::f64::consts::PI;

use faer::{Mat, Side};

use crate::dynamics::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianSpec;
use crate::sparse::C64;
use crate::state::{Basis, StateVector};

/// Largest leaked weight tolerated by [`extract`].
pub const EXTRACT_TOL: f64 = 1e-6;

pub const ORACLE_BACKEND: &str = "collective-oracle";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ladder {
    Plus,
    Minus,
    X,
    Y,
    Z,
}

/// Dicke-basis model with `|J, m>` at index `m + J`.
#[derive(Clone, Debug, PartialEq)]
pub struct CollectiveModel {
    pub n_sites: usize,
    pub omega: f64,
    pub chi: f64,
    /// Coefficient of `Q^x`.
    pub perturbation: f64,
}

impl CollectiveModel {
    pub fn new(n_sites: usize, omega: f64, chi: f64) -> Self {
        CollectiveModel {
            n_sites,
            omega,
            chi,
            perturbation: 0.0,
        }
    }

    /// The restriction of `H_tot(spec)` to the tower; only valid at the DMI point.
    pub fn from_spec(spec: &HamiltonianSpec) -> Result<Self> {
        if !spec.is_dmi_point() {
            return Err(Error::ContractViolation(
                "the collective model needs eta = +-pi/2".into(),
            ));
        }
        Ok(CollectiveModel {
            n_sites: spec.n_sites(),
            omega: spec.omega,
            chi: spec.chi,
            perturbation: spec.perturbation,
        })
    }

    pub fn dim(&self) -> usize {
        self.n_sites + 1
    }

    fn j(&self) -> f64 {
        self.n_sites as f64 / 2.0
    }

    pub fn energies(&self) -> Vec<f64> {
        collective_hamiltonian(self.n_sites, self.omega, self.chi)
    }

    pub fn ladder(&self, kind: Ladder) -> Mat<C64> {
        ladder_matrix(self.n_sites, kind)
    }

    pub fn hamiltonian(&self) -> Mat<C64> {
        let e = self.energies();
        let qx = self.ladder(Ladder::X);
        Mat::from_fn(self.dim(), self.dim(), |r, c| {
            let d = if r == c { C64::new(e[r], 0.0) } else { C64::new(0.0, 0.0) };
            d + qx[(r, c)] * self.perturbation
        })
    }

    /// `m` values in index order.
    pub fn magnetizations(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| k as f64 - self.j()).collect()
    }
}

/// `E(m) = omega m + (chi/N)[J(J+1) - m^2 + m]` for `m = -J..J`.
pub fn collective_hamiltonian(n_sites: usize, omega: f64, chi: f64) -> Vec<f64> {
    let j = n_sites as f64 / 2.0;
    (0..=n_sites)
        .map(|k| {
            let m = k as f64 - j;
            omega * m + chi / n_sites as f64 * (j * (j + 1.0) - m * m + m)
        })
        .collect()
}

/// Spin-J matrices with `<m+1|J+|m> = sqrt(J(J+1) - m(m+1))`.
pub fn ladder_matrix(n_sites: usize, kind: Ladder) -> Mat<C64> {
    let dim = n_sites + 1;
    let j = n_sites as f64 / 2.0;
    let up = |r: usize, c: usize| -> f64 {
        let m = c as f64 - j;
        if r == c + 1 {
            (j * (j + 1.0) - m * (m + 1.0)).sqrt()
        } else {
            0.0
        }
    };
    Mat::from_fn(dim, dim, |r, c| match kind {
        Ladder::Plus => C64::new(up(r, c), 0.0),
        Ladder::Minus => C64::new(up(c, r), 0.0),
        Ladder::X => C64::new(0.5 * (up(r, c) + up(c, r)), 0.0),
        Ladder::Y => C64::new(0.0, 0.5 * (up(c, r) - up(r, c))),
        Ladder::Z => C64::new(if r == c { r as f64 - j } else { 0.0 }, 0.0),
    })
}

/// Dicke coefficients of the coherent state
/// `prod [cos(theta/2)|-1> + e^{-i phi} sin(theta/2)|+1>]`.
pub fn coherent_dicke(n_sites: usize, theta: f64, phi: f64) -> Vec<C64> {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    (0..=n_sites)
        .map(|k| {
            let mag = binomial(n_sites, k).sqrt() * c.powi((n_sites - k) as i32) * s.powi(k as i32);
            C64::from_polar(mag, -(k as f64) * phi)
        })
        .collect()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn mat_vec(m: &Mat<C64>, v: &[C64]) -> Vec<C64> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)] * v[c]).sum())
        .collect()
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `<O>` and `Var(O)` of a normalized collective state.
pub fn moments(op: &Mat<C64>, c: &[C64]) -> (f64, f64) {
    let oc = mat_vec(op, c);
    let mean = dot(c, &oc).re;
    let sq = dot(&oc, &oc).re;
    (mean, (sq - mean * mean).max(0.0))
}

/// `exp(-i t A)` applier for a hermitian matrix `A`.
pub struct CollectiveEvolver {
    energies: Vec<f64>,
    vectors: Mat<C64>,
}

impl CollectiveEvolver {
    pub fn new(a: &Mat<C64>) -> Result<Self> {
        let evd = a.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Eigen)?;
        Ok(CollectiveEvolver {
            energies: evd.S().column_vector().iter().map(|e| e.re).collect(),
            vectors: evd.U().to_owned(),
        })
    }

    pub fn apply(&self, c: &[C64], t: f64) -> Vec<C64> {
        let n = self.energies.len();
        let coeffs: Vec<C64> = (0..n)
            .map(|k| {
                let p: C64 = (0..n).map(|i| self.vectors[(i, k)].conj() * c[i]).sum();
                p * C64::from_polar(1.0, -self.energies[k] * t)
            })
            .collect();
        (0..n)
            .map(|i| (0..n).map(|k| self.vectors[(i, k)] * coeffs[k]).sum())
            .collect()
    }
}

/// Evolved Dicke coefficients at each time.
pub fn collective_evolve(model: &CollectiveModel, c0: &[C64], times: &[f64]) -> Result<Vec<Vec<C64>>> {
    if c0.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: c0.len(),
        });
    }
    let ev = CollectiveEvolver::new(&model.hamiltonian())?;
    Ok(times.iter().map(|&t| ev.apply(c0, t)).collect())
}

/// QFI density `4 Var(Q^y) / N` along the trajectory from a coherent state.
pub fn collective_qfi(model: &CollectiveModel, theta: f64, phi: f64, times: &[f64]) -> Result<Vec<f64>> {
    let qy = model.ladder(Ladder::Y);
    let n = model.n_sites as f64;
    Ok(collective_evolve(model, &coherent_dicke(model.n_sites, theta, phi), times)?
        .iter()
        .map(|c| 4.0 * moments(&qy, c).1 / n)
        .collect())
}

/// Trajectory record with the same layout as the full-space one. `I` is 1
/// throughout since the collective state never leaves the tower.
pub fn collective_trajectory(
    spec: &HamiltonianSpec,
    theta: f64,
    phi: f64,
    times: &[f64],
) -> Result<TrajectoryRecord> {
    crate::propagate::check_times(times)?;
    let model = CollectiveModel::from_spec(spec)?;
    let c0 = coherent_dicke(model.n_sites, theta, phi);
    let qy = model.ladder(Ladder::Y);
    let n = model.n_sites as f64;
    let states = collective_evolve(&model, &c0, times)?;
    Ok(TrajectoryRecord {
        spec: spec.clone(),
        times: times.to_vec(),
        f_series: states.iter().map(|c| 4.0 * moments(&qy, c).1 / n).collect(),
        i_series: vec![1.0; times.len()],
        fidelity_series: states.iter().map(|c| dot(&c0, c).norm_sqr()).collect(),
        backend: ORACLE_BACKEND.to_string(),
    })
}

/// Zero-free configurations with their number of `+1` levels.
fn zero_free(n_sites: usize) -> impl Iterator<Item = (usize, usize)> {
    (0u32..(1 << n_sites)).map(move |mask| {
        let idx = (0..n_sites)
            .filter(|s| mask >> s & 1 == 1)
            .map(|s| 2 * 3usize.pow(s as u32))
            .sum();
        (idx, mask.count_ones() as usize)
    })
}

/// Full-space state `sum_k c_k |S_k>`.
pub fn embed(n_sites: usize, c: &[C64]) -> Result<StateVector> {
    if c.len() != n_sites + 1 {
        return Err(Error::DimensionMismatch {
            expected: n_sites + 1,
            got: c.len(),
        });
    }
    let mut amps = vec![C64::new(0.0, 0.0); 3usize.pow(n_sites as u32)];
    for (idx, k) in zero_free(n_sites) {
        amps[idx] = c[k] / binomial(n_sites, k).sqrt();
    }
    StateVector::normalized(Basis::Full { n_sites }, amps)
}

/// Dicke coefficients `<S_k|psi>` and the leaked weight `1 - <P_S>`.
pub fn extract_with_leak(psi: &StateVector) -> (Vec<C64>, f64) {
    let n = psi.basis().n_sites();
    let mut c = vec![C64::new(0.0, 0.0); n + 1];
    for (idx, k) in zero_free(n) {
        c[k] += psi.amplitudes()[idx];
    }
    for (k, ck) in c.iter_mut().enumerate() {
        *ck /= binomial(n, k).sqrt();
    }
    let kept: f64 = c.iter().map(|x| x.norm_sqr()).sum();
    (c, (psi.norm().powi(2) - kept).max(0.0))
}

/// Dicke coefficients of a state that lies in the tower.
pub fn extract(psi: &StateVector) -> Result<Vec<C64>> {
    let (c, leaked) = extract_with_leak(psi);
    if leaked > EXTRACT_TOL {
        return Err(Error::LossyExtract { leaked });
    }
    Ok(c)
}

/// Outcome of the collective echo at `epsilon = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleEcho {
    pub delta_eps: f64,
    pub derivative: f64,
    pub variance: f64,
}

/// Echo with `omega = -chi/N`: evolve for `t`, rotate by `e^{i eps Q^y}`,
/// evolve back with `(omega, chi) -> (-omega, -chi)`, read out `Q^y`.
pub fn oracle_echo_state(n_sites: usize, chi: f64, t: f64, eps: f64) -> Result<Vec<C64>> {
    let omega = -chi / n_sites as f64;
    let fwd = CollectiveEvolver::new(&CollectiveModel::new(n_sites, omega, chi).hamiltonian())?;
    let bwd = CollectiveEvolver::new(&CollectiveModel::new(n_sites, -omega, -chi).hamiltonian())?;
    let enc = CollectiveEvolver::new(&ladder_matrix(n_sites, Ladder::Y))?;
    let c0 = coherent_dicke(n_sites, PI / 2.0, 0.0);
    let phi = fwd.apply(&c0, t);
    Ok(bwd.apply(&enc.apply(&phi, -eps), t))
}

/// `delta eps = sqrt(Var Q^y) / |d<Q^y>/d eps|` at `eps = 0`; infinite when the
/// derivative is below `1e-12`.
pub fn oracle_estimation_error(n_sites: usize, chi: f64, t: f64) -> Result<OracleEcho> {
    let omega = -chi / n_sites as f64;
    let fwd = CollectiveEvolver::new(&CollectiveModel::new(n_sites, omega, chi).hamiltonian())?;
    let bwd = CollectiveEvolver::new(&CollectiveModel::new(n_sites, -omega, -chi).hamiltonian())?;
    let qy = ladder_matrix(n_sites, Ladder::Y);
    let phi = fwd.apply(&coherent_dicke(n_sites, PI / 2.0, 0.0), t);
    let a = bwd.apply(&phi, t);
    let b = bwd.apply(&mat_vec(&qy, &phi), t);
    let derivative = -2.0 * dot(&a, &mat_vec(&qy, &b)).im;
    let variance = moments(&qy, &a).1;
    let delta_eps = if derivative.abs() < 1e-12 {
        f64::INFINITY
    } else {
        variance.sqrt() / derivative.abs()
    };
    Ok(OracleEcho {
        delta_eps,
        derivative,
        variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn comm(a: &Mat<C64>, b: &Mat<C64>) -> Mat<C64> {
        a * b - b * a
    }

    fn max_diff(a: &Mat<C64>, b: &Mat<C64>) -> f64 {
        let mut m: f64 = 0.0;
        for r in 0..a.nrows() {
            for c in 0..a.ncols() {
                m = m.max((a[(r, c)] - b[(r, c)]).norm());
            }
        }
        m
    }

    #[test]
    fn su2_algebra_is_exact() {
        for n in [1, 4, 7] {
            let x = ladder_matrix(n, Ladder::X);
            let y = ladder_matrix(n, Ladder::Y);
            let z = ladder_matrix(n, Ladder::Z);
            let i = C64::new(0.0, 1.0);
            assert!(max_diff(&comm(&x, &y), &(&z * faer::Scale(i))) < 1e-13);
            assert!(max_diff(&comm(&y, &z), &(&x * faer::Scale(i))) < 1e-13);
            assert!(max_diff(&comm(&z, &x), &(&y * faer::Scale(i))) < 1e-13);
        }
    }

    #[test]
    fn energy_examples() {
        let e = collective_hamiltonian(6, 0.7, 2.0);
        assert!((e[0] + 0.7 * 3.0).abs() < 1e-14);
        assert!((e[6] - (0.7 * 3.0 + 2.0)).abs() < 1e-14);
        // omega = -chi/N leaves a purely quadratic spectrum
        let n = 6;
        let chi = 2.0;
        let e = collective_hamiltonian(n, -chi / n as f64, chi);
        for (k, ek) in e.iter().enumerate() {
            let m = k as f64 - 3.0;
            assert!((ek - chi / n as f64 * (12.0 - m * m)).abs() < 1e-13);
        }
    }

    #[test]
    fn coherent_coefficients_are_normalized() {
        let c = coherent_dicke(9, 1.2, 0.4);
        assert!((c.iter().map(|x| x.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ghz_at_twisting_time() {
        let n = 12;
        let chi = 2.0;
        let model = CollectiveModel::new(n, 0.0, chi);
        let t_star = PI * n as f64 / (2.0 * chi);
        let f = collective_qfi(&model, PI / 2.0, 0.0, &[t_star]).unwrap();
        assert!((f[0] - n as f64).abs() < 1e-10, "{}", f[0]);
    }

    #[test]
    fn no_twisting_keeps_unit_density() {
        let model = CollectiveModel::new(8, 0.0, 0.0);
        for f in collective_qfi(&model, PI / 2.0, 0.0, &[0.0, 1.0, 7.3]).unwrap() {
            assert!((f - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn embed_extract_round_trip() {
        let c = coherent_dicke(5, 0.9, -0.3);
        let psi = embed(5, &c).unwrap();
        let back = extract(&psi).unwrap();
        for (a, b) in c.iter().zip(&back) {
            assert!((a - b).norm() < 1e-14);
        }
        let ground = embed(3, &[C64::new(1.0, 0.0), C64::default(), C64::default(), C64::default()]).unwrap();
        assert_eq!(ground.amplitudes()[0], C64::new(1.0, 0.0));
    }

    #[test]
    fn extract_reports_leak() {
        let mut amps = vec![C64::new(0.0, 0.0); 9];
        amps[0] = C64::new(0.6, 0.0);
        amps[1] = C64::new(0.8, 0.0);
        let psi = StateVector::from_normalized(Basis::Full { n_sites: 2 }, amps).unwrap();
        match extract(&psi) {
            Err(Error::LossyExtract { leaked }) => assert!((leaked - 0.64).abs() < 1e-14),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn echo_at_zero_time_has_no_signal() {
        let r = oracle_estimation_error(6, 2.0, 0.0).unwrap();
        assert!(r.derivative.abs() < 1e-12);
        assert!(r.delta_eps.is_infinite());
    }

    #[test]
    fn echo_derivative_matches_finite_difference() {
        let (n, chi, t) = (6, 2.0, 1.3);
        let qy = ladder_matrix(n, Ladder::Y);
        let h = 1e-5;
        let plus = moments(&qy, &oracle_echo_state(n, chi, t, h).unwrap()).0;
        let minus = moments(&qy, &oracle_echo_state(n, chi, t, -h).unwrap()).0;
        let fd = (plus - minus) / (2.0 * h);
        let r = oracle_estimation_error(n, chi, t).unwrap();
        assert!((fd - r.derivative).abs() < 1e-5 * r.derivative.abs());
    }
}
