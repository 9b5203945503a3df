//! Spins coupled linearly to a single bosonic mode, and the effective
//! nonlinearity it induces on the scar tower in the dispersive regime.

use std::f64::consts::PI;
use std::io::Write;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::dynamics::{coherent_state, csv_err};
use crate::error::{Error, Result};
use crate::hamiltonian::{build_total, HamiltonianSpec};
use crate::model::{CollectiveKind, SpinBasis};
use crate::oracle;
use crate::propagate::{Backend, Propagator, KRYLOV_CAP};
use crate::scars::ScarTower;
use crate::sparse::{inner, norm, spectral_norm, SparseOperator, C64};

/// Above this value of `J N / |omega - omega_a|` the dispersive picture is unreliable.
pub const DISPERSIVE_LIMIT: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BosonCoupledSpec {
    /// Spin Hamiltonian; its `chi` must be zero.
    pub base: HamiltonianSpec,
    pub omega_a: f64,
    /// Spin-boson coupling `J`.
    pub coupling: f64,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
}

fn default_n_max() -> usize {
    6
}

impl BosonCoupledSpec {
    pub fn new(base: HamiltonianSpec, omega_a: f64, coupling: f64) -> Self {
        BosonCoupledSpec {
            base,
            omega_a,
            coupling,
            n_max: default_n_max(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.base.chi != 0.0 {
            return Err(Error::spec("chi", "the coupled model generates chi itself; set it to 0"));
        }
        if self.n_max < 4 {
            return Err(Error::spec("n_max", "must be at least 4"));
        }
        if !self.omega_a.is_finite() || !self.coupling.is_finite() {
            return Err(Error::spec("omega_a", "must be finite"));
        }
        if self.detuning() != 0.0 && self.dispersive_parameter() > DISPERSIVE_LIMIT {
            log::warn!(
                "J N / |omega - omega_a| = {:.3} exceeds {DISPERSIVE_LIMIT}; the effective model may be inaccurate",
                self.dispersive_parameter()
            );
        }
        Ok(())
    }

    /// `omega - omega_a`.
    pub fn detuning(&self) -> f64 {
        self.base.omega - self.omega_a
    }

    pub fn dispersive_parameter(&self) -> f64 {
        (self.coupling * self.base.n_sites() as f64 / self.detuning()).abs()
    }

    /// `chi_eff = N J^2 / (omega - omega_a)`, the second-order shift of
    /// `|S_j, 0>` through the virtual states `|S_{j-1}, 1>`.
    pub fn chi_eff(&self) -> Result<f64> {
        if self.detuning() == 0.0 {
            return Err(Error::Resonant);
        }
        Ok(self.base.n_sites() as f64 * self.coupling.powi(2) / self.detuning())
    }

    pub fn dim(&self) -> usize {
        3usize.pow(self.base.n_sites() as u32) * (self.n_max + 1)
    }

    fn check_capacity(&self) -> Result<()> {
        if self.dim() > KRYLOV_CAP {
            return Err(Error::Capacity {
                dim: self.dim(),
                cap: KRYLOV_CAP,
                hint: "reduce N or n_max",
            });
        }
        Ok(())
    }
}

/// Truncated annihilation operator `a|n> = sqrt(n)|n-1>`.
pub fn annihilation(n_max: usize) -> SparseOperator {
    let trip = (1..=n_max)
        .map(|n| (n - 1, n, C64::new((n as f64).sqrt(), 0.0)))
        .collect();
    SparseOperator::from_triplets(n_max + 1, trip)
}

fn spin_ops(spec: &BosonCoupledSpec) -> Result<(SparseOperator, SparseOperator)> {
    let basis = SpinBasis::new(spec.base.n_sites())?;
    Ok((
        basis.collective_operator(CollectiveKind::Plus),
        basis.collective_operator(CollectiveKind::Minus),
    ))
}

/// `H' = H (x) 1 + omega_a a^dag a + J (Q+ (x) a + Q- (x) a^dag)` with the
/// boson index running fastest.
pub fn build_coupled(spec: &BosonCoupledSpec) -> Result<SparseOperator> {
    spec.validate()?;
    spec.check_capacity()?;
    let h = build_total(&spec.base)?;
    let (qp, qm) = spin_ops(spec)?;
    let a = annihilation(spec.n_max);
    let ad = a.adjoint();
    let spin_id = SparseOperator::identity(h.dim());
    let boson_id = SparseOperator::identity(spec.n_max + 1);
    let number = ad.matmul(&a);
    let one = C64::new(1.0, 0.0);
    let j = C64::new(spec.coupling, 0.0);
    Ok(SparseOperator::linear_combination(&[
        (one, &h.kron(&boson_id)),
        (C64::new(spec.omega_a, 0.0), &spin_id.kron(&number)),
        (j, &qp.kron(&a)),
        (j, &qm.kron(&ad)),
    ]))
}

/// `R = [J / (omega - omega_a)] (Q+ (x) a - Q- (x) a^dag)`, anti-hermitian.
pub fn rotation_generator(spec: &BosonCoupledSpec) -> Result<SparseOperator> {
    spec.validate()?;
    if spec.detuning() == 0.0 {
        return Err(Error::Resonant);
    }
    spec.check_capacity()?;
    let (qp, qm) = spin_ops(spec)?;
    let a = annihilation(spec.n_max);
    let c = C64::new(spec.coupling / spec.detuning(), 0.0);
    Ok(SparseOperator::linear_combination(&[
        (c, &qp.kron(&a)),
        (-c, &qm.kron(&a.adjoint())),
    ]))
}

/// `e^{s R} v` by Taylor series on `ceil(|s| ||R||_1 / 0.5)` sub-steps,
/// each summed until the next term is below `1e-17 ||v||`.
pub fn exp_apply(r: &SparseOperator, v: &[C64], s: f64) -> Vec<C64> {
    let scale = (s.abs() * r.one_norm()).max(r.inf_norm() * s.abs());
    let steps = (scale / 0.5).ceil().max(1.0) as usize;
    let h = s / steps as f64;
    let mut out = v.to_vec();
    for _ in 0..steps {
        let mut term = out.clone();
        let mut acc = out.clone();
        let base = norm(&out).max(1e-300);
        for k in 1..60 {
            term = r.apply(&term);
            let f = C64::new(h / k as f64, 0.0);
            term.iter_mut().for_each(|x| *x *= f);
            acc.iter_mut().zip(&term).for_each(|(a, t)| *a += t);
            if norm(&term) < 1e-17 * base {
                break;
            }
        }
        out = acc;
    }
    out
}

/// Embeds a spin vector into the boson vacuum.
fn with_vacuum(spin: &[C64], n_max: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); spin.len() * (n_max + 1)];
    for (i, a) in spin.iter().enumerate() {
        out[i * (n_max + 1)] = *a;
    }
    out
}

/// `|| P e^R H' e^{-R} P - P [H + (chi_eff/N) Q+Q-] P ||` with `P` the
/// projector onto (scar tower) (x) (boson vacuum).
pub fn effective_residual(spec: &BosonCoupledSpec) -> Result<f64> {
    let chi = spec.chi_eff()?;
    let hp = build_coupled(spec)?;
    let r = rotation_generator(spec)?;
    let n = spec.base.n_sites();
    let tower = ScarTower::build(n)?;
    let mut eff = spec.base.clone();
    eff.chi = chi;
    let h_eff = build_total(&eff)?;
    let dressed: Vec<Vec<C64>> = tower
        .states()
        .iter()
        .map(|s| exp_apply(&r, &with_vacuum(s.amplitudes(), spec.n_max), -1.0))
        .collect();
    let images: Vec<Vec<C64>> = dressed.iter().map(|x| hp.apply(x)).collect();
    let target: Vec<Vec<C64>> = tower.states().iter().map(|s| h_eff.apply(s.amplitudes())).collect();
    let diff = Mat::<C64>::from_fn(n + 1, n + 1, |j, k| {
        inner(&dressed[j], &images[k]) - inner(tower.state(j).amplitudes(), &target[k])
    });
    Ok(spectral_norm(&diff))
}

/// Infidelity `1 - |<psi_eff (x) 0|psi(t)>|^2` between the coupled evolution
/// of `|pi/2, 0> (x) |0>` and the collective evolution with `chi_eff`.
pub fn dynamics_comparison(spec: &BosonCoupledSpec, times: &[f64], backend: Backend) -> Result<Vec<f64>> {
    if !spec.base.is_dmi_point() {
        return Err(Error::ContractViolation("the effective model needs eta = +-pi/2".into()));
    }
    let chi = spec.chi_eff()?;
    let hp = build_coupled(spec)?;
    let n = spec.base.n_sites();
    let psi0 = coherent_state(n, PI / 2.0, 0.0)?;
    let full0 = with_vacuum(psi0.amplitudes(), spec.n_max);
    let model = oracle::CollectiveModel {
        n_sites: n,
        omega: spec.base.omega,
        chi,
        perturbation: spec.base.perturbation,
    };
    let eff = oracle::collective_evolve(&model, &oracle::coherent_dicke(n, PI / 2.0, 0.0), times)?;
    let prop = Propagator::new(&hp, backend)?;
    let mut out = Vec::with_capacity(times.len());
    prop.evolve_with(&full0, times, |k, _, psi| {
        let e = oracle::embed(n, &eff[k])?;
        let target = with_vacuum(e.amplitudes(), spec.n_max);
        out.push(1.0 - inner(&target, psi).norm_sqr());
        Ok(())
    })?;
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AppendixRow {
    #[serde(rename = "J")]
    pub coupling: f64,
    pub chi_eff: f64,
    pub residual: f64,
    pub max_infidelity: f64,
}

/// CSV with columns `J, chi_eff, residual, max_infidelity`.
pub fn write_csv<W: Write>(rows: &[AppendixRow], w: W) -> Result<()> {
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
    use crate::model::LatticeSpec;
    use std::f64::consts::FRAC_PI_2;

    fn spec(n: usize, coupling: f64) -> BosonCoupledSpec {
        let base = HamiltonianSpec::new(LatticeSpec::chain(n, 10.0, 2.0, 1.0), 1.0, FRAC_PI_2, 0.0);
        BosonCoupledSpec::new(base, 11.0, coupling)
    }

    #[test]
    fn chi_eff_example() {
        let mut s = spec(8, 0.1);
        s.base.omega = 0.0;
        s.omega_a = 10.0;
        assert!((s.chi_eff().unwrap().abs() - 0.008).abs() < 1e-15);
        s.omega_a = 0.0;
        assert!(matches!(s.chi_eff(), Err(Error::Resonant)));
        assert!(matches!(rotation_generator(&s), Err(Error::Resonant)));
    }

    #[test]
    fn coupled_hamiltonian_examples() {
        let s = spec(3, 0.0);
        let h = build_coupled(&s).unwrap();
        assert!((h.get(0, 0).re + 3.0 / 2.0).abs() < 1e-14);
        // J = 0: no matrix element changes the boson number
        for (r, c, _) in h.iter() {
            assert_eq!(r % 7, c % 7);
        }
    }

    #[test]
    fn excitation_number_is_conserved() {
        let s = BosonCoupledSpec {
            n_max: 4,
            ..spec(3, 0.3)
        };
        let h = build_coupled(&s).unwrap();
        let basis = SpinBasis::new(3).unwrap();
        let qz = basis.collective_operator(CollectiveKind::Z);
        let a = annihilation(4);
        let total = qz
            .kron(&SparseOperator::identity(5))
            .add(&SparseOperator::identity(27).kron(&a.adjoint().matmul(&a)));
        assert!(h.commutator(&total).max_abs() < 1e-13);
    }

    #[test]
    fn generator_is_anti_hermitian_and_linear() {
        let r1 = rotation_generator(&spec(3, 0.1)).unwrap();
        let r2 = rotation_generator(&spec(3, 0.2)).unwrap();
        assert!(r1.add(&r1.adjoint()).max_abs() < 1e-15);
        let n1 = spectral_norm(&r1.to_dense());
        let n2 = spectral_norm(&r2.to_dense());
        assert!((n2 / n1 - 2.0).abs() < 1e-10);
        assert_eq!(rotation_generator(&spec(3, 0.0)).unwrap().nnz(), 0);
    }

    #[test]
    fn exp_apply_is_unitary() {
        let r = rotation_generator(&spec(3, 0.5)).unwrap();
        let v: Vec<C64> = (0..r.dim()).map(|i| C64::new((i as f64).sin(), 0.2)).collect();
        let w = exp_apply(&r, &v, 1.0);
        assert!((norm(&w) - norm(&v)).abs() < 1e-12 * norm(&v));
        let back = exp_apply(&r, &w, -1.0);
        let d: f64 = back.iter().zip(&v).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(d < 1e-12);
    }

    #[test]
    fn zero_coupling_has_no_residual_or_infidelity() {
        assert!(effective_residual(&spec(3, 0.0)).unwrap() < 1e-12);
        let inf = dynamics_comparison(&spec(3, 0.0), &[0.0, 1.0, 5.0], Backend::Auto).unwrap();
        assert!(inf.iter().all(|x| x.abs() < 1e-10));
    }

    #[test]
    fn chi_is_rejected() {
        let mut s = spec(3, 0.1);
        s.base.chi = 1.0;
        assert!(s.validate().is_err());
        s.base.chi = 0.0;
        s.n_max = 3;
        assert!(s.validate().is_err());
    }
}
