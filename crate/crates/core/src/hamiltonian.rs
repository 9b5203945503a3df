//! Assembly of the spin-1 Hamiltonian
//! `H_tot = H_0 + H_int(eta) + H_nl + eps_p Q^x`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CollectiveKind, LatticeSpec, SpinBasis};
use crate::sparse::{SparseOperator, C64};

/// Every physical parameter of the model in one record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSpec {
    pub lattice: LatticeSpec,
    /// Level splitting `omega` of `H_0 = omega Q^z`.
    pub omega: f64,
    /// Interaction phase `eta` (radians, taken mod 2 pi).
    pub eta: f64,
    /// Nonlinearity `chi` of `H_nl = (chi/N) Q+ Q-`.
    pub chi: f64,
    /// Amplitude of the symmetry-breaking term `eps_p Q^x`.
    #[serde(default)]
    pub perturbation: f64,
}

impl HamiltonianSpec {
    pub fn new(lattice: LatticeSpec, omega: f64, eta: f64, chi: f64) -> Self {
        HamiltonianSpec {
            lattice,
            omega,
            eta,
            chi,
            perturbation: 0.0,
        }
    }

    pub fn with_perturbation(mut self, eps: f64) -> Self {
        self.perturbation = eps;
        self
    }

    pub fn n_sites(&self) -> usize {
        self.lattice.n_sites
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice.validate()?;
        for (field, v) in [
            ("omega", self.omega),
            ("eta", self.eta),
            ("chi", self.chi),
            ("perturbation", self.perturbation),
        ] {
            if !v.is_finite() {
                return Err(Error::spec(field, "must be finite"));
            }
        }
        Ok(())
    }

    /// True when `eta = +-pi/2 (mod 2 pi)`, where `H_int` is a
    /// Dzyaloshinskii-Moriya interaction and the scar tower is exact.
    pub fn is_dmi_point(&self) -> bool {
        let r = self.eta.rem_euclid(2.0 * std::f64::consts::PI);
        (r - FRAC_PI_2).abs() < 1e-12 || (r - 3.0 * FRAC_PI_2).abs() < 1e-12
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: HamiltonianSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("spec serializes to toml")
    }
}

fn basis_of(spec: &HamiltonianSpec) -> Result<SpinBasis> {
    spec.validate()?;
    SpinBasis::new(spec.n_sites())
}

/// `H_0 = (omega/2) sum_n Sz_n`, diagonal in the product basis.
pub fn build_h0(spec: &HamiltonianSpec) -> Result<SparseOperator> {
    let basis = basis_of(spec)?;
    let diag: Vec<f64> = (0..basis.dim())
        .map(|i| 0.5 * spec.omega * basis.magnetization(i) as f64)
        .collect();
    Ok(SparseOperator::from_diagonal(&diag))
}

/// `H_int = sum_{n<n'} lambda_{nn'} (e^{i eta} S+_n S-_n' + e^{-i eta} S-_n S+_n')`.
///
/// Each unordered pair is counted once; summing over ordered pairs would
/// reduce the pair term to `2 lambda cos(eta) S+_n S-_n'` and remove the
/// Dzyaloshinskii-Moriya point.
pub fn build_hint(spec: &HamiltonianSpec) -> Result<SparseOperator> {
    let basis = basis_of(spec)?;
    let lambda = spec.lattice.coupling_matrix()?;
    let n = spec.n_sites();
    let phase = C64::from_polar(1.0, spec.eta);
    let mut trip = Vec::new();
    for i in 0..n {
        let si = 3usize.pow(i as u32);
        for (j, &lam) in lambda[i].iter().enumerate().skip(i + 1) {
            if lam == 0.0 {
                continue;
            }
            let sj = 3usize.pow(j as u32);
            let forward = phase * lam;
            let backward = forward.conj();
            for idx in 0..basis.dim() {
                let mi = basis.level(idx, i);
                let mj = basis.level(idx, j);
                if mi < 1 && mj > -1 {
                    let amp = ladder_up(mi) * ladder_down(mj);
                    trip.push((idx + si - sj, idx, forward * amp));
                }
                if mi > -1 && mj < 1 {
                    let amp = ladder_down(mi) * ladder_up(mj);
                    trip.push((idx + sj - si, idx, backward * amp));
                }
            }
        }
    }
    Ok(SparseOperator::from_triplets(basis.dim(), trip))
}

fn ladder_up(m: i32) -> f64 {
    ((2 - m * (m + 1)) as f64).sqrt()
}

fn ladder_down(m: i32) -> f64 {
    ((2 - m * (m - 1)) as f64).sqrt()
}

/// `H_nl = (chi/N) Q+ Q-`.
pub fn build_hnl(spec: &HamiltonianSpec) -> Result<SparseOperator> {
    let basis = basis_of(spec)?;
    let qp = basis.collective_operator(CollectiveKind::Plus);
    let qm = basis.collective_operator(CollectiveKind::Minus);
    Ok(qp
        .matmul(&qm)
        .scaled(C64::new(spec.chi / spec.n_sites() as f64, 0.0)))
}

/// The three terms of `H_tot` plus the optional perturbation, kept separate.
#[derive(Clone, Debug)]
pub struct HamiltonianTerms {
    pub h0: SparseOperator,
    pub hint: SparseOperator,
    pub hnl: SparseOperator,
    pub perturbation: SparseOperator,
}

impl HamiltonianTerms {
    pub fn build(spec: &HamiltonianSpec) -> Result<Self> {
        let basis = basis_of(spec)?;
        let qx = basis.collective_operator(CollectiveKind::X);
        Ok(HamiltonianTerms {
            h0: build_h0(spec)?,
            hint: build_hint(spec)?,
            hnl: build_hnl(spec)?,
            perturbation: qx.scaled(C64::new(spec.perturbation, 0.0)),
        })
    }

    pub fn total(&self) -> SparseOperator {
        let one = C64::new(1.0, 0.0);
        SparseOperator::linear_combination(&[
            (one, &self.h0),
            (one, &self.hint),
            (one, &self.hnl),
            (one, &self.perturbation),
        ])
    }
}

/// `H_tot = H_0 + H_int(eta) + H_nl + eps_p Q^x`.
pub fn build_total(spec: &HamiltonianSpec) -> Result<SparseOperator> {
    Ok(HamiltonianTerms::build(spec)?.total())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn spec(n: usize, omega: f64, eta: f64, chi: f64) -> HamiltonianSpec {
        HamiltonianSpec::new(LatticeSpec::chain(n, 10.0, 2.0, 1.0), omega, eta, chi)
    }

    #[test]
    fn h0_examples() {
        let h = build_h0(&spec(11, 2.0, 0.0, 0.0)).unwrap();
        assert_eq!(h.get(0, 0).re, -11.0);
        let s = spec(4, 1.5, 0.0, 0.0);
        assert_eq!(build_h0(&s).unwrap().get(0, 0).re, -4.0 * 1.5 / 2.0);
        assert_eq!(build_h0(&spec(4, 0.0, 0.0, 0.0)).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn two_site_hop_matrix_element() {
        // two sites with lambda_12 = 1: L = 1 gives a = 1
        for eta in [0.0, 0.3, PI / 2.0] {
            let s = HamiltonianSpec::new(LatticeSpec::chain(2, 1.0, 2.0, 1.0), 0.0, eta, 0.0);
            let h = build_hint(&s).unwrap();
            let b = SpinBasis::new(2).unwrap();
            let bra = b.index_of(&[0, -1]).unwrap();
            let ket = b.index_of(&[-1, 0]).unwrap();
            let expected = C64::from_polar(2.0, eta);
            assert!((h.get(bra, ket) - expected).norm() < 1e-14, "eta = {eta}");
        }
    }

    #[test]
    fn hint_annihilates_all_down_and_is_hermitian() {
        for eta in [0.0, 1.0, PI / 2.0] {
            let h = build_hint(&spec(4, 0.0, eta, 0.0)).unwrap();
            assert!(h.is_hermitian());
            assert!(h.max_abs_diff(&h.adjoint()) < 1e-14);
            let mut psi = vec![C64::new(0.0, 0.0); h.dim()];
            psi[0] = C64::new(1.0, 0.0);
            assert!(crate::sparse::norm(&h.apply(&psi)) == 0.0);
        }
    }

    #[test]
    fn hint_conjugate_under_eta_reversal() {
        let a = build_hint(&spec(4, 0.0, 0.7, 0.0)).unwrap();
        let b = build_hint(&spec(4, 0.0, -0.7, 0.0)).unwrap();
        for (r, c, v) in a.iter() {
            assert!((b.get(r, c) - v.conj()).norm() < 1e-15);
        }
        assert_eq!(a.nnz(), b.nnz());
    }

    #[test]
    fn hnl_examples() {
        let s = spec(5, 0.0, PI / 2.0, 2.0);
        let h = build_hnl(&s).unwrap();
        assert_eq!(h.get(0, 0).norm(), 0.0);
        let top = h.dim() - 1;
        assert!((h.get(top, top).re - 2.0).abs() < 1e-14);
    }

    #[test]
    fn dmi_point_detection() {
        assert!(spec(4, 0.0, PI / 2.0, 0.0).is_dmi_point());
        assert!(spec(4, 0.0, -PI / 2.0, 0.0).is_dmi_point());
        assert!(spec(4, 0.0, 5.0 * PI / 2.0, 0.0).is_dmi_point());
        assert!(!spec(4, 0.0, 0.0, 0.0).is_dmi_point());
    }

    #[test]
    fn toml_round_trip_and_unknown_keys() {
        let s = spec(8, 0.5, PI / 2.0, 2.0).with_perturbation(1e-5);
        let text = s.to_toml_string();
        assert!(text.contains("[lattice]") && text.contains("L = 10.0"));
        assert_eq!(HamiltonianSpec::from_toml_str(&text).unwrap(), s);
        let bad = format!("{text}\n[extra]\nfoo = 1\n");
        assert!(HamiltonianSpec::from_toml_str(&bad).is_err());
        let bad_key = text.replace("chi", "kai");
        let err = HamiltonianSpec::from_toml_str(&bad_key).unwrap_err().to_string();
        assert!(err.contains("kai"), "{err}");
    }
}
