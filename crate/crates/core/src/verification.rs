//! Structural invariants checked by the `verify` command.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::{coherent_state, evolve, linspace};
use crate::error::Result;
use crate::hamiltonian::{build_total, HamiltonianSpec, HamiltonianTerms};
use crate::husimi::{LocalizationEvaluator, SphereQuadrature};
use crate::model::{CollectiveKind, LatticeSpec, SpinBasis};
use crate::propagate::Backend;
use crate::scars::ScarTower;
use crate::sparse::C64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn below(name: &str, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.to_string(),
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub n_sites: usize,
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Runs every check at `n_sites`, clamped to `2..=6` so the dense backend fits.
pub fn verify(n_sites: usize) -> Result<VerificationReport> {
    let n = n_sites.clamp(2, 6);
    let basis = SpinBasis::new(n)?;
    let op = |k| basis.collective_operator(k);
    let (qp, qm, qx, qy, qz) = (
        op(CollectiveKind::Plus),
        op(CollectiveKind::Minus),
        op(CollectiveKind::X),
        op(CollectiveKind::Y),
        op(CollectiveKind::Z),
    );
    let i = C64::new(0.0, 1.0);
    let mut checks = Vec::new();

    let closure = [
        qp.commutator(&qm).sub(&qz.scaled(C64::new(2.0, 0.0))).max_abs(),
        qz.commutator(&qp).sub(&qp).max_abs(),
        qz.commutator(&qm).add(&qm).max_abs(),
        qx.commutator(&qy).sub(&qz.scaled(i)).max_abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    checks.push(Check::below("su2 closure", closure, 1e-12));

    let lattice = LatticeSpec::chain(n, 10.0, 2.0, 1.0);
    let specs = [
        HamiltonianSpec::new(lattice.clone(), 0.7, PI / 2.0, 2.0),
        HamiltonianSpec::new(lattice.clone(), 0.7, 0.0, 2.0),
        HamiltonianSpec::new(lattice.clone(), 0.7, 0.9, 2.0).with_perturbation(0.3),
    ];
    let mut herm: f64 = 0.0;
    let mut magnet: f64 = 0.0;
    for s in &specs {
        let terms = HamiltonianTerms::build(s)?;
        for t in [&terms.h0, &terms.hint, &terms.hnl, &terms.perturbation] {
            herm = herm.max(t.max_abs_diff(&t.adjoint()));
        }
        let conserving = terms.h0.add(&terms.hint).add(&terms.hnl);
        magnet = magnet.max(conserving.commutator(&qz).max_abs());
    }
    checks.push(Check::below("hermiticity", herm, 1e-14));
    checks.push(Check::below("magnetization conservation", magnet, 1e-12));

    let tower = ScarTower::build(n)?;
    let p = tower.projector_operator();
    checks.push(Check::below("projector idempotency", p.matmul(&p).sub(&p).max_abs(), 1e-12));
    let trace: f64 = p.diagonal().iter().map(|d| d.re).sum();
    checks.push(Check::below("projector trace", (trace - (n + 1) as f64).abs(), 1e-12));

    let h = build_total(&specs[1])?;
    let psi0 = coherent_state(n, PI / 2.0, 0.3)?;
    let times = linspace(0.0, 5.0, 11);
    let dense = evolve(&h, &psi0, &times, Backend::DenseEig)?;
    let krylov = evolve(&h, &psi0, &times, Backend::Krylov)?;
    let e0 = psi0.expectation(&h);
    let mut norm_dev: f64 = 0.0;
    let mut energy_dev: f64 = 0.0;
    let mut backend_dev: f64 = 0.0;
    for (a, b) in dense.iter().zip(&krylov) {
        norm_dev = norm_dev.max((b.norm() - 1.0).abs());
        energy_dev = energy_dev.max((b.expectation(&h) - e0).abs() / e0.abs().max(1.0));
        backend_dev = backend_dev.max(a.distance(b));
    }
    checks.push(Check::below("norm conservation", norm_dev, 1e-9));
    checks.push(Check::below("energy conservation", energy_dev, 1e-8));
    checks.push(Check::below("backend equivalence", backend_dev, 1e-8));

    let quad = SphereQuadrature::minimal(n);
    checks.push(Check::below(
        "quadrature weight",
        (quad.total_weight() - 4.0 * PI).abs(),
        1e-12,
    ));
    let eval = LocalizationEvaluator::new(n, quad)?;
    let mut quad_dev: f64 = 0.0;
    for s in tower.states() {
        quad_dev = quad_dev.max((eval.integral(s)? - 1.0).abs());
    }
    checks.push(Check::below("quadrature exactness", quad_dev, 1e-12));

    Ok(VerificationReport { n_sites: n, checks })
}

#[cfg(test)]
mod tests {
    #[test]
    fn suite_passes_at_small_sizes() {
        for n in [2, 3, 4] {
            let r = super::verify(n).unwrap();
            assert!(r.all_passed(), "{r:#?}");
        }
    }
}
