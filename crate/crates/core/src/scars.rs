//! The tower of `N+1` scar states `|S_j> ∝ (Q+)^j |S_0>`, its projector,
//! and checks of the spectrum-generating-algebra conditions.

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianSpec;
use crate::model::{CollectiveKind, SpinBasis};
use crate::sparse::{inner, norm, spectral_norm, SparseOperator, C64};
use crate::state::{Basis, StateVector};

#[derive(Clone, Debug)]
pub struct ScarTower {
    n_sites: usize,
    states: Vec<StateVector>,
    norms: Vec<f64>,
}

impl ScarTower {
    /// Builds `|S_j> = N_j (Q+)^j |S_0>` with `|S_0> = |-1, ..., -1>` by
    /// repeated sparse application and explicit normalization.
    pub fn build(n_sites: usize) -> Result<Self> {
        let basis = SpinBasis::new(n_sites)?;
        let qp = basis.collective_operator(CollectiveKind::Plus);
        let full = Basis::Full { n_sites };
        let mut states = Vec::with_capacity(n_sites + 1);
        let mut norms = Vec::with_capacity(n_sites + 1);
        let s0 = StateVector::basis_state(full, basis.dim(), basis.all_down_index())?;
        states.push(s0);
        norms.push(1.0);
        for j in 1..=n_sites {
            let raised = qp.apply(states[j - 1].amplitudes());
            let len = norm(&raised);
            norms.push(norms[j - 1] / len);
            states.push(StateVector::normalized(full, raised)?);
        }
        Ok(ScarTower {
            n_sites,
            states,
            norms,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    pub fn state(&self, j: usize) -> &StateVector {
        &self.states[j]
    }

    /// Normalization constants `N_j` with `|S_j> = N_j (Q+)^j |S_0>`.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// `<S_j|psi>` for every `j`.
    pub fn overlaps(&self, psi: &[C64]) -> Vec<C64> {
        self.states.iter().map(|s| inner(s.amplitudes(), psi)).collect()
    }

    /// `<psi|P_S|psi>`.
    pub fn weight(&self, psi: &[C64]) -> f64 {
        self.overlaps(psi).iter().map(|c| c.norm_sqr()).sum()
    }

    /// `P_S psi`.
    pub fn project(&self, psi: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); psi.len()];
        for (s, c) in self.states.iter().zip(self.overlaps(psi)) {
            for (o, a) in out.iter_mut().zip(s.amplitudes()) {
                *o += c * a;
            }
        }
        out
    }

    /// Matrix `<S_j|A|S_k>` of an operator restricted to the tower.
    pub fn restrict(&self, op: &SparseOperator) -> Mat<C64> {
        let n = self.len();
        let images: Vec<Vec<C64>> = self.states.iter().map(|s| op.apply(s.amplitudes())).collect();
        Mat::from_fn(n, n, |j, k| inner(self.states[j].amplitudes(), &images[k]))
    }

    pub fn gram(&self) -> Mat<C64> {
        let n = self.len();
        Mat::from_fn(n, n, |j, k| self.states[j].inner(&self.states[k]))
    }

    /// The projector `P_S = sum_j |S_j><S_j|` as an explicit sparse operator.
    pub fn projector_operator(&self) -> SparseOperator {
        let mut trip = Vec::new();
        for s in &self.states {
            let support: Vec<(usize, C64)> = s
                .amplitudes()
                .iter()
                .enumerate()
                .filter(|(_, a)| a.norm_sqr() > 0.0)
                .map(|(i, a)| (i, *a))
                .collect();
            for &(r, a) in &support {
                for &(c, b) in &support {
                    trip.push((r, c, a * b.conj()));
                }
            }
        }
        let dim = self.states[0].dim();
        SparseOperator::from_triplets(dim, trip)
    }

    /// Operator norm of `(1 - P_S) A P_S`: how strongly `A` leaks out of the tower.
    pub fn leakage_norm(&self, op: &SparseOperator) -> f64 {
        let leaks: Vec<Vec<C64>> = self
            .states
            .iter()
            .map(|s| {
                let image = op.apply(s.amplitudes());
                let inside = self.project(&image);
                image.iter().zip(&inside).map(|(a, b)| a - b).collect()
            })
            .collect();
        let n = leaks.len();
        let gram = Mat::from_fn(n, n, |j, k| inner(&leaks[j], &leaks[k]));
        gram.self_adjoint_eigenvalues(Side::Lower)
            .map(|ev| ev.into_iter().fold(0.0, f64::max).max(0.0).sqrt())
            .unwrap_or(f64::NAN)
    }
}

/// Energies `E_j = omega m_j + (chi/N)[J(J+1) - m_j^2 + m_j]`,
/// `J = N/2`, `m_j = j - N/2`, of the scar states under `H_tot` at the DMI point.
pub fn expected_energies(spec: &HamiltonianSpec) -> Vec<f64> {
    let n = spec.n_sites();
    let big_j = n as f64 / 2.0;
    (0..=n)
        .map(|j| {
            let m = j as f64 - big_j;
            spec.omega * m + spec.chi / n as f64 * (big_j * (big_j + 1.0) - m * m + m)
        })
        .collect()
}

/// `|| ([H, Q+] - omega Q+) P_S ||`, the largest singular value of the
/// operator restricted to the tower on the right. Projecting on the left as
/// well would hide the leakage out of the tower: there `H_int` maps every
/// `|S_j>` entirely onto states with a `0` level, so the two-sided residual
/// vanishes for any `eta`.
pub fn sga_residual(h: &SparseOperator, omega: f64, tower: &ScarTower) -> Result<f64> {
    if !h.is_hermitian() {
        return Err(Error::ContractViolation("sga_residual needs a hermitian H".into()));
    }
    let basis = SpinBasis::new(tower.n_sites())?;
    let qp = basis.collective_operator(CollectiveKind::Plus);
    if qp.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: qp.dim(),
            got: h.dim(),
        });
    }
    let n = tower.len();
    // columns: ([H, Q+] - omega Q+)|S_k>
    let cols: Vec<Vec<C64>> = tower
        .states()
        .iter()
        .map(|s| {
            let q_s = qp.apply(s.amplitudes());
            let hq_s = h.apply(&q_s);
            let qh_s = qp.apply(&h.apply(s.amplitudes()));
            hq_s.iter()
                .zip(&qh_s)
                .zip(&q_s)
                .map(|((a, b), c)| a - b - c * omega)
                .collect()
        })
        .collect();
    // sigma_max(C)^2 = lambda_max(C^dag C) with C = [c_0 .. c_N]
    let gram = Mat::from_fn(n, n, |j, k| inner(&cols[j], &cols[k]));
    Ok(spectral_norm(&gram).sqrt())
}

#[derive(Clone, Debug)]
pub struct ScarEigenCheck {
    /// `max_j || H|S_j> - E_j|S_j> ||`.
    pub max_residual: f64,
    /// Analytic `E_j`.
    pub expected: Vec<f64>,
    /// Rayleigh quotients `<S_j|H|S_j>`.
    pub measured: Vec<f64>,
    /// `max - min` of the consecutive gaps `E_{j+1} - E_j`.
    pub gap_spread: f64,
    /// Gaps are non-constant (spread above 1e-9).
    pub anharmonic: bool,
}

/// Checks that every `|S_j>` is an eigenstate of `H_tot` with energy `E_j`.
///
/// Only defined at the DMI point `eta = +-pi/2` without the perturbation.
pub fn verify_scar_eigenstates(
    h_tot: &SparseOperator,
    spec: &HamiltonianSpec,
    tower: &ScarTower,
) -> Result<ScarEigenCheck> {
    if !spec.is_dmi_point() {
        return Err(Error::ContractViolation(format!(
            "scar eigenstates are only exact at eta = +-pi/2, got eta = {}",
            spec.eta
        )));
    }
    if spec.perturbation != 0.0 {
        return Err(Error::ContractViolation("scar eigenstate check needs eps_p = 0".into()));
    }
    if tower.n_sites() != spec.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: spec.n_sites(),
            got: tower.n_sites(),
        });
    }
    let expected = expected_energies(spec);
    let mut max_residual: f64 = 0.0;
    let mut measured = Vec::with_capacity(expected.len());
    for (s, &e) in tower.states().iter().zip(&expected) {
        let hs = h_tot.apply(s.amplitudes());
        measured.push(inner(s.amplitudes(), &hs).re);
        let r = hs
            .iter()
            .zip(s.amplitudes())
            .map(|(a, b)| (a - b * e).norm_sqr())
            .sum::<f64>()
            .sqrt();
        max_residual = max_residual.max(r);
    }
    let gaps: Vec<f64> = measured.windows(2).map(|w| w[1] - w[0]).collect();
    let gap_spread = gaps.iter().cloned().fold(f64::MIN, f64::max) - gaps.iter().cloned().fold(f64::MAX, f64::min);
    let gap_spread = if gaps.is_empty() { 0.0 } else { gap_spread };
    Ok(ScarEigenCheck {
        max_residual,
        expected,
        measured,
        gap_spread,
        anharmonic: gap_spread > 1e-9,
    })
}

#[derive(Clone, Debug)]
pub struct NonlinearityCheck {
    /// `[Q+Q-, Q+]` is not in `span{Q+, Q-}`.
    pub nonlinear: bool,
    /// Relative Frobenius residual of the least-squares fit.
    pub residual: f64,
    pub c_plus: C64,
    pub c_minus: C64,
}

/// Threshold on the relative fit residual below which `[Q+Q-, Q+]` counts as
/// linear in the ladder operators.
pub const NONLINEARITY_THRESHOLD: f64 = 1e-10;

/// Decides whether `H_nl` generates nonlinear evolution, by fitting
/// `C = [Q+Q-, Q+]` onto `span{Q+, Q-}` in the Frobenius inner product.
pub fn nonlinearity_check(n_sites: usize) -> Result<NonlinearityCheck> {
    let basis = SpinBasis::new(n_sites)?;
    let qp = basis.collective_operator(CollectiveKind::Plus);
    let qm = basis.collective_operator(CollectiveKind::Minus);
    let c = qp.matmul(&qm).commutator(&qp);
    let frob = |a: &SparseOperator, b: &SparseOperator| -> C64 {
        a.iter().map(|(r, col, v)| v.conj() * b.get(r, col)).sum()
    };
    // Q+ and Q- have disjoint supports, so the normal equations decouple.
    let c_plus = frob(&qp, &c) / frob(&qp, &qp);
    let c_minus = frob(&qm, &c) / frob(&qm, &qm);
    let fit = SparseOperator::linear_combination(&[(c_plus, &qp), (c_minus, &qm)]);
    let diff = c.sub(&fit);
    let norm_c = frob(&c, &c).re.sqrt();
    let residual = if norm_c > 0.0 {
        frob(&diff, &diff).re.sqrt() / norm_c
    } else {
        0.0
    };
    Ok(NonlinearityCheck {
        nonlinear: residual > NONLINEARITY_THRESHOLD,
        residual,
        c_plus,
        c_minus,
    })
}
