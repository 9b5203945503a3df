use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{inner, norm, SparseOperator, C64};

/// Normalization tolerance enforced by every constructor.
pub const NORM_TOL: f64 = 1e-12;

/// The basis a [`StateVector`] is expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    /// All `3^N` product states of `N` spin-1 sites.
    Full { n_sites: usize },
    /// The fixed-magnetization sector `sum_n m_n = magnetization`.
    Sector { n_sites: usize, magnetization: i32 },
    /// The `N+1` Dicke states `|J, m>` of the collective spin `J = N/2`.
    Dicke { n_sites: usize },
}

impl Basis {
    pub fn n_sites(&self) -> usize {
        match *self {
            Basis::Full { n_sites } | Basis::Sector { n_sites, .. } | Basis::Dicke { n_sites } => {
                n_sites
            }
        }
    }

    /// Dimension of the space, where it is fixed by the label alone.
    fn expected_dim(&self) -> Option<usize> {
        match *self {
            Basis::Full { n_sites } => Some(3usize.pow(n_sites as u32)),
            Basis::Dicke { n_sites } => Some(n_sites + 1),
            Basis::Sector { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    basis: Basis,
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// Normalizes `amplitudes`; fails on a zero vector.
    pub fn normalized(basis: Basis, mut amplitudes: Vec<C64>) -> Result<Self> {
        check_dim(&basis, amplitudes.len())?;
        let n = norm(&amplitudes);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::NotNormalized(n));
        }
        amplitudes.iter_mut().for_each(|a| *a /= n);
        Ok(StateVector { basis, amplitudes })
    }

    /// Wraps amplitudes that must already have unit norm (within 1e-12).
    pub fn from_normalized(basis: Basis, amplitudes: Vec<C64>) -> Result<Self> {
        check_dim(&basis, amplitudes.len())?;
        let n = norm(&amplitudes);
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(n));
        }
        Ok(StateVector { basis, amplitudes })
    }

    /// Computational basis state `|index>`.
    pub fn basis_state(basis: Basis, dim: usize, index: usize) -> Result<Self> {
        check_dim(&basis, dim)?;
        if index >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: index + 1,
            });
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Ok(StateVector {
            basis,
            amplitudes: amps,
        })
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    /// `<self|other>`
    pub fn inner(&self, other: &StateVector) -> C64 {
        inner(&self.amplitudes, &other.amplitudes)
    }

    /// `|<self|other>|^2`
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn distance(&self, other: &StateVector) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn expectation(&self, op: &SparseOperator) -> f64 {
        op.expectation(&self.amplitudes).re
    }

    /// `<O^2> - <O>^2` for a hermitian `O`, using `<O^2> = ||O psi||^2`.
    pub fn variance(&self, op: &SparseOperator) -> f64 {
        let o_psi = op.apply(&self.amplitudes);
        let mean = inner(&self.amplitudes, &o_psi).re;
        let second = o_psi.iter().map(|x| x.norm_sqr()).sum::<f64>();
        (second - mean * mean).max(0.0)
    }
}

fn check_dim(basis: &Basis, dim: usize) -> Result<()> {
    match basis.expected_dim() {
        Some(expected) if expected != dim => Err(Error::DimensionMismatch { expected, got: dim }),
        _ => Ok(()),
    }
}
