//! Time propagation `psi(t) = exp(-i t H) psi(0)` for hermitian sparse `H`.
//!
//! Two backends: a dense eigendecomposition for small spaces and an adaptive
//! Lanczos (Krylov) propagator whose substeps are accepted only when the
//! a-posteriori error estimate is below the local tolerance.

use std::borrow::Cow;
use std::sync::atomic::{AtomicU64, Ordering};

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{inner, norm, SparseOperator, C64};

/// Largest dimension the dense backend will diagonalize.
pub const DENSE_CAP: usize = 20_000;
/// Largest dimension `Backend::Auto` hands to the dense backend.
pub const AUTO_DENSE_MAX: usize = 729;
/// Largest dimension the Krylov backend accepts.
pub const KRYLOV_CAP: usize = 200_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// Dense for dimensions up to [`AUTO_DENSE_MAX`], Krylov above.
    #[default]
    Auto,
    DenseEig,
    Krylov,
}

impl Backend {
    pub fn label(&self) -> &'static str {
        match self {
            Backend::Auto => "auto",
            Backend::DenseEig => "dense-eig",
            Backend::Krylov => "krylov",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovOptions {
    /// Maximum Krylov dimension per substep.
    pub max_dim: usize,
    /// Local error bound per accepted substep (absolute, in the 2-norm).
    pub tol: f64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions {
            max_dim: 30,
            tol: 1e-10,
        }
    }
}

enum Engine {
    Dense { energies: Vec<f64>, vectors: Mat<C64> },
    Krylov { opts: KrylovOptions, step: StepGuess },
}

/// Step size carried between calls; atomic so a propagator can be shared.
struct StepGuess(AtomicU64);

impl StepGuess {
    fn new(v: f64) -> Self {
        StepGuess(AtomicU64::new(v.to_bits()))
    }

    fn get(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Relaxed))
    }

    fn set(&self, v: f64) {
        self.0.store(v.to_bits(), Ordering::Relaxed)
    }
}

/// A propagator bound to one Hamiltonian.
pub struct Propagator<'a> {
    h: Cow<'a, SparseOperator>,
    engine: Engine,
}

impl<'a> Propagator<'a> {
    pub fn new(h: &'a SparseOperator, backend: Backend) -> Result<Self> {
        Self::with_options(Cow::Borrowed(h), backend, KrylovOptions::default())
    }

    /// A propagator that owns its operator.
    pub fn owned(h: SparseOperator, backend: Backend) -> Result<Propagator<'static>> {
        Propagator::with_options(Cow::Owned(h), backend, KrylovOptions::default())
    }

    pub fn with_options(
        h: Cow<'a, SparseOperator>,
        backend: Backend,
        opts: KrylovOptions,
    ) -> Result<Self> {
        if !h.is_hermitian() {
            return Err(Error::ContractViolation("propagation needs a hermitian operator".into()));
        }
        let dim = h.dim();
        let resolved = match backend {
            Backend::Auto if dim <= AUTO_DENSE_MAX => Backend::DenseEig,
            Backend::Auto => Backend::Krylov,
            b => b,
        };
        let engine = match resolved {
            Backend::DenseEig => {
                if dim > DENSE_CAP {
                    return Err(Error::Capacity {
                        dim,
                        cap: DENSE_CAP,
                        hint: "use the krylov backend or a smaller N",
                    });
                }
                let evd = h
                    .to_dense()
                    .self_adjoint_eigen(Side::Lower)
                    .map_err(|_| Error::Eigen)?;
                let energies = evd.S().column_vector().iter().map(|e| e.re).collect();
                Engine::Dense {
                    energies,
                    vectors: evd.U().to_owned(),
                }
            }
            _ => {
                if dim > KRYLOV_CAP {
                    return Err(Error::Capacity {
                        dim,
                        cap: KRYLOV_CAP,
                        hint: "reduce N; no backend handles this dimension",
                    });
                }
                let scale = h.inf_norm().max(1e-12);
                Engine::Krylov {
                    opts,
                    step: StepGuess::new(opts.max_dim as f64 / (2.0 * scale)),
                }
            }
        };
        Ok(Propagator { h, engine })
    }

    pub fn backend(&self) -> Backend {
        match self.engine {
            Engine::Dense { .. } => Backend::DenseEig,
            Engine::Krylov { .. } => Backend::Krylov,
        }
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    /// `exp(-i t H) psi`; `t` may be negative.
    pub fn apply(&self, psi: &[C64], t: f64) -> Result<Vec<C64>> {
        if psi.len() != self.h.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.h.dim(),
                got: psi.len(),
            });
        }
        match &self.engine {
            Engine::Dense { energies, vectors } => Ok(dense_apply(energies, vectors, psi, t)),
            Engine::Krylov { opts, step } => {
                let mut out = psi.to_vec();
                krylov_advance(&self.h, &mut out, t, *opts, step)?;
                Ok(out)
            }
        }
    }

    /// Calls `visit(k, t_k, psi(t_k))` for every time in `times`
    /// (nonnegative, strictly increasing). Each snapshot is renormalized.
    pub fn evolve_with<F>(&self, psi0: &[C64], times: &[f64], mut visit: F) -> Result<()>
    where
        F: FnMut(usize, f64, &[C64]) -> Result<()>,
    {
        check_times(times)?;
        let mut current = psi0.to_vec();
        let mut t_now = 0.0;
        for (k, &t) in times.iter().enumerate() {
            let mut next = match &self.engine {
                Engine::Dense { energies, vectors } => dense_apply(energies, vectors, psi0, t),
                Engine::Krylov { opts, step } => {
                    krylov_advance(&self.h, &mut current, t - t_now, *opts, step)?;
                    current.clone()
                }
            };
            let n = norm(&next);
            next.iter_mut().for_each(|a| *a /= n);
            if let Engine::Krylov { .. } = self.engine {
                current.clone_from(&next);
            }
            t_now = t;
            visit(k, t, &next)?;
        }
        Ok(())
    }
}

pub(crate) fn check_times(times: &[f64]) -> Result<()> {
    if times.first().is_some_and(|&t| !(t >= 0.0)) {
        return Err(Error::ContractViolation("time grid must start at t >= 0".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::ContractViolation("time grid must be strictly increasing".into()));
    }
    Ok(())
}

fn dense_apply(energies: &[f64], vectors: &Mat<C64>, psi: &[C64], t: f64) -> Vec<C64> {
    let n = energies.len();
    let coeffs: Vec<C64> = (0..n)
        .map(|k| {
            let c: C64 = (0..n).map(|i| vectors[(i, k)].conj() * psi[i]).sum();
            c * C64::from_polar(1.0, -energies[k] * t)
        })
        .collect();
    (0..n)
        .map(|i| (0..n).map(|k| vectors[(i, k)] * coeffs[k]).sum())
        .collect()
}

/// Advances `psi` by `t` with adaptive Lanczos substeps.
fn krylov_advance(
    h: &SparseOperator,
    psi: &mut Vec<C64>,
    t: f64,
    opts: KrylovOptions,
    step: &StepGuess,
) -> Result<()> {
    let mut remaining = t;
    let sign = t.signum();
    let mut halvings = 0;
    while remaining.abs() > 0.0 {
        let tau = step.get().min(remaining.abs());
        match lanczos_step(h, psi, sign * tau, opts) {
            Some((next, used)) => {
                *psi = next;
                remaining -= sign * tau;
                if remaining.abs() < 1e-15 * t.abs().max(1.0) {
                    remaining = 0.0;
                }
                halvings = 0;
                // only grow when this step was not truncated by the target time
                if tau >= step.get() && used < opts.max_dim / 2 {
                    step.set(step.get() * 1.5);
                }
            }
            None => {
                step.set(tau / 2.0);
                halvings += 1;
                if halvings > 60 {
                    return Err(Error::Krylov(format!(
                        "step size underflow at remaining time {remaining}"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// One Lanczos substep `exp(-i tau H) psi`. Returns the new vector and the
/// Krylov dimension used, or `None` when the error estimate exceeds the
/// tolerance at the maximum dimension.
fn lanczos_step(
    h: &SparseOperator,
    psi: &[C64],
    tau: f64,
    opts: KrylovOptions,
) -> Option<(Vec<C64>, usize)> {
    let beta0 = norm(psi);
    if beta0 == 0.0 {
        return Some((psi.to_vec(), 0));
    }
    let dim = psi.len();
    let m_max = opts.max_dim.min(dim).max(1);
    let mut basis: Vec<Vec<C64>> = vec![psi.iter().map(|a| a / beta0).collect()];
    let mut alpha: Vec<f64> = Vec::with_capacity(m_max);
    let mut beta: Vec<f64> = Vec::with_capacity(m_max);
    let mut w = vec![C64::new(0.0, 0.0); dim];
    for j in 0..m_max {
        h.apply_into(&basis[j], &mut w);
        let a = inner(&basis[j], &w).re;
        alpha.push(a);
        // full reorthogonalization against the whole basis
        for v in &basis {
            let c = inner(v, &w);
            w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
        }
        let b = norm(&w);
        let k = j + 1;
        let coeffs = small_exp(&alpha, &beta, tau);
        let breakdown = b < 1e-13 * (1.0 + a.abs());
        let err = b * coeffs[k - 1].norm() * beta0;
        if breakdown || err <= opts.tol {
            let mut out = vec![C64::new(0.0, 0.0); dim];
            for (v, c) in basis.iter().zip(&coeffs) {
                let c = c * beta0;
                out.iter_mut().zip(v).for_each(|(o, x)| *o += c * x);
            }
            return Some((out, k));
        }
        if k == m_max {
            return None;
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    None
}

/// `exp(-i tau T) e_1` for the real symmetric tridiagonal `T`.
fn small_exp(alpha: &[f64], beta: &[f64], tau: f64) -> Vec<C64> {
    let k = alpha.len();
    let t = Mat::<f64>::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i == j + 1 {
            beta[j]
        } else if j == i + 1 {
            beta[i]
        } else {
            0.0
        }
    });
    let evd = t
        .self_adjoint_eigen(Side::Lower)
        .expect("tridiagonal eigendecomposition");
    let u = evd.U();
    let s = evd.S().column_vector();
    (0..k)
        .map(|i| {
            (0..k)
                .map(|l| C64::from_polar(u[(i, l)] * u[(0, l)], -tau * s[l]))
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_hermitian(dim: usize, seed: u64) -> SparseOperator {
        let mut x = seed;
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut trip = Vec::new();
        for i in 0..dim {
            trip.push((i, i, C64::new(3.0 * next(), 0.0)));
            for j in (i + 1)..dim {
                if next() > 0.3 {
                    let v = C64::new(next(), next());
                    trip.push((i, j, v));
                    trip.push((j, i, v.conj()));
                }
            }
        }
        SparseOperator::from_triplets(dim, trip)
    }

    #[test]
    fn krylov_matches_dense() {
        let h = random_hermitian(60, 7);
        let mut psi: Vec<C64> = (0..60).map(|i| C64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let n = norm(&psi);
        psi.iter_mut().for_each(|a| *a /= n);
        let dense = Propagator::new(&h, Backend::DenseEig).unwrap();
        let kry = Propagator::new(&h, Backend::Krylov).unwrap();
        for t in [0.0, 0.1, 1.7, -2.5, 10.0] {
            let a = dense.apply(&psi, t).unwrap();
            let b = kry.apply(&psi, t).unwrap();
            let d: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
            assert!(d < 1e-8, "t = {t}: {d}");
        }
    }

    #[test]
    fn zero_time_is_identity() {
        let h = random_hermitian(20, 3);
        let psi: Vec<C64> = (0..20).map(|i| C64::new(i as f64, 0.0)).collect();
        for b in [Backend::DenseEig, Backend::Krylov] {
            let p = Propagator::new(&h, b).unwrap();
            let out = p.apply(&psi, 0.0).unwrap();
            let d: f64 = out.iter().zip(&psi).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            assert!(d < 1e-12);
        }
    }

    #[test]
    fn evolve_rejects_bad_grids() {
        let h = random_hermitian(10, 1);
        let p = Propagator::new(&h, Backend::Krylov).unwrap();
        let psi = vec![C64::new(1.0, 0.0); 10];
        assert!(p.evolve_with(&psi, &[0.0, 0.0], |_, _, _| Ok(())).is_err());
        assert!(p.evolve_with(&psi, &[-1.0, 0.0], |_, _, _| Ok(())).is_err());
    }

    #[test]
    fn non_hermitian_is_rejected() {
        let op = SparseOperator::from_triplets(2, vec![(0, 1, C64::new(1.0, 0.0))]);
        assert!(Propagator::new(&op, Backend::Krylov).is_err());
    }
}
