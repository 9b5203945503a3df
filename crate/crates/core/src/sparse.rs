//! Compressed-sparse-row complex operators.
//!
//! Every operator in the crate (local and collective spin operators, the
//! Hamiltonian terms, the boson-coupled Hamiltonian) is a [`SparseOperator`].
//! Rows are sorted by column and duplicate entries are summed at construction,
//! so two operators built from the same entries in a different order compare
//! equal entry by entry.

use std::io::Write;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Row count above which matrix-vector products are split across the rayon pool.
const PAR_ROWS: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
    hermitian: bool,
}

impl SparseOperator {
    /// Builds an operator from unordered `(row, col, value)` triplets.
    ///
    /// Duplicates are summed and exact zeros dropped. The hermitian flag is set
    /// when the stored entries equal their conjugate transpose exactly.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; dim + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside dimension {dim}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..dim {
            indptr[r + 1] += indptr[r];
        }
        let mut op = SparseOperator {
            dim,
            indptr,
            indices,
            values,
            hermitian: false,
        }
        .pruned();
        op.hermitian = op.check_hermitian();
        op
    }

    pub fn zeros(dim: usize) -> Self {
        SparseOperator {
            dim,
            indptr: vec![0; dim + 1],
            indices: Vec::new(),
            values: Vec::new(),
            hermitian: true,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![1.0; dim])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let trip = diag
            .iter()
            .enumerate()
            .map(|(i, &d)| (i, i, C64::new(d, 0.0)))
            .collect();
        Self::from_triplets(diag.len(), trip)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// True when the stored entries equal their conjugate transpose exactly.
    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Iterates over the stored `(row, col, value)` entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.values[k]))
        })
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |k| (self.indices[k], self.values[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let cols = &self.indices[self.indptr[r]..self.indptr[r + 1]];
        match cols.binary_search(&c) {
            Ok(k) => self.values[self.indptr[r] + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    fn pruned(mut self) -> Self {
        if self.values.iter().all(|v| *v != C64::new(0.0, 0.0)) {
            return self;
        }
        let mut indptr = vec![0usize; self.dim + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.dim {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.values[k] != C64::new(0.0, 0.0) {
                    indices.push(self.indices[k]);
                    values.push(self.values[k]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
        self
    }

    fn check_hermitian(&self) -> bool {
        self.iter().all(|(r, c, v)| self.get(c, r) == v.conj())
    }

    /// `y = A x`
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.dim];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        let row_dot = |r: usize| {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            acc
        };
        if self.dim >= PAR_ROWS {
            y.par_iter_mut().enumerate().for_each(|(r, yr)| *yr = row_dot(r));
        } else {
            y.iter_mut().enumerate().for_each(|(r, yr)| *yr = row_dot(r));
        }
    }

    /// `<x|A|x>`
    pub fn expectation(&self, x: &[C64]) -> C64 {
        let ax = self.apply(x);
        x.iter().zip(&ax).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn adjoint(&self) -> Self {
        let trip = self.iter().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.dim, trip)
    }

    pub fn scaled(&self, alpha: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        let out = out.pruned();
        let hermitian = out.check_hermitian();
        SparseOperator { hermitian, ..out }
    }

    /// `sum_k alpha_k A_k` over operators of equal dimension.
    pub fn linear_combination(terms: &[(C64, &SparseOperator)]) -> Self {
        let dim = terms.first().map_or(0, |(_, a)| a.dim);
        let total: usize = terms.iter().map(|(_, a)| a.nnz()).sum();
        let mut trip = Vec::with_capacity(total);
        for (alpha, a) in terms {
            assert_eq!(a.dim, dim, "dimension mismatch in linear combination");
            trip.extend(a.iter().map(|(r, c, v)| (r, c, *alpha * v)));
        }
        Self::from_triplets(dim, trip)
    }

    pub fn add(&self, other: &SparseOperator) -> Self {
        let one = C64::new(1.0, 0.0);
        Self::linear_combination(&[(one, self), (one, other)])
    }

    pub fn sub(&self, other: &SparseOperator) -> Self {
        Self::linear_combination(&[(C64::new(1.0, 0.0), self), (C64::new(-1.0, 0.0), other)])
    }

    /// Sparse product `A B`.
    pub fn matmul(&self, other: &SparseOperator) -> Self {
        assert_eq!(self.dim, other.dim);
        let dim = self.dim;
        let mut acc = vec![C64::new(0.0, 0.0); dim];
        let mut touched = vec![false; dim];
        let mut cols: Vec<usize> = Vec::new();
        let mut trip = Vec::new();
        for r in 0..dim {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if !touched[c] {
                        touched[c] = true;
                        cols.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            for &c in &cols {
                trip.push((r, c, acc[c]));
                acc[c] = C64::new(0.0, 0.0);
                touched[c] = false;
            }
            cols.clear();
        }
        Self::from_triplets(dim, trip)
    }

    /// `[A, B] = AB - BA`
    pub fn commutator(&self, other: &SparseOperator) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }

    /// Kronecker product `A ⊗ B`; the index of `B` varies fastest.
    pub fn kron(&self, other: &SparseOperator) -> Self {
        let dim = self.dim * other.dim;
        let mut trip = Vec::with_capacity(self.nnz() * other.nnz());
        for (r1, c1, v1) in self.iter() {
            for (r2, c2, v2) in other.iter() {
                trip.push((r1 * other.dim + r2, c1 * other.dim + c2, v1 * v2));
            }
        }
        Self::from_triplets(dim, trip)
    }

    /// Largest entry magnitude (0 for the zero operator).
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise difference `max |A_ij - B_ij|`.
    pub fn max_abs_diff(&self, other: &SparseOperator) -> f64 {
        self.sub(other).max_abs()
    }

    /// Maximum absolute row sum; bounds the spectral norm of a hermitian operator.
    pub fn inf_norm(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        let mut col = vec![0.0; self.dim];
        for (_, c, v) in self.iter() {
            col[c] += v.norm();
        }
        col.into_iter().fold(0.0, f64::max)
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let mut m = Mat::<C64>::zeros(self.dim, self.dim);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    /// Dense block `A[indices, indices]`.
    pub fn restrict(&self, indices: &[usize]) -> Result<Mat<C64>> {
        let mut pos = vec![usize::MAX; self.dim];
        for (k, &i) in indices.iter().enumerate() {
            if i >= self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: i + 1,
                });
            }
            pos[i] = k;
        }
        let mut m = Mat::<C64>::zeros(indices.len(), indices.len());
        for (k, &r) in indices.iter().enumerate() {
            for (c, v) in self.row(r) {
                if pos[c] != usize::MAX {
                    m[(k, pos[c])] = v;
                }
            }
        }
        Ok(m)
    }

    /// Writes one `row col re im` line per stored entry, floats with 17
    /// significant digits.
    pub fn write_coo<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (r, c, v) in self.iter() {
            writeln!(w, "{r} {c} {:.16e} {:.16e}", v.re, v.im)?;
        }
        Ok(())
    }

    /// Parses the `row col re im` format written by [`write_coo`](Self::write_coo).
    pub fn read_coo(dim: usize, text: &str) -> Result<Self> {
        let mut trip = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = || Error::Config(format!("coordinate list line {}: {line:?}", lineno + 1));
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(bad());
            }
            let r: usize = f[0].parse().map_err(|_| bad())?;
            let c: usize = f[1].parse().map_err(|_| bad())?;
            let re: f64 = f[2].parse().map_err(|_| bad())?;
            let im: f64 = f[3].parse().map_err(|_| bad())?;
            if r >= dim || c >= dim {
                return Err(bad());
            }
            trip.push((r, c, C64::new(re, im)));
        }
        Ok(Self::from_triplets(dim, trip))
    }
}

/// `<a|b>`
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest singular value of a small dense matrix.
pub fn spectral_norm(m: &Mat<C64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.singular_values()
        .map(|s| s.into_iter().fold(0.0, f64::max))
        .unwrap_or(f64::NAN)
}
