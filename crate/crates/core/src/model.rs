//! Lattice geometry, the spin-1 product basis and its magnetization sectors,
//! and the local and collective spin operators built on it.
//!
//! Basis ordering: site 0 is the fastest-varying ternary digit of the basis
//! index, and the local levels `m = -1, 0, +1` map to digits `0, 1, 2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{SparseOperator, C64};

/// Geometry and coupling parameters of a cubic lattice of spin-1 particles
/// confined to a box of side `L` in `d` dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    /// Spatial dimension.
    pub d: usize,
    /// Box side length.
    #[serde(rename = "L")]
    pub side_length: f64,
    /// Total number of sites; `N^(1/d)` must be an integer.
    #[serde(rename = "N")]
    pub n_sites: usize,
    /// Power-law exponent of the couplings.
    pub gamma: f64,
    /// Coupling amplitude.
    pub lambda: f64,
}

impl LatticeSpec {
    pub fn chain(n_sites: usize, side_length: f64, gamma: f64, lambda: f64) -> Self {
        LatticeSpec {
            d: 1,
            side_length,
            n_sites,
            gamma,
            lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::spec("d", "spatial dimension must be positive"));
        }
        if !(self.side_length > 0.0 && self.side_length.is_finite()) {
            return Err(Error::spec("L", format!("must be positive and finite, got {}", self.side_length)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::spec("gamma", format!("must be finite and >= 0, got {}", self.gamma)));
        }
        if !self.lambda.is_finite() {
            return Err(Error::spec("lambda", "must be finite"));
        }
        self.sites_per_side()?;
        Ok(())
    }

    /// Number of sites along each axis, `N^(1/d)`.
    pub fn sites_per_side(&self) -> Result<usize> {
        if self.d == 0 {
            return Err(Error::spec("d", "spatial dimension must be positive"));
        }
        let guess = (self.n_sites as f64).powf(1.0 / self.d as f64).round() as usize;
        let side = (guess.saturating_sub(1)..=guess + 1)
            .find(|k| k.checked_pow(self.d as u32) == Some(self.n_sites))
            .ok_or_else(|| {
                Error::spec("N", format!("N^(1/d) is not an integer (N = {}, d = {})", self.n_sites, self.d))
            })?;
        if side < 2 {
            return Err(Error::spec("N", format!("need N >= 2^d, got N = {}", self.n_sites)));
        }
        Ok(side)
    }

    /// Lattice spacing `a = L / (N^(1/d) - 1)` fixed by the box size.
    pub fn lattice_spacing(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.side_length / (self.sites_per_side()? - 1) as f64)
    }

    /// Integer lattice coordinates of a site (axis 0 varies fastest).
    pub fn coordinates(&self, site: usize) -> Result<Vec<usize>> {
        let side = self.sites_per_side()?;
        if site >= self.n_sites {
            return Err(Error::SiteOutOfRange {
                site,
                n_sites: self.n_sites,
            });
        }
        let mut rest = site;
        Ok((0..self.d)
            .map(|_| {
                let c = rest % side;
                rest /= side;
                c
            })
            .collect())
    }

    /// Symmetric `N x N` matrix of couplings `lambda / (a |n - n'|)^gamma`
    /// with open boundaries and zero diagonal.
    pub fn coupling_matrix(&self) -> Result<Vec<Vec<f64>>> {
        let a = self.lattice_spacing()?;
        let coords: Vec<Vec<usize>> = (0..self.n_sites)
            .map(|s| self.coordinates(s))
            .collect::<Result<_>>()?;
        let mut m = vec![vec![0.0; self.n_sites]; self.n_sites];
        for i in 0..self.n_sites {
            for j in (i + 1)..self.n_sites {
                let dist2: f64 = coords[i]
                    .iter()
                    .zip(&coords[j])
                    .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
                    .sum();
                let value = self.lambda / (a * dist2.sqrt()).powf(self.gamma);
                m[i][j] = value;
                m[j][i] = value;
            }
        }
        Ok(m)
    }
}

/// The `3^N` product basis of `N` spin-1 sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpinBasis {
    n_sites: usize,
}

/// A fixed-magnetization subset of the product basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sector {
    pub magnetization: i32,
    pub indices: Vec<usize>,
}

impl Sector {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

impl SpinBasis {
    pub fn new(n_sites: usize) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::spec("N", "need at least one site"));
        }
        if n_sites > 16 {
            return Err(Error::Capacity {
                dim: usize::MAX,
                cap: 3usize.pow(16),
                hint: "the product basis supports at most 16 sites",
            });
        }
        Ok(SpinBasis { n_sites })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        3usize.pow(self.n_sites as u32)
    }

    /// Level `m in {-1, 0, +1}` of `site` in basis state `index`.
    pub fn level(&self, index: usize, site: usize) -> i32 {
        ((index / 3usize.pow(site as u32)) % 3) as i32 - 1
    }

    pub fn levels(&self, index: usize) -> Vec<i32> {
        (0..self.n_sites).map(|s| self.level(index, s)).collect()
    }

    pub fn index_of(&self, levels: &[i32]) -> Result<usize> {
        if levels.len() != self.n_sites {
            return Err(Error::DimensionMismatch {
                expected: self.n_sites,
                got: levels.len(),
            });
        }
        let mut idx = 0usize;
        for &m in levels.iter().rev() {
            if !(-1..=1).contains(&m) {
                return Err(Error::spec("levels", format!("spin-1 level out of range: {m}")));
            }
            idx = idx * 3 + (m + 1) as usize;
        }
        Ok(idx)
    }

    pub fn magnetization(&self, index: usize) -> i32 {
        let mut rest = index;
        let mut total = 0;
        for _ in 0..self.n_sites {
            total += (rest % 3) as i32 - 1;
            rest /= 3;
        }
        total
    }

    /// All product states with total magnetization `m`.
    pub fn sector(&self, m: i32) -> Result<Sector> {
        let n = self.n_sites as i32;
        if m < -n || m > n {
            return Err(Error::spec("M", format!("magnetization {m} outside [-{n}, {n}]")));
        }
        let indices = (0..self.dim()).filter(|&i| self.magnetization(i) == m).collect();
        Ok(Sector {
            magnetization: m,
            indices,
        })
    }

    /// Every sector, ordered by magnetization.
    pub fn sectors(&self) -> Vec<Sector> {
        let n = self.n_sites as i32;
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); (2 * n + 1) as usize];
        for i in 0..self.dim() {
            buckets[(self.magnetization(i) + n) as usize].push(i);
        }
        buckets
            .into_iter()
            .enumerate()
            .map(|(k, indices)| Sector {
                magnetization: k as i32 - n,
                indices,
            })
            .collect()
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.n_sites {
            Err(Error::SiteOutOfRange {
                site,
                n_sites: self.n_sites,
            })
        } else {
            Ok(())
        }
    }

    /// Single-site spin-1 operator embedded at `site`.
    pub fn local_operator(&self, site: usize, kind: LocalKind) -> Result<SparseOperator> {
        self.check_site(site)?;
        let stride = 3usize.pow(site as u32);
        let mut trip = Vec::new();
        for idx in 0..self.dim() {
            let m = self.level(idx, site);
            match kind {
                LocalKind::Raise if m < 1 => trip.push((idx + stride, idx, raise_coeff(m))),
                LocalKind::Lower if m > -1 => trip.push((idx - stride, idx, lower_coeff(m))),
                LocalKind::Z if m != 0 => trip.push((idx, idx, C64::new(m as f64, 0.0))),
                _ => {}
            }
        }
        Ok(SparseOperator::from_triplets(self.dim(), trip))
    }

    /// Collective operator of the emergent SU(2) algebra,
    /// `Q+ = (1/2) sum_n (S+_n)^2` and `Qz = (1/2) sum_n Sz_n`.
    pub fn collective_operator(&self, kind: CollectiveKind) -> SparseOperator {
        let half = C64::new(0.5, 0.0);
        match kind {
            CollectiveKind::Plus => self.q_plus(),
            CollectiveKind::Minus => self.q_plus().adjoint(),
            CollectiveKind::Z => {
                let diag: Vec<f64> = (0..self.dim()).map(|i| 0.5 * self.magnetization(i) as f64).collect();
                SparseOperator::from_diagonal(&diag)
            }
            CollectiveKind::X => {
                let p = self.q_plus();
                let m = p.adjoint();
                SparseOperator::linear_combination(&[(half, &p), (half, &m)])
            }
            CollectiveKind::Y => {
                let p = self.q_plus();
                let m = p.adjoint();
                let ih = C64::new(0.0, 0.5);
                SparseOperator::linear_combination(&[(ih, &m), (-ih, &p)])
            }
        }
    }

    fn q_plus(&self) -> SparseOperator {
        let mut trip = Vec::new();
        for site in 0..self.n_sites {
            let stride = 3usize.pow(site as u32);
            for idx in 0..self.dim() {
                if self.level(idx, site) == -1 {
                    // (S+)^2 |-1> = sqrt(2*2) |+1>
                    let squared = ((2 * 2) as f64).sqrt();
                    trip.push((idx + 2 * stride, idx, C64::new(0.5 * squared, 0.0)));
                }
            }
        }
        SparseOperator::from_triplets(self.dim(), trip)
    }

    /// The fully polarized state `|-1, -1, ..., -1>` (index 0).
    pub fn all_down_index(&self) -> usize {
        0
    }

    /// The state with every site at `+1`.
    pub fn all_up_index(&self) -> usize {
        self.dim() - 1
    }
}

/// `S+|m> = sqrt(2 - m(m+1)) |m+1>`
fn raise_coeff(m: i32) -> C64 {
    C64::new(((2 - m * (m + 1)) as f64).sqrt(), 0.0)
}

/// `S-|m> = sqrt(2 - m(m-1)) |m-1>`
fn lower_coeff(m: i32) -> C64 {
    C64::new(((2 - m * (m - 1)) as f64).sqrt(), 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalKind {
    Raise,
    Lower,
    Z,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CollectiveKind {
    Plus,
    Minus,
    X,
    Y,
    Z,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> LatticeSpec {
        LatticeSpec::chain(n, 10.0, 2.0, 1.0)
    }

    #[test]
    fn lattice_spacing_examples() {
        assert!((chain(11).lattice_spacing().unwrap() - 1.0).abs() < 1e-15);
        assert!((chain(12).lattice_spacing().unwrap() - 10.0 / 11.0).abs() < 1e-15);
        let square = LatticeSpec {
            d: 2,
            ..chain(9)
        };
        assert!((square.lattice_spacing().unwrap() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn non_integer_root_is_rejected() {
        let bad = LatticeSpec { d: 2, ..chain(8) };
        assert!(matches!(bad.lattice_spacing(), Err(Error::InvalidSpec { field: "N", .. })));
        let too_small = LatticeSpec { d: 2, ..chain(1) };
        assert!(too_small.validate().is_err());
        assert!(LatticeSpec { side_length: -1.0, ..chain(4) }.validate().is_err());
        assert!(LatticeSpec { gamma: -0.5, ..chain(4) }.validate().is_err());
    }

    #[test]
    fn coupling_examples() {
        // N = 11, L = 10 gives a = 1.
        let m = chain(11).coupling_matrix().unwrap();
        assert_eq!(m[3][4], 1.0);
        assert_eq!(m[3][5], 0.25);
        assert_eq!(m[5][5], 0.0);
    }

    #[test]
    fn coupling_matrix_uses_euclidean_distance_in_2d() {
        let spec = LatticeSpec {
            d: 2,
            ..chain(9)
        };
        let m = spec.coupling_matrix().unwrap();
        // sites 0 = (0,0) and 4 = (1,1): distance sqrt(2) * a with a = 5
        assert!((m[0][4] - 1.0 / 50.0).abs() < 1e-15);
        assert!((m[0][1] - 1.0 / 25.0).abs() < 1e-15);
    }

    #[test]
    fn sector_examples() {
        let b = SpinBasis::new(2).unwrap();
        let top = b.sector(2).unwrap();
        assert_eq!(top.indices, vec![b.index_of(&[1, 1]).unwrap()]);
        let mid = b.sector(0).unwrap();
        assert_eq!(mid.len(), 3);
        assert!(b.sector(3).is_err());
    }

    #[test]
    fn local_ladder_examples() {
        let b = SpinBasis::new(1).unwrap();
        let sp = b.local_operator(0, LocalKind::Raise).unwrap();
        let down = b.index_of(&[-1]).unwrap();
        let mut psi = vec![C64::new(0.0, 0.0); 3];
        psi[down] = C64::new(1.0, 0.0);
        let twice = sp.apply(&sp.apply(&psi));
        let up = b.index_of(&[1]).unwrap();
        assert!((twice[up] - C64::new(2.0, 0.0)).norm() < 1e-15);
        assert!(b.local_operator(1, LocalKind::Z).is_err());
    }

    #[test]
    fn index_round_trip() {
        let b = SpinBasis::new(4).unwrap();
        for i in 0..b.dim() {
            assert_eq!(b.index_of(&b.levels(i)).unwrap(), i);
        }
        // site 0 is the fastest digit
        assert_eq!(b.index_of(&[0, -1, -1, -1]).unwrap(), 1);
    }
}
