//! Sector-resolved dense diagonalization, the eigenstate QFI scan and
//! gap-ratio statistics.

use std::io::Write;

use faer::{Mat, Side};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::csv_err;
use crate::error::{Error, Result};
use crate::hamiltonian::{build_total, HamiltonianSpec};
use crate::model::{CollectiveKind, SpinBasis};
use crate::propagate::DENSE_CAP;
use crate::scars::ScarTower;
use crate::sparse::{SparseOperator, C64};

/// Overlap `<E|P_S|E>` above which an eigenstate counts as a scar.
pub const SCAR_THRESHOLD: f64 = 0.99;
/// Minimum number of levels for [`gap_ratio`].
pub const MIN_LEVELS: usize = 100;

/// A set of basis indices closed under `H`.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub label: String,
    pub indices: Vec<usize>,
}

/// Magnetization sectors when `eps_p = 0`; with `eps_p Q^x` only the parity
/// of `M = sum S^z` survives.
pub fn symmetry_blocks(spec: &HamiltonianSpec) -> Result<Vec<Block>> {
    let basis = SpinBasis::new(spec.n_sites())?;
    if spec.perturbation == 0.0 {
        return Ok(basis
            .sectors()
            .into_iter()
            .map(|s| Block {
                label: format!("M={}", s.magnetization),
                indices: s.indices,
            })
            .collect());
    }
    let mut even = Vec::new();
    let mut odd = Vec::new();
    for idx in 0..basis.dim() {
        if basis.magnetization(idx).rem_euclid(2) == 0 {
            even.push(idx);
        } else {
            odd.push(idx);
        }
    }
    Ok([("M even", even), ("M odd", odd)]
        .into_iter()
        .filter(|(_, v)| !v.is_empty())
        .map(|(l, indices)| Block {
            label: l.to_string(),
            indices,
        })
        .collect())
}

/// Eigenvalues (ascending) and eigenvectors (columns, in block coordinates)
/// of `h` restricted to `indices`, or of the whole operator.
pub fn eigensystem(h: &SparseOperator, indices: Option<&[usize]>) -> Result<(Vec<f64>, Mat<C64>)> {
    let dim = indices.map_or(h.dim(), |i| i.len());
    if dim > DENSE_CAP {
        return Err(Error::Capacity {
            dim,
            cap: DENSE_CAP,
            hint: "choose a smaller N or a symmetry sector",
        });
    }
    if !h.is_hermitian() {
        return Err(Error::ContractViolation("eigensystem needs a hermitian operator".into()));
    }
    let dense = match indices {
        Some(i) => h.restrict(i)?,
        None => h.to_dense(),
    };
    let evd = dense.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Eigen)?;
    let energies = evd.S().column_vector().iter().map(|e| e.re).collect();
    Ok((energies, evd.U().to_owned()))
}

/// Eigenstate scan of one Hamiltonian, sorted by energy.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenScanRecord {
    pub energies: Vec<f64>,
    pub qfi_densities: Vec<f64>,
    pub scar_overlaps: Vec<f64>,
    pub sectors: Vec<String>,
    /// Dominant tower state `j` for eigenstates above [`SCAR_THRESHOLD`].
    #[serde(skip)]
    pub dicke_index: Vec<Option<usize>>,
}

#[derive(Serialize)]
struct ScanRow<'a> {
    energy: f64,
    qfi_density: f64,
    scar_overlap: f64,
    sector: &'a str,
}

impl EigenScanRecord {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn scar_rows(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&k| self.scar_overlaps[k] > SCAR_THRESHOLD)
            .collect()
    }

    /// Largest QFI density among eigenstates that are not scars.
    pub fn max_thermal_f(&self) -> f64 {
        (0..self.len())
            .filter(|&k| self.scar_overlaps[k] <= SCAR_THRESHOLD)
            .map(|k| self.qfi_densities[k])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV with columns `energy, qfi_density, scar_overlap, sector`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for k in 0..self.len() {
            out.serialize(ScanRow {
                energy: self.energies[k],
                qfi_density: self.qfi_densities[k],
                scar_overlap: self.scar_overlaps[k],
                sector: &self.sectors[k],
            })
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `f_j = 2 [J(J+1) - m_j^2] / N` for the tower state `j`.
pub fn dicke_qfi_density(n_sites: usize, j: usize) -> f64 {
    let jj = n_sites as f64 / 2.0;
    let m = j as f64 - jj;
    2.0 * (jj * (jj + 1.0) - m * m) / n_sites as f64
}

struct BlockScan {
    energies: Vec<f64>,
    f: Vec<f64>,
    overlaps: Vec<f64>,
    dicke: Vec<Option<usize>>,
    label: String,
}

/// Diagonalizes every symmetry block of `H_tot(spec)` and records, per
/// eigenstate, `f = 4 Var(Q^y) / N` and `<E|P_S|E>`. Within numerically
/// degenerate clusters the eigenvectors are rotated to diagonalize `P_S`,
/// which commutes with `H_tot`.
pub fn eigenstate_qfi_scan(spec: &HamiltonianSpec) -> Result<EigenScanRecord> {
    let h = build_total(spec)?;
    let n = spec.n_sites();
    let basis = SpinBasis::new(n)?;
    let qy = basis.collective_operator(CollectiveKind::Y);
    let tower = ScarTower::build(n)?;
    let blocks = symmetry_blocks(spec)?;
    for b in &blocks {
        if b.indices.len() > DENSE_CAP {
            return Err(Error::Capacity {
                dim: b.indices.len(),
                cap: DENSE_CAP,
                hint: "choose a smaller N",
            });
        }
    }
    let scale = h.inf_norm().max(1.0);
    let perturbed = spec.perturbation != 0.0;
    let scans: Vec<BlockScan> = blocks
        .par_iter()
        .map(|b| scan_block(&h, &qy, &tower, b, scale, n, perturbed))
        .collect::<Result<_>>()?;

    let mut rows: Vec<(f64, f64, f64, Option<usize>, String)> = scans
        .into_iter()
        .flat_map(|s| {
            let label = s.label;
            s.energies
                .into_iter()
                .zip(s.f)
                .zip(s.overlaps)
                .zip(s.dicke)
                .map(move |(((e, f), o), d)| (e, f, o, d, label.clone()))
        })
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.4.cmp(&b.4)));
    Ok(EigenScanRecord {
        energies: rows.iter().map(|r| r.0).collect(),
        qfi_densities: rows.iter().map(|r| r.1).collect(),
        scar_overlaps: rows.iter().map(|r| r.2).collect(),
        dicke_index: rows.iter().map(|r| r.3).collect(),
        sectors: rows.into_iter().map(|r| r.4).collect(),
    })
}

fn scan_block(
    h: &SparseOperator,
    qy: &SparseOperator,
    tower: &ScarTower,
    block: &Block,
    scale: f64,
    n_sites: usize,
    perturbed: bool,
) -> Result<BlockScan> {
    let (energies, mut vecs) = eigensystem(h, Some(&block.indices))?;
    let dim = block.indices.len();
    // tower states in block coordinates
    let local_tower: Vec<Vec<C64>> = tower
        .states()
        .iter()
        .map(|s| block.indices.iter().map(|&i| s.amplitudes()[i]).collect())
        .collect();
    let overlap_row = |vecs: &Mat<C64>, col: usize| -> Vec<C64> {
        local_tower
            .iter()
            .map(|t| (0..dim).map(|r| t[r].conj() * vecs[(r, col)]).sum())
            .collect()
    };

    let tol = 1e-9 * scale;
    let mut start = 0;
    while start < dim {
        let mut end = start + 1;
        while end < dim && energies[end] - energies[end - 1] < tol {
            end += 1;
        }
        if end - start > 1 {
            rotate_cluster(&mut vecs, start, end, &overlap_row);
        }
        start = end;
    }

    let mut full = vec![C64::new(0.0, 0.0); h.dim()];
    let mut f = Vec::with_capacity(dim);
    let mut overlaps = Vec::with_capacity(dim);
    let mut dicke = Vec::with_capacity(dim);
    for col in 0..dim {
        for (r, &i) in block.indices.iter().enumerate() {
            full[i] = vecs[(r, col)];
        }
        let ov = overlap_row(&vecs, col);
        let w: f64 = ov.iter().map(|c| c.norm_sqr()).sum();
        let image = qy.apply(&full);
        let mean = crate::sparse::inner(&full, &image).re;
        let var = crate::sparse::inner(&image, &image).re - mean * mean;
        f.push(4.0 * var / n_sites as f64);
        overlaps.push(w);
        dicke.push((w > SCAR_THRESHOLD).then(|| {
            ov.iter()
                .enumerate()
                .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
                .map(|(j, _)| j)
                .unwrap_or(0)
        }));
    }
    Ok(BlockScan {
        energies,
        f,
        overlaps,
        dicke,
        label: if perturbed {
            "full+perturbed".to_string()
        } else {
            block.label.clone()
        },
    })
}

/// Replaces columns `start..end` by combinations that diagonalize `P_S`.
fn rotate_cluster<F>(vecs: &mut Mat<C64>, start: usize, end: usize, overlap_row: &F)
where
    F: Fn(&Mat<C64>, usize) -> Vec<C64>,
{
    let k = end - start;
    let rows: Vec<Vec<C64>> = (start..end).map(|c| overlap_row(vecs, c)).collect();
    let p = Mat::<C64>::from_fn(k, k, |a, b| {
        rows[a].iter().zip(&rows[b]).map(|(x, y)| x.conj() * y).sum()
    });
    let Ok(evd) = p.self_adjoint_eigen(Side::Lower) else {
        return;
    };
    let u = evd.U();
    let dim = vecs.nrows();
    let old = Mat::<C64>::from_fn(dim, k, |r, c| vecs[(r, start + c)]);
    for c in 0..k {
        for r in 0..dim {
            vecs[(r, start + c)] = (0..k).map(|a| old[(r, a)] * u[(a, c)]).sum();
        }
    }
}

/// Mean ratio of consecutive level spacings.
pub fn gap_ratio(energies: &[f64]) -> Result<f64> {
    if energies.len() < MIN_LEVELS {
        return Err(Error::TooFewLevels {
            got: energies.len(),
            need: MIN_LEVELS,
        });
    }
    let mut e = energies.to_vec();
    e.sort_by(f64::total_cmp);
    let gaps: Vec<f64> = e.windows(2).map(|w| w[1] - w[0]).collect();
    let ratios: Vec<f64> = gaps
        .windows(2)
        .filter(|g| g[0].max(g[1]) > 0.0)
        .map(|g| g[0].min(g[1]) / g[0].max(g[1]))
        .collect();
    Ok(ratios.iter().sum::<f64>() / ratios.len() as f64)
}

/// Mean gap ratio over `samples` real symmetric Gaussian matrices of size
/// `dim`, using the central half of each spectrum.
pub fn goe_gap_ratio(dim: usize, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..samples {
        let mut m = Mat::<f64>::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..=i {
                let x: f64 = rng.sample(StandardNormal);
                let x = if i == j { x * std::f64::consts::SQRT_2 } else { x };
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        let e = m
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|_| Error::Eigen)?;
        total += gap_ratio(&e[dim / 4..3 * dim / 4])?;
    }
    Ok(total / samples as f64)
}

/// Eigenvalues of `H_tot(spec)` in magnetization sector `M`.
pub fn sector_energies(spec: &HamiltonianSpec, magnetization: i32) -> Result<Vec<f64>> {
    let h = build_total(spec)?;
    let sector = SpinBasis::new(spec.n_sites())?.sector(magnetization)?;
    Ok(eigensystem(&h, Some(&sector.indices))?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::build_h0;
    use crate::model::LatticeSpec;
    use std::f64::consts::PI;

    fn spec(n: usize, omega: f64, eta: f64, chi: f64) -> HamiltonianSpec {
        HamiltonianSpec::new(LatticeSpec::chain(n, 10.0, 2.0, 1.0), omega, eta, chi)
    }

    #[test]
    fn h0_spectrum_counts_magnetizations() {
        let h = build_h0(&spec(3, 1.0, 0.0, 0.0)).unwrap();
        let (e, _) = eigensystem(&h, None).unwrap();
        // multiplicities of M = -3..3 for three spin-1 sites
        let counts = [1, 3, 6, 7, 6, 3, 1];
        let mut k = 0;
        for (i, c) in counts.iter().enumerate() {
            for _ in 0..*c {
                assert!((e[k] - 0.5 * (i as f64 - 3.0)).abs() < 1e-13);
                k += 1;
            }
        }
    }

    #[test]
    fn two_site_dmi_blocks() {
        // L = 1 gives lambda = 1; in M = 0 the block on (|-1,+1>, |0,0>, |+1,-1>)
        // has hops of size 2 with phases e^{+-i pi/2}, eigenvalues 0, +-2 sqrt 2
        let s = HamiltonianSpec::new(LatticeSpec::chain(2, 1.0, 2.0, 1.0), 0.0, PI / 2.0, 0.0);
        let e = sector_energies(&s, 0).unwrap();
        let want = [-2.0 * 2f64.sqrt(), 0.0, 2.0 * 2f64.sqrt()];
        for (a, b) in e.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{e:?}");
        }
        // M = -1: (|-1,0>, |0,-1>) with hop 2 e^{i eta}
        let e = sector_energies(&s, -1).unwrap();
        assert!((e[0] + 2.0).abs() < 1e-12 && (e[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn eigenpairs_reconstruct_and_are_orthonormal() {
        let s = spec(4, 0.3, 1.0, 1.0).with_perturbation(0.1);
        let h = build_total(&s).unwrap();
        let (e, v) = eigensystem(&h, None).unwrap();
        let dense = h.to_dense();
        let hv = &dense * &v;
        let norm = crate::sparse::spectral_norm(&dense);
        for c in 0..e.len() {
            let r: f64 = (0..h.dim())
                .map(|i| (hv[(i, c)] - v[(i, c)] * e[c]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(r < 1e-9 * norm);
        }
        let gram = v.adjoint() * &v;
        for i in 0..e.len() {
            for j in 0..e.len() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - C64::new(want, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn scan_sum_rule_and_scar_values() {
        let n = 5;
        let s = spec(n, 2.0, PI / 2.0, 0.0).with_perturbation(1e-5);
        let rec = eigenstate_qfi_scan(&s).unwrap();
        assert_eq!(rec.len(), 243);
        assert!(rec.energies.windows(2).all(|w| w[1] >= w[0]));
        let total: f64 = rec.scar_overlaps.iter().sum();
        assert!((total - (n + 1) as f64).abs() < 1e-8);
        let scars = rec.scar_rows();
        assert_eq!(scars.len(), n + 1);
        for k in scars {
            let j = rec.dicke_index[k].unwrap();
            assert!((rec.qfi_densities[k] - dicke_qfi_density(n, j)).abs() < 1e-4);
        }
    }

    #[test]
    fn gap_ratio_needs_levels() {
        assert!(matches!(
            gap_ratio(&[0.0; 10]),
            Err(Error::TooFewLevels { got: 10, need: 100 })
        ));
    }

    #[test]
    fn picket_fence_has_unit_ratio() {
        let e: Vec<f64> = (0..200).map(|k| k as f64).collect();
        assert!((gap_ratio(&e).unwrap() - 1.0).abs() < 1e-12);
    }
}
