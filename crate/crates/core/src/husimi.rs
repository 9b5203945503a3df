//! Husimi distribution over spin coherent states and the localization
//! integral `I = (N+1)/(4 pi) \int Q(theta, phi) dOmega`.

use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;

use crate::dynamics::{coherent_state, csv_err};
use crate::error::{Error, Result};
use crate::scars::ScarTower;
use crate::sparse::C64;
use crate::state::StateVector;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Product grid: Gauss-Legendre in `cos(theta)` times a uniform `phi` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereQuadrature {
    pub theta_nodes: Vec<f64>,
    pub theta_weights: Vec<f64>,
    pub phi_nodes: Vec<f64>,
    /// Common weight `2 pi / phi_nodes.len()`.
    pub phi_weight: f64,
}

impl SphereQuadrature {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        let (x, w) = gauss_legendre(n_theta);
        SphereQuadrature {
            theta_nodes: x.iter().map(|c| c.acos()).collect(),
            theta_weights: w,
            phi_nodes: (0..n_phi).map(|k| 2.0 * PI * k as f64 / n_phi as f64).collect(),
            phi_weight: 2.0 * PI / n_phi as f64,
        }
    }

    /// Smallest grid that integrates `Q` exactly for `N` sites.
    pub fn minimal(n_sites: usize) -> Self {
        Self::new(n_sites + 1, 2 * n_sites + 2)
    }

    pub fn total_weight(&self) -> f64 {
        self.theta_weights.iter().sum::<f64>() * self.phi_weight * self.phi_nodes.len() as f64
    }

    pub fn check_resolution(&self, n_sites: usize) -> Result<()> {
        if self.theta_nodes.len() < n_sites + 1 || self.phi_nodes.len() < 2 * n_sites + 2 {
            return Err(Error::UnderResolved(format!(
                "{}x{} grid; N = {n_sites} needs at least {}x{}",
                self.theta_nodes.len(),
                self.phi_nodes.len(),
                n_sites + 1,
                2 * n_sites + 2
            )));
        }
        Ok(())
    }
}

/// `Q(theta, phi) = |<theta, phi|psi>|^2`.
pub fn husimi_value(psi: &StateVector, theta: f64, phi: f64) -> Result<f64> {
    let n = psi.norm();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized(n));
    }
    let c = coherent_state(psi.basis().n_sites(), theta, phi)?;
    if c.dim() != psi.dim() {
        return Err(Error::DimensionMismatch {
            expected: c.dim(),
            got: psi.dim(),
        });
    }
    Ok(c.fidelity(psi))
}

/// Evaluates `Q` through the Dicke components `<S_j|psi>`; exact because
/// every coherent state lies in the span of the tower.
pub struct LocalizationEvaluator {
    n_sites: usize,
    tower: ScarTower,
    quad: SphereQuadrature,
}

impl LocalizationEvaluator {
    pub fn new(n_sites: usize, quad: SphereQuadrature) -> Result<Self> {
        quad.check_resolution(n_sites)?;
        Ok(LocalizationEvaluator {
            n_sites,
            tower: ScarTower::build(n_sites)?,
            quad,
        })
    }

    /// Coherent-state amplitudes `<S_j|theta, phi>`.
    fn dicke_amplitudes(&self, theta: f64, phi: f64) -> Vec<C64> {
        let n = self.n_sites;
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let mut binom = 1.0;
        (0..=n)
            .map(|j| {
                if j > 0 {
                    binom *= (n + 1 - j) as f64 / j as f64;
                }
                let mag = binom.sqrt() * c.powi((n - j) as i32) * s.powi(j as i32);
                C64::from_polar(mag, -(j as f64) * phi)
            })
            .collect()
    }

    fn q_from_overlaps(&self, overlaps: &[C64], theta: f64, phi: f64) -> f64 {
        let amp: C64 = self
            .dicke_amplitudes(theta, phi)
            .iter()
            .zip(overlaps)
            .map(|(a, c)| a.conj() * c)
            .sum();
        amp.norm_sqr()
    }

    pub fn integral(&self, psi: &StateVector) -> Result<f64> {
        if psi.dim() != self.tower.state(0).dim() {
            return Err(Error::DimensionMismatch {
                expected: self.tower.state(0).dim(),
                got: psi.dim(),
            });
        }
        let overlaps = self.tower.overlaps(psi.amplitudes());
        let mut total = 0.0;
        for (&theta, &w) in self.quad.theta_nodes.iter().zip(&self.quad.theta_weights) {
            let ring: f64 = self
                .quad
                .phi_nodes
                .iter()
                .map(|&phi| self.q_from_overlaps(&overlaps, theta, phi))
                .sum();
            total += w * self.quad.phi_weight * ring;
        }
        Ok((self.n_sites + 1) as f64 / (4.0 * PI) * total)
    }

    /// `Q` on a uniform `n_theta x n_phi` grid, `theta` in `[0, pi]`, `phi` in `[0, 2 pi)`.
    pub fn map(&self, psi: &StateVector, n_theta: usize, n_phi: usize) -> Vec<HusimiPoint> {
        let overlaps = self.tower.overlaps(psi.amplitudes());
        let mut out = Vec::with_capacity(n_theta * n_phi);
        for a in 0..n_theta {
            let theta = PI * a as f64 / (n_theta.max(2) - 1) as f64;
            for b in 0..n_phi {
                let phi = 2.0 * PI * b as f64 / n_phi as f64;
                out.push(HusimiPoint {
                    theta,
                    phi,
                    q: self.q_from_overlaps(&overlaps, theta, phi),
                });
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HusimiPoint {
    pub theta: f64,
    pub phi: f64,
    #[serde(rename = "Q")]
    pub q: f64,
}

/// CSV with columns `theta, phi, Q`.
pub fn write_map_csv<W: Write>(points: &[HusimiPoint], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for p in points {
        out.serialize(p).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// `I` for a single state on the given quadrature.
pub fn localization_integral(psi: &StateVector, quad: &SphereQuadrature) -> Result<f64> {
    LocalizationEvaluator::new(psi.basis().n_sites(), quad.clone())?.integral(psi)
}
