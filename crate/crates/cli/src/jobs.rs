//! Experiments are split into independent jobs; each job is the unit of
//! caching and of parallel execution.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use scar_metrology::boson::{self, AppendixRow, BosonCoupledSpec};
use scar_metrology::dynamics::{self, coherent_state, linspace, twisting_time};
use scar_metrology::husimi::{self, LocalizationEvaluator, SphereQuadrature};
use scar_metrology::metrology::{self, EchoSpec};
use scar_metrology::spectrum::{self, MIN_LEVELS};
use scar_metrology::verification::{verify, VerificationReport};
use scar_metrology::{oracle, Backend, HamiltonianSpec, LatticeSpec};

use crate::config::{Experiment, RunConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobOutput {
    /// Files written as-is, keyed by file name.
    pub files: BTreeMap<String, String>,
    /// One-job slice `(file name, csv text)` of a file shared by several jobs.
    pub rows: Option<(String, String)>,
    pub summary: Value,
}

impl JobOutput {
    fn summary(summary: Value) -> Self {
        JobOutput {
            files: BTreeMap::new(),
            rows: None,
            summary,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Job {
    Eigenscan {
        spec: HamiltonianSpec,
    },
    GoeReference {
        dim: usize,
        samples: usize,
        seed: u64,
    },
    Trajectory {
        spec: HamiltonianSpec,
        times: Vec<f64>,
        backend: Backend,
    },
    OracleTrajectory {
        spec: HamiltonianSpec,
        times: Vec<f64>,
    },
    MaxQfi {
        spec: HamiltonianSpec,
        points: usize,
        backend: Backend,
    },
    ErrorVsTime {
        lattice: LatticeSpec,
        eta: f64,
        chi: f64,
        times: Vec<f64>,
        backend: Backend,
    },
    ErrorMinimum {
        lattice: LatticeSpec,
        eta: f64,
        chi: f64,
        times: Vec<f64>,
        refine: bool,
        backend: Backend,
    },
    HusimiMap {
        spec: HamiltonianSpec,
        times: Vec<f64>,
        n_theta: usize,
        n_phi: usize,
        backend: Backend,
    },
    Appendix {
        spec: BosonCoupledSpec,
        times: Vec<f64>,
        backend: Backend,
    },
    Verify {
        n_sites: usize,
    },
}

/// Compact numeric tag for file names: `1.5707963` becomes `1p5708`.
pub fn tag(x: f64) -> String {
    let s = format!("{:.4}", x);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.replace('-', "m").replace('.', "p")
}

fn stem(spec: &HamiltonianSpec) -> String {
    format!("N{}_eta{}_chi{}", spec.n_sites(), tag(spec.eta), tag(spec.chi))
}

fn csv_text(f: impl FnOnce(&mut Vec<u8>) -> scar_metrology::Result<()>) -> Result<String> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(String::from_utf8(buf)?)
}

/// Echo preparation times: `points` values over `(0, pi N / (4 chi)]`.
pub fn echo_times(n_sites: usize, chi: f64, points: usize) -> Vec<f64> {
    let t_max = PI * n_sites as f64 / (4.0 * chi.abs());
    linspace(0.0, t_max, points + 1)[1..].to_vec()
}

impl Job {
    pub fn label(&self) -> String {
        match self {
            Job::Eigenscan { spec } => format!("eigenscan_{}", stem(spec)),
            Job::GoeReference { dim, samples, seed } => format!("goe_dim{dim}_s{samples}_seed{seed}"),
            Job::Trajectory { spec, .. } => format!("trajectory_{}", stem(spec)),
            Job::OracleTrajectory { spec, .. } => format!("oracle_{}", stem(spec)),
            Job::MaxQfi { spec, .. } => format!("maxqfi_{}", stem(spec)),
            Job::ErrorVsTime { lattice, eta, .. } => format!("error_time_N{}_eta{}", lattice.n_sites, tag(*eta)),
            Job::ErrorMinimum { lattice, eta, .. } => format!("error_min_N{}_eta{}", lattice.n_sites, tag(*eta)),
            Job::HusimiMap { spec, .. } => format!("husimi_{}", stem(spec)),
            Job::Appendix { spec, .. } => format!("appendix_J{}", tag(spec.coupling)),
            Job::Verify { n_sites } => format!("verify_N{n_sites}"),
        }
    }

    pub fn cacheable(&self) -> bool {
        !matches!(self, Job::Verify { .. })
    }

    pub fn run(&self) -> Result<JobOutput> {
        match self {
            Job::Eigenscan { spec } => {
                let rec = spectrum::eigenstate_qfi_scan(spec)?;
                let name = format!("fig1_{}.csv", stem(spec));
                let text = csv_text(|b| rec.write_csv(b))?;
                let scar_f: Vec<f64> = rec.scar_rows().iter().map(|&k| rec.qfi_densities[k]).collect();
                // Level statistics in the central sector of the symmetric model.
                let mut sym = spec.clone();
                sym.perturbation = 0.0;
                let m = 0;
                let levels = spectrum::sector_energies(&sym, m)?;
                let gap_ratio = if levels.len() >= MIN_LEVELS {
                    Some(spectrum::gap_ratio(&levels)?)
                } else {
                    None
                };
                Ok(JobOutput {
                    files: BTreeMap::from([(name, text)]),
                    rows: None,
                    summary: json!({
                        "levels": rec.len(),
                        "scar_count": scar_f.len(),
                        "scar_f": scar_f,
                        "max_thermal_f": rec.max_thermal_f(),
                        "gap_ratio_sector": m,
                        "gap_ratio_levels": levels.len(),
                        "gap_ratio": gap_ratio,
                    }),
                })
            }
            Job::GoeReference { dim, samples, seed } => Ok(JobOutput::summary(json!({
                "goe_gap_ratio": spectrum::goe_gap_ratio(*dim, *samples, *seed)?,
            }))),
            Job::Trajectory { spec, times, backend } => {
                let psi0 = coherent_state(spec.n_sites(), PI / 2.0, 0.0)?;
                let rec = dynamics::trajectory(spec, &psi0, times, *backend, true)?;
                Ok(trajectory_output(format!("fig2_{}.csv", stem(spec)), &rec)?)
            }
            Job::OracleTrajectory { spec, times } => {
                let rec = oracle::collective_trajectory(spec, PI / 2.0, 0.0, times)?;
                Ok(trajectory_output(format!("fig2_{}_oracle.csv", stem(spec)), &rec)?)
            }
            Job::MaxQfi { spec, points, backend } => {
                let rows = dynamics::max_qfi_scan(spec, &[spec.n_sites()], *points, *backend)?;
                let text = csv_text(|b| dynamics::write_sweep_csv(&rows, b))?;
                Ok(JobOutput {
                    files: BTreeMap::new(),
                    rows: Some(("fig3.csv".into(), text)),
                    summary: serde_json::to_value(&rows[0])?,
                })
            }
            Job::ErrorVsTime {
                lattice,
                eta,
                chi,
                times,
                backend,
            } => {
                let echo = EchoSpec::new(lattice.clone(), *eta, *chi, 0.0);
                let rows = metrology::error_vs_time(&echo, times, *backend)?;
                let text = csv_text(|b| metrology::write_time_csv(&rows, b))?;
                let best = rows.iter().map(|r| r.delta_eps).fold(f64::INFINITY, f64::min);
                Ok(JobOutput {
                    files: BTreeMap::new(),
                    rows: Some((format!("fig4a_N{}.csv", lattice.n_sites), text)),
                    summary: json!({ "grid_min_delta_eps": finite_or_null(best) }),
                })
            }
            Job::ErrorMinimum {
                lattice,
                eta,
                chi,
                times,
                refine,
                backend,
            } => {
                let echo = EchoSpec::new(lattice.clone(), *eta, *chi, 0.0);
                let row = metrology::minimize_error(&echo, times, *backend, *refine)?;
                let text = csv_text(|b| metrology::write_scaling_csv(&[row], b))?;
                Ok(JobOutput {
                    files: BTreeMap::new(),
                    rows: Some(("fig4b.csv".into(), text)),
                    summary: json!({
                        "N": row.n_sites,
                        "eta": row.eta,
                        "min_delta_eps": finite_or_null(row.min_delta_eps),
                        "argmin_t": row.argmin_t,
                    }),
                })
            }
            Job::HusimiMap {
                spec,
                times,
                n_theta,
                n_phi,
                backend,
            } => {
                let n = spec.n_sites();
                let h = scar_metrology::build_total(spec)?;
                let psi0 = coherent_state(n, PI / 2.0, 0.0)?;
                let eval = LocalizationEvaluator::new(n, SphereQuadrature::minimal(n))?;
                let mut files = BTreeMap::new();
                let mut integrals = Vec::new();
                dynamics::evolve_with(&h, &psi0, times, *backend, |k, _, s| {
                    let map = eval.map(s, *n_theta, *n_phi);
                    let mut buf = Vec::new();
                    husimi::write_map_csv(&map, &mut buf)?;
                    files.insert(
                        format!("husimi_{}_t{k}.csv", stem(spec)),
                        String::from_utf8_lossy(&buf).into_owned(),
                    );
                    integrals.push(eval.integral(s)?);
                    Ok(())
                })?;
                Ok(JobOutput {
                    files,
                    rows: None,
                    summary: json!({ "times": times, "localization": integrals }),
                })
            }
            Job::Appendix { spec, times, backend } => {
                spec.validate()?;
                let infidelity = boson::dynamics_comparison(spec, times, *backend)?;
                let row = AppendixRow {
                    coupling: spec.coupling,
                    chi_eff: spec.chi_eff()?,
                    residual: boson::effective_residual(spec)?,
                    max_infidelity: infidelity.iter().copied().fold(0.0, f64::max),
                };
                let text = csv_text(|b| boson::write_csv(&[row], b))?;
                Ok(JobOutput {
                    files: BTreeMap::new(),
                    rows: Some(("appendix.csv".into(), text)),
                    summary: serde_json::to_value(row)?,
                })
            }
            Job::Verify { n_sites } => {
                let report = verify(*n_sites)?;
                Ok(JobOutput {
                    files: BTreeMap::from([("verify.json".into(), serde_json::to_string_pretty(&report)?)]),
                    rows: None,
                    summary: serde_json::to_value(&report)?,
                })
            }
        }
    }
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn trajectory_output(name: String, rec: &dynamics::TrajectoryRecord) -> Result<JobOutput> {
    let text = csv_text(|b| rec.write_csv(b))?;
    let (max_f, argmax_t) = rec.max_f();
    Ok(JobOutput {
        files: BTreeMap::from([(name, text)]),
        rows: None,
        summary: json!({ "max_f": max_f, "argmax_t": argmax_t, "backend": rec.backend }),
    })
}

/// Recovers the verification report from a verify job's output.
pub fn verification_report(out: &JobOutput) -> Option<VerificationReport> {
    serde_json::from_value(out.summary.clone()).ok()
}

/// Expands a resolved configuration into jobs.
pub fn plan(cfg: &RunConfig) -> Result<Vec<Job>> {
    let lattice = |n: usize| LatticeSpec {
        d: cfg.d,
        side_length: cfg.side_length,
        n_sites: n,
        gamma: cfg.gamma,
        lambda: cfg.lambda,
    };
    let omega = cfg.omega.unwrap_or(0.0);
    let spec = |n: usize, eta: f64, chi: f64| {
        HamiltonianSpec::new(lattice(n), omega, eta, chi).with_perturbation(cfg.perturbation)
    };
    let mut combos = Vec::new();
    for &eta in &cfg.etas {
        for &chi in &cfg.chis {
            for &n in &cfg.sizes {
                combos.push((n, eta, chi));
            }
        }
    }
    let mut jobs = Vec::new();
    match cfg.experiment {
        Experiment::Fig1 => {
            for &(n, eta, chi) in &combos {
                let s = spec(n, eta, chi);
                s.validate()?;
                jobs.push(Job::Eigenscan { spec: s });
            }
            if cfg.goe_samples > 0 {
                jobs.push(Job::GoeReference {
                    dim: 1000,
                    samples: cfg.goe_samples,
                    seed: cfg.seed,
                });
            }
        }
        Experiment::Fig2 => {
            for &(n, eta, chi) in &combos {
                let s = spec(n, eta, chi);
                s.validate()?;
                let t_max = cfg.t_max.unwrap_or_else(|| 1.2 * twisting_time(n, chi));
                let times = linspace(0.0, t_max, cfg.points);
                if s.is_dmi_point() {
                    jobs.push(Job::OracleTrajectory {
                        spec: s.clone(),
                        times: times.clone(),
                    });
                }
                jobs.push(Job::Trajectory {
                    spec: s,
                    times,
                    backend: cfg.backend,
                });
            }
        }
        Experiment::Fig3 => {
            for &(n, eta, chi) in &combos {
                let s = spec(n, eta, chi);
                s.validate()?;
                jobs.push(Job::MaxQfi {
                    spec: s,
                    points: cfg.points,
                    backend: cfg.backend,
                });
            }
        }
        Experiment::Fig4 => {
            for &(n, eta, chi) in &combos {
                jobs.push(Job::ErrorMinimum {
                    lattice: lattice(n),
                    eta,
                    chi,
                    times: echo_times(n, chi, cfg.points),
                    refine: cfg.refine,
                    backend: cfg.backend,
                });
            }
            for &eta in &cfg.etas {
                for &chi in &cfg.chis {
                    let n = cfg.time_scan_n;
                    jobs.push(Job::ErrorVsTime {
                        lattice: lattice(n),
                        eta,
                        chi,
                        times: echo_times(n, chi, cfg.points),
                        backend: cfg.backend,
                    });
                }
            }
        }
        Experiment::Verify => {
            for &n in &cfg.sizes {
                jobs.push(Job::Verify { n_sites: n });
            }
        }
        Experiment::HusimiMap => {
            for &(n, eta, chi) in &combos {
                let s = spec(n, eta, chi);
                s.validate()?;
                let t_star = twisting_time(n, chi);
                let times = cfg
                    .map_times
                    .clone()
                    .unwrap_or_else(|| vec![0.1 * t_star, 0.5 * t_star, t_star]);
                jobs.push(Job::HusimiMap {
                    spec: s,
                    times,
                    n_theta: cfg.n_theta,
                    n_phi: cfg.n_phi,
                    backend: cfg.backend,
                });
            }
        }
        Experiment::Appendix => {
            for &(n, eta, _) in &combos {
                for &j in &cfg.couplings {
                    let mut s = BosonCoupledSpec::new(
                        HamiltonianSpec::new(lattice(n), omega, eta, 0.0),
                        cfg.omega_a,
                        j,
                    );
                    s.n_max = cfg.n_max;
                    s.validate()?;
                    let t_max = cfg
                        .t_max
                        .unwrap_or_else(|| s.chi_eff().map(|c| twisting_time(n, c.abs())).unwrap_or(0.0));
                    jobs.push(Job::Appendix {
                        times: linspace(0.0, t_max, cfg.points),
                        spec: s,
                        backend: cfg.backend,
                    });
                }
            }
        }
    }
    Ok(jobs)
}

/// Concatenates row slices that share a file name, keeping one header.
pub fn merge_rows<'a>(outputs: impl IntoIterator<Item = &'a JobOutput>) -> BTreeMap<String, String> {
    let mut merged: BTreeMap<String, String> = BTreeMap::new();
    for out in outputs {
        if let Some((name, text)) = &out.rows {
            match merged.get_mut(name) {
                Some(acc) => acc.extend(text.lines().skip(1).map(|l| format!("{l}\n"))),
                None => {
                    merged.insert(name.clone(), text.clone());
                }
            }
        }
    }
    merged
}
