//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails. Pass criterion numbers as arguments to
//! run a subset, e.g. `cargo test --test acceptance -- 1 5`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use scar_metrology::boson::{dynamics_comparison, effective_residual, BosonCoupledSpec};
use scar_metrology::dynamics::{coherent_state, evolve_with, linspace, trajectory, twisting_time};
use scar_metrology::husimi::{LocalizationEvaluator, SphereQuadrature};
use scar_metrology::metrology::{log_log_slope, minimize_error, EchoEngine, EchoSpec};
use scar_metrology::oracle::{collective_evolve, collective_trajectory, embed, CollectiveModel, Ladder};
use scar_metrology::scars::{expected_energies, sga_residual};
use scar_metrology::spectrum::{dicke_qfi_density, eigenstate_qfi_scan};
use scar_metrology::verification::verify;
use scar_metrology::*;

type Check = Result<Vec<Clause>>;

struct Clause {
    text: String,
    passed: bool,
}

fn clause(passed: bool, text: impl Into<String>) -> Clause {
    Clause {
        text: text.into(),
        passed,
    }
}

/// Recorded value without a pass/fail requirement.
fn note(text: impl Into<String>) -> Clause {
    clause(true, format!("[recorded] {}", text.into()))
}

fn lattice(n: usize) -> LatticeSpec {
    LatticeSpec::chain(n, 10.0, 2.0, 1.0)
}

fn spec(n: usize, omega: f64, eta: f64, chi: f64) -> HamiltonianSpec {
    HamiltonianSpec::new(lattice(n), omega, eta, chi)
}

fn c1_sga() -> Check {
    let mut out = Vec::new();
    for n in [4, 6, 8] {
        let tower = ScarTower::build(n)?;
        let dmi = sga_residual(&build_total(&spec(n, 2.0, PI / 2.0, 0.0))?, 2.0, &tower)?;
        let xy = sga_residual(&build_total(&spec(n, 2.0, 0.0, 0.0))?, 2.0, &tower)?;
        out.push(clause(dmi < 1e-11, format!("N={n} residual(pi/2)={dmi:.2e} < 1e-11")));
        out.push(clause(xy > 1e-3, format!("N={n} residual(0)={xy:.3e} > 1e-3")));
    }
    Ok(out)
}

fn c2_scar_tower() -> Check {
    let n = 8;
    let rec = eigenstate_qfi_scan(&spec(n, 2.0, PI / 2.0, 0.0).with_perturbation(1e-5))?;
    let rows = rec.scar_rows();
    let mut out = vec![clause(rows.len() == n + 1, format!("{} scars (want {})", rows.len(), n + 1))];
    let mut dev: f64 = 0.0;
    let mut peak: f64 = 0.0;
    for &k in &rows {
        let j = rec.dicke_index[k].expect("scar rows carry a Dicke index");
        dev = dev.max((rec.qfi_densities[k] - dicke_qfi_density(n, j)).abs());
        peak = peak.max(rec.qfi_densities[k]);
    }
    out.push(clause(dev < 1e-4, format!("max |f - f_j| = {dev:.2e} < 1e-4")));
    out.push(clause((peak - 5.0).abs() < 1e-4, format!("peak scar f = {peak:.6} (want 5)")));
    let thermal = rec.max_thermal_f();
    out.push(note(format!(
        "max thermal f = {thermal:.4}, ratio {:.2} (target >= 4)",
        peak / thermal
    )));
    Ok(out)
}

fn c3_anharmonic() -> Check {
    let n = 8;
    let s = spec(n, 2.0, PI / 2.0, 2.0).with_perturbation(1e-5);
    let rec = eigenstate_qfi_scan(&s)?;
    let want = expected_energies(&s);
    let mut energies = vec![f64::NAN; n + 1];
    for k in rec.scar_rows() {
        if let Some(j) = rec.dicke_index[k] {
            energies[j] = rec.energies[k];
        }
    }
    let dev = energies
        .iter()
        .zip(&want)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let gaps: Vec<f64> = energies.windows(2).map(|w| w[1] - w[0]).collect();
    let spread = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - gaps.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(vec![
        clause(dev < 1e-9, format!("max |E_j - formula| = {dev:.2e} < 1e-9")),
        clause(spread > 0.1 * 2.0 / n as f64, format!("gap spread {spread:.4} > 0.1 chi/N")),
    ])
}

fn c4_revival() -> Check {
    let n = 8;
    let omega = 2.0;
    let s = spec(n, omega, PI / 2.0, 0.0);
    let psi0 = coherent_state(n, PI / 2.0, 0.0)?;
    let times = linspace(0.0, 2.0 * PI / omega, 201);
    let rec = trajectory(&s, &psi0, &times, Backend::Auto, false)?;
    let revival = *rec.fidelity_series.last().unwrap();
    let f_dev = rec.f_series.iter().map(|f| (f - 1.0).abs()).fold(0.0, f64::max);
    Ok(vec![
        clause((revival - 1.0).abs() < 1e-8, format!("|<psi(0)|psi(2pi/omega)>|^2 = {revival:.12}")),
        clause(f_dev < 1e-8, format!("max |f(t) - 1| = {f_dev:.3e} < 1e-8")),
    ])
}

struct OracleRun {
    min_fidelity: f64,
    f_dev: f64,
    i_dev: f64,
}

fn oracle_run(n: usize) -> Result<OracleRun> {
    let s = spec(n, 0.0, PI / 2.0, 2.0);
    let times = linspace(0.0, 2.0 * twisting_time(n, 2.0), 400);
    let model = CollectiveModel::from_spec(&s)?;
    let oracle = collective_evolve(&model, &oracle::coherent_dicke(n, PI / 2.0, 0.0), &times)?;
    let qy_c = model.ladder(Ladder::Y);
    let h = build_total(&s)?;
    let qy = SpinBasis::new(n)?.collective_operator(CollectiveKind::Y);
    let eval = LocalizationEvaluator::new(n, SphereQuadrature::minimal(n))?;
    let psi0 = coherent_state(n, PI / 2.0, 0.0)?;
    let mut run = OracleRun {
        min_fidelity: 1.0,
        f_dev: 0.0,
        i_dev: 0.0,
    };
    evolve_with(&h, &psi0, &times, Backend::Krylov, |k, _, psi| {
        let target = embed(n, &oracle[k])?;
        run.min_fidelity = run.min_fidelity.min(target.fidelity(psi));
        let f_full = 4.0 * psi.variance(&qy) / n as f64;
        let f_oracle = 4.0 * oracle::moments(&qy_c, &oracle[k]).1 / n as f64;
        run.f_dev = run.f_dev.max((f_full - f_oracle).abs());
        run.i_dev = run.i_dev.max((eval.integral(psi)? - 1.0).abs());
        Ok(())
    })?;
    Ok(run)
}

fn c5_oracle() -> Check {
    let r = oracle_run(8)?;
    Ok(vec![
        clause(r.min_fidelity >= 1.0 - 1e-8, format!("min fidelity = 1 - {:.2e}", 1.0 - r.min_fidelity)),
        clause(r.f_dev < 1e-6, format!("max |f_full - f_oracle| = {:.2e} < 1e-6", r.f_dev)),
    ])
}

fn c6_plateau() -> Check {
    let n = 12;
    let t_star = twisting_time(n, 2.0);
    let times = linspace(0.0, 1.2 * t_star, 2401);
    let rec = collective_trajectory(&spec(n, 0.0, PI / 2.0, 2.0), PI / 2.0, 0.0, &times)?;
    let plateau = rec.mean_f(0.25 * t_star, 0.75 * t_star).unwrap();
    let (max_f, at) = rec.max_f();
    let ghz = oracle::collective_qfi(&CollectiveModel::from_spec(&spec(n, 0.0, PI / 2.0, 2.0))?, PI / 2.0, 0.0, &[t_star])?[0];
    Ok(vec![
        clause(
            (0.4 * n as f64..=0.6 * n as f64).contains(&plateau),
            format!("plateau mean f on [t*/4, 3t*/4] = {plateau:.4} = {:.3} N", plateau / n as f64),
        ),
        clause(ghz >= 0.99 * n as f64, format!("f(t* = 3 pi) = {ghz:.8} >= 0.99 N")),
        note(format!("grid max f = {max_f:.6} at t = {at:.4}")),
    ])
}

fn c7_thermal() -> Check {
    let n = 8;
    let s = spec(n, 0.0, 0.0, 2.0);
    let psi0 = coherent_state(n, PI / 2.0, 0.0)?;
    let times = linspace(0.0, 40.0, 801);
    let rec = trajectory(&s, &psi0, &times, Backend::Krylov, true)?;
    let mean = rec.mean_f(20.0, 40.0).unwrap();
    let min_i = rec.i_series.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(vec![
        clause(mean < 4.0, format!("mean f on [20, 40] = {mean:.4} < 4")),
        clause(min_i < 0.9, format!("min I(t) = {min_i:.4} < 0.9")),
    ])
}

fn c8_scaling() -> Check {
    let sizes = [4usize, 6, 8, 10];
    let mut out = Vec::new();
    for eta in [PI / 2.0, 0.0] {
        let rows = dynamics::max_qfi_scan(&spec(4, 0.0, eta, 2.0), &sizes, 400, Backend::Auto)?;
        let f: Vec<f64> = rows.iter().map(|r| r.max_f).collect();
        if eta != 0.0 {
            let x: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
            let slope = linear_slope(&x, &f);
            out.push(clause(
                (0.8..=1.05).contains(&slope),
                format!("eta=pi/2 max f = {f:.4?}, slope {slope:.4} in [0.8, 1.05]"),
            ));
        } else {
            let ok = f[3] < f[1] || (f[3] - f[1]).abs() <= 0.1 * f[1];
            out.push(clause(ok, format!("eta=0 max f = {f:.4?}, non-growing N=6 -> 10")));
        }
    }
    Ok(out)
}

fn linear_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn c9_husimi() -> Check {
    let n = 6;
    let basis = SpinBasis::new(n)?;
    let tower = ScarTower::build(n)?;
    let eval = LocalizationEvaluator::new(n, SphereQuadrature::minimal(n))?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut dev: f64 = 0.0;
    for _ in 0..50 {
        let amps: Vec<C64> = (0..basis.dim())
            .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
            .collect();
        let psi = StateVector::normalized(Basis::Full { n_sites: n }, amps)?;
        dev = dev.max((eval.integral(&psi)? - tower.weight(psi.amplitudes())).abs());
    }
    let r = oracle_run(8)?;
    Ok(vec![
        clause(dev < 1e-10, format!("max |I - <P_S>| over 50 random states = {dev:.2e}")),
        clause(r.i_dev < 1e-8, format!("max |I(t) - 1| on the scarred trajectory = {:.2e}", r.i_dev)),
    ])
}

fn c10_echo() -> Check {
    let sizes = [4usize, 6, 8, 10];
    let chi = 2.0;
    let minima = |eta: f64| -> Result<Vec<f64>> {
        sizes
            .iter()
            .map(|&n| {
                let echo = EchoSpec::new(lattice(n), eta, chi, 0.0);
                let times = metrology::default_times(n, chi);
                Ok(minimize_error(&echo, &times, Backend::Auto, true)?.min_delta_eps)
            })
            .collect()
    };
    let dmi = minima(PI / 2.0)?;
    let xy = minima(0.0)?;
    let sql = 1.0 / 10f64.sqrt();
    let x: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    let slope = log_log_slope(&x, &dmi);

    let mut fd_dev: f64 = 0.0;
    for eta in [PI / 2.0, 0.0] {
        let echo = EchoSpec::new(lattice(6), eta, chi, 0.0);
        let engine = EchoEngine::new(&echo, Backend::Auto)?;
        for t in linspace(0.0, PI * 6.0 / (4.0 * chi), 21).into_iter().skip(1) {
            let d = engine.error(t)?.derivative;
            let fd = engine.finite_difference(t, echo.fd_step)?;
            fd_dev = fd_dev.max((d - fd).abs() / d.abs().max(1e-300));
        }
    }
    Ok(vec![
        clause(
            dmi[3] <= 0.5 * sql,
            format!("N=10 eta=pi/2 min delta_eps = {:.5} <= 0.5/sqrt(N) = {:.5}", dmi[3], 0.5 * sql),
        ),
        clause(xy[3] > sql, format!("N=10 eta=0 min delta_eps = {:.5} > 1/sqrt(N) = {sql:.5}", xy[3])),
        clause(
            (-1.15..=-0.8).contains(&slope),
            format!("eta=pi/2 minima {dmi:.4?}, log-log slope {slope:.4} in [-1.15, -0.8]"),
        ),
        clause(fd_dev < 1e-5, format!("max relative |d - FD| over 2 x 20 probes at N=6 = {fd_dev:.2e}")),
        note(format!("eta=0 minima {xy:.4?}")),
    ])
}

fn c11_appendix() -> Check {
    let (omega, omega_a) = (1.0, 11.0);
    let base = |n| spec(n, omega, PI / 2.0, 0.0);
    let mut out = Vec::new();

    let j = 0.1;
    let chi = BosonCoupledSpec::new(base(8), omega_a, j).chi_eff()?;
    let magnitude = 8.0 * j * j / (omega_a - omega);
    out.push(clause(
        chi.abs() == magnitude,
        format!("|chi_eff(N=8, J=0.1)| = {:.6} = N J^2/|omega_a - omega|", chi.abs()),
    ));
    out.push(note(format!("chi_eff sign from second-order perturbation: {chi:.6}")));

    let r1 = effective_residual(&BosonCoupledSpec::new(base(4), omega_a, 0.1))?;
    let r2 = effective_residual(&BosonCoupledSpec::new(base(4), omega_a, 0.05))?;
    let ratio = r1 / r2;
    out.push(clause(
        (6.0..=10.0).contains(&ratio),
        format!("residual J=0.1: {r1:.3e}, J=0.05: {r2:.3e}, ratio {ratio:.3} in [6, 10]"),
    ));

    let n = 6;
    let spec = BosonCoupledSpec::new(base(n), omega_a, 0.04 * (omega_a - omega) / n as f64);
    let t_star = twisting_time(n, spec.chi_eff()?.abs());
    let inf = dynamics_comparison(&spec, &linspace(0.0, t_star, 41), Backend::Auto)?;
    let worst = inf.iter().copied().fold(0.0, f64::max);
    out.push(clause(worst < 1e-2, format!("N=6 JN/|omega-omega_a|=0.04: max infidelity to t* = {worst:.3e} < 1e-2")));
    Ok(out)
}

fn c12_verify() -> Check {
    let report = verify(6)?;
    let failed: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    Ok(vec![clause(
        report.all_passed(),
        format!("{} checks at N=6, failed: {failed:?}", report.checks.len()),
    )])
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 12] = [
        ("1", c1_sga),
        ("2", c2_scar_tower),
        ("3", c3_anharmonic),
        ("4", c4_revival),
        ("5", c5_oracle),
        ("6", c6_plateau),
        ("7", c7_thermal),
        ("8", c8_scaling),
        ("9", c9_husimi),
        ("10", c10_echo),
        ("11", c11_appendix),
        ("12", c12_verify),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    for (id, check) in criteria {
        if !only.is_empty() && !only.iter().any(|o| o == id) {
            continue;
        }
        let start = Instant::now();
        let (passed, lines) = match check() {
            Ok(clauses) => (
                clauses.iter().all(|c| c.passed),
                clauses
                    .iter()
                    .map(|c| format!("    {} {}", if c.passed { "ok  " } else { "FAIL" }, c.text))
                    .collect(),
            ),
            Err(e) => (false, vec![format!("    error: {e}")]),
        };
        println!(
            "criterion {id:>2}: {} ({:.1} s)",
            if passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        for l in lines {
            println!("{l}");
        }
        if !passed {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
