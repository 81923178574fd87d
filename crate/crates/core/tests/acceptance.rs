//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semilab::cosmology::{frw_residuals, Minisuperspace, ScaleModel, VilenkinBranch, vilenkin_scale};
use semilab::energy::{balance_audit, BalanceMonitor, Family, Regime};
use semilab::field::{
    build_problem, evolve, gaussian, plane_wave, FieldState, NonlinearPotential, Preset,
    PresetOverrides,
};
use semilab::frame::{kappa_dimension, PhysicalConstants, RotationFrame};
use semilab::geodesic::{
    conservation_audit, integrate, kinetic_hr_sign, proper_time_geodesic, timelike_velocity,
    GeodesicScenario, GeodesicState,
};
use semilab::nr_limit::{limit_study, LimitStudyConfig};
use semilab::spectral::SpectralGrid;
use semilab::tensor::{
    curvature_suite, f_residual, frw_scalar_curvature, verify_isotropic_forms, MetricDescription,
    Profile, Stencil,
};
use semilab::{Complex, C64};

fn c64(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

type Check = fn() -> Result<Outcome, semilab::Error>;

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn conservation_strict() -> Result<Outcome, semilab::Error> {
    let start = Instant::now();
    let o = PresetOverrides {
        potential: Some(NonlinearPotential::power(-1.0, 3.0)?),
        ..Default::default()
    };
    let p = build_problem(Preset::KleinGordon, &o)?;
    let grid = SpectralGrid::uniform(1, 256, 20.0)?;
    let phi = gaussian(&grid, 1.0, &[0.0], c64(1.0, 0.0));
    let pi = gaussian(&grid, 1.2, &[0.5], c64(0.0, 0.3));
    let mut mon = BalanceMonitor::for_problem(&p, 1.0);
    evolve(&p, FieldState::second_order(grid, phi, pi)?, 1e-3, 1.0, &mut [&mut mon])?;
    let r = balance_audit(&mon.rows, 1e-6);
    let elapsed = start.elapsed();
    Ok(Outcome::new(
        r.passed && r.relative_drift < 1e-6 && mon.regime == Regime::Conservative && within(elapsed, 10.0),
        format!(
            "balance residual {:.2e}, energy drift {:.2e}, {:.2}s",
            r.relative_residual,
            r.relative_drift,
            elapsed.as_secs_f64()
        ),
    ))
}

fn dissipation_sign() -> Result<Outcome, semilab::Error> {
    let mut ok = true;
    let mut parts = Vec::new();
    for hubble in [0.5, -0.5] {
        let start = Instant::now();
        let o = PresetOverrides {
            hubble: Some(hubble),
            ..Default::default()
        };
        let p = build_problem(Preset::DeSitterKg, &o)?;
        let grid = SpectralGrid::uniform(1, 128, 20.0)?;
        let phi = gaussian(&grid, 1.0, &[0.0], c64(1.0, 0.0));
        let pi = gaussian(&grid, 1.0, &[0.0], c64(0.0, -1.0));
        let mut mon = BalanceMonitor::for_problem(&p, 1.0);
        evolve(&p, FieldState::second_order(grid, phi, pi)?, 1e-3, 1.0, &mut [&mut mon])?;
        let r = balance_audit(&mon.rows, 1e-6);
        let elapsed = start.elapsed();
        let this = if hubble > 0.0 {
            r.min_flux_density >= -1e-12 && r.nonincreasing
        } else {
            r.nondecreasing
        };
        ok &= this && within(elapsed, 10.0);
        parts.push(format!(
            "H={hubble:+}: min e^(n+1) {:.2e}, {} ({}), {:.2}s",
            r.min_flux_density,
            if hubble > 0.0 { "nonincreasing" } else { "nondecreasing" },
            this,
            elapsed.as_secs_f64()
        ));
    }
    Ok(Outcome::new(ok, parts.join("; ")))
}

fn charge() -> Result<Outcome, semilab::Error> {
    let grid = SpectralGrid::uniform(1, 128, 20.0)?;
    let u0 = gaussian(&grid, 1.5, &[0.0], c64(1.0, 0.0));
    let mut worst: f64 = 0.0;
    for lambda0 in [1.0, -1.0] {
        let o = PresetOverrides {
            potential: Some(NonlinearPotential::power(lambda0, 3.0)?),
            ..Default::default()
        };
        let p = build_problem(Preset::Schrodinger, &o)?;
        let mut mon = BalanceMonitor::for_problem(&p, 1.0);
        evolve(&p, FieldState::first_order(grid.clone(), u0.clone())?, 1e-3, 1.0, &mut [&mut mon])?;
        worst = worst.max(balance_audit(&mon.rows, 1e-8).relative_drift);
    }
    let p = build_problem::<f64>(Preset::Heat, &Default::default())?;
    let mut mon = BalanceMonitor::new(Family::Charge, Regime::Dissipative);
    evolve(&p, FieldState::first_order(grid, u0)?, 1e-3, 1.0, &mut [&mut mon])?;
    let heat = balance_audit(&mon.rows, 1e-6);
    Ok(Outcome::new(
        worst < 1e-8 && heat.min_flux_density >= 0.0 && heat.strictly_decreasing,
        format!(
            "schrodinger charge drift {worst:.2e}; heat min e_C^(n+1) {:.2e}, strictly decreasing {}",
            heat.min_flux_density, heat.strictly_decreasing
        ),
    ))
}

fn kg_plane_wave_error(dt: f64) -> Result<f64, semilab::Error> {
    let (c, m, hbar): (f64, f64, f64) = (5.0, 1.0, 1.0);
    let o = PresetOverrides {
        c: Some(c),
        m: Some(m),
        hbar: Some(hbar),
        ..Default::default()
    };
    let p = build_problem(Preset::KleinGordon, &o)?;
    let grid = SpectralGrid::uniform(1, 16, 2.0 * PI)?;
    let phi0 = plane_wave(&grid, &[3], c64(1.0, 0.0));
    let k = 3.0;
    let w0 = (c * c * k * k + m * m * c.powi(4) / (hbar * hbar)).sqrt();
    let pi0: Vec<C64> = phi0.iter().map(|v| v * c64(0.0, -w0)).collect();
    let t = 1.0;
    let out = evolve(&p, FieldState::second_order(grid.clone(), phi0.clone(), pi0)?, dt, t, &mut [])?;
    let diff: Vec<C64> = out
        .phi
        .iter()
        .zip(&phi0)
        .map(|(a, b)| a - b * c64(0.0, -w0 * t).exp())
        .collect();
    Ok(grid.norm_l2(&diff) / grid.norm_l2(&phi0))
}

fn dispersion() -> Result<Outcome, semilab::Error> {
    let (m, hbar, t) = (1.0, 1.0, 1.0);
    let o = PresetOverrides {
        m: Some(m),
        hbar: Some(hbar),
        ..Default::default()
    };
    let p = build_problem(Preset::Heat, &o)?;
    let grid = SpectralGrid::uniform(1, 32, 2.0 * PI)?;
    let u0 = plane_wave(&grid, &[4], c64(1.0, 0.0));
    let out = evolve(&p, FieldState::first_order(grid.clone(), u0.clone())?, 1e-3, t, &mut [])?;
    let ratio = (-hbar * 16.0 * t / (2.0 * m)).exp();
    let heat_err = out
        .phi
        .iter()
        .zip(&u0)
        .map(|(a, b)| (a - b * ratio).norm())
        .fold(0.0, f64::max)
        / ratio;

    let errs = [2e-3, 1e-3, 5e-4]
        .iter()
        .map(|&dt| kg_plane_wave_error(dt))
        .collect::<Result<Vec<_>, _>>()?;
    let slopes: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok(Outcome::new(
        heat_err < 1e-8 && slopes.iter().all(|&s| s > 3.8),
        format!(
            "heat decay rel. error {heat_err:.2e}; kg errors {:.2e} {:.2e} {:.2e}, slopes {:.2} {:.2}",
            errs[0], errs[1], errs[2], slopes[0], slopes[1]
        ),
    ))
}

fn nr_limit() -> Result<Outcome, semilab::Error> {
    let start = Instant::now();
    let report = limit_study(&LimitStudyConfig::<f64>::single_mode(2)?)?;
    let elapsed = start.elapsed();
    let table: Vec<String> = report
        .rows
        .iter()
        .map(|r| match r.observed_order {
            Some(o) => format!("c={} err={:.3e} order={o:.2}", r.c, r.error),
            None => format!("c={} err={:.3e}", r.c, r.error),
        })
        .collect();
    Ok(Outcome::new(
        report.strictly_decreasing() && within(elapsed, 60.0),
        format!("{}; {:.2}s", table.join(", "), elapsed.as_secs_f64()),
    ))
}

fn tensor_forms() -> Result<Outcome, semilab::Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let n = 3;
    let c = 1.0;
    let (q, k) = (c64(1.0, 0.0), c64(1.0, 0.0));
    let frame = RotationFrame::real(n)?;
    let scale = ScaleModel::equation_of_state(0.0, c64(1.0, 0.0), c64(0.8, 0.0), n)?;
    let metric = MetricDescription::frw(frame, c, scale.clone(), q, k);
    let mut einstein: f64 = 0.0;
    let mut scalar: f64 = 0.0;
    let mut fres: f64 = 0.0;
    for _ in 0..20 {
        let mut x = vec![rng.random_range(0.0..0.5)];
        loop {
            let s: Vec<f64> = (0..n).map(|_| rng.random_range(-0.8..0.8)).collect();
            if s.iter().map(|v| v * v).sum::<f64>().sqrt() > 0.2 {
                x.extend(s);
                break;
            }
        }
        let rep = verify_isotropic_forms(
            frame,
            c,
            Profile::log_scale(scale.clone()),
            Profile::radial_solution(q, k),
            &x,
            1e-3,
            Stencil::Fourth,
        )?;
        einstein = einstein.max(rep.max());
        let b = curvature_suite(&metric, &x, 1e-3, Stencil::Fourth)?;
        let closed = frw_scalar_curvature(n, c, Profile::log_scale(scale.clone()).eval(c64(x[0], 0.0)), q, k);
        scalar = scalar.max((b.scalar - closed).norm() / closed.norm());
        let r = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        fres = fres.max(f_residual(q, k, c64(r, 0.0))?.norm());
    }
    Ok(Outcome::new(
        einstein < 1e-6 && scalar < 1e-6 && fres < 1e-12,
        format!("Einstein {einstein:.2e}, scalar {scalar:.2e}, f-residual {fres:.2e} over 20 points"),
    ))
}

fn frw_identities() -> Result<Outcome, semilab::Error> {
    let consts = PhysicalConstants::new(1.0, 1.0, 1.0, 1.0, c64(0.0, 0.0))?;
    let mut worst: f64 = 0.0;
    for sigma in [-2.0, -1.0, 0.0, 1.0 / 3.0] {
        for n in [3, 4] {
            let kappa = kappa_dimension(n, &consts)?;
            let model = ScaleModel::equation_of_state(sigma, c64(1.0, 0.0), c64(0.4, 0.0), n)?;
            for t in [0.0, 0.3, 0.7] {
                let r = frw_residuals(&model, sigma, c64(1.0, 0.0), c64(0.0, 0.0), c64(t, 0.0), kappa, &consts)?;
                worst = worst.max(r.max());
            }
        }
    }
    Ok(Outcome::new(worst < 1e-10, format!("max residual {worst:.2e}")))
}

fn vilenkin() -> Result<Outcome, semilab::Error> {
    let n = 3;
    // ℓ² = n(n−1)/(2Λ) = 4
    let consts = PhysicalConstants::new(1.0, 1.0, 1.0, 1.0, c64(0.75, 0.0))?;
    let kappa = 1.0;
    let closed = Minisuperspace::new(n, c64(1.0, 0.0), c64(1.0, 0.0), kappa, &consts)?;
    let flat = Minisuperspace::new(n, c64(0.0, 0.0), c64(1.0, 0.0), kappa, &consts)?;
    let ell = closed.ell().re;
    let mut h: f64 = 0.0;
    let branches = [
        (
            closed,
            VilenkinBranch::Cosh {
                sign: 1.0,
                offset: c64(0.0, 0.0),
            },
        ),
        (flat, VilenkinBranch::Exp { a0: c64(0.7, 0.0), sign: 1.0 }),
        (flat, VilenkinBranch::Exp { a0: c64(0.7, 0.0), sign: -1.0 }),
    ];
    for (ms, branch) in branches {
        let model = vilenkin_scale(&ms, branch)?;
        for i in 0..=20 {
            let s = model.eval(c64(0.1 * i as f64, 0.0))?;
            h = h.max(ms.hamiltonian_from_velocity(s.a, s.da)?.norm());
            h = h.max(ms.hamiltonian(s.a, ms.momentum(s.a, s.da))?.norm());
        }
    }
    let positive = (1..100).all(|i| closed.potential(c64(ell * i as f64 / 100.0, 0.0)).re > 0.0);
    let at_ell = closed.potential(c64(ell, 0.0)).norm();
    Ok(Outcome::new(
        h < 1e-10 && positive && at_ell < 1e-12,
        format!("max |H| {h:.2e}, V > 0 on (0, l): {positive}, |V(l)| {at_ell:.2e}"),
    ))
}

fn geodesics() -> Result<Outcome, semilab::Error> {
    let flat = ScaleModel::constant(c64(1.0, 0.0), 2)?;
    let scn = GeodesicScenario::new(flat, 0.0, 0.0, 1.0, 1.0)?;
    let s0 = GeodesicState::from_velocity(&scn, 0.0, &[0.0, 0.0], &[0.4, -0.3])?;
    let traj = integrate(&scn, s0, 1e-4, 10_000)?;
    let h0 = traj[0].h;
    let free = traj.iter().map(|s| (s.h - h0).norm() / h0.norm()).fold(0.0, f64::max);

    let mut audit: f64 = 0.0;
    let mut table = true;
    for omega1 in [0.0, PI, PI / 2.0, -PI / 2.0] {
        for hubble in [0.5, -0.5] {
            let scn = GeodesicScenario::new(ScaleModel::de_sitter(hubble, 2), 0.0, omega1, 1.0, 2.0)?;
            let s0 = GeodesicState::from_velocity(&scn, 0.0, &[0.0, 0.0], &[0.5, 0.2])?;
            let traj = integrate(&scn, s0, 1e-4, 10_000)?;
            audit = audit.max(conservation_audit(&traj));
            let expected = kinetic_hr_sign(omega1, hubble);
            table &= traj.iter().all(|s| {
                let got = if s.hr.re > 1e-12 {
                    1
                } else if s.hr.re < -1e-12 {
                    -1
                } else {
                    0
                };
                got == expected && s.hr.im.abs() < 1e-10 && s.h.im.abs() < 1e-10
            });
        }
    }

    let frame = RotationFrame::real(2)?;
    let c = 1.0;
    let metric = MetricDescription::frw(frame, c, ScaleModel::de_sitter(0.5, 2), c64(1.0, 0.0), c64(0.0, 0.0));
    let x0 = [0.0, 0.0, 0.0];
    let v0 = timelike_velocity(&metric, &x0, &[c64(0.4, 0.0), c64(0.1, 0.0)], c)?;
    let pt = proper_time_geodesic(&metric, &x0, &v0, c, 1.0, 1e-2)?;

    Ok(Outcome::new(
        free < 1e-9 && audit < 1e-7 && table && pt.normalization_drift < 1e-8,
        format!(
            "free H drift {free:.2e}, de Sitter audit {audit:.2e}, sign table {table}, normalization drift {:.2e}",
            pt.normalization_drift
        ),
    ))
}

fn kappa() -> Result<Outcome, semilab::Error> {
    let consts = PhysicalConstants::new(2.5, 1.0, 1.0, 0.7, c64(0.0, 0.0))?;
    let k = kappa_dimension(3, &consts)?;
    let expect = 8.0 * PI * 0.7 / 2.5f64.powi(4);
    let rel = (k - expect).abs() / expect;
    Ok(Outcome::new(rel < 1e-12, format!("relative deviation {rel:.2e}")))
}

fn main() -> ExitCode {
    let checks: [(&str, Check); 10] = [
        ("conservation (strict energy balance)", conservation_strict),
        ("dissipation sign (de Sitter)", dissipation_sign),
        ("charge conservation and heat dissipation", charge),
        ("dispersion oracles", dispersion),
        ("nonrelativistic limit", nr_limit),
        ("tensor closed forms", tensor_forms),
        ("FRW identities", frw_identities),
        ("zero-energy scale solutions", vilenkin),
        ("geodesics", geodesics),
        ("gravitational coupling", kappa),
    ];
    let mut failures = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let (passed, detail) = match check() {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failures += 1;
        }
        println!(
            "{} [{}] {name}: {detail}",
            if passed { "PASS" } else { "FAIL" },
            i + 1
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
