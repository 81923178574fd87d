use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semilab::cosmology::{frw_residuals, vilenkin_scale, Minisuperspace, ScaleModel, VilenkinBranch};
use semilab::energy::{audit_tolerance, balance_audit, regime_classify, BalanceMonitor, Family, Regime};
use semilab::field::{
    build_problem, evolve, gaussian, plane_wave, FieldState, NonlinearPotential, NormRecorder, Order,
};
use semilab::frame::{kappa_dimension, PhysicalConstants, RotationFrame};
use semilab::geodesic::{conservation_audit, integrate, GeodesicScenario, GeodesicState};
use semilab::nr_limit::{limit_study, LimitStudyConfig};
use semilab::spectral::SpectralGrid;
use semilab::tensor::{
    curvature_suite, f_residual, frw_scalar_curvature, verify_isotropic_forms, MetricDescription, Profile,
    Stencil,
};
use semilab::{Complex, C64};

use crate::config::{BranchSpec, Experiment, ExperimentConfig, FamilyChoice, ProfileSpec};
use crate::csv_out::{emit_csv, format_float, CsvError, Series};

#[derive(Debug, Clone, PartialEq)]
pub struct Audit {
    pub name: String,
    pub value: f64,
    /// `None` for boolean checks, where `value` is 1 on success.
    pub tolerance: Option<f64>,
    pub passed: bool,
}

impl Audit {
    fn bound(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance: Some(tolerance),
            passed: value <= tolerance,
        }
    }

    fn check(name: &str, ok: bool) -> Self {
        Self {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            tolerance: None,
            passed: ok,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub experiment: Experiment,
    pub seed: u64,
    pub audits: Vec<Audit>,
    /// Named scalar results that are reported but not judged.
    pub metrics: Vec<(String, f64)>,
    pub files: Vec<PathBuf>,
    pub wall_time_s: f64,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.audits.iter().all(|a| a.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment = {}", self.experiment);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "status = {}", if self.passed() { "pass" } else { "fail" });
        let _ = writeln!(s, "wall_time_s = {:.3}", self.wall_time_s);
        for a in &self.audits {
            let verdict = if a.passed { "PASS" } else { "FAIL" };
            match a.tolerance {
                Some(t) => {
                    let _ = writeln!(
                        s,
                        "audit {} = {} ({verdict}, tolerance {})",
                        a.name,
                        format_float(a.value),
                        format_float(t)
                    );
                }
                None => {
                    let _ = writeln!(s, "audit {} ({verdict})", a.name);
                }
            }
        }
        for (k, v) in &self.metrics {
            let _ = writeln!(s, "{k} = {}", format_float(*v));
        }
        for f in &self.files {
            let _ = writeln!(s, "file = {}", f.display());
        }
        s
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{experiment}: {source}")]
    Core {
        experiment: Experiment,
        #[source]
        source: semilab::Error,
    },
    #[error("writing {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: CsvError,
    },
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Ctx<'_> {
    fn core<T>(&self, r: semilab::Result<T>) -> Result<T, RunError> {
        r.map_err(|source| RunError::Core {
            experiment: self.cfg.experiment,
            source,
        })
    }

    fn write(&mut self, name: &str, series: &Series) -> Result<(), RunError> {
        let path = self.dir.join(name);
        emit_csv(series, &path).map_err(|source| RunError::Output {
            path: path.clone(),
            source,
        })?;
        debug!("wrote {} ({} rows)", path.display(), series.rows());
        self.files.push(path);
        Ok(())
    }
}

struct Outcome {
    audits: Vec<Audit>,
    metrics: Vec<(String, f64)>,
}

/// Runs the configured experiment, writing CSV files and `summary.txt` into
/// `cfg.output`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary, RunError> {
    let start = Instant::now();
    let dir = cfg.output.as_path();
    fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    info!("running {} into {}", cfg.experiment, dir.display());
    let mut ctx = Ctx {
        cfg,
        dir,
        files: Vec::new(),
    };
    let out = match cfg.experiment {
        Experiment::Evolve => run_evolve(&mut ctx)?,
        Experiment::Balance => run_balance(&mut ctx)?,
        Experiment::LimitStudy => run_limit(&mut ctx)?,
        Experiment::FrwCheck => run_frw(&mut ctx)?,
        Experiment::TensorCheck => run_tensor(&mut ctx)?,
        Experiment::Vilenkin => run_vilenkin(&mut ctx)?,
        Experiment::Geodesic => run_geodesic(&mut ctx)?,
    };
    let summary_path = dir.join("summary.txt");
    let mut files = ctx.files;
    files.push(summary_path.clone());
    let summary = RunSummary {
        experiment: cfg.experiment,
        seed: cfg.seed,
        audits: out.audits,
        metrics: out.metrics,
        files,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    fs::write(&summary_path, summary.render()).map_err(|source| RunError::Io {
        path: summary_path,
        source,
    })?;
    Ok(summary)
}

fn build_grid(ctx: &Ctx<'_>) -> Result<SpectralGrid<f64>, RunError> {
    ctx.core(SpectralGrid::new(&ctx.cfg.grid.points, &ctx.cfg.grid.extent))
}

fn sample_profile(grid: &SpectralGrid<f64>, p: &ProfileSpec, phase: C64) -> Vec<C64> {
    match p {
        ProfileSpec::Zero => vec![Complex::new(0.0, 0.0); grid.len()],
        ProfileSpec::PlaneWave { mode, amplitude } => plane_wave(grid, mode, amplitude * phase),
        ProfileSpec::Gaussian {
            width,
            center,
            amplitude,
        } => gaussian(grid, *width, center, amplitude * phase),
    }
}

/// `(φ, π)` profiles; each gets an independent seeded phase when requested.
fn initial_profiles(cfg: &ExperimentConfig, grid: &SpectralGrid<f64>) -> (Vec<C64>, Vec<C64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut phase = || {
        if cfg.initial.random_phase {
            Complex::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
        } else {
            Complex::new(1.0, 0.0)
        }
    };
    let (p0, p1) = (phase(), phase());
    (
        sample_profile(grid, &cfg.initial.phi, p0),
        sample_profile(grid, &cfg.initial.pi, p1),
    )
}

fn initial_state(
    ctx: &Ctx<'_>,
    order: Order,
    grid: SpectralGrid<f64>,
) -> Result<FieldState<f64>, RunError> {
    let (phi, pi) = initial_profiles(ctx.cfg, &grid);
    ctx.core(match order {
        Order::Second => FieldState::second_order(grid, phi, pi),
        Order::First => FieldState::first_order(grid, phi),
    })
}

fn field_problem(ctx: &Ctx<'_>) -> Result<semilab::Problem, RunError> {
    let mut o = ctx.cfg.overrides.clone();
    o.evolve = true;
    ctx.core(build_problem(ctx.cfg.preset, &o))
}

fn run_evolve(ctx: &mut Ctx<'_>) -> Result<Outcome, RunError> {
    let cfg = ctx.cfg;
    let problem = field_problem(ctx)?;
    let grid = build_grid(ctx)?;
    let s0 = initial_state(ctx, problem.order, grid.clone())?;
    let norm0 = grid.norm_l2(&s0.phi);
    let mut rec = NormRecorder::new(cfg.stride);
    let end = ctx.core(evolve(&problem, s0, cfg.dt, cfg.t_final, &mut [&mut rec]))?;

    let series = Series::new()
        .real("t", rec.rows.iter().map(|r| r.0).collect())
        .real("max_abs", rec.rows.iter().map(|r| r.1).collect())
        .real("norm_l2", rec.rows.iter().map(|r| r.2).collect());
    ctx.write("series.csv", &series)?;

    let mut field = Series::new();
    let names = ["x", "y", "z"];
    for (a, name) in names.iter().enumerate().take(grid.n_dim()) {
        field = field.real(name, (0..grid.len()).map(|i| grid.position(i)[a]).collect());
    }
    field = field.complex("phi", end.phi.clone());
    if let Some(pi) = &end.pi {
        field = field.complex("pi", pi.clone());
    }
    ctx.write("field.csv", &field)?;

    Ok(Outcome {
        audits: vec![Audit::check("finite", end.is_finite())],
        metrics: vec![
            ("t_final".into(), end.t),
            ("initial_norm_l2".into(), norm0),
            ("final_norm_l2".into(), grid.norm_l2(&end.phi)),
            ("final_max_abs".into(), end.max_abs()),
        ],
    })
}

fn run_balance(ctx: &mut Ctx<'_>) -> Result<Outcome, RunError> {
    let cfg = ctx.cfg;
    let problem = field_problem(ctx)?;
    let grid = build_grid(ctx)?;
    let s0 = initial_state(ctx, problem.order, grid)?;
    let family = match cfg.family {
        None => Family::default_for(problem.order),
        Some(FamilyChoice::KleinGordon) => Family::KleinGordon,
        Some(FamilyChoice::Charge) => Family::Charge,
        Some(FamilyChoice::Energy) => Family::Energy,
    };
    let regime = regime_classify(&problem, cfg.t_final);
    let mut monitor = BalanceMonitor::new(family, regime);
    ctx.core(evolve(&problem, s0, cfg.dt, cfg.t_final, &mut [&mut monitor]))?;

    let last = monitor.rows.len().saturating_sub(1);
    let rows: Vec<_> = monitor
        .rows
        .iter()
        .enumerate()
        .filter(|(i, _)| i % cfg.stride == 0 || *i == last)
        .map(|(_, r)| r)
        .collect();
    let series = Series::new()
        .real("t", rows.iter().map(|r| r.t).collect())
        .real("e0_integral", rows.iter().map(|r| r.e0_integral).collect())
        .real("flux_accum", rows.iter().map(|r| r.flux_accum).collect())
        .real("balance_residual", rows.iter().map(|r| r.balance_residual).collect())
        .text("regime", vec![regime.name().to_string(); rows.len()]);
    ctx.write("ledger.csv", &series)?;

    let tol = cfg.tolerance.unwrap_or_else(|| audit_tolerance(cfg.dt));
    let report = balance_audit(&monitor.rows, tol);
    let mut audits = vec![Audit::bound("balance_residual", report.relative_residual, tol)];
    match regime {
        Regime::Dissipative => {
            audits.push(Audit::check("energy_nonincreasing", report.nonincreasing));
        }
        Regime::Antidissipative => {
            audits.push(Audit::check("energy_nondecreasing", report.nondecreasing));
        }
        Regime::Conservative => audits.push(Audit::bound("energy_drift", report.relative_drift, tol)),
        Regime::Indefinite => {}
    }
    Ok(Outcome {
        audits,
        metrics: vec![
            ("e0_initial".into(), report.e0_initial),
            ("max_residual".into(), report.max_residual),
            ("relative_drift".into(), report.relative_drift),
            ("min_flux_density".into(), report.min_flux_density),
        ],
    })
}

fn run_limit(ctx: &mut Ctx<'_>) -> Result<Outcome, RunError> {
    let cfg = ctx.cfg;
    let o = &cfg.overrides;
    let grid = build_grid(ctx)?;
    let (u0, _) = initial_profiles(cfg, &grid);
    let scale = match &o.scale {
        Some(s) => s.clone(),
        None => ctx.core(ScaleModel::constant(Complex::new(1.0, 0.0), grid.n_dim()))?,
    };
    let study = LimitStudyConfig {
        c_values: cfg.limit.c_values.clone(),
        m: o.m.unwrap_or(1.0),
        hbar: o.hbar.unwrap_or(1.0),
        sign: o.sign.unwrap_or(1.0),
        potential: o.potential.clone().unwrap_or_else(NonlinearPotential::none),
        scale,
        b0: o.b0.unwrap_or(Complex::new(1.0, 0.0)),
        grid,
        u0,
        t_final: cfg.t_final,
        dt: cfg.dt,
    };
    let report = ctx.core(limit_study(&study))?;
    let series = Series::new()
        .real("c", report.rows.iter().map(|r| r.c).collect())
        .real("error", report.rows.iter().map(|r| r.error).collect())
        .text(
            "observed_order",
            report
                .rows
                .iter()
                .map(|r| r.observed_order.map(format_float).unwrap_or_default())
                .collect(),
        );
    ctx.write("limit.csv", &series)?;
    let mut metrics: Vec<(String, f64)> = Vec::new();
    for r in &report.rows {
        metrics.push((format!("error[c={}]", format_float(r.c)), r.error));
        if let Some(q) = r.observed_order {
            metrics.push((format!("observed_order[c={}]", format_float(r.c)), q));
        }
    }
    Ok(Outcome {
        audits: vec![Audit::check("error_strictly_decreasing", report.strictly_decreasing())],
        metrics,
    })
}

fn unit_constants(ctx: &Ctx<'_>, lambda: C64) -> Result<PhysicalConstants<f64>, RunError> {
    let o = &ctx.cfg.overrides;
    ctx.core(PhysicalConstants::new(
        o.c.unwrap_or(1.0),
        o.m.unwrap_or(1.0),
        o.hbar.unwrap_or(1.0),
        1.0,
        lambda,
    ))
}

fn run_frw(ctx: &mut Ctx<'_>) -> Result<Outcome, RunError> {
    let spec = &ctx.cfg.frw;
    let consts = unit_constants(ctx, Complex::new(0.0, 0.0))?;
    let mut cols: [Vec<f64>; 7] = Default::default();
    let mut worst: f64 = 0.0;
    for &sigma in &spec.sigma {
        for &n in &spec.n {
            let kappa = ctx.core(kappa_dimension(n, &consts))?;
            let model = ctx.core(ScaleModel::equation_of_state(sigma, spec.a0, spec.da0, n))?;
            for &t in &spec.times {
                let r = ctx.core(frw_residuals(
                    &model,
                    sigma,
                    spec.q,
                    spec.k,
                    Complex::new(t, 0.0),
                    kappa,
                    &consts,
                ))?;
                worst = worst.max(r.max());
                for (col, v) in cols.iter_mut().zip([
                    sigma,
                    n as f64,
                    t,
                    r.friedmann,
                    r.pressure,
                    r.raychaudhuri,
                    r.mass,
                ]) {
                    col.push(v);
                }
            }
        }
    }
    let [sigma, n, t, fr, pr, ra, ma] = cols;
    let series = Series::new()
        .real("sigma", sigma)
        .real("n", n)
        .real("t", t)
        .real("friedmann", fr)
        .real("pressure", pr)
        .real("raychaudhuri", ra)
        .real("mass", ma);
    ctx.write("frw.csv", &series)?;
    Ok(Outcome {
        audits: vec![Audit::bound("max_residual", worst, ctx.cfg.tolerance.unwrap_or(1e-10))],
        metrics: vec![],
    })
}

fn run_tensor(ctx: &mut Ctx<'_>) -> Result<Outcome, RunError> {
    let spec = &ctx.cfg.tensor;
    let c = ctx.cfg.overrides.c.unwrap_or(1.0);
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
    let frame = ctx.core(RotationFrame::real(n))?;
    let scale = ctx.core(ScaleModel::equation_of_state(spec.sigma, spec.a0, spec.da0, n))?;
    let metric = MetricDescription::frw(frame, c, scale.clone(), spec.q, spec.k);
    let mut coords: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    let (mut ein, mut sca, mut fre) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..spec.samples {
        // radii are kept away from the origin where the radial form is singular
        let x: Vec<f64> = loop {
            let s: Vec<f64> = (0..n).map(|_| rng.random_range(-0.8..0.8)).collect();
            if s.iter().map(|v| v * v).sum::<f64>().sqrt() > 0.2 {
                let mut x = vec![rng.random_range(0.0..0.5)];
                x.extend(s);
                break x;
            }
        };
        let rep = ctx.core(verify_isotropic_forms(
            frame,
            c,
            Profile::log_scale(scale.clone()),
            Profile::radial_solution(spec.q, spec.k),
            &x,
            spec.step,
            Stencil::Fourth,
        ))?;
        let bundle = ctx.core(curvature_suite(&metric, &x, spec.step, Stencil::Fourth))?;
        let closed = frw_scalar_curvature(
            n,
            c,
            Profile::log_scale(scale.clone()).eval(Complex::new(x[0], 0.0)),
            spec.q,
            spec.k,
        );
        let r = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        ein.push(rep.max());
        sca.push((bundle.scalar - closed).norm() / closed.norm().max(1e-12));
        fre.push(ctx.core(f_residual(spec.q, spec.k, Complex::new(r, 0.0)))?.norm());
        for (col, v) in coords.iter_mut().zip(&x) {
            col.push(*v);
        }
    }
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let tol = ctx.cfg.tolerance.unwrap_or(1e-6);
    let audits = vec![
        Audit::bound("isotropic_forms", max(&ein), tol),
        Audit::bound("scalar_curvature", max(&sca), tol),
        Audit::bound("radial_equation", max(&fre), 1e-12),
    ];
    let mut series = Series::new().real("t", coords[0].clone());
    for (j, col) in coords.iter().enumerate().skip(1) {
        series = series.real(&format!("x{j}"), col.clone());
    }
    let series = series
        .real("isotropic_forms", ein)
        .real("scalar_curvature", sca)
        .real("radial_equation", fre);
    ctx.write("tensor.csv", &series)?;
    Ok(Outcome {
        audits,
        metrics: vec![],
    })
}

fn run_vilenkin(ctx: &mut Ctx<'_>) -> Result<Outcome, RunError> {
    let spec = &ctx.cfg.vilenkin;
    let consts = unit_constants(ctx, spec.lambda)?;
    let kappa = match spec.kappa {
        Some(k) => k,
        None => ctx.core(kappa_dimension(spec.n, &consts))?,
    };
    let ms = ctx.core(Minisuperspace::new(spec.n, spec.k, spec.q, kappa, &consts))?;
    let branch = match spec.branch {
        BranchSpec::Cosh { sign, offset } => VilenkinBranch::Cosh { sign, offset },
        BranchSpec::Exp { a0, sign } => VilenkinBranch::Exp { a0, sign },
        BranchSpec::Cos => VilenkinBranch::Cos,
    };
    let model = ctx.core(vilenkin_scale(&ms, branch))?;
    let (mut t, mut a, mut da, mut h, mut v) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for i in 0..=spec.samples {
        let ti = ctx.cfg.t_final * i as f64 / spec.samples as f64;
        let s = ctx.core(model.eval(Complex::new(ti, 0.0)))?;
        // the cos branch is parametrized by Euclidean time, z⁰ = it
        let dz = match spec.branch {
            BranchSpec::Cos => s.da * Complex::new(0.0, -1.0),
            _ => s.da,
        };
        t.push(ti);
        a.push(s.a);
        da.push(dz);
        h.push(ctx.core(ms.hamiltonian_from_velocity(s.a, dz))?);
        v.push(ms.potential(s.a));
    }
    let worst = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let ell = ms.ell();
    let series = Series::new()
        .real("t", t)
        .complex("a", a)
        .complex("da", da)
        .complex("H", h)
        .complex("V", v);
    ctx.write("vilenkin.csv", &series)?;
    Ok(Outcome {
        audits: vec![Audit::bound("max_abs_hamiltonian", worst, ctx.cfg.tolerance.unwrap_or(1e-10))],
        metrics: vec![("ell_re".into(), ell.re), ("ell_im".into(), ell.im)],
    })
}

fn run_geodesic(ctx: &mut Ctx<'_>) -> Result<Outcome, RunError> {
    let cfg = ctx.cfg;
    let spec = &cfg.geodesic;
    let n = spec.x0.len();
    let scale = if spec.hubble == 0.0 {
        ctx.core(ScaleModel::constant(Complex::new(1.0, 0.0), n))?
    } else {
        ScaleModel::de_sitter(spec.hubble, n)
    };
    let scn = ctx.core(GeodesicScenario::new(scale, spec.omega0, spec.omega1, spec.m, spec.c))?;
    let s0 = ctx.core(GeodesicState::from_velocity(&scn, 0.0, &spec.x0, &spec.v0))?;
    let steps = (cfg.t_final / cfg.dt).round().max(1.0) as usize;
    let traj = ctx.core(integrate(&scn, s0, cfg.dt, steps))?;

    let h0 = traj[0].h;
    let scale = h0.norm().max(f64::MIN_POSITIVE);
    let last = traj.len() - 1;
    let rows: Vec<&GeodesicState<f64>> = traj
        .iter()
        .enumerate()
        .filter(|(i, _)| i % cfg.stride == 0 || *i == last)
        .map(|(_, s)| s)
        .collect();
    let mut series = Series::new().real("t", rows.iter().map(|s| s.t).collect());
    for j in 0..n {
        series = series.real(&format!("x{}", j + 1), rows.iter().map(|s| s.x[j]).collect());
    }
    for j in 0..n {
        series = series.complex(&format!("p{}", j + 1), rows.iter().map(|s| s.p[j]).collect());
    }
    let series = series
        .complex("H", rows.iter().map(|s| s.h).collect())
        .complex("H_R", rows.iter().map(|s| s.hr).collect())
        .complex("H_R_accum", rows.iter().map(|s| s.hr_accum).collect())
        .real(
            "residual",
            rows.iter().map(|s| (s.h + s.hr_accum - h0).norm() / scale).collect(),
        );
    ctx.write("trajectory.csv", &series)?;
    let audit = conservation_audit(&traj);
    Ok(Outcome {
        audits: vec![Audit::bound(
            "conservation_residual",
            audit,
            cfg.tolerance.unwrap_or(1e-7),
        )],
        metrics: vec![
            ("steps".into(), steps as f64),
            ("H0_re".into(), h0.re),
            ("H0_im".into(), h0.im),
        ],
    })
}
