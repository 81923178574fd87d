use std::fs;
use std::path::Path;
use std::process::Command;

use semilab::field::Preset;
use semilab_cli::config::{Experiment, ProfileSpec};
use semilab_cli::{parse_config, run_experiment};

fn with_output(text: &str, dir: &Path) -> String {
    format!("output = {:?}\n{text}", dir.display().to_string())
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn minimal_config_gets_documented_defaults() {
    let cfg = parse_config("experiment = \"evolve\"\npreset = \"kg\"\n").unwrap();
    assert_eq!(cfg.experiment, Experiment::Evolve);
    assert_eq!(cfg.preset, Preset::KleinGordon);
    assert_eq!(cfg.dt, 1e-3);
    assert_eq!(cfg.stride, 10);
    assert_eq!(cfg.seed, 0);
    assert_eq!(cfg.grid.n_dim, 1);
    assert!(matches!(cfg.initial.phi, ProfileSpec::Gaussian { .. }));
    assert_eq!(cfg.initial.pi, ProfileSpec::Zero);
}

#[test]
fn elliptic_evolve_is_rejected() {
    let err = parse_config("experiment = \"evolve\"\npreset = \"elliptic\"\n").unwrap_err();
    assert!(err.mentions("preset"), "{err}");
}

#[test]
fn negative_dt_names_the_key() {
    let err = parse_config("experiment = \"evolve\"\ndt = -0.1\n").unwrap_err();
    assert!(err.mentions("dt"), "{err}");
    assert_eq!(err.violations.len(), 1);
}

#[test]
fn every_violation_is_reported_with_its_path() {
    let text = r#"
experiment = "evolve"
dt = 0
colour = "blue"

[grid]
n_dim = 2
points = [64, 48]
extent = -1.0

[physics]
c = "fast"
sign = 2

[initial]
profile = "gaussian"
center = [0.0]

[[potential]]
lambda0 = 1.0
p = 0.5
"#;
    let err = parse_config(text).unwrap_err();
    for key in [
        "dt",
        "colour",
        "grid.points[1]",
        "grid.extent",
        "physics.c",
        "physics.sign",
        "initial.center",
        "potential[0].p",
    ] {
        assert!(err.mentions(key), "missing {key} in\n{err}");
    }
}

#[test]
fn missing_or_unknown_experiment() {
    assert!(parse_config("preset = \"kg\"\n").unwrap_err().mentions("experiment"));
    assert!(parse_config("experiment = \"plot\"\n").unwrap_err().mentions("experiment"));
    assert!(parse_config("experiment = [1").unwrap_err().mentions("<document>"));
}

#[test]
fn limit_study_requires_resolved_carrier() {
    let err = parse_config("experiment = \"limit_study\"\n").unwrap_err();
    assert!(err.mentions("dt"), "{err}");
}

#[test]
fn balance_kg_writes_ledger_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(&with_output(
        "experiment = \"balance\"\npreset = \"kg\"\nt_final = 0.1\n[grid]\npoints = 64\nextent = 20.0\n",
        dir.path(),
    ))
    .unwrap();
    let summary = run_experiment(&cfg).unwrap();
    assert!(summary.passed());
    assert_eq!(
        header(&dir.path().join("ledger.csv")),
        "t,e0_integral,flux_accum,balance_residual,regime"
    );
    let rows = fs::read_to_string(dir.path().join("ledger.csv")).unwrap();
    // 100 steps at stride 10, plus the initial row
    assert_eq!(rows.lines().count(), 1 + 11);
    assert!(rows.lines().nth(1).unwrap().ends_with(",conservative"));
    let text = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(text.contains("status = pass"));
    assert!(text.contains("audit balance_residual"));
}

#[test]
fn limit_study_table() {
    let dir = tempfile::tempdir().unwrap();
    let text = "experiment = \"limit_study\"\ndt = 1e-5\nt_final = 0.05\n\
                [grid]\npoints = 16\n[initial]\nprofile = \"plane_wave\"\nmode = [1]\n\
                [limit]\nc_values = [5, 10, 20]\n";
    let cfg = parse_config(&with_output(text, dir.path())).unwrap();
    let summary = run_experiment(&cfg).unwrap();
    assert!(summary.passed(), "{}", summary.render());
    let csv = fs::read_to_string(dir.path().join("limit.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "c,error,observed_order");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("5,") && lines[1].ends_with(','));
    let order: f64 = lines[3].rsplit(',').next().unwrap().parse().unwrap();
    assert!(order > 1.5, "{order}");
}

#[test]
fn geodesic_trajectory_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let text = "experiment = \"geodesic\"\ndt = 1e-3\nt_final = 0.5\nstride = 50\n\
                [geodesic]\nhubble = -0.5\nomega1 = 3.141592653589793\nx0 = [0.0]\nv0 = [0.3]\n";
    let cfg = parse_config(&with_output(text, dir.path())).unwrap();
    let summary = run_experiment(&cfg).unwrap();
    assert!(summary.passed(), "{}", summary.render());
    assert_eq!(
        header(&dir.path().join("trajectory.csv")),
        "t,x1,p1_re,p1_im,H_re,H_im,H_R_re,H_R_im,H_R_accum_re,H_R_accum_im,residual"
    );
    let text = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(text.contains("audit conservation_residual"));
}

#[test]
fn check_experiments_pass() {
    for text in [
        "experiment = \"frw_check\"\n",
        "experiment = \"tensor_check\"\nseed = 3\n[tensor]\nsamples = 5\n",
        "experiment = \"vilenkin\"\n[vilenkin]\nkappa = 1.0\nbranch = \"cosh\"\n",
        "experiment = \"vilenkin\"\n[vilenkin]\nkappa = 1.0\nbranch = \"cos\"\n",
        "experiment = \"vilenkin\"\n[vilenkin]\nkappa = 1.0\nk = 0.0\nbranch = \"exp\"\n",
    ] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config(&with_output(text, dir.path())).unwrap();
        let summary = run_experiment(&cfg).unwrap();
        assert!(summary.passed(), "{text}\n{}", summary.render());
    }
}

#[test]
fn reruns_are_byte_identical() {
    let text = "experiment = \"evolve\"\npreset = \"schrodinger\"\nt_final = 0.05\nseed = 11\n\
                [grid]\npoints = 32\nextent = 10.0\n[initial]\nrandom_phase = true\n";
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&parse_config(&with_output(text, a.path())).unwrap()).unwrap();
    run_experiment(&parse_config(&with_output(text, b.path())).unwrap()).unwrap();
    for f in ["series.csv", "field.csv"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap()
        );
    }
    let c = tempfile::tempdir().unwrap();
    let other = text.replace("seed = 11", "seed = 12");
    run_experiment(&parse_config(&with_output(&other, c.path())).unwrap()).unwrap();
    assert_ne!(
        fs::read(a.path().join("field.csv")).unwrap(),
        fs::read(c.path().join("field.csv")).unwrap()
    );
}

fn semilab(config: &Path, out: &Path, extra: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_semilab"))
        .arg(config)
        .arg("--output")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

#[test]
fn exit_status_reflects_audits() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.toml");
    fs::write(&good, "experiment = \"frw_check\"\n").unwrap();
    let out = semilab(&good, &dir.path().join("good"), &[]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("status = pass"));

    let bad = dir.path().join("bad.toml");
    fs::write(
        &bad,
        "experiment = \"geodesic\"\ntolerance = 1e-300\ndt = 1e-2\n[geodesic]\nhubble = 0.5\n",
    )
    .unwrap();
    let out = semilab(&bad, &dir.path().join("bad"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(dir.path().join("bad/summary.txt").exists());

    let invalid = dir.path().join("invalid.toml");
    fs::write(&invalid, "experiment = \"evolve\"\ndt = -1\n").unwrap();
    let out = semilab(&invalid, &dir.path().join("invalid"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dt: must be positive"));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("t.toml");
    fs::write(&cfg, "experiment = \"tensor_check\"\nseed = 1\n[tensor]\nsamples = 2\n").unwrap();
    let out = semilab(&cfg, &dir.path().join("o"), &["--seed", "99", "-q"]);
    assert_eq!(out.status.code(), Some(0));
    let summary = fs::read_to_string(dir.path().join("o/summary.txt")).unwrap();
    assert!(summary.contains("seed = 99"));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let text = fs::read_to_string(&path).unwrap();
            if let Err(e) = parse_config(&text) {
                panic!("{}: {e}", path.display());
            }
            seen += 1;
        }
    }
    assert!(seen >= 7);
}
