//! Experiment configuration: TOML text in, fully validated [`ExperimentConfig`] out.
//!
//! Every problem found while reading is collected with its dotted key path, so
//! one parse reports all violations at once.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::LazyLock;

use semilab::cosmology::ScaleModel;
use semilab::field::{build_problem, Integrator, NonlinearPotential, Order, Preset, PresetOverrides};
use semilab::{Complex, C64};
use toml::{Table, Value};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_STRIDE: usize = 10;
pub const DEFAULT_T_FINAL: f64 = 1.0;
pub const DEFAULT_OUTPUT: &str = "output";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Evolve,
    Balance,
    LimitStudy,
    FrwCheck,
    TensorCheck,
    Vilenkin,
    Geodesic,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Evolve,
        Experiment::Balance,
        Experiment::LimitStudy,
        Experiment::FrwCheck,
        Experiment::TensorCheck,
        Experiment::Vilenkin,
        Experiment::Geodesic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Evolve => "evolve",
            Experiment::Balance => "balance",
            Experiment::LimitStudy => "limit_study",
            Experiment::FrwCheck => "frw_check",
            Experiment::TensorCheck => "tensor_check",
            Experiment::Vilenkin => "vilenkin",
            Experiment::Geodesic => "geodesic",
        }
    }

    fn uses_field(self) -> bool {
        matches!(self, Experiment::Evolve | Experiment::Balance | Experiment::LimitStudy)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Self::ALL.into_iter().find(|e| e.name() == s).ok_or(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub n_dim: usize,
    pub points: Vec<usize>,
    pub extent: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileSpec {
    Zero,
    PlaneWave { mode: Vec<i32>, amplitude: C64 },
    Gaussian { width: f64, center: Vec<f64>, amplitude: C64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub phi: ProfileSpec,
    /// Time derivative for second-order problems.
    pub pi: ProfileSpec,
    /// Multiply each profile by a seeded random phase.
    pub random_phase: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyChoice {
    KleinGordon,
    Charge,
    Energy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitSpec {
    pub c_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrwSpec {
    pub sigma: Vec<f64>,
    pub n: Vec<usize>,
    pub q: C64,
    pub k: C64,
    pub a0: C64,
    pub da0: C64,
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorSpec {
    pub n: usize,
    pub sigma: f64,
    pub q: C64,
    pub k: C64,
    pub a0: C64,
    pub da0: C64,
    pub samples: usize,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchSpec {
    Cosh { sign: f64, offset: C64 },
    Exp { a0: C64, sign: f64 },
    Cos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VilenkinSpec {
    pub n: usize,
    pub k: C64,
    pub q: C64,
    pub lambda: C64,
    pub kappa: Option<f64>,
    pub branch: BranchSpec,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicSpec {
    pub hubble: f64,
    pub omega0: f64,
    pub omega1: f64,
    pub m: f64,
    pub c: f64,
    pub x0: Vec<f64>,
    pub v0: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub preset: Preset,
    pub overrides: PresetOverrides<f64>,
    pub grid: GridSpec,
    pub dt: f64,
    pub t_final: f64,
    pub initial: InitialData,
    pub output: PathBuf,
    pub stride: usize,
    pub seed: u64,
    /// Audit tolerance; each experiment has its own default.
    pub tolerance: Option<f64>,
    pub family: Option<FamilyChoice>,
    pub limit: LimitSpec,
    pub frw: FrwSpec,
    pub tensor: TensorSpec,
    pub vilenkin: VilenkinSpec,
    pub geodesic: GeodesicSpec,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub key: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError {
    pub violations: Vec<Violation>,
}

impl ConfigError {
    pub fn mentions(&self, key: &str) -> bool {
        self.violations.iter().any(|v| v.key == key)
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration ({} problem", self.violations.len())?;
        if self.violations.len() != 1 {
            f.write_str("s")?;
        }
        f.write_str(")")?;
        for v in &self.violations {
            write!(f, "\n  {}: {}", v.key, v.message)?;
        }
        Ok(())
    }
}

#[derive(Default)]
struct Errors(Vec<Violation>);

impl Errors {
    fn push(&mut self, key: impl Into<String>, message: impl Into<String>) {
        self.0.push(Violation {
            key: key.into(),
            message: message.into(),
        });
    }
}

static EMPTY: LazyLock<Table> = LazyLock::new(Table::new);

struct Section<'a> {
    path: String,
    table: &'a Table,
    used: BTreeSet<String>,
}

impl<'a> Section<'a> {
    fn new(path: &str, table: &'a Table) -> Self {
        Self {
            path: path.to_string(),
            table,
            used: BTreeSet::new(),
        }
    }

    fn key(&self, k: &str) -> String {
        if self.path.is_empty() {
            k.to_string()
        } else {
            format!("{}.{k}", self.path)
        }
    }

    fn get(&mut self, k: &str) -> Option<&'a Value> {
        self.used.insert(k.to_string());
        self.table.get(k)
    }

    fn section(&mut self, k: &str, errs: &mut Errors) -> Section<'a> {
        let path = self.key(k);
        match self.get(k) {
            None => Section::new(&path, &EMPTY),
            Some(Value::Table(t)) => Section::new(&path, t),
            Some(_) => {
                errs.push(&path, "expected a table");
                Section::new(&path, &EMPTY)
            }
        }
    }

    fn f64(&mut self, k: &str, errs: &mut Errors) -> Option<f64> {
        let v = self.get(k)?;
        match number(v) {
            Some(x) if x.is_finite() => Some(x),
            Some(_) => {
                errs.push(self.key(k), "must be finite");
                None
            }
            None => {
                errs.push(self.key(k), format!("expected a number, found {}", v.type_str()));
                None
            }
        }
    }

    fn f64_or(&mut self, k: &str, default: f64, errs: &mut Errors) -> f64 {
        self.f64(k, errs).unwrap_or(default)
    }

    fn positive_or(&mut self, k: &str, default: f64, errs: &mut Errors) -> f64 {
        match self.f64(k, errs) {
            Some(x) if x > 0.0 => x,
            Some(_) => {
                errs.push(self.key(k), "must be positive");
                default
            }
            None => default,
        }
    }

    fn sign_or(&mut self, k: &str, default: f64, errs: &mut Errors) -> f64 {
        match self.f64(k, errs) {
            Some(x) if x == 1.0 || x == -1.0 => x,
            Some(_) => {
                errs.push(self.key(k), "must be 1 or -1");
                default
            }
            None => default,
        }
    }

    fn usize_or(&mut self, k: &str, default: usize, errs: &mut Errors) -> usize {
        match self.get(k) {
            None => default,
            Some(Value::Integer(i)) if *i >= 0 => *i as usize,
            Some(Value::Integer(_)) => {
                errs.push(self.key(k), "must be non-negative");
                default
            }
            Some(v) => {
                errs.push(self.key(k), format!("expected an integer, found {}", v.type_str()));
                default
            }
        }
    }

    fn string(&mut self, k: &str, errs: &mut Errors) -> Option<&'a str> {
        match self.get(k)? {
            Value::String(s) => Some(s),
            v => {
                errs.push(self.key(k), format!("expected a string, found {}", v.type_str()));
                None
            }
        }
    }

    fn bool_or(&mut self, k: &str, default: bool, errs: &mut Errors) -> bool {
        match self.get(k) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(v) => {
                errs.push(self.key(k), format!("expected a boolean, found {}", v.type_str()));
                default
            }
        }
    }

    /// A number, or a two-element `[re, im]` array.
    fn complex(&mut self, k: &str, errs: &mut Errors) -> Option<C64> {
        let v = self.get(k)?;
        let z = match v {
            Value::Array(a) if a.len() == 2 => match (number(&a[0]), number(&a[1])) {
                (Some(re), Some(im)) => Some(Complex::new(re, im)),
                _ => None,
            },
            v => number(v).map(|re| Complex::new(re, 0.0)),
        };
        match z {
            Some(z) if z.re.is_finite() && z.im.is_finite() => Some(z),
            _ => {
                errs.push(self.key(k), "expected a number or a [re, im] pair");
                None
            }
        }
    }

    fn complex_or(&mut self, k: &str, default: C64, errs: &mut Errors) -> C64 {
        self.complex(k, errs).unwrap_or(default)
    }

    /// A list of numbers; a bare number counts as a one-element list.
    fn f64_list(&mut self, k: &str, errs: &mut Errors) -> Option<Vec<f64>> {
        let v = self.get(k)?;
        let out = match v {
            Value::Array(a) => a.iter().map(number).collect::<Option<Vec<_>>>(),
            v => number(v).map(|x| vec![x]),
        };
        match out {
            Some(xs) if xs.iter().all(|x| x.is_finite()) => Some(xs),
            _ => {
                errs.push(self.key(k), "expected a list of finite numbers");
                None
            }
        }
    }

    fn int_list(&mut self, k: &str, errs: &mut Errors) -> Option<Vec<i64>> {
        let v = self.get(k)?;
        let out = match v {
            Value::Array(a) => a.iter().map(Value::as_integer).collect::<Option<Vec<_>>>(),
            Value::Integer(i) => Some(vec![*i]),
            _ => None,
        };
        if out.is_none() {
            errs.push(self.key(k), "expected a list of integers");
        }
        out
    }

    fn finish(self, errs: &mut Errors) {
        for k in self.table.keys() {
            if !self.used.contains(k) {
                errs.push(self.key(k), "unknown key");
            }
        }
    }
}

fn number(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn real(x: f64) -> C64 {
    Complex::new(x, 0.0)
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| ConfigError {
        violations: vec![Violation {
            key: "<document>".into(),
            message: e.message().to_string(),
        }],
    })?;
    let mut errs = Errors::default();
    let mut top = Section::new("", &root);

    let experiment = match top.string("experiment", &mut errs) {
        Some(s) => s.parse::<Experiment>().map_err(|_| {
            let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
            errs.push("experiment", format!("unknown experiment `{s}`; expected one of {}", names.join(", ")));
        }),
        None => {
            if !root.contains_key("experiment") {
                errs.push("experiment", "missing required key");
            }
            Err(())
        }
    };
    let preset = match top.string("preset", &mut errs) {
        Some(s) => s.parse().unwrap_or_else(|_| {
            errs.push("preset", format!("unknown preset `{s}`"));
            Preset::KleinGordon
        }),
        None => Preset::KleinGordon,
    };
    let dt = top.positive_or("dt", DEFAULT_DT, &mut errs);
    let t_final = top.positive_or("t_final", DEFAULT_T_FINAL, &mut errs);
    let stride = top.usize_or("stride", DEFAULT_STRIDE, &mut errs);
    if stride == 0 {
        errs.push("stride", "must be at least 1");
    }
    let seed = match top.get("seed") {
        None => 0,
        Some(Value::Integer(i)) if *i >= 0 => *i as u64,
        Some(_) => {
            errs.push("seed", "expected a non-negative integer");
            0
        }
    };
    let output = PathBuf::from(top.string("output", &mut errs).unwrap_or(DEFAULT_OUTPUT));
    let tolerance = match top.f64("tolerance", &mut errs) {
        Some(t) if t > 0.0 => Some(t),
        Some(_) => {
            errs.push("tolerance", "must be positive");
            None
        }
        None => None,
    };
    let family = top.string("family", &mut errs).and_then(|s| match s {
        "kg" => Some(FamilyChoice::KleinGordon),
        "charge" => Some(FamilyChoice::Charge),
        "energy" => Some(FamilyChoice::Energy),
        _ => {
            errs.push("family", format!("unknown family `{s}`; expected kg, charge or energy"));
            None
        }
    });

    let mut grid_sec = top.section("grid", &mut errs);
    let grid = read_grid(&mut grid_sec, &mut errs);
    grid_sec.finish(&mut errs);

    let mut phys = top.section("physics", &mut errs);
    let mut overrides = read_physics(&mut phys, &mut errs);
    phys.finish(&mut errs);
    overrides.n_dim = Some(grid.n_dim);

    if let Some(pot) = read_potential(top.get("potential"), &mut errs) {
        overrides.potential = Some(pot);
    }

    let mut scale_sec = top.section("scale", &mut errs);
    if let Some(scale) = read_scale(&mut scale_sec, grid.n_dim, &mut errs) {
        overrides.scale = Some(scale);
    }
    scale_sec.finish(&mut errs);

    let mut init = top.section("initial", &mut errs);
    let initial = read_initial(&mut init, grid.n_dim, &mut errs);
    init.finish(&mut errs);

    let mut lim = top.section("limit", &mut errs);
    let limit = LimitSpec {
        c_values: lim.f64_list("c_values", &mut errs).unwrap_or_else(|| vec![10.0, 20.0, 40.0, 80.0]),
    };
    if limit.c_values.len() < 2
        || limit.c_values[0] <= 0.0
        || limit.c_values.windows(2).any(|w| w[1] <= w[0])
    {
        errs.push("limit.c_values", "need at least two positive, strictly increasing values");
    }
    lim.finish(&mut errs);

    let mut frw_sec = top.section("frw", &mut errs);
    let frw = FrwSpec {
        sigma: frw_sec.f64_list("sigma", &mut errs).unwrap_or_else(|| vec![-2.0, -1.0, 0.0, 1.0 / 3.0]),
        n: frw_sec
            .int_list("n", &mut errs)
            .map(|v| v.into_iter().map(|i| i.max(0) as usize).collect())
            .unwrap_or_else(|| vec![3, 4]),
        q: frw_sec.complex_or("q", real(1.0), &mut errs),
        k: frw_sec.complex_or("k", real(0.0), &mut errs),
        a0: frw_sec.complex_or("a0", real(1.0), &mut errs),
        da0: frw_sec.complex_or("da0", real(0.4), &mut errs),
        times: frw_sec.f64_list("times", &mut errs).unwrap_or_else(|| vec![0.0, 0.25, 0.5, 0.75]),
    };
    if frw.n.iter().any(|&n| n < 2) {
        errs.push("frw.n", "dimensions must be at least 2");
    }
    frw_sec.finish(&mut errs);

    let mut ten = top.section("tensor", &mut errs);
    let tensor = TensorSpec {
        n: ten.usize_or("n", 3, &mut errs),
        sigma: ten.f64_or("sigma", 0.0, &mut errs),
        q: ten.complex_or("q", real(1.0), &mut errs),
        k: ten.complex_or("k", real(1.0), &mut errs),
        a0: ten.complex_or("a0", real(1.0), &mut errs),
        da0: ten.complex_or("da0", real(0.8), &mut errs),
        samples: ten.usize_or("samples", 20, &mut errs),
        step: ten.positive_or("step", 1e-3, &mut errs),
    };
    if !(1..=3).contains(&tensor.n) {
        errs.push("tensor.n", "must be 1, 2 or 3");
    }
    ten.finish(&mut errs);

    let mut vil = top.section("vilenkin", &mut errs);
    let vilenkin = read_vilenkin(&mut vil, &mut errs);
    vil.finish(&mut errs);

    let mut geo = top.section("geodesic", &mut errs);
    let geodesic = GeodesicSpec {
        hubble: geo.f64_or("hubble", 0.0, &mut errs),
        omega0: geo.f64_or("omega0", 0.0, &mut errs),
        omega1: geo.f64_or("omega1", 0.0, &mut errs),
        m: geo.positive_or("m", 1.0, &mut errs),
        c: geo.positive_or("c", 1.0, &mut errs),
        x0: geo.f64_list("x0", &mut errs).unwrap_or_else(|| vec![0.0, 0.0]),
        v0: geo.f64_list("v0", &mut errs).unwrap_or_else(|| vec![0.4, 0.2]),
    };
    if geodesic.x0.len() != geodesic.v0.len() {
        errs.push("geodesic.v0", "must have as many components as geodesic.x0");
    }
    if geodesic.x0.is_empty() {
        errs.push("geodesic.x0", "needs at least one spatial component");
    }
    geo.finish(&mut errs);

    top.finish(&mut errs);

    let Ok(experiment) = experiment else {
        return Err(ConfigError { violations: errs.0 });
    };

    if experiment.uses_field() && errs.0.is_empty() {
        if experiment == Experiment::LimitStudy {
            let c_max = *limit.c_values.last().unwrap();
            let m = overrides.m.unwrap_or(1.0);
            let hbar = overrides.hbar.unwrap_or(1.0);
            let bound = hbar / (m * c_max * c_max) / 20.0;
            if dt > bound {
                errs.push("dt", format!("must resolve the carrier phase: dt ≤ {bound:e} for c = {c_max}"));
            }
        } else {
            overrides.evolve = true;
            if let Err(e) = build_problem(preset, &overrides) {
                errs.push("preset", e.to_string());
            }
        }
    }

    if errs.0.is_empty() {
        Ok(ExperimentConfig {
            experiment,
            preset,
            overrides,
            grid,
            dt,
            t_final,
            initial,
            output,
            stride,
            seed,
            tolerance,
            family,
            limit,
            frw,
            tensor,
            vilenkin,
            geodesic,
        })
    } else {
        Err(ConfigError { violations: errs.0 })
    }
}

fn per_axis<T: Copy>(v: Option<&Value>, n: usize, f: impl Fn(&Value) -> Option<T>) -> Option<Vec<T>> {
    match v? {
        Value::Array(a) if a.len() == n => a.iter().map(f).collect(),
        Value::Array(_) => None,
        other => f(other).map(|x| vec![x; n]),
    }
}

fn read_grid(s: &mut Section<'_>, errs: &mut Errors) -> GridSpec {
    let n_dim = s.usize_or("n_dim", 1, errs);
    let n_ok = (1..=3).contains(&n_dim);
    if !n_ok {
        errs.push(s.key("n_dim"), "must be 1, 2 or 3");
    }
    let n = if n_ok { n_dim } else { 1 };
    let points = match s.get("points") {
        None => vec![64; n],
        v => per_axis(v, n, |x| x.as_integer().filter(|&i| i > 0).map(|i| i as usize)).unwrap_or_else(|| {
            errs.push(s.key("points"), format!("expected a positive integer or {n} of them"));
            vec![64; n]
        }),
    };
    for (a, &p) in points.iter().enumerate() {
        if !p.is_power_of_two() || p < 2 {
            let key = if points.len() > 1 {
                format!("{}[{a}]", s.key("points"))
            } else {
                s.key("points")
            };
            errs.push(key, format!("{p} is not a power of two ≥ 2"));
        }
    }
    let extent = match s.get("extent") {
        None => vec![2.0 * std::f64::consts::PI; n],
        v => per_axis(v, n, number)
            .filter(|e| e.iter().all(|&x| x > 0.0 && x.is_finite()))
            .unwrap_or_else(|| {
                errs.push(s.key("extent"), format!("expected a positive number or {n} of them"));
                vec![1.0; n]
            }),
    };
    GridSpec { n_dim: n, points, extent }
}

fn read_physics(s: &mut Section<'_>, errs: &mut Errors) -> PresetOverrides<f64> {
    let mut o = PresetOverrides::<f64> {
        omega0: s.f64("omega0", errs),
        omega1: s.f64("omega1", errs),
        c: s.f64("c", errs),
        m: s.f64("m", errs),
        hbar: s.f64("hbar", errs),
        sign: s.f64("sign", errs),
        hubble: s.f64("hubble", errs),
        b0: s.complex("b0", errs),
        cgl_lambda1: s.f64("cgl_lambda1", errs),
        cgl_lambda2: s.complex("cgl_lambda2", errs),
        growth_allowance: s.f64("growth_allowance", errs),
        ..Default::default()
    };
    for (k, v) in [("c", o.c), ("hbar", o.hbar), ("growth_allowance", o.growth_allowance)] {
        if v.is_some_and(|x| x <= 0.0) {
            errs.push(s.key(k), "must be positive");
        }
    }
    if o.m.is_some_and(|x| x < 0.0) {
        errs.push(s.key("m"), "must be non-negative");
    }
    if o.sign.is_some_and(|x| x != 1.0 && x != -1.0) {
        errs.push(s.key("sign"), "must be 1 or -1");
    }
    o.order = s.string("order", errs).and_then(|v| match v {
        "first" => Some(Order::First),
        "second" => Some(Order::Second),
        _ => {
            errs.push(s.key("order"), format!("expected `first` or `second`, found `{v}`"));
            None
        }
    });
    o.integrator = s.string("integrator", errs).and_then(|v| match v {
        "rk4" => Some(Integrator::Rk4),
        "integrating_factor" => Some(Integrator::IntegratingFactor),
        _ => {
            errs.push(s.key("integrator"), format!("expected `rk4` or `integrating_factor`, found `{v}`"));
            None
        }
    });
    o
}

/// `[[potential]]` entries with `lambda0` (number or pair) and exponent `p ≥ 1`.
fn read_potential(v: Option<&Value>, errs: &mut Errors) -> Option<NonlinearPotential<f64>> {
    let items = match v? {
        Value::Array(a) => a,
        _ => {
            errs.push("potential", "expected an array of tables ([[potential]])");
            return None;
        }
    };
    let mut terms = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let path = format!("potential[{i}]");
        let Value::Table(t) = item else {
            errs.push(path, "expected a table");
            continue;
        };
        let mut s = Section::new(&path, t);
        let lambda = s.complex("lambda0", errs);
        let p = s.f64("p", errs);
        if lambda.is_none() && !t.contains_key("lambda0") {
            errs.push(s.key("lambda0"), "missing required key");
        }
        if p.is_none() && !t.contains_key("p") {
            errs.push(s.key("p"), "missing required key");
        }
        if let Some(p) = p {
            if p < 1.0 {
                errs.push(s.key("p"), "exponent must be at least 1");
            }
        }
        s.finish(errs);
        if let (Some(l), Some(p)) = (lambda, p) {
            terms.push((l, p));
        }
    }
    let terms = terms
        .into_iter()
        .map(|(lambda, p)| semilab::field::PowerTerm { lambda, p })
        .collect();
    NonlinearPotential::new(terms).ok()
}

fn read_scale(s: &mut Section<'_>, n_dim: usize, errs: &mut Errors) -> Option<ScaleModel<f64>> {
    let kind = s.string("kind", errs)?;
    let model = match kind {
        "constant" => {
            let a0 = s.complex_or("a0", real(1.0), errs);
            ScaleModel::constant(a0, n_dim).map_err(|e| e.to_string())
        }
        "de_sitter" => {
            let h = s.complex_or("hubble", real(0.5), errs);
            Ok(ScaleModel::de_sitter_complex(h, n_dim))
        }
        "equation_of_state" => {
            let sigma = s.f64_or("sigma", 0.0, errs);
            let a0 = s.complex_or("a0", real(1.0), errs);
            let da0 = s.complex_or("da0", real(0.0), errs);
            ScaleModel::equation_of_state(sigma, a0, da0, n_dim).map_err(|e| e.to_string())
        }
        other => Err(format!(
            "unknown kind `{other}`; expected constant, de_sitter or equation_of_state"
        )),
    };
    match model {
        Ok(m) => Some(m),
        Err(msg) => {
            errs.push(s.key("kind"), msg);
            None
        }
    }
}

fn read_profile(s: &mut Section<'_>, n_dim: usize, default: &str, errs: &mut Errors) -> ProfileSpec {
    let name = s.string("profile", errs).unwrap_or(default);
    let amplitude = s.complex_or("amplitude", real(1.0), errs);
    match name {
        "zero" => ProfileSpec::Zero,
        "plane_wave" => {
            let mode = s.int_list("mode", errs).unwrap_or_else(|| vec![1; n_dim]);
            if mode.len() != n_dim {
                errs.push(s.key("mode"), format!("needs {n_dim} components"));
            }
            ProfileSpec::PlaneWave {
                mode: mode.into_iter().map(|m| m as i32).collect(),
                amplitude,
            }
        }
        "gaussian" => {
            let width = s.positive_or("width", 1.0, errs);
            let center = s.f64_list("center", errs).unwrap_or_else(|| vec![0.0; n_dim]);
            if center.len() != n_dim {
                errs.push(s.key("center"), format!("needs {n_dim} components"));
            }
            ProfileSpec::Gaussian {
                width,
                center,
                amplitude,
            }
        }
        other => {
            errs.push(
                s.key("profile"),
                format!("unknown profile `{other}`; expected plane_wave, gaussian or zero"),
            );
            ProfileSpec::Zero
        }
    }
}

fn read_initial(s: &mut Section<'_>, n_dim: usize, errs: &mut Errors) -> InitialData {
    let random_phase = s.bool_or("random_phase", false, errs);
    let phi = read_profile(s, n_dim, "gaussian", errs);
    let mut pi_sec = s.section("pi", errs);
    let pi = read_profile(&mut pi_sec, n_dim, "zero", errs);
    pi_sec.finish(errs);
    InitialData { phi, pi, random_phase }
}

fn read_vilenkin(s: &mut Section<'_>, errs: &mut Errors) -> VilenkinSpec {
    let n = s.usize_or("n", 3, errs);
    if n < 2 {
        errs.push(s.key("n"), "must be at least 2");
    }
    let sign = s.sign_or("sign", 1.0, errs);
    let offset = s.complex_or("offset", real(0.0), errs);
    let a0 = s.complex_or("a0", real(1.0), errs);
    let branch = match s.string("branch", errs).unwrap_or("cosh") {
        "cosh" => BranchSpec::Cosh { sign, offset },
        "exp" => BranchSpec::Exp { a0, sign },
        "cos" => BranchSpec::Cos,
        other => {
            errs.push(s.key("branch"), format!("unknown branch `{other}`; expected cosh, exp or cos"));
            BranchSpec::Cos
        }
    };
    let kappa = match s.f64("kappa", errs) {
        Some(k) if k > 0.0 => Some(k),
        Some(_) => {
            errs.push(s.key("kappa"), "must be positive");
            None
        }
        None => None,
    };
    let k = s.complex_or("k", real(1.0), errs);
    if matches!(branch, BranchSpec::Exp { .. }) && k != real(0.0) {
        errs.push(s.key("k"), "the exp branch is the flat (k = 0) solution");
    }
    if !matches!(branch, BranchSpec::Exp { .. }) && k == real(0.0) {
        errs.push(s.key("k"), "the cosh and cos branches need k ≠ 0");
    }
    VilenkinSpec {
        n,
        k,
        q: s.complex_or("q", real(1.0), errs),
        lambda: s.complex_or("lambda", real(0.75), errs),
        kappa,
        branch,
        samples: s.usize_or("samples", 50, errs).max(1),
    }
}
