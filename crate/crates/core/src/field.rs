//! Pseudospectral evolution of the unified field equations on periodic grids.
//!
//! With `P = e^{2i(θ+ω¹)}/e^{2iω⁰}` and `C₀ = 2me^{iω⁰}/ħ` the second-order
//! equation is
//!
//! ```text
//! −(P/c²)(∂_t² + (n∂_t a/a)∂_t + (mc²e^{iω⁰}/ħ)²)φ + Δφ/|a|² − V₀'(φ) = 0
//! ```
//!
//! and the first-order equation is
//!
//! ```text
//! ±iC₀ ∂_t u + (1/P)(Δu/|a|² − V₀'(uw)/w) = 0.
//! ```

use std::fmt;
use std::str::FromStr;

use crate::cosmology::{ScaleModel, WeightModel};
use crate::frame::{PhysicalConstants, RotationFrame};
use crate::spectral::SpectralGrid;
use crate::{branch, lit, to_f64, Complex, Error, Real, Result};

type Pair<T> = (Vec<Complex<T>>, Vec<Complex<T>>);

/// One term `λ|ψ|^{p−1}ψ` of `V₀'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTerm<T> {
    pub lambda: Complex<T>,
    pub p: T,
}

/// `V₀'(ψ) = Σ λ_j|ψ|^{p_j−1}ψ` and `V₀(ψ) = Σ λ_j|ψ|^{p_j+1}/(p_j+1)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NonlinearPotential<T> {
    terms: Vec<PowerTerm<T>>,
}

impl<T: Real> NonlinearPotential<T> {
    pub fn new(terms: Vec<PowerTerm<T>>) -> Result<Self> {
        for t in &terms {
            if !(t.p >= T::one()) || !t.p.is_finite() {
                return Err(Error::invalid("p", "exponents must satisfy 1 <= p < inf"));
            }
            if !t.lambda.norm().is_finite() {
                return Err(Error::invalid("lambda", "must be finite"));
            }
        }
        Ok(Self { terms })
    }

    pub fn none() -> Self {
        Self { terms: Vec::new() }
    }

    /// Single real term `λ₀|ψ|^{p−1}ψ`.
    pub fn power(lambda0: T, p: T) -> Result<Self> {
        Self::new(vec![PowerTerm {
            lambda: Complex::new(lambda0, T::zero()),
            p,
        }])
    }

    /// From the coupling `λ` of the nonlinearity `λ|φ|^{p−1}φ` as written in the
    /// original equation: `λ₀ = −e^{2i(θ+ω¹)}λ`.
    pub fn from_coupling(lambda: Complex<T>, p: T, theta: T, omega1: T) -> Result<Self> {
        let two: T = lit(2.0);
        Self::new(vec![PowerTerm {
            lambda: -branch::cis(two * (theta + omega1)) * lambda,
            p,
        }])
    }

    pub fn terms(&self) -> &[PowerTerm<T>] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.lambda.norm() == T::zero())
    }

    /// Every coefficient real: the class in which the balance identities hold.
    pub fn is_real_class(&self) -> bool {
        self.terms.iter().all(|t| t.lambda.im == T::zero())
    }

    /// `Some(sign)` when all nonzero coefficients are real with one sign.
    pub fn sign(&self) -> Option<T> {
        if !self.is_real_class() {
            return None;
        }
        let pos = self.terms.iter().any(|t| t.lambda.re > T::zero());
        let neg = self.terms.iter().any(|t| t.lambda.re < T::zero());
        match (pos, neg) {
            (true, true) => None,
            (true, false) => Some(T::one()),
            (false, true) => Some(-T::one()),
            (false, false) => Some(T::zero()),
        }
    }

    /// `V₀'(ψ)`.
    pub fn derivative(&self, psi: Complex<T>) -> Complex<T> {
        let r = psi.norm();
        self.terms
            .iter()
            .fold(Complex::new(T::zero(), T::zero()), |s, t| {
                let f = if t.p == T::one() {
                    T::one()
                } else {
                    r.powf(t.p - T::one())
                };
                s + t.lambda * psi * f
            })
    }

    /// `V₀(ψ)`.
    pub fn value(&self, psi: Complex<T>) -> Complex<T> {
        let r = psi.norm();
        self.terms
            .iter()
            .fold(Complex::new(T::zero(), T::zero()), |s, t| {
                s + t.lambda * (r.powf(t.p + T::one()) / (t.p + T::one()))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Second,
    First,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    /// Classical explicit RK4.
    #[default]
    Rk4,
    /// Exact linear propagator in Fourier space with RK4 on the nonlinearity.
    IntegratingFactor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    KleinGordon,
    Schrodinger,
    Elliptic,
    Heat,
    DeSitterKg,
    Cgl,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::KleinGordon,
        Preset::Schrodinger,
        Preset::Elliptic,
        Preset::Heat,
        Preset::DeSitterKg,
        Preset::Cgl,
        Preset::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::KleinGordon => "kg",
            Preset::Schrodinger => "schrodinger",
            Preset::Elliptic => "elliptic",
            Preset::Heat => "heat",
            Preset::DeSitterKg => "de_sitter_kg",
            Preset::Cgl => "cgl",
            Preset::Custom => "custom",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

/// Optional changes applied on top of a preset.
#[derive(Debug, Clone, Default)]
pub struct PresetOverrides<T> {
    pub n_dim: Option<usize>,
    pub omega0: Option<T>,
    pub omega1: Option<T>,
    pub c: Option<T>,
    pub m: Option<T>,
    pub hbar: Option<T>,
    pub sign: Option<T>,
    pub hubble: Option<T>,
    pub scale: Option<ScaleModel<T>>,
    pub b0: Option<Complex<T>>,
    pub potential: Option<NonlinearPotential<T>>,
    pub order: Option<Order>,
    pub integrator: Option<Integrator>,
    /// Linear gain `λ₁` of the Ginzburg-Landau form.
    pub cgl_lambda1: Option<T>,
    /// Cubic coefficient `λ₂` of the Ginzburg-Landau form.
    pub cgl_lambda2: Option<Complex<T>>,
    /// Extra growth factor tolerated by the stability guard.
    pub growth_allowance: Option<T>,
    /// The caller intends to time-evolve the problem.
    pub evolve: bool,
}

/// Fully specified field equation.
#[derive(Debug, Clone)]
pub struct FieldProblem<T> {
    pub preset: Preset,
    pub order: Order,
    pub frame: RotationFrame<T>,
    pub scale: ScaleModel<T>,
    pub weight: WeightModel<T>,
    pub potential: NonlinearPotential<T>,
    pub consts: PhysicalConstants<T>,
    /// `+1` or `−1`, the `±` of the first-order equation.
    pub sign: T,
    /// `arg a(0)`; must stay constant along the run.
    pub theta: T,
    pub integrator: Integrator,
    pub evolvable: bool,
    pub growth_allowance: T,
}

/// Background quantities at real time `t` on the time ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Background<T> {
    pub t: T,
    pub a: Complex<T>,
    /// `∂_t a_∗ = e^{iω⁰} ∂₀a`.
    pub da: Complex<T>,
    pub w: Complex<T>,
    pub dw: Complex<T>,
    pub abs_a2: T,
}

const THETA_TOL: f64 = 1e-10;
const GROWTH_GUARD: f64 = 1e6;

fn wrap_angle<T: Real>(x: T) -> T {
    let two_pi = T::PI() + T::PI();
    let y = x - (x / two_pi).round() * two_pi;
    y.abs()
}

impl<T: Real> FieldProblem<T> {
    pub fn n_dim(&self) -> usize {
        self.frame.n_dim()
    }

    /// `e^{2i(θ+ω¹)}/e^{2iω⁰}`.
    pub fn phase_ratio(&self) -> Complex<T> {
        let two: T = lit(2.0);
        branch::cis(two * (self.theta + self.frame.omega1() - self.frame.omega0()))
    }

    /// `C₀ = 2me^{iω⁰}/ħ`.
    pub fn c0(&self) -> Complex<T> {
        branch::cis(self.frame.omega0()) * (lit::<T>(2.0) * self.consts.m / self.consts.hbar)
    }

    /// `mc²e^{iω⁰}/ħ`.
    pub fn carrier(&self) -> Complex<T> {
        let c = self.consts.c;
        branch::cis(self.frame.omega0()) * (self.consts.m * c * c / self.consts.hbar)
    }

    fn ray(&self, t: T) -> Complex<T> {
        branch::cis(self.frame.omega0()) * t
    }

    pub fn background(&self, t: T) -> Result<Background<T>> {
        let z0 = self.ray(t);
        let phase = branch::cis(self.frame.omega0());
        let s = self.scale.eval(z0)?;
        let (w, dw) = match self.order {
            Order::First => {
                let wv = self.weight.eval(z0, &self.consts)?;
                (wv.w, wv.dw * phase)
            }
            Order::Second => (Complex::new(T::one(), T::zero()), Complex::new(T::zero(), T::zero())),
        };
        Ok(Background {
            t,
            a: s.a,
            da: s.da * phase,
            w,
            dw,
            abs_a2: s.a.norm_sqr(),
        })
    }

    /// `|arg a_∗(t) − θ|`, wrapped.
    pub fn theta_drift(&self, t: T) -> Result<T> {
        let a = self.scale.eval(self.ray(t))?.a;
        Ok(wrap_angle(branch::arg(a) - self.theta))
    }

    /// Real time at which the power-law scale blows up along the time ray.
    pub fn blow_up_time(&self) -> Option<T> {
        let z = self.scale.blow_up_time()?;
        let t = z * branch::cis(-self.frame.omega0());
        let eps: T = lit(1e-12);
        if t.im.abs() <= eps * t.norm().max(T::one()) {
            Some(t.re)
        } else {
            None
        }
    }
}

fn check_overridable<T: Real>(
    name: &str,
    given: Option<T>,
    fixed: T,
    preset: Preset,
) -> Result<()> {
    match given {
        Some(v) if (v - fixed).abs() > lit(1e-15) => Err(Error::InconsistentOverrides(format!(
            "preset `{preset}` fixes {name} = {fixed}, got {v}"
        ))),
        _ => Ok(()),
    }
}

/// Builds a problem from a named preset.
pub fn build_problem<T: Real>(preset: Preset, ov: &PresetOverrides<T>) -> Result<FieldProblem<T>> {
    let n_dim = ov.n_dim.unwrap_or(1);
    if !(1..=3).contains(&n_dim) {
        return Err(Error::invalid("n_dim", "must be 1, 2 or 3"));
    }
    let unit = PhysicalConstants::<T>::unit();
    let consts = PhysicalConstants::new(
        ov.c.unwrap_or(unit.c),
        ov.m.unwrap_or(unit.m),
        ov.hbar.unwrap_or(unit.hbar),
        unit.g_newton,
        unit.lambda,
    )?;
    let quarter_pi = T::FRAC_PI_4();
    let half_pi = T::FRAC_PI_2();
    let zero = T::zero();
    let one = Complex::new(T::one(), T::zero());

    let (omega0, omega1, order, default_integrator) = match preset {
        Preset::KleinGordon | Preset::DeSitterKg => (zero, zero, Order::Second, Integrator::Rk4),
        Preset::Schrodinger => (zero, zero, Order::First, Integrator::Rk4),
        Preset::Elliptic => (zero, half_pi, Order::Second, Integrator::Rk4),
        Preset::Heat => (zero, quarter_pi, Order::First, Integrator::IntegratingFactor),
        Preset::Cgl => (
            ov.omega0.unwrap_or(zero),
            ov.omega1.unwrap_or(quarter_pi),
            Order::First,
            Integrator::IntegratingFactor,
        ),
        Preset::Custom => (
            ov.omega0.unwrap_or(zero),
            ov.omega1.unwrap_or(zero),
            ov.order.unwrap_or(Order::Second),
            Integrator::Rk4,
        ),
    };
    if !matches!(preset, Preset::Cgl | Preset::Custom) {
        check_overridable("omega0", ov.omega0, omega0, preset)?;
        check_overridable("omega1", ov.omega1, omega1, preset)?;
        if let Some(o) = ov.order {
            if o != order {
                return Err(Error::InconsistentOverrides(format!(
                    "preset `{preset}` fixes the equation order"
                )));
            }
        }
    }
    if preset == Preset::Cgl && ov.order == Some(Order::Second) {
        return Err(Error::InconsistentOverrides(
            "the Ginzburg-Landau preset is first order".into(),
        ));
    }
    if preset == Preset::Elliptic && ov.evolve {
        return Err(Error::InconsistentOverrides(
            "the elliptic preset is verified through residuals only and cannot be evolved".into(),
        ));
    }
    if preset == Preset::Heat {
        check_overridable("sign", ov.sign, T::one(), preset)?;
    }
    let frame = RotationFrame::new(omega0, omega1, n_dim)?;

    let scale = match preset {
        Preset::DeSitterKg => {
            if ov.scale.is_some() {
                return Err(Error::InconsistentOverrides(
                    "de_sitter_kg sets the scale from `hubble`".into(),
                ));
            }
            ScaleModel::de_sitter(ov.hubble.unwrap_or(lit(0.5)), n_dim)
        }
        Preset::Custom => match &ov.scale {
            Some(s) => s.clone().with_n_dim(n_dim),
            None => match ov.hubble {
                Some(h) => ScaleModel::de_sitter(h, n_dim),
                None => ScaleModel::constant(one, n_dim)?,
            },
        },
        _ => {
            if ov.scale.is_some() || ov.hubble.is_some() {
                return Err(Error::InconsistentOverrides(format!(
                    "preset `{preset}` uses a constant scale function"
                )));
            }
            ScaleModel::constant(one, n_dim)?
        }
    };

    let sign = ov.sign.unwrap_or(T::one());
    if sign.abs() != T::one() {
        return Err(Error::invalid("sign", "must be +1 or -1"));
    }
    let theta = branch::arg(scale.a0());

    let potential = if preset == Preset::Cgl {
        if ov.potential.is_some() {
            return Err(Error::InconsistentOverrides(
                "cgl builds its potential from cgl_lambda1 and cgl_lambda2".into(),
            ));
        }
        // γ = ±iħ/(2m e^{2iω¹}); V₀' = −(λ₁/γ)ψ + (λ₂/γ)|ψ|²ψ
        let gamma = cgl_gamma(&consts, omega1, sign)?;
        let l1 = ov.cgl_lambda1.unwrap_or(T::zero());
        let l2 = ov.cgl_lambda2.unwrap_or(Complex::new(T::zero(), T::zero()));
        NonlinearPotential::new(vec![
            PowerTerm {
                lambda: -Complex::new(l1, T::zero()) / gamma,
                p: T::one(),
            },
            PowerTerm {
                lambda: l2 / gamma,
                p: lit(3.0),
            },
        ])?
    } else {
        ov.potential.clone().unwrap_or_else(NonlinearPotential::none)
    };

    let integrator = ov.integrator.unwrap_or(default_integrator);
    if integrator == Integrator::IntegratingFactor {
        if order != Order::First {
            return Err(Error::InconsistentOverrides(
                "the integrating-factor scheme is for first-order problems".into(),
            ));
        }
        if !scale.is_static() {
            return Err(Error::InconsistentOverrides(
                "the integrating-factor scheme needs a constant scale function".into(),
            ));
        }
    }
    if order == Order::First && consts.m == T::zero() {
        return Err(Error::invalid("m", "first-order problems need m > 0"));
    }
    let weight = WeightModel::new(ov.b0.unwrap_or(one), scale.clone(), sign)?;
    let growth_allowance = ov.growth_allowance.unwrap_or(T::one());
    if !(growth_allowance >= T::one()) {
        return Err(Error::invalid("growth_allowance", "must be >= 1"));
    }

    Ok(FieldProblem {
        preset,
        order,
        frame,
        scale,
        weight,
        potential,
        consts,
        sign,
        theta,
        integrator,
        evolvable: preset != Preset::Elliptic,
        growth_allowance,
    })
}

/// `γ = ±iħ/(2me^{2iω¹})`.
pub fn cgl_gamma<T: Real>(consts: &PhysicalConstants<T>, omega1: T, sign: T) -> Result<Complex<T>> {
    if consts.m == T::zero() {
        return Err(Error::invalid("m", "must be positive"));
    }
    let two: T = lit(2.0);
    Ok(Complex::new(T::zero(), sign * consts.hbar / (two * consts.m)) * branch::cis(-two * omega1))
}

/// Grid field at time `t`. For first-order problems `phi` holds `u` and `pi`
/// is `None`.
#[derive(Debug, Clone)]
pub struct FieldState<T: Real> {
    pub t: T,
    pub phi: Vec<Complex<T>>,
    pub pi: Option<Vec<Complex<T>>>,
    pub grid: SpectralGrid<T>,
}

impl<T: Real> FieldState<T> {
    pub fn second_order(grid: SpectralGrid<T>, phi: Vec<Complex<T>>, pi: Vec<Complex<T>>) -> Result<Self> {
        if phi.len() != grid.len() || pi.len() != grid.len() {
            return Err(Error::invalid("state", "grid shape mismatch"));
        }
        Ok(Self {
            t: T::zero(),
            phi,
            pi: Some(pi),
            grid,
        })
    }

    pub fn first_order(grid: SpectralGrid<T>, u: Vec<Complex<T>>) -> Result<Self> {
        if u.len() != grid.len() {
            return Err(Error::invalid("state", "grid shape mismatch"));
        }
        Ok(Self {
            t: T::zero(),
            phi: u,
            pi: None,
            grid,
        })
    }

    pub fn zeros(grid: SpectralGrid<T>, order: Order) -> Self {
        let z = vec![Complex::new(T::zero(), T::zero()); grid.len()];
        Self {
            t: T::zero(),
            pi: (order == Order::Second).then(|| z.clone()),
            phi: z,
            grid,
        }
    }

    pub fn max_abs(&self) -> T {
        self.phi
            .iter()
            .chain(self.pi.iter().flatten())
            .fold(T::zero(), |m, v| m.max(v.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.phi
            .iter()
            .chain(self.pi.iter().flatten())
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }

    fn check_order(&self, order: Order) -> Result<()> {
        match (order, self.pi.is_some()) {
            (Order::Second, true) | (Order::First, false) => Ok(()),
            _ => Err(Error::invalid("state", "state does not match the equation order")),
        }
    }
}

/// Right-hand side `(∂_tφ, ∂_tπ)` of the second-order system.
pub fn rhs_second_order<T: Real>(
    problem: &FieldProblem<T>,
    state: &FieldState<T>,
) -> Result<Pair<T>> {
    state.check_order(Order::Second)?;
    let pi = state.pi.as_ref().expect("checked");
    let acc = second_order_acceleration(problem, state.t, &state.grid, &state.phi, pi)?;
    Ok((pi.clone(), acc))
}

fn second_order_acceleration<T: Real>(
    problem: &FieldProblem<T>,
    t: T,
    grid: &SpectralGrid<T>,
    phi: &[Complex<T>],
    pi: &[Complex<T>],
) -> Result<Vec<Complex<T>>> {
    let bg = problem.background(t)?;
    let n = T::from(problem.n_dim()).unwrap();
    let damping = bg.da / bg.a * n;
    let mass = problem.carrier();
    let mass2 = mass * mass;
    let c2 = problem.consts.c * problem.consts.c;
    let coupling = Complex::new(c2, T::zero()) / problem.phase_ratio();
    let inv_a2 = T::one() / bg.abs_a2;
    let lap = grid.laplacian(phi);
    Ok(phi
        .iter()
        .zip(pi)
        .zip(lap)
        .map(|((&f, &p), l)| {
            -damping * p - mass2 * f + coupling * (l * inv_a2 - problem.potential.derivative(f))
        })
        .collect())
}

/// `s·i/(P·C₀)`, the prefactor of the first-order right-hand side.
fn first_order_prefactor<T: Real>(problem: &FieldProblem<T>) -> Result<Complex<T>> {
    let c0 = problem.c0();
    if c0.norm() == T::zero() {
        return Err(Error::invalid("m", "C0 vanishes for m = 0"));
    }
    Ok(Complex::new(T::zero(), problem.sign) / (problem.phase_ratio() * c0))
}

/// Nonlinear part `−α V₀'(uw)/w` of the first-order right-hand side.
fn first_order_nonlinear<T: Real>(
    problem: &FieldProblem<T>,
    alpha: Complex<T>,
    bg: &Background<T>,
    u: &[Complex<T>],
) -> Vec<Complex<T>> {
    if problem.potential.is_zero() {
        return vec![Complex::new(T::zero(), T::zero()); u.len()];
    }
    u.iter()
        .map(|&v| -alpha * problem.potential.derivative(v * bg.w) / bg.w)
        .collect()
}

fn first_order_field<T: Real>(
    problem: &FieldProblem<T>,
    t: T,
    grid: &SpectralGrid<T>,
    u: &[Complex<T>],
) -> Result<Vec<Complex<T>>> {
    let alpha = first_order_prefactor(problem)?;
    let bg = problem.background(t)?;
    if bg.w.norm() == T::zero() {
        return Err(Error::WeightVanishes);
    }
    let lap = grid.laplacian(u);
    let nl = first_order_nonlinear(problem, alpha, &bg, u);
    let inv_a2 = T::one() / bg.abs_a2;
    Ok(lap
        .into_iter()
        .zip(nl)
        .map(|(l, n)| alpha * l * inv_a2 + n)
        .collect())
}

/// `∂_t u` of the first-order equation.
pub fn rhs_first_order<T: Real>(
    problem: &FieldProblem<T>,
    state: &FieldState<T>,
) -> Result<Vec<Complex<T>>> {
    state.check_order(Order::First)?;
    first_order_field(problem, state.t, &state.grid, &state.phi)
}

/// Receives snapshots during [`evolve`].
pub trait Observer<T: Real> {
    /// Observe every `stride()` steps (and always at the first and last step).
    fn stride(&self) -> usize {
        1
    }

    fn observe(&mut self, problem: &FieldProblem<T>, state: &FieldState<T>) -> Result<()>;
}

/// Records `(t, max|φ|, ‖φ‖₂)`.
#[derive(Debug, Clone, Default)]
pub struct NormRecorder<T> {
    pub stride: usize,
    pub rows: Vec<(T, T, T)>,
}

impl<T: Real> NormRecorder<T> {
    pub fn new(stride: usize) -> Self {
        Self {
            stride: stride.max(1),
            rows: Vec::new(),
        }
    }
}

impl<T: Real> Observer<T> for NormRecorder<T> {
    fn stride(&self) -> usize {
        self.stride
    }

    fn observe(&mut self, _: &FieldProblem<T>, state: &FieldState<T>) -> Result<()> {
        let max = state.phi.iter().fold(T::zero(), |m, v| m.max(v.norm()));
        self.rows.push((state.t, max, state.grid.norm_l2(&state.phi)));
        Ok(())
    }
}

fn axpy<T: Real>(y: &[Complex<T>], a: T, x: &[Complex<T>]) -> Vec<Complex<T>> {
    y.iter().zip(x).map(|(&yi, &xi)| yi + xi * a).collect()
}

fn rk4_second<T: Real>(
    problem: &FieldProblem<T>,
    s: &FieldState<T>,
    dt: T,
) -> Result<Pair<T>> {
    let half = dt / lit(2.0);
    let g = &s.grid;
    let t = s.t;
    let phi = &s.phi;
    let pi = s.pi.as_ref().expect("second-order state");
    let k1p = pi.clone();
    let k1v = second_order_acceleration(problem, t, g, phi, pi)?;
    let (f2, p2) = (axpy(phi, half, &k1p), axpy(pi, half, &k1v));
    let k2v = second_order_acceleration(problem, t + half, g, &f2, &p2)?;
    let k2p = p2;
    let (f3, p3) = (axpy(phi, half, &k2p), axpy(pi, half, &k2v));
    let k3v = second_order_acceleration(problem, t + half, g, &f3, &p3)?;
    let k3p = p3;
    let (f4, p4) = (axpy(phi, dt, &k3p), axpy(pi, dt, &k3v));
    let k4v = second_order_acceleration(problem, t + dt, g, &f4, &p4)?;
    let k4p = p4;
    let six: T = lit(6.0);
    let two: T = lit(2.0);
    let combine = |y: &[Complex<T>], k1: &[Complex<T>], k2: &[Complex<T>], k3: &[Complex<T>], k4: &[Complex<T>]| {
        (0..y.len())
            .map(|i| y[i] + (k1[i] + k2[i] * two + k3[i] * two + k4[i]) * (dt / six))
            .collect::<Vec<_>>()
    };
    Ok((
        combine(phi, &k1p, &k2p, &k3p, &k4p),
        combine(pi, &k1v, &k2v, &k3v, &k4v),
    ))
}

fn rk4_first<T: Real>(problem: &FieldProblem<T>, s: &FieldState<T>, dt: T) -> Result<Vec<Complex<T>>> {
    let half = dt / lit(2.0);
    let g = &s.grid;
    let u = &s.phi;
    let k1 = first_order_field(problem, s.t, g, u)?;
    let k2 = first_order_field(problem, s.t + half, g, &axpy(u, half, &k1))?;
    let k3 = first_order_field(problem, s.t + half, g, &axpy(u, half, &k2))?;
    let k4 = first_order_field(problem, s.t + dt, g, &axpy(u, dt, &k3))?;
    let two: T = lit(2.0);
    let six: T = lit(6.0);
    Ok((0..u.len())
        .map(|i| u[i] + (k1[i] + k2[i] * two + k3[i] * two + k4[i]) * (dt / six))
        .collect())
}

/// Lawson RK4 in Fourier space. Only valid for a constant scale function.
struct IntegratingFactor<T> {
    half: Vec<Complex<T>>,
    full: Vec<Complex<T>>,
    alpha: Complex<T>,
}

impl<T: Real> IntegratingFactor<T> {
    fn new(problem: &FieldProblem<T>, grid: &SpectralGrid<T>, dt: T) -> Result<Self> {
        let alpha = first_order_prefactor(problem)?;
        let bg = problem.background(T::zero())?;
        let lin = alpha / bg.abs_a2;
        let half_dt = dt / lit(2.0);
        let k2 = grid.k_squared();
        Ok(Self {
            half: k2.iter().map(|&k| (-lin * k * half_dt).exp()).collect(),
            full: k2.iter().map(|&k| (-lin * k * dt).exp()).collect(),
            alpha,
        })
    }

    fn nonlinear_hat(
        &self,
        problem: &FieldProblem<T>,
        bg: &Background<T>,
        grid: &SpectralGrid<T>,
        u_hat: &[Complex<T>],
    ) -> Vec<Complex<T>> {
        if problem.potential.is_zero() {
            return vec![Complex::new(T::zero(), T::zero()); u_hat.len()];
        }
        let mut u = u_hat.to_vec();
        grid.inverse(&mut u);
        let mut n = first_order_nonlinear(problem, self.alpha, bg, &u);
        grid.forward(&mut n);
        n
    }

    fn step(&self, problem: &FieldProblem<T>, s: &FieldState<T>, dt: T) -> Result<Vec<Complex<T>>> {
        let g = &s.grid;
        let bg = problem.background(s.t)?;
        let mut v = s.phi.clone();
        g.forward(&mut v);
        let mul = |a: &[Complex<T>], b: &[Complex<T>]| -> Vec<Complex<T>> {
            a.iter().zip(b).map(|(x, y)| x * y).collect()
        };
        let half = dt / lit(2.0);
        let ev = mul(&self.half, &v);
        let k1 = self.nonlinear_hat(problem, &bg, g, &v);
        let k2 = self.nonlinear_hat(problem, &bg, g, &mul(&self.half, &axpy(&v, half, &k1)));
        let k3 = self.nonlinear_hat(problem, &bg, g, &axpy(&ev, half, &k2));
        let k4 = self.nonlinear_hat(
            problem,
            &bg,
            g,
            &axpy(&mul(&self.full, &v), dt, &mul(&self.half, &k3)),
        );
        let two: T = lit(2.0);
        let six: T = lit(6.0);
        let mut out: Vec<Complex<T>> = (0..v.len())
            .map(|i| {
                self.full[i] * (v[i] + k1[i] * (dt / six))
                    + self.half[i] * (k2[i] + k3[i]) * (two * dt / six)
                    + k4[i] * (dt / six)
            })
            .collect();
        g.inverse(&mut out);
        Ok(out)
    }
}

/// Number of steps and the effective step `T/n`.
pub fn step_plan<T: Real>(dt: T, t_final: T) -> Result<(usize, T)> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::invalid("dt", "must be positive and finite"));
    }
    if !(t_final >= T::zero()) || !t_final.is_finite() {
        return Err(Error::invalid("t_final", "must be nonnegative and finite"));
    }
    let n = (t_final / dt).round().to_usize().unwrap_or(0);
    if n == 0 {
        return Ok((0, dt));
    }
    Ok((n, t_final / T::from(n).unwrap()))
}

/// Advances `state0` to `t_final` with steps close to `dt`.
pub fn evolve<T: Real>(
    problem: &FieldProblem<T>,
    state0: FieldState<T>,
    dt: T,
    t_final: T,
    observers: &mut [&mut dyn Observer<T>],
) -> Result<FieldState<T>> {
    if !problem.evolvable {
        return Err(Error::IllPosed(format!(
            "the `{}` initial-value problem is ill-posed; use manufactured residuals",
            problem.preset
        )));
    }
    state0.check_order(problem.order)?;
    if state0.grid.n_dim() != problem.n_dim() {
        return Err(Error::invalid("state", "grid dimension differs from the problem"));
    }
    let (steps, h) = step_plan(dt, t_final - state0.t)?;
    let t_end = state0.t + h * T::from(steps).unwrap();
    if let Some(tb) = problem.blow_up_time() {
        if tb > state0.t && tb <= t_end {
            return Err(Error::BigRip {
                at: Complex::new(to_f64(tb), 0.0),
            });
        }
    }
    if !state0.is_finite() {
        return Err(Error::NonFinite {
            t: to_f64(state0.t),
        });
    }
    let theta_tol: T = lit(THETA_TOL);
    let initial_max = state0.max_abs();
    let guard = lit::<T>(GROWTH_GUARD) * problem.growth_allowance;
    let ifac = match (problem.order, problem.integrator) {
        (Order::First, Integrator::IntegratingFactor) => {
            Some(IntegratingFactor::new(problem, &state0.grid, h)?)
        }
        _ => None,
    };

    let mut state = state0;
    let t0 = state.t;
    for obs in observers.iter_mut() {
        obs.observe(problem, &state)?;
    }
    for step in 1..=steps {
        let next_t = t0 + h * T::from(step).unwrap();
        let dt_step = next_t - state.t;
        for tt in [state.t + dt_step / lit(2.0), next_t] {
            let drift = problem.theta_drift(tt)?;
            if drift > theta_tol {
                return Err(Error::ThetaDrift {
                    t: to_f64(tt),
                    drift: to_f64(drift),
                });
            }
        }
        match problem.order {
            Order::Second => {
                let (phi, pi) = rk4_second(problem, &state, dt_step)?;
                state.phi = phi;
                state.pi = Some(pi);
            }
            Order::First => {
                state.phi = match &ifac {
                    Some(f) => f.step(problem, &state, dt_step)?,
                    None => rk4_first(problem, &state, dt_step)?,
                };
            }
        }
        state.t = next_t;
        if !state.is_finite() {
            return Err(Error::NonFinite { t: to_f64(next_t) });
        }
        if initial_max > T::zero() {
            let growth = state.max_abs() / initial_max;
            if growth > guard {
                return Err(Error::Instability {
                    t: to_f64(next_t),
                    growth: to_f64(growth),
                });
            }
        }
        for obs in observers.iter_mut() {
            if step % obs.stride().max(1) == 0 || step == steps {
                obs.observe(problem, &state)?;
            }
        }
    }
    Ok(state)
}

/// Closed-form field with analytic derivatives, for manufactured-solution
/// checks.
pub trait ManufacturedField<T: Real> {
    fn value(&self, t: T, x: &[T]) -> Complex<T>;
    fn dt(&self, t: T, x: &[T]) -> Complex<T>;
    fn dtt(&self, t: T, x: &[T]) -> Complex<T>;
    fn laplacian(&self, t: T, x: &[T]) -> Complex<T>;
}

/// `A e^{ik·x} e^{st}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneWave<T> {
    pub amplitude: Complex<T>,
    pub k: Vec<T>,
    pub s: Complex<T>,
}

impl<T: Real> PlaneWave<T> {
    fn phase(&self, t: T, x: &[T]) -> Complex<T> {
        let kx = self.k.iter().zip(x).fold(T::zero(), |a, (&k, &xi)| a + k * xi);
        self.amplitude * (Complex::new(T::zero(), kx) + self.s * t).exp()
    }

    fn k2(&self) -> T {
        self.k.iter().fold(T::zero(), |a, &k| a + k * k)
    }
}

impl<T: Real> ManufacturedField<T> for PlaneWave<T> {
    fn value(&self, t: T, x: &[T]) -> Complex<T> {
        self.phase(t, x)
    }

    fn dt(&self, t: T, x: &[T]) -> Complex<T> {
        self.phase(t, x) * self.s
    }

    fn dtt(&self, t: T, x: &[T]) -> Complex<T> {
        self.phase(t, x) * self.s * self.s
    }

    fn laplacian(&self, t: T, x: &[T]) -> Complex<T> {
        self.phase(t, x) * (-self.k2())
    }
}

/// Residual norms of one manufactured-solution check.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedReport<T> {
    pub times: Vec<T>,
    /// `max |E_h[φ]|` with the spectral Laplacian.
    pub discrete: Vec<T>,
    /// `max |E_h[φ] − E[φ]|` against the analytic Laplacian.
    pub deviation: Vec<T>,
}

impl<T: Real> ManufacturedReport<T> {
    pub fn max_discrete(&self) -> T {
        self.discrete.iter().fold(T::zero(), |m, &v| m.max(v))
    }

    pub fn max_deviation(&self) -> T {
        self.deviation.iter().fold(T::zero(), |m, &v| m.max(v))
    }
}

/// Evaluates the field operator on a closed-form field. No time stepping is
/// involved, so this applies to the elliptic preset as well.
pub fn manufactured_residual<T: Real, F: ManufacturedField<T>>(
    problem: &FieldProblem<T>,
    grid: &SpectralGrid<T>,
    field: &F,
    sample_times: &[T],
) -> Result<ManufacturedReport<T>> {
    let mut report = ManufacturedReport {
        times: sample_times.to_vec(),
        discrete: Vec::new(),
        deviation: Vec::new(),
    };
    let positions: Vec<Vec<T>> = (0..grid.len()).map(|i| grid.position(i)).collect();
    let n = T::from(problem.n_dim()).unwrap();
    for &t in sample_times {
        let bg = problem.background(t)?;
        let vals: Vec<Complex<T>> = positions.iter().map(|x| field.value(t, x)).collect();
        let lap_h = grid.laplacian(&vals);
        let mut worst = T::zero();
        let mut dev = T::zero();
        for (i, x) in positions.iter().enumerate() {
            let f = vals[i];
            let lap = field.laplacian(t, x);
            let (op_h, op) = match problem.order {
                Order::Second => {
                    let m2 = problem.carrier() * problem.carrier();
                    let c2 = problem.consts.c * problem.consts.c;
                    let time = (field.dtt(t, x) + bg.da / bg.a * n * field.dt(t, x) + m2 * f)
                        * problem.phase_ratio()
                        / c2;
                    let rest = -problem.potential.derivative(f);
                    (
                        -time + lap_h[i] / bg.abs_a2 + rest,
                        -time + lap / bg.abs_a2 + rest,
                    )
                }
                Order::First => {
                    let lead = Complex::new(T::zero(), problem.sign) * problem.c0() * field.dt(t, x);
                    let inv_p = Complex::new(T::one(), T::zero()) / problem.phase_ratio();
                    let nl = problem.potential.derivative(f * bg.w) / bg.w;
                    (
                        lead + inv_p * (lap_h[i] / bg.abs_a2 - nl),
                        lead + inv_p * (lap / bg.abs_a2 - nl),
                    )
                }
            };
            worst = worst.max(op_h.norm());
            dev = dev.max((op_h - op).norm());
        }
        report.discrete.push(worst);
        report.deviation.push(dev);
    }
    Ok(report)
}

/// `A e^{ik·x}` with `k = 2π m/L` per axis.
pub fn plane_wave<T: Real>(grid: &SpectralGrid<T>, mode: &[i32], amplitude: Complex<T>) -> Vec<Complex<T>> {
    let k: Vec<T> = mode
        .iter()
        .enumerate()
        .map(|(a, &m)| T::from(m).unwrap() * grid.fundamental(a))
        .collect();
    grid.sample(|x| {
        let kx = k.iter().zip(x).fold(T::zero(), |s, (&ki, &xi)| s + ki * xi);
        amplitude * branch::cis(kx)
    })
}

/// Wave vector of an integer mode on the grid.
pub fn mode_wavevector<T: Real>(grid: &SpectralGrid<T>, mode: &[i32]) -> Vec<T> {
    mode.iter()
        .enumerate()
        .map(|(a, &m)| T::from(m).unwrap() * grid.fundamental(a))
        .collect()
}

/// `A exp(−|x − x₀|²/w²)`.
pub fn gaussian<T: Real>(
    grid: &SpectralGrid<T>,
    width: T,
    center: &[T],
    amplitude: Complex<T>,
) -> Vec<Complex<T>> {
    grid.sample(|x| {
        let r2 = x
            .iter()
            .enumerate()
            .fold(T::zero(), |s, (a, &xi)| {
                let d = xi - center.get(a).copied().unwrap_or_else(T::zero);
                s + d * d
            });
        amplitude * (-r2 / (width * width)).exp()
    })
}
