//! Energy and charge densities of the field equations and the discrete audit
//! of their integral balance laws
//!
//! ```text
//! ∫e⁰(t) dx + ∫₀ᵗ∫e^{n+1} dx ds = ∫e⁰(0) dx.
//! ```
//!
//! Every family satisfies the pointwise identity `∂_t e⁰ + Σ∂_j e^j + e^{n+1} = 0`
//! under its hypotheses: real `C₀`, constant `arg a`, real power coefficients,
//! and for the second-order family a real phase ratio.

use std::fmt;

use crate::field::{rhs_first_order, FieldProblem, FieldState, Observer, Order};
use crate::spectral::SpectralGrid;
use crate::{lit, Complex, Error, Result, Real};

const HYPOTHESIS_TOL: f64 = 1e-10;

/// Which balance law is monitored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Energy of the second-order equation.
    KleinGordon,
    /// Charge `∫C₀|u|²` of the first-order equation.
    Charge,
    /// Energy of the first-order equation.
    Energy,
}

impl Family {
    pub fn default_for(order: Order) -> Self {
        match order {
            Order::Second => Family::KleinGordon,
            Order::First => Family::Charge,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Dissipative,
    Antidissipative,
    Conservative,
    Indefinite,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Dissipative => "dissipative",
            Regime::Antidissipative => "antidissipative",
            Regime::Conservative => "conservative",
            Regime::Indefinite => "indefinite",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Pointwise densities `e⁰`, `e¹..eⁿ` and `e^{n+1}` on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Densities<T> {
    pub e0: Vec<T>,
    pub spatial: Vec<Vec<T>>,
    pub source: Vec<T>,
}

impl<T: Real> Densities<T> {
    /// `Σ_j ∂_j e^j`, spectrally.
    pub fn divergence(&self, grid: &SpectralGrid<T>) -> Vec<T> {
        let mut out = vec![T::zero(); grid.len()];
        for (axis, ej) in self.spatial.iter().enumerate() {
            let c: Vec<Complex<T>> = ej.iter().map(|&v| Complex::new(v, T::zero())).collect();
            for (o, d) in out.iter_mut().zip(grid.gradient(&c, axis)) {
                *o = *o + d.re;
            }
        }
        out
    }

    pub fn min_source(&self) -> T {
        self.source.iter().fold(T::infinity(), |m, &v| m.min(v))
    }
}

fn real_or_violation<T: Real>(z: Complex<T>, what: &str) -> Result<T> {
    let tol: T = lit(HYPOTHESIS_TOL);
    if z.im.abs() > tol * z.norm().max(T::one()) {
        return Err(Error::HypothesisViolation(format!(
            "{what} = {} + {}i is not real",
            z.re, z.im
        )));
    }
    Ok(z.re)
}

fn check_common<T: Real>(problem: &FieldProblem<T>, t: T) -> Result<()> {
    if !problem.potential.is_real_class() {
        return Err(Error::HypothesisViolation(
            "power coefficients must be real".into(),
        ));
    }
    let drift = problem.theta_drift(t)?;
    if drift > lit(HYPOTHESIS_TOL) {
        return Err(Error::HypothesisViolation(format!(
            "arg a(t) is not constant (drift {drift})"
        )));
    }
    Ok(())
}

fn abs2_grads<T: Real>(grads: &[Vec<Complex<T>>]) -> Vec<T> {
    let len = grads.first().map_or(0, Vec::len);
    (0..len)
        .map(|i| grads.iter().fold(T::zero(), |s, g| s + g[i].norm_sqr()))
        .collect()
}

/// Densities of the second-order energy identity.
pub fn kg_ledger<T: Real>(problem: &FieldProblem<T>, state: &FieldState<T>) -> Result<Densities<T>> {
    if problem.order != Order::Second {
        return Err(Error::invalid("problem", "the energy identity needs a second-order problem"));
    }
    let pi = state
        .pi
        .as_ref()
        .ok_or_else(|| Error::invalid("state", "second-order state without pi"))?;
    check_common(problem, state.t)?;
    let ratio = real_or_violation(problem.phase_ratio(), "phase ratio")?;
    let c0 = real_or_violation(problem.c0(), "C0")?;
    let bg = problem.background(state.t)?;
    let c = problem.consts.c;
    let c2 = c * c;
    let four: T = lit(4.0);
    let two: T = lit(2.0);
    let mass2 = c0 * c0 * c2 * c2 / four;
    let inv_a2 = T::one() / bg.abs_a2;
    // ∂_t a/a is real when arg a is constant
    let rate = (bg.da / bg.a).re;
    let n = T::from(problem.n_dim()).unwrap();
    let d_inv_a2 = -two * inv_a2 * rate;

    let grads = state.grid.gradients(&state.phi);
    let g2 = abs2_grads(&grads);
    let e0 = (0..state.phi.len())
        .map(|i| {
            let f = state.phi[i];
            ratio / c2 * (pi[i].norm_sqr() + mass2 * f.norm_sqr())
                + g2[i] * inv_a2
                + two * problem.potential.value(f).re
        })
        .collect();
    let source = (0..state.phi.len())
        .map(|i| ratio / c2 * two * n * rate * pi[i].norm_sqr() - d_inv_a2 * g2[i])
        .collect();
    let spatial = grads
        .iter()
        .map(|g| {
            g.iter()
                .zip(pi)
                .map(|(d, p)| -two * (p.conj() * d).re * inv_a2)
                .collect()
        })
        .collect();
    Ok(Densities { e0, spatial, source })
}

fn first_order_setup<T: Real>(problem: &FieldProblem<T>, state: &FieldState<T>) -> Result<T> {
    if problem.order != Order::First {
        return Err(Error::invalid("problem", "the charge and energy identities need a first-order problem"));
    }
    check_common(problem, state.t)?;
    real_or_violation(problem.c0(), "C0")
}

/// Densities of the charge identity. `e⁰ = C₀|u|²`; the flux terms carry the
/// sign of the equation so that the identity holds with this `e⁰` for either
/// sign.
pub fn nr_charge_ledger<T: Real>(
    problem: &FieldProblem<T>,
    state: &FieldState<T>,
) -> Result<Densities<T>> {
    let c0 = first_order_setup(problem, state)?;
    let bg = problem.background(state.t)?;
    let s = problem.sign;
    let two: T = lit(2.0);
    let p = problem.phase_ratio();
    let inv_p = Complex::new(T::one(), T::zero()) / p;
    let inv_a2 = T::one() / bg.abs_a2;
    let inv_w2 = T::one() / bg.w.norm_sqr();
    let u = &state.phi;
    let grads = state.grid.gradients(u);
    let g2 = abs2_grads(&grads);

    let e0 = u.iter().map(|v| c0 * v.norm_sqr()).collect();
    let source = (0..u.len())
        .map(|i| {
            let psi = u[i] * bg.w;
            let pot = (psi.conj() * problem.potential.derivative(psi)).re * inv_w2;
            s * two * p.im * (g2[i] * inv_a2 + pot)
        })
        .collect();
    let spatial = grads
        .iter()
        .map(|g| {
            g.iter()
                .zip(u)
                .map(|(d, v)| s * two * (inv_p * v.conj() * d).im * inv_a2)
                .collect()
        })
        .collect();
    Ok(Densities { e0, spatial, source })
}

/// Densities of the first-order energy identity; `∂_t u` comes from the
/// right-hand side.
pub fn nr_energy_ledger<T: Real>(
    problem: &FieldProblem<T>,
    state: &FieldState<T>,
) -> Result<Densities<T>> {
    let c0 = first_order_setup(problem, state)?;
    let bg = problem.background(state.t)?;
    let s = problem.sign;
    let two: T = lit(2.0);
    let n = T::from(problem.n_dim()).unwrap();
    let p = problem.phase_ratio();
    let inv_w2 = T::one() / bg.w.norm_sqr();
    let d_abs_a2 = two * (bg.a.conj() * bg.da).re;
    let u = &state.phi;
    let ut = rhs_first_order(problem, state)?;
    let grads = state.grid.gradients(u);
    let g2 = abs2_grads(&grads);
    let ratio = two * (n + two) / n;

    let e0 = (0..u.len())
        .map(|i| g2[i] + two * bg.abs_a2 * problem.potential.value(u[i] * bg.w).re * inv_w2)
        .collect();
    let source = (0..u.len())
        .map(|i| {
            let psi = u[i] * bg.w;
            let bracket = (psi.conj() * problem.potential.derivative(psi)).re
                - ratio * problem.potential.value(psi).re;
            s * two * c0 * p.im * bg.abs_a2 * ut[i].norm_sqr()
                + n / two * inv_w2 * d_abs_a2 * bracket
        })
        .collect();
    let spatial = grads
        .iter()
        .map(|g| {
            g.iter()
                .zip(&ut)
                .map(|(d, v)| -two * (v.conj() * d).re)
                .collect()
        })
        .collect();
    Ok(Densities { e0, spatial, source })
}

pub fn ledger<T: Real>(
    family: Family,
    problem: &FieldProblem<T>,
    state: &FieldState<T>,
) -> Result<Densities<T>> {
    match family {
        Family::KleinGordon => kg_ledger(problem, state),
        Family::Charge => nr_charge_ledger(problem, state),
        Family::Energy => nr_energy_ledger(problem, state),
    }
}

/// Sign of a real quantity over samples: `Some(1)`, `Some(-1)`, `Some(0)` when
/// identically zero, `None` when mixed.
fn sign_of<T: Real>(values: impl IntoIterator<Item = T>) -> Option<i8> {
    let (mut pos, mut neg) = (false, false);
    for v in values {
        pos |= v > T::zero();
        neg |= v < T::zero();
    }
    match (pos, neg) {
        (true, true) => None,
        (true, false) => Some(1),
        (false, true) => Some(-1),
        (false, false) => Some(0),
    }
}

fn regime_from(sign: Option<i8>) -> Regime {
    match sign {
        Some(1) => Regime::Dissipative,
        Some(-1) => Regime::Antidissipative,
        Some(_) => Regime::Conservative,
        None => Regime::Indefinite,
    }
}

/// Classifies the flux term of the default family on `[0, horizon]`.
/// Outside the hypotheses of the identity the regime is indefinite.
pub fn regime_classify<T: Real>(problem: &FieldProblem<T>, horizon: T) -> Regime {
    let tol: T = lit(HYPOTHESIS_TOL);
    if !problem.potential.is_real_class() || problem.c0().im.abs() > tol * problem.c0().norm() {
        return Regime::Indefinite;
    }
    let samples = 64;
    let rates: Option<Vec<T>> = if problem.scale.is_static() {
        Some(vec![T::zero()])
    } else {
        (0..=samples)
            .map(|i| {
                let t = horizon * T::from(i).unwrap() / T::from(samples).unwrap();
                problem.background(t).ok().map(|bg| {
                    let r = (bg.da / bg.a).re;
                    if r.abs() <= tol { T::zero() } else { r }
                })
            })
            .collect()
    };
    let Some(rates) = rates else {
        return Regime::Indefinite;
    };
    let p = problem.phase_ratio();
    match problem.order {
        Order::Second => {
            if p.im.abs() > tol {
                return Regime::Indefinite;
            }
            let rate_sign = sign_of(rates.iter().copied());
            match rate_sign {
                Some(0) => Regime::Conservative,
                // both flux terms carry the sign of ∂_t|a| only when P > 0
                Some(_) if p.re > T::zero() => regime_from(rate_sign),
                _ => Regime::Indefinite,
            }
        }
        Order::First => {
            let im = if p.im.abs() <= tol { T::zero() } else { p.im };
            if im == T::zero() {
                return Regime::Conservative;
            }
            match problem.potential.sign() {
                Some(v) if v >= T::zero() => regime_from(sign_of([problem.sign * im])),
                _ => Regime::Indefinite,
            }
        }
    }
}

/// One row of the balance ledger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerRow<T> {
    pub t: T,
    pub e0_integral: T,
    pub flux_integral: T,
    /// `∫₀ᵗ∫e^{n+1}`, trapezoid in time.
    pub flux_accum: T,
    /// `∫e⁰(t) + ∫₀ᵗ∫e^{n+1} − ∫e⁰(0)`.
    pub balance_residual: T,
    pub min_flux_density: T,
}

/// Observer accumulating the integral balance at every step.
#[derive(Debug, Clone)]
pub struct BalanceMonitor<T> {
    pub family: Family,
    pub regime: Regime,
    pub rows: Vec<LedgerRow<T>>,
}

impl<T: Real> BalanceMonitor<T> {
    pub fn new(family: Family, regime: Regime) -> Self {
        Self {
            family,
            regime,
            rows: Vec::new(),
        }
    }

    /// Monitor for the default family of `problem`.
    pub fn for_problem(problem: &FieldProblem<T>, horizon: T) -> Self {
        Self::new(
            Family::default_for(problem.order),
            regime_classify(problem, horizon),
        )
    }

    pub fn e0_initial(&self) -> Option<T> {
        self.rows.first().map(|r| r.e0_integral)
    }
}

impl<T: Real> Observer<T> for BalanceMonitor<T> {
    fn stride(&self) -> usize {
        1
    }

    fn observe(&mut self, problem: &FieldProblem<T>, state: &FieldState<T>) -> Result<()> {
        let d = ledger(self.family, problem, state)?;
        let grid = &state.grid;
        let e0_integral = grid.integral(&d.e0);
        let flux_integral = grid.integral(&d.source);
        let half: T = lit(0.5);
        let (flux_accum, e0_initial) = match self.rows.last() {
            Some(prev) => (
                prev.flux_accum + half * (state.t - prev.t) * (prev.flux_integral + flux_integral),
                self.rows[0].e0_integral,
            ),
            None => (T::zero(), e0_integral),
        };
        self.rows.push(LedgerRow {
            t: state.t,
            e0_integral,
            flux_integral,
            flux_accum,
            balance_residual: e0_integral + flux_accum - e0_initial,
            min_flux_density: d.min_source(),
        });
        Ok(())
    }
}

/// Summary of a ledger series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceReport<T> {
    pub e0_initial: T,
    pub max_residual: T,
    /// `max_residual / |∫e⁰(0)|`, or the absolute value when the initial
    /// energy vanishes.
    pub relative_residual: T,
    /// `max |∫e⁰(t) − ∫e⁰(0)| / |∫e⁰(0)|`.
    pub relative_drift: T,
    pub min_flux_density: T,
    pub nonincreasing: bool,
    pub nondecreasing: bool,
    pub strictly_decreasing: bool,
    pub tolerance: T,
    pub passed: bool,
}

/// Default audit tolerance: trapezoid accumulation is second order in `dt`.
pub fn audit_tolerance<T: Real>(dt: T) -> T {
    lit::<T>(10.0) * dt * dt + lit(1e-10)
}

/// Audits a ledger series against `tolerance` (relative to the initial
/// integral).
pub fn balance_audit<T: Real>(rows: &[LedgerRow<T>], tolerance: T) -> BalanceReport<T> {
    let e0_initial = rows.first().map_or(T::zero(), |r| r.e0_integral);
    let scale = if e0_initial.abs() > T::zero() {
        e0_initial.abs()
    } else {
        T::one()
    };
    let max_residual = rows
        .iter()
        .fold(T::zero(), |m, r| m.max(r.balance_residual.abs()));
    let max_drift = rows
        .iter()
        .fold(T::zero(), |m, r| m.max((r.e0_integral - e0_initial).abs()));
    // round-off slack for the monotonicity checks
    let slack = lit::<T>(1e-13) * scale;
    let pairs = || rows.windows(2).map(|w| w[1].e0_integral - w[0].e0_integral);
    let relative_residual = max_residual / scale;
    BalanceReport {
        e0_initial,
        max_residual,
        relative_residual,
        relative_drift: max_drift / scale,
        min_flux_density: rows
            .iter()
            .fold(T::infinity(), |m, r| m.min(r.min_flux_density)),
        nonincreasing: pairs().all(|d| d <= slack),
        nondecreasing: pairs().all(|d| d >= -slack),
        strictly_decreasing: rows.len() > 1 && pairs().all(|d| d < T::zero()),
        tolerance,
        passed: relative_residual <= tolerance,
    }
}
