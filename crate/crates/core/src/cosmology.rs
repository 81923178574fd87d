//! Scale functions, weight functions, FRW identities and the minisuperspace
//! Hamiltonian.

use std::fmt;
use std::sync::Arc;

use crate::frame::PhysicalConstants;
use crate::{branch, c_to_f64, lit, to_f64, Complex, Error, Real, Result};

/// `a`, `∂₀a` and `∂₀²a` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleValue<T> {
    pub a: Complex<T>,
    pub da: Complex<T>,
    pub dda: Complex<T>,
}

type ExplicitFn<T> = Arc<dyn Fn(Complex<T>) -> Result<ScaleValue<T>> + Send + Sync>;

#[derive(Clone)]
pub enum ScaleKind<T> {
    /// Power-law family from the equation of state `p̃ = σρ̃c²`, including the
    /// exponential solution at `σ = −1`.
    EquationOfState { sigma: T },
    /// `a = a(0) e^{H z⁰}`.
    DeSitter { hubble: Complex<T> },
    /// `a = sign · (kℓ/q) cosh(cz⁰/ℓ + C)`.
    VilenkinCosh {
        ell: Complex<T>,
        k_over_q: Complex<T>,
        offset: Complex<T>,
        c: T,
    },
    /// `a = ℓ cos(ct/ℓ)` in the imaginary-time parameter `t` (`z⁰ = it`).
    VilenkinCos { ell: T, c: T },
    Explicit(ExplicitFn<T>),
}

impl<T: fmt::Debug> fmt::Debug for ScaleKind<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EquationOfState { sigma } => {
                f.debug_struct("EquationOfState").field("sigma", sigma).finish()
            }
            Self::DeSitter { hubble } => f.debug_struct("DeSitter").field("hubble", hubble).finish(),
            Self::VilenkinCosh {
                ell,
                k_over_q,
                offset,
                c,
            } => f
                .debug_struct("VilenkinCosh")
                .field("ell", ell)
                .field("k_over_q", k_over_q)
                .field("offset", offset)
                .field("c", c)
                .finish(),
            Self::VilenkinCos { ell, c } => f
                .debug_struct("VilenkinCos")
                .field("ell", ell)
                .field("c", c)
                .finish(),
            Self::Explicit(_) => f.write_str("Explicit(..)"),
        }
    }
}

/// Scale function `a(z⁰)` with closed-form derivatives.
#[derive(Debug, Clone)]
pub struct ScaleModel<T> {
    kind: ScaleKind<T>,
    a0: Complex<T>,
    da0: Complex<T>,
    n_dim: usize,
}

fn is_zero<T: Real>(z: Complex<T>) -> bool {
    z.re == T::zero() && z.im == T::zero()
}

impl<T: Real> ScaleModel<T> {
    /// Solution of the Friedmann system with `k = 0` and `p̃ = σρ̃c²`.
    pub fn equation_of_state(
        sigma: T,
        a0: Complex<T>,
        da0: Complex<T>,
        n_dim: usize,
    ) -> Result<Self> {
        if is_zero(a0) {
            return Err(Error::invalid("a0", "a(0) must be nonzero"));
        }
        if n_dim == 0 {
            return Err(Error::DimensionTooSmall { n: 0, min: 1 });
        }
        if !sigma.is_finite() {
            return Err(Error::invalid("sigma", "must be finite"));
        }
        Ok(Self {
            kind: ScaleKind::EquationOfState { sigma },
            a0,
            da0,
            n_dim,
        })
    }

    /// `a ≡ a0`.
    pub fn constant(a0: Complex<T>, n_dim: usize) -> Result<Self> {
        Self::equation_of_state(T::zero(), a0, Complex::new(T::zero(), T::zero()), n_dim)
    }

    /// `a = e^{H z⁰}`.
    pub fn de_sitter(hubble: T, n_dim: usize) -> Self {
        Self::de_sitter_complex(Complex::new(hubble, T::zero()), n_dim)
    }

    pub fn de_sitter_complex(hubble: Complex<T>, n_dim: usize) -> Self {
        Self {
            kind: ScaleKind::DeSitter { hubble },
            a0: Complex::new(T::one(), T::zero()),
            da0: hubble,
            n_dim,
        }
    }

    /// `a = (kℓ/q) cosh(cz⁰/ℓ + C)`; the `±` is absorbed into `k_over_q`.
    pub fn vilenkin_cosh(
        ell: Complex<T>,
        k_over_q: Complex<T>,
        offset: Complex<T>,
        c: T,
        n_dim: usize,
    ) -> Result<Self> {
        if is_zero(ell) || is_zero(k_over_q) {
            return Err(Error::invalid("ell", "ℓ and k/q must be nonzero"));
        }
        let kl = k_over_q * ell;
        Ok(Self {
            kind: ScaleKind::VilenkinCosh {
                ell,
                k_over_q,
                offset,
                c,
            },
            a0: kl * offset.cosh(),
            da0: kl * offset.sinh() * c / ell,
            n_dim,
        })
    }

    /// `a = a(0) e^{±cz⁰/ℓ}`.
    pub fn vilenkin_exp(a0: Complex<T>, ell: Complex<T>, sign: T, c: T, n_dim: usize) -> Result<Self> {
        if is_zero(ell) {
            return Err(Error::invalid("ell", "must be nonzero"));
        }
        if is_zero(a0) {
            return Err(Error::invalid("a0", "a(0) must be nonzero"));
        }
        Ok(Self {
            kind: ScaleKind::DeSitter {
                hubble: Complex::new(sign.signum() * c, T::zero()) / ell,
            },
            a0,
            da0: a0 * sign.signum() * c / ell,
            n_dim,
        })
    }

    /// `a(t) = ℓ cos(ct/ℓ)`, the cosh branch continued to `z⁰ = it`.
    pub fn vilenkin_cos(ell: T, c: T, n_dim: usize) -> Result<Self> {
        if !(ell > T::zero()) || !(c > T::zero()) {
            return Err(Error::invalid("ell", "ℓ and c must be positive"));
        }
        Ok(Self {
            kind: ScaleKind::VilenkinCos { ell, c },
            a0: Complex::new(ell, T::zero()),
            da0: Complex::new(T::zero(), T::zero()),
            n_dim,
        })
    }

    /// User-supplied `z⁰ ↦ (a, ∂₀a, ∂₀²a)`.
    pub fn explicit<F>(f: F, n_dim: usize) -> Result<Self>
    where
        F: Fn(Complex<T>) -> Result<ScaleValue<T>> + Send + Sync + 'static,
    {
        let s0 = f(Complex::new(T::zero(), T::zero()))?;
        if is_zero(s0.a) {
            return Err(Error::invalid("a0", "a(0) must be nonzero"));
        }
        Ok(Self {
            kind: ScaleKind::Explicit(Arc::new(f)),
            a0: s0.a,
            da0: s0.da,
            n_dim,
        })
    }

    pub fn kind(&self) -> &ScaleKind<T> {
        &self.kind
    }

    pub fn a0(&self) -> Complex<T> {
        self.a0
    }

    pub fn da0(&self) -> Complex<T> {
        self.da0
    }

    pub fn n_dim(&self) -> usize {
        self.n_dim
    }

    /// Same model in a different spatial dimension.
    pub fn with_n_dim(mut self, n_dim: usize) -> Self {
        self.n_dim = n_dim;
        self
    }

    /// `σ` for equation-of-state models.
    pub fn sigma(&self) -> Option<T> {
        match self.kind {
            ScaleKind::EquationOfState { sigma } => Some(sigma),
            _ => None,
        }
    }

    /// True when `a` is constant in `z⁰`.
    pub fn is_static(&self) -> bool {
        match &self.kind {
            ScaleKind::EquationOfState { .. } => is_zero(self.da0),
            ScaleKind::DeSitter { hubble } => is_zero(*hubble),
            _ => false,
        }
    }

    /// `n(1 + σ)/2` for equation-of-state models.
    fn exponent(&self) -> Option<T> {
        self.sigma()
            .map(|s| T::from(self.n_dim).unwrap() * (T::one() + s) / lit(2.0))
    }

    /// Point `z⁰` where the power-law base `1 + s ∂₀a(0) z⁰ / a(0)` vanishes.
    pub fn blow_up_time(&self) -> Option<Complex<T>> {
        let s = self.exponent()?;
        if s == T::zero() || is_zero(self.da0) {
            return None;
        }
        Some(-self.a0 / (self.da0 * s))
    }

    /// `(a, ∂₀a, ∂₀²a)` at `z0` on the principal branch. For the cos branch
    /// `z0` is the real imaginary-time parameter `t`.
    pub fn eval(&self, z0: Complex<T>) -> Result<ScaleValue<T>> {
        let v = match &self.kind {
            ScaleKind::EquationOfState { .. } => {
                let s = self.exponent().unwrap_or_else(T::zero);
                if s == T::zero() {
                    let r = self.da0 / self.a0;
                    let a = self.a0 * (r * z0).exp();
                    ScaleValue {
                        a,
                        da: a * r,
                        dda: a * r * r,
                    }
                } else {
                    let base = Complex::new(T::one(), T::zero()) + self.da0 * z0 * s / self.a0;
                    let base = branch::canonical(base);
                    if is_zero(base) {
                        return Err(Error::BigRip { at: c_to_f64(z0) });
                    }
                    let e = T::one() / s;
                    let integral = (e - e.round()).abs() <= T::epsilon() * lit(16.0);
                    if base.im == T::zero() && base.re < T::zero() && !integral {
                        return Err(Error::BranchCut { at: c_to_f64(z0) });
                    }
                    let p = branch::powf(base, e);
                    ScaleValue {
                        a: self.a0 * p,
                        da: self.da0 * p / base,
                        dda: self.da0 * self.da0 * (T::one() - s) / self.a0 * p / (base * base),
                    }
                }
            }
            ScaleKind::DeSitter { hubble } => {
                let a = self.a0 * (*hubble * z0).exp();
                ScaleValue {
                    a,
                    da: a * hubble,
                    dda: a * hubble * hubble,
                }
            }
            ScaleKind::VilenkinCosh {
                ell,
                k_over_q,
                offset,
                c,
            } => {
                let kl = *k_over_q * ell;
                let w = Complex::new(*c, T::zero()) / ell;
                let arg = z0 * w + offset;
                ScaleValue {
                    a: kl * arg.cosh(),
                    da: kl * w * arg.sinh(),
                    dda: kl * w * w * arg.cosh(),
                }
            }
            ScaleKind::VilenkinCos { ell, c } => {
                let t = z0.re;
                let half_pi = T::FRAC_PI_2();
                let x = *c * t / *ell;
                if z0.im != T::zero() || !(x.abs() < half_pi) {
                    return Err(Error::OutsidePositivityWindow { t: to_f64(t) });
                }
                let w = *c / *ell;
                ScaleValue {
                    a: Complex::new(*ell * x.cos(), T::zero()),
                    da: Complex::new(-*ell * w * x.sin(), T::zero()),
                    dda: Complex::new(-*ell * w * w * x.cos(), T::zero()),
                }
            }
            ScaleKind::Explicit(f) => f(z0)?,
        };
        if is_zero(v.a) {
            return Err(Error::ScaleVanishes);
        }
        Ok(v)
    }
}

/// `scale_eval` as a free function.
pub fn scale_eval<T: Real>(model: &ScaleModel<T>, z0: Complex<T>) -> Result<ScaleValue<T>> {
    model.eval(z0)
}

/// `w(z⁰) = b₀(a(0)/a(z⁰))^{n/2}` and `b = w e^{∓i m c² z⁰/ħ}`.
#[derive(Debug, Clone)]
pub struct WeightModel<T> {
    b0: Complex<T>,
    scale: ScaleModel<T>,
    sign: T,
}

/// `w`, `b` and their `z⁰`-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightValue<T> {
    pub w: Complex<T>,
    pub dw: Complex<T>,
    pub b: Complex<T>,
    pub db: Complex<T>,
}

impl<T: Real> WeightModel<T> {
    /// `sign = +1` selects `b = w e^{−imc²z⁰/ħ}` together with the `+i` form
    /// of the first-order equation.
    pub fn new(b0: Complex<T>, scale: ScaleModel<T>, sign: T) -> Result<Self> {
        if is_zero(b0) {
            return Err(Error::invalid("b0", "must be nonzero"));
        }
        if sign.abs() != T::one() {
            return Err(Error::invalid("sign", "must be +1 or -1"));
        }
        Ok(Self { b0, scale, sign })
    }

    pub fn b0(&self) -> Complex<T> {
        self.b0
    }

    pub fn scale(&self) -> &ScaleModel<T> {
        &self.scale
    }

    pub fn sign(&self) -> T {
        self.sign
    }

    pub fn eval(&self, z0: Complex<T>, consts: &PhysicalConstants<T>) -> Result<WeightValue<T>> {
        let s = self.scale.eval(z0)?;
        let n = T::from(self.scale.n_dim()).unwrap();
        let half_n = n / lit(2.0);
        let w = self.b0 * branch::powf(self.scale.a0() / s.a, half_n);
        if is_zero(w) || !w.norm().is_finite() {
            return Err(Error::WeightVanishes);
        }
        let dw = -w * s.da / s.a * half_n;
        let freq = consts.m * consts.c * consts.c / consts.hbar;
        let carrier = Complex::new(T::zero(), -self.sign * freq);
        let b = w * (carrier * z0).exp();
        let db = b * (dw / w + carrier);
        Ok(WeightValue { w, dw, b, db })
    }
}

pub fn weight_eval<T: Real>(
    model: &WeightModel<T>,
    z0: Complex<T>,
    consts: &PhysicalConstants<T>,
) -> Result<WeightValue<T>> {
    model.eval(z0, consts)
}

/// `ρ̃(z⁰) = (n−1)/2 · n/(κc⁴) · (∂₀a(0))² a(0)^{n(1+σ)−2} a(z⁰)^{−n(1+σ)}`.
pub fn density_eval<T: Real>(
    model: &ScaleModel<T>,
    sigma: T,
    z0: Complex<T>,
    kappa: T,
    consts: &PhysicalConstants<T>,
) -> Result<Complex<T>> {
    if kappa == T::zero() {
        return Err(Error::invalid("kappa", "must be nonzero"));
    }
    let s = model.eval(z0)?;
    let n = T::from(model.n_dim()).unwrap();
    let c4 = consts.c.powi(4);
    let e = n * (T::one() + sigma);
    let pref = (n - T::one()) / lit(2.0) * n / (kappa * c4);
    Ok(model.da0() * model.da0() * branch::powf(model.a0(), e - lit(2.0))
        * branch::powf(s.a, -e)
        * pref)
}

/// Relative residuals of the four FRW identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrwResiduals<T> {
    pub friedmann: T,
    pub pressure: T,
    pub raychaudhuri: T,
    pub mass: T,
}

impl<T: Real> FrwResiduals<T> {
    pub fn max(&self) -> T {
        self.friedmann
            .max(self.pressure)
            .max(self.raychaudhuri)
            .max(self.mass)
    }
}

/// `|l − r|` relative to `scale`, the sum of the magnitudes of the terms that
/// make up both sides.
fn relative<T: Real>(l: Complex<T>, r: Complex<T>, scale: T) -> T {
    let d = (l - r).norm();
    if d == T::zero() {
        return T::zero();
    }
    d / scale.max(l.norm()).max(r.norm()).max(T::min_positive_value())
}

/// Friedmann, pressure, Raychaudhuri and mass-conservation residuals for the
/// scale model with density from [`density_eval`] and `p̃ = σρ̃c²`.
#[allow(clippy::too_many_arguments)]
pub fn frw_residuals<T: Real>(
    model: &ScaleModel<T>,
    sigma: T,
    q: Complex<T>,
    k: Complex<T>,
    z0: Complex<T>,
    kappa: T,
    consts: &PhysicalConstants<T>,
) -> Result<FrwResiduals<T>> {
    let n_dim = model.n_dim();
    if n_dim < 3 {
        return Err(Error::DimensionTooSmall { n: n_dim, min: 3 });
    }
    if is_zero(q) {
        return Err(Error::invalid("q", "must be nonzero"));
    }
    let s = model.eval(z0)?;
    let rho = density_eval(model, sigma, z0, kappa, consts)?;
    let c = consts.c;
    let c2 = c * c;
    let n = T::from(n_dim).unwrap();
    let one = T::one();
    let two: T = lit(2.0);
    let p = rho * sigma * c2;

    let hub = s.da / (s.a * c);
    let curv = k * k / (q * q * s.a * s.a);
    let acc = s.dda / (s.a * c2);

    let half = (n - one) / two;
    let fr_r = rho * (kappa * c2 / n);
    let friedmann = relative(
        (hub * hub + curv) * half,
        fr_r,
        (hub.norm_sqr() + curv.norm()) * half + fr_r.norm(),
    );
    let acc_t = acc * (two / (n - two));
    let pr_r = -p * (kappa / (n - two));
    let pressure = relative(
        (acc_t + hub * hub + curv) * half,
        pr_r,
        (acc_t.norm() + hub.norm_sqr() + curv.norm()) * half + pr_r.norm(),
    );
    let ray_rho = rho * (c2 / n) * (kappa * (n - two) / (n - one));
    let ray_p = p / (n - two) * (kappa * (n - two) / (n - one));
    let raychaudhuri = relative(
        acc,
        -(ray_rho + ray_p),
        acc.norm() + ray_rho.norm() + ray_p.norm(),
    );

    // ρ̃' from the closed form: ρ̃ ∝ a^{−n(1+σ)}
    let drho = -rho * (n * (one + sigma)) * s.da / s.a;
    let an = branch::powf(s.a, n);
    let dan = an * n * s.da / s.a;
    let m1 = drho * an * c2;
    let m2 = rho * dan * c2;
    let m3 = p * dan;
    let mass = relative(m1 + m2, -m3, m1.norm() + m2.norm() + m3.norm());

    Ok(FrwResiduals {
        friedmann,
        pressure,
        raychaudhuri,
        mass,
    })
}

/// Minisuperspace reduction of the Einstein-Hilbert action for the isotropic
/// metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minisuperspace<T> {
    pub n_dim: usize,
    pub k: Complex<T>,
    pub q: Complex<T>,
    pub lambda: Complex<T>,
    pub kappa: T,
    pub c: T,
}

impl<T: Real> Minisuperspace<T> {
    pub fn new(
        n_dim: usize,
        k: Complex<T>,
        q: Complex<T>,
        kappa: T,
        consts: &PhysicalConstants<T>,
    ) -> Result<Self> {
        if n_dim < 2 {
            return Err(Error::DimensionTooSmall { n: n_dim, min: 2 });
        }
        if is_zero(consts.lambda) {
            return Err(Error::invalid("lambda", "Λ must be nonzero for ℓ to exist"));
        }
        if is_zero(q) {
            return Err(Error::invalid("q", "must be nonzero"));
        }
        if kappa == T::zero() {
            return Err(Error::invalid("kappa", "must be nonzero"));
        }
        Ok(Self {
            n_dim,
            k,
            q,
            lambda: consts.lambda,
            kappa,
            c: consts.c,
        })
    }

    fn nf(&self) -> T {
        T::from(self.n_dim).unwrap()
    }

    /// `ℓ = (n(n−1)/2Λ)^{1/2}`.
    pub fn ell(&self) -> Complex<T> {
        let n = self.nf();
        branch::sqrt(Complex::new(n * (n - T::one()) / lit(2.0), T::zero()) / self.lambda)
    }

    /// `V(a) = c²(4naⁿ⁻²)²(k²/q² − a²/ℓ²)`.
    pub fn potential(&self, a: Complex<T>) -> Complex<T> {
        let n = self.nf();
        let ell = self.ell();
        let f = branch::powf(a, n - lit(2.0)) * (lit::<T>(4.0) * n);
        f * f * (self.k * self.k / (self.q * self.q) - a * a / (ell * ell)) * (self.c * self.c)
    }

    /// `p = 4naⁿ⁻²∂₀a/(κc⁴)`.
    pub fn momentum(&self, a: Complex<T>, da: Complex<T>) -> Complex<T> {
        let n = self.nf();
        branch::powf(a, n - lit(2.0)) * da * (lit::<T>(4.0) * n / (self.kappa * self.c.powi(4)))
    }

    fn check_a(a: Complex<T>) -> Result<()> {
        if is_zero(a) {
            Err(Error::ScaleVanishes)
        } else {
            Ok(())
        }
    }

    /// `H = (2naⁿ/κc²)(c/4naⁿ⁻¹)²(κ²p²c⁴ + V(a)/c⁴)`.
    pub fn hamiltonian(&self, a: Complex<T>, p: Complex<T>) -> Result<Complex<T>> {
        Self::check_a(a)?;
        let n = self.nf();
        let c = self.c;
        let c4 = c.powi(4);
        let pref = branch::powf(a, n) * (lit::<T>(2.0) * n / (self.kappa * c * c));
        let f = Complex::new(c, T::zero()) / (branch::powf(a, n - T::one()) * (lit::<T>(4.0) * n));
        Ok(pref * f * f * (p * p * (self.kappa * self.kappa * c4) + self.potential(a) / c4))
    }

    /// `H = (2naⁿ/κc²)[(∂₀a/ca)² + k²/(q²a²) − 2Λ/(n(n−1))]`.
    pub fn hamiltonian_from_velocity(&self, a: Complex<T>, da: Complex<T>) -> Result<Complex<T>> {
        Self::check_a(a)?;
        let n = self.nf();
        let c = self.c;
        let pref = branch::powf(a, n) * (lit::<T>(2.0) * n / (self.kappa * c * c));
        let hub = da / (a * c);
        Ok(pref
            * (hub * hub + self.k * self.k / (self.q * self.q * a * a)
                - self.lambda * (lit::<T>(2.0) / (n * (n - T::one())))))
    }
}

pub fn vilenkin_potential<T: Real>(ms: &Minisuperspace<T>, a: Complex<T>) -> Complex<T> {
    ms.potential(a)
}

pub fn vilenkin_hamiltonian<T: Real>(
    ms: &Minisuperspace<T>,
    a: Complex<T>,
    p: Complex<T>,
) -> Result<Complex<T>> {
    ms.hamiltonian(a, p)
}

/// Branches of the zero-energy scale solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VilenkinBranch<T> {
    /// `±(kℓ/q)cosh(cz⁰/ℓ + C)`; `sign` selects `±`.
    Cosh { sign: T, offset: Complex<T> },
    /// `a(0)e^{±cz⁰/ℓ}`.
    Exp { a0: Complex<T>, sign: T },
    /// `ℓcos(ct/ℓ)` along imaginary time.
    Cos,
}

/// Scale model for one branch of the zero-energy solution.
pub fn vilenkin_scale<T: Real>(
    ms: &Minisuperspace<T>,
    which: VilenkinBranch<T>,
) -> Result<ScaleModel<T>> {
    let ell = ms.ell();
    match which {
        VilenkinBranch::Cosh { sign, offset } => ScaleModel::vilenkin_cosh(
            ell,
            ms.k / ms.q * sign.signum(),
            offset,
            ms.c,
            ms.n_dim,
        ),
        VilenkinBranch::Exp { a0, sign } => ScaleModel::vilenkin_exp(a0, ell, sign, ms.c, ms.n_dim),
        VilenkinBranch::Cos => {
            if ell.im != T::zero() {
                return Err(Error::invalid("lambda", "cos branch needs real ℓ"));
            }
            ScaleModel::vilenkin_cos(ell.re, ms.c, ms.n_dim)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::kappa_dimension;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c64(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn consts(c: f64) -> PhysicalConstants<f64> {
        PhysicalConstants::new(c, 1.0, 1.0, 0.3, c64(0.0, 0.0)).unwrap()
    }

    #[test]
    fn exponential_case() {
        let m = ScaleModel::equation_of_state(-1.0, c64(2.0, 0.0), c64(0.6, 0.0), 3).unwrap();
        let v = m.eval(c64(1.5, 0.0)).unwrap();
        let expect = 2.0 * (0.6 * 1.5 / 2.0f64).exp();
        assert_relative_eq!(v.a.re, expect, max_relative = 1e-14);
        assert_relative_eq!(v.da.re, 0.3 * expect, max_relative = 1e-14);
    }

    #[test]
    fn constant_solution() {
        let m = ScaleModel::constant(c64(1.3, 0.2), 3).unwrap();
        for t in [-3.0, 0.0, 10.0] {
            let v = m.eval(c64(t, 0.0)).unwrap();
            assert_eq!(v.a, c64(1.3, 0.2));
            assert_eq!(v.da, c64(0.0, 0.0));
        }
        assert!(m.is_static());
    }

    #[test]
    fn dust_in_three_dimensions() {
        // a(t) = (1 + 3t/2)^{2/3}
        let m = ScaleModel::equation_of_state(0.0, c64(1.0, 0.0), c64(1.0, 0.0), 3).unwrap();
        let v = m.eval(c64(1.0, 0.0)).unwrap();
        assert_relative_eq!(v.a.re, 2.5f64.powf(2.0 / 3.0), max_relative = 1e-14);
        assert_relative_eq!(v.da.re, 2.5f64.powf(-1.0 / 3.0), max_relative = 1e-14);
        assert_relative_eq!(v.dda.re, -0.5 * 2.5f64.powf(-4.0 / 3.0), max_relative = 1e-14);
        let c = consts(1.0);
        let kappa = kappa_dimension(3, &c).unwrap();
        let r = frw_residuals(&m, 0.0, c64(1.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0), kappa, &c)
            .unwrap();
        assert!(r.raychaudhuri < 1e-10, "{r:?}");
    }

    #[test]
    fn big_rip_and_branch_cut() {
        // σ = −2, n = 3: s = −3/2, base 1 − 1.5 t vanishes at t = 2/3.
        let m = ScaleModel::equation_of_state(-2.0, c64(1.0, 0.0), c64(1.0, 0.0), 3).unwrap();
        let tb = m.blow_up_time().unwrap();
        assert_relative_eq!(tb.re, 2.0 / 3.0, max_relative = 1e-15);
        assert!(matches!(m.eval(tb), Err(Error::BigRip { .. })));
        assert!(matches!(m.eval(c64(1.0, 0.0)), Err(Error::BranchCut { .. })));
        assert!(m.eval(c64(0.5, 0.0)).is_ok());
        // integral exponent has no cut: σ = −1/3 in n = 3 gives a linear a
        let lin =
            ScaleModel::equation_of_state(-1.0 / 3.0, c64(1.0, 0.0), c64(1.0, 0.0), 3).unwrap();
        assert_relative_eq!(lin.eval(c64(-3.0, 0.0)).unwrap().a.re, -2.0, epsilon = 1e-14);
    }

    #[test]
    fn weight_examples() {
        let c = consts(2.0);
        let scale = ScaleModel::de_sitter(0.4, 3);
        let wm = WeightModel::new(c64(0.7, 0.1), scale, 1.0).unwrap();
        let w0 = wm.eval(c64(0.0, 0.0), &c).unwrap();
        assert_eq!(w0.w, c64(0.7, 0.1));
        assert_eq!(w0.b, c64(0.7, 0.1));
        let t = 1.3;
        let v = wm.eval(c64(t, 0.0), &c).unwrap();
        let expect = c64(0.7, 0.1) * (-1.5 * 0.4 * t).exp();
        assert!((v.w - expect).norm() < 1e-14);
        let carrier = c64(0.0, -4.0 * t).exp();
        assert!((v.b - expect * carrier).norm() < 1e-14);

        let constant = ScaleModel::constant(c64(2.0, 0.0), 2).unwrap();
        let wm = WeightModel::new(c64(1.0, 0.0), constant, -1.0).unwrap();
        let v = wm.eval(c64(3.0, 0.0), &c).unwrap();
        assert_eq!(v.w, c64(1.0, 0.0));
        assert!((v.b - c64(0.0, 12.0).exp()).norm() < 1e-13);
    }

    #[test]
    fn weight_derivative_matches_finite_difference() {
        let c = consts(1.5);
        let scale =
            ScaleModel::equation_of_state(1.0 / 3.0, c64(1.0, 0.0), c64(0.3, 0.0), 3).unwrap();
        let wm = WeightModel::new(c64(1.0, 0.0), scale, 1.0).unwrap();
        let t = 0.8;
        let h = 1e-5;
        let v = wm.eval(c64(t, 0.0), &c).unwrap();
        let p = wm.eval(c64(t + h, 0.0), &c).unwrap();
        let m = wm.eval(c64(t - h, 0.0), &c).unwrap();
        assert!(((p.w - m.w) / (2.0 * h) - v.dw).norm() < 1e-9);
        assert!(((p.b - m.b) / (2.0 * h) - v.db).norm() < 1e-8);
    }

    #[test]
    fn density_examples() {
        let c = consts(1.0);
        let kappa = kappa_dimension(3, &c).unwrap();
        let flat = ScaleModel::constant(c64(1.0, 0.0), 3).unwrap();
        assert_eq!(
            density_eval(&flat, 0.0, c64(2.0, 0.0), kappa, &c).unwrap(),
            c64(0.0, 0.0)
        );
        let vac = ScaleModel::equation_of_state(-1.0, c64(1.0, 0.0), c64(0.5, 0.0), 3).unwrap();
        let r0 = density_eval(&vac, -1.0, c64(0.0, 0.0), kappa, &c).unwrap();
        let r1 = density_eval(&vac, -1.0, c64(4.0, 0.0), kappa, &c).unwrap();
        assert!((r0 - r1).norm() < 1e-15);
        // n = 3, σ = 0, a0 = da0 = 1: ρ̃ = 3(1 + 3t/2)^{−2}/(κc⁴)
        let dust = ScaleModel::equation_of_state(0.0, c64(1.0, 0.0), c64(1.0, 0.0), 3).unwrap();
        let t = 0.7;
        let r = density_eval(&dust, 0.0, c64(t, 0.0), kappa, &c).unwrap();
        assert_relative_eq!(r.re, 3.0 / (1.0 + 1.5 * t).powi(2) / kappa, max_relative = 1e-14);
        assert!(density_eval(&dust, 0.0, c64(t, 0.0), 0.0, &c).is_err());
    }

    #[test]
    fn frw_residual_cases() {
        let c = consts(1.7);
        for n in [3, 4] {
            let kappa = kappa_dimension(n, &c).unwrap();
            for sigma in [-2.0, -1.0, 0.0, 1.0 / 3.0] {
                let m = ScaleModel::equation_of_state(sigma, c64(1.2, 0.0), c64(0.4, 0.0), n)
                    .unwrap();
                for t in [-0.2, 0.0, 0.3, 0.9] {
                    let r = frw_residuals(
                        &m,
                        sigma,
                        c64(1.0, 0.0),
                        c64(0.0, 0.0),
                        c64(t, 0.0),
                        kappa,
                        &c,
                    )
                    .unwrap();
                    assert!(r.max() < 1e-10, "n={n} σ={sigma} t={t}: {r:?}");
                }
            }
        }
        let flat = ScaleModel::constant(c64(1.0, 0.0), 3).unwrap();
        let r = frw_residuals(&flat, 0.0, c64(1.0, 0.0), c64(0.0, 0.0), c64(0.3, 0.0), 1.0, &c)
            .unwrap();
        assert_eq!(r.max(), 0.0);
        let m = ScaleModel::equation_of_state(0.0, c64(1.0, 0.0), c64(1.0, 0.0), 3).unwrap();
        let r = frw_residuals(&m, 0.0, c64(1.0, 0.0), c64(0.5, 0.0), c64(0.3, 0.0), 1.0, &c)
            .unwrap();
        assert!(r.friedmann > 1e-3);
        let two = m.clone().with_n_dim(2);
        assert!(frw_residuals(&two, 0.0, c64(1.0, 0.0), c64(0.0, 0.0), c64(0.3, 0.0), 1.0, &c)
            .is_err());
    }

    #[test]
    fn complex_slice_spot_check() {
        let c = consts(1.0);
        let kappa = kappa_dimension(3, &c).unwrap();
        let m = ScaleModel::equation_of_state(0.0, c64(1.0, 0.2), c64(0.3, -0.1), 3).unwrap();
        let r = frw_residuals(&m, 0.0, c64(1.0, 0.0), c64(0.0, 0.0), c64(0.2, 0.3), kappa, &c)
            .unwrap();
        assert!(r.max() < 1e-10, "{r:?}");
    }

    fn vilenkin(k: f64) -> (Minisuperspace<f64>, PhysicalConstants<f64>) {
        let c = PhysicalConstants::new(1.3, 1.0, 1.0, 0.2, c64(0.5, 0.0)).unwrap();
        let kappa = kappa_dimension(3, &c).unwrap();
        (
            Minisuperspace::new(3, c64(k, 0.0), c64(1.0, 0.0), kappa, &c).unwrap(),
            c,
        )
    }

    #[test]
    fn vilenkin_potential_signs() {
        let (ms, _) = vilenkin(1.0);
        let ell = ms.ell().re;
        assert_relative_eq!(ell, 6.0f64.sqrt(), max_relative = 1e-15);
        assert!(ms.potential(c64(ell, 0.0)).norm() < 1e-12);
        for f in [0.1, 0.5, 0.99] {
            assert!(ms.potential(c64(f * ell, 0.0)).re > 0.0);
        }
        assert!(ms.potential(c64(1.2 * ell, 0.0)).re < 0.0);
        let c0 = PhysicalConstants::new(1.0, 1.0, 1.0, 0.2, c64(0.0, 0.0)).unwrap();
        assert!(Minisuperspace::new(3, c64(1.0, 0.0), c64(1.0, 0.0), 1.0, &c0).is_err());
    }

    #[test]
    fn vilenkin_zero_energy_branches() {
        let (ms, _) = vilenkin(1.0);
        let cosh = vilenkin_scale(
            &ms,
            VilenkinBranch::Cosh {
                sign: 1.0,
                offset: c64(0.0, 0.0),
            },
        )
        .unwrap();
        assert_relative_eq!(cosh.eval(c64(0.0, 0.0)).unwrap().a.re, ms.ell().re);
        for t in [-1.0, 0.0, 0.5, 2.0] {
            let s = cosh.eval(c64(t, 0.0)).unwrap();
            let p = ms.momentum(s.a, s.da);
            let h = ms.hamiltonian(s.a, p).unwrap();
            let scale = ms.hamiltonian_from_velocity(s.a, c64(0.0, 0.0)).unwrap().norm();
            assert!(h.norm() / scale < 1e-10, "t={t}: {h}");
        }

        let (flat, _) = vilenkin(0.0);
        for sign in [1.0, -1.0] {
            let exp = vilenkin_scale(&flat, VilenkinBranch::Exp { a0: c64(0.8, 0.0), sign })
                .unwrap();
            for t in [0.0, 0.7, 1.9] {
                let s = exp.eval(c64(t, 0.0)).unwrap();
                let h = flat.hamiltonian_from_velocity(s.a, s.da).unwrap();
                assert!(h.norm() < 1e-10);
            }
            // same as the σ = −1 equation-of-state model with ∂₀a(0)/a(0) = ±c/ℓ
            let eos = ScaleModel::equation_of_state(
                -1.0,
                c64(0.8, 0.0),
                c64(0.8 * sign * flat.c / flat.ell().re, 0.0),
                3,
            )
            .unwrap();
            let t = c64(1.1, 0.0);
            assert!((eos.eval(t).unwrap().a - exp.eval(t).unwrap().a).norm() < 1e-13);
        }
    }

    #[test]
    fn cos_branch_positivity_window() {
        let (ms, _) = vilenkin(1.0);
        let cos = vilenkin_scale(&ms, VilenkinBranch::Cos).unwrap();
        let edge = -std::f64::consts::FRAC_PI_2 * ms.ell().re / ms.c;
        let near = cos.eval(c64(edge * (1.0 - 1e-9), 0.0)).unwrap();
        assert!(near.a.re > 0.0 && near.a.re < 1e-8);
        assert!(matches!(
            cos.eval(c64(edge * 1.01, 0.0)),
            Err(Error::OutsidePositivityWindow { .. })
        ));
        // V > 0 along the tunnelling segment
        for f in [0.1, 0.5, 0.9] {
            let a = cos.eval(c64(edge * f, 0.0)).unwrap().a;
            assert!(ms.potential(a).re > 0.0);
        }
    }

    #[test]
    fn hamiltonian_negative_for_pure_lambda() {
        let (ms, _) = vilenkin(0.0);
        assert!(ms.hamiltonian(c64(1.5, 0.0), c64(0.0, 0.0)).unwrap().re < 0.0);
        assert!(ms.hamiltonian(c64(0.0, 0.0), c64(0.0, 0.0)).is_err());
    }

    #[test]
    fn f32_scale_smoke() {
        let m = ScaleModel::<f32>::equation_of_state(
            0.0,
            Complex::new(1.0, 0.0),
            Complex::new(1.0, 0.0),
            3,
        )
        .unwrap();
        let v = m.eval(Complex::new(1.0, 0.0)).unwrap();
        assert!((v.a.re - 2.5f32.powf(2.0 / 3.0)).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn initial_conditions_are_exact(
            sigma in -3.0f64..3.0,
            a0 in 0.2f64..3.0,
            da0 in -2.0f64..2.0,
            n in 1usize..5,
        ) {
            prop_assume!((sigma + 1.0).abs() > 1e-3);
            let m = ScaleModel::equation_of_state(sigma, c64(a0, 0.0), c64(da0, 0.0), n).unwrap();
            let v = m.eval(c64(0.0, 0.0)).unwrap();
            prop_assert_eq!(v.a, c64(a0, 0.0));
            prop_assert_eq!(v.da, c64(da0, 0.0));
        }

        #[test]
        fn velocity_and_momentum_forms_agree(
            a in 0.1f64..4.0,
            da in -3.0f64..3.0,
            k in -2.0f64..2.0,
        ) {
            let (mut ms, _) = vilenkin(1.0);
            ms.k = c64(k, 0.0);
            let a = c64(a, 0.0);
            let da = c64(da, 0.0);
            let hv = ms.hamiltonian_from_velocity(a, da).unwrap();
            let hp = ms.hamiltonian(a, ms.momentum(a, da)).unwrap();
            let scale = hv.norm().max(hp.norm()).max(1e-300);
            let terms = ms.hamiltonian_from_velocity(a, c64(0.0, 0.0)).unwrap().norm()
                + hv.norm();
            prop_assert!((hv - hp).norm() <= 1e-12 * scale.max(terms));
        }

        #[test]
        fn mass_conservation_identity(
            sigma in -0.9f64..2.0,
            t in 0.0f64..2.0,
            n in 3usize..5,
        ) {
            let c = consts(1.0);
            let kappa = kappa_dimension(n, &c).unwrap();
            let m = ScaleModel::equation_of_state(sigma, c64(1.0, 0.0), c64(0.7, 0.0), n).unwrap();
            let r = frw_residuals(&m, sigma, c64(1.0, 0.0), c64(0.0, 0.0), c64(t, 0.0), kappa, &c)
                .unwrap();
            prop_assert!(r.mass < 1e-10);
            prop_assert!(r.max() < 1e-10);
        }
    }
}
