//! Finite-difference curvature for diagonal complex metrics.
//!
//! Derivatives are taken with respect to the real ray parameters `x^α` and
//! rotated by `e^{−iω^α}`, which is exact for functions restricted to the rays.
//! Index convention for the curvature tensors:
//!
//! ```text
//! R^δ_{αβγ} = ∂_β Γ^δ_{αγ} − ∂_γ Γ^δ_{αβ} + Γ^δ_{εβ} Γ^ε_{αγ} − Γ^δ_{εγ} Γ^ε_{αβ}
//! R_{αβ}    = R^γ_{αβγ}
//! ```
//!
//! With this contraction the scalar curvature of an expanding FRW metric is
//! negative.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array2, Array3, Array4};

use crate::cosmology::ScaleModel;
use crate::frame::RotationFrame;
use crate::{branch, lit, Complex, Error, Real, Result};

pub type MetricFn<T> = Arc<dyn Fn(&[Complex<T>]) -> Vec<Complex<T>> + Send + Sync>;

/// Diagonal metric `g_αα(z)` on the ray manifold of `frame`.
#[derive(Clone)]
pub struct MetricDescription<T> {
    frame: RotationFrame<T>,
    eval: MetricFn<T>,
    analytic: bool,
}

impl<T> fmt::Debug for MetricDescription<T>
where
    T: fmt::Debug,
{
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricDescription")
            .field("frame", &self.frame)
            .field("analytic", &self.analytic)
            .finish_non_exhaustive()
    }
}

impl<T: Real> MetricDescription<T> {
    /// `eval` maps `z = (z⁰, …, zⁿ)` to the `n + 1` diagonal components.
    pub fn new<F>(frame: RotationFrame<T>, eval: F) -> Self
    where
        F: Fn(&[Complex<T>]) -> Vec<Complex<T>> + Send + Sync + 'static,
    {
        Self {
            frame,
            eval: Arc::new(eval),
            analytic: true,
        }
    }

    /// Marks whether second derivatives exist near the sample points.
    pub fn with_analytic(mut self, analytic: bool) -> Self {
        self.analytic = analytic;
        self
    }

    /// `diag(−c², 1, …, 1)`.
    pub fn minkowski(frame: RotationFrame<T>, c: T) -> Self {
        let n = frame.n_dim();
        Self::new(frame, move |_| {
            let mut g = vec![Complex::new(T::one(), T::zero()); n + 1];
            g[0] = Complex::new(-c * c, T::zero());
            g
        })
    }

    /// `−c²(dz⁰)² + a(z⁰)² q² (1 + k²r²/4)^{−2} Σ (dz^j)²`.
    pub fn frw(
        frame: RotationFrame<T>,
        c: T,
        scale: ScaleModel<T>,
        q: Complex<T>,
        k: Complex<T>,
    ) -> Self {
        let n = frame.n_dim();
        Self::new(frame, move |z| {
            let a = scale
                .eval(z[0])
                .map(|s| s.a)
                .unwrap_or(Complex::new(T::nan(), T::nan()));
            let r2 = z[1..].iter().fold(Complex::new(T::zero(), T::zero()), |s, &zj| s + zj * zj);
            let d = Complex::new(T::one(), T::zero()) + k * k * r2 / lit::<T>(4.0);
            let spatial = a * a * q * q / (d * d);
            let mut g = vec![spatial; n + 1];
            g[0] = Complex::new(-c * c, T::zero());
            g
        })
    }

    /// `−c²(dz⁰)² + e^{h(z⁰)} e^{f(r)} Σ (dz^j)²`.
    pub fn isotropic(frame: RotationFrame<T>, c: T, h_fn: Profile<T>, f_fn: Profile<T>) -> Self {
        let n = frame.n_dim();
        Self::new(frame, move |z| {
            let r = radius(&z[1..]);
            let spatial = (h_fn.eval(z[0])[0] + f_fn.eval(r)[0]).exp();
            let mut g = vec![spatial; n + 1];
            g[0] = Complex::new(-c * c, T::zero());
            g
        })
    }

    pub fn frame(&self) -> &RotationFrame<T> {
        &self.frame
    }

    pub fn n_dim(&self) -> usize {
        self.frame.n_dim()
    }

    /// Diagonal components at the ray point with real parameters `x`.
    pub fn components(&self, x: &[T]) -> Result<Vec<Complex<T>>> {
        let z = self.frame.to_complex(x)?;
        let g = (self.eval)(&z);
        if g.len() != self.n_dim() + 1 {
            return Err(Error::invalid("metric", "wrong number of diagonal components"));
        }
        Ok(g)
    }

    fn nonsingular(&self, x: &[T]) -> Result<Vec<Complex<T>>> {
        let g = self.components(x)?;
        if g.iter().any(|c| !(c.norm() > T::zero()) || !c.norm().is_finite()) {
            return Err(Error::SingularMetric);
        }
        Ok(g)
    }
}

/// `r = (Σ (z^j)²)^{1/2}`, principal branch.
pub fn radius<T: Real>(spatial: &[Complex<T>]) -> Complex<T> {
    let r2 = spatial
        .iter()
        .fold(Complex::new(T::zero(), T::zero()), |s, &zj| s + zj * zj);
    branch::sqrt(r2)
}

/// Finite-difference stencil order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stencil {
    #[default]
    Second,
    Fourth,
}

/// One-variable analytic function with its first two derivatives.
#[derive(Clone)]
pub struct Profile<T> {
    eval: Arc<dyn Fn(Complex<T>) -> [Complex<T>; 3] + Send + Sync>,
}

impl<T> fmt::Debug for Profile<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Profile(..)")
    }
}

impl<T: Real> Profile<T> {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(Complex<T>) -> [Complex<T>; 3] + Send + Sync + 'static,
    {
        Self { eval: Arc::new(f) }
    }

    pub fn constant(v: Complex<T>) -> Self {
        let zero = Complex::new(T::zero(), T::zero());
        Self::new(move |_| [v, zero, zero])
    }

    /// `slope · s + offset`.
    pub fn linear(slope: Complex<T>, offset: Complex<T>) -> Self {
        let zero = Complex::new(T::zero(), T::zero());
        Self::new(move |s| [slope * s + offset, slope, zero])
    }

    /// `f(r) = log(q² (1 + k²r²/4)^{−2})`, the isotropic radial solution.
    pub fn radial_solution(q: Complex<T>, k: Complex<T>) -> Self {
        Self::new(move |r| {
            let one = Complex::new(T::one(), T::zero());
            let k2 = k * k;
            let d = one + k2 * r * r / lit::<T>(4.0);
            let f = (q * q).ln() - (d * d).ln();
            let f1 = -k2 * r / d;
            let f2 = -k2 / d + k2 * k2 * r * r / (d * d * lit::<T>(2.0));
            [f, f1, f2]
        })
    }

    /// `h(z⁰) = 2 log a(z⁰)`.
    pub fn log_scale(scale: ScaleModel<T>) -> Self {
        Self::new(move |z0| match scale.eval(z0) {
            Ok(s) => {
                let two = lit::<T>(2.0);
                let ra = s.da / s.a;
                [s.a.ln() * two, ra * two, s.dda / s.a * two - ra * ra * two]
            }
            Err(_) => [Complex::new(T::nan(), T::nan()); 3],
        })
    }

    /// `[value, first derivative, second derivative]`.
    pub fn eval(&self, s: Complex<T>) -> [Complex<T>; 3] {
        (self.eval)(s)
    }
}

/// Curvature objects at one point.
#[derive(Debug, Clone)]
pub struct CurvatureBundle<T> {
    /// `g_αα` at the point.
    pub metric: Vec<Complex<T>>,
    /// `Γ^α_{βγ}` indexed `[α, β, γ]`.
    pub christoffel: Array3<Complex<T>>,
    /// `R^δ_{αβγ}` indexed `[δ, α, β, γ]`.
    pub riemann: Array4<Complex<T>>,
    /// `R_{αβ}`.
    pub ricci: Array2<Complex<T>>,
    pub scalar: Complex<T>,
    /// `G^α_β` indexed `[α, β]`.
    pub einstein: Array2<Complex<T>>,
}

fn check_step<T: Real>(x: &[T], h: T) -> Result<()> {
    if !(h > T::zero()) || !h.is_finite() {
        return Err(Error::invalid("h", "step must be positive and finite"));
    }
    for &xa in x {
        if (xa + h) - xa == T::zero() {
            return Err(Error::StepUnderflow(crate::to_f64(h)));
        }
    }
    Ok(())
}

/// Derivative of a vector-valued function along real axis `axis`, rotated onto
/// the complex ray.
fn ray_derivative<T, F>(
    frame: &RotationFrame<T>,
    x: &[T],
    axis: usize,
    h: T,
    stencil: Stencil,
    f: &F,
) -> Result<Vec<Complex<T>>>
where
    T: Real,
    F: Fn(&[T]) -> Result<Vec<Complex<T>>>,
{
    let shifted = |k: T| -> Result<Vec<Complex<T>>> {
        let mut y = x.to_vec();
        y[axis] = y[axis] + k * h;
        f(&y)
    };
    let phase = frame.derivative_phase(axis)?;
    let combo: Vec<(T, T)> = match stencil {
        Stencil::Second => vec![(T::one(), lit(0.5)), (-T::one(), lit(-0.5))],
        Stencil::Fourth => vec![
            (lit(2.0), lit(-1.0 / 12.0)),
            (T::one(), lit(8.0 / 12.0)),
            (-T::one(), lit(-8.0 / 12.0)),
            (lit(-2.0), lit(1.0 / 12.0)),
        ],
    };
    let mut acc: Option<Vec<Complex<T>>> = None;
    for (k, w) in combo {
        let v = shifted(k)?;
        match acc.as_mut() {
            None => acc = Some(v.into_iter().map(|c| c * w).collect()),
            Some(a) => a.iter_mut().zip(v).for_each(|(ai, vi)| *ai = *ai + vi * w),
        }
    }
    Ok(acc
        .unwrap_or_default()
        .into_iter()
        .map(|c| c * phase / h)
        .collect())
}

fn christoffel_from<T2>(g: &[Complex<T2>], dg: &Array2<Complex<T2>>) -> Array3<Complex<T2>>
where
    T2: Real,
{
    let d = g.len();
    let half = lit::<T2>(0.5);
    Array3::from_shape_fn((d, d, d), |(a, b, c)| {
        // For a diagonal metric only terms with matching indices survive.
        let mut s = Complex::new(T2::zero(), T2::zero());
        if a == c {
            s = s + dg[[b, a]];
        }
        if a == b {
            s = s + dg[[c, a]];
        }
        if b == c {
            s = s - dg[[a, b]];
        }
        s * half / g[a]
    })
}

fn christoffel_flat<T: Real>(
    metric: &MetricDescription<T>,
    x: &[T],
    h: T,
    stencil: Stencil,
) -> Result<Vec<Complex<T>>> {
    let g = metric.nonsingular(x)?;
    let d = g.len();
    let mut dg = Array2::from_elem((d, d), Complex::new(T::zero(), T::zero()));
    for axis in 0..d {
        let row = ray_derivative(metric.frame(), x, axis, h, stencil, &|y: &[T]| {
            metric.components(y)
        })?;
        for (mu, v) in row.into_iter().enumerate() {
            dg[[axis, mu]] = v;
        }
    }
    Ok(christoffel_from(&g, &dg).into_raw_vec_and_offset().0)
}

/// `Γ^α_{βγ}` at the ray point `x`, indexed `[α, β, γ]`.
pub fn christoffel<T: Real>(
    metric: &MetricDescription<T>,
    x: &[T],
    h: T,
    stencil: Stencil,
) -> Result<Array3<Complex<T>>> {
    check_step(x, h)?;
    let d = metric.n_dim() + 1;
    let flat = christoffel_flat(metric, x, h, stencil)?;
    Ok(Array3::from_shape_vec((d, d, d), flat).expect("dense christoffel shape"))
}

/// Full curvature bundle from nested finite differences of `Γ`.
pub fn curvature_suite<T: Real>(
    metric: &MetricDescription<T>,
    x: &[T],
    h: T,
    stencil: Stencil,
) -> Result<CurvatureBundle<T>> {
    check_step(x, h)?;
    if !metric.analytic {
        return Err(Error::invalid(
            "metric",
            "second derivatives are not resolvable at the sample point",
        ));
    }
    let g = metric.nonsingular(x)?;
    let d = g.len();
    let gamma = christoffel(metric, x, h, stencil)?;
    let zero = Complex::new(T::zero(), T::zero());

    // dgamma[[e, a, b, c]] = ∂_e Γ^a_{bc}
    let mut dgamma = Array4::from_elem((d, d, d, d), zero);
    for e in 0..d {
        let flat = ray_derivative(metric.frame(), x, e, h, stencil, &|y: &[T]| {
            christoffel_flat(metric, y, h, stencil)
        })?;
        let block = Array3::from_shape_vec((d, d, d), flat).expect("dense christoffel shape");
        dgamma
            .index_axis_mut(ndarray::Axis(0), e)
            .assign(&block);
    }

    let mut riemann = Array4::from_elem((d, d, d, d), zero);
    for dl in 0..d {
        for a in 0..d {
            for b in 0..d {
                for c in (b + 1)..d {
                    let mut s = dgamma[[b, dl, a, c]] - dgamma[[c, dl, a, b]];
                    for e in 0..d {
                        s = s + gamma[[dl, e, b]] * gamma[[e, a, c]]
                            - gamma[[dl, e, c]] * gamma[[e, a, b]];
                    }
                    riemann[[dl, a, b, c]] = s;
                    riemann[[dl, a, c, b]] = -s;
                }
            }
        }
    }
    let ricci = Array2::from_shape_fn((d, d), |(a, b)| {
        (0..d).fold(zero, |s, c| s + riemann[[c, a, b, c]])
    });
    let scalar = (0..d).fold(zero, |s, a| s + ricci[[a, a]] / g[a]);
    let half = lit::<T>(0.5);
    let einstein = Array2::from_shape_fn((d, d), |(a, b)| {
        let mut v = ricci[[a, b]] / g[a];
        if a == b {
            v = v - scalar * half;
        }
        v
    });
    Ok(CurvatureBundle {
        metric: g,
        christoffel: gamma,
        riemann,
        ricci,
        scalar,
        einstein,
    })
}

/// Closed-form scalar curvature of the isotropic metric with radial
/// solution `(q, k)`: `−(n/c²)∂²h − n(n+1)/(4c²)(∂h)² − n(n−1)k²/q² e^{−h}`.
pub fn frw_scalar_curvature<T: Real>(
    n: usize,
    c: T,
    h: [Complex<T>; 3],
    q: Complex<T>,
    k: Complex<T>,
) -> Complex<T> {
    let nf = T::from(n).unwrap();
    let c2 = c * c;
    let [hv, h1, h2] = h;
    h2 * (-nf / c2) - h1 * h1 * (nf * (nf + T::one()) / (lit::<T>(4.0) * c2))
        - k * k / (q * q) * (-hv).exp() * (nf * (nf - T::one()))
}

/// `f'' − f'/r − (f')²/2` for `e^f = q²(1 + k²r²/4)^{−2}`, from the analytic
/// derivatives.
pub fn f_residual<T: Real>(q: Complex<T>, k: Complex<T>, r: Complex<T>) -> Result<Complex<T>> {
    if q.norm() == T::zero() {
        return Err(Error::invalid("q", "must be nonzero"));
    }
    if r.norm() == T::zero() {
        return Err(Error::Pole("r = 0"));
    }
    let k2r2 = k * k * r * r / lit::<T>(4.0);
    let d = Complex::new(T::one(), T::zero()) + k2r2;
    if d.norm() <= T::epsilon() * (T::one() + k2r2.norm()) {
        return Err(Error::Pole("1 + k²r²/4 = 0"));
    }
    let [_, f1, f2] = Profile::radial_solution(q, k).eval(r);
    Ok(f2 - f1 / r - f1 * f1 * lit::<T>(0.5))
}

/// `(g, √(−g))` with `arg(−g) ∈ (−π, π]`.
pub fn metric_volume<T: Real>(
    metric: &MetricDescription<T>,
    x: &[T],
) -> Result<(Complex<T>, Complex<T>)> {
    let g = metric
        .components(x)?
        .into_iter()
        .fold(Complex::new(T::one(), T::zero()), |p, c| p * c);
    if !(g.norm() > T::zero()) {
        return Err(Error::SingularMetric);
    }
    Ok((g, branch::sqrt(-g)))
}

/// Componentwise comparison of numeric and closed-form Einstein tensors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropicReport<T> {
    /// Relative deviation of `G⁰₀`.
    pub g00: T,
    /// Max deviation over spatial `G^j_k`, relative to the largest spatial
    /// closed-form component.
    pub gjk: T,
    /// Largest `|G⁰_j|`, `|G^j_0|`, relative to the tensor scale.
    pub g0j: T,
}

impl<T: Real> IsotropicReport<T> {
    pub fn max(&self) -> T {
        self.g00.max(self.gjk).max(self.g0j)
    }
}

const RESIDUAL_FLOOR: f64 = 1e-12;

/// Closed-form `G⁰₀` and `G^j_k` for `−c²(dz⁰)² + e^{h}e^{f(r)} Σ(dz^j)²`.
pub fn isotropic_einstein<T: Real>(
    n: usize,
    c: T,
    h: [Complex<T>; 3],
    f: [Complex<T>; 3],
    spatial: &[Complex<T>],
) -> Array2<Complex<T>> {
    let nf = T::from(n).unwrap();
    let one = T::one();
    let (two, four) = (lit::<T>(2.0), lit::<T>(4.0));
    let c2 = c * c;
    let r = radius(spatial);
    let [hv, h1, h2] = h;
    let [fv, f1, f2] = f;
    let e = (-hv - fv).exp();

    let g00 = (h1 * h1 * (nf / four)
        - e * (f2 + f1 / r * (nf - one) + f1 * f1 * ((nf - two) / four)) * c2)
        * ((nf - one) / (two * c2));
    let diag = (h2 + h1 * h1 * (nf / four)) * ((nf - one) / (two * c2))
        - e * (f2 + f1 / r * (nf - two) + f1 * f1 * ((nf - lit::<T>(3.0)) / four))
            * ((nf - two) / two);
    let aniso = e * (f2 - f1 / r - f1 * f1 / two) * ((nf - two) / two) / (r * r);

    let zero = Complex::new(T::zero(), T::zero());
    Array2::from_shape_fn((n + 1, n + 1), |(a, b)| match (a, b) {
        (0, 0) => g00,
        (0, _) | (_, 0) => zero,
        (j, k) => {
            let iso = if j == k { diag } else { zero };
            iso + aniso * spatial[j - 1] * spatial[k - 1]
        }
    })
}

/// Compares numeric `G^α_β` of the isotropic metric against the closed forms.
pub fn verify_isotropic_forms<T: Real>(
    frame: RotationFrame<T>,
    c: T,
    h_fn: Profile<T>,
    f_fn: Profile<T>,
    x: &[T],
    step: T,
    stencil: Stencil,
) -> Result<IsotropicReport<T>> {
    let z = frame.to_complex(x)?;
    let r = radius(&z[1..]);
    if r.norm() == T::zero() {
        return Err(Error::Pole("r = 0"));
    }
    let n = frame.n_dim();
    let closed = isotropic_einstein(n, c, h_fn.eval(z[0]), f_fn.eval(r), &z[1..]);
    let metric = MetricDescription::isotropic(frame, c, h_fn, f_fn);
    let numeric = curvature_suite(&metric, x, step, stencil)?.einstein;

    let floor = lit::<T>(RESIDUAL_FLOOR);
    let scale = closed.iter().fold(T::zero(), |m, v| m.max(v.norm())).max(floor);
    let g00 = (numeric[[0, 0]] - closed[[0, 0]]).norm() / closed[[0, 0]].norm().max(floor);
    let mut spatial_scale = floor;
    let mut gjk = T::zero();
    let mut g0j = T::zero();
    for a in 0..=n {
        for b in 0..=n {
            let dev = (numeric[[a, b]] - closed[[a, b]]).norm();
            if a == 0 && b == 0 {
                continue;
            }
            if a == 0 || b == 0 {
                g0j = g0j.max(numeric[[a, b]].norm() / scale);
            } else {
                spatial_scale = spatial_scale.max(closed[[a, b]].norm());
                gjk = gjk.max(dev);
            }
        }
    }
    Ok(IsotropicReport {
        g00,
        gjk: gjk / spatial_scale,
        g0j,
    })
}
