//! Local-time particle dynamics on `g_jk = a(z⁰)² h_j(z) δ_jk` and
//! proper-time geodesics.
//!
//! With `K = m²c² + g_jk p^j p^k` and `H = cK^{1/2} + U` the evolved system is
//!
//! ```text
//! dz^j/dz⁰      = c p^j / K^{1/2}
//! g_jk dp^k/dz⁰ = −∂_jU − (dg_jk/dz⁰) p^k + (c/2K^{1/2}) p^ℓ p^m ∂_j g_ℓm
//! ```
//!
//! and the balance law audited is `H(z⁰) + ∫₀^{z⁰} H_R = H(0)` with
//!
//! ```text
//! H_R = −∂U/∂z⁰ + (c/2K^{1/2}) p^j ∂₀g_jk p^k − (c²/2K) p^j p^ℓ p^m ∂_j g_ℓm.
//! ```
//!
//! The last term of `H_R` is not balanced by the dynamics (where `dg/dz⁰` is
//! the total derivative along the path); it vanishes for homogeneous metrics
//! and is accumulated separately as `inhomogeneity_accum`.

use std::fmt;
use std::sync::Arc;

use crate::cosmology::ScaleModel;
use crate::tensor::{christoffel, MetricDescription, Stencil};
use crate::{branch, lit, to_f64, Complex, Error, Real, Result};

type Pair<T> = (Vec<Complex<T>>, Vec<Complex<T>>);

/// `U` and its partial derivatives with respect to the real parameters
/// `x⁰` and `x^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialValue<T> {
    pub u: Complex<T>,
    pub dt: Complex<T>,
    pub grad: Vec<Complex<T>>,
}

pub type PotentialFn<T> = Arc<dyn Fn(T, &[T]) -> PotentialValue<T> + Send + Sync>;

/// `z ↦ (h_j(z), ∂h_j/∂z^l)` with the derivative indexed `[j][l]`.
pub type SpatialFn<T> = Arc<dyn Fn(&[Complex<T>]) -> (Vec<Complex<T>>, Vec<Vec<Complex<T>>>) + Send + Sync>;

#[derive(Clone)]
pub struct GeodesicScenario<T> {
    pub scale: ScaleModel<T>,
    omega0: T,
    omega1: T,
    pub m: T,
    pub c: T,
    potential: Option<PotentialFn<T>>,
    spatial: Option<SpatialFn<T>>,
}

impl<T: fmt::Debug> fmt::Debug for GeodesicScenario<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeodesicScenario")
            .field("scale", &self.scale)
            .field("omega0", &self.omega0)
            .field("omega1", &self.omega1)
            .field("m", &self.m)
            .field("c", &self.c)
            .field("potential", &self.potential.is_some())
            .field("spatial", &self.spatial.is_some())
            .finish()
    }
}

impl<T: Real> GeodesicScenario<T> {
    /// `omega1` is the shared spatial ray angle in `(−π, π]`, so that the
    /// cases `0, ±π/2, π` can all be expressed.
    pub fn new(scale: ScaleModel<T>, omega0: T, omega1: T, m: T, c: T) -> Result<Self> {
        let half_pi = T::FRAC_PI_2();
        if !(omega0 > -half_pi && omega0 <= half_pi) {
            return Err(Error::invalid("omega0", "must lie in (-pi/2, pi/2]"));
        }
        if !(omega1 > -T::PI() && omega1 <= T::PI()) {
            return Err(Error::invalid("omega1", "must lie in (-pi, pi]"));
        }
        if !(m > T::zero()) || !m.is_finite() {
            return Err(Error::invalid("m", "must be positive"));
        }
        if !(c > T::zero()) || !c.is_finite() {
            return Err(Error::invalid("c", "must be positive"));
        }
        Ok(Self {
            scale,
            omega0,
            omega1,
            m,
            c,
            potential: None,
            spatial: None,
        })
    }

    pub fn with_potential<F>(mut self, f: F) -> Self
    where
        F: Fn(T, &[T]) -> PotentialValue<T> + Send + Sync + 'static,
    {
        self.potential = Some(Arc::new(f));
        self
    }

    pub fn with_spatial_factor<F>(mut self, f: F) -> Self
    where
        F: Fn(&[Complex<T>]) -> (Vec<Complex<T>>, Vec<Vec<Complex<T>>>) + Send + Sync + 'static,
    {
        self.spatial = Some(Arc::new(f));
        self
    }

    pub fn omega0(&self) -> T {
        self.omega0
    }

    pub fn omega1(&self) -> T {
        self.omega1
    }

    pub fn n_dim(&self) -> usize {
        self.scale.n_dim()
    }

    fn local(&self, t: T, x: &[Complex<T>]) -> Result<Local<T>> {
        let n = x.len();
        let zero = Complex::new(T::zero(), T::zero());
        let e0 = branch::cis(self.omega0);
        let e1 = branch::cis(self.omega1);
        let s = self.scale.eval(e0 * t)?;
        let a2 = s.a * s.a;
        let z: Vec<Complex<T>> = x.iter().map(|&xi| e1 * xi).collect();
        let (h, dh) = match &self.spatial {
            Some(f) => f(&z),
            None => (
                vec![Complex::new(T::one(), T::zero()); n],
                vec![vec![zero; n]; n],
            ),
        };
        if h.len() != n || dh.len() != n || dh.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("spatial", "factor has the wrong shape"));
        }
        let g: Vec<Complex<T>> = h.iter().map(|&hj| a2 * hj).collect();
        if g.iter().any(|gj| gj.norm() == T::zero()) {
            return Err(Error::SingularMetric);
        }
        let two: T = lit(2.0);
        let dg0 = h.iter().map(|&hj| s.a * s.da * hj * two).collect();
        // ∂_l g_jj indexed [l][j]
        let dgs = (0..n)
            .map(|l| (0..n).map(|j| a2 * dh[j][l]).collect())
            .collect();
        let (u, du0, dus) = match &self.potential {
            Some(f) => {
                let xr: Vec<T> = x.iter().map(|v| v.re).collect();
                let pv = f(t, &xr);
                if pv.grad.len() != n {
                    return Err(Error::invalid("potential", "gradient has the wrong length"));
                }
                (
                    pv.u,
                    pv.dt / e0,
                    pv.grad.iter().map(|&d| d / e1).collect(),
                )
            }
            None => (zero, zero, vec![zero; n]),
        };
        Ok(Local {
            g,
            dg0,
            dgs,
            u,
            du0,
            dus,
        })
    }
}

struct Local<T> {
    g: Vec<Complex<T>>,
    dg0: Vec<Complex<T>>,
    dgs: Vec<Vec<Complex<T>>>,
    u: Complex<T>,
    du0: Complex<T>,
    dus: Vec<Complex<T>>,
}

impl<T: Real> Local<T> {
    fn k(&self, m: T, c: T, p: &[Complex<T>]) -> Complex<T> {
        p.iter()
            .zip(&self.g)
            .fold(Complex::new(m * m * c * c, T::zero()), |s, (&pj, &gj)| s + gj * pj * pj)
    }

    /// `p^j p^ℓ p^m ∂_j g_ℓm`.
    fn cubic(&self, p: &[Complex<T>]) -> Complex<T> {
        let zero = Complex::new(T::zero(), T::zero());
        (0..p.len()).fold(zero, |s, j| {
            s + p[j] * p.iter().zip(&self.dgs[j]).fold(zero, |t, (&pl, &d)| t + pl * pl * d)
        })
    }

    /// `p^j ∂₀g_jk p^k`.
    fn quad0(&self, p: &[Complex<T>]) -> Complex<T> {
        p.iter()
            .zip(&self.dg0)
            .fold(Complex::new(T::zero(), T::zero()), |s, (&pj, &d)| s + pj * pj * d)
    }
}

/// Principal square root, flipped onto the sheet closest to `reference`.
fn sqrt_near<T: Real>(k: Complex<T>, reference: Option<Complex<T>>) -> Complex<T> {
    let s = branch::sqrt(k);
    match reference {
        Some(r) if (s + r).norm() < (s - r).norm() => -s,
        _ => s,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicState<T> {
    /// Local time `x⁰`.
    pub t: T,
    /// Ray parameters `x^j`.
    pub x: Vec<T>,
    /// Contravariant momentum `p^j`.
    pub p: Vec<Complex<T>>,
    pub sqrt_k: Complex<T>,
    pub h: Complex<T>,
    pub hr: Complex<T>,
    /// `∫₀^{z⁰} H_R`.
    pub hr_accum: Complex<T>,
    /// `∫₀^{z⁰} (c²/2K) p^j p^ℓ p^m ∂_j g_ℓm`.
    pub inhomogeneity_accum: Complex<T>,
}

impl<T: Real> GeodesicState<T> {
    pub fn from_momentum(scn: &GeodesicScenario<T>, t: T, x: &[T], p: &[Complex<T>]) -> Result<Self> {
        if x.len() != scn.n_dim() || p.len() != scn.n_dim() {
            return Err(Error::invalid("state", "dimension differs from the scenario"));
        }
        let xc: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
        let loc = scn.local(t, &xc)?;
        let k = loc.k(scn.m, scn.c, p);
        check_k(t, k)?;
        let sqrt_k = branch::sqrt(k);
        let (hr, _) = hr_parts(scn, &loc, p, sqrt_k);
        let zero = Complex::new(T::zero(), T::zero());
        Ok(Self {
            t,
            x: x.to_vec(),
            p: p.to_vec(),
            sqrt_k,
            h: sqrt_k * scn.c + loc.u,
            hr,
            hr_accum: zero,
            inhomogeneity_accum: zero,
        })
    }

    /// From `dx^j/dx⁰`: `p^j = m v^j J^{−1/2}` with `v^j = e^{i(ω¹−ω⁰)} dx^j/dx⁰`
    /// and `J = 1 − g_jk v^j v^k/c²`.
    pub fn from_velocity(scn: &GeodesicScenario<T>, t: T, x: &[T], dx: &[T]) -> Result<Self> {
        if x.len() != scn.n_dim() || dx.len() != scn.n_dim() {
            return Err(Error::invalid("state", "dimension differs from the scenario"));
        }
        let xc: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
        let loc = scn.local(t, &xc)?;
        let rot = branch::cis(scn.omega1 - scn.omega0);
        let v: Vec<Complex<T>> = dx.iter().map(|&d| rot * d).collect();
        let c2 = scn.c * scn.c;
        let j = v
            .iter()
            .zip(&loc.g)
            .fold(Complex::new(T::one(), T::zero()), |s, (&vj, &gj)| s - gj * vj * vj / c2);
        if j.im.abs() <= lit::<T>(1e-12) * j.norm() && j.re <= T::zero() {
            return Err(Error::Superluminal { t: to_f64(t) });
        }
        let inv = Complex::new(T::one(), T::zero()) / branch::sqrt(j);
        let p: Vec<Complex<T>> = v.iter().map(|&vj| vj * inv * scn.m).collect();
        Self::from_momentum(scn, t, x, &p)
    }

    /// `J = m²c²/K`.
    pub fn j(&self, scn: &GeodesicScenario<T>) -> Complex<T> {
        let mc = scn.m * scn.c;
        Complex::new(mc * mc, T::zero()) / (self.sqrt_k * self.sqrt_k)
    }

    /// `dx^j/dx⁰`.
    pub fn velocity(&self, scn: &GeodesicScenario<T>) -> Vec<Complex<T>> {
        let rot = branch::cis(scn.omega0 - scn.omega1);
        self.p.iter().map(|&pj| rot * pj * scn.c / self.sqrt_k).collect()
    }
}

fn check_k<T: Real>(t: T, k: Complex<T>) -> Result<()> {
    if !(k.norm() > T::zero()) || !k.norm().is_finite() {
        return Err(Error::Superluminal { t: to_f64(t) });
    }
    // J = m²c²/K real and nonpositive
    if k.im.abs() <= lit::<T>(1e-12) * k.norm() && k.re < T::zero() {
        return Err(Error::Superluminal { t: to_f64(t) });
    }
    Ok(())
}

/// `(H_R, (c²/2K) p^j p^ℓ p^m ∂_j g_ℓm)`.
fn hr_parts<T: Real>(
    scn: &GeodesicScenario<T>,
    loc: &Local<T>,
    p: &[Complex<T>],
    sqrt_k: Complex<T>,
) -> (Complex<T>, Complex<T>) {
    let two: T = lit(2.0);
    let c = scn.c;
    let k = sqrt_k * sqrt_k;
    let inhom = loc.cubic(p) * (c * c) / (k * two);
    let hr = -loc.du0 + loc.quad0(p) * c / (sqrt_k * two) - inhom;
    (hr, inhom)
}

/// `cK^{1/2} + U`, principal branch.
pub fn hamiltonian_eval<T: Real>(state: &GeodesicState<T>, scn: &GeodesicScenario<T>) -> Result<Complex<T>> {
    let xc: Vec<Complex<T>> = state.x.iter().map(|&v| Complex::new(v, T::zero())).collect();
    let loc = scn.local(state.t, &xc)?;
    let k = loc.k(scn.m, scn.c, &state.p);
    check_k(state.t, k)?;
    Ok(branch::sqrt(k) * scn.c + loc.u)
}

/// `H_R` at the state.
pub fn hr_eval<T: Real>(state: &GeodesicState<T>, scn: &GeodesicScenario<T>) -> Result<Complex<T>> {
    let xc: Vec<Complex<T>> = state.x.iter().map(|&v| Complex::new(v, T::zero())).collect();
    let loc = scn.local(state.t, &xc)?;
    let k = loc.k(scn.m, scn.c, &state.p);
    check_k(state.t, k)?;
    Ok(hr_parts(scn, &loc, &state.p, sqrt_near(k, Some(state.sqrt_k))).0)
}

/// `(dx/dx⁰, dp/dx⁰)` at a stage.
fn derivatives<T: Real>(
    scn: &GeodesicScenario<T>,
    t: T,
    x: &[Complex<T>],
    p: &[Complex<T>],
    reference: Complex<T>,
) -> Result<Pair<T>> {
    let loc = scn.local(t, x)?;
    let k = loc.k(scn.m, scn.c, p);
    check_k(t, k)?;
    let sk = sqrt_near(k, Some(reference));
    let c = scn.c;
    let two: T = lit(2.0);
    let e0 = branch::cis(scn.omega0);
    let to_x = e0 * branch::cis(-scn.omega1);
    let v: Vec<Complex<T>> = p.iter().map(|&pj| pj * c / sk).collect();
    let n = x.len();
    let dx = v.iter().map(|&vj| vj * to_x).collect();
    let dp = (0..n)
        .map(|j| {
            let total_dg = v
                .iter()
                .enumerate()
                .fold(loc.dg0[j], |s, (l, &vl)| s + vl * loc.dgs[l][j]);
            let pull = p
                .iter()
                .zip(&loc.dgs[j])
                .fold(Complex::new(T::zero(), T::zero()), |s, (&pl, &d)| s + pl * pl * d);
            let rhs = -loc.dus[j] - total_dg * p[j] + pull * c / (sk * two);
            rhs / loc.g[j] * e0
        })
        .collect();
    Ok((dx, dp))
}

const OFF_RAY_TOL: f64 = 1e-9;

/// One classical RK4 step of size `dt` in `x⁰`, with trapezoid accumulation of
/// `∫H_R dz⁰`.
pub fn geodesic_step<T: Real>(
    state: &GeodesicState<T>,
    scn: &GeodesicScenario<T>,
    dt: T,
) -> Result<GeodesicState<T>> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::invalid("dt", "must be positive and finite"));
    }
    let half = dt / lit(2.0);
    let two: T = lit(2.0);
    let six: T = lit(6.0);
    let x0: Vec<Complex<T>> = state.x.iter().map(|&v| Complex::new(v, T::zero())).collect();
    let r = state.sqrt_k;
    let add = |y: &[Complex<T>], h: T, k: &[Complex<T>]| -> Vec<Complex<T>> {
        y.iter().zip(k).map(|(&a, &b)| a + b * h).collect()
    };
    let (k1x, k1p) = derivatives(scn, state.t, &x0, &state.p, r)?;
    let (k2x, k2p) = derivatives(scn, state.t + half, &add(&x0, half, &k1x), &add(&state.p, half, &k1p), r)?;
    let (k3x, k3p) = derivatives(scn, state.t + half, &add(&x0, half, &k2x), &add(&state.p, half, &k2p), r)?;
    let (k4x, k4p) = derivatives(scn, state.t + dt, &add(&x0, dt, &k3x), &add(&state.p, dt, &k3p), r)?;
    let comb = |y: &[Complex<T>], a: &[Complex<T>], b: &[Complex<T>], c: &[Complex<T>], d: &[Complex<T>]| {
        (0..y.len())
            .map(|i| y[i] + (a[i] + b[i] * two + c[i] * two + d[i]) * (dt / six))
            .collect::<Vec<_>>()
    };
    let xn = comb(&x0, &k1x, &k2x, &k3x, &k4x);
    let pn = comb(&state.p, &k1p, &k2p, &k3p, &k4p);
    let t = state.t + dt;

    let off = xn
        .iter()
        .fold(T::zero(), |m, v| m.max(v.im.abs() / (T::one() + v.re.abs())));
    if off > lit(OFF_RAY_TOL) {
        return Err(Error::OffRay { residual: to_f64(off) });
    }
    let x: Vec<T> = xn.iter().map(|v| v.re).collect();
    let loc = scn.local(t, &xn)?;
    let k = loc.k(scn.m, scn.c, &pn);
    check_k(t, k)?;
    let sqrt_k = branch::sqrt(k);
    if sqrt_near(k, Some(r)) != sqrt_k {
        return Err(Error::SheetJump { t: to_f64(t) });
    }
    if !pn.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        return Err(Error::invalid("state", "momentum became non-finite"));
    }
    let (hr, inhom) = hr_parts(scn, &loc, &pn, sqrt_k);
    let (_, inhom_prev) = {
        let loc0 = scn.local(state.t, &x0)?;
        hr_parts(scn, &loc0, &state.p, r)
    };
    let dz = branch::cis(scn.omega0) * (dt / two);
    Ok(GeodesicState {
        t,
        x,
        p: pn,
        sqrt_k,
        h: sqrt_k * scn.c + loc.u,
        hr,
        hr_accum: state.hr_accum + (state.hr + hr) * dz,
        inhomogeneity_accum: state.inhomogeneity_accum + (inhom_prev + inhom) * dz,
    })
}

/// `steps` steps of size `dt`, including the initial state.
pub fn integrate<T: Real>(
    scn: &GeodesicScenario<T>,
    state0: GeodesicState<T>,
    dt: T,
    steps: usize,
) -> Result<Vec<GeodesicState<T>>> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(state0);
    for _ in 0..steps {
        let next = geodesic_step(out.last().expect("nonempty"), scn, dt)?;
        out.push(next);
    }
    Ok(out)
}

/// `max_t |H(t) + ∫H_R − H(0)| / |H(0)|`.
pub fn conservation_audit<T: Real>(trajectory: &[GeodesicState<T>]) -> T {
    let Some(first) = trajectory.first() else {
        return T::zero();
    };
    let scale = first.h.norm().max(T::min_positive_value());
    trajectory
        .iter()
        .fold(T::zero(), |m, s| m.max((s.h + s.hr_accum - first.h).norm() / scale))
}

/// Same as [`conservation_audit`] with the unbalanced inhomogeneity term
/// restored.
pub fn corrected_conservation_audit<T: Real>(trajectory: &[GeodesicState<T>]) -> T {
    let Some(first) = trajectory.first() else {
        return T::zero();
    };
    let scale = first.h.norm().max(T::min_positive_value());
    trajectory.iter().fold(T::zero(), |m, s| {
        m.max((s.h + s.hr_accum + s.inhomogeneity_accum - first.h).norm() / scale)
    })
}

/// Sign of the kinetic part of `H_R` for real slices (`ω⁰ = 0`, `a > 0`):
/// `sign(cos 2ω¹ · da/dx⁰)`.
pub fn kinetic_hr_sign<T: Real>(omega1: T, da: T) -> i8 {
    let s = (omega1 + omega1).cos() * da;
    let eps: T = lit(1e-12);
    if s > eps {
        1
    } else if s < -eps {
        -1
    } else {
        0
    }
}

/// Sample of a proper-time trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ProperTimeSample<T> {
    pub tau: T,
    /// Ray parameters `x^α`.
    pub x: Vec<T>,
    /// `v^α = dz^α/dτ`.
    pub v: Vec<Complex<T>>,
    /// `J = −g_αβ v^α v^β`.
    pub j: Complex<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProperTimeReport<T> {
    pub samples: Vec<ProperTimeSample<T>>,
    /// `max |J − c²|/c²`.
    pub normalization_drift: T,
}

const NORMALIZATION_GUARD: f64 = 1e-6;

fn norm_j<T: Real>(metric: &MetricDescription<T>, x: &[T], v: &[Complex<T>]) -> Result<Complex<T>> {
    let g = metric.components(x)?;
    Ok(-g.iter().zip(v).fold(Complex::new(T::zero(), T::zero()), |s, (&ga, &va)| s + ga * va * va))
}

/// Completes `v⁰` so that `g_αβ v^α v^β = −c²` given the spatial components,
/// assuming `g_00 = −c²`-type signature.
pub fn timelike_velocity<T: Real>(
    metric: &MetricDescription<T>,
    x: &[T],
    spatial: &[Complex<T>],
    c: T,
) -> Result<Vec<Complex<T>>> {
    let g = metric.components(x)?;
    if spatial.len() + 1 != g.len() {
        return Err(Error::invalid("v", "need n spatial components"));
    }
    let s = spatial
        .iter()
        .zip(&g[1..])
        .fold(Complex::new(c * c, T::zero()), |acc, (&v, &gj)| acc + gj * v * v);
    let v0 = branch::sqrt(-s / g[0]);
    let mut v = vec![v0];
    v.extend_from_slice(spatial);
    Ok(v)
}

/// Integrates `d²z^δ/dτ² + Γ^δ_{αβ} v^α v^β = 0` with RK4 and numeric
/// Christoffel symbols; `U ≡ 0`.
pub fn proper_time_geodesic<T: Real>(
    metric: &MetricDescription<T>,
    x0: &[T],
    v0: &[Complex<T>],
    c: T,
    tau_span: T,
    dtau: T,
) -> Result<ProperTimeReport<T>> {
    let d = metric.n_dim() + 1;
    if x0.len() != d || v0.len() != d {
        return Err(Error::invalid("state", "need n + 1 components"));
    }
    if !(dtau > T::zero()) || !(tau_span >= T::zero()) {
        return Err(Error::invalid("dtau", "must be positive"));
    }
    let c2 = c * c;
    let j0 = norm_j(metric, x0, v0)?;
    if (j0 - c2).norm() > lit::<T>(1e-10) * c2 {
        return Err(Error::invalid("v", "initial velocity must satisfy g(v, v) = -c^2"));
    }
    let frame = *metric.frame();
    let inv_phase: Vec<Complex<T>> = (0..d)
        .map(|a| frame.derivative_phase(a))
        .collect::<Result<_>>()?;
    let fd_step: T = lit(1e-3);
    let rhs = |x: &[Complex<T>], v: &[Complex<T>]| -> Result<Pair<T>> {
        let xr: Vec<T> = x.iter().map(|z| z.re).collect();
        let gamma = christoffel(metric, &xr, fd_step, Stencil::Fourth)?;
        let dx = v.iter().zip(&inv_phase).map(|(&va, &ph)| va * ph).collect();
        let dv = (0..d)
            .map(|del| {
                let mut s = Complex::new(T::zero(), T::zero());
                for a in 0..d {
                    for b in 0..d {
                        s = s + gamma[[del, a, b]] * v[a] * v[b];
                    }
                }
                -s
            })
            .collect();
        Ok((dx, dv))
    };
    let (steps, h) = crate::field::step_plan(dtau, tau_span)?;
    let mut x: Vec<Complex<T>> = x0.iter().map(|&v| Complex::new(v, T::zero())).collect();
    let mut v = v0.to_vec();
    let mut samples = vec![ProperTimeSample {
        tau: T::zero(),
        x: x0.to_vec(),
        v: v.clone(),
        j: j0,
    }];
    let mut drift = (j0 - c2).norm() / c2;
    let half = h / lit(2.0);
    let two: T = lit(2.0);
    let six: T = lit(6.0);
    let add = |y: &[Complex<T>], s: T, k: &[Complex<T>]| -> Vec<Complex<T>> {
        y.iter().zip(k).map(|(&a, &b)| a + b * s).collect()
    };
    for step in 1..=steps {
        let (k1x, k1v) = rhs(&x, &v)?;
        let (k2x, k2v) = rhs(&add(&x, half, &k1x), &add(&v, half, &k1v))?;
        let (k3x, k3v) = rhs(&add(&x, half, &k2x), &add(&v, half, &k2v))?;
        let (k4x, k4v) = rhs(&add(&x, h, &k3x), &add(&v, h, &k3v))?;
        for i in 0..d {
            x[i] = x[i] + (k1x[i] + k2x[i] * two + k3x[i] * two + k4x[i]) * (h / six);
            v[i] = v[i] + (k1v[i] + k2v[i] * two + k3v[i] * two + k4v[i]) * (h / six);
        }
        let off = x.iter().fold(T::zero(), |m, z| m.max(z.im.abs() / (T::one() + z.re.abs())));
        if off > lit(OFF_RAY_TOL) {
            return Err(Error::OffRay { residual: to_f64(off) });
        }
        let xr: Vec<T> = x.iter().map(|z| z.re).collect();
        let j = norm_j(metric, &xr, &v)?;
        let dj = (j - c2).norm() / c2;
        if dj > lit(NORMALIZATION_GUARD) {
            return Err(Error::NormalizationViolation { drift: to_f64(dj) });
        }
        drift = drift.max(dj);
        samples.push(ProperTimeSample {
            tau: h * T::from(step).unwrap(),
            x: xr,
            v: v.clone(),
            j,
        });
    }
    Ok(ProperTimeReport {
        samples,
        normalization_drift: drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::RotationFrame;
    use std::f64::consts::{FRAC_PI_2, PI};

    type C = Complex<f64>;

    fn c64(re: f64, im: f64) -> C {
        Complex::new(re, im)
    }

    fn flat(n: usize) -> ScaleModel<f64> {
        ScaleModel::constant(c64(1.0, 0.0), n).unwrap()
    }

    #[test]
    fn hamiltonian_at_rest() {
        let scn = GeodesicScenario::new(flat(2), 0.0, 0.0, 2.0, 3.0).unwrap();
        let s = GeodesicState::from_momentum(&scn, 0.0, &[0.0, 0.0], &[c64(0.0, 0.0); 2]).unwrap();
        assert!((hamiltonian_eval(&s, &scn).unwrap() - c64(18.0, 0.0)).norm() < 1e-14);
        let scn = scn.with_potential(|_, x| PotentialValue {
            u: c64(0.5, 0.0),
            dt: c64(0.0, 0.0),
            grad: vec![c64(0.0, 0.0); x.len()],
        });
        assert!((hamiltonian_eval(&s, &scn).unwrap() - c64(18.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn rapidity_oracle() {
        let (m, c, eta) = (1.5, 2.0, 0.8f64);
        let scn = GeodesicScenario::new(flat(1), 0.0, 0.0, m, c).unwrap();
        let s = GeodesicState::from_momentum(&scn, 0.0, &[0.0], &[c64(m * c * eta.sinh(), 0.0)]).unwrap();
        let h = hamiltonian_eval(&s, &scn).unwrap();
        assert!((h.re - m * c * c * eta.cosh()).abs() < 1e-12);
        // velocity tanh η · c
        assert!((s.velocity(&scn)[0].re - c * eta.tanh()).abs() < 1e-12);
    }

    #[test]
    fn free_particle_is_straight() {
        let scn = GeodesicScenario::new(flat(2), 0.0, 0.0, 1.0, 1.0).unwrap();
        let s0 = GeodesicState::from_velocity(&scn, 0.0, &[0.1, -0.2], &[0.3, 0.4]).unwrap();
        let traj = integrate(&scn, s0.clone(), 1e-3, 1000).unwrap();
        let last = traj.last().unwrap();
        assert!((last.x[0] - (0.1 + 0.3)).abs() < 1e-12);
        assert!((last.x[1] - (-0.2 + 0.4)).abs() < 1e-12);
        assert_eq!(last.p, s0.p);
        assert!(conservation_audit(&traj) < 1e-14);
    }

    #[test]
    fn de_sitter_hr_oracle() {
        let (hub, m, c) = (0.7, 1.2, 2.0);
        let scn = GeodesicScenario::new(ScaleModel::de_sitter(hub, 1), 0.0, 0.0, m, c).unwrap();
        let s = GeodesicState::from_velocity(&scn, 0.3, &[0.0], &[0.5]).unwrap();
        let a = (hub * 0.3f64).exp();
        let j = 1.0 - a * a * 0.25 / (c * c);
        let oracle = m * a * a * hub / j.sqrt() * 0.25;
        assert!((hr_eval(&s, &scn).unwrap() - c64(oracle, 0.0)).norm() < 1e-12);
        assert!((s.j(&scn) - c64(j, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn static_potential_conserves_h() {
        let scn = GeodesicScenario::new(flat(1), 0.0, 0.0, 1.0, 3.0)
            .unwrap()
            .with_potential(|_, x| PotentialValue {
                u: c64(x[0] * x[0], 0.0),
                dt: c64(0.0, 0.0),
                grad: vec![c64(2.0 * x[0], 0.0)],
            });
        let s0 = GeodesicState::from_velocity(&scn, 0.0, &[1.0], &[0.0]).unwrap();
        let traj = integrate(&scn, s0, 1e-3, 2000).unwrap();
        assert!(traj.iter().all(|s| s.hr.norm() == 0.0));
        assert!(conservation_audit(&traj) < 1e-10);
        // the particle oscillates through the origin
        assert!(traj.iter().any(|s| s.x[0] < 0.0));
    }

    #[test]
    fn sign_table_of_kinetic_term() {
        for omega1 in [0.0, PI, FRAC_PI_2, -FRAC_PI_2] {
            for hub in [0.4, -0.4] {
                let scn = GeodesicScenario::new(ScaleModel::de_sitter(hub, 2), 0.0, omega1, 1.0, 2.0)
                    .unwrap();
                let s0 = GeodesicState::from_velocity(&scn, 0.0, &[0.0, 0.0], &[0.3, -0.2]).unwrap();
                let traj = integrate(&scn, s0, 1e-3, 200).unwrap();
                let expected = kinetic_hr_sign(omega1, hub);
                for s in &traj {
                    assert!(s.hr.im.abs() < 1e-10 && s.h.im.abs() < 1e-10);
                    let got = if s.hr.re > 1e-12 { 1 } else if s.hr.re < -1e-12 { -1 } else { 0 };
                    assert_eq!(got, expected, "{omega1} {hub}");
                }
                assert!(conservation_audit(&traj) < 1e-9);
            }
        }
    }

    #[test]
    fn inhomogeneous_metric_accounts_for_the_extra_term() {
        let scn = GeodesicScenario::new(flat(1), 0.0, 0.0, 1.0, 1.0)
            .unwrap()
            .with_spatial_factor(|z| {
                let e = (z[0] * 0.3).exp();
                (vec![e], vec![vec![e * 0.3]])
            });
        let s0 = GeodesicState::from_velocity(&scn, 0.0, &[0.0], &[0.5]).unwrap();
        let traj = integrate(&scn, s0, 1e-3, 1000).unwrap();
        assert!(conservation_audit(&traj) > 1e-3);
        assert!(corrected_conservation_audit(&traj) < 1e-8);
    }

    #[test]
    fn proper_time_minkowski_and_frw() {
        let frame = RotationFrame::real(2).unwrap();
        let c = 1.0;
        let mk = MetricDescription::minkowski(frame, c);
        let v = timelike_velocity(&mk, &[0.0, 0.0, 0.0], &[c64(0.3, 0.0), c64(0.1, 0.0)], c).unwrap();
        let r = proper_time_geodesic(&mk, &[0.0, 0.0, 0.0], &v, c, 1.0, 1e-2).unwrap();
        assert!(r.normalization_drift < 1e-10);
        let last = r.samples.last().unwrap();
        assert!((last.x[1] - 0.3).abs() < 1e-10);

        let scale = ScaleModel::de_sitter(0.5, 2);
        let frw = MetricDescription::frw(frame, c, scale, c64(1.0, 0.0), c64(0.0, 0.0));
        let v = timelike_velocity(&frw, &[0.0, 0.0, 0.0], &[c64(0.0, 0.0); 2], c).unwrap();
        let r = proper_time_geodesic(&frw, &[0.0, 0.0, 0.0], &v, c, 1.0, 1e-2).unwrap();
        for s in &r.samples {
            assert!((s.v[0] - c64(1.0, 0.0)).norm() < 1e-10);
            assert!(s.x[1].abs() < 1e-12);
        }
    }
}
