//! Numerical laboratory for semilinear field equations written on complex
//! coordinate rays.
//!
//! A single second-order equation on a (possibly complex) expanding background,
//! together with its first-order nonrelativistic reduction, specializes to the
//! Klein-Gordon, Schrödinger, elliptic, heat, de Sitter and Ginzburg-Landau
//! equations depending on the ray angles chosen for time and space. The crate
//! provides:
//!
//! * [`frame`]: physical constants, ray phases, the gravitational coupling in
//!   `n` spatial dimensions and the rotation/Lorentz transform matrix.
//! * [`tensor`]: finite-difference Christoffel, Riemann, Ricci and Einstein
//!   tensors for diagonal complex metrics, with closed-form comparisons.
//! * [`cosmology`]: scale functions, weight functions, FRW identity residuals
//!   and the minisuperspace Hamiltonian.
//! * [`field`]: periodic pseudospectral evolution of the second- and
//!   first-order equations with presets for every specialization.
//! * [`energy`]: energy and charge densities, flux terms and the integral
//!   balance audit.
//! * [`nr_limit`]: the carrier-phase transform and the `c → ∞` study.
//! * [`geodesic`]: local-time Hamiltonian dynamics and proper-time geodesics.
//!
//! All numerics are generic over the real scalar ([`Real`]: `f32` or `f64`);
//! the aliases at the crate root fix `f64`, which every tolerance in the test
//! suite assumes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cosmology;
pub mod energy;
mod error;
pub mod field;
pub mod frame;
pub mod geodesic;
pub mod nr_limit;
pub mod spectral;
pub mod tensor;

use std::fmt::{Debug, Display};

pub use error::{Error, Result};
pub use num_complex::Complex;

/// Real scalar the numerics are generic over.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + rustfft::FftNum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
}

impl<T> Real for T where
    T: num_traits::Float
        + num_traits::FloatConst
        + rustfft::FftNum
        + Default
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub(crate) fn lit<T: Real>(x: f64) -> T {
    T::from(x).expect("literal representable in the working scalar")
}

#[inline]
pub(crate) fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub(crate) fn c_to_f64<T: Real>(z: Complex<T>) -> Complex<f64> {
    Complex::new(to_f64(z.re), to_f64(z.im))
}

/// Principal-branch helpers. Signed zeros in the imaginary part are folded to
/// `+0` first, so the negative real axis always maps to `arg = +π`.
pub mod branch {
    use super::{Complex, Real};

    #[inline]
    pub fn canonical<T: Real>(z: Complex<T>) -> Complex<T> {
        if z.im == T::zero() {
            Complex::new(z.re, T::zero())
        } else {
            z
        }
    }

    /// `arg z ∈ (−π, π]`.
    #[inline]
    pub fn arg<T: Real>(z: Complex<T>) -> T {
        canonical(z).arg()
    }

    #[inline]
    pub fn sqrt<T: Real>(z: Complex<T>) -> Complex<T> {
        canonical(z).sqrt()
    }

    /// `z^e` with the principal logarithm.
    #[inline]
    pub fn powc<T: Real>(z: Complex<T>, e: Complex<T>) -> Complex<T> {
        let z = canonical(z);
        if z == Complex::new(T::zero(), T::zero()) {
            return Complex::new(T::zero(), T::zero());
        }
        (z.ln() * e).exp()
    }

    #[inline]
    pub fn powf<T: Real>(z: Complex<T>, e: T) -> Complex<T> {
        powc(z, Complex::new(e, T::zero()))
    }

    /// `e^{iθ}`.
    #[inline]
    pub fn cis<T: Real>(theta: T) -> Complex<T> {
        Complex::new(theta.cos(), theta.sin())
    }
}

pub type C64 = Complex<f64>;
pub type Constants = frame::PhysicalConstants<f64>;
pub type Frame = frame::RotationFrame<f64>;
pub type Metric = tensor::MetricDescription<f64>;
pub type Curvature = tensor::CurvatureBundle<f64>;
pub type Scale = cosmology::ScaleModel<f64>;
pub type Weight = cosmology::WeightModel<f64>;
pub type Minisuperspace = cosmology::Minisuperspace<f64>;
pub type Grid = spectral::SpectralGrid<f64>;
pub type Potential = field::NonlinearPotential<f64>;
pub type Problem = field::FieldProblem<f64>;
pub type State = field::FieldState<f64>;
pub type Ledger = energy::BalanceMonitor<f64>;
pub type LimitConfig = nr_limit::LimitStudyConfig<f64>;
pub type Scenario = geodesic::GeodesicScenario<f64>;
pub type Particle = geodesic::GeodesicState<f64>;
