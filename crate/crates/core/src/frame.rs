//! Physical constants, coordinate rays and the unified rotation/Lorentz
//! transform.
//!
//! Every complex coordinate is restricted to a ray `z^α = e^{iω^α} x^α` with a
//! real parameter `x^α`. Time uses `ω⁰`; all spatial axes share `ω¹`.

use crate::{branch, Complex, Error, Real, Result};

/// SI constants. `lambda` is the (complex) cosmological constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants<T> {
    pub c: T,
    pub m: T,
    pub hbar: T,
    pub g_newton: T,
    pub lambda: Complex<T>,
}

impl<T: Real> PhysicalConstants<T> {
    pub fn new(c: T, m: T, hbar: T, g_newton: T, lambda: Complex<T>) -> Result<Self> {
        if !(c > T::zero()) {
            return Err(Error::invalid("c", "speed of light must be positive"));
        }
        if !(hbar > T::zero()) {
            return Err(Error::invalid("hbar", "Planck constant must be positive"));
        }
        if !(m >= T::zero()) {
            return Err(Error::invalid("m", "mass must be nonnegative"));
        }
        if !(g_newton >= T::zero()) {
            return Err(Error::invalid(
                "g_newton",
                "gravitational constant must be nonnegative",
            ));
        }
        Ok(Self {
            c,
            m,
            hbar,
            g_newton,
            lambda,
        })
    }

    /// `c = m = ħ = 𝒢 = 1`, `Λ = 0`.
    pub fn unit() -> Self {
        Self {
            c: T::one(),
            m: T::one(),
            hbar: T::one(),
            g_newton: T::one(),
            lambda: Complex::new(T::zero(), T::zero()),
        }
    }

    pub fn with_c(self, c: T) -> Result<Self> {
        Self::new(c, self.m, self.hbar, self.g_newton, self.lambda)
    }

    pub fn with_mass(self, m: T) -> Result<Self> {
        Self::new(self.c, m, self.hbar, self.g_newton, self.lambda)
    }

    pub fn with_hbar(self, hbar: T) -> Result<Self> {
        Self::new(self.c, self.m, hbar, self.g_newton, self.lambda)
    }

    pub fn with_lambda(self, lambda: Complex<T>) -> Self {
        Self { lambda, ..self }
    }
}

/// Ray angles for time (`omega0`) and for every spatial axis (`omega1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationFrame<T> {
    omega0: T,
    omega1: T,
    n_dim: usize,
}

impl<T: Real> RotationFrame<T> {
    /// Both angles must lie in `(−π/2, π/2]`.
    pub fn new(omega0: T, omega1: T, n_dim: usize) -> Result<Self> {
        if n_dim == 0 {
            return Err(Error::DimensionTooSmall { n: 0, min: 1 });
        }
        for (name, w) in [("omega0", omega0), ("omega1", omega1)] {
            if !(w > -T::FRAC_PI_2() && w <= T::FRAC_PI_2()) {
                return Err(Error::invalid(name, "angle must lie in (-pi/2, pi/2]"));
            }
        }
        Ok(Self {
            omega0,
            omega1,
            n_dim,
        })
    }

    /// Real coordinates: every ray angle is zero.
    pub fn real(n_dim: usize) -> Result<Self> {
        Self::new(T::zero(), T::zero(), n_dim)
    }

    pub fn omega0(&self) -> T {
        self.omega0
    }

    pub fn omega1(&self) -> T {
        self.omega1
    }

    pub fn n_dim(&self) -> usize {
        self.n_dim
    }

    /// Angle of coordinate axis `axis` (0 is time).
    pub fn angle(&self, axis: usize) -> Result<T> {
        match axis {
            0 => Ok(self.omega0),
            a if a <= self.n_dim => Ok(self.omega1),
            _ => Err(Error::AxisOutOfRange {
                axis,
                n_dim: self.n_dim,
            }),
        }
    }

    /// `e^{iω^axis}`: maps the real parameter to the complex coordinate.
    pub fn ray_phase(&self, axis: usize) -> Result<Complex<T>> {
        self.angle(axis).map(branch::cis)
    }

    /// `e^{−iω^axis}`: the factor turning `∂/∂x^α` into `∂/∂z^α`.
    pub fn derivative_phase(&self, axis: usize) -> Result<Complex<T>> {
        self.angle(axis).map(|w| branch::cis(-w))
    }

    /// Maps real parameters `x` to complex coordinates `z`.
    pub fn to_complex(&self, x: &[T]) -> Result<Vec<Complex<T>>> {
        if x.len() != self.n_dim + 1 {
            return Err(Error::invalid(
                "x",
                format!("expected {} coordinates, got {}", self.n_dim + 1, x.len()),
            ));
        }
        x.iter()
            .enumerate()
            .map(|(a, &xa)| self.ray_phase(a).map(|p| p * xa))
            .collect()
    }
}

/// `Γ(n/2)` for integer `n ≥ 1`.
fn gamma_half<T: Real>(n: usize) -> T {
    let mut acc = T::one();
    if n.is_multiple_of(2) {
        for j in 1..n / 2 {
            acc = acc * T::from(j).unwrap();
        }
        acc
    } else {
        let half = T::from(0.5).unwrap();
        for j in 0..(n - 1) / 2 {
            acc = acc * (T::from(j).unwrap() + half);
        }
        acc * T::PI().sqrt()
    }
}

/// Gravitational coupling `κ = 2(n−1)π^{n/2}𝒢 / ((n−2)Γ(n/2)c⁴)` for `n ≥ 3`.
pub fn kappa_dimension<T: Real>(n: usize, consts: &PhysicalConstants<T>) -> Result<T> {
    if n < 3 {
        return Err(Error::DimensionTooSmall { n, min: 3 });
    }
    let nf = T::from(n).unwrap();
    let two = T::one() + T::one();
    let num = two * (nf - T::one()) * T::PI().powf(nf / two) * consts.g_newton;
    let den = (nf - two) * gamma_half::<T>(n) * consts.c.powi(4);
    Ok(num / den)
}

/// `[[cos θ, i e^{iω} sin θ], [i e^{−iω} sin θ, cos θ]]` acting on `(ct, x¹)`.
pub fn frame_transform_matrix<T: Real>(theta: Complex<T>, omega: T) -> [[Complex<T>; 2]; 2] {
    let i = Complex::new(T::zero(), T::one());
    let (s, c) = (theta.sin(), theta.cos());
    [
        [c, i * branch::cis(omega) * s],
        [i * branch::cis(-omega) * s, c],
    ]
}
