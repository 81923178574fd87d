//! Periodic Fourier grids.
//!
//! Fields are flat row-major buffers (last axis contiguous). The box along
//! each axis is `[−L/2, L/2)` with `x_i = i L/N − L/2`.

use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::{lit, Complex, Error, Real, Result};

#[derive(Clone)]
pub struct SpectralGrid<T: Real> {
    points: Vec<usize>,
    extent: Vec<T>,
    wavenumbers: Vec<Vec<T>>,
    forward: Vec<Arc<dyn Fft<T>>>,
    inverse: Vec<Arc<dyn Fft<T>>>,
}

impl<T: Real> fmt::Debug for SpectralGrid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("points", &self.points)
            .field("extent", &self.extent)
            .finish_non_exhaustive()
    }
}

impl<T: Real> PartialEq for SpectralGrid<T> {
    fn eq(&self, other: &Self) -> bool {
        self.points == other.points && self.extent == other.extent
    }
}

impl<T: Real> SpectralGrid<T> {
    pub fn new(points: &[usize], extent: &[T]) -> Result<Self> {
        if points.is_empty() || points.len() != extent.len() {
            return Err(Error::invalid("grid", "points and extent need one entry per axis"));
        }
        if points.iter().any(|&n| n < 2) {
            return Err(Error::invalid("points", "need at least 2 points per axis"));
        }
        if extent.iter().any(|&l| !(l > T::zero()) || !l.is_finite()) {
            return Err(Error::invalid("extent", "must be positive and finite"));
        }
        let mut planner = FftPlanner::new();
        let two_pi = T::PI() + T::PI();
        let wavenumbers = points
            .iter()
            .zip(extent)
            .map(|(&n, &l)| {
                (0..n)
                    .map(|i| {
                        let m = if i <= n / 2 && !(n % 2 == 0 && i == n / 2) {
                            i as f64
                        } else {
                            i as f64 - n as f64
                        };
                        lit::<T>(m) * two_pi / l
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            forward: points.iter().map(|&n| planner.plan_fft_forward(n)).collect(),
            inverse: points.iter().map(|&n| planner.plan_fft_inverse(n)).collect(),
            points: points.to_vec(),
            extent: extent.to_vec(),
            wavenumbers,
        })
    }

    /// Same number of points and extent along every one of `n_dim` axes.
    pub fn uniform(n_dim: usize, points: usize, extent: T) -> Result<Self> {
        Self::new(&vec![points; n_dim], &vec![extent; n_dim])
    }

    pub fn n_dim(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn extent(&self) -> &[T] {
        &self.extent
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> T {
        self.extent[axis] / T::from(self.points[axis]).unwrap()
    }

    pub fn cell_volume(&self) -> T {
        (0..self.n_dim()).fold(T::one(), |v, a| v * self.spacing(a))
    }

    /// Grid coordinates along `axis`.
    pub fn axis_coordinates(&self, axis: usize) -> Vec<T> {
        let h = self.spacing(axis);
        let half = self.extent[axis] / lit(2.0);
        (0..self.points[axis])
            .map(|i| T::from(i).unwrap() * h - half)
            .collect()
    }

    /// Multi-index of a flat index.
    pub fn unravel(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.n_dim()];
        for a in (0..self.n_dim()).rev() {
            out[a] = idx % self.points[a];
            idx /= self.points[a];
        }
        out
    }

    /// Position of a flat index.
    pub fn position(&self, idx: usize) -> Vec<T> {
        self.unravel(idx)
            .into_iter()
            .enumerate()
            .map(|(a, i)| T::from(i).unwrap() * self.spacing(a) - self.extent[a] / lit(2.0))
            .collect()
    }

    /// Wavenumbers along `axis` in FFT order; the Nyquist entry is negative.
    pub fn wavenumbers(&self, axis: usize) -> &[T] {
        &self.wavenumbers[axis]
    }

    /// Smallest nonzero wavenumber `2π/L` along `axis`.
    pub fn fundamental(&self, axis: usize) -> T {
        (T::PI() + T::PI()) / self.extent[axis]
    }

    /// `|k|²` at every Fourier index.
    pub fn k_squared(&self) -> Vec<T> {
        (0..self.len())
            .map(|idx| {
                self.unravel(idx)
                    .into_iter()
                    .enumerate()
                    .fold(T::zero(), |s, (a, i)| {
                        let k = self.wavenumbers[a][i];
                        s + k * k
                    })
            })
            .collect()
    }

    fn transform(&self, data: &mut [Complex<T>], plans: &[Arc<dyn Fft<T>>]) {
        assert_eq!(data.len(), self.len(), "field does not match the grid");
        let mut stride = 1;
        for axis in (0..self.n_dim()).rev() {
            let n = self.points[axis];
            let plan = &plans[axis];
            if stride == 1 {
                plan.process(data);
            } else {
                let block = n * stride;
                let mut lane = vec![Complex::new(T::zero(), T::zero()); n];
                let mut scratch =
                    vec![Complex::new(T::zero(), T::zero()); plan.get_inplace_scratch_len()];
                for start in (0..data.len()).step_by(block) {
                    for off in 0..stride {
                        for (i, v) in lane.iter_mut().enumerate() {
                            *v = data[start + off + i * stride];
                        }
                        plan.process_with_scratch(&mut lane, &mut scratch);
                        for (i, v) in lane.iter().enumerate() {
                            data[start + off + i * stride] = *v;
                        }
                    }
                }
            }
            stride *= n;
        }
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, data: &mut [Complex<T>]) {
        self.transform(data, &self.forward);
    }

    /// Inverse transform in place, normalized so that `inverse ∘ forward = id`.
    pub fn inverse(&self, data: &mut [Complex<T>]) {
        self.transform(data, &self.inverse);
        let s = T::one() / T::from(self.len()).unwrap();
        data.iter_mut().for_each(|v| *v = *v * s);
    }

    /// Applies a Fourier multiplier given per flat Fourier index.
    pub fn apply_multiplier(&self, field: &[Complex<T>], mult: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut f = field.to_vec();
        self.forward(&mut f);
        f.iter_mut().zip(mult).for_each(|(v, m)| *v = *v * m);
        self.inverse(&mut f);
        f
    }

    /// Spectral Laplacian.
    pub fn laplacian(&self, field: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut f = field.to_vec();
        self.forward(&mut f);
        f.iter_mut()
            .zip(self.k_squared())
            .for_each(|(v, k2)| *v = *v * (-k2));
        self.inverse(&mut f);
        f
    }

    /// Spectral `∂/∂x^axis`, with the Nyquist mode dropped.
    pub fn gradient(&self, field: &[Complex<T>], axis: usize) -> Vec<Complex<T>> {
        let mut f = field.to_vec();
        self.forward(&mut f);
        let n = self.points[axis];
        for (idx, v) in f.iter_mut().enumerate() {
            let i = self.unravel(idx)[axis];
            let k = if n.is_multiple_of(2) && i == n / 2 {
                T::zero()
            } else {
                self.wavenumbers[axis][i]
            };
            *v = *v * Complex::new(T::zero(), k);
        }
        self.inverse(&mut f);
        f
    }

    /// All first derivatives.
    pub fn gradients(&self, field: &[Complex<T>]) -> Vec<Vec<Complex<T>>> {
        (0..self.n_dim()).map(|a| self.gradient(field, a)).collect()
    }

    /// `∫ f dx` as grid sum times cell volume.
    pub fn integral(&self, f: &[T]) -> T {
        f.iter().fold(T::zero(), |s, &v| s + v) * self.cell_volume()
    }

    pub fn integral_c(&self, f: &[Complex<T>]) -> Complex<T> {
        f.iter().fold(Complex::new(T::zero(), T::zero()), |s, &v| s + v) * self.cell_volume()
    }

    /// `(∫|f|² dx)^{1/2}`.
    pub fn norm_l2(&self, f: &[Complex<T>]) -> T {
        (f.iter().fold(T::zero(), |s, v| s + v.norm_sqr()) * self.cell_volume()).sqrt()
    }

    /// Samples `f` at every grid point.
    pub fn sample<F>(&self, f: F) -> Vec<Complex<T>>
    where
        F: Fn(&[T]) -> Complex<T>,
    {
        (0..self.len()).map(|i| f(&self.position(i))).collect()
    }
}
