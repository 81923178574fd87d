//! Carrier-phase transform `φ = u·b` and the `c → ∞` convergence study from
//! the second-order equation to its first-order reduction.

use crate::field::{evolve, FieldProblem, FieldState, Integrator, NonlinearPotential, Order, Preset, rhs_first_order};
use crate::cosmology::{ScaleModel, WeightModel};
use crate::frame::{PhysicalConstants, RotationFrame};
use crate::spectral::SpectralGrid;
use crate::{branch, lit, to_f64, Complex, Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToPhi,
    ToU,
}

/// Converts between `u` and `φ = u·b(z⁰)`. `problem` is the first-order
/// problem that supplies `b` and, for [`Direction::ToPhi`], `∂_t u` so that the
/// second-order data are well prepared.
pub fn phase_transform<T: Real>(
    problem: &FieldProblem<T>,
    state: &FieldState<T>,
    direction: Direction,
) -> Result<FieldState<T>> {
    if problem.order != Order::First {
        return Err(Error::invalid("problem", "the transform is defined by a first-order problem"));
    }
    let phase = branch::cis(problem.frame.omega0());
    let wv = problem.weight.eval(phase * state.t, &problem.consts)?;
    if wv.b.norm() == T::zero() {
        return Err(Error::WeightVanishes);
    }
    match direction {
        Direction::ToPhi => {
            if state.pi.is_some() {
                return Err(Error::invalid("state", "expected a first-order state"));
            }
            let ut = rhs_first_order(problem, state)?;
            let db = wv.db * phase;
            Ok(FieldState {
                t: state.t,
                phi: state.phi.iter().map(|&u| u * wv.b).collect(),
                pi: Some(
                    state
                        .phi
                        .iter()
                        .zip(&ut)
                        .map(|(&u, &v)| v * wv.b + u * db)
                        .collect(),
                ),
                grid: state.grid.clone(),
            })
        }
        Direction::ToU => Ok(FieldState {
            t: state.t,
            phi: state.phi.iter().map(|&f| f / wv.b).collect(),
            pi: None,
            grid: state.grid.clone(),
        }),
    }
}

/// The second-order problem that shares everything with a first-order one.
pub fn second_order_companion<T: Real>(problem: &FieldProblem<T>) -> FieldProblem<T> {
    FieldProblem {
        preset: Preset::Custom,
        order: Order::Second,
        integrator: Integrator::Rk4,
        evolvable: true,
        ..problem.clone()
    }
}

#[derive(Debug, Clone)]
pub struct LimitStudyConfig<T: Real> {
    /// Strictly increasing speeds of light.
    pub c_values: Vec<T>,
    pub m: T,
    pub hbar: T,
    pub sign: T,
    pub potential: NonlinearPotential<T>,
    /// Must be time independent.
    pub scale: ScaleModel<T>,
    pub b0: Complex<T>,
    pub grid: SpectralGrid<T>,
    pub u0: Vec<Complex<T>>,
    pub t_final: T,
    pub dt: T,
}

impl<T: Real> LimitStudyConfig<T> {
    /// Linear single-mode study: `u₀ = e^{ikx}` with `k = mode` on `[−π, π)`,
    /// `m = ħ = 1`, `c ∈ {10, 20, 40, 80}`, `T = 0.2`, `dt = 1.5625·10⁻⁶`.
    pub fn single_mode(mode: i32) -> Result<Self> {
        let grid = SpectralGrid::uniform(1, 32, T::PI() + T::PI())?;
        let u0 = crate::field::plane_wave(&grid, &[mode], Complex::new(T::one(), T::zero()));
        Ok(Self {
            c_values: [10.0, 20.0, 40.0, 80.0].iter().map(|&c| lit(c)).collect(),
            m: T::one(),
            hbar: T::one(),
            sign: T::one(),
            potential: NonlinearPotential::none(),
            scale: ScaleModel::constant(Complex::new(T::one(), T::zero()), 1)?,
            b0: Complex::new(T::one(), T::zero()),
            grid,
            u0,
            t_final: lit(0.2),
            dt: lit(1.5625e-6),
        })
    }

    fn validate(&self) -> Result<()> {
        if self.c_values.len() < 2 {
            return Err(Error::invalid("c_values", "need at least two entries"));
        }
        if !(self.c_values[0] > T::zero()) || self.c_values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("c_values", "must be positive and strictly increasing"));
        }
        if self.u0.len() != self.grid.len() {
            return Err(Error::invalid("u0", "grid shape mismatch"));
        }
        if !self.scale.is_static() {
            return Err(Error::invalid("scale", "the limit study uses a constant scale function"));
        }
        if self.scale.n_dim() != self.grid.n_dim() {
            return Err(Error::invalid("scale", "dimension differs from the grid"));
        }
        let c_max = *self.c_values.last().unwrap();
        let bound = self.hbar / (self.m * c_max * c_max) / lit(20.0);
        if self.dt > bound {
            return Err(Error::CarrierUnderresolved {
                dt: to_f64(self.dt),
                bound: to_f64(bound),
            });
        }
        Ok(())
    }

    /// First-order problem at speed of light `c`.
    pub fn problem(&self, c: T) -> Result<FieldProblem<T>> {
        let consts = PhysicalConstants::new(c, self.m, self.hbar, T::one(), Complex::new(T::zero(), T::zero()))?;
        let frame = RotationFrame::real(self.grid.n_dim())?;
        Ok(FieldProblem {
            preset: Preset::Schrodinger,
            order: Order::First,
            frame,
            scale: self.scale.clone(),
            weight: WeightModel::new(self.b0, self.scale.clone(), self.sign)?,
            potential: self.potential.clone(),
            consts,
            sign: self.sign,
            theta: branch::arg(self.scale.a0()),
            integrator: Integrator::Rk4,
            evolvable: true,
            growth_allowance: T::one(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitRow<T> {
    pub c: T,
    pub error: T,
    /// `log(e_{i−1}/e_i)/log(c_i/c_{i−1})`; absent for the first row.
    pub observed_order: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitReport<T> {
    pub rows: Vec<LimitRow<T>>,
}

impl<T: Real> LimitReport<T> {
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].error < w[0].error)
    }
}

/// Relative L² error between `u` extracted from the second-order run and the
/// first-order reference at `T`, for each `c`.
pub fn limit_study<T: Real>(config: &LimitStudyConfig<T>) -> Result<LimitReport<T>> {
    config.validate()?;
    let u0 = FieldState::first_order(config.grid.clone(), config.u0.clone())?;
    // the first-order equation does not involve c
    let reference_problem = config.problem(config.c_values[0])?;
    let reference = evolve(&reference_problem, u0.clone(), config.dt, config.t_final, &mut [])?;
    let ref_norm = config.grid.norm_l2(&reference.phi);

    let mut rows: Vec<LimitRow<T>> = Vec::with_capacity(config.c_values.len());
    for &c in &config.c_values {
        let first = config.problem(c)?;
        let second = second_order_companion(&first);
        let phi0 = phase_transform(&first, &u0, Direction::ToPhi)?;
        let phi_t = evolve(&second, phi0, config.dt, config.t_final, &mut [])?;
        let u_t = phase_transform(&first, &phi_t, Direction::ToU)?;
        let diff: Vec<Complex<T>> = u_t
            .phi
            .iter()
            .zip(&reference.phi)
            .map(|(a, b)| a - b)
            .collect();
        let abs = config.grid.norm_l2(&diff);
        let error = if ref_norm > T::zero() { abs / ref_norm } else { abs };
        let observed_order = rows.last().and_then(|prev| {
            (prev.error > T::zero() && error > T::zero())
                .then(|| (prev.error / error).ln() / (c / prev.c).ln())
        });
        rows.push(LimitRow {
            c,
            error,
            observed_order,
        });
    }
    Ok(LimitReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::gaussian;

    type C = Complex<f64>;

    fn schr(c: f64) -> FieldProblem<f64> {
        let mut cfg = LimitStudyConfig::<f64>::single_mode(1).unwrap();
        cfg.b0 = Complex::new(1.0, 0.0);
        cfg.problem(c).unwrap()
    }

    #[test]
    fn transform_at_zero_is_identity() {
        let p = schr(10.0);
        let grid = SpectralGrid::uniform(1, 16, 2.0).unwrap();
        let u = gaussian(&grid, 0.3, &[0.0], C::new(1.0, 0.2));
        let s = FieldState::first_order(grid, u.clone()).unwrap();
        let phi = phase_transform(&p, &s, Direction::ToPhi).unwrap();
        assert_eq!(phi.phi, u);
    }

    #[test]
    fn carrier_on_static_background() {
        let p = schr(3.0);
        let grid = SpectralGrid::uniform(1, 8, 2.0).unwrap();
        let mut s = FieldState::first_order(grid.clone(), vec![C::new(1.0, 0.0); 8]).unwrap();
        s.t = 0.37;
        let phi = phase_transform(&p, &s, Direction::ToPhi).unwrap();
        let b = C::new(0.0, -9.0 * 0.37).exp();
        assert!(phi.phi.iter().all(|v| (v - b).norm() < 1e-13));
        // constant u: ∂_t u = 0, so π = u ∂_t b
        assert!(phi.pi.unwrap().iter().all(|v| (v - b * C::new(0.0, -9.0)).norm() < 1e-12));
    }

    #[test]
    fn round_trip() {
        let p = schr(7.0);
        let grid = SpectralGrid::uniform(2, 8, 3.0).unwrap();
        let mut s = FieldState::first_order(grid.clone(), gaussian(&grid, 0.5, &[0.1, 0.0], C::new(0.3, 1.0))).unwrap();
        s.t = 1.3;
        let back = phase_transform(&p, &phase_transform(&p, &s, Direction::ToPhi).unwrap(), Direction::ToU).unwrap();
        for (a, b) in back.phi.iter().zip(&s.phi) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = LimitStudyConfig::<f64>::single_mode(2).unwrap();
        cfg.c_values = vec![10.0];
        assert!(limit_study(&cfg).is_err());
        let mut cfg = LimitStudyConfig::<f64>::single_mode(2).unwrap();
        cfg.c_values = vec![20.0, 10.0];
        assert!(limit_study(&cfg).is_err());
        let mut cfg = LimitStudyConfig::<f64>::single_mode(2).unwrap();
        cfg.dt = 1e-4;
        assert!(matches!(limit_study(&cfg), Err(Error::CarrierUnderresolved { .. })));
    }

    #[test]
    fn zero_data_gives_zero_errors() {
        let mut cfg = LimitStudyConfig::<f64>::single_mode(2).unwrap();
        cfg.c_values = vec![2.0, 4.0];
        cfg.t_final = 0.01;
        cfg.dt = 1e-4;
        cfg.u0 = vec![C::new(0.0, 0.0); cfg.grid.len()];
        let r = limit_study(&cfg).unwrap();
        assert!(r.rows.iter().all(|row| row.error == 0.0 && row.observed_order.is_none()));
    }

    /// Exact two-frequency solution of the linear equation for well-prepared
    /// single-mode data, reduced back to `u`.
    fn oracle_error(c: f64, k: f64, t: f64) -> f64 {
        let (m, hbar) = (1.0, 1.0);
        let sigma = m * c * c / hbar;
        let w = (c * c * k * k + sigma * sigma).sqrt();
        let nu = hbar * k * k / (2.0 * m);
        // φ(0) = 1, φ_t(0) = −i(ν + σ); φ = A e^{−iwt} + B e^{iwt}
        let i = C::new(0.0, 1.0);
        let v0 = -i * (nu + sigma);
        let a = (1.0 + v0 / (-i * w)) / 2.0;
        let b = 1.0 - a;
        let phi = a * (-i * w * t).exp() + b * (i * w * t).exp();
        let u = phi * (i * sigma * t).exp();
        (u - (-i * nu * t).exp()).norm()
    }

    #[test]
    fn study_matches_the_dispersion_oracle() {
        let mut cfg = LimitStudyConfig::<f64>::single_mode(2).unwrap();
        cfg.c_values = vec![5.0, 10.0];
        cfg.t_final = 0.05;
        cfg.dt = 1e-5;
        let r = limit_study(&cfg).unwrap();
        assert!(r.strictly_decreasing());
        for row in &r.rows {
            let oracle = oracle_error(row.c, 2.0, cfg.t_final);
            assert!((row.error - oracle).abs() < 1e-6 * oracle.max(1e-3), "{row:?} {oracle}");
        }
    }
}
