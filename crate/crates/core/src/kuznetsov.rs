//! Kuznetsov equation for the velocity potential, its density correctors and
//! the residuals of the Kuznetsov ansatz in the mass and momentum equations.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{field_l2_norm, Field};
use crate::grid::Grid;
use crate::march::{rk4_march, MarchOutcome, MarchSpec};
use crate::params::{ModelParams, Terms};
use crate::profile::ProfileSolution;
use crate::spectral::PeriodicOps;

/// Stability constant: `dt ≤ CFL · min(dx) / c`.
pub const CFL: f64 = 0.5;

/// Smallest admissible value of the acceleration coefficient `1 − ε(γ−1)φ_t/c²`.
const MIN_ACCEL_COEF: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct PotentialState {
    pub phi: Field,
    pub phi_t: Field,
    pub t: f64,
}

impl PotentialState {
    pub fn new(phi: Field, phi_t: Field, t: f64) -> Result<Self> {
        phi.same_grid(&phi_t)?;
        PeriodicOps::all(phi.grid())?;
        Ok(Self { phi, phi_t, t })
    }

    pub fn at_rest(grid: Arc<Grid>) -> Result<Self> {
        Self::new(Field::zeros(grid.clone()), Field::zeros(grid), 0.0)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.phi.grid()
    }

    /// State stored as component `slice` of a Kuznetsov trajectory at time `t`.
    pub fn from_solution(sol: &ProfileSolution, t: f64) -> Result<Self> {
        Ok(Self { phi: sol.component_at(0, t)?, phi_t: sol.component_at(1, t)?, t })
    }
}

struct Operator {
    ops: PeriodicOps,
    params: ModelParams,
    terms: Terms,
}

impl Operator {
    fn new(grid: &Grid, params: ModelParams, terms: Terms) -> Result<Self> {
        Ok(Self { ops: PeriodicOps::all(grid)?, params, terms })
    }

    /// Returns (coefficient of φ_tt, everything else) so that
    /// `coef · φ_tt = rest` is the Kuznetsov equation.
    fn split(&self, phi: &[f64], phi_t: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let ModelParams { rho0, c, gamma, nu, eps, .. } = self.params;
        let mut rest: Vec<f64> = self.ops.laplacian(phi).into_iter().map(|v| c * c * v).collect();
        let mut coef = vec![1.0; phi.len()];
        if self.terms.nonlinear {
            let cross = self.ops.dealiased_dot(&self.ops.grad(phi), &self.ops.grad(phi_t));
            for (r, x) in rest.iter_mut().zip(cross) {
                *r += 2.0 * eps * x;
            }
            for (k, pt) in coef.iter_mut().zip(phi_t) {
                *k -= eps * (gamma - 1.0) / (c * c) * pt;
            }
        }
        if self.terms.viscous && nu > 0.0 {
            for (r, x) in rest.iter_mut().zip(self.ops.laplacian(phi_t)) {
                *r += eps * nu / rho0 * x;
            }
        }
        (coef, rest)
    }

    fn acceleration(&self, phi: &[f64], phi_t: &[f64], source: Option<&[f64]>) -> Result<Vec<f64>> {
        let (coef, mut rest) = self.split(phi, phi_t);
        if let Some(s) = source {
            for (r, x) in rest.iter_mut().zip(s) {
                *r += x;
            }
        }
        let mut out = Vec::with_capacity(rest.len());
        for (k, r) in coef.iter().zip(rest) {
            if *k < MIN_ACCEL_COEF {
                return Err(Error::NonFinite { variable: "t", last_good: 0.0 });
            }
            out.push(r / k);
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { variable: "t", last_good: 0.0 });
        }
        Ok(out)
    }
}

/// Forcing that makes `(φ, φ_t, φ_tt)` an exact solution of the forced equation.
pub(crate) fn manufactured_forcing(grid: &Grid, p: &ModelParams, phi: &[f64], phi_t: &[f64], phi_tt: &[f64]) -> Result<Vec<f64>> {
    let op = Operator::new(grid, *p, Terms::default())?;
    let (coef, rest) = op.split(phi, phi_t);
    Ok(coef.iter().zip(phi_tt).zip(rest).map(|((k, a), r)| k * a - r).collect())
}

/// `∂²_tφ` from the Kuznetsov equation, with the `∂_t(∂_tφ)²` term moved to the left.
pub fn kuznetsov_rhs(s: &PotentialState, p: &ModelParams) -> Result<Field> {
    kuznetsov_rhs_with(s, p, Terms::default())
}

pub fn kuznetsov_rhs_with(s: &PotentialState, p: &ModelParams, terms: Terms) -> Result<Field> {
    p.validate()?;
    let op = Operator::new(s.grid(), *p, terms)?;
    let acc = op
        .acceleration(s.phi.values(), s.phi_t.values(), None)
        .map_err(|_| Error::NonFinite { variable: "t", last_good: s.t })?;
    Ok(Field::from_raw(s.grid().clone(), acc))
}

/// Time-dependent forcing added to the right-hand side (used for manufactured solutions).
pub type Source<'a> = &'a dyn Fn(f64) -> Vec<f64>;

pub struct KuznetsovOptions<'a> {
    pub terms: Terms,
    pub store_every: usize,
    pub source: Option<Source<'a>>,
}

impl Default for KuznetsovOptions<'_> {
    fn default() -> Self {
        Self { terms: Terms::default(), store_every: 1, source: None }
    }
}

pub fn cfl_limit(grid: &Grid, p: &ModelParams) -> f64 {
    let dx = grid.stored_axes().map(|a| a.spacing).fold(f64::INFINITY, f64::min);
    CFL * dx / p.c
}

/// RK4 march of `(φ, φ_t)` to `t_end`; the trajectory has components `phi` and `phi_t`.
pub fn solve_kuznetsov(s0: &PotentialState, p: &ModelParams, t_end: f64, dt: f64) -> Result<ProfileSolution> {
    solve_kuznetsov_with(s0, p, t_end, dt, &KuznetsovOptions::default())?.into_result()
}

pub fn solve_kuznetsov_with(
    s0: &PotentialState,
    p: &ModelParams,
    t_end: f64,
    dt: f64,
    opts: &KuznetsovOptions,
) -> Result<MarchOutcome> {
    p.validate()?;
    let limit = cfl_limit(s0.grid(), p);
    if !(dt > 0.0) || dt > limit {
        return Err(Error::CflViolation { dt, limit });
    }
    if !(t_end >= s0.t) {
        return Err(Error::Param { name: "t_end", reason: format!("{t_end} precedes the initial time {}", s0.t) });
    }
    let op = Operator::new(s0.grid(), *p, opts.terms)?;
    let spec = MarchSpec {
        variable: "t",
        components: vec!["phi", "phi_t"],
        start: s0.t,
        end: t_end,
        max_step: dt,
        store_every: opts.store_every,
        blowup_factor: None,
    };
    let initial = vec![s0.phi.values().to_vec(), s0.phi_t.values().to_vec()];
    Ok(rk4_march(s0.grid(), initial, &spec, |t, y| {
        let src = opts.source.map(|f| f(t));
        let acc = op.acceleration(&y[0], &y[1], src.as_deref())?;
        Ok(vec![y[1].clone(), acc])
    }))
}

/// First- and second-order density correctors of the Kuznetsov ansatz.
///
/// The second-order corrector uses the coefficient `(γ−2)` on `(∂_tφ)²`, the
/// value for which the ε² momentum bracket cancels identically.
pub fn density_correctors(s: &PotentialState, p: &ModelParams) -> Result<(Field, Field)> {
    let ModelParams { rho0, c, gamma, nu, .. } = *p;
    let ops = PeriodicOps::all(s.grid())?;
    let grad = ops.grad(s.phi.values());
    let lap = ops.laplacian(s.phi.values());
    let rho1 = s.phi_t.scale(rho0 / (c * c))?;
    let c4 = c.powi(4);
    let rho2: Vec<f64> = (0..s.phi.len())
        .map(|j| {
            let pt = s.phi_t.values()[j];
            let g2: f64 = grad.iter().map(|g| g[j] * g[j]).sum();
            -rho0 * (gamma - 2.0) / (2.0 * c4) * pt * pt - rho0 / (2.0 * c * c) * g2 - nu / (c * c) * lap[j]
        })
        .collect();
    Ok((rho1, Field::from_raw(s.grid().clone(), rho2).check_finite("value", 0.0)?))
}

/// Residuals of the Kuznetsov ansatz.
///
/// `mass_res` is `ερ₀/c²` times (left minus right side of the Kuznetsov
/// equation) evaluated with the supplied `phi_tt`; `momentum_res` has one
/// component per spatial axis and collects the ε and ε² momentum brackets.
pub fn kuznetsov_residuals(
    s: &PotentialState,
    phi_tt: &Field,
    rho1: &Field,
    rho2: &Field,
    p: &ModelParams,
) -> Result<(Field, Vec<Field>)> {
    s.phi.same_grid(phi_tt)?;
    s.phi.same_grid(rho1)?;
    s.phi.same_grid(rho2)?;
    let ModelParams { rho0, c, gamma, nu, eps, .. } = *p;
    let op = Operator::new(s.grid(), *p, Terms::default())?;
    let (coef, rest) = op.split(s.phi.values(), s.phi_t.values());
    let mass: Vec<f64> = (0..coef.len())
        .map(|j| eps * rho0 / (c * c) * (coef[j] * phi_tt.values()[j] - rest[j]))
        .collect();

    let ops = &op.ops;
    let grad = ops.grad(s.phi.values());
    let lap = ops.laplacian(s.phi.values());
    let first: Vec<f64> = (0..coef.len())
        .map(|j| rho1.values()[j] - rho0 / (c * c) * s.phi_t.values()[j])
        .collect();
    let second: Vec<f64> = (0..coef.len())
        .map(|j| {
            let pt = s.phi_t.values()[j];
            let g2: f64 = grad.iter().map(|g| g[j] * g[j]).sum();
            c * c * rho2.values()[j] + rho0 * (gamma - 2.0) / (2.0 * c * c) * pt * pt + rho0 / 2.0 * g2 + nu * lap[j]
        })
        .collect();
    let g1 = ops.grad(&first);
    let g2 = ops.grad(&second);
    let momentum = g1
        .into_iter()
        .zip(g2)
        .map(|(a, b)| {
            let v = a.iter().zip(&b).map(|(x, y)| eps * x + eps * eps * y).collect();
            Field::from_raw(s.grid().clone(), v)
        })
        .collect();
    Ok((Field::from_raw(s.grid().clone(), mass), momentum))
}

/// Linear wave energy `‖φ_t‖² + c²‖∇φ‖²`.
pub fn wave_energy(s: &PotentialState, p: &ModelParams) -> Result<f64> {
    let ops = PeriodicOps::all(s.grid())?;
    let mut e = field_l2_norm(&s.phi_t, None)?.powi(2);
    for g in ops.grad(s.phi.values()) {
        e += p.c * p.c * field_l2_norm(&Field::from_raw(s.grid().clone(), g), None)?.powi(2);
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;
    use std::f64::consts::PI;

    fn line(n: usize) -> Arc<Grid> {
        Grid::new(vec![Axis::periodic("x", n, 1.0)]).unwrap()
    }

    fn params() -> ModelParams {
        ModelParams { rho0: 1.2, c: 1.5, gamma: 1.4, nu: 0.3, eps: 0.1, period: 1.0 }
    }

    #[test]
    fn rest_state_has_zero_acceleration() {
        let s = PotentialState::at_rest(line(16)).unwrap();
        assert_eq!(kuznetsov_rhs(&s, &params()).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn linear_dispersion() {
        let p = params();
        let g = line(32);
        let k = 2.0 * PI * 3.0;
        let phi = Field::from_fn(g.clone(), |x| (k * x[0]).sin()).unwrap();
        let s = PotentialState::new(phi.clone(), Field::zeros(g), 0.0).unwrap();
        let acc = kuznetsov_rhs_with(&s, &p, Terms::LINEAR).unwrap();
        let want = phi.scale(-p.c * p.c * k * k).unwrap();
        assert!(acc.sub(&want).unwrap().max_abs() < 1e-10 * want.max_abs());
    }

    #[test]
    fn damping_symbol() {
        let p = params();
        let g = line(32);
        let k = 2.0 * PI * 2.0;
        let phi_t = Field::from_fn(g.clone(), |x| (k * x[0]).cos()).unwrap();
        let s = PotentialState::new(Field::zeros(g), phi_t.clone(), 0.0).unwrap();
        let acc = kuznetsov_rhs_with(&s, &p, Terms::default().without_nonlinearity()).unwrap();
        let want = phi_t.scale(-p.eps * p.nu / p.rho0 * k * k).unwrap();
        assert!(acc.sub(&want).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn cfl_is_enforced() {
        let p = params();
        let s = PotentialState::at_rest(line(16)).unwrap();
        let limit = cfl_limit(s.grid(), &p);
        assert!(matches!(solve_kuznetsov(&s, &p, 1.0, 1.01 * limit), Err(Error::CflViolation { .. })));
    }

    #[test]
    fn constant_time_derivative_correctors() {
        let p = params().with_nu(0.0);
        let g = line(16);
        let a = 0.7;
        let s = PotentialState::new(Field::zeros(g.clone()), Field::constant(g, a), 0.0).unwrap();
        let (r1, r2) = density_correctors(&s, &p).unwrap();
        let (rho0, c, gamma) = (p.rho0, p.c, p.gamma);
        assert!((r1.values()[3] - rho0 * a / (c * c)).abs() < 1e-14);
        assert!((r2.values()[5] + rho0 * (gamma - 2.0) * a * a / (2.0 * c.powi(4))).abs() < 1e-14);
    }
}
