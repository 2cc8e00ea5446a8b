//! Small fixed problems used by the refinement studies.

use std::f64::consts::PI;

use crate::error::Result;
use crate::field::Field;
use crate::grid::{Axis, Grid};
use crate::hydro::{march_fixed, ConservedState, HydroOptions, HydroScheme};
use crate::kuznetsov::{manufactured_forcing, solve_kuznetsov_with, KuznetsovOptions, PotentialState};
use crate::kzk::{gaussian_beam, solve_kzk};
use crate::npe::solve_npe;
use crate::params::ModelParams;
use crate::spectral::{d_dx, PeriodicAxisHandle};

fn beam_params() -> ModelParams {
    ModelParams::nondim(0.1).with_nu(0.01)
}

/// KZK beam at `z = 0.2` computed with `steps` RK4 steps.
pub(crate) fn kzk_reference(steps: usize) -> Result<Vec<f64>> {
    let grid = Grid::new(vec![Axis::periodic("y", 16, 8.0), Axis::periodic("tau", 32, 1.0)])?;
    let i0 = gaussian_beam(&grid, 0.2, 1.0)?;
    let sol = solve_kzk(&i0, &beam_params(), 0.2, 0.2 / steps as f64)?;
    Ok(sol.last().values().to_vec())
}

/// NPE pulse at `τ = 0.2` computed with `steps` RK4 steps.
pub(crate) fn npe_reference(steps: usize) -> Result<Vec<f64>> {
    let grid = Grid::new(vec![Axis::periodic("y", 16, 8.0), Axis::periodic("z", 32, 1.0)])?;
    let q0 = gaussian_beam(&grid, 0.2, 1.0)?;
    let sol = solve_npe(&q0, &beam_params(), 0.2, 0.2 / steps as f64)?;
    Ok(sol.last().values().to_vec())
}

/// Error at `t = 1` of the forced Kuznetsov equation against the manufactured
/// solution `φ* = a sin(x₁ − ωt) cos(x₂) + a/2 cos(2x₁ + x₂ − ωt)`.
pub(crate) fn kuznetsov_mms_error(steps: usize) -> Result<f64> {
    let grid = Grid::new(vec![Axis::periodic("x2", 16, 2.0 * PI), Axis::periodic("x1", 16, 2.0 * PI)])?;
    let p = beam_params();
    let (a, w) = (0.1, 1.3);
    let exact = |t: f64, order: u32| {
        Field::from_fn(grid.clone(), |x| {
            let (y, x1) = (x[0], x[1]);
            let th1 = x1 - w * t;
            let th2 = 2.0 * x1 + y - w * t;
            // d^k/dt^k of sin(θ) with θ_t = −ω.
            let dk = |f: fn(f64) -> f64, g: fn(f64) -> f64, th: f64| match order % 4 {
                0 => f(th),
                1 => -w * g(th),
                2 => -w * w * f(th),
                _ => w * w * w * g(th),
            };
            let s = dk(f64::sin, f64::cos, th1);
            let c = match order {
                0 => th2.cos(),
                1 => w * th2.sin(),
                _ => -w * w * th2.cos(),
            };
            a * s * y.cos() + 0.5 * a * c
        })
        .map(|f| f.into_values())
    };
    let s0 = PotentialState::new(Field::new(grid.clone(), exact(0.0, 0)?)?, Field::new(grid.clone(), exact(0.0, 1)?)?, 0.0)?;
    let forcing = |t: f64| -> Vec<f64> {
        let (phi, phi_t, phi_tt) = (exact(t, 0).unwrap(), exact(t, 1).unwrap(), exact(t, 2).unwrap());
        manufactured_forcing(&grid, &p, &phi, &phi_t, &phi_tt).unwrap()
    };
    let opts = KuznetsovOptions { source: Some(&forcing), store_every: usize::MAX, ..Default::default() };
    let sol = solve_kuznetsov_with(&s0, &p, 1.0, 1.0 / steps as f64, &opts)?.into_result()?;
    let phi = sol.component_at(0, 1.0)?;
    let want = exact(1.0, 0)?;
    let n = want.len() as f64;
    Ok((phi.values().iter().zip(&want).map(|(u, v)| (u - v).powi(2)).sum::<f64>() / n).sqrt())
}

/// Density of a smooth 1D compression at `t = 0.5` on `n` cells, MUSCL scheme.
pub(crate) fn hydro_smooth(n: usize) -> Result<Vec<f64>> {
    let grid = Grid::new(vec![Axis::periodic("x1", n, 2.0 * PI)])?;
    let p = ModelParams::nondim(0.1);
    let rho = Field::from_fn(grid.clone(), |x| 1.0 + 0.05 * x[0].sin())?;
    let m = Field::from_fn(grid.clone(), |x| 0.05 * x[0].sin())?;
    let u0 = ConservedState::new(rho, vec![m])?;
    let dt = 0.25 * 2.0 * PI / n as f64;
    let steps = (0.5 / dt).round() as usize;
    let opts = HydroOptions { scheme: HydroScheme::Muscl, viscous: false, ..Default::default() };
    let (u, _) = march_fixed(&u0, &p, 0.5 / steps as f64, steps, &opts)?;
    Ok(u.rho.into_values())
}

/// Max error of the spectral derivative of a band-limited profile on `n` points.
pub(crate) fn spectral_derivative_error(n: usize) -> Result<f64> {
    let grid = Grid::new(vec![Axis::periodic("x", n, 2.0 * PI)])?;
    let f = Field::from_fn(grid.clone(), |x| (3.0 * x[0]).sin() + 0.5 * (5.0 * x[0]).cos())?;
    let d = d_dx(&f, &PeriodicAxisHandle::by_name(&grid, "x")?, 1)?;
    let exact = Field::from_fn(grid, |x| 3.0 * (3.0 * x[0]).cos() - 2.5 * (5.0 * x[0]).sin())?;
    Ok(d.sub(&exact)?.max_abs())
}
