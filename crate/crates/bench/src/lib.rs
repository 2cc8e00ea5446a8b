//! Fixtures shared by the benchmarks.

use std::f64::consts::PI;
use std::sync::Arc;

use paraxial_core::hydro::ConservedState;
use paraxial_core::kzk::gaussian_beam;
use paraxial_core::{Axis, Field, Grid, ModelParams};

/// A 64 × 128 KZK beam grid with a Gaussian beam of amplitude 0.1.
pub fn kzk_beam() -> Field {
    let grid = Grid::new(vec![Axis::periodic("y", 64, 12.0), Axis::periodic("tau", 128, 1.0)]).unwrap();
    gaussian_beam(&grid, 0.1, 1.0).unwrap()
}

/// A 64 × 256 acoustic state for the hydro step.
pub fn hydro_state(p: &ModelParams) -> ConservedState {
    let grid: Arc<Grid> = Grid::new(vec![Axis::periodic("x2", 64, 2.0 * PI), Axis::periodic("x1", 256, 2.0 * PI)]).unwrap();
    let pert = Field::from_fn(grid.clone(), |x| 0.01 * x[1].sin() * (-(x[0] - PI).powi(2)).exp()).unwrap();
    let rho = pert.map(|v| p.rho0 + v).unwrap();
    ConservedState::new(rho, vec![Field::zeros(grid), pert.scale(p.c).unwrap()]).unwrap()
}
