use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{ensure_same, Grid};

/// Real samples of a function on a [`Grid`]. Immutable once built; every
/// public constructor rejects non-finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Format(format!("non-finite sample {bad}")));
        }
        Ok(Self { grid, values })
    }

    /// Skips the finiteness scan; callers check at the end of a march step.
    pub(crate) fn from_raw(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n] }
    }

    pub fn constant(grid: Arc<Grid>, value: f64) -> Self {
        let n = grid.len();
        Self { grid, values: vec![value; n] }
    }

    /// Samples `f` at every node; `f` receives the node coordinates in storage-axis order.
    pub fn from_fn(grid: Arc<Grid>, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let mut x = vec![0.0; grid.ndim()];
        let values = (0..grid.len())
            .map(|i| {
                grid.coords_of(i, &mut x);
                f(&x)
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Err(NonFinite) unless every sample is finite.
    pub fn check_finite(self, variable: &'static str, last_good: f64) -> Result<Self> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::NonFinite { variable, last_good })
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        ensure_same(&self.grid, &other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Field::new(self.grid.clone(), values)
    }

    pub fn scale(&self, a: f64) -> Result<Field> {
        self.map(|v| a * v)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a - b)
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Field) -> Result<Field> {
        self.zip_map(other, |x, y| x + a * y)
    }

    pub fn same_grid(&self, other: &Field) -> Result<()> {
        ensure_same(&self.grid, &other.grid)
    }
}

/// Cell-volume weighted discrete L² norm, `sqrt(Σ mask·f²·ΔV)`.
pub fn field_l2_norm(f: &Field, mask: Option<&Field>) -> Result<f64> {
    let dv = f.grid().cell_volume();
    let sum = match mask {
        None => f.values().iter().map(|v| v * v).sum::<f64>(),
        Some(m) => {
            f.same_grid(m)?;
            if m.values().iter().any(|&w| w != 0.0 && w != 1.0) {
                return Err(Error::GridMismatch("mask values must be 0 or 1".into()));
            }
            f.values().iter().zip(m.values()).map(|(v, w)| w * v * v).sum::<f64>()
        }
    };
    Ok((sum * dv).sqrt())
}
