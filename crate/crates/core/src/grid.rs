use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisKind {
    /// Sampled on `n` equispaced points of one period, spacing = period / n.
    Periodic,
    /// Sampled on `n` equispaced points; no wrap-around.
    Bounded,
    /// The marching variable. Carried in the grid description but not stored in snapshots.
    Evolution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: String,
    pub n: usize,
    pub spacing: f64,
    pub kind: AxisKind,
}

impl Axis {
    pub fn periodic(name: &str, n: usize, length: f64) -> Self {
        Self { name: name.to_string(), n, spacing: length / n as f64, kind: AxisKind::Periodic }
    }

    pub fn bounded(name: &str, n: usize, spacing: f64) -> Self {
        Self { name: name.to_string(), n, spacing, kind: AxisKind::Bounded }
    }

    pub fn evolution(name: &str, n: usize, spacing: f64) -> Self {
        Self { name: name.to_string(), n, spacing, kind: AxisKind::Evolution }
    }

    pub fn is_periodic(&self) -> bool {
        self.kind == AxisKind::Periodic
    }

    /// Period of a periodic axis (n * spacing); extent between end nodes otherwise.
    pub fn length(&self) -> f64 {
        match self.kind {
            AxisKind::Periodic => self.n as f64 * self.spacing,
            _ => (self.n - 1) as f64 * self.spacing,
        }
    }

    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.spacing
    }
}

/// Tensor-product sampling layout. Storage is row-major in axis order, so the
/// last stored axis is innermost; by convention that is the periodic axis the
/// transforms act on most.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Arc<Grid>> {
        if axes.is_empty() {
            return Err(Error::InvalidGrid("grid needs at least one axis".into()));
        }
        let mut evolution = 0;
        for a in &axes {
            if a.n < 4 {
                return Err(Error::InvalidGrid(format!("axis `{}` has {} < 4 points", a.name, a.n)));
            }
            if !(a.spacing > 0.0 && a.spacing.is_finite()) {
                return Err(Error::InvalidGrid(format!("axis `{}` has spacing {}", a.name, a.spacing)));
            }
            if a.kind == AxisKind::Periodic && !a.n.is_power_of_two() {
                return Err(Error::InvalidGrid(format!(
                    "periodic axis `{}` needs a power-of-two size, got {}",
                    a.name, a.n
                )));
            }
            if a.kind == AxisKind::Evolution {
                evolution += 1;
            }
        }
        if evolution > 1 {
            return Err(Error::InvalidGrid("at most one evolution axis".into()));
        }
        if evolution == axes.len() {
            return Err(Error::InvalidGrid("grid stores no axis".into()));
        }
        Ok(Arc::new(Grid { axes }))
    }

    /// All axes, including an evolution axis if present.
    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    /// The axes a `Field` actually stores, in storage order.
    pub fn stored_axes(&self) -> impl Iterator<Item = &Axis> {
        self.axes.iter().filter(|a| a.kind != AxisKind::Evolution)
    }

    pub fn ndim(&self) -> usize {
        self.stored_axes().count()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.stored_axes().map(|a| a.n).collect()
    }

    pub fn len(&self) -> usize {
        self.stored_axes().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn axis(&self, stored_index: usize) -> &Axis {
        self.stored_axes().nth(stored_index).expect("axis index out of range")
    }

    /// Stored index of the axis called `name`.
    pub fn axis_index(&self, name: &str) -> Option<usize> {
        self.stored_axes().position(|a| a.name == name)
    }

    pub fn cell_volume(&self) -> f64 {
        self.stored_axes().map(|a| a.spacing).product()
    }

    /// Multi-index of flat position `flat`.
    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        let shape = self.shape();
        for (k, &n) in shape.iter().enumerate().rev() {
            out[k] = flat % n;
            flat /= n;
        }
    }

    /// Node coordinates of flat position `flat`.
    pub fn coords_of(&self, flat: usize, out: &mut [f64]) {
        let mut idx = vec![0; self.ndim()];
        self.unravel(flat, &mut idx);
        for (k, a) in self.stored_axes().enumerate() {
            out[k] = a.coord(idx[k]);
        }
    }

    /// `name,n,dx,periodic-flag` entries joined by `;`.
    pub fn axis_spec(&self) -> String {
        self.stored_axes()
            .map(|a| format!("{},{},{},{}", a.name, a.n, a.spacing, u8::from(a.is_periodic())))
            .collect::<Vec<_>>()
            .join(";")
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.axis_spec())
    }
}

pub(crate) fn ensure_same(a: &Arc<Grid>, b: &Arc<Grid>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!("[{a}] vs [{b}]")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_and_non_power_of_two_periodic_axes() {
        assert!(Grid::new(vec![Axis::periodic("x", 2, 1.0)]).is_err());
        assert!(Grid::new(vec![Axis::periodic("x", 48, 1.0)]).is_err());
        assert!(Grid::new(vec![Axis::bounded("x", 48, 0.1)]).is_ok());
    }

    #[test]
    fn evolution_axis_is_not_stored() {
        let g = Grid::new(vec![
            Axis::evolution("z", 100, 0.01),
            Axis::periodic("y", 8, 2.0),
            Axis::periodic("tau", 16, 1.0),
        ])
        .unwrap();
        assert_eq!(g.shape(), vec![8, 16]);
        assert_eq!(g.len(), 128);
        assert_eq!(g.axis_index("tau"), Some(1));
        assert_eq!(g.axis_spec(), "y,8,0.25,1;tau,16,0.0625,1");
        assert!(Grid::new(vec![Axis::evolution("z", 10, 0.1), Axis::evolution("t", 10, 0.1)]).is_err());
    }

    #[test]
    fn unravel_is_row_major() {
        let g = Grid::new(vec![Axis::periodic("a", 4, 1.0), Axis::periodic("b", 8, 1.0)]).unwrap();
        let mut idx = [0; 2];
        g.unravel(13, &mut idx);
        assert_eq!(idx, [1, 5]);
    }
}
