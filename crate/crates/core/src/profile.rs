use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;

/// One stored point of a march: the state and its evolution rate.
#[derive(Debug, Clone)]
pub struct ProfileSlice {
    pub at: f64,
    pub values: Vec<Field>,
    pub rates: Vec<Field>,
}

/// A model profile stored along its evolution variable (z, τ or t).
///
/// Each slice holds one Field per state component (one for KZK and NPE,
/// `phi` and `phi_t` for Kuznetsov) together with the derivative with
/// respect to the evolution variable, which lets [`ProfileSolution::at`]
/// use cubic Hermite interpolation between slices.
#[derive(Debug, Clone)]
pub struct ProfileSolution {
    pub variable: &'static str,
    pub components: Vec<&'static str>,
    pub slices: Vec<ProfileSlice>,
}

impl ProfileSolution {
    pub fn grid(&self) -> &Arc<Grid> {
        self.slices[0].values[0].grid()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.slices[0].at, self.slices.last().unwrap().at)
    }

    pub fn first(&self) -> &Field {
        &self.slices[0].values[0]
    }

    pub fn last(&self) -> &Field {
        &self.slices.last().unwrap().values[0]
    }

    pub fn last_slice(&self) -> &ProfileSlice {
        self.slices.last().unwrap()
    }

    /// Index `i` with `slices[i].at <= s <= slices[i+1].at`, or an error if `s` is outside.
    fn bracket(&self, s: f64) -> Result<usize> {
        let (lo, hi) = self.range();
        let slack = 1e-12 * (hi - lo).abs().max(1.0);
        if !(s >= lo - slack && s <= hi + slack) {
            return Err(Error::DomainExceeded { coordinate: self.variable, value: s, lo, hi });
        }
        if self.slices.len() == 1 {
            return Ok(0);
        }
        let i = self.slices.partition_point(|sl| sl.at <= s);
        Ok(i.saturating_sub(1).min(self.slices.len() - 2))
    }

    /// Component `component` at evolution coordinate `s` (cubic Hermite in `s`).
    pub fn component_at(&self, component: usize, s: f64) -> Result<Field> {
        let i = self.bracket(s)?;
        if self.slices.len() == 1 {
            return Ok(self.slices[0].values[component].clone());
        }
        let (a, b) = (&self.slices[i], &self.slices[i + 1]);
        let h = b.at - a.at;
        let x = ((s - a.at) / h).clamp(0.0, 1.0);
        let (x2, x3) = (x * x, x * x * x);
        let h00 = 2.0 * x3 - 3.0 * x2 + 1.0;
        let h10 = x3 - 2.0 * x2 + x;
        let h01 = -2.0 * x3 + 3.0 * x2;
        let h11 = x3 - x2;
        let (ya, yb) = (a.values[component].values(), b.values[component].values());
        let (ra, rb) = (a.rates[component].values(), b.rates[component].values());
        let v = (0..ya.len())
            .map(|j| h00 * ya[j] + h * h10 * ra[j] + h01 * yb[j] + h * h11 * rb[j])
            .collect();
        Ok(Field::from_raw(a.values[component].grid().clone(), v))
    }

    /// Same as `component_at` but for the rate.
    pub fn rate_at(&self, component: usize, s: f64) -> Result<Field> {
        let i = self.bracket(s)?;
        if self.slices.len() == 1 {
            return Ok(self.slices[0].rates[component].clone());
        }
        let (a, b) = (&self.slices[i], &self.slices[i + 1]);
        let h = b.at - a.at;
        let x = ((s - a.at) / h).clamp(0.0, 1.0);
        // Derivative of the Hermite cubic.
        let d00 = (6.0 * x * x - 6.0 * x) / h;
        let d10 = 3.0 * x * x - 4.0 * x + 1.0;
        let d01 = -d00;
        let d11 = 3.0 * x * x - 2.0 * x;
        let (ya, yb) = (a.values[component].values(), b.values[component].values());
        let (ra, rb) = (a.rates[component].values(), b.rates[component].values());
        let v = (0..ya.len())
            .map(|j| d00 * ya[j] + d10 * ra[j] + d01 * yb[j] + d11 * rb[j])
            .collect();
        Ok(Field::from_raw(a.values[component].grid().clone(), v))
    }

    /// Value and rate of one component at a single flat index, interpolated in `s`.
    pub fn point_at(&self, component: usize, s: f64, index: usize) -> Result<(f64, f64)> {
        let i = self.bracket(s)?;
        if self.slices.len() == 1 {
            let sl = &self.slices[0];
            return Ok((sl.values[component].values()[index], sl.rates[component].values()[index]));
        }
        let (a, b) = (&self.slices[i], &self.slices[i + 1]);
        let h = b.at - a.at;
        let x = ((s - a.at) / h).clamp(0.0, 1.0);
        let (ya, yb) = (a.values[component].values()[index], b.values[component].values()[index]);
        let (ra, rb) = (a.rates[component].values()[index], b.rates[component].values()[index]);
        let (x2, x3) = (x * x, x * x * x);
        let value = (2.0 * x3 - 3.0 * x2 + 1.0) * ya + h * (x3 - 2.0 * x2 + x) * ra + (-2.0 * x3 + 3.0 * x2) * yb + h * (x3 - x2) * rb;
        let rate = (6.0 * x2 - 6.0 * x) / h * (ya - yb) + (3.0 * x2 - 4.0 * x + 1.0) * ra + (3.0 * x2 - 2.0 * x) * rb;
        Ok((value, rate))
    }

    pub fn at(&self, s: f64) -> Result<Field> {
        self.component_at(0, s)
    }
}
