//! Classical RK4 marching shared by the profile solvers.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::profile::{ProfileSlice, ProfileSolution};

/// Outcome of a march that may stop early. `solution` always holds every
/// state accepted before the failure.
#[derive(Debug, Clone)]
pub struct MarchOutcome {
    pub solution: ProfileSolution,
    pub failure: Option<Error>,
}

impl MarchOutcome {
    pub fn into_result(self) -> Result<ProfileSolution> {
        match self.failure {
            None => Ok(self.solution),
            Some(e) => Err(e),
        }
    }
}

pub(crate) struct MarchSpec {
    pub variable: &'static str,
    pub components: Vec<&'static str>,
    pub start: f64,
    pub end: f64,
    pub max_step: f64,
    /// Store every `store_every`-th step (the final state is always stored).
    pub store_every: usize,
    /// Abort when the sup norm of component 0 exceeds this multiple of its initial value.
    pub blowup_factor: Option<f64>,
}

/// Number of uniform steps no longer than `max_step` covering `[start, end]`.
pub(crate) fn step_count(start: f64, end: f64, max_step: f64) -> usize {
    let n = ((end - start).abs() / max_step * (1.0 - 1e-12)).ceil();
    (n as usize).max(1)
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Rewrites the evolution coordinate of a numerical failure raised inside an rhs call.
fn at_last_good(e: Error, variable: &'static str, last_good: f64) -> Error {
    match e {
        Error::NonFinite { .. } => Error::NonFinite { variable, last_good },
        Error::BlowUp { factor, .. } => Error::BlowUp { variable, last_good, factor },
        Error::NonPositiveDensity { value, .. } => Error::NonPositiveDensity { value, variable, at: last_good },
        other => other,
    }
}

/// RK4 on a list of equally-shaped components. `rhs(s, state)` returns the
/// rate of every component.
pub(crate) fn rk4_march<F>(grid: &Arc<Grid>, initial: Vec<Vec<f64>>, spec: &MarchSpec, mut rhs: F) -> MarchOutcome
where
    F: FnMut(f64, &[Vec<f64>]) -> Result<Vec<Vec<f64>>>,
{
    let steps = if spec.end == spec.start { 0 } else { step_count(spec.start, spec.end, spec.max_step) };
    let h = if steps == 0 { 0.0 } else { (spec.end - spec.start) / steps as f64 };
    let to_fields = |v: &[Vec<f64>]| -> Vec<Field> { v.iter().map(|c| Field::from_raw(grid.clone(), c.clone())).collect() };
    let mut solution = ProfileSolution { variable: spec.variable, components: spec.components.clone(), slices: Vec::new() };
    let initial_sup = sup(&initial[0]);

    let mut y = initial;
    let mut s = spec.start;
    let mut rate = match rhs(s, &y) {
        Ok(r) => r,
        Err(e) => {
            let e = at_last_good(e, spec.variable, s);
            solution.slices.push(ProfileSlice { at: s, values: to_fields(&y), rates: to_fields(&y) });
            return MarchOutcome { solution, failure: Some(e) };
        }
    };
    solution.slices.push(ProfileSlice { at: s, values: to_fields(&y), rates: to_fields(&rate) });

    let combine = |y: &[Vec<f64>], k: &[Vec<f64>], a: f64| -> Vec<Vec<f64>> {
        y.iter().zip(k).map(|(yc, kc)| yc.iter().zip(kc).map(|(u, v)| u + a * v).collect()).collect()
    };

    for step in 1..=steps {
        let attempt = (|| -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
            let k1 = &rate;
            let k2 = rhs(s + 0.5 * h, &combine(&y, k1, 0.5 * h))?;
            let k3 = rhs(s + 0.5 * h, &combine(&y, &k2, 0.5 * h))?;
            let k4 = rhs(s + h, &combine(&y, &k3, h))?;
            let next: Vec<Vec<f64>> = (0..y.len())
                .map(|c| {
                    (0..y[c].len())
                        .map(|j| y[c][j] + h / 6.0 * (k1[c][j] + 2.0 * k2[c][j] + 2.0 * k3[c][j] + k4[c][j]))
                        .collect()
                })
                .collect();
            if next.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { variable: spec.variable, last_good: s });
            }
            if let Some(factor) = spec.blowup_factor {
                if initial_sup > 0.0 && sup(&next[0]) > factor * initial_sup {
                    return Err(Error::BlowUp { variable: spec.variable, last_good: s, factor });
                }
            }
            let s_next = spec.start + step as f64 * h;
            let r = rhs(s_next, &next)?;
            Ok((next, r))
        })();
        match attempt {
            Ok((next, r)) => {
                y = next;
                rate = r;
                s = spec.start + step as f64 * h;
                if step % spec.store_every.max(1) == 0 || step == steps {
                    solution.slices.push(ProfileSlice { at: s, values: to_fields(&y), rates: to_fields(&rate) });
                }
            }
            Err(e) => {
                let e = at_last_good(e, spec.variable, s);
                if solution.slices.last().map(|sl| sl.at) != Some(s) {
                    solution.slices.push(ProfileSlice { at: s, values: to_fields(&y), rates: to_fields(&rate) });
                }
                return MarchOutcome { solution, failure: Some(e) };
            }
        }
    }
    MarchOutcome { solution, failure: None }
}
