//! Isentropic compressible Euler/Navier-Stokes with the quadratic state law,
//! on a fully periodic grid, plus the cone masks used for comparisons.
//!
//! Vector quantities carry one component per stored grid axis, in grid order.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::params::ModelParams;
use crate::spectral::{apply_symbol, dealias_symbol, deriv_symbol, mul_symbols, PeriodicOps};

/// Conserved variables `(ρ, ρu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservedState {
    pub rho: Field,
    pub momentum: Vec<Field>,
}

impl ConservedState {
    pub fn new(rho: Field, momentum: Vec<Field>) -> Result<Self> {
        if momentum.len() != rho.grid().ndim() {
            return Err(Error::GridMismatch(format!(
                "{} momentum components for a {}-dimensional grid",
                momentum.len(),
                rho.grid().ndim()
            )));
        }
        for m in &momentum {
            rho.same_grid(m)?;
        }
        check_density(rho.values(), 0.0)?;
        Ok(Self { rho, momentum })
    }

    /// Quiescent state `ρ ≡ ρ₀`, `u ≡ 0`.
    pub fn ambient(grid: Arc<Grid>, p: &ModelParams) -> Self {
        let n = grid.ndim();
        Self { rho: Field::constant(grid.clone(), p.rho0), momentum: vec![Field::zeros(grid); n] }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.rho.grid()
    }

    pub fn velocity(&self) -> Result<Vec<Field>> {
        self.momentum.iter().map(|m| m.zip_map(&self.rho, |a, r| a / r)).collect()
    }

    fn to_components(&self) -> Vec<Vec<f64>> {
        std::iter::once(self.rho.values().to_vec()).chain(self.momentum.iter().map(|m| m.values().to_vec())).collect()
    }

    fn from_components(grid: &Arc<Grid>, comps: Vec<Vec<f64>>) -> Self {
        let mut it = comps.into_iter();
        let rho = Field::from_raw(grid.clone(), it.next().unwrap());
        Self { rho, momentum: it.map(|v| Field::from_raw(grid.clone(), v)).collect() }
    }
}

fn check_density(rho: &[f64], at: f64) -> Result<()> {
    let min = rho.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > 0.0 && min.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveDensity { value: min, variable: "t", at })
    }
}

#[inline]
fn pressure_value(rho: f64, p: &ModelParams, p0: f64) -> f64 {
    let d = rho - p.rho0;
    p0 + p.c * p.c * d + (p.gamma - 1.0) * p.c * p.c / (2.0 * p.rho0) * d * d
}

#[inline]
fn sound_speed(rho: f64, p: &ModelParams) -> f64 {
    // p'(ρ) = c² + (γ−1)c²(ρ−ρ₀)/ρ₀
    (p.c * p.c * (1.0 + (p.gamma - 1.0) * (rho - p.rho0) / p.rho0)).max(0.0).sqrt()
}

/// `p(ρ) = c²(ρ−ρ₀) + ((γ−1)c²/2ρ₀)(ρ−ρ₀)²` (additive constant 0).
pub fn pressure(rho: &Field, p: &ModelParams) -> Result<Field> {
    pressure_with_offset(rho, p, 0.0)
}

pub fn pressure_with_offset(rho: &Field, p: &ModelParams, p0: f64) -> Result<Field> {
    check_density(rho.values(), 0.0)?;
    rho.map(|r| pressure_value(r, p, p0))
}

/// Fluxes `F_d(U) = (m_d, m m_d/ρ + p e_d)`: `flux[d][k]` is component `k`
/// (0 = mass, 1.. = momentum) of the flux along axis `d`.
pub fn euler_flux(u: &ConservedState, p: &ModelParams) -> Result<Vec<Vec<Field>>> {
    check_density(u.rho.values(), 0.0)?;
    let g = u.grid();
    let nd = g.ndim();
    let rho = u.rho.values();
    let mut out = Vec::with_capacity(nd);
    for d in 0..nd {
        let md = u.momentum[d].values();
        let mut comps = vec![Field::from_raw(g.clone(), md.to_vec())];
        for k in 0..nd {
            let mk = u.momentum[k].values();
            let v = (0..rho.len())
                .map(|j| mk[j] * md[j] / rho[j] + if k == d { pressure_value(rho[j], p, 0.0) } else { 0.0 })
                .collect();
            comps.push(Field::from_raw(g.clone(), v));
        }
        out.push(comps);
    }
    Ok(out)
}

/// Spatial discretisation of the hyperbolic part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HydroScheme {
    /// Finite volumes: MUSCL reconstruction with the minmod limiter,
    /// Rusanov flux, SSP-RK2 in time; viscous term by centred differences.
    #[default]
    Muscl,
    /// Fourier collocation with a 2/3-rule filtered right-hand side and RK4;
    /// viscous term spectral. For smooth, well-resolved data only.
    Pseudospectral,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HydroOptions {
    pub scheme: HydroScheme,
    /// Courant number applied to `Σ_d max(|u_d| + c_loc)/dx_d`.
    pub cfl: f64,
    /// Include the `εν Δu` momentum term.
    pub viscous: bool,
}

impl Default for HydroOptions {
    fn default() -> Self {
        Self { scheme: HydroScheme::Muscl, cfl: 0.5, viscous: true }
    }
}

/// Largest stable time step for this state.
pub fn hydro_dt_limit(u: &ConservedState, p: &ModelParams, opts: &HydroOptions) -> Result<f64> {
    check_density(u.rho.values(), 0.0)?;
    let g = u.grid();
    let rho = u.rho.values();
    let mut rate = 0.0f64;
    let mut inv_dx2 = 0.0;
    for d in 0..g.ndim() {
        let dx = g.axis(d).spacing;
        let m = u.momentum[d].values();
        let s = (0..rho.len()).map(|j| (m[j] / rho[j]).abs() + sound_speed(rho[j], p)).fold(0.0, f64::max);
        rate += s / dx;
        inv_dx2 += 1.0 / (dx * dx);
    }
    let mut limit = opts.cfl / rate;
    if opts.viscous && p.nu > 0.0 {
        let rho_min = rho.iter().cloned().fold(f64::INFINITY, f64::min);
        let diffusivity = p.eps * p.nu / rho_min;
        let factor = match opts.scheme {
            HydroScheme::Muscl => 0.25,
            HydroScheme::Pseudospectral => 0.25 * 4.0 / (std::f64::consts::PI * std::f64::consts::PI) * 2.5,
        };
        limit = limit.min(factor / (diffusivity * inv_dx2));
    }
    Ok(limit)
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Semi-discrete right-hand side `−∇·F(U) + εν[0; Δu]`, component-major.
struct Rhs<'a> {
    grid: &'a Arc<Grid>,
    params: ModelParams,
    opts: HydroOptions,
    spectral: Option<(PeriodicOps, Vec<Vec<rustfft::num_complex::Complex64>>)>,
}

impl<'a> Rhs<'a> {
    fn new(grid: &'a Arc<Grid>, params: ModelParams, opts: HydroOptions) -> Result<Self> {
        let ops = PeriodicOps::all(grid)?;
        let spectral = match opts.scheme {
            HydroScheme::Muscl => None,
            HydroScheme::Pseudospectral => {
                let symbols = ops
                    .axes
                    .iter()
                    .map(|&(axis, length)| {
                        let n = grid.shape()[axis];
                        mul_symbols(&dealias_symbol(n), &deriv_symbol(n, length, 1))
                    })
                    .collect();
                Some((ops, symbols))
            }
        };
        Ok(Self { grid, params, opts, spectral })
    }

    fn eval(&self, u: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut out = match &self.spectral {
            None => self.muscl_divergence(u),
            Some((ops, symbols)) => self.spectral_divergence(u, ops, symbols),
        };
        if self.opts.viscous && self.params.nu > 0.0 {
            self.add_viscous(u, &mut out);
        }
        out
    }

    fn muscl_divergence(&self, u: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let shape = self.grid.shape();
        let nd = shape.len();
        let nc = nd + 1;
        let len = u[0].len();
        let mut out = vec![vec![0.0; len]; nc];
        let p = &self.params;
        for d in 0..nd {
            let n = shape[d];
            let inner: usize = shape[d + 1..].iter().product();
            let outer: usize = shape[..d].iter().product();
            let dx = self.grid.axis(d).spacing;
            let mut line = vec![vec![0.0; n]; nc];
            let mut flux = vec![vec![0.0; n]; nc];
            let mut left = vec![0.0; nc];
            let mut right = vec![0.0; nc];
            let mut fl = vec![0.0; nc];
            let mut fr = vec![0.0; nc];
            for o in 0..outer {
                for i in 0..inner {
                    let base = o * n * inner + i;
                    for c in 0..nc {
                        for j in 0..n {
                            line[c][j] = u[c][base + j * inner];
                        }
                    }
                    // Interface j+1/2 between cells j and j+1.
                    for j in 0..n {
                        let (jm, jp, jpp) = ((j + n - 1) % n, (j + 1) % n, (j + 2) % n);
                        for c in 0..nc {
                            let l = &line[c];
                            left[c] = l[j] + 0.5 * minmod(l[j] - l[jm], l[jp] - l[j]);
                            right[c] = l[jp] - 0.5 * minmod(l[jp] - l[j], l[jpp] - l[jp]);
                        }
                        let sl = physical_flux(&left, d, p, &mut fl);
                        let sr = physical_flux(&right, d, p, &mut fr);
                        let a = sl.max(sr);
                        for c in 0..nc {
                            flux[c][j] = 0.5 * (fl[c] + fr[c]) - 0.5 * a * (right[c] - left[c]);
                        }
                    }
                    for c in 0..nc {
                        for j in 0..n {
                            let jm = (j + n - 1) % n;
                            out[c][base + j * inner] -= (flux[c][j] - flux[c][jm]) / dx;
                        }
                    }
                }
            }
        }
        out
    }

    fn spectral_divergence(
        &self,
        u: &[Vec<f64>],
        ops: &PeriodicOps,
        symbols: &[Vec<rustfft::num_complex::Complex64>],
    ) -> Vec<Vec<f64>> {
        let shape = &ops.shape;
        let nd = shape.len();
        let len = u[0].len();
        let p = &self.params;
        let rho = &u[0];
        let mut out = vec![vec![0.0; len]; nd + 1];
        for d in 0..nd {
            let axis = ops.axes[d].0;
            let md = &u[1 + d];
            for c in 0..=nd {
                let mut f: Vec<f64> = if c == 0 {
                    md.clone()
                } else {
                    let mk = &u[c];
                    (0..len)
                        .map(|j| mk[j] * md[j] / rho[j] + if c == 1 + d { pressure_value(rho[j], p, 0.0) } else { 0.0 })
                        .collect()
                };
                apply_symbol(&mut f, shape, axis, &symbols[d]);
                for (o, x) in out[c].iter_mut().zip(f) {
                    *o -= x;
                }
            }
        }
        out
    }

    fn add_viscous(&self, u: &[Vec<f64>], out: &mut [Vec<f64>]) {
        let shape = self.grid.shape();
        let nd = shape.len();
        let k = self.params.eps * self.params.nu;
        for c in 0..nd {
            let vel: Vec<f64> = u[1 + c].iter().zip(&u[0]).map(|(m, r)| m / r).collect();
            let lap = match &self.spectral {
                Some((ops, _)) => ops.laplacian(&vel),
                None => centred_laplacian(&vel, &shape, self.grid),
            };
            for (o, l) in out[1 + c].iter_mut().zip(lap) {
                *o += k * l;
            }
        }
    }
}

/// Returns the largest signal speed and writes the flux along `d` into `f`.
fn physical_flux(u: &[f64], d: usize, p: &ModelParams, f: &mut [f64]) -> f64 {
    let rho = u[0];
    let ud = u[1 + d] / rho;
    f[0] = u[1 + d];
    for k in 1..u.len() {
        f[k] = u[k] * ud;
    }
    f[1 + d] += pressure_value(rho, p, 0.0);
    ud.abs() + sound_speed(rho, p)
}

fn centred_laplacian(v: &[f64], shape: &[usize], grid: &Grid) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for d in 0..shape.len() {
        let n = shape[d];
        let inner: usize = shape[d + 1..].iter().product();
        let outer: usize = shape[..d].iter().product();
        let h2 = grid.axis(d).spacing.powi(2);
        for o in 0..outer {
            for i in 0..inner {
                let base = o * n * inner + i;
                for j in 0..n {
                    let at = |k: usize| v[base + (k % n) * inner];
                    out[base + j * inner] += (at(j + 1) - 2.0 * at(j) + at(j + n - 1)) / h2;
                }
            }
        }
    }
    out
}

fn axpy(y: &[Vec<f64>], a: f64, k: &[Vec<f64>]) -> Vec<Vec<f64>> {
    y.iter().zip(k).map(|(yc, kc)| yc.iter().zip(kc).map(|(u, v)| u + a * v).collect()).collect()
}

fn advance(rhs: &Rhs, u: Vec<Vec<f64>>, dt: f64, t: f64) -> Result<Vec<Vec<f64>>> {
    let next: Vec<Vec<f64>> = match rhs.opts.scheme {
        HydroScheme::Muscl => {
            let u1 = axpy(&u, dt, &rhs.eval(&u));
            check_density(&u1[0], t)?;
            let u2 = axpy(&u1, dt, &rhs.eval(&u1));
            u.iter().zip(&u2).map(|(a, b)| a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()).collect()
        }
        HydroScheme::Pseudospectral => {
            let k1 = rhs.eval(&u);
            let y2 = axpy(&u, 0.5 * dt, &k1);
            check_density(&y2[0], t)?;
            let k2 = rhs.eval(&y2);
            let y3 = axpy(&u, 0.5 * dt, &k2);
            check_density(&y3[0], t)?;
            let k3 = rhs.eval(&y3);
            let y4 = axpy(&u, dt, &k3);
            check_density(&y4[0], t)?;
            let k4 = rhs.eval(&y4);
            (0..u.len())
                .map(|c| (0..u[c].len()).map(|j| u[c][j] + dt / 6.0 * (k1[c][j] + 2.0 * k2[c][j] + 2.0 * k3[c][j] + k4[c][j])).collect())
                .collect()
        }
    };
    check_density(&next[0], t)?;
    if next.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { variable: "t", last_good: t });
    }
    Ok(next)
}

/// One time step of length `dt` (default MUSCL scheme, viscous term on).
pub fn step_hydro(u: &ConservedState, p: &ModelParams, dt: f64) -> Result<ConservedState> {
    step_hydro_with(u, p, dt, &HydroOptions::default())
}

pub fn step_hydro_with(u: &ConservedState, p: &ModelParams, dt: f64, opts: &HydroOptions) -> Result<ConservedState> {
    let limit = hydro_dt_limit(u, p, opts)?;
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, limit });
    }
    let rhs = Rhs::new(u.grid(), *p, *opts)?;
    Ok(ConservedState::from_components(u.grid(), advance(&rhs, u.to_components(), dt, 0.0)?))
}

/// Totals recorded in the conservation ledger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerRow {
    pub t: f64,
    pub mass: f64,
    /// Total momentum along each axis (up to three are recorded).
    pub momentum: [f64; 3],
    pub energy: f64,
}

/// Mass, total momentum and `Σ(½|m|²/ρ + G(ρ))ΔV`, where `G` is the internal
/// energy density of the quadratic state law.
pub fn conserved_totals(u: &ConservedState, p: &ModelParams, t: f64) -> LedgerRow {
    let dv = u.grid().cell_volume();
    let rho = u.rho.values();
    let mut momentum = [0.0; 3];
    for (d, m) in u.momentum.iter().enumerate().take(3) {
        momentum[d] = m.values().iter().sum::<f64>() * dv;
    }
    let a = (p.gamma - 1.0) * p.c * p.c / (2.0 * p.rho0);
    let r0 = p.rho0;
    let energy = (0..rho.len())
        .map(|j| {
            let r = rho[j];
            let kinetic: f64 = u.momentum.iter().map(|m| m.values()[j].powi(2)).sum::<f64>() / (2.0 * r);
            let lr = (r / r0).ln();
            let internal = r * (p.c * p.c * (lr + r0 / r - 1.0) + a * ((r - r0) - 2.0 * r0 * lr - r0 * r0 / r + r0));
            kinetic + internal
        })
        .sum::<f64>()
        * dv;
    LedgerRow { t, mass: rho.iter().sum::<f64>() * dv, momentum, energy }
}

/// Result of a march: states at the requested output times and the ledger.
#[derive(Debug, Clone)]
pub struct HydroRun {
    pub snapshots: Vec<(f64, ConservedState)>,
    pub ledger: Vec<LedgerRow>,
    pub steps: usize,
}

/// Marches to `t_end`, landing exactly on each of `output_times` (sorted,
/// within `[0, t_end]`), with the largest stable step otherwise.
pub fn solve_hydro(u0: &ConservedState, p: &ModelParams, t_end: f64, output_times: &[f64], opts: &HydroOptions) -> Result<HydroRun> {
    let mut snapshots = Vec::new();
    let mut ledger = Vec::new();
    let steps = march_hydro(u0, p, t_end, output_times, opts, |t, u| {
        snapshots.push((t, u.clone()));
        Ok(())
    }, |row| ledger.push(row))?;
    Ok(HydroRun { snapshots, ledger, steps })
}

/// Streaming form of [`solve_hydro`]: `observe(t, state)` is called at each
/// output time and `record` after every step (and once for the initial state).
/// Returns the number of steps taken.
pub fn march_hydro(
    u0: &ConservedState,
    p: &ModelParams,
    t_end: f64,
    output_times: &[f64],
    opts: &HydroOptions,
    mut observe: impl FnMut(f64, &ConservedState) -> Result<()>,
    mut record: impl FnMut(LedgerRow),
) -> Result<usize> {
    p.validate()?;
    if output_times.windows(2).any(|w| w[1] < w[0]) || output_times.iter().any(|&t| t < 0.0 || t > t_end) {
        return Err(Error::Param { name: "output_times", reason: "must be sorted and inside [0, t_end]".into() });
    }
    let grid = u0.grid().clone();
    let rhs = Rhs::new(&grid, *p, *opts)?;
    let mut state = u0.clone();
    let mut comps = u0.to_components();
    let mut t = 0.0;
    let mut next_out = 0;
    let mut steps = 0;
    record(conserved_totals(&state, p, t));
    while next_out < output_times.len() && output_times[next_out] <= 0.0 {
        observe(0.0, &state)?;
        next_out += 1;
    }
    while t < t_end * (1.0 - 1e-14) {
        let mut dt = hydro_dt_limit(&state, p, opts)?;
        let target = if next_out < output_times.len() { output_times[next_out] } else { t_end };
        let mut hit = false;
        if t + dt >= target * (1.0 - 1e-14) {
            dt = target - t;
            hit = next_out < output_times.len();
        }
        if dt <= 0.0 {
            break;
        }
        comps = advance(&rhs, comps, dt, t).map_err(|e| match e {
            Error::NonPositiveDensity { value, variable, .. } => Error::NonPositiveDensity { value, variable, at: t },
            other => other,
        })?;
        t = if hit || target == t_end && (t + dt - t_end).abs() < 1e-12 * t_end.max(1.0) { target } else { t + dt };
        steps += 1;
        state = ConservedState::from_components(&grid, comps.clone());
        record(conserved_totals(&state, p, t));
        while next_out < output_times.len() && output_times[next_out] <= t * (1.0 + 1e-14) {
            observe(output_times[next_out], &state)?;
            next_out += 1;
        }
    }
    Ok(steps)
}

/// Runs exactly `steps` steps of fixed size `dt`, returning the final state and ledger.
pub fn march_fixed(u0: &ConservedState, p: &ModelParams, dt: f64, steps: usize, opts: &HydroOptions) -> Result<(ConservedState, Vec<LedgerRow>)> {
    let grid = u0.grid().clone();
    let rhs = Rhs::new(&grid, *p, *opts)?;
    let limit = hydro_dt_limit(u0, p, opts)?;
    if !(dt > 0.0) || dt > limit {
        return Err(Error::CflViolation { dt, limit });
    }
    let mut comps = u0.to_components();
    let mut ledger = vec![conserved_totals(u0, p, 0.0)];
    for s in 1..=steps {
        let t = (s - 1) as f64 * dt;
        comps = advance(&rhs, comps, dt, t)?;
        let st = ConservedState::from_components(&grid, comps.clone());
        ledger.push(conserved_totals(&st, p, s as f64 * dt));
    }
    Ok((ConservedState::from_components(&grid, comps), ledger))
}

/// The shrinking region `|x₁ − centre| ≤ K/ε − M t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub k: f64,
    pub m: f64,
    pub eps: f64,
    /// Position of the cone axis along x₁.
    pub center: f64,
}

impl ConeSpec {
    pub fn new(k: f64, m: f64, eps: f64, center: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::Param { name: "K", reason: format!("must be positive, got {k}") });
        }
        if !(m > 0.0) {
            return Err(Error::Param { name: "M", reason: format!("must be positive, got {m}") });
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Param { name: "eps", reason: format!("must lie in (0, 1), got {eps}") });
        }
        Ok(Self { k, m, eps, center })
    }

    /// Requires the slope to dominate the sound speed.
    pub fn check_slope(&self, p: &ModelParams) -> Result<()> {
        if self.m < p.c {
            return Err(Error::Param { name: "M", reason: format!("cone slope {} is below the sound speed {}", self.m, p.c) });
        }
        Ok(())
    }

    pub fn apex_time(&self) -> f64 {
        self.k / (self.eps * self.m)
    }

    pub fn half_width(&self, t: f64) -> f64 {
        self.k / self.eps - self.m * t
    }
}

/// Indicator of the cone section at time `t` on a grid whose last axis is x₁.
pub fn cone_mask(spec: &ConeSpec, t: f64, grid: &Arc<Grid>) -> Result<Field> {
    if t >= spec.apex_time() {
        return Err(Error::EmptyCone { t, apex: spec.apex_time() });
    }
    let x1 = grid.ndim() - 1;
    let w = spec.half_width(t);
    Field::from_fn(grid.clone(), |x| if (x[x1] - spec.center).abs() <= w { 1.0 } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;

    #[test]
    fn pressure_example() {
        let p = ModelParams { rho0: 1.0, c: 1.0, gamma: 3.0, nu: 0.0, eps: 0.1, period: 1.0 };
        let g = Grid::new(vec![Axis::periodic("x", 4, 1.0)]).unwrap();
        let v = pressure(&Field::constant(g.clone(), 1.1), &p).unwrap();
        assert!((v.values()[0] - 0.11).abs() < 1e-14);
        assert_eq!(pressure(&Field::constant(g.clone(), 1.0), &p).unwrap().max_abs(), 0.0);
        assert!(matches!(pressure(&Field::constant(g, 0.0), &p), Err(Error::NonPositiveDensity { .. })));
    }

    #[test]
    fn sound_speed_is_pressure_slope() {
        let p = ModelParams { rho0: 1.2, c: 1.5, gamma: 1.4, nu: 0.0, eps: 0.1, period: 1.0 };
        let h = 1e-6;
        let slope = (pressure_value(p.rho0 + h, &p, 0.0) - pressure_value(p.rho0 - h, &p, 0.0)) / (2.0 * h);
        assert!((slope - p.c * p.c).abs() < 1e-6 * p.c * p.c);
        assert!((sound_speed(p.rho0, &p) - p.c).abs() < 1e-15);
    }

    #[test]
    fn cone_example() {
        let spec = ConeSpec::new(1.0, 2.0, 0.1, 0.0).unwrap();
        assert!((spec.half_width(1.0) - 8.0).abs() < 1e-14);
        let g = Grid::new(vec![Axis::periodic("x1", 64, 32.0)]).unwrap();
        assert!(matches!(cone_mask(&spec, 5.0, &g), Err(Error::EmptyCone { .. })));
        let m = cone_mask(&spec, 1.0, &g).unwrap();
        // Nodes 0, 0.5, …, 8.0 lie inside.
        assert_eq!(m.values().iter().sum::<f64>(), 17.0);
    }

    #[test]
    fn uniform_state_is_steady() {
        let p = ModelParams { rho0: 1.0, c: 1.0, gamma: 1.4, nu: 0.1, eps: 0.1, period: 1.0 };
        let g = Grid::new(vec![Axis::periodic("y", 8, 1.0), Axis::periodic("x", 16, 1.0)]).unwrap();
        let u = ConservedState::new(Field::constant(g.clone(), 1.3), vec![Field::constant(g.clone(), 0.2), Field::constant(g, -0.1)]).unwrap();
        for scheme in [HydroScheme::Muscl, HydroScheme::Pseudospectral] {
            let opts = HydroOptions { scheme, ..Default::default() };
            let dt = hydro_dt_limit(&u, &p, &opts).unwrap();
            let next = step_hydro_with(&u, &p, dt, &opts).unwrap();
            assert!(next.rho.sub(&u.rho).unwrap().max_abs() < 1e-14);
            for (a, b) in next.momentum.iter().zip(&u.momentum) {
                assert!(a.sub(b).unwrap().max_abs() < 1e-14);
            }
        }
    }
}
