//! NPE equation as an evolution in slow time for `q = ∂_zΨ`, its density
//! correctors, and the coordinate map between KZK and NPE variables.
//!
//! NPE profile grids store the transverse axes first and the periodic
//! propagation variable z last.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{Axis, Grid};
use crate::kzk::{kzk_rate, ProfileOps, BLOWUP_FACTOR};
use crate::march::{rk4_march, MarchOutcome, MarchSpec};
use crate::params::{ModelParams, Terms};
use crate::profile::ProfileSolution;
use crate::spectral::{check_zero_mean, remove_line_means};

#[derive(Debug, Clone)]
pub struct NpeProfile {
    /// `q = ∂_zΨ` on a (y…, z) grid.
    pub q: Field,
    pub tau: f64,
}

impl NpeProfile {
    pub fn new(q: Field, tau: f64) -> Result<Self> {
        ProfileOps::new(q.grid())?;
        Ok(Self { q, tau })
    }
}

pub(crate) fn npe_rate(ops: &ProfileOps, p: &ModelParams, terms: Terms, q: &[f64]) -> Vec<f64> {
    let ModelParams { rho0, c, gamma, nu, .. } = *p;
    let mut out = if terms.nonlinear { ops.d_tau_square(q, (gamma + 1.0) / 4.0) } else { vec![0.0; q.len()] };
    if terms.viscous && nu > 0.0 {
        for (o, d) in out.iter_mut().zip(ops.d2_tau(q)) {
            *o += nu / (2.0 * rho0) * d;
        }
    }
    if terms.diffraction && !ops.transverse.axes.is_empty() {
        for (o, d) in out.iter_mut().zip(ops.laplacian_y(&ops.inv_tau(q))) {
            *o -= 0.5 * c * d;
        }
    }
    out
}

/// `∂_τq = ((γ+1)/4)∂_z(q²) + (ν/2ρ₀)∂²_zq − (c/2)Δ_y∂_z⁻¹q`.
pub fn npe_rhs(prof: &NpeProfile, p: &ModelParams) -> Result<Field> {
    npe_rhs_with(prof, p, Terms::default())
}

pub fn npe_rhs_with(prof: &NpeProfile, p: &ModelParams, terms: Terms) -> Result<Field> {
    let ops = ProfileOps::new(prof.q.grid())?;
    check_zero_mean(prof.q.values(), &ops.shape, ops.tau_axis)?;
    Field::from_raw(prof.q.grid().clone(), npe_rate(&ops, p, terms, prof.q.values())).check_finite("tau", prof.tau)
}

#[derive(Debug, Clone, Copy)]
pub struct NpeOptions {
    pub terms: Terms,
    pub store_every: usize,
    pub blowup_factor: f64,
}

impl Default for NpeOptions {
    fn default() -> Self {
        Self { terms: Terms::default(), store_every: 1, blowup_factor: BLOWUP_FACTOR }
    }
}

pub fn solve_npe(q0: &Field, p: &ModelParams, tau_end: f64, dtau: f64) -> Result<ProfileSolution> {
    solve_npe_with(q0, p, tau_end, dtau, &NpeOptions::default())?.into_result()
}

pub fn solve_npe_with(q0: &Field, p: &ModelParams, tau_end: f64, dtau: f64, opts: &NpeOptions) -> Result<MarchOutcome> {
    p.validate()?;
    if !(dtau > 0.0) || !(tau_end >= 0.0) {
        return Err(Error::Param { name: "dtau", reason: format!("need dtau > 0 and tau_end ≥ 0, got {dtau}, {tau_end}") });
    }
    let ops = ProfileOps::new(q0.grid())?;
    check_zero_mean(q0.values(), &ops.shape, ops.tau_axis)?;
    let spec = MarchSpec {
        variable: "tau",
        components: vec!["q"],
        start: 0.0,
        end: tau_end,
        max_step: dtau,
        store_every: opts.store_every,
        blowup_factor: Some(opts.blowup_factor),
    };
    let (p, terms) = (*p, opts.terms);
    Ok(rk4_march(q0.grid(), vec![q0.values().to_vec()], &spec, |_, y| Ok(vec![npe_rate(&ops, &p, terms, &y[0])])))
}

/// `P₁ = (ρ₀/c)q` and `P₂ = (ρ₀/c⁴)∂_τΨ − (ρ₀(γ+3)/2c²)q² − (ν/c²)∂_zq`,
/// with `∂_τΨ = ∂_z⁻¹(∂_τq)`.
pub fn npe_correctors(prof: &NpeProfile, p: &ModelParams) -> Result<(Field, Field)> {
    let ops = ProfileOps::new(prof.q.grid())?;
    check_zero_mean(prof.q.values(), &ops.shape, ops.tau_axis)?;
    let ModelParams { rho0, c, gamma, nu, .. } = *p;
    let q = prof.q.values();
    let psi_tau = ops.inv_tau(&npe_rate(&ops, p, Terms::default(), q));
    let q_z = ops.d_tau(q);
    let p2 = (0..q.len())
        .map(|j| rho0 / c.powi(4) * psi_tau[j] - rho0 * (gamma + 3.0) / (2.0 * c * c) * q[j] * q[j] - nu / (c * c) * q_z[j])
        .collect();
    let g = prof.q.grid().clone();
    Ok((prof.q.scale(rho0 / c)?, Field::from_raw(g, p2).check_finite("tau", prof.tau)?))
}

/// `(τ_K, z_K) ↦ (τ_N, z_N) = (ετ_K + z_K/c, −cτ_K)`.
pub fn kzk_to_npe_coords(tau_k: f64, z_k: f64, p: &ModelParams) -> (f64, f64) {
    (p.eps * tau_k + z_k / p.c, -p.c * tau_k)
}

/// Inverse of [`kzk_to_npe_coords`].
pub fn npe_to_kzk_coords(tau_n: f64, z_n: f64, p: &ModelParams) -> (f64, f64) {
    (-z_n / p.c, p.c * tau_n + p.eps * z_n)
}

/// NPE grid whose z nodes are the images of the KZK τ nodes: same transverse
/// axes, z period `cL`, same point count.
pub fn npe_grid_for(kzk_grid: &Grid, p: &ModelParams) -> Result<Arc<Grid>> {
    let nt = kzk_grid.ndim() - 1;
    let mut axes: Vec<Axis> = (0..nt).map(|a| kzk_grid.axis(a).clone()).collect();
    let tau = kzk_grid.axis(nt);
    axes.push(Axis::periodic("z", tau.n, p.c * tau.length()));
    Grid::new(axes)
}

/// A KZK solution carried into NPE variables at slow time `tau_n`:
/// `q(z_N, y) = −(c/ρ₀) I(−z_N/c, cτ_N + εz_N, y)`, with its exact τ_N
/// derivative `−(c²/ρ₀)∂_zI`. The O(ε) z-mean that the sheared sampling
/// introduces is projected out of both.
pub fn transplant_kzk(sol: &ProfileSolution, p: &ModelParams, tau_n: f64) -> Result<(NpeProfile, Field)> {
    let kgrid = sol.grid().clone();
    let ngrid = npe_grid_for(&kgrid, p)?;
    let ops = ProfileOps::new(&kgrid)?;
    let nt = ops.shape[ops.tau_axis];
    let rows = kgrid.len() / nt;
    let dz = ngrid.axis(ngrid.ndim() - 1).spacing;
    let mut q = vec![0.0; ngrid.len()];
    let mut q_tau = vec![0.0; ngrid.len()];
    let scale = -p.c / p.rho0;
    for j in 0..nt {
        let z_n = j as f64 * dz;
        let (_, z_k) = npe_to_kzk_coords(tau_n, z_n, p);
        // τ_K = −j·dτ lands on node (−j mod n).
        let k = (nt - j) % nt;
        for r in 0..rows {
            let (value, rate) = sol.point_at(0, z_k, r * nt + k)?;
            q[r * nt + j] = scale * value;
            q_tau[r * nt + j] = scale * p.c * rate;
        }
    }
    remove_line_means(&mut q, &ops.shape, ops.tau_axis);
    remove_line_means(&mut q_tau, &ops.shape, ops.tau_axis);
    Ok((
        NpeProfile { q: Field::from_raw(ngrid.clone(), q).check_finite("tau", tau_n)?, tau: tau_n },
        Field::from_raw(ngrid, q_tau).check_finite("tau", tau_n)?,
    ))
}

/// `∂_τq − npe_rhs(q)` for a transplanted KZK solution.
pub fn transplant_residual(sol: &ProfileSolution, p: &ModelParams, tau_n: f64) -> Result<Field> {
    let (prof, q_tau) = transplant_kzk(sol, p, tau_n)?;
    q_tau.sub(&npe_rhs(&prof, p)?)
}

/// Rate of a KZK profile, exposed for transplant diagnostics.
pub fn kzk_rate_field(i: &Field, p: &ModelParams) -> Result<Field> {
    let ops = ProfileOps::new(i.grid())?;
    Ok(Field::from_raw(i.grid().clone(), kzk_rate(&ops, p, Terms::default(), i.values())))
}
