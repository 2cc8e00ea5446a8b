//! KZK equation as an evolution in the propagation variable z, the velocity
//! potential and correctors of the KZK ansatz, and reconstruction of the
//! approximate physical state.
//!
//! Profile grids store the transverse axes first and retarded time τ as the
//! last (innermost) axis; every stored axis is periodic.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::march::{rk4_march, MarchOutcome, MarchSpec};
use crate::params::{ModelParams, Terms};
use crate::profile::ProfileSolution;
use crate::spectral::{
    antideriv_symbol, apply_symbol, check_zero_mean, dealias_symbol, deriv_symbol, mul_symbols, scale_symbol,
    PeriodicAxisHandle, PeriodicOps, TrigInterpolant,
};
use rustfft::num_complex::Complex64;

/// Default abort threshold: sup norm relative to the initial sup norm.
pub const BLOWUP_FACTOR: f64 = 1e3;

/// Density perturbation `I` on a (y…, τ) grid at range `z`.
#[derive(Debug, Clone)]
pub struct KzkProfile {
    pub density: Field,
    pub z: f64,
}

impl KzkProfile {
    pub fn new(density: Field, z: f64) -> Result<Self> {
        ProfileOps::new(density.grid())?;
        Ok(Self { density, z })
    }
}

/// Spectral operators of a profile grid: τ is the last axis, the rest are transverse.
#[derive(Debug, Clone)]
pub(crate) struct ProfileOps {
    pub shape: Vec<usize>,
    pub tau_axis: usize,
    pub period: f64,
    pub transverse: PeriodicOps,
    d_tau: Vec<Complex64>,
    d2_tau: Vec<Complex64>,
    inv_tau: Vec<Complex64>,
    filtered_d_tau: Vec<Complex64>,
    filter: Vec<Complex64>,
}

impl ProfileOps {
    pub fn new(grid: &Grid) -> Result<Self> {
        let tau_axis = grid.ndim() - 1;
        let tau = PeriodicAxisHandle::new(grid, tau_axis)?;
        let transverse = PeriodicOps::over(grid, &(0..tau_axis).collect::<Vec<_>>())?;
        let (n, l) = (tau.n, tau.length);
        let filter = dealias_symbol(n);
        Ok(Self {
            shape: grid.shape(),
            tau_axis,
            period: l,
            transverse,
            d_tau: deriv_symbol(n, l, 1),
            d2_tau: deriv_symbol(n, l, 2),
            inv_tau: antideriv_symbol(n, l),
            filtered_d_tau: mul_symbols(&filter, &deriv_symbol(n, l, 1)),
            filter,
        })
    }

    fn apply(&self, v: &[f64], symbol: &[Complex64]) -> Vec<f64> {
        let mut out = v.to_vec();
        apply_symbol(&mut out, &self.shape, self.tau_axis, symbol);
        out
    }

    pub fn d_tau(&self, v: &[f64]) -> Vec<f64> {
        self.apply(v, &self.d_tau)
    }

    pub fn d2_tau(&self, v: &[f64]) -> Vec<f64> {
        self.apply(v, &self.d2_tau)
    }

    pub fn inv_tau(&self, v: &[f64]) -> Vec<f64> {
        self.apply(v, &self.inv_tau)
    }

    /// `coef · ∂_τ(u²)` with the 2/3 rule in τ.
    pub fn d_tau_square(&self, v: &[f64], coef: f64) -> Vec<f64> {
        let mut sq = self.apply(v, &self.filter);
        for x in sq.iter_mut() {
            *x *= *x;
        }
        self.apply(&sq, &scale_symbol(&self.filtered_d_tau, coef))
    }

    pub fn laplacian_y(&self, v: &[f64]) -> Vec<f64> {
        if self.transverse.axes.is_empty() {
            return vec![0.0; v.len()];
        }
        self.transverse.laplacian(v)
    }
}

/// Right-hand side of the z-evolution form of the KZK equation.
pub(crate) fn kzk_rate(ops: &ProfileOps, p: &ModelParams, terms: Terms, i: &[f64]) -> Vec<f64> {
    let ModelParams { rho0, c, gamma, nu, .. } = *p;
    let mut out = if terms.nonlinear {
        ops.d_tau_square(i, (gamma + 1.0) / (4.0 * rho0 * c))
    } else {
        vec![0.0; i.len()]
    };
    if terms.viscous && nu > 0.0 {
        let k = nu / (2.0 * c.powi(3) * rho0);
        for (o, d) in out.iter_mut().zip(ops.d2_tau(i)) {
            *o += k * d;
        }
    }
    if terms.diffraction && !ops.transverse.axes.is_empty() {
        for (o, d) in out.iter_mut().zip(ops.inv_tau(&ops.laplacian_y(i))) {
            *o += 0.5 * c * d;
        }
    }
    out
}

/// `∂_z I = ((γ+1)/(4ρ₀c))∂_τ(I²) + (ν/(2c³ρ₀))∂²_τI + (c/2)∂_τ⁻¹Δ_yI`.
pub fn kzk_rhs(prof: &KzkProfile, p: &ModelParams) -> Result<Field> {
    kzk_rhs_with(prof, p, Terms::default())
}

pub fn kzk_rhs_with(prof: &KzkProfile, p: &ModelParams, terms: Terms) -> Result<Field> {
    let ops = ProfileOps::new(prof.density.grid())?;
    check_zero_mean(prof.density.values(), &ops.shape, ops.tau_axis)?;
    let rate = kzk_rate(&ops, p, terms, prof.density.values());
    Field::from_raw(prof.density.grid().clone(), rate).check_finite("z", prof.z)
}

#[derive(Debug, Clone, Copy)]
pub struct KzkOptions {
    pub terms: Terms,
    pub store_every: usize,
    pub blowup_factor: f64,
}

impl Default for KzkOptions {
    fn default() -> Self {
        Self { terms: Terms::default(), store_every: 1, blowup_factor: BLOWUP_FACTOR }
    }
}

/// RK4 march of the KZK equation from `z = 0` to `z_end`.
pub fn solve_kzk(i0: &Field, p: &ModelParams, z_end: f64, dz: f64) -> Result<ProfileSolution> {
    solve_kzk_with(i0, p, z_end, dz, &KzkOptions::default())?.into_result()
}

/// Like [`solve_kzk`], but a numerical failure returns the states computed so far.
pub fn solve_kzk_with(i0: &Field, p: &ModelParams, z_end: f64, dz: f64, opts: &KzkOptions) -> Result<MarchOutcome> {
    p.validate()?;
    if !(dz > 0.0) || !(z_end >= 0.0) {
        return Err(Error::Param { name: "dz", reason: format!("need dz > 0 and z_end ≥ 0, got dz={dz}, z_end={z_end}") });
    }
    let ops = ProfileOps::new(i0.grid())?;
    check_zero_mean(i0.values(), &ops.shape, ops.tau_axis)?;
    let spec = MarchSpec {
        variable: "z",
        components: vec!["I"],
        start: 0.0,
        end: z_end,
        max_step: dz,
        store_every: opts.store_every,
        blowup_factor: Some(opts.blowup_factor),
    };
    let (p, terms) = (*p, opts.terms);
    Ok(rk4_march(i0.grid(), vec![i0.values().to_vec()], &spec, |_, y| Ok(vec![kzk_rate(&ops, &p, terms, &y[0])])))
}

/// A step size in z for which RK4 is stable on this grid and amplitude, with safety factor 0.5.
pub fn stable_dz(grid: &Grid, p: &ModelParams, amplitude: f64) -> Result<f64> {
    let ops = ProfileOps::new(grid)?;
    let n = ops.shape[ops.tau_axis];
    let omega_max = PI * n as f64 / ops.period;
    let omega_min = 2.0 * PI / ops.period;
    let mut k2 = 0.0;
    for &(axis, length) in &ops.transverse.axes {
        k2 += (PI * ops.shape[axis] as f64 / length).powi(2);
    }
    let ModelParams { rho0, c, gamma, nu, .. } = *p;
    let nonlinear = (gamma + 1.0) / (4.0 * rho0 * c) * 2.0 * amplitude.abs() * omega_max;
    let viscous = nu / (2.0 * c.powi(3) * rho0) * omega_max * omega_max;
    let diffraction = 0.5 * c * k2 / omega_min;
    let rate = nonlinear + viscous + diffraction;
    Ok(if rate > 0.0 { 0.5 * 2.8 / rate } else { f64::INFINITY })
}

/// Velocity potential `Φ = (c²/ρ₀)∂_τ⁻¹I`.
pub fn potential_from_density(prof: &KzkProfile, p: &ModelParams) -> Result<Field> {
    let ops = ProfileOps::new(prof.density.grid())?;
    check_zero_mean(prof.density.values(), &ops.shape, ops.tau_axis)?;
    let phi = ops.inv_tau(prof.density.values()).into_iter().map(|v| p.c * p.c / p.rho0 * v).collect();
    Ok(Field::from_raw(prof.density.grid().clone(), phi))
}

/// Correctors of the KZK ansatz on the profile grid.
#[derive(Debug, Clone)]
pub struct KzkCorrectors {
    /// Leading axial velocity profile `(1/c)∂_τΦ`.
    pub v: Field,
    /// Axial velocity corrector `−∂_zΦ − (c/ρ₀)J`.
    pub v1: Field,
    /// Transverse velocity profile `−∇_yΦ`, one Field per transverse axis.
    pub w: Vec<Field>,
    /// Second density perturbation profile.
    pub j: Field,
}

pub fn kzk_correctors(prof: &KzkProfile, phi: &Field, p: &ModelParams) -> Result<KzkCorrectors> {
    kzk_correctors_with(prof, phi, p, Terms::default())
}

pub fn kzk_correctors_with(prof: &KzkProfile, phi: &Field, p: &ModelParams, terms: Terms) -> Result<KzkCorrectors> {
    prof.density.same_grid(phi)?;
    let ops = ProfileOps::new(phi.grid())?;
    check_zero_mean(prof.density.values(), &ops.shape, ops.tau_axis)?;
    let raw = correctors_raw(&ops, p, terms, prof.density.values(), Some(phi.values()));
    let g = phi.grid();
    Ok(KzkCorrectors {
        v: Field::from_raw(g.clone(), raw.v),
        v1: Field::from_raw(g.clone(), raw.v1),
        w: raw.w.into_iter().map(|w| Field::from_raw(g.clone(), w)).collect(),
        j: Field::from_raw(g.clone(), raw.j),
    })
}

pub(crate) struct RawCorrectors {
    pub v: Vec<f64>,
    pub v1: Vec<f64>,
    pub w: Vec<Vec<f64>>,
    pub j: Vec<f64>,
}

pub(crate) fn correctors_raw(ops: &ProfileOps, p: &ModelParams, terms: Terms, i: &[f64], phi: Option<&[f64]>) -> RawCorrectors {
    let ModelParams { rho0, c, gamma, nu, .. } = *p;
    let phi = match phi {
        Some(v) => v.to_vec(),
        None => ops.inv_tau(i).into_iter().map(|v| c * c / rho0 * v).collect(),
    };
    let phi_tau = ops.d_tau(&phi);
    let phi_tautau = ops.d2_tau(&phi);
    let dz_phi: Vec<f64> = ops.inv_tau(&kzk_rate(ops, p, terms, i)).into_iter().map(|v| c * c / rho0 * v).collect();
    let c4 = c.powi(4);
    let nu_eff = if terms.viscous { nu } else { 0.0 };
    let j: Vec<f64> = phi_tau
        .iter()
        .zip(&phi_tautau)
        .map(|(a, b)| -(gamma - 1.0) * rho0 / (2.0 * c4) * a * a - nu_eff / c4 * b)
        .collect();
    let v = phi_tau.iter().map(|a| a / c).collect();
    let v1 = dz_phi.iter().zip(&j).map(|(d, jj)| -d - c / rho0 * jj).collect();
    let w = if ops.transverse.axes.is_empty() {
        Vec::new()
    } else {
        ops.transverse.grad(&phi).into_iter().map(|g| g.into_iter().map(|x| -x).collect()).collect()
    };
    RawCorrectors { v, v1, w, j }
}

/// Approximate physical state of the KZK ansatz at one time.
///
/// `velocity` has one component per stored axis of the physical grid, in grid order.
#[derive(Debug, Clone)]
pub struct ReconstructedState {
    pub rho_bar: Field,
    pub velocity: Vec<Field>,
    pub t: f64,
}

impl ReconstructedState {
    pub fn momentum(&self) -> Result<Vec<Field>> {
        self.velocity.iter().map(|u| u.zip_map(&self.rho_bar, |a, b| a * b)).collect()
    }
}

/// Per-x₁ profile columns of everything the reconstruction needs.
struct Column {
    density: Vec<f64>,
    axial: Vec<f64>,
    transverse: Vec<Vec<f64>>,
}

/// Samples the KZK ansatz on a physical grid at arbitrary times.
///
/// The physical grid stores the transverse axes first (same count and point
/// numbers as the profile's transverse axes, spacing `dy/√ε`) and `x₁` last.
/// Profile columns at `z = εx₁` are computed once and reused for every time.
pub struct Reconstructor {
    params: ModelParams,
    grid: Arc<Grid>,
    n_tau: usize,
    period: f64,
    columns: Vec<Column>,
    /// Number of profile τ-steps per x₁ cell when `dx₁ = m·c·dτ`.
    aligned_stride: Option<usize>,
}

impl Reconstructor {
    pub fn new(sol: &ProfileSolution, p: &ModelParams, phys_grid: Arc<Grid>) -> Result<Self> {
        Self::with_terms(sol, p, phys_grid, Terms::default())
    }

    pub fn with_terms(sol: &ProfileSolution, p: &ModelParams, phys_grid: Arc<Grid>, terms: Terms) -> Result<Self> {
        p.validate()?;
        let prof_grid = sol.grid().clone();
        let ops = ProfileOps::new(&prof_grid)?;
        let nt = ops.tau_axis;
        if phys_grid.ndim() != nt + 1 {
            return Err(Error::GridMismatch(format!(
                "physical grid [{phys_grid}] needs {} transverse axes plus x1",
                nt
            )));
        }
        let sqrt_eps = p.eps.sqrt();
        for a in 0..nt {
            let (py, px) = (prof_grid.axis(a), phys_grid.axis(a));
            if py.n != px.n || (px.spacing * sqrt_eps - py.spacing).abs() > 1e-9 * py.spacing {
                return Err(Error::GridMismatch(format!(
                    "transverse axis `{}` (n={}, dx={}) does not map onto profile axis `{}` (n={}, dy={}) under y = √ε x'",
                    px.name, px.n, px.spacing, py.name, py.n, py.spacing
                )));
            }
        }
        let x1 = phys_grid.axis(nt);
        let (z_lo, z_hi) = sol.range();
        let z_far = p.eps * x1.coord(x1.n - 1);
        if z_far > z_hi * (1.0 + 1e-12) + 1e-300 || z_lo > 0.0 {
            return Err(Error::DomainExceeded { coordinate: "z", value: z_far, lo: z_lo, hi: z_hi });
        }
        let columns = (0..x1.n)
            .into_par_iter()
            .map(|i| -> Result<Column> {
                let z = p.eps * x1.coord(i);
                let density = sol.at(z)?.into_values();
                let raw = correctors_raw(&ops, p, terms, &density, None);
                let axial = raw.v.iter().zip(&raw.v1).map(|(v, v1)| p.eps * (v + p.eps * v1)).collect();
                let scale = p.eps.powf(1.5);
                let transverse = raw.w.into_iter().map(|w| w.into_iter().map(|x| scale * x).collect()).collect();
                Ok(Column { density, axial, transverse })
            })
            .collect::<Result<Vec<_>>>()?;
        let n_tau = ops.shape[nt];
        let dtau = ops.period / n_tau as f64;
        let ratio = x1.spacing / (p.c * dtau);
        let aligned_stride =
            if (ratio - ratio.round()).abs() < 1e-9 && ratio.round() >= 1.0 { Some(ratio.round() as usize) } else { None };
        Ok(Self { params: *p, grid: phys_grid, n_tau, period: ops.period, columns, aligned_stride })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Evaluates the ansatz at time `t`.
    pub fn state_at(&self, t: f64) -> Result<ReconstructedState> {
        let g = &self.grid;
        let nt = g.ndim() - 1;
        let n1 = g.axis(nt).n;
        let rows: usize = (0..nt).map(|a| g.axis(a).n).product();
        let dtau = self.period / self.n_tau as f64;
        let dx1 = g.axis(nt).spacing;
        let n_fields = 2 + nt;
        let mut rho = vec![0.0; g.len()];
        let mut vel = vec![vec![0.0; g.len()]; nt + 1];
        let mut write = |i: usize, r: usize, values: &[f64]| {
            let out = r * n1 + i;
            rho[out] = self.params.rho0 + self.params.eps * values[0];
            vel[nt][out] = values[1];
            for a in 0..nt {
                vel[a][out] = values[2 + a];
            }
        };
        let mut values = vec![0.0; n_fields];
        match self.aligned_stride {
            Some(m) => {
                // τ = t − x₁/c = (k − m·i)·dτ + δ with 0 ≤ δ < dτ shared by every column.
                let mut k = (t / dtau).floor();
                let mut delta = t - k * dtau;
                if delta > dtau * (1.0 - 1e-9) {
                    k += 1.0;
                    delta = 0.0;
                }
                let k = k as i64;
                let shifted: Vec<Option<Vec<Vec<f64>>>> = if delta.abs() <= 1e-9 * dtau {
                    vec![None; self.columns.len()]
                } else {
                    let symbol = shift_symbol(self.n_tau, self.period, delta);
                    let shape: Vec<usize> = (0..nt).map(|a| g.axis(a).n).chain(std::iter::once(self.n_tau)).collect();
                    self.columns
                        .par_iter()
                        .map(|col| {
                            Some(
                                col.fields()
                                    .map(|f| {
                                        let mut v = f.clone();
                                        apply_symbol(&mut v, &shape, nt, &symbol);
                                        v
                                    })
                                    .collect(),
                            )
                        })
                        .collect()
                };
                for (i, col) in self.columns.iter().enumerate() {
                    let idx = (k - (m * i) as i64).rem_euclid(self.n_tau as i64) as usize;
                    let fields: Vec<&Vec<f64>> = match &shifted[i] {
                        Some(s) => s.iter().collect(),
                        None => col.fields().collect(),
                    };
                    for r in 0..rows {
                        for (slot, f) in values.iter_mut().zip(&fields) {
                            *slot = f[r * self.n_tau + idx];
                        }
                        write(i, r, &values);
                    }
                }
            }
            None => {
                for (i, col) in self.columns.iter().enumerate() {
                    let tau = (t - dx1 * i as f64 / self.params.c).rem_euclid(self.period);
                    let fields: Vec<&Vec<f64>> = col.fields().collect();
                    for r in 0..rows {
                        let line = r * self.n_tau..(r + 1) * self.n_tau;
                        for (slot, f) in values.iter_mut().zip(&fields) {
                            *slot = TrigInterpolant::new(&f[line.clone()], self.period).eval(tau);
                        }
                        write(i, r, &values);
                    }
                }
            }
        }
        let min = rho.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::NonPositiveDensity { value: min, variable: "t", at: t });
        }
        Ok(ReconstructedState {
            rho_bar: Field::from_raw(g.clone(), rho).check_finite("t", t)?,
            velocity: vel.into_iter().map(|v| Field::from_raw(g.clone(), v)).collect(),
            t,
        })
    }
}

impl Column {
    fn fields(&self) -> impl Iterator<Item = &Vec<f64>> {
        std::iter::once(&self.density).chain(std::iter::once(&self.axial)).chain(self.transverse.iter())
    }
}

/// Symbol of `f(τ) ↦ f(τ + δ)`; the Nyquist mode keeps only its real part.
fn shift_symbol(n: usize, period: f64, delta: f64) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            let phase = crate::spectral::wavenumber(k, n, period) * delta;
            if k == n / 2 {
                Complex64::new(phase.cos(), 0.0)
            } else {
                Complex64::new(phase.cos(), phase.sin())
            }
        })
        .collect()
}

/// `ρ̄ = ρ₀ + εI`, `ū = ε(v + εv₁, √ε w)` sampled at `(t − x₁/c, εx₁, √ε x')`.
pub fn reconstruct_physical(sol: &ProfileSolution, p: &ModelParams, t: f64, phys_grid: Arc<Grid>) -> Result<ReconstructedState> {
    Reconstructor::new(sol, p, phys_grid)?.state_at(t)
}

/// Physical grid matched to a profile grid: transverse spacing `dy/√ε`,
/// `n1` points in x₁ with spacing `m·c·dτ`.
pub fn matched_physical_grid(profile: &Grid, p: &ModelParams, n1: usize, stride: usize) -> Result<Arc<Grid>> {
    let nt = profile.ndim() - 1;
    let sqrt_eps = p.eps.sqrt();
    let mut axes = Vec::with_capacity(nt + 1);
    for a in 0..nt {
        let y = profile.axis(a);
        axes.push(crate::grid::Axis::periodic(&format!("x{}", a + 2), y.n, y.length() / sqrt_eps));
    }
    let tau = profile.axis(nt);
    axes.push(crate::grid::Axis::periodic("x1", n1, n1 as f64 * stride as f64 * p.c * tau.spacing));
    Grid::new(axes)
}

/// One term `amplitude · cos(α τ + β z + κ·y + phase)` of a test profile.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigTerm {
    pub amplitude: f64,
    pub tau_rate: f64,
    pub z_rate: f64,
    pub y_rates: Vec<f64>,
    pub phase: f64,
}

/// Smooth test profile `U(τ, z, y)`: a finite sum of [`TrigTerm`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigProfile {
    pub terms: Vec<TrigTerm>,
}

impl TrigProfile {
    pub fn eval(&self, tau: f64, z: f64, y: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.amplitude * t.theta(tau, z, y).cos()).sum()
    }
}

impl TrigTerm {
    fn theta(&self, tau: f64, z: f64, y: &[f64]) -> f64 {
        self.tau_rate * tau + self.z_rate * z + self.y_rates.iter().zip(y).map(|(k, v)| k * v).sum::<f64>() + self.phase
    }
}

/// Largest discrepancy between the physical wave operator `∂_t² − c²Δ`
/// applied to `u(x,t) = U(t − x₁/c, εx₁, √ε x')` and its paraxial form
/// `ε[2c∂²_{τz} − c²Δ_y]U − ε²c²∂²_zU`, over a 7-point-per-axis sample set.
///
/// The physical side differentiates each term in (x, t) through its phase
/// gradient; the paraxial side differentiates in (τ, z, y).
pub fn paraxial_operator_identity_check(profile: &TrigProfile, p: &ModelParams) -> f64 {
    let (c, eps) = (p.c, p.eps);
    let ny = profile.terms.first().map_or(0, |t| t.y_rates.len());
    let samples: Vec<f64> = (0..7).map(|k| -1.3 + 0.61 * k as f64).collect();
    let mut worst = 0.0f64;
    let mut y = vec![0.0; ny];
    let total = 7usize.pow(2 + ny as u32);
    for idx in 0..total {
        let mut rest = idx;
        let tau = samples[rest % 7];
        rest /= 7;
        let z = samples[rest % 7];
        rest /= 7;
        for v in y.iter_mut() {
            *v = samples[rest % 7];
            rest /= 7;
        }
        // Physical point with these profile coordinates.
        let x1 = z / eps;
        let t = tau + x1 / c;
        let xp: Vec<f64> = y.iter().map(|v| v / eps.sqrt()).collect();
        let mut physical = 0.0;
        let mut paraxial = 0.0;
        for term in &profile.terms {
            // Phase in physical variables: ω t − k₁ x₁ ... with
            // ∂_t = α, ∂_{x₁} = −α/c + εβ, ∇' = √ε κ.
            let omega = term.tau_rate;
            let k1 = -term.tau_rate / c + eps * term.z_rate;
            let kp: Vec<f64> = term.y_rates.iter().map(|k| eps.sqrt() * k).collect();
            let theta_phys =
                omega * t + k1 * x1 + kp.iter().zip(&xp).map(|(k, x)| k * x).sum::<f64>() + term.phase;
            let u = term.amplitude * theta_phys.cos();
            let k2: f64 = k1 * k1 + kp.iter().map(|k| k * k).sum::<f64>();
            physical += (-omega * omega + c * c * k2) * u;

            let up = term.amplitude * term.theta(tau, z, &y).cos();
            let ky2: f64 = term.y_rates.iter().map(|k| k * k).sum();
            let u_tz = -term.tau_rate * term.z_rate * up;
            let lap_y = -ky2 * up;
            let u_zz = -term.z_rate * term.z_rate * up;
            paraxial += eps * (2.0 * c * u_tz - c * c * lap_y) - eps * eps * c * c * u_zz;
        }
        worst = worst.max((physical - paraxial).abs());
    }
    worst
}

/// Gaussian beam `A sin(2πτ/L) exp(−((y−y_c)/w)²)` on a profile grid; `y_c` is the box centre.
pub fn gaussian_beam(grid: &Arc<Grid>, amplitude: f64, width: f64) -> Result<Field> {
    let ops = ProfileOps::new(grid)?;
    let nt = ops.tau_axis;
    let centres: Vec<f64> = (0..nt).map(|a| 0.5 * grid.axis(a).length()).collect();
    let period = ops.period;
    Field::from_fn(grid.clone(), |x| {
        let r2: f64 = (0..nt).map(|a| ((x[a] - centres[a]) / width).powi(2)).sum();
        amplitude * (2.0 * PI * x[nt] / period).sin() * (-r2).exp()
    })
}

/// Plane wave `A sin(2πτ/L)` (no transverse dependence).
pub fn plane_wave(grid: &Arc<Grid>, amplitude: f64) -> Result<Field> {
    let ops = ProfileOps::new(grid)?;
    let (nt, period) = (ops.tau_axis, ops.period);
    Field::from_fn(grid.clone(), |x| amplitude * (2.0 * PI * x[nt] / period).sin())
}

/// Largest |τ-mean| of a profile, for manifests.
pub fn tau_mean_defect(f: &Field) -> Result<f64> {
    let ops = ProfileOps::new(f.grid())?;
    Ok(crate::spectral::max_abs_line_mean(f.values(), &ops.shape, ops.tau_axis))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;

    fn params() -> ModelParams {
        ModelParams { rho0: 1.3, c: 1.7, gamma: 1.4, nu: 0.05, eps: 0.1, period: 1.0 }
    }

    fn beam_grid() -> Arc<Grid> {
        Grid::new(vec![Axis::periodic("y", 16, 8.0), Axis::periodic("tau", 32, 1.0)]).unwrap()
    }

    #[test]
    fn zero_profile_has_zero_rate() {
        let prof = KzkProfile::new(Field::zeros(beam_grid()), 0.0).unwrap();
        assert_eq!(kzk_rhs(&prof, &params()).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn viscous_harmonic() {
        let p = params();
        let g = Grid::new(vec![Axis::periodic("tau", 32, 1.0)]).unwrap();
        let a = 0.3;
        let w = 2.0 * PI;
        let i = Field::from_fn(g.clone(), |x| a * (w * x[0]).sin()).unwrap();
        let rate = kzk_rhs_with(&KzkProfile::new(i.clone(), 0.0).unwrap(), &p, Terms::default().without_nonlinearity()).unwrap();
        let want = i.scale(-p.nu / (2.0 * p.c.powi(3) * p.rho0) * w * w).unwrap();
        assert!(rate.sub(&want).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn nonzero_mean_is_rejected() {
        let i = Field::constant(beam_grid(), 1.0);
        let prof = KzkProfile { density: i.clone(), z: 0.0 };
        assert!(matches!(kzk_rhs(&prof, &params()), Err(Error::NonzeroMean { .. })));
        assert!(matches!(solve_kzk(&i, &params(), 0.1, 0.01), Err(Error::NonzeroMean { .. })));
    }

    #[test]
    fn potential_of_cosine() {
        let p = params();
        let g = Grid::new(vec![Axis::periodic("tau", 32, 1.0)]).unwrap();
        let w = 2.0 * PI;
        let i = Field::from_fn(g.clone(), |x| p.rho0 / (p.c * p.c) * w * (w * x[0]).cos()).unwrap();
        let phi = potential_from_density(&KzkProfile::new(i, 0.0).unwrap(), &p).unwrap();
        let want = Field::from_fn(g, |x| (w * x[0]).sin()).unwrap();
        assert!(phi.sub(&want).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn paraxial_identity_trivial_profiles() {
        let p = params();
        let constant = TrigProfile { terms: vec![TrigTerm { amplitude: 2.0, tau_rate: 0.0, z_rate: 0.0, y_rates: vec![0.0], phase: 0.0 }] };
        assert!(paraxial_operator_identity_check(&constant, &p) < 1e-14);
        let retarded = TrigProfile { terms: vec![TrigTerm { amplitude: 1.0, tau_rate: 3.0, z_rate: 0.0, y_rates: vec![0.0], phase: 0.2 }] };
        assert!(paraxial_operator_identity_check(&retarded, &p) < 1e-12);
    }

    #[test]
    fn reconstruction_grid_must_match() {
        let p = params();
        let g = beam_grid();
        let sol = solve_kzk(&gaussian_beam(&g, 0.1, 1.0).unwrap(), &p, 0.05, 0.01).unwrap();
        let bad = Grid::new(vec![Axis::periodic("x2", 16, 8.0), Axis::periodic("x1", 4, 0.2)]).unwrap();
        assert!(matches!(Reconstructor::new(&sol, &p, bad), Err(Error::GridMismatch(_))));
        let far = matched_physical_grid(&g, &p, 64, 1).unwrap();
        assert!(matches!(Reconstructor::new(&sol, &p, far), Err(Error::DomainExceeded { .. })));
    }
}
