//! Ansatz residuals, cone-restricted comparisons against the hydro solver,
//! ε-scaling fits and convergence studies.
//!
//! Norms of physical fields are reported in two measures: the plain discrete
//! L² norm on the physical grid, and the *profile measure*
//! `ε^{(n+1)/4}·‖·‖`, which is the L² norm in the paraxial variables
//! `(z, y) = (εx₁, √ε x')` and therefore does not grow with the ε-dependent
//! size of the physical region. Scaling fits use the profile measure.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{field_l2_norm, Field};
use crate::grid::{Axis, Grid};
use crate::hydro::{cone_mask, euler_flux, march_hydro, ConeSpec, ConservedState, HydroOptions, HydroScheme};
use crate::kzk::{gaussian_beam, solve_kzk_with, stable_dz, KzkOptions, ReconstructedState, Reconstructor};
use crate::npe::transplant_residual;
use crate::params::{ModelParams, Terms};
use crate::spectral::PeriodicOps;

/// Converts a physical-grid L² norm to the profile measure.
pub fn profile_measure(norm: f64, eps: f64, space_dim: usize) -> f64 {
    norm * eps.powf((space_dim as f64 + 1.0) / 4.0)
}

impl ReconstructedState {
    /// `(ρ̄, ρ̄ū)` as a conserved state.
    pub fn to_conserved(&self) -> Result<ConservedState> {
        ConservedState::new(self.rho_bar.clone(), self.momentum()?)
    }
}

fn fd4_first(v: &[f64], shape: &[usize], h: f64) -> Vec<f64> {
    let n = *shape.last().unwrap();
    let mut out = vec![0.0; v.len()];
    for row in 0..v.len() / n {
        let b = row * n;
        for j in 2..n - 2 {
            out[b + j] = (v[b + j - 2] - 8.0 * v[b + j - 1] + 8.0 * v[b + j + 1] - v[b + j + 2]) / (12.0 * h);
        }
    }
    out
}

fn fd4_second(v: &[f64], shape: &[usize], h: f64) -> Vec<f64> {
    let n = *shape.last().unwrap();
    let mut out = vec![0.0; v.len()];
    for row in 0..v.len() / n {
        let b = row * n;
        for j in 2..n - 2 {
            out[b + j] = (-v[b + j - 2] + 16.0 * v[b + j - 1] - 30.0 * v[b + j] + 16.0 * v[b + j + 1] - v[b + j + 2])
                / (12.0 * h * h);
        }
    }
    out
}

/// Residual `∂_tŪ + ∇·F(Ū) − εν[0; Δū]` of a reconstruction, at every
/// snapshot that has two neighbours on each side.
///
/// Snapshots must be equally spaced in time. Time derivatives use the
/// fourth-order central stencil; x₁ (last axis) derivatives use fourth-order
/// central differences and the two nodes at each x₁ end are excluded;
/// transverse derivatives are spectral. Returns `(t, physical L² norm)`.
pub fn ansatz_residual_norm(recon: &[ReconstructedState], p: &ModelParams, viscous: bool) -> Result<Vec<(f64, f64)>> {
    ansatz_residual_norm_on(recon, p, viscous, None)
}

/// [`ansatz_residual_norm`] restricted to the nonzero nodes of `region`.
pub fn ansatz_residual_norm_on(
    recon: &[ReconstructedState],
    p: &ModelParams,
    viscous: bool,
    region: Option<&Field>,
) -> Result<Vec<(f64, f64)>> {
    if recon.len() < 5 {
        return Err(Error::InsufficientSnapshots { needed: 5, got: recon.len() });
    }
    let h = recon[1].t - recon[0].t;
    if !(h > 0.0) || recon.windows(2).any(|w| ((w[1].t - w[0].t) - h).abs() > 1e-9 * h.abs().max(1e-300)) {
        return Err(Error::Param { name: "recon", reason: "snapshots must be equally spaced in increasing time".into() });
    }
    for r in recon {
        r.rho_bar.same_grid(&recon[0].rho_bar)?;
    }
    let grid = recon[0].rho_bar.grid().clone();
    let shape = grid.shape();
    let nd = shape.len();
    let x1 = nd - 1;
    let dx1 = grid.axis(x1).spacing;
    let transverse = PeriodicOps::over(&grid, &(0..x1).collect::<Vec<_>>())?;
    let n1 = shape[x1];
    if n1 < 5 {
        return Err(Error::InvalidGrid("need at least 5 points along x1".into()));
    }
    if let Some(r) = region {
        r.same_grid(&recon[0].rho_bar)?;
    }
    let mask: Vec<f64> = (0..grid.len())
        .map(|j| {
            let inside = !region.is_some_and(|r| r.values()[j] == 0.0);
            if inside && (2..n1 - 2).contains(&(j % n1)) { 1.0 } else { 0.0 }
        })
        .collect();
    let mask = Field::from_raw(grid.clone(), mask);

    let conserved: Vec<ConservedState> = recon.iter().map(|r| r.to_conserved()).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for k in 2..recon.len() - 2 {
        let comps = |s: &ConservedState| -> Vec<Vec<f64>> {
            std::iter::once(s.rho.values().to_vec()).chain(s.momentum.iter().map(|m| m.values().to_vec())).collect()
        };
        let (a, b, c, d) = (comps(&conserved[k - 2]), comps(&conserved[k - 1]), comps(&conserved[k + 1]), comps(&conserved[k + 2]));
        let mut res: Vec<Vec<f64>> = (0..=nd)
            .map(|q| (0..grid.len()).map(|j| (a[q][j] - 8.0 * b[q][j] + 8.0 * c[q][j] - d[q][j]) / (12.0 * h)).collect())
            .collect();
        let flux = euler_flux(&conserved[k], p)?;
        for (axis, fa) in flux.iter().enumerate() {
            for (q, f) in fa.iter().enumerate() {
                let div = if axis == x1 { fd4_first(f.values(), &shape, dx1) } else { transverse.deriv(f.values(), axis, 1) };
                for (r, v) in res[q].iter_mut().zip(div) {
                    *r += v;
                }
            }
        }
        if viscous && p.nu > 0.0 {
            for (q, u) in recon[k].velocity.iter().enumerate() {
                let mut lap = fd4_second(u.values(), &shape, dx1);
                if x1 > 0 {
                    for (l, v) in lap.iter_mut().zip(transverse.laplacian(u.values())) {
                        *l += v;
                    }
                }
                for (r, l) in res[1 + q].iter_mut().zip(lap) {
                    *r -= p.eps * p.nu * l;
                }
            }
        }
        let mut sq = 0.0;
        for r in res {
            sq += field_l2_norm(&Field::from_raw(grid.clone(), r), Some(&mask))?.powi(2);
        }
        out.push((recon[k].t, sq.sqrt()));
    }
    Ok(out)
}

/// `‖(ρ_a − ρ_b, m_a − m_b)‖` over the cone section at `t` (root of the sum of squares).
pub fn l2_diff_states(a: &ConservedState, b: &ConservedState, spec: &ConeSpec, t: f64) -> Result<f64> {
    let (rho, mom) = diff_parts(a, b, spec, t)?;
    Ok((rho * rho + mom * mom).sqrt())
}

/// Separate cone norms of the density and momentum differences.
pub fn diff_parts(a: &ConservedState, b: &ConservedState, spec: &ConeSpec, t: f64) -> Result<(f64, f64)> {
    a.rho.same_grid(&b.rho)?;
    let mask = cone_mask(spec, t, a.grid())?;
    let rho = field_l2_norm(&a.rho.sub(&b.rho)?, Some(&mask))?;
    let mut mom = 0.0;
    for (ma, mb) in a.momentum.iter().zip(&b.momentum) {
        mom += field_l2_norm(&ma.sub(mb)?, Some(&mask))?.powi(2);
    }
    Ok((rho, mom.sqrt()))
}

/// `‖(ρ̄ − ρ, ρ̄ū − ρu)‖_{L²(cone(t))}`.
pub fn l2_diff_on_cone(exact: &ConservedState, approx: &ReconstructedState, spec: &ConeSpec, t: f64) -> Result<f64> {
    l2_diff_states(exact, &approx.to_conserved()?, spec, t)
}

/// Least-squares power law `norm ≈ e^{intercept} ε^{slope}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub eps_values: Vec<f64>,
    pub error_norms: Vec<f64>,
    pub fitted_slope: f64,
    pub fitted_intercept: f64,
    /// RMS deviation of `log(norm)` from the fitted line.
    pub residual_of_fit: f64,
    /// Digest of the configuration that produced the data (empty if none).
    pub metadata: String,
}

impl ScalingReport {
    /// Slopes between consecutive ε values.
    pub fn local_slopes(&self) -> Vec<f64> {
        self.eps_values
            .windows(2)
            .zip(self.error_norms.windows(2))
            .map(|(e, n)| (n[0] / n[1]).ln() / (e[0] / e[1]).ln())
            .collect()
    }

    /// False when local slopes stray from the global slope by more than 0.5,
    /// i.e. the data is not yet in the asymptotic regime.
    pub fn in_asymptotic_regime(&self) -> bool {
        self.local_slopes().iter().all(|s| (s - self.fitted_slope).abs() <= 0.5)
    }
}

pub fn scaling_fit(pairs: &[(f64, f64)]) -> Result<ScalingReport> {
    if pairs.len() < 3 {
        return Err(Error::DegenerateFit(format!("need at least 3 (eps, norm) pairs, got {}", pairs.len())));
    }
    if pairs.windows(2).any(|w| !(w[1].0 < w[0].0)) {
        return Err(Error::DegenerateFit("eps values must be strictly decreasing".into()));
    }
    if let Some(bad) = pairs.iter().find(|(e, n)| !(*e > 0.0) || !(*n > 0.0) || !n.is_finite()) {
        return Err(Error::DegenerateFit(format!("eps and norms must be positive, got {bad:?}")));
    }
    let xs: Vec<f64> = pairs.iter().map(|(e, _)| e.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|(_, n)| n.ln()).collect();
    let (slope, intercept, rms) = least_squares(&xs, &ys)?;
    Ok(ScalingReport {
        eps_values: pairs.iter().map(|p| p.0).collect(),
        error_norms: pairs.iter().map(|p| p.1).collect(),
        fitted_slope: slope,
        fitted_intercept: intercept,
        residual_of_fit: rms,
        metadata: String::new(),
    })
}

/// Ordinary least squares `y ≈ slope·x + intercept`; returns (slope, intercept, RMS residual).
pub fn least_squares(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 1e-300) {
        return Err(Error::DegenerateFit("zero variance in the abscissa".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum::<f64>() / n).sqrt();
    Ok((slope, intercept, rms))
}

/// Observed order of a refinement sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObservedOrder {
    Order(f64),
    /// Errors are at the round-off floor; no order can be measured.
    Saturated { floor: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceResult {
    /// Error measures from coarsest to finest (successive differences for self-convergence).
    pub errors: Vec<f64>,
    /// Orders between consecutive entries of `errors`.
    pub orders: Vec<f64>,
    pub observed: ObservedOrder,
}

/// Orders from an error sequence obtained with refinement `ratio`. The
/// sequence is saturated once every error is below `floor`.
pub fn observed_order(errors: &[f64], ratio: f64, floor: f64) -> Result<ConvergenceResult> {
    if errors.len() < 2 {
        return Err(Error::InsufficientSnapshots { needed: 2, got: errors.len() });
    }
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).ln() / ratio.ln()).collect();
    if errors.iter().all(|e| *e <= floor) {
        let worst = errors.iter().cloned().fold(0.0, f64::max);
        return Ok(ConvergenceResult { errors: errors.to_vec(), orders, observed: ObservedOrder::Saturated { floor: worst } });
    }
    if errors.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::NonMonotoneErrors(errors.to_vec()));
    }
    let last = *orders.last().unwrap();
    Ok(ConvergenceResult { errors: errors.to_vec(), orders, observed: ObservedOrder::Order(last) })
}

/// Richardson self-convergence from solutions at successively refined
/// resolutions (refinement `ratio`), compared on the coarsest grid.
pub fn richardson_order(solutions: &[Vec<f64>], ratio: f64, floor: f64) -> Result<ConvergenceResult> {
    if solutions.len() < 3 {
        return Err(Error::InsufficientSnapshots { needed: 3, got: solutions.len() });
    }
    let diffs: Vec<f64> = solutions
        .windows(2)
        .map(|w| {
            let d: f64 = w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / w[0].len() as f64;
            d.sqrt()
        })
        .collect();
    observed_order(&diffs, ratio, floor)
}

/// Built-in refinement studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    /// Full KZK (beam, nonlinear, viscous), refined in dz. Resolutions are step counts.
    KzkRk4,
    /// Full NPE, refined in dτ. Resolutions are step counts.
    NpeRk4,
    /// Kuznetsov with a manufactured solution, refined in dt. Resolutions are step counts.
    KuznetsovRk4,
    /// MUSCL hydro, smooth 1D compression, refined in space and time; successive
    /// differences in the discrete L¹ norm. Resolutions are grid sizes.
    HydroMuscl,
    /// Spectral derivative of a band-limited profile against its exact value. Resolutions are grid sizes.
    SpectralDerivative,
}

impl std::str::FromStr for Study {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "kzk-rk4" => Study::KzkRk4,
            "npe-rk4" => Study::NpeRk4,
            "kuznetsov-rk4" => Study::KuznetsovRk4,
            "hydro-muscl" => Study::HydroMuscl,
            "spectral-derivative" => Study::SpectralDerivative,
            other => return Err(Error::Param { name: "study", reason: format!("unknown study `{other}`") }),
        })
    }
}

/// Runs a refinement study; resolutions must grow geometrically by a factor of 2.
pub fn convergence_study(study: Study, resolutions: &[usize]) -> Result<ConvergenceResult> {
    if resolutions.len() < 3 {
        return Err(Error::InsufficientSnapshots { needed: 3, got: resolutions.len() });
    }
    if resolutions.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(Error::Param { name: "resolutions", reason: "must double at each level".into() });
    }
    let sols: Vec<Vec<f64>> = match study {
        Study::KzkRk4 => resolutions.iter().map(|&n| crate::problems::kzk_reference(n)).collect::<Result<_>>()?,
        Study::NpeRk4 => resolutions.iter().map(|&n| crate::problems::npe_reference(n)).collect::<Result<_>>()?,
        Study::KuznetsovRk4 => {
            let errors = resolutions.iter().map(|&n| crate::problems::kuznetsov_mms_error(n)).collect::<Result<Vec<_>>>()?;
            return observed_order(&errors, 2.0, 1e-13);
        }
        Study::HydroMuscl => {
            let coarse = resolutions[0];
            let sols: Vec<Vec<f64>> = resolutions
                .iter()
                .map(|&n| crate::problems::hydro_smooth(n).map(|v| v.iter().step_by(n / coarse).cloned().collect()))
                .collect::<Result<_>>()?;
            // Discrete L¹, the customary accuracy norm for finite-volume schemes:
            // limiter clipping at smooth extrema costs order in L² and L^∞.
            let diffs: Vec<f64> = sols
                .windows(2)
                .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).sum::<f64>() / coarse as f64)
                .collect();
            return observed_order(&diffs, 2.0, 1e-13);
        }
        Study::SpectralDerivative => {
            let errors = resolutions.iter().map(|&n| crate::problems::spectral_derivative_error(n)).collect::<Result<Vec<_>>>()?;
            return observed_order(&errors, 2.0, 1e-11);
        }
    };
    richardson_order(&sols, 2.0, 1e-13)
}

/// Transverse beam and τ grid of the KZK initial data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamSpec {
    /// Peak density perturbation of `A sin(2πτ/L) exp(−(y/w)²)`.
    pub amplitude: f64,
    pub width: f64,
    /// Transverse box size in beam widths.
    pub box_widths: f64,
    pub n_y: usize,
    pub n_tau: usize,
}

impl Default for BeamSpec {
    fn default() -> Self {
        Self { amplitude: 0.1, width: 1.0, box_widths: 12.0, n_y: 64, n_tau: 64 }
    }
}

impl BeamSpec {
    pub fn profile_grid(&self, p: &ModelParams) -> Result<Arc<Grid>> {
        Grid::new(vec![
            Axis::periodic("y", self.n_y, self.box_widths * self.width),
            Axis::periodic("tau", self.n_tau, p.period),
        ])
    }

    pub fn initial_density(&self, p: &ModelParams) -> Result<Field> {
        gaussian_beam(&self.profile_grid(p)?, self.amplitude, self.width)
    }
}

/// Configuration of the comparison experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// `eps` is replaced by each entry of `eps_list`. Not read from
    /// configuration files, where parameters live in their own table.
    #[serde(skip)]
    pub params: ModelParams,
    pub eps_list: Vec<f64>,
    pub beam: BeamSpec,
    /// Cone half-width parameter K (the cone is |x₁ − centre| ≤ K/ε − Mt).
    pub cone_k: f64,
    /// Cone slope as a multiple of the sound speed (≥ 1).
    pub cone_m_over_c: f64,
    /// Comparison time `t* = θ/ε`.
    pub theta: f64,
    /// Time scale T of the long-time horizon `(T/ε)·ln(1/ε)` (viscous experiment).
    pub horizon_t: f64,
    /// Number of sample times.
    pub samples: usize,
    /// Width of the smooth transition outside the initial cone, in x₁ units.
    pub window: f64,
    /// Largest KZK step in z.
    pub dz_max: f64,
    pub hydro_cfl: f64,
    /// Earliest sample time as a fraction of the horizon (viscous experiment).
    pub early_start: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::nondim(0.1).with_nu(0.05),
            eps_list: vec![0.2, 0.1, 0.05, 0.025],
            beam: BeamSpec::default(),
            cone_k: 0.125,
            cone_m_over_c: 1.1,
            theta: 0.125 / 2.2,
            horizon_t: 0.025,
            samples: 17,
            window: 2.0,
            dz_max: 0.01,
            hydro_cfl: 0.5,
            early_start: 1e-3,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.with_eps(self.eps_list.first().copied().unwrap_or(0.1)).validate()?;
        if self.eps_list.len() < 3 {
            return Err(Error::Param { name: "eps_list", reason: "need at least 3 values".into() });
        }
        if self.eps_list.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Param { name: "eps_list", reason: "eps list not decreasing".into() });
        }
        for &e in &self.eps_list {
            self.params.with_eps(e).validate()?;
        }
        if !(self.cone_m_over_c >= 1.0) {
            return Err(Error::Param { name: "cone_m_over_c", reason: "cone slope must be at least the sound speed".into() });
        }
        if !(self.theta > 0.0) || self.theta >= self.cone_k / self.cone_m_over_c / self.params.c {
            return Err(Error::Param { name: "theta", reason: "comparison time must precede the cone apex".into() });
        }
        if self.samples < 5 {
            return Err(Error::Param { name: "samples", reason: "need at least 5 sample times".into() });
        }
        Ok(())
    }
}

/// Per-ε time series of the cone difference.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSeries {
    pub eps: f64,
    pub t_star: f64,
    /// Sample times, with `t_star` merged in.
    pub times: Vec<f64>,
    /// Root-sum-square difference, physical measure.
    pub diff_phys: Vec<f64>,
    /// Root-sum-square difference, profile measure.
    pub diff_prof: Vec<f64>,
    /// `‖ρ − ρ̄‖ + ‖ρu − ρ̄ū‖`, profile measure.
    pub diff_sum_prof: Vec<f64>,
    /// RMS ansatz residual over the sample times, profile measure.
    pub resid_norm: f64,
    /// Largest |∇ρ| of the exact solution over the run (gradient monitor).
    pub grad_sup: f64,
}

/// A pass/fail verdict with a human-readable detail.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub report: ScalingReport,
    pub series: Vec<PairSeries>,
    pub checks: Vec<Check>,
}

/// Smooth step: 0 for s ≤ 0, 1 for s ≥ 1, C^∞ in between.
fn smooth_step(s: f64) -> f64 {
    let f = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        f(s) / (f(s) + f(1.0 - s))
    }
}

/// Physical layout of one ε run.
struct Layout {
    params: ModelParams,
    grid: Arc<Grid>,
    cone: ConeSpec,
    z_end: f64,
}

fn layout(cfg: &ExperimentConfig, eps: f64, horizon: f64) -> Result<Layout> {
    let params = cfg.params.with_eps(eps).validate()?;
    let prof = cfg.beam.profile_grid(&params)?;
    let dtau = prof.axis(1).spacing;
    let dx1 = params.c * dtau;
    // The cone sits next to the source plane, so it covers z ∈ [εw, εw + 2K]
    // for every ε and never reaches the far (possibly steepened) part of the beam.
    let half = cfg.cone_k / eps + cfg.window;
    let n1 = ((2.0 * half / dx1).ceil() as usize).next_power_of_two();
    let grid = crate::kzk::matched_physical_grid(&prof, &params, n1, 1)?;
    let center = half;
    let cone = ConeSpec::new(cfg.cone_k, cfg.cone_m_over_c * params.c, eps, center)?;
    if horizon >= cone.apex_time() {
        return Err(Error::EmptyCone { t: horizon, apex: cone.apex_time() });
    }
    Ok(Layout { params, grid, cone, z_end: eps * n1 as f64 * dx1 })
}

/// One ε run: solve KZK, reconstruct, initialise the hydro solver from the
/// reconstruction inside the cone (smoothly blended to ambient outside),
/// and record cone differences at `times`.
fn run_pair(cfg: &ExperimentConfig, eps: f64, viscous: bool, times: &[f64], t_star: f64) -> Result<PairSeries> {
    let horizon = times.last().copied().unwrap_or(0.0).max(t_star);
    let Layout { mut params, grid, cone, z_end } = layout(cfg, eps, horizon)?;
    if !viscous {
        params.nu = 0.0;
    }
    let i0 = cfg.beam.initial_density(&params)?;
    let dz = cfg.dz_max.min(stable_dz(i0.grid(), &params, cfg.beam.amplitude)?);
    let terms = Terms::default();
    let sol = solve_kzk_with(&i0, &params, z_end, dz, &KzkOptions { terms, ..Default::default() })?.into_result()?;
    let rec = Reconstructor::with_terms(&sol, &params, grid.clone(), terms)?;

    let start = rec.state_at(0.0)?.to_conserved()?;
    let ambient = ConservedState::ambient(grid.clone(), &params);
    let x1 = grid.ndim() - 1;
    let inner = cone.half_width(0.0);
    let weight = Field::from_fn(grid.clone(), |x| smooth_step((inner + cfg.window - (x[x1] - cone.center).abs()) / cfg.window))?;
    let blend = |a: &Field, b: &Field| -> Field {
        let v = a
            .values()
            .iter()
            .zip(b.values())
            .zip(weight.values())
            .map(|((ra, rb), w)| if *w == 1.0 { *ra } else { rb + w * (ra - rb) })
            .collect();
        Field::new(a.grid().clone(), v).expect("blend of finite fields")
    };
    let u0 = ConservedState::new(
        blend(&start.rho, &ambient.rho),
        start.momentum.iter().zip(&ambient.momentum).map(|(a, b)| blend(a, b)).collect(),
    )?;

    let opts = HydroOptions { scheme: HydroScheme::Pseudospectral, cfl: cfg.hydro_cfl, viscous };
    let mut all_times: Vec<f64> = times.to_vec();
    if !all_times.iter().any(|t| (t - t_star).abs() < 1e-12) {
        all_times.push(t_star);
        all_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    let n = grid.ndim();
    let mut rows: Vec<(f64, f64, f64, f64)> = Vec::new();
    let ops = PeriodicOps::all(&grid)?;
    let mut grad_sup = 0.0f64;
    let t_end = *all_times.last().unwrap();
    march_hydro(
        &u0,
        &params,
        t_end,
        &all_times,
        &opts,
        |t, state| {
            let approx = rec.state_at(t)?.to_conserved()?;
            let (dr, dm) = diff_parts(state, &approx, &cone, t)?;
            let phys = (dr * dr + dm * dm).sqrt();
            rows.push((t, phys, profile_measure(phys, eps, n), profile_measure(dr + dm, eps, n)));
            for g in ops.grad(state.rho.values()) {
                grad_sup = grad_sup.max(g.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            }
            Ok(())
        },
        |_| {},
    )?;

    let h = params.period / cfg.beam.n_tau as f64 / 8.0;
    let region = cone_mask(&cone, t_star, &grid)?;
    let resid = residual_at(&rec, &params, t_star, h, viscous, Some(&region))?;
    Ok(PairSeries {
        eps,
        t_star,
        times: rows.iter().map(|r| r.0).collect(),
        diff_phys: rows.iter().map(|r| r.1).collect(),
        diff_prof: rows.iter().map(|r| r.2).collect(),
        diff_sum_prof: rows.iter().map(|r| r.3).collect(),
        resid_norm: profile_measure(resid, eps, n),
        grad_sup,
    })
}

/// Physical-measure residual at time `t` from five states spaced by `h`.
fn residual_at(rec: &Reconstructor, p: &ModelParams, t: f64, h: f64, viscous: bool, region: Option<&Field>) -> Result<f64> {
    let states: Vec<ReconstructedState> = (-2..=2).map(|j| rec.state_at(t + j as f64 * h)).collect::<Result<_>>()?;
    Ok(ansatz_residual_norm_on(&states, p, viscous, region)?[0].1)
}

fn value_at(series: &PairSeries, t: f64, values: &[f64]) -> f64 {
    let i = series.times.iter().position(|s| (s - t).abs() < 1e-12).unwrap();
    values[i]
}

fn run_all(cfg: &ExperimentConfig, viscous: bool, times_for: impl Fn(f64) -> (Vec<f64>, f64) + Sync) -> Result<Vec<PairSeries>> {
    cfg.validate()?;
    // Independent jobs, collected in ε order.
    cfg.eps_list
        .par_iter()
        .map(|&eps| {
            let (times, t_star) = times_for(eps);
            run_pair(cfg, eps, viscous, &times, t_star)
        })
        .collect()
}

/// Inviscid comparison at the fixed scaled time `t* = θ/ε` (`params.nu` is ignored).
pub fn inviscid_cone_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let samples = cfg.samples;
    let theta = cfg.theta;
    let series = run_all(cfg, false, |eps| {
        let t_star = theta / eps;
        ((0..samples).map(|k| t_star * k as f64 / (samples - 1) as f64).collect(), t_star)
    })?;
    let pairs: Vec<(f64, f64)> = series.iter().map(|s| (s.eps, value_at(s, s.t_star, &s.diff_prof))).collect();
    let report = scaling_fit(&pairs)?;
    let mut checks = vec![slope_check("slope", &report)];
    let at_zero: Vec<f64> = series.iter().map(|s| s.diff_phys[0]).collect();
    checks.push(Check {
        name: "zero-initial-difference",
        passed: at_zero.iter().all(|d| *d == 0.0),
        detail: format!("difference at t=0: {at_zero:?}"),
    });
    let mut monotone = true;
    let mut detail = String::new();
    for s in &series {
        let quarter: Vec<f64> =
            s.times.iter().zip(&s.diff_phys).filter(|(t, _)| **t <= 0.25 * s.t_star * (1.0 + 1e-12)).map(|(_, d)| d * d).collect();
        let ok = quarter.windows(2).all(|w| w[1] >= w[0]);
        monotone &= ok;
        let _ = write!(detail, "eps={}: {} samples {}; ", s.eps, quarter.len(), if ok { "nondecreasing" } else { "DECREASING" });
    }
    checks.push(Check { name: "squared-difference-nondecreasing", passed: monotone, detail });
    checks.push(gradient_check(&series));
    Ok(ExperimentOutput { report, series, checks })
}

/// The exact solution's density gradient should stay O(ε): sup|∇ρ|/ε roughly constant across ε.
fn gradient_check(series: &[PairSeries]) -> Check {
    let ratios: Vec<f64> = series.iter().map(|s| s.grad_sup / s.eps).collect();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(*r), hi.max(*r)));
    Check { name: "gradient-monitor", passed: hi <= 4.0 * lo, detail: format!("sup|grad rho|/eps per eps: {ratios:?}") }
}

fn slope_check(name: &'static str, report: &ScalingReport) -> Check {
    Check {
        name,
        passed: (2.0..=3.0).contains(&report.fitted_slope),
        detail: format!(
            "slope {:.4} (local {:?}), fit residual {:.2e}",
            report.fitted_slope,
            report.local_slopes().iter().map(|s| (s * 1e3).round() / 1e3).collect::<Vec<_>>(),
            report.residual_of_fit
        ),
    }
}

/// Long-time horizon `(T/ε)·ln(1/ε)`.
pub fn long_horizon(cfg: &ExperimentConfig, eps: f64) -> f64 {
    cfg.horizon_t / eps * (1.0 / eps).ln()
}

/// Sample times for the viscous experiment: 0, then geometric from
/// `early_start·horizon` to the horizon.
pub fn geometric_times(horizon: f64, early_start: f64, samples: usize) -> Vec<f64> {
    let t0 = early_start * horizon;
    let n = samples - 1;
    std::iter::once(0.0)
        .chain((0..n).map(|k| if k + 1 == n { horizon } else { t0 * (horizon / t0).powf(k as f64 / (n - 1) as f64) }))
        .collect()
}

/// Viscous comparison on the periodic surrogate domain.
pub fn viscous_long_time_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    if !(cfg.params.nu > 0.0) {
        return Err(Error::Param { name: "nu", reason: "the viscous experiment needs nu > 0".into() });
    }
    let (theta, samples, early) = (cfg.theta, cfg.samples, cfg.early_start);
    let series = run_all(cfg, true, |eps| (geometric_times(long_horizon(cfg, eps), early, samples), theta / eps))?;
    let pairs: Vec<(f64, f64)> = series.iter().map(|s| (s.eps, value_at(s, s.t_star, &s.diff_sum_prof))).collect();
    let report = scaling_fit(&pairs)?;
    let mut checks = vec![slope_check("slope", &report)];
    checks.push(Check {
        name: "zero-initial-difference",
        passed: series.iter().all(|s| s.diff_sum_prof[0] == 0.0),
        detail: format!("difference at t=0: {:?}", series.iter().map(|s| s.diff_sum_prof[0]).collect::<Vec<_>>()),
    });

    // Early growth exponent over the first decade of sample times.
    let mut exps = Vec::new();
    for s in &series {
        let t1 = s.times[1];
        let (xs, ys): (Vec<f64>, Vec<f64>) = s
            .times
            .iter()
            .zip(&s.diff_sum_prof)
            .filter(|(t, d)| **t >= t1 && **t <= 10.0 * t1 * (1.0 + 1e-12) && **d > 0.0)
            .map(|(t, d)| (t.ln(), d.ln()))
            .unzip();
        exps.push(least_squares(&xs, &ys).map(|f| f.0).unwrap_or(f64::NAN));
    }
    let mean_exp = exps.iter().sum::<f64>() / exps.len() as f64;
    checks.push(Check {
        name: "early-growth-exponent",
        passed: (0.3..=0.7).contains(&mean_exp),
        detail: format!("mean exponent {mean_exp:.4}, per eps {exps:?}"),
    });

    // Envelope A ε^{5/2} e^{C₂εt}: fitted on the first half of each horizon,
    // then required to bound the second half.
    let mut fit_x = Vec::new();
    let mut fit_y = Vec::new();
    for s in &series {
        let half = 0.5 * s.times.last().unwrap();
        for (t, d) in s.times.iter().zip(&s.diff_sum_prof) {
            if *t > 0.0 && *t <= half && *d > 0.0 {
                fit_x.push(s.eps * t);
                fit_y.push((d / s.eps.powf(2.5)).ln());
            }
        }
    }
    let envelope = least_squares(&fit_x, &fit_y).map(|(c2, _, _)| {
        let log_a = fit_x.iter().zip(&fit_y).map(|(x, y)| y - c2 * x).fold(f64::NEG_INFINITY, f64::max);
        (c2, log_a)
    });
    let (passed, detail) = match envelope {
        Ok((c2, log_a)) => {
            let mut worst = f64::NEG_INFINITY;
            for s in &series {
                let half = 0.5 * s.times.last().unwrap();
                for (t, d) in s.times.iter().zip(&s.diff_sum_prof) {
                    if *t > half {
                        let bound = (log_a + c2 * s.eps * t).exp() * s.eps.powf(2.5);
                        worst = worst.max(d / bound);
                    }
                }
            }
            (worst <= 1.0, format!("C2 = {c2:.4}, A = {:.4e}, max(diff/envelope) on second half = {worst:.4}", log_a.exp()))
        }
        Err(e) => (false, e.to_string()),
    };
    checks.push(Check { name: "envelope", passed, detail });
    Ok(ExperimentOutput { report, series, checks })
}

/// Configuration of the residual sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResidualConfig {
    #[serde(skip)]
    pub params: ModelParams,
    pub eps_list: Vec<f64>,
    pub beam: BeamSpec,
    /// Range in z covered by the physical grid.
    pub z_range: f64,
    /// Number of times over one τ-period.
    pub samples: usize,
    pub viscous: bool,
    pub dz_max: f64,
}

impl Default for ResidualConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::nondim(0.1),
            eps_list: vec![0.2, 0.1, 0.05, 0.025],
            beam: BeamSpec { n_tau: 128, ..BeamSpec::default() },
            z_range: 0.4,
            samples: 16,
            viscous: false,
            dz_max: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualOutput {
    pub report: ScalingReport,
    /// Per ε: RMS residual over one period, physical measure.
    pub physical: Vec<f64>,
}

/// RMS (over one τ-period) of the ansatz residual for each ε; the fit uses the profile measure.
pub fn residual_experiment(cfg: &ResidualConfig) -> Result<ResidualOutput> {
    if cfg.eps_list.len() < 3 || cfg.eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Param { name: "eps_list", reason: "need ≥ 3 strictly decreasing values".into() });
    }
    let rows: Vec<(f64, f64)> = cfg
        .eps_list
        .par_iter()
        .map(|&eps| -> Result<(f64, f64)> {
            let mut p = cfg.params.with_eps(eps).validate()?;
            if !cfg.viscous {
                p.nu = 0.0;
            }
            let i0 = cfg.beam.initial_density(&p)?;
            let prof = i0.grid().clone();
            let dtau = prof.axis(1).spacing;
            let dx1 = p.c * dtau;
            let n1 = ((cfg.z_range / (eps * dx1)).round() as usize).max(8);
            let sqrt_eps = eps.sqrt();
            let y = prof.axis(0);
            let grid = Grid::new(vec![Axis::periodic("x2", y.n, y.length() / sqrt_eps), Axis::bounded("x1", n1, dx1)])?;
            let dz = cfg.dz_max.min(stable_dz(&prof, &p, cfg.beam.amplitude)?);
            let sol = solve_kzk_with(&i0, &p, eps * n1 as f64 * dx1, dz, &KzkOptions::default())?.into_result()?;
            let rec = Reconstructor::new(&sol, &p, grid)?;
            let h = dtau / 8.0;
            let mut sq = 0.0;
            for k in 0..cfg.samples {
                let t = p.period * k as f64 / cfg.samples as f64;
                sq += residual_at(&rec, &p, t, h, cfg.viscous, None)?.powi(2);
            }
            let phys = (sq / cfg.samples as f64).sqrt();
            Ok((phys, profile_measure(phys, eps, 2)))
        })
        .collect::<Result<_>>()?;
    let pairs: Vec<(f64, f64)> = cfg.eps_list.iter().zip(&rows).map(|(e, r)| (*e, r.1)).collect();
    Ok(ResidualOutput { report: scaling_fit(&pairs)?, physical: rows.iter().map(|r| r.0).collect() })
}

/// Configuration of the KZK→NPE consistency sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransplantConfig {
    #[serde(skip)]
    pub params: ModelParams,
    pub eps_list: Vec<f64>,
    pub beam: BeamSpec,
    /// The KZK solution is computed on `[0, z_range]`.
    pub z_range: f64,
    /// Number of slow times at which the residual is averaged.
    pub samples: usize,
    pub dz_max: f64,
}

impl Default for TransplantConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::nondim(0.1).with_nu(0.01),
            eps_list: vec![0.2, 0.1, 0.05, 0.025],
            beam: BeamSpec::default(),
            z_range: 1.0,
            samples: 4,
            dz_max: 0.01,
        }
    }
}

/// RMS NPE residual of the transplanted KZK solution for each ε.
pub fn npe_consistency_experiment(cfg: &TransplantConfig) -> Result<ScalingReport> {
    let p = cfg.params.validate()?;
    let i0 = cfg.beam.initial_density(&p)?;
    let dz = cfg.dz_max.min(stable_dz(i0.grid(), &p, cfg.beam.amplitude)?);
    let sol = solve_kzk_with(&i0, &p, cfg.z_range, dz, &KzkOptions::default())?.into_result()?;
    let pairs: Vec<(f64, f64)> = cfg
        .eps_list
        .iter()
        .map(|&eps| -> Result<(f64, f64)> {
            let pe = p.with_eps(eps).validate()?;
            // z_K = cτ_N + εz_N with z_N ∈ [0, cL) must stay inside [0, z_range].
            let span = cfg.z_range - eps * p.c * p.c * p.period;
            let mut sq = 0.0;
            for k in 0..cfg.samples {
                let z0 = span * (k as f64 + 0.5) / cfg.samples as f64;
                let r = transplant_residual(&sol, &pe, z0 / p.c)?;
                sq += field_l2_norm(&r, None)?.powi(2);
            }
            Ok((eps, (sq / cfg.samples as f64).sqrt()))
        })
        .collect::<Result<_>>()?;
    scaling_fit(&pairs)
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

/// ScalingReport CSV: `eps,t_star,err_l2,resid_norm,slope,intercept,fit_residual`.
pub fn scaling_csv(out: &ExperimentOutput) -> String {
    let mut s = String::from("eps,t_star,err_l2,resid_norm,slope,intercept,fit_residual\n");
    for (series, err) in out.series.iter().zip(&out.report.error_norms) {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            fmt(series.eps),
            fmt(series.t_star),
            fmt(*err),
            fmt(series.resid_norm),
            fmt(out.report.fitted_slope),
            fmt(out.report.fitted_intercept),
            fmt(out.report.residual_of_fit)
        );
    }
    s
}

/// Time-series CSV: `eps,t,diff_phys,diff_prof,diff_sum_prof`.
pub fn series_csv(out: &ExperimentOutput) -> String {
    let mut s = String::from("eps,t,diff_phys,diff_prof,diff_sum_prof\n");
    for series in &out.series {
        for k in 0..series.times.len() {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                fmt(series.eps),
                fmt(series.times[k]),
                fmt(series.diff_phys[k]),
                fmt(series.diff_prof[k]),
                fmt(series.diff_sum_prof[k])
            );
        }
    }
    s
}

/// Generic CSV for a bare scaling report: `eps,norm,slope,intercept,fit_residual`.
pub fn report_csv(r: &ScalingReport) -> String {
    let mut s = String::from("eps,norm,slope,intercept,fit_residual\n");
    for (e, n) in r.eps_values.iter().zip(&r.error_norms) {
        let _ = writeln!(s, "{},{},{},{},{}", fmt(*e), fmt(*n), fmt(r.fitted_slope), fmt(r.fitted_intercept), fmt(r.residual_of_fit));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pairs: Vec<(f64, f64)> = [0.2, 0.1, 0.05, 0.025].iter().map(|&e: &f64| (e, 3.0 * e.powf(2.5))).collect();
        let r = scaling_fit(&pairs).unwrap();
        assert!((r.fitted_slope - 2.5).abs() < 1e-12);
        assert!((r.fitted_intercept - 3.0f64.ln()).abs() < 1e-12);
        let flat: Vec<(f64, f64)> = [0.2, 0.1, 0.05].iter().map(|&e| (e, 7.0)).collect();
        assert!(scaling_fit(&flat).unwrap().fitted_slope.abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(matches!(scaling_fit(&[(0.1, 1.0), (0.05, 1.0)]), Err(Error::DegenerateFit(_))));
        assert!(matches!(scaling_fit(&[(0.1, 1.0), (0.2, 1.0), (0.05, 1.0)]), Err(Error::DegenerateFit(_))));
        assert!(matches!(scaling_fit(&[(0.1, 1.0), (0.05, 0.0), (0.01, 1.0)]), Err(Error::DegenerateFit(_))));
        assert!(matches!(least_squares(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn order_from_errors() {
        let r = observed_order(&[1.0, 1.0 / 16.0, 1.0 / 256.0], 2.0, 1e-14).unwrap();
        assert_eq!(r.observed, ObservedOrder::Order(4.0));
        assert!(matches!(observed_order(&[1.0, 2.0, 0.5], 2.0, 1e-14), Err(Error::NonMonotoneErrors(_))));
        assert!(matches!(observed_order(&[1e-15, 2e-15, 1e-15], 2.0, 1e-13).unwrap().observed, ObservedOrder::Saturated { .. }));
    }

    #[test]
    fn smooth_step_limits() {
        assert_eq!(smooth_step(-1.0), 0.0);
        assert_eq!(smooth_step(1.0), 1.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn geometric_times_span_horizon() {
        let t = geometric_times(10.0, 1e-3, 9);
        assert_eq!(t.len(), 9);
        assert_eq!(t[0], 0.0);
        assert!((t[1] - 0.01).abs() < 1e-15);
        assert_eq!(*t.last().unwrap(), 10.0);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn profile_measure_scaling() {
        assert!((profile_measure(1.0, 0.0625, 2) - 0.125).abs() < 1e-15);
    }
}
