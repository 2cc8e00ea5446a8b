//! Command-line driver: `paraxial <command> --config run.toml --out dir`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
mod output;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use paraxial_core::hydro::{march_hydro, ConservedState, HydroOptions, LedgerRow};
use paraxial_core::kuznetsov::{solve_kuznetsov_with, KuznetsovOptions, PotentialState};
use paraxial_core::kzk::{gaussian_beam, matched_physical_grid, plane_wave, solve_kzk_with, KzkOptions, Reconstructor};
use paraxial_core::npe::{solve_npe_with, NpeOptions};
use paraxial_core::spectral::{d_dx, PeriodicAxisHandle};
use paraxial_core::validate::{
    convergence_study, npe_consistency_experiment, report_csv, residual_experiment, scaling_csv, series_csv, inviscid_cone_experiment,
    viscous_long_time_experiment, ExperimentOutput, ObservedOrder,
};
use paraxial_core::{snapshot, Axis, Field, Grid, MarchOutcome};

pub use config::{load_config, parse_config, ConfigError, Model, Preset, SimulationConfig};
pub use output::{OutputDir, DIGEST_FILE, MANIFEST_FILE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Core(#[from] paraxial_core::Error),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("output directory {dir} holds results for config digest {found}; refusing to mix runs")]
    DigestMismatch { dir: String, found: String },
    #[error("numerical failure: {error}; state written to {path}")]
    Numerical { error: paraxial_core::Error, variable: &'static str, last_good: f64, path: String },
}

impl CliError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), reason: e.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical { .. } => EXIT_NUMERICAL,
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "paraxial", version, about = "Kuznetsov/KZK/NPE solvers and paraxial-approximation validation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for independent jobs (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Parameter preset for keys missing from [params].
    #[arg(long, value_enum, default_value_t = Preset::Nondim)]
    preset: Preset,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// March the Kuznetsov equation for the velocity potential.
    SolveKuznetsov(Common),
    /// March the KZK equation in z.
    SolveKzk(Common),
    /// March the NPE equation in τ.
    SolveNpe(Common),
    /// March the isentropic Euler / Navier-Stokes system.
    SolveHydro(Common),
    /// Solve KZK and write the reconstructed physical fields.
    Reconstruct(Common),
    /// ε-sweep of the ansatz residual.
    Residual(Common),
    /// Inviscid cone comparison against the hydro solver.
    ValidateT1(Common),
    /// Viscous comparison on the periodic domain.
    ValidateT2(Common),
    /// ε-sweep of the NPE residual of transplanted KZK solutions.
    ValidateNpe(Common),
    /// Refinement study of one solver.
    Convergence(Common),
}

impl Command {
    fn name_and_args(&self) -> (&'static str, &Common) {
        match self {
            Command::SolveKuznetsov(c) => ("solve-kuznetsov", c),
            Command::SolveKzk(c) => ("solve-kzk", c),
            Command::SolveNpe(c) => ("solve-npe", c),
            Command::SolveHydro(c) => ("solve-hydro", c),
            Command::Reconstruct(c) => ("reconstruct", c),
            Command::Residual(c) => ("residual", c),
            Command::ValidateT1(c) => ("validate-t1", c),
            Command::ValidateT2(c) => ("validate-t2", c),
            Command::ValidateNpe(c) => ("validate-npe", c),
            Command::Convergence(c) => ("convergence", c),
        }
    }
}

/// Parses `argv` (including the program name), runs the command and returns the exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run(command: &Command) -> Result<(), CliError> {
    let (name, args) = command.name_and_args();
    let cfg = load_config(&args.config, args.preset)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.workers {
        if n == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut out = OutputDir::open(&args.out, &cfg.digest(), name)?;
    info!("{name}: config digest {}", cfg.digest());
    pool.install(|| match command {
        Command::SolveKuznetsov(_) => solve_kuznetsov_cmd(&cfg, &mut out),
        Command::SolveKzk(_) => solve_profile_cmd(&cfg, &mut out, Model::Kzk),
        Command::SolveNpe(_) => solve_profile_cmd(&cfg, &mut out, Model::Npe),
        Command::SolveHydro(_) => solve_hydro_cmd(&cfg, &mut out),
        Command::Reconstruct(_) => reconstruct_cmd(&cfg, &mut out),
        Command::Residual(_) => residual_cmd(&cfg, &mut out),
        Command::ValidateT1(_) => experiment_cmd(&cfg, &mut out, false),
        Command::ValidateT2(_) => experiment_cmd(&cfg, &mut out, true),
        Command::ValidateNpe(_) => validate_npe_cmd(&cfg, &mut out),
        Command::Convergence(_) => convergence_cmd(&cfg, &mut out),
    })?;
    out.finish()
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

fn require_model(cfg: &SimulationConfig, model: Model) -> Result<(), CliError> {
    match cfg.model {
        Some(m) if m == model => Ok(()),
        other => Err(CliError::Usage(format!("this command needs model = {model:?} in the config, found {other:?}"))),
    }
}

fn build_grid(cfg: &SimulationConfig) -> Result<std::sync::Arc<Grid>, CliError> {
    let spec = cfg.grid.as_ref().ok_or_else(|| CliError::Usage("missing [grid] table".into()))?;
    Ok(Grid::new(spec.axes.iter().map(|a| Axis::periodic(&a.name, a.n, a.length)).collect())?)
}

/// The configured initial profile on the configured grid (or the snapshot's own grid).
fn initial_field(cfg: &SimulationConfig) -> Result<Field, CliError> {
    let init = &cfg.initial;
    Ok(match init.profile {
        config::Profile::Snapshot => snapshot::load(init.path.as_ref().expect("validated"))?,
        config::Profile::GaussianBeam => gaussian_beam(&build_grid(cfg)?, init.amplitude, init.width)?,
        config::Profile::PlaneWave => plane_wave(&build_grid(cfg)?, init.amplitude)?,
    })
}

fn march_block(cfg: &SimulationConfig) -> Result<&config::MarchBlock, CliError> {
    cfg.march.as_ref().ok_or_else(|| CliError::Usage("missing [march] table".into()))
}

/// Writes every stored slice and a summary; on failure also writes the last good state.
fn write_trajectory(out: &mut OutputDir, outcome: MarchOutcome) -> Result<(), CliError> {
    let sol = outcome.solution;
    let mut summary = format!("{},component,l2,max_abs\n", sol.variable);
    for (i, slice) in sol.slices.iter().enumerate() {
        for (c, f) in slice.values.iter().enumerate() {
            out.save_field(&format!("{}_{i:05}.ac1", sol.components[c]), f)?;
            let _ = writeln!(summary, "{},{},{},{}", fmt(slice.at), sol.components[c], fmt(paraxial_core::field_l2_norm(f, None)?), fmt(f.max_abs()));
        }
    }
    out.write("summary.csv", summary)?;
    if let Some(error) = outcome.failure {
        let slice = sol.last_slice();
        let path = out.save_field("last_good.ac1", &slice.values[0])?;
        return Err(CliError::Numerical { error, variable: sol.variable, last_good: slice.at, path: path.display().to_string() });
    }
    Ok(())
}

fn solve_profile_cmd(cfg: &SimulationConfig, out: &mut OutputDir, model: Model) -> Result<(), CliError> {
    require_model(cfg, model)?;
    let m = march_block(cfg)?;
    let f0 = initial_field(cfg)?;
    let outcome = match model {
        Model::Kzk => {
            let opts = KzkOptions { store_every: m.store_every, ..Default::default() };
            solve_kzk_with(&f0, &cfg.params, m.end, m.step, &opts)?
        }
        _ => {
            let opts = NpeOptions { store_every: m.store_every, ..Default::default() };
            solve_npe_with(&f0, &cfg.params, m.end, m.step, &opts)?
        }
    };
    write_trajectory(out, outcome)
}

/// Right-going data along the last axis: `φ_t = −c ∂φ/∂x₁`.
fn solve_kuznetsov_cmd(cfg: &SimulationConfig, out: &mut OutputDir) -> Result<(), CliError> {
    require_model(cfg, Model::Kuznetsov)?;
    let m = march_block(cfg)?;
    let phi = initial_field(cfg)?;
    let x1 = PeriodicAxisHandle::new(phi.grid(), phi.grid().ndim() - 1)?;
    let phi_t = d_dx(&phi, &x1, 1)?.scale(-cfg.params.c)?;
    let s0 = PotentialState::new(phi, phi_t, 0.0)?;
    let opts = KuznetsovOptions { store_every: m.store_every, ..Default::default() };
    let outcome = solve_kuznetsov_with(&s0, &cfg.params, m.end, m.step, &opts)?;
    write_trajectory(out, outcome)
}

/// Initial density `ρ₀ + profile`, momentum `c(ρ − ρ₀)` along the last axis.
fn solve_hydro_cmd(cfg: &SimulationConfig, out: &mut OutputDir) -> Result<(), CliError> {
    require_model(cfg, Model::Hydro)?;
    let m = march_block(cfg)?;
    let p = cfg.params;
    let pert = initial_field(cfg)?;
    let grid = pert.grid().clone();
    let nd = grid.ndim();
    let rho = pert.map(|v| p.rho0 + v)?;
    let momentum = (0..nd)
        .map(|d| if d == nd - 1 { pert.scale(p.c) } else { Ok(Field::zeros(grid.clone())) })
        .collect::<paraxial_core::Result<Vec<_>>>()?;
    let u0 = ConservedState::new(rho, momentum)?;
    let opts = HydroOptions { scheme: cfg.hydro.scheme, cfl: cfg.hydro.cfl, viscous: cfg.hydro.viscous };
    let times: Vec<f64> = (0..=m.store_every).map(|k| m.end * k as f64 / m.store_every as f64).collect();
    let mut snaps: Vec<(f64, ConservedState)> = Vec::new();
    let mut ledger: Vec<LedgerRow> = Vec::new();
    let result = march_hydro(&u0, &p, m.end, &times, &opts, |t, u| {
        snaps.push((t, u.clone()));
        Ok(())
    }, |row| ledger.push(row));
    let mut csv = String::from("t,mass,momentum_0,momentum_1,momentum_2,energy\n");
    for r in &ledger {
        let _ = writeln!(csv, "{},{},{},{},{},{}", fmt(r.t), fmt(r.mass), fmt(r.momentum[0]), fmt(r.momentum[1]), fmt(r.momentum[2]), fmt(r.energy));
    }
    out.write("ledger.csv", csv)?;
    for (k, (_, u)) in snaps.iter().enumerate() {
        out.save_field(&format!("rho_{k:05}.ac1"), &u.rho)?;
        for (d, mf) in u.momentum.iter().enumerate() {
            out.save_field(&format!("m_{}_{k:05}.ac1", grid.axis(d).name), mf)?;
        }
    }
    if let Err(error) = result {
        let (t, u) = snaps.last().map(|(t, u)| (*t, u)).unwrap_or((0.0, &u0));
        let path = out.save_field("last_good.ac1", &u.rho)?;
        return Err(CliError::Numerical { error, variable: "t", last_good: t, path: path.display().to_string() });
    }
    Ok(())
}

fn reconstruct_cmd(cfg: &SimulationConfig, out: &mut OutputDir) -> Result<(), CliError> {
    require_model(cfg, Model::Kzk)?;
    let m = march_block(cfg)?;
    let block = cfg.reconstruct.as_ref().ok_or_else(|| CliError::Usage("missing [reconstruct] table".into()))?;
    let i0 = initial_field(cfg)?;
    let sol = solve_kzk_with(&i0, &cfg.params, m.end, m.step, &KzkOptions::default())?.into_result()?;
    let grid = matched_physical_grid(i0.grid(), &cfg.params, block.n1, block.stride)?;
    let rec = Reconstructor::new(&sol, &cfg.params, grid.clone())?;
    for (k, &t) in block.times.iter().enumerate() {
        let s = rec.state_at(t)?;
        out.save_field(&format!("rho_{k:05}.ac1"), &s.rho_bar)?;
        for (d, u) in s.velocity.iter().enumerate() {
            out.save_field(&format!("u_{}_{k:05}.ac1", grid.axis(d).name), u)?;
        }
    }
    let mut times = String::from("index,t\n");
    for (k, t) in block.times.iter().enumerate() {
        let _ = writeln!(times, "{k},{}", fmt(*t));
    }
    out.write("times.csv", times)?;
    Ok(())
}

fn residual_cmd(cfg: &SimulationConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let rc = cfg.residual()?;
    let mut res = residual_experiment(&rc)?;
    res.report.metadata = cfg.digest();
    let mut csv = String::from("eps,resid_profile,resid_physical,slope,intercept,fit_residual\n");
    for ((e, n), ph) in res.report.eps_values.iter().zip(&res.report.error_norms).zip(&res.physical) {
        let r = &res.report;
        let _ = writeln!(csv, "{},{},{},{},{},{}", fmt(*e), fmt(*n), fmt(*ph), fmt(r.fitted_slope), fmt(r.fitted_intercept), fmt(r.residual_of_fit));
    }
    out.write("residual.csv", csv)?;
    out.write("plot.gp", gnuplot("residual.csv", 2, "ansatz residual"))?;
    println!("residual slope {:.4} (fit residual {:.2e})", res.report.fitted_slope, res.report.residual_of_fit);
    Ok(())
}

fn experiment_cmd(cfg: &SimulationConfig, out: &mut OutputDir, viscous: bool) -> Result<(), CliError> {
    let ec = cfg.experiment()?;
    let mut result: ExperimentOutput = if viscous { viscous_long_time_experiment(&ec)? } else { inviscid_cone_experiment(&ec)? };
    result.report.metadata = cfg.digest();
    out.write("scaling.csv", scaling_csv(&result))?;
    out.write("series.csv", series_csv(&result))?;
    let mut checks = String::from("check,passed,detail\n");
    for c in &result.checks {
        let _ = writeln!(checks, "{},{},\"{}\"", c.name, c.passed, c.detail.replace('"', "'"));
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    out.write("checks.csv", checks)?;
    out.write("plot.gp", gnuplot("scaling.csv", 3, "cone difference"))?;
    if !result.report.in_asymptotic_regime() {
        println!("warning: local slopes {:?} stray from the fit; data may be outside the asymptotic regime", result.report.local_slopes());
    }
    Ok(())
}

fn validate_npe_cmd(cfg: &SimulationConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let mut report = npe_consistency_experiment(&cfg.transplant()?)?;
    report.metadata = cfg.digest();
    out.write("npe_consistency.csv", report_csv(&report))?;
    out.write("plot.gp", gnuplot("npe_consistency.csv", 2, "NPE residual"))?;
    println!("npe consistency slope {:.4} (fit residual {:.2e})", report.fitted_slope, report.residual_of_fit);
    Ok(())
}

fn convergence_cmd(cfg: &SimulationConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let block = cfg.convergence.as_ref().ok_or_else(|| CliError::Usage("missing [convergence] table".into()))?;
    let mut csv = String::from("resolution,error,order\n");
    match convergence_study(block.study, &block.resolutions) {
        Ok(r) => {
            // Self-convergence studies report one difference per consecutive pair.
            let offset = block.resolutions.len() - r.errors.len();
            for (i, e) in r.errors.iter().enumerate() {
                let order = if i == 0 { String::new() } else { fmt(r.orders[i - 1]) };
                let _ = writeln!(csv, "{},{},{}", block.resolutions[i + offset], fmt(*e), order);
            }
            match r.observed {
                ObservedOrder::Order(o) => println!("observed order {o:.4}"),
                ObservedOrder::Saturated { floor } => println!("saturated at round-off (largest error {floor:.3e})"),
            }
        }
        Err(paraxial_core::Error::NonMonotoneErrors(errors)) => {
            for (r, e) in block.resolutions.iter().zip(&errors) {
                let _ = writeln!(csv, "{r},{},", fmt(*e));
            }
            println!("warning: errors do not decrease monotonically: {errors:?}");
        }
        Err(e) => return Err(e.into()),
    }
    out.write("convergence.csv", csv)?;
    Ok(())
}

fn gnuplot(csv: &str, column: usize, title: &str) -> String {
    format!(
        "set datafile separator ','\nset key autotitle columnhead\nset logscale xy\nset xlabel 'eps'\nset ylabel '{title}'\nplot '{csv}' using 1:{column} with linespoints title '{title}'\n"
    )
}
