//! `coxrs`: solve, sweep and calibrate the RS overfitting theory of ridge Cox
//! regression, simulate cohorts, and compare theory against fitted data.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use coxrs::harness::{run_experiment, ExperimentOptions};
use coxrs::io::{
    write_cohort_csv, write_csv, write_csv_file, write_json_file, CalibrationRow, CohortMeta,
    CompareRow, RsRow,
};
use coxrs::rs::{
    calibrate_eta, ml_limit_solve, rs_solve, rs_solve_or_asymptotic, rs_sweep,
    verify_penalty_equivalence, CalibrateOptions, ModelParams,
};
use coxrs::sim::generate_cohort;
use coxrs::special::{lambert_w0, log_gauss_laguerre};
use coxrs::EULER_GAMMA;

use config::{Flags, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] coxrs::Error),
    #[error("{failed} of {total} grid points failed")]
    Incomplete { failed: usize, total: usize },
    #[error("{0} self-check(s) failed")]
    Check(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_convergence_failure() => 2,
            CliError::Core(_) => 1,
            CliError::Incomplete { .. } | CliError::Check(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "coxrs",
    version,
    about = "Overfitting theory for ridge-penalized Cox regression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the RS equations at one (zeta, eta) and print the CSV row.
    Solve(Flags),
    /// Solve along a zeta grid with warm starts.
    Sweep(Flags),
    /// Find the eta giving an unbiased slope at each zeta.
    Calibrate(Flags),
    /// Write one synthetic cohort to CSV.
    Simulate(Flags),
    /// Fit replicated cohorts and tabulate them against theory.
    Compare(Flags),
    /// Run the analytic invariant checks.
    Selfcheck(Flags),
}

#[derive(Serialize)]
struct Metadata<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: &'a RunConfig,
    result: T,
}

fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

/// Rows to `--out` (plus a JSON sidecar) or to stdout.
fn emit<R: Serialize, T: Serialize>(
    cfg: &RunConfig,
    command: &str,
    rows: &[R],
    result: T,
) -> Result<(), CliError> {
    match &cfg.out {
        Some(out) => {
            write_csv_file(out, rows)?;
            let meta = Metadata {
                command,
                version: env!("CARGO_PKG_VERSION"),
                seed: cfg.seed,
                config: cfg,
                result,
            };
            write_json_file(&sidecar_path(out), &meta)?;
        }
        None => write_csv(std::io::stdout().lock(), rows)?,
    }
    Ok(())
}

fn solve(cfg: &RunConfig) -> Result<(), CliError> {
    let mp = ModelParams::new(cfg.zeta()?, cfg.eta, cfg.s, cfg.spectrum()?)?;
    let opts = cfg.solve_options()?;
    let sol = rs_solve_or_asymptotic(&mp, &opts)?;
    if sol.asymptotic {
        log::warn!(
            "zeta = {} is below the solver range; reporting small-zeta values",
            mp.zeta
        );
    }
    let row = RsRow::new(&mp, &sol);
    if cfg.out.is_some() {
        write_csv(std::io::stdout().lock(), std::slice::from_ref(&row))?;
    }
    emit(cfg, "solve", &[row], &sol)
}

fn sweep(cfg: &RunConfig) -> Result<(), CliError> {
    let grid = cfg.grid();
    let template = ModelParams::new(grid[0], cfg.eta, cfg.s, cfg.spectrum()?)?;
    let opts = cfg.solve_options()?;
    let points = rs_sweep(&template, &grid, &opts)?;
    let mut rows = Vec::with_capacity(points.len());
    for pt in &points {
        match &pt.result {
            Ok(sol) => rows.push(RsRow::new(&template.with_zeta(pt.zeta), sol)),
            Err(e) => log::warn!("zeta = {}: {e}", pt.zeta),
        }
    }
    emit(cfg, "sweep", &rows, &rows)?;
    incomplete(points.len() - rows.len(), points.len())
}

fn incomplete(failed: usize, total: usize) -> Result<(), CliError> {
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Incomplete { failed, total })
    }
}

fn calibrate(cfg: &RunConfig) -> Result<(), CliError> {
    let grid = match (cfg.zeta, &cfg.zeta_grid) {
        (Some(z), None) => vec![z],
        _ => cfg.grid(),
    };
    let spectrum = cfg.spectrum()?;
    let opts = CalibrateOptions {
        solve: cfg.solve_options()?,
        ..CalibrateOptions::default()
    };
    let mut results = Vec::with_capacity(grid.len());
    for &zeta in &grid {
        match calibrate_eta(zeta, cfg.s, &spectrum, &opts) {
            Ok(c) => results.push(c),
            Err(e) if grid.len() > 1 && e.is_convergence_failure() => {
                log::warn!("zeta = {zeta}: {e}")
            }
            Err(e) => return Err(e.into()),
        }
    }
    let rows: Vec<CalibrationRow> = results.iter().map(CalibrationRow::from).collect();
    emit(cfg, "calibrate", &rows, &results)?;
    incomplete(grid.len() - rows.len(), grid.len())
}

fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let out = cfg
        .out
        .as_ref()
        .ok_or_else(|| CliError::Usage("simulate needs --out".into()))?;
    let cohort = generate_cohort(&cfg.cohort(cfg.zeta)?, cfg.replicate)?;
    write_cohort_csv(&cohort, out)?;
    let meta = Metadata {
        command: "simulate",
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config: cfg,
        result: CohortMeta::from(&cohort),
    };
    write_json_file(&sidecar_path(out), &meta)?;
    Ok(())
}

fn compare(cfg: &RunConfig) -> Result<(), CliError> {
    let zetas: Vec<Option<f64>> = match (&cfg.zeta_grid, cfg.zeta) {
        (Some(g), _) => g.iter().copied().map(Some).collect(),
        (None, z) => vec![z],
    };
    let cohorts = zetas
        .into_iter()
        .map(|z| cfg.cohort(z))
        .collect::<Result<Vec<_>, _>>()?;
    if !(cfg.eta >= 0.0 && cfg.eta.is_finite()) {
        return Err(CliError::Usage(format!(
            "eta must be nonnegative, got {}",
            cfg.eta
        )));
    }
    let opts = ExperimentOptions {
        solve: cfg.solve_options()?,
        ..ExperimentOptions::default()
    };
    let summaries = cohorts
        .iter()
        .map(|c| run_experiment(c, cfg.eta, cfg.replicates, cfg.jobs, &opts))
        .collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<CompareRow> = summaries.iter().map(CompareRow::from).collect();
    emit(cfg, "compare", &rows, &summaries)
}

fn selfcheck(cfg: &RunConfig) -> Result<(), CliError> {
    let opts = cfg.solve_options()?;
    let mut checks: Vec<(&str, bool, String)> = Vec::new();

    let euler = (log_gauss_laguerre(cfg.quad_laguerre)?.integrate(f64::ln) + EULER_GAMMA).abs();
    checks.push(("euler constant", euler < 1e-8, format!("error {euler:.2e}")));

    let lambert = (0..=240)
        .map(|i| 10f64.powf(-12.0 + 0.1 * i as f64))
        .map(|x| lambert_w0(x).map(|w| (w * w.exp() - x).abs() / x.max(1.0)))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(0.0, f64::max);
    checks.push((
        "lambert w",
        lambert <= 1e-12,
        format!("max self-consistency error {lambert:.2e}"),
    ));

    let ml = ml_limit_solve(0.5, 1.0, &coxrs::Spectrum::identity(), &opts)?.params;
    let tiny = rs_solve(
        &ModelParams::new(0.5, 1e-8, 1.0, coxrs::Spectrum::identity())?,
        None,
        &opts,
    )?
    .params;
    let dev = [
        (ml.u_tilde, tiny.u_tilde),
        (ml.v, tiny.v),
        (ml.w, tiny.w),
        (ml.rho, tiny.rho),
        (ml.q, tiny.q),
    ]
    .iter()
    .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
    .fold(0.0, f64::max);
    checks.push((
        "eta -> 0 reduction",
        dev < 1e-4,
        format!("max deviation at zeta = 0.5: {dev:.2e}"),
    ));

    let table = verify_penalty_equivalence();
    checks.push((
        "penalty table",
        table.is_ok(),
        table
            .err()
            .map_or("lambda = 2 eta zeta on all rows".into(), |e| e.to_string()),
    ));

    let mut stdout = std::io::stdout().lock();
    let mut failed = 0;
    for (name, ok, detail) in &checks {
        failed += usize::from(!ok);
        writeln!(
            stdout,
            "[{}] {name}: {detail}",
            if *ok { "PASS" } else { "FAIL" }
        )
        .map_err(coxrs::Error::from)?;
    }
    if failed > 0 {
        Err(CliError::Check(failed))
    } else {
        Ok(())
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, flags) = match &cli.command {
        Command::Solve(f) => ("solve", f),
        Command::Sweep(f) => ("sweep", f),
        Command::Calibrate(f) => ("calibrate", f),
        Command::Simulate(f) => ("simulate", f),
        Command::Compare(f) => ("compare", f),
        Command::Selfcheck(f) => ("selfcheck", f),
    };
    let cfg = RunConfig::resolve(flags)?;
    log::info!("{name} with {cfg:?}");
    match cli.command {
        Command::Solve(_) => solve(&cfg),
        Command::Sweep(_) => sweep(&cfg),
        Command::Calibrate(_) => calibrate(&cfg),
        Command::Simulate(_) => simulate(&cfg),
        Command::Compare(_) => compare(&cfg),
        Command::Selfcheck(_) => selfcheck(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
