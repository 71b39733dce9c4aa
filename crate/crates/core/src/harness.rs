//! Replicated simulation experiments compared against RS theory.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_ridge_cox, FitOptions, StepFunction};
use crate::rs::{rs_solve, ModelParams, OrderParams, SolveOptions};
use crate::sim::{generate_cohort, replicate_seed, CohortConfig, Correlation};

/// Slope `κ̂ = β⁰·Ab̂ / β⁰·Aβ⁰` and width `v̂ = √max(0, p⁻¹b̂·Ab̂ − κ̂²S̃²)`,
/// with `S̃² = p⁻¹β⁰·Aβ⁰`.
pub fn estimate_cloud_stats(
    beta0: &[f64],
    b_hat: &[f64],
    correlation: &Correlation,
) -> Result<(f64, f64)> {
    if beta0.len() != b_hat.len() {
        return Err(Error::Parameter(format!(
            "beta0 and b_hat differ in length ({} vs {})",
            beta0.len(),
            b_hat.len()
        )));
    }
    let p = beta0.len() as f64;
    let a_beta = correlation.apply(beta0);
    let bab: f64 = beta0.iter().zip(&a_beta).map(|(x, y)| x * y).sum();
    if !(bab > 0.0) {
        return Err(Error::Degenerate("true association vector is zero".into()));
    }
    let kappa = a_beta.iter().zip(b_hat).map(|(x, y)| x * y).sum::<f64>() / bab;
    let a_b = correlation.apply(b_hat);
    let quad = b_hat.iter().zip(&a_b).map(|(x, y)| x * y).sum::<f64>() / p;
    let v2 = quad - kappa * kappa * bab / p;
    Ok((kappa, v2.max(0.0).sqrt()))
}

/// Fits `log Λ̂(tᵢ) = log k̂ + ρ̂ log(λ₀tᵢ)` by least squares over the event
/// times, dropping the earliest 5% of jumps.
pub fn estimate_hazard_distortion(
    lambda_hat: &StepFunction,
    lambda0: f64,
    times: &[f64],
) -> Result<(f64, f64)> {
    const TRIM: f64 = 0.05;
    const MIN_POINTS: usize = 10;
    if !(lambda0 > 0.0) {
        return Err(Error::Parameter(format!(
            "lambda0 must be positive, got {lambda0}"
        )));
    }
    let mut sorted: Vec<f64> = times.iter().copied().filter(|t| *t > 0.0).collect();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let skip = (TRIM * sorted.len() as f64).ceil() as usize;
    let pts: Vec<(f64, f64)> = sorted
        .iter()
        .skip(skip)
        .filter_map(|&t| {
            let l = lambda_hat.eval(t);
            (l > 0.0).then(|| ((lambda0 * t).ln(), l.ln()))
        })
        .collect();
    if pts.len() < MIN_POINTS {
        return Err(Error::InsufficientData {
            needed: MIN_POINTS,
            got: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("all event times coincide".into()));
    }
    let rho = sxy / sxx;
    Ok(((my - rho * mx).exp(), rho))
}

/// Per-replicate estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateEstimate {
    pub replicate: u64,
    pub kappa: f64,
    pub w: f64,
    pub v: f64,
    pub k_hat: f64,
    pub rho_hat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample standard deviation; NaN for a single value.
    pub sd: f64,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            f64::NAN
        };
        MeanSd { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: CohortConfig,
    pub eta: f64,
    pub replicates: usize,
    pub failures: usize,
    pub kappa: MeanSd,
    pub w: MeanSd,
    pub v: MeanSd,
    pub k_hat: MeanSd,
    pub rho_hat: MeanSd,
    /// RS prediction at the same `(ζ, η, S, spectrum)`, when it exists.
    pub theory: Option<OrderParams>,
    /// Derived seed of each replicate, in replicate order.
    pub seeds: Vec<u64>,
    pub estimates: Vec<ReplicateEstimate>,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOptions {
    pub fit: FitOptions,
    pub solve: SolveOptions,
}

fn run_replicate(
    config: &CohortConfig,
    eta: f64,
    replicate: u64,
    fit: &FitOptions,
) -> Result<ReplicateEstimate> {
    let cohort = generate_cohort(config, replicate)?;
    let res = fit_ridge_cox(&cohort, eta, fit)?;
    let (kappa, v) = estimate_cloud_stats(&cohort.beta0, &res.b_hat, &config.correlation)?;
    let a_beta = config.correlation.apply(&cohort.beta0);
    let s_tilde = (cohort
        .beta0
        .iter()
        .zip(&a_beta)
        .map(|(x, y)| x * y)
        .sum::<f64>()
        / config.p as f64)
        .sqrt();
    let (k_hat, rho_hat) =
        estimate_hazard_distortion(&res.lambda_hat, config.lambda0, &cohort.times)?;
    Ok(ReplicateEstimate {
        replicate,
        kappa,
        w: kappa * s_tilde,
        v,
        k_hat,
        rho_hat,
    })
}

/// Fits `replicates` independent cohorts on a pool of `parallelism` threads
/// and aggregates the estimates. The summary depends only on the inputs, not
/// on the thread count.
pub fn run_experiment(
    config: &CohortConfig,
    eta: f64,
    replicates: usize,
    parallelism: usize,
    opts: &ExperimentOptions,
) -> Result<ExperimentSummary> {
    config.validate()?;
    if replicates == 0 {
        return Err(Error::Parameter(
            "at least one replicate is required".into(),
        ));
    }
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::Parameter(format!(
            "eta must be nonnegative, got {eta}"
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::Parameter(format!("cannot build thread pool: {e}")))?;
    let outcomes: Vec<Result<ReplicateEstimate>> = pool.install(|| {
        (0..replicates as u64)
            .into_par_iter()
            .map(|r| run_replicate(config, eta, r, &opts.fit))
            .collect()
    });
    let mut estimates = Vec::with_capacity(replicates);
    for (r, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(e) => estimates.push(e),
            Err(e) => log::warn!("replicate {r} failed: {e}"),
        }
    }
    let failures = replicates - estimates.len();
    let field =
        |f: fn(&ReplicateEstimate) -> f64| MeanSd::of(&estimates.iter().map(f).collect::<Vec<_>>());

    let theory = config
        .correlation
        .spectrum()
        .and_then(|sp| ModelParams::new(config.zeta(), eta, config.s, sp))
        .and_then(|mp| rs_solve(&mp, None, &opts.solve))
        .map_err(|e| log::warn!("no theory prediction: {e}"))
        .ok()
        .map(|s| s.params);

    Ok(ExperimentSummary {
        config: config.clone(),
        eta,
        replicates,
        failures,
        kappa: field(|e| e.kappa),
        w: field(|e| e.w),
        v: field(|e| e.v),
        k_hat: field(|e| e.k_hat),
        rho_hat: field(|e| e.rho_hat),
        theory,
        seeds: (0..replicates as u64)
            .map(|r| replicate_seed(config.seed, r))
            .collect(),
        estimates,
    })
}

/// Concentration of `p⁻¹β⁰·Aβ⁰` at one `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfAveragingRow {
    pub p: usize,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfAveraging {
    pub rows: Vec<SelfAveragingRow>,
    /// Least-squares slope of `log sd` against `log p`.
    pub decay_slope: f64,
}

/// Draws `β⁰` with i.i.d. `N(0, S²)` components and records mean and sample
/// sd of `p⁻¹β⁰·Aβ⁰` over `replicates` draws at each `p`.
pub fn self_averaging_study(
    p_grid: &[usize],
    correlation: &Correlation,
    s: f64,
    replicates: usize,
    seed: u64,
) -> Result<SelfAveraging> {
    if p_grid.len() < 2 || p_grid.windows(2).any(|w| w[0] >= w[1]) || p_grid[0] == 0 {
        return Err(Error::Parameter(
            "p grid must be increasing with at least two positive entries".into(),
        ));
    }
    if replicates < 2 {
        return Err(Error::Parameter(
            "at least two replicates are required".into(),
        ));
    }
    let normal = Normal::new(0.0, s).map_err(|e| Error::Parameter(e.to_string()))?;
    let mut rows = Vec::with_capacity(p_grid.len());
    for &p in p_grid {
        correlation.validate(p)?;
        let values: Vec<f64> = (0..replicates as u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(replicate_seed(seed ^ p as u64, r));
                let beta: Vec<f64> = (0..p).map(|_| normal.sample(&mut rng)).collect();
                let ab = correlation.apply(&beta);
                beta.iter().zip(&ab).map(|(x, y)| x * y).sum::<f64>() / p as f64
            })
            .collect();
        let stats = MeanSd::of(&values);
        rows.push(SelfAveragingRow {
            p,
            mean: stats.mean,
            sd: stats.sd,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.p as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.sd.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(SelfAveraging {
        rows,
        decay_slope: sxy / sxx,
    })
}
