//! CSV rows and JSON sidecars for every result type.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fit::{FitResult, StepFunction};
use crate::harness::ExperimentSummary;
use crate::rs::{Calibration, ModelParams, Solution};
use crate::sim::Cohort;

/// One RS solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsRow {
    pub zeta: f64,
    pub eta: f64,
    #[serde(rename = "S")]
    pub s: f64,
    pub spectrum: String,
    pub u_tilde: f64,
    pub v: f64,
    pub w: f64,
    pub f_tilde: f64,
    pub g_tilde: f64,
    pub q: f64,
    pub rho: f64,
    pub k: f64,
    pub kappa: f64,
    pub sigma: f64,
    #[serde(rename = "E")]
    pub e: f64,
    pub residual_norm: f64,
    pub converged: bool,
}

pub const RS_HEADER: &str =
    "zeta,eta,S,spectrum,u_tilde,v,w,f_tilde,g_tilde,q,rho,k,kappa,sigma,E,residual_norm,converged";

impl RsRow {
    pub fn new(mp: &ModelParams, sol: &Solution) -> Self {
        let op = &sol.params;
        RsRow {
            zeta: mp.zeta,
            eta: mp.eta,
            s: mp.s,
            spectrum: mp.spectrum.id().to_string(),
            u_tilde: op.u_tilde,
            v: op.v,
            w: op.w,
            f_tilde: op.f_tilde,
            g_tilde: op.g_tilde,
            q: op.q,
            rho: op.rho,
            k: op.k,
            kappa: op.kappa,
            sigma: op.sigma,
            e: op.e,
            residual_norm: sol.residual_norm,
            converged: sol.converged,
        }
    }
}

/// One calibrated prior strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub zeta: f64,
    pub eta_star: f64,
    pub lambda: f64,
    pub kappa: f64,
}

pub const CALIBRATION_HEADER: &str = "zeta,eta_star,lambda,kappa";

impl From<&Calibration> for CalibrationRow {
    fn from(c: &Calibration) -> Self {
        CalibrationRow {
            zeta: c.zeta,
            eta_star: c.eta_star,
            lambda: c.lambda,
            kappa: c.kappa,
        }
    }
}

/// Simulation versus theory for one `(ζ, η)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub zeta: f64,
    pub eta: f64,
    #[serde(rename = "S")]
    pub s: f64,
    pub spectrum: String,
    pub p: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub replicates: usize,
    pub failures: usize,
    pub kappa_mean: f64,
    pub kappa_sd: f64,
    pub w_mean: f64,
    pub w_sd: f64,
    pub v_mean: f64,
    pub v_sd: f64,
    pub k_hat_mean: f64,
    pub k_hat_sd: f64,
    pub rho_hat_mean: f64,
    pub rho_hat_sd: f64,
    pub theory_kappa: f64,
    pub theory_w: f64,
    pub theory_v: f64,
    pub theory_k: f64,
    pub theory_rho: f64,
}

pub const COMPARE_HEADER: &str = "zeta,eta,S,spectrum,p,N,replicates,failures,kappa_mean,kappa_sd,w_mean,w_sd,v_mean,v_sd,k_hat_mean,k_hat_sd,rho_hat_mean,rho_hat_sd,theory_kappa,theory_w,theory_v,theory_k,theory_rho";

impl From<&ExperimentSummary> for CompareRow {
    fn from(s: &ExperimentSummary) -> Self {
        let c = &s.config;
        let spectrum = c
            .correlation
            .spectrum()
            .map(|sp| sp.id().to_string())
            .unwrap_or_default();
        let th = |f: fn(&crate::rs::OrderParams) -> f64| s.theory.as_ref().map_or(f64::NAN, f);
        CompareRow {
            zeta: c.zeta(),
            eta: s.eta,
            s: c.s,
            spectrum,
            p: c.p,
            n: c.n,
            replicates: s.replicates,
            failures: s.failures,
            kappa_mean: s.kappa.mean,
            kappa_sd: s.kappa.sd,
            w_mean: s.w.mean,
            w_sd: s.w.sd,
            v_mean: s.v.mean,
            v_sd: s.v.sd,
            k_hat_mean: s.k_hat.mean,
            k_hat_sd: s.k_hat.sd,
            rho_hat_mean: s.rho_hat.mean,
            rho_hat_sd: s.rho_hat.sd,
            theory_kappa: th(|o| o.kappa),
            theory_w: th(|o| o.w),
            theory_v: th(|o| o.v),
            theory_k: th(|o| o.k),
            theory_rho: th(|o| o.rho),
        }
    }
}

/// Writes `rows` as CSV with a header line.
pub fn write_csv<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_csv(BufWriter::new(File::create(path)?), rows)
}

pub fn write_json_file<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Sidecar metadata of an exported cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortMeta {
    pub config: crate::sim::CohortConfig,
    pub replicate: u64,
    pub seed: u64,
    pub beta0: Vec<f64>,
}

impl From<&Cohort> for CohortMeta {
    fn from(cohort: &Cohort) -> Self {
        CohortMeta {
            config: cohort.config.clone(),
            replicate: cohort.replicate,
            seed: cohort.config.seed,
            beta0: cohort.beta0.clone(),
        }
    }
}

/// Writes `time,z1,…,zp` rows.
pub fn write_cohort_csv(cohort: &Cohort, csv_path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(csv_path)?));
    let mut header = vec!["time".to_string()];
    header.extend((1..=cohort.p()).map(|j| format!("z{j}")));
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(cohort.p() + 1);
    for i in 0..cohort.n() {
        record.clear();
        record.push(cohort.times[i].to_string());
        record.extend(cohort.z.row(i).iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Cohort rows to `csv_path` and [`CohortMeta`] to `json_path`.
pub fn write_cohort(cohort: &Cohort, csv_path: &Path, json_path: &Path) -> Result<()> {
    write_cohort_csv(cohort, csv_path)?;
    write_json_file(json_path, &CohortMeta::from(cohort))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CoefficientRow {
    index: usize,
    b_hat: f64,
}

/// Fit metadata written next to the coefficient CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub eta: f64,
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub lambda_hat: StepFunction,
}

/// Coefficients as `index,b_hat` rows plus a JSON sidecar with the Breslow
/// steps.
pub fn write_fit(fit: &FitResult, eta: f64, csv_path: &Path, json_path: &Path) -> Result<()> {
    let rows: Vec<CoefficientRow> = fit
        .b_hat
        .iter()
        .enumerate()
        .map(|(index, &b_hat)| CoefficientRow {
            index: index + 1,
            b_hat,
        })
        .collect();
    write_csv_file(csv_path, &rows)?;
    write_json_file(
        json_path,
        &FitMeta {
            eta,
            objective: fit.objective,
            grad_norm: fit.grad_norm,
            iterations: fit.iterations,
            lambda_hat: fit.lambda_hat.clone(),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rs::{rs_solve, SolveOptions};
    use crate::spectrum::Spectrum;

    fn header_of<T: Serialize>(row: &T) -> String {
        let mut buf = Vec::new();
        write_csv(&mut buf, std::slice::from_ref(row)).unwrap();
        String::from_utf8(buf)
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string()
    }

    #[test]
    fn headers_are_pinned() {
        let mp = ModelParams::new(0.2, 0.1, 1.0, Spectrum::identity()).unwrap();
        let sol = rs_solve(&mp, None, &SolveOptions::default()).unwrap();
        assert_eq!(header_of(&RsRow::new(&mp, &sol)), RS_HEADER);
        let cal = CalibrationRow {
            zeta: 1.0,
            eta_star: 0.1,
            lambda: 0.2,
            kappa: 1.0,
        };
        assert_eq!(header_of(&cal), CALIBRATION_HEADER);
    }
}
