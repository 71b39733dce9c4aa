//! Run configuration: JSON file values overridden by command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use coxrs::rs::{NewtonOptions, SolveOptions};
use coxrs::special::Quadrature;
use coxrs::{CohortConfig, Correlation, CovariateDist, Spectrum, SpectrumModel};

use crate::CliError;

/// Flags shared by every subcommand. Each one overrides the matching field of
/// the `--config` file.
#[derive(Debug, Default, Args)]
pub struct Flags {
    /// JSON file with any subset of the run configuration fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub zeta: Option<f64>,
    /// Comma-separated list, or `start:stop:step`.
    #[arg(long)]
    pub zeta_grid: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub eta: Option<f64>,
    /// Signal strength `S` of the true associations.
    #[arg(long = "S", allow_negative_numbers = true)]
    pub s: Option<f64>,
    /// `identity`, `pairwise:ε`, `rank1:ε` or `file:path`.
    #[arg(long)]
    pub spectrum: Option<String>,
    /// `gaussian`, `rademacher`, `uniform` or `t:ν`.
    #[arg(long)]
    pub covariates: Option<String>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long = "N")]
    pub n: Option<usize>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Replicate index of the cohort written by `simulate`.
    #[arg(long)]
    pub replicate: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub quad_hermite: Option<usize>,
    #[arg(long)]
    pub quad_laguerre: Option<usize>,
    /// Residual tolerance of the RS solver.
    #[arg(long)]
    pub tol: Option<f64>,
}

/// Fully resolved configuration, embedded in every JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub zeta: Option<f64>,
    pub zeta_grid: Option<Vec<f64>>,
    pub eta: f64,
    #[serde(rename = "S")]
    pub s: f64,
    pub spectrum: String,
    pub covariates: String,
    pub p: Option<usize>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub replicates: usize,
    pub replicate: u64,
    pub seed: u64,
    /// Worker threads; 0 means one per available core.
    pub jobs: usize,
    pub out: Option<PathBuf>,
    pub quad_hermite: usize,
    pub quad_laguerre: usize,
    pub tol: f64,
    pub lambda0: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            zeta: None,
            zeta_grid: None,
            eta: 0.025,
            s: 1.0,
            spectrum: "identity".into(),
            covariates: "gaussian".into(),
            p: None,
            n: None,
            replicates: 32,
            replicate: 0,
            seed: 1,
            jobs: 0,
            out: None,
            quad_hermite: Quadrature::DEFAULT_HERMITE,
            quad_laguerre: Quadrature::DEFAULT_LAGUERRE,
            tol: NewtonOptions::default().tol,
            lambda0: 1.0,
        }
    }
}

fn parse_number<T: std::str::FromStr>(what: &str, s: &str) -> Result<T, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("cannot parse {what} from '{s}'")))
}

/// `a,b,c` or `start:stop:step` (inclusive of `stop`).
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts[..] {
        [start, stop, step] => {
            let (start, stop, step): (f64, f64, f64) = (
                parse_number("grid start", start)?,
                parse_number("grid stop", stop)?,
                parse_number("grid step", step)?,
            );
            if step.is_nan() || step <= 0.0 || stop < start {
                return Err(CliError::Usage(format!("invalid grid range '{s}'")));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            Ok((0..count)
                .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
                .collect())
        }
        [_] => s
            .split(',')
            .map(|x| parse_number("grid value", x))
            .collect(),
        _ => Err(CliError::Usage(format!("invalid grid '{s}'"))),
    }
}

impl RunConfig {
    pub fn resolve(flags: &Flags) -> Result<Self, CliError> {
        let mut c = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Usage(format!("cannot read config {}: {e}", path.display()))
                })?;
                serde_json::from_str(&text).map_err(|e| {
                    CliError::Usage(format!("invalid config {}: {e}", path.display()))
                })?
            }
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = &flags.$field {
                    c.$field = v.clone().into();
                }
            };
        }
        set!(zeta);
        set!(eta);
        set!(s);
        set!(spectrum);
        set!(covariates);
        set!(p);
        set!(n);
        set!(replicates);
        set!(replicate);
        set!(seed);
        set!(jobs);
        set!(out);
        set!(quad_hermite);
        set!(quad_laguerre);
        set!(tol);
        if let Some(g) = &flags.zeta_grid {
            c.zeta_grid = Some(parse_grid(g)?);
        }
        if c.jobs == 0 {
            c.jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
        }
        Ok(c)
    }

    pub fn zeta(&self) -> Result<f64, CliError> {
        self.zeta
            .ok_or_else(|| CliError::Usage("--zeta is required".into()))
    }

    /// The ζ grid, defaulting to `0.1, 0.2, …, 2.0`.
    pub fn grid(&self) -> Vec<f64> {
        self.zeta_grid
            .clone()
            .unwrap_or_else(|| parse_grid("0.1:2.0:0.1").expect("default grid"))
    }

    pub fn solve_options(&self) -> Result<SolveOptions, CliError> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(CliError::Usage(format!(
                "--tol must be positive, got {}",
                self.tol
            )));
        }
        Ok(SolveOptions {
            newton: NewtonOptions {
                tol: self.tol,
                ..NewtonOptions::default()
            },
            quad: Quadrature::with_orders(self.quad_hermite, self.quad_laguerre)?,
            ..SolveOptions::default()
        })
    }

    fn spectrum_spec(&self) -> Result<SpectrumSpec, CliError> {
        let s = self.spectrum.trim();
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        match kind {
            "identity" if arg.is_empty() => Ok(SpectrumSpec::Model(SpectrumModel::Identity)),
            "pairwise" => Ok(SpectrumSpec::Model(SpectrumModel::Pairwise {
                epsilon: parse_number("pairwise epsilon", arg)?,
            })),
            "rank1" => Ok(SpectrumSpec::Model(SpectrumModel::UniformRankOne {
                epsilon: parse_number("rank1 epsilon", arg)?,
            })),
            "file" if !arg.is_empty() => Ok(SpectrumSpec::File(PathBuf::from(arg))),
            _ => Err(CliError::Usage(format!(
                "unknown spectrum '{s}' (expected identity, pairwise:eps, rank1:eps or file:path)"
            ))),
        }
    }

    pub fn spectrum(&self) -> Result<Spectrum, CliError> {
        Ok(match self.spectrum_spec()? {
            SpectrumSpec::Model(m) => Spectrum::from_model(&m)?,
            SpectrumSpec::File(path) => Spectrum::from_json_file(Path::new(&path))?,
        })
    }

    pub fn correlation(&self) -> Result<Correlation, CliError> {
        match self.spectrum_spec()? {
            SpectrumSpec::Model(SpectrumModel::Identity) => Ok(Correlation::Identity),
            SpectrumSpec::Model(SpectrumModel::Pairwise { epsilon }) => {
                Ok(Correlation::Pairwise { epsilon })
            }
            SpectrumSpec::Model(SpectrumModel::UniformRankOne { epsilon }) => {
                Ok(Correlation::UniformRankOne { epsilon })
            }
            _ => Err(CliError::Usage(format!(
                "spectrum '{}' has no covariate generator; use identity, pairwise:eps or rank1:eps",
                self.spectrum
            ))),
        }
    }

    pub fn covariate_dist(&self) -> Result<CovariateDist, CliError> {
        let s = self.covariates.trim();
        match s.split_once(':') {
            Some(("t", nu)) => Ok(CovariateDist::StudentT {
                nu: parse_number("student-t degrees of freedom", nu)?,
            }),
            None if s == "gaussian" => Ok(CovariateDist::Gaussian),
            None if s == "rademacher" => Ok(CovariateDist::Rademacher),
            None if s == "uniform" => Ok(CovariateDist::Uniform),
            _ => Err(CliError::Usage(format!(
                "unknown covariate distribution '{s}' (expected gaussian, rademacher, uniform or t:nu)"
            ))),
        }
    }

    /// Cohort settings at dimension `p`; `N` comes from `--N` or from `ζ`.
    pub fn cohort(&self, zeta: Option<f64>) -> Result<CohortConfig, CliError> {
        let p = self
            .p
            .ok_or_else(|| CliError::Usage("--p is required".into()))?;
        let n = match (zeta, self.n) {
            (Some(z), _) if z > 0.0 => (p as f64 / z).round() as usize,
            (Some(z), _) => return Err(CliError::Usage(format!("zeta must be positive, got {z}"))),
            (None, Some(n)) => n,
            (None, None) => return Err(CliError::Usage("either --N or --zeta is required".into())),
        };
        let cfg = CohortConfig {
            covariate_dist: self.covariate_dist()?,
            correlation: self.correlation()?,
            lambda0: self.lambda0,
            ..CohortConfig::new(p, n, self.s, self.seed)
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

enum SpectrumSpec {
    Model(SpectrumModel),
    File(PathBuf),
}
