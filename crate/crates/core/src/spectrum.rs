//! Eigenvalue distribution `ϱ(a)` of the covariate population covariance `A`
//! and the spectral averages `⟨aʲ/(2η + g̃a)ᵏ⟩` appearing in the RS equations.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WEIGHT_TOL: f64 = 1e-12;
const RENORMALIZE_TOL: f64 = 1e-6;

/// Covariance models with a closed-form `p → ∞` spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum SpectrumModel {
    Identity,
    /// Unit diagonal, `A_{μ,μ+1} = ε` for odd `μ`.
    Pairwise {
        epsilon: f64,
    },
    /// `A = δ_{μν} + (1 − δ_{μν}) ε/√p`.
    UniformRankOne {
        epsilon: f64,
    },
    Explicit {
        atoms: Vec<(f64, f64)>,
    },
}

/// A finite mixture of eigenvalue atoms `(a_k, w_k)` with `Σ w_k = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    atoms: Vec<(f64, f64)>,
    /// Human-readable tag used in CSV output (`identity`, `pairwise:0.5`, …).
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

impl Spectrum {
    pub fn identity() -> Self {
        Spectrum {
            atoms: vec![(1.0, 1.0)],
            id: "identity".into(),
            note: None,
        }
    }

    pub fn from_model(model: &SpectrumModel) -> Result<Self> {
        match *model {
            SpectrumModel::Identity => Ok(Self::identity()),
            SpectrumModel::Pairwise { epsilon } => {
                if !(0.0..1.0).contains(&epsilon) {
                    return Err(Error::Parameter(format!(
                        "pairwise correlation requires 0 <= epsilon < 1, got {epsilon}"
                    )));
                }
                let mut s = Self::from_atoms(vec![(1.0 + epsilon, 0.5), (1.0 - epsilon, 0.5)])?;
                s.id = format!("pairwise:{epsilon}");
                Ok(s)
            }
            SpectrumModel::UniformRankOne { epsilon } => {
                if !epsilon.is_finite() {
                    return Err(Error::Parameter("epsilon must be finite".into()));
                }
                Ok(Spectrum {
                    atoms: vec![(1.0, 1.0)],
                    id: format!("rank1:{epsilon}"),
                    note: Some(format!(
                        "outlier eigenvalue 1+(p-1)*{epsilon}/sqrt(p) has weight 1/p -> 0; bulk at 1-{epsilon}/sqrt(p) -> 1"
                    )),
                })
            }
            SpectrumModel::Explicit { ref atoms } => Self::from_atoms(atoms.clone()),
        }
    }

    /// Builds a spectrum from `(eigenvalue, weight)` pairs. Weights within
    /// `1e-6` of unit total are renormalized; anything further off is
    /// rejected.
    pub fn from_atoms(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Parameter("spectrum needs at least one atom".into()));
        }
        for &(a, w) in &atoms {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::Parameter(format!(
                    "eigenvalues must be positive and finite, got {a}"
                )));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Parameter(format!(
                    "spectral weights must be positive, got {w}"
                )));
            }
        }
        let total: f64 = atoms.iter().map(|&(_, w)| w).sum();
        if (total - 1.0).abs() > RENORMALIZE_TOL {
            return Err(Error::Parameter(format!(
                "spectral weights sum to {total}, expected 1"
            )));
        }
        let atoms = if (total - 1.0).abs() > WEIGHT_TOL {
            atoms.into_iter().map(|(a, w)| (a, w / total)).collect()
        } else {
            atoms
        };
        Ok(Spectrum {
            atoms,
            id: "explicit".into(),
            note: None,
        })
    }

    /// Reads a JSON array of `[eigenvalue, weight]` pairs.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let atoms: Vec<(f64, f64)> = serde_json::from_str(&text)?;
        let mut s = Self::from_atoms(atoms)?;
        s.id = format!("file:{}", path.display());
        Ok(s)
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn note(&self) -> Option<&str> {
        self.note.as_deref()
    }

    /// `⟨a⟩`
    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|&(a, w)| w * a).sum()
    }

    /// `⟨aʲ / (2η + g̃a)ᵏ⟩`
    pub fn moment(&self, j: i32, k: i32, eta: f64, g_tilde: f64) -> Result<f64> {
        if k >= 1 && eta == 0.0 && g_tilde == 0.0 {
            return Err(Error::SingularMoment { eta, g: g_tilde });
        }
        Ok(self.moment_unchecked(j, k, eta, g_tilde))
    }

    #[inline]
    pub(crate) fn moment_unchecked(&self, j: i32, k: i32, eta: f64, g_tilde: f64) -> f64 {
        self.atoms
            .iter()
            .map(|&(a, w)| w * a.powi(j) / (2.0 * eta + g_tilde * a).powi(k))
            .sum()
    }
}

impl fmt::Display for Spectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

/// Convenience wrapper matching the operation name used in the docs.
pub fn spectral_moment(s: &Spectrum, j: i32, k: i32, eta: f64, g_tilde: f64) -> Result<f64> {
    s.moment(j, k, eta, g_tilde)
}

pub fn make_spectrum(model: &SpectrumModel) -> Result<Spectrum> {
    Spectrum::from_model(model)
}
