//! Synthetic Cox cohorts with a constant baseline hazard.
//!
//! Every random draw comes from a ChaCha stream keyed by
//! `(seed, replicate, purpose, row)`, so a cohort depends only on its key and
//! never on the order or thread in which cohorts are generated.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Open01, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{Spectrum, SpectrumModel};

/// Marginal law of the independent sources behind each covariate. All
/// choices have mean 0 and variance 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum CovariateDist {
    Gaussian,
    Rademacher,
    /// Uniform on `(−√3, √3)`.
    Uniform,
    /// Student-t with `nu > 2` degrees of freedom, scaled to unit variance.
    StudentT {
        nu: f64,
    },
}

impl CovariateDist {
    fn validate(&self) -> Result<()> {
        if let CovariateDist::StudentT { nu } = *self {
            if !(nu > 2.0 && nu.is_finite()) {
                return Err(Error::Parameter(format!(
                    "student-t covariates need nu > 2 for finite variance, got {nu}"
                )));
            }
        }
        Ok(())
    }

    fn sampler(&self) -> Result<Sampler> {
        self.validate()?;
        Ok(match *self {
            CovariateDist::Gaussian => Sampler::Gaussian,
            CovariateDist::Rademacher => Sampler::Rademacher,
            CovariateDist::Uniform => Sampler::Uniform,
            CovariateDist::StudentT { nu } => Sampler::StudentT {
                dist: StudentT::new(nu).map_err(|e| Error::Parameter(e.to_string()))?,
                scale: ((nu - 2.0) / nu).sqrt(),
            },
        })
    }
}

enum Sampler {
    Gaussian,
    Rademacher,
    Uniform,
    StudentT { dist: StudentT<f64>, scale: f64 },
}

impl Sampler {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Gaussian => rng.sample(StandardNormal),
            Sampler::Rademacher => {
                if rng.random_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            }
            Sampler::Uniform => 3f64.sqrt() * (2.0 * rng.random::<f64>() - 1.0),
            Sampler::StudentT { dist, scale } => scale * dist.sample(rng),
        }
    }
}

/// Population correlation structure of the covariates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Correlation {
    Identity,
    /// Covariates correlated in ordered pairs `(1,2), (3,4), …` with
    /// coefficient `ε`.
    Pairwise {
        epsilon: f64,
    },
    /// Every pair correlated with coefficient `ε/√p`.
    UniformRankOne {
        epsilon: f64,
    },
}

impl Correlation {
    pub fn validate(&self, p: usize) -> Result<()> {
        match *self {
            Correlation::Identity => Ok(()),
            Correlation::Pairwise { epsilon } => {
                if !(0.0..1.0).contains(&epsilon) {
                    return Err(Error::Parameter(format!(
                        "pairwise correlation needs 0 <= epsilon < 1, got {epsilon}"
                    )));
                }
                if !p.is_multiple_of(2) {
                    return Err(Error::Parameter(format!(
                        "pairwise correlation needs an even number of covariates, got p = {p}"
                    )));
                }
                Ok(())
            }
            Correlation::UniformRankOne { epsilon } => {
                if !(epsilon >= 0.0 && epsilon < (p as f64).sqrt()) {
                    return Err(Error::Parameter(format!(
                        "rank-one correlation needs 0 <= epsilon < sqrt(p), got {epsilon}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Limiting eigenvalue spectrum as `p → ∞`.
    pub fn spectrum(&self) -> Result<Spectrum> {
        Spectrum::from_model(&match *self {
            Correlation::Identity => SpectrumModel::Identity,
            Correlation::Pairwise { epsilon } => SpectrumModel::Pairwise { epsilon },
            Correlation::UniformRankOne { epsilon } => SpectrumModel::UniformRankOne { epsilon },
        })
    }

    /// Population matrix action `u ↦ Au`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        match *self {
            Correlation::Identity => u.to_vec(),
            Correlation::Pairwise { epsilon } => {
                let mut out = u.to_vec();
                for pair in 0..u.len() / 2 {
                    let (a, b) = (2 * pair, 2 * pair + 1);
                    out[a] += epsilon * u[b];
                    out[b] += epsilon * u[a];
                }
                out
            }
            Correlation::UniformRankOne { epsilon } => {
                let c = epsilon / (u.len() as f64).sqrt();
                let total: f64 = u.iter().sum();
                u.iter().map(|x| (1.0 - c) * x + c * total).collect()
            }
        }
    }
}

/// Settings for one family of synthetic cohorts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortConfig {
    pub p: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "S")]
    pub s: f64,
    pub covariate_dist: CovariateDist,
    pub correlation: Correlation,
    /// Constant baseline hazard `λ₀`, so `Λ⁰(t) = λ₀t`.
    pub lambda0: f64,
    pub seed: u64,
}

impl CohortConfig {
    /// Gaussian, uncorrelated covariates with `λ₀ = 1`.
    pub fn new(p: usize, n: usize, s: f64, seed: u64) -> Self {
        CohortConfig {
            p,
            n,
            s,
            covariate_dist: CovariateDist::Gaussian,
            correlation: Correlation::Identity,
            lambda0: 1.0,
            seed,
        }
    }

    pub fn zeta(&self) -> f64 {
        self.p as f64 / self.n as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.n == 0 {
            return Err(Error::Parameter(format!(
                "p and N must be positive, got p = {}, N = {}",
                self.p, self.n
            )));
        }
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(Error::Parameter(format!(
                "S must be positive, got {}",
                self.s
            )));
        }
        if !(self.lambda0 > 0.0 && self.lambda0.is_finite()) {
            return Err(Error::Parameter(format!(
                "lambda0 must be positive, got {}",
                self.lambda0
            )));
        }
        self.covariate_dist.validate()?;
        self.correlation.validate(self.p)
    }
}

/// One synthetic dataset; every subject has an observed event.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    /// `N × p` covariates.
    pub z: DMatrix<f64>,
    /// True associations with `p⁻¹‖β⁰‖² = S²`.
    pub beta0: Vec<f64>,
    pub times: Vec<f64>,
    pub config: CohortConfig,
    pub replicate: u64,
}

impl Cohort {
    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn p(&self) -> usize {
        self.z.ncols()
    }

    /// Risk scores `b·zᵢ/√p`.
    pub fn risk_scores(&self, b: &[f64]) -> Vec<f64> {
        let scale = 1.0 / (self.p() as f64).sqrt();
        let b = nalgebra::DVector::from_column_slice(b);
        (&self.z * b).iter().map(|r| r * scale).collect()
    }
}

const PURPOSE_ASSOCIATIONS: u64 = 0;
const PURPOSE_COVARIATES: u64 = 1;
const PURPOSE_TIMES: u64 = 2;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of replicate `replicate` under master seed `seed`.
pub fn replicate_seed(seed: u64, replicate: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ replicate)
}

fn keyed_rng(seed: u64, replicate: u64, purpose: u64, row: u64) -> ChaCha8Rng {
    let key = splitmix64(splitmix64(replicate_seed(seed, replicate) ^ purpose) ^ row);
    ChaCha8Rng::seed_from_u64(key)
}

/// I.i.d. Gaussian associations rescaled so that `p⁻¹‖β⁰‖² = S²` exactly.
pub fn draw_associations<R: Rng + ?Sized>(p: usize, s: f64, rng: &mut R) -> Result<Vec<f64>> {
    if p == 0 || !(s > 0.0 && s.is_finite()) {
        return Err(Error::Parameter(format!(
            "associations need p >= 1 and S > 0, got p = {p}, S = {s}"
        )));
    }
    let mut beta: Vec<f64> = loop {
        let draw: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        if draw.iter().any(|b: &f64| *b != 0.0) {
            break draw;
        }
    };
    let norm = (beta.iter().map(|b| b * b).sum::<f64>() / p as f64).sqrt();
    for b in &mut beta {
        *b *= s / norm;
    }
    Ok(beta)
}

fn fill_covariate_row<R: Rng + ?Sized>(
    row: &mut [f64],
    correlation: &Correlation,
    sampler: &Sampler,
    rng: &mut R,
) {
    for z in row.iter_mut() {
        *z = sampler.draw(rng);
    }
    match *correlation {
        Correlation::Identity => {}
        Correlation::Pairwise { epsilon } => {
            let tail = (1.0 - epsilon * epsilon).sqrt();
            for pair in row.chunks_exact_mut(2) {
                pair[1] = epsilon * pair[0] + tail * pair[1];
            }
        }
        Correlation::UniformRankOne { epsilon } => {
            let c = epsilon / (row.len() as f64).sqrt();
            let shared = c.sqrt() * sampler.draw(rng);
            let own = (1.0 - c).sqrt();
            for z in row.iter_mut() {
                *z = own * *z + shared;
            }
        }
    }
}

/// `N × p` covariate matrix with i.i.d. rows of population correlation `A`.
pub fn draw_covariates<R: Rng + ?Sized>(
    n: usize,
    p: usize,
    correlation: &Correlation,
    dist: &CovariateDist,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    correlation.validate(p)?;
    let sampler = dist.sampler()?;
    let mut z = DMatrix::zeros(n, p);
    let mut row = vec![0.0; p];
    for i in 0..n {
        fill_covariate_row(&mut row, correlation, &sampler, rng);
        for (j, v) in row.iter().enumerate() {
            z[(i, j)] = *v;
        }
    }
    Ok(z)
}

fn event_time<R: Rng + ?Sized>(risk: f64, lambda0: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    -u.ln() * (-risk).exp() / lambda0
}

/// Nudges exactly tied times apart by one ulp each.
fn break_ties(times: &mut [f64]) {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    for w in 1..order.len() {
        let (prev, cur) = (order[w - 1], order[w]);
        if times[cur] <= times[prev] {
            let moved = times[prev].next_up();
            log::warn!("tied event time {} perturbed to {moved}", times[cur]);
            times[cur] = moved;
        }
    }
}

/// Event times `tᵢ = −ln(Uᵢ) e^{−rᵢ}/λ₀` with `rᵢ = β⁰·zᵢ/√p`.
pub fn generate_times<R: Rng + ?Sized>(
    beta0: &[f64],
    z: &DMatrix<f64>,
    lambda0: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if z.ncols() != beta0.len() {
        return Err(Error::Parameter(format!(
            "covariate matrix has {} columns but beta0 has {} entries",
            z.ncols(),
            beta0.len()
        )));
    }
    if !(lambda0 > 0.0 && lambda0.is_finite()) {
        return Err(Error::Parameter(format!(
            "lambda0 must be positive, got {lambda0}"
        )));
    }
    let scale = 1.0 / (beta0.len() as f64).sqrt();
    let risk = z * nalgebra::DVector::from_column_slice(beta0);
    let mut times: Vec<f64> = risk
        .iter()
        .map(|r| event_time(r * scale, lambda0, rng))
        .collect();
    break_ties(&mut times);
    Ok(times)
}

/// Generates replicate `replicate` of `config`. Rows use independent keyed
/// streams, so the result is identical however cohorts are scheduled.
pub fn generate_cohort(config: &CohortConfig, replicate: u64) -> Result<Cohort> {
    config.validate()?;
    let (n, p) = (config.n, config.p);
    let beta0 = draw_associations(
        p,
        config.s,
        &mut keyed_rng(config.seed, replicate, PURPOSE_ASSOCIATIONS, 0),
    )?;
    let sampler = config.covariate_dist.sampler()?;
    let mut z = DMatrix::zeros(n, p);
    let mut row = vec![0.0; p];
    for i in 0..n {
        let mut rng = keyed_rng(config.seed, replicate, PURPOSE_COVARIATES, i as u64);
        fill_covariate_row(&mut row, &config.correlation, &sampler, &mut rng);
        for (j, v) in row.iter().enumerate() {
            z[(i, j)] = *v;
        }
    }
    let scale = 1.0 / (p as f64).sqrt();
    let risk = &z * nalgebra::DVector::from_column_slice(&beta0);
    let mut times: Vec<f64> = risk
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut rng = keyed_rng(config.seed, replicate, PURPOSE_TIMES, i as u64);
            event_time(r * scale, config.lambda0, &mut rng)
        })
        .collect();
    break_ties(&mut times);
    Ok(Cohort {
        z,
        beta0,
        times,
        config: config.clone(),
        replicate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn association_norm_is_exact() {
        let beta = draw_associations(1, 2.0, &mut rng(1)).unwrap();
        assert!((beta[0].abs() - 2.0).abs() < 1e-15);
        let beta = draw_associations(10_000, 1.0, &mut rng(2)).unwrap();
        let mean = beta.iter().sum::<f64>() / 1e4;
        assert!(mean.abs() < 3.0 / 100.0);
        assert!(draw_associations(0, 1.0, &mut rng(3)).is_err());
    }

    proptest! {
        #[test]
        fn association_norm_matches_s(p in 1usize..300, s in 0.01f64..10.0, seed in any::<u64>()) {
            let beta = draw_associations(p, s, &mut rng(seed)).unwrap();
            let norm2 = beta.iter().map(|b| b * b).sum::<f64>() / p as f64;
            prop_assert!((norm2 - s * s).abs() <= 1e-14 * s * s);
        }

        #[test]
        fn rank_one_apply_matches_dense(p in 1usize..40, eps in 0.0f64..0.9, seed in any::<u64>()) {
            let mut r = rng(seed);
            let u: Vec<f64> = (0..p).map(|_| r.sample(StandardNormal)).collect();
            let corr = Correlation::UniformRankOne { epsilon: eps };
            let c = eps / (p as f64).sqrt();
            let au = corr.apply(&u);
            for (i, got) in au.iter().enumerate() {
                let dense: f64 = u.iter().enumerate().map(|(j, x)| if i == j { *x } else { c * x }).sum();
                prop_assert!((got - dense).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_gaussian_covariance() {
        let (n, p) = (20_000, 4);
        let z = draw_covariates(
            n,
            p,
            &Correlation::Identity,
            &CovariateDist::Gaussian,
            &mut rng(5),
        )
        .unwrap();
        let cov = z.transpose() * &z / n as f64;
        for i in 0..p {
            for j in 0..p {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((cov[(i, j)] - target).abs() < 5.0 / (n as f64).sqrt());
            }
        }
    }

    #[test]
    fn pairwise_correlation_structure() {
        let n = 40_000;
        let corr = Correlation::Pairwise { epsilon: 0.5 };
        let z = draw_covariates(n, 4, &corr, &CovariateDist::Gaussian, &mut rng(6)).unwrap();
        let c = |a: usize, b: usize| z.column(a).dot(&z.column(b)) / n as f64;
        let tol = 5.0 / (n as f64).sqrt();
        assert!((c(0, 1) - 0.5).abs() < tol);
        assert!(c(1, 2).abs() < tol);
        assert!((c(1, 1) - 1.0).abs() < tol);
        assert!(draw_covariates(10, 3, &corr, &CovariateDist::Gaussian, &mut rng(6)).is_err());
    }

    #[test]
    fn non_gaussian_marginals() {
        let n = 40_000;
        let z = draw_covariates(
            n,
            3,
            &Correlation::Identity,
            &CovariateDist::Rademacher,
            &mut rng(7),
        )
        .unwrap();
        assert!(z.iter().all(|v| *v == 1.0 || *v == -1.0));
        for j in 0..3 {
            assert!(z.column(j).mean().abs() < 5.0 / (n as f64).sqrt());
        }
        for dist in [CovariateDist::Uniform, CovariateDist::StudentT { nu: 5.0 }] {
            let z = draw_covariates(n, 2, &Correlation::Identity, &dist, &mut rng(8)).unwrap();
            let var = z.iter().map(|v| v * v).sum::<f64>() / (2 * n) as f64;
            // Student-t(5) has kurtosis 9, hence the wider band.
            assert!((var - 1.0).abs() < 0.05, "{dist:?}: {var}");
        }
        let bad = CovariateDist::StudentT { nu: 2.0 };
        assert!(draw_covariates(2, 2, &Correlation::Identity, &bad, &mut rng(8)).is_err());
    }

    #[test]
    fn null_model_times_are_unit_exponential() {
        let n = 10_000;
        let z = DMatrix::zeros(n, 3);
        let t = generate_times(&[0.0; 3], &z, 1.0, &mut rng(9)).unwrap();
        let mean = t.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 4.0 / (n as f64).sqrt());
        assert!(t.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn doubled_rate_halves_mean_time() {
        // r = log 2 with p = 1: z·β/√1 = log 2.
        let n = 40_000;
        let z = DMatrix::from_element(n, 1, 2f64.ln());
        let t = generate_times(&[1.0], &z, 1.0, &mut rng(10)).unwrap();
        let mean = t.iter().sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 4.0 * 0.5 / (n as f64).sqrt());
    }

    #[test]
    fn conditional_law_passes_ks() {
        let cfg = CohortConfig::new(50, 2000, 1.0, 11);
        let c = generate_cohort(&cfg, 0).unwrap();
        let r = c.risk_scores(&c.beta0);
        let mut e: Vec<f64> = c
            .times
            .iter()
            .zip(&r)
            .map(|(t, r)| t * r.exp() * cfg.lambda0)
            .collect();
        e.sort_by(f64::total_cmp);
        let n = e.len() as f64;
        let d = e
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let f = 1.0 - (-x).exp();
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        // Asymptotic 1% critical value of the one-sample KS statistic.
        assert!(d < 1.628 / n.sqrt(), "D = {d}");
    }

    #[test]
    fn cohorts_are_keyed_and_reproducible() {
        let cfg = CohortConfig::new(20, 100, 1.0, 42);
        let a = generate_cohort(&cfg, 3).unwrap();
        let b = generate_cohort(&cfg, 3).unwrap();
        let c = generate_cohort(&cfg, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.times, c.times);
        let norm2 = a.beta0.iter().map(|b| b * b).sum::<f64>() / 20.0;
        assert!((norm2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ties_are_broken() {
        let mut t = vec![1.0, 0.5, 1.0, 1.0];
        break_ties(&mut t);
        let mut s = t.clone();
        s.sort_by(f64::total_cmp);
        s.dedup();
        assert_eq!(s.len(), 4);
    }
}
