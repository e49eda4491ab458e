//! Cluster-robust inference via the multiplier bootstrap.
//!
//! Estimates enter as per-cluster influence contributions. Each draw
//! multiplies every cluster's contributions by an independent random
//! multiplier and recomputes the perturbed estimates; their spread gives
//! a bootstrap standard error per label and a simultaneous critical
//! value for uniform bands over all labels.
//!
//! Draws use one RNG stream per draw index derived from the seed, so
//! serial and parallel execution produce bit-identical results.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::aggregate::AggregationResult;
use crate::error::{Error, Result};

/// Multiplier distribution applied per cluster and draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Multiplier {
    /// ±1 with equal probability.
    Rademacher,
    /// Two-point distribution with mean 0, variance 1, and third moment 1:
    /// 1−φ with probability φ/√5, φ otherwise (φ the golden ratio).
    #[default]
    Mammen,
}

impl Multiplier {
    fn sample(self, rng: &mut impl Rng) -> f64 {
        match self {
            Multiplier::Rademacher => {
                if rng.random::<f64>() < 0.5 {
                    -1.0
                } else {
                    1.0
                }
            }
            Multiplier::Mammen => {
                let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
                if rng.random::<f64>() < phi / 5.0f64.sqrt() {
                    1.0 - phi
                } else {
                    phi
                }
            }
        }
    }
}

/// Bootstrap settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub n_draws: usize,
    pub multiplier: Multiplier,
    pub seed: u64,
    pub alpha: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            n_draws: 999,
            multiplier: Multiplier::Mammen,
            seed: 0,
            alpha: 0.05,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha {} outside (0, 1)",
                self.alpha
            )));
        }
        if self.n_draws < 100 {
            return Err(Error::InvalidConfig(format!(
                "band construction needs at least 100 draws, got {}",
                self.n_draws
            )));
        }
        Ok(())
    }
}

/// Inference summary produced by [`multiplier_bootstrap`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandResult {
    pub labels: Vec<String>,
    /// Robust bootstrap standard error per label (IQR of perturbed
    /// estimates divided by the normal IQR).
    pub se: Vec<f64>,
    /// z quantile at 1 − alpha/2 for pointwise intervals.
    pub pointwise_crit: f64,
    /// Simultaneous critical value: the (1 − alpha) quantile of the
    /// per-draw max of |perturbed|/se, never below the pointwise value.
    pub uniform_crit: f64,
    pub n_draws: usize,
    pub multiplier: Multiplier,
    pub seed: u64,
    pub alpha: f64,
    /// Scale estimator used for the bootstrap se.
    pub scale: String,
}

/// Empirical quantile by inverse CDF: the ceil(p·n)-th order statistic.
fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let k = ((p * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

pub(crate) fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(p)
}

/// Two-sided normal critical value for a 1 − alpha confidence interval.
pub fn normal_ci_z(alpha: f64) -> f64 {
    normal_quantile(1.0 - alpha / 2.0)
}

/// Robust spread of a draw column: interquartile range rescaled to match
/// a normal standard deviation.
pub(crate) fn robust_scale(column: &mut [f64]) -> f64 {
    column.sort_by(f64::total_cmp);
    let iqr = empirical_quantile(column, 0.75) - empirical_quantile(column, 0.25);
    iqr / (2.0 * normal_quantile(0.75))
}

/// Run the multiplier bootstrap over per-cluster influence contributions,
/// one map per labeled estimate. Clusters missing from a map contribute
/// zero to that estimate.
pub fn multiplier_bootstrap(
    influence: &[(String, BTreeMap<String, f64>)],
    cfg: &BootstrapConfig,
) -> Result<BandResult> {
    cfg.validate()?;

    let clusters: BTreeSet<&String> =
        influence.iter().flat_map(|(_, m)| m.keys()).collect();
    let clusters: Vec<&String> = clusters.into_iter().collect();
    if clusters.len() < 2 {
        return Err(Error::TooFewClusters(clusters.len()));
    }

    for (label, map) in influence {
        let sum: f64 = map.values().sum();
        let scale: f64 = map.values().map(|v| v.abs()).sum();
        if sum.abs() > 1e-6 * scale.max(1.0) {
            return Err(Error::UncenteredInfluence {
                label: label.clone(),
                sum,
            });
        }
    }

    // dense layout: psi[estimate][cluster]
    let psi: Vec<Vec<f64>> = influence
        .iter()
        .map(|(_, m)| clusters.iter().map(|c| m.get(*c).copied().unwrap_or(0.0)).collect())
        .collect();

    // perturbed estimates, draw-major; one RNG stream per draw
    let perturbed: Vec<Vec<f64>> = (0..cfg.n_draws)
        .into_par_iter()
        .map(|draw| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(draw as u64);
            let multipliers: Vec<f64> =
                clusters.iter().map(|_| cfg.multiplier.sample(&mut rng)).collect();
            psi.iter()
                .map(|row| row.iter().zip(&multipliers).map(|(p, v)| p * v).sum())
                .collect()
        })
        .collect();

    let se: Vec<f64> = (0..influence.len())
        .map(|i| {
            let mut column: Vec<f64> = perturbed.iter().map(|d| d[i]).collect();
            robust_scale(&mut column)
        })
        .collect();

    let pointwise_crit = normal_quantile(1.0 - cfg.alpha / 2.0);
    let mut max_stats: Vec<f64> = perturbed
        .iter()
        .filter_map(|d| {
            d.iter()
                .zip(&se)
                .filter(|(_, s)| **s > 0.0)
                .map(|(p, s)| (p / s).abs())
                .max_by(f64::total_cmp)
        })
        .collect();
    let uniform_crit = if max_stats.is_empty() {
        pointwise_crit
    } else {
        max_stats.sort_by(f64::total_cmp);
        // never narrower than the pointwise interval
        empirical_quantile(&max_stats, 1.0 - cfg.alpha).max(pointwise_crit)
    };

    Ok(BandResult {
        labels: influence.iter().map(|(l, _)| l.clone()).collect(),
        se,
        pointwise_crit,
        uniform_crit,
        n_draws: cfg.n_draws,
        multiplier: cfg.multiplier,
        seed: cfg.seed,
        alpha: cfg.alpha,
        scale: "iqr/1.349".into(),
    })
}

/// Fill an aggregation's confidence fields from a bootstrap run: the
/// reported se becomes the bootstrap se, pointwise intervals use the
/// normal critical value, uniform bands the simultaneous one.
pub fn attach_bands(agg: &AggregationResult, band: &BandResult) -> Result<AggregationResult> {
    let labels: Vec<&str> = agg.estimates.iter().map(|e| e.label.as_str()).collect();
    let band_labels: Vec<&str> = band.labels.iter().map(String::as_str).collect();
    if labels != band_labels {
        return Err(Error::LabelMismatch(format!(
            "aggregation has {labels:?}, bands have {band_labels:?}"
        )));
    }
    let mut out = agg.clone();
    for (est, &se) in out.estimates.iter_mut().zip(&band.se) {
        est.se = se;
        est.ci = Some((
            est.estimate - band.pointwise_crit * se,
            est.estimate + band.pointwise_crit * se,
        ));
        est.ucb = Some((
            est.estimate - band.uniform_crit * se,
            est.estimate + band.uniform_crit * se,
        ));
    }
    Ok(out)
}
