//! Weighted two-way fixed-effects solver by alternating projections.
//!
//! Fits value ≈ unit effect + period effect by iterated weighted
//! demeaning, never materializing dummy columns. Residuals are well
//! defined even when the incidence graph is disconnected; the effect
//! values themselves are only identified per connected component, which
//! callers needing them must check.

use crate::error::{Error, Result};

/// One observation for the solver: dense unit index, dense period index,
/// weight, value.
pub type FeObs = (usize, usize, f64, f64);

/// Fitted effects, identified up to one additive constant per connected
/// component of the incidence graph.
#[derive(Debug, Clone)]
pub struct TwoWayFit {
    pub unit_effects: Vec<f64>,
    pub period_effects: Vec<f64>,
    pub iterations: usize,
}

impl TwoWayFit {
    pub fn fitted(&self, unit: usize, period: usize) -> f64 {
        self.unit_effects[unit] + self.period_effects[period]
    }

    pub fn residual(&self, obs: &FeObs) -> f64 {
        obs.3 - self.fitted(obs.0, obs.1)
    }
}

const MAX_ITERATIONS: usize = 100_000;

/// Weighted least squares of value on unit and period effects, by
/// coordinate descent until no effect moves more than `tol`.
pub fn fit_two_way(
    n_units: usize,
    n_periods: usize,
    observations: &[FeObs],
    tol: f64,
) -> Result<TwoWayFit> {
    let mut unit_weight = vec![0.0; n_units];
    let mut period_weight = vec![0.0; n_periods];
    for &(u, p, w, _) in observations {
        unit_weight[u] += w;
        period_weight[p] += w;
    }

    let mut alpha = vec![0.0; n_units];
    let mut lambda = vec![0.0; n_periods];
    let mut unit_acc = vec![0.0; n_units];
    let mut period_acc = vec![0.0; n_periods];
    for iteration in 1..=MAX_ITERATIONS {
        let mut max_change: f64 = 0.0;

        unit_acc.iter_mut().for_each(|a| *a = 0.0);
        for &(u, p, w, v) in observations {
            unit_acc[u] += w * (v - lambda[p]);
        }
        for u in 0..n_units {
            if unit_weight[u] > 0.0 {
                let new = unit_acc[u] / unit_weight[u];
                max_change = max_change.max((new - alpha[u]).abs());
                alpha[u] = new;
            }
        }

        period_acc.iter_mut().for_each(|a| *a = 0.0);
        for &(u, p, w, v) in observations {
            period_acc[p] += w * (v - alpha[u]);
        }
        for p in 0..n_periods {
            if period_weight[p] > 0.0 {
                let new = period_acc[p] / period_weight[p];
                max_change = max_change.max((new - lambda[p]).abs());
                lambda[p] = new;
            }
        }

        if max_change < tol {
            return Ok(TwoWayFit {
                unit_effects: alpha,
                period_effects: lambda,
                iterations: iteration,
            });
        }
    }
    Err(Error::NoConvergence(MAX_ITERATIONS))
}
