//! Group-time average treatment effects.
//!
//! Each (g, t) cell compares the outcome change of group g between its
//! base period b = g − 1 − anticipation and period t against the same
//! change among control units, as a weighted difference-in-means (the
//! interaction coefficient of the saturated two-by-two regression, in
//! closed form). The comparison sample is the units observed in both b
//! and t. Conditional cells regression-adjust the change for binary
//! covariates fitted on controls only.
//!
//! Every estimated cell carries per-cluster influence contributions that
//! sum to zero; all downstream inference is linear in them.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::design::DesignConfig;
use crate::error::{Error, Result};
use crate::panel::{validate_design, Group, PanelDataset};

/// Estimation status of one cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Estimated,
    Missing { reason: String },
}

/// One group-time effect. Weights are total comparison weight at period
/// t; influence contributions are per-cluster and centered.
#[derive(Debug, Clone, Serialize)]
pub struct AttGtCell {
    pub g: i32,
    pub t: i32,
    pub event_time: i32,
    pub base_period: i32,
    pub att: f64,
    pub se: f64,
    pub n_treated: f64,
    pub n_control: f64,
    #[serde(skip)]
    pub influence: BTreeMap<String, f64>,
    pub status: CellStatus,
}

impl AttGtCell {
    pub fn is_estimated(&self) -> bool {
        self.status == CellStatus::Estimated
    }

    fn missing(g: i32, t: i32, base_period: i32, reason: String) -> Self {
        AttGtCell {
            g,
            t,
            event_time: t - g,
            base_period,
            att: f64::NAN,
            se: f64::NAN,
            n_treated: 0.0,
            n_control: 0.0,
            influence: BTreeMap::new(),
            status: CellStatus::Missing { reason },
        }
    }
}

/// All estimable cells plus the group weights P(G = g | retained).
#[derive(Debug, Clone, Serialize)]
pub struct AttGtTable {
    pub cells: Vec<AttGtCell>,
    pub config: DesignConfig,
    pub group_weights: BTreeMap<i32, f64>,
}

impl AttGtTable {
    pub fn estimated_cells(&self) -> impl Iterator<Item = &AttGtCell> {
        self.cells.iter().filter(|c| c.is_estimated())
    }

    pub fn cell(&self, g: i32, t: i32) -> Option<&AttGtCell> {
        self.cells.iter().find(|c| c.g == g && c.t == t)
    }
}

/// One unit observed at both ends of a comparison.
struct PairedUnit {
    unit: usize,
    cluster: usize,
    y_base: f64,
    y_t: f64,
    w_base: f64,
    w_t: f64,
}

impl PairedUnit {
    fn delta(&self) -> f64 {
        self.y_t - self.y_base
    }
}

/// Treated and control units observed at both the base period and t.
fn comparison_sample(
    ds: &PanelDataset,
    cfg: &DesignConfig,
    g: i32,
    t: i32,
) -> Result<(Vec<PairedUnit>, Vec<PairedUnit>)> {
    let base = cfg.base_period(g);
    if ds.period_index(base).is_none() {
        return Err(Error::MissingBasePeriod { g, base });
    }

    let mut treated = Vec::new();
    let mut control = Vec::new();
    for (u, info) in ds.units().iter().enumerate() {
        let is_treated = info.group == Group::Treated(g);
        if !is_treated && !cfg.is_control(info.group, g, t) {
            continue;
        }
        let (Some(cb), Some(ct)) = (ds.cell(u, base), ds.cell(u, t)) else {
            continue;
        };
        let paired = PairedUnit {
            unit: u,
            cluster: info.cluster,
            y_base: cb.outcome_mean,
            y_t: ct.outcome_mean,
            w_base: cb.n,
            w_t: ct.n,
        };
        if is_treated {
            treated.push(paired);
        } else {
            control.push(paired);
        }
    }

    let treated_weight: f64 = treated.iter().map(|p| p.w_t).sum();
    if treated.is_empty() || treated_weight <= cfg.min_comparison_weight {
        return Err(Error::EmptyTreated { g, t });
    }
    let control_weight: f64 = control.iter().map(|p| p.w_t).sum();
    if control.is_empty() || control_weight <= cfg.min_comparison_weight {
        return Err(Error::EmptyControl { g, t });
    }
    Ok((treated, control))
}

/// Weighted mean of one side of a comparison at one end.
fn slice_mean(units: &[PairedUnit], at_base: bool) -> (f64, f64) {
    let (mut wy, mut w) = (0.0, 0.0);
    for p in units {
        let (weight, y) = if at_base { (p.w_base, p.y_base) } else { (p.w_t, p.y_t) };
        wy += weight * y;
        w += weight;
    }
    (wy / w, w)
}

/// Cluster-robust standard error from centered per-cluster contributions:
/// sqrt(G/(G−1) · Σ_c ψ_c²). A single participating cluster has no
/// estimable variance; its (exactly zero) contribution yields se 0.
fn clustered_se(influence: &BTreeMap<String, f64>) -> f64 {
    let g = influence.len() as f64;
    if g < 2.0 {
        return 0.0;
    }
    let ssq: f64 = influence.values().map(|v| v * v).sum();
    (ssq * g / (g - 1.0)).sqrt()
}

fn accumulate<'a>(
    ds: &PanelDataset,
    contributions: impl Iterator<Item = (&'a PairedUnit, f64)>,
) -> BTreeMap<String, f64> {
    let mut influence = BTreeMap::new();
    for (p, psi) in contributions {
        *influence.entry(ds.clusters()[p.cluster].clone()).or_insert(0.0) += psi;
    }
    influence
}

/// Unadjusted ATT(g, t): double difference of weighted slice means.
pub fn att_gt_unconditional(
    ds: &PanelDataset,
    g: i32,
    t: i32,
    cfg: &DesignConfig,
) -> Result<AttGtCell> {
    let (treated, control) = comparison_sample(ds, cfg, g, t)?;

    let (m_tb, w_tb) = slice_mean(&treated, true);
    let (m_tt, w_tt) = slice_mean(&treated, false);
    let (m_cb, w_cb) = slice_mean(&control, true);
    let (m_ct, w_ct) = slice_mean(&control, false);
    let att = (m_tt - m_tb) - (m_ct - m_cb);

    let treated_psi = treated
        .iter()
        .map(|p| (p, (p.w_t / w_tt) * (p.y_t - m_tt) - (p.w_base / w_tb) * (p.y_base - m_tb)));
    let control_psi = control
        .iter()
        .map(|p| (p, -((p.w_t / w_ct) * (p.y_t - m_ct) - (p.w_base / w_cb) * (p.y_base - m_cb))));
    let influence = accumulate(ds, treated_psi.chain(control_psi));

    Ok(AttGtCell {
        g,
        t,
        event_time: t - g,
        base_period: cfg.base_period(g),
        att,
        se: clustered_se(&influence),
        n_treated: w_tt,
        n_control: w_ct,
        influence,
        status: CellStatus::Estimated,
    })
}

/// Covariate-adjusted ATT(g, t): the outcome change is regressed on an
/// intercept and the configured binary covariates over control units;
/// the effect is the weighted mean treated residual. Covariate values
/// are taken at the base period; regression weights are the period-t
/// cell weights. Influence contributions carry the estimation effect of
/// the fitted coefficients.
pub fn att_gt_conditional(
    ds: &PanelDataset,
    g: i32,
    t: i32,
    cfg: &DesignConfig,
) -> Result<AttGtCell> {
    let cov_indices: Vec<usize> = cfg
        .covariate_names
        .iter()
        .map(|name| {
            ds.covariate_index(name)
                .ok_or_else(|| Error::UnknownCovariate(name.clone()))
        })
        .collect::<Result<_>>()?;

    let (treated, control) = comparison_sample(ds, cfg, g, t)?;
    let base = cfg.base_period(g);
    let design_row = |p: &PairedUnit| -> Vec<f64> {
        let cell = ds.cell(p.unit, base).expect("paired unit observed at base");
        let mut x = Vec::with_capacity(cov_indices.len() + 1);
        x.push(1.0);
        x.extend(cov_indices.iter().map(|&k| cell.covariates[k]));
        x
    };
    let treated_x: Vec<Vec<f64>> = treated.iter().map(design_row).collect();
    let control_x: Vec<Vec<f64>> = control.iter().map(design_row).collect();

    if cfg.strict_support {
        let as_pattern = |x: &[f64]| -> Result<Vec<u8>> {
            x[1..]
                .iter()
                .map(|&v| match v {
                    v if v == 0.0 => Ok(0u8),
                    v if v == 1.0 => Ok(1u8),
                    _ => Err(Error::InvalidConfig(
                        "strict support requires binary covariates".into(),
                    )),
                })
                .collect()
        };
        let control_patterns: Vec<Vec<u8>> =
            control_x.iter().map(|x| as_pattern(x)).collect::<Result<_>>()?;
        for x in &treated_x {
            let pattern = as_pattern(x)?;
            if !control_patterns.contains(&pattern) {
                return Err(Error::UnsupportedPattern { g, t, pattern });
            }
        }
    }

    // weighted normal equations on controls: A β = rhs
    let dim = cov_indices.len() + 1;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    for (p, x) in control.iter().zip(&control_x) {
        let omega = p.w_t;
        for i in 0..dim {
            rhs[i] += omega * x[i] * p.delta();
            for j in 0..dim {
                a[(i, j)] += omega * x[i] * x[j];
            }
        }
    }

    let svd = a.clone().svd(true, true);
    let sv_max = svd.singular_values.max();
    let tol = sv_max * 1e-10;
    if svd.rank(tol) < dim {
        return Err(Error::SingularDesign { g, t });
    }
    let beta = svd.solve(&rhs, tol).map_err(|_| Error::SingularDesign { g, t })?;

    let fitted = |x: &[f64]| -> f64 { x.iter().zip(beta.iter()).map(|(a, b)| a * b).sum() };
    let w_t: f64 = treated.iter().map(|p| p.w_t).sum();
    let att = treated
        .iter()
        .zip(&treated_x)
        .map(|(p, x)| p.w_t * (p.delta() - fitted(x)))
        .sum::<f64>()
        / w_t;

    // mean treated design row, mapped back through the normal equations
    let mut xbar = DVector::<f64>::zeros(dim);
    for (p, x) in treated.iter().zip(&treated_x) {
        for i in 0..dim {
            xbar[i] += p.w_t * x[i] / w_t;
        }
    }
    let z = svd.solve(&xbar, tol).map_err(|_| Error::SingularDesign { g, t })?;

    let treated_psi = treated
        .iter()
        .zip(&treated_x)
        .map(|(p, x)| (p, (p.w_t / w_t) * (p.delta() - fitted(x) - att)));
    let control_psi = control.iter().zip(&control_x).map(|(p, x)| {
        let zx: f64 = x.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
        (p, -p.w_t * zx * (p.delta() - fitted(x)))
    });
    let influence = accumulate(ds, treated_psi.chain(control_psi));

    Ok(AttGtCell {
        g,
        t,
        event_time: t - g,
        base_period: base,
        att,
        se: clustered_se(&influence),
        n_treated: w_t,
        n_control: control.iter().map(|p| p.w_t).sum(),
        influence,
        status: CellStatus::Estimated,
    })
}

/// Estimate every cell: each retained group crossed with every observed
/// period except its base. Per-cell failures become missing cells; the
/// table errors only when nothing is estimable.
pub fn att_gt_all(ds: &PanelDataset, cfg: &DesignConfig) -> Result<AttGtTable> {
    cfg.validate()?;
    let summary = validate_design(ds, cfg)?;

    let sizes = ds.group_sizes();
    let total: f64 = summary.retained_groups.iter().map(|g| sizes[g]).sum();
    let group_weights: BTreeMap<i32, f64> = summary
        .retained_groups
        .iter()
        .map(|&g| (g, sizes[&g] / total))
        .collect();

    let jobs: Vec<(i32, i32)> = summary
        .retained_groups
        .iter()
        .flat_map(|&g| {
            ds.periods()
                .iter()
                .filter(move |&&t| t != cfg.base_period(g))
                .map(move |&t| (g, t))
        })
        .collect();

    let cells: Vec<AttGtCell> = jobs
        .par_iter()
        .map(|&(g, t)| {
            let result = if cfg.conditional {
                att_gt_conditional(ds, g, t, cfg)
            } else {
                att_gt_unconditional(ds, g, t, cfg)
            };
            match result {
                Ok(cell) => Ok(cell),
                Err(
                    e @ (Error::EmptyTreated { .. }
                    | Error::EmptyControl { .. }
                    | Error::MissingBasePeriod { .. }
                    | Error::SingularDesign { .. }
                    | Error::UnsupportedPattern { .. }),
                ) => Ok(AttGtCell::missing(g, t, cfg.base_period(g), e.to_string())),
                Err(other) => Err(other),
            }
        })
        .collect::<Result<_>>()?;

    if !cells.iter().any(|c| c.is_estimated()) {
        return Err(Error::NoEstimableCells);
    }

    Ok(AttGtTable {
        cells,
        config: cfg.clone(),
        group_weights,
    })
}
