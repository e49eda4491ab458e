//! Imputation cross-check estimator.
//!
//! Fits unit and period effects on untreated cells only (periods before
//! a unit's adoption, plus everything from never-treated units), imputes
//! the untreated outcome of each treated cell from that fit, and
//! aggregates observed-minus-imputed gaps with the same group-size
//! weighting the group-time estimator uses. Standard errors come from a
//! nonparametric cluster bootstrap that refits the model on each draw;
//! pre-trend placebos refit with one pre-period left out at a time.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::aggregate::{AggEstimate, AggKind, AggregationResult};
use crate::bootstrap::{normal_quantile, robust_scale, BootstrapConfig};
use crate::error::{Error, Result};
use crate::fe::{fit_two_way, FeObs};
use crate::panel::{aggregate_cells, Group, PanelDataset, UnitRecord};

const FE_TOL: f64 = 1e-10;

/// Unit and period effects fitted on untreated cells only.
#[derive(Debug, Clone, Serialize)]
pub struct FittedFe {
    pub unit_effects: BTreeMap<String, f64>,
    pub period_effects: BTreeMap<i32, f64>,
    /// Which identifying constraint the reported levels satisfy.
    pub normalization: String,
    /// Root of the weighted sum of squared fit residuals.
    pub residual_norm: f64,
}

/// How the bootstrap and placebo settings were resolved.
#[derive(Debug, Clone, Serialize)]
pub struct ImputationMeta {
    pub estimator: String,
    pub inference: String,
    pub scale: String,
    pub n_draws: usize,
    /// Bootstrap draws discarded because the resampled panel could not
    /// be refitted (disconnected or without estimable cells).
    pub failed_refits: usize,
    pub seed: u64,
    pub alpha: f64,
    /// Present when placebos were requested but skipped.
    pub placebo_note: Option<String>,
}

/// Imputation estimates in the aggregation result schema.
///
/// `se` fields hold the cluster-bootstrap scale (and `analytic_se`
/// mirrors them; no influence-based value exists for this estimator).
#[derive(Debug, Clone, Serialize)]
pub struct ImputationResult {
    pub overall: AggregationResult,
    pub by_event: AggregationResult,
    /// Pre-treatment placebos, one per event time at or before -1.
    pub placebos: AggregationResult,
    pub metadata: ImputationMeta,
}

fn untreated_observations(ds: &PanelDataset, leave_out_event: Option<i32>) -> Vec<FeObs> {
    ds.cells()
        .iter()
        .filter(|c| !c.group.treated_at(c.period))
        .filter(|c| match (leave_out_event, c.group) {
            (Some(e), Group::Treated(g)) => c.period != g + e,
            _ => true,
        })
        .map(|c| {
            let p = ds.period_index(c.period).expect("cell period is indexed");
            (c.unit, p, c.n, c.outcome_mean)
        })
        .collect()
}

/// Every unit and every period must be tied into one component by the
/// fitting cells, otherwise some effect needed for imputation has no
/// level.
fn check_connected(ds: &PanelDataset, obs: &[FeObs]) -> Result<()> {
    let n_units = ds.n_units();
    let n_periods = ds.periods().len();
    let mut unit_edges: Vec<Vec<usize>> = vec![Vec::new(); n_units];
    let mut period_edges: Vec<Vec<usize>> = vec![Vec::new(); n_periods];
    for &(u, p, _, _) in obs {
        unit_edges[u].push(p);
        period_edges[p].push(u);
    }
    if let Some(u) = unit_edges.iter().position(|e| e.is_empty()) {
        return Err(Error::DisconnectedDesign(format!(
            "unit `{}` has no untreated observations",
            ds.units()[u].id
        )));
    }
    if let Some(p) = period_edges.iter().position(|e| e.is_empty()) {
        return Err(Error::DisconnectedDesign(format!(
            "period {} has no untreated observations",
            ds.periods()[p]
        )));
    }

    let mut unit_seen = vec![false; n_units];
    let mut period_seen = vec![false; n_periods];
    let mut queue = VecDeque::from([0usize]);
    unit_seen[0] = true;
    while let Some(u) = queue.pop_front() {
        for &p in &unit_edges[u] {
            if !period_seen[p] {
                period_seen[p] = true;
                for &v in &period_edges[p] {
                    if !unit_seen[v] {
                        unit_seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
        }
    }
    if let Some(u) = unit_seen.iter().position(|s| !s) {
        return Err(Error::DisconnectedDesign(format!(
            "unit `{}` shares no untreated period with the rest of the panel",
            ds.units()[u].id
        )));
    }
    if let Some(p) = period_seen.iter().position(|s| !s) {
        return Err(Error::DisconnectedDesign(format!(
            "period {} is untreated only in an isolated block",
            ds.periods()[p]
        )));
    }
    Ok(())
}

struct UntreatedFit {
    alpha: Vec<f64>,
    lambda: Vec<f64>,
    residual_norm: f64,
}

fn fit_untreated(ds: &PanelDataset, leave_out_event: Option<i32>) -> Result<UntreatedFit> {
    let obs = untreated_observations(ds, leave_out_event);
    check_connected(ds, &obs)?;
    let fit = fit_two_way(ds.n_units(), ds.periods().len(), &obs, FE_TOL)?;
    let shift = fit.period_effects[0];
    let alpha: Vec<f64> = fit.unit_effects.iter().map(|a| a + shift).collect();
    let lambda: Vec<f64> = fit.period_effects.iter().map(|l| l - shift).collect();
    let residual_norm = obs
        .iter()
        .map(|&(u, p, w, v)| {
            let r = v - alpha[u] - lambda[p];
            w * r * r
        })
        .sum::<f64>()
        .sqrt();
    Ok(UntreatedFit { alpha, lambda, residual_norm })
}

/// Fit unit and period effects on untreated cells, normalized so the
/// first period's effect is zero.
pub fn fit_untreated_twfe(ds: &PanelDataset) -> Result<FittedFe> {
    let fit = fit_untreated(ds, None)?;
    Ok(FittedFe {
        unit_effects: ds
            .units()
            .iter()
            .enumerate()
            .map(|(i, u)| (u.id.clone(), fit.alpha[i]))
            .collect(),
        period_effects: ds
            .periods()
            .iter()
            .enumerate()
            .map(|(p, &t)| (t, fit.lambda[p]))
            .collect(),
        normalization: format!("period effect at {} set to zero", ds.min_period()),
        residual_norm: fit.residual_norm,
    })
}

/// Point estimates for one panel and one fit: label → (value, number of
/// contributing group-time cells, number of in-range cells missing).
type LabeledPoints = BTreeMap<String, (f64, usize, usize)>;

fn group_cell_effects(
    ds: &PanelDataset,
    fit: &UntreatedFit,
) -> BTreeMap<(i32, i32), (f64, f64)> {
    let mut acc: BTreeMap<(i32, i32), (f64, f64)> = BTreeMap::new();
    for c in ds.cells() {
        if let Group::Treated(g) = c.group {
            if c.period >= g {
                let p = ds.period_index(c.period).expect("cell period is indexed");
                let gap = c.outcome_mean - fit.alpha[c.unit] - fit.lambda[p];
                let e = acc.entry((g, c.period)).or_insert((0.0, 0.0));
                e.0 += c.n * gap;
                e.1 += c.n;
            }
        }
    }
    acc
}

fn post_points(
    ds: &PanelDataset,
    fit: &UntreatedFit,
    window: (i32, i32),
) -> Result<LabeledPoints> {
    let cells = group_cell_effects(ds, fit);
    if cells.is_empty() {
        return Err(Error::NoEstimableCells);
    }
    let att = |g: i32, t: i32| cells.get(&(g, t)).map(|(num, den)| num / den);

    let sizes = ds.group_sizes();
    let groups: Vec<i32> = cells.keys().map(|&(g, _)| g).collect::<Vec<_>>();
    let mut groups = groups;
    groups.dedup();
    let total: f64 = groups.iter().map(|g| sizes[g]).sum();

    let mut points = LabeledPoints::new();
    let mut overall = 0.0;
    let mut overall_cells = 0;
    for &g in &groups {
        let values: Vec<f64> = ds
            .periods()
            .iter()
            .filter(|&&t| t >= g)
            .filter_map(|&t| att(g, t))
            .collect();
        overall += sizes[&g] / total * values.iter().sum::<f64>() / values.len() as f64;
        overall_cells += values.len();
    }
    points.insert("overall".into(), (overall, overall_cells, 0));

    for e in 0..=window.1.max(0) {
        let mut num = 0.0;
        let mut mass = 0.0;
        let mut contributing = 0;
        let mut excluded = 0;
        for &g in &groups {
            let t = g + e;
            match att(g, t) {
                Some(v) => {
                    num += sizes[&g] * v;
                    mass += sizes[&g];
                    contributing += 1;
                }
                None if t >= ds.min_period() && t <= ds.max_period() => excluded += 1,
                None => {}
            }
        }
        if contributing > 0 {
            points.insert(e.to_string(), (num / mass, contributing, excluded));
        }
    }
    Ok(points)
}

fn placebo_points(ds: &PanelDataset, window_lo: i32) -> Result<LabeledPoints> {
    if window_lo >= 0 {
        return Err(Error::InvalidConfig(
            "placebo window must start before treatment".into(),
        ));
    }
    let sizes = ds.group_sizes();
    let groups: Vec<i32> = ds
        .treated_groups()
        .into_iter()
        .filter(|&g| g > ds.min_period() && g <= ds.max_period())
        .collect();

    // groups that will contribute to some tested event need enough pre
    // periods to survive the leave-one-out refit
    let pre_count = |g: i32| -> usize {
        ds.periods()
            .iter()
            .filter(|&&t| t < g)
            .filter(|&&t| {
                ds.cells()
                    .iter()
                    .any(|c| c.group == Group::Treated(g) && c.period == t)
            })
            .count()
    };
    for &g in &groups {
        let tested = (window_lo..0).any(|e| g + e >= ds.min_period() && g + e < g);
        if tested && pre_count(g) < 2 {
            return Err(Error::InsufficientPrePeriods { g });
        }
    }

    let mut points = LabeledPoints::new();
    for e in window_lo..0 {
        let contributors: Vec<i32> = groups
            .iter()
            .copied()
            .filter(|&g| g + e >= ds.min_period())
            .filter(|&g| {
                ds.cells()
                    .iter()
                    .any(|c| c.group == Group::Treated(g) && c.period == g + e)
            })
            .collect();
        if contributors.is_empty() {
            continue;
        }
        let fit = fit_untreated(ds, Some(e))?;
        let mut num = 0.0;
        let mut mass = 0.0;
        for &g in &contributors {
            let mut cell_num = 0.0;
            let mut cell_den = 0.0;
            for c in ds.cells() {
                if c.group == Group::Treated(g) && c.period == g + e {
                    let p = ds.period_index(c.period).expect("cell period is indexed");
                    cell_num += c.n * (c.outcome_mean - fit.alpha[c.unit] - fit.lambda[p]);
                    cell_den += c.n;
                }
            }
            num += sizes[&g] * cell_num / cell_den;
            mass += sizes[&g];
        }
        points.insert(e.to_string(), (num / mass, contributors.len(), 0));
    }
    Ok(points)
}

fn resampled_records(ds: &PanelDataset, members: &[Vec<usize>], rng: &mut ChaCha8Rng) -> Vec<UnitRecord> {
    let g = members.len();
    let mut records = Vec::new();
    for slot in 0..g {
        let pick = rng.random_range(0..g);
        for &u in &members[pick] {
            let info = &ds.units()[u];
            for &t in ds.periods() {
                if let Some(cell) = ds.cell(u, t) {
                    records.push(
                        UnitRecord::new(
                            format!("{slot}:{}", info.id),
                            t,
                            info.group,
                            cell.outcome_mean,
                        )
                        .with_weight(cell.n)
                        .with_cluster(format!("s{slot}")),
                    );
                }
            }
        }
    }
    records
}

fn draw_points(
    ds: &PanelDataset,
    window: (i32, i32),
    events: bool,
    placebos: bool,
) -> Result<LabeledPoints> {
    let mut points = LabeledPoints::new();
    if events {
        let fit = fit_untreated(ds, None)?;
        points.append(&mut post_points(ds, &fit, window)?);
    }
    if placebos {
        points.append(&mut placebo_points(ds, window.0)?);
    }
    Ok(points)
}

/// One column of bootstrap values per label, plus the failed-draw count.
fn cluster_bootstrap(
    ds: &PanelDataset,
    cfg: &BootstrapConfig,
    window: (i32, i32),
    events: bool,
    placebos: bool,
) -> (BTreeMap<String, Vec<f64>>, usize) {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); ds.clusters().len()];
    for (i, u) in ds.units().iter().enumerate() {
        members[u.cluster].push(i);
    }

    let draws: Vec<Option<LabeledPoints>> = (0..cfg.n_draws)
        .into_par_iter()
        .map(|draw| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(draw as u64);
            let records = resampled_records(ds, &members, &mut rng);
            let resampled = aggregate_cells(&records).ok()?;
            draw_points(&resampled, window, events, placebos).ok()
        })
        .collect();

    let mut columns: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut failed = 0;
    for draw in draws {
        match draw {
            Some(points) => {
                for (label, (value, _, _)) in points {
                    columns.entry(label).or_default().push(value);
                }
            }
            None => failed += 1,
        }
    }
    (columns, failed)
}

fn bootstrap_row(
    label: String,
    point: (f64, usize, usize),
    columns: &BTreeMap<String, Vec<f64>>,
    z: f64,
) -> AggEstimate {
    let (estimate, n_cells, n_excluded) = point;
    let se = columns
        .get(&label)
        .map(|values| {
            let mut column = values.clone();
            robust_scale(&mut column)
        })
        .unwrap_or(0.0);
    AggEstimate {
        label,
        estimate,
        se,
        analytic_se: se,
        ci: Some((estimate - z * se, estimate + z * se)),
        ucb: None,
        n_cells,
        n_excluded,
        is_reference: false,
        influence: BTreeMap::new(),
    }
}

fn event_sorted_rows(
    points: LabeledPoints,
    columns: &BTreeMap<String, Vec<f64>>,
    z: f64,
) -> Vec<AggEstimate> {
    let mut rows: Vec<(i32, AggEstimate)> = points
        .into_iter()
        .map(|(label, point)| {
            let e: i32 = label.parse().expect("event labels are integers");
            (e, bootstrap_row(label, point, columns, z))
        })
        .collect();
    rows.sort_by_key(|(e, _)| *e);
    rows.into_iter().map(|(_, row)| row).collect()
}

/// Impute untreated outcomes for treated cells from a fitted model and
/// aggregate the gaps, with cluster-bootstrap standard errors.
///
/// The overall estimate weights each group's post-period average by
/// realized group size; event rows renormalize those sizes over the
/// groups observed at each event time. Placebos cover the window's
/// pre-treatment events and are skipped, with a note in the metadata,
/// when the design cannot support the leave-one-out refits.
pub fn impute_att(
    ds: &PanelDataset,
    fe: &FittedFe,
    window: (i32, i32),
    bootstrap: &BootstrapConfig,
) -> Result<ImputationResult> {
    bootstrap.validate()?;
    if window.0 > 0 || window.1 < 0 {
        return Err(Error::InvalidConfig(format!(
            "event window [{}, {}] must contain 0",
            window.0, window.1
        )));
    }

    let fit = UntreatedFit {
        alpha: ds
            .units()
            .iter()
            .map(|u| {
                fe.unit_effects.get(&u.id).copied().ok_or_else(|| {
                    Error::InvalidConfig(format!("fitted effects missing unit `{}`", u.id))
                })
            })
            .collect::<Result<_>>()?,
        lambda: ds
            .periods()
            .iter()
            .map(|t| {
                fe.period_effects.get(t).copied().ok_or_else(|| {
                    Error::InvalidConfig(format!("fitted effects missing period {t}"))
                })
            })
            .collect::<Result<_>>()?,
        residual_norm: fe.residual_norm,
    };

    let mut points = post_points(ds, &fit, window)?;
    let overall_point = points.remove("overall").expect("overall is always present");

    let (placebos, placebo_note) = if window.0 < 0 {
        match placebo_points(ds, window.0) {
            Ok(p) => (p, None),
            Err(e @ (Error::InsufficientPrePeriods { .. } | Error::DisconnectedDesign(_))) => {
                (LabeledPoints::new(), Some(format!("placebos skipped: {e}")))
            }
            Err(e) => return Err(e),
        }
    } else {
        (LabeledPoints::new(), None)
    };

    let run_placebos = !placebos.is_empty();
    let (columns, failed_refits) = cluster_bootstrap(ds, bootstrap, window, true, run_placebos);
    let z = normal_quantile(1.0 - bootstrap.alpha / 2.0);

    Ok(ImputationResult {
        overall: AggregationResult {
            kind: AggKind::Overall,
            estimates: vec![bootstrap_row("overall".into(), overall_point, &columns, z)],
        },
        by_event: AggregationResult {
            kind: AggKind::ByEvent,
            estimates: event_sorted_rows(points, &columns, z),
        },
        placebos: AggregationResult {
            kind: AggKind::ByEvent,
            estimates: event_sorted_rows(placebos, &columns, z),
        },
        metadata: ImputationMeta {
            estimator: "imputation".into(),
            inference: "cluster bootstrap".into(),
            scale: "iqr/1.349".into(),
            n_draws: bootstrap.n_draws,
            failed_refits,
            seed: bootstrap.seed,
            alpha: bootstrap.alpha,
            placebo_note,
        },
    })
}

/// Placebo effects for pre-treatment event times, each estimated by
/// refitting with that event's pre-period left out of the fitting set.
pub fn pretrend_placebos(
    ds: &PanelDataset,
    window_lo: i32,
    bootstrap: &BootstrapConfig,
) -> Result<AggregationResult> {
    bootstrap.validate()?;
    let points = placebo_points(ds, window_lo)?;
    let (columns, _) = cluster_bootstrap(ds, bootstrap, (window_lo, 0), false, true);
    let z = normal_quantile(1.0 - bootstrap.alpha / 2.0);
    Ok(AggregationResult {
        kind: AggKind::ByEvent,
        estimates: event_sorted_rows(points, &columns, z),
    })
}
