//! Aggregation of group-time effects into group, overall, and event-time
//! summaries, plus contrasts between two estimation runs.
//!
//! Aggregates are linear in the cell estimates with weights treated as
//! fixed, so per-cluster influence contributions propagate linearly and
//! stay centered. Missing cells are excluded and counted, never imputed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gt::AttGtTable;

/// What an aggregation's labels mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggKind {
    Overall,
    ByGroup,
    ByEvent,
}

/// One aggregated estimate. `se` is analytic at construction and becomes
/// the bootstrap se once bands are attached; `analytic_se` always keeps
/// the influence-based value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggEstimate {
    pub label: String,
    pub estimate: f64,
    pub se: f64,
    pub analytic_se: f64,
    pub ci: Option<(f64, f64)>,
    pub ucb: Option<(f64, f64)>,
    /// Cells that contributed.
    pub n_cells: usize,
    /// Cells inside the aggregation window that were missing.
    pub n_excluded: usize,
    /// Base-period row emitted as zero by construction.
    pub is_reference: bool,
    #[serde(skip)]
    pub influence: BTreeMap<String, f64>,
}

impl AggEstimate {
    fn from_influence(
        label: String,
        estimate: f64,
        influence: BTreeMap<String, f64>,
        n_cells: usize,
        n_excluded: usize,
    ) -> Self {
        let se = clustered_se(&influence);
        AggEstimate {
            label,
            estimate,
            se,
            analytic_se: se,
            ci: None,
            ucb: None,
            n_cells,
            n_excluded,
            is_reference: false,
            influence,
        }
    }

    fn reference(label: String) -> Self {
        AggEstimate {
            label,
            estimate: 0.0,
            se: 0.0,
            analytic_se: 0.0,
            ci: Some((0.0, 0.0)),
            ucb: Some((0.0, 0.0)),
            n_cells: 0,
            n_excluded: 0,
            is_reference: true,
            influence: BTreeMap::new(),
        }
    }
}

/// An ordered set of labeled aggregate estimates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregationResult {
    pub kind: AggKind,
    pub estimates: Vec<AggEstimate>,
}

impl AggregationResult {
    pub fn estimate(&self, label: &str) -> Option<&AggEstimate> {
        self.estimates.iter().find(|e| e.label == label)
    }

    /// Labeled influence maps, the bootstrap input.
    pub fn influence_set(&self) -> Vec<(String, BTreeMap<String, f64>)> {
        self.estimates
            .iter()
            .map(|e| (e.label.clone(), e.influence.clone()))
            .collect()
    }
}

/// See `gt::clustered_se`; duplicated here to keep the modules
/// independent of each other's internals.
fn clustered_se(influence: &BTreeMap<String, f64>) -> f64 {
    let g = influence.len() as f64;
    if g < 2.0 {
        return 0.0;
    }
    let ssq: f64 = influence.values().map(|v| v * v).sum();
    (ssq * g / (g - 1.0)).sqrt()
}

fn add_scaled(into: &mut BTreeMap<String, f64>, from: &BTreeMap<String, f64>, scale: f64) {
    for (cluster, psi) in from {
        *into.entry(cluster.clone()).or_insert(0.0) += scale * psi;
    }
}

/// Per-group effect: the simple average of a group's estimated
/// post-treatment cells (t ≥ g), with missing post cells counted as
/// exclusions.
pub fn aggregate_group(table: &AttGtTable) -> Result<AggregationResult> {
    let mut estimates = Vec::new();
    for &g in table.group_weights.keys() {
        let post: Vec<_> = table.cells.iter().filter(|c| c.g == g && c.t >= g).collect();
        let estimated: Vec<_> = post.iter().filter(|c| c.is_estimated()).collect();
        if estimated.is_empty() {
            return Err(Error::NoPostPeriods(g));
        }
        let k = estimated.len() as f64;
        let value = estimated.iter().map(|c| c.att).sum::<f64>() / k;
        let mut influence = BTreeMap::new();
        for cell in &estimated {
            add_scaled(&mut influence, &cell.influence, 1.0 / k);
        }
        estimates.push(AggEstimate::from_influence(
            g.to_string(),
            value,
            influence,
            estimated.len(),
            post.len() - estimated.len(),
        ));
    }
    Ok(AggregationResult { kind: AggKind::ByGroup, estimates })
}

/// Overall effect: group effects combined with the table's group-share
/// weights.
pub fn aggregate_overall(table: &AttGtTable) -> Result<AggregationResult> {
    let by_group = aggregate_group(table)?;
    let mut value = 0.0;
    let mut influence = BTreeMap::new();
    let mut n_cells = 0;
    let mut n_excluded = 0;
    for est in &by_group.estimates {
        let g: i32 = est.label.parse().expect("group labels are integers");
        let weight = table.group_weights[&g];
        value += weight * est.estimate;
        add_scaled(&mut influence, &est.influence, weight);
        n_cells += est.n_cells;
        n_excluded += est.n_excluded;
    }
    Ok(AggregationResult {
        kind: AggKind::Overall,
        estimates: vec![AggEstimate::from_influence(
            "overall".into(),
            value,
            influence,
            n_cells,
            n_excluded,
        )],
    })
}

/// Event-study effects: for each event time e in `window`, the size
/// weights are renormalized over groups whose (g, g+e) cell is
/// estimated. The base-period event time −1−anticipation is emitted as
/// an exact-zero reference row; event times with no contributing group
/// are omitted.
pub fn aggregate_event(table: &AttGtTable, window: (i32, i32)) -> Result<AggregationResult> {
    let (lo, hi) = window;
    if !(lo <= 0 && 0 <= hi) {
        return Err(Error::InvalidConfig(format!(
            "event window {lo}..{hi} must contain 0"
        )));
    }
    let reference_event = -1 - table.config.anticipation as i32;

    let mut estimates = Vec::new();
    for e in lo..=hi {
        if e == reference_event {
            estimates.push(AggEstimate::reference(e.to_string()));
            continue;
        }
        let mut contributors = Vec::new();
        let mut n_excluded = 0;
        for &g in table.group_weights.keys() {
            match table.cell(g, g + e) {
                Some(cell) if cell.is_estimated() => contributors.push((g, cell)),
                Some(_) => n_excluded += 1,
                None => {}
            }
        }
        if contributors.is_empty() {
            continue;
        }
        let mass: f64 = contributors.iter().map(|(g, _)| table.group_weights[g]).sum();
        let mut value = 0.0;
        let mut influence = BTreeMap::new();
        for (g, cell) in &contributors {
            let weight = table.group_weights[g] / mass;
            value += weight * cell.att;
            add_scaled(&mut influence, &cell.influence, weight);
        }
        estimates.push(AggEstimate::from_influence(
            e.to_string(),
            value,
            influence,
            contributors.len(),
            n_excluded,
        ));
    }
    Ok(AggregationResult { kind: AggKind::ByEvent, estimates })
}

/// Difference between two aggregation runs over the same labels, with
/// influence contributions differenced on the union of their clusters.
#[derive(Debug, Clone, Serialize)]
pub struct DddResult {
    pub kind: AggKind,
    pub estimates: Vec<AggEstimate>,
    /// How bootstrap inference was attached, once it was.
    pub inference_mode: Option<DddMode>,
}

/// Whether a contrast's inference reuses one set of multiplier draws on
/// the differenced influence or combines two independent bootstrap runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DddMode {
    #[default]
    SharedDraws,
    Independent,
}

/// Per-label difference run_a − run_b. Point estimates subtract exactly;
/// the analytic se comes from the differenced influence contributions
/// (clusters present in only one run count one-sidedly).
pub fn contrast_ddd(run_a: &AggregationResult, run_b: &AggregationResult) -> Result<DddResult> {
    if run_a.kind != run_b.kind {
        return Err(Error::LabelMismatch(format!(
            "cannot contrast {:?} with {:?}",
            run_a.kind, run_b.kind
        )));
    }
    let labels_a: Vec<&str> = run_a.estimates.iter().map(|e| e.label.as_str()).collect();
    let labels_b: Vec<&str> = run_b.estimates.iter().map(|e| e.label.as_str()).collect();
    if labels_a != labels_b {
        return Err(Error::LabelMismatch(format!(
            "labels {labels_a:?} vs {labels_b:?}"
        )));
    }

    let estimates = run_a
        .estimates
        .iter()
        .zip(&run_b.estimates)
        .map(|(a, b)| {
            let mut influence = a.influence.clone();
            add_scaled(&mut influence, &b.influence, -1.0);
            let mut est = AggEstimate::from_influence(
                a.label.clone(),
                a.estimate - b.estimate,
                influence,
                a.n_cells + b.n_cells,
                a.n_excluded + b.n_excluded,
            );
            est.is_reference = a.is_reference && b.is_reference;
            if est.is_reference {
                est.ci = Some((0.0, 0.0));
                est.ucb = Some((0.0, 0.0));
            }
            est
        })
        .collect();

    Ok(DddResult {
        kind: run_a.kind,
        estimates,
        inference_mode: None,
    })
}
