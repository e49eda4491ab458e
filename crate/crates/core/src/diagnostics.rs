//! Diagnostics for the pooled two-way fixed-effects benchmark.
//!
//! Three views of the same regression of the outcome on a binary
//! treatment indicator plus unit and period effects: the coefficient
//! itself with a cluster-robust standard error, the implicit weight each
//! treated cell receives in that coefficient, and the decomposition of
//! the coefficient into all pairwise two-group two-period comparisons.
//! Together they show when the pooled coefficient mixes comparisons
//! that use already-treated units as controls.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fe::{fit_two_way, FeObs};
use crate::panel::{Group, PanelDataset};

const FE_TOL: f64 = 1e-10;
const HISTOGRAM_BINS: usize = 40;

/// Pooled two-way fixed-effects coefficient on the treatment indicator.
#[derive(Debug, Clone, Serialize)]
pub struct TwfeResult {
    pub coefficient: f64,
    pub clustered_se: f64,
    pub n_cells: usize,
    pub n_clusters: usize,
}

/// Implicit weight of one cell in the pooled coefficient.
#[derive(Debug, Clone, Serialize)]
pub struct CellWeight {
    pub unit: String,
    pub period: i32,
    pub treated: bool,
    /// Signed weight; treated-cell weights sum to one.
    pub weight: f64,
    /// Observation mass behind the cell.
    pub mass: f64,
}

/// One histogram bin of implicit weights, split by treatment status.
#[derive(Debug, Clone, Serialize)]
pub struct WeightBin {
    pub lower: f64,
    pub upper: f64,
    pub treated_mass: f64,
    pub untreated_mass: f64,
}

/// Implicit-weight report for the pooled coefficient.
#[derive(Debug, Clone, Serialize)]
pub struct WeightReport {
    pub cells: Vec<CellWeight>,
    /// Share of treated observation mass sitting on negative weights.
    pub negative_share_weighted: f64,
    /// Sum of treated-cell weights; one up to solver tolerance.
    pub treated_weight_sum: f64,
    pub histogram: Vec<WeightBin>,
    /// Scaling convention the weights follow.
    pub convention: String,
}

/// Which two groups a decomposition component compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonType {
    TreatedVsNever,
    EarlierVsLater,
    LaterVsEarlier,
}

impl ComparisonType {
    pub fn as_str(self) -> &'static str {
        match self {
            ComparisonType::TreatedVsNever => "treated_vs_never",
            ComparisonType::EarlierVsLater => "earlier_vs_later",
            ComparisonType::LaterVsEarlier => "later_vs_earlier",
        }
    }
}

/// One two-group, two-window comparison inside the pooled coefficient.
#[derive(Debug, Clone, Serialize)]
pub struct BaconComponent {
    pub treated_group: i32,
    /// `None` when the comparison uses the untreated pool.
    pub control_group: Option<i32>,
    pub comparison_type: ComparisonType,
    pub weight: f64,
    pub estimate: f64,
}

/// Exact decomposition of the pooled coefficient into 2x2 comparisons.
#[derive(Debug, Clone, Serialize)]
pub struct BaconDecomposition {
    pub components: Vec<BaconComponent>,
    /// Sum of weight * estimate over components.
    pub weighted_sum: f64,
    /// The pooled coefficient the weighted sum reproduces.
    pub twfe_coefficient: f64,
}

fn treatment_observations(ds: &PanelDataset) -> Vec<(FeObs, f64)> {
    ds.cells()
        .iter()
        .map(|c| {
            let p = ds.period_index(c.period).expect("cell period is indexed");
            let d = if c.group.treated_at(c.period) { 1.0 } else { 0.0 };
            ((c.unit, p, c.n, d), c.outcome_mean)
        })
        .collect()
}

/// Weighted regression of the outcome on the treatment indicator plus
/// unit and period effects, with a cluster-robust standard error.
///
/// The variance uses cluster score sums with the G/(G-1) small-sample
/// factor and no further degrees-of-freedom adjustment. With a single
/// cluster the standard error is reported as zero.
pub fn twfe_estimate(ds: &PanelDataset) -> Result<TwfeResult> {
    let obs = treatment_observations(ds);
    let n_units = ds.n_units();
    let n_periods = ds.periods().len();

    let d_obs: Vec<FeObs> = obs.iter().map(|&(o, _)| o).collect();
    let y_obs: Vec<FeObs> = obs
        .iter()
        .map(|&((u, p, w, _), y)| (u, p, w, y))
        .collect();
    let d_fit = fit_two_way(n_units, n_periods, &d_obs, FE_TOL)?;
    let y_fit = fit_two_way(n_units, n_periods, &y_obs, FE_TOL)?;

    let mut denom = 0.0;
    let mut numer = 0.0;
    for (d, y) in d_obs.iter().zip(&y_obs) {
        let rd = d_fit.residual(d);
        let ry = y_fit.residual(y);
        denom += d.2 * rd * rd;
        numer += d.2 * rd * ry;
    }
    if denom <= 1e-12 * ds.total_n() {
        return Err(Error::Collinear);
    }
    let coefficient = numer / denom;

    let mut scores: BTreeMap<usize, f64> = BTreeMap::new();
    for ((d, y), cell) in d_obs.iter().zip(&y_obs).zip(ds.cells()) {
        let rd = d_fit.residual(d);
        let ry = y_fit.residual(y);
        let cluster = ds.units()[cell.unit].cluster;
        *scores.entry(cluster).or_insert(0.0) += d.2 * rd * (ry - coefficient * rd);
    }
    let g = scores.len();
    let clustered_se = if g < 2 {
        0.0
    } else {
        let ssq: f64 = scores.values().map(|s| s * s).sum();
        (ssq * g as f64 / (g as f64 - 1.0)).sqrt() / denom
    };

    Ok(TwfeResult {
        coefficient,
        clustered_se,
        n_cells: obs.len(),
        n_clusters: g,
    })
}

/// Implicit cell weights of the pooled coefficient.
///
/// Each cell's weight is its mass times the residual of the treatment
/// indicator after removing unit and period effects, scaled by the
/// mass-weighted sum of squared residuals over all cells. Under that
/// scaling the treated-cell weights sum to one and the untreated-cell
/// weights sum to minus one.
pub fn twfe_weights(ds: &PanelDataset) -> Result<WeightReport> {
    let obs = treatment_observations(ds);
    let d_obs: Vec<FeObs> = obs.iter().map(|&(o, _)| o).collect();
    let d_fit = fit_two_way(ds.n_units(), ds.periods().len(), &d_obs, FE_TOL)?;

    let denom: f64 = d_obs
        .iter()
        .map(|o| {
            let r = d_fit.residual(o);
            o.2 * r * r
        })
        .sum();
    if denom <= 1e-12 * ds.total_n() {
        return Err(Error::Collinear);
    }

    let mut cells = Vec::with_capacity(obs.len());
    let mut treated_weight_sum = 0.0;
    let mut treated_mass = 0.0;
    let mut negative_mass = 0.0;
    for (o, cell) in d_obs.iter().zip(ds.cells()) {
        let weight = o.2 * d_fit.residual(o) / denom;
        let treated = cell.group.treated_at(cell.period);
        if treated {
            treated_weight_sum += weight;
            treated_mass += cell.n;
            if weight < 0.0 {
                negative_mass += cell.n;
            }
        }
        cells.push(CellWeight {
            unit: ds.units()[cell.unit].id.clone(),
            period: cell.period,
            treated,
            weight,
            mass: cell.n,
        });
    }

    let negative_share_weighted = if treated_mass > 0.0 {
        negative_mass / treated_mass
    } else {
        0.0
    };

    Ok(WeightReport {
        histogram: weight_histogram(&cells),
        cells,
        negative_share_weighted,
        treated_weight_sum,
        convention: "cell mass times residualized treatment, scaled by the mass-weighted \
                     sum of squared residuals over all cells"
            .to_string(),
    })
}

fn weight_histogram(cells: &[CellWeight]) -> Vec<WeightBin> {
    let lo = cells.iter().map(|c| c.weight).fold(f64::INFINITY, f64::min);
    let hi = cells.iter().map(|c| c.weight).fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return Vec::new();
    }
    if hi <= lo {
        let (mut t, mut u) = (0.0, 0.0);
        for c in cells {
            if c.treated {
                t += c.mass;
            } else {
                u += c.mass;
            }
        }
        return vec![WeightBin { lower: lo, upper: hi, treated_mass: t, untreated_mass: u }];
    }
    let width = (hi - lo) / HISTOGRAM_BINS as f64;
    let mut bins: Vec<WeightBin> = (0..HISTOGRAM_BINS)
        .map(|i| WeightBin {
            lower: lo + width * i as f64,
            upper: lo + width * (i + 1) as f64,
            treated_mass: 0.0,
            untreated_mass: 0.0,
        })
        .collect();
    for c in cells {
        let idx = (((c.weight - lo) / width) as usize).min(HISTOGRAM_BINS - 1);
        if c.treated {
            bins[idx].treated_mass += c.mass;
        } else {
            bins[idx].untreated_mass += c.mass;
        }
    }
    bins
}

struct TimingGroup {
    g: i32,
    units: Vec<usize>,
    size: f64,
    treated_share: f64,
}

/// Decompose the pooled coefficient into weighted 2x2 comparisons.
///
/// Requires a balanced panel with time-constant unit weights. Timing
/// groups are compared against the untreated pool (never treated plus
/// units first treated after the sample ends) and pairwise against each
/// other, once on the window before the later group switches and once on
/// the window after the earlier group has switched. The weighted sum of
/// component estimates reproduces the pooled coefficient exactly.
pub fn bacon_decompose(ds: &PanelDataset) -> Result<BaconDecomposition> {
    let periods = ds.periods();
    let n_periods = periods.len() as f64;
    if !ds.is_balanced() {
        let missing = ds
            .units()
            .iter()
            .enumerate()
            .find(|(i, _)| periods.iter().any(|&t| ds.cell(*i, t).is_none()))
            .map(|(_, u)| u.id.clone())
            .unwrap_or_default();
        return Err(Error::UnbalancedPanel(format!(
            "unit `{missing}` is not observed in every period"
        )));
    }
    for (i, u) in ds.units().iter().enumerate() {
        let first = ds.cell(i, periods[0]).expect("balanced").n;
        for &t in periods {
            let n = ds.cell(i, t).expect("balanced").n;
            if (n - first).abs() > 1e-9 * first.abs().max(1.0) {
                return Err(Error::UnbalancedPanel(format!(
                    "unit `{}` has time-varying weights",
                    u.id
                )));
            }
        }
    }

    let mut by_group: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    let mut untreated_units: Vec<usize> = Vec::new();
    for (i, u) in ds.units().iter().enumerate() {
        match u.group {
            Group::Treated(g) if g <= ds.min_period() => {
                return Err(Error::AlwaysTreated { g });
            }
            Group::Treated(g) if g <= ds.max_period() => {
                by_group.entry(g).or_default().push(i);
            }
            _ => untreated_units.push(i),
        }
    }
    if by_group.is_empty() {
        return Err(Error::Collinear);
    }

    let size_of = |units: &[usize]| -> f64 { units.iter().map(|&i| ds.unit_size(i)).sum() };
    let groups: Vec<TimingGroup> = by_group
        .into_iter()
        .map(|(g, units)| {
            let treated_periods = periods.iter().filter(|&&t| t >= g).count() as f64;
            TimingGroup {
                g,
                size: size_of(&units),
                units,
                treated_share: treated_periods / n_periods,
            }
        })
        .collect();
    let untreated_size = size_of(&untreated_units);

    let did = |treat: &[usize], control: &[usize], post_from: i32, window: (i32, i32)| -> f64 {
        let mean = |units: &[usize], post: bool| -> f64 {
            let mut num = 0.0;
            let mut den = 0.0;
            for &i in units {
                for &t in periods {
                    if t < window.0 || t > window.1 || (t >= post_from) != post {
                        continue;
                    }
                    let cell = ds.cell(i, t).expect("balanced");
                    num += cell.n * cell.outcome_mean;
                    den += cell.n;
                }
            }
            num / den
        };
        (mean(treat, true) - mean(treat, false)) - (mean(control, true) - mean(control, false))
    };

    let full_window = (ds.min_period(), ds.max_period());
    let mut components = Vec::new();
    let mut raw_weights = Vec::new();
    for (ki, k) in groups.iter().enumerate() {
        if untreated_size > 0.0 {
            raw_weights.push(k.size * untreated_size * k.treated_share * (1.0 - k.treated_share));
            components.push(BaconComponent {
                treated_group: k.g,
                control_group: None,
                comparison_type: ComparisonType::TreatedVsNever,
                weight: 0.0,
                estimate: did(&k.units, &untreated_units, k.g, full_window),
            });
        }
        for l in groups.iter().skip(ki + 1) {
            // earlier group k treated, later group l still untreated
            raw_weights.push(
                k.size * l.size * (k.treated_share - l.treated_share) * (1.0 - k.treated_share),
            );
            components.push(BaconComponent {
                treated_group: k.g,
                control_group: Some(l.g),
                comparison_type: ComparisonType::EarlierVsLater,
                weight: 0.0,
                estimate: did(&k.units, &l.units, k.g, (ds.min_period(), l.g - 1)),
            });
            // later group l switches while earlier group k stays treated
            raw_weights.push(
                k.size * l.size * l.treated_share * (k.treated_share - l.treated_share),
            );
            components.push(BaconComponent {
                treated_group: l.g,
                control_group: Some(k.g),
                comparison_type: ComparisonType::LaterVsEarlier,
                weight: 0.0,
                estimate: did(&l.units, &k.units, l.g, (k.g, ds.max_period())),
            });
        }
    }

    let total: f64 = raw_weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Collinear);
    }
    let mut weighted_sum = 0.0;
    for (c, raw) in components.iter_mut().zip(&raw_weights) {
        c.weight = raw / total;
        weighted_sum += c.weight * c.estimate;
    }

    Ok(BaconDecomposition {
        components,
        weighted_sum,
        twfe_coefficient: twfe_estimate(ds)?.coefficient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{aggregate_cells, UnitRecord};

    fn rec(unit: &str, period: i32, group: Group, y: f64) -> UnitRecord {
        UnitRecord::new(unit, period, group, y)
    }

    fn panel(records: Vec<UnitRecord>) -> PanelDataset {
        aggregate_cells(&records).unwrap()
    }

    fn two_by_two() -> PanelDataset {
        panel(vec![
            rec("a", 1, Group::Treated(2), 1.0),
            rec("a", 2, Group::Treated(2), 5.0),
            rec("b", 1, Group::Never, 2.0),
            rec("b", 2, Group::Never, 3.0),
        ])
    }

    /// Three-period staggered design with an early and a late group and
    /// no untreated pool; the early group's final cell gets negative
    /// weight in the pooled coefficient.
    fn majority_early() -> PanelDataset {
        panel(vec![
            rec("a", 1, Group::Treated(2), 0.0),
            rec("a", 2, Group::Treated(2), 0.0),
            rec("a", 3, Group::Treated(2), 0.0),
            rec("b", 1, Group::Treated(3), 0.0),
            rec("b", 2, Group::Treated(3), 0.0),
            rec("b", 3, Group::Treated(3), 0.0),
        ])
    }

    fn lcg(state: &mut u64) -> f64 {
        *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*state >> 33) as f64) / ((1u64 << 31) as f64)
    }

    #[test]
    fn two_by_two_equals_difference_in_differences() {
        let res = twfe_estimate(&two_by_two()).unwrap();
        assert!((res.coefficient - 3.0).abs() < 1e-9);
        // saturated regression: zero residuals, zero clustered se
        assert!(res.clustered_se.abs() < 1e-9);
        assert_eq!(res.n_cells, 4);
        assert_eq!(res.n_clusters, 2);
    }

    #[test]
    fn flat_outcomes_give_zero_coefficient() {
        let ds = panel(vec![
            rec("a", 1, Group::Treated(2), 7.0),
            rec("a", 2, Group::Treated(2), 7.0),
            rec("b", 1, Group::Never, 7.0),
            rec("b", 2, Group::Never, 7.0),
        ]);
        let res = twfe_estimate(&ds).unwrap();
        assert!(res.coefficient.abs() < 1e-9);
    }

    #[test]
    fn fully_treated_panel_is_collinear() {
        let ds = panel(vec![
            rec("a", 1, Group::Treated(1), 1.0),
            rec("a", 2, Group::Treated(1), 2.0),
            rec("b", 1, Group::Treated(1), 3.0),
            rec("b", 2, Group::Treated(1), 4.0),
        ]);
        assert!(matches!(twfe_estimate(&ds), Err(Error::Collinear)));
        assert!(matches!(twfe_weights(&ds), Err(Error::Collinear)));
    }

    #[test]
    fn clustered_se_pools_units_within_cluster() {
        let mut records = Vec::new();
        let mut state = 99u64;
        for i in 0..40 {
            let unit = format!("u{i}");
            let cluster = format!("c{}", i % 8);
            let group = if i % 2 == 0 { Group::Treated(2) } else { Group::Never };
            for t in 1..=3 {
                let effect = if group.treated_at(t) { 1.0 } else { 0.0 };
                let noise = lcg(&mut state) - 0.5;
                records.push(
                    rec(&unit, t, group, effect + noise).with_cluster(cluster.clone()),
                );
            }
        }
        let ds = panel(records);
        let res = twfe_estimate(&ds).unwrap();
        assert_eq!(res.n_clusters, 8);
        assert!(res.clustered_se > 0.0);
    }

    #[test]
    fn lone_treated_cell_carries_full_weight() {
        let report = twfe_weights(&two_by_two()).unwrap();
        let treated: Vec<_> = report.cells.iter().filter(|c| c.treated).collect();
        assert_eq!(treated.len(), 1);
        assert!((treated[0].weight - 1.0).abs() < 1e-9);
        assert!(treated[0].weight > 0.0);
        assert_eq!(report.negative_share_weighted, 0.0);
    }

    #[test]
    fn treated_weights_sum_to_one_in_staggered_design() {
        let ds = panel(vec![
            rec("a", 1, Group::Treated(2), 0.0),
            rec("a", 2, Group::Treated(2), 0.0),
            rec("a", 3, Group::Treated(2), 0.0),
            rec("b", 1, Group::Treated(3), 0.0),
            rec("b", 2, Group::Treated(3), 0.0),
            rec("b", 3, Group::Treated(3), 0.0),
            rec("c", 1, Group::Never, 0.0),
            rec("c", 2, Group::Never, 0.0),
            rec("c", 3, Group::Never, 0.0),
        ]);
        let report = twfe_weights(&ds).unwrap();
        assert!((report.treated_weight_sum - 1.0).abs() < 1e-8);
        let untreated_sum: f64 = report
            .cells
            .iter()
            .filter(|c| !c.treated)
            .map(|c| c.weight)
            .sum();
        assert!((untreated_sum + 1.0).abs() < 1e-8);
        // the early group's final cell sits exactly on the boundary here
        let knife_edge = report
            .cells
            .iter()
            .find(|c| c.unit == "a" && c.period == 3)
            .unwrap();
        assert!(knife_edge.weight.abs() < 1e-9);
    }

    #[test]
    fn early_group_late_cells_get_negative_weight_without_untreated_pool() {
        let report = twfe_weights(&majority_early()).unwrap();
        let negative = report
            .cells
            .iter()
            .find(|c| c.unit == "a" && c.period == 3)
            .unwrap();
        assert!(negative.treated);
        assert!((negative.weight - (-0.5)).abs() < 1e-8);
        assert!((report.negative_share_weighted - 1.0 / 3.0).abs() < 1e-9);
        assert!((report.treated_weight_sum - 1.0).abs() < 1e-8);
    }

    #[test]
    fn histogram_masses_account_for_every_cell() {
        let ds = majority_early();
        let report = twfe_weights(&ds).unwrap();
        let total: f64 = report
            .histogram
            .iter()
            .map(|b| b.treated_mass + b.untreated_mass)
            .sum();
        assert!((total - ds.total_n()).abs() < 1e-9);
        assert!(report.histogram.len() <= HISTOGRAM_BINS);
    }

    #[test]
    fn single_group_against_never_is_one_component() {
        let decomposition = bacon_decompose(&two_by_two()).unwrap();
        assert_eq!(decomposition.components.len(), 1);
        let c = &decomposition.components[0];
        assert_eq!(c.comparison_type, ComparisonType::TreatedVsNever);
        assert!((c.weight - 1.0).abs() < 1e-12);
        assert!((c.estimate - decomposition.twfe_coefficient).abs() < 1e-9);
        assert!((decomposition.weighted_sum - decomposition.twfe_coefficient).abs() < 1e-9);
    }

    #[test]
    fn two_timing_groups_split_into_both_orderings() {
        let decomposition = bacon_decompose(&majority_early()).unwrap();
        assert_eq!(decomposition.components.len(), 2);
        let types: Vec<_> = decomposition
            .components
            .iter()
            .map(|c| c.comparison_type)
            .collect();
        assert!(types.contains(&ComparisonType::EarlierVsLater));
        assert!(types.contains(&ComparisonType::LaterVsEarlier));
        let weight_sum: f64 = decomposition.components.iter().map(|c| c.weight).sum();
        assert!((weight_sum - 1.0).abs() < 1e-12);
        assert!(
            (decomposition.weighted_sum - decomposition.twfe_coefficient).abs() < 1e-8
        );
    }

    #[test]
    fn homogeneous_effect_appears_in_every_component() {
        let delta = 2.0;
        let mut records = Vec::new();
        for (unit, group) in [
            ("a", Group::Treated(2)),
            ("b", Group::Treated(3)),
            ("c", Group::Never),
        ] {
            for t in 1..=4 {
                let y = 0.5 * t as f64 + if group.treated_at(t) { delta } else { 0.0 };
                records.push(rec(unit, t, group, y));
            }
        }
        let decomposition = bacon_decompose(&panel(records)).unwrap();
        assert_eq!(decomposition.components.len(), 4);
        for c in &decomposition.components {
            assert!((c.estimate - delta).abs() < 1e-9, "{:?}", c);
            assert!(c.weight > 0.0);
        }
        assert!((decomposition.weighted_sum - delta).abs() < 1e-9);
    }

    #[test]
    fn weighted_sum_reproduces_pooled_coefficient_on_random_panels() {
        let mut state = 2024u64;
        for round in 0..80 {
            let n_periods = 2 + round % 4;
            let n_units = 3 + round % 6;
            let mut records = Vec::new();
            for i in 0..n_units {
                let draw = lcg(&mut state);
                let group = if draw < 0.3 {
                    Group::Never
                } else {
                    Group::Treated(2 + (lcg(&mut state) * n_periods as f64) as i32)
                };
                let weight = 0.5 + lcg(&mut state) * 2.0;
                for t in 1..=n_periods as i32 {
                    records.push(
                        rec(&format!("u{i}"), t, group, lcg(&mut state) * 10.0)
                            .with_weight(weight),
                    );
                }
            }
            let ds = panel(records);
            let decomposition = match bacon_decompose(&ds) {
                Ok(d) => d,
                // drawn design had no in-sample switchers
                Err(Error::Collinear) => continue,
                Err(e) => panic!("round {round}: {e}"),
            };
            let weight_sum: f64 = decomposition.components.iter().map(|c| c.weight).sum();
            assert!((weight_sum - 1.0).abs() < 1e-9, "round {round}");
            assert!(
                decomposition.components.iter().all(|c| c.weight >= -1e-12),
                "round {round}"
            );
            assert!(
                (decomposition.weighted_sum - decomposition.twfe_coefficient).abs() < 1e-8,
                "round {round}: {} vs {}",
                decomposition.weighted_sum,
                decomposition.twfe_coefficient
            );
        }
    }

    #[test]
    fn unbalanced_panel_is_rejected() {
        let ds = panel(vec![
            rec("a", 1, Group::Treated(2), 1.0),
            rec("a", 2, Group::Treated(2), 5.0),
            rec("b", 1, Group::Never, 2.0),
        ]);
        assert!(matches!(bacon_decompose(&ds), Err(Error::UnbalancedPanel(_))));
    }

    #[test]
    fn time_varying_weights_are_rejected() {
        let ds = panel(vec![
            rec("a", 1, Group::Treated(2), 1.0).with_weight(1.0),
            rec("a", 2, Group::Treated(2), 5.0).with_weight(2.0),
            rec("b", 1, Group::Never, 2.0),
            rec("b", 2, Group::Never, 3.0),
        ]);
        match bacon_decompose(&ds) {
            Err(Error::UnbalancedPanel(msg)) => assert!(msg.contains("time-varying")),
            other => panic!("expected weight rejection, got {other:?}"),
        }
    }

    #[test]
    fn always_treated_group_is_rejected() {
        let ds = panel(vec![
            rec("a", 1, Group::Treated(1), 1.0),
            rec("a", 2, Group::Treated(1), 5.0),
            rec("b", 1, Group::Never, 2.0),
            rec("b", 2, Group::Never, 3.0),
        ]);
        assert!(matches!(bacon_decompose(&ds), Err(Error::AlwaysTreated { g: 1 })));
    }

    #[test]
    fn group_treated_after_sample_joins_untreated_pool() {
        let ds = panel(vec![
            rec("a", 1, Group::Treated(2), 1.0),
            rec("a", 2, Group::Treated(2), 5.0),
            rec("b", 1, Group::Treated(9), 2.0),
            rec("b", 2, Group::Treated(9), 3.0),
        ]);
        let decomposition = bacon_decompose(&ds).unwrap();
        assert_eq!(decomposition.components.len(), 1);
        assert_eq!(
            decomposition.components[0].comparison_type,
            ComparisonType::TreatedVsNever
        );
        assert!((decomposition.components[0].estimate - 3.0).abs() < 1e-9);
    }
}
