//! Synthetic staggered-adoption panels with a closed-form truth table.
//!
//! Outcomes follow an additive model: unit effect + period effect +
//! cluster-period shock + covariate-linked trend + treatment effect +
//! noise. Because the treatment effect enters additively and identically
//! within each adoption group, every group-time effect is known exactly,
//! and the generator returns the implied group, overall, and event-time
//! aggregates alongside the data.
//!
//! Generation is deterministic in the seed: draws happen in a fixed
//! order (cluster shocks, then per-unit attributes, then per-cell noise)
//! from a counter-based stream cipher RNG.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{aggregate_cells, Group, PanelDataset, UnitRecord};

/// Treatment effect as a function of group and period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum EffectModel {
    /// No effect anywhere; placebo designs.
    None,
    /// A constant shift for every treated cell.
    Homogeneous { delta: f64 },
    /// Effect grows linearly with time under treatment: `base` in the
    /// first responding period, plus `slope` per period thereafter.
    Dynamic { base: f64, slope: f64 },
    /// A constant shift per adoption group.
    GroupVarying { effects: Vec<(i32, f64)> },
}

impl EffectModel {
    /// True effect for group `g` at period `t`. Responses start at
    /// g − anticipation.
    pub fn effect_at(&self, g: i32, t: i32, anticipation: u32) -> f64 {
        let start = g - anticipation as i32;
        if t < start {
            return 0.0;
        }
        match self {
            EffectModel::None => 0.0,
            EffectModel::Homogeneous { delta } => *delta,
            EffectModel::Dynamic { base, slope } => base + slope * (t - start) as f64,
            EffectModel::GroupVarying { effects } => effects
                .iter()
                .find(|(h, _)| *h == g)
                .map(|(_, d)| *d)
                .unwrap_or(0.0),
        }
    }
}

/// Common period profile added to every unit's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum PeriodEffect {
    #[default]
    None,
    /// slope × (t − first period).
    Linear { slope: f64 },
    /// One value per period, in order.
    Explicit { values: Vec<f64> },
}

/// Binary unit covariate with group-dependent prevalence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSpec {
    pub name: String,
    /// Bernoulli prevalence for groups not listed below.
    pub default_prevalence: f64,
    /// Prevalence overrides per group.
    #[serde(default)]
    pub group_prevalence: Vec<(Group, f64)>,
}

impl CovariateSpec {
    fn prevalence(&self, group: Group) -> f64 {
        self.group_prevalence
            .iter()
            .find(|(g, _)| *g == group)
            .map(|(_, p)| *p)
            .unwrap_or(self.default_prevalence)
    }
}

/// Covariate-linked drift in the untreated outcome: units with covariate
/// value x gain `slope · x · (t − start)` regardless of treatment. This
/// violates unconditional parallel trends whenever the covariate
/// distribution differs across groups, without changing any true effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendViolation {
    pub covariate: String,
    pub slope: f64,
    pub start: i32,
}

/// Cluster structure: units are assigned round-robin to `count` clusters
/// and share a per-(cluster, period) normal shock with sd `shock_sd`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub count: usize,
    pub shock_sd: f64,
}

/// Observation weight model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum WeightModel {
    /// Every cell weighs 1.
    #[default]
    Constant,
    /// One uniform draw per unit, constant over time.
    UnitUniform { lo: f64, hi: f64 },
    /// Independent uniform draw per cell.
    CellUniform { lo: f64, hi: f64 },
}

/// Full generator specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub n_units: usize,
    pub first_period: i32,
    pub n_periods: usize,
    /// Adoption groups and their unit shares; must sum to 1. Counts are
    /// apportioned by largest remainder.
    pub group_shares: Vec<(Group, f64)>,
    #[serde(default = "default_effect")]
    pub effect: EffectModel,
    #[serde(default)]
    pub anticipation: u32,
    #[serde(default)]
    pub unit_effect_sd: f64,
    #[serde(default)]
    pub period_effect: PeriodEffect,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default)]
    pub covariates: Vec<CovariateSpec>,
    #[serde(default)]
    pub trend_violation: Option<TrendViolation>,
    #[serde(default)]
    pub clusters: Option<ClusterSpec>,
    #[serde(default)]
    pub weights: WeightModel,
    pub seed: u64,
}

fn default_effect() -> EffectModel {
    EffectModel::None
}

/// Known estimands implied by a generated panel, using the same weighting
/// conventions as the estimators: group effects average post-adoption
/// periods, overall and event aggregates weight groups by realized size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthTable {
    /// (g, t) → true effect, for retained groups over all periods.
    #[serde(serialize_with = "serialize_att_rows")]
    pub att: BTreeMap<(i32, i32), f64>,
    /// Group → average effect over its post periods.
    pub group: BTreeMap<i32, f64>,
    /// Size-weighted average of the group effects.
    pub overall: f64,
    /// Event time → size-weighted effect among groups observed there.
    pub event: BTreeMap<i32, f64>,
}

/// JSON objects cannot key on (g, t) pairs, so the truth surface
/// serializes as a row list.
fn serialize_att_rows<S: serde::Serializer>(
    att: &BTreeMap<(i32, i32), f64>,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct Row {
        g: i32,
        t: i32,
        effect: f64,
    }
    serializer.collect_seq(att.iter().map(|(&(g, t), &effect)| Row { g, t, effect }))
}

impl DgpSpec {
    fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidSpec(msg));
        if self.n_units == 0 {
            return fail("n_units must be positive".into());
        }
        if self.n_periods < 2 {
            return fail("need at least two periods".into());
        }
        if self.group_shares.is_empty() {
            return fail("no groups specified".into());
        }
        let share_sum: f64 = self.group_shares.iter().map(|(_, s)| s).sum();
        if (share_sum - 1.0).abs() > 1e-9 || self.group_shares.iter().any(|(_, s)| *s < 0.0) {
            return fail(format!("group shares must be nonnegative and sum to 1, got {share_sum}"));
        }
        let mut seen = Vec::new();
        for (g, _) in &self.group_shares {
            if seen.contains(g) {
                return fail(format!("duplicate group {g}"));
            }
            seen.push(*g);
        }
        if let PeriodEffect::Explicit { values } = &self.period_effect {
            if values.len() != self.n_periods {
                return fail(format!(
                    "period profile has {} values for {} periods",
                    values.len(),
                    self.n_periods
                ));
            }
        }
        if let EffectModel::GroupVarying { effects } = &self.effect {
            for (g, _) in &self.group_shares {
                if let Group::Treated(g) = g {
                    if !effects.iter().any(|(h, _)| h == g) {
                        return fail(format!("group {g} has no entry in the effect map"));
                    }
                }
            }
        }
        if let Some(v) = &self.trend_violation {
            if !self.covariates.iter().any(|c| c.name == v.covariate) {
                return fail(format!("trend violation references unknown covariate `{}`", v.covariate));
            }
        }
        for c in &self.covariates {
            let all = std::iter::once(c.default_prevalence)
                .chain(c.group_prevalence.iter().map(|(_, p)| *p));
            for p in all {
                if !(0.0..=1.0).contains(&p) {
                    return fail(format!("prevalence {p} for `{}` outside [0, 1]", c.name));
                }
            }
        }
        if let Some(cl) = &self.clusters {
            if cl.count == 0 {
                return fail("cluster count must be positive".into());
            }
        }
        if let WeightModel::UnitUniform { lo, hi } | WeightModel::CellUniform { lo, hi } =
            self.weights
        {
            if !(lo > 0.0 && hi >= lo) {
                return fail(format!("weight range [{lo}, {hi}] must be positive"));
            }
        }
        Ok(())
    }

    fn periods(&self) -> Vec<i32> {
        (0..self.n_periods as i32).map(|k| self.first_period + k).collect()
    }

    /// Unit count per group by largest remainder, in group sort order.
    fn group_counts(&self) -> Vec<(Group, usize)> {
        let mut shares: Vec<(Group, f64)> = self.group_shares.clone();
        shares.sort_by_key(|&(g, _)| g);
        let targets: Vec<f64> = shares.iter().map(|(_, s)| s * self.n_units as f64).collect();
        let mut counts: Vec<usize> = targets.iter().map(|t| t.floor() as usize).collect();
        let assigned: usize = counts.iter().sum();
        let mut order: Vec<usize> = (0..shares.len()).collect();
        order.sort_by(|&a, &b| {
            let fa = targets[a] - targets[a].floor();
            let fb = targets[b] - targets[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        for k in 0..(self.n_units - assigned) {
            counts[order[k % order.len()]] += 1;
        }
        shares.iter().map(|&(g, _)| g).zip(counts).collect()
    }

    fn period_value(&self, t: i32) -> f64 {
        match &self.period_effect {
            PeriodEffect::None => 0.0,
            PeriodEffect::Linear { slope } => slope * (t - self.first_period) as f64,
            PeriodEffect::Explicit { values } => values[(t - self.first_period) as usize],
        }
    }
}

/// Generate unit records for a specification.
pub fn generate_records(spec: &DgpSpec) -> Result<Vec<UnitRecord>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let periods = spec.periods();

    // group assignment by contiguous blocks in group sort order
    let mut unit_groups = Vec::with_capacity(spec.n_units);
    for (g, count) in spec.group_counts() {
        unit_groups.extend(std::iter::repeat(g).take(count));
    }

    // cluster-period shocks first, so unit draws don't depend on them
    let n_clusters = spec.clusters.as_ref().map(|c| c.count).unwrap_or(0);
    let mut shocks = vec![0.0; n_clusters * periods.len()];
    if let Some(cl) = &spec.clusters {
        for s in shocks.iter_mut() {
            *s = cl.shock_sd * std_normal.sample(&mut rng);
        }
    }

    let violation_index = spec
        .trend_violation
        .as_ref()
        .map(|v| spec.covariates.iter().position(|c| c.name == v.covariate).unwrap());

    let id_width = spec.n_units.to_string().len();
    let cluster_width = n_clusters.max(1).to_string().len();
    let mut records = Vec::with_capacity(spec.n_units * periods.len());
    for (u, &group) in unit_groups.iter().enumerate() {
        let alpha = spec.unit_effect_sd * std_normal.sample(&mut rng);
        let covariates: Vec<f64> = spec
            .covariates
            .iter()
            .map(|c| if rng.random::<f64>() < c.prevalence(group) { 1.0 } else { 0.0 })
            .collect();
        let unit_weight = match spec.weights {
            WeightModel::UnitUniform { lo, hi } => rng.random_range(lo..=hi),
            _ => 1.0,
        };

        let unit_id = format!("u{u:0id_width$}");
        let cluster_id = if n_clusters > 0 {
            format!("c{:0cluster_width$}", u % n_clusters)
        } else {
            unit_id.clone()
        };

        for (p, &t) in periods.iter().enumerate() {
            let weight = match spec.weights {
                WeightModel::Constant => 1.0,
                WeightModel::UnitUniform { .. } => unit_weight,
                WeightModel::CellUniform { lo, hi } => rng.random_range(lo..=hi),
            };
            let mut y = alpha + spec.period_value(t);
            if n_clusters > 0 {
                y += shocks[(u % n_clusters) * periods.len() + p];
            }
            if let (Some(v), Some(k)) = (&spec.trend_violation, violation_index) {
                y += v.slope * covariates[k] * (t - v.start) as f64;
            }
            if let Group::Treated(g) = group {
                y += spec.effect.effect_at(g, t, spec.anticipation);
            }
            y += spec.noise_sd * std_normal.sample(&mut rng);

            let mut record = UnitRecord::new(unit_id.clone(), t, group, y)
                .with_weight(weight)
                .with_cluster(cluster_id.clone());
            for (c, v) in spec.covariates.iter().zip(&covariates) {
                record.covariates.insert(c.name.clone(), *v);
            }
            records.push(record);
        }
    }
    Ok(records)
}

/// Generate an aggregated panel together with its truth table.
pub fn generate(spec: &DgpSpec) -> Result<(PanelDataset, TruthTable)> {
    let records = generate_records(spec)?;
    let ds = aggregate_cells(&records)?;
    let truth = true_aggregates(spec, &ds)?;
    Ok((ds, truth))
}

/// Compute the estimands a correct estimator should recover from `ds`,
/// weighting groups by their realized sizes in the generated panel.
pub fn true_aggregates(spec: &DgpSpec, ds: &PanelDataset) -> Result<TruthTable> {
    let first = ds.min_period();
    let last = ds.max_period();
    let sizes = ds.group_sizes();

    // groups the estimator retains: base period inside the observed range
    let retained: Vec<i32> = ds
        .treated_groups()
        .into_iter()
        .filter(|&g| g - 1 - spec.anticipation as i32 >= first && g <= last)
        .collect();

    let mut att = BTreeMap::new();
    let mut group = BTreeMap::new();
    for &g in &retained {
        let mut post_sum = 0.0;
        let mut post_count = 0usize;
        for &t in ds.periods() {
            let effect = spec.effect.effect_at(g, t, spec.anticipation);
            att.insert((g, t), effect);
            if t >= g {
                post_sum += effect;
                post_count += 1;
            }
        }
        group.insert(g, post_sum / post_count as f64);
    }

    let total_size: f64 = retained.iter().map(|g| sizes[g]).sum();
    if retained.is_empty() || total_size <= 0.0 {
        return Err(Error::NoEstimableCells);
    }
    let overall = retained.iter().map(|g| sizes[g] / total_size * group[g]).sum();

    let mut event = BTreeMap::new();
    let e_min = retained.iter().map(|g| first - g).min().unwrap();
    let e_max = retained.iter().map(|g| last - g).max().unwrap();
    for e in e_min..=e_max {
        let contributors: Vec<i32> = retained
            .iter()
            .copied()
            .filter(|g| (first..=last).contains(&(g + e)))
            .collect();
        let mass: f64 = contributors.iter().map(|g| sizes[g]).sum();
        if mass > 0.0 {
            let value = contributors
                .iter()
                .map(|&g| sizes[&g] / mass * spec.effect.effect_at(g, g + e, spec.anticipation))
                .sum();
            event.insert(e, value);
        }
    }

    Ok(TruthTable { att, group, overall, event })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_spec() -> DgpSpec {
        DgpSpec {
            n_units: 4,
            first_period: 1,
            n_periods: 4,
            group_shares: vec![
                (Group::Treated(2), 0.5),
                (Group::Treated(3), 0.25),
                (Group::Never, 0.25),
            ],
            effect: EffectModel::Dynamic { base: 1.0, slope: 0.5 },
            anticipation: 0,
            unit_effect_sd: 0.0,
            period_effect: PeriodEffect::None,
            noise_sd: 0.0,
            covariates: vec![],
            trend_violation: None,
            clusters: None,
            weights: WeightModel::Constant,
            seed: 7,
        }
    }

    #[test]
    fn group_counts_use_largest_remainder() {
        let spec = DgpSpec {
            n_units: 5,
            group_shares: vec![
                (Group::Treated(2), 0.5),
                (Group::Treated(3), 0.3),
                (Group::Never, 0.2),
            ],
            ..base_spec()
        };
        let counts = spec.group_counts();
        assert_eq!(
            counts,
            vec![(Group::Treated(2), 3), (Group::Treated(3), 1), (Group::Never, 1)]
        );
        let total: usize = counts.iter().map(|(_, c)| c).sum();
        assert_eq!(total, 5);
    }

    #[test]
    fn truth_table_dynamic_hand_computed() {
        let (_, truth) = generate(&base_spec()).unwrap();
        // group 2: effects 1, 1.5, 2 over periods 2..4; group 3: 1, 1.5
        assert_eq!(truth.att[&(2, 2)], 1.0);
        assert_eq!(truth.att[&(2, 3)], 1.5);
        assert_eq!(truth.att[&(2, 4)], 2.0);
        assert_eq!(truth.att[&(2, 1)], 0.0);
        assert_eq!(truth.att[&(3, 3)], 1.0);
        assert_eq!(truth.att[&(3, 4)], 1.5);
        assert!((truth.group[&2] - 1.5).abs() < 1e-12);
        assert!((truth.group[&3] - 1.25).abs() < 1e-12);
        // sizes 2 and 1
        assert!((truth.overall - (2.0 * 1.5 + 1.25) / 3.0).abs() < 1e-12);
        assert!((truth.event[&0] - 1.0).abs() < 1e-12);
        assert!((truth.event[&1] - 1.5).abs() < 1e-12);
        assert!((truth.event[&2] - 2.0).abs() < 1e-12);
        assert_eq!(truth.event[&-1], 0.0);
    }

    #[test]
    fn noiseless_outcomes_are_exact() {
        let spec = DgpSpec {
            effect: EffectModel::Homogeneous { delta: 2.0 },
            period_effect: PeriodEffect::Linear { slope: 0.25 },
            ..base_spec()
        };
        let (ds, truth) = generate(&spec).unwrap();
        for cell in ds.cells() {
            let expected = 0.25 * (cell.period - 1) as f64
                + match cell.group {
                    Group::Treated(g) if cell.period >= g => 2.0,
                    _ => 0.0,
                };
            assert!((cell.outcome_mean - expected).abs() < 1e-12);
        }
        assert!((truth.overall - 2.0).abs() < 1e-12);
    }

    #[test]
    fn same_seed_reproduces_different_seed_varies() {
        let spec = DgpSpec { noise_sd: 1.0, unit_effect_sd: 1.0, ..base_spec() };
        let (a, _) = generate(&spec).unwrap();
        let (b, _) = generate(&spec).unwrap();
        assert_eq!(a.cells().len(), b.cells().len());
        for (x, y) in a.cells().iter().zip(b.cells()) {
            assert_eq!(x.outcome_mean.to_bits(), y.outcome_mean.to_bits());
        }
        let (c, _) = generate(&DgpSpec { seed: 8, ..spec }).unwrap();
        assert!(a.cells().iter().zip(c.cells()).any(|(x, y)| x.outcome_mean != y.outcome_mean));
    }

    #[test]
    fn covariate_prevalence_tracks_spec() {
        let spec = DgpSpec {
            n_units: 4000,
            group_shares: vec![(Group::Treated(2), 0.5), (Group::Never, 0.5)],
            covariates: vec![CovariateSpec {
                name: "urban".into(),
                default_prevalence: 0.2,
                group_prevalence: vec![(Group::Treated(2), 0.8)],
            }],
            ..base_spec()
        };
        let (ds, _) = generate(&spec).unwrap();
        let k = ds.covariate_index("urban").unwrap();
        let mean_for = |never: bool| {
            let cells: Vec<&crate::panel::PanelCell> = ds
                .cells()
                .iter()
                .filter(|c| c.group.is_never() == never)
                .collect();
            cells.iter().map(|c| c.covariates[k]).sum::<f64>() / cells.len() as f64
        };
        assert!((mean_for(false) - 0.8).abs() < 0.05);
        assert!((mean_for(true) - 0.2).abs() < 0.05);
    }

    #[test]
    fn trend_violation_leaves_truth_unchanged() {
        let mut spec = DgpSpec {
            covariates: vec![CovariateSpec {
                name: "urban".into(),
                default_prevalence: 0.5,
                group_prevalence: vec![],
            }],
            ..base_spec()
        };
        let (_, clean) = generate(&spec).unwrap();
        spec.trend_violation = Some(TrendViolation {
            covariate: "urban".into(),
            slope: 0.3,
            start: 1,
        });
        let (_, violated) = generate(&spec).unwrap();
        assert_eq!(clean.att, violated.att);
        assert_eq!(clean.overall, violated.overall);
    }

    #[test]
    fn trend_violation_shifts_untreated_outcomes() {
        let spec = DgpSpec {
            n_units: 40,
            effect: EffectModel::None,
            group_shares: vec![(Group::Never, 1.0)],
            covariates: vec![CovariateSpec {
                name: "urban".into(),
                default_prevalence: 0.5,
                group_prevalence: vec![],
            }],
            trend_violation: Some(TrendViolation {
                covariate: "urban".into(),
                slope: 0.3,
                start: 1,
            }),
            ..base_spec()
        };
        let ds = aggregate_cells(&generate_records(&spec).unwrap()).unwrap();
        let k = ds.covariate_index("urban").unwrap();
        for cell in ds.cells() {
            let expected = 0.3 * cell.covariates[k] * (cell.period - 1) as f64;
            assert!((cell.outcome_mean - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn cell_weights_fall_in_range() {
        let spec = DgpSpec {
            weights: WeightModel::CellUniform { lo: 2.0, hi: 5.0 },
            noise_sd: 1.0,
            ..base_spec()
        };
        let (ds, _) = generate(&spec).unwrap();
        assert!(ds.cells().iter().all(|c| (2.0..=5.0).contains(&c.n)));
        let constant = generate(&DgpSpec { weights: WeightModel::Constant, ..base_spec() }).unwrap().0;
        assert!(constant.cells().iter().all(|c| c.n == 1.0));
    }

    #[test]
    fn cluster_shocks_are_shared_within_cluster_period() {
        let spec = DgpSpec {
            n_units: 8,
            group_shares: vec![(Group::Never, 1.0)],
            effect: EffectModel::None,
            clusters: Some(ClusterSpec { count: 2, shock_sd: 1.0 }),
            ..base_spec()
        };
        let ds = aggregate_cells(&generate_records(&spec).unwrap()).unwrap();
        // noiseless: outcome equals the cluster-period shock exactly
        for &t in ds.periods() {
            for cl in 0..2usize {
                let values: Vec<f64> = ds
                    .cells()
                    .iter()
                    .filter(|c| c.period == t && ds.units()[c.unit].cluster == cl)
                    .map(|c| c.outcome_mean)
                    .collect();
                assert!(values.len() >= 2);
                assert!(values.iter().all(|v| (v - values[0]).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let bad_shares = DgpSpec {
            group_shares: vec![(Group::Treated(2), 0.6), (Group::Never, 0.6)],
            ..base_spec()
        };
        assert!(matches!(generate(&bad_shares), Err(Error::InvalidSpec(_))));

        let bad_profile = DgpSpec {
            period_effect: PeriodEffect::Explicit { values: vec![0.0; 3] },
            ..base_spec()
        };
        assert!(matches!(generate(&bad_profile), Err(Error::InvalidSpec(_))));

        let bad_violation = DgpSpec {
            trend_violation: Some(TrendViolation {
                covariate: "nope".into(),
                slope: 1.0,
                start: 1,
            }),
            ..base_spec()
        };
        assert!(matches!(generate(&bad_violation), Err(Error::InvalidSpec(_))));

        let missing_effect = DgpSpec {
            effect: EffectModel::GroupVarying { effects: vec![(2, 1.0)] },
            ..base_spec()
        };
        assert!(matches!(generate(&missing_effect), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = DgpSpec {
            covariates: vec![CovariateSpec {
                name: "urban".into(),
                default_prevalence: 0.2,
                group_prevalence: vec![(Group::Treated(2), 0.8), (Group::Never, 0.1)],
            }],
            ..base_spec()
        };
        let text = serde_json::to_string(&spec).unwrap();
        let back: DgpSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);
    }
}
