//! Panel data model: (unit × period) cells, CSV loading, covariate
//! binarization, and design validation.
//!
//! Individual-level records are aggregated into weighted cells, one per
//! (unit, period). All estimators consume the immutable [`PanelDataset`]
//! produced here.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::design::{ControlMode, DesignConfig};
use crate::error::{Error, Result};

/// First-treatment assignment of a unit.
///
/// Never-treated units carry an explicit sentinel rather than a fake
/// treatment year, so they can never be compared against a real period.
/// At the CSV boundary the sentinel is a configurable string (empty by
/// default), mapped to [`Group::Never`] on load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Group {
    /// First treated at the given period.
    Treated(i32),
    /// Never treated within the observed design.
    Never,
}

impl Group {
    pub fn is_never(self) -> bool {
        matches!(self, Group::Never)
    }

    /// Treatment period, if ever treated.
    pub fn period(self) -> Option<i32> {
        match self {
            Group::Treated(g) => Some(g),
            Group::Never => None,
        }
    }

    /// True when a unit with this assignment is under treatment at `t`.
    pub fn treated_at(self, t: i32) -> bool {
        matches!(self, Group::Treated(g) if t >= g)
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Group::Treated(g) => write!(f, "{g}"),
            Group::Never => write!(f, "never"),
        }
    }
}

impl Serialize for Group {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Group::Treated(g) => serializer.serialize_i32(*g),
            Group::Never => serializer.serialize_str("never"),
        }
    }
}

impl<'de> Deserialize<'de> for Group {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(i32),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(g) => Ok(Group::Treated(g)),
            Raw::Text(s) if s == "never" => Ok(Group::Never),
            Raw::Text(s) => Err(D::Error::custom(format!("invalid group `{s}`"))),
        }
    }
}

/// One input observation: a unit observed in one period.
///
/// `weight` is a nonnegative cell or individual count; `cluster_id`
/// defaults to the unit itself when the input carries no clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitRecord {
    pub unit_id: String,
    pub period: i32,
    pub first_treat: Group,
    pub outcome: f64,
    pub weight: f64,
    pub covariates: BTreeMap<String, f64>,
    pub cluster_id: String,
}

impl UnitRecord {
    pub fn new(unit_id: impl Into<String>, period: i32, first_treat: Group, outcome: f64) -> Self {
        let unit_id = unit_id.into();
        UnitRecord {
            cluster_id: unit_id.clone(),
            unit_id,
            period,
            first_treat,
            outcome,
            weight: 1.0,
            covariates: BTreeMap::new(),
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_cluster(mut self, cluster: impl Into<String>) -> Self {
        self.cluster_id = cluster.into();
        self
    }

    pub fn with_covariate(mut self, name: impl Into<String>, value: f64) -> Self {
        self.covariates.insert(name.into(), value);
        self
    }
}

/// Column mapping for [`load_csv`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvSchema {
    pub unit: String,
    pub period: String,
    pub first_treat: String,
    pub outcome: String,
    #[serde(default)]
    pub weight: Option<String>,
    #[serde(default)]
    pub cluster: Option<String>,
    /// Covariate columns to carry along, loaded as reals.
    #[serde(default)]
    pub covariates: Vec<String>,
    /// String in the first-treat column marking never-treated units.
    /// The empty string always maps to never-treated as well.
    #[serde(default)]
    pub never_sentinel: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            unit: "unit".into(),
            period: "period".into(),
            first_treat: "first_treat".into(),
            outcome: "outcome".into(),
            weight: Some("weight".into()),
            cluster: Some("cluster".into()),
            covariates: Vec::new(),
            never_sentinel: String::new(),
        }
    }
}

/// One aggregated observation cell: a unit's weighted outcome mean in one
/// period. `unit` indexes into [`PanelDataset::units`].
#[derive(Debug, Clone, PartialEq)]
pub struct PanelCell {
    pub unit: usize,
    pub period: i32,
    pub group: Group,
    pub outcome_mean: f64,
    pub n: f64,
    /// Aligned with [`PanelDataset::covariate_names`].
    pub covariates: Vec<f64>,
}

/// Immutable unit-level attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitInfo {
    pub id: String,
    pub group: Group,
    /// Index into [`PanelDataset::clusters`].
    pub cluster: usize,
}

/// Metadata accumulated during dataset construction and transformation.
#[derive(Debug, Clone, Default, Serialize)]
pub struct DatasetMetadata {
    /// Weighted medians applied by the last covariate binarization.
    pub covariate_medians: BTreeMap<String, f64>,
    /// Covariates with no variation above their median split.
    pub degenerate_covariates: Vec<String>,
    /// Cells dropped because their total weight was zero.
    pub dropped_zero_weight_cells: usize,
}

/// An immutable aggregated panel. Construction is single-threaded; the
/// finished dataset is safely shareable across threads.
#[derive(Debug, Clone)]
pub struct PanelDataset {
    units: Vec<UnitInfo>,
    clusters: Vec<String>,
    periods: Vec<i32>,
    covariate_names: Vec<String>,
    cells: Vec<PanelCell>,
    /// Unit-major (unit × period) index into `cells`.
    grid: Vec<Option<u32>>,
    /// Mean observed cell weight per unit; the unit's size for group shares.
    unit_sizes: Vec<f64>,
    metadata: DatasetMetadata,
}

impl PanelDataset {
    pub fn units(&self) -> &[UnitInfo] {
        &self.units
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn clusters(&self) -> &[String] {
        &self.clusters
    }

    pub fn periods(&self) -> &[i32] {
        &self.periods
    }

    pub fn min_period(&self) -> i32 {
        self.periods[0]
    }

    pub fn max_period(&self) -> i32 {
        *self.periods.last().unwrap()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|c| c == name)
    }

    pub fn cells(&self) -> &[PanelCell] {
        &self.cells
    }

    pub fn metadata(&self) -> &DatasetMetadata {
        &self.metadata
    }

    pub fn period_index(&self, period: i32) -> Option<usize> {
        self.periods.binary_search(&period).ok()
    }

    /// Cell for `unit` at `period`, if observed.
    pub fn cell(&self, unit: usize, period: i32) -> Option<&PanelCell> {
        let p = self.period_index(period)?;
        self.grid[unit * self.periods.len() + p].map(|i| &self.cells[i as usize])
    }

    /// Sorted distinct treatment periods observed among ever-treated units.
    pub fn treated_groups(&self) -> Vec<i32> {
        let mut gs: Vec<i32> = self.units.iter().filter_map(|u| u.group.period()).collect();
        gs.sort_unstable();
        gs.dedup();
        gs
    }

    pub fn n_never_units(&self) -> usize {
        self.units.iter().filter(|u| u.group.is_never()).count()
    }

    /// Size of a unit: its mean observed cell weight.
    pub fn unit_size(&self, unit: usize) -> f64 {
        self.unit_sizes[unit]
    }

    /// Total size per treated group, the basis for group-share weights.
    pub fn group_sizes(&self) -> BTreeMap<i32, f64> {
        let mut sizes = BTreeMap::new();
        for (i, u) in self.units.iter().enumerate() {
            if let Group::Treated(g) = u.group {
                *sizes.entry(g).or_insert(0.0) += self.unit_sizes[i];
            }
        }
        sizes
    }

    pub fn total_n(&self) -> f64 {
        self.cells.iter().map(|c| c.n).sum()
    }

    /// True when every unit is observed in every period.
    pub fn is_balanced(&self) -> bool {
        self.grid.iter().all(|e| e.is_some())
    }

    fn with_metadata(mut self, metadata: DatasetMetadata) -> Self {
        self.metadata = metadata;
        self
    }
}

/// Load unit records from a UTF-8 CSV file with a header row.
///
/// Missing weights default to 1, missing clusters to the unit id. A
/// first-treat value equal to the configured sentinel (or empty) maps to
/// [`Group::Never`]. Row numbers in errors count data rows from 1.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Vec<UnitRecord>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };

    let unit_col = col(&schema.unit)?;
    let period_col = col(&schema.period)?;
    let treat_col = col(&schema.first_treat)?;
    let outcome_col = col(&schema.outcome)?;
    let weight_col = schema.weight.as_deref().map(col).transpose()?;
    let cluster_col = schema.cluster.as_deref().map(col).transpose()?;
    let cov_cols: Vec<(String, usize)> = schema
        .covariates
        .iter()
        .map(|name| col(name).map(|i| (name.clone(), i)))
        .collect::<Result<_>>()?;

    let mut records = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let row = row?;
        let rownum = idx + 1;
        let field = |c: usize| row.get(c).unwrap_or("");
        let parse_f64 = |c: usize, name: &str| -> Result<f64> {
            field(c).parse::<f64>().map_err(|_| Error::Parse {
                row: rownum,
                column: name.to_string(),
                value: field(c).to_string(),
            })
        };

        let unit_id = field(unit_col).to_string();
        let period: i32 = field(period_col).parse().map_err(|_| Error::Parse {
            row: rownum,
            column: schema.period.clone(),
            value: field(period_col).to_string(),
        })?;
        let outcome = parse_f64(outcome_col, &schema.outcome)?;

        let treat_raw = field(treat_col);
        let first_treat = if treat_raw.is_empty() || treat_raw == schema.never_sentinel {
            Group::Never
        } else {
            Group::Treated(treat_raw.parse().map_err(|_| Error::Parse {
                row: rownum,
                column: schema.first_treat.clone(),
                value: treat_raw.to_string(),
            })?)
        };

        let weight = match weight_col {
            Some(c) if !field(c).is_empty() => parse_f64(c, schema.weight.as_deref().unwrap())?,
            _ => 1.0,
        };
        if weight < 0.0 {
            return Err(Error::NegativeWeight { row: rownum, weight });
        }

        let cluster_id = match cluster_col {
            Some(c) if !field(c).is_empty() => field(c).to_string(),
            _ => unit_id.clone(),
        };

        let mut covariates = BTreeMap::new();
        for (name, c) in &cov_cols {
            covariates.insert(name.clone(), parse_f64(*c, name)?);
        }

        records.push(UnitRecord {
            unit_id,
            period,
            first_treat,
            outcome,
            weight,
            covariates,
            cluster_id,
        });
    }
    Ok(records)
}

/// Write a dataset back out in the canonical CSV layout readable by
/// [`load_csv`] with the default schema (empty never sentinel).
pub fn write_csv(ds: &PanelDataset, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec![
        "unit".to_string(),
        "period".to_string(),
        "first_treat".to_string(),
        "outcome".to_string(),
        "weight".to_string(),
        "cluster".to_string(),
    ];
    header.extend(ds.covariate_names().iter().cloned());
    writer.write_record(&header)?;
    for cell in ds.cells() {
        let unit = &ds.units()[cell.unit];
        let mut row = vec![
            unit.id.clone(),
            cell.period.to_string(),
            match unit.group {
                Group::Treated(g) => g.to_string(),
                Group::Never => String::new(),
            },
            format!("{}", cell.outcome_mean),
            format!("{}", cell.n),
            ds.clusters()[unit.cluster].clone(),
        ];
        row.extend(cell.covariates.iter().map(|v| format!("{v}")));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Aggregate records into one weighted cell per (unit, period).
///
/// Outcomes and covariates are combined by weighted mean; cell weight is
/// the summed record weight. A unit must carry a single first-treatment
/// value and a single cluster across its records.
pub fn aggregate_cells(records: &[UnitRecord]) -> Result<PanelDataset> {
    if records.is_empty() {
        return Err(Error::InvalidConfig("no input records".into()));
    }

    let cov_names: Vec<String> = records[0].covariates.keys().cloned().collect();
    for r in records {
        for name in &cov_names {
            if !r.covariates.contains_key(name) {
                return Err(Error::UnknownCovariate(format!(
                    "unit `{}` period {} lacks covariate `{name}`",
                    r.unit_id, r.period
                )));
            }
        }
        if r.covariates.len() != cov_names.len() {
            let extra = r.covariates.keys().find(|k| !cov_names.contains(k)).unwrap();
            return Err(Error::UnknownCovariate(format!(
                "covariate `{extra}` appears on unit `{}` but not on all records",
                r.unit_id
            )));
        }
    }

    // unit id -> (group, cluster), validated for consistency
    let mut unit_attrs: BTreeMap<&str, (Group, &str)> = BTreeMap::new();
    for r in records {
        match unit_attrs.get(r.unit_id.as_str()) {
            None => {
                unit_attrs.insert(&r.unit_id, (r.first_treat, &r.cluster_id));
            }
            Some(&(g, cl)) => {
                if g != r.first_treat {
                    return Err(Error::InconsistentGroup {
                        unit: r.unit_id.clone(),
                        a: g.to_string(),
                        b: r.first_treat.to_string(),
                    });
                }
                if cl != r.cluster_id {
                    return Err(Error::InconsistentCluster {
                        unit: r.unit_id.clone(),
                        a: cl.to_string(),
                        b: r.cluster_id.clone(),
                    });
                }
            }
        }
    }

    let unit_ids: Vec<&str> = unit_attrs.keys().copied().collect();
    let unit_index: BTreeMap<&str, usize> =
        unit_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();

    let mut clusters: Vec<String> =
        unit_attrs.values().map(|&(_, c)| c.to_string()).collect();
    clusters.sort_unstable();
    clusters.dedup();
    let cluster_index: BTreeMap<&str, usize> =
        clusters.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();

    let mut periods: Vec<i32> = records.iter().map(|r| r.period).collect();
    periods.sort_unstable();
    periods.dedup();

    // accumulate weighted sums per (unit, period)
    struct Acc {
        wy: f64,
        w: f64,
        wcov: Vec<f64>,
    }
    let mut acc: BTreeMap<(usize, i32), Acc> = BTreeMap::new();
    for r in records {
        let u = unit_index[r.unit_id.as_str()];
        let entry = acc.entry((u, r.period)).or_insert_with(|| Acc {
            wy: 0.0,
            w: 0.0,
            wcov: vec![0.0; cov_names.len()],
        });
        entry.wy += r.weight * r.outcome;
        entry.w += r.weight;
        for (k, name) in cov_names.iter().enumerate() {
            entry.wcov[k] += r.weight * r.covariates[name];
        }
    }

    let units: Vec<UnitInfo> = unit_ids
        .iter()
        .map(|&id| {
            let (group, cluster) = unit_attrs[id];
            UnitInfo {
                id: id.to_string(),
                group,
                cluster: cluster_index[cluster],
            }
        })
        .collect();

    let mut metadata = DatasetMetadata::default();
    let mut cells = Vec::with_capacity(acc.len());
    let mut grid = vec![None; units.len() * periods.len()];
    for ((u, period), a) in acc {
        if a.w == 0.0 {
            metadata.dropped_zero_weight_cells += 1;
            continue;
        }
        let p = periods.binary_search(&period).unwrap();
        grid[u * periods.len() + p] = Some(cells.len() as u32);
        cells.push(PanelCell {
            unit: u,
            period,
            group: units[u].group,
            outcome_mean: a.wy / a.w,
            n: a.w,
            covariates: a.wcov.iter().map(|s| s / a.w).collect(),
        });
    }
    if cells.is_empty() {
        return Err(Error::InvalidConfig("all cells have zero weight".into()));
    }

    let unit_sizes = (0..units.len())
        .map(|u| {
            let (sum, count) = cells
                .iter()
                .filter(|c| c.unit == u)
                .fold((0.0, 0usize), |(s, k), c| (s + c.n, k + 1));
            if count == 0 {
                0.0
            } else {
                sum / count as f64
            }
        })
        .collect();

    Ok(PanelDataset {
        units,
        clusters,
        periods,
        covariate_names: cov_names,
        cells,
        grid,
        unit_sizes,
        metadata,
    })
}

/// Smallest value whose cumulative weight reaches half the total.
fn weighted_median(values: &mut [(f64, f64)]) -> f64 {
    values.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = values.iter().map(|&(_, w)| w).sum();
    let mut cum = 0.0;
    for &(v, w) in values.iter() {
        cum += w;
        if cum >= total / 2.0 {
            return v;
        }
    }
    values.last().unwrap().0
}

/// Replace each named covariate with 1 above its n-weighted median across
/// cells, 0 otherwise (ties break to 0). Medians land in the returned
/// dataset's metadata; covariates without variation after the split are
/// flagged degenerate.
pub fn binarize_covariates(ds: &PanelDataset, names: &[String]) -> Result<PanelDataset> {
    let mut out = ds.clone();
    let mut metadata = ds.metadata.clone();
    for name in names {
        let k = ds
            .covariate_index(name)
            .ok_or_else(|| Error::UnknownCovariate(name.clone()))?;
        let mut pairs: Vec<(f64, f64)> =
            ds.cells.iter().map(|c| (c.covariates[k], c.n)).collect();
        let median = weighted_median(&mut pairs);
        let mut any_above = false;
        for cell in &mut out.cells {
            let v = if cell.covariates[k] > median { 1.0 } else { 0.0 };
            any_above |= v == 1.0;
            cell.covariates[k] = v;
        }
        metadata.covariate_medians.insert(name.clone(), median);
        if !any_above && !metadata.degenerate_covariates.contains(name) {
            metadata.degenerate_covariates.push(name.clone());
        }
    }
    Ok(out.with_metadata(metadata))
}

/// A dropped treatment group and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedGroup {
    pub group: i32,
    pub reason: String,
}

/// Estimation-design audit: which groups survive, which are dropped, and
/// the basic shape of the data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignSummary {
    pub retained_groups: Vec<i32>,
    pub dropped_groups: Vec<DroppedGroup>,
    pub n_never_treated_units: usize,
    pub n_units: usize,
    pub n_cells: usize,
    pub period_range: (i32, i32),
}

/// Audit the design: a treated group is retained only when its base
/// period g − 1 − anticipation is actually observed. Never-treated-only
/// control designs with zero never-treated units are fatal.
pub fn validate_design(ds: &PanelDataset, cfg: &DesignConfig) -> Result<DesignSummary> {
    if cfg.control_mode == ControlMode::NeverTreated && ds.n_never_units() == 0 {
        return Err(Error::NoControlUnits);
    }

    let mut retained = Vec::new();
    let mut dropped = Vec::new();
    for g in ds.treated_groups() {
        let base = cfg.base_period(g);
        if g > ds.max_period() {
            dropped.push(DroppedGroup {
                group: g,
                reason: "first treated after the observed period range".into(),
            });
        } else if base < ds.min_period() {
            dropped.push(DroppedGroup {
                group: g,
                reason: "no pre-period".into(),
            });
        } else if ds.period_index(base).is_none() {
            dropped.push(DroppedGroup {
                group: g,
                reason: format!("base period {base} not observed"),
            });
        } else {
            retained.push(g);
        }
    }

    Ok(DesignSummary {
        retained_groups: retained,
        dropped_groups: dropped,
        n_never_treated_units: ds.n_never_units(),
        n_units: ds.n_units(),
        n_cells: ds.cells.len(),
        period_range: (ds.min_period(), ds.max_period()),
    })
}
