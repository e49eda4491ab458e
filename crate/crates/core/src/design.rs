//! Estimation design: control-group definition, anticipation, covariate
//! adjustment, and inference settings shared by every estimator.

use serde::{Deserialize, Serialize};

use crate::bootstrap::BootstrapConfig;
use crate::error::{Error, Result};
use crate::panel::Group;

/// Control pool for a group-time comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    /// Never-treated units only.
    #[default]
    NeverTreated,
    /// Units treated strictly after the comparison window, excluding
    /// never-treated units.
    NotYetTreated,
    /// Union of the two pools.
    Both,
}

/// Full estimation design shared by the group-time estimator, the
/// aggregations, and the diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignConfig {
    pub control_mode: ControlMode,
    /// Number of periods before formal adoption in which units may
    /// already respond. Shifts every base period earlier.
    pub anticipation: u32,
    /// Adjust for covariates via regression on control units.
    pub conditional: bool,
    /// Covariates entering the adjustment (binary-valued).
    pub covariate_names: Vec<String>,
    /// Reject treated covariate patterns absent among controls instead
    /// of extrapolating.
    pub strict_support: bool,
    /// Comparisons whose treated or control weight falls at or below
    /// this floor are marked missing.
    pub min_comparison_weight: f64,
    pub bootstrap: BootstrapConfig,
    /// Event-time range for the event-study aggregation.
    pub event_window: (i32, i32),
}

impl Default for DesignConfig {
    fn default() -> Self {
        DesignConfig {
            control_mode: ControlMode::NeverTreated,
            anticipation: 0,
            conditional: false,
            covariate_names: Vec::new(),
            strict_support: false,
            min_comparison_weight: 0.0,
            bootstrap: BootstrapConfig::default(),
            event_window: (-5, 5),
        }
    }
}

impl DesignConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.event_window;
        if !(lo <= 0 && 0 <= hi) {
            return Err(Error::InvalidConfig(format!(
                "event window {lo}..{hi} must contain 0"
            )));
        }
        if self.min_comparison_weight < 0.0 {
            return Err(Error::InvalidConfig(
                "minimum comparison weight must be nonnegative".into(),
            ));
        }
        for (i, name) in self.covariate_names.iter().enumerate() {
            if self.covariate_names[..i].contains(name) {
                return Err(Error::InvalidConfig(format!("duplicate covariate `{name}`")));
            }
        }
        self.bootstrap.validate()
    }

    /// Base (reference) period for group `g`: the last period safely
    /// before any treatment response, g − 1 − anticipation. Used for all
    /// comparisons involving `g`, pre and post.
    pub fn base_period(&self, g: i32) -> i32 {
        g - 1 - self.anticipation as i32
    }

    /// Whether a unit with assignment `group` is a valid control for the
    /// (g, t) comparison under this design.
    pub fn is_control(&self, group: Group, g: i32, t: i32) -> bool {
        match (self.control_mode, group) {
            (ControlMode::NeverTreated, Group::Never) => true,
            (ControlMode::NeverTreated, Group::Treated(_)) => false,
            (ControlMode::NotYetTreated, Group::Never) => false,
            (ControlMode::NotYetTreated, Group::Treated(h)) => h > t.max(g),
            (ControlMode::Both, Group::Never) => true,
            (ControlMode::Both, Group::Treated(h)) => h > t.max(g),
        }
    }
}
