//! Staggered-adoption difference-in-differences toolkit.
//!
//! Estimates group-time average treatment effects on weighted unit-period
//! panels, aggregates them into group, overall, and event-time summaries,
//! and attaches cluster-robust inference through a multiplier bootstrap.
//! Companion modules diagnose what a two-way fixed-effects regression
//! would estimate on the same data (implicit comparison weights and a
//! full decomposition into two-by-two comparisons) and cross-check the
//! results with a fixed-effects imputation estimator. A synthetic data
//! generator with a closed-form truth table supports calibration and
//! testing end to end.

pub mod aggregate;
pub mod bootstrap;
pub mod design;
pub mod dgp;
pub mod diagnostics;
pub mod fe;
pub mod error;
pub mod gt;
pub mod impute;
pub mod panel;
pub mod report;

pub use design::{ControlMode, DesignConfig};
pub use error::{Error, Result};
pub use panel::{Group, PanelDataset, UnitRecord};
