//! Fairness auditing for automated medical image segmentations.
//!
//! The pipeline: per-case quality metrics from gold/silver mask pairs
//! ([`metrics`]), joined with demographics into an [`cohort::AuditTable`],
//! summarised by group fairness quantities ([`fairness`]) and the
//! statistical battery in [`stats`], orchestrated by [`audit`]. [`synth`]
//! generates cohorts with known, group-dependent degradation so every stage
//! can be checked end to end.

pub mod audit;
pub mod cli;
pub mod cohort;
pub mod edt;
pub mod error;
pub mod fairness;
pub mod metrics;
pub mod report;
pub mod rng;
pub mod stats;
pub mod synth;
pub mod volume;

pub use error::{Error, Result};
