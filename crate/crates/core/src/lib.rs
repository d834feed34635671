//! Inspection effectiveness analytics over per-phase project records.
//!
//! The crate works on projects described phase by phase (requirements,
//! design, implementation): hours spent inspecting, testing and preparing,
//! who inspected, and how many defects each activity caught.
//!
//! - [`dataset`] parses and validates project records.
//! - [`metrics`] computes depth of inspection (DI), inspection performance
//!   (IPM), capture rates and defect-pattern spans.
//! - [`tables`] recomputes the published summary tables and lists every
//!   cell that disagrees.
//! - [`bbn`] estimates naive-Bayes tables linking parameter levels to DI
//!   levels and answers what-if queries.
//! - [`advisor`] checks projects against recommended parameter ranges.
//! - [`lifecycle`] tracks deliverables through inspection and rework.
//!
//! ```
//! use inspectkit_core::dataset::{validate, Phase, ProjectDataset};
//! use inspectkit_core::metrics::project_metrics;
//!
//! let ds = ProjectDataset::reference();
//! assert!(validate(&ds).is_clean());
//!
//! let p1 = project_metrics(ds.get("P1").unwrap()).unwrap();
//! assert_eq!(format!("{:.2}", p1.phase(Phase::Requirements).di), "0.53");
//! ```

pub mod advisor;
pub mod bbn;
pub mod dataset;
mod error;
pub mod lifecycle;
pub mod metrics;
pub mod report;
pub mod rounding;
pub mod tables;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/dataset.md")]
    mod dataset {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/tables.md")]
    mod tables {}
    #[doc = include_str!("../../../book/src/bbn.md")]
    mod bbn {}
    #[doc = include_str!("../../../book/src/advisor.md")]
    mod advisor {}
    #[doc = include_str!("../../../book/src/lifecycle.md")]
    mod lifecycle {}
}
