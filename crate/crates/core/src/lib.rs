//! Impact-parity interventions for binary classifiers.
//!
//! Two families of methods are provided side by side so their accuracy/parity
//! trade-offs can be compared on the same data:
//!
//! * group-blind training ([`dlp`]): the protected attribute is used only while
//!   fitting, through a covariance penalty, and the emitted classifier never
//!   reads it;
//! * explicit per-group thresholds ([`threshold`]): probability estimates are
//!   cut at group-specific constants, either greedily or by an exact sweep.
//!
//! [`metrics`] holds the disparity and utility measures shared by both,
//! [`oracle`] holds exhaustive verifiers for small instances, and [`synth`] and
//! [`ingest`] produce datasets.

pub mod dlp;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod records;
pub mod synth;
pub mod threshold;
pub mod types;

pub use error::{Error, Result};
pub use metrics::{fairness_report, FairnessReport};
pub use types::{
    Dataset, Decisions, Flip, FlipDirection, Group, GroupNames, ParityConstraint, ProbEstimates,
    TargetKind,
};
