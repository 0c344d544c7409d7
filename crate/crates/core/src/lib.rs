//! Global testing of many P-values under rare and weak departures from the
//! uniform null.
//!
//! The crate generates P-values from perturbed log-chisquared models
//! ([`models`]), evaluates five global statistics on them ([`gof_tests`]),
//! evaluates the theoretical detection boundaries ([`curves`]), estimates power
//! by reproducible Monte Carlo ([`mc_engine`]) and computes Hellinger-based
//! indistinguishability bounds ([`diagnostics`]).
//!
//! All randomness flows from counter-based streams keyed by
//! `(seed, replication, feature)`, so every result is bit-for-bit reproducible
//! regardless of how work is scheduled across threads.

pub mod curves;
pub mod diagnostics;
pub mod error;
pub mod mc_engine;
pub mod models;
pub mod quadrature;
pub mod rng;
pub mod special_fn;

pub use curves::{CurveKind, PhasePoint, Region};
pub use diagnostics::HellingerReport;
pub use error::{Error, Result};
pub use gof_tests::{OrientedStatistic, StatKind};
pub use mc_engine::{ExperimentConfig, PhaseRow, PhaseTable, PowerEstimate, ScanRequest};
pub use models::{Calibration, Hypothesis, ModelSpec, PValueVector, TwoSampleMethod};
pub use special_fn::Probability;
