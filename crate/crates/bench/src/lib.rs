//! Shared fixtures for the benchmarks.

use rareweak_core::models::sample_pvalues;
use rareweak_core::{Calibration, Hypothesis, ModelSpec, PValueVector};

/// A reproducible alternative draw from the direct model.
pub fn alternative_pvalues(n: usize, seed: u64) -> PValueVector {
    let cal = Calibration::new(n, 0.6, 0.8, 1.0).expect("valid calibration");
    sample_pvalues(&ModelSpec::DirectLogChisq, &cal, Hypothesis::Alternative, seed, 0)
        .expect("direct model cannot fail")
}
