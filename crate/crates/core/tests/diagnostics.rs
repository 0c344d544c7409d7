mod common;

use common::simpson;
use rareweak_core::diagnostics::{
    hellinger2_coordinate, hellinger2_mixture, indistinguishability_bound, nonnull_logp_density,
};
use rareweak_core::mc_engine::estimate_power_many;
use rareweak_core::{Calibration, ExperimentConfig, ModelSpec, StatKind};

#[test]
fn nonnull_density_is_normalized() {
    for &mu in &[0.0, 1.0, 3.0] {
        for &sigma in &[0.5, 1.0, 2.0] {
            // w = t^2 removes the w^{-1/2} singularity at zero.
            let g = |t: f64| {
                if t == 0.0 {
                    // Limit of 2t f(t^2) as t -> 0.
                    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
                    2.0 * phi(mu / sigma) / sigma
                } else {
                    2.0 * t * nonnull_logp_density(t * t, mu, sigma).unwrap()
                }
            };
            let upper = mu + 40.0 * sigma;
            let mass = simpson(&g, 0.0, mu.max(1.0), 1e-12) + simpson(&g, mu.max(1.0), upper, 1e-12);
            assert!((mass - 1.0).abs() <= 1e-8, "mu={mu}, sigma={sigma}: {mass}");
        }
    }
}

#[test]
fn coordinate_distance_against_affinity_oracle() {
    // Moderate eps, where 1 - int sqrt(f0 f1) has no cancellation trouble.
    for &(eps, mu, sigma) in &[(0.3, 2.0, 1.0), (0.05, 3.5, 0.7), (0.6, 1.0, 1.8)] {
        let (h2, err) = hellinger2_mixture(eps, mu, sigma).unwrap();
        let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let root = |t: f64| {
            let f0 = t * (-0.5 * t * t).exp();
            let g = (phi((t - mu) / sigma) + phi((t + mu) / sigma)) / sigma;
            (f0 * ((1.0 - eps) * f0 + eps * g)).sqrt()
        };
        let top = mu + 40.0 * sigma;
        let affinity = simpson(&root, 0.0, mu, 1e-13) + simpson(&root, mu, top, 1e-13);
        assert!((h2 - (1.0 - affinity)).abs() <= 1e-9, "{h2} vs {}", 1.0 - affinity);
        assert!(err <= 1e-10 * h2.max(1e-300) + 1e-18);
    }
}

#[test]
fn coordinate_distance_is_monotone_and_bounded() {
    let n = 10_000;
    let mut by_beta = Vec::new();
    for &beta in &[0.9, 0.8, 0.7, 0.6, 0.5] {
        let mut prev = 0.0;
        // For tiny mu the departure law (mu + Z)^2 first moves toward chi2_2
        // (its mean 1 + mu^2 approaches 2), so h2 dips until mu is about 1.15.
        // Monotonicity in r holds beyond that dip.
        for &r in &[0.15, 0.3, 0.6, 1.0, 2.0] {
            let cal = Calibration::new(n, beta, r, 1.0).unwrap();
            let (h2, _) = hellinger2_coordinate(&cal).unwrap();
            assert!((0.0..=1.0).contains(&h2));
            assert!(h2 <= cal.eps(), "h2 {h2} above eps {}", cal.eps());
            assert!(h2 >= prev * (1.0 - 1e-9), "beta={beta}: not nondecreasing in r at {r}");
            prev = h2;
        }
        by_beta.push(prev);
    }
    for pair in by_beta.windows(2) {
        assert!(pair[1] >= pair[0]);
    }
}

#[test]
fn distance_dips_for_small_shifts() {
    let at_zero = hellinger2_mixture(1.0, 0.0, 1.0).unwrap().0;
    let near_one = hellinger2_mixture(1.0, 1.1, 1.0).unwrap().0;
    assert!(near_one < at_zero);
}

#[test]
fn deep_powerless_calibration() {
    let cal = Calibration::new(1_000_000, 0.9, 0.01, 1.0).unwrap();
    let (h2, err) = hellinger2_coordinate(&cal).unwrap();
    assert!(h2 < 5e-6 && h2 > 0.0);
    assert!(err <= 1e-10);
    let report = indistinguishability_bound(&cal).unwrap();
    assert!(report.risk_lower >= 0.95, "{report:?}");
}

#[test]
fn simulated_risk_never_beats_the_bound() {
    let stats = [
        StatKind::HigherCriticism { gamma0: 0.2 },
        StatKind::BerkJones,
        StatKind::MinP,
        StatKind::FdrMin,
        StatKind::Fisher,
    ];
    for &(n, beta, r) in &[(2000, 0.6, 0.3), (2000, 0.4, 0.2), (5000, 0.7, 0.05)] {
        let cal = Calibration::new(n, beta, r, 1.0).unwrap();
        let bound = indistinguishability_bound(&cal).unwrap();
        let cfg = ExperimentConfig {
            model: ModelSpec::DirectLogChisq,
            cal,
            stat: stats[0],
            alpha: 0.05,
            reps_null: 300,
            reps_alt: 300,
            seed: 8,
        };
        for est in estimate_power_many(&cfg, &stats).unwrap() {
            assert!(
                est.risk_hat >= bound.risk_lower - 3.0 * est.mc_se.max(0.01),
                "{}: risk {} vs bound {}",
                est.stat,
                est.risk_hat,
                bound.risk_lower
            );
        }
    }
}
