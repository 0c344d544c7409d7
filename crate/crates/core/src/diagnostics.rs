//! Indistinguishability certificates for the direct log-chisquared model.
//!
//! For one coordinate the null law of `W = -2 log p` is `chi2_2` with density
//! `f0(w) = exp(-w/2) / 2`; the alternative is the mixture
//! `f1 = (1 - eps) f0 + eps g` with `g` the density of `(mu + sigma Z)^2`.
//! The half-squared Hellinger distance
//! `h2 = (1/2) int (sqrt f0 - sqrt f1)^2` is computed by quadrature, lifted
//! to `n` independent coordinates through the affinity `A_n = (1 - h2)^n`,
//! and turned into a bound on the total variation and therefore on the
//! summed error of any test.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::Calibration;
use crate::quadrature::integrate;
use crate::special_fn::std_normal_pdf;

const QUAD_REL_TOL: f64 = 1e-10;
const QUAD_MAX_PANELS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HellingerReport {
    pub n: usize,
    pub h2_coord: f64,
    pub h2_total: f64,
    pub tv_upper: f64,
    pub risk_lower: f64,
    pub quadrature_error: f64,
    /// The coordinate law the bound is exact for; other models only inherit it
    /// through their asymptotic equivalence.
    pub coordinate_law: &'static str,
}

/// Density of `(mu + sigma Z)^2` at `w > 0`.
pub fn nonnull_logp_density(w: f64, mu: f64, sigma: f64) -> Result<f64> {
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::domain(format!("density at w = {w}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) || !mu.is_finite() {
        return Err(Error::domain(format!("density parameters mu = {mu}, sigma = {sigma}")));
    }
    let s = w.sqrt();
    Ok((std_normal_pdf((s - mu) / sigma) + std_normal_pdf((s + mu) / sigma)) / (2.0 * sigma * s))
}

/// `(h2, quadrature error)` for one coordinate of the calibrated model.
pub fn hellinger2_coordinate(cal: &Calibration) -> Result<(f64, f64)> {
    hellinger2_mixture(cal.eps(), cal.mu(), cal.sigma())
}

/// `(h2, quadrature error)` between `chi2_2` and the `eps`-mixture with
/// `(mu + sigma Z)^2`.
///
/// Integrated in `t = sqrt(w)`, where both densities are smooth, using
/// `sqrt f1 - sqrt f0 = eps (g - f0) / (sqrt f1 + sqrt f0)` so that no
/// cancellation occurs for tiny `eps`.
pub fn hellinger2_mixture(eps: f64, mu: f64, sigma: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::domain(format!("mixture weight {eps}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) || !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::domain(format!("mu = {mu}, sigma = {sigma}")));
    }
    if eps == 0.0 {
        return Ok((0.0, 0.0));
    }
    // Densities of t = sqrt(W), i.e. times the Jacobian 2t.
    let integrand = |t: f64| {
        let f0 = t * (-0.5 * t * t).exp();
        let g = (std_normal_pdf((t - mu) / sigma) + std_normal_pdf((t + mu) / sigma)) / sigma;
        let f1 = (1.0 - eps) * f0 + eps * g;
        let denom = f1.sqrt() + f0.sqrt();
        if denom == 0.0 {
            0.0
        } else {
            let d = (g - f0) / denom;
            d * d
        }
    };
    let t_max = 40.0f64.max(mu + 40.0 * sigma);
    let breaks = panel_breaks(eps, mu, sigma, t_max);
    let integral = integrate(integrand, &breaks, 1e-300, QUAD_REL_TOL, QUAD_MAX_PANELS)
        .map_err(|e| match e {
            Error::Quadrature { estimate, error } => Error::Quadrature {
                estimate: 0.5 * eps * eps * estimate,
                error: 0.5 * eps * eps * error,
            },
            other => other,
        })?;
    let scale = 0.5 * eps * eps;
    Ok(((scale * integral.value).clamp(0.0, 1.0), scale * integral.error))
}

// Split at t = mu; geometric panels toward 0 (down to the eps scale, where the
// integrand turns over) and toward the far tail.
fn panel_breaks(eps: f64, mu: f64, sigma: f64, t_max: f64) -> Vec<f64> {
    let mut breaks = vec![0.0, t_max];
    let depth = (-eps.log10()).ceil().max(0.0) as i32 + 3;
    for k in 0..=depth {
        breaks.push(10f64.powi(-k));
        if mu > 0.0 {
            breaks.push(mu * 10f64.powi(-k));
        }
    }
    let mut step = 0.5;
    while step < t_max {
        breaks.push(step);
        breaks.push(mu + step * sigma);
        step *= 2.0;
    }
    breaks.retain(|&t| (0.0..=t_max).contains(&t));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs().max(1e-300));
    breaks
}

/// Lifts a per-coordinate distance to `n` coordinates.
pub fn report_from_coordinate(h2_coord: f64, n: usize, quadrature_error: f64) -> Result<HellingerReport> {
    if !(0.0..=1.0).contains(&h2_coord) {
        return Err(Error::domain(format!("h2 = {h2_coord} outside [0, 1]")));
    }
    // 1 - (1 - h2)^n without cancellation for tiny h2.
    let h2_total = if h2_coord == 1.0 {
        1.0
    } else {
        -((n as f64) * (-h2_coord).ln_1p()).exp_m1()
    };
    let tv_upper = (std::f64::consts::SQRT_2 * h2_total.sqrt()).min(1.0);
    Ok(HellingerReport {
        n,
        h2_coord,
        h2_total,
        tv_upper,
        risk_lower: (1.0 - tv_upper).max(0.0),
        quadrature_error,
        coordinate_law: "direct",
    })
}

/// Lower bound on `Pr_H0(reject) + Pr_H1(accept)` valid for every test.
pub fn indistinguishability_bound(cal: &Calibration) -> Result<HellingerReport> {
    let (h2, err) = hellinger2_coordinate(cal)?;
    report_from_coordinate(h2, cal.n(), err)
}
