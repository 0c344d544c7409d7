//! Detection boundaries in the `(beta, r)` plane.
//!
//! `rho` separates the region where every test is asymptotically powerless
//! from the region where Higher Criticism and Berk-Jones succeed; `rho_bonf`
//! is the boundary attained by min-P and FDR-style tests; `rho_two_sample`
//! is the optimal boundary for the two-sample normal and Poisson models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-width of the band in which [`classify`] reports [`Region::Boundary`].
pub const CLASSIFY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveKind {
    #[serde(rename = "one-sample")]
    OneSampleOptimal,
    Bonferroni,
    #[serde(rename = "two-sample")]
    TwoSampleOptimal,
}

impl CurveKind {
    pub fn eval(self, beta: f64, sigma: f64) -> Result<f64> {
        match self {
            CurveKind::OneSampleOptimal => rho(beta, sigma),
            CurveKind::Bonferroni => rho_bonf(beta, sigma),
            CurveKind::TwoSampleOptimal => rho_two_sample(beta, sigma),
        }
    }

    /// Like [`CurveKind::eval`] but also accepts the endpoints `beta = 1/2`
    /// and `beta = 1`, where every branch formula extends continuously.
    pub fn eval_closed(self, beta: f64, sigma: f64) -> Result<f64> {
        if !(0.5..=1.0).contains(&beta) {
            return Err(Error::domain(format!("beta = {beta} outside [1/2, 1]")));
        }
        check_sigma(sigma)?;
        Ok(match self {
            CurveKind::OneSampleOptimal => rho_unchecked(beta, sigma),
            CurveKind::Bonferroni => rho_bonf_unchecked(beta, sigma),
            CurveKind::TwoSampleOptimal => two_sample_unchecked(beta, sigma),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            CurveKind::OneSampleOptimal => "one-sample",
            CurveKind::Bonferroni => "bonferroni",
            CurveKind::TwoSampleOptimal => "two-sample",
        }
    }
}

impl std::str::FromStr for CurveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-sample" => Ok(CurveKind::OneSampleOptimal),
            "bonferroni" => Ok(CurveKind::Bonferroni),
            "two-sample" => Ok(CurveKind::TwoSampleOptimal),
            other => Err(Error::config("kind", format!("unknown curve `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub beta: f64,
    pub r: f64,
    pub sigma: f64,
}

impl PhasePoint {
    pub fn new(beta: f64, r: f64, sigma: f64) -> Result<Self> {
        check_beta(beta)?;
        check_sigma(sigma)?;
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::domain(format!("r = {r} must be nonnegative")));
        }
        Ok(PhasePoint { beta, r, sigma })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Undetectable,
    Detectable,
    Boundary,
}

impl Region {
    pub fn name(self) -> &'static str {
        match self {
            Region::Undetectable => "undetectable",
            Region::Detectable => "detectable",
            Region::Boundary => "boundary",
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.5 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("beta = {beta} outside (1/2, 1)")))
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("sigma = {sigma} must be positive")))
    }
}

fn square_branch(beta: f64, sigma: f64) -> f64 {
    let t = 1.0 - sigma * (1.0 - beta).sqrt();
    t * t
}

fn rho_unchecked(beta: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    if s2 < 2.0 {
        if beta < 1.0 - s2 / 4.0 {
            (2.0 - s2) * (beta - 0.5)
        } else {
            square_branch(beta, sigma)
        }
    } else if beta < 1.0 - 1.0 / s2 {
        0.0
    } else {
        square_branch(beta, sigma)
    }
}

fn rho_bonf_unchecked(beta: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    if s2 > 2.0 && beta < 1.0 - 1.0 / s2 {
        0.0
    } else {
        square_branch(beta, sigma)
    }
}

fn two_sample_unchecked(beta: f64, sigma: f64) -> f64 {
    2.0 * rho_unchecked(beta, two_sample_sigma(sigma))
}

/// Effective scale of `-2 log p` in the two-sample normal model.
pub fn two_sample_sigma(sigma: f64) -> f64 {
    ((1.0 + sigma * sigma) / 2.0).sqrt()
}

/// Optimal one-sample detection boundary.
pub fn rho(beta: f64, sigma: f64) -> Result<f64> {
    check_beta(beta)?;
    check_sigma(sigma)?;
    Ok(rho_unchecked(beta, sigma))
}

/// Boundary of the minimal-P-value (Bonferroni) and FDR tests. At
/// `sigma^2 = 2` the squared branch is used, which is the continuous choice.
pub fn rho_bonf(beta: f64, sigma: f64) -> Result<f64> {
    check_beta(beta)?;
    check_sigma(sigma)?;
    Ok(rho_bonf_unchecked(beta, sigma))
}

/// Two-sample boundary: `2 * rho(beta, sqrt((1 + sigma^2) / 2))`. The mean
/// enters as `mu / sqrt(2)` (hence the factor 2 on `r`) and `-2 log p` is
/// scaled by the pooled standard deviation.
pub fn rho_two_sample(beta: f64, sigma: f64) -> Result<f64> {
    check_beta(beta)?;
    check_sigma(sigma)?;
    Ok(two_sample_unchecked(beta, sigma))
}

/// Moderate-deviation exponent `((sqrt(q) - sqrt(r)) / sigma)^2`: for `q > r`,
/// `Pr(p_i <= n^{-q})` under a departure decays like `n^{-alpha}`.
pub fn alpha_exponent(q: f64, r: f64, sigma: f64) -> Result<f64> {
    if !(q >= 0.0 && q.is_finite()) || !(r >= 0.0 && r.is_finite()) {
        return Err(Error::domain(format!("exponent needs q, r >= 0 (got {q}, {r})")));
    }
    check_sigma(sigma)?;
    let t = (q.sqrt() - r.sqrt()) / sigma;
    Ok(t * t)
}

pub fn classify(point: PhasePoint, curve: CurveKind) -> Result<Region> {
    let boundary = curve.eval(point.beta, point.sigma)?;
    Ok(region_of(point.r, boundary))
}

pub(crate) fn region_of(r: f64, boundary: f64) -> Region {
    if r < boundary - CLASSIFY_TOL {
        Region::Undetectable
    } else if r > boundary + CLASSIFY_TOL {
        Region::Detectable
    } else {
        Region::Boundary
    }
}
