//! Data-generating models and their P-value transforms.
//!
//! Under the alternative each feature departs independently with probability
//! `eps_n = n^{-beta}`; a departing feature carries a signal of size
//! `mu_n = sqrt(2 r log n)` and scale `sigma`. Every feature owns a
//! counter-based random stream keyed by `(seed, rep, feature)`; its first draw
//! always decides the departure (under both hypotheses) so null and
//! alternative samples share their non-departing features.

use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive, CounterRng};
use crate::special_fn::{
    binomial_two_sided_pvalue, normal_sf, poisson_pmf, poisson_sf, std_normal_sf, Probability,
};

/// Poisson means below this are rejected when sampling.
pub const MIN_POISSON_MEAN: f64 = 1.0;

const NUISANCE_STREAM: u64 = 0x6e75_6973_616e_6365;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    n: usize,
    beta: f64,
    r: f64,
    sigma: f64,
}

impl Calibration {
    pub fn new(n: usize, beta: f64, r: f64, sigma: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("n", "need at least one feature"));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::config("beta", format!("{beta} is outside (0, 1)")));
        }
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::config("r", format!("{r} must be finite and nonnegative")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::config("sigma", format!("{sigma} must be positive")));
        }
        Ok(Calibration { n, beta, r, sigma })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Departure probability `n^{-beta}`.
    pub fn eps(&self) -> f64 {
        (self.n as f64).powf(-self.beta)
    }

    /// Signal size `sqrt(2 r log n)`.
    pub fn mu(&self) -> f64 {
        (2.0 * self.r * (self.n as f64).ln()).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TwoSampleMethod {
    /// `2 * Pr(Z > |sqrt(2y) - sqrt(2x)|)`.
    #[serde(rename = "vst")]
    VarianceStabilized,
    /// Exact conditional binomial test of `y` given `x + y`.
    #[serde(rename = "exact")]
    BinomialExact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum ModelSpec {
    /// `-2 log p` drawn directly: `chi2_2` under the null, `(mu + sigma Z)^2`
    /// for a departure.
    #[serde(rename = "direct")]
    DirectLogChisq,
    /// One-sided z-test of `X ~ N(0, 1)` against a shift to `N(mu, sigma^2)`.
    #[serde(rename = "one-sample-normal")]
    OneSampleNormal,
    /// `X ~ N(nu_i, 1)` against `Y ~ N(nu_i, 1)` or, departing,
    /// `N(nu_i + mu, sigma^2)`.
    #[serde(rename = "two-sample-normal")]
    TwoSampleNormal { nu: Vec<f64> },
    /// Counts with known means; departures use `lambda + mu sqrt(lambda)`.
    #[serde(rename = "one-sample-poisson")]
    OneSamplePoisson { lambda: Vec<f64> },
    /// Pairs of counts with common unknown means; departures perturb `Y`.
    #[serde(rename = "two-sample-poisson")]
    TwoSamplePoisson {
        lambda: Vec<f64>,
        method: TwoSampleMethod,
    },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::DirectLogChisq => "direct",
            ModelSpec::OneSampleNormal => "one-sample-normal",
            ModelSpec::TwoSampleNormal { .. } => "two-sample-normal",
            ModelSpec::OneSamplePoisson { .. } => "one-sample-poisson",
            ModelSpec::TwoSamplePoisson { .. } => "two-sample-poisson",
        }
    }

    pub fn is_two_sample(&self) -> bool {
        matches!(
            self,
            ModelSpec::TwoSampleNormal { .. } | ModelSpec::TwoSamplePoisson { .. }
        )
    }

    /// Checks nuisance vectors against the number of features.
    pub fn validate(&self, n: usize) -> Result<()> {
        let check_len = |field: &str, v: &[f64]| {
            if v.len() != n {
                Err(Error::config(field, format!("has {} entries, expected n = {n}", v.len())))
            } else {
                Ok(())
            }
        };
        match self {
            ModelSpec::DirectLogChisq | ModelSpec::OneSampleNormal => Ok(()),
            ModelSpec::TwoSampleNormal { nu } => {
                check_len("model.nu", nu)?;
                if nu.iter().any(|v| !v.is_finite()) {
                    return Err(Error::config("model.nu", "entries must be finite"));
                }
                Ok(())
            }
            ModelSpec::OneSamplePoisson { lambda } | ModelSpec::TwoSamplePoisson { lambda, .. } => {
                check_len("model.lambda", lambda)?;
                if lambda
                    .iter()
                    .any(|&l| !(l.is_finite() && l >= MIN_POISSON_MEAN))
                {
                    return Err(Error::config(
                        "model.lambda",
                        format!("entries must be finite and at least {MIN_POISSON_MEAN}"),
                    ));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hypothesis {
    Null,
    Alternative,
}

/// P-values in `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PValueVector(Vec<f64>);

impl PValueVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::domain(format!("{bad} is not a P-value in (0, 1]")));
        }
        Ok(PValueVector(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for PValueVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// A sample together with the number of features that departed.
#[derive(Debug, Clone)]
pub struct Sample {
    pub pvalues: PValueVector,
    pub departures: usize,
}

pub fn sample_pvalues(
    spec: &ModelSpec,
    cal: &Calibration,
    hyp: Hypothesis,
    seed: u64,
    rep_index: u64,
) -> Result<PValueVector> {
    sample_detailed(spec, cal, hyp, seed, rep_index).map(|s| s.pvalues)
}

pub fn sample_detailed(
    spec: &ModelSpec,
    cal: &Calibration,
    hyp: Hypothesis,
    seed: u64,
    rep_index: u64,
) -> Result<Sample> {
    spec.validate(cal.n())?;
    let eps = cal.eps();
    let mu = cal.mu();
    let sigma = cal.sigma();
    let alternative = hyp == Hypothesis::Alternative;

    let mut values = Vec::with_capacity(cal.n());
    let mut departures = 0;
    for i in 0..cal.n() {
        let mut rng = CounterRng::for_feature(seed, rep_index, i as u64);
        let departs = rng.uniform() < eps && alternative;
        departures += departs as usize;
        let p = match spec {
            ModelSpec::DirectLogChisq => {
                if departs {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let w = (mu + sigma * z).powi(2);
                    (-0.5 * w).exp()
                } else {
                    rng.uniform_open0()
                }
            }
            ModelSpec::OneSampleNormal => {
                let z: f64 = StandardNormal.sample(&mut rng);
                let x = if departs { mu + sigma * z } else { z };
                normal_sf(x)
            }
            ModelSpec::TwoSampleNormal { nu } => {
                let zx: f64 = StandardNormal.sample(&mut rng);
                let zy: f64 = StandardNormal.sample(&mut rng);
                let x = nu[i] + zx;
                let y = if departs { nu[i] + mu + sigma * zy } else { nu[i] + zy };
                two_sample_normal(x, y)
            }
            ModelSpec::OneSamplePoisson { lambda } => {
                let base = lambda[i];
                let mean = if departs { perturbed_mean(base, mu) } else { base };
                let x = draw_poisson(mean, &mut rng)?;
                let u = rng.uniform();
                randomized_poisson(x, base, u)?
            }
            ModelSpec::TwoSamplePoisson { lambda, method } => {
                let base = lambda[i];
                let x = draw_poisson(base, &mut rng)?;
                let mean_y = if departs { perturbed_mean(base, mu) } else { base };
                let y = draw_poisson(mean_y, &mut rng)?;
                two_sample_poisson(x, y, *method)
            }
        };
        values.push(finish_pvalue(p)?);
    }
    Ok(Sample {
        pvalues: PValueVector(values),
        departures,
    })
}

// Underflow is floored at the smallest normal double so every P-value stays in (0, 1].
fn finish_pvalue(p: f64) -> Result<f64> {
    if p.is_nan() {
        return Err(Error::numerical("P-value evaluated to NaN"));
    }
    Ok(p.clamp(f64::MIN_POSITIVE, 1.0))
}

/// `lambda + mu sqrt(lambda)`.
pub fn perturbed_mean(lambda: f64, mu: f64) -> f64 {
    lambda + mu * lambda.sqrt()
}

fn draw_poisson(mean: f64, rng: &mut CounterRng) -> Result<u64> {
    let dist = Poisson::new(mean)
        .map_err(|e| Error::numerical(format!("Poisson({mean}) sampler: {e}")))?;
    let x: f64 = dist.sample(rng);
    Ok(x as u64)
}

pub fn pvalue_one_sample_normal(x: f64) -> Result<Probability> {
    std_normal_sf(x)
}

/// Two-sided z-test of `Y - X ~ N(0, 2)`; exactly uniform under the null.
pub fn pvalue_two_sample_normal(x: f64, y: f64) -> Result<Probability> {
    if !(x.is_finite() && y.is_finite()) {
        return Err(Error::domain(format!("two-sample z-test at ({x}, {y})")));
    }
    Ok(Probability::clamped(two_sample_normal(x, y)))
}

fn two_sample_normal(x: f64, y: f64) -> f64 {
    (2.0 * normal_sf((y - x).abs() / std::f64::consts::SQRT_2)).min(1.0)
}

/// Randomized upper-tail Poisson P-value `Pr(Pois > x) + u Pr(Pois = x)`.
pub fn pvalue_poisson_randomized(x: u64, lambda: f64, u: f64) -> Result<Probability> {
    if !(0.0..1.0).contains(&u) {
        return Err(Error::domain(format!("randomization variate {u} outside [0, 1)")));
    }
    Ok(Probability::clamped(randomized_poisson(x, lambda, u)?))
}

fn randomized_poisson(x: u64, lambda: f64, u: f64) -> Result<f64> {
    let sf = poisson_sf(x, lambda)?.value();
    let pmf = poisson_pmf(x, lambda)?;
    Ok((sf + u * pmf).min(1.0))
}

pub fn pvalue_two_sample_poisson(x: u64, y: u64, method: TwoSampleMethod) -> Probability {
    Probability::clamped(two_sample_poisson(x, y, method))
}

fn two_sample_poisson(x: u64, y: u64, method: TwoSampleMethod) -> f64 {
    match method {
        TwoSampleMethod::VarianceStabilized => {
            let d = ((2 * y) as f64).sqrt() - ((2 * x) as f64).sqrt();
            (2.0 * normal_sf(d.abs())).min(1.0)
        }
        TwoSampleMethod::BinomialExact => binomial_two_sided_pvalue(x, y).value(),
    }
}

/// Poisson means drawn log-uniformly from `[lambda_min, lambda_max]`.
/// `lambda_min` must be at least `10 log n` so that counts are large relative
/// to `log n`.
pub fn log_uniform_lambdas(n: usize, lambda_min: f64, lambda_max: f64, seed: u64) -> Result<Vec<f64>> {
    let floor = 10.0 * (n.max(2) as f64).ln();
    if !(lambda_min.is_finite() && lambda_min >= floor) {
        return Err(Error::config(
            "model.lambda_range",
            format!("lower end {lambda_min} is below 10 log n = {floor:.3}"),
        ));
    }
    if !(lambda_max.is_finite() && lambda_max >= lambda_min) {
        return Err(Error::config(
            "model.lambda_range",
            format!("upper end {lambda_max} is below the lower end {lambda_min}"),
        ));
    }
    let key = derive(seed, NUISANCE_STREAM);
    let (lo, hi) = (lambda_min.ln(), lambda_max.ln());
    Ok((0..n)
        .map(|i| {
            let u = CounterRng::for_feature(key, 0, i as u64).uniform();
            (lo + u * (hi - lo)).exp()
        })
        .collect())
}
