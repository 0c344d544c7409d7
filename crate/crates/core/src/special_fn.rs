//! Distribution kernels: normal tail, regularized incomplete beta and gamma,
//! Poisson tails and the exact two-sided binomial test.
//!
//! Every routine returns the *small* tail directly rather than as `1 - x`, so
//! P-values deep in the tail keep full relative precision.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::Serialize;

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;

/// Beyond this point the normal tail is evaluated as `phi(x) * Mills(x)`.
const FAR_TAIL: f64 = 8.0;

/// A number in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(Error::domain(format!("{value} is not a probability")))
        }
    }

    /// Clamps rounding spill-over into `[0, 1]`.
    pub(crate) fn clamped(value: f64) -> Self {
        Probability(value.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn complement(self) -> Self {
        Probability(1.0 - self.0)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() * FRAC_1_SQRT_2PI
}

/// `Pr(Z > x)` for a standard normal `Z`.
pub fn std_normal_sf(x: f64) -> Result<Probability> {
    if !x.is_finite() {
        return Err(Error::domain(format!("normal tail at non-finite point {x}")));
    }
    Ok(Probability(normal_sf(x)))
}

pub(crate) fn normal_sf(x: f64) -> f64 {
    if x > FAR_TAIL {
        mills_tail(x)
    } else if x < -FAR_TAIL {
        1.0 - mills_tail(-x)
    } else {
        0.5 * libm::erfc(x * FRAC_1_SQRT_2)
    }
}

// phi(x) / (x + 1/(x + 2/(x + 3/(x + ...)))), modified Lentz.
fn mills_tail(x: f64) -> f64 {
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..=1000 {
        let a = k as f64;
        d = x + a * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        d = 1.0 / d;
        c = x + a / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    std_normal_pdf(x) / f
}

/// `Pr(Beta(a, b) <= x)`.
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<Probability> {
    check_beta_args(x, a, b)?;
    let (lower, _) = inc_beta_tails(x, a, b)?;
    Ok(Probability::clamped(lower))
}

fn check_beta_args(x: f64, a: f64, b: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("incomplete beta at x = {x}")));
    }
    if !(a > 0.0 && a.is_finite() && b > 0.0 && b.is_finite()) {
        return Err(Error::domain(format!("incomplete beta shapes ({a}, {b})")));
    }
    Ok(())
}

/// Lower and upper tails `(I_x(a,b), 1 - I_x(a,b))`, the smaller of the two
/// computed directly by continued fraction.
pub(crate) fn inc_beta_tails(x: f64, a: f64, b: f64) -> Result<(f64, f64)> {
    if x <= 0.0 {
        return Ok((0.0, 1.0));
    }
    if x >= 1.0 {
        return Ok((1.0, 0.0));
    }
    let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        let lower = ln_front.exp() * beta_cf(a, b, x)? / a;
        Ok((lower, 1.0 - lower))
    } else {
        let upper = ln_front.exp() * beta_cf(b, a, 1.0 - x)? / b;
        Ok((1.0 - upper, upper))
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    let max_iter = 1000 + (20.0 * qab.sqrt()) as usize;
    for m in 1..=max_iter {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(Error::numerical(format!(
        "incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})"
    )))
}

// Stirling remainder: ln Gamma(x) - [(x - 1/2) ln x - x + ln(2 pi)/2], x >= 10.
fn stirling_corr(x: f64) -> f64 {
    let x2 = x * x;
    (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - (1.0 / 1680.0 - 1.0 / (1188.0 * x2)) / x2) / x2) / x2)
        / x
}

/// `ln B(a, b)`, written to avoid the cancellation of `ln Gamma` terms for
/// large shapes.
pub(crate) fn ln_beta(a: f64, b: f64) -> f64 {
    let (small, large) = if a < b { (a, b) } else { (b, a) };
    if large < 10.0 {
        return libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b);
    }
    let sum = small + large;
    let corr = stirling_corr(large) - stirling_corr(sum);
    if small < 10.0 {
        // ln Gamma(large) - ln Gamma(sum)
        let tail =
            -(large - 0.5) * (small / large).ln_1p() - small * sum.ln() + small + corr;
        libm::lgamma(small) + tail
    } else {
        -small * (large / small).ln_1p() - 0.5 * small.ln() + HALF_LN_2PI
            - (large - 0.5) * (small / large).ln_1p()
            + stirling_corr(small)
            + corr
    }
}

// ln(1 + t) - t without cancellation near zero.
fn log1pmx(t: f64) -> f64 {
    if t.abs() > 0.1 {
        return t.ln_1p() - t;
    }
    let mut term = t;
    let mut sum = 0.0;
    for k in 2..60 {
        term *= -t;
        let add = term / k as f64;
        sum += add;
        if add.abs() < EPS * sum.abs() {
            break;
        }
    }
    sum
}

// ln(x^a e^{-x} / Gamma(a)).
fn ln_gamma_front(a: f64, x: f64) -> f64 {
    if a < 10.0 {
        a * x.ln() - x - libm::lgamma(a)
    } else {
        a * log1pmx((x - a) / a) + 0.5 * a.ln() - HALF_LN_2PI - stirling_corr(a)
    }
}

/// Regularized incomplete gamma `(P(a, x), Q(a, x))`, smaller tail computed
/// directly.
pub(crate) fn inc_gamma_tails(a: f64, x: f64) -> Result<(f64, f64)> {
    if x <= 0.0 {
        return Ok((0.0, 1.0));
    }
    let front = ln_gamma_front(a, x).exp();
    let max_iter = 1000 + (20.0 * a.max(x).sqrt()) as usize;
    if x < a + 1.0 {
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..max_iter {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * EPS {
                let p = sum * front;
                return Ok((p, 1.0 - p));
            }
        }
    } else {
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / FPMIN;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=max_iter {
            let i = i as f64;
            let an = -i * (i - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < FPMIN {
                d = FPMIN;
            }
            c = b + an / c;
            if c.abs() < FPMIN {
                c = FPMIN;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                let q = front * h;
                return Ok((1.0 - q, q));
            }
        }
    }
    Err(Error::numerical(format!(
        "incomplete gamma did not converge (a={a}, x={x})"
    )))
}

fn check_poisson_mean(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("Poisson mean {lambda}")))
    }
}

/// `Pr(Pois(lambda) <= k)`, via `Q(k + 1, lambda)`.
pub fn poisson_cdf(k: u64, lambda: f64) -> Result<Probability> {
    check_poisson_mean(lambda)?;
    let (_, q) = inc_gamma_tails(k as f64 + 1.0, lambda)?;
    Ok(Probability::clamped(q))
}

/// `Pr(Pois(lambda) > k)`, via `P(k + 1, lambda)`.
pub fn poisson_sf(k: u64, lambda: f64) -> Result<Probability> {
    check_poisson_mean(lambda)?;
    let (p, _) = inc_gamma_tails(k as f64 + 1.0, lambda)?;
    Ok(Probability::clamped(p))
}

pub fn poisson_pmf(k: u64, lambda: f64) -> Result<f64> {
    check_poisson_mean(lambda)?;
    if k == 0 {
        return Ok((-lambda).exp());
    }
    let k = k as f64;
    Ok((ln_gamma_front(k, lambda) - k.ln()).exp())
}

/// `ln Pr(Bin(n, x) = k)` for `0 < x < 1`.
pub(crate) fn binomial_ln_pmf(k: u64, n: u64, x: f64) -> f64 {
    let (kf, nf) = (k as f64, n as f64);
    -(nf + 1.0).ln() - ln_beta(kf + 1.0, nf - kf + 1.0) + kf * x.ln() + (nf - kf) * (-x).ln_1p()
}

/// Exact two-sided binomial test of an even split:
/// `Pr(|Bin(N, 1/2) - N/2| >= |x - y| / 2)` with `N = x + y`.
///
/// The event is closed, so the observed table always counts. Returns 1 when
/// `x == y` (including `N = 0`).
pub fn binomial_two_sided_pvalue(x: u64, y: u64) -> Probability {
    if x == y {
        return Probability(1.0);
    }
    let n = x + y;
    let m = x.min(y);
    let nf = n as f64;
    let ln_top = -(nf + 1.0).ln() - ln_beta(m as f64 + 1.0, (n - m) as f64 + 1.0)
        - nf * std::f64::consts::LN_2;
    // Sum Pr(Bin = j) for j = m, m-1, ..., 0 by the downward pmf ratio.
    let mut term = ln_top.exp();
    let mut tail = term;
    let mut j = m;
    while j > 0 {
        term *= j as f64 / (n - j + 1) as f64;
        tail += term;
        if term < tail * 1e-17 {
            break;
        }
        j -= 1;
    }
    Probability((2.0 * tail).clamp(f64::MIN_POSITIVE, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn normal_sf_examples() {
        assert_eq!(std_normal_sf(0.0).unwrap().value(), 0.5);
        let s = std_normal_sf(1.0).unwrap().value() + std_normal_sf(-1.0).unwrap().value();
        close(s, 1.0, 1e-15);
        close(std_normal_sf(1.6449).unwrap().value(), 0.05, 1e-4);
    }

    #[test]
    fn normal_sf_rejects_non_finite() {
        assert!(std_normal_sf(f64::NAN).is_err());
        assert!(std_normal_sf(f64::INFINITY).is_err());
    }

    #[test]
    fn normal_sf_far_tail_matches_across_branch() {
        // Branches agree at the switch point.
        let left = 0.5 * libm::erfc(FAR_TAIL * FRAC_1_SQRT_2);
        let right = mills_tail(FAR_TAIL);
        assert!(((left - right) / right).abs() < 1e-13);
        // Known value: Pr(Z > 10) = 7.619853024160527e-24.
        let v = normal_sf(10.0);
        assert!(((v - 7.619_853_024_160_527e-24) / v).abs() < 1e-12);
        // Still positive deep in the tail.
        assert!(normal_sf(37.0) > 0.0 && normal_sf(37.0) < 1e-290);
    }

    #[test]
    fn normal_sf_strictly_decreasing() {
        let mut prev = 1.0;
        for i in 0..400 {
            let x = -20.0 + 0.1 * i as f64;
            let v = normal_sf(x);
            assert!(v < prev || (x < -8.0 && v == prev), "x={x}");
            prev = v;
        }
    }

    #[test]
    fn reg_inc_beta_examples() {
        close(reg_inc_beta(0.3, 1.0, 1.0).unwrap().value(), 0.3, 1e-14);
        close(reg_inc_beta(0.5, 2.0, 2.0).unwrap().value(), 0.5, 1e-14);
        close(reg_inc_beta(0.2, 1.0, 2.0).unwrap().value(), 0.36, 1e-14);
        assert_eq!(reg_inc_beta(0.0, 3.0, 4.0).unwrap().value(), 0.0);
        assert_eq!(reg_inc_beta(1.0, 3.0, 4.0).unwrap().value(), 1.0);
    }

    #[test]
    fn reg_inc_beta_domain() {
        assert!(reg_inc_beta(-0.1, 1.0, 1.0).is_err());
        assert!(reg_inc_beta(1.1, 1.0, 1.0).is_err());
        assert!(reg_inc_beta(0.5, 0.0, 1.0).is_err());
        assert!(reg_inc_beta(0.5, 1.0, -2.0).is_err());
    }

    #[test]
    fn inc_beta_closed_forms_for_large_shapes() {
        // a = 1: I_x(1, b) = 1 - (1-x)^b; the upper tail is (1-x)^b itself.
        let (lo, up) = inc_beta_tails(1e-4, 1.0, 1e5).unwrap();
        let exact_up = (1e5 * (-1e-4f64).ln_1p()).exp();
        assert!(((up - exact_up) / exact_up).abs() < 1e-10);
        close(lo, 1.0 - exact_up, 1e-12);
        // b = 1: I_x(a, 1) = x^a.
        let (lo, _) = inc_beta_tails(0.99995, 1e5, 1.0).unwrap();
        let exact = (1e5 * 0.99995f64.ln()).exp();
        assert!(((lo - exact) / exact).abs() < 1e-10);
    }

    #[test]
    fn ln_beta_matches_lgamma_at_moderate_shapes() {
        for &(a, b) in &[(10.0, 10.0), (12.5, 40.0), (3.0, 25.0), (0.7, 11.0), (50.0, 49.0)] {
            let direct = libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b);
            close(ln_beta(a, b), direct, 1e-11);
        }
    }

    #[test]
    fn poisson_examples() {
        close(poisson_cdf(0, 1.0).unwrap().value(), (-1.0f64).exp(), 1e-15);
        close(poisson_cdf(2, 1.0).unwrap().value(), 2.5 * (-1.0f64).exp(), 1e-14);
        close(poisson_cdf(200, 1.0).unwrap().value(), 1.0, 1e-15);
        close(poisson_pmf(2, 1.0).unwrap(), 0.5 * (-1.0f64).exp(), 1e-15);
    }

    #[test]
    fn poisson_domain() {
        assert!(poisson_cdf(1, 0.0).is_err());
        assert!(poisson_cdf(1, -3.0).is_err());
        assert!(poisson_sf(1, f64::NAN).is_err());
    }

    #[test]
    fn poisson_large_mean_is_stable() {
        let lambda = 1e6;
        let at_mean = poisson_cdf(1_000_000, lambda).unwrap().value();
        // Median of Pois(lambda) sits just above lambda - 1/3; the cdf at lambda
        // is a bit over 1/2: 0.5 + 2/(3 sqrt(2 pi lambda)).
        close(at_mean, 0.5 + 2.0 / (3.0 * (2.0 * std::f64::consts::PI * lambda).sqrt()), 1e-6);
        let cdf = poisson_cdf(999_000, lambda).unwrap().value();
        let sf = poisson_sf(999_000, lambda).unwrap().value();
        close(cdf + sf, 1.0, 1e-12);
        // About 1 standard deviation below the mean.
        close(cdf, normal_sf(1.0), 2e-3);
    }

    #[test]
    fn binomial_pmf_examples() {
        close(binomial_ln_pmf(3, 10, 0.5).exp(), 120.0 / 1024.0, 1e-15);
        close(binomial_ln_pmf(0, 7, 0.2).exp(), 0.8f64.powi(7), 1e-15);
        close(binomial_ln_pmf(7, 7, 0.2).exp(), 0.2f64.powi(7), 1e-19);
    }

    #[test]
    fn binomial_examples() {
        assert_eq!(binomial_two_sided_pvalue(2, 2).value(), 1.0);
        assert_eq!(binomial_two_sided_pvalue(0, 0).value(), 1.0);
        close(binomial_two_sided_pvalue(3, 1).value(), 0.625, 1e-14);
        // Bin(10, 1/2): Pr(X <= 1) = 11/1024, doubled.
        close(binomial_two_sided_pvalue(1, 9).value(), 22.0 / 1024.0, 1e-15);
    }

    #[test]
    fn binomial_symmetric() {
        for x in 0..=30 {
            for y in 0..=30 {
                assert_eq!(
                    binomial_two_sided_pvalue(x, y).value(),
                    binomial_two_sided_pvalue(y, x).value()
                );
            }
        }
    }

    #[test]
    fn binomial_extreme_imbalance_stays_positive() {
        let p = binomial_two_sided_pvalue(0, 5000).value();
        assert!(p > 0.0 && p < 1e-300);
    }
}
