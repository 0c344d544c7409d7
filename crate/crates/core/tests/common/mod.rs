//! Independent numerical oracles shared by the integration tests. None of
//! these call into the library's special functions.

#![allow(dead_code)]

/// Adaptive Simpson quadrature with a relative tolerance on the whole
/// interval.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // Seed the tolerance with a coarse estimate of the magnitude.
    let coarse: f64 = (0..=64)
        .map(|k| f(a + (b - a) * k as f64 / 64.0).abs())
        .sum::<f64>()
        * (b - a)
        / 65.0;
    let tol = rel_tol * coarse.max(whole.abs()).max(f64::MIN_POSITIVE);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 60)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// `Pr(Z > x)` by integrating the normal density.
pub fn normal_sf_oracle(x: f64) -> f64 {
    let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if x >= 0.0 {
        simpson(&phi, x, x + 40.0, 1e-14)
    } else {
        1.0 - simpson(&phi, -x, -x + 40.0, 1e-14)
    }
}

/// Regularized incomplete beta by quadrature of the unnormalized density.
///
/// For a shape below one the substitution `t = s^(1/a)` turns `t^(a-1) dt`
/// into `ds / a` (and symmetrically near 1), removing the endpoint
/// singularity. The normalizing constant is integrated the same way.
pub fn inc_beta_oracle(x: f64, a: f64, b: f64) -> f64 {
    // Integral over [0, upto] of the density with shapes (p, q).
    let from_zero = |upto: f64, p: f64, q: f64| {
        if p < 1.0 {
            let g = |s: f64| (1.0 - s.powf(1.0 / p)).powf(q - 1.0);
            simpson(&g, 0.0, upto.powf(p), 1e-13) / p
        } else {
            let g = |t: f64| t.powf(p - 1.0) * (1.0 - t).powf(q - 1.0);
            simpson(&g, 0.0, upto, 1e-13)
        }
    };
    let lower = |upto: f64| from_zero(upto, a, b);
    let upper = |from: f64| from_zero(1.0 - from, b, a);
    let total = lower(0.5) + upper(0.5);
    if x <= 0.5 {
        lower(x) / total
    } else {
        1.0 - upper(x) / total
    }
}

/// `Pr(Pois(lambda) <= k)` by summing the mass function.
pub fn poisson_cdf_oracle(k: u64, lambda: f64) -> f64 {
    let mut term = (-lambda).exp();
    let mut sum = term;
    for j in 1..=k {
        term *= lambda / j as f64;
        sum += term;
    }
    sum.min(1.0)
}

/// Kolmogorov-Smirnov distance between the sample and `cdf`.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// One-sided `sup (F_n(u) - u)` against the uniform law.
pub fn ks_excess_over_uniform(sample: &[f64]) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| (i + 1) as f64 / n - x)
        .fold(0.0, f64::max)
}

/// Asymptotic Kolmogorov P-value with Stephens' finite-sample correction.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..200 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

pub fn passes_ks_uniform(sample: &[f64], level: f64) -> bool {
    ks_pvalue(ks_distance(sample, |u| u.clamp(0.0, 1.0)), sample.len()) >= level
}

/// Brute-force Higher Criticism: ranks by counting, no sorting.
pub fn naive_hc(p: &[f64], gamma0: f64) -> f64 {
    let n = p.len();
    let cap = ((n as f64 * gamma0).ceil() as usize).clamp(1, n);
    let mut best = f64::NEG_INFINITY;
    for (j, &pj) in p.iter().enumerate() {
        // Rank with ties broken by position.
        let rank = 1 + p
            .iter()
            .enumerate()
            .filter(|&(k, &pk)| pk < pj || (pk == pj && k < j))
            .count();
        if rank > cap || pj <= 0.0 || pj >= 1.0 {
            continue;
        }
        let nf = n as f64;
        let term = nf.sqrt() * (rank as f64 / nf - pj) / (pj * (1.0 - pj)).sqrt();
        best = best.max(term);
    }
    best
}

/// Small deterministic generator for test inputs (xorshift64*).
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1)
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform on `(0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }
}
