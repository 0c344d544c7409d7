//! Monte Carlo calibration, power estimation and phase-diagram scans.
//!
//! Replications run in parallel on the ambient rayon pool. Each replication
//! draws from streams keyed by `(batch seed, replication index, feature)` and
//! results are collected in replication order, so outputs do not depend on
//! the number of workers, and replication `k` is unchanged when more
//! replications are requested.

use rayon::prelude::*;
use serde::Serialize;

use crate::curves::{self, region_of, CurveKind, Region};
use crate::error::{Error, Result};
use crate::gof_tests::{evaluate, StatKind};
use crate::models::{sample_pvalues, Calibration, Hypothesis, ModelSpec};
use crate::rng::derive;

pub const MIN_REPS: usize = 100;

const CALIBRATION_BATCH: u64 = 1;
const ALTERNATIVE_BATCH: u64 = 2;
const TYPE1_BATCH: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub cal: Calibration,
    pub stat: StatKind,
    pub alpha: f64,
    pub reps_null: usize,
    pub reps_alt: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate(self.cal.n())?;
        self.stat.validate()?;
        check_alpha(self.alpha)?;
        check_reps("reps_null", self.reps_null)?;
        check_reps("reps_alt", self.reps_alt)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::config("alpha", format!("{alpha} is outside (0, 1)")))
    }
}

fn check_reps(field: &str, reps: usize) -> Result<()> {
    if reps >= MIN_REPS {
        Ok(())
    } else {
        Err(Error::config(field, format!("{reps} replications; at least {MIN_REPS} required")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerEstimate {
    pub stat: StatKind,
    /// Rejection threshold on the oriented scale.
    pub threshold: f64,
    pub type1_hat: f64,
    pub power_hat: f64,
    /// `type1_hat + (1 - power_hat)`.
    pub risk_hat: f64,
    /// Binomial standard error of `power_hat`.
    pub mc_se: f64,
    pub reps_null: usize,
    pub reps_alt: usize,
}

/// Type-7 (linear interpolation) quantile of sorted data.
pub fn quantile_type7(sorted: &[f64], prob: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    let a = sorted[lo];
    if frac == 0.0 || lo + 1 >= sorted.len() {
        return a;
    }
    let b = sorted[lo + 1];
    if a == b {
        a
    } else {
        a + frac * (b - a)
    }
}

/// Oriented statistics of `reps` replications, one vector per statistic.
fn batch(
    stats: &[StatKind],
    model: &ModelSpec,
    cal: &Calibration,
    hyp: Hypothesis,
    reps: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let per_rep: Vec<Vec<f64>> = (0..reps as u64)
        .into_par_iter()
        .map(|k| {
            let p = sample_pvalues(model, cal, hyp, seed, k)?;
            stats
                .iter()
                .map(|s| evaluate(s, &p).map(|t| t.oriented))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok((0..stats.len())
        .map(|j| per_rep.iter().map(|row| row[j]).collect())
        .collect())
}

/// Oriented statistic of `reps` null replications, in replication order.
pub fn null_statistics(
    stat: &StatKind,
    model: &ModelSpec,
    cal: &Calibration,
    reps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut out = batch(std::slice::from_ref(stat), model, cal, Hypothesis::Null, reps, seed)?;
    Ok(out.pop().expect("one statistic"))
}

fn threshold_of(mut values: Vec<f64>, alpha: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    quantile_type7(&values, 1.0 - alpha)
}

fn rate_above(values: &[f64], threshold: f64) -> f64 {
    values.iter().filter(|&&v| v > threshold).count() as f64 / values.len() as f64
}

/// Empirical `1 - alpha` quantile of the oriented statistic under the null.
pub fn calibrate_threshold(
    stat: &StatKind,
    model: &ModelSpec,
    cal: &Calibration,
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<f64> {
    check_alpha(alpha)?;
    check_reps("reps", reps)?;
    stat.validate()?;
    model.validate(cal.n())?;
    Ok(threshold_of(null_statistics(stat, model, cal, reps, seed)?, alpha))
}

/// Fraction of replications whose oriented statistic exceeds `threshold`.
pub fn rejection_rate(
    stat: &StatKind,
    model: &ModelSpec,
    cal: &Calibration,
    hyp: Hypothesis,
    threshold: f64,
    reps: usize,
    seed: u64,
) -> Result<f64> {
    if reps == 0 {
        return Err(Error::config("reps", "need at least one replication"));
    }
    let mut values = batch(std::slice::from_ref(stat), model, cal, hyp, reps, seed)?;
    Ok(rate_above(&values.pop().expect("one statistic"), threshold))
}

pub fn estimate_power(cfg: &ExperimentConfig) -> Result<PowerEstimate> {
    let mut out = estimate_power_many(cfg, std::slice::from_ref(&cfg.stat))?;
    Ok(out.pop().expect("one statistic"))
}

/// Power of several statistics evaluated on the same replications; each
/// entry equals what [`estimate_power`] reports for that statistic alone.
/// `cfg.stat` is ignored in favor of `stats`.
pub fn estimate_power_many(cfg: &ExperimentConfig, stats: &[StatKind]) -> Result<Vec<PowerEstimate>> {
    cfg.validate()?;
    for s in stats {
        s.validate()?;
    }
    let null_cal = batch(
        stats,
        &cfg.model,
        &cfg.cal,
        Hypothesis::Null,
        cfg.reps_null,
        derive(cfg.seed, CALIBRATION_BATCH),
    )?;
    let alt = batch(
        stats,
        &cfg.model,
        &cfg.cal,
        Hypothesis::Alternative,
        cfg.reps_alt,
        derive(cfg.seed, ALTERNATIVE_BATCH),
    )?;
    let null_check = batch(
        stats,
        &cfg.model,
        &cfg.cal,
        Hypothesis::Null,
        cfg.reps_null,
        derive(cfg.seed, TYPE1_BATCH),
    )?;
    Ok(stats
        .iter()
        .zip(null_cal)
        .zip(alt.iter().zip(&null_check))
        .map(|((stat, calib), (alt, check))| {
            let threshold = threshold_of(calib, cfg.alpha);
            let power_hat = rate_above(alt, threshold);
            let type1_hat = rate_above(check, threshold);
            PowerEstimate {
                stat: *stat,
                threshold,
                type1_hat,
                power_hat,
                risk_hat: type1_hat + (1.0 - power_hat),
                mc_se: (power_hat * (1.0 - power_hat) / cfg.reps_alt as f64).sqrt(),
                reps_null: cfg.reps_null,
                reps_alt: cfg.reps_alt,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRequest {
    pub model: ModelSpec,
    pub n: usize,
    pub sigma: f64,
    pub beta_grid: Vec<f64>,
    pub r_grid: Vec<f64>,
    pub stats: Vec<StatKind>,
    pub alpha: f64,
    pub reps_null: usize,
    pub reps_alt: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseRow {
    pub beta: f64,
    pub r: f64,
    pub sigma: f64,
    pub stat: StatKind,
    pub power: Option<f64>,
    pub risk: Option<f64>,
    pub type1: Option<f64>,
    pub threshold: Option<f64>,
    pub mc_se: Option<f64>,
    /// Optimal boundary for the model (one- or two-sample).
    pub rho_theory: Option<f64>,
    /// Bonferroni boundary, present when min-P or FDR rows are requested.
    pub rho_bonf: Option<f64>,
    /// Position of `r` relative to `rho_theory`.
    pub region: Option<Region>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseTable {
    pub rows: Vec<PhaseRow>,
    pub bonferroni_column: bool,
}

impl PhaseTable {
    pub fn theory_curve(model: &ModelSpec) -> CurveKind {
        if model.is_two_sample() {
            CurveKind::TwoSampleOptimal
        } else {
            CurveKind::OneSampleOptimal
        }
    }
}

/// One power estimate per `(beta, r, stat)` cell, rows ordered by beta, then
/// r, then the order of `stats`. Cell `c` (row-major over the grid) uses seed
/// `derive(seed, c)`; all statistics of a cell share replications. A failing
/// cell is recorded in its rows' `error` field and the scan continues.
pub fn phase_scan(req: &ScanRequest) -> Result<PhaseTable> {
    if req.beta_grid.is_empty() {
        return Err(Error::config("beta_grid", "grid is empty"));
    }
    if req.r_grid.is_empty() {
        return Err(Error::config("r_grid", "grid is empty"));
    }
    if req.stats.is_empty() {
        return Err(Error::config("stats", "no statistics requested"));
    }
    check_alpha(req.alpha)?;
    check_reps("reps_null", req.reps_null)?;
    check_reps("reps_alt", req.reps_alt)?;
    req.model.validate(req.n)?;

    let curve = PhaseTable::theory_curve(&req.model);
    let bonferroni_column = req.stats.iter().any(StatKind::is_bonferroni_type);
    let mut rows = Vec::with_capacity(req.beta_grid.len() * req.r_grid.len() * req.stats.len());
    for (bi, &beta) in req.beta_grid.iter().enumerate() {
        let rho_theory = curve.eval(beta, req.sigma).ok();
        let rho_bonf = if bonferroni_column && !req.model.is_two_sample() {
            curves::rho_bonf(beta, req.sigma).ok()
        } else {
            None
        };
        for (ri, &r) in req.r_grid.iter().enumerate() {
            let cell = (bi * req.r_grid.len() + ri) as u64;
            let outcome = Calibration::new(req.n, beta, r, req.sigma).and_then(|cal| {
                let cfg = ExperimentConfig {
                    model: req.model.clone(),
                    cal,
                    stat: req.stats[0],
                    alpha: req.alpha,
                    reps_null: req.reps_null,
                    reps_alt: req.reps_alt,
                    seed: derive(req.seed, cell),
                };
                estimate_power_many(&cfg, &req.stats)
            });
            for (si, stat) in req.stats.iter().enumerate() {
                let (est, error) = match &outcome {
                    Ok(v) => (Some(v[si]), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                rows.push(PhaseRow {
                    beta,
                    r,
                    sigma: req.sigma,
                    stat: *stat,
                    power: est.map(|e| e.power_hat),
                    risk: est.map(|e| e.risk_hat),
                    type1: est.map(|e| e.type1_hat),
                    threshold: est.map(|e| e.threshold),
                    mc_se: est.map(|e| e.mc_se),
                    rho_theory,
                    rho_bonf,
                    region: rho_theory.map(|rho| region_of(r, rho)),
                    error,
                });
            }
        }
    }
    Ok(PhaseTable {
        rows,
        bonferroni_column,
    })
}
