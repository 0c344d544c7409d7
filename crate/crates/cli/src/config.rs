//! JSON experiment documents.
//!
//! A document is parsed strictly (unknown keys are errors), normalized by
//! filling every default, and only then turned into engine types. The
//! normalized document is what gets echoed and digested in output metadata,
//! and parsing it again yields the same document.

use std::fmt;
use std::path::Path;

use rareweak_core::gof_tests::DEFAULT_GAMMA0;
use rareweak_core::models::log_uniform_lambdas;
use rareweak_core::{Calibration, ExperimentConfig, ModelSpec, ScanRequest, StatKind, TwoSampleMethod};
use serde::de::{self, IntoDeserializer, MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::grid::GridSpec;

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_REPS: usize = 2000;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Direct,
    OneSampleNormal,
    TwoSampleNormal,
    OneSamplePoisson,
    TwoSamplePoisson,
}

impl ModelKind {
    fn is_poisson(self) -> bool {
        matches!(self, ModelKind::OneSamplePoisson | ModelKind::TwoSamplePoisson)
    }
}

/// A nuisance parameter given once for all features or per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Nuisance {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Nuisance {
    fn expand(&self, n: usize, field: &str) -> Result<Vec<f64>> {
        match self {
            Nuisance::Scalar(v) => Ok(vec![*v; n]),
            Nuisance::Vector(v) if v.len() == n => Ok(v.clone()),
            Nuisance::Vector(v) => Err(CliError::Config(format!(
                "`{field}` has {} entries but n = {n}",
                v.len()
            ))),
        }
    }
}

/// Model section; a bare string such as `"direct"` is shorthand for
/// `{"kind": "direct"}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<Nuisance>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Nuisance>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_range: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<TwoSampleMethod>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFields {
    kind: ModelKind,
    nu: Option<Nuisance>,
    lambda: Option<Nuisance>,
    lambda_range: Option<[f64; 2]>,
    method: Option<TwoSampleMethod>,
}

impl ModelConfig {
    pub fn bare(kind: ModelKind) -> Self {
        ModelConfig {
            kind,
            nu: None,
            lambda: None,
            lambda_range: None,
            method: None,
        }
    }

    pub fn normalize(mut self, n: usize) -> Result<Self> {
        let unused = |field: &str| {
            CliError::Config(format!("`model.{field}` does not apply to {:?} models", self.kind))
        };
        if self.nu.is_some() && self.kind != ModelKind::TwoSampleNormal {
            return Err(unused("nu"));
        }
        if !self.kind.is_poisson() && (self.lambda.is_some() || self.lambda_range.is_some()) {
            return Err(unused(if self.lambda.is_some() { "lambda" } else { "lambda_range" }));
        }
        if self.method.is_some() && self.kind != ModelKind::TwoSamplePoisson {
            return Err(unused("method"));
        }
        match self.kind {
            ModelKind::TwoSampleNormal => {
                self.nu.get_or_insert(Nuisance::Scalar(0.0));
            }
            ModelKind::OneSamplePoisson | ModelKind::TwoSamplePoisson => {
                if self.lambda.is_some() && self.lambda_range.is_some() {
                    return Err(CliError::Config(
                        "give either `model.lambda` or `model.lambda_range`, not both".into(),
                    ));
                }
                if self.lambda.is_none() && self.lambda_range.is_none() {
                    let ln_n = (n.max(2) as f64).ln();
                    self.lambda_range = Some([10.0 * ln_n, 100.0 * ln_n]);
                }
                if self.kind == ModelKind::TwoSamplePoisson {
                    self.method.get_or_insert(TwoSampleMethod::VarianceStabilized);
                }
            }
            ModelKind::Direct | ModelKind::OneSampleNormal => {}
        }
        Ok(self)
    }

    /// Engine model for `n` features; random nuisance means are drawn from
    /// `seed`.
    pub fn to_spec(&self, n: usize, seed: u64) -> Result<ModelSpec> {
        let lambda = || -> Result<Vec<f64>> {
            match (&self.lambda, self.lambda_range) {
                (Some(l), _) => l.expand(n, "model.lambda"),
                (None, Some([lo, hi])) => Ok(log_uniform_lambdas(n, lo, hi, seed)?),
                (None, None) => Err(CliError::Config("missing `model.lambda`".into())),
            }
        };
        let spec = match self.kind {
            ModelKind::Direct => ModelSpec::DirectLogChisq,
            ModelKind::OneSampleNormal => ModelSpec::OneSampleNormal,
            ModelKind::TwoSampleNormal => ModelSpec::TwoSampleNormal {
                nu: self
                    .nu
                    .as_ref()
                    .unwrap_or(&Nuisance::Scalar(0.0))
                    .expand(n, "model.nu")?,
            },
            ModelKind::OneSamplePoisson => ModelSpec::OneSamplePoisson { lambda: lambda()? },
            ModelKind::TwoSamplePoisson => ModelSpec::TwoSamplePoisson {
                lambda: lambda()?,
                method: self.method.unwrap_or(TwoSampleMethod::VarianceStabilized),
            },
        };
        spec.validate(n)?;
        Ok(spec)
    }
}

impl<'de> Deserialize<'de> for ModelConfig {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct ModelVisitor;

        impl<'de> Visitor<'de> for ModelVisitor {
            type Value = ModelConfig;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a model name or a model object")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<ModelConfig, E> {
                ModelKind::deserialize(v.into_deserializer()).map(ModelConfig::bare)
            }

            fn visit_map<A: MapAccess<'de>>(self, map: A) -> std::result::Result<ModelConfig, A::Error> {
                let f = ModelFields::deserialize(de::value::MapAccessDeserializer::new(map))?;
                Ok(ModelConfig {
                    kind: f.kind,
                    nu: f.nu,
                    lambda: f.lambda,
                    lambda_range: f.lambda_range,
                    method: f.method,
                })
            }
        }

        deserializer.deserialize_any(ModelVisitor)
    }
}

fn parse_stat(name: &str, gamma0: Option<f64>) -> Result<StatKind> {
    let stat: StatKind = name.parse()?;
    match (stat, gamma0) {
        (StatKind::HigherCriticism { .. }, Some(g)) => Ok(StatKind::hc(g)?),
        (_, Some(_)) => Err(CliError::Config(format!("`gamma0` only applies to hc, not {name}"))),
        (stat, None) => Ok(stat),
    }
}

/// Document for `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentDoc {
    pub model: ModelConfig,
    pub n: usize,
    pub beta: f64,
    pub r: f64,
    pub sigma: f64,
    pub stat: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps_null: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps_alt: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ExperimentDoc {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Fills defaults and checks every field.
    pub fn normalize(self) -> Result<Self> {
        Calibration::new(self.n, self.beta, self.r, self.sigma)?;
        let stat = parse_stat(&self.stat, self.gamma0)?;
        let gamma0 = match stat {
            StatKind::HigherCriticism { gamma0 } => Some(gamma0),
            _ => None,
        };
        let doc = ExperimentDoc {
            model: self.model.normalize(self.n)?,
            gamma0,
            alpha: Some(self.alpha.unwrap_or(DEFAULT_ALPHA)),
            reps_null: Some(self.reps_null.unwrap_or(DEFAULT_REPS)),
            reps_alt: Some(self.reps_alt.unwrap_or(DEFAULT_REPS)),
            seed: Some(self.seed.unwrap_or(DEFAULT_SEED)),
            ..self
        };
        doc.to_config()?.validate()?;
        Ok(doc)
    }

    pub fn to_config(&self) -> Result<ExperimentConfig> {
        let seed = self.seed.unwrap_or(DEFAULT_SEED);
        Ok(ExperimentConfig {
            model: self.model.to_spec(self.n, seed)?,
            cal: Calibration::new(self.n, self.beta, self.r, self.sigma)?,
            stat: parse_stat(&self.stat, self.gamma0)?,
            alpha: self.alpha.unwrap_or(DEFAULT_ALPHA),
            reps_null: self.reps_null.unwrap_or(DEFAULT_REPS),
            reps_alt: self.reps_alt.unwrap_or(DEFAULT_REPS),
            seed,
        })
    }
}

/// Document for `scan`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanDoc {
    pub model: ModelConfig,
    pub n: usize,
    pub sigma: f64,
    pub beta_grid: GridSpec,
    pub r_grid: GridSpec,
    pub stats: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps_null: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps_alt: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ScanDoc {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn normalize(self) -> Result<Self> {
        if self.n == 0 {
            return Err(rareweak_core::Error::Config {
                field: "n".into(),
                message: "need at least one feature".into(),
            }
            .into());
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(rareweak_core::Error::Config {
                field: "sigma".into(),
                message: format!("{} must be positive", self.sigma),
            }
            .into());
        }
        if self.gamma0.is_some() && !self.stats.iter().any(|s| s == "hc") {
            return Err(CliError::Config("`gamma0` given but hc is not among `stats`".into()));
        }
        let gamma0 = self
            .stats
            .iter()
            .any(|s| s == "hc")
            .then(|| self.gamma0.unwrap_or(DEFAULT_GAMMA0));
        let doc = ScanDoc {
            model: self.model.normalize(self.n)?,
            gamma0,
            alpha: Some(self.alpha.unwrap_or(DEFAULT_ALPHA)),
            reps_null: Some(self.reps_null.unwrap_or(DEFAULT_REPS)),
            reps_alt: Some(self.reps_alt.unwrap_or(DEFAULT_REPS)),
            seed: Some(self.seed.unwrap_or(DEFAULT_SEED)),
            ..self
        };
        doc.to_request()?;
        Ok(doc)
    }

    pub fn to_request(&self) -> Result<ScanRequest> {
        let seed = self.seed.unwrap_or(DEFAULT_SEED);
        let stats = self
            .stats
            .iter()
            .map(|s| parse_stat(s, if s == "hc" { self.gamma0 } else { None }))
            .collect::<Result<Vec<_>>>()?;
        let req = ScanRequest {
            model: self.model.to_spec(self.n, seed)?,
            n: self.n,
            sigma: self.sigma,
            beta_grid: self.beta_grid.values().map_err(|m| grid_error("beta_grid", m))?,
            r_grid: self.r_grid.values().map_err(|m| grid_error("r_grid", m))?,
            stats,
            alpha: self.alpha.unwrap_or(DEFAULT_ALPHA),
            reps_null: self.reps_null.unwrap_or(DEFAULT_REPS),
            reps_alt: self.reps_alt.unwrap_or(DEFAULT_REPS),
            seed,
        };
        check_scan(&req)?;
        Ok(req)
    }
}

fn grid_error(field: &str, message: String) -> CliError {
    CliError::Config(format!("`{field}`: {message}"))
}

fn check_scan(req: &ScanRequest) -> Result<()> {
    let fail = |field: &str, message: &str| {
        Err(rareweak_core::Error::Config {
            field: field.into(),
            message: message.into(),
        }
        .into())
    };
    if req.beta_grid.is_empty() {
        return fail("beta_grid", "grid is empty");
    }
    if req.r_grid.is_empty() {
        return fail("r_grid", "grid is empty");
    }
    if req.stats.is_empty() {
        return fail("stats", "no statistics requested");
    }
    if !(req.alpha > 0.0 && req.alpha < 1.0) {
        return fail("alpha", "must lie in (0, 1)");
    }
    for (field, reps) in [("reps_null", req.reps_null), ("reps_alt", req.reps_alt)] {
        if reps < rareweak_core::mc_engine::MIN_REPS {
            return fail(field, "at least 100 replications required");
        }
    }
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

/// Hex SHA-256 of the compact JSON form of `value`.
pub fn digest<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config documents serialize");
    hex::encode(Sha256::digest(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"model": "direct", "n": 1000, "beta": 0.6, "r": 0.4, "sigma": 1, "stat": "hc"}"#;

    #[test]
    fn minimal_document_gets_defaults() {
        let doc = ExperimentDoc::parse(MINIMAL).unwrap().normalize().unwrap();
        assert_eq!(doc.alpha, Some(0.05));
        assert_eq!(doc.reps_null, Some(2000));
        assert_eq!(doc.reps_alt, Some(2000));
        assert_eq!(doc.seed, Some(0));
        assert_eq!(doc.gamma0, Some(0.2));
        let cfg = doc.to_config().unwrap();
        assert_eq!(cfg.stat, StatKind::HigherCriticism { gamma0: 0.2 });
        assert_eq!(cfg.model, ModelSpec::DirectLogChisq);
    }

    #[test]
    fn bad_beta_names_the_field() {
        let text = MINIMAL.replace("0.6", "1.5");
        let err = ExperimentDoc::parse(&text).unwrap().normalize().unwrap_err();
        assert!(err.to_string().contains("beta"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let text = "{\n  \"model\": \"direct\",\n  \"n\": 10,\n  \"betta\": 0.6\n}";
        let err = ExperimentDoc::parse(text).unwrap_err().to_string();
        assert!(err.contains("unknown field `betta`"), "{err}");
        assert!(err.contains("line 4"), "{err}");
        let text = r#"{"model": {"kind": "direct", "mu": 1}, "n": 10, "beta": 0.6, "r": 0.1, "sigma": 1, "stat": "hc"}"#;
        assert!(ExperimentDoc::parse(text).unwrap_err().to_string().contains("unknown field `mu`"));
    }

    #[test]
    fn syntax_errors_report_position() {
        let err = ExperimentDoc::parse("{\"model\": \"direct\",\n \"n\": }").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn poisson_models_fill_lambda_range() {
        let text = r#"{"model": {"kind": "two-sample-poisson"}, "n": 100, "beta": 0.6, "r": 0.4, "sigma": 1, "stat": "bj"}"#;
        let doc = ExperimentDoc::parse(text).unwrap().normalize().unwrap();
        let ln_n = 100f64.ln();
        assert_eq!(doc.model.lambda_range, Some([10.0 * ln_n, 100.0 * ln_n]));
        assert_eq!(doc.model.method, Some(TwoSampleMethod::VarianceStabilized));
        assert_eq!(doc.gamma0, None);
        match doc.to_config().unwrap().model {
            ModelSpec::TwoSamplePoisson { lambda, .. } => {
                assert_eq!(lambda.len(), 100);
                assert!(lambda.iter().all(|&l| l >= 10.0 * ln_n && l <= 100.0 * ln_n));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nuisance_vectors_must_match_n() {
        let text = r#"{"model": {"kind": "two-sample-normal", "nu": [1, 2]}, "n": 3, "beta": 0.6, "r": 0.4, "sigma": 1, "stat": "minp"}"#;
        let err = ExperimentDoc::parse(text).unwrap().normalize().unwrap_err();
        assert!(err.to_string().contains("model.nu"), "{err}");
    }

    #[test]
    fn misplaced_options_are_rejected() {
        let text = r#"{"model": {"kind": "direct", "method": "exact"}, "n": 3, "beta": 0.6, "r": 0.4, "sigma": 1, "stat": "minp"}"#;
        assert!(ExperimentDoc::parse(text).unwrap().normalize().is_err());
        let text = MINIMAL.replace("\"hc\"", "\"bj\", \"gamma0\": 0.3");
        assert!(ExperimentDoc::parse(&text).unwrap().normalize().is_err());
    }

    #[test]
    fn scan_document() {
        let text = r#"{"model": "direct", "n": 200, "sigma": 1, "beta_grid": "0.55:0.75:0.1",
            "r_grid": [0.2, 0.6], "stats": ["hc", "fdr"], "reps_null": 100, "reps_alt": 100}"#;
        let doc = ScanDoc::parse(text).unwrap().normalize().unwrap();
        let req = doc.to_request().unwrap();
        assert_eq!(req.beta_grid.len(), 2);
        assert_eq!(req.r_grid, vec![0.2, 0.6]);
        assert_eq!(req.stats[0], StatKind::HigherCriticism { gamma0: 0.2 });
        assert_eq!(doc.clone().normalize().unwrap(), doc);
    }

    #[test]
    fn digest_is_stable() {
        let doc = ExperimentDoc::parse(MINIMAL).unwrap().normalize().unwrap();
        assert_eq!(digest(&doc), digest(&doc.clone()));
        assert_eq!(digest(&doc).len(), 64);
    }
}
