//! CSV and JSON rendering with a provenance header.
//!
//! CSV output starts with `# key: value` comment lines carrying the tool
//! version, seed and config digest, followed by a fixed header row. Numbers
//! carry 12 significant digits and lines end in `\n`. JSON output is a single
//! object `{"meta": ..., "data": ...}`.

use clap::ValueEnum;
use serde::Serialize;

use rareweak_core::{HellingerReport, PhaseTable, PowerEstimate};

use crate::error::{CliError, Result};

pub const TOOL: &str = "rareweak";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const PHASE_HEADER: &[&str] = &[
    "beta",
    "r",
    "sigma",
    "stat",
    "power",
    "risk",
    "rho_theory",
    "region",
    "error",
];
pub const CURVE_HEADER: &[&str] = &["beta", "rho"];
pub const POWER_HEADER: &[&str] = &["threshold", "type1", "power", "risk", "mc_se", "reps_null", "reps_alt"];
pub const HELLINGER_HEADER: &[&str] = &["h2_coord", "h2_total", "tv_upper", "risk_lower", "quadrature_error"];
pub const CALIBRATE_HEADER: &[&str] = &["stat", "n", "alpha", "reps", "seed", "threshold"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: Option<u64>,
    pub config_digest: String,
    pub config: serde_json::Value,
}

impl Meta {
    pub fn new<C: Serialize>(command: &'static str, seed: Option<u64>, config: &C) -> Self {
        Meta {
            tool: TOOL,
            version: VERSION,
            command,
            seed,
            config_digest: crate::config::digest(config),
            config: serde_json::to_value(config).expect("config documents serialize"),
        }
    }
}

/// 12 significant digits, printed in the shortest form that reads back to
/// the rounded value; scientific notation outside [1e-5, 1e15).
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    let magnitude = rounded.abs();
    if magnitude == 0.0 || (1e-5..1e15).contains(&magnitude) {
        rounded.to_string()
    } else {
        format!("{rounded:e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => format_number(*x),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub beta: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationRow {
    pub stat: &'static str,
    pub n: usize,
    pub alpha: f64,
    pub reps: usize,
    pub seed: u64,
    pub threshold: f64,
}

pub fn phase_table(table: &PhaseTable) -> Table {
    let mut header = PHASE_HEADER.to_vec();
    if table.bonferroni_column {
        header.push("rho_bonf");
    }
    let rows = table
        .rows
        .iter()
        .map(|row| {
            let mut cells = vec![
                row.beta.into(),
                row.r.into(),
                row.sigma.into(),
                row.stat.name().into(),
                row.power.into(),
                row.risk.into(),
                row.rho_theory.into(),
                row.region.map_or(Cell::Empty, |r| r.name().into()),
                row.error.as_deref().map_or(Cell::Empty, Cell::from),
            ];
            if table.bonferroni_column {
                cells.push(row.rho_bonf.into());
            }
            cells
        })
        .collect();
    Table { header, rows }
}

pub fn curve_table(points: &[CurvePoint]) -> Table {
    Table {
        header: CURVE_HEADER.to_vec(),
        rows: points.iter().map(|p| vec![p.beta.into(), p.rho.into()]).collect(),
    }
}

pub fn power_table(est: &PowerEstimate) -> Table {
    Table {
        header: POWER_HEADER.to_vec(),
        rows: vec![vec![
            est.threshold.into(),
            est.type1_hat.into(),
            est.power_hat.into(),
            est.risk_hat.into(),
            est.mc_se.into(),
            est.reps_null.into(),
            est.reps_alt.into(),
        ]],
    }
}

pub fn hellinger_table(rep: &HellingerReport) -> Table {
    Table {
        header: HELLINGER_HEADER.to_vec(),
        rows: vec![vec![
            rep.h2_coord.into(),
            rep.h2_total.into(),
            rep.tv_upper.into(),
            rep.risk_lower.into(),
            rep.quadrature_error.into(),
        ]],
    }
}

pub fn calibration_table(row: &CalibrationRow) -> Table {
    Table {
        header: CALIBRATE_HEADER.to_vec(),
        rows: vec![vec![
            row.stat.into(),
            row.n.into(),
            row.alpha.into(),
            row.reps.into(),
            row.seed.into(),
            row.threshold.into(),
        ]],
    }
}

pub fn render_csv(meta: &Meta, table: &Table) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let seed = meta.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
    let config = serde_json::to_string(&meta.config).expect("JSON value serializes");
    for (key, value) in [
        ("tool", format!("{} {}", meta.tool, meta.version)),
        ("command", meta.command.to_string()),
        ("seed", seed),
        ("config_digest", meta.config_digest.clone()),
        ("config", config),
    ] {
        out.extend_from_slice(format!("# {key}: {value}\n").as_bytes());
    }
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let io = |e: csv::Error| CliError::Io {
        path: "<buffer>".into(),
        source: std::io::Error::other(e.to_string()),
    };
    writer.write_record(&table.header).map_err(io)?;
    for row in &table.rows {
        writer.write_record(row.iter().map(Cell::render)).map_err(io)?;
    }
    writer.into_inner().map_err(|e| CliError::Io {
        path: "<buffer>".into(),
        source: std::io::Error::other(e.to_string()),
    })
}

pub fn render_json<T: Serialize>(meta: &Meta, data: &T) -> Vec<u8> {
    #[derive(Serialize)]
    struct Document<'a, T> {
        meta: &'a Meta,
        data: &'a T,
    }
    let mut out = serde_json::to_vec_pretty(&Document { meta, data }).expect("output serializes");
    out.push(b'\n');
    out
}
