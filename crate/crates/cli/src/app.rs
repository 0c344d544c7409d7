use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use rareweak_core::diagnostics::indistinguishability_bound;
use rareweak_core::mc_engine::{calibrate_threshold, estimate_power, phase_scan};
use rareweak_core::{Calibration, CurveKind, StatKind};

use crate::config::{read_text, ExperimentDoc, ModelConfig, ModelKind, ScanDoc};
use crate::emit::{self, CalibrationRow, CurvePoint, Format, Meta, Table};
use crate::error::{CliError, Result};
use crate::grid::Range;

#[derive(Debug, Parser)]
#[command(name = "rareweak", version, about = "Detection of rare and weak departures among many P-values")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate a theoretical detection boundary.
    Curve(CurveArgs),
    /// Estimate power and type-I error for one experiment config.
    Simulate(SimulateArgs),
    /// Estimate power over a (beta, r) grid.
    Scan(ScanArgs),
    /// Calibrate a null rejection threshold.
    Calibrate(CalibrateArgs),
    /// Hellinger lower bound on the risk of any test (direct model).
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Write to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct CurveArgs {
    /// one-sample, bonferroni or two-sample.
    #[arg(long, value_parser = parse_curve)]
    kind: CurveKind,
    #[arg(long)]
    sigma: f64,
    /// Half-open grid start:stop:step.
    #[arg(long, value_parser = parse_range)]
    beta_grid: Range,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct ScanArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    /// hc, bj, minp, fdr or fisher.
    #[arg(long)]
    stat: String,
    #[arg(long)]
    gamma0: Option<f64>,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = crate::config::DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = crate::config::DEFAULT_REPS)]
    reps: usize,
    #[arg(long, default_value_t = crate::config::DEFAULT_SEED)]
    seed: u64,
    /// Null P-value model; nuisance parameters take their defaults.
    #[arg(long, default_value = "direct", value_parser = parse_model_kind)]
    model: ModelKind,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct DiagnoseArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    r: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[command(flatten)]
    output: OutputArgs,
}

fn parse_curve(s: &str) -> std::result::Result<CurveKind, String> {
    s.parse().map_err(|e: rareweak_core::Error| e.to_string())
}

fn parse_range(s: &str) -> std::result::Result<Range, String> {
    s.parse()
}

fn parse_model_kind(s: &str) -> std::result::Result<ModelKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| {
        format!(
            "unknown model `{s}` (expected direct, one-sample-normal, two-sample-normal, \
             one-sample-poisson or two-sample-poisson)"
        )
    })
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. Results go to `out` unless `--out` is given;
/// diagnostics go to `err`.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    1
                }
            };
        }
    };
    match run(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

/// Caps the global worker pool from `RAREWEAK_THREADS`, if set.
pub fn configure_threads() -> std::result::Result<(), String> {
    let Ok(value) = std::env::var("RAREWEAK_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("RAREWEAK_THREADS must be a positive integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

struct Rendered {
    bytes: Vec<u8>,
}

fn render<T: Serialize>(format: Format, meta: &Meta, table: &Table, data: &T) -> Result<Rendered> {
    let bytes = match format {
        Format::Csv => emit::render_csv(meta, table)?,
        Format::Json => emit::render_json(meta, data),
    };
    Ok(Rendered { bytes })
}

fn check_out_path(path: Option<&Path>) -> Result<()> {
    if let Some(path) = path {
        let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
        if let Some(parent) = parent {
            if !parent.is_dir() {
                return Err(CliError::Config(format!(
                    "output directory {} does not exist",
                    parent.display()
                )));
            }
        }
    }
    Ok(())
}

fn deliver(rendered: Rendered, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(path) => std::fs::write(path, &rendered.bytes).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => out
            .write_all(&rendered.bytes)
            .and_then(|_| out.flush())
            .map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            }),
    }
}

fn run(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Curve(args) => curve(args, out),
        Command::Simulate(args) => simulate(args, out),
        Command::Scan(args) => scan(args, out),
        Command::Calibrate(args) => calibrate(args, out),
        Command::Diagnose(args) => diagnose(args, out),
    }
}

#[derive(Serialize)]
struct CurveRequest {
    kind: CurveKind,
    sigma: f64,
    beta_grid: String,
}

fn curve(args: CurveArgs, out: &mut dyn Write) -> Result<()> {
    let path = args.output.out.as_deref();
    check_out_path(path)?;
    let points = args
        .beta_grid
        .values()
        .into_iter()
        .map(|beta| {
            Ok(CurvePoint {
                beta,
                rho: args.kind.eval_closed(beta, args.sigma)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let request = CurveRequest {
        kind: args.kind,
        sigma: args.sigma,
        beta_grid: args.beta_grid.to_string(),
    };
    let meta = Meta::new("curve", None, &request);
    let format = args.output.format.unwrap_or(Format::Csv);
    deliver(render(format, &meta, &emit::curve_table(&points), &points)?, path, out)
}

fn simulate(args: SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let path = args.output.out.as_deref();
    check_out_path(path)?;
    let mut doc = ExperimentDoc::parse(&read_text(&args.config)?)?;
    if args.seed.is_some() {
        doc.seed = args.seed;
    }
    let doc = doc.normalize()?;
    let estimate = estimate_power(&doc.to_config()?)?;
    let meta = Meta::new("simulate", doc.seed, &doc);
    let format = args.output.format.unwrap_or(Format::Json);
    deliver(render(format, &meta, &emit::power_table(&estimate), &estimate)?, path, out)
}

fn scan(args: ScanArgs, out: &mut dyn Write) -> Result<()> {
    let path = args.output.out.as_deref();
    check_out_path(path)?;
    let mut doc = ScanDoc::parse(&read_text(&args.config)?)?;
    if args.seed.is_some() {
        doc.seed = args.seed;
    }
    let doc = doc.normalize()?;
    let table = phase_scan(&doc.to_request()?)?;
    let meta = Meta::new("scan", doc.seed, &doc);
    let format = args.output.format.unwrap_or(Format::Csv);
    deliver(render(format, &meta, &emit::phase_table(&table), &table.rows)?, path, out)
}

#[derive(Serialize)]
struct CalibrateRequest {
    model: ModelConfig,
    stat: StatKind,
    n: usize,
    alpha: f64,
    reps: usize,
    seed: u64,
}

fn calibrate(args: CalibrateArgs, out: &mut dyn Write) -> Result<()> {
    let path = args.output.out.as_deref();
    check_out_path(path)?;
    let stat: StatKind = args.stat.parse()?;
    let stat = match (stat, args.gamma0) {
        (StatKind::HigherCriticism { .. }, Some(g)) => StatKind::hc(g)?,
        (_, Some(_)) => return Err(CliError::Config("--gamma0 only applies to hc".into())),
        (stat, None) => stat,
    };
    // The null law does not depend on beta, r or sigma.
    let cal = Calibration::new(args.n, 0.5, 0.0, 1.0)?;
    let model = ModelConfig::bare(args.model).normalize(args.n)?;
    let spec = model.to_spec(args.n, args.seed)?;
    let threshold = calibrate_threshold(&stat, &spec, &cal, args.alpha, args.reps, args.seed)?;
    let request = CalibrateRequest {
        model,
        stat,
        n: args.n,
        alpha: args.alpha,
        reps: args.reps,
        seed: args.seed,
    };
    let row = CalibrationRow {
        stat: stat.name(),
        n: args.n,
        alpha: args.alpha,
        reps: args.reps,
        seed: args.seed,
        threshold,
    };
    let meta = Meta::new("calibrate", Some(args.seed), &request);
    let format = args.output.format.unwrap_or(Format::Csv);
    deliver(render(format, &meta, &emit::calibration_table(&row), &row)?, path, out)
}

#[derive(Serialize)]
struct DiagnoseRequest {
    n: usize,
    beta: f64,
    r: f64,
    sigma: f64,
}

fn diagnose(args: DiagnoseArgs, out: &mut dyn Write) -> Result<()> {
    let path = args.output.out.as_deref();
    check_out_path(path)?;
    let cal = Calibration::new(args.n, args.beta, args.r, args.sigma)?;
    let report = indistinguishability_bound(&cal)?;
    let request = DiagnoseRequest {
        n: args.n,
        beta: args.beta,
        r: args.r,
        sigma: args.sigma,
    };
    let meta = Meta::new("diagnose", None, &request);
    let format = args.output.format.unwrap_or(Format::Json);
    deliver(render(format, &meta, &emit::hellinger_table(&report), &report)?, path, out)
}
