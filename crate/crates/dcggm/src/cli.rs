//! Command-line surface: `generate`, `fit`, `experiment`, `plot`.

use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use dcggm_core::{make_dataset, Estimator, Kind, Method};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{AppError, Result};
use crate::experiment::{self, Mode};
use crate::io::{read_json, read_matrix, write_json, write_matrix, write_samples, Meta};
use crate::plot::{self, PlotKind};

#[derive(Debug, Parser)]
#[command(name = "dcggm", version, about = "Sparse precision-matrix estimation and benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a ground-truth graph and Gaussian samples from it.
    Generate(GenerateArgs),
    /// Estimate a precision matrix from a covariance CSV.
    Fit(FitArgs),
    /// Run a configured experiment grid.
    Experiment(ExperimentArgs),
    /// Render an SVG chart from an experiment table.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_parser = parse_with::<Kind>)]
    pub kind: Kind,
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 30)]
    pub edges: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_parser = parse_with::<Method>)]
    pub method: Method,
    /// Covariance matrix CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Cardinality of vec(O), diagonal included (dc only).
    #[arg(long)]
    pub k: Option<usize>,
    /// Penalty weight (glasso, scad, adapt).
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 3.7)]
    pub a: f64,
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    #[arg(long, default_value_t = 3)]
    pub lla_rounds: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_parser = parse_with::<Mode>)]
    pub mode: Mode,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long, value_parser = parse_with::<PlotKind>)]
    pub kind: PlotKind,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_with<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => generate(&a),
        Command::Fit(a) => fit(&a),
        Command::Experiment(a) => experiment(&a),
        Command::Plot(a) => plot_cmd(&a),
    }
}

/// Exclusive hold on an output directory for the life of a command.
struct DirLock(PathBuf);

impl DirLock {
    fn acquire(dir: &Path) -> Result<DirLock> {
        fs::create_dir_all(dir).map_err(AppError::io(dir))?;
        let path = dir.join(".lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(DirLock(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(AppError::Usage(format!("{} is in use by another run (remove {} if stale)", dir.display(), path.display())))
            }
            Err(e) => Err(AppError::io(path)(e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn generate(a: &GenerateArgs) -> Result<()> {
    let max = a.kind.max_edges(a.p);
    if a.edges > max {
        return Err(AppError::Usage(format!("--edges {} exceeds the bound {max} for {} graphs with p = {}", a.edges, a.kind.as_str(), a.p)));
    }
    if a.p == 0 || a.n == 0 {
        return Err(AppError::Usage("--p and --n must be positive".into()));
    }
    let (truth, data) = make_dataset(a.kind, a.p, a.n, a.edges, a.seed)?;
    let _lock = DirLock::acquire(&a.out)?;
    write_samples(&a.out.join("samples.csv"), &data.x)?;
    write_matrix(&a.out.join("s.csv"), &data.s)?;
    write_matrix(&a.out.join("omega_true.csv"), &truth.omega_true)?;
    write_json(&a.out.join("meta.json"), &Meta::new(&truth, &data))
}

#[derive(Debug, Serialize)]
struct FitReport {
    method: &'static str,
    param: f64,
    iterations: usize,
    converged: bool,
    kkt_residual: f64,
    constraint_gap: Option<f64>,
    edges: usize,
    lambda_max: f64,
    wall_seconds: f64,
}

fn fit(a: &FitArgs) -> Result<()> {
    let param = match (a.method, a.k, a.lambda) {
        (Method::Dc, Some(k), None) => k as f64,
        (Method::Dc, _, _) => return Err(AppError::Usage("dc takes --k and no --lambda".into())),
        (_, None, Some(l)) => l,
        (m, _, _) => return Err(AppError::Usage(format!("{} takes --lambda and no --k", m.as_str()))),
    };
    let s = read_matrix(&a.input)?;
    let lambda_max = s.max_abs_offdiag();
    eprintln!("lambda_max = {lambda_max}");
    let est = Estimator { scad_a: a.a, adapt_gamma: a.gamma, lla_rounds: a.lla_rounds, ..Estimator::new(a.method) };
    let start = Instant::now();
    let fit = est.fit(&s, param)?;
    let wall_seconds = start.elapsed().as_secs_f64();
    let _lock = DirLock::acquire(&a.out)?;
    write_matrix(&a.out.join("omega.csv"), &fit.omega)?;
    let report = FitReport {
        method: a.method.as_str(),
        param,
        iterations: fit.iterations,
        converged: fit.converged,
        kkt_residual: fit.kkt_residual,
        constraint_gap: fit.constraint_gap,
        edges: fit.edges,
        lambda_max,
        wall_seconds,
    };
    write_json(&a.out.join("fit.json"), &report)
}

fn experiment(a: &ExperimentArgs) -> Result<()> {
    let mut cfg: RunConfig = read_json(&a.config)?;
    if let Some(out) = &a.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    let _lock = DirLock::acquire(&cfg.output_dir)?;
    let log = |line: &str| eprintln!("{line}");
    let progress: experiment::Progress = if a.quiet { None } else { Some(&log) };
    let report = experiment::run(&cfg, a.mode, progress)?;
    experiment::write_report(&cfg.output_dir, a.mode, &report)?;
    write_json(&cfg.output_dir.join("config.json"), &cfg)?;
    eprintln!(
        "{} rows, {} failures, {}/{} cells failed",
        report.rows.len(),
        report.failures.len(),
        report.failed_cells,
        report.cells
    );
    if report.cells > 0 && report.failed_cells == report.cells {
        return Err(AppError::AllFailed { failures: report.failures.len() });
    }
    Ok(())
}

fn plot_cmd(a: &PlotArgs) -> Result<()> {
    let svg = plot::render(&a.results, a.kind)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(AppError::io(dir))?;
    }
    File::create(&a.out).map_err(AppError::io(&a.out))?;
    fs::write(&a.out, svg).map_err(AppError::io(&a.out))
}
