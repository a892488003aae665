//! Command-line driver for the gridshell pipeline.
//!
//! Every subcommand reads a [`PipelineConfig`] JSON file (`--config`) and
//! accepts kebab-case override flags for the scalar top-level fields; nested
//! settings (symmetry planes, regularizer, analysis) are configured through
//! the JSON document only.
//!
//! Stage subcommands consume the artifacts of the previous stage from the
//! output directory:
//!
//! ```text
//! analyze     input mesh            -> stress.json
//! field       stress.json           -> field.json
//! remesh      field.json            -> deformed.obj, genealogy.json, raw_gridshell.obj
//! regularize  raw_gridshell.obj     -> gridshell.obj, metrics.csv
//! evaluate    gridshell.obj         -> report.json, axial.csv
//! pipeline    input mesh            -> all of the above except stress.json / raw_gridshell.obj
//! sweep       input mesh            -> sweep.csv plus one run directory per (D, A, rep)
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use gridshell_core::pipeline::{self, PipelineConfig};
use gridshell_core::{field, frame, mesh, regularize, shell};

#[derive(Parser)]
#[command(
    name = "gridshell",
    version,
    about = "Stress-aligned hex-dominant gridshell generation and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the membrane shell under the design load; writes stress.json.
    Analyze(ConfigArgs),
    /// Smooth, saturate, symmetrize and rescale the stress field; writes
    /// field.json (needs stress.json).
    Field(ConfigArgs),
    /// Deform and refine to the target metric, sample and relax seeds, and
    /// extract the raw tessellation (needs field.json).
    Remesh(ConfigArgs),
    /// Shape-regularize the tessellation and weld sector inputs across the
    /// symmetry planes (needs raw_gridshell.obj).
    Regularize(ConfigArgs),
    /// Build the frame model and run static + buckling analysis; writes
    /// report.json and axial.csv (needs gridshell.obj).
    Evaluate(ConfigArgs),
    /// Run every stage end to end.
    Pipeline(ConfigArgs),
    /// Run the full pipeline over a (D, A) grid with repeated seeds; writes
    /// sweep.csv.
    Sweep(SweepArgs),
}

/// `--config` plus per-field overrides, shared by every subcommand.
#[derive(Args)]
struct ConfigArgs {
    /// Pipeline configuration file (JSON).
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Input triangle mesh (OBJ).
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Directory receiving all artifacts.
    #[arg(long, value_name = "DIR")]
    output_dir: Option<PathBuf>,
    /// Density range top D >= 1.
    #[arg(long)]
    density: Option<f64>,
    /// Anisotropy range top A >= 1.
    #[arg(long)]
    anisotropy: Option<f64>,
    /// Sampling radius R in meters.
    #[arg(long)]
    radius: Option<f64>,
    /// Seed for the Poisson sampler.
    #[arg(long)]
    rng_seed: Option<u64>,
    /// Boundary corner detection threshold in degrees.
    #[arg(long)]
    corner_threshold_deg: Option<f64>,
    /// Line-field smoothing weight.
    #[arg(long)]
    smoothness_weight: Option<f64>,
    /// Lipschitz bound for density saturation (default: d-range / R).
    #[arg(long)]
    lipschitz: Option<f64>,
    /// Surface tolerance for the input symmetry check (default: 1e-3 x
    /// bounding-box diagonal).
    #[arg(long)]
    symmetry_tolerance: Option<f64>,
    /// Weld tolerance for sector reflection (default: R / 1000).
    #[arg(long)]
    weld_tolerance: Option<f64>,
    /// Beam section diameter in meters.
    #[arg(long)]
    section_diameter: Option<f64>,
    /// Serviceability load density in N/m^2 for frame evaluation.
    #[arg(long)]
    eval_load_density: Option<f64>,
    /// Bisect R until the tessellation's total edge length matches this
    /// target (meters) within 5%.
    #[arg(long)]
    target_total_length: Option<f64>,
}

impl ConfigArgs {
    fn resolve(&self) -> anyhow::Result<PipelineConfig> {
        let mut cfg = pipeline::load_config(&self.config)?;
        if let Some(v) = &self.input {
            cfg.input = v.clone();
        }
        if let Some(v) = &self.output_dir {
            cfg.output_dir = v.clone();
        }
        if let Some(v) = self.density {
            cfg.density = v;
        }
        if let Some(v) = self.anisotropy {
            cfg.anisotropy = v;
        }
        if let Some(v) = self.radius {
            cfg.radius = v;
        }
        if let Some(v) = self.rng_seed {
            cfg.rng_seed = v;
        }
        if let Some(v) = self.corner_threshold_deg {
            cfg.corner_threshold_deg = v;
        }
        if let Some(v) = self.smoothness_weight {
            cfg.smoothness_weight = v;
        }
        if let Some(v) = self.lipschitz {
            cfg.lipschitz = Some(v);
        }
        if let Some(v) = self.symmetry_tolerance {
            cfg.symmetry_tolerance = Some(v);
        }
        if let Some(v) = self.weld_tolerance {
            cfg.weld_tolerance = Some(v);
        }
        if let Some(v) = self.section_diameter {
            cfg.section_diameter = v;
        }
        if let Some(v) = self.eval_load_density {
            cfg.eval_load_density = v;
        }
        if let Some(v) = self.target_total_length {
            cfg.target_total_length = Some(v);
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Comma-separated density values.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    d_values: Vec<f64>,
    /// Comma-separated anisotropy values.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    a_values: Vec<f64>,
    /// Pipeline runs per (D, A) cell, each with a distinct derived RNG seed.
    #[arg(long, default_value_t = 3)]
    repetitions: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(args) => args.resolve().and_then(|cfg| cmd_analyze(&cfg)),
        Command::Field(args) => args.resolve().and_then(|cfg| cmd_field(&cfg)),
        Command::Remesh(args) => args.resolve().and_then(|cfg| cmd_remesh(&cfg)),
        Command::Regularize(args) => args.resolve().and_then(|cfg| cmd_regularize(&cfg)),
        Command::Evaluate(args) => args.resolve().and_then(|cfg| cmd_evaluate(&cfg)),
        Command::Pipeline(args) => args.resolve().and_then(|cfg| cmd_pipeline(&cfg)),
        Command::Sweep(args) => args
            .config
            .resolve()
            .and_then(|cfg| cmd_sweep(&cfg, &args.d_values, &args.a_values, args.repetitions)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn ensure_output_dir(cfg: &PipelineConfig) -> anyhow::Result<()> {
    fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("creating output directory {}", cfg.output_dir.display()))
}

fn wrote(path: &Path) {
    println!("wrote {}", path.display());
}

fn print_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn cmd_analyze(cfg: &PipelineConfig) -> anyhow::Result<()> {
    ensure_output_dir(cfg)?;
    let mesh = mesh::load_obj(&cfg.input)?;
    let stress = pipeline::analyze(&mesh, cfg)?;
    let path = cfg.output_dir.join("stress.json");
    shell::save_stress_json(&stress, &path)?;
    wrote(&path);
    Ok(())
}

fn cmd_field(cfg: &PipelineConfig) -> anyhow::Result<()> {
    ensure_output_dir(cfg)?;
    let mesh = mesh::load_obj(&cfg.input)?;
    let stress = shell::load_stress_json(cfg.output_dir.join("stress.json"))
        .context("reading stress.json (run `gridshell analyze` first)")?;
    let outcome = pipeline::prepare_field(&mesh, &stress, cfg, cfg.radius)?;
    print_warnings(&outcome.warnings);
    let path = cfg.output_dir.join("field.json");
    field::save_field_json(&outcome.field, &path)?;
    wrote(&path);
    Ok(())
}

fn cmd_remesh(cfg: &PipelineConfig) -> anyhow::Result<()> {
    ensure_output_dir(cfg)?;
    let mesh = mesh::load_obj(&cfg.input)?;
    let psi = field::load_field_json(cfg.output_dir.join("field.json"))
        .context("reading field.json (run `gridshell field` first)")?;
    let outcome = pipeline::remesh(&mesh, &psi, cfg, cfg.radius)?;
    print_warnings(&outcome.warnings);
    let deformed = cfg.output_dir.join("deformed.obj");
    mesh::save_obj(&outcome.domain.deformed, &deformed)?;
    wrote(&deformed);
    let genealogy = cfg.output_dir.join("genealogy.json");
    pipeline::save_genealogy_json(&outcome.domain.genealogy, &genealogy)?;
    wrote(&genealogy);
    let raw = cfg.output_dir.join("raw_gridshell.obj");
    mesh::save_poly_obj(&outcome.raw_poly, &raw)?;
    wrote(&raw);
    println!(
        "{} seeds, {} lloyd iterations, {} faces",
        outcome.seeds.len(),
        outcome.relax.iters,
        outcome.raw_poly.faces.len()
    );
    Ok(())
}

fn cmd_regularize(cfg: &PipelineConfig) -> anyhow::Result<()> {
    ensure_output_dir(cfg)?;
    let raw = mesh::load_poly_obj(cfg.output_dir.join("raw_gridshell.obj"))
        .context("reading raw_gridshell.obj (run `gridshell remesh` first)")?;
    let symmetric_input = if cfg.symmetry_planes.is_empty() {
        false
    } else {
        let mesh = mesh::load_obj(&cfg.input)?;
        pipeline::input_is_symmetric(&mesh, cfg)?
    };
    let (poly, stats) = pipeline::finish_tessellation(&raw, cfg, symmetric_input)?;
    print_warnings(&stats.warnings);
    let gridshell = cfg.output_dir.join("gridshell.obj");
    mesh::save_poly_obj(&poly, &gridshell)?;
    wrote(&gridshell);
    let metrics = cfg.output_dir.join("metrics.csv");
    fs::write(&metrics, regularize::metrics_csv(&poly))
        .with_context(|| format!("writing {}", metrics.display()))?;
    wrote(&metrics);
    println!(
        "{} faces regularized in {} iterations",
        poly.faces.len(),
        stats.iters
    );
    Ok(())
}

fn cmd_evaluate(cfg: &PipelineConfig) -> anyhow::Result<()> {
    ensure_output_dir(cfg)?;
    let poly = mesh::load_poly_obj(cfg.output_dir.join("gridshell.obj"))
        .context("reading gridshell.obj (run `gridshell regularize` first)")?;
    let (model, solution, report) = pipeline::evaluate_gridshell(&poly, cfg)?;
    let report_path = cfg.output_dir.join("report.json");
    fs::write(&report_path, frame::report_json(&report))
        .with_context(|| format!("writing {}", report_path.display()))?;
    wrote(&report_path);
    let axial_path = cfg.output_dir.join("axial.csv");
    fs::write(&axial_path, frame::axial_forces_csv(&model, &solution))
        .with_context(|| format!("writing {}", axial_path.display()))?;
    wrote(&axial_path);
    print_report_summary(&report);
    Ok(())
}

fn cmd_pipeline(cfg: &PipelineConfig) -> anyhow::Result<()> {
    let artifacts = pipeline::run_pipeline(cfg)?;
    print_warnings(&artifacts.warnings);
    for file in &artifacts.files {
        wrote(file);
    }
    println!(
        "radius used: {:.6} m, {} faces",
        artifacts.radius_used,
        artifacts.gridshell.faces.len()
    );
    print_report_summary(&artifacts.report);
    Ok(())
}

fn print_report_summary(report: &frame::EvalReport) {
    let lambda = match report.lambda_lin {
        Some(l) => format!("{l:.4}"),
        None => "unbounded".to_string(),
    };
    println!(
        "delta_max = {:.6e} m, lambda_lin = {lambda}, total length = {:.3} m, total mass = {:.1} kg",
        report.delta_max, report.total_length, report.total_mass
    );
}

fn cmd_sweep(
    cfg: &PipelineConfig,
    d_values: &[f64],
    a_values: &[f64],
    repetitions: usize,
) -> anyhow::Result<()> {
    let outcome = pipeline::sweep(cfg, d_values, a_values, repetitions)?;
    wrote(&outcome.csv_path);
    println!(
        "{} runs, {} mean rows",
        outcome.data_rows, outcome.mean_rows
    );
    Ok(())
}
