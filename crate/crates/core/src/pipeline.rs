//! End-to-end orchestration: analyze → field (smooth, saturate, symmetrize,
//! rescale) → remesh (deform/refine, sample, lloyd, extract) → regularize →
//! weld → evaluate, emitting the artifact bundle.
//!
//! Symmetry planes serve two usage patterns, distinguished automatically:
//! a *full* input mesh that reflects onto itself gets its field symmetrized
//! (welding is then skipped — the tessellation already covers everything),
//! while a *sector* input whose reflection leaves the surface skips field
//! symmetrization and instead reflects + welds the finished tessellation
//! across the planes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acvt::{self, RelaxStats, SeedSet, VoronoiState};
use crate::deform::{refine_until_fit, DeformConfig, DeformedDomain};
use crate::field::{self, PsiField, SymmetryPlane};
use crate::frame::{self, EvalReport, FrameModel, StaticSolution};
use crate::mesh::{self, classify_boundary, PolyMesh, TriMesh};
use crate::regularize::{self, RegularizeStats, RegularizerConfig};
use crate::shell::{self, LoadCase, Material, ShellConfig, StressTensorField, SupportRule};
use crate::{Error, Result};

/// Cap on the anisotropy ratio during principal decomposition; near-zero
/// minor stresses otherwise produce unbounded ratios.
pub const ANISOTROPY_CAP: f64 = 1e3;

const LLOYD_MAX_ITERS: usize = 200;
const LLOYD_TOL: f64 = 1e-10;
/// Relative tolerance for the optional total-length bisection on R.
const LENGTH_TOL: f64 = 0.05;

fn schema_one() -> u32 {
    1
}
fn default_corner_threshold() -> f64 {
    30.0
}
fn default_smoothness() -> f64 {
    1.0
}
fn default_section_diameter() -> f64 {
    0.037
}
fn default_eval_load() -> f64 {
    1000.0
}

/// Material and load for the shell analysis producing the stress field.
/// Supports are always "all boundary vertices pinned" in the pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub material: Material,
    /// Shell thickness, meters.
    pub thickness: f64,
    /// Uniform projected load density along -Z, N/m^2.
    pub load_density: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            material: Material::steel(),
            thickness: 0.01,
            load_density: 1000.0,
        }
    }
}

impl AnalysisConfig {
    fn shell_config(&self) -> ShellConfig {
        ShellConfig {
            material: self.material,
            thickness: self.thickness,
            load: LoadCase::ProjectedPressure {
                pressure: self.load_density,
            },
            supports: SupportRule::BoundaryPinned,
            ..ShellConfig::default()
        }
    }
}

/// Full pipeline configuration; serialized as a single JSON document.
/// Every scalar field has a matching kebab-case CLI override flag.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default = "schema_one")]
    pub schema_version: u32,
    /// Input triangle mesh (OBJ).
    pub input: PathBuf,
    pub output_dir: PathBuf,
    /// Density range top D >= 1: d is rescaled into [1, D].
    pub density: f64,
    /// Anisotropy range top A >= 1: a is rescaled into [1, A].
    pub anisotropy: f64,
    /// Sampling radius R, meters.
    pub radius: f64,
    pub rng_seed: u64,
    #[serde(default)]
    pub symmetry_planes: Vec<SymmetryPlane>,
    /// Boundary corner detection threshold, degrees.
    #[serde(default = "default_corner_threshold")]
    pub corner_threshold_deg: f64,
    /// Line-field smoothing weight.
    #[serde(default = "default_smoothness")]
    pub smoothness_weight: f64,
    /// Lipschitz bound for density saturation; `None` picks d-range / R.
    #[serde(default)]
    pub lipschitz: Option<f64>,
    /// Surface tolerance when checking mirror symmetry of the input;
    /// `None` picks 1e-3 x the bounding-box diagonal.
    #[serde(default)]
    pub symmetry_tolerance: Option<f64>,
    /// Weld tolerance for sector reflection; `None` picks radius / 1000.
    #[serde(default)]
    pub weld_tolerance: Option<f64>,
    #[serde(default)]
    pub regularizer: RegularizerConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    /// Beam section diameter for evaluation, meters.
    #[serde(default = "default_section_diameter")]
    pub section_diameter: f64,
    /// Serviceability load density for evaluation, N/m^2.
    #[serde(default = "default_eval_load")]
    pub eval_load_density: f64,
    /// When set, R is bisected so the tessellation's total edge length
    /// matches this target within 5%, overriding `radius` as a start guess.
    #[serde(default)]
    pub target_total_length: Option<f64>,
}

/// Reads a [`PipelineConfig`] from a JSON file.
pub fn load_config(path: impl AsRef<Path>) -> Result<PipelineConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

fn validate_config(cfg: &PipelineConfig) -> Result<()> {
    let check = |ok: bool, name: &'static str, msg: String| {
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter { name, msg })
        }
    };
    check(
        cfg.density >= 1.0,
        "density",
        format!("D must be >= 1, got {}", cfg.density),
    )?;
    check(
        cfg.anisotropy >= 1.0,
        "anisotropy",
        format!("A must be >= 1, got {}", cfg.anisotropy),
    )?;
    check(
        cfg.radius > 0.0,
        "radius",
        format!("R must be positive, got {}", cfg.radius),
    )?;
    check(
        cfg.corner_threshold_deg > 0.0 && cfg.corner_threshold_deg < 180.0,
        "corner_threshold_deg",
        format!("must lie in (0, 180), got {}", cfg.corner_threshold_deg),
    )?;
    check(
        cfg.smoothness_weight >= 0.0,
        "smoothness_weight",
        format!("must be >= 0, got {}", cfg.smoothness_weight),
    )?;
    check(
        cfg.section_diameter > 0.0,
        "section_diameter",
        format!("must be positive, got {}", cfg.section_diameter),
    )?;
    if let Some(t) = cfg.target_total_length {
        check(
            t > 0.0,
            "target_total_length",
            format!("must be positive, got {t}"),
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Stage helpers (shared between run_pipeline and the per-stage subcommands)

fn bbox_diagonal(mesh: &TriMesh) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in &mesh.positions {
        for c in 0..3 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2) + (hi[2] - lo[2]).powi(2)).sqrt()
}

fn symmetry_tolerance(mesh: &TriMesh, cfg: &PipelineConfig) -> f64 {
    cfg.symmetry_tolerance
        .unwrap_or_else(|| 1e-3 * bbox_diagonal(mesh))
}

/// True when `mesh` reflects onto itself about every configured plane within
/// the symmetry tolerance — the same test [`prepare_field`] uses to decide
/// between full-symmetric handling (field symmetrized, no weld) and sector
/// handling (weld after regularization). No planes means not symmetric.
pub fn input_is_symmetric(mesh: &TriMesh, cfg: &PipelineConfig) -> Result<bool> {
    if cfg.symmetry_planes.is_empty() {
        return Ok(false);
    }
    let probe = PsiField::uniform(mesh, 1.0, 1.0);
    match field::symmetrize(
        &probe,
        mesh,
        &cfg.symmetry_planes,
        symmetry_tolerance(mesh, cfg),
    ) {
        Ok(_) => Ok(true),
        Err(Error::Asymmetric { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Outcome of the field stage.
pub struct FieldOutcome {
    /// Smoothed, saturated, (maybe) symmetrized, rescaled field.
    pub field: PsiField,
    /// True when the input mesh reflects onto itself about all configured
    /// planes (field symmetrized; weld will be skipped).
    pub symmetric_input: bool,
    pub warnings: Vec<String>,
}

/// Runs the shell analysis (stage "analyze").
pub fn analyze(mesh: &TriMesh, cfg: &PipelineConfig) -> Result<StressTensorField> {
    shell::assemble_and_solve(mesh, &cfg.analysis.shell_config())
        .map(|solution| solution.stress)
        .map_err(|e| e.in_stage("analyze"))
}

/// Smooths the line field, saturates density, symmetrizes over planes when
/// the input itself is symmetric, and rescales to [1,D] x [1,A]
/// (stage "field"). `radius` feeds the default Lipschitz bound.
pub fn prepare_field(
    mesh: &TriMesh,
    stress: &StressTensorField,
    cfg: &PipelineConfig,
    radius: f64,
) -> Result<FieldOutcome> {
    let inner = || -> Result<FieldOutcome> {
        let raw = shell::principal_decompose(stress, ANISOTROPY_CAP);
        let mut psi = field::smooth_line_field(&raw, mesh, cfg.smoothness_weight);
        let l = cfg.lipschitz.unwrap_or_else(|| {
            let lo = psi.density.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = psi.density.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let range = (hi - lo).max(0.0);
            if range > 0.0 {
                range / radius
            } else {
                1.0
            }
        });
        psi.density = field::lipschitz_saturate(&psi.density, mesh, l)?;
        let mut warnings = Vec::new();
        let mut symmetric_input = false;
        if !cfg.symmetry_planes.is_empty() {
            let tol = symmetry_tolerance(mesh, cfg);
            match field::symmetrize(&psi, mesh, &cfg.symmetry_planes, tol) {
                Ok(sym) => {
                    psi = sym;
                    symmetric_input = true;
                    warnings.push(
                        "input reflects onto itself about all planes: field symmetrized, \
                         weld stage will be skipped"
                            .to_string(),
                    );
                }
                Err(Error::Asymmetric { .. }) => {
                    warnings.push(
                        "input is a symmetry sector (reflection leaves the surface): field \
                         symmetrization skipped, tessellation will be welded across the planes"
                            .to_string(),
                    );
                }
                Err(other) => return Err(other),
            }
        }
        let psi = field::rescale(&psi, cfg.density, cfg.anisotropy)?;
        Ok(FieldOutcome {
            field: psi,
            symmetric_input,
            warnings,
        })
    };
    inner().map_err(|e| e.in_stage("field"))
}

/// Outcome of the remesh stage: deformed domain plus the extracted raw
/// tessellation.
pub struct RemeshOutcome {
    pub domain: DeformedDomain,
    pub seeds: SeedSet,
    pub state: VoronoiState,
    pub relax: RelaxStats,
    pub raw_poly: PolyMesh,
    pub warnings: Vec<String>,
}

/// Deform/refine to the metric, Poisson-sample, Lloyd-relax, and extract the
/// tessellation (stage "remesh").
pub fn remesh(
    mesh: &TriMesh,
    psi: &PsiField,
    cfg: &PipelineConfig,
    radius: f64,
) -> Result<RemeshOutcome> {
    let inner = || -> Result<RemeshOutcome> {
        let q = radius / 5.0;
        let refined = refine_until_fit(mesh, psi, q, &DeformConfig::default())?;
        let boundary = classify_boundary(
            &refined.domain.original,
            cfg.corner_threshold_deg.to_radians(),
        );
        let seeds = acvt::poisson_sample(&refined.domain, &boundary, radius, cfg.rng_seed)?;
        let (seeds, state, relax) = acvt::lloyd_relax(&refined.domain, &seeds, LLOYD_MAX_ITERS, LLOYD_TOL)?;
        let extraction = acvt::extract_cvt(&refined.domain, &seeds, &state)?;
        let mut warnings = relax.warnings.clone();
        warnings.extend(extraction.warnings.iter().cloned());
        Ok(RemeshOutcome {
            domain: refined.domain,
            seeds,
            state,
            relax,
            raw_poly: extraction.poly,
            warnings,
        })
    };
    inner().map_err(|e| e.in_stage("remesh"))
}

/// Regularizes the tessellation (stage "regularize") and, for sector inputs,
/// reflects + welds it across the symmetry planes (stage "weld").
pub fn finish_tessellation(
    raw: &PolyMesh,
    cfg: &PipelineConfig,
    symmetric_input: bool,
) -> Result<(PolyMesh, RegularizeStats)> {
    let (mut poly, stats) =
        regularize::regularize(raw, &cfg.regularizer).map_err(|e| e.in_stage("regularize"))?;
    if !cfg.symmetry_planes.is_empty() && !symmetric_input {
        let tol = cfg.weld_tolerance.unwrap_or(cfg.radius * 1e-3);
        poly = regularize::symmetrize_tessellation(&poly, &cfg.symmetry_planes, tol)
            .map_err(|e| e.in_stage("weld"))?;
        poly.metrics = regularize::face_metrics(&poly);
    }
    Ok((poly, stats))
}

/// Builds and evaluates the frame model (stage "evaluate").
pub fn evaluate_gridshell(
    poly: &PolyMesh,
    cfg: &PipelineConfig,
) -> Result<(FrameModel, StaticSolution, EvalReport)> {
    let inner = || -> Result<(FrameModel, StaticSolution, EvalReport)> {
        let model = frame::build_frame(
            poly,
            cfg.section_diameter,
            cfg.analysis.material,
            cfg.eval_load_density,
        )?;
        let solution = frame::solve_linear_static(&model)?;
        let lambda = frame::estimate_linear_buckling(&model, &solution)?;
        let report = EvalReport {
            schema_version: 1,
            delta_max: solution.delta_max,
            lambda_lin: lambda,
            lambda_lin_unbounded: lambda.is_none(),
            lambda_kind: "linearized".to_string(),
            total_length: model.total_length(),
            total_mass: model.total_mass(),
            displacements: solution.dofs.iter().map(|d| [d[0], d[1], d[2]]).collect(),
        };
        Ok((model, solution, report))
    };
    inner().map_err(|e| e.in_stage("evaluate"))
}

struct Built {
    field: PsiField,
    domain: DeformedDomain,
    poly: PolyMesh,
    warnings: Vec<String>,
}

fn build_for_radius(
    cfg: &PipelineConfig,
    mesh: &TriMesh,
    stress: &StressTensorField,
    radius: f64,
) -> Result<Built> {
    let field_out = prepare_field(mesh, stress, cfg, radius)?;
    let remesh_out = remesh(mesh, &field_out.field, cfg, radius)?;
    let (poly, _stats) = finish_tessellation(&remesh_out.raw_poly, cfg, field_out.symmetric_input)?;
    let mut warnings = field_out.warnings;
    warnings.extend(remesh_out.warnings);
    Ok(Built {
        field: field_out.field,
        domain: remesh_out.domain,
        poly,
        warnings,
    })
}

fn bisect_radius(
    cfg: &PipelineConfig,
    mesh: &TriMesh,
    stress: &StressTensorField,
    target: f64,
) -> Result<f64> {
    let measure = |r: f64| -> Result<f64> {
        Ok(build_for_radius(cfg, mesh, stress, r)?.poly.total_edge_length())
    };
    let within = |len: f64| (len - target).abs() <= LENGTH_TOL * target;
    let start = cfg.radius;
    let l_start = measure(start)?;
    if within(l_start) {
        return Ok(start);
    }
    // Total edge length shrinks as R grows; expand a bracket with
    // len(lo) >= target >= len(hi), shrinking below the resolution limit
    // terminates the search.
    let (mut lo, mut l_lo, mut hi, mut l_hi);
    if l_start > target {
        lo = start;
        l_lo = l_start;
        hi = start;
        l_hi = l_start;
        for _ in 0..10 {
            hi *= 2.0;
            l_hi = measure(hi)?;
            if l_hi <= target {
                break;
            }
            lo = hi;
            l_lo = l_hi;
        }
        if l_hi > target {
            return Err(Error::Bisection {
                msg: format!(
                    "total length {l_hi:.3} still above target {target:.3} at radius {hi:.3}"
                ),
            });
        }
    } else {
        hi = start;
        l_hi = l_start;
        lo = start;
        l_lo = l_start;
        for _ in 0..10 {
            lo /= 2.0;
            l_lo = match measure(lo) {
                Ok(l) => l,
                Err(Error::Stage { source, .. })
                    if matches!(*source, Error::RadiusTooSmall { .. }) =>
                {
                    return Err(Error::Bisection {
                        msg: format!(
                            "radius {lo:.4} hit the resolution limit before reaching target \
                             length {target:.3} (best {l_lo:.3})"
                        ),
                    })
                }
                Err(e) => return Err(e),
            };
            if l_lo >= target {
                break;
            }
            hi = lo;
            l_hi = l_lo;
        }
        if l_lo < target {
            return Err(Error::Bisection {
                msg: format!(
                    "total length {l_lo:.3} still below target {target:.3} at radius {lo:.4}"
                ),
            });
        }
    }
    if within(l_lo) {
        return Ok(lo);
    }
    if within(l_hi) {
        return Ok(hi);
    }
    for _ in 0..25 {
        let mid = (lo * hi).sqrt();
        let l_mid = measure(mid)?;
        if within(l_mid) {
            return Ok(mid);
        }
        if l_mid > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Bisection {
        msg: format!(
            "no radius in [{lo:.4}, {hi:.4}] matched total length {target:.3} within 5% after 25 \
             bisection steps"
        ),
    })
}

// ---------------------------------------------------------------------------
// Artifacts

/// Everything the pipeline produced, plus where it was written.
#[derive(Debug)]
pub struct PipelineArtifacts {
    pub gridshell: PolyMesh,
    pub report: EvalReport,
    /// Radius actually used (differs from the config under bisection).
    pub radius_used: f64,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
struct GenealogyDoc<'a> {
    schema_version: u32,
    genealogy: &'a crate::deform::Genealogy,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the refinement genealogy (triangle parents and edge-split vertex
/// origins) as a versioned JSON document.
pub fn save_genealogy_json(genealogy: &crate::deform::Genealogy, path: impl AsRef<Path>) -> Result<()> {
    let doc = GenealogyDoc {
        schema_version: 1,
        genealogy,
    };
    write_text(
        path.as_ref(),
        &serde_json::to_string_pretty(&doc).expect("genealogy serializes"),
    )
}

/// Runs the full pipeline and writes the artifact bundle into
/// `cfg.output_dir`: field.json, deformed.obj, genealogy.json, gridshell.obj,
/// metrics.csv, report.json, axial.csv.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineArtifacts> {
    validate_config(cfg)?;
    let mesh = mesh::load_obj(&cfg.input).map_err(|e| e.in_stage("analyze"))?;
    let stress = analyze(&mesh, cfg)?;
    let radius = match cfg.target_total_length {
        None => cfg.radius,
        Some(target) => bisect_radius(cfg, &mesh, &stress, target)?,
    };
    let built = build_for_radius(cfg, &mesh, &stress, radius)?;
    let (model, solution, report) = evaluate_gridshell(&built.poly, cfg)?;

    fs::create_dir_all(&cfg.output_dir).map_err(|source| Error::Io {
        path: cfg.output_dir.clone(),
        source,
    })?;
    let path = |name: &str| cfg.output_dir.join(name);
    let mut files = Vec::new();

    let field_path = path("field.json");
    field::save_field_json(&built.field, &field_path).map_err(|e| e.in_stage("field"))?;
    files.push(field_path);

    let deformed_path = path("deformed.obj");
    mesh::save_obj(&built.domain.deformed, &deformed_path).map_err(|e| e.in_stage("remesh"))?;
    files.push(deformed_path);

    let genealogy_path = path("genealogy.json");
    save_genealogy_json(&built.domain.genealogy, &genealogy_path)
        .map_err(|e| e.in_stage("remesh"))?;
    files.push(genealogy_path);

    let gridshell_path = path("gridshell.obj");
    mesh::save_poly_obj(&built.poly, &gridshell_path).map_err(|e| e.in_stage("regularize"))?;
    files.push(gridshell_path);

    let metrics_path = path("metrics.csv");
    write_text(&metrics_path, &regularize::metrics_csv(&built.poly))
        .map_err(|e| e.in_stage("regularize"))?;
    files.push(metrics_path);

    let report_path = path("report.json");
    write_text(&report_path, &frame::report_json(&report)).map_err(|e| e.in_stage("evaluate"))?;
    files.push(report_path);

    let axial_path = path("axial.csv");
    write_text(&axial_path, &frame::axial_forces_csv(&model, &solution))
        .map_err(|e| e.in_stage("evaluate"))?;
    files.push(axial_path);

    Ok(PipelineArtifacts {
        gridshell: built.poly,
        report,
        radius_used: radius,
        files,
        warnings: built.warnings,
    })
}

// ---------------------------------------------------------------------------
// Sweep

/// Aggregated sweep result.
#[derive(Debug)]
pub struct SweepOutcome {
    pub csv: String,
    pub csv_path: PathBuf,
    /// One row per (D, A, repetition).
    pub data_rows: usize,
    /// One mean row per (D, A).
    pub mean_rows: usize,
}

fn sanitize_cell(msg: &str) -> String {
    msg.replace(',', ";").replace('\n', " ")
}

/// Runs the full pipeline per (D, A, repetition) with distinct derived RNG
/// seeds and collects (face count, total length, delta_max, lambda_lin) rows
/// plus per-(D, A) means. Individual run failures are recorded in their row
/// and the sweep continues.
pub fn sweep(
    template: &PipelineConfig,
    d_values: &[f64],
    a_values: &[f64],
    repetitions: usize,
) -> Result<SweepOutcome> {
    if d_values.is_empty() {
        return Err(Error::Parameter {
            name: "d_values",
            msg: "sweep needs at least one density value".into(),
        });
    }
    if a_values.is_empty() {
        return Err(Error::Parameter {
            name: "a_values",
            msg: "sweep needs at least one anisotropy value".into(),
        });
    }
    if repetitions == 0 {
        return Err(Error::Parameter {
            name: "repetitions",
            msg: "sweep needs at least one repetition".into(),
        });
    }
    let mut csv = String::from("d,a,rep,faces,total_length_m,delta_max_m,lambda_lin,status\n");
    let mut data_rows = 0;
    let mut mean_rows = 0;
    for (di, &d) in d_values.iter().enumerate() {
        for (ai, &a) in a_values.iter().enumerate() {
            let mut ok_runs = 0usize;
            let mut sum_faces = 0.0;
            let mut sum_len = 0.0;
            let mut sum_delta = 0.0;
            let mut sum_lambda = 0.0;
            for rep in 0..repetitions {
                let linear = ((di * a_values.len()) + ai) * repetitions + rep;
                let mut cfg = template.clone();
                cfg.density = d;
                cfg.anisotropy = a;
                cfg.rng_seed = template
                    .rng_seed
                    .wrapping_add((linear as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                cfg.output_dir = template
                    .output_dir
                    .join(format!("run_d{d}_a{a}_rep{rep}"));
                match run_pipeline(&cfg) {
                    Ok(artifacts) => {
                        let faces = artifacts.gridshell.faces.len();
                        let len = artifacts.report.total_length;
                        let delta = artifacts.report.delta_max;
                        let lambda = artifacts.report.lambda_lin.unwrap_or(f64::INFINITY);
                        ok_runs += 1;
                        sum_faces += faces as f64;
                        sum_len += len;
                        sum_delta += delta;
                        sum_lambda += lambda;
                        csv.push_str(&format!(
                            "{d},{a},{rep},{faces},{len:.17e},{delta:.17e},{lambda:.17e},ok\n"
                        ));
                    }
                    Err(e) => {
                        csv.push_str(&format!("{d},{a},{rep},,,,,{}\n", sanitize_cell(&e.to_string())));
                    }
                }
                data_rows += 1;
            }
            if ok_runs > 0 {
                let n = ok_runs as f64;
                csv.push_str(&format!(
                    "{d},{a},mean,{:.17e},{:.17e},{:.17e},{:.17e},ok over {ok_runs} runs\n",
                    sum_faces / n,
                    sum_len / n,
                    sum_delta / n,
                    sum_lambda / n
                ));
            } else {
                csv.push_str(&format!("{d},{a},mean,,,,,no successful runs\n"));
            }
            mean_rows += 1;
        }
    }
    fs::create_dir_all(&template.output_dir).map_err(|source| Error::Io {
        path: template.output_dir.clone(),
        source,
    })?;
    let csv_path = template.output_dir.join("sweep.csv");
    write_text(&csv_path, &csv)?;
    Ok(SweepOutcome {
        csv,
        csv_path,
        data_rows,
        mean_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::flat_grid;
    use nalgebra::{Point3, Vector3};

    fn fixture_config(dir: &Path, nx: usize, side: f64) -> PipelineConfig {
        let mesh = flat_grid(nx, nx, side, side);
        let input = dir.join("input.obj");
        mesh::save_obj(&mesh, &input).unwrap();
        PipelineConfig {
            schema_version: 1,
            input,
            output_dir: dir.join("out"),
            density: 1.0,
            anisotropy: 1.0,
            radius: 1.0,
            rng_seed: 7,
            symmetry_planes: Vec::new(),
            corner_threshold_deg: 30.0,
            smoothness_weight: 1.0,
            lipschitz: None,
            symmetry_tolerance: None,
            weld_tolerance: None,
            regularizer: RegularizerConfig::default(),
            analysis: AnalysisConfig::default(),
            section_diameter: 0.037,
            eval_load_density: 1000.0,
            target_total_length: None,
        }
    }

    #[test]
    fn flat_square_isotropic_run_emits_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = fixture_config(dir.path(), 16, 4.0);
        let artifacts = run_pipeline(&cfg).unwrap();
        for name in [
            "field.json",
            "deformed.obj",
            "genealogy.json",
            "gridshell.obj",
            "metrics.csv",
            "report.json",
            "axial.csv",
        ] {
            let path = cfg.output_dir.join(name);
            assert!(path.is_file(), "missing artifact {name}");
        }
        assert!(artifacts.gridshell.faces.len() > 4);
        assert!(artifacts.report.delta_max > 0.0);
        assert_eq!(artifacts.radius_used, 1.0);
        let text = fs::read_to_string(cfg.output_dir.join("report.json")).unwrap();
        let report: EvalReport = serde_json::from_str(&text).unwrap();
        assert_eq!(report.schema_version, 1);
    }

    #[test]
    fn identical_config_gives_byte_identical_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = fixture_config(dir.path(), 14, 4.0);
        run_pipeline(&cfg).unwrap();
        let first: Vec<Vec<u8>> = ["gridshell.obj", "report.json", "field.json"]
            .iter()
            .map(|n| fs::read(cfg.output_dir.join(n)).unwrap())
            .collect();
        cfg.output_dir = dir.path().join("out2");
        run_pipeline(&cfg).unwrap();
        let second: Vec<Vec<u8>> = ["gridshell.obj", "report.json", "field.json"]
            .iter()
            .map(|n| fs::read(cfg.output_dir.join(n)).unwrap())
            .collect();
        assert_eq!(first, second);
    }

    #[test]
    fn density_four_yields_strictly_more_faces() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = fixture_config(dir.path(), 14, 4.0);
        let base = run_pipeline(&cfg).unwrap().gridshell.faces.len();
        cfg.density = 4.0;
        cfg.output_dir = dir.path().join("out_d4");
        let dense = run_pipeline(&cfg).unwrap().gridshell.faces.len();
        assert!(
            dense > base,
            "expected more faces at D=4 ({dense}) than at D=1 ({base})"
        );
    }

    #[test]
    fn sector_input_is_welded_into_the_full_tessellation() {
        // Right half x in [2, 4] of a 4 x 4 square; symmetry plane x = 2.
        let dir = tempfile::tempdir().unwrap();
        let mut mesh = flat_grid(9, 17, 2.0, 4.0);
        for p in &mut mesh.positions {
            p.x += 2.0;
        }
        let input = dir.path().join("half.obj");
        mesh::save_obj(&mesh, &input).unwrap();
        let mut cfg = fixture_config(dir.path(), 8, 1.0);
        cfg.input = input;
        cfg.radius = 0.9;
        cfg.symmetry_planes = vec![SymmetryPlane::new(
            Point3::new(2.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
        )];
        let artifacts = run_pipeline(&cfg).unwrap();
        assert!(
            artifacts.warnings.iter().any(|w| w.contains("sector")),
            "warnings: {:?}",
            artifacts.warnings
        );
        let xs: Vec<f64> = artifacts.gridshell.positions.iter().map(|p| p.x).collect();
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo < 0.5, "weld did not extend across the plane (min x {lo})");
        assert!(hi > 3.5);
        for (_, faces) in artifacts.gridshell.edge_faces() {
            assert!(faces.len() <= 2);
        }
    }

    #[test]
    fn bisection_matches_target_total_length() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = fixture_config(dir.path(), 12, 3.0);
        cfg.radius = 0.8;
        let base_len = run_pipeline(&cfg).unwrap().report.total_length;
        // Restart from a deliberately wrong radius and ask for the same
        // length back.
        cfg.radius = 1.6;
        cfg.target_total_length = Some(base_len);
        cfg.output_dir = dir.path().join("out_bisect");
        let artifacts = run_pipeline(&cfg).unwrap();
        let rel = (artifacts.report.total_length - base_len).abs() / base_len;
        assert!(rel <= 0.05, "length off target by {rel:.3}");
        assert!(artifacts.radius_used != 1.6);
    }

    #[test]
    fn sweep_emits_expected_rows() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = fixture_config(dir.path(), 12, 3.0);
        let outcome = sweep(&cfg, &[1.0], &[1.0], 3).unwrap();
        assert_eq!(outcome.data_rows, 3);
        assert_eq!(outcome.mean_rows, 1);
        let lines: Vec<&str> = outcome.csv.lines().collect();
        assert_eq!(lines.len(), 1 + 3 + 1);
        assert_eq!(
            lines[0],
            "d,a,rep,faces,total_length_m,delta_max_m,lambda_lin,status"
        );
        assert!(lines[4].starts_with("1,1,mean,"));
        assert!(outcome.csv_path.is_file());
        for rep in 0..3 {
            assert!(lines[1 + rep].ends_with(",ok"));
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = fixture_config(dir.path(), 8, 2.0);
        cfg.density = 0.5;
        match run_pipeline(&cfg) {
            Err(Error::Parameter { name, .. }) => assert_eq!(name, "density"),
            other => panic!("expected parameter error, got {other:?}"),
        }
        cfg.density = 1.0;
        match sweep(&cfg, &[1.0], &[], 3) {
            Err(Error::Parameter { name, .. }) => assert_eq!(name, "a_values"),
            other => panic!("expected parameter error, got {other:?}"),
        }
    }

    #[test]
    fn missing_input_is_tagged_with_the_analyze_stage() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = fixture_config(dir.path(), 8, 2.0);
        cfg.input = dir.path().join("nope.obj");
        let err = run_pipeline(&cfg).unwrap_err();
        assert_eq!(err.stage(), Some("analyze"));
    }

    #[test]
    fn symmetric_detection_distinguishes_full_and_sector_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = fixture_config(dir.path(), 8, 2.0);
        let grid = flat_grid(9, 9, 2.0, 2.0);
        assert!(!input_is_symmetric(&grid, &cfg).unwrap(), "no planes");
        // Mid plane x = 1: the uniform grid reflects onto itself.
        cfg.symmetry_planes = vec![SymmetryPlane::new(
            Point3::new(1.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
        )];
        assert!(input_is_symmetric(&grid, &cfg).unwrap());
        // Boundary plane x = 2: the reflection leaves the surface.
        cfg.symmetry_planes = vec![SymmetryPlane::new(
            Point3::new(2.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
        )];
        assert!(!input_is_symmetric(&grid, &cfg).unwrap());
    }

    #[test]
    fn config_json_round_trips_and_fills_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = fixture_config(dir.path(), 8, 2.0);
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: PipelineConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.radius, cfg.radius);
        assert_eq!(back.rng_seed, cfg.rng_seed);
        let minimal = r#"{
            "input": "in.obj",
            "output_dir": "out",
            "density": 2.0,
            "anisotropy": 1.5,
            "radius": 0.5,
            "rng_seed": 3
        }"#;
        let parsed: PipelineConfig = serde_json::from_str(minimal).unwrap();
        assert_eq!(parsed.schema_version, 1);
        assert_eq!(parsed.corner_threshold_deg, 30.0);
        assert_eq!(parsed.section_diameter, 0.037);
        assert!(parsed.symmetry_planes.is_empty());
        assert_eq!(parsed.eval_load_density, 1000.0);
    }
}
