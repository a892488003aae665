//! Structural evaluation of grid-shells as 3D frames.
//!
//! A [`FrameModel`] puts one joint at every polygon-mesh vertex and one beam
//! on every edge, pins the boundary, and loads each joint in proportion to
//! the area of its incident faces. Statics use standard 12x12 Euler-Bernoulli
//! space-frame elements (6 DOF per joint) and a banded Cholesky solve on an
//! RCM-reordered stiffness matrix. Stability is summarized by a *linearized*
//! buckling multiplier: the smallest positive generalized eigenvalue of
//! `(K + lambda K_g) phi = 0` with the geometric stiffness `K_g` assembled
//! from the static axial forces. The multiplier is labeled "linearized" in
//! every output; it is not a nonlinear collapse analysis.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix3, Point3, SMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::mesh::PolyMesh;
use crate::shell::Material;
use crate::sparse::{banded_cholesky, lanczos_generalized, reverse_cuthill_mckee, Csr, FactorOutcome};
use crate::{Error, Result};

/// Degrees of freedom per joint: translations x, y, z then rotations x, y, z.
pub const DOFS_PER_JOINT: usize = 6;

/// Relative pivot threshold below which the factorization reports a
/// mechanism. Healthy frames keep pivots many orders of magnitude above this.
const PIVOT_REL_TOL: f64 = 1e-13;

const DOF_NAMES: [&str; 6] = [
    "translation x",
    "translation y",
    "translation z",
    "rotation about x",
    "rotation about y",
    "rotation about z",
];

/// A 3D frame: joints, beams with one shared circular solid section, pinned
/// supports, and nodal loads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameModel {
    /// Joint positions in meters.
    pub joints: Vec<Point3<f64>>,
    /// Beams as joint index pairs; no duplicates, positive length.
    pub beams: Vec<(usize, usize)>,
    /// Circular solid section diameter in meters, shared by all beams.
    pub diameter: f64,
    pub material: Material,
    /// Pinned joints: all three translations fixed, rotations free.
    pub supports: BTreeSet<usize>,
    /// Additional fixed degrees of freedom as (joint, dof index 0..6) pairs;
    /// the escape hatch for clamped or roller configurations (test hooks and
    /// special studies). Dof indices follow [`DOF_NAMES`].
    pub extra_fixed: BTreeSet<(usize, u8)>,
    /// Nodal force vectors in newtons, one per joint.
    pub loads: Vec<Vector3<f64>>,
}

impl FrameModel {
    /// Cross-section area, pi d^2 / 4.
    pub fn section_area(&self) -> f64 {
        PI * self.diameter * self.diameter / 4.0
    }

    /// Second moment of area about any section axis, pi d^4 / 64.
    pub fn section_second_moment(&self) -> f64 {
        PI * self.diameter.powi(4) / 64.0
    }

    /// Polar moment of area, pi d^4 / 32.
    pub fn section_polar_moment(&self) -> f64 {
        PI * self.diameter.powi(4) / 32.0
    }

    pub fn beam_length(&self, e: usize) -> f64 {
        let (a, b) = self.beams[e];
        (self.joints[b] - self.joints[a]).norm()
    }

    /// Total beam length in meters.
    pub fn total_length(&self) -> f64 {
        (0..self.beams.len()).map(|e| self.beam_length(e)).sum()
    }

    /// Total beam mass in kilograms (length x area x density).
    pub fn total_mass(&self) -> f64 {
        self.total_length() * self.section_area() * self.material.density
    }

    fn validate(&self) -> Result<()> {
        let nj = self.joints.len();
        if !(self.diameter > 0.0) {
            return Err(Error::Parameter {
                name: "diameter",
                msg: format!("section diameter must be positive, got {}", self.diameter),
            });
        }
        if self.loads.len() != nj {
            return Err(Error::Parameter {
                name: "loads",
                msg: format!("{} load vectors for {} joints", self.loads.len(), nj),
            });
        }
        let mut seen = BTreeSet::new();
        for (e, &(a, b)) in self.beams.iter().enumerate() {
            if a >= nj || b >= nj || a == b {
                return Err(Error::Parameter {
                    name: "beams",
                    msg: format!("beam {e} joins invalid joints ({a}, {b})"),
                });
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::Parameter {
                    name: "beams",
                    msg: format!("duplicate beam ({a}, {b})"),
                });
            }
            if !(self.beam_length(e) > 0.0) {
                return Err(Error::Parameter {
                    name: "beams",
                    msg: format!("beam {e} has zero length"),
                });
            }
        }
        for &s in &self.supports {
            if s >= nj {
                return Err(Error::Parameter {
                    name: "supports",
                    msg: format!("support joint {s} out of range"),
                });
            }
        }
        for &(j, c) in &self.extra_fixed {
            if j >= nj || c as usize >= DOFS_PER_JOINT {
                return Err(Error::Parameter {
                    name: "extra_fixed",
                    msg: format!("fixed dof ({j}, {c}) out of range"),
                });
            }
        }
        if self.supports.is_empty() && self.extra_fixed.is_empty() {
            return Err(Error::Parameter {
                name: "supports",
                msg: "model has no constrained degrees of freedom".into(),
            });
        }
        Ok(())
    }
}

/// Result of the linear static solve.
#[derive(Debug, Clone)]
pub struct StaticSolution {
    /// Six generalized displacements per joint: translations (m) then
    /// rotations (rad).
    pub dofs: Vec<[f64; 6]>,
    /// Axial force per beam in newtons, tension positive.
    pub axial: Vec<f64>,
    /// Reaction forces and moments at constrained DOFs (zero elsewhere).
    pub reactions: Vec<[f64; 6]>,
    /// Maximum joint translation norm in meters.
    pub delta_max: f64,
}

/// Evaluation summary serialized as JSON. `lambda_lin` is `null` when no
/// positive buckling eigenvalue exists (tension-dominated structure); the
/// `lambda_lin_unbounded` flag then reads true, meaning "+infinity".
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    /// Maximum joint displacement norm, meters.
    pub delta_max: f64,
    /// Linearized buckling multiplier; `None` encodes +infinity.
    pub lambda_lin: Option<f64>,
    pub lambda_lin_unbounded: bool,
    /// Always "linearized": this is an eigenvalue estimate, not a nonlinear
    /// collapse analysis, and is not comparable to nonlinear multipliers.
    pub lambda_kind: String,
    /// Total beam length, meters.
    pub total_length: f64,
    /// Total beam mass, kilograms.
    pub total_mass: f64,
    /// Per-joint translation vectors, meters.
    pub displacements: Vec<[f64; 3]>,
}

/// Equivalence check between two frames under the 5% tolerance on both total
/// length and total mass. Model `a` is the reference for relative differences.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub total_length_a: f64,
    pub total_length_b: f64,
    pub total_mass_a: f64,
    pub total_mass_b: f64,
    pub length_rel_diff: f64,
    pub mass_rel_diff: f64,
    pub tolerance: f64,
    pub pass: bool,
}

// ---------------------------------------------------------------------------
// Model construction

fn face_area_fan(mesh: &PolyMesh, f: usize) -> f64 {
    let c = mesh.face_centroid(f);
    let face = &mesh.faces[f];
    let n = face.len();
    (0..n)
        .map(|k| {
            let u = mesh.positions[face[k]] - c;
            let v = mesh.positions[face[(k + 1) % n]] - c;
            0.5 * u.cross(&v).norm()
        })
        .sum()
}

/// Builds a frame from a polygon mesh: one joint per vertex, one beam per
/// edge, boundary vertices pinned, and each joint loaded along -Z with
/// `load_density` (N/m^2) times its tributary area (an equal share of every
/// incident face's area, measured by fan triangulation from the centroid).
pub fn build_frame(
    mesh: &PolyMesh,
    section_diameter: f64,
    material: Material,
    load_density: f64,
) -> Result<FrameModel> {
    if !(section_diameter > 0.0) {
        return Err(Error::Parameter {
            name: "section_diameter",
            msg: format!("must be positive, got {section_diameter}"),
        });
    }
    if !load_density.is_finite() {
        return Err(Error::Parameter {
            name: "load_density",
            msg: format!("must be finite, got {load_density}"),
        });
    }
    let supports: BTreeSet<usize> = mesh.boundary_vertices().into_iter().collect();
    if supports.is_empty() {
        return Err(Error::NoBoundary);
    }
    let mut tributary = vec![0.0; mesh.positions.len()];
    for f in 0..mesh.faces.len() {
        let share = face_area_fan(mesh, f) / mesh.faces[f].len() as f64;
        for &v in &mesh.faces[f] {
            tributary[v] += share;
        }
    }
    let loads = tributary
        .iter()
        .map(|&a| Vector3::new(0.0, 0.0, -load_density * a))
        .collect();
    let model = FrameModel {
        joints: mesh.positions.clone(),
        beams: mesh.edges(),
        diameter: section_diameter,
        material,
        supports,
        extra_fixed: BTreeSet::new(),
        loads,
    };
    model.validate()?;
    Ok(model)
}

// ---------------------------------------------------------------------------
// Elements

/// Rows of the returned matrix are the local axes (x along the beam), so it
/// maps global to local coordinates. For circular sections any perpendicular
/// pair works; the reference axis only needs to be deterministic.
fn local_frame(axis: Vector3<f64>) -> Matrix3<f64> {
    let x = axis.normalize();
    let reference = if x.z.abs() < 0.9 {
        Vector3::z()
    } else {
        Vector3::x()
    };
    let y = reference.cross(&x).normalize();
    let z = x.cross(&y);
    Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()])
}

fn block_rotation(r: &Matrix3<f64>) -> SMatrix<f64, 12, 12> {
    let mut t = SMatrix::<f64, 12, 12>::zeros();
    for b in 0..4 {
        for i in 0..3 {
            for j in 0..3 {
                t[(3 * b + i, 3 * b + j)] = r[(i, j)];
            }
        }
    }
    t
}

fn set_sym(k: &mut SMatrix<f64, 12, 12>, i: usize, j: usize, v: f64) {
    k[(i, j)] = v;
    if i != j {
        k[(j, i)] = v;
    }
}

/// Fills one bending plane of the element stiffness. `s` is +1 for the
/// (u_y, theta_z) plane and -1 for the (u_z, theta_y) plane, where the
/// rotation sign convention mirrors the coupling terms.
fn fill_bending(k: &mut SMatrix<f64, 12, 12>, dofs: [usize; 4], ei: f64, len: f64, s: f64) {
    let [d1, r1, d2, r2] = dofs;
    let c1 = 12.0 * ei / len.powi(3);
    let c2 = 6.0 * ei / (len * len);
    let c3 = 4.0 * ei / len;
    let c4 = 2.0 * ei / len;
    set_sym(k, d1, d1, c1);
    set_sym(k, d1, r1, s * c2);
    set_sym(k, d1, d2, -c1);
    set_sym(k, d1, r2, s * c2);
    set_sym(k, r1, r1, c3);
    set_sym(k, r1, d2, -s * c2);
    set_sym(k, r1, r2, c4);
    set_sym(k, d2, d2, c1);
    set_sym(k, d2, r2, -s * c2);
    set_sym(k, r2, r2, c3);
}

/// 12x12 elastic stiffness of beam `e` in global coordinates.
fn element_elastic(model: &FrameModel, e: usize) -> SMatrix<f64, 12, 12> {
    let (a, b) = model.beams[e];
    let axis = model.joints[b] - model.joints[a];
    let len = axis.norm();
    let e_mod = model.material.youngs;
    let g_mod = e_mod / (2.0 * (1.0 + model.material.poisson));
    let ea = e_mod * model.section_area() / len;
    let gj = g_mod * model.section_polar_moment() / len;
    let ei = e_mod * model.section_second_moment();
    let mut k = SMatrix::<f64, 12, 12>::zeros();
    set_sym(&mut k, 0, 0, ea);
    set_sym(&mut k, 0, 6, -ea);
    set_sym(&mut k, 6, 6, ea);
    set_sym(&mut k, 3, 3, gj);
    set_sym(&mut k, 3, 9, -gj);
    set_sym(&mut k, 9, 9, gj);
    fill_bending(&mut k, [1, 5, 7, 11], ei, len, 1.0);
    fill_bending(&mut k, [2, 4, 8, 10], ei, len, -1.0);
    let t = block_rotation(&local_frame(axis));
    t.transpose() * k * t
}

fn fill_geometric(g: &mut SMatrix<f64, 12, 12>, dofs: [usize; 4], scale: f64, len: f64, s: f64) {
    let [d1, r1, d2, r2] = dofs;
    set_sym(g, d1, d1, scale * 36.0);
    set_sym(g, d1, r1, scale * s * 3.0 * len);
    set_sym(g, d1, d2, scale * -36.0);
    set_sym(g, d1, r2, scale * s * 3.0 * len);
    set_sym(g, r1, r1, scale * 4.0 * len * len);
    set_sym(g, r1, d2, scale * -s * 3.0 * len);
    set_sym(g, r1, r2, scale * -len * len);
    set_sym(g, d2, d2, scale * 36.0);
    set_sym(g, d2, r2, scale * -s * 3.0 * len);
    set_sym(g, r2, r2, scale * 4.0 * len * len);
}

/// 12x12 consistent geometric stiffness of beam `e` for axial force `n`
/// (tension positive), in global coordinates.
fn element_geometric(model: &FrameModel, e: usize, n: f64) -> SMatrix<f64, 12, 12> {
    let (a, b) = model.beams[e];
    let axis = model.joints[b] - model.joints[a];
    let len = axis.norm();
    let scale = n / (30.0 * len);
    let mut g = SMatrix::<f64, 12, 12>::zeros();
    fill_geometric(&mut g, [1, 5, 7, 11], scale, len, 1.0);
    fill_geometric(&mut g, [2, 4, 8, 10], scale, len, -1.0);
    let t = block_rotation(&local_frame(axis));
    t.transpose() * g * t
}

// ---------------------------------------------------------------------------
// DOF bookkeeping and assembly

struct DofMap {
    /// Reduced index per global scalar dof, `None` when constrained.
    reduced: Vec<Option<usize>>,
    /// Global scalar dof per reduced index.
    full: Vec<usize>,
}

impl DofMap {
    fn n_free(&self) -> usize {
        self.full.len()
    }
}

fn dof_map(model: &FrameModel) -> DofMap {
    let nj = model.joints.len();
    let mut fixed = vec![false; DOFS_PER_JOINT * nj];
    for &s in &model.supports {
        for c in 0..3 {
            fixed[DOFS_PER_JOINT * s + c] = true;
        }
    }
    for &(j, c) in &model.extra_fixed {
        fixed[DOFS_PER_JOINT * j + c as usize] = true;
    }
    let mut adj = vec![BTreeSet::new(); nj];
    for &(a, b) in &model.beams {
        adj[a].insert(b);
        adj[b].insert(a);
    }
    let adj: Vec<Vec<usize>> = adj.into_iter().map(|s| s.into_iter().collect()).collect();
    let order = reverse_cuthill_mckee(&adj);
    let mut reduced = vec![None; DOFS_PER_JOINT * nj];
    let mut full = Vec::new();
    for &j in &order {
        for c in 0..DOFS_PER_JOINT {
            let g = DOFS_PER_JOINT * j + c;
            if !fixed[g] {
                reduced[g] = Some(full.len());
                full.push(g);
            }
        }
    }
    DofMap { reduced, full }
}

fn element_global_dofs(model: &FrameModel, e: usize) -> [usize; 12] {
    let (a, b) = model.beams[e];
    let mut dofs = [0; 12];
    for c in 0..6 {
        dofs[c] = DOFS_PER_JOINT * a + c;
        dofs[6 + c] = DOFS_PER_JOINT * b + c;
    }
    dofs
}

/// Assembles element matrices into the reduced system; returns the matrix and
/// the exact bandwidth of its sparsity pattern.
fn assemble_reduced(
    model: &FrameModel,
    dm: &DofMap,
    elements: &[SMatrix<f64, 12, 12>],
) -> (Csr, usize) {
    let mut trips = Vec::new();
    let mut bw = 0;
    for (e, ke) in elements.iter().enumerate() {
        let gdofs = element_global_dofs(model, e);
        for i in 0..12 {
            let Some(ri) = dm.reduced[gdofs[i]] else {
                continue;
            };
            for j in 0..12 {
                let Some(rj) = dm.reduced[gdofs[j]] else {
                    continue;
                };
                trips.push((ri, rj, ke[(i, j)]));
                bw = bw.max(ri.abs_diff(rj));
            }
        }
    }
    (Csr::from_triplets(dm.n_free(), &trips), bw)
}

fn mechanism_error(dm: &DofMap, row: usize, pivot: f64, reference: f64) -> Error {
    let g = dm.full[row];
    Error::Mechanism {
        hint: format!(
            "zero-energy mode involving joint {} {} (stiffness pivot {:.3e} against reference \
             {:.3e}); check supports and connectivity",
            g / DOFS_PER_JOINT,
            DOF_NAMES[g % DOFS_PER_JOINT],
            pivot,
            reference
        ),
    }
}

// ---------------------------------------------------------------------------
// Solves

/// Solves the linear static problem. Pinned supports constrain translations
/// only; `extra_fixed` DOFs are eliminated as well. A singular stiffness
/// matrix is reported as a mechanism naming the first zero-pivot DOF.
pub fn solve_linear_static(model: &FrameModel) -> Result<StaticSolution> {
    model.validate()?;
    let nj = model.joints.len();
    let dm = dof_map(model);
    let elements: Vec<SMatrix<f64, 12, 12>> =
        (0..model.beams.len()).map(|e| element_elastic(model, e)).collect();

    let mut f = vec![0.0; DOFS_PER_JOINT * nj];
    for (j, load) in model.loads.iter().enumerate() {
        f[DOFS_PER_JOINT * j] = load.x;
        f[DOFS_PER_JOINT * j + 1] = load.y;
        f[DOFS_PER_JOINT * j + 2] = load.z;
    }

    let mut u = vec![0.0; DOFS_PER_JOINT * nj];
    if dm.n_free() > 0 {
        let (k, bw) = assemble_reduced(model, &dm, &elements);
        let rhs: Vec<f64> = dm.full.iter().map(|&g| f[g]).collect();
        match banded_cholesky(&k, bw, PIVOT_REL_TOL) {
            FactorOutcome::SingularPivot {
                row,
                pivot,
                reference,
            } => return Err(mechanism_error(&dm, row, pivot, reference)),
            FactorOutcome::Factored(chol) => {
                let x = chol.solve(&rhs);
                for (r, &g) in dm.full.iter().enumerate() {
                    u[g] = x[r];
                }
            }
        }
    }

    // Internal forces K u accumulated per element give reactions at the
    // constrained DOFs (applied loads there are carried straight through).
    let mut acc = vec![0.0; DOFS_PER_JOINT * nj];
    let mut axial = Vec::with_capacity(model.beams.len());
    for (e, ke) in elements.iter().enumerate() {
        let gdofs = element_global_dofs(model, e);
        let mut ue = SMatrix::<f64, 12, 1>::zeros();
        for i in 0..12 {
            ue[i] = u[gdofs[i]];
        }
        let fe = ke * ue;
        for i in 0..12 {
            acc[gdofs[i]] += fe[i];
        }
        let (a, b) = model.beams[e];
        let axis = (model.joints[b] - model.joints[a]).normalize();
        let da = Vector3::new(u[6 * a], u[6 * a + 1], u[6 * a + 2]);
        let db = Vector3::new(u[6 * b], u[6 * b + 1], u[6 * b + 2]);
        let stretch = (db - da).dot(&axis);
        axial.push(model.material.youngs * model.section_area() / model.beam_length(e) * stretch);
    }

    let mut dofs = Vec::with_capacity(nj);
    let mut reactions = vec![[0.0; 6]; nj];
    let mut delta_max = 0.0_f64;
    for j in 0..nj {
        let mut d = [0.0; 6];
        for c in 0..6 {
            let g = DOFS_PER_JOINT * j + c;
            d[c] = u[g];
            if dm.reduced[g].is_none() {
                reactions[j][c] = acc[g] - f[g];
            }
        }
        delta_max = delta_max.max(Vector3::new(d[0], d[1], d[2]).norm());
        dofs.push(d);
    }
    Ok(StaticSolution {
        dofs,
        axial,
        reactions,
        delta_max,
    })
}

/// Estimates the linearized buckling multiplier: the smallest positive
/// `lambda` with `(K + lambda K_g) phi = 0`, `K_g` assembled from the static
/// axial forces. Returns `None` (read: +infinity) when no positive eigenvalue
/// exists, e.g. for tension-dominated or unloaded frames.
pub fn estimate_linear_buckling(
    model: &FrameModel,
    solution: &StaticSolution,
) -> Result<Option<f64>> {
    model.validate()?;
    if solution.axial.len() != model.beams.len() {
        return Err(Error::Parameter {
            name: "solution",
            msg: format!(
                "{} axial forces for {} beams",
                solution.axial.len(),
                model.beams.len()
            ),
        });
    }
    let max_axial = solution.axial.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
    if max_axial == 0.0 {
        return Ok(None);
    }
    let dm = dof_map(model);
    if dm.n_free() == 0 {
        return Ok(None);
    }
    let elastic: Vec<SMatrix<f64, 12, 12>> =
        (0..model.beams.len()).map(|e| element_elastic(model, e)).collect();
    // B = -K_g, so compressive members contribute positively and the target
    // eigenvalue becomes the largest of K^{-1} B.
    let geometric: Vec<SMatrix<f64, 12, 12>> = (0..model.beams.len())
        .map(|e| -element_geometric(model, e, solution.axial[e]))
        .collect();
    let (k, bw) = assemble_reduced(model, &dm, &elastic);
    let (b, _) = assemble_reduced(model, &dm, &geometric);
    let chol = match banded_cholesky(&k, bw, PIVOT_REL_TOL) {
        FactorOutcome::SingularPivot {
            row,
            pivot,
            reference,
        } => return Err(mechanism_error(&dm, row, pivot, reference)),
        FactorOutcome::Factored(c) => c,
    };
    let n = dm.n_free();
    let ritz = lanczos_generalized(
        n,
        |q| Ok(chol.solve(&b.matvec(q))),
        |x, y| {
            let ky = k.matvec(y);
            x.iter().zip(&ky).map(|(a, b)| a * b).sum()
        },
        120,
    )?;
    let mu_scale = ritz.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    let mu_max = ritz.last().copied().unwrap_or(0.0);
    if mu_max > 1e-10 * mu_scale && mu_max > 0.0 {
        Ok(Some(1.0 / mu_max))
    } else {
        Ok(None)
    }
}

/// Full evaluation: static solve plus linearized buckling, summarized in an
/// [`EvalReport`].
pub fn evaluate(model: &FrameModel) -> Result<EvalReport> {
    let solution = solve_linear_static(model)?;
    let lambda = estimate_linear_buckling(model, &solution)?;
    Ok(EvalReport {
        schema_version: 1,
        delta_max: solution.delta_max,
        lambda_lin: lambda,
        lambda_lin_unbounded: lambda.is_none(),
        lambda_kind: "linearized".to_string(),
        total_length: model.total_length(),
        total_mass: model.total_mass(),
        displacements: solution
            .dofs
            .iter()
            .map(|d| [d[0], d[1], d[2]])
            .collect(),
    })
}

/// Compares total length and total mass of two frames; passes when both
/// relative differences (against model `a`) stay within 5%.
pub fn check_equivalence(a: &FrameModel, b: &FrameModel) -> EquivalenceReport {
    let rel = |x: f64, y: f64| {
        if x == 0.0 {
            if y == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (y - x).abs() / x.abs()
        }
    };
    let (la, lb) = (a.total_length(), b.total_length());
    let (ma, mb) = (a.total_mass(), b.total_mass());
    let (ld, md) = (rel(la, lb), rel(ma, mb));
    let tolerance = 0.05;
    EquivalenceReport {
        total_length_a: la,
        total_length_b: lb,
        total_mass_a: ma,
        total_mass_b: mb,
        length_rel_diff: ld,
        mass_rel_diff: md,
        tolerance,
        pass: ld <= tolerance && md <= tolerance,
    }
}

/// Serializes an [`EvalReport`] as pretty JSON.
pub fn report_json(report: &EvalReport) -> String {
    serde_json::to_string_pretty(report).expect("EvalReport serializes")
}

/// Per-beam axial forces as CSV (tension positive).
pub fn axial_forces_csv(model: &FrameModel, solution: &StaticSolution) -> String {
    let mut out = String::from("beam,joint_a,joint_b,length_m,axial_n\n");
    for (e, &(a, b)) in model.beams.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{:.17e},{:.17e}\n",
            e,
            a,
            b,
            model.beam_length(e),
            solution.axial[e]
        ));
    }
    out
}

/// Dense reduced stiffness matrix (free DOFs only). Intended for diagnostics
/// and spectral checks on small fixtures.
pub fn reduced_stiffness_dense(model: &FrameModel) -> Result<DMatrix<f64>> {
    model.validate()?;
    let dm = dof_map(model);
    let elements: Vec<SMatrix<f64, 12, 12>> =
        (0..model.beams.len()).map(|e| element_elastic(model, e)).collect();
    let n = dm.n_free();
    let mut dense = DMatrix::<f64>::zeros(n, n);
    for (e, ke) in elements.iter().enumerate() {
        let gdofs = element_global_dofs(model, e);
        for i in 0..12 {
            let Some(ri) = dm.reduced[gdofs[i]] else {
                continue;
            };
            for j in 0..12 {
                let Some(rj) = dm.reduced[gdofs[j]] else {
                    continue;
                };
                dense[(ri, rj)] += ke[(i, j)];
            }
        }
    }
    Ok(dense)
}
