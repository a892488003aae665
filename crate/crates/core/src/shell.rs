//! Plane-stress membrane FEM on the input surface.
//!
//! Constant-strain triangles assembled in per-triangle tangent bases with
//! three translational DOFs per vertex. The element has no bending stiffness,
//! so a weak edge-spring regularization (relative magnitude `stabilization`)
//! keeps the out-of-plane direction solvable on flat or developable meshes.
//! The springs act between vertices (internal forces), so global equilibrium
//! is unaffected; their stiffness is far below the discretization error.

use nalgebra::{Matrix2, Matrix3, Point2, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::field::PsiField;
use crate::mesh::TriMesh;
use crate::sparse::{pcg, Csr, Precond};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Material {
    /// Young's modulus, Pa.
    pub youngs: f64,
    /// Poisson ratio.
    pub poisson: f64,
    /// Mass density, kg/m^3.
    pub density: f64,
}

impl Material {
    pub fn steel() -> Material {
        Material {
            youngs: 210e9,
            poisson: 0.3,
            density: 7850.0,
        }
    }
}

/// Load applied to the shell.
#[derive(Debug, Clone)]
pub enum LoadCase {
    /// Pressure (N/m^2) acting along global -Z, weighted by each triangle's
    /// plan (projected) area: the "uniform projected load".
    ProjectedPressure { pressure: f64 },
    /// Line traction (N per meter of edge) along `direction`, applied to the
    /// listed boundary edges. Test hook for patch tests.
    BoundaryTraction {
        edges: Vec<(usize, usize)>,
        direction: Vector3<f64>,
        force_per_length: f64,
    },
}

/// Which translational DOFs are fixed.
#[derive(Debug, Clone)]
pub enum SupportRule {
    /// Pin (fix all three translations of) every boundary vertex.
    BoundaryPinned,
    /// Explicit per-vertex component masks; `true` means fixed.
    Custom(Vec<(usize, [bool; 3])>),
}

#[derive(Debug, Clone)]
pub struct ShellConfig {
    pub material: Material,
    /// Shell thickness, m.
    pub thickness: f64,
    pub load: LoadCase,
    pub supports: SupportRule,
    /// Relative residual tolerance for the CG solve.
    pub solver_tol: f64,
    /// CG iteration cap; 0 means 40 * ndof.
    pub solver_max_iters: usize,
    /// Edge-spring stiffness relative to E * t. Keeps the normal direction
    /// nonsingular; small enough to stay below discretization error.
    pub stabilization: f64,
}

impl Default for ShellConfig {
    fn default() -> Self {
        ShellConfig {
            material: Material::steel(),
            thickness: 0.01,
            load: LoadCase::ProjectedPressure { pressure: 1000.0 },
            supports: SupportRule::BoundaryPinned,
            solver_tol: 1e-10,
            solver_max_iters: 0,
            stabilization: 1e-8,
        }
    }
}

/// Orthonormal per-triangle frame: two tangent vectors and the normal.
#[derive(Debug, Clone, Copy)]
pub struct TangentBasis {
    pub b1: Vector3<f64>,
    pub b2: Vector3<f64>,
    pub normal: Vector3<f64>,
}

/// Canonical tangent basis: b1 along the first edge, b2 = normal x b1.
/// Deterministic, so stress components are reproducible.
pub fn tangent_basis(mesh: &TriMesh, t: usize) -> TangentBasis {
    let [p0, p1, p2] = mesh.triangle_points(t);
    let e1 = p1 - p0;
    let n = e1.cross(&(p2 - p0));
    let b1 = e1 / e1.norm();
    let normal = n / n.norm();
    let b2 = normal.cross(&b1);
    TangentBasis { b1, b2, normal }
}

/// Rest-plane coordinates of a triangle in its tangent basis, with p0 at the
/// origin and p1 on the positive x-axis.
pub fn rest_coords(mesh: &TriMesh, t: usize) -> [Point2<f64>; 3] {
    let [p0, p1, p2] = mesh.triangle_points(t);
    let basis = tangent_basis(mesh, t);
    let q = |p: &nalgebra::Point3<f64>| {
        let d = p - p0;
        Point2::new(d.dot(&basis.b1), d.dot(&basis.b2))
    };
    [Point2::new(0.0, 0.0), q(&p1), q(&p2)]
}

/// Per-triangle symmetric in-plane stress, components (s11, s22, s12) in the
/// triangle's tangent basis.
#[derive(Debug, Clone)]
pub struct StressTensorField {
    pub basis: Vec<TangentBasis>,
    pub components: Vec<[f64; 3]>,
}

#[derive(Debug, Clone)]
pub struct ShellSolution {
    /// Per-vertex displacement vectors, m.
    pub displacements: Vec<Vector3<f64>>,
    pub stress: StressTensorField,
    /// Reaction force at each constrained vertex (sums over its fixed
    /// components), N.
    pub reactions: Vec<(usize, Vector3<f64>)>,
    /// Applied nodal loads, N.
    pub applied: Vec<Vector3<f64>>,
}

impl ShellSolution {
    /// Out-of-balance force: sum of reactions plus sum of applied loads.
    /// Zero (to solver tolerance) when the solution is in equilibrium.
    pub fn equilibrium_residual(&self) -> Vector3<f64> {
        let applied: Vector3<f64> = self.applied.iter().sum();
        let reactions: Vector3<f64> = self.reactions.iter().map(|(_, r)| *r).sum();
        applied + reactions
    }
}

/// Plane-stress constitutive matrix.
fn d_matrix(e: f64, nu: f64) -> Matrix3<f64> {
    let f = e / (1.0 - nu * nu);
    Matrix3::new(
        f,
        f * nu,
        0.0,
        f * nu,
        f,
        0.0,
        0.0,
        0.0,
        f * (1.0 - nu) / 2.0,
    )
}

/// CST strain-displacement matrix (3x6) and area from 2D rest coordinates.
fn b_matrix(q: &[Point2<f64>; 3]) -> (nalgebra::SMatrix<f64, 3, 6>, f64) {
    let (x0, y0, x1, y1, x2, y2) = (q[0].x, q[0].y, q[1].x, q[1].y, q[2].x, q[2].y);
    let area2 = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
    let b = [y1 - y2, y2 - y0, y0 - y1];
    let c = [x2 - x1, x0 - x2, x1 - x0];
    let mut bm = nalgebra::SMatrix::<f64, 3, 6>::zeros();
    for i in 0..3 {
        bm[(0, 2 * i)] = b[i];
        bm[(1, 2 * i + 1)] = c[i];
        bm[(2, 2 * i)] = c[i];
        bm[(2, 2 * i + 1)] = b[i];
    }
    (bm / area2, area2 / 2.0)
}

fn nodal_loads(mesh: &TriMesh, load: &LoadCase) -> Result<Vec<Vector3<f64>>> {
    let mut f = vec![Vector3::zeros(); mesh.positions.len()];
    match load {
        LoadCase::ProjectedPressure { pressure } => {
            if *pressure < 0.0 {
                return Err(Error::Parameter {
                    name: "load",
                    msg: format!("pressure must be nonnegative, got {pressure}"),
                });
            }
            for (ti, tri) in mesh.triangles.iter().enumerate() {
                let area = mesh.triangle_area(ti);
                let plan_area = area * mesh.triangle_normal(ti).z.abs();
                let share = pressure * plan_area / 3.0;
                for &v in tri {
                    f[v] += Vector3::new(0.0, 0.0, -share);
                }
            }
        }
        LoadCase::BoundaryTraction {
            edges,
            direction,
            force_per_length,
        } => {
            let dir = direction / direction.norm();
            for &(a, b) in edges {
                let len = (mesh.positions[a] - mesh.positions[b]).norm();
                let half = 0.5 * force_per_length * len;
                f[a] += dir * half;
                f[b] += dir * half;
            }
        }
    }
    Ok(f)
}

fn fixed_mask(mesh: &TriMesh, supports: &SupportRule) -> Result<Vec<[bool; 3]>> {
    let mut fixed = vec![[false; 3]; mesh.positions.len()];
    match supports {
        SupportRule::BoundaryPinned => {
            let boundary = mesh.boundary_edges();
            if boundary.is_empty() {
                return Err(Error::NoBoundary);
            }
            for (a, b) in boundary {
                fixed[a] = [true; 3];
                fixed[b] = [true; 3];
            }
        }
        SupportRule::Custom(masks) => {
            for &(v, mask) in masks {
                if v >= mesh.positions.len() {
                    return Err(Error::Parameter {
                        name: "supports",
                        msg: format!("support vertex {v} out of range"),
                    });
                }
                for c in 0..3 {
                    fixed[v][c] |= mask[c];
                }
            }
            if !fixed.iter().any(|m| m.iter().any(|&b| b)) {
                return Err(Error::Mechanism {
                    hint: "no supports specified".into(),
                });
            }
        }
    }
    Ok(fixed)
}

/// Assembles the membrane stiffness, applies supports and loads, solves the
/// reduced SPD system with CG, and returns displacements, stresses, and
/// reactions.
pub fn assemble_and_solve(mesh: &TriMesh, cfg: &ShellConfig) -> Result<ShellSolution> {
    let mat = &cfg.material;
    if !(mat.youngs > 0.0) || !(0.0..0.5).contains(&mat.poisson) || !(cfg.thickness > 0.0) {
        return Err(Error::Parameter {
            name: "material",
            msg: format!(
                "need E > 0, 0 <= nu < 0.5, t > 0 (got E={}, nu={}, t={})",
                mat.youngs, mat.poisson, cfg.thickness
            ),
        });
    }
    let nv = mesh.positions.len();
    let ndof = 3 * nv;
    let d = d_matrix(mat.youngs, mat.poisson);

    // Element stiffness in global coordinates, via the 3D-to-tangent-plane
    // projector P (6x9): K_e = P^T (t A B^T D B) P.
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    for (ti, tri) in mesh.triangles.iter().enumerate() {
        let q = rest_coords(mesh, ti);
        let basis = tangent_basis(mesh, ti);
        let (bm, area) = b_matrix(&q);
        let k_local = bm.transpose() * d * bm * (cfg.thickness * area);
        let mut p = nalgebra::SMatrix::<f64, 6, 9>::zeros();
        for i in 0..3 {
            for c in 0..3 {
                p[(2 * i, 3 * i + c)] = basis.b1[c];
                p[(2 * i + 1, 3 * i + c)] = basis.b2[c];
            }
        }
        let k_e = p.transpose() * k_local * p;
        for i in 0..3 {
            for j in 0..3 {
                for ci in 0..3 {
                    for cj in 0..3 {
                        let v = k_e[(3 * i + ci, 3 * j + cj)];
                        if v != 0.0 {
                            triplets.push((3 * tri[i] + ci, 3 * tri[j] + cj, v));
                        }
                    }
                }
            }
        }
    }
    // Weak vertex-difference springs (all three components).
    let k_spring = cfg.stabilization * mat.youngs * cfg.thickness;
    if k_spring > 0.0 {
        for (a, b) in mesh.edges() {
            for c in 0..3 {
                triplets.push((3 * a + c, 3 * a + c, k_spring));
                triplets.push((3 * b + c, 3 * b + c, k_spring));
                triplets.push((3 * a + c, 3 * b + c, -k_spring));
                triplets.push((3 * b + c, 3 * a + c, -k_spring));
            }
        }
    }
    let k_full = Csr::from_triplets(ndof, &triplets);

    let f = nodal_loads(mesh, &cfg.load)?;
    let fixed = fixed_mask(mesh, &cfg.supports)?;

    // Reduce to free DOFs.
    let mut dof_map = vec![usize::MAX; ndof];
    let mut n_free = 0;
    for v in 0..nv {
        for c in 0..3 {
            if !fixed[v][c] {
                dof_map[3 * v + c] = n_free;
                n_free += 1;
            }
        }
    }
    if n_free == 0 {
        return Err(Error::Parameter {
            name: "supports",
            msg: "all DOFs constrained".into(),
        });
    }
    let mut red_triplets = Vec::with_capacity(triplets.len());
    for &(r, c, v) in &triplets {
        if dof_map[r] != usize::MAX && dof_map[c] != usize::MAX {
            red_triplets.push((dof_map[r], dof_map[c], v));
        }
    }
    let k_red = Csr::from_triplets(n_free, &red_triplets);
    let mut b = vec![0.0; n_free];
    for v in 0..nv {
        for c in 0..3 {
            if dof_map[3 * v + c] != usize::MAX {
                b[dof_map[3 * v + c]] = f[v][c];
            }
        }
    }
    let max_iters = if cfg.solver_max_iters == 0 {
        40 * n_free
    } else {
        cfg.solver_max_iters
    };
    let precond = Precond::jacobi(&k_red);
    let (u_red, _) = pcg(&k_red, &b, None, &precond, cfg.solver_tol, max_iters)
        .map_err(|e| match e {
            Error::NoConvergence { iters, residual, .. } => Error::NoConvergence {
                what: "shell static solve",
                iters,
                residual,
            },
            other => other,
        })?;

    let mut u_full = vec![0.0; ndof];
    for i in 0..ndof {
        if dof_map[i] != usize::MAX {
            u_full[i] = u_red[dof_map[i]];
        }
    }
    let displacements: Vec<Vector3<f64>> = (0..nv)
        .map(|v| Vector3::new(u_full[3 * v], u_full[3 * v + 1], u_full[3 * v + 2]))
        .collect();

    // Reactions: r = (K u - f) restricted to constrained components.
    let ku = k_full.matvec(&u_full);
    let mut reactions = Vec::new();
    for v in 0..nv {
        if fixed[v].iter().any(|&b| b) {
            let mut r = Vector3::zeros();
            for c in 0..3 {
                if fixed[v][c] {
                    r[c] = ku[3 * v + c] - f[v][c];
                }
            }
            reactions.push((v, r));
        }
    }

    // Per-triangle stress from the tangent-plane displacement.
    let mut basis_vec = Vec::with_capacity(mesh.triangles.len());
    let mut components = Vec::with_capacity(mesh.triangles.len());
    for (ti, tri) in mesh.triangles.iter().enumerate() {
        let q = rest_coords(mesh, ti);
        let basis = tangent_basis(mesh, ti);
        let (bm, _) = b_matrix(&q);
        let mut u_local = nalgebra::SVector::<f64, 6>::zeros();
        for i in 0..3 {
            let uv = displacements[tri[i]];
            u_local[2 * i] = uv.dot(&basis.b1);
            u_local[2 * i + 1] = uv.dot(&basis.b2);
        }
        let sigma = d * (bm * u_local);
        basis_vec.push(basis);
        components.push([sigma[0], sigma[1], sigma[2]]);
    }

    Ok(ShellSolution {
        displacements,
        stress: StressTensorField {
            basis: basis_vec,
            components,
        },
        reactions,
        applied: f,
    })
}

/// Eigen-decomposes each 2x2 stress tensor into the dominant principal
/// direction (lifted to 3D), density d = larger |eigenvalue|, and anisotropy
/// a = |larger| / |smaller| clamped to `a_cap`. Near-equal magnitudes are
/// flagged isotropic with a = 1 and the first basis vector as direction.
pub fn principal_decompose(field: &StressTensorField, a_cap: f64) -> PsiField {
    let n = field.components.len();
    let mut dirs = Vec::with_capacity(n);
    let mut density = Vec::with_capacity(n);
    let mut anisotropy = Vec::with_capacity(n);
    let mut isotropic = Vec::with_capacity(n);
    for t in 0..n {
        let [s11, s22, s12] = field.components[t];
        let basis = &field.basis[t];
        let half_diff = 0.5 * (s11 - s22);
        let radius = (half_diff * half_diff + s12 * s12).sqrt();
        let mid = 0.5 * (s11 + s22);
        let (lo, hi) = (mid - radius, mid + radius);
        // Order by magnitude.
        let (big, small) = if hi.abs() >= lo.abs() { (hi, lo) } else { (lo, hi) };
        let d_val = big.abs();
        let scale = d_val.max(1e-300);
        let tie = (big.abs() - small.abs()).abs() <= 1e-9 * scale;
        if d_val <= 0.0 || tie {
            dirs.push(basis.b1);
            density.push(d_val);
            anisotropy.push(1.0);
            isotropic.push(true);
            continue;
        }
        // Eigenvector of [[s11, s12], [s12, s22]] for eigenvalue `big`:
        // the numerically larger of (s12, big - s11) and (big - s22, s12).
        let v1 = Vector2::new(s12, big - s11);
        let v2 = Vector2::new(big - s22, s12);
        let v = if v1.norm() >= v2.norm() { v1 } else { v2 };
        let v = if v.norm() > 0.0 {
            v / v.norm()
        } else {
            Vector2::new(1.0, 0.0)
        };
        let dir3 = basis.b1 * v.x + basis.b2 * v.y;
        let a = (d_val / small.abs().max(d_val / a_cap)).clamp(1.0, a_cap);
        dirs.push(dir3 / dir3.norm());
        density.push(d_val);
        anisotropy.push(a);
        isotropic.push(false);
    }
    PsiField {
        dirs,
        density,
        anisotropy,
        isotropic,
    }
}

/// Rotates a symmetric 2x2 tensor given in basis frame `from` into frame
/// `to` (both orthonormal bases of the same plane).
pub fn rotate_components(
    comp: [f64; 3],
    from: &TangentBasis,
    to: &TangentBasis,
) -> [f64; 3] {
    // Column vectors of `from` expressed in `to`.
    let c = Matrix2::new(
        from.b1.dot(&to.b1),
        from.b2.dot(&to.b1),
        from.b1.dot(&to.b2),
        from.b2.dot(&to.b2),
    );
    let s = Matrix2::new(comp[0], comp[2], comp[2], comp[1]);
    let r = c * s * c.transpose();
    [r[(0, 0)], r[(1, 1)], r[(0, 1)]]
}

// ---------------------------------------------------------------------------
// JSON escape hatch for externally computed stress fields

#[derive(Serialize, Deserialize)]
struct StressEntryDto {
    basis: [[f64; 3]; 2],
    sigma: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct StressFieldDto {
    schema_version: u32,
    entries: Vec<StressEntryDto>,
}

pub fn save_stress_json(field: &StressTensorField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dto = StressFieldDto {
        schema_version: 1,
        entries: field
            .basis
            .iter()
            .zip(&field.components)
            .map(|(b, c)| StressEntryDto {
                basis: [[b.b1.x, b.b1.y, b.b1.z], [b.b2.x, b.b2.y, b.b2.z]],
                sigma: *c,
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&dto).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    std::fs::write(path, text + "\n").map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_stress_json(path: impl AsRef<Path>) -> Result<StressTensorField> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let dto: StressFieldDto = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    let mut basis = Vec::with_capacity(dto.entries.len());
    let mut components = Vec::with_capacity(dto.entries.len());
    for e in dto.entries {
        let b1 = Vector3::new(e.basis[0][0], e.basis[0][1], e.basis[0][2]);
        let b2 = Vector3::new(e.basis[1][0], e.basis[1][1], e.basis[1][2]);
        basis.push(TangentBasis {
            b1,
            b2,
            normal: b1.cross(&b2),
        });
        components.push(e.sigma);
    }
    Ok(StressTensorField { basis, components })
}
