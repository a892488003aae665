//! Metric-driven surface deformation.
//!
//! The decomposed stress field prescribes a per-triangle target Jacobian
//! W_t = R(phi) diag(d, d/a) R(phi)^T in the triangle's tangent frame (phi is
//! the angle of the dominant direction u_n). Deforming the surface *by* W
//! enlarges high-stress zones, so that a uniform isotropic sampling of the
//! deformed surface M' pulls back to a stress-adapted sampling of M.
//!
//! The deformation minimizes the as-rigid-as-possible style energy
//!   E(p, R) = sum_t A_t || J_t(p) - R_t W_t ||_F^2
//! over free vertex positions p (no boundary constraints) and per-triangle
//! orthonormal frames R_t via alternating local/global steps. The global
//! translation is fixed by a rest-area-weighted centroid gauge.

use std::collections::BTreeSet;

use nalgebra::{Matrix2, Point3, Vector2, Vector3};
use serde::Serialize;

use crate::field::PsiField;
use crate::mesh::{split_edges, TriMesh};
use crate::shell::{rest_coords, tangent_basis};
use crate::sparse::{pcg_deflated, Csr, Precond};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct DeformConfig {
    /// Cap on local/global iterations per solve.
    pub max_iters: usize,
    /// Relative energy-change threshold for convergence.
    pub tol: f64,
    /// Relative residual for the inner linear solves.
    pub solver_tol: f64,
    /// Inner solver iteration cap; 0 picks 10 * n.
    pub solver_max_iters: usize,
    /// Cap on refine/deform rounds in [`refine_until_fit`].
    pub refine_cap: usize,
}

impl Default for DeformConfig {
    fn default() -> Self {
        DeformConfig {
            max_iters: 200,
            tol: 1e-8,
            solver_tol: 1e-10,
            solver_max_iters: 0,
            refine_cap: 20,
        }
    }
}

/// Target Jacobian for triangle `t` in its own tangent basis: stretch by d
/// along u_n and by d/a across it.
pub fn target_frame(mesh: &TriMesh, field: &PsiField, t: usize) -> Matrix2<f64> {
    let basis = tangent_basis(mesh, t);
    let d = field.density[t];
    let a = field.anisotropy[t];
    let u = &field.dirs[t];
    let (c, s) = {
        let x = u.dot(&basis.b1);
        let y = u.dot(&basis.b2);
        let n = (x * x + y * y).sqrt();
        if n > 0.0 {
            (x / n, y / n)
        } else {
            (1.0, 0.0)
        }
    };
    let rot = Matrix2::new(c, -s, s, c);
    rot * Matrix2::new(d, 0.0, 0.0, d / a) * rot.transpose()
}

/// Eigen-decomposition of a symmetric 2x2 matrix: returns (eigenvalues
/// ascending, corresponding unit eigenvectors).
fn sym_eigen_2x2(m: &Matrix2<f64>) -> ([f64; 2], [Vector2<f64>; 2]) {
    let (a, b, c) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
    let mid = 0.5 * (a + c);
    let half = 0.5 * (a - c);
    let radius = (half * half + b * b).sqrt();
    let (lo, hi) = (mid - radius, mid + radius);
    if radius <= 1e-300 {
        return ([lo, hi], [Vector2::x(), Vector2::y()]);
    }
    let v_hi = {
        let v1 = Vector2::new(b, hi - a);
        let v2 = Vector2::new(hi - c, b);
        let v = if v1.norm() >= v2.norm() { v1 } else { v2 };
        v / v.norm()
    };
    let v_lo = Vector2::new(-v_hi.y, v_hi.x);
    ([lo, hi], [v_lo, v_hi])
}

/// Orthonormal polar factor of the 3x2 matrix `m` (thin SVD U V^T). For
/// rank-deficient m the missing column is completed deterministically.
fn stiefel_polar(m: &nalgebra::SMatrix<f64, 3, 2>) -> nalgebra::SMatrix<f64, 3, 2> {
    let c = m.transpose() * m;
    let (vals, vecs) = sym_eigen_2x2(&c);
    let sigma = [vals[0].max(0.0).sqrt(), vals[1].max(0.0).sqrt()];
    // Largest singular value first for stable completion.
    let order = [1usize, 0];
    let mut u = [Vector3::zeros(), Vector3::zeros()];
    let mut v = [Vector2::zeros(), Vector2::zeros()];
    for (slot, &k) in order.iter().enumerate() {
        v[slot] = vecs[k];
        let col = m * vecs[k];
        if sigma[k] > 1e-12 * sigma[1].max(1e-300) && col.norm() > 0.0 {
            u[slot] = col / col.norm();
        } else if slot == 1 {
            // Complete orthonormally to u[0].
            let axis = if u[0].x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
            let w = u[0].cross(&axis);
            u[slot] = w / w.norm();
        } else {
            u[slot] = Vector3::x();
        }
    }
    // R = U V^T with columns restored to eigenvector order.
    let mut r = nalgebra::SMatrix::<f64, 3, 2>::zeros();
    for slot in 0..2 {
        let uv = u[slot];
        let vv = v[slot];
        for i in 0..3 {
            r[(i, 0)] += uv[i] * vv[0];
            r[(i, 1)] += uv[i] * vv[1];
        }
    }
    r
}

/// Per-triangle constant data for the ARAP solve.
struct TriOp {
    tri: [usize; 3],
    area: f64,
    /// Inverse of the 2x2 rest-edge matrix in the tangent basis.
    binv: Matrix2<f64>,
    /// Target Jacobian W_t in the same basis.
    w: Matrix2<f64>,
}

fn tri_ops(mesh: &TriMesh, field: &PsiField) -> Vec<TriOp> {
    let mut ops = Vec::with_capacity(mesh.triangles.len());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let q = rest_coords(mesh, t);
        let e = Matrix2::new(
            q[1].x - q[0].x,
            q[2].x - q[0].x,
            q[1].y - q[0].y,
            q[2].y - q[0].y,
        );
        let binv = e.try_inverse().expect("validated mesh has no degenerate triangles");
        ops.push(TriOp {
            tri: *tri,
            area: mesh.triangle_area(t),
            binv,
            w: target_frame(mesh, field, t),
        });
    }
    ops
}

/// Current Jacobian of triangle `op` under positions `p` (3x2, tangent-basis
/// rest frame to world).
fn jacobian(op: &TriOp, p: &[Point3<f64>]) -> nalgebra::SMatrix<f64, 3, 2> {
    let [i, j, k] = op.tri;
    let e1 = p[j] - p[i];
    let e2 = p[k] - p[i];
    let mut e = nalgebra::SMatrix::<f64, 3, 2>::zeros();
    for r in 0..3 {
        e[(r, 0)] = e1[r];
        e[(r, 1)] = e2[r];
    }
    e * op.binv
}

#[derive(Debug, Clone)]
pub struct DeformResult {
    pub mesh: TriMesh,
    /// Energy after each local/global iteration, monotone non-increasing.
    pub energy_history: Vec<f64>,
    pub iters: usize,
}

/// Rest-area-weighted vertex centroid (the gauge that pins down the free
/// translation of the deformation).
fn mass_centroid(positions: &[Point3<f64>], mass: &[f64]) -> Vector3<f64> {
    let mut c = Vector3::zeros();
    let mut m = 0.0;
    for (p, &w) in positions.iter().zip(mass) {
        c += p.coords * w;
        m += w;
    }
    c / m
}

/// Deforms `mesh` so that each triangle's Jacobian approximates its target
/// frame, starting from the rest positions.
pub fn deform(mesh: &TriMesh, field: &PsiField, cfg: &DeformConfig) -> Result<DeformResult> {
    deform_from(mesh, field, &mesh.positions, cfg)
}

/// Same as [`deform`] but warm-started from explicit initial positions
/// (used by the refinement loop to reuse the previous round's shape).
pub fn deform_from(
    mesh: &TriMesh,
    field: &PsiField,
    init: &[Point3<f64>],
    cfg: &DeformConfig,
) -> Result<DeformResult> {
    assert_eq!(field.len(), mesh.triangles.len(), "field/mesh size mismatch");
    assert_eq!(init.len(), mesh.positions.len());
    mesh.validate()?;
    let n = mesh.positions.len();
    let ops = tri_ops(mesh, field);

    // Vertex masses and gauge target from the rest mesh.
    let mut mass = vec![0.0; n];
    for op in &ops {
        for &v in &op.tri {
            mass[v] += op.area / 3.0;
        }
    }
    let gauge = mass_centroid(&mesh.positions, &mass);

    // Global-step matrix: K = sum_t A_t D^T (Binv Binv^T) D, shared by all
    // three coordinates. D maps the 3 vertex values to the 2 edge differences.
    let mut triplets = Vec::with_capacity(ops.len() * 9);
    for op in &ops {
        let g = op.binv * op.binv.transpose() * op.area;
        // D^T G D with D = [[-1, 1, 0], [-1, 0, 1]].
        let d_rows: [[f64; 3]; 2] = [[-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]];
        for a in 0..3 {
            for b in 0..3 {
                let mut k = 0.0;
                for r in 0..2 {
                    for s in 0..2 {
                        k += d_rows[r][a] * g[(r, s)] * d_rows[s][b];
                    }
                }
                triplets.push((op.tri[a], op.tri[b], k));
            }
        }
    }
    let k = Csr::from_triplets(n, &triplets);
    let precond = Precond::jacobi(&k);
    let ones = vec![1.0 / (n as f64).sqrt(); n];
    let null_basis = [ones];
    let solver_iters = if cfg.solver_max_iters == 0 { 10 * n.max(100) } else { cfg.solver_max_iters };

    let mut p: Vec<Point3<f64>> = init.to_vec();
    let shift = gauge - mass_centroid(&p, &mass);
    for q in &mut p {
        *q += shift;
    }

    let energy = |p: &[Point3<f64>], rot: &[nalgebra::SMatrix<f64, 3, 2>]| -> f64 {
        let mut e = 0.0;
        for (op, r) in ops.iter().zip(rot) {
            let diff = jacobian(op, p) - r * op.w;
            e += op.area * diff.norm_squared();
        }
        e
    };

    let mut rotations = vec![nalgebra::SMatrix::<f64, 3, 2>::zeros(); ops.len()];
    let mut history = Vec::new();
    let mut prev = f64::INFINITY;
    let mut iters = 0;
    for it in 0..cfg.max_iters {
        iters = it + 1;
        // Local step: best orthonormal frame per triangle.
        for (op, r) in ops.iter().zip(rotations.iter_mut()) {
            *r = stiefel_polar(&(jacobian(op, &p) * op.w));
        }
        // Global step: one deflated PCG solve per coordinate.
        let mut rhs = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for (op, r) in ops.iter().zip(&rotations) {
            let target = r * op.w; // 3x2
            // rhs_c += A_t D^T Binv target_c^T
            let d_rows: [[f64; 3]; 2] = [[-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]];
            for c in 0..3 {
                let tc = Vector2::new(target[(c, 0)], target[(c, 1)]);
                let bt = op.binv * tc;
                for a in 0..3 {
                    let mut v = 0.0;
                    for r2 in 0..2 {
                        v += d_rows[r2][a] * bt[r2];
                    }
                    rhs[c][op.tri[a]] += op.area * v;
                }
            }
        }
        let mut coords = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for c in 0..3 {
            let x0: Vec<f64> = p.iter().map(|q| q[c]).collect();
            let (x, _) = pcg_deflated(
                &k,
                &rhs[c],
                Some(&x0),
                &precond,
                cfg.solver_tol,
                solver_iters,
                &null_basis,
            )
            .map_err(|e| e.in_stage("deform"))?;
            coords[c] = x;
        }
        for (v, q) in p.iter_mut().enumerate() {
            *q = Point3::new(coords[0][v], coords[1][v], coords[2][v]);
        }
        let shift = gauge - mass_centroid(&p, &mass);
        for q in &mut p {
            *q += shift;
        }

        let e = energy(&p, &rotations);
        history.push(e);
        if (prev - e).abs() <= cfg.tol * (prev.abs().min(f64::MAX) + 1e-30) || e <= 1e-30 {
            break;
        }
        prev = e;
    }

    Ok(DeformResult {
        mesh: TriMesh::new(p, mesh.triangles.clone()),
        energy_history: history,
        iters,
    })
}

// ---------------------------------------------------------------------------
// Refinement loop

/// Ancestry records tying the refined mesh back to the input mesh.
#[derive(Debug, Clone, Serialize)]
pub struct Genealogy {
    /// For each triangle of the refined mesh, the input triangle it came from.
    pub triangle_parent: Vec<usize>,
    /// For each vertex: `None` for input vertices, otherwise the endpoints of
    /// the (refined-mesh) edge whose midpoint it is.
    pub vertex_origin: Vec<Option<(usize, usize)>>,
}

/// A deformation pair: the (possibly refined) rest mesh M and its deformed
/// image M', sharing connectivity vertex for vertex.
#[derive(Debug, Clone)]
pub struct DeformedDomain {
    pub original: TriMesh,
    pub deformed: TriMesh,
    pub genealogy: Genealogy,
}

impl DeformedDomain {
    /// Locates `p` on the deformed surface (closest point over all triangles,
    /// `hint` tried first) and maps it back to the rest surface through the
    /// shared barycentric coordinates. Returns (triangle, barycentric, rest
    /// point).
    pub fn map_back(&self, p: &Point3<f64>, hint: Option<usize>) -> (usize, [f64; 3], Point3<f64>) {
        let (tri, bary) = locate_closest(&self.deformed, p, hint);
        let [a, b, c] = self.original.triangles[tri];
        let q = self.original.positions[a].coords * bary[0]
            + self.original.positions[b].coords * bary[1]
            + self.original.positions[c].coords * bary[2];
        (tri, bary, Point3::from(q))
    }
}

/// Barycentric coordinates of the closest point to `p` in triangle `t`,
/// clamped to the triangle.
fn closest_barycentric(mesh: &TriMesh, t: usize, p: &Point3<f64>) -> ([f64; 3], f64) {
    let [a, b, c] = mesh.triangle_points(t);
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    // Solve the 2x2 least-squares projection, then clamp edge by edge.
    let d00 = ab.dot(&ab);
    let d01 = ab.dot(&ac);
    let d11 = ac.dot(&ac);
    let r0 = ab.dot(&ap);
    let r1 = ac.dot(&ap);
    let det = d00 * d11 - d01 * d01;
    let (mut v, mut w) = if det.abs() > 1e-300 {
        ((d11 * r0 - d01 * r1) / det, (d00 * r1 - d01 * r0) / det)
    } else {
        (1.0 / 3.0, 1.0 / 3.0)
    };
    // Clamp into the triangle (project onto edges when outside).
    if v < 0.0 {
        v = 0.0;
        w = (r1 / d11).clamp(0.0, 1.0);
    } else if w < 0.0 {
        w = 0.0;
        v = (r0 / d00).clamp(0.0, 1.0);
    } else if v + w > 1.0 {
        // Project onto the bc edge parameterized by s from b to c.
        let bp = p - b;
        let bc = c - b;
        let s = (bp.dot(&bc) / bc.dot(&bc)).clamp(0.0, 1.0);
        v = 1.0 - s;
        w = s;
    }
    let bary = [1.0 - v - w, v, w];
    let q = a.coords * bary[0] + b.coords * bary[1] + c.coords * bary[2];
    (bary, (p.coords - q).norm())
}

fn locate_closest(mesh: &TriMesh, p: &Point3<f64>, hint: Option<usize>) -> (usize, [f64; 3]) {
    if let Some(t) = hint {
        if t < mesh.triangles.len() {
            let (bary, dist) = closest_barycentric(mesh, t, p);
            if dist <= 1e-12 {
                return (t, bary);
            }
        }
    }
    let mut best = (0usize, [0.0; 3], f64::INFINITY);
    for t in 0..mesh.triangles.len() {
        let (bary, dist) = closest_barycentric(mesh, t, p);
        if dist < best.2 {
            best = (t, bary, dist);
        }
    }
    (best.0, best.1)
}

/// Outcome of the deform/refine loop: the refined rest mesh, its deformed
/// image, ancestry, and the field restricted to the refined triangles.
#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub domain: DeformedDomain,
    pub field: PsiField,
    pub rounds: usize,
}

/// Deforms, then repeatedly splits every edge whose *deformed* length exceeds
/// `q` (in both meshes, in lockstep) and re-deforms, until the deformed mesh
/// resolves the sampling scale: all its edges are at most `q`. Children
/// inherit their parent triangle's field sample.
pub fn refine_until_fit(
    mesh: &TriMesh,
    field: &PsiField,
    q: f64,
    cfg: &DeformConfig,
) -> Result<RefineOutcome> {
    if !(q > 0.0) {
        return Err(Error::Parameter {
            name: "q",
            msg: format!("edge-length threshold must be positive, got {q}"),
        });
    }
    let mut rest = mesh.clone();
    let mut cur_field = field.clone();
    let mut genealogy = Genealogy {
        triangle_parent: (0..mesh.triangles.len()).collect(),
        vertex_origin: vec![None; mesh.positions.len()],
    };
    let mut init = mesh.positions.clone();
    for round in 0..=cfg.refine_cap {
        let result = deform_from(&rest, &cur_field, &init, cfg)?;
        let deformed = result.mesh;
        let long: BTreeSet<(usize, usize)> = deformed
            .edges()
            .into_iter()
            .filter(|&(a, b)| (deformed.positions[a] - deformed.positions[b]).norm() > q)
            .collect();
        if long.is_empty() {
            return Ok(RefineOutcome {
                domain: DeformedDomain {
                    original: rest,
                    deformed,
                    genealogy,
                },
                field: cur_field,
                rounds: round,
            });
        }
        if round == cfg.refine_cap {
            return Err(Error::RefinementCap {
                rounds: cfg.refine_cap,
                remaining: long.len(),
            });
        }
        // Lockstep split: same edge set on the rest mesh and on the deformed
        // shape (the latter only to warm-start the next solve).
        let rest_split = split_edges(&rest, &long);
        let warm_split = split_edges(&deformed, &long);
        cur_field = PsiField {
            dirs: rest_split.parents.iter().map(|&p| cur_field.dirs[p]).collect(),
            density: rest_split.parents.iter().map(|&p| cur_field.density[p]).collect(),
            anisotropy: rest_split
                .parents
                .iter()
                .map(|&p| cur_field.anisotropy[p])
                .collect(),
            isotropic: rest_split
                .parents
                .iter()
                .map(|&p| cur_field.isotropic[p])
                .collect(),
        };
        genealogy.triangle_parent = rest_split
            .parents
            .iter()
            .map(|&p| genealogy.triangle_parent[p])
            .collect();
        for ev in &rest_split.events {
            genealogy.vertex_origin.push(Some(ev.edge));
        }
        init = warm_split.mesh.positions;
        rest = rest_split.mesh;
    }
    unreachable!("loop returns or errors at the cap");
}
