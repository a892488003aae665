//! The decomposed stress field Psi = (u_n, d, a) and its conditioning:
//! line-field smoothing, Lipschitz upper saturation of scalars, rescaling to
//! user intervals, and symmetrization about mirror planes.
//!
//! Directions are lines (u and -u equivalent); every operation here works in
//! the doubled-angle representation so sign never matters.

use std::collections::BinaryHeap;
use std::path::Path;

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::mesh::TriMesh;
use crate::shell::tangent_basis;
use crate::{Error, Result};

/// Per-triangle decomposed stress field.
#[derive(Debug, Clone)]
pub struct PsiField {
    /// Dominant principal direction, unit length, in the triangle plane.
    pub dirs: Vec<Vector3<f64>>,
    /// Density d: Pa straight out of the FEM, dimensionless after rescale.
    pub density: Vec<f64>,
    /// Anisotropy a >= 1.
    pub anisotropy: Vec<f64>,
    /// Marks triangles whose tensor had (near-)equal principal magnitudes.
    pub isotropic: Vec<bool>,
}

impl PsiField {
    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    /// Constant field helper (direction copied per triangle from the mesh's
    /// first tangent basis vector).
    pub fn uniform(mesh: &TriMesh, d: f64, a: f64) -> PsiField {
        let n = mesh.triangles.len();
        PsiField {
            dirs: (0..n).map(|t| tangent_basis(mesh, t).b1).collect(),
            density: vec![d; n],
            anisotropy: vec![a; n],
            isotropic: vec![a == 1.0; n],
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SymmetryPlane {
    pub point: Point3<f64>,
    pub normal: Vector3<f64>,
}

impl SymmetryPlane {
    pub fn new(point: Point3<f64>, normal: Vector3<f64>) -> SymmetryPlane {
        SymmetryPlane {
            point,
            normal: normal / normal.norm(),
        }
    }

    pub fn reflect_point(&self, p: Point3<f64>) -> Point3<f64> {
        let d = (p - self.point).dot(&self.normal);
        p - 2.0 * d * self.normal
    }

    pub fn reflect_vector(&self, v: Vector3<f64>) -> Vector3<f64> {
        v - 2.0 * v.dot(&self.normal) * self.normal
    }

    fn linear(&self) -> Matrix3<f64> {
        Matrix3::identity() - 2.0 * self.normal * self.normal.transpose()
    }
}

// ---------------------------------------------------------------------------
// Line-field smoothing

/// Angle of (the projection of) `v` in the triangle's tangent basis.
fn angle_in_basis(mesh: &TriMesh, t: usize, v: &Vector3<f64>) -> f64 {
    let b = tangent_basis(mesh, t);
    v.dot(&b.b2).atan2(v.dot(&b.b1))
}

fn dir_from_angle(mesh: &TriMesh, t: usize, theta: f64) -> Vector3<f64> {
    let b = tangent_basis(mesh, t);
    b.b1 * theta.cos() + b.b2 * theta.sin()
}

/// Connection data for one interior edge between triangles `t` and `s`:
/// angles are comparable across the edge after subtracting each triangle's
/// edge-frame offset (hinge unfolding about the shared edge).
struct EdgeLink {
    t: usize,
    s: usize,
    /// Angle of the shared edge direction in t's (resp. s's) basis.
    psi_t: f64,
    psi_s: f64,
}

fn edge_links(mesh: &TriMesh) -> Vec<EdgeLink> {
    let mut links = Vec::new();
    for ((a, b), tris) in mesh.edge_triangles() {
        if tris.len() != 2 {
            continue;
        }
        let e = mesh.positions[b] - mesh.positions[a];
        let e = e / e.norm();
        links.push(EdgeLink {
            t: tris[0],
            s: tris[1],
            psi_t: angle_in_basis(mesh, tris[0], &e),
            psi_s: angle_in_basis(mesh, tris[1], &e),
        });
    }
    links
}

/// Smooths the direction field by minimizing
///   E = sum_edges w (1 - cos 2(phi_t - phi_s))
///     + sum_tris (a_t - 1) (1 - cos 2(theta_t - theta_t0)),
/// where phi are angles in the unfolded edge frame. Solved by Gauss-Seidel
/// local closed-form updates (each angle minimizes a sum of cosine wells via
/// a 2-theta vector sum) until the relative energy change drops below 1e-8.
/// Densities and anisotropies pass through untouched.
pub fn smooth_line_field(field: &PsiField, mesh: &TriMesh, smoothness_weight: f64) -> PsiField {
    assert!(smoothness_weight >= 0.0);
    let nt = mesh.triangles.len();
    let links = edge_links(mesh);
    // Per-triangle adjacency into the link list.
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); nt];
    for (li, l) in links.iter().enumerate() {
        incident[l.t].push(li);
        incident[l.s].push(li);
    }
    let theta0: Vec<f64> = (0..nt).map(|t| angle_in_basis(mesh, t, &field.dirs[t])).collect();
    let mut theta = theta0.clone();
    let fidelity: Vec<f64> = field.anisotropy.iter().map(|a| (a - 1.0).max(0.0)).collect();

    let energy = |theta: &[f64]| -> f64 {
        let mut e = 0.0;
        for l in &links {
            let dphi = (theta[l.t] - l.psi_t) - (theta[l.s] - l.psi_s);
            e += smoothness_weight * (1.0 - (2.0 * dphi).cos());
        }
        for t in 0..nt {
            e += fidelity[t] * (1.0 - (2.0 * (theta[t] - theta0[t])).cos());
        }
        e
    };

    let mut prev = energy(&theta);
    for _sweep in 0..10_000 {
        for t in 0..nt {
            // Sum of unit 2-theta vectors toward each term's preferred angle.
            let mut vx = fidelity[t] * (2.0 * theta0[t]).cos();
            let mut vy = fidelity[t] * (2.0 * theta0[t]).sin();
            for &li in &incident[t] {
                let l = &links[li];
                let (psi_self, psi_other, other) = if l.t == t {
                    (l.psi_t, l.psi_s, l.s)
                } else {
                    (l.psi_s, l.psi_t, l.t)
                };
                // Edge term prefers theta_t = psi_self + (theta_s - psi_other).
                let c = psi_self + theta[other] - psi_other;
                vx += smoothness_weight * (2.0 * c).cos();
                vy += smoothness_weight * (2.0 * c).sin();
            }
            if vx * vx + vy * vy > 1e-300 {
                theta[t] = 0.5 * vy.atan2(vx);
            }
        }
        let e = energy(&theta);
        if (prev - e).abs() <= 1e-8 * (prev.abs() + 1e-30) {
            break;
        }
        prev = e;
    }

    let mut out = field.clone();
    for t in 0..nt {
        out.dirs[t] = dir_from_angle(mesh, t, theta[t]);
    }
    out
}

// ---------------------------------------------------------------------------
// Lipschitz saturation

#[derive(PartialEq)]
struct SatEntry {
    cost: f64,
    node: usize,
}

impl Eq for SatEntry {}
impl Ord for SatEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}
impl PartialOrd for SatEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Upper saturation: result(p) = max_q (values(q) - L * dist(p, q)) over the
/// triangle-barycenter graph. Raises values as little as possible so that the
/// result is L-Lipschitz; maxima are preserved exactly. Implemented as a
/// generalized distance transform (multi-source Dijkstra with per-node source
/// offsets -values(q)).
pub fn lipschitz_saturate(values: &[f64], mesh: &TriMesh, l: f64) -> Result<Vec<f64>> {
    if !(l > 0.0) {
        return Err(Error::Parameter {
            name: "lipschitz",
            msg: format!("L must be positive, got {l}"),
        });
    }
    if l.is_infinite() {
        return Ok(values.to_vec());
    }
    let nt = mesh.triangles.len();
    assert_eq!(values.len(), nt);
    let adj = mesh.triangle_adjacency();
    let bary: Vec<Point3<f64>> = (0..nt).map(|t| mesh.barycenter(t)).collect();
    let mut cost: Vec<f64> = values.iter().map(|v| -v).collect();
    let mut heap = BinaryHeap::new();
    for (t, &c) in cost.iter().enumerate() {
        heap.push(SatEntry { cost: c, node: t });
    }
    while let Some(SatEntry { cost: c, node }) = heap.pop() {
        if c > cost[node] {
            continue;
        }
        for k in 0..3 {
            if let Some(nb) = adj[node][k] {
                let w = (bary[nb] - bary[node]).norm();
                let nc = c + l * w;
                if nc < cost[nb] {
                    cost[nb] = nc;
                    heap.push(SatEntry { cost: nc, node: nb });
                }
            }
        }
    }
    Ok(cost.into_iter().map(|c| -c).collect())
}

// ---------------------------------------------------------------------------
// Rescaling

/// Affinely maps `d` onto [1, D] and `a` onto [1, A]. A constant input maps
/// to the midpoint of its target interval.
pub fn rescale(field: &PsiField, d_target: f64, a_target: f64) -> Result<PsiField> {
    if !(d_target >= 1.0) || !(a_target >= 1.0) {
        return Err(Error::Parameter {
            name: "rescale",
            msg: format!("D and A must be >= 1, got D={d_target}, A={a_target}"),
        });
    }
    let mut out = field.clone();
    out.density = affine_to_interval(&field.density, 1.0, d_target);
    out.anisotropy = affine_to_interval(&field.anisotropy, 1.0, a_target);
    Ok(out)
}

fn affine_to_interval(values: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let vmin = values.iter().copied().fold(f64::INFINITY, f64::min);
    let vmax = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = vmax - vmin;
    if span <= 1e-12 * vmax.abs().max(1.0) {
        return vec![(lo + hi) / 2.0; values.len()];
    }
    values
        .iter()
        .map(|v| lo + (v - vmin) / span * (hi - lo))
        .collect()
}

// ---------------------------------------------------------------------------
// Symmetrization

/// Closest point on triangle (a, b, c) to p (Ericson, Real-Time Collision
/// Detection, 5.1.5).
fn closest_point_on_triangle(
    p: &Point3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> Point3<f64> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Closest triangle to `p` (by closest surface point) and its distance.
fn closest_triangle(mesh: &TriMesh, p: &Point3<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for t in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.triangle_points(t);
        let q = closest_point_on_triangle(p, &a, &b, &c);
        let d = (p - q).norm();
        if d < best.1 {
            best = (t, d);
        }
    }
    best
}

/// Averages the field over the reflection orbit of the given planes.
/// For each triangle and each composition of plane reflections, the composed
/// image of the barycenter is located on the surface (closest triangle), the
/// sampled direction is mapped back through the composition, and (2-theta
/// direction, d, a) are averaged with equal weights.
///
/// Precondition (checked per plane): at least 95% of barycenters reflect to
/// within `tolerance` of the surface.
pub fn symmetrize(
    field: &PsiField,
    mesh: &TriMesh,
    planes: &[SymmetryPlane],
    tolerance: f64,
) -> Result<PsiField> {
    if planes.is_empty() {
        return Ok(field.clone());
    }
    let nt = mesh.triangles.len();
    let bary: Vec<Point3<f64>> = (0..nt).map(|t| mesh.barycenter(t)).collect();

    for (pi, plane) in planes.iter().enumerate() {
        let mut bad = 0usize;
        let mut worst = (0usize, 0.0f64);
        for t in 0..nt {
            let (_, d) = closest_triangle(mesh, &plane.reflect_point(bary[t]));
            if d > tolerance {
                bad += 1;
                if d > worst.1 {
                    worst = (t, d);
                }
            }
        }
        let frac_bad = bad as f64 / nt as f64;
        if frac_bad > 0.05 {
            return Err(Error::Asymmetric {
                plane: pi,
                fraction: 100.0 * frac_bad,
                tol: tolerance,
                worst_tri: worst.0,
                worst_dev: worst.1,
            });
        }
    }

    // Orbit elements: one per subset of planes (compositions of reflections;
    // identity included). Orthogonal or near-orthogonal plane sets give the
    // full dihedral orbit.
    let k = planes.len();
    let mut elements: Vec<(Matrix3<f64>, Box<dyn Fn(Point3<f64>) -> Point3<f64>>)> = Vec::new();
    for mask in 0..(1usize << k) {
        let mut lin = Matrix3::identity();
        let planes_in: Vec<SymmetryPlane> = (0..k)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| planes[i])
            .collect();
        for p in &planes_in {
            lin = p.linear() * lin;
        }
        let map = move |mut x: Point3<f64>| {
            for p in &planes_in {
                x = p.reflect_point(x);
            }
            x
        };
        elements.push((lin, Box::new(map)));
    }

    let mut out = field.clone();
    for t in 0..nt {
        let basis = tangent_basis(mesh, t);
        let mut sum_d = 0.0;
        let mut sum_a = 0.0;
        let mut vx = 0.0;
        let mut vy = 0.0;
        let mut all_iso = true;
        for (lin, map) in &elements {
            let image = map(bary[t]);
            let (s, _) = closest_triangle(mesh, &image);
            sum_d += field.density[s];
            sum_a += field.anisotropy[s];
            all_iso &= field.isotropic[s];
            // Transport the sampled line back: orbit elements are involutive
            // orthogonal maps, so the inverse linear part is the transpose.
            let back = lin.transpose() * field.dirs[s];
            let theta = back.dot(&basis.b2).atan2(back.dot(&basis.b1));
            vx += (2.0 * theta).cos();
            vy += (2.0 * theta).sin();
        }
        let n = elements.len() as f64;
        out.density[t] = sum_d / n;
        out.anisotropy[t] = sum_a / n;
        out.isotropic[t] = all_iso;
        if vx * vx + vy * vy > 1e-20 {
            let theta = 0.5 * vy.atan2(vx);
            out.dirs[t] = basis.b1 * theta.cos() + basis.b2 * theta.sin();
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Serialization

#[derive(Serialize, Deserialize)]
struct PsiEntryDto {
    u_n: [f64; 3],
    d: f64,
    a: f64,
    isotropic: bool,
}

#[derive(Serialize, Deserialize)]
struct PsiFieldDto {
    schema_version: u32,
    entries: Vec<PsiEntryDto>,
}

pub fn save_field_json(field: &PsiField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dto = PsiFieldDto {
        schema_version: 1,
        entries: (0..field.len())
            .map(|t| PsiEntryDto {
                u_n: [field.dirs[t].x, field.dirs[t].y, field.dirs[t].z],
                d: field.density[t],
                a: field.anisotropy[t],
                isotropic: field.isotropic[t],
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

pub fn load_field_json(path: impl AsRef<Path>) -> Result<PsiField> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let dto: PsiFieldDto = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    let mut field = PsiField {
        dirs: Vec::new(),
        density: Vec::new(),
        anisotropy: Vec::new(),
        isotropic: Vec::new(),
    };
    for e in dto.entries {
        field.dirs.push(Vector3::new(e.u_n[0], e.u_n[1], e.u_n[2]));
        field.density.push(e.d);
        field.anisotropy.push(e.a);
        field.isotropic.push(e.isotropic);
    }
    Ok(field)
}
