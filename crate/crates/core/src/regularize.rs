//! Polygon regularization: pulls every face of a tessellation toward the
//! nearest *stretched regular polygon* of equal perimeter, alternating
//! per-face target computation with damped per-vertex averaging, plus the
//! planarity/regularity shape metrics and mirror welding of symmetric
//! tessellations.

use std::collections::BTreeSet;

use nalgebra::{Matrix3, Point3, Vector2, Vector3};

use crate::field::SymmetryPlane;
use crate::mesh::{FaceMetrics, PolyMesh};
use crate::{Error, Result};

/// Settings for the alternating regularization loop.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct RegularizerConfig {
    /// Damping factor λ_d in (0, 1]: fraction of the way each vertex moves
    /// toward the mean of its face targets per iteration.
    pub damping: f64,
    /// Iteration cap.
    pub max_iters: usize,
    /// Stop once no vertex moves farther than this (meters).
    pub tol: f64,
}

impl Default for RegularizerConfig {
    fn default() -> Self {
        RegularizerConfig {
            damping: 0.5,
            max_iters: 100,
            tol: 1e-9,
        }
    }
}

/// Progress record of a [`regularize`] run.
#[derive(Debug, Clone)]
pub struct RegularizeStats {
    pub iters: usize,
    pub converged: bool,
    /// Total squared vertex-to-target distance at the start of each
    /// iteration.
    pub objective_history: Vec<f64>,
    /// Faces skipped as degenerate.
    pub warnings: Vec<String>,
}

// ---------------------------------------------------------------------------
// PCA plane frame

/// Centroid and orthonormal in-plane axes of a vertex cloud, with the
/// variances (unnormalized second moments) along the two principal in-plane
/// directions, largest first. Errors when the cloud is degenerate (rank < 2,
/// i.e. a zero-area face).
fn pca_frame(
    pts: &[Point3<f64>],
) -> Result<(Point3<f64>, Vector3<f64>, Vector3<f64>, f64, f64)> {
    let n = pts.len() as f64;
    let centroid = Point3::from(pts.iter().map(|p| p.coords).sum::<Vector3<f64>>() / n);
    let mut cov = Matrix3::zeros();
    for p in pts {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let (l1, l2) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]);
    if !(l2 > 1e-12 * l1) || l1 <= 0.0 {
        return Err(Error::Parameter {
            name: "face",
            msg: "degenerate (zero-area) face".into(),
        });
    }
    let e1 = eig.eigenvectors.column(order[0]).into_owned();
    let e2 = eig.eigenvectors.column(order[1]).into_owned();
    Ok((centroid, e1, e2, l1, l2))
}

/// Best-fit plane unit normal of a vertex cloud (least-squares orthogonal
/// distance). Degenerate clouds return an arbitrary axis — callers only use
/// the normal to measure distances, which are then zero anyway.
fn pca_normal(pts: &[Point3<f64>]) -> (Point3<f64>, Vector3<f64>) {
    let n = pts.len() as f64;
    let centroid = Point3::from(pts.iter().map(|p| p.coords).sum::<Vector3<f64>>() / n);
    let mut cov = Matrix3::zeros();
    for p in pts {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let mut k = 0;
    for i in 1..3 {
        if eig.eigenvalues[i] < eig.eigenvalues[k] {
            k = i;
        }
    }
    (centroid, eig.eigenvectors.column(k).into_owned())
}

// ---------------------------------------------------------------------------
// Per-polygon targets

/// Target positions toward the face's nearest stretched regular polygon:
/// (i) PCA-project the face to its best-fit plane; (ii) un-stretch by
/// rescaling the two principal in-plane axes to equal variance (area
/// preserving); (iii) build the regular n-gon of equal perimeter; (iv) align
/// it rigidly by closed-form 2D Procrustes, testing all cyclic
/// correspondences; (v) re-apply the stretch and lift back to 3D.
///
/// Regular polygons and their in-plane stretches are exactly the fixed
/// points of this construction.
pub fn per_polygon_targets(face: &[Point3<f64>]) -> Result<Vec<Point3<f64>>> {
    let n = face.len();
    if n < 3 {
        return Err(Error::Parameter {
            name: "face",
            msg: format!("polygon needs at least 3 vertices, got {n}"),
        });
    }
    let (c, e1, e2, l1, l2) = pca_frame(face)?;

    // (i) project; (ii) un-stretch with the area-preserving scale pair.
    let s1 = (l2 / l1).powf(0.25);
    let s2 = (l1 / l2).powf(0.25);
    let q: Vec<Vector2<f64>> = face
        .iter()
        .map(|p| {
            let d = p - c;
            Vector2::new(d.dot(&e1) * s1, d.dot(&e2) * s2)
        })
        .collect();

    // (iii) regular n-gon of equal perimeter, matching the face's
    // orientation in the (e1, e2) frame.
    let mut perimeter = 0.0;
    let mut twice_area = 0.0;
    for k in 0..n {
        let (a, b) = (q[k], q[(k + 1) % n]);
        perimeter += (b - a).norm();
        twice_area += a.x * b.y - a.y * b.x;
    }
    let orientation = if twice_area < 0.0 { -1.0 } else { 1.0 };
    let radius = perimeter / (2.0 * n as f64 * (std::f64::consts::PI / n as f64).sin());
    let reg: Vec<Vector2<f64>> = (0..n)
        .map(|k| {
            let ang = orientation * 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            Vector2::new(radius * ang.cos(), radius * ang.sin())
        })
        .collect();

    // (iv) cyclic-shift Procrustes: for correspondence reg[k] ~ q[k+s], the
    // optimal rotation angle is arg Σ q·Rreg, and the best shift maximizes
    // the aligned correlation |S|.
    let mut best: Option<(f64, usize, f64)> = None; // (|S|^2, shift, theta)
    for s in 0..n {
        let (mut re, mut im) = (0.0, 0.0);
        for k in 0..n {
            let r = reg[k];
            let p = q[(k + s) % n];
            re += r.x * p.x + r.y * p.y;
            im += r.x * p.y - r.y * p.x;
        }
        let mag = re * re + im * im;
        if best.map_or(true, |(bm, _, _)| mag > bm) {
            best = Some((mag, s, im.atan2(re)));
        }
    }
    let (_, shift, theta) = best.unwrap();
    let (ct, st) = (theta.cos(), theta.sin());

    // (v) rotate, undo the stretch, lift.
    let mut targets = vec![Point3::origin(); n];
    for k in 0..n {
        let r = reg[k];
        let rotated = Vector2::new(ct * r.x - st * r.y, st * r.x + ct * r.y);
        let undone = Vector2::new(rotated.x / s1, rotated.y / s2);
        targets[(k + shift) % n] = c + undone.x * e1 + undone.y * e2;
    }
    Ok(targets)
}

// ---------------------------------------------------------------------------
// Shape metrics

/// Mean distance of the face's vertices to their best-fit plane, divided by
/// half the perimeter. Zero for planar faces; scale invariant.
pub fn planarity(face: &[Point3<f64>]) -> f64 {
    let n = face.len();
    let mut perimeter = 0.0;
    for k in 0..n {
        perimeter += (face[(k + 1) % n] - face[k]).norm();
    }
    if perimeter <= 0.0 {
        return 0.0;
    }
    let (c, normal) = pca_normal(face);
    let mean_dist = face.iter().map(|p| (p - c).dot(&normal).abs()).sum::<f64>() / n as f64;
    mean_dist / (perimeter / 2.0)
}

/// Newell vector-area magnitude of a (possibly non-planar) polygon.
fn polygon_area(face: &[Point3<f64>]) -> f64 {
    let n = face.len();
    let mut v = Vector3::zeros();
    for k in 0..n {
        v += face[k].coords.cross(&face[(k + 1) % n].coords);
    }
    0.5 * v.norm()
}

/// Sum of squared distances of the face's vertices to their
/// [`per_polygon_targets`] positions, divided by the face area (1/m²).
/// Zero exactly on stretched regular polygons; infinite for degenerate
/// faces.
pub fn regularity(face: &[Point3<f64>]) -> f64 {
    let area = polygon_area(face);
    let targets = match per_polygon_targets(face) {
        Ok(t) => t,
        Err(_) => return f64::INFINITY,
    };
    if area <= 0.0 {
        return f64::INFINITY;
    }
    face.iter()
        .zip(&targets)
        .map(|(p, t)| (p - t).norm_squared())
        .sum::<f64>()
        / area
}

/// Planarity and regularity for every face of a tessellation.
pub fn face_metrics(mesh: &PolyMesh) -> Vec<FaceMetrics> {
    mesh.faces
        .iter()
        .map(|face| {
            let pts: Vec<Point3<f64>> = face.iter().map(|&v| mesh.positions[v]).collect();
            FaceMetrics {
                planarity: planarity(&pts),
                regularity: regularity(&pts),
            }
        })
        .collect()
}

/// Per-face metrics as CSV keyed by face index.
pub fn metrics_csv(mesh: &PolyMesh) -> String {
    let metrics = face_metrics(mesh);
    let mut out = String::from("face,arity,planarity,regularity\n");
    for (fi, (face, m)) in mesh.faces.iter().zip(&metrics).enumerate() {
        out.push_str(&format!(
            "{},{},{:.17e},{:.17e}\n",
            fi,
            face.len(),
            m.planarity,
            m.regularity
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Alternating regularization

/// Alternates per-face target computation with a damped per-vertex step:
/// each interior vertex moves by λ_d toward the mean of the targets its
/// incident faces assign to it (the least-squares position). Boundary
/// vertices never move and connectivity is untouched. Degenerate faces are
/// skipped with a warning. The returned mesh carries refreshed
/// [`FaceMetrics`].
pub fn regularize(mesh: &PolyMesh, cfg: &RegularizerConfig) -> Result<(PolyMesh, RegularizeStats)> {
    if !(cfg.damping > 0.0 && cfg.damping <= 1.0) {
        return Err(Error::Parameter {
            name: "damping",
            msg: format!("damping factor must lie in (0, 1], got {}", cfg.damping),
        });
    }
    let boundary: BTreeSet<usize> = mesh.boundary_vertices().into_iter().collect();
    let mut out = mesh.clone();
    let mut warned: BTreeSet<usize> = BTreeSet::new();
    let mut warnings = Vec::new();
    let mut history = Vec::new();
    let mut converged = false;
    let mut iters = 0;
    for _ in 0..cfg.max_iters {
        iters += 1;
        let mut sums: Vec<Vector3<f64>> = vec![Vector3::zeros(); out.positions.len()];
        let mut counts = vec![0usize; out.positions.len()];
        let mut objective = 0.0;
        for (fi, face) in out.faces.iter().enumerate() {
            let pts: Vec<Point3<f64>> = face.iter().map(|&v| out.positions[v]).collect();
            let targets = match per_polygon_targets(&pts) {
                Ok(t) => t,
                Err(_) => {
                    if warned.insert(fi) {
                        warnings.push(format!("skipped degenerate face {fi}"));
                    }
                    continue;
                }
            };
            for (&v, (p, t)) in face.iter().zip(pts.iter().zip(&targets)) {
                objective += (p - t).norm_squared();
                sums[v] += t.coords;
                counts[v] += 1;
            }
        }
        history.push(objective);
        let mut max_move = 0.0f64;
        for v in 0..out.positions.len() {
            if counts[v] == 0 || boundary.contains(&v) {
                continue;
            }
            let mean = Point3::from(sums[v] / counts[v] as f64);
            let step = cfg.damping * (mean - out.positions[v]);
            max_move = max_move.max(step.norm());
            out.positions[v] += step;
        }
        if max_move < cfg.tol {
            converged = true;
            break;
        }
    }
    out.metrics = face_metrics(&out);
    Ok((
        out,
        RegularizeStats {
            iters,
            converged,
            objective_history: history,
            warnings,
        },
    ))
}

// ---------------------------------------------------------------------------
// Symmetry welding

/// Reflects a tessellation computed on one symmetric sector through every
/// combination of the given planes and welds the copies into a single
/// mirror-symmetric mesh. Vertices within `weld_tol` of a plane are snapped
/// onto it first, so boundary chains on a symmetry line merge exactly with
/// their mirror images; faces lying wholly inside a plane coincide with
/// their reflection and are kept once. Any weld that would leave an edge
/// with more than two incident faces is an error.
pub fn symmetrize_tessellation(
    half: &PolyMesh,
    planes: &[SymmetryPlane],
    weld_tol: f64,
) -> Result<PolyMesh> {
    if !(weld_tol > 0.0) {
        return Err(Error::Parameter {
            name: "weld_tol",
            msg: format!("weld tolerance must be positive, got {weld_tol}"),
        });
    }
    if planes.is_empty() {
        return Ok(half.clone());
    }

    // Snap near-plane vertices onto their plane(s).
    let mut snapped = half.positions.clone();
    for p in &mut snapped {
        for plane in planes {
            let d = (*p - plane.point).dot(&plane.normal);
            if d.abs() <= weld_tol {
                *p -= d * plane.normal;
            }
        }
    }

    // Tolerance-based vertex pool: vertices are merged when within weld_tol,
    // resolved through a uniform grid of cell size weld_tol.
    let mut pool: Vec<Point3<f64>> = Vec::new();
    let mut grid: std::collections::BTreeMap<(i64, i64, i64), Vec<usize>> =
        std::collections::BTreeMap::new();
    let cell = |x: f64| -> i64 { (x / weld_tol).round() as i64 };
    let mut intern = |p: Point3<f64>| -> usize {
        let key = (cell(p.x), cell(p.y), cell(p.z));
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = grid.get(&(key.0 + dx, key.1 + dy, key.2 + dz)) {
                        for &id in ids {
                            if (pool[id] - p).norm() <= weld_tol {
                                return id;
                            }
                        }
                    }
                }
            }
        }
        let id = pool.len();
        pool.push(p);
        grid.entry(key).or_default().push(id);
        id
    };

    let mut faces: Vec<Vec<usize>> = Vec::new();
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    for mask in 0u32..(1u32 << planes.len()) {
        // Composed reflection for this subset of planes, applied in index
        // order; odd subsets reverse orientation.
        let refl = |p: Point3<f64>| -> Point3<f64> {
            let mut q = p;
            for (i, plane) in planes.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    q = plane.reflect_point(q);
                }
            }
            q
        };
        let odd = mask.count_ones() % 2 == 1;
        let ids: Vec<usize> = snapped.iter().map(|&p| intern(refl(p))).collect();
        for face in &half.faces {
            let mut mapped: Vec<usize> = face.iter().map(|&v| ids[v]).collect();
            if odd {
                mapped.reverse();
            }
            mapped.dedup();
            while mapped.len() > 1 && mapped.first() == mapped.last() {
                mapped.pop();
            }
            if mapped.len() < 3 {
                continue;
            }
            let mut key = mapped.clone();
            key.sort_unstable();
            if seen.insert(key) {
                faces.push(mapped);
            }
        }
    }

    let welded = PolyMesh::new(pool, faces);
    for ((a, b), fs) in welded.edge_faces() {
        if fs.len() > 2 {
            let mid = nalgebra::center(&welded.positions[a], &welded.positions[b]);
            return Err(Error::WeldNonManifold {
                pos: [mid.x, mid.y, mid.z],
            });
        }
    }
    Ok(welded)
}
