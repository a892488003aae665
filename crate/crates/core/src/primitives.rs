//! Parametric fixture meshes used by tests, benchmarks, and the examples in
//! the CLI documentation. All generators are deterministic.

use nalgebra::Point3;

use crate::mesh::TriMesh;

/// Regular grid of `nx` by `ny` quads over a `w` by `h` rectangle in the XY
/// plane, each quad split by the same diagonal. Vertex `(i, j)` has index
/// `j * (nx + 1) + i`.
pub fn flat_grid(nx: usize, ny: usize, w: f64, h: f64) -> TriMesh {
    let mut positions = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            positions.push(Point3::new(
                w * i as f64 / nx as f64,
                h * j as f64 / ny as f64,
                0.0,
            ));
        }
    }
    let at = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1));
            triangles.push([a, b, d]);
            triangles.push([a, d, c]);
        }
    }
    TriMesh::new(positions, triangles)
}

/// Like [`flat_grid`] but with the quad diagonals mirrored across both grid
/// centerlines, so the triangulation itself is symmetric under x- and
/// y-reflection about the center. Requires even `nx` and `ny`.
pub fn flat_grid_symmetric(nx: usize, ny: usize, w: f64, h: f64) -> TriMesh {
    assert!(nx % 2 == 0 && ny % 2 == 0, "symmetric grid needs even quad counts");
    let base = flat_grid(nx, ny, w, h);
    let at = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1));
            let main_diagonal = (2 * i + 1 < nx) == (2 * j + 1 < ny);
            if main_diagonal {
                triangles.push([a, b, d]);
                triangles.push([a, d, c]);
            } else {
                triangles.push([a, b, c]);
                triangles.push([b, d, c]);
            }
        }
    }
    TriMesh::new(base.positions, triangles)
}

/// Disk of radius `r` in the XY plane: a central vertex, `n_rings` concentric
/// rings of `n_rim` vertices each, and a rim that is a regular `n_rim`-gon.
pub fn disk(n_rim: usize, n_rings: usize, r: f64) -> TriMesh {
    assert!(n_rim >= 3 && n_rings >= 1);
    let mut positions = vec![Point3::new(0.0, 0.0, 0.0)];
    for k in 1..=n_rings {
        let rho = r * k as f64 / n_rings as f64;
        for j in 0..n_rim {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / n_rim as f64;
            positions.push(Point3::new(rho * theta.cos(), rho * theta.sin(), 0.0));
        }
    }
    let ring = |k: usize, j: usize| 1 + (k - 1) * n_rim + j % n_rim;
    let mut triangles = Vec::new();
    for j in 0..n_rim {
        triangles.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for k in 1..n_rings {
        for j in 0..n_rim {
            let (a, b) = (ring(k, j), ring(k, j + 1));
            let (c, d) = (ring(k + 1, j), ring(k + 1, j + 1));
            triangles.push([a, c, d]);
            triangles.push([a, d, b]);
        }
    }
    TriMesh::new(positions, triangles)
}

/// Narrow rectangle strip: `n` quads along x over a `len` by `w` rectangle.
pub fn strip(n: usize, len: f64, w: f64) -> TriMesh {
    flat_grid(n, 1, len, w)
}

/// Dome-like paraboloid patch over a centered `w` by `w` square with apex
/// height `h`: z = h (1 - (x^2 + y^2) / 2) in coordinates normalized to
/// [-1, 1]. The four corners sit at z = 0. Requires even `n`.
pub fn paraboloid(n: usize, w: f64, h: f64) -> TriMesh {
    let mut mesh = flat_grid_symmetric(n, n, w, w);
    for p in &mut mesh.positions {
        let xn = (p.x - w / 2.0) / (w / 2.0);
        let yn = (p.y - w / 2.0) / (w / 2.0);
        p.x -= w / 2.0;
        p.y -= w / 2.0;
        p.z = h * (1.0 - 0.5 * (xn * xn + yn * yn));
    }
    mesh
}

/// Closed regular icosahedron with circumradius sqrt(1 + phi^2), outward CCW
/// faces. Useful as a boundary-free fixture.
pub fn icosahedron() -> TriMesh {
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let positions = vec![
        Point3::new(-1.0, phi, 0.0),
        Point3::new(1.0, phi, 0.0),
        Point3::new(-1.0, -phi, 0.0),
        Point3::new(1.0, -phi, 0.0),
        Point3::new(0.0, -1.0, phi),
        Point3::new(0.0, 1.0, phi),
        Point3::new(0.0, -1.0, -phi),
        Point3::new(0.0, 1.0, -phi),
        Point3::new(phi, 0.0, -1.0),
        Point3::new(phi, 0.0, 1.0),
        Point3::new(-phi, 0.0, -1.0),
        Point3::new(-phi, 0.0, 1.0),
    ];
    let triangles = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    TriMesh::new(positions, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::classify_boundary;

    #[test]
    fn grid_dimensions() {
        let m = flat_grid(3, 2, 3.0, 2.0);
        assert_eq!(m.positions.len(), 12);
        assert_eq!(m.triangles.len(), 12);
        m.validate().unwrap();
        assert!((m.total_area() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_grid_mirrors_its_own_triangulation() {
        let w = 2.0;
        let m = flat_grid_symmetric(4, 4, w, w);
        m.validate().unwrap();
        // Mirror each triangle across x = w/2 and check the reflected triangle
        // exists (as a set of vertex positions).
        let key = |p: &Point3<f64>| ((p.x * 1e9).round() as i64, (p.y * 1e9).round() as i64);
        let mut tri_keys: std::collections::BTreeSet<Vec<(i64, i64)>> = Default::default();
        for t in 0..m.triangles.len() {
            let mut k: Vec<_> = m.triangle_points(t).iter().map(key).collect();
            k.sort();
            tri_keys.insert(k);
        }
        for t in 0..m.triangles.len() {
            let mut k: Vec<_> = m
                .triangle_points(t)
                .iter()
                .map(|p| {
                    let mirrored = Point3::new(w - p.x, p.y, p.z);
                    key(&mirrored)
                })
                .collect();
            k.sort();
            assert!(tri_keys.contains(&k), "triangle {t} has no mirror image");
        }
    }

    #[test]
    fn disk_boundary_is_rim() {
        let m = disk(16, 3, 2.0);
        m.validate().unwrap();
        let info = classify_boundary(&m, 30f64.to_radians());
        assert_eq!(info.vertices.len(), 16);
        assert_eq!(m.positions.len(), 1 + 16 * 3);
    }

    #[test]
    fn paraboloid_has_flat_corners_and_high_center() {
        let m = paraboloid(4, 2.0, 0.5);
        m.validate().unwrap();
        let zmax = m.positions.iter().map(|p| p.z).fold(f64::MIN, f64::max);
        let zmin = m.positions.iter().map(|p| p.z).fold(f64::MAX, f64::min);
        assert!((zmax - 0.5).abs() < 1e-12);
        assert!(zmin.abs() < 1e-12);
    }
}
