//! Triangle-mesh container, OBJ i/o, adjacency and boundary queries,
//! graph geodesics, and midpoint edge splitting.
//!
//! Conventions used across the crate:
//! - triangles are CCW index triples into `positions`;
//! - an edge is an unordered pair stored as `(min, max)`;
//! - a boundary edge has exactly one incident triangle;
//! - all derived lists are returned in sorted order so downstream code is
//!   deterministic without extra care.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{Point3, Vector3};

use crate::{Error, Result};

/// Indexed triangle mesh in 3D.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub positions: Vec<Point3<f64>>,
    pub triangles: Vec<[usize; 3]>,
}

/// Result of [`classify_boundary`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryInfo {
    /// Sorted indices of vertices incident to at least one boundary edge.
    pub vertices: Vec<usize>,
    /// Sorted indices of boundary vertices whose turning angle exceeds the
    /// corner threshold (plus any boundary vertex with an irregular number of
    /// incident boundary edges, which is always treated as a corner).
    pub corners: Vec<usize>,
}

/// Distances and nearest-source labels from a multi-source Dijkstra run on
/// the edge graph. `nearest[v]` indexes into `sources`; unreachable vertices
/// get `f64::INFINITY` and `usize::MAX`.
#[derive(Debug, Clone)]
pub struct GeodesicField {
    pub sources: Vec<usize>,
    pub dist: Vec<f64>,
    pub nearest: Vec<usize>,
}

impl GeodesicField {
    /// Vertex index of the nearest source of `v`, if reachable.
    pub fn nearest_source_vertex(&self, v: usize) -> Option<usize> {
        self.sources.get(*self.nearest.get(v)?).copied()
    }
}

/// One midpoint vertex created by an edge split, recording which edge of the
/// input mesh it subdivides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitEvent {
    /// Index of the new vertex in the output mesh.
    pub vertex: usize,
    /// Endpoints of the split edge, in the input mesh's numbering.
    pub edge: (usize, usize),
}

impl TriMesh {
    pub fn new(positions: Vec<Point3<f64>>, triangles: Vec<[usize; 3]>) -> TriMesh {
        TriMesh {
            positions,
            triangles,
        }
    }

    /// Checks index bounds, triangle non-degeneracy, and edge-manifoldness
    /// (every edge incident to at most two triangles).
    pub fn validate(&self) -> Result<()> {
        let n = self.positions.len();
        for (ti, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                if v >= n {
                    return Err(Error::Parameter {
                        name: "mesh",
                        msg: format!("triangle {ti} references vertex {v} but mesh has {n}"),
                    });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[2] == tri[0] {
                return Err(Error::DegenerateTriangle {
                    tri: ti,
                    area: 0.0,
                    min_area: 0.0,
                });
            }
            let area = self.triangle_area(ti);
            let l = self.longest_edge_of(ti);
            let min_area = 1e-12 * l * l;
            if !(area > min_area) {
                return Err(Error::DegenerateTriangle { tri: ti, area, min_area });
            }
        }
        for ((a, b), tris) in self.edge_triangles() {
            if tris.len() > 2 {
                return Err(Error::NonManifoldEdge {
                    a,
                    b,
                    count: tris.len(),
                });
            }
        }
        Ok(())
    }

    pub fn triangle_points(&self, t: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.triangles[t];
        [self.positions[a], self.positions[b], self.positions[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.triangle_points(t);
        0.5 * (p1 - p0).cross(&(p2 - p0)).norm()
    }

    /// Unit normal of triangle `t` (CCW orientation).
    pub fn triangle_normal(&self, t: usize) -> Vector3<f64> {
        let [p0, p1, p2] = self.triangle_points(t);
        let n = (p1 - p0).cross(&(p2 - p0));
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            Vector3::zeros()
        }
    }

    pub fn barycenter(&self, t: usize) -> Point3<f64> {
        let [p0, p1, p2] = self.triangle_points(t);
        Point3::from((p0.coords + p1.coords + p2.coords) / 3.0)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    fn longest_edge_of(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.triangle_points(t);
        (p1 - p0)
            .norm()
            .max((p2 - p1).norm())
            .max((p0 - p2).norm())
    }

    /// Sorted unique undirected edges.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut set = BTreeSet::new();
        for tri in &self.triangles {
            for k in 0..3 {
                set.insert(ordered(tri[k], tri[(k + 1) % 3]));
            }
        }
        set.into_iter().collect()
    }

    /// Map from each undirected edge to the sorted list of incident triangles.
    pub fn edge_triangles(&self) -> BTreeMap<(usize, usize), Vec<usize>> {
        let mut map: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (ti, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                map.entry(ordered(tri[k], tri[(k + 1) % 3]))
                    .or_default()
                    .push(ti);
            }
        }
        map
    }

    /// Sorted list of edges with exactly one incident triangle.
    pub fn boundary_edges(&self) -> Vec<(usize, usize)> {
        self.edge_triangles()
            .into_iter()
            .filter(|(_, tris)| tris.len() == 1)
            .map(|(e, _)| e)
            .collect()
    }

    /// Boundary loops as cyclic vertex lists. Each loop starts at its lowest
    /// vertex index and walks toward that vertex's lower-indexed boundary
    /// neighbor, so the output is deterministic. Errors if a boundary vertex
    /// has other than two incident boundary edges.
    pub fn boundary_loops(&self) -> Result<Vec<Vec<usize>>> {
        let mut nbrs: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (a, b) in self.boundary_edges() {
            nbrs.entry(a).or_default().push(b);
            nbrs.entry(b).or_default().push(a);
        }
        for (v, n) in &mut nbrs {
            n.sort_unstable();
            if n.len() != 2 {
                return Err(Error::Parameter {
                    name: "boundary",
                    msg: format!("vertex {v} has {} boundary edges, expected 2", n.len()),
                });
            }
        }
        let mut seen = BTreeSet::new();
        let mut loops = Vec::new();
        for &start in nbrs.keys() {
            if seen.contains(&start) {
                continue;
            }
            let mut cycle = vec![start];
            seen.insert(start);
            let mut prev = start;
            let mut cur = nbrs[&start][0];
            while cur != start {
                cycle.push(cur);
                seen.insert(cur);
                let n = &nbrs[&cur];
                let next = if n[0] == prev { n[1] } else { n[0] };
                prev = cur;
                cur = next;
            }
            loops.push(cycle);
        }
        Ok(loops)
    }

    /// Per-vertex sorted neighbor lists over the edge graph.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut nbrs = vec![BTreeSet::new(); self.positions.len()];
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                nbrs[a].insert(b);
                nbrs[b].insert(a);
            }
        }
        nbrs.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// Sorted list of triangles incident to each vertex.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.positions.len()];
        for (ti, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                out[v].push(ti);
            }
        }
        out
    }

    /// Adjacent triangle across each of the three edges of every triangle
    /// (`None` on the boundary). Edge `k` of a triangle joins its vertices
    /// `k` and `k+1`.
    pub fn triangle_adjacency(&self) -> Vec<[Option<usize>; 3]> {
        let edge_tris = self.edge_triangles();
        let mut adj = vec![[None; 3]; self.triangles.len()];
        for (ti, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let e = ordered(tri[k], tri[(k + 1) % 3]);
                if let Some(list) = edge_tris.get(&e) {
                    adj[ti][k] = list.iter().copied().find(|&o| o != ti);
                }
            }
        }
        adj
    }
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

// ---------------------------------------------------------------------------
// OBJ i/o

/// Loads a triangle mesh from a Wavefront OBJ file. Only `v` and `f`
/// directives are interpreted; normals, texture coordinates, groups and
/// comments are ignored. Faces must be triangles.
pub fn load_obj(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_obj(&text, path)
}

fn parse_obj(text: &str, path: &Path) -> Result<TriMesh> {
    let mut positions = Vec::new();
    let mut triangles = Vec::new();
    let err = |line: usize, msg: String| Error::ObjParse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("v") => {
                let mut coord = |axis: &str| -> Result<f64> {
                    fields
                        .next()
                        .ok_or_else(|| err(line_no, format!("vertex missing {axis} coordinate")))?
                        .parse::<f64>()
                        .map_err(|e| err(line_no, format!("bad {axis} coordinate: {e}")))
                };
                let (x, y, z) = (coord("x")?, coord("y")?, coord("z")?);
                positions.push(Point3::new(x, y, z));
            }
            Some("f") => {
                let mut verts = Vec::new();
                for field in fields {
                    let first = field.split('/').next().unwrap_or("");
                    let idx: isize = first
                        .parse()
                        .map_err(|e| err(line_no, format!("bad face index {first:?}: {e}")))?;
                    let resolved = if idx > 0 {
                        (idx - 1) as usize
                    } else if idx < 0 {
                        let back = (-idx) as usize;
                        if back > positions.len() {
                            return Err(err(line_no, format!("relative index {idx} out of range")));
                        }
                        positions.len() - back
                    } else {
                        return Err(err(line_no, "face index 0 is invalid".to_string()));
                    };
                    verts.push(resolved);
                }
                if verts.len() != 3 {
                    return Err(Error::NonTriangularFace {
                        path: path.to_path_buf(),
                        line: line_no,
                        arity: verts.len(),
                    });
                }
                triangles.push([verts[0], verts[1], verts[2]]);
            }
            _ => {} // vn, vt, g, o, s, mtllib, usemtl, ...
        }
    }
    let mesh = TriMesh::new(positions, triangles);
    mesh.validate()?;
    Ok(mesh)
}

/// Writes a triangle mesh as OBJ. Coordinates use scientific notation with
/// enough digits that `save -> load -> save` is byte-identical.
pub fn save_obj(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut buf = Vec::with_capacity(mesh.positions.len() * 48 + mesh.triangles.len() * 16);
    for p in &mesh.positions {
        writeln!(buf, "v {:.17e} {:.17e} {:.17e}", p.x, p.y, p.z).map_err(io_err)?;
    }
    for t in &mesh.triangles {
        writeln!(buf, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).map_err(io_err)?;
    }
    std::fs::write(path, buf).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Convenience wrapper that reports which file failed when loading a mesh
/// referenced from a config.
pub fn load_obj_named(path: &PathBuf) -> Result<TriMesh> {
    load_obj(path)
}

// ---------------------------------------------------------------------------
// Boundary classification

/// Finds boundary vertices and corner vertices. A boundary vertex is a
/// corner when the turning angle between its two incident boundary edges
/// exceeds `corner_threshold` (radians), or when it does not have exactly
/// two incident boundary edges.
pub fn classify_boundary(mesh: &TriMesh, corner_threshold: f64) -> BoundaryInfo {
    let bedges = mesh.boundary_edges();
    let mut incident: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(a, b) in &bedges {
        incident.entry(a).or_default().push(b);
        incident.entry(b).or_default().push(a);
    }
    let vertices: Vec<usize> = incident.keys().copied().collect();
    let threshold = corner_threshold;
    let mut corners = Vec::new();
    for (&v, nbrs) in &incident {
        if nbrs.len() != 2 {
            corners.push(v);
            continue;
        }
        let d_in = mesh.positions[v] - mesh.positions[nbrs[0]];
        let d_out = mesh.positions[nbrs[1]] - mesh.positions[v];
        let cos = d_in.dot(&d_out) / (d_in.norm() * d_out.norm());
        let turn = cos.clamp(-1.0, 1.0).acos();
        if turn > threshold {
            corners.push(v);
        }
    }
    BoundaryInfo { vertices, corners }
}

// ---------------------------------------------------------------------------
// Graph geodesics

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    dist: f64,
    source_vertex: usize,
    vertex: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // BinaryHeap is a max-heap; reverse so smaller distance (then smaller
        // source vertex) pops first.
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.source_vertex.cmp(&self.source_vertex))
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Multi-source Dijkstra over the edge graph with Euclidean edge weights.
/// Ties in distance are broken toward the source with the lower vertex index,
/// which makes labels deterministic.
pub fn geodesic_distances(mesh: &TriMesh, sources: &[usize]) -> Result<GeodesicField> {
    if sources.is_empty() {
        return Err(Error::Parameter {
            name: "sources",
            msg: "at least one source vertex is required".into(),
        });
    }
    for &s in sources {
        if s >= mesh.positions.len() {
            return Err(Error::Parameter {
                name: "sources",
                msg: format!("source vertex {s} out of range"),
            });
        }
    }
    let nbrs = mesh.vertex_neighbors();
    let n = mesh.positions.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut nearest = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    for (si, &s) in sources.iter().enumerate() {
        // On duplicate sources the lower slice index wins, matching the
        // vertex-index tie-break (equal vertices, first occurrence kept).
        if dist[s] > 0.0 || nearest[s] == usize::MAX {
            dist[s] = 0.0;
            nearest[s] = si;
            heap.push(HeapEntry {
                dist: 0.0,
                source_vertex: s,
                vertex: s,
            });
        }
    }
    while let Some(entry) = heap.pop() {
        let v = entry.vertex;
        if entry.dist > dist[v]
            || (entry.dist == dist[v] && sources[nearest[v]] != entry.source_vertex)
        {
            continue; // stale
        }
        for &u in &nbrs[v] {
            let w = (mesh.positions[u] - mesh.positions[v]).norm();
            let nd = entry.dist + w;
            let better = nd < dist[u]
                || (nd == dist[u]
                    && nearest[u] != usize::MAX
                    && entry.source_vertex < sources[nearest[u]]);
            if better {
                dist[u] = nd;
                nearest[u] = nearest[v];
                heap.push(HeapEntry {
                    dist: nd,
                    source_vertex: entry.source_vertex,
                    vertex: u,
                });
            }
        }
    }
    Ok(GeodesicField {
        sources: sources.to_vec(),
        dist,
        nearest,
    })
}

// ---------------------------------------------------------------------------
// Edge splitting

/// Result of a simultaneous edge-split pass.
#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub mesh: TriMesh,
    /// One event per new midpoint vertex.
    pub events: Vec<SplitEvent>,
    /// For each output triangle, the input triangle it subdivides.
    pub parents: Vec<usize>,
}

/// Splits every edge longer than `threshold` at its midpoint in a single
/// simultaneous pass, retriangulating each affected triangle (1-to-2, 1-to-3
/// or 1-to-4). Returns the refined mesh and one [`SplitEvent`] per new vertex.
pub fn split_long_edges(mesh: &TriMesh, threshold: f64) -> Result<SplitOutcome> {
    if !(threshold > 0.0) {
        return Err(Error::Parameter {
            name: "threshold",
            msg: format!("edge-length threshold must be positive, got {threshold}"),
        });
    }
    let long: BTreeSet<(usize, usize)> = mesh
        .edges()
        .into_iter()
        .filter(|&(a, b)| (mesh.positions[a] - mesh.positions[b]).norm() > threshold)
        .collect();
    Ok(split_edges(mesh, &long))
}

/// Splits exactly the given set of edges at their midpoints. Exposed so that
/// a companion mesh with identical connectivity can be refined in lockstep.
pub fn split_edges(mesh: &TriMesh, edges: &BTreeSet<(usize, usize)>) -> SplitOutcome {
    let mut positions = mesh.positions.clone();
    let mut events = Vec::new();
    let mut midpoint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for &(a, b) in edges {
        let m = positions.len();
        positions.push(Point3::from(
            (mesh.positions[a].coords + mesh.positions[b].coords) * 0.5,
        ));
        midpoint.insert((a, b), m);
        events.push(SplitEvent { vertex: m, edge: (a, b) });
    }

    let mut triangles = Vec::with_capacity(mesh.triangles.len());
    let mut parents = Vec::with_capacity(mesh.triangles.len());
    for (pi, tri) in mesh.triangles.iter().enumerate() {
        let mids = [
            midpoint.get(&ordered(tri[0], tri[1])).copied(),
            midpoint.get(&ordered(tri[1], tri[2])).copied(),
            midpoint.get(&ordered(tri[2], tri[0])).copied(),
        ];
        match mids.iter().filter(|m| m.is_some()).count() {
            0 => triangles.push(*tri),
            1 => {
                // Rotate so the split edge is (v0, v1).
                let k = mids.iter().position(|m| m.is_some()).unwrap();
                let (v0, v1, v2) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let m = mids[k].unwrap();
                triangles.push([v0, m, v2]);
                triangles.push([m, v1, v2]);
            }
            2 => {
                // Rotate so the split edges are (v0, v1) and (v1, v2).
                let k = (0..3)
                    .find(|&k| mids[k].is_some() && mids[(k + 1) % 3].is_some())
                    .unwrap();
                let (v0, v1, v2) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let (m0, m1) = (mids[k].unwrap(), mids[(k + 1) % 3].unwrap());
                triangles.push([v0, m0, v2]);
                triangles.push([m0, v1, m1]);
                triangles.push([m0, m1, v2]);
            }
            _ => {
                let (m0, m1, m2) = (mids[0].unwrap(), mids[1].unwrap(), mids[2].unwrap());
                triangles.push([tri[0], m0, m2]);
                triangles.push([m0, tri[1], m1]);
                triangles.push([m2, m1, tri[2]]);
                triangles.push([m0, m1, m2]);
            }
        }
        while parents.len() < triangles.len() {
            parents.push(pi);
        }
    }
    SplitOutcome {
        mesh: TriMesh::new(positions, triangles),
        events,
        parents,
    }
}

// ---------------------------------------------------------------------------
// Polygonal meshes

/// Face-vertex polygonal mesh produced by tessellation extraction. Faces are
/// CCW vertex cycles of arbitrary length (at least 3).
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMesh {
    pub positions: Vec<Point3<f64>>,
    pub faces: Vec<Vec<usize>>,
    /// Per-face shape metrics, filled in by the regularizer; empty until then.
    pub metrics: Vec<FaceMetrics>,
}

/// Shape-quality numbers attached to a polygon.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FaceMetrics {
    /// Mean distance to the best-fit plane over half the perimeter.
    pub planarity: f64,
    /// Sum of squared deviations from the stretched regular target over face area.
    pub regularity: f64,
}

impl PolyMesh {
    pub fn new(positions: Vec<Point3<f64>>, faces: Vec<Vec<usize>>) -> PolyMesh {
        PolyMesh {
            positions,
            faces,
            metrics: Vec::new(),
        }
    }

    /// Sorted unique undirected edges over all faces.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut set = BTreeSet::new();
        for face in &self.faces {
            for k in 0..face.len() {
                set.insert(ordered(face[k], face[(k + 1) % face.len()]));
            }
        }
        set.into_iter().collect()
    }

    /// Map from each undirected edge to the sorted list of incident faces.
    pub fn edge_faces(&self) -> BTreeMap<(usize, usize), Vec<usize>> {
        let mut map: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (fi, face) in self.faces.iter().enumerate() {
            for k in 0..face.len() {
                map.entry(ordered(face[k], face[(k + 1) % face.len()]))
                    .or_default()
                    .push(fi);
            }
        }
        map
    }

    /// Sorted vertices lying on at least one boundary edge (an edge with a
    /// single incident face).
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut set = BTreeSet::new();
        for ((a, b), faces) in self.edge_faces() {
            if faces.len() == 1 {
                set.insert(a);
                set.insert(b);
            }
        }
        set.into_iter().collect()
    }

    /// Total edge length (each undirected edge counted once).
    pub fn total_edge_length(&self) -> f64 {
        self.edges()
            .iter()
            .map(|&(a, b)| (self.positions[a] - self.positions[b]).norm())
            .sum()
    }

    pub fn face_centroid(&self, f: usize) -> Point3<f64> {
        let face = &self.faces[f];
        let sum: Vector3<f64> = face.iter().map(|&v| self.positions[v].coords).sum();
        Point3::from(sum / face.len() as f64)
    }

    /// Per-vertex sorted neighbor lists over the polygon edge graph.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut nbrs = vec![BTreeSet::new(); self.positions.len()];
        for face in &self.faces {
            for k in 0..face.len() {
                let (a, b) = (face[k], face[(k + 1) % face.len()]);
                nbrs[a].insert(b);
                nbrs[b].insert(a);
            }
        }
        nbrs.into_iter().map(|s| s.into_iter().collect()).collect()
    }
}

/// Writes a polygonal mesh as OBJ (faces of arbitrary arity).
pub fn save_poly_obj(mesh: &PolyMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut buf = Vec::new();
    for p in &mesh.positions {
        writeln!(buf, "v {:.17e} {:.17e} {:.17e}", p.x, p.y, p.z).map_err(io_err)?;
    }
    for face in &mesh.faces {
        let mut line = String::from("f");
        for &v in face {
            line.push_str(&format!(" {}", v + 1));
        }
        writeln!(buf, "{line}").map_err(io_err)?;
    }
    std::fs::write(path, buf).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a polygonal mesh from OBJ, accepting faces of any arity >= 3.
pub fn load_poly_obj(path: impl AsRef<Path>) -> Result<PolyMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("v") => {
                let coords: Vec<f64> = fields
                    .take(3)
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::ObjParse {
                        path: path.to_path_buf(),
                        line: line_no,
                        msg: format!("bad vertex coordinate: {e}"),
                    })?;
                if coords.len() != 3 {
                    return Err(Error::ObjParse {
                        path: path.to_path_buf(),
                        line: line_no,
                        msg: "vertex needs three coordinates".into(),
                    });
                }
                positions.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut verts = Vec::new();
                for field in fields {
                    let first = field.split('/').next().unwrap_or("");
                    let idx: usize = first.parse().map_err(|e| Error::ObjParse {
                        path: path.to_path_buf(),
                        line: line_no,
                        msg: format!("bad face index {first:?}: {e}"),
                    })?;
                    verts.push(idx - 1);
                }
                if verts.len() < 3 {
                    return Err(Error::ObjParse {
                        path: path.to_path_buf(),
                        line: line_no,
                        msg: format!("face with {} vertices", verts.len()),
                    });
                }
                faces.push(verts);
            }
            _ => {}
        }
    }
    Ok(PolyMesh::new(positions, faces))
}
