//! Approximate centroidal Voronoi tessellation on the deformed surface.
//!
//! Seeds are vertices of the deformed mesh M'. Sampling runs in three stages
//! (domain corners, boundary darts with 1D spacing, interior darts with graph
//! spacing), Lloyd relaxation alternates a 1D border pass with full geodesic
//! Voronoi recomputation and quadric-centroid moves, and extraction turns the
//! converged diagram into a hex-dominant polygon mesh — nodes at three-region
//! junctions, boundary transitions, and apexes at on-boundary seeds — with
//! all positions mapped back to the original surface M.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use nalgebra::{Point3, Vector3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::deform::DeformedDomain;
use crate::mesh::{geodesic_distances, BoundaryInfo, PolyMesh, TriMesh};
use crate::{Error, Result};

/// Numerical floor for inverse-distance weights at extraction nodes.
const WEIGHT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedKind {
    /// Forced seed at a domain corner; never moves.
    Corner,
    /// Seed on the boundary; relaxes along the boundary only.
    Border,
    /// Free seed; relaxes by quadric centroids.
    Interior,
}

/// A set of sample sites, each a vertex of the sampling mesh.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedSet {
    pub vertices: Vec<usize>,
    pub kinds: Vec<SeedKind>,
    /// RNG seed the set was drawn with (carried for reproducibility).
    pub rng_seed: u64,
}

impl SeedSet {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

/// Discrete Voronoi diagram of the seeds over the sampling mesh.
#[derive(Debug, Clone)]
pub struct VoronoiState {
    /// Per-vertex nearest seed (index into the seed set).
    pub assignment: Vec<usize>,
    /// Per-vertex geodesic distance to its seed.
    pub dist: Vec<f64>,
    /// Unordered seed-index pairs whose regions share at least one mesh edge.
    pub adjacency: BTreeSet<[usize; 2]>,
    /// Per-seed sorted vertex lists.
    pub regions: Vec<Vec<usize>>,
}

/// Computes the discrete geodesic Voronoi diagram of the seeds.
pub fn voronoi(mesh: &TriMesh, seeds: &SeedSet) -> Result<VoronoiState> {
    let g = geodesic_distances(mesh, &seeds.vertices)?;
    if g.nearest.iter().any(|&n| n == usize::MAX) {
        return Err(Error::Parameter {
            name: "seeds",
            msg: "sampling mesh is disconnected: some vertices are unreachable".into(),
        });
    }
    let mut regions = vec![Vec::new(); seeds.len()];
    for (v, &s) in g.nearest.iter().enumerate() {
        regions[s].push(v);
    }
    let mut adjacency = BTreeSet::new();
    for (a, b) in mesh.edges() {
        let (sa, sb) = (g.nearest[a], g.nearest[b]);
        if sa != sb {
            let mut key = [sa, sb];
            key.sort_unstable();
            adjacency.insert(key);
        }
    }
    Ok(VoronoiState {
        assignment: g.nearest,
        dist: g.dist,
        adjacency,
        regions,
    })
}

// ---------------------------------------------------------------------------
// Boundary geometry (1D arclength structure of the boundary loops)

struct BorderGeometry {
    /// Cyclic vertex lists per loop.
    loops: Vec<Vec<usize>>,
    /// Arclength coordinate of each loop vertex (same shape as `loops`).
    coords: Vec<Vec<f64>>,
    /// Total length per loop.
    lengths: Vec<f64>,
    /// vertex -> (loop index, position within loop).
    locate: BTreeMap<usize, (usize, usize)>,
}

impl BorderGeometry {
    fn build(mesh: &TriMesh) -> Result<BorderGeometry> {
        let loops = mesh.boundary_loops()?;
        let mut coords = Vec::with_capacity(loops.len());
        let mut lengths = Vec::with_capacity(loops.len());
        let mut locate = BTreeMap::new();
        for (li, lp) in loops.iter().enumerate() {
            let mut cs = Vec::with_capacity(lp.len());
            let mut s = 0.0;
            for (k, &v) in lp.iter().enumerate() {
                cs.push(s);
                let next = lp[(k + 1) % lp.len()];
                s += (mesh.positions[next] - mesh.positions[v]).norm();
                locate.insert(v, (li, k));
            }
            coords.push(cs);
            lengths.push(s);
        }
        Ok(BorderGeometry {
            loops,
            coords,
            lengths,
            locate,
        })
    }

    /// 1D distance along the boundary between two boundary vertices;
    /// infinite when they lie on different loops.
    fn distance(&self, a: usize, b: usize) -> f64 {
        let (la, ka) = self.locate[&a];
        let (lb, kb) = self.locate[&b];
        if la != lb {
            return f64::INFINITY;
        }
        let d = (self.coords[la][ka] - self.coords[lb][kb]).abs();
        d.min(self.lengths[la] - d)
    }
}

// ---------------------------------------------------------------------------
// Poisson sampling

/// Truncated Dijkstra from `source` over the mesh edge graph: lowers
/// `coverage` to min(coverage, dist) for all vertices within `radius`.
fn cover_from(
    source: usize,
    radius: f64,
    positions: &[Point3<f64>],
    nbrs: &[Vec<usize>],
    coverage: &mut [f64],
) {
    #[derive(PartialEq)]
    struct E {
        d: f64,
        v: usize,
    }
    impl Eq for E {}
    impl Ord for E {
        fn cmp(&self, o: &Self) -> std::cmp::Ordering {
            o.d.total_cmp(&self.d).then_with(|| o.v.cmp(&self.v))
        }
    }
    impl PartialOrd for E {
        fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(o))
        }
    }
    let mut local: BTreeMap<usize, f64> = BTreeMap::new();
    local.insert(source, 0.0);
    let mut heap = BinaryHeap::new();
    heap.push(E { d: 0.0, v: source });
    while let Some(E { d, v }) = heap.pop() {
        if d > *local.get(&v).unwrap_or(&f64::INFINITY) {
            continue;
        }
        if d < coverage[v] {
            coverage[v] = d;
        }
        for &u in &nbrs[v] {
            let nd = d + (positions[u] - positions[v]).norm();
            if nd <= radius && nd < *local.get(&u).unwrap_or(&f64::INFINITY) {
                local.insert(u, nd);
                heap.push(E { d: nd, v: u });
            }
        }
    }
}

/// Three-stage Poisson-disk sampling of the deformed mesh with spacing
/// radius `r`:
/// 1. every corner becomes a seed;
/// 2. boundary vertices are visited in RNG-shuffled order and kept when their
///    1D boundary distance to all kept boundary seeds is at least `r`;
/// 3. interior vertices are visited in RNG-shuffled order and kept when their
///    graph distance to every kept seed is at least `r`.
///
/// The sample is maximal: after stage 3 no vertex is `r` or farther from all
/// seeds. The mesh must resolve the radius — `r` below twice the longest
/// edge returns [`Error::RadiusTooSmall`].
pub fn poisson_sample(
    domain: &DeformedDomain,
    boundary: &BoundaryInfo,
    r: f64,
    rng_seed: u64,
) -> Result<SeedSet> {
    let mesh = &domain.deformed;
    if !(r > 0.0) {
        return Err(Error::Parameter {
            name: "radius",
            msg: format!("sampling radius must be positive, got {r}"),
        });
    }
    let max_edge = mesh
        .edges()
        .into_iter()
        .map(|(a, b)| (mesh.positions[a] - mesh.positions[b]).norm())
        .fold(0.0f64, f64::max);
    if r < 2.0 * max_edge {
        return Err(Error::RadiusTooSmall {
            r,
            limit: 2.0 * max_edge,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let nbrs = mesh.vertex_neighbors();
    let mut vertices = Vec::new();
    let mut kinds = Vec::new();

    // Stage 1: corners.
    for &c in &boundary.corners {
        vertices.push(c);
        kinds.push(SeedKind::Corner);
    }

    // Stage 2: boundary darts with 1D spacing.
    let border = if boundary.vertices.is_empty() {
        None
    } else {
        Some(BorderGeometry::build(mesh)?)
    };
    if let Some(border) = &border {
        let corner_set: BTreeSet<usize> = boundary.corners.iter().copied().collect();
        let mut candidates: Vec<usize> = boundary
            .vertices
            .iter()
            .copied()
            .filter(|v| !corner_set.contains(v))
            .collect();
        candidates.shuffle(&mut rng);
        let mut kept: Vec<usize> = boundary.corners.clone();
        for v in candidates {
            if kept.iter().all(|&s| border.distance(v, s) >= r) {
                kept.push(v);
                vertices.push(v);
                kinds.push(SeedKind::Border);
            }
        }
    }

    // Stage 3: interior darts with graph spacing. Coverage holds the graph
    // distance to the nearest already-kept seed (truncated at r).
    let boundary_set: BTreeSet<usize> = boundary.vertices.iter().copied().collect();
    let mut coverage = vec![f64::INFINITY; mesh.positions.len()];
    for &s in &vertices {
        cover_from(s, r, &mesh.positions, &nbrs, &mut coverage);
    }
    let mut candidates: Vec<usize> = (0..mesh.positions.len())
        .filter(|v| !boundary_set.contains(v))
        .collect();
    candidates.shuffle(&mut rng);
    for v in candidates {
        if coverage[v] >= r {
            vertices.push(v);
            kinds.push(SeedKind::Interior);
            cover_from(v, r, &mesh.positions, &nbrs, &mut coverage);
        }
    }

    if vertices.is_empty() {
        return Err(Error::Parameter {
            name: "radius",
            msg: format!("no seeds could be placed with radius {r}"),
        });
    }
    Ok(SeedSet {
        vertices,
        kinds,
        rng_seed,
    })
}

// ---------------------------------------------------------------------------
// 1D border Lloyd

/// One-dimensional Lloyd relaxation on a polyline or cycle of sample points.
///
/// `coords` are the arclength coordinates of the path vertices (ascending);
/// `cycle_length` is `Some(total)` for a closed loop. `corners` and `free`
/// index into `coords`; corners are fixed seeds, free seeds move. Each
/// iteration assigns every path vertex to its nearest seed (1D Voronoi) and
/// moves each free seed to the member vertex of its own cell closest to the
/// cell's arc midpoint. Runs to a fixed point (or `max_iters`) and returns
/// the final free-seed indices in the input's order.
pub fn relax_border_1d(
    coords: &[f64],
    cycle_length: Option<f64>,
    corners: &[usize],
    free: &[usize],
    max_iters: usize,
) -> Vec<usize> {
    let dist = |a: f64, b: f64| -> f64 {
        let d = (a - b).abs();
        match cycle_length {
            Some(l) => d.min(l - d),
            None => d,
        }
    };
    let mut free: Vec<usize> = free.to_vec();
    for _ in 0..max_iters {
        let seeds: Vec<usize> = corners.iter().chain(free.iter()).copied().collect();
        // Nearest-seed assignment; ties to the earlier seed in `seeds`.
        let assign: Vec<usize> = coords
            .iter()
            .map(|&c| {
                let mut best = (0usize, f64::INFINITY);
                for (si, &s) in seeds.iter().enumerate() {
                    let d = dist(c, coords[s]);
                    if d < best.1 {
                        best = (si, d);
                    }
                }
                best.0
            })
            .collect();
        let mut next = free.clone();
        for (fi, slot) in next.iter_mut().enumerate() {
            let si = corners.len() + fi;
            let members: Vec<usize> = (0..coords.len()).filter(|&v| assign[v] == si).collect();
            if members.is_empty() {
                continue;
            }
            // Arc midpoint: halfway between the cell's extreme supported
            // points. On a cycle, measure relative to the seed to stay on the
            // correct side of the wraparound.
            let seed_c = coords[free[fi]];
            let offsets: Vec<f64> = members
                .iter()
                .map(|&v| {
                    let mut o = coords[v] - seed_c;
                    if let Some(l) = cycle_length {
                        if o > l / 2.0 {
                            o -= l;
                        } else if o < -l / 2.0 {
                            o += l;
                        }
                    }
                    o
                })
                .collect();
            let lo = offsets.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = offsets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mid = (lo + hi) / 2.0;
            let mut best = (members[0], f64::INFINITY);
            for (k, &v) in members.iter().enumerate() {
                let d = (offsets[k] - mid).abs();
                if d < best.1 {
                    best = (v, d);
                }
            }
            *slot = best.0;
        }
        if next == free {
            break;
        }
        free = next;
    }
    free
}

// ---------------------------------------------------------------------------
// Lloyd relaxation on the surface

#[derive(Debug, Clone)]
pub struct RelaxStats {
    pub iters: usize,
    pub converged: bool,
    /// Discrete CVT energy sum dist(v, seed)^2 after each iteration.
    pub energy_history: Vec<f64>,
    /// Notes about deleted empty regions.
    pub warnings: Vec<String>,
}

/// The vertex of `region` minimizing the quadric Q(x) = sum_{v in region}
/// |p_v - x|^2, accumulated as (mass, first moment) so each candidate costs
/// O(1). Ties break toward the lower vertex index.
pub fn centroid_by_quadric(region: &[usize], positions: &[Point3<f64>]) -> usize {
    assert!(!region.is_empty(), "empty region has no centroid");
    let n = region.len() as f64;
    let mut first = Vector3::zeros();
    for &v in region {
        first += positions[v].coords;
    }
    let mut best = (usize::MAX, f64::INFINITY);
    for &v in region {
        let x = positions[v].coords;
        // Quadric up to the constant term, which does not affect the argmin.
        let q = n * x.norm_squared() - 2.0 * first.dot(&x);
        if q < best.1 || (q == best.1 && v < best.0) {
            best = (v, q);
        }
    }
    best.0
}

/// Discrete CVT energy: sum over vertices of squared geodesic distance to
/// the assigned seed.
fn cvt_energy(state: &VoronoiState) -> f64 {
    state.dist.iter().map(|d| d * d).sum()
}

/// Decides whether moving a seed from `old_v` (with current per-vertex
/// distances `state.dist`) to `cand` keeps the region's geodesic moment
/// sum_{v in region} dist(v, seed)^2 from increasing. The candidate moment is
/// computed exactly by a Dijkstra from `cand` that stops once every region
/// vertex is settled. Guarding each move this way makes the recorded CVT
/// energy provably non-increasing: reassignment can only lower each vertex's
/// term afterwards.
fn move_does_not_increase_moment(
    region: &[usize],
    old_v: usize,
    cand: usize,
    positions: &[Point3<f64>],
    nbrs: &[Vec<usize>],
    state: &VoronoiState,
) -> bool {
    if cand == old_v {
        return true;
    }
    let old_sum: f64 = region.iter().map(|&v| state.dist[v] * state.dist[v]).sum();
    #[derive(PartialEq)]
    struct E {
        d: f64,
        v: usize,
    }
    impl Eq for E {}
    impl Ord for E {
        fn cmp(&self, o: &Self) -> std::cmp::Ordering {
            o.d.total_cmp(&self.d).then_with(|| o.v.cmp(&self.v))
        }
    }
    impl PartialOrd for E {
        fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(o))
        }
    }
    let in_region: BTreeSet<usize> = region.iter().copied().collect();
    let mut remaining = in_region.len();
    let mut new_sum = 0.0;
    let mut dist: BTreeMap<usize, f64> = BTreeMap::new();
    let mut settled: BTreeSet<usize> = BTreeSet::new();
    dist.insert(cand, 0.0);
    let mut heap = BinaryHeap::new();
    heap.push(E { d: 0.0, v: cand });
    while let Some(E { d, v }) = heap.pop() {
        if remaining == 0 || new_sum > old_sum {
            break;
        }
        if !settled.insert(v) {
            continue;
        }
        if in_region.contains(&v) {
            new_sum += d * d;
            remaining -= 1;
        }
        for &u in &nbrs[v] {
            let nd = d + (positions[u] - positions[v]).norm();
            if nd < *dist.get(&u).unwrap_or(&f64::INFINITY) {
                dist.insert(u, nd);
                heap.push(E { d: nd, v: u });
            }
        }
    }
    remaining == 0 && new_sum <= old_sum
}

/// Discrete Lloyd relaxation on the deformed mesh. Each iteration:
/// (i)   border seeds relax along their boundary loop (one 1D Lloyd step,
///       corners fixed),
/// (ii)  the full geodesic Voronoi diagram is recomputed,
/// (iii) every interior seed moves to the quadric-minimizing vertex of its
///       region.
/// Every move passes through a monotonicity guard — the seed stays put when
/// the prescribed target would raise its region's geodesic moment — so the
/// CVT energy recorded per iteration never increases. Stops when the largest
/// seed displacement in an iteration is below `tol` or after `max_iters`
/// iterations. Seeds whose region empties are deleted with a warning.
pub fn lloyd_relax(
    domain: &DeformedDomain,
    seeds: &SeedSet,
    max_iters: usize,
    tol: f64,
) -> Result<(SeedSet, VoronoiState, RelaxStats)> {
    let mesh = &domain.deformed;
    let nbrs = mesh.vertex_neighbors();
    let mut cur = seeds.clone();
    let border = if cur.kinds.iter().any(|k| *k != SeedKind::Interior) {
        Some(BorderGeometry::build(mesh)?)
    } else {
        None
    };
    let mut history = Vec::new();
    let mut warnings = Vec::new();
    let mut state = voronoi(mesh, &cur)?;
    let mut converged = false;
    let mut iters = 0;
    for _ in 0..max_iters {
        iters += 1;
        let prev_vertices = cur.vertices.clone();

        // (i) 1D border relax, one loop at a time.
        if let Some(border) = &border {
            for (li, lp) in border.loops.iter().enumerate() {
                let coords = &border.coords[li];
                let pos_of: BTreeMap<usize, usize> =
                    lp.iter().enumerate().map(|(k, &v)| (v, k)).collect();
                let mut corner_pos = Vec::new();
                let mut free_pos = Vec::new();
                let mut free_seed_idx = Vec::new();
                for (si, (&v, kind)) in cur.vertices.iter().zip(&cur.kinds).enumerate() {
                    match kind {
                        SeedKind::Corner => {
                            if let Some(&k) = pos_of.get(&v) {
                                corner_pos.push(k);
                            }
                        }
                        SeedKind::Border => {
                            if let Some(&k) = pos_of.get(&v) {
                                free_pos.push(k);
                                free_seed_idx.push(si);
                            }
                        }
                        SeedKind::Interior => {}
                    }
                }
                if free_pos.is_empty() {
                    continue;
                }
                let relaxed = relax_border_1d(
                    coords,
                    Some(border.lengths[li]),
                    &corner_pos,
                    &free_pos,
                    1,
                );
                for (k, &si) in relaxed.iter().zip(&free_seed_idx) {
                    let target = lp[*k];
                    if move_does_not_increase_moment(
                        &state.regions[si],
                        cur.vertices[si],
                        target,
                        &mesh.positions,
                        &nbrs,
                        &state,
                    ) {
                        cur.vertices[si] = target;
                    }
                }
            }
        }

        // (ii) full Voronoi diagram, dropping seeds with empty regions.
        state = voronoi(mesh, &cur)?;
        if state.regions.iter().any(|r| r.is_empty()) {
            let mut kept_vertices = Vec::new();
            let mut kept_kinds = Vec::new();
            for (si, region) in state.regions.iter().enumerate() {
                if region.is_empty() {
                    warnings.push(format!(
                        "deleted seed {si} (vertex {}): region lost all vertices",
                        cur.vertices[si]
                    ));
                } else {
                    kept_vertices.push(cur.vertices[si]);
                    kept_kinds.push(cur.kinds[si]);
                }
            }
            cur = SeedSet {
                vertices: kept_vertices,
                kinds: kept_kinds,
                rng_seed: cur.rng_seed,
            };
            state = voronoi(mesh, &cur)?;
        }

        // (iii) quadric-centroid move for interior seeds.
        for (si, kind) in cur.kinds.iter().enumerate() {
            if *kind == SeedKind::Interior {
                let target = centroid_by_quadric(&state.regions[si], &mesh.positions);
                if move_does_not_increase_moment(
                    &state.regions[si],
                    cur.vertices[si],
                    target,
                    &mesh.positions,
                    &nbrs,
                    &state,
                ) {
                    cur.vertices[si] = target;
                }
            }
        }

        state = voronoi(mesh, &cur)?;
        history.push(cvt_energy(&state));

        let max_move = if prev_vertices.len() == cur.vertices.len() {
            prev_vertices
                .iter()
                .zip(&cur.vertices)
                .map(|(&a, &b)| (mesh.positions[a] - mesh.positions[b]).norm())
                .fold(0.0f64, f64::max)
        } else {
            f64::INFINITY // seeds were deleted; keep iterating
        };
        if max_move < tol {
            converged = true;
            break;
        }
    }
    Ok((
        cur,
        state,
        RelaxStats {
            iters,
            converged,
            energy_history: history,
            warnings,
        },
    ))
}

// ---------------------------------------------------------------------------
// Tessellation extraction

/// How a polygon node was constructed (seed indices, sorted).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum NodeKind {
    /// Junction of three regions: inverse-distance weighted point inside a
    /// triangle whose corners belong to three different regions.
    Triple([usize; 3]),
    /// Crossing of a region interface with the domain boundary.
    Transition([usize; 2]),
    /// A seed that lies on the boundary contributes its own vertex.
    Apex(usize),
}

/// Extracted polygonal tessellation with node provenance. Positions are on
/// the original surface M (mapped back through the deformation).
#[derive(Debug, Clone)]
pub struct Extraction {
    pub poly: PolyMesh,
    /// One entry per node of `poly`.
    pub kinds: Vec<NodeKind>,
    /// For apex nodes, the mesh vertex they coincide with.
    pub anchor_vertex: Vec<Option<usize>>,
    /// The seed whose region produced each face of `poly`.
    pub face_seed: Vec<usize>,
    /// Human-readable notes about dropped or merged entities.
    pub warnings: Vec<String>,
}

/// Builds the polygonal tessellation dual to the converged Voronoi diagram
/// and maps every node back to the original surface.
///
/// Nodes: a triple point in every triangle whose corners lie in three
/// distinct regions (inverse-distance barycentric weights), a transition
/// point on every boundary edge whose endpoints lie in two regions, and an
/// apex at every on-boundary seed. Polygon edges come from two sources:
/// every connected interface component between two regions links its two
/// terminal nodes, and walking each boundary loop links consecutive
/// boundary nodes through the region owning the arc between them. Point
/// contacts (regions meeting at a vertex only) contribute no edge. A region
/// whose node graph is not a single simple cycle reports
/// [`Error::RegionAdjacency`]; polygons with fewer than three nodes are
/// dropped with a warning.
pub fn extract_cvt(
    domain: &DeformedDomain,
    seeds: &SeedSet,
    state: &VoronoiState,
) -> Result<Extraction> {
    let mesh = &domain.deformed;
    let ns = seeds.len();
    if ns < 3 {
        return Err(Error::Parameter {
            name: "seeds",
            msg: format!("extraction needs at least 3 regions, got {ns}"),
        });
    }
    let label = &state.assignment;
    let mut warnings = Vec::new();
    let inv_w = |v: usize| 1.0 / state.dist[v].max(WEIGHT_EPS);

    let mut positions: Vec<Point3<f64>> = Vec::new();
    let mut kinds: Vec<NodeKind> = Vec::new();
    let mut anchor: Vec<Option<usize>> = Vec::new();

    // Triple nodes, one per 3-region triangle.
    let mut triple_node: BTreeMap<usize, usize> = BTreeMap::new();
    for (ti, tri) in mesh.triangles.iter().enumerate() {
        let s = [label[tri[0]], label[tri[1]], label[tri[2]]];
        if s[0] == s[1] || s[1] == s[2] || s[0] == s[2] {
            continue;
        }
        let mut key = s;
        key.sort_unstable();
        let mut pos = Vector3::zeros();
        let mut wsum = 0.0;
        for &v in tri {
            let w = inv_w(v);
            pos += w * mesh.positions[v].coords;
            wsum += w;
        }
        triple_node.insert(ti, positions.len());
        positions.push(Point3::from(pos / wsum));
        kinds.push(NodeKind::Triple(key));
        anchor.push(None);
    }

    // Transition nodes, one per boundary edge crossing an interface.
    let mut trans_node: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (a, b) in mesh.boundary_edges() {
        let (sa, sb) = (label[a], label[b]);
        if sa == sb {
            continue;
        }
        let mut key = [sa, sb];
        key.sort_unstable();
        let (wa, wb) = (inv_w(a), inv_w(b));
        let pos = (wa * mesh.positions[a].coords + wb * mesh.positions[b].coords) / (wa + wb);
        trans_node.insert((a.min(b), a.max(b)), positions.len());
        positions.push(Point3::from(pos));
        kinds.push(NodeKind::Transition(key));
        anchor.push(None);
    }

    // Apex nodes at on-boundary seeds.
    let boundary_vertex_set: BTreeSet<usize> = mesh
        .boundary_edges()
        .into_iter()
        .flat_map(|(a, b)| [a, b])
        .collect();
    let mut apex_node: BTreeMap<usize, usize> = BTreeMap::new();
    for (si, &v) in seeds.vertices.iter().enumerate() {
        if boundary_vertex_set.contains(&v) {
            apex_node.insert(si, positions.len());
            positions.push(mesh.positions[v]);
            kinds.push(NodeKind::Apex(si));
            anchor.push(Some(v));
        }
    }

    let mut region_edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); ns];

    // Interface components: chains of mesh edges separating the same two
    // regions. Walking a component from a starting edge in both directions
    // terminates either in a 3-region triangle (triple node) or on the
    // domain boundary (transition node on the crossing edge itself).
    let edge_tris = mesh.edge_triangles();
    let interface_edges_of = |t: usize| -> Vec<(usize, usize)> {
        let tri = mesh.triangles[t];
        let mut out = Vec::new();
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            if label[a] != label[b] {
                out.push((a.min(b), a.max(b)));
            }
        }
        out
    };
    let mut visited: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (&edge, tris) in &edge_tris {
        let (a, b) = edge;
        if label[a] == label[b] || visited.contains(&edge) {
            continue;
        }
        // Walks away from `edge` into `start_tri`, returning the terminal
        // node of that direction. A closed interface loop (an enclosed
        // region) never reaches a terminal and is reported as an error.
        let step_cap = edge_tris.len() + 1;
        let walk = |start_tri: Option<usize>,
                    visited: &mut BTreeSet<(usize, usize)>|
         -> Result<usize> {
            let mut e = edge;
            let mut t = match start_tri {
                Some(t) => t,
                // Boundary side: the crossing edge terminates the component.
                None => return Ok(trans_node[&e]),
            };
            for _ in 0..step_cap {
                if let Some(&n) = triple_node.get(&t) {
                    return Ok(n);
                }
                let ies = interface_edges_of(t);
                debug_assert_eq!(ies.len(), 2, "2-region triangle has 2 interface edges");
                let next_e = if ies[0] == e { ies[1] } else { ies[0] };
                visited.insert(next_e);
                match edge_tris[&next_e].iter().find(|&&x| x != t) {
                    Some(&nt) => {
                        e = next_e;
                        t = nt;
                    }
                    None => return Ok(trans_node[&next_e]),
                }
            }
            let (a, b) = edge;
            Err(Error::RegionAdjacency {
                region: label[a].min(label[b]),
                msg: format!(
                    "interface between regions {} and {} forms a closed loop (enclosed region)",
                    label[a], label[b]
                ),
            })
        };
        visited.insert(edge);
        let na = walk(tris.first().copied(), &mut visited)?;
        let nb = walk(tris.get(1).copied(), &mut visited)?;
        let (sa, sb) = (label[a], label[b]);
        if na == nb {
            return Err(Error::RegionAdjacency {
                region: sa.min(sb),
                msg: format!("interface between regions {sa} and {sb} pinches to a single node"),
            });
        }
        region_edges[sa].push((na, nb));
        region_edges[sb].push((na, nb));
    }

    // Boundary chains: walk each loop's node events in cyclic order and link
    // consecutive nodes through the region owning the arc between them.
    if !boundary_vertex_set.is_empty() {
        let border = BorderGeometry::build(mesh)?;
        let seed_of_vertex: BTreeMap<usize, usize> = seeds
            .vertices
            .iter()
            .enumerate()
            .map(|(si, &v)| (v, si))
            .collect();
        for lp in &border.loops {
            let n = lp.len();
            // (cyclic coordinate, node, apex region if any)
            let mut events: Vec<(f64, usize, Option<usize>)> = Vec::new();
            for k in 0..n {
                let v = lp[k];
                if let Some(&si) = seed_of_vertex.get(&v) {
                    if let Some(&node) = apex_node.get(&si) {
                        events.push((k as f64, node, Some(si)));
                    }
                }
                let w = lp[(k + 1) % n];
                if let Some(&node) = trans_node.get(&(v.min(w), v.max(w))) {
                    events.push((k as f64 + 0.5, node, None));
                }
            }
            if events.len() < 2 {
                return Err(Error::RegionAdjacency {
                    region: label[lp[0]],
                    msg: "boundary loop carries fewer than 2 tessellation nodes".into(),
                });
            }
            events.sort_by(|x, y| x.0.total_cmp(&y.0));
            for i in 0..events.len() {
                let wrap = i + 1 == events.len();
                let (c1, n1, apex1) = events[i];
                let (c2, n2, apex2) = events[if wrap { 0 } else { i + 1 }];
                let c2_abs = if wrap { c2 + n as f64 } else { c2 };
                // The first boundary vertex strictly after c1 identifies the
                // arc owner; when the events are back to back one of them is
                // an apex sitting inside its own region.
                let v_abs = c1.floor() as usize + 1;
                let region = if (v_abs as f64) < c2_abs {
                    label[lp[v_abs % n]]
                } else if let Some(s) = apex1.or(apex2) {
                    s
                } else {
                    return Err(Error::RegionAdjacency {
                        region: label[lp[v_abs % n]],
                        msg: "adjacent boundary transitions with no vertex between".into(),
                    });
                };
                region_edges[region].push((n1, n2));
            }
        }
    }

    // Walk each region's node cycle.
    let vertex_tris = mesh.vertex_triangles();
    let mut faces: Vec<Vec<usize>> = Vec::new();
    let mut face_seed = Vec::new();
    for si in 0..ns {
        let edges = &region_edges[si];
        if edges.len() < 3 {
            warnings.push(format!(
                "dropped region {si}: only {} polygon edges",
                edges.len()
            ));
            continue;
        }
        let mut nbrs: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &(a, b) in edges {
            nbrs.entry(a).or_default().push(b);
            nbrs.entry(b).or_default().push(a);
        }
        for (node, n) in &nbrs {
            if n.len() != 2 {
                return Err(Error::RegionAdjacency {
                    region: si,
                    msg: format!(
                        "polygon node {node} has {} incident interface edges, expected 2",
                        n.len()
                    ),
                });
            }
        }
        let start = *nbrs.keys().next().unwrap();
        let mut cycle = vec![start];
        let mut prev = start;
        let mut curn = nbrs[&start][0].min(nbrs[&start][1]);
        while curn != start {
            cycle.push(curn);
            let n = &nbrs[&curn];
            let next = if n[0] == prev { n[1] } else { n[0] };
            prev = curn;
            curn = next;
        }
        if cycle.len() != nbrs.len() {
            return Err(Error::RegionAdjacency {
                region: si,
                msg: format!(
                    "polygon nodes form {} disconnected cycles",
                    1 + (nbrs.len() - cycle.len()).min(1)
                ),
            });
        }
        if cycle.len() < 3 {
            warnings.push(format!(
                "dropped region {si}: cycle of only {} nodes",
                cycle.len()
            ));
            continue;
        }
        // Orient counterclockwise about the seed's surface normal.
        let sv = seeds.vertices[si];
        let mut normal = Vector3::zeros();
        for &t in &vertex_tris[sv] {
            normal += mesh.triangle_normal(t) * mesh.triangle_area(t);
        }
        if normal.norm() > 0.0 {
            let center = mesh.positions[sv];
            let mut signed = 0.0;
            for k in 0..cycle.len() {
                let a = positions[cycle[k]] - center;
                let b = positions[cycle[(k + 1) % cycle.len()]] - center;
                signed += a.cross(&b).dot(&normal);
            }
            if signed < 0.0 {
                cycle.reverse();
            }
        }
        faces.push(cycle);
        face_seed.push(si);
    }

    // Drop nodes no surviving face references, then renumber.
    let mut used = vec![false; positions.len()];
    for f in &faces {
        for &n in f {
            used[n] = true;
        }
    }
    let mut remap = vec![usize::MAX; positions.len()];
    let mut packed_pos = Vec::new();
    let mut packed_kinds = Vec::new();
    let mut packed_anchor = Vec::new();
    for (n, &u) in used.iter().enumerate() {
        if u {
            remap[n] = packed_pos.len();
            // Map back to the original surface: apex nodes through the shared
            // vertex index (exact), the rest through closest-point
            // barycentric transfer.
            let p = match anchor[n] {
                Some(v) => domain.original.positions[v],
                None => domain.map_back(&positions[n], None).2,
            };
            packed_pos.push(p);
            packed_kinds.push(kinds[n].clone());
            packed_anchor.push(anchor[n]);
        }
    }
    let faces: Vec<Vec<usize>> = faces
        .into_iter()
        .map(|f| f.into_iter().map(|n| remap[n]).collect())
        .collect();

    Ok(Extraction {
        poly: PolyMesh::new(packed_pos, faces),
        kinds: packed_kinds,
        anchor_vertex: packed_anchor,
        face_seed,
        warnings,
    })
}
