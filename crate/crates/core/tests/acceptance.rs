//! Acceptance suite: one test per numbered criterion, each printing a single
//! `criterion N: PASS/FAIL` line (visible with `--nocapture`, and always on
//! failure). Criterion 8 is reported but never gates the suite.
//!
//! 1. FEM patch test (constant stress + equilibrium, < 1 s).
//! 2. Frame oracles (cantilever, simply-supported, Euler buckling, < 1 s).
//! 3. Lipschitz saturation (exhaustive pair check, idempotence, maxima).
//! 4. Metric deformation closed forms, fold-over freedom, refine-to-fit.
//! 5. ACVT: Poisson separation, monotone Lloyd energy, quadric fixed point,
//!    trivalence, hex dominance.
//! 6. Regularization fixed points, metric oracles, decreasing regularity.
//! 7. Sweep protocol (48 rows) and the 5% equivalence rule.
//! 8. Reported paraboloid trend: (4,2) vs (1,1) delta at matched length.
//! 9. Byte-identical determinism of the full pipeline.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use nalgebra::{Point3, Rotation3, Vector2, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gridshell_core::acvt::{
    centroid_by_quadric, extract_cvt, lloyd_relax, poisson_sample, NodeKind, SeedKind,
};
use gridshell_core::deform::{
    deform, refine_until_fit, DeformConfig, DeformedDomain, Genealogy,
};
use gridshell_core::field::{lipschitz_saturate, PsiField};
use gridshell_core::frame::{
    check_equivalence, estimate_linear_buckling, solve_linear_static, FrameModel,
};
use gridshell_core::mesh::{
    classify_boundary, geodesic_distances, save_obj, PolyMesh, TriMesh,
};
use gridshell_core::pipeline::{run_pipeline, sweep, AnalysisConfig, PipelineConfig};
use gridshell_core::primitives::{disk, flat_grid, paraboloid, strip};
use gridshell_core::regularize::{
    face_metrics, per_polygon_targets, planarity, regularity, regularize, RegularizerConfig,
};
use gridshell_core::shell::{
    assemble_and_solve, rotate_components, LoadCase, Material, ShellConfig, SupportRule,
    TangentBasis,
};

/// Runs `body`, prints the criterion's PASS/FAIL line, and re-raises any
/// panic so the suite still fails normally.
fn report(label: &str, detail: &str, body: impl FnOnce() -> String) {
    let result = catch_unwind(AssertUnwindSafe(body));
    match result {
        Ok(note) => println!("{label}: PASS - {detail} ({note})"),
        Err(payload) => {
            println!("{label}: FAIL - {detail}");
            resume_unwind(payload);
        }
    }
}

// ---------------------------------------------------------------------------
// 1. FEM patch test

#[test]
fn criterion_1_fem_patch_test() {
    report(
        "criterion 1",
        "uniaxial plate reproduces constant stress (1e-6) with equilibrium residual <= 1e-8, under 1 s",
        || {
            let start = Instant::now();
            let n = 4;
            let mesh = flat_grid(n, n, 1.0, 1.0);
            let left: Vec<usize> = (0..=n).map(|j| j * (n + 1)).collect();
            let right_edges: Vec<(usize, usize)> = (0..n)
                .map(|j| (j * (n + 1) + n, (j + 1) * (n + 1) + n))
                .collect();
            let mut material = Material::steel();
            material.poisson = 0.0;
            let cfg = ShellConfig {
                material,
                thickness: 0.01,
                load: LoadCase::BoundaryTraction {
                    edges: right_edges,
                    direction: Vector3::new(1.0, 0.0, 0.0),
                    force_per_length: 1000.0,
                },
                supports: SupportRule::Custom(left.iter().map(|&v| (v, [true; 3])).collect()),
                ..ShellConfig::default()
            };
            let sol = assemble_and_solve(&mesh, &cfg).unwrap();

            let expected = 1000.0 / cfg.thickness;
            let global = TangentBasis {
                b1: Vector3::x(),
                b2: Vector3::y(),
                normal: Vector3::z(),
            };
            let mut worst = 0.0_f64;
            for (t, c) in sol.stress.components.iter().enumerate() {
                let g = rotate_components(*c, &sol.stress.basis[t], &global);
                let errs = [
                    (g[0] - expected).abs(),
                    g[1].abs(),
                    g[2].abs(),
                ];
                for e in errs {
                    worst = worst.max(e / expected);
                    assert!(e <= 1e-6 * expected, "triangle {t}: stress {g:?}");
                }
            }
            let applied: Vector3<f64> = sol.applied.iter().sum();
            let residual = sol.equilibrium_residual().norm() / applied.norm();
            assert!(residual <= 1e-8, "equilibrium residual {residual:.3e}");
            let elapsed = start.elapsed();
            assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
            format!(
                "worst stress error {worst:.2e} rel, residual {residual:.2e} rel, {:.0} ms",
                elapsed.as_secs_f64() * 1e3
            )
        },
    );
}

// ---------------------------------------------------------------------------
// 2. Frame oracle suite

fn steel() -> Material {
    Material::steel()
}

fn bending_stiffness() -> f64 {
    210e9 * PI * 0.037_f64.powi(4) / 64.0
}

fn cantilever(load: Vector3<f64>) -> FrameModel {
    FrameModel {
        joints: vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0)],
        beams: vec![(0, 1)],
        diameter: 0.037,
        material: steel(),
        supports: BTreeSet::new(),
        extra_fixed: (0..6u8).map(|c| (0usize, c)).collect(),
        loads: vec![Vector3::zeros(), load],
    }
}

fn simply_supported() -> FrameModel {
    FrameModel {
        joints: vec![
            Point3::origin(),
            Point3::new(0.5, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
        ],
        beams: vec![(0, 1), (1, 2)],
        diameter: 0.037,
        material: steel(),
        supports: [0usize, 2].into_iter().collect(),
        extra_fixed: [(0usize, 3u8)].into_iter().collect(),
        loads: vec![
            Vector3::zeros(),
            Vector3::new(0.0, 0.0, -1000.0),
            Vector3::zeros(),
        ],
    }
}

fn euler_column(m: usize, p: f64) -> FrameModel {
    let joints: Vec<Point3<f64>> = (0..=m)
        .map(|i| Point3::new(0.0, 0.0, i as f64 / m as f64))
        .collect();
    let beams: Vec<(usize, usize)> = (0..m).map(|i| (i, i + 1)).collect();
    let mut loads = vec![Vector3::zeros(); m + 1];
    loads[m] = Vector3::new(0.0, 0.0, -p);
    let mut extra_fixed = BTreeSet::new();
    extra_fixed.insert((0usize, 5u8));
    extra_fixed.insert((m, 0u8));
    extra_fixed.insert((m, 1u8));
    FrameModel {
        joints,
        beams,
        diameter: 0.037,
        material: steel(),
        supports: [0usize].into_iter().collect(),
        extra_fixed,
        loads,
    }
}

#[test]
fn criterion_2_frame_oracles() {
    report(
        "criterion 2",
        "cantilever PL^3/3EI, midspan PL^3/48EI (1e-6); Euler lambda within 2% at 4 elements, error monotone, under 1 s",
        || {
            let start = Instant::now();
            let p = 1000.0;
            let ei = bending_stiffness();

            let tip = solve_linear_static(&cantilever(Vector3::new(0.0, 0.0, -p))).unwrap();
            let expect_tip = p / (3.0 * ei);
            let err_tip = (tip.dofs[1][2] + expect_tip).abs() / expect_tip;
            assert!(err_tip <= 1e-6, "cantilever error {err_tip:.3e}");

            let mid = solve_linear_static(&simply_supported()).unwrap();
            let expect_mid = p / (48.0 * ei);
            let err_mid = (mid.dofs[1][2] + expect_mid).abs() / expect_mid;
            assert!(err_mid <= 1e-6, "simply-supported error {err_mid:.3e}");

            let lambda_ref = PI * PI * ei / p; // pinned-pinned, L = 1
            let mut errors = Vec::new();
            for m in [2usize, 4, 8] {
                let model = euler_column(m, p);
                let sol = solve_linear_static(&model).unwrap();
                let lambda = estimate_linear_buckling(&model, &sol)
                    .unwrap()
                    .expect("compressed column must buckle");
                errors.push((lambda - lambda_ref).abs() / lambda_ref);
            }
            assert!(errors[1] <= 0.02, "4-element error {:.4}", errors[1]);
            assert!(
                errors[0] > errors[1] && errors[1] > errors[2],
                "errors not monotone: {errors:?}"
            );
            let elapsed = start.elapsed();
            assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
            format!(
                "deflection errors {err_tip:.1e}/{err_mid:.1e}, lambda errors {:.4}>{:.4}>{:.4}, {:.0} ms",
                errors[0], errors[1], errors[2], elapsed.as_secs_f64() * 1e3
            )
        },
    );
}

// ---------------------------------------------------------------------------
// 3. Lipschitz saturation

/// All-pairs shortest paths on the triangle barycenter graph.
fn barycenter_graph_distances(mesh: &TriMesh) -> Vec<Vec<f64>> {
    let nt = mesh.triangles.len();
    let adj = mesh.triangle_adjacency();
    let bary: Vec<Point3<f64>> = (0..nt).map(|t| mesh.barycenter(t)).collect();
    let mut dist = vec![vec![f64::INFINITY; nt]; nt];
    for (t, row) in dist.iter_mut().enumerate() {
        row[t] = 0.0;
    }
    for t in 0..nt {
        for s in adj[t].iter().flatten() {
            let w = (bary[*s] - bary[t]).norm();
            dist[t][*s] = w;
        }
    }
    // Floyd-Warshall: n = 200 is small enough for the exhaustive check.
    for k in 0..nt {
        for i in 0..nt {
            let dik = dist[i][k];
            if !dik.is_finite() {
                continue;
            }
            for j in 0..nt {
                let cand = dik + dist[k][j];
                if cand < dist[i][j] {
                    dist[i][j] = cand;
                }
            }
        }
    }
    dist
}

#[test]
fn criterion_3_lipschitz_saturation() {
    report(
        "criterion 3",
        "saturation is L-Lipschitz on the barycenter graph (exhaustive), idempotent, and preserves maxima exactly",
        || {
            let mut checked_pairs = 0usize;
            for (seed, l) in [(1u64, 2.0), (2, 0.8), (3, 5.0)] {
                let mut mesh = flat_grid(10, 10, 2.0, 2.0);
                assert_eq!(mesh.triangles.len(), 200);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for p in &mut mesh.positions {
                    p.z += rng.random_range(-0.05..0.05);
                }
                let nt = mesh.triangles.len();
                let values: Vec<f64> = (0..nt).map(|_| rng.random_range(0.0..10.0)).collect();

                let out = lipschitz_saturate(&values, &mesh, l).unwrap();
                let dist = barycenter_graph_distances(&mesh);
                for p in 0..nt {
                    for q in 0..nt {
                        assert!(
                            out[p] - out[q] <= l * dist[p][q] + 1e-9,
                            "fixture {seed}: pair ({p},{q}) violates the bound"
                        );
                        checked_pairs += 1;
                    }
                }
                // Idempotent.
                let twice = lipschitz_saturate(&out, &mesh, l).unwrap();
                for t in 0..nt {
                    assert!((out[t] - twice[t]).abs() <= 1e-12 * out[t].abs().max(1.0));
                    // Saturation only raises values.
                    assert!(out[t] >= values[t] - 1e-15);
                }
                // Maxima preserved exactly.
                let arg = (0..nt)
                    .max_by(|&a, &b| values[a].total_cmp(&values[b]))
                    .unwrap();
                assert_eq!(out[arg], values[arg], "fixture {seed}: maximum moved");
                let max_out = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(max_out, values[arg], "fixture {seed}: new maximum appeared");
            }
            format!("3 randomized 200-triangle fixtures, {checked_pairs} ordered pairs checked")
        },
    );
}

// ---------------------------------------------------------------------------
// 4. Metric deformation

fn triangle_normal(mesh: &TriMesh, t: usize) -> Vector3<f64> {
    let [a, b, c] = mesh.triangles[t];
    (mesh.positions[b] - mesh.positions[a]).cross(&(mesh.positions[c] - mesh.positions[a]))
}

fn assert_no_fold_overs(rest: &TriMesh, deformed: &TriMesh, what: &str) {
    for t in 0..rest.triangles.len() {
        let dot = triangle_normal(rest, t).dot(&triangle_normal(deformed, t));
        assert!(dot > 0.0, "{what}: triangle {t} folded over (normal dot {dot:.3e})");
    }
}

#[test]
fn criterion_4_deformation() {
    report(
        "criterion 4",
        "identity fixed (1e-9), uniform-scale and flat-strip closed forms (1e-6), no fold-overs, refine fits q = R/5",
        || {
            // Identity: d = a = 1 leaves the gauge-fixed surface untouched.
            let dome = paraboloid(6, 2.0, 0.6);
            let identity = PsiField::uniform(&dome, 1.0, 1.0);
            let out = deform(&dome, &identity, &DeformConfig::default()).unwrap();
            let mut worst_drift = 0.0_f64;
            for (p, q) in dome.positions.iter().zip(&out.mesh.positions) {
                worst_drift = worst_drift.max((p - q).norm());
            }
            assert!(worst_drift <= 1e-9, "identity drift {worst_drift:.3e}");
            assert_no_fold_overs(&dome, &out.mesh, "identity");

            // Uniform scale: d = 2, a = 1 doubles every edge.
            let grid = flat_grid(4, 4, 1.0, 1.0);
            let double = PsiField::uniform(&grid, 2.0, 1.0);
            let scaled = deform(&grid, &double, &DeformConfig::default()).unwrap();
            for (a, b) in grid.edges() {
                let rest = (grid.positions[a] - grid.positions[b]).norm();
                let now = (scaled.mesh.positions[a] - scaled.mesh.positions[b]).norm();
                assert!(
                    (now - 2.0 * rest).abs() <= 1e-6 * 2.0 * rest,
                    "edge ({a},{b}): {now} vs {}",
                    2.0 * rest
                );
            }
            assert_no_fold_overs(&grid, &scaled.mesh, "uniform scale");

            // Flat strip, anisotropic: W = diag(2, 1) along +x doubles x
            // spans and keeps y spans.
            let band = strip(6, 3.0, 1.0);
            let nt = band.triangles.len();
            let aniso = PsiField {
                dirs: vec![Vector3::x(); nt],
                density: vec![2.0; nt],
                anisotropy: vec![2.0; nt],
                isotropic: vec![false; nt],
            };
            let stretched = deform(&band, &aniso, &DeformConfig::default()).unwrap();
            for (a, b) in band.edges() {
                let rest = band.positions[b] - band.positions[a];
                let expect = Vector3::new(2.0 * rest.x, rest.y, rest.z).norm();
                let now = (stretched.mesh.positions[a] - stretched.mesh.positions[b]).norm();
                assert!(
                    (now - expect).abs() <= 1e-6 * expect,
                    "edge ({a},{b}): {now} vs {expect}"
                );
            }
            assert_no_fold_overs(&band, &stretched.mesh, "anisotropic strip");

            // Refinement terminates with every deformed edge at most q = R/5.
            let coarse = flat_grid(2, 2, 1.0, 1.0);
            let dense = PsiField::uniform(&coarse, 3.0, 1.0);
            let r = 1.0;
            let q = r / 5.0;
            let refined = refine_until_fit(&coarse, &dense, q, &DeformConfig::default()).unwrap();
            assert!(refined.rounds > 0, "expected at least one refinement round");
            let mut longest = 0.0_f64;
            for (a, b) in refined.domain.deformed.edges() {
                let len =
                    (refined.domain.deformed.positions[a] - refined.domain.deformed.positions[b]).norm();
                longest = longest.max(len);
                assert!(len <= q + 1e-9, "deformed edge ({a},{b}) has length {len} > {q}");
            }
            assert_no_fold_overs(
                &refined.domain.original,
                &refined.domain.deformed,
                "refined",
            );
            format!(
                "identity drift {worst_drift:.1e}, {} refine rounds, longest refined edge {longest:.3} <= {q}",
                refined.rounds
            )
        },
    );
}

// ---------------------------------------------------------------------------
// 5. ACVT

fn identity_domain(mesh: &TriMesh) -> DeformedDomain {
    DeformedDomain {
        original: mesh.clone(),
        deformed: mesh.clone(),
        genealogy: Genealogy {
            triangle_parent: (0..mesh.triangles.len()).collect(),
            vertex_origin: vec![None; mesh.positions.len()],
        },
    }
}

/// Single-source shortest-path distances along the boundary edge graph only.
fn border_distances(mesh: &TriMesh, source: usize) -> std::collections::BTreeMap<usize, f64> {
    use std::collections::BTreeMap;
    let mut adj: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for (a, b) in mesh.boundary_edges() {
        let w = (mesh.positions[a] - mesh.positions[b]).norm();
        adj.entry(a).or_default().push((b, w));
        adj.entry(b).or_default().push((a, w));
    }
    let mut dist: BTreeMap<usize, f64> = adj.keys().map(|&v| (v, f64::INFINITY)).collect();
    dist.insert(source, 0.0);
    let mut heap = std::collections::BinaryHeap::new();
    heap.push((std::cmp::Reverse(ordered_float(0.0)), source));
    while let Some((std::cmp::Reverse(d), v)) = heap.pop() {
        let d = d.0;
        if d > dist[&v] {
            continue;
        }
        for &(u, w) in adj.get(&v).into_iter().flatten() {
            let nd = d + w;
            if nd < dist[&u] {
                dist.insert(u, nd);
                heap.push((std::cmp::Reverse(ordered_float(nd)), u));
            }
        }
    }
    dist
}

#[derive(PartialEq)]
struct OrderedF64(f64);
impl Eq for OrderedF64 {}
impl PartialOrd for OrderedF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OrderedF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}
fn ordered_float(v: f64) -> OrderedF64 {
    OrderedF64(v)
}

#[test]
fn criterion_5_acvt() {
    report(
        "criterion 5",
        "Poisson separation >= R (exhaustive), Lloyd energy non-increasing, quadric fixed point, trivalent interiors, >= 60% hexagons",
        || {
            // Separation, energy monotonicity, and the quadric fixed point on
            // an isotropic disk.
            let mesh = disk(48, 12, 1.0);
            let domain = identity_domain(&mesh);
            let boundary = classify_boundary(&mesh, 30f64.to_radians());
            let r = 0.55;
            let seeds = poisson_sample(&domain, &boundary, r, 11).unwrap();
            assert!(seeds.len() >= 4);

            // Border seeds keep pairwise boundary-arclength distance >= R.
            let border_seeds: Vec<usize> = seeds
                .vertices
                .iter()
                .zip(&seeds.kinds)
                .filter(|(_, k)| **k != SeedKind::Interior)
                .map(|(&v, _)| v)
                .collect();
            for (i, &a) in border_seeds.iter().enumerate() {
                let dist = border_distances(&mesh, a);
                for &b in border_seeds.iter().skip(i + 1) {
                    assert!(
                        dist[&b] >= r - 1e-12,
                        "border seeds {a} and {b} at arclength {}",
                        dist[&b]
                    );
                }
            }
            // Interior seeds keep surface geodesic distance >= R to all.
            for (si, (&v, kind)) in seeds.vertices.iter().zip(&seeds.kinds).enumerate() {
                if *kind != SeedKind::Interior {
                    continue;
                }
                let g = geodesic_distances(&mesh, &[v]).unwrap();
                for (sj, &u) in seeds.vertices.iter().enumerate() {
                    if si != sj {
                        assert!(
                            g.dist[u] >= r - 1e-12,
                            "seeds {v} and {u} at distance {}",
                            g.dist[u]
                        );
                    }
                }
            }

            let (relaxed, state, stats) = lloyd_relax(&domain, &seeds, 200, 1e-12).unwrap();
            assert!(stats.converged, "Lloyd did not converge in 200 iterations");
            for w in stats.energy_history.windows(2) {
                assert!(
                    w[1] <= w[0] * (1.0 + 1e-9) + 1e-15,
                    "energy increased {} -> {}",
                    w[0],
                    w[1]
                );
            }
            let mut interior_seeds = 0usize;
            for (si, kind) in relaxed.kinds.iter().enumerate() {
                if *kind == SeedKind::Interior {
                    interior_seeds += 1;
                    assert_eq!(
                        relaxed.vertices[si],
                        centroid_by_quadric(&state.regions[si], &mesh.positions),
                        "seed {si} is not its region's quadric minimizer"
                    );
                }
            }
            assert!(interior_seeds >= 1, "fixture produced no interior seeds");

            // Hex dominance and trivalence on the flat isotropic regression
            // fixture (fixed RNG seed).
            let square = flat_grid(72, 72, 8.0, 8.0);
            let sq_domain = identity_domain(&square);
            let sq_boundary = classify_boundary(&square, 30f64.to_radians());
            let sq_seeds = poisson_sample(&sq_domain, &sq_boundary, 1.0, 4).unwrap();
            let (sq_relaxed, sq_state, sq_stats) =
                lloyd_relax(&sq_domain, &sq_seeds, 200, 1e-12).unwrap();
            for w in sq_stats.energy_history.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-15);
            }
            let ex = extract_cvt(&sq_domain, &sq_relaxed, &sq_state).unwrap();
            let mut interior_faces = 0usize;
            let mut hexes = 0usize;
            for f in &ex.poly.faces {
                if f.iter().all(|&n| matches!(ex.kinds[n], NodeKind::Triple(_))) {
                    interior_faces += 1;
                    if f.len() == 6 {
                        hexes += 1;
                    }
                }
            }
            assert!(interior_faces >= 10, "only {interior_faces} interior faces");
            assert!(
                hexes as f64 >= 0.6 * interior_faces as f64,
                "{hexes}/{interior_faces} hexagons"
            );
            for (n, kind) in ex.kinds.iter().enumerate() {
                if matches!(kind, NodeKind::Triple(_)) {
                    let degree = ex.poly.faces.iter().filter(|f| f.contains(&n)).count();
                    assert_eq!(degree, 3, "interior node {n} has {degree} faces");
                }
            }
            format!(
                "{} seeds separated, {interior_seeds} quadric fixed points, {hexes}/{interior_faces} hexagons ({:.0}%)",
                seeds.len(),
                100.0 * hexes as f64 / interior_faces as f64
            )
        },
    );
}

// ---------------------------------------------------------------------------
// 6. Regularization

fn regular_ngon(n: usize, radius: f64) -> Vec<Point3<f64>> {
    (0..n)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / n as f64;
            Point3::new(radius * a.cos(), radius * a.sin(), 0.0)
        })
        .collect()
}

fn apply_rigid(pts: &[Point3<f64>], rot: &Rotation3<f64>, t: &Vector3<f64>) -> Vec<Point3<f64>> {
    pts.iter().map(|p| rot * p + *t).collect()
}

/// Golden-section maximization of a smooth periodic function after a coarse
/// global scan; accurate to ~1e-13 in the argument.
fn scan_maximize(f: impl Fn(f64) -> f64, period: f64) -> f64 {
    let coarse = 4096;
    let mut best_k = 0;
    let mut best_v = f64::NEG_INFINITY;
    for k in 0..coarse {
        let x = period * k as f64 / coarse as f64;
        let v = f(x);
        if v > best_v {
            best_v = v;
            best_k = k;
        }
    }
    let step = period / coarse as f64;
    let mut lo = step * best_k as f64 - step;
    let mut hi = step * best_k as f64 + step;
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..120 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Independent scan-based re-implementation of the regularity measure for
/// planar z = 0 polygons: principal axes by variance maximization,
/// area-preserving un-stretch, equal-perimeter regular polygon, rigid
/// alignment by scanned rotation over all cyclic correspondences, re-stretch,
/// then sum of squared distances over the shoelace area.
fn oracle_regularity_2d(face: &[Point3<f64>]) -> f64 {
    let n = face.len();
    let cx = face.iter().map(|p| p.x).sum::<f64>() / n as f64;
    let cy = face.iter().map(|p| p.y).sum::<f64>() / n as f64;
    let d: Vec<Vector2<f64>> = face.iter().map(|p| Vector2::new(p.x - cx, p.y - cy)).collect();

    let var_along = |ang: f64| -> f64 {
        d.iter()
            .map(|v| {
                let proj = v.x * ang.cos() + v.y * ang.sin();
                proj * proj
            })
            .sum()
    };
    let psi = scan_maximize(var_along, PI);
    let e1 = Vector2::new(psi.cos(), psi.sin());
    let e2 = Vector2::new(-psi.sin(), psi.cos());
    let l1 = var_along(psi);
    let l2 = var_along(psi + PI / 2.0);
    let s1 = (l2 / l1).powf(0.25);
    let s2 = (l1 / l2).powf(0.25);
    let q: Vec<Vector2<f64>> = d
        .iter()
        .map(|v| Vector2::new(v.dot(&e1) * s1, v.dot(&e2) * s2))
        .collect();

    let mut perimeter = 0.0;
    let mut twice_area = 0.0;
    for k in 0..n {
        let (a, b) = (q[k], q[(k + 1) % n]);
        perimeter += (b - a).norm();
        twice_area += a.x * b.y - a.y * b.x;
    }
    let orientation = if twice_area < 0.0 { -1.0 } else { 1.0 };
    let radius = perimeter / (2.0 * n as f64 * (PI / n as f64).sin());
    let reg: Vec<Vector2<f64>> = (0..n)
        .map(|k| {
            let ang = orientation * 2.0 * PI * k as f64 / n as f64;
            Vector2::new(radius * ang.cos(), radius * ang.sin())
        })
        .collect();

    // Best rigid alignment over every cyclic correspondence, rotation by
    // scan instead of closed form.
    let mut best: Option<(f64, usize, f64)> = None;
    for s in 0..n {
        let corr = |theta: f64| -> f64 {
            let (ct, st) = (theta.cos(), theta.sin());
            (0..n)
                .map(|k| {
                    let r = reg[k];
                    let rot = Vector2::new(ct * r.x - st * r.y, st * r.x + ct * r.y);
                    rot.dot(&q[(k + s) % n])
                })
                .sum()
        };
        let theta = scan_maximize(corr, 2.0 * PI);
        let value = corr(theta);
        if best.map_or(true, |(bv, _, _)| value > bv) {
            best = Some((value, s, theta));
        }
    }
    let (_, shift, theta) = best.unwrap();
    let (ct, st) = (theta.cos(), theta.sin());
    let mut sum_sq = 0.0;
    for k in 0..n {
        let r = reg[k];
        let rot = Vector2::new(ct * r.x - st * r.y, st * r.x + ct * r.y);
        // Undo the stretch in the principal frame, then lift back to xy.
        let undone = rot.x / s1 * e1 + rot.y / s2 * e2;
        let target = Vector2::new(cx, cy) + undone;
        let p = face[(k + shift) % n];
        sum_sq += (Vector2::new(p.x, p.y) - target).norm_squared();
    }

    let mut area2 = 0.0;
    for k in 0..n {
        let (a, b) = (face[k], face[(k + 1) % n]);
        area2 += a.x * b.y - a.y * b.x;
    }
    sum_sq / (0.5 * area2.abs())
}

/// 5x5 patch of unit hexagons with deterministically jittered interior
/// vertices; the regression fixture for the regularizer.
fn jittered_honeycomb(seed: u64, amplitude: f64) -> PolyMesh {
    let mut pool: Vec<Point3<f64>> = Vec::new();
    let mut faces = Vec::new();
    let mut find = |p: Point3<f64>| -> usize {
        for (i, q) in pool.iter().enumerate() {
            if (q - p).norm() < 1e-6 {
                return i;
            }
        }
        pool.push(p);
        pool.len() - 1
    };
    for i in 0..5i64 {
        for j in 0..5i64 {
            let cx = 1.5 * i as f64;
            let cy = 3f64.sqrt() * (j as f64 + 0.5 * (i % 2) as f64);
            let face: Vec<usize> = (0..6)
                .map(|k| {
                    let a = PI / 3.0 * k as f64;
                    find(Point3::new(cx + a.cos(), cy + a.sin(), 0.0))
                })
                .collect();
            faces.push(face);
        }
    }
    let mut mesh = PolyMesh::new(pool, faces);
    let boundary: BTreeSet<usize> = mesh.boundary_vertices().into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in 0..mesh.positions.len() {
        let dx = rng.random_range(-amplitude..amplitude);
        let dy = rng.random_range(-amplitude..amplitude);
        if !boundary.contains(&v) {
            mesh.positions[v] += Vector3::new(dx, dy, 0.0);
        }
    }
    mesh
}

#[test]
fn criterion_6_regularization() {
    report(
        "criterion 6",
        "regular/stretched polygons fixed (1e-9), metrics match brute-force oracles (1e-9), mean regularity strictly decreases 10 iterations",
        || {
            // Fixed points of the target construction under rigid motion.
            let rot = Rotation3::from_euler_angles(0.3, -0.7, 1.1);
            let t = Vector3::new(4.0, -2.0, 7.5);
            let hex = apply_rigid(&regular_ngon(6, 1.3), &rot, &t);
            for (p, q) in hex.iter().zip(&per_polygon_targets(&hex).unwrap()) {
                assert!((p - q).norm() <= 1e-9, "regular hexagon moved {}", (p - q).norm());
            }
            let stretched: Vec<Point3<f64>> = regular_ngon(6, 1.0)
                .into_iter()
                .map(|p| Point3::new(2.0 * p.x, p.y, 0.0))
                .collect();
            let moved = apply_rigid(&stretched, &rot, &t);
            for (p, q) in moved.iter().zip(&per_polygon_targets(&moved).unwrap()) {
                assert!((p - q).norm() <= 1e-9, "stretched hexagon moved {}", (p - q).norm());
            }
            assert!(regularity(&hex) <= 1e-9);
            assert!(regularity(&moved) <= 1e-9);

            // Planarity against the analytic hyperbolic quad: vertices
            // (+-1, +-1, s*x*y) have best-fit plane z = 0, mean distance s,
            // and half-perimeter 4*sqrt(1 + s^2).
            let s = 0.3_f64;
            let quad = vec![
                Point3::new(1.0, 1.0, s),
                Point3::new(-1.0, 1.0, -s),
                Point3::new(-1.0, -1.0, s),
                Point3::new(1.0, -1.0, -s),
            ];
            let expected = s / (4.0 * (1.0 + s * s).sqrt());
            let quad_moved = apply_rigid(&quad, &rot, &t);
            let planarity_err = (planarity(&quad_moved) - expected).abs();
            assert!(planarity_err <= 1e-9, "planarity off by {planarity_err:.3e}");
            assert!(planarity(&moved) <= 1e-12, "planar face has nonzero planarity");

            // Regularity against the independent scan-based oracle on
            // anisotropic planar fixtures.
            let mut rng = ChaCha8Rng::seed_from_u64(12);
            let mut worst_oracle = 0.0_f64;
            for &n in &[4usize, 6] {
                let face: Vec<Point3<f64>> = regular_ngon(n, 1.0)
                    .into_iter()
                    .map(|p| {
                        let jitter = 1.0 + rng.random_range(-0.08..0.08);
                        Point3::new(2.0 * p.x * jitter, p.y * jitter, 0.0)
                    })
                    .collect();
                let got = regularity(&face);
                let oracle = oracle_regularity_2d(&face);
                let err = (got - oracle).abs();
                worst_oracle = worst_oracle.max(err);
                assert!(
                    err <= 1e-9,
                    "{n}-gon regularity {got} vs oracle {oracle} (diff {err:.3e})"
                );
                assert!(got > 1e-4, "fixture unexpectedly regular");
            }

            // Mean regularity strictly decreases over the first 10
            // iterations on the jittered honeycomb.
            let mean_regularity = |m: &PolyMesh| -> f64 {
                let ms = face_metrics(m);
                ms.iter().map(|x| x.regularity).sum::<f64>() / ms.len() as f64
            };
            let cfg = RegularizerConfig {
                max_iters: 1,
                tol: 0.0,
                ..Default::default()
            };
            let mut current = jittered_honeycomb(31, 0.15);
            let start_reg = mean_regularity(&current);
            let mut last = start_reg;
            for it in 0..10 {
                let (next, _) = regularize(&current, &cfg).unwrap();
                let now = mean_regularity(&next);
                assert!(now < last, "iteration {it}: regularity {last} -> {now}");
                last = now;
                current = next;
            }
            format!(
                "oracle gap {worst_oracle:.1e}, planarity gap {planarity_err:.1e}, regularity {start_reg:.4} -> {last:.4} over 10 iterations"
            )
        },
    );
}

// ---------------------------------------------------------------------------
// 7. Sweep protocol + equivalence rule

fn pipeline_fixture(dir: &Path, nx: usize, side: f64, radius: f64, seed: u64) -> PipelineConfig {
    let mesh = flat_grid(nx, nx, side, side);
    let input = dir.join("input.obj");
    save_obj(&mesh, &input).unwrap();
    PipelineConfig {
        schema_version: 1,
        input,
        output_dir: dir.join("out"),
        density: 1.0,
        anisotropy: 1.0,
        radius,
        rng_seed: seed,
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

fn bar_model(length: f64) -> FrameModel {
    FrameModel {
        joints: vec![Point3::origin(), Point3::new(length, 0.0, 0.0)],
        beams: vec![(0, 1)],
        diameter: 0.037,
        material: steel(),
        supports: [0usize].into_iter().collect(),
        extra_fixed: BTreeSet::new(),
        loads: vec![Vector3::zeros(); 2],
    }
}

#[test]
fn criterion_7_sweep_protocol_and_equivalence() {
    report(
        "criterion 7",
        "4x4x3 sweep emits exactly 48 rows; equivalence checker enforces the 5% total-length tolerance",
        || {
            let dir = tempfile::tempdir().unwrap();
            let template = pipeline_fixture(dir.path(), 12, 3.0, 1.0, 7);
            let grid = [1.0, 2.0, 3.0, 4.0];
            let outcome = sweep(&template, &grid, &grid, 3).unwrap();
            assert_eq!(outcome.data_rows, 48, "expected 48 data rows");
            let lines: Vec<&str> = outcome.csv.lines().collect();
            let data_lines: Vec<&&str> = lines
                .iter()
                .skip(1)
                .filter(|l| !l.split(',').nth(2).map_or(true, |rep| rep == "mean"))
                .collect();
            assert_eq!(data_lines.len(), 48, "CSV does not hold 48 data lines");
            let ok_lines = data_lines.iter().filter(|l| l.ends_with(",ok")).count();
            assert_eq!(ok_lines, 48, "some sweep rows failed:\n{}", outcome.csv);
            assert_eq!(outcome.mean_rows, 16);

            // 4.9% passes, 5.1% fails, in both length and mass.
            let reference = bar_model(1000.0);
            let close = check_equivalence(&reference, &bar_model(1049.0));
            assert!(close.pass, "4.9% difference should pass: {close:?}");
            assert!((close.length_rel_diff - 0.049).abs() <= 1e-12);
            let far = check_equivalence(&reference, &bar_model(1051.0));
            assert!(!far.pass, "5.1% difference should fail: {far:?}");
            assert_eq!(close.tolerance, 0.05);
            format!(
                "48/48 rows ok, 16 mean rows, rel diffs {:.3}/{:.3} split at 5%",
                close.length_rel_diff, far.length_rel_diff
            )
        },
    );
}

// ---------------------------------------------------------------------------
// 8. Reported paraboloid trend (non-gating)

#[test]
fn criterion_8_paraboloid_trend_reported() {
    // Non-gating: the outcome is printed, never asserted.
    let dir = tempfile::tempdir().unwrap();
    let dome = paraboloid(10, 4.0, 1.6);
    let input = dir.path().join("dome.obj");
    save_obj(&dome, &input).unwrap();
    let mut base = pipeline_fixture(dir.path(), 4, 1.0, 1.0, 11);
    base.input = input;
    base.output_dir = dir.path().join("run_11");

    let isotropic = match run_pipeline(&base) {
        Ok(a) => a,
        Err(e) => {
            println!("criterion 8: REPORTED - (1,1) baseline run failed: {e}");
            return;
        }
    };
    let mut dense = base.clone();
    dense.density = 4.0;
    dense.anisotropy = 2.0;
    dense.target_total_length = Some(isotropic.report.total_length);
    dense.output_dir = dir.path().join("run_42");
    let anisotropic = match run_pipeline(&dense) {
        Ok(a) => a,
        Err(e) => {
            println!("criterion 8: REPORTED - (4,2) run failed at matched length: {e}");
            return;
        }
    };
    let d11 = isotropic.report.delta_max;
    let d42 = anisotropic.report.delta_max;
    let len_diff = (anisotropic.report.total_length - isotropic.report.total_length).abs()
        / isotropic.report.total_length;
    let verdict = if d42 < d11 { "trend held" } else { "trend did not hold" };
    println!(
        "criterion 8: REPORTED - delta_max (4,2) = {d42:.4e} vs (1,1) = {d11:.4e} at lengths within {:.1}%: {verdict}",
        100.0 * len_diff
    );
}

// ---------------------------------------------------------------------------
// 9. Determinism

#[test]
fn criterion_9_determinism() {
    report(
        "criterion 9",
        "two pipeline runs with identical config produce byte-identical outputs",
        || {
            let dir = tempfile::tempdir().unwrap();
            let mut cfg = pipeline_fixture(dir.path(), 14, 4.0, 1.0, 5);
            cfg.output_dir = dir.path().join("first");
            run_pipeline(&cfg).unwrap();
            cfg.output_dir = dir.path().join("second");
            run_pipeline(&cfg).unwrap();
            let names = [
                "field.json",
                "deformed.obj",
                "genealogy.json",
                "gridshell.obj",
                "metrics.csv",
                "report.json",
                "axial.csv",
            ];
            let mut bytes = 0usize;
            for name in names {
                let a = std::fs::read(dir.path().join("first").join(name)).unwrap();
                let b = std::fs::read(dir.path().join("second").join(name)).unwrap();
                assert_eq!(a, b, "{name} differs between runs");
                bytes += a.len();
            }
            format!("{} artifacts, {bytes} bytes compared equal", names.len())
        },
    );
}
