#![allow(dead_code)]

use darcy_vem::study::{build_level_mesh, LevelSpec, ReferenceSpec, RunConfig};
use darcy_vem::{Point2, PolyMesh};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolygonKind {
    Convex,
    Concave,
    Slit,
}

pub const KINDS: [PolygonKind; 3] = [PolygonKind::Convex, PolygonKind::Concave, PolygonKind::Slit];

/// Counter-clockwise random polygon around a random centre, diameter of order one.
///
/// Slit polygons walk in from vertex 0 to an interior tip and back out, so
/// vertex 0 appears twice with a zero-width cut between the two visits.
pub fn random_polygon(kind: PolygonKind, seed: u64) -> Vec<Point2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(3..=9usize);
    let k = if kind == PolygonKind::Concave { k.max(5) } else { k };
    let centre = Point2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    let (sx, sy) = (rng.random_range(0.5..1.0), rng.random_range(0.5..1.0));
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let mut pts: Vec<Point2> = (0..k)
        .map(|i| {
            let t = phase + std::f64::consts::TAU * (i as f64 + rng.random_range(0.0..0.7)) / k as f64;
            let r = match kind {
                PolygonKind::Convex => 1.0,
                _ => {
                    if i % 2 == 1 {
                        rng.random_range(0.25..0.6)
                    } else {
                        1.0
                    }
                }
            };
            Point2::new(r * sx * t.cos(), r * sy * t.sin())
        })
        .collect();
    if kind == PolygonKind::Slit {
        let tip = pts[0] * rng.random_range(0.2..0.8);
        pts.splice(1..1, [tip, pts[0]]);
    }
    pts.into_iter().map(|p| p + centre).collect()
}

/// Mean of `f` over the polygon by a fan of triangles from its first vertex,
/// each integrated with the three-point edge-midpoint rule (exact for
/// quadratics). Slits contribute zero-area triangles.
pub fn polygon_mean<F: Fn(Point2) -> f64>(pts: &[Point2], f: F) -> f64 {
    let o = pts[0];
    let (mut area, mut integral) = (0.0, 0.0);
    for w in pts[1..].windows(2) {
        let (a, b) = (w[0], w[1]);
        let signed = 0.5 * ((a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x));
        let q = (f(o.midpoint(a)) + f(a.midpoint(b)) + f(b.midpoint(o))) / 3.0;
        area += signed;
        integral += signed * q;
    }
    integral / area
}

pub fn gamma_config(p_plus: f64, p_minus: f64) -> RunConfig {
    RunConfig::from_json(&format!(
        r#"{{"schema_version": 1,
             "inclusion": {{"a": [0.25, 0.5], "b": [0.75, 0.5], "p_plus": {p_plus}, "p_minus": {p_minus}}},
             "levels": [{{"base_resolution": 8}}]}}"#
    ))
    .unwrap()
}

/// The level family shipped in the presets.
pub fn family() -> Vec<LevelSpec> {
    [8, 16, 32, 64]
        .into_iter()
        .map(|n| LevelSpec {
            base_resolution: n,
            tip_refinement_levels: 2,
            measure_threshold_ratio: 0.5,
        })
        .collect()
}

pub fn family_meshes(cfg: &RunConfig) -> Vec<PolyMesh> {
    family().iter().map(|l| build_level_mesh(cfg, l).unwrap()).collect()
}

pub fn preset(name: &str) -> RunConfig {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets").join(name);
    RunConfig::from_path(&path).unwrap()
}

pub const REFERENCE: ReferenceSpec = ReferenceSpec {
    base_resolution: 256,
    tip_refinement_levels: 6,
};

/// Independent crossing-number containment; boundary points count as inside.
pub fn crossing_contains(pts: &[Point2], p: Point2, tol: f64) -> bool {
    let n = pts.len();
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        let ab = b - a;
        let t = ((p - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
        if (a + ab * t).distance(p) <= tol {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if x > p.x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Lowest-id cell containing `p` by brute force over all cells.
pub fn brute_force_locate(mesh: &PolyMesh, p: Point2, tol: f64) -> Option<usize> {
    (0..mesh.num_cells()).find(|&c| crossing_contains(&mesh.cell_points(c), p, tol))
}
