use std::collections::HashMap;

use super::{Inclusion, PolyMesh};
use crate::error::{Result, VemError};
use crate::geometry::{Point2, Rect};

/// Structured right-triangle mesh of `domain` with `base_resolution` squares
/// per side, each split along its `(0,0)-(1,1)` diagonal, then refined
/// around the inclusion tips.
///
/// Refinement level `l` bisects (longest edge, conforming closure) every
/// triangle touching a tip until its diameter is at most `d0 / 2^l`, where
/// `d0` is the diameter of the unrefined triangles. The returned mesh carries
/// no inclusion flags; see [`super::embed_inclusion`].
pub fn generate_triangulation(
    domain: &Rect,
    inclusion: Option<&Inclusion>,
    base_resolution: usize,
    tip_refinement_levels: usize,
) -> Result<PolyMesh> {
    if base_resolution < 2 {
        return Err(VemError::Constraint(format!(
            "base_resolution must be at least 2, got {base_resolution}"
        )));
    }
    let n = base_resolution;
    let dx = domain.width() / n as f64;
    let dy = domain.height() / n as f64;
    let vid = |i: usize, j: usize| j * (n + 1) + i;

    let mut verts = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            verts.push(lattice_point(domain, n, i, j));
        }
    }
    let mut tris = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (v00, v10, v11, v01) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            tris.push([v00, v10, v11]);
            tris.push([v00, v11, v01]);
        }
    }

    let tips = match inclusion {
        Some(inc) => {
            inc.validate()?;
            inc.check_immersed(domain)
                .map_err(|e| VemError::Constraint(e.to_string()))?;
            check_lattice_conformity(domain, n, inc)?;
            inc.tips().to_vec()
        }
        None => Vec::new(),
    };

    let mut tri = Triangulation::new(verts, tris);
    if !tips.is_empty() && tip_refinement_levels > 0 {
        let d0 = dx.hypot(dy);
        let tip_ids: Vec<usize> = tips
            .iter()
            .map(|&t| tri.nearest_vertex(t))
            .collect();
        for level in 1..=tip_refinement_levels {
            let target = d0 / f64::powi(2.0, level as i32) * (1.0 + 1e-9);
            while let Some(t) = tri.find_coarse_tip_triangle(&tip_ids, target) {
                tri.bisect(t);
            }
        }
    }

    PolyMesh::from_loops(
        tri.verts,
        tri.tris.into_iter().map(|t| t.to_vec()).collect(),
        None,
    )
}

fn lattice_point(domain: &Rect, n: usize, i: usize, j: usize) -> Point2 {
    // Pin the last lattice line to the exact domain bound.
    let x = if i == n {
        domain.x_max
    } else {
        domain.x_min + domain.width() * i as f64 / n as f64
    };
    let y = if j == n {
        domain.y_max
    } else {
        domain.y_min + domain.height() * j as f64 / n as f64
    };
    Point2::new(x, y)
}

/// The inclusion must start and end on lattice vertices and run along
/// horizontal, vertical, or diagonal lattice edges.
fn check_lattice_conformity(domain: &Rect, n: usize, inc: &Inclusion) -> Result<()> {
    let to_index = |p: Point2| -> Result<(i64, i64)> {
        let fi = (p.x - domain.x_min) / domain.width() * n as f64;
        let fj = (p.y - domain.y_min) / domain.height() * n as f64;
        let (i, j) = (fi.round(), fj.round());
        if (fi - i).abs() > 1e-9 || (fj - j).abs() > 1e-9 {
            return Err(VemError::Constraint(format!(
                "inclusion tip ({}, {}) is not a vertex of the {n}x{n} lattice",
                p.x, p.y
            )));
        }
        Ok((i as i64, j as i64))
    };
    let (ia, ja) = to_index(inc.endpoint_a)?;
    let (ib, jb) = to_index(inc.endpoint_b)?;
    let (di, dj) = (ib - ia, jb - ja);
    if !(di == 0 || dj == 0 || di == dj) {
        return Err(VemError::Constraint(format!(
            "inclusion direction ({di}, {dj}) in lattice steps does not follow mesh edges"
        )));
    }
    Ok(())
}

struct Triangulation {
    verts: Vec<Point2>,
    tris: Vec<[usize; 3]>,
    edge_tris: HashMap<(usize, usize), Vec<usize>>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Triangulation {
    fn new(verts: Vec<Point2>, tris: Vec<[usize; 3]>) -> Self {
        let mut t = Triangulation {
            verts,
            tris: Vec::new(),
            edge_tris: HashMap::new(),
        };
        for tri in tris {
            t.push(tri);
        }
        t
    }

    fn push(&mut self, tri: [usize; 3]) -> usize {
        let id = self.tris.len();
        self.tris.push(tri);
        self.link(id);
        id
    }

    fn link(&mut self, id: usize) {
        let tri = self.tris[id];
        for k in 0..3 {
            self.edge_tris
                .entry(key(tri[k], tri[(k + 1) % 3]))
                .or_default()
                .push(id);
        }
    }

    fn unlink(&mut self, id: usize) {
        let tri = self.tris[id];
        for k in 0..3 {
            let e = key(tri[k], tri[(k + 1) % 3]);
            if let Some(list) = self.edge_tris.get_mut(&e) {
                list.retain(|&t| t != id);
                if list.is_empty() {
                    self.edge_tris.remove(&e);
                }
            }
        }
    }

    fn nearest_vertex(&self, p: Point2) -> usize {
        (0..self.verts.len())
            .min_by(|&a, &b| {
                self.verts[a]
                    .distance(p)
                    .total_cmp(&self.verts[b].distance(p))
            })
            .expect("non-empty lattice")
    }

    fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.tris[t].map(|v| self.verts[v]);
        a.distance(b).max(b.distance(c)).max(c.distance(a))
    }

    /// Local index `k` of the longest edge `(tri[k], tri[k+1])`; ties go to
    /// the edge with the smaller sorted vertex key.
    fn longest_edge(&self, t: usize) -> usize {
        let tri = self.tris[t];
        let len = |k: usize| self.verts[tri[k]].distance(self.verts[tri[(k + 1) % 3]]);
        let mut best = 0;
        for k in 1..3 {
            let (lk, lb) = (len(k), len(best));
            let tie = (lk - lb).abs() <= 1e-12 * lb;
            if (!tie && lk > lb) || (tie && key(tri[k], tri[(k + 1) % 3]) < key(tri[best], tri[(best + 1) % 3])) {
                best = k;
            }
        }
        best
    }

    fn longest_key(&self, t: usize) -> (usize, usize) {
        let k = self.longest_edge(t);
        let tri = self.tris[t];
        key(tri[k], tri[(k + 1) % 3])
    }

    fn find_coarse_tip_triangle(&self, tips: &[usize], target: f64) -> Option<usize> {
        (0..self.tris.len())
            .find(|&t| self.tris[t].iter().any(|v| tips.contains(v)) && self.diameter(t) > target)
    }

    /// Rivara bisection: the neighbour across the longest edge is refined
    /// first until both triangles share that edge as their longest.
    fn bisect(&mut self, t: usize) {
        loop {
            let e = self.longest_key(t);
            let neighbour = self.edge_tris[&e].iter().copied().find(|&o| o != t);
            match neighbour {
                Some(nb) if self.longest_key(nb) != e => self.bisect(nb),
                _ => {
                    let mid = self.verts.len();
                    self.verts.push(self.verts[e.0].midpoint(self.verts[e.1]));
                    self.split(t, e, mid);
                    if let Some(nb) = neighbour {
                        self.split(nb, e, mid);
                    }
                    return;
                }
            }
        }
    }

    fn split(&mut self, t: usize, e: (usize, usize), mid: usize) {
        let tri = self.tris[t];
        let k = (0..3)
            .find(|&k| key(tri[k], tri[(k + 1) % 3]) == e)
            .expect("edge belongs to triangle");
        let (a, b, c) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
        self.unlink(t);
        self.tris[t] = [a, mid, c];
        self.link(t);
        self.push([mid, b, c]);
    }
}
