//! Polygonal meshes with an embedded inclusion.
//!
//! A [`PolyMesh`] is a half-edge structure built from counter-clockwise vertex
//! loops. Edges lying on the inclusion never receive a twin: each side of the
//! inclusion owns its own geometric edge, so the two sides carry independent
//! flux unknowns. Interior inclusion vertices are duplicated by
//! [`embed_inclusion`], which disconnects the sides everywhere except at the
//! tips. A cell whose loop runs along both sides of the inclusion near a tip
//! is a cut (slit) cell.

mod agglomerate;
mod embed;
mod generate;
mod locate;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use agglomerate::{agglomerate, agglomerate_with_report, AgglomerationReport};
pub use embed::embed_inclusion;
pub use generate::generate_triangulation;
pub use locate::PointLocator;

use crate::error::{Result, VemError};
use crate::geometry::{loop_geometry, segment_distance, Point2, Rect};
use crate::problem::Affine;

/// Relative tolerance for geometric coincidence tests, scaled by the mesh extent.
pub(crate) const GEOM_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InclusionSide {
    None,
    Plus,
    Minus,
}

/// Straight immersed inclusion with independent pressures on its two sides.
///
/// The plus side is the half-plane reached from the segment along
/// `normal()`, the counter-clockwise rotation of the a-to-b tangent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inclusion {
    #[serde(rename = "a")]
    pub endpoint_a: Point2,
    #[serde(rename = "b")]
    pub endpoint_b: Point2,
    pub p_plus: Affine,
    pub p_minus: Affine,
}

impl Inclusion {
    pub fn new(endpoint_a: Point2, endpoint_b: Point2, p_plus: Affine, p_minus: Affine) -> Result<Self> {
        let inc = Inclusion {
            endpoint_a,
            endpoint_b,
            p_plus,
            p_minus,
        };
        inc.validate()?;
        Ok(inc)
    }

    pub fn with_constant_pressures(a: Point2, b: Point2, p_plus: f64, p_minus: f64) -> Result<Self> {
        Self::new(a, b, Affine::constant(p_plus), Affine::constant(p_minus))
    }

    pub fn validate(&self) -> Result<()> {
        if !self.endpoint_a.is_finite() || !self.endpoint_b.is_finite() {
            return Err(VemError::Config("inclusion endpoints must be finite".into()));
        }
        if self.endpoint_a == self.endpoint_b {
            return Err(VemError::Config("inclusion endpoints coincide".into()));
        }
        Ok(())
    }

    /// Both tips strictly inside the domain.
    pub fn check_immersed(&self, domain: &Rect) -> Result<()> {
        for p in self.tips() {
            if !domain.contains_strictly(p) {
                return Err(VemError::Config(format!(
                    "inclusion tip ({}, {}) is not strictly inside the domain",
                    p.x, p.y
                )));
            }
        }
        Ok(())
    }

    pub fn tips(&self) -> [Point2; 2] {
        [self.endpoint_a, self.endpoint_b]
    }

    pub fn length(&self) -> f64 {
        self.endpoint_a.distance(self.endpoint_b)
    }

    pub fn tangent(&self) -> Point2 {
        let d = self.endpoint_b - self.endpoint_a;
        d * (1.0 / d.norm())
    }

    pub fn normal(&self) -> Point2 {
        self.tangent().rotate_ccw()
    }

    pub fn distance(&self, p: Point2) -> f64 {
        segment_distance(p, self.endpoint_a, self.endpoint_b)
    }

    /// Arc-length parameter in [0, 1] of the projection of `p`.
    pub fn parameter(&self, p: Point2) -> f64 {
        (p - self.endpoint_a).dot(self.tangent()) / self.length()
    }

    pub fn side_pressure(&self, side: InclusionSide) -> Option<&Affine> {
        match side {
            InclusionSide::Plus => Some(&self.p_plus),
            InclusionSide::Minus => Some(&self.p_minus),
            InclusionSide::None => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HalfEdge {
    pub tail: usize,
    pub head: usize,
    pub twin: Option<usize>,
    pub cell: usize,
    /// Geometric edge id; each inclusion side has its own.
    pub edge: usize,
    pub side: InclusionSide,
    pub on_boundary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// Counter-clockwise closed loop of half-edge ids.
    pub half_edges: Vec<usize>,
    pub measure: f64,
    /// Largest pairwise vertex distance, slit ignored.
    pub diameter: f64,
    pub centroid: Point2,
    pub is_cut: bool,
}

#[derive(Debug, Clone)]
pub struct PolyMesh {
    vertices: Vec<Point2>,
    half_edges: Vec<HalfEdge>,
    cells: Vec<Cell>,
    edge_count: usize,
    mesh_size: f64,
    inclusion: Option<Inclusion>,
}

impl PolyMesh {
    /// Builds the half-edge structure from vertex loops.
    ///
    /// Loops may be given in either orientation. Edges lying on `inclusion`
    /// are never twinned; their side follows from which half-plane the owning
    /// cell occupies.
    pub fn from_loops(
        vertices: Vec<Point2>,
        loops: Vec<Vec<usize>>,
        inclusion: Option<Inclusion>,
    ) -> Result<Self> {
        if let Some(p) = vertices.iter().find(|p| !p.is_finite()) {
            return Err(VemError::DegenerateGeometry(format!("non-finite vertex {p:?}")));
        }
        if let Some(inc) = &inclusion {
            inc.validate()?;
        }
        let tol = geometric_tolerance(&vertices);

        let mut loops = loops;
        let mut geoms = Vec::with_capacity(loops.len());
        for (c, lp) in loops.iter_mut().enumerate() {
            if lp.len() < 3 {
                return Err(VemError::DegenerateCell {
                    cell: c,
                    reason: format!("loop has {} vertices", lp.len()),
                });
            }
            if let Some(&v) = lp.iter().find(|&&v| v >= vertices.len()) {
                return Err(VemError::Topology(format!(
                    "cell {c} references missing vertex {v}"
                )));
            }
            let pts: Vec<Point2> = lp.iter().map(|&v| vertices[v]).collect();
            let g = loop_geometry(&pts).map_err(|e| VemError::DegenerateCell {
                cell: c,
                reason: e.to_string(),
            })?;
            if g.orientation < 0.0 {
                lp.reverse();
            }
            geoms.push(g);
        }

        let mut half_edges = Vec::with_capacity(loops.iter().map(Vec::len).sum());
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        let mut cells = Vec::with_capacity(loops.len());
        for (c, lp) in loops.iter().enumerate() {
            let n = lp.len();
            let mut ids = Vec::with_capacity(n);
            for i in 0..n {
                let (tail, head) = (lp[i], lp[(i + 1) % n]);
                if tail == head {
                    return Err(VemError::DegenerateCell {
                        cell: c,
                        reason: format!("repeated consecutive vertex {tail}"),
                    });
                }
                let id = half_edges.len();
                if directed.insert((tail, head), id).is_some() {
                    return Err(VemError::Topology(format!(
                        "directed edge {tail}->{head} used by more than one cell"
                    )));
                }
                half_edges.push(HalfEdge {
                    tail,
                    head,
                    twin: None,
                    cell: c,
                    edge: usize::MAX,
                    side: InclusionSide::None,
                    on_boundary: false,
                });
                ids.push(id);
            }
            let g = geoms[c];
            cells.push(Cell {
                half_edges: ids,
                measure: g.measure,
                diameter: g.diameter,
                centroid: g.centroid,
                is_cut: false,
            });
        }

        for h in 0..half_edges.len() {
            let (tail, head, cell) = (half_edges[h].tail, half_edges[h].head, half_edges[h].cell);
            let (a, b) = (vertices[tail], vertices[head]);
            let on_gamma = inclusion
                .as_ref()
                .is_some_and(|inc| inc.distance(a) <= tol && inc.distance(b) <= tol);
            if on_gamma {
                let inc = inclusion.as_ref().unwrap();
                // The owning cell lies to the left of the directed edge.
                let left = (b - a).rotate_ccw();
                half_edges[h].side = if left.dot(inc.normal()) > 0.0 {
                    InclusionSide::Plus
                } else {
                    InclusionSide::Minus
                };
                continue;
            }
            match directed.get(&(head, tail)) {
                Some(&t) if half_edges[t].cell == cell => {
                    return Err(VemError::Topology(format!(
                        "cell {cell} contains a slit {tail}-{head} that is not on the inclusion"
                    )));
                }
                Some(&t) => half_edges[h].twin = Some(t),
                None => half_edges[h].on_boundary = true,
            }
        }

        let mut edge_count = 0;
        for h in 0..half_edges.len() {
            half_edges[h].edge = match half_edges[h].twin {
                Some(t) if t < h => half_edges[t].edge,
                _ => {
                    edge_count += 1;
                    edge_count - 1
                }
            };
        }

        for cell in cells.iter_mut() {
            cell.is_cut = loop_has_slit(&cell.half_edges, &half_edges, &vertices, tol);
        }

        let mesh_size = cells.iter().map(|c| c.diameter).fold(0.0, f64::max);
        Ok(PolyMesh {
            vertices,
            half_edges,
            cells,
            edge_count,
            mesh_size,
            inclusion,
        })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn half_edges(&self) -> &[HalfEdge] {
        &self.half_edges
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Number of geometric edges, inclusion edges counted once per side.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Largest cell diameter.
    pub fn mesh_size(&self) -> f64 {
        self.mesh_size
    }

    pub fn inclusion(&self) -> Option<&Inclusion> {
        self.inclusion.as_ref()
    }

    pub fn cut_cell_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_cut).count()
    }

    pub fn total_measure(&self) -> f64 {
        self.cells.iter().map(|c| c.measure).sum()
    }

    pub fn cell_vertices(&self, cell: usize) -> Vec<usize> {
        self.cells[cell]
            .half_edges
            .iter()
            .map(|&h| self.half_edges[h].tail)
            .collect()
    }

    pub fn cell_points(&self, cell: usize) -> Vec<Point2> {
        self.cells[cell]
            .half_edges
            .iter()
            .map(|&h| self.vertices[self.half_edges[h].tail])
            .collect()
    }

    pub fn cell_loops(&self) -> Vec<Vec<usize>> {
        (0..self.cells.len()).map(|c| self.cell_vertices(c)).collect()
    }

    pub fn half_edge_points(&self, h: usize) -> (Point2, Point2) {
        let he = &self.half_edges[h];
        (self.vertices[he.tail], self.vertices[he.head])
    }

    /// Axis-aligned bounding box of all vertices.
    pub fn bounding_box(&self) -> Rect {
        bounding_rect(&self.vertices)
    }

    pub(crate) fn tolerance(&self) -> f64 {
        geometric_tolerance(&self.vertices)
    }

    /// Structural checks: closed loops, positive measures, twin symmetry,
    /// inclusion flags, and, when `domain` is given, tiling of its area.
    pub fn validate(&self, domain: Option<&Rect>) -> Result<()> {
        for (c, cell) in self.cells.iter().enumerate() {
            let n = cell.half_edges.len();
            for i in 0..n {
                let h = &self.half_edges[cell.half_edges[i]];
                let next = &self.half_edges[cell.half_edges[(i + 1) % n]];
                if h.head != next.tail || h.cell != c {
                    return Err(VemError::Topology(format!("cell {c} loop is not closed")));
                }
            }
            if !(cell.measure > 0.0) {
                return Err(VemError::DegenerateCell {
                    cell: c,
                    reason: "non-positive measure".into(),
                });
            }
        }
        let mut per_edge = vec![0usize; self.edge_count];
        for (h, he) in self.half_edges.iter().enumerate() {
            per_edge[he.edge] += 1;
            if let Some(t) = he.twin {
                let tw = &self.half_edges[t];
                if tw.twin != Some(h) || tw.tail != he.head || tw.head != he.tail {
                    return Err(VemError::Topology(format!("half-edge {h} twin mismatch")));
                }
                if tw.cell == he.cell {
                    return Err(VemError::Topology(format!("half-edge {h} twinned inside its cell")));
                }
            }
            if he.side != InclusionSide::None && (he.twin.is_some() || he.on_boundary) {
                return Err(VemError::Topology(format!(
                    "inclusion half-edge {h} is twinned or flagged as outer boundary"
                )));
            }
        }
        if let Some(e) = per_edge.iter().position(|&k| k == 0 || k > 2) {
            return Err(VemError::Topology(format!(
                "edge {e} has {} incident half-edges",
                per_edge[e]
            )));
        }
        if let Some(domain) = domain {
            let total = self.total_measure();
            if ((total - domain.area()) / domain.area()).abs() > 1e-12 {
                return Err(VemError::Topology(format!(
                    "cells cover {total}, domain area is {}",
                    domain.area()
                )));
            }
        }
        Ok(())
    }
}

fn loop_has_slit(loop_: &[usize], half_edges: &[HalfEdge], vertices: &[Point2], tol: f64) -> bool {
    let close = |a: usize, b: usize| vertices[a].distance(vertices[b]) <= tol;
    for (i, &hi) in loop_.iter().enumerate() {
        for &hj in &loop_[i + 1..] {
            let (a, b) = (&half_edges[hi], &half_edges[hj]);
            if close(a.tail, b.head) && close(a.head, b.tail) {
                return true;
            }
        }
    }
    false
}

pub(crate) fn bounding_rect(points: &[Point2]) -> Rect {
    let mut r = Rect {
        x_min: f64::INFINITY,
        x_max: f64::NEG_INFINITY,
        y_min: f64::INFINITY,
        y_max: f64::NEG_INFINITY,
    };
    for p in points {
        r.x_min = r.x_min.min(p.x);
        r.x_max = r.x_max.max(p.x);
        r.y_min = r.y_min.min(p.y);
        r.y_max = r.y_max.max(p.y);
    }
    r
}

pub(crate) fn geometric_tolerance(points: &[Point2]) -> f64 {
    if points.is_empty() {
        return GEOM_RTOL;
    }
    let r = bounding_rect(points);
    GEOM_RTOL * r.width().max(r.height()).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_triangles() -> (Vec<Point2>, Vec<Vec<usize>>) {
        let v = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        (v, vec![vec![0, 1, 2], vec![0, 2, 3]])
    }

    #[test]
    fn two_triangle_square() {
        let (v, l) = two_triangles();
        let m = PolyMesh::from_loops(v, l, None).unwrap();
        assert_eq!(m.edge_count(), 5);
        assert_eq!(m.num_cells(), 2);
        assert_eq!(m.half_edges().iter().filter(|h| h.on_boundary).count(), 4);
        m.validate(Some(&Rect::UNIT)).unwrap();
        assert_eq!(m.cut_cell_count(), 0);
    }

    #[test]
    fn clockwise_loops_are_reoriented() {
        let (v, _) = two_triangles();
        let m = PolyMesh::from_loops(v, vec![vec![2, 1, 0], vec![3, 2, 0]], None).unwrap();
        m.validate(Some(&Rect::UNIT)).unwrap();
        assert_eq!(m.edge_count(), 5);
    }

    #[test]
    fn diagonal_inclusion_is_doubled() {
        let (v, l) = two_triangles();
        let inc = Inclusion::with_constant_pressures(
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 1.0),
            1.0,
            1.0,
        )
        .unwrap();
        let m = PolyMesh::from_loops(v, l, Some(inc)).unwrap();
        assert_eq!(m.edge_count(), 6);
        let sides: Vec<_> = m
            .half_edges()
            .iter()
            .filter(|h| h.side != InclusionSide::None)
            .map(|h| h.side)
            .collect();
        assert_eq!(sides.len(), 2);
        assert!(sides.contains(&InclusionSide::Plus) && sides.contains(&InclusionSide::Minus));
        // Cell 1 (upper-left) lies on the +normal side of a (0,0)->(1,1) tangent.
        let plus = m
            .half_edges()
            .iter()
            .find(|h| h.side == InclusionSide::Plus)
            .unwrap();
        assert_eq!(plus.cell, 1);
        m.validate(None).unwrap();
    }

    #[test]
    fn rejects_overlapping_cells() {
        let (v, _) = two_triangles();
        let err = PolyMesh::from_loops(v, vec![vec![0, 1, 2], vec![0, 1, 3]], None).unwrap_err();
        assert!(matches!(err, VemError::Topology(_)));
    }

    #[test]
    fn rejects_non_inclusion_slit() {
        let v = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.5, 1.0),
            Point2::new(0.5, 0.5),
            Point2::new(0.0, 1.0),
        ];
        let err = PolyMesh::from_loops(v, vec![vec![0, 1, 2, 3, 4, 3, 5]], None).unwrap_err();
        assert!(matches!(err, VemError::Topology(_)));
    }

    #[test]
    fn degenerate_loop_reports_cell() {
        let v = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(2.0, 0.0),
        ];
        let err = PolyMesh::from_loops(v, vec![vec![0, 1, 2]], None).unwrap_err();
        assert!(matches!(err, VemError::DegenerateCell { cell: 0, .. }));
    }
}
