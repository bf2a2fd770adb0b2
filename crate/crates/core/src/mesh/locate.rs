use super::{bounding_rect, PolyMesh};
use crate::error::{Result, VemError};
use crate::geometry::{on_loop_boundary, winding_number, Point2, Rect};

/// Bucketed winding-number point location.
///
/// Points on an edge shared by several cells resolve to the lowest cell id.
/// Slits have zero width, so points on a slit belong to the cut cell.
pub struct PointLocator<'a> {
    mesh: &'a PolyMesh,
    bbox: Rect,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
    loops: Vec<Vec<Point2>>,
    tol: f64,
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a PolyMesh) -> Self {
        let bbox = mesh.bounding_box();
        let side = (mesh.num_cells() as f64).sqrt().ceil().max(1.0) as usize;
        let (nx, ny) = (side, side);
        let tol = mesh.tolerance();
        let loops: Vec<Vec<Point2>> = (0..mesh.num_cells()).map(|c| mesh.cell_points(c)).collect();
        let mut buckets = vec![Vec::new(); nx * ny];
        let locator = |p: f64, lo: f64, width: f64, n: usize| -> usize {
            (((p - lo) / width * n as f64).floor().max(0.0) as usize).min(n - 1)
        };
        for (c, pts) in loops.iter().enumerate() {
            let r = bounding_rect(pts);
            let i0 = locator(r.x_min - tol, bbox.x_min, bbox.width(), nx);
            let i1 = locator(r.x_max + tol, bbox.x_min, bbox.width(), nx);
            let j0 = locator(r.y_min - tol, bbox.y_min, bbox.height(), ny);
            let j1 = locator(r.y_max + tol, bbox.y_min, bbox.height(), ny);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(c);
                }
            }
        }
        PointLocator {
            mesh,
            bbox,
            nx,
            ny,
            buckets,
            loops,
            tol,
        }
    }

    pub fn mesh(&self) -> &PolyMesh {
        self.mesh
    }

    pub fn locate(&self, p: Point2) -> Result<usize> {
        let outside = || VemError::Location { x: p.x, y: p.y };
        if !p.is_finite() || !self.bbox.contains(p, self.tol) {
            return Err(outside());
        }
        let bucket = |v: f64, lo: f64, width: f64, n: usize| -> usize {
            (((v - lo) / width * n as f64).floor().max(0.0) as usize).min(n - 1)
        };
        let i = bucket(p.x, self.bbox.x_min, self.bbox.width(), self.nx);
        let j = bucket(p.y, self.bbox.y_min, self.bbox.height(), self.ny);
        self.buckets[j * self.nx + i]
            .iter()
            .copied()
            .find(|&c| self.contains(c, p))
            .ok_or_else(outside)
    }

    /// Winding-number containment of `p` in cell `c`, boundary included.
    pub fn contains(&self, c: usize, p: Point2) -> bool {
        let pts = &self.loops[c];
        on_loop_boundary(pts, p, self.tol) || winding_number(pts, p) != 0
    }
}

impl PolyMesh {
    pub fn locator(&self) -> PointLocator<'_> {
        PointLocator::new(self)
    }

    /// One-off point location; build a [`PointLocator`] for repeated queries.
    pub fn locate_point(&self, p: Point2) -> Result<usize> {
        PointLocator::new(self).locate(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{agglomerate, embed_inclusion, generate_triangulation, Inclusion, InclusionSide};

    fn mesh() -> PolyMesh {
        let inc = Inclusion::with_constant_pressures(Point2::new(0.25, 0.5), Point2::new(0.75, 0.5), 1.0, -1.0)
            .unwrap();
        let tri = generate_triangulation(&Rect::UNIT, Some(&inc), 8, 2).unwrap();
        agglomerate(&embed_inclusion(&tri, &inc).unwrap(), 0.3, true).unwrap()
    }

    #[test]
    fn centroids_locate_to_their_cell() {
        let m = mesh();
        let loc = m.locator();
        for (c, cell) in m.cells().iter().enumerate() {
            if !cell.is_cut && loc.contains(c, cell.centroid) {
                assert_eq!(loc.locate(cell.centroid).unwrap(), c);
            }
        }
    }

    #[test]
    fn side_offset_picks_the_right_side() {
        let m = mesh();
        let loc = m.locator();
        let inc = *m.inclusion().unwrap();
        let n = inc.normal();
        let p = Point2::new(0.55, 0.5);
        let plus = loc.locate(p + n * 1e-9).unwrap();
        let minus = loc.locate(p - n * 1e-9).unwrap();
        assert_ne!(plus, minus);
        let side_of = |c: usize| {
            m.cells()[c]
                .half_edges
                .iter()
                .map(|&h| m.half_edges()[h].side)
                .find(|s| *s != InclusionSide::None)
        };
        assert_eq!(side_of(plus), Some(InclusionSide::Plus));
        assert_eq!(side_of(minus), Some(InclusionSide::Minus));
    }

    #[test]
    fn shared_edge_goes_to_lowest_id() {
        let m = generate_triangulation(&Rect::UNIT, None, 2, 0).unwrap();
        // Midpoint of the diagonal of the lower-left square: cells 0 and 1.
        assert_eq!(m.locate_point(Point2::new(0.25, 0.25)).unwrap(), 0);
    }

    #[test]
    fn outside_point_is_an_error() {
        let m = mesh();
        assert!(matches!(m.locate_point(Point2::new(1.5, 0.5)), Err(VemError::Location { .. })));
        assert!(m.locate_point(Point2::new(1.0, 1.0)).is_ok());
    }
}
