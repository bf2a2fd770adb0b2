use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{loop_has_slit, PolyMesh};
use crate::error::{Result, VemError};

/// What the agglomeration pass did.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AgglomerationReport {
    /// Cells below this measure were merged.
    pub threshold: f64,
    pub merges: usize,
    /// Candidate merges rejected because the union was not a simple loop.
    pub rejected_candidates: usize,
    /// Input cell ids of small cells that found no valid neighbour.
    pub stuck_cells: Vec<usize>,
    pub forced_tip_cells: usize,
}

/// Glues small cells to neighbours.
///
/// With `force_tip_cuts`, all cells touching each inclusion tip are first
/// merged into a single cell whose loop runs along both sides of the
/// inclusion. Then every cell with measure below `measure_threshold_ratio`
/// times the mean input cell measure is merged into the neighbour with the
/// longest shared interface (ties to the lower id), repeatedly, until it
/// reaches the threshold. Candidates whose union is not one simple loop, or
/// that would create a cut cell away from the forced ones, are skipped.
pub fn agglomerate(mesh: &PolyMesh, measure_threshold_ratio: f64, force_tip_cuts: bool) -> Result<PolyMesh> {
    agglomerate_with_report(mesh, measure_threshold_ratio, force_tip_cuts).map(|(m, _)| m)
}

pub fn agglomerate_with_report(
    mesh: &PolyMesh,
    measure_threshold_ratio: f64,
    force_tip_cuts: bool,
) -> Result<(PolyMesh, AgglomerationReport)> {
    if !(0.0..1.0).contains(&measure_threshold_ratio) {
        return Err(VemError::Config(format!(
            "measure_threshold_ratio must lie in [0, 1), got {measure_threshold_ratio}"
        )));
    }
    let mut groups = Groups::new(mesh);
    let mut report = AgglomerationReport {
        threshold: measure_threshold_ratio * mesh.total_measure() / mesh.num_cells() as f64,
        ..Default::default()
    };

    if force_tip_cuts {
        if let Some(inc) = mesh.inclusion() {
            let tol = mesh.tolerance();
            for tip in inc.tips() {
                let Some(tip_vertex) = (0..mesh.vertices().len()).find(|&v| mesh.vertices()[v].distance(tip) <= tol)
                else {
                    return Err(VemError::Conformity(format!(
                        "tip ({}, {}) is not a mesh vertex",
                        tip.x, tip.y
                    )));
                };
                let incident: BTreeSet<usize> = mesh
                    .half_edges()
                    .iter()
                    .filter(|h| h.tail == tip_vertex)
                    .map(|h| groups.owner[h.cell])
                    .collect();
                let incident: Vec<usize> = incident.into_iter().collect();
                match groups.union_loop(&incident) {
                    Some(lp) => {
                        groups.merge(&incident, lp);
                        report.forced_tip_cells += 1;
                    }
                    None => {
                        log::warn!("cells around tip ({}, {}) do not form a simple loop; tip cut skipped", tip.x, tip.y);
                    }
                }
            }
        }
    }

    let threshold = report.threshold;
    let extent = mesh.tolerance() / super::GEOM_RTOL;
    let mut queue: BTreeSet<(u64, usize)> = (0..mesh.num_cells())
        .filter(|&g| groups.is_alive(g) && groups.measure[g] < threshold)
        .map(|g| (groups.measure[g].to_bits(), g))
        .collect();
    while let Some((bits, g)) = queue.pop_first() {
        if !groups.is_alive(g) || groups.measure[g].to_bits() != bits {
            continue;
        }
        let mut candidates: Vec<(i64, usize)> = groups
            .shared_lengths(g)
            .into_iter()
            .map(|(nb, len)| ((len / extent * 1e9).round() as i64, nb))
            .collect();
        candidates.sort_by_key(|&(len, nb)| (Reverse(len), nb));

        let mut merged = None;
        for (_, nb) in candidates {
            if groups.cut[g] && groups.cut[nb] {
                report.rejected_candidates += 1;
                continue;
            }
            let Some(lp) = groups.union_loop(&[g, nb]) else {
                report.rejected_candidates += 1;
                continue;
            };
            if !groups.cut[g] && !groups.cut[nb] && groups.loop_is_cut(&lp) {
                report.rejected_candidates += 1;
                continue;
            }
            merged = Some(groups.merge(&[g, nb], lp));
            break;
        }
        match merged {
            Some(s) => {
                report.merges += 1;
                if groups.measure[s] < threshold {
                    queue.insert((groups.measure[s].to_bits(), s));
                }
            }
            None => {
                log::warn!("small cell group {g} has no valid neighbour to merge with; kept as is");
                report.stuck_cells.push(g);
            }
        }
    }

    Ok((groups.into_mesh()?, report))
}

struct Groups<'a> {
    mesh: &'a PolyMesh,
    owner: Vec<usize>,
    members: Vec<Vec<usize>>,
    loops: Vec<Vec<usize>>,
    measure: Vec<f64>,
    cut: Vec<bool>,
    tol: f64,
}

impl<'a> Groups<'a> {
    fn new(mesh: &'a PolyMesh) -> Self {
        let n = mesh.num_cells();
        Groups {
            mesh,
            owner: (0..n).collect(),
            members: (0..n).map(|c| vec![c]).collect(),
            loops: mesh.cells().iter().map(|c| c.half_edges.clone()).collect(),
            measure: mesh.cells().iter().map(|c| c.measure).collect(),
            cut: mesh.cells().iter().map(|c| c.is_cut).collect(),
            tol: mesh.tolerance(),
        }
    }

    fn is_alive(&self, g: usize) -> bool {
        !self.members[g].is_empty()
    }

    fn loop_is_cut(&self, lp: &[usize]) -> bool {
        loop_has_slit(lp, self.mesh.half_edges(), self.mesh.vertices(), self.tol)
    }

    /// Neighbouring groups and the total length of the shared interface.
    fn shared_lengths(&self, g: usize) -> BTreeMap<usize, f64> {
        let mut out = BTreeMap::new();
        for &h in &self.loops[g] {
            let he = &self.mesh.half_edges()[h];
            if let Some(t) = he.twin {
                let nb = self.owner[self.mesh.half_edges()[t].cell];
                if nb != g {
                    let (a, b) = self.mesh.half_edge_points(h);
                    *out.entry(nb).or_insert(0.0) += a.distance(b);
                }
            }
        }
        out
    }

    /// Boundary loop of the union of `set`, or `None` if the union is not
    /// bounded by a single simple loop (hole or pinched vertex).
    fn union_loop(&self, set: &[usize]) -> Option<Vec<usize>> {
        let hes = self.mesh.half_edges();
        let inside = |g: usize| set.contains(&g);
        let boundary: Vec<usize> = set
            .iter()
            .flat_map(|&g| self.loops[g].iter().copied())
            .filter(|&h| match hes[h].twin {
                Some(t) => !inside(self.owner[hes[t].cell]),
                None => true,
            })
            .collect();
        let mut by_tail: HashMap<usize, usize> = HashMap::with_capacity(boundary.len());
        for &h in &boundary {
            if by_tail.insert(hes[h].tail, h).is_some() {
                return None;
            }
        }
        let start = *boundary.iter().min()?;
        let mut lp = Vec::with_capacity(boundary.len());
        let mut h = start;
        loop {
            lp.push(h);
            h = *by_tail.get(&hes[h].head)?;
            if h == start {
                break;
            }
            if lp.len() > boundary.len() {
                return None;
            }
        }
        (lp.len() == boundary.len()).then_some(lp)
    }

    /// Merges `set` into its lowest group id and returns that id.
    fn merge(&mut self, set: &[usize], lp: Vec<usize>) -> usize {
        let survivor = *set.iter().min().expect("non-empty merge set");
        for &g in set {
            if g == survivor {
                continue;
            }
            let moved = std::mem::take(&mut self.members[g]);
            for &c in &moved {
                self.owner[c] = survivor;
            }
            self.members[survivor].extend(moved);
            self.measure[survivor] += self.measure[g];
            self.loops[g].clear();
        }
        self.cut[survivor] = self.loop_is_cut(&lp);
        self.loops[survivor] = lp;
        survivor
    }

    fn into_mesh(self) -> Result<PolyMesh> {
        let hes = self.mesh.half_edges();
        let loops: Vec<Vec<usize>> = (0..self.members.len())
            .filter(|&g| self.is_alive(g))
            .map(|g| self.loops[g].iter().map(|&h| hes[h].tail).collect())
            .collect();
        let mut used = vec![false; self.mesh.vertices().len()];
        for lp in &loops {
            for &v in lp {
                used[v] = true;
            }
        }
        let mut remap = vec![usize::MAX; used.len()];
        let mut vertices = Vec::new();
        for (v, &u) in used.iter().enumerate() {
            if u {
                remap[v] = vertices.len();
                vertices.push(self.mesh.vertices()[v]);
            }
        }
        let loops = loops
            .into_iter()
            .map(|lp| lp.into_iter().map(|v| remap[v]).collect())
            .collect();
        PolyMesh::from_loops(vertices, loops, self.mesh.inclusion().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point2, Rect};
    use crate::mesh::{embed_inclusion, generate_triangulation, Inclusion, InclusionSide};

    fn embedded(n: usize, levels: usize) -> PolyMesh {
        let inc = Inclusion::with_constant_pressures(Point2::new(0.25, 0.5), Point2::new(0.75, 0.5), 1.0, 1.0)
            .unwrap();
        let tri = generate_triangulation(&Rect::UNIT, Some(&inc), n, levels).unwrap();
        embed_inclusion(&tri, &inc).unwrap()
    }

    #[test]
    fn zero_ratio_without_cuts_is_identity() {
        let m = embedded(8, 2);
        let a = agglomerate(&m, 0.0, false).unwrap();
        assert_eq!(a.num_cells(), m.num_cells());
        assert_eq!(a.cell_loops(), m.cell_loops());
    }

    #[test]
    fn zero_ratio_only_builds_tip_cells() {
        let m = embedded(8, 0);
        let a = agglomerate(&m, 0.0, true).unwrap();
        assert_eq!(a.cut_cell_count(), 2);
        // Six triangles around each tip of the structured lattice.
        assert_eq!(a.num_cells(), m.num_cells() - 2 * 5);
        a.validate(Some(&Rect::UNIT)).unwrap();
    }

    #[test]
    fn tip_cell_traverses_both_sides() {
        let m = embedded(8, 1);
        let a = agglomerate(&m, 0.0, true).unwrap();
        for (c, cell) in a.cells().iter().enumerate() {
            let sides: BTreeSet<_> = cell
                .half_edges
                .iter()
                .map(|&h| a.half_edges()[h].side)
                .filter(|s| *s != InclusionSide::None)
                .map(|s| s == InclusionSide::Plus)
                .collect();
            assert_eq!(sides.len() == 2, cell.is_cut, "cell {c}");
        }
    }

    #[test]
    fn merges_small_cells_and_conserves_area() {
        let m = embedded(16, 4);
        let (a, report) = agglomerate_with_report(&m, 0.5, true).unwrap();
        assert!(a.num_cells() < m.num_cells());
        assert!(((a.total_measure() - 1.0) / 1.0).abs() < 1e-12);
        assert_eq!(a.cut_cell_count(), 2);
        a.validate(Some(&Rect::UNIT)).unwrap();
        let stuck: BTreeSet<_> = report.stuck_cells.iter().collect();
        for (c, cell) in a.cells().iter().enumerate() {
            if cell.measure < report.threshold {
                // Only cells that found no neighbour may stay small.
                assert!(!stuck.is_empty(), "cell {c} below threshold");
            }
        }
    }

    #[test]
    fn rejects_bad_ratio() {
        let m = embedded(8, 0);
        assert!(agglomerate(&m, 1.0, false).is_err());
        assert!(agglomerate(&m, -0.1, false).is_err());
    }

    #[test]
    fn deterministic() {
        let m = embedded(16, 3);
        let a = agglomerate(&m, 0.4, true).unwrap();
        let b = agglomerate(&m, 0.4, true).unwrap();
        assert_eq!(a.cell_loops(), b.cell_loops());
        assert_eq!(a.vertices(), b.vertices());
    }
}
