use std::collections::HashSet;

use super::{Inclusion, PolyMesh};
use crate::error::{Result, VemError};

/// Cuts the mesh open along the inclusion.
///
/// Every vertex strictly inside the segment is duplicated and the copy is
/// handed to the cells on the minus side; the tips stay shared. Edges on the
/// segment end up as one twinless half-edge per side.
pub fn embed_inclusion(mesh: &PolyMesh, inclusion: &Inclusion) -> Result<PolyMesh> {
    inclusion.validate()?;
    if mesh.inclusion().is_some() {
        return Err(VemError::Topology("mesh already carries an inclusion".into()));
    }
    let tol = mesh.tolerance();
    let verts = mesh.vertices();

    let mut on_gamma: Vec<usize> = (0..verts.len())
        .filter(|&v| inclusion.distance(verts[v]) <= tol)
        .collect();
    on_gamma.sort_by(|&a, &b| {
        inclusion
            .parameter(verts[a])
            .total_cmp(&inclusion.parameter(verts[b]))
    });
    for tip in inclusion.tips() {
        if !on_gamma.iter().any(|&v| verts[v].distance(tip) <= tol) {
            return Err(VemError::Conformity(format!(
                "tip ({}, {}) is not a mesh vertex",
                tip.x, tip.y
            )));
        }
    }

    let edges: HashSet<(usize, usize)> = mesh
        .half_edges()
        .iter()
        .map(|h| (h.tail.min(h.head), h.tail.max(h.head)))
        .collect();
    for pair in on_gamma.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if verts[a].distance(verts[b]) <= tol {
            return Err(VemError::Conformity(format!(
                "vertices {a} and {b} coincide on the inclusion"
            )));
        }
        if !edges.contains(&(a.min(b), a.max(b))) {
            return Err(VemError::Conformity(format!(
                "inclusion segment between vertices {a} and {b} is not a mesh edge"
            )));
        }
    }

    let normal = inclusion.normal();
    let tangent = inclusion.tangent();
    let interior = &on_gamma[1..on_gamma.len() - 1];
    let mut vertices = verts.to_vec();
    let mut loops = mesh.cell_loops();
    for &v in interior {
        let copy = vertices.len();
        vertices.push(verts[v]);
        for lp in loops.iter_mut() {
            let n = lp.len();
            let Some(i) = lp.iter().position(|&x| x == v) else {
                continue;
            };
            let d = vertices[lp[(i + 1) % n]] - verts[v];
            let dn = d.dot(normal);
            let plus = if dn.abs() > tol {
                dn > 0.0
            } else {
                // Next vertex is along the inclusion: the cell lies to the left.
                d.dot(tangent) > 0.0
            };
            if !plus {
                lp[i] = copy;
            }
        }
    }

    PolyMesh::from_loops(vertices, loops, Some(*inclusion))
}
