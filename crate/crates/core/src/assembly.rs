//! Global numbering and assembly of the mixed saddle-point system
//!
//! ```text
//! [ A  B^T ] [u]   [rhs_u]
//! [ B  0   ] [p] = [rhs_p]
//! ```
//!
//! with one velocity unknown per geometric edge (one per side on the
//! inclusion) and one pressure unknown per cell. Pressure data on the outer
//! boundary and on both inclusion sides enters only through `rhs_u`.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Result, VemError};
use crate::geometry::Point2;
use crate::mesh::{InclusionSide, PolyMesh};
use crate::problem::DarcyProblem;
use crate::sparse::CsrMatrix;
use crate::vem::{equivalence_constants, local_vem, rhs_contributions, LocalCell, StabilizationMode, StabilizationParams};

/// Global unknown numbering.
///
/// Each geometric edge is oriented from its lower to its higher vertex id;
/// `orientation_sign[h]` is `+1` when half-edge `h` (hence its cell's outward
/// normal) agrees with that orientation and `-1` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub edge_dof: Vec<usize>,
    pub cell_dof: Vec<usize>,
    pub orientation_sign: Vec<f64>,
    /// One representative half-edge per geometric edge.
    pub edge_half_edge: Vec<usize>,
}

impl DofMap {
    pub fn n_u(&self) -> usize {
        self.edge_dof.len()
    }

    pub fn n_p(&self) -> usize {
        self.cell_dof.len()
    }

    pub fn dim(&self) -> usize {
        self.n_u() + self.n_p()
    }

    /// Unit normal of the global edge orientation.
    pub fn edge_normal(&self, mesh: &PolyMesh, edge: usize) -> Point2 {
        let h = self.edge_half_edge[edge];
        let (a, b) = mesh.half_edge_points(h);
        let t = (b - a) * self.orientation_sign[h];
        t.rotate_cw() * (1.0 / t.norm())
    }

    pub fn edge_midpoint(&self, mesh: &PolyMesh, edge: usize) -> Point2 {
        let (a, b) = mesh.half_edge_points(self.edge_half_edge[edge]);
        a.midpoint(b)
    }
}

pub fn build_dof_map(mesh: &PolyMesh) -> Result<DofMap> {
    check_inclusion_flags(mesh)?;
    let mut edge_half_edge = vec![usize::MAX; mesh.edge_count()];
    let orientation_sign = mesh
        .half_edges()
        .iter()
        .enumerate()
        .map(|(h, he)| {
            if edge_half_edge[he.edge] == usize::MAX {
                edge_half_edge[he.edge] = h;
            }
            if he.tail < he.head {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    Ok(DofMap {
        edge_dof: (0..mesh.edge_count()).collect(),
        cell_dof: (0..mesh.num_cells()).collect(),
        orientation_sign,
        edge_half_edge,
    })
}

/// Every twinless edge lying on the inclusion must carry a side.
fn check_inclusion_flags(mesh: &PolyMesh) -> Result<()> {
    let Some(inc) = mesh.inclusion() else {
        return Ok(());
    };
    let tol = mesh.tolerance();
    for (h, he) in mesh.half_edges().iter().enumerate() {
        let (a, b) = mesh.half_edge_points(h);
        if he.twin.is_none()
            && he.side == InclusionSide::None
            && inc.distance(a) <= tol
            && inc.distance(b) <= tol
        {
            return Err(VemError::Topology(format!(
                "half-edge {h} lies on the inclusion but has no side"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleSystem {
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    pub rhs_u: Vec<f64>,
    pub rhs_p: Vec<f64>,
    pub mesh_size_h: f64,
}

impl SaddleSystem {
    pub fn n_u(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_p(&self) -> usize {
        self.b.nrows()
    }

    pub fn dim(&self) -> usize {
        self.n_u() + self.n_p()
    }

    /// Block residual `[A u + B^T p - rhs_u; B u - rhs_p]`.
    pub fn residual(&self, u: &[f64], p: &[f64]) -> Vec<f64> {
        let au = self.a.mul_vec(u);
        let btp = self.b.tr_mul_vec(p);
        let bu = self.b.mul_vec(u);
        au.iter()
            .zip(&btp)
            .zip(&self.rhs_u)
            .map(|((x, y), r)| x + y - r)
            .chain(bu.iter().zip(&self.rhs_p).map(|(x, r)| x - r))
            .collect()
    }

    pub fn rhs_norm(&self) -> f64 {
        self.rhs_u
            .iter()
            .chain(&self.rhs_p)
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Full block matrix in MatrixMarket coordinate format.
    pub fn write_matrix_market<W: Write>(&self, out: W) -> std::io::Result<()> {
        let n_u = self.n_u();
        let mut t: Vec<(usize, usize, f64)> = self.a.triplets().collect();
        for (i, j, v) in self.b.triplets() {
            t.push((n_u + i, j, v));
            t.push((j, n_u + i, v));
        }
        CsrMatrix::from_triplets(self.dim(), self.dim(), t).write_matrix_market(out)
    }
}

/// Assembles the global system; local kernels run in parallel and are
/// scattered in cell order, so the result is independent of thread count.
pub fn assemble(
    mesh: &PolyMesh,
    dofs: &DofMap,
    problem: &DarcyProblem,
    mode: StabilizationMode,
) -> Result<SaddleSystem> {
    let locals: Vec<_> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let cell = LocalCell::from_mesh(mesh, c)?;
            let local = local_vem(&cell, &problem.permeability, mode).map_err(|e| match e {
                VemError::DegenerateGeometry(reason) => VemError::DegenerateCell { cell: c, reason },
                other => other,
            })?;
            let rhs = rhs_contributions(mesh, c, problem)?;
            Ok((local, rhs))
        })
        .collect::<Result<_>>()?;

    let (n_u, n_p) = (dofs.n_u(), dofs.n_p());
    let nnz: usize = locals.iter().map(|(l, _)| l.n_edges * l.n_edges).sum();
    let mut a_trip = Vec::with_capacity(nnz);
    let mut b_trip = Vec::with_capacity(mesh.half_edges().len());
    let mut rhs_u = vec![0.0; n_u];
    let mut rhs_p = vec![0.0; n_p];
    for (c, (local, (ru, rp))) in locals.iter().enumerate() {
        let hes = &mesh.cells()[c].half_edges;
        let global: Vec<(usize, f64)> = hes
            .iter()
            .map(|&h| (dofs.edge_dof[mesh.half_edges()[h].edge], dofs.orientation_sign[h]))
            .collect();
        let row = dofs.cell_dof[c];
        for (i, &(gi, si)) in global.iter().enumerate() {
            for (j, &(gj, sj)) in global.iter().enumerate() {
                a_trip.push((gi, gj, si * sj * local.a_h[(i, j)]));
            }
            b_trip.push((row, gi, si * local.b_div[i]));
            rhs_u[gi] += si * ru[i];
        }
        rhs_p[row] += rp;
    }

    Ok(SaddleSystem {
        a: CsrMatrix::from_triplets(n_u, n_u, a_trip),
        b: CsrMatrix::from_triplets(n_p, n_u, b_trip),
        rhs_u,
        rhs_p,
        mesh_size_h: mesh.mesh_size(),
    })
}

/// Spectral equivalence constants of the stabilization, swept over all cells.
pub fn measure_equivalence(mesh: &PolyMesh, problem: &DarcyProblem, mode: StabilizationMode) -> Result<StabilizationParams> {
    let mut params = StabilizationParams::new(mode);
    for c in 0..mesh.num_cells() {
        let cell = LocalCell::from_mesh(mesh, c)?;
        params.record(equivalence_constants(&local_vem(&cell, &problem.permeability, mode)?));
    }
    Ok(params)
}

/// Per-cell flux balance `sum_e s_e |e| u_e - int_E f`.
pub fn conservation_residuals(mesh: &PolyMesh, dofs: &DofMap, flux: &[f64], problem: &DarcyProblem) -> Vec<f64> {
    mesh.cells()
        .iter()
        .map(|cell| {
            let out: f64 = cell
                .half_edges
                .iter()
                .map(|&h| {
                    let (a, b) = mesh.half_edge_points(h);
                    dofs.orientation_sign[h] * a.distance(b) * flux[dofs.edge_dof[mesh.half_edges()[h].edge]]
                })
                .sum();
            out - cell.measure * problem.source.eval(cell.centroid)
        })
        .collect()
}
