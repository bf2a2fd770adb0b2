//! Local matrices of the lowest-order mixed virtual element method.
//!
//! Degrees of freedom of a cell are the constant outward normal velocities on
//! the edges of its loop, in loop order. Every local quantity is computed from
//! edge lengths, normals, and midpoints only:
//!
//! * `pi0`: projection onto constant vector fields (gradients of linears),
//!   `pi0[:, e] = |e| (m_e - x_E) / |E|`, from
//!   `int_E v = -int_E (x - x_E) div v + int_dE (x - x_E) v.n`.
//! * `a_cons = |E| pi0^T K^-1 pi0`, the consistency part of the mass form.
//! * `a_stab = alpha (I - P)` with `P` the orthogonal projector onto the dofs
//!   of constant fields, vanishing on them.
//! * `b_div[e] = -|e|`, the exact divergence pairing with a constant.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix2xX, RowDVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VemError};
use crate::geometry::{loop_geometry, Point2};
use crate::mesh::{InclusionSide, PolyMesh};
use crate::problem::{CellPermeability, DarcyProblem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeGeometry {
    pub length: f64,
    /// Outward unit normal.
    pub normal: Point2,
    pub midpoint: Point2,
}

/// Geometry a local kernel needs: one entry per loop edge plus cell moments.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalCell {
    pub edges: Vec<EdgeGeometry>,
    pub measure: f64,
    pub centroid: Point2,
    pub diameter: f64,
}

impl LocalCell {
    /// Builds the local geometry of a closed loop, reorienting it
    /// counter-clockwise if needed.
    pub fn from_points(pts: &[Point2]) -> Result<Self> {
        let g = loop_geometry(pts)?;
        let mut pts = pts.to_vec();
        if g.orientation < 0.0 {
            pts.reverse();
        }
        Ok(LocalCell {
            edges: dof_geometry(&pts)?,
            measure: g.measure,
            centroid: g.centroid,
            diameter: g.diameter,
        })
    }

    pub fn from_mesh(mesh: &PolyMesh, cell: usize) -> Result<Self> {
        let c = &mesh.cells()[cell];
        let edges = dof_geometry(&mesh.cell_points(cell)).map_err(|e| VemError::DegenerateCell {
            cell,
            reason: e.to_string(),
        })?;
        Ok(LocalCell {
            edges,
            measure: c.measure,
            centroid: c.centroid,
            diameter: c.diameter,
        })
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Dofs of the constant field `c`: `n_e . c` per edge.
    pub fn constant_field_dofs(&self, c: Point2) -> DVector<f64> {
        DVector::from_iterator(self.edges.len(), self.edges.iter().map(|e| e.normal.dot(c)))
    }
}

/// Length, outward unit normal, and midpoint of each edge of a
/// counter-clockwise loop. The two traversals of a slit get opposite normals.
pub fn dof_geometry(pts: &[Point2]) -> Result<Vec<EdgeGeometry>> {
    let n = pts.len();
    (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            let t = b - a;
            let length = t.norm();
            if !(length > 0.0) {
                return Err(VemError::DegenerateGeometry(format!(
                    "zero-length edge at ({}, {})",
                    a.x, a.y
                )));
            }
            Ok(EdgeGeometry {
                length,
                normal: t.rotate_cw() * (1.0 / length),
                midpoint: a.midpoint(b),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum StabilizationMode {
    /// `alpha = trace(a_cons) / 2`.
    #[default]
    #[serde(rename = "trace")]
    TraceScaled,
    /// `alpha = |E| trace(K^-1) / 2`.
    #[serde(rename = "measure")]
    MeasureScaled,
}

/// Stabilization choice plus the measured equivalence constants between the
/// stabilization and the consistency part (filled in by sweeps, never assumed).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StabilizationParams {
    pub mode: StabilizationMode,
    pub iota_star_est: Option<f64>,
    pub iota_sup_est: Option<f64>,
}

impl StabilizationParams {
    pub fn new(mode: StabilizationMode) -> Self {
        Self {
            mode,
            ..Default::default()
        }
    }

    /// Widens the recorded constants to cover one more cell.
    pub fn record(&mut self, (lo, hi): (f64, f64)) {
        self.iota_star_est = Some(self.iota_star_est.map_or(lo, |v| v.min(lo)));
        self.iota_sup_est = Some(self.iota_sup_est.map_or(hi, |v| v.max(hi)));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalVem {
    pub n_edges: usize,
    pub a_cons: DMatrix<f64>,
    pub a_stab: DMatrix<f64>,
    pub a_h: DMatrix<f64>,
    pub b_div: RowDVector<f64>,
    pub pi0: Matrix2xX<f64>,
}

pub fn projection_matrix(cell: &LocalCell) -> Result<Matrix2xX<f64>> {
    if !(cell.measure > 0.0) {
        return Err(VemError::DegenerateGeometry("cell has non-positive measure".into()));
    }
    let inv = 1.0 / cell.measure;
    Ok(Matrix2xX::from_iterator(
        cell.n_edges(),
        cell.edges.iter().flat_map(|e| {
            let d = e.midpoint - cell.centroid;
            [e.length * d.x * inv, e.length * d.y * inv]
        }),
    ))
}

pub fn consistency_matrix(cell: &LocalCell, k: &CellPermeability, pi0: &Matrix2xX<f64>) -> DMatrix<f64> {
    let a = pi0.transpose() * k.inverse() * pi0 * cell.measure;
    symmetrize(a)
}

/// `alpha (I - D (D^T D)^-1 D^T)` where the columns of `D` are the dofs of
/// the scaled monomial gradients `grad((x - x_E) / h_E)`, `grad((y - y_E) / h_E)`.
pub fn stabilization_matrix(
    cell: &LocalCell,
    k: &CellPermeability,
    a_cons: &DMatrix<f64>,
    mode: StabilizationMode,
) -> Result<DMatrix<f64>> {
    let n = cell.n_edges();
    let h = cell.diameter;
    let d = DMatrix::from_fn(n, 2, |e, j| {
        let nrm = cell.edges[e].normal;
        (if j == 0 { nrm.x } else { nrm.y }) / h
    });
    let dtd: Matrix2<f64> = {
        let m = d.transpose() * &d;
        Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
    };
    let det = dtd.determinant();
    let scale = dtd.trace();
    if !(det > 1e-12 * scale * scale) {
        return Err(VemError::DegenerateGeometry(
            "edge normals do not span the plane".into(),
        ));
    }
    let inv = dtd.try_inverse().expect("checked determinant");
    let inv = DMatrix::from_column_slice(2, 2, inv.as_slice());
    let p = &d * inv * d.transpose();
    let alpha = match mode {
        StabilizationMode::TraceScaled => a_cons.trace() / 2.0,
        StabilizationMode::MeasureScaled => cell.measure * k.inverse().trace() / 2.0,
    };
    Ok(symmetrize((DMatrix::identity(n, n) - p) * alpha))
}

pub fn divergence_row(cell: &LocalCell) -> RowDVector<f64> {
    RowDVector::from_iterator(cell.n_edges(), cell.edges.iter().map(|e| -e.length))
}

pub fn local_vem(cell: &LocalCell, k: &CellPermeability, mode: StabilizationMode) -> Result<LocalVem> {
    let pi0 = projection_matrix(cell)?;
    let a_cons = consistency_matrix(cell, k, &pi0);
    let a_stab = stabilization_matrix(cell, k, &a_cons, mode)?;
    let a_h = &a_cons + &a_stab;
    Ok(LocalVem {
        n_edges: cell.n_edges(),
        a_cons,
        a_stab,
        a_h,
        b_div: divergence_row(cell),
        pi0,
    })
}

/// Measured spectral equivalence between stabilization and consistency:
/// `(min nonzero eig(a_stab) / max eig(a_cons), max eig(a_stab) / min nonzero eig(a_cons))`.
pub fn equivalence_constants(local: &LocalVem) -> (f64, f64) {
    let nonzero = |m: &DMatrix<f64>| -> (f64, f64) {
        let eig = SymmetricEigen::new(m.clone()).eigenvalues;
        let top = eig.iter().copied().fold(0.0, f64::max);
        eig.iter()
            .copied()
            .filter(|&l| l > 1e-10 * top)
            .fold((f64::INFINITY, 0.0), |(lo, hi), l| (lo.min(l), hi.max(l)))
    };
    let (cons_lo, cons_hi) = nonzero(&local.a_cons);
    let (stab_lo, stab_hi) = nonzero(&local.a_stab);
    (stab_lo / cons_hi, stab_hi / cons_lo)
}

/// Right-hand side contributions of one mesh cell.
///
/// Velocity entries carry the natural pressure data: `-|e| p(m_e)` with `p`
/// the plus or minus inclusion pressure or the outer boundary pressure, zero
/// on interior edges. The pressure entry is `-|E| f(x_E)`.
pub fn rhs_contributions(mesh: &PolyMesh, cell: usize, problem: &DarcyProblem) -> Result<(DVector<f64>, f64)> {
    let c = &mesh.cells()[cell];
    let tol = mesh.tolerance();
    let mut rhs = DVector::zeros(c.half_edges.len());
    for (i, &h) in c.half_edges.iter().enumerate() {
        let he = &mesh.half_edges()[h];
        let (a, b) = mesh.half_edge_points(h);
        let (len, mid) = (a.distance(b), a.midpoint(b));
        let trace = match he.side {
            InclusionSide::None => {
                if let Some(inc) = mesh.inclusion() {
                    if he.twin.is_none() && inc.distance(a) <= tol && inc.distance(b) <= tol {
                        return Err(VemError::Topology(format!(
                            "half-edge {h} lies on the inclusion but has no side"
                        )));
                    }
                }
                if he.on_boundary {
                    Some(problem.boundary_pressure)
                } else {
                    None
                }
            }
            side => Some(
                *mesh
                    .inclusion()
                    .and_then(|inc| inc.side_pressure(side))
                    .ok_or_else(|| VemError::Topology(format!("half-edge {h} has a side but mesh has no inclusion")))?,
            ),
        };
        if let Some(p) = trace {
            rhs[i] = -len * p.eval(mid);
        }
    }
    Ok((rhs, -c.measure * problem.source.eval(c.centroid)))
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}
