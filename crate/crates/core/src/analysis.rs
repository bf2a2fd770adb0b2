//! Pressure error against a fine reference solution and convergence rates.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VemError};
use crate::geometry::Point2;
use crate::mesh::{InclusionSide, PolyMesh};

/// Offset applied to sample points of cells that touch the inclusion.
pub const SIDE_NUDGE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub mesh: PolyMesh,
    pub pressure: Vec<f64>,
    pub range: (f64, f64),
}

impl ReferenceSolution {
    pub fn new(mesh: PolyMesh, pressure: Vec<f64>) -> Result<Self> {
        if pressure.len() != mesh.num_cells() {
            return Err(VemError::Config(format!(
                "reference has {} pressures for {} cells",
                pressure.len(),
                mesh.num_cells()
            )));
        }
        let range = pressure_range(&pressure)?;
        Ok(Self { mesh, pressure, range })
    }
}

fn pressure_range(p: &[f64]) -> Result<(f64, f64)> {
    let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) || !(hi - lo).is_finite() {
        return Err(VemError::ZeroRange);
    }
    Ok((lo, hi))
}

/// Interior sample point of a cell.
///
/// The centroid, pushed off the inclusion along the normal of the side the
/// cell lies on. Cut cells carry both sides, so they keep the centroid; if it
/// falls outside the loop, a point just inside the longest non-slit edge is
/// used instead.
pub fn sample_point(mesh: &PolyMesh, cell: usize) -> Point2 {
    let c = &mesh.cells()[cell];
    let mut p = c.centroid;
    if let Some(inc) = mesh.inclusion() {
        let sides: Vec<InclusionSide> = c
            .half_edges
            .iter()
            .map(|&h| mesh.half_edges()[h].side)
            .filter(|s| *s != InclusionSide::None)
            .collect();
        let plus = sides.iter().all(|s| *s == InclusionSide::Plus);
        let minus = sides.iter().all(|s| *s == InclusionSide::Minus);
        if !sides.is_empty() && (plus || minus) {
            let sign = if plus { 1.0 } else { -1.0 };
            p = p + inc.normal() * (sign * SIDE_NUDGE);
        }
    }
    let pts = mesh.cell_points(cell);
    if crate::geometry::winding_number(&pts, p) != 0 {
        return p;
    }
    // Inward offset from the midpoint of the longest edge.
    let n = pts.len();
    let (a, b) = (0..n)
        .map(|i| (pts[i], pts[(i + 1) % n]))
        .max_by(|x, y| x.0.distance(x.1).total_cmp(&y.0.distance(y.1)))
        .expect("cells have edges");
    let len = a.distance(b);
    a.midpoint(b) + (b - a).rotate_ccw() * (1e-6 * c.diameter / len)
}

/// Piecewise-constant transfer from a coarse mesh to a reference mesh by
/// sampling each reference cell at its interior sample point.
pub fn transfer_to_reference(coarse: &PolyMesh, coarse_pressure: &[f64], reference: &PolyMesh) -> Result<Vec<f64>> {
    if coarse_pressure.len() != coarse.num_cells() {
        return Err(VemError::Config(format!(
            "{} pressures for {} coarse cells",
            coarse_pressure.len(),
            coarse.num_cells()
        )));
    }
    let locator = coarse.locator();
    (0..reference.num_cells())
        .into_par_iter()
        .map(|c| {
            let p = sample_point(reference, c);
            locator
                .locate(p)
                .map(|k| coarse_pressure[k])
                .map_err(|e| VemError::Transfer {
                    cell: c,
                    reason: e.to_string(),
                })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorField {
    pub err: f64,
    /// `|p_T - p_ref|` per reference cell.
    pub cell_error: Vec<f64>,
}

/// `sqrt(sum |E| (p_T - p_ref)^2) / |max p_ref - min p_ref|`, summed in
/// cell order.
pub fn relative_l2_error(p_transferred: &[f64], p_ref: &[f64], reference: &PolyMesh) -> Result<ErrorField> {
    let n = reference.num_cells();
    if p_transferred.len() != n || p_ref.len() != n {
        return Err(VemError::Config(format!(
            "fields of length {} and {} on a mesh of {n} cells",
            p_transferred.len(),
            p_ref.len()
        )));
    }
    let (lo, hi) = pressure_range(p_ref)?;
    let cell_error: Vec<f64> = p_transferred.iter().zip(p_ref).map(|(a, b)| (a - b).abs()).collect();
    let sq: f64 = reference
        .cells()
        .iter()
        .zip(&cell_error)
        .map(|(c, e)| c.measure * e * e)
        .sum();
    Ok(ErrorField {
        err: sq.sqrt() / (hi - lo),
        cell_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub h: f64,
    pub err: f64,
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub records: Vec<ConvergenceRecord>,
}

/// Builds the table from `(h, err)` pairs ordered from coarse to fine.
///
/// A single pair is accepted and yields a row without rate.
pub fn convergence_table(pairs: &[(f64, f64)]) -> Result<ConvergenceTable> {
    if pairs.is_empty() {
        return Err(VemError::Ordering("no records".into()));
    }
    for (i, &(h, err)) in pairs.iter().enumerate() {
        if !(h > 0.0 && h.is_finite()) || !(err >= 0.0 && err.is_finite()) {
            return Err(VemError::Ordering(format!("record {i} has h = {h}, err = {err}")));
        }
    }
    for (i, w) in pairs.windows(2).enumerate() {
        if w[1].0 >= w[0].0 {
            return Err(VemError::Ordering(format!(
                "h must strictly decrease: row {} has {} after {}",
                i + 1,
                w[1].0,
                w[0].0
            )));
        }
    }
    let records = pairs
        .iter()
        .enumerate()
        .map(|(i, &(h, err))| ConvergenceRecord {
            h,
            err,
            rate: (i > 0).then(|| observed_rate(pairs[i - 1], (h, err))),
        })
        .collect();
    Ok(ConvergenceTable { records })
}

/// `log(e0/e1) / log(h0/h1)`.
pub fn observed_rate((h0, e0): (f64, f64), (h1, e1): (f64, f64)) -> f64 {
    (e0 / e1).ln() / (h0 / h1).ln()
}

impl ConvergenceTable {
    pub fn rates(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.rate).collect()
    }

    pub fn mean_rate(&self) -> Option<f64> {
        let r = self.rates();
        (!r.is_empty()).then(|| r.iter().sum::<f64>() / r.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("h,err,rate\n");
        for r in &self.records {
            let rate = r.rate.map(|v| format!("{v:.6e}")).unwrap_or_default();
            writeln!(s, "{:.6e},{:.6e},{}", r.h, r.err, rate).unwrap();
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{:>12}  {:>12}  {:>6}\n", "h", "err(p)", "O(h)");
        for r in &self.records {
            let rate = r.rate.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
            writeln!(s, "{:>12.3e}  {:>12.3e}  {:>6}", r.h, r.err, rate).unwrap();
        }
        s
    }
}
