//! Linear solvers for the assembled saddle-point system.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::assembly::SaddleSystem;
use crate::error::{Result, VemError};
use crate::sparse::{dot, norm, CsrMatrix};

/// Required relative residual of the full block system.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SolverMode {
    /// Sparse LU of the whole block matrix.
    #[default]
    #[serde(rename = "direct")]
    Direct,
    /// Conjugate gradients on the pressure Schur complement `B A^-1 B^T`,
    /// with a sparse Cholesky factor of `A`.
    #[serde(rename = "schur")]
    Schur,
}

impl SolverMode {
    fn name(self) -> &'static str {
        match self {
            SolverMode::Direct => "direct",
            SolverMode::Schur => "schur",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSolution {
    /// Normal velocity per global edge, along the global edge orientation.
    pub flux: Vec<f64>,
    /// One constant pressure per cell.
    pub pressure: Vec<f64>,
    pub mesh_size_h: f64,
    /// Achieved relative block residual (absolute when the right-hand side vanishes).
    pub residual: f64,
}

pub fn solve(system: &SaddleSystem, mode: SolverMode) -> Result<DiscreteSolution> {
    let (n_u, n_p) = (system.n_u(), system.n_p());
    let rhs_norm = system.rhs_norm();
    if rhs_norm == 0.0 {
        return Ok(DiscreteSolution {
            flux: vec![0.0; n_u],
            pressure: vec![0.0; n_p],
            mesh_size_h: system.mesh_size_h,
            residual: 0.0,
        });
    }
    let (flux, pressure) = match mode {
        SolverMode::Direct => solve_direct(system)?,
        SolverMode::Schur => solve_schur(system)?,
    };
    let residual = norm(&system.residual(&flux, &pressure)) / rhs_norm;
    if !residual.is_finite() {
        return Err(VemError::Solver {
            strategy: mode.name(),
            reason: "non-finite solution (singular or rank-deficient system)".into(),
        });
    }
    if residual > RESIDUAL_TOLERANCE {
        return Err(VemError::NotConverged {
            strategy: mode.name(),
            residual,
        });
    }
    Ok(DiscreteSolution {
        flux,
        pressure,
        mesh_size_h: system.mesh_size_h,
        residual,
    })
}

fn to_faer(m: &CsrMatrix, strategy: &'static str) -> Result<SparseColMat<usize, f64>> {
    let t: Vec<Triplet<usize, usize, f64>> = m.triplets().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
    SparseColMat::try_new_from_triplets(m.nrows(), m.ncols(), &t).map_err(|e| VemError::Solver {
        strategy,
        reason: format!("{e:?}"),
    })
}

fn solve_direct(system: &SaddleSystem) -> Result<(Vec<f64>, Vec<f64>)> {
    const STRATEGY: &str = "direct";
    let (n_u, n) = (system.n_u(), system.dim());
    let mut t: Vec<Triplet<usize, usize, f64>> = system.a.triplets().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
    for (i, j, v) in system.b.triplets() {
        t.push(Triplet::new(n_u + i, j, v));
        t.push(Triplet::new(j, n_u + i, v));
    }
    let k = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &t).map_err(|e| VemError::Solver {
        strategy: STRATEGY,
        reason: format!("{e:?}"),
    })?;
    let lu = k.sp_lu().map_err(|e| VemError::Solver {
        strategy: STRATEGY,
        reason: format!("LU factorization failed: {e:?}"),
    })?;

    let rhs: Vec<f64> = system.rhs_u.iter().chain(&system.rhs_p).copied().collect();
    let mut x = lu_solve(&lu, &rhs);
    // Two rounds of iterative refinement against the assembled blocks.
    for _ in 0..2 {
        let r = system.residual(&x[..n_u], &x[n_u..]);
        if norm(&r) <= 1e-3 * RESIDUAL_TOLERANCE * norm(&rhs) {
            break;
        }
        let dx = lu_solve(&lu, &r);
        for (xi, di) in x.iter_mut().zip(dx) {
            *xi -= di;
        }
    }
    let p = x.split_off(n_u);
    Ok((x, p))
}

fn lu_solve(lu: &faer::sparse::linalg::solvers::Lu<usize, f64>, rhs: &[f64]) -> Vec<f64> {
    let mut b = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    lu.solve_in_place(b.as_mut());
    (0..rhs.len()).map(|i| b[(i, 0)]).collect()
}

fn solve_schur(system: &SaddleSystem) -> Result<(Vec<f64>, Vec<f64>)> {
    const STRATEGY: &str = "schur";
    let (n_u, n_p) = (system.n_u(), system.n_p());
    let a = to_faer(&system.a, STRATEGY)?;
    let llt = a.sp_cholesky(Side::Lower).map_err(|e| VemError::Solver {
        strategy: STRATEGY,
        reason: format!("Cholesky factorization of the velocity block failed: {e:?}"),
    })?;
    let a_solve = |r: &[f64]| -> Vec<f64> {
        let mut b = Mat::<f64>::from_fn(n_u, 1, |i, _| r[i]);
        llt.solve_in_place(b.as_mut());
        (0..n_u).map(|i| b[(i, 0)]).collect()
    };
    let schur = |p: &[f64]| -> Vec<f64> { system.b.mul_vec(&a_solve(&system.b.tr_mul_vec(p))) };

    // Jacobi preconditioner from diag(B diag(A)^-1 B^T).
    let a_diag = system.a.diagonal();
    let precond: Vec<f64> = (0..n_p)
        .map(|i| {
            let d: f64 = system.b.row(i).map(|(j, v)| v * v / a_diag[j]).sum();
            if d > 0.0 {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect();

    let a_inv_f = a_solve(&system.rhs_u);
    let rhs: Vec<f64> = system
        .b
        .mul_vec(&a_inv_f)
        .iter()
        .zip(&system.rhs_p)
        .map(|(x, f)| x - f)
        .collect();
    let rhs_norm = norm(&rhs);
    let mut p = vec![0.0; n_p];
    if rhs_norm > 0.0 {
        let mut r = rhs.clone();
        let mut z: Vec<f64> = r.iter().zip(&precond).map(|(a, b)| a * b).collect();
        let mut d = z.clone();
        let mut rz = dot(&r, &z);
        let max_iter = 10 * n_p + 100;
        let mut converged = false;
        for _ in 0..max_iter {
            let sd = schur(&d);
            let alpha = rz / dot(&d, &sd);
            for i in 0..n_p {
                p[i] += alpha * d[i];
                r[i] -= alpha * sd[i];
            }
            if norm(&r) <= 1e-13 * rhs_norm {
                converged = true;
                break;
            }
            z = r.iter().zip(&precond).map(|(a, b)| a * b).collect();
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n_p {
                d[i] = z[i] + beta * d[i];
            }
        }
        if !converged {
            return Err(VemError::NotConverged {
                strategy: STRATEGY,
                residual: norm(&r) / rhs_norm,
            });
        }
    }
    let btp = system.b.tr_mul_vec(&p);
    let f: Vec<f64> = system.rhs_u.iter().zip(&btp).map(|(a, b)| a - b).collect();
    Ok((a_solve(&f), p))
}
