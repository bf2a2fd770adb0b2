//! Problem data: permeability, source, and pressure traces.

use nalgebra::{Matrix2, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VemError};
use crate::geometry::Point2;

/// Affine scalar field `c0 + cx x + cy y`.
///
/// Used for pressure traces and sources. Edge integrals of an affine trace are
/// exact with midpoint sampling, which the lowest-order scheme relies on.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "AffineRepr", into = "AffineRepr")]
pub struct Affine {
    pub c0: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Affine {
    pub const ZERO: Affine = Affine::constant(0.0);

    pub const fn constant(c: f64) -> Self {
        Affine {
            c0: c,
            cx: 0.0,
            cy: 0.0,
        }
    }

    pub const fn new(c0: f64, cx: f64, cy: f64) -> Self {
        Affine { c0, cx, cy }
    }

    pub fn eval(&self, p: Point2) -> f64 {
        self.c0 + self.cx * p.x + self.cy * p.y
    }

    pub fn is_constant(&self) -> bool {
        self.cx == 0.0 && self.cy == 0.0
    }

    pub fn scaled(&self, s: f64) -> Affine {
        Affine::new(self.c0 * s, self.cx * s, self.cy * s)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum AffineRepr {
    Constant(f64),
    Coefficients([f64; 3]),
}

impl From<AffineRepr> for Affine {
    fn from(r: AffineRepr) -> Self {
        match r {
            AffineRepr::Constant(c) => Affine::constant(c),
            AffineRepr::Coefficients([c0, cx, cy]) => Affine::new(c0, cx, cy),
        }
    }
}

impl From<Affine> for AffineRepr {
    fn from(a: Affine) -> Self {
        if a.is_constant() {
            AffineRepr::Constant(a.c0)
        } else {
            AffineRepr::Coefficients([a.c0, a.cx, a.cy])
        }
    }
}

/// Constant symmetric positive-definite permeability tensor of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellPermeability {
    tensor: Matrix2<f64>,
    inverse: Matrix2<f64>,
}

impl CellPermeability {
    pub fn isotropic(k: f64) -> Result<Self> {
        Self::new(Matrix2::new(k, 0.0, 0.0, k))
    }

    pub fn new(tensor: Matrix2<f64>) -> Result<Self> {
        if tensor.iter().any(|v| !v.is_finite()) {
            return Err(VemError::Config("permeability has non-finite entries".into()));
        }
        let scale = tensor.abs().max().max(f64::MIN_POSITIVE);
        if (tensor[(0, 1)] - tensor[(1, 0)]).abs() > 1e-14 * scale {
            return Err(VemError::Config(format!(
                "permeability is not symmetric: {} vs {}",
                tensor[(0, 1)],
                tensor[(1, 0)]
            )));
        }
        let eig = SymmetricEigen::new(tensor);
        if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
            return Err(VemError::Config(format!(
                "permeability is not positive definite (eigenvalues {}, {})",
                eig.eigenvalues[0], eig.eigenvalues[1]
            )));
        }
        let inverse = tensor
            .try_inverse()
            .ok_or_else(|| VemError::Config("permeability is singular".into()))?;
        Ok(Self { tensor, inverse })
    }

    pub fn tensor(&self) -> &Matrix2<f64> {
        &self.tensor
    }

    pub fn inverse(&self) -> &Matrix2<f64> {
        &self.inverse
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.tensor * s)
    }
}

/// Scalar or full-tensor permeability as written in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PermeabilitySpec {
    Scalar(f64),
    Tensor([[f64; 2]; 2]),
}

impl Default for PermeabilitySpec {
    fn default() -> Self {
        PermeabilitySpec::Scalar(1.0)
    }
}

impl PermeabilitySpec {
    pub fn to_cell(&self) -> Result<CellPermeability> {
        match *self {
            PermeabilitySpec::Scalar(k) => CellPermeability::isotropic(k),
            PermeabilitySpec::Tensor(t) => {
                CellPermeability::new(Matrix2::new(t[0][0], t[0][1], t[1][0], t[1][1]))
            }
        }
    }
}

/// Data of the mixed Darcy problem on a mesh: uniform permeability, a source
/// sampled at cell centroids, and the pressure prescribed on the outer
/// boundary. Inclusion side pressures live on the [`crate::mesh::Inclusion`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DarcyProblem {
    pub permeability: CellPermeability,
    pub source: Affine,
    pub boundary_pressure: Affine,
}

impl DarcyProblem {
    pub fn new(permeability: CellPermeability, source: Affine, boundary_pressure: Affine) -> Self {
        Self {
            permeability,
            source,
            boundary_pressure,
        }
    }

    /// K = I, f = 0, p = 0 on the outer boundary.
    pub fn homogeneous() -> Self {
        Self::new(
            CellPermeability::isotropic(1.0).expect("identity is SPD"),
            Affine::ZERO,
            Affine::ZERO,
        )
    }
}
