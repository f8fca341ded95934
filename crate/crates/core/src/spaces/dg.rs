//! Discontinuous piecewise polynomial space `V_r`.

use std::ops::Range;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::SimplicialMesh;
use crate::poly::OrthonormalBasis;
use crate::quadrature::QuadratureRule;
use crate::Point;

/// Piecewise `P_r` functions without inter-cell coupling.
///
/// The local basis is orthonormal on the reference cell for the normalized
/// inner product, so the cell mass matrix is `|K| I` and the first basis
/// function is the constant 1.
#[derive(Debug, Clone)]
pub struct DgSpace {
    mesh: Arc<SimplicialMesh>,
    degree: usize,
    basis: OrthonormalBasis,
}

impl DgSpace {
    pub fn new(mesh: Arc<SimplicialMesh>, r: usize) -> Result<Self> {
        if r > 4 {
            return Err(Error::InvalidArgument(format!(
                "discontinuous degree {r} exceeds the supported maximum 4"
            )));
        }
        let basis = OrthonormalBasis::new(mesh.dim(), r);
        Ok(Self {
            mesh,
            degree: r,
            basis,
        })
    }

    pub fn mesh(&self) -> &Arc<SimplicialMesh> {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn local_dim(&self) -> usize {
        self.basis.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.mesh.n_cells() * self.basis.len()
    }

    pub fn cell_dofs(&self, c: usize) -> Range<usize> {
        let n = self.basis.len();
        c * n..(c + 1) * n
    }

    pub fn basis(&self) -> &OrthonormalBasis {
        &self.basis
    }

    pub fn eval(&self, x: &Point, out: &mut [f64]) {
        self.basis.eval(x, out);
    }

    /// Reference-coordinate gradients; map with `CellGeometry::grad`.
    pub fn eval_grad(&self, x: &Point, out: &mut [Point]) {
        self.basis.eval_grad(x, out);
    }

    pub fn tabulate(&self, rule: &QuadratureRule) -> DgTabulation {
        let n = self.local_dim();
        let mut values = vec![0.0; rule.len() * n];
        let mut grads = vec![Point::zeros(); rule.len() * n];
        for (q, x) in rule.points.iter().enumerate() {
            self.eval(x, &mut values[q * n..(q + 1) * n]);
            self.eval_grad(x, &mut grads[q * n..(q + 1) * n]);
        }
        DgTabulation {
            n_basis: n,
            values,
            grads,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DgTabulation {
    n_basis: usize,
    values: Vec<f64>,
    grads: Vec<Point>,
}

impl DgTabulation {
    pub fn values(&self, q: usize) -> &[f64] {
        &self.values[q * self.n_basis..(q + 1) * self.n_basis]
    }

    pub fn grads(&self, q: usize) -> &[Point] {
        &self.grads[q * self.n_basis..(q + 1) * self.n_basis]
    }
}
