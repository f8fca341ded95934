//! Mixed elliptic projection of an exact pair `(grad u, u)`.
//!
//! The projected pair `(sigma_P, u_P)` satisfies
//!
//! ```text
//! (sigma_P, chi) + (u_P, div chi) = 0          for all chi in RT_r
//! (div sigma_P, v)                = (Δu, v)    for all v in V_r
//! ```
//!
//! which is one stationary saddle solve. It supplies the initial data of the
//! time stepper.
//!
//! The stationary matrix `K = [[M, B], [-B^T, 0]]` has a zero block, so it is
//! not quasi-definite. Instead of a pivoted LU of `K` (whose fill is large in
//! 3D), the shifted matrix `P = [[M, B], [-B^T, D]]` is factored in symmetric
//! quasi-definite form and `K x = b` is solved by iterative refinement with
//! `P` as the preconditioner. The error contracts by
//! `1 / (1 + lambda_min(D^-1 B^T M^-1 B))` per sweep, roughly `1/20` on the
//! unit square, so a handful of sweeps reach round-off.

use crate::assembly::{assemble_saddle, LoadAssembler, SaddleSystem};
use crate::error::{Error, Result};
use crate::problems::ExactSolution;
use crate::solver::{BlockForm, Factorization, RESIDUAL_TOLERANCE};
use crate::sparse::SparseMatrix;
use crate::spaces::{DgField, DgSpace, RtField, RtSpace};

/// Refinement stops once the relative residual of `K x = b` drops below this.
const REFINEMENT_TARGET: f64 = 1e-15;
const MAX_SWEEPS: usize = 200;

/// A factored stationary operator for repeated projections on one pair of
/// spaces.
pub struct EllipticProjector<'s> {
    rt: &'s RtSpace,
    dg: &'s DgSpace,
    stationary: SparseMatrix,
    shifted: Factorization,
}

impl<'s> EllipticProjector<'s> {
    pub fn new(rt: &'s RtSpace, dg: &'s DgSpace) -> Result<Self> {
        let system = assemble_saddle(rt, dg, 1.0)?;
        Self::from_system(rt, dg, &system)
    }

    /// Reuse blocks that were already assembled for these spaces.
    pub fn from_system(rt: &'s RtSpace, dg: &'s DgSpace, system: &SaddleSystem) -> Result<Self> {
        let shifted = SaddleSystem {
            tau: 1.0,
            ..system.clone()
        };
        Ok(Self {
            rt,
            dg,
            stationary: system.stationary_matrix(),
            shifted: Factorization::new(shifted.symmetric_step_matrix(), rt.n_dofs(), BlockForm::NegatedFirstBlock)?,
        })
    }

    /// Solve `K [sigma; u] = [rhs_sigma; rhs_u]` by refinement.
    pub fn solve(&self, rhs_sigma: &[f64], rhs_u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n_rt = self.rt.n_dofs();
        let b: Vec<f64> = rhs_sigma.iter().chain(rhs_u).copied().collect();
        let norm = |v: &[f64]| v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        let k_norm = self.stationary.norm_inf();
        let b_norm = norm(&b);
        let mut x = vec![0.0; b.len()];
        let mut residual = b.clone();
        let mut relative = f64::INFINITY;
        for _ in 0..MAX_SWEEPS {
            let (ds, du) = self.shifted.solve(&residual[..n_rt], &residual[n_rt..])?;
            for (xi, d) in x.iter_mut().zip(ds.iter().chain(&du)) {
                *xi += d;
            }
            let kx = self.stationary.mul_vec(&x);
            for ((r, bi), ki) in residual.iter_mut().zip(&b).zip(&kx) {
                *r = bi - ki;
            }
            let den = k_norm * norm(&x) + b_norm;
            relative = if den == 0.0 { 0.0 } else { norm(&residual) / den };
            if relative < REFINEMENT_TARGET {
                break;
            }
        }
        if !(relative < RESIDUAL_TOLERANCE) {
            return Err(Error::Residual {
                residual: relative,
                tolerance: RESIDUAL_TOLERANCE,
            });
        }
        let u = x.split_off(n_rt);
        Ok((x, u))
    }

    /// Coefficients `(sigma_P, u_P)` of the projection at time `t`.
    pub fn project_coeffs(&self, exact: &dyn ExactSolution, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let loads = LoadAssembler::new(self.rt, self.dg)?;
        let rhs_u: Vec<f64> = loads
            .source(|x, t| exact.laplace_u(x, t), t)
            .into_iter()
            .map(|l| -l)
            .collect();
        self.solve(&vec![0.0; self.rt.n_dofs()], &rhs_u)
    }

    pub fn project(&self, exact: &dyn ExactSolution, t: f64) -> Result<(RtField<'s>, DgField<'s>)> {
        let (sigma, u) = self.project_coeffs(exact, t)?;
        Ok((
            RtField::new(self.rt, sigma)?.at_time(t),
            DgField::new(self.dg, u)?.at_time(t),
        ))
    }
}

/// One-off projection at time `t`.
pub fn elliptic_project<'s>(
    rt: &'s RtSpace,
    dg: &'s DgSpace,
    exact: &dyn ExactSolution,
    t: f64,
) -> Result<(RtField<'s>, DgField<'s>)> {
    EllipticProjector::new(rt, dg)?.project(exact, t)
}

/// The projection at `t = 0`, used as `(sigma_h^0, u_h^0)`.
pub fn initial_data<'s>(
    rt: &'s RtSpace,
    dg: &'s DgSpace,
    exact: &dyn ExactSolution,
) -> Result<(RtField<'s>, DgField<'s>)> {
    elliptic_project(rt, dg, exact, 0.0)
}
