//! Sparse direct factorization of the block step matrix.
//!
//! The matrix is constant in time, so it is factored once and every step is a
//! pair of triangular solves. Each solve is checked against the normwise
//! relative residual contract.
//!
//! The symmetric form `[[-M, -B], [-B^T, D/tau]]` is quasi-definite, so it
//! admits an `LDL^T` factorization under any symmetric ordering. That is the
//! form used for time stepping: minimum degree ordering keeps the fill far
//! below that of a general sparse LU, which matters in 3D. Other forms fall
//! back to LU with partial pivoting.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, LdltRef, SymbolicCholesky, SymmetricOrdering};
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat, Par, Side};

use crate::assembly::SaddleSystem;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Largest accepted `||Ax - b|| / (||A|| ||x|| + ||b||)`, infinity norms.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Which block form was factored. The negated form has a symmetric matrix and
/// expects the first right-hand side block negated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockForm {
    /// `[[M, B], [-B^T, D/tau]]`
    Standard,
    /// `[[-M, -B], [-B^T, D/tau]]`
    NegatedFirstBlock,
    /// `[[M, B], [-B^T, 0]]`
    Stationary,
}

enum Backend {
    Lu(Lu<usize, f64>),
    Ldlt {
        symbolic: SymbolicCholesky<usize>,
        values: Vec<f64>,
    },
}

/// A reusable factorization together with the matrix it came from.
pub struct Factorization {
    matrix: SparseMatrix,
    norm_inf: f64,
    n_rt: usize,
    form: BlockForm,
    backend: Backend,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization")
            .field("n", &self.matrix.rows())
            .field("nnz", &self.matrix.nnz())
            .field("form", &self.form)
            .finish()
    }
}

/// Factor the step matrix `[[M, B], [-B^T, D/tau]]`.
pub fn factor(system: &SaddleSystem) -> Result<Factorization> {
    factor_form(system, BlockForm::Standard)
}

/// Factor one of the block forms of `system`.
pub fn factor_form(system: &SaddleSystem, form: BlockForm) -> Result<Factorization> {
    let matrix = match form {
        BlockForm::Standard => system.step_matrix(),
        BlockForm::NegatedFirstBlock => system.symmetric_step_matrix(),
        BlockForm::Stationary => system.stationary_matrix(),
    };
    Factorization::new(matrix, system.n_rt(), form)
}

impl Factorization {
    /// Factor an arbitrary square matrix whose first `n_rt` unknowns form
    /// the flux block.
    pub fn new(matrix: SparseMatrix, n_rt: usize, form: BlockForm) -> Result<Self> {
        let n = matrix.rows();
        if matrix.cols() != n || n_rt > n {
            return Err(Error::InvalidArgument(format!(
                "cannot factor a {}x{} matrix with a flux block of size {n_rt}",
                n,
                matrix.cols()
            )));
        }
        let backend = if form == BlockForm::NegatedFirstBlock {
            factor_ldlt(&matrix)?
        } else {
            factor_lu(&matrix)?
        };
        Ok(Self {
            norm_inf: matrix.norm_inf(),
            matrix,
            n_rt,
            form,
            backend,
        })
    }

    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    pub fn form(&self) -> BlockForm {
        self.form
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    /// Solve `A x = rhs` and check the residual.
    pub fn solve_vec(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        if rhs.len() != n {
            return Err(Error::InvalidArgument(format!(
                "right-hand side has length {}, system has {n} unknowns",
                rhs.len()
            )));
        }
        let mut b = Mat::from_fn(n, 1, |i, _| rhs[i]);
        match &self.backend {
            Backend::Lu(lu) => b = lu.solve(&b),
            Backend::Ldlt { symbolic, values } => {
                let mut buf = MemBuffer::new(symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
                LdltRef::new(symbolic, values).solve_in_place_with_conj(
                    Conj::No,
                    b.as_mut(),
                    Par::Seq,
                    MemStack::new(&mut buf),
                );
            }
        }
        let x: Vec<f64> = (0..n).map(|i| b[(i, 0)]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular("factorization produced non-finite values".into()));
        }
        let residual = self.relative_residual(&x, rhs);
        if !(residual < RESIDUAL_TOLERANCE) {
            return Err(Error::Residual {
                residual,
                tolerance: RESIDUAL_TOLERANCE,
            });
        }
        Ok(x)
    }

    /// `||A x - b||_inf / (||A||_inf ||x||_inf + ||b||_inf)`, zero when both
    /// `x` and `b` vanish.
    pub fn relative_residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let ax = self.matrix.mul_vec(x);
        let num = ax.iter().zip(b).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        let den = self.norm_inf * inf(x) + inf(b);
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    /// Solve with the blocks of the standard form's right-hand side, whatever
    /// form was factored, and return `(sigma, u)`.
    pub fn solve(&self, rhs_sigma: &[f64], rhs_u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if rhs_sigma.len() != self.n_rt || rhs_sigma.len() + rhs_u.len() != self.n() {
            return Err(Error::InvalidArgument(format!(
                "right-hand side blocks have lengths {} and {}, expected {} and {}",
                rhs_sigma.len(),
                rhs_u.len(),
                self.n_rt,
                self.n() - self.n_rt
            )));
        }
        let flip = if self.form == BlockForm::NegatedFirstBlock { -1.0 } else { 1.0 };
        let mut rhs: Vec<f64> = rhs_sigma.iter().map(|v| flip * v).collect();
        rhs.extend_from_slice(rhs_u);
        let mut x = self.solve_vec(&rhs)?;
        let u = x.split_off(self.n_rt);
        Ok((x, u))
    }
}

fn to_csc(matrix: &SparseMatrix, lower_only: bool) -> Result<SparseColMat<usize, f64>> {
    let n = matrix.rows();
    let triplets: Vec<Triplet<usize, usize, f64>> = matrix
        .iter()
        .filter(|&(i, j, _)| !lower_only || i >= j)
        .map(|(i, j, v)| Triplet::new(i, j, v))
        .collect();
    SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::Singular(format!("cannot build factorization input: {e:?}")))
}

fn factor_lu(matrix: &SparseMatrix) -> Result<Backend> {
    let lu = to_csc(matrix, false)?
        .sp_lu()
        .map_err(|e| Error::Singular(format!("sparse LU failed: {e:?}")))?;
    Ok(Backend::Lu(lu))
}

fn factor_ldlt(matrix: &SparseMatrix) -> Result<Backend> {
    let a = to_csc(matrix, true)?;
    let symbolic = factorize_symbolic_cholesky(a.symbolic(), Side::Lower, SymmetricOrdering::Amd, Default::default())
        .map_err(|e| Error::Singular(format!("symbolic factorization failed: {e:?}")))?;
    let mut values = vec![0.0; symbolic.len_val()];
    let mut buf = MemBuffer::new(symbolic.factorize_numeric_ldlt_scratch::<f64>(Par::Seq, Default::default()));
    symbolic
        .factorize_numeric_ldlt(
            &mut values,
            a.as_ref(),
            Side::Lower,
            LdltRegularization::default(),
            Par::Seq,
            MemStack::new(&mut buf),
            Default::default(),
        )
        .map_err(|e| Error::Singular(format!("LDL^T factorization failed: {e:?}")))?;
    Ok(Backend::Ldlt { symbolic, values })
}
