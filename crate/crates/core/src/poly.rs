//! Monomial bases and orthonormal polynomial bases on reference simplices.

use nalgebra::DMatrix;

use crate::quadrature::simplex_rule;
use crate::Point;

/// All monomials `x^a y^b z^c` of total degree `<= degree` in `dim` variables,
/// ordered by total degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomials {
    dim: usize,
    degree: usize,
    exponents: Vec<[usize; 3]>,
}

impl Monomials {
    pub fn new(dim: usize, degree: usize) -> Self {
        assert!((1..=3).contains(&dim));
        let mut exponents = Vec::new();
        for total in 0..=degree {
            exponents.extend(homogeneous_exponents(dim, total));
        }
        Self {
            dim,
            degree,
            exponents,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponents(&self) -> &[[usize; 3]] {
        &self.exponents
    }

    /// Index of the monomial with the given exponents.
    pub fn index_of(&self, exps: [usize; 3]) -> Option<usize> {
        self.exponents.iter().position(|e| *e == exps)
    }

    fn powers(&self, x: &Point) -> [[f64; 16]; 3] {
        let mut pw = [[0.0; 16]; 3];
        for c in 0..3 {
            pw[c][0] = 1.0;
            for k in 1..=self.degree {
                pw[c][k] = pw[c][k - 1] * x[c];
            }
        }
        pw
    }

    pub fn eval(&self, x: &Point, out: &mut [f64]) {
        let pw = self.powers(x);
        for (o, e) in out.iter_mut().zip(&self.exponents) {
            *o = pw[0][e[0]] * pw[1][e[1]] * pw[2][e[2]];
        }
    }

    /// Gradients of every monomial at `x`.
    pub fn eval_grad(&self, x: &Point, out: &mut [Point]) {
        let pw = self.powers(x);
        for (o, e) in out.iter_mut().zip(&self.exponents) {
            let mut g = Point::zeros();
            for c in 0..self.dim {
                if e[c] == 0 {
                    continue;
                }
                let mut term = e[c] as f64 * pw[c][e[c] - 1];
                for other in (0..3).filter(|&o| o != c) {
                    term *= pw[other][e[other]];
                }
                g[c] = term;
            }
            *o = g;
        }
    }
}

/// Exponent tuples of total degree exactly `total` in `dim` variables.
pub fn homogeneous_exponents(dim: usize, total: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    match dim {
        1 => out.push([total, 0, 0]),
        2 => {
            for a in (0..=total).rev() {
                out.push([a, total - a, 0]);
            }
        }
        3 => {
            for a in (0..=total).rev() {
                for b in (0..=total - a).rev() {
                    out.push([a, b, total - a - b]);
                }
            }
        }
        _ => unreachable!("dimension checked by caller"),
    }
    out
}

/// `C(n, k)`.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Dimension of `P_r` in `dim` variables.
pub fn poly_dim(dim: usize, degree: usize) -> usize {
    binomial(dim + degree, degree)
}

/// A basis of `P_degree` on the reference `dim`-simplex, orthonormal for the
/// normalized inner product `<f, g> = (1/|K|) int_K f g`.
///
/// Rows are coefficient vectors over [`Monomials::new(dim, degree)`]. The
/// construction is triangular, so the first basis function is the constant 1.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    monomials: Monomials,
    coeffs: DMatrix<f64>,
}

impl OrthonormalBasis {
    pub fn new(dim: usize, degree: usize) -> Self {
        let monomials = Monomials::new(dim, degree);
        let n = monomials.len();
        let rule = simplex_rule(dim, 2 * degree).expect("degree within quadrature range");
        let measure: f64 = rule.weights.iter().sum();
        let mut gram = DMatrix::zeros(n, n);
        let mut vals = vec![0.0; n];
        for (x, w) in rule.iter() {
            monomials.eval(x, &mut vals);
            for i in 0..n {
                for j in 0..n {
                    gram[(i, j)] += w * vals[i] * vals[j] / measure;
                }
            }
        }
        let chol = gram
            .cholesky()
            .expect("monomial Gram matrix is positive definite");
        let l = chol.l();
        let coeffs = l
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .expect("Cholesky factor is invertible");
        Self { monomials, coeffs }
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &Monomials {
        &self.monomials
    }

    /// Coefficient of monomial `m` in basis function `k`.
    pub fn coeff(&self, k: usize, m: usize) -> f64 {
        self.coeffs[(k, m)]
    }

    pub fn eval(&self, x: &Point, out: &mut [f64]) {
        let n = self.len();
        let mut mono = [0.0; 64];
        self.monomials.eval(x, &mut mono[..n]);
        for (k, o) in out.iter_mut().enumerate().take(n) {
            *o = (0..=k).map(|m| self.coeffs[(k, m)] * mono[m]).sum();
        }
    }

    pub fn eval_grad(&self, x: &Point, out: &mut [Point]) {
        let n = self.len();
        let mut mono = [Point::zeros(); 64];
        self.monomials.eval_grad(x, &mut mono[..n]);
        for (k, o) in out.iter_mut().enumerate().take(n) {
            *o = (0..=k).map(|m| self.coeffs[(k, m)] * mono[m]).sum();
        }
    }
}
