//! Raviart-Thomas spaces `RT_r = [P_r]^d + x P_r` on simplices.
//!
//! Degrees of freedom on a cell are, in local order:
//!
//! * for each local face `i` and each face moment polynomial `mu_k`,
//!   `int_F (zeta . n_out) mu_k`, where `mu_k` is built from the barycentric
//!   coordinates of the face vertices sorted by global vertex id;
//! * for each component `c` and each `psi` of an orthonormal basis of
//!   `P_{r-1}`, `int_K^ zeta^_c psi` on the reference cell.
//!
//! The reference basis is the dual basis of these functionals, obtained by
//! inverting the functional-by-spanning-set matrix. Since face moments only
//! depend on the global vertex order, two cells sharing a face see the same
//! functionals up to the orientation sign of the normal.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mesh::{local_face_vertices, reference_normal, reference_vertices, CellGeometry, SimplicialMesh};
use crate::poly::{binomial, homogeneous_exponents, Monomials, OrthonormalBasis};
use crate::quadrature::{map_to_face, simplex_rule, QuadratureRule};
use crate::Point;

/// `dim RT_r(K)` on a `d`-simplex: `(d+r+1)(d+r-1)! / ((d-1)! r!)`.
pub fn rt_local_dim(d: usize, r: usize) -> usize {
    let fact = |n: usize| (1..=n).product::<usize>();
    (d + r + 1) * fact(d + r - 1) / (fact(d - 1) * fact(r))
}

/// Number of face moments per face, `dim P_r(F)`.
pub fn rt_face_dofs(d: usize, r: usize) -> usize {
    binomial(d - 1 + r, r)
}

/// Number of interior moments per cell, `d dim P_{r-1}(K)`.
pub fn rt_interior_dofs(d: usize, r: usize) -> usize {
    if r == 0 {
        0
    } else {
        d * binomial(d + r - 1, r - 1)
    }
}

pub fn is_supported(d: usize, r: usize) -> bool {
    matches!((d, r), (2, 0..=2) | (3, 0..=1))
}

/// Position of each local face vertex in the global ascending order.
pub type FacePermutation = [u8; 3];

/// Values of the sorted-order barycentric coordinates `lambda_1..lambda_{d-1}`
/// given barycentrics in local face order, packed as a point for evaluating
/// face moment polynomials.
pub fn face_moment_argument(bary_local: &[f64; 3], perm: &FacePermutation, d: usize) -> Point {
    let mut sorted = [0.0; 3];
    for m in 0..d {
        sorted[perm[m] as usize] = bary_local[m];
    }
    Point::new(sorted[1], sorted[2], 0.0)
}

/// The dual basis on the reference simplex for one choice of face
/// permutations.
#[derive(Debug, Clone)]
pub struct RtReference {
    dim: usize,
    degree: usize,
    monomials: Monomials,
    /// `coeffs[(k * dim + c) * n_mono + m]`.
    coeffs: Vec<f64>,
    n_basis: usize,
    face_perms: Vec<FacePermutation>,
}

impl RtReference {
    pub fn new(dim: usize, r: usize, face_perms: &[FacePermutation]) -> Result<Self> {
        if !is_supported(dim, r) {
            return Err(Error::Unsupported { dim, r });
        }
        let monomials = Monomials::new(dim, r + 1);
        let nm = monomials.len();
        let n = rt_local_dim(dim, r);

        // Spanning set: [P_r]^d followed by x * (homogeneous P_r).
        let mut span: Vec<Vec<f64>> = Vec::with_capacity(n);
        for c in 0..dim {
            for total in 0..=r {
                for e in homogeneous_exponents(dim, total) {
                    let mut v = vec![0.0; dim * nm];
                    v[c * nm + monomials.index_of(e).unwrap()] = 1.0;
                    span.push(v);
                }
            }
        }
        for e in homogeneous_exponents(dim, r) {
            let mut v = vec![0.0; dim * nm];
            for c in 0..dim {
                let mut raised = e;
                raised[c] += 1;
                v[c * nm + monomials.index_of(raised).unwrap()] = 1.0;
            }
            span.push(v);
        }
        debug_assert_eq!(span.len(), n);

        let eval_span = |x: &Point| -> Vec<Point> {
            let mut mono = vec![0.0; nm];
            monomials.eval(x, &mut mono);
            span.iter()
                .map(|v| {
                    let mut out = Point::zeros();
                    for c in 0..dim {
                        out[c] = (0..nm).map(|m| v[c * nm + m] * mono[m]).sum();
                    }
                    out
                })
                .collect()
        };

        let mut functionals = DMatrix::<f64>::zeros(n, n);
        let mut row = 0;
        let face_moments = OrthonormalBasis::new(dim - 1, r);
        let face_rule = simplex_rule(dim - 1, 2 * r + 1)?;
        let ref_vertices = reference_vertices(dim);
        for i in 0..=dim {
            let normal = reference_normal(dim, i);
            let pts: Vec<Point> = local_face_vertices(dim, i)
                .into_iter()
                .map(|lv| ref_vertices[lv])
                .collect();
            let perm = face_perms.get(i).copied().unwrap_or([0, 1, 2]);
            let mut mu = vec![0.0; face_moments.len()];
            for fp in map_to_face(&face_rule, &pts) {
                face_moments.eval(&face_moment_argument(&fp.bary, &perm, dim), &mut mu);
                let vals = eval_span(&fp.x);
                for (k, &muk) in mu.iter().enumerate() {
                    for (j, v) in vals.iter().enumerate() {
                        functionals[(row + k, j)] += fp.weight * v.dot(&normal) * muk;
                    }
                }
            }
            row += face_moments.len();
        }
        if r > 0 {
            let interior = OrthonormalBasis::new(dim, r - 1);
            let rule = simplex_rule(dim, 2 * r + 1)?;
            let mut psi = vec![0.0; interior.len()];
            for (x, w) in rule.iter() {
                interior.eval(x, &mut psi);
                let vals = eval_span(x);
                for c in 0..dim {
                    for (a, &pa) in psi.iter().enumerate() {
                        for (j, v) in vals.iter().enumerate() {
                            functionals[(row + c * interior.len() + a, j)] += w * v[c] * pa;
                        }
                    }
                }
            }
        }

        let dual = functionals
            .try_inverse()
            .ok_or(Error::NumericalDegeneracy { cell: usize::MAX })?;
        let mut coeffs = vec![0.0; n * dim * nm];
        for k in 0..n {
            for (j, s) in span.iter().enumerate() {
                let a = dual[(j, k)];
                if a == 0.0 {
                    continue;
                }
                for (idx, &sv) in s.iter().enumerate() {
                    coeffs[k * dim * nm + idx] += a * sv;
                }
            }
        }
        Ok(Self {
            dim,
            degree: r,
            monomials,
            coeffs,
            n_basis: n,
            face_perms: face_perms.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.n_basis
    }

    pub fn is_empty(&self) -> bool {
        self.n_basis == 0
    }

    pub fn face_permutations(&self) -> &[FacePermutation] {
        &self.face_perms
    }

    /// Reference basis values and divergences at `x`.
    pub fn eval(&self, x: &Point, values: &mut [Point], divs: &mut [f64]) {
        let nm = self.monomials.len();
        let mut mono = [0.0; 32];
        let mut grad = [Point::zeros(); 32];
        self.monomials.eval(x, &mut mono[..nm]);
        self.monomials.eval_grad(x, &mut grad[..nm]);
        for k in 0..self.n_basis {
            let mut v = Point::zeros();
            let mut div = 0.0;
            for c in 0..self.dim {
                let row = &self.coeffs[(k * self.dim + c) * nm..(k * self.dim + c + 1) * nm];
                for m in 0..nm {
                    v[c] += row[m] * mono[m];
                    div += row[m] * grad[m][c];
                }
            }
            values[k] = v;
            divs[k] = div;
        }
    }

    /// Physical value of local basis function `k` at reference point `x`
    /// through the contravariant Piola map.
    pub fn eval_physical(&self, geom: &CellGeometry, k: usize, x: &Point) -> Point {
        let mut values = vec![Point::zeros(); self.n_basis];
        let mut divs = vec![0.0; self.n_basis];
        self.eval(x, &mut values, &mut divs);
        geom.piola(&values[k])
    }

    pub fn tabulate(&self, rule: &QuadratureRule) -> RtTabulation {
        let n = self.n_basis;
        let mut values = vec![Point::zeros(); rule.len() * n];
        let mut divs = vec![0.0; rule.len() * n];
        for (q, x) in rule.points.iter().enumerate() {
            self.eval(x, &mut values[q * n..(q + 1) * n], &mut divs[q * n..(q + 1) * n]);
        }
        RtTabulation {
            n_basis: n,
            values,
            divs,
        }
    }
}

/// Reference values and divergences of every basis function at every point
/// of a rule.
#[derive(Debug, Clone)]
pub struct RtTabulation {
    n_basis: usize,
    values: Vec<Point>,
    divs: Vec<f64>,
}

impl RtTabulation {
    pub fn values(&self, q: usize) -> &[Point] {
        &self.values[q * self.n_basis..(q + 1) * self.n_basis]
    }

    pub fn divs(&self, q: usize) -> &[f64] {
        &self.divs[q * self.n_basis..(q + 1) * self.n_basis]
    }
}

/// Global `RT_r` space on a mesh.
#[derive(Debug, Clone)]
pub struct RtSpace {
    mesh: Arc<SimplicialMesh>,
    degree: usize,
    local_dim: usize,
    face_dofs: usize,
    interior_dofs: usize,
    n_dofs: usize,
    references: Vec<RtReference>,
    cell_reference: Vec<usize>,
    dofs: Vec<usize>,
    signs: Vec<f64>,
    face_moments: OrthonormalBasis,
}

impl RtSpace {
    pub fn new(mesh: Arc<SimplicialMesh>, r: usize) -> Result<Self> {
        let d = mesh.dim();
        if !is_supported(d, r) {
            return Err(Error::Unsupported { dim: d, r });
        }
        let local_dim = rt_local_dim(d, r);
        let face_dofs = rt_face_dofs(d, r);
        let interior_dofs = rt_interior_dofs(d, r);
        let interior_offset = mesh.n_faces() * face_dofs;
        let n_dofs = interior_offset + mesh.n_cells() * interior_dofs;

        let mut lookup: HashMap<Vec<FacePermutation>, usize> = HashMap::new();
        let mut references = Vec::new();
        let mut cell_reference = Vec::with_capacity(mesh.n_cells());
        let mut dofs = Vec::with_capacity(mesh.n_cells() * local_dim);
        let mut signs = Vec::with_capacity(mesh.n_cells() * local_dim);
        for c in 0..mesh.n_cells() {
            let perms: Vec<FacePermutation> = (0..=d)
                .map(|i| {
                    if r == 0 {
                        [0, 1, 2]
                    } else {
                        face_permutation(mesh.cell(c), d, i)
                    }
                })
                .collect();
            let idx = match lookup.get(&perms) {
                Some(&idx) => idx,
                None => {
                    references.push(RtReference::new(d, r, &perms)?);
                    lookup.insert(perms, references.len() - 1);
                    references.len() - 1
                }
            };
            cell_reference.push(idx);
            for cf in mesh.cell_faces(c) {
                for k in 0..face_dofs {
                    dofs.push(cf.face * face_dofs + k);
                    signs.push(cf.sign);
                }
            }
            for k in 0..interior_dofs {
                dofs.push(interior_offset + c * interior_dofs + k);
                signs.push(1.0);
            }
        }
        Ok(Self {
            mesh,
            degree: r,
            local_dim,
            face_dofs,
            interior_dofs,
            n_dofs,
            references,
            cell_reference,
            dofs,
            signs,
            face_moments: OrthonormalBasis::new(d - 1, r),
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

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn face_dofs(&self) -> usize {
        self.face_dofs
    }

    pub fn interior_dofs(&self) -> usize {
        self.interior_dofs
    }

    /// Global dof ids and orientation signs of cell `c`, in local order.
    pub fn cell_dofs(&self, c: usize) -> (&[usize], &[f64]) {
        let range = c * self.local_dim..(c + 1) * self.local_dim;
        (&self.dofs[range.clone()], &self.signs[range])
    }

    pub fn reference(&self, c: usize) -> &RtReference {
        &self.references[self.cell_reference[c]]
    }

    pub fn references(&self) -> &[RtReference] {
        &self.references
    }

    pub fn reference_index(&self, c: usize) -> usize {
        self.cell_reference[c]
    }

    /// Orthonormal basis of `P_r` on a face, in sorted-vertex barycentrics.
    pub fn face_moments(&self) -> &OrthonormalBasis {
        &self.face_moments
    }

    /// Tabulate every distinct reference element on `rule`.
    pub fn tabulate(&self, rule: &QuadratureRule) -> Vec<RtTabulation> {
        self.references.iter().map(|r| r.tabulate(rule)).collect()
    }
}

fn face_permutation(cell: &[usize], d: usize, i: usize) -> FacePermutation {
    let global: Vec<usize> = local_face_vertices(d, i).iter().map(|&lv| cell[lv]).collect();
    let mut perm = [0u8; 3];
    for (m, g) in global.iter().enumerate() {
        perm[m] = global.iter().filter(|&&other| other < *g).count() as u8;
    }
    perm
}
