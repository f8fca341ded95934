//! Element-local projection onto `RT_r(K)` from interior and face data.
//!
//! Given `p` on a cell and `q_i` on each of its faces, the projection is the
//! unique `zeta` in `RT_r(K)` with
//!
//! ```text
//! int_K   (zeta - p) . omega    = 0   for all omega in [P_{r-1}(K)]^d
//! int_F_i (zeta . n_F - q_i) mu = 0   for all mu in P_r(F_i)
//! ```
//!
//! It is computed by assembling these moment equations against the cell's
//! basis and solving the square system directly. Face data is taken relative
//! to each face's global normal.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::poly::OrthonormalBasis;
use crate::quadrature::{map_to_face, simplex_rule, QuadratureRule};
use crate::spaces::RtSpace;
use crate::Point;

/// A scalar datum on one face.
pub type FaceData<'a> = Box<dyn Fn(&Point) -> f64 + Sync + 'a>;

/// Interior datum `p` and one face datum `q_i` per local face, all taking
/// physical coordinates.
pub struct LocalProjectionData<'a> {
    pub interior: Box<dyn Fn(&Point) -> Point + Sync + 'a>,
    pub faces: Vec<FaceData<'a>>,
}

impl<'a> LocalProjectionData<'a> {
    pub fn new(
        interior: impl Fn(&Point) -> Point + Sync + 'a,
        faces: Vec<FaceData<'a>>,
    ) -> Self {
        Self {
            interior: Box::new(interior),
            faces,
        }
    }
}

/// Reusable rules and test bases for local projections on one space.
pub struct LocalProjector<'s> {
    rt: &'s RtSpace,
    cell_rule: QuadratureRule,
    face_rule: QuadratureRule,
    interior_tests: Option<OrthonormalBasis>,
}

impl<'s> LocalProjector<'s> {
    pub fn new(rt: &'s RtSpace) -> Result<Self> {
        let d = rt.dim();
        let r = rt.degree();
        // Data may be non-polynomial, so integrate beyond the polynomial degree.
        let degree = 2 * r + 4;
        Ok(Self {
            rt,
            cell_rule: simplex_rule(d, degree)?,
            face_rule: simplex_rule(d - 1, degree)?,
            interior_tests: (r > 0).then(|| OrthonormalBasis::new(d, r - 1)),
        })
    }

    /// Local coefficients (with respect to the cell's unsigned basis) of the
    /// projection on cell `c`.
    pub fn project(&self, c: usize, data: &LocalProjectionData) -> Result<Vec<f64>> {
        let (matrix, rhs) = self.moment_system(c, data)?;
        let lu = matrix.lu();
        let solution = lu
            .solve(&rhs)
            .ok_or(Error::NumericalDegeneracy { cell: c })?;
        Ok(solution.iter().copied().collect())
    }

    /// The square moment system `A zeta = b` on cell `c`.
    pub fn moment_system(
        &self,
        c: usize,
        data: &LocalProjectionData,
    ) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let rt = self.rt;
        let mesh = rt.mesh();
        let d = mesh.dim();
        if data.faces.len() != d + 1 {
            return Err(Error::InvalidArgument(format!(
                "expected {} face data, got {}",
                d + 1,
                data.faces.len()
            )));
        }
        let n = rt.local_dim();
        let nf = rt.face_dofs();
        let geom = mesh.geom(c);
        let reference = rt.reference(c);
        let moments = rt.face_moments();
        let mut matrix = DMatrix::zeros(n, n);
        let mut rhs = DVector::zeros(n);
        let mut vals = vec![Point::zeros(); n];
        let mut divs = vec![0.0; n];
        let mut mu = vec![0.0; nf];

        for (i, cf) in mesh.cell_faces(c).iter().enumerate() {
            let normal = mesh.face(cf.face).normal;
            let row = i * nf;
            for fp in map_to_face(&self.face_rule, &mesh.local_face_points(c, i)) {
                reference.eval(&geom.pullback(&fp.x), &mut vals, &mut divs);
                moments.eval(&Point::new(fp.bary[1], fp.bary[2], 0.0), &mut mu);
                let q = (data.faces[i])(&fp.x);
                for a in 0..nf {
                    let wm = fp.weight * mu[a];
                    for k in 0..n {
                        matrix[(row + a, k)] += wm * geom.piola(&vals[k]).dot(&normal);
                    }
                    rhs[row + a] += wm * q;
                }
            }
        }

        if let Some(tests) = &self.interior_tests {
            let row0 = (d + 1) * nf;
            let nt = tests.len();
            let mut psi = vec![0.0; nt];
            for (xr, w) in self.cell_rule.iter() {
                reference.eval(xr, &mut vals, &mut divs);
                tests.eval(xr, &mut psi);
                let x = geom.map(xr);
                let p = (data.interior)(&x);
                let wd = w * geom.det;
                let phys: Vec<Point> = vals.iter().map(|v| geom.piola(v)).collect();
                for comp in 0..d {
                    for (a, &pa) in psi.iter().enumerate() {
                        let row = row0 + comp * nt + a;
                        for k in 0..n {
                            matrix[(row, k)] += wd * phys[k][comp] * pa;
                        }
                        rhs[row] += wd * p[comp] * pa;
                    }
                }
            }
        }
        Ok((matrix, rhs))
    }

    /// `||zeta||^2_K / (||p||^2_K + h sum_i ||q_i||^2_{F_i})` with `h` the
    /// cell diameter.
    pub fn stability_ratio(&self, c: usize, data: &LocalProjectionData) -> Result<f64> {
        let local = self.project(c, data)?;
        let rt = self.rt;
        let mesh = rt.mesh();
        let geom = mesh.geom(c);
        let reference = rt.reference(c);
        let n = rt.local_dim();
        let mut vals = vec![Point::zeros(); n];
        let mut divs = vec![0.0; n];
        let mut zeta_sq = 0.0;
        let mut p_sq = 0.0;
        for (xr, w) in self.cell_rule.iter() {
            reference.eval(xr, &mut vals, &mut divs);
            let v: Point = vals.iter().zip(&local).map(|(v, a)| v * *a).sum();
            zeta_sq += w * geom.det * geom.piola(&v).norm_squared();
            p_sq += w * geom.det * (data.interior)(&geom.map(xr)).norm_squared();
        }
        let h = mesh.cell_diameter(c);
        let mut face_sq = 0.0;
        for (i, q) in data.faces.iter().enumerate() {
            for fp in map_to_face(&self.face_rule, &mesh.local_face_points(c, i)) {
                face_sq += fp.weight * q(&fp.x).powi(2);
            }
        }
        let denominator = p_sq + h * face_sq;
        if denominator == 0.0 {
            return Err(Error::UndefinedRatio("projection data vanish"));
        }
        Ok(zeta_sq / denominator)
    }
}

/// Projection on a single cell; see [`LocalProjector::project`].
pub fn local_rt_project(rt: &RtSpace, c: usize, data: &LocalProjectionData) -> Result<Vec<f64>> {
    LocalProjector::new(rt)?.project(c, data)
}

/// Stability ratio on a single cell; see [`LocalProjector::stability_ratio`].
pub fn local_stability_ratio(rt: &RtSpace, c: usize, data: &LocalProjectionData) -> Result<f64> {
    LocalProjector::new(rt)?.stability_ratio(c, data)
}

/// Assemble a global RT field cell by cell from local projections.
///
/// `data(c)` supplies the projection data of cell `c`. The face data must be
/// single valued on every interior face (in global-normal orientation) for
/// the result to be conforming; face dofs are then identical from both sides.
pub fn project_cellwise<'a, F>(rt: &RtSpace, data: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> LocalProjectionData<'a> + Sync,
{
    let projector = LocalProjector::new(rt)?;
    let locals: Vec<Vec<f64>> = (0..rt.mesh().n_cells())
        .into_par_iter()
        .map(|c| projector.project(c, &data(c)))
        .collect::<Result<_>>()?;
    let mut coeffs = vec![0.0; rt.n_dofs()];
    for (c, local) in locals.iter().enumerate() {
        let (dofs, signs) = rt.cell_dofs(c);
        for ((&g, s), a) in dofs.iter().zip(signs).zip(local) {
            coeffs[g] = s * a;
        }
    }
    Ok(coeffs)
}
