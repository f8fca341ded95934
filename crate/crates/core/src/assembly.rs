//! Global blocks of the mixed system and the load vectors of each step.
//!
//! With RT basis `phi_i` and DG basis `psi_k` the blocks are
//! `M_ij = (phi_j, phi_i)`, `B_ik = (psi_k, div phi_i)` and
//! `D_kl = (psi_l, psi_k)`. One backward Euler step solves
//!
//! ```text
//! [  M    B    ] [sigma]   [ 0     ]
//! [ -B^T  D/tau] [u    ] = [ rhs_u ]
//! ```

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::{simplex_rule, QuadratureRule};
use crate::sparse::SparseMatrix;
use crate::spaces::{DgField, DgSpace, DgTabulation, RtField, RtSpace, RtTabulation};
use crate::Point;

/// The polynomial part of the reaction term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CubicTerm {
    /// `u^3`
    Pure,
    /// `u^3 - u`
    AllenCahn,
}

/// Which lower-order terms enter `f(u, grad u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearitySpec {
    /// Velocity `b` of the advection term `(b . sigma) u`.
    pub advection: Option<Point>,
    pub cubic: Option<CubicTerm>,
}

impl NonlinearitySpec {
    pub fn none() -> Self {
        Self {
            advection: None,
            cubic: None,
        }
    }

    pub fn is_none(&self) -> bool {
        self.advection.is_none() && self.cubic.is_none()
    }

    /// `f(u, sigma)`.
    pub fn eval(&self, u: f64, sigma: &Point) -> f64 {
        let mut f = 0.0;
        if let Some(b) = &self.advection {
            f += b.dot(sigma) * u;
        }
        match self.cubic {
            Some(CubicTerm::Pure) => f += u * u * u,
            Some(CubicTerm::AllenCahn) => f += u * u * u - u,
            None => {}
        }
        f
    }
}

impl Default for NonlinearitySpec {
    fn default() -> Self {
        Self::none()
    }
}

/// The assembled blocks for one pair of spaces and one time step.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub m: SparseMatrix,
    /// `n_rt x n_dg`.
    pub b: SparseMatrix,
    pub d: SparseMatrix,
    pub tau: f64,
}

impl SaddleSystem {
    pub fn n_rt(&self) -> usize {
        self.m.rows()
    }

    pub fn n_dg(&self) -> usize {
        self.d.rows()
    }

    pub fn n(&self) -> usize {
        self.n_rt() + self.n_dg()
    }

    /// `[[M, B], [-B^T, D/tau]]`.
    pub fn step_matrix(&self) -> SparseMatrix {
        self.block_matrix(1.0, -1.0, Some(1.0 / self.tau))
    }

    /// `[[-M, -B], [-B^T, D/tau]]`, symmetric.
    pub fn symmetric_step_matrix(&self) -> SparseMatrix {
        self.block_matrix(-1.0, -1.0, Some(1.0 / self.tau))
    }

    /// `[[M, B], [-B^T, 0]]`, the stationary mixed Poisson operator.
    pub fn stationary_matrix(&self) -> SparseMatrix {
        self.block_matrix(1.0, -1.0, None)
    }

    fn block_matrix(&self, top: f64, lower: f64, d_scale: Option<f64>) -> SparseMatrix {
        let n_rt = self.n_rt();
        let mut triplets = Vec::with_capacity(self.m.nnz() + 2 * self.b.nnz() + self.d.nnz());
        triplets.extend(self.m.iter().map(|(i, j, v)| (i, j, top * v)));
        for (i, k, v) in self.b.iter() {
            triplets.push((i, n_rt + k, top * v));
            triplets.push((n_rt + k, i, lower * v));
        }
        if let Some(s) = d_scale {
            triplets.extend(self.d.iter().map(|(k, l, v)| (n_rt + k, n_rt + l, s * v)));
        }
        SparseMatrix::from_triplets(self.n(), self.n(), &triplets).expect("block indices in range")
    }
}

fn check_pair(rt: &RtSpace, dg: &DgSpace) -> Result<()> {
    if !Arc::ptr_eq(rt.mesh(), dg.mesh()) {
        return Err(Error::InvalidArgument(
            "flux and scalar spaces live on different meshes".into(),
        ));
    }
    if rt.degree() != dg.degree() {
        return Err(Error::InvalidArgument(format!(
            "RT degree {} does not match DG degree {}",
            rt.degree(),
            dg.degree()
        )));
    }
    Ok(())
}

/// Assemble `M`, `B` and `D` for time step `tau`.
pub fn assemble_saddle(rt: &RtSpace, dg: &DgSpace, tau: f64) -> Result<SaddleSystem> {
    let order: Vec<usize> = (0..rt.mesh().n_cells()).collect();
    assemble_saddle_in_order(rt, dg, tau, &order)
}

/// As [`assemble_saddle`], visiting cells in the given order. Local blocks
/// are merged in cell-index order, so the result does not depend on `order`.
pub fn assemble_saddle_in_order(
    rt: &RtSpace,
    dg: &DgSpace,
    tau: f64,
    order: &[usize],
) -> Result<SaddleSystem> {
    check_pair(rt, dg)?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {tau}")));
    }
    let mesh = rt.mesh();
    let n_cells = mesh.n_cells();
    let mut seen = vec![false; n_cells];
    if order.len() != n_cells || order.iter().any(|&c| c >= n_cells || std::mem::replace(&mut seen[c], true)) {
        return Err(Error::InvalidArgument("cell order is not a permutation".into()));
    }

    let rule = simplex_rule(mesh.dim(), 2 * rt.degree() + 2)?;
    let rt_tabs = rt.tabulate(&rule);
    let dg_tab = dg.tabulate(&rule);
    let nr = rt.local_dim();
    let nd = dg.local_dim();

    let visited: Vec<(usize, LocalBlocks)> = order
        .par_iter()
        .map(|&c| (c, local_blocks(rt, c, &rule, &rt_tabs[rt.reference_index(c)], &dg_tab)))
        .collect();
    let mut locals: Vec<Option<LocalBlocks>> = vec![None; n_cells];
    for (c, blocks) in visited {
        locals[c] = Some(blocks);
    }

    let mut m_trip = Vec::with_capacity(n_cells * nr * nr);
    let mut b_trip = Vec::with_capacity(n_cells * nr * nd);
    let mut d_trip = Vec::with_capacity(n_cells * nd * nd);
    for (c, blocks) in locals.iter().enumerate() {
        let blocks = blocks.as_ref().expect("every cell visited");
        let (dofs, signs) = rt.cell_dofs(c);
        let dg_dofs = dg.cell_dofs(c);
        for i in 0..nr {
            for j in 0..nr {
                m_trip.push((dofs[i], dofs[j], signs[i] * signs[j] * blocks.m[i * nr + j]));
            }
            for k in 0..nd {
                b_trip.push((dofs[i], dg_dofs.start + k, signs[i] * blocks.b[i * nd + k]));
            }
        }
        for k in 0..nd {
            for l in 0..nd {
                d_trip.push((dg_dofs.start + k, dg_dofs.start + l, blocks.d[k * nd + l]));
            }
        }
    }
    Ok(SaddleSystem {
        m: SparseMatrix::from_triplets(rt.n_dofs(), rt.n_dofs(), &m_trip)?,
        b: SparseMatrix::from_triplets(rt.n_dofs(), dg.n_dofs(), &b_trip)?,
        d: SparseMatrix::from_triplets(dg.n_dofs(), dg.n_dofs(), &d_trip)?,
        tau,
    })
}

/// Cell blocks with respect to the unsigned local RT basis, row-major.
#[derive(Debug, Clone)]
struct LocalBlocks {
    m: Vec<f64>,
    b: Vec<f64>,
    d: Vec<f64>,
}

fn local_blocks(
    rt: &RtSpace,
    c: usize,
    rule: &QuadratureRule,
    rt_tab: &RtTabulation,
    dg_tab: &DgTabulation,
) -> LocalBlocks {
    let geom = rt.mesh().geom(c);
    let nr = rt.local_dim();
    let nd = dg_tab.values(0).len();
    let mut m = vec![0.0; nr * nr];
    let mut b = vec![0.0; nr * nd];
    let mut d = vec![0.0; nd * nd];
    let mut phys = vec![Point::zeros(); nr];
    for (q, &w) in rule.weights.iter().enumerate() {
        let wd = w * geom.det;
        for (p, v) in phys.iter_mut().zip(rt_tab.values(q)) {
            *p = geom.piola(v);
        }
        let divs = rt_tab.divs(q);
        let psi = dg_tab.values(q);
        for i in 0..nr {
            for j in 0..nr {
                m[i * nr + j] += wd * phys[i].dot(&phys[j]);
            }
            // div phi = div^ phi^ / det, so the Jacobian cancels.
            for k in 0..nd {
                b[i * nd + k] += w * divs[i] * psi[k];
            }
        }
        for k in 0..nd {
            for l in 0..nd {
                d[k * nd + l] += wd * psi[k] * psi[l];
            }
        }
    }
    LocalBlocks { m, b, d }
}

/// Quadrature degree for the lagged nonlinear load.
pub fn nonlinear_load_degree(r: usize) -> usize {
    (3 * r + 2).max(4 * r)
}

/// Quadrature degree for error norms.
pub fn error_norm_degree(r: usize) -> usize {
    2 * r + 6
}

/// Quadrature degree for source terms. In 2D this is raised until a
/// degree-12 source (the cube of a quartic solution) is integrated exactly
/// against `P_r`. In 3D the extra points cost far more and the norm degree is
/// kept.
pub fn source_degree(dim: usize, r: usize) -> usize {
    if dim == 2 {
        error_norm_degree(r).max(12 + r)
    } else {
        error_norm_degree(r)
    }
}

/// Cached rules and tabulations for the per-step load vectors.
pub struct LoadAssembler<'s> {
    rt: &'s RtSpace,
    dg: &'s DgSpace,
    nl_rule: QuadratureRule,
    nl_rt: Vec<RtTabulation>,
    nl_dg: DgTabulation,
    src_rule: QuadratureRule,
    src_dg: DgTabulation,
}

impl<'s> LoadAssembler<'s> {
    pub fn new(rt: &'s RtSpace, dg: &'s DgSpace) -> Result<Self> {
        check_pair(rt, dg)?;
        let d = rt.dim();
        let r = rt.degree();
        let nl_rule = simplex_rule(d, nonlinear_load_degree(r))?;
        let src_rule = simplex_rule(d, source_degree(d, r))?;
        Ok(Self {
            rt,
            dg,
            nl_rt: rt.tabulate(&nl_rule),
            nl_dg: dg.tabulate(&nl_rule),
            nl_rule,
            src_dg: dg.tabulate(&src_rule),
            src_rule,
        })
    }

    /// Entries `(f(u_prev, sigma_prev), psi_k)`.
    pub fn nonlinear_load(&self, u_prev: &DgField, sigma_prev: &RtField, spec: &NonlinearitySpec) -> Vec<f64> {
        let n = self.dg.n_dofs();
        if spec.is_none() {
            return vec![0.0; n];
        }
        let nd = self.dg.local_dim();
        let nr = self.rt.local_dim();
        let need_sigma = spec.advection.is_some();
        let locals: Vec<Vec<f64>> = (0..self.rt.mesh().n_cells())
            .into_par_iter()
            .map(|c| {
                let geom = self.rt.mesh().geom(c);
                let u_loc = u_prev.local_coeffs(c);
                let s_loc = if need_sigma { sigma_prev.local_coeffs(c) } else { Vec::new() };
                let rt_tab = &self.nl_rt[self.rt.reference_index(c)];
                let mut out = vec![0.0; nd];
                for (q, &w) in self.nl_rule.weights.iter().enumerate() {
                    let psi = self.nl_dg.values(q);
                    let u: f64 = psi.iter().zip(u_loc).map(|(p, a)| p * a).sum();
                    let sigma = if need_sigma {
                        let v: Point = rt_tab.values(q)[..nr].iter().zip(&s_loc).map(|(v, a)| v * *a).sum();
                        geom.piola(&v)
                    } else {
                        Point::zeros()
                    };
                    let fw = w * geom.det * spec.eval(u, &sigma);
                    for (o, p) in out.iter_mut().zip(psi) {
                        *o += fw * p;
                    }
                }
                out
            })
            .collect();
        locals.concat()
    }

    /// Entries `(g(., t), psi_k)`.
    pub fn source<G>(&self, g: G, t: f64) -> Vec<f64>
    where
        G: Fn(&Point, f64) -> f64 + Sync,
    {
        let nd = self.dg.local_dim();
        let locals: Vec<Vec<f64>> = (0..self.dg.mesh().n_cells())
            .into_par_iter()
            .map(|c| {
                let geom = self.dg.mesh().geom(c);
                let mut out = vec![0.0; nd];
                for (q, (xr, w)) in self.src_rule.iter().enumerate() {
                    let gw = w * geom.det * g(&geom.map(xr), t);
                    for (o, p) in out.iter_mut().zip(self.src_dg.values(q)) {
                        *o += gw * p;
                    }
                }
                out
            })
            .collect();
        locals.concat()
    }
}

/// Entries `(f(u_prev, sigma_prev), psi_k)` with `f` evaluated pointwise at
/// quadrature points of degree [`nonlinear_load_degree`].
pub fn assemble_nonlinear_load(
    dg: &DgSpace,
    rt: &RtSpace,
    u_prev: &DgField,
    sigma_prev: &RtField,
    spec: &NonlinearitySpec,
) -> Result<Vec<f64>> {
    Ok(LoadAssembler::new(rt, dg)?.nonlinear_load(u_prev, sigma_prev, spec))
}

/// Entries `(g(., t), psi_k)` at quadrature degree [`source_degree`].
pub fn assemble_source<G>(dg: &DgSpace, g: G, t: f64) -> Result<Vec<f64>>
where
    G: Fn(&Point, f64) -> f64 + Sync,
{
    let rule = simplex_rule(dg.dim(), source_degree(dg.dim(), dg.degree()))?;
    let tab = dg.tabulate(&rule);
    let nd = dg.local_dim();
    let locals: Vec<Vec<f64>> = (0..dg.mesh().n_cells())
        .into_par_iter()
        .map(|c| {
            let geom = dg.mesh().geom(c);
            let mut out = vec![0.0; nd];
            for (q, (xr, w)) in rule.iter().enumerate() {
                let gw = w * geom.det * g(&geom.map(xr), t);
                for (o, p) in out.iter_mut().zip(tab.values(q)) {
                    *o += gw * p;
                }
            }
            out
        })
        .collect();
    Ok(locals.concat())
}
