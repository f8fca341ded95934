//! Error norms, the broken `H^1` (DG) norm, `L^p` norms, embedding ratios and
//! convergence orders.
//!
//! Every norm is a reduction over cells. Cell contributions are computed in
//! parallel, collected in cell order and summed sequentially, so results are
//! reproducible bit for bit.

use rayon::prelude::*;

use crate::assembly::error_norm_degree;
use crate::error::{Error, Result};
use crate::local_projection::{project_cellwise, LocalProjectionData};
use crate::mesh::SimplicialMesh;
use crate::quadrature::{map_to_face, simplex_rule};
use crate::spaces::{DgField, RtField};
use crate::timestepper::{RunConfig, Simulation};
use crate::Point;

/// Exponents accepted by [`lp_norm`].
pub const SUPPORTED_P: [u32; 4] = [2, 3, 4, 6];

/// Relative slack used when checking the chain inequality.
pub const CHAIN_SLACK: f64 = 1e-9;

fn ordered_sum(parts: Vec<f64>) -> f64 {
    parts.into_iter().sum()
}

/// `||u_h - u||_{L^2}` at quadrature degree `2r + 6`.
pub fn l2_error_scalar<F>(u_h: &DgField, exact: F) -> f64
where
    F: Fn(&Point) -> f64 + Sync,
{
    let dg = u_h.space;
    let rule = simplex_rule(dg.dim(), error_norm_degree(dg.degree())).expect("degree within range");
    let tab = dg.tabulate(&rule);
    let mesh = dg.mesh();
    let parts = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let geom = mesh.geom(c);
            let coeffs = u_h.local_coeffs(c);
            rule.iter()
                .enumerate()
                .map(|(q, (xr, w))| {
                    let uh: f64 = tab.values(q).iter().zip(coeffs).map(|(p, a)| p * a).sum();
                    w * geom.det * (uh - exact(&geom.map(xr))).powi(2)
                })
                .sum::<f64>()
        })
        .collect();
    ordered_sum(parts).sqrt()
}

/// `||sigma_h - sigma||_{L^2}` at quadrature degree `2r + 6`.
pub fn l2_error_flux<F>(sigma_h: &RtField, exact: F) -> f64
where
    F: Fn(&Point) -> Point + Sync,
{
    let rt = sigma_h.space;
    let rule = simplex_rule(rt.dim(), error_norm_degree(rt.degree())).expect("degree within range");
    let tabs = rt.tabulate(&rule);
    let mesh = rt.mesh();
    let parts = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let geom = mesh.geom(c);
            let coeffs = sigma_h.local_coeffs(c);
            let tab = &tabs[rt.reference_index(c)];
            rule.iter()
                .enumerate()
                .map(|(q, (xr, w))| {
                    let v: Point = tab.values(q).iter().zip(&coeffs).map(|(v, a)| v * *a).sum();
                    w * geom.det * (geom.piola(&v) - exact(&geom.map(xr))).norm_squared()
                })
                .sum::<f64>()
        })
        .collect();
    ordered_sum(parts).sqrt()
}

pub fn l2_norm_flux(sigma_h: &RtField) -> f64 {
    l2_error_flux(sigma_h, |_| Point::zeros())
}

/// `(sigma_h, chi_h)` for two fields on the same space.
pub fn flux_inner(sigma_h: &RtField, chi_h: &RtField) -> f64 {
    let rt = sigma_h.space;
    let rule = simplex_rule(rt.dim(), 2 * rt.degree() + 2).expect("degree within range");
    let tabs = rt.tabulate(&rule);
    let mesh = rt.mesh();
    let parts = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let geom = mesh.geom(c);
            let a = sigma_h.local_coeffs(c);
            let b = chi_h.local_coeffs(c);
            let tab = &tabs[rt.reference_index(c)];
            (0..rule.len())
                .map(|q| {
                    let vals = tab.values(q);
                    let va: Point = vals.iter().zip(&a).map(|(v, s)| v * *s).sum();
                    let vb: Point = vals.iter().zip(&b).map(|(v, s)| v * *s).sum();
                    rule.weights[q] * geom.det * geom.piola(&va).dot(&geom.piola(&vb))
                })
                .sum::<f64>()
        })
        .collect();
    ordered_sum(parts)
}

/// Value of `u_h` restricted to cell `c` at physical point `x`.
fn value_at(u_h: &DgField, c: usize, x: &Point) -> f64 {
    let xr = u_h.space.mesh().geom(c).pullback(x);
    u_h.evaluate(c, &xr)
}

/// `[[u_h]]` on face `f` at physical point `x`: the trace from the
/// lower-indexed cell minus the trace from the higher-indexed one, or the
/// one-sided trace on the boundary.
pub fn jump(u_h: &DgField, f: usize, x: &Point) -> f64 {
    let face = u_h.space.mesh().face(f);
    let inner = value_at(u_h, face.cells[0], x);
    match face.cells.get(1) {
        Some(&other) => inner - value_at(u_h, other, x),
        None => inner,
    }
}

/// Face points (physical) and weights of a rule of the given degree.
fn face_points(mesh: &SimplicialMesh, f: usize, degree: usize) -> Vec<(Point, f64)> {
    let rule = simplex_rule(mesh.dim() - 1, degree).expect("degree within range");
    let face = mesh.face(f);
    let verts: Vec<Point> = face.vertices.iter().map(|&v| mesh.vertices()[v]).collect();
    map_to_face(&rule, &verts).into_iter().map(|p| (p.x, p.weight)).collect()
}

/// The two parts of `||u_h||_DG^2`: broken gradient energy and the scaled
/// jump penalty `sum_F (1/h_F) ||[[u_h]]||^2_F`.
pub fn dg_norm_parts(u_h: &DgField) -> (f64, f64) {
    let dg = u_h.space;
    let mesh = dg.mesh();
    let r = dg.degree();
    let grad_energy = if r == 0 {
        0.0
    } else {
        let rule = simplex_rule(dg.dim(), 2 * r).expect("degree within range");
        let parts = (0..mesh.n_cells())
            .into_par_iter()
            .map(|c| {
                let geom = mesh.geom(c);
                rule.iter()
                    .map(|(xr, w)| w * geom.det * u_h.gradient(c, xr).norm_squared())
                    .sum::<f64>()
            })
            .collect();
        ordered_sum(parts)
    };
    let face_degree = 2 * r + 2;
    let parts = (0..mesh.n_faces())
        .into_par_iter()
        .map(|f| {
            let h = mesh.face(f).diameter;
            face_points(mesh, f, face_degree)
                .iter()
                .map(|(x, w)| w * jump(u_h, f, x).powi(2))
                .sum::<f64>()
                / h
        })
        .collect();
    (grad_energy, ordered_sum(parts))
}

/// `||u_h||_DG`.
pub fn dg_norm(u_h: &DgField) -> f64 {
    let (a, b) = dg_norm_parts(u_h);
    (a + b).sqrt()
}

/// `||u_h||_{L^p}` for `p` in [`SUPPORTED_P`], at quadrature degree `p r + 4`.
pub fn lp_norm(u_h: &DgField, p: u32) -> Result<f64> {
    if !SUPPORTED_P.contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "L^p norm supports p in {SUPPORTED_P:?}, got {p}"
        )));
    }
    let dg = u_h.space;
    let rule = simplex_rule(dg.dim(), p as usize * dg.degree() + 4)?;
    let tab = dg.tabulate(&rule);
    let mesh = dg.mesh();
    let parts = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let geom = mesh.geom(c);
            let coeffs = u_h.local_coeffs(c);
            (0..rule.len())
                .map(|q| {
                    let uh: f64 = tab.values(q).iter().zip(coeffs).map(|(p, a)| p * a).sum();
                    rule.weights[q] * geom.det * uh.abs().powi(p as i32)
                })
                .sum::<f64>()
        })
        .collect();
    Ok(ordered_sum(parts).powf(1.0 / p as f64))
}

/// `a / b`, or `None` when the ratio is undefined.
pub fn ratio(a: f64, b: f64) -> Option<f64> {
    (b > 0.0 && a.is_finite() && b.is_finite()).then(|| a / b)
}

/// Outcome of the check `||u_h||_DG^2 <= (sigma_h, chi_h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainCheck {
    pub dg_norm_sq: f64,
    /// `(sigma_h, chi_h)`.
    pub pairing: f64,
    /// `||chi_h||_{L^2}`, which should be bounded by a multiple of
    /// `||u_h||_DG`.
    pub chi_norm: f64,
}

impl ChainCheck {
    pub fn holds(&self) -> bool {
        self.dg_norm_sq <= self.pairing + CHAIN_SLACK * self.pairing.abs().max(1.0)
    }
}

/// Coefficients of the RT field built cell by cell from `grad u_h` and the
/// face data `-[[u_h]] / h_F`.
pub fn chain_witness(u_h: &DgField, rt: &crate::spaces::RtSpace) -> Result<Vec<f64>> {
    let mesh = rt.mesh();
    project_cellwise(rt, |c| {
        let faces = mesh
            .cell_faces(c)
            .iter()
            .map(|cf| {
                let f = cf.face;
                let h = mesh.face(f).diameter;
                Box::new(move |x: &Point| -jump(u_h, f, x) / h) as Box<dyn Fn(&Point) -> f64 + Sync>
            })
            .collect();
        LocalProjectionData::new(
            move |x: &Point| {
                let xr = mesh.geom(c).pullback(x);
                u_h.gradient(c, &xr)
            },
            faces,
        )
    })
}

/// Build `chi_h` from `u_h` and compare `||u_h||_DG^2` with `(sigma_h, chi_h)`.
/// Equality holds up to the residual of the first mixed equation.
pub fn chain_inequality(sigma_h: &RtField, u_h: &DgField) -> Result<ChainCheck> {
    let chi = RtField::new(sigma_h.space, chain_witness(u_h, sigma_h.space)?)?;
    let (a, b) = dg_norm_parts(u_h);
    Ok(ChainCheck {
        dg_norm_sq: a + b,
        pairing: flux_inner(sigma_h, &chi),
        chi_norm: l2_norm_flux(&chi),
    })
}

/// One row of a study: errors, norms and embedding ratios of a final state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StudyRecord {
    pub label: String,
    pub m: usize,
    pub r: usize,
    pub tau: f64,
    pub err_u_l2: Option<f64>,
    pub err_sigma_l2: Option<f64>,
    /// `(tau sum_n ||sigma(t_n) - sigma_h^n||^2)^{1/2}`, when per-step history
    /// was recorded.
    pub err_sigma_accumulated: Option<f64>,
    pub dg_norm: f64,
    pub flux_norm: f64,
    pub lp_norms: Vec<(u32, f64)>,
    /// `||u_h||_{L^p} / ||sigma_h||_{L^2}`.
    pub embed_ratios: Vec<(u32, Option<f64>)>,
    /// `||u_h||_{L^p} / ||u_h||_DG`.
    pub lp_dg_ratios: Vec<(u32, Option<f64>)>,
    /// `||u_h||_DG / ||sigma_h||_{L^2}`.
    pub dg_flux_ratio: Option<f64>,
    pub chain: Option<ChainCheck>,
    /// Largest `|(sigma_h, chi) + (u_h, div chi)|` over basis functions.
    pub first_equation_residual: Option<f64>,
    pub wall_time: Option<f64>,
}

impl StudyRecord {
    pub fn embed_ratio(&self, p: u32) -> Option<f64> {
        self.embed_ratios.iter().find(|(q, _)| *q == p).and_then(|(_, r)| *r)
    }

    pub fn lp_norm(&self, p: u32) -> Option<f64> {
        self.lp_norms.iter().find(|(q, _)| *q == p).map(|(_, v)| *v)
    }
}

/// Fill the norm and ratio columns of `record` from a discrete pair.
pub fn fill_norms(record: &mut StudyRecord, sigma_h: &RtField, u_h: &DgField, p_list: &[u32]) -> Result<()> {
    record.dg_norm = dg_norm(u_h);
    record.flux_norm = l2_norm_flux(sigma_h);
    record.lp_norms = p_list
        .iter()
        .map(|&p| lp_norm(u_h, p).map(|v| (p, v)))
        .collect::<Result<_>>()?;
    record.embed_ratios = record.lp_norms.iter().map(|&(p, v)| (p, ratio(v, record.flux_norm))).collect();
    record.lp_dg_ratios = record.lp_norms.iter().map(|&(p, v)| (p, ratio(v, record.dg_norm))).collect();
    record.dg_flux_ratio = ratio(record.dg_norm, record.flux_norm);
    Ok(())
}

/// Records ordered by `M` with observed convergence orders.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub records: Vec<StudyRecord>,
    /// `log2(e_prev / e)` against the previous record; `None` on the first.
    pub orders_u: Vec<Option<f64>>,
    pub orders_sigma: Vec<Option<f64>>,
    /// Least-squares slope of `-log e` against `log M` over all records.
    pub fitted_u: Option<f64>,
    pub fitted_sigma: Option<f64>,
}

impl ConvergenceReport {
    /// The order between the two finest levels.
    pub fn finest_u(&self) -> Option<f64> {
        self.orders_u.last().copied().flatten()
    }

    pub fn finest_sigma(&self) -> Option<f64> {
        self.orders_sigma.last().copied().flatten()
    }
}

/// `log2(e_coarse / e_fine)`.
pub fn pairwise_order(e_coarse: f64, e_fine: f64) -> Option<f64> {
    (e_coarse > 0.0 && e_fine > 0.0).then(|| (e_coarse / e_fine).log2())
}

/// Least-squares slope of `-log e` against `log h` for `h = 1/M`.
pub fn fitted_order(ms: &[usize], errors: &[f64]) -> Option<f64> {
    if ms.len() < 2 || ms.len() != errors.len() || errors.iter().any(|&e| !(e > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = ms.iter().map(|&m| (m as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Some(-sxy / sxx)
}

fn column_orders(records: &[StudyRecord], pick: impl Fn(&StudyRecord) -> Option<f64>) -> (Vec<Option<f64>>, Option<f64>) {
    let mut orders = vec![None];
    for w in records.windows(2) {
        let ok = w[1].m == 2 * w[0].m;
        orders.push(match (pick(&w[0]), pick(&w[1])) {
            (Some(a), Some(b)) if ok => pairwise_order(a, b),
            _ => None,
        });
    }
    let errors: Option<Vec<f64>> = records.iter().map(&pick).collect();
    let ms: Vec<usize> = records.iter().map(|r| r.m).collect();
    (orders, errors.and_then(|e| fitted_order(&ms, &e)))
}

/// Orders for a refinement sequence in which every `M` doubles the previous.
pub fn convergence_orders(records: Vec<StudyRecord>) -> Result<ConvergenceReport> {
    if records.len() < 2 {
        return Err(Error::InvalidArgument(
            "convergence orders need at least two refinement levels".into(),
        ));
    }
    if let Some(w) = records.windows(2).find(|w| w[1].m != 2 * w[0].m) {
        return Err(Error::InvalidArgument(format!(
            "M sequence must double at every level, found {} followed by {}",
            w[0].m, w[1].m
        )));
    }
    Ok(report_without_checks(records))
}

/// Like [`convergence_orders`] but accepts any sequence; orders are only
/// filled in between consecutive doublings.
pub fn report_without_checks(records: Vec<StudyRecord>) -> ConvergenceReport {
    let (orders_u, fitted_u) = column_orders(&records, |r| r.err_u_l2);
    let (orders_sigma, fitted_sigma) = column_orders(&records, |r| r.err_sigma_l2);
    let doubling = records.windows(2).all(|w| w[1].m == 2 * w[0].m);
    ConvergenceReport {
        records,
        orders_u,
        orders_sigma,
        fitted_u: fitted_u.filter(|_| doubling),
        fitted_sigma: fitted_sigma.filter(|_| doubling),
    }
}

/// Largest first-equation residual accepted as satisfying the hypothesis of
/// the embedding inequality.
pub const FIRST_EQUATION_TOLERANCE: f64 = 1e-9;

/// Run one configuration and fill every norm and ratio of its final state.
/// With `with_chain`, the chain inequality is evaluated as well.
pub fn study_record(config: RunConfig, p_list: &[u32], with_chain: bool) -> Result<StudyRecord> {
    let sim = Simulation::new(config)?;
    let out = sim.run()?;
    let mut record = out.record;
    let sigma = sim.sigma_field(&out.state);
    let u = sim.u_field(&out.state);
    fill_norms(&mut record, &sigma, &u, p_list)?;
    if with_chain {
        record.chain = Some(chain_inequality(&sigma, &u)?);
    }
    Ok(record)
}

/// Run one configuration for the embedding study: norms, ratios and the chain
/// inequality, after checking that the final state satisfies the first mixed
/// equation to [`FIRST_EQUATION_TOLERANCE`].
pub fn embedding_record(mut config: RunConfig, p_list: &[u32]) -> Result<StudyRecord> {
    config.check_first_equation = true;
    let record = study_record(config, p_list, true)?;
    let residual = record.first_equation_residual.unwrap_or(0.0);
    if !(residual < FIRST_EQUATION_TOLERANCE) {
        return Err(Error::Residual {
            residual,
            tolerance: FIRST_EQUATION_TOLERANCE,
        });
    }
    Ok(record)
}

/// Norms, chained ratios and the chain inequality across a refinement
/// sequence.
pub fn embedding_study(configs: Vec<RunConfig>, p_list: &[u32]) -> Result<ConvergenceReport> {
    let records = configs
        .into_iter()
        .map(|c| embedding_record(c, p_list))
        .collect::<Result<Vec<_>>>()?;
    Ok(report_without_checks(records))
}
