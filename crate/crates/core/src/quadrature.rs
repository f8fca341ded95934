//! Quadrature on the reference simplex.
//!
//! Rules are collapsed (conical) products of Gauss-Legendre rules. Every
//! weight is positive and every point lies strictly inside the simplex, so the
//! same rules serve assembly and norm evaluation.

use crate::error::{Error, Result};
use crate::mesh::SimplicialMesh;
use crate::Point;

/// Highest exactness degree handed out by [`simplex_rule`].
pub const MAX_DEGREE: usize = 20;

/// Points and weights on the reference simplex `{x_i >= 0, sum x_i <= 1}`.
///
/// Weights sum to the simplex measure `1/dim!`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub dim: usize,
    pub degree: usize,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }

    /// Integral of `f` over the reference simplex.
    pub fn integrate(&self, f: impl Fn(&Point) -> f64) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Newton iteration on P_n starting from the Tricomi estimate.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, p_prev) = legendre_pair(n, x);
            let dp = nf * (x * p - p_prev) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (p, p_prev) = legendre_pair(n, x);
        let dp = nf * (x * p - p_prev) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // x is the i-th largest root on [-1, 1]; map to [0, 1].
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        nodes[i] = 0.5 * (1.0 - x);
        weights[n - 1 - i] = 0.5 * w;
        weights[i] = 0.5 * w;
    }
    (nodes, weights)
}

/// (P_n(x), P_{n-1}(x)) by the three-term recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}

/// A rule on the reference `dim`-simplex integrating every polynomial of total
/// degree `<= degree` exactly.
///
/// `dim` may be 1 (used for edge integrals), 2 or 3.
pub fn simplex_rule(dim: usize, degree: usize) -> Result<QuadratureRule> {
    if degree > MAX_DEGREE {
        return Err(Error::InvalidArgument(format!(
            "quadrature degree {degree} exceeds the supported maximum {MAX_DEGREE}"
        )));
    }
    // Collapsing direction j picks up a Jacobian factor of degree j.
    let points_for = |extra: usize| (degree + extra + 2) / 2;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match dim {
        1 => {
            let (x, w) = gauss_legendre(points_for(0));
            for (xi, wi) in x.into_iter().zip(w) {
                points.push(Point::new(xi, 0.0, 0.0));
                weights.push(wi);
            }
        }
        2 => {
            let (s, ws) = gauss_legendre(points_for(0));
            let (t, wt) = gauss_legendre(points_for(1));
            for (&tj, &wtj) in t.iter().zip(&wt) {
                for (&si, &wsi) in s.iter().zip(&ws) {
                    points.push(Point::new(si * (1.0 - tj), tj, 0.0));
                    weights.push(wsi * wtj * (1.0 - tj));
                }
            }
        }
        3 => {
            let (s, ws) = gauss_legendre(points_for(0));
            let (t, wt) = gauss_legendre(points_for(1));
            let (z, wz) = gauss_legendre(points_for(2));
            for (&zk, &wzk) in z.iter().zip(&wz) {
                for (&tj, &wtj) in t.iter().zip(&wt) {
                    for (&si, &wsi) in s.iter().zip(&ws) {
                        let scale = 1.0 - zk;
                        points.push(Point::new(
                            si * (1.0 - tj) * scale,
                            tj * scale,
                            zk,
                        ));
                        weights.push(wsi * wtj * wzk * (1.0 - tj) * scale * scale);
                    }
                }
            }
        }
        _ => {
            return Err(Error::InvalidArgument(format!(
                "simplex quadrature requires dimension 1, 2 or 3, got {dim}"
            )))
        }
    }
    Ok(QuadratureRule {
        dim,
        degree,
        points,
        weights,
    })
}

/// A quadrature point on a (d-1)-dimensional face embedded in R^d.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacePoint {
    pub x: Point,
    /// Barycentric coordinates with respect to the face vertices as given.
    pub bary: [f64; 3],
    /// Weight including the face measure.
    pub weight: f64,
}

/// Push a rule on the reference (d-1)-simplex onto the face with the given
/// vertices. The weights sum to the face measure.
pub fn map_to_face(rule: &QuadratureRule, vertices: &[Point]) -> Vec<FacePoint> {
    debug_assert_eq!(rule.dim + 1, vertices.len());
    let measure = crate::mesh::simplex_measure(vertices);
    let reference_measure: f64 = rule.weights.iter().sum();
    rule.iter()
        .map(|(s, w)| {
            let mut bary = [0.0; 3];
            bary[0] = 1.0 - (0..rule.dim).map(|c| s[c]).sum::<f64>();
            for m in 1..vertices.len() {
                bary[m] = s[m - 1];
            }
            let x = vertices
                .iter()
                .zip(&bary)
                .map(|(v, &l)| v * l)
                .sum::<Point>();
            FacePoint {
                x,
                bary,
                weight: w * measure / reference_measure,
            }
        })
        .collect()
}

/// Integral of `f` over one mesh cell, `f` taking physical coordinates.
pub fn integrate_on_cell(
    mesh: &SimplicialMesh,
    cell: usize,
    f: impl Fn(&Point) -> f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    if rule.dim != mesh.dim() {
        return Err(Error::InvalidArgument(format!(
            "{}D rule used on a {}D mesh",
            rule.dim,
            mesh.dim()
        )));
    }
    if cell >= mesh.n_cells() {
        return Err(Error::InvalidArgument(format!("cell {cell} out of range")));
    }
    let geom = mesh.cell_geometry(cell)?;
    Ok(geom.det * rule.integrate(|xr| f(&geom.map(xr))))
}
