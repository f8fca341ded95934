//! Exact solutions and the built-in test problems.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::assembly::{CubicTerm, NonlinearitySpec};
use crate::Point;

/// A smooth solution with its derivatives, used for manufactured sources,
/// initial data and error measurement. It must vanish on the boundary.
pub trait ExactSolution: Send + Sync {
    fn u(&self, x: &Point, t: f64) -> f64;
    fn grad_u(&self, x: &Point, t: f64) -> Point;
    fn laplace_u(&self, x: &Point, t: f64) -> f64;
    fn u_t(&self, x: &Point, t: f64) -> f64;
}

/// A pointwise source `g(x, t)`.
pub type SourceFn = Arc<dyn Fn(&Point, f64) -> f64 + Send + Sync>;

/// `u = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroSolution;

impl ExactSolution for ZeroSolution {
    fn u(&self, _: &Point, _: f64) -> f64 {
        0.0
    }
    fn grad_u(&self, _: &Point, _: f64) -> Point {
        Point::zeros()
    }
    fn laplace_u(&self, _: &Point, _: f64) -> f64 {
        0.0
    }
    fn u_t(&self, _: &Point, _: f64) -> f64 {
        0.0
    }
}

/// `u = e^t x y (1 - x)(1 - y)` on the unit square.
#[derive(Debug, Clone, Copy, Default)]
pub struct SquareSolution;

impl ExactSolution for SquareSolution {
    fn u(&self, x: &Point, t: f64) -> f64 {
        t.exp() * x.x * x.y * (1.0 - x.x) * (1.0 - x.y)
    }

    fn grad_u(&self, x: &Point, t: f64) -> Point {
        let e = t.exp();
        Point::new(
            e * x.y * (1.0 - x.y) * (1.0 - 2.0 * x.x),
            e * x.x * (1.0 - x.x) * (1.0 - 2.0 * x.y),
            0.0,
        )
    }

    fn laplace_u(&self, x: &Point, t: f64) -> f64 {
        -2.0 * t.exp() * (x.y * (1.0 - x.y) + x.x * (1.0 - x.x))
    }

    fn u_t(&self, x: &Point, t: f64) -> f64 {
        self.u(x, t)
    }
}

/// `u = e^{-t} sin(pi x) sin(2 pi y) z (1 - z)` on the unit cube.
#[derive(Debug, Clone, Copy, Default)]
pub struct CubeSolution;

impl ExactSolution for CubeSolution {
    fn u(&self, x: &Point, t: f64) -> f64 {
        (-t).exp() * (PI * x.x).sin() * (2.0 * PI * x.y).sin() * x.z * (1.0 - x.z)
    }

    fn grad_u(&self, x: &Point, t: f64) -> Point {
        let e = (-t).exp();
        let (sx, cx) = (PI * x.x).sin_cos();
        let (sy, cy) = (2.0 * PI * x.y).sin_cos();
        let q = x.z * (1.0 - x.z);
        Point::new(
            e * PI * cx * sy * q,
            e * 2.0 * PI * sx * cy * q,
            e * sx * sy * (1.0 - 2.0 * x.z),
        )
    }

    fn laplace_u(&self, x: &Point, t: f64) -> f64 {
        let q = x.z * (1.0 - x.z);
        (-t).exp() * (PI * x.x).sin() * (2.0 * PI * x.y).sin() * (-5.0 * PI * PI * q - 2.0)
    }

    fn u_t(&self, x: &Point, t: f64) -> f64 {
        -self.u(x, t)
    }
}

/// Source making `exact` solve `u_t - Δu + f(u, grad u) = g`.
pub fn manufactured_source(exact: Arc<dyn ExactSolution>, spec: NonlinearitySpec) -> SourceFn {
    Arc::new(move |x: &Point, t: f64| {
        exact.u_t(x, t) - exact.laplace_u(x, t) + spec.eval(exact.u(x, t), &exact.grad_u(x, t))
    })
}

/// Equation data on the unit square (`dim = 2`) or cube (`dim = 3`).
#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub dim: usize,
    pub nonlinearity: NonlinearitySpec,
    /// Explicit source. When absent, the source is manufactured from
    /// `exact`, or zero if there is no exact solution either.
    pub source: Option<SourceFn>,
    pub exact: Option<Arc<dyn ExactSolution>>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("nonlinearity", &self.nonlinearity)
            .field("source", &self.source.is_some())
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

impl Problem {
    /// Cubic reaction `u^3` on the unit square with a polynomial-in-space
    /// solution growing like `e^t`.
    pub fn allen_cahn_2d() -> Self {
        Self {
            name: "allen_cahn_2d".into(),
            dim: 2,
            nonlinearity: NonlinearitySpec {
                advection: None,
                cubic: Some(CubicTerm::Pure),
            },
            source: None,
            exact: Some(Arc::new(SquareSolution)),
        }
    }

    /// Advection `(b . grad u) u` with `b = (1, 1, 1)` plus `u^3 - u` on the
    /// unit cube.
    pub fn combined_3d() -> Self {
        Self {
            name: "combined_3d".into(),
            dim: 3,
            nonlinearity: NonlinearitySpec {
                advection: Some(Point::new(1.0, 1.0, 1.0)),
                cubic: Some(CubicTerm::AllenCahn),
            },
            source: None,
            exact: Some(Arc::new(CubeSolution)),
        }
    }

    /// Zero initial data driven by a constant source, with no exact solution.
    pub fn custom(dim: usize, nonlinearity: NonlinearitySpec, source_value: f64) -> Self {
        Self {
            name: "custom".into(),
            dim,
            nonlinearity,
            source: Some(Arc::new(move |_: &Point, _: f64| source_value)),
            exact: None,
        }
    }

    /// The linear heat equation with the given solution.
    pub fn heat(dim: usize, exact: Arc<dyn ExactSolution>) -> Self {
        Self {
            name: "heat".into(),
            dim,
            nonlinearity: NonlinearitySpec::none(),
            source: None,
            exact: Some(exact),
        }
    }

    /// The source actually driving the equation.
    pub fn effective_source(&self) -> Option<SourceFn> {
        match (&self.source, &self.exact) {
            (Some(g), _) => Some(g.clone()),
            (None, Some(exact)) => Some(manufactured_source(exact.clone(), self.nonlinearity)),
            (None, None) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const H: f64 = 1e-5;

    fn close(a: f64, b: f64, scale: f64) -> bool {
        (a - b).abs() <= 1e-6 * scale.max(1.0)
    }

    fn check_derivatives(exact: &dyn ExactSolution, dim: usize, points: &[Point]) {
        for &x in points {
            for t in [0.0, 0.37, 1.0] {
                let g = exact.grad_u(&x, t);
                let mut lap = 0.0;
                for c in 0..dim {
                    let mut xp = x;
                    let mut xm = x;
                    xp[c] += H;
                    xm[c] -= H;
                    let up = exact.u(&xp, t);
                    let um = exact.u(&xm, t);
                    let fd = (up - um) / (2.0 * H);
                    assert!(close(fd, g[c], g.norm()), "grad {c} at {x:?}: {fd} vs {}", g[c]);
                    let gp = exact.grad_u(&xp, t)[c];
                    let gm = exact.grad_u(&xm, t)[c];
                    lap += (gp - gm) / (2.0 * H);
                }
                let l = exact.laplace_u(&x, t);
                assert!(close(lap, l, l.abs()), "laplacian at {x:?}: {lap} vs {l}");
                let fd_t = (exact.u(&x, t + H) - exact.u(&x, t - H)) / (2.0 * H);
                let ut = exact.u_t(&x, t);
                assert!(close(fd_t, ut, ut.abs()));
            }
        }
    }

    #[test]
    fn square_solution_derivatives() {
        let pts = [Point::new(0.3, 0.7, 0.0), Point::new(0.9, 0.15, 0.0), Point::new(0.5, 0.5, 0.0)];
        check_derivatives(&SquareSolution, 2, &pts);
    }

    #[test]
    fn cube_solution_derivatives() {
        let pts = [
            Point::new(0.3, 0.7, 0.2),
            Point::new(0.9, 0.15, 0.6),
            Point::new(0.5, 0.1, 0.45),
        ];
        check_derivatives(&CubeSolution, 3, &pts);
    }

    #[test]
    fn solutions_vanish_on_the_boundary() {
        for s in [0.0, 0.3, 1.0] {
            for p in [Point::new(0.0, s, 0.0), Point::new(1.0, s, 0.0), Point::new(s, 0.0, 0.0), Point::new(s, 1.0, 0.0)] {
                assert_eq!(SquareSolution.u(&p, 0.5), 0.0);
            }
            for p in [Point::new(0.4, s, 0.0), Point::new(0.4, s, 1.0), Point::new(0.0, s, 0.3)] {
                assert!(CubeSolution.u(&p, 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn manufactured_source_balances_the_equation() {
        let problem = Problem::combined_3d();
        let g = problem.effective_source().unwrap();
        let x = Point::new(0.2, 0.3, 0.4);
        let t = 0.5;
        let e = CubeSolution;
        let u = e.u(&x, t);
        let grad = e.grad_u(&x, t);
        let expected = -u - e.laplace_u(&x, t) + grad.sum() * u + u * u * u - u;
        assert!((g(&x, t) - expected).abs() < 1e-14);

        let square = Problem::allen_cahn_2d().effective_source().unwrap();
        let x = Point::new(0.25, 0.5, 0.0);
        let u = SquareSolution.u(&x, 1.0);
        let expected = u - SquareSolution.laplace_u(&x, 1.0) + u * u * u;
        assert!((square(&x, 1.0) - expected).abs() < 1e-15);
    }

    #[test]
    fn custom_problem_uses_its_own_source() {
        let p = Problem::custom(2, NonlinearitySpec::none(), 2.5);
        assert_eq!(p.effective_source().unwrap()(&Point::zeros(), 0.0), 2.5);
        assert!(p.exact.is_none());
    }
}
