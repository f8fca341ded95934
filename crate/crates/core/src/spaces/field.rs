use crate::error::{Error, Result};
use crate::Point;

use super::{DgSpace, RtSpace};

/// Anything with a global coefficient vector.
pub trait FunctionSpace {
    fn n_dofs(&self) -> usize;
}

impl FunctionSpace for RtSpace {
    fn n_dofs(&self) -> usize {
        RtSpace::n_dofs(self)
    }
}

impl FunctionSpace for DgSpace {
    fn n_dofs(&self) -> usize {
        DgSpace::n_dofs(self)
    }
}

/// Coefficients over a space, optionally tagged with the time they belong to.
#[derive(Debug, Clone)]
pub struct DiscreteField<'a, S> {
    pub space: &'a S,
    pub coeffs: Vec<f64>,
    pub time: Option<f64>,
}

pub type RtField<'a> = DiscreteField<'a, RtSpace>;
pub type DgField<'a> = DiscreteField<'a, DgSpace>;

impl<'a, S: FunctionSpace> DiscreteField<'a, S> {
    pub fn new(space: &'a S, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.n_dofs() {
            return Err(Error::InvalidArgument(format!(
                "coefficient vector has length {}, space has {} dofs",
                coeffs.len(),
                space.n_dofs()
            )));
        }
        Ok(Self {
            space,
            coeffs,
            time: None,
        })
    }

    pub fn zeros(space: &'a S) -> Self {
        Self {
            space,
            coeffs: vec![0.0; space.n_dofs()],
            time: None,
        }
    }

    pub fn at_time(mut self, t: f64) -> Self {
        self.time = Some(t);
        self
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            space: self.space,
            coeffs: self.coeffs.iter().map(|c| alpha * c).collect(),
            time: self.time,
        }
    }
}

impl RtField<'_> {
    /// Coefficients of the local (unsigned) basis on cell `c`.
    pub fn local_coeffs(&self, c: usize) -> Vec<f64> {
        let (dofs, signs) = self.space.cell_dofs(c);
        dofs.iter().zip(signs).map(|(&g, s)| s * self.coeffs[g]).collect()
    }

    /// Value at reference point `x` of cell `c`.
    pub fn evaluate(&self, c: usize, x: &Point) -> Point {
        self.evaluate_with_div(c, x).0
    }

    /// Value and divergence at reference point `x` of cell `c`.
    pub fn evaluate_with_div(&self, c: usize, x: &Point) -> (Point, f64) {
        let reference = self.space.reference(c);
        let n = reference.len();
        let mut vals = vec![Point::zeros(); n];
        let mut divs = vec![0.0; n];
        reference.eval(x, &mut vals, &mut divs);
        let local = self.local_coeffs(c);
        let mut v = Point::zeros();
        let mut div = 0.0;
        for k in 0..n {
            v += local[k] * vals[k];
            div += local[k] * divs[k];
        }
        let geom = self.space.mesh().geom(c);
        (geom.piola(&v), div / geom.det)
    }
}

impl DgField<'_> {
    pub fn local_coeffs(&self, c: usize) -> &[f64] {
        &self.coeffs[self.space.cell_dofs(c)]
    }

    /// Value at reference point `x` of cell `c`.
    pub fn evaluate(&self, c: usize, x: &Point) -> f64 {
        let mut vals = vec![0.0; self.space.local_dim()];
        self.space.eval(x, &mut vals);
        vals.iter().zip(self.local_coeffs(c)).map(|(v, a)| v * a).sum()
    }

    /// Physical gradient at reference point `x` of cell `c`.
    pub fn gradient(&self, c: usize, x: &Point) -> Point {
        let mut grads = vec![Point::zeros(); self.space.local_dim()];
        self.space.eval_grad(x, &mut grads);
        let g: Point = grads
            .iter()
            .zip(self.local_coeffs(c))
            .map(|(g, a)| g * *a)
            .sum();
        self.space.mesh().geom(c).grad(&g)
    }
}
