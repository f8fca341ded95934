//! Moment conditions and stability of the element-local RT projection,
//! checked against independent monomial test functions in physical
//! coordinates.

use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtmixed::local_projection::{LocalProjectionData, LocalProjector};
use rtmixed::mesh::{build_unit_cube_mesh, build_unit_square_mesh, SimplicialMesh};
use rtmixed::poly::Monomials;
use rtmixed::quadrature::{map_to_face, simplex_rule};
use rtmixed::spaces::RtSpace;
use rtmixed::Point;

const SUPPORTED: [(usize, usize); 5] = [(2, 0), (2, 1), (2, 2), (3, 0), (3, 1)];

/// A random polynomial of total degree `degree` in `dim` variables.
#[derive(Clone, Debug)]
struct RandomPoly {
    monomials: Monomials,
    coeffs: Vec<f64>,
}

impl RandomPoly {
    fn new(rng: &mut ChaCha8Rng, dim: usize, degree: usize) -> Self {
        let monomials = Monomials::new(dim, degree);
        let coeffs = (0..monomials.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Self { monomials, coeffs }
    }

    fn eval(&self, x: &Point) -> f64 {
        let mut v = vec![0.0; self.monomials.len()];
        self.monomials.eval(x, &mut v);
        v.iter().zip(&self.coeffs).map(|(a, b)| a * b).sum()
    }
}

fn mesh(d: usize, m: usize) -> Arc<SimplicialMesh> {
    Arc::new(if d == 2 {
        build_unit_square_mesh(m).unwrap()
    } else {
        build_unit_cube_mesh(m).unwrap()
    })
}

struct Data {
    p: Vec<RandomPoly>,
    q: Vec<RandomPoly>,
}

impl Data {
    fn random(rng: &mut ChaCha8Rng, d: usize, degree: usize) -> Self {
        Self {
            p: (0..d).map(|_| RandomPoly::new(rng, d, degree)).collect(),
            q: (0..=d).map(|_| RandomPoly::new(rng, d, degree)).collect(),
        }
    }

    fn as_projection_data(&self, d: usize) -> LocalProjectionData<'_> {
        let faces = self
            .q
            .iter()
            .map(|q| Box::new(move |x: &Point| q.eval(x)) as Box<dyn Fn(&Point) -> f64 + Sync>)
            .collect();
        LocalProjectionData::new(
            move |x: &Point| {
                let mut v = Point::zeros();
                for c in 0..d {
                    v[c] = self.p[c].eval(x);
                }
                v
            },
            faces,
        )
    }
}

/// Largest moment residual of the projection on cell `c`, relative to the
/// size of the data moments.
fn moment_residual(rt: &RtSpace, c: usize, data: &Data, local: &[f64]) -> f64 {
    let mesh = rt.mesh();
    let d = mesh.dim();
    let r = rt.degree();
    let geom = mesh.cell_geometry(c).unwrap();
    let reference = rt.reference(c);
    let zeta = |x: &Point| -> Point {
        let xr = geom.pullback(x);
        (0..local.len()).map(|k| reference.eval_physical(geom, k, &xr) * local[k]).sum()
    };
    let centroid = mesh.cell_centroid(c);
    let mut worst: f64 = 0.0;

    let face_rule = simplex_rule(d - 1, 2 * r + 6).unwrap();
    let face_tests = Monomials::new(d, r);
    for (i, cf) in mesh.cell_faces(c).iter().enumerate() {
        let n = mesh.face(cf.face).normal;
        let mut res = vec![0.0; face_tests.len()];
        let mut scale = vec![0.0; face_tests.len()];
        let mut m = vec![0.0; face_tests.len()];
        for fp in map_to_face(&face_rule, &mesh.local_face_points(c, i)) {
            face_tests.eval(&(fp.x - centroid), &mut m);
            let q = data.q[i].eval(&fp.x);
            for a in 0..m.len() {
                res[a] += fp.weight * (zeta(&fp.x).dot(&n) - q) * m[a];
                scale[a] += fp.weight * (q * m[a]).abs();
            }
        }
        for (r, s) in res.iter().zip(&scale) {
            worst = worst.max(r.abs() / s.max(1e-300).max(1e-3));
        }
    }

    if r > 0 {
        let rule = simplex_rule(d, 2 * r + 6).unwrap();
        let tests = Monomials::new(d, r - 1);
        let mut m = vec![0.0; tests.len()];
        for comp in 0..d {
            let mut res = vec![0.0; tests.len()];
            let mut scale = vec![0.0; tests.len()];
            for (xr, w) in rule.iter() {
                let x = geom.map(xr);
                tests.eval(&(x - centroid), &mut m);
                let p = data.p[comp].eval(&x);
                let z = zeta(&x)[comp];
                for a in 0..m.len() {
                    res[a] += w * geom.det * (z - p) * m[a];
                    scale[a] += w * geom.det * (p * m[a]).abs();
                }
            }
            for (r, s) in res.iter().zip(&scale) {
                worst = worst.max(r.abs() / s.max(1e-3));
            }
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn moments_are_matched_for_random_polynomial_data(seed in any::<u64>(), which in 0usize..5, m in 1usize..4) {
        let (d, r) = SUPPORTED[which];
        let mesh = mesh(d, m);
        let rt = RtSpace::new(mesh.clone(), r).unwrap();
        let projector = LocalProjector::new(&rt).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = rng.gen_range(0..mesh.n_cells());
        let data = Data::random(&mut rng, d, r + 1);
        let local = projector.project(c, &data.as_projection_data(d)).unwrap();
        let residual = moment_residual(&rt, c, &data, &local);
        prop_assert!(residual < 1e-11, "(d, r) = ({d}, {r}), residual {residual:e}");
    }

    #[test]
    fn stability_ratio_is_positive_and_finite(seed in any::<u64>(), which in 0usize..5) {
        let (d, r) = SUPPORTED[which];
        let mesh = mesh(d, 2);
        let rt = RtSpace::new(mesh.clone(), r).unwrap();
        let projector = LocalProjector::new(&rt).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = rng.gen_range(0..mesh.n_cells());
        let data = Data::random(&mut rng, d, r + 1);
        let ratio = projector.stability_ratio(c, &data.as_projection_data(d)).unwrap();
        prop_assert!(ratio.is_finite() && ratio > 0.0);
    }
}

#[test]
fn projection_reproduces_rt_functions() {
    // Data taken from a field in RT_r(K) must give back that field.
    for (d, r) in SUPPORTED {
        let mesh = mesh(d, 1);
        let rt = RtSpace::new(mesh.clone(), r).unwrap();
        let projector = LocalProjector::new(&rt).unwrap();
        let c = 0;
        let geom = mesh.cell_geometry(c).unwrap().clone();
        let reference = rt.reference(c).clone();
        let mut rng = ChaCha8Rng::seed_from_u64(7 + d as u64 * 10 + r as u64);
        let target: Vec<f64> = (0..rt.local_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let zeta = {
            let geom = geom.clone();
            let reference = reference.clone();
            let target = target.clone();
            move |x: &Point| -> Point {
                let xr = geom.pullback(x);
                (0..target.len()).map(|k| reference.eval_physical(&geom, k, &xr) * target[k]).sum()
            }
        };
        let faces = mesh
            .cell_faces(c)
            .iter()
            .map(|cf| {
                let n = mesh.face(cf.face).normal;
                let zeta = zeta.clone();
                Box::new(move |x: &Point| zeta(x).dot(&n)) as Box<dyn Fn(&Point) -> f64 + Sync>
            })
            .collect();
        let data = LocalProjectionData::new(zeta.clone(), faces);
        let local = projector.project(c, &data).unwrap();
        for (a, b) in local.iter().zip(&target) {
            assert!((a - b).abs() < 1e-11, "(d, r) = ({d}, {r})");
        }
    }
}

/// Largest stability ratio over random data sets. Data are polynomials in
/// reference coordinates, so every mesh sees the same data shapes, and the
/// samples cycle through the cells of the central grid block, which covers
/// every cell shape of the structured mesh.
fn max_ratio(d: usize, r: usize, m: usize, samples: usize) -> f64 {
    let mesh = mesh(d, m);
    let rt = RtSpace::new(mesh.clone(), r).unwrap();
    let projector = LocalProjector::new(&rt).unwrap();
    let per_block = if d == 2 { 2 } else { 6 };
    let first = (mesh.n_cells() / per_block / 2) * per_block;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for s in 0..samples {
        let c = first + s % per_block;
        let data = Data::random(&mut rng, d, r + 1);
        let geom = mesh.cell_geometry(c).unwrap().clone();
        let faces = data
            .q
            .iter()
            .map(|q| {
                let geom = geom.clone();
                Box::new(move |x: &Point| q.eval(&geom.pullback(x))) as Box<dyn Fn(&Point) -> f64 + Sync>
            })
            .collect();
        let p = &data.p;
        let lp = LocalProjectionData::new(
            move |x: &Point| {
                let xr = geom.pullback(x);
                let mut v = Point::zeros();
                for comp in 0..d {
                    v[comp] = p[comp].eval(&xr);
                }
                v
            },
            faces,
        );
        worst = worst.max(projector.stability_ratio(c, &lp).unwrap());
    }
    worst
}

#[test]
fn stability_ratio_does_not_grow_under_refinement() {
    for (d, r) in SUPPORTED {
        let ratios: Vec<f64> = [2, 4, 8].iter().map(|&m| max_ratio(d, r, m, 60)).collect();
        for w in ratios.windows(2) {
            assert!(w[1] <= 1.05 * w[0], "(d, r) = ({d}, {r}): {ratios:?}");
        }
    }
}
