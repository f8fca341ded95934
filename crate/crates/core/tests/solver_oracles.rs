//! Assembly and solver checked against dense linear algebra and against
//! direct quadrature of the discrete fields.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtmixed::analysis::l2_norm_flux;
use rtmixed::assembly::{assemble_saddle, assemble_source, SaddleSystem};
use rtmixed::mesh::{build_unit_cube_mesh, build_unit_square_mesh};
use rtmixed::problems::Problem;
use rtmixed::projection::EllipticProjector;
use rtmixed::quadrature::simplex_rule;
use rtmixed::solver::{factor_form, BlockForm};
use rtmixed::spaces::{DgField, DgSpace, RtField, RtSpace};

const SUPPORTED: [(usize, usize); 5] = [(2, 0), (2, 1), (2, 2), (3, 0), (3, 1)];

fn spaces(d: usize, r: usize, m: usize) -> (RtSpace, DgSpace) {
    let mesh = Arc::new(if d == 2 {
        build_unit_square_mesh(m).unwrap()
    } else {
        build_unit_cube_mesh(m).unwrap()
    });
    (RtSpace::new(mesh.clone(), r).unwrap(), DgSpace::new(mesh, r).unwrap())
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, a| m.max(a.abs()))
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

#[test]
fn mixed_poisson_matches_dense_lu() {
    // -div grad u = 1 with homogeneous Dirichlet data: the rhs of the second
    // equation is (Δu, v) = -(1, v), entering the stationary system negated.
    for (d, r) in SUPPORTED {
        let (rt, dg) = spaces(d, r, 2);
        let system = assemble_saddle(&rt, &dg, 1.0).unwrap();
        let rhs_u = assemble_source(&dg, |_, _| 1.0, 0.0).unwrap();
        let rhs_sigma = vec![0.0; rt.n_dofs()];

        let (sigma, u) = EllipticProjector::from_system(&rt, &dg, &system)
            .unwrap()
            .solve(&rhs_sigma, &rhs_u)
            .unwrap();

        let k = system.stationary_matrix().to_dense();
        let b = DVector::from_iterator(k.nrows(), rhs_sigma.iter().chain(&rhs_u).copied());
        let oracle = k.lu().solve(&b).expect("stationary matrix is nonsingular");
        let computed: Vec<f64> = sigma.iter().chain(&u).copied().collect();
        let diff: Vec<f64> = computed.iter().zip(oracle.iter()).map(|(a, b)| a - b).collect();
        let err = max_abs(&diff) / max_abs(oracle.as_slice());
        assert!(err < 1e-10, "(d, r) = ({d}, {r}): relative difference {err:e}");
    }
}

#[test]
fn stationary_lu_agrees_with_refinement() {
    let (rt, dg) = spaces(2, 1, 3);
    let system = assemble_saddle(&rt, &dg, 1.0).unwrap();
    let rhs_u = assemble_source(&dg, |x, _| x.x * x.y, 0.0).unwrap();
    let rhs_sigma = vec![0.0; rt.n_dofs()];
    let (s1, u1) = factor_form(&system, BlockForm::Stationary)
        .unwrap()
        .solve(&rhs_sigma, &rhs_u)
        .unwrap();
    let (s2, u2) = EllipticProjector::from_system(&rt, &dg, &system)
        .unwrap()
        .solve(&rhs_sigma, &rhs_u)
        .unwrap();
    let scale = max_abs(&u1).max(max_abs(&s1));
    for (a, b) in s1.iter().chain(&u1).zip(s2.iter().chain(&u2)) {
        assert!((a - b).abs() < 1e-12 * scale);
    }
}

fn dense_schur(system: &SaddleSystem) -> DMatrix<f64> {
    let m = system.m.to_dense();
    let b = system.b.to_dense();
    let chol = m.cholesky().expect("flux mass matrix is SPD");
    b.transpose() * chol.solve(&b)
}

#[test]
fn schur_complement_is_spd() {
    for (d, r) in SUPPORTED {
        let (rt, dg) = spaces(d, r, 2);
        let system = assemble_saddle(&rt, &dg, 1.0).unwrap();
        let s = dense_schur(&system);
        let asym = (&s - s.transpose()).abs().max();
        assert!(asym < 1e-10 * s.abs().max(), "(d, r) = ({d}, {r}): asymmetry {asym:e}");
        let sym = (&s + s.transpose()) * 0.5;
        let eig = sym.symmetric_eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        assert!(lo > 1e-8 * hi, "(d, r) = ({d}, {r}): eigenvalues in [{lo:e}, {hi:e}]");
    }
}

#[test]
fn mass_blocks_are_spd() {
    for (d, r) in SUPPORTED {
        let (rt, dg) = spaces(d, r, 2);
        let system = assemble_saddle(&rt, &dg, 1.0).unwrap();
        for block in [&system.m, &system.d] {
            let dense = block.to_dense();
            assert!(block.symmetry_defect() < 1e-13);
            let eig = dense.symmetric_eigenvalues();
            assert!(eig.min() > 0.0, "(d, r) = ({d}, {r})");
        }
    }
}

#[test]
fn negated_form_matches_standard_form() {
    for (d, r) in SUPPORTED {
        let (rt, dg) = spaces(d, r, 2);
        let system = assemble_saddle(&rt, &dg, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rhs_sigma = random_vec(&mut rng, rt.n_dofs());
        let rhs_u = random_vec(&mut rng, dg.n_dofs());
        let (s1, u1) = factor_form(&system, BlockForm::Standard)
            .unwrap()
            .solve(&rhs_sigma, &rhs_u)
            .unwrap();
        let (s2, u2) = factor_form(&system, BlockForm::NegatedFirstBlock)
            .unwrap()
            .solve(&rhs_sigma, &rhs_u)
            .unwrap();
        let scale = max_abs(&s1).max(max_abs(&u1));
        for (a, b) in s1.iter().chain(&u1).zip(s2.iter().chain(&u2)) {
            assert!((a - b).abs() < 1e-12 * scale, "(d, r) = ({d}, {r})");
        }
    }
}

#[test]
fn factor_once_equals_factor_every_time() {
    let (rt, dg) = spaces(2, 1, 4);
    let system = assemble_saddle(&rt, &dg, 0.05).unwrap();
    let once = factor_form(&system, BlockForm::NegatedFirstBlock).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let zero = vec![0.0; rt.n_dofs()];
    for _ in 0..3 {
        let rhs = random_vec(&mut rng, dg.n_dofs());
        let fresh = factor_form(&system, BlockForm::NegatedFirstBlock).unwrap();
        assert_eq!(once.solve(&zero, &rhs).unwrap(), fresh.solve(&zero, &rhs).unwrap());
    }
}

#[test]
fn manufactured_source_matches_degree_12_oracle() {
    let g = Problem::allen_cahn_2d().effective_source().unwrap();
    let rule = simplex_rule(2, 12).unwrap();
    for r in 0..=2 {
        let (_, dg) = spaces(2, r, 2);
        let mesh = dg.mesh();
        let assembled = assemble_source(&dg, |x, t| g(x, t), 0.0).unwrap();
        let mut psi = vec![0.0; dg.local_dim()];
        for c in 0..mesh.n_cells() {
            let geom = mesh.cell_geometry(c).unwrap();
            let mut oracle = vec![0.0; dg.local_dim()];
            for (xr, w) in rule.iter() {
                dg.eval(xr, &mut psi);
                let gx = g(&geom.map(xr), 0.0);
                for (o, p) in oracle.iter_mut().zip(&psi) {
                    *o += w * geom.det.abs() * gx * p;
                }
            }
            for (k, o) in dg.cell_dofs(c).zip(oracle) {
                assert!((assembled[k] - o).abs() < 1e-10, "r = {r}, cell {c}");
            }
        }
    }
}

/// `(div sigma_h, u_h)` and `||sigma_h||^2` by quadrature of the fields
/// themselves, independent of the assembled blocks.
fn field_integrals(sigma: &RtField, u: &DgField) -> (f64, f64) {
    let mesh = sigma.space.mesh();
    let r = sigma.space.degree();
    let rule = simplex_rule(mesh.dim(), 2 * r + 4).unwrap();
    let mut pairing = 0.0;
    let mut mass = 0.0;
    for c in 0..mesh.n_cells() {
        let det = mesh.cell_geometry(c).unwrap().det.abs();
        for (xr, w) in rule.iter() {
            let (s, div) = sigma.evaluate_with_div(c, xr);
            pairing += w * det * div * u.evaluate(c, xr);
            mass += w * det * s.norm_squared();
        }
    }
    (pairing, mass)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn blocks_match_field_quadrature(seed in any::<u64>(), which in 0usize..5) {
        let (d, r) = SUPPORTED[which];
        let (rt, dg) = spaces(d, r, 2);
        let system = assemble_saddle(&rt, &dg, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sigma = RtField::new(&rt, random_vec(&mut rng, rt.n_dofs())).unwrap();
        let u = DgField::new(&dg, random_vec(&mut rng, dg.n_dofs())).unwrap();
        let (pairing, mass) = field_integrals(&sigma, &u);

        let bu = system.b.mul_vec(&u.coeffs);
        let assembled_pairing: f64 = sigma.coeffs.iter().zip(&bu).map(|(a, b)| a * b).sum();
        let ms = system.m.mul_vec(&sigma.coeffs);
        let assembled_mass: f64 = sigma.coeffs.iter().zip(&ms).map(|(a, b)| a * b).sum();

        prop_assert!((pairing - assembled_pairing).abs() < 1e-10 * (1.0 + pairing.abs()));
        prop_assert!((mass - assembled_mass).abs() < 1e-10 * mass);
        prop_assert!((l2_norm_flux(&sigma).powi(2) - mass).abs() < 1e-10 * mass);
    }
}
