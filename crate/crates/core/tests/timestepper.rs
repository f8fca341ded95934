use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtmixed::assembly::{CubicTerm, NonlinearitySpec};
use rtmixed::problems::Problem;
use rtmixed::quadrature::simplex_rule;
use rtmixed::timestepper::{run, RunConfig, Simulation, TimeStepState, VtkOutput};
use rtmixed::{Error, Point};

fn cubic() -> NonlinearitySpec {
    NonlinearitySpec {
        advection: None,
        cubic: Some(CubicTerm::Pure),
    }
}

#[test]
fn zero_data_is_a_fixed_point() {
    let config = RunConfig::new(Problem::custom(2, cubic(), 0.0), 4, 1, 0.25, 1.0);
    let out = run(config).unwrap();
    assert_eq!(out.state.n, 4);
    assert!(out.state.u.iter().chain(&out.state.sigma).all(|&c| c == 0.0));
}

/// One step on the two-triangle mesh, assembled by hand with the lowest
/// order basis `phi_F = s (x - p) / (2|K|)`, which has unit flux through `F`
/// along the global face normal.
#[test]
fn one_step_matches_hand_assembled_dense_solve() {
    let tau = 0.5;
    let sim = Simulation::new(RunConfig::new(Problem::allen_cahn_2d(), 1, 0, tau, 1.0)).unwrap();
    let mesh = sim.mesh().clone();
    assert_eq!((mesh.n_faces(), mesh.n_cells()), (5, 2));
    let g = Problem::allen_cahn_2d().effective_source().unwrap();
    let initial = sim.initial_state().unwrap();
    let next = sim.step(&initial).unwrap();

    let centroid = Point::new(1.0 / 3.0, 1.0 / 3.0, 0.0);
    let midpoint = |f: usize| {
        let v = &mesh.face(f).vertices;
        (mesh.vertices()[v[0]] + mesh.vertices()[v[1]]) / 2.0
    };
    // Opposite vertex p and sign s of phi_F on cell c, or None if F is not
    // a face of c. Since div phi_F = 1 / |K| times s, s is also the
    // integral of div phi_F over c.
    let local = |c: usize, f: usize| -> Option<(Point, f64)> {
        let face = mesh.face(f);
        if !face.cells.contains(&c) {
            return None;
        }
        let p = mesh
            .cell(c)
            .iter()
            .map(|&v| mesh.vertices()[v])
            .find(|v| !face.vertices.iter().any(|&w| mesh.vertices()[w] == *v))
            .unwrap();
        Some((p, (midpoint(f) - p).dot(&face.normal).signum()))
    };
    let phi = |c: usize, f: usize, x: &Point| -> Option<Point> {
        local(c, f).map(|(p, s)| s * (x - p) / (2.0 * mesh.cell_measure(c)))
    };

    // Previous data in the hand basis: cell values and face fluxes.
    let u0_field = sim.u_field(&initial);
    let s0_field = sim.sigma_field(&initial);
    let u_prev: Vec<f64> = (0..2).map(|c| u0_field.evaluate(c, &centroid)).collect();
    let flux_prev: Vec<f64> = (0..5)
        .map(|f| {
            let face = mesh.face(f);
            let c = face.cells[0];
            let xr = mesh.cell_geometry(c).unwrap().pullback(&midpoint(f));
            s0_field.evaluate(c, &xr).dot(&face.normal) * face.measure
        })
        .collect();
    // The hand basis must reproduce the library's initial flux.
    for c in 0..2 {
        let geom = mesh.cell_geometry(c).unwrap();
        let x = geom.map(&centroid);
        let hand: Point = (0..5).filter_map(|f| phi(c, f, &x).map(|p| p * flux_prev[f])).sum();
        assert!((hand - s0_field.evaluate(c, &centroid)).norm() < 1e-13);
    }

    let rule = simplex_rule(2, 12).unwrap();
    let mut a = DMatrix::<f64>::zeros(7, 7);
    let mut b = DVector::<f64>::zeros(7);
    for c in 0..2 {
        let geom = mesh.cell_geometry(c).unwrap();
        let area = mesh.cell_measure(c);
        for (xr, w) in rule.iter() {
            let x = geom.map(xr);
            let wx = w * geom.det.abs();
            for i in 0..5 {
                for j in 0..5 {
                    if let (Some(pi), Some(pj)) = (phi(c, i, &x), phi(c, j, &x)) {
                        a[(i, j)] += wx * pi.dot(&pj);
                    }
                }
            }
            b[5 + c] += wx * g(&x, tau);
        }
        for f in 0..5 {
            if let Some((_, s)) = local(c, f) {
                a[(f, 5 + c)] += s;
                a[(5 + c, f)] -= s;
            }
        }
        a[(5 + c, 5 + c)] += area / tau;
        b[5 + c] += area * u_prev[c] / tau - area * u_prev[c].powi(3);
    }
    let x = a.lu().solve(&b).unwrap();

    let u1 = sim.u_field(&next);
    let s1 = sim.sigma_field(&next);
    for c in 0..2 {
        assert!((u1.evaluate(c, &centroid) - x[5 + c]).abs() < 1e-12);
        let geom = mesh.cell_geometry(c).unwrap();
        for xr in [centroid, Point::new(0.1, 0.2, 0.0), Point::new(0.7, 0.2, 0.0)] {
            let px = geom.map(&xr);
            let hand: Point = (0..5).filter_map(|f| phi(c, f, &px).map(|p| p * x[f])).sum();
            assert!((hand - s1.evaluate(c, &xr)).norm() < 1e-12);
        }
    }
}

#[test]
fn stepping_has_no_hidden_state() {
    let config = RunConfig::new(Problem::allen_cahn_2d(), 4, 1, 0.125, 0.25);
    let sim = Simulation::new(config.clone()).unwrap();
    let s0 = sim.initial_state().unwrap();
    let s1 = sim.step(&s0).unwrap();
    let s2 = sim.step(&s1).unwrap();
    assert_eq!(sim.step(&s1).unwrap(), s2);
    let out = run(config).unwrap();
    assert_eq!(out.state, s2);
    assert_eq!(out.state.t, 0.25);
}

#[test]
fn first_equation_holds_after_every_step() {
    for (problem, r) in [(Problem::allen_cahn_2d(), 1), (Problem::combined_3d(), 0)] {
        let mut config = RunConfig::new(problem, 3, r, 0.1, 0.5);
        config.check_first_equation = true;
        config.record_history = true;
        let out = run(config).unwrap();
        assert_eq!(out.history.len(), 5);
        for h in &out.history {
            assert!(h.first_equation_residual.unwrap() < 1e-9);
        }
        assert!(out.record.err_sigma_accumulated.unwrap() > 0.0);
    }
}

#[test]
fn linear_step_is_superposable() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let sim = |g: f64| Simulation::new(RunConfig::new(Problem::custom(2, NonlinearitySpec::none(), g), 3, 1, 0.1, 1.0)).unwrap();
    let (a, b) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let (sa, sb, sab) = (sim(a), sim(b), sim(a + b));
    let random_state = |rng: &mut ChaCha8Rng| TimeStepState {
        n: 0,
        t: 0.0,
        u: (0..sa.dg().n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        sigma: (0..sa.rt().n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    };
    let x = random_state(&mut rng);
    let y = random_state(&mut rng);
    let sum = TimeStepState {
        u: x.u.iter().zip(&y.u).map(|(p, q)| p + q).collect(),
        sigma: x.sigma.iter().zip(&y.sigma).map(|(p, q)| p + q).collect(),
        ..x.clone()
    };
    let (ux, uy, us) = (sa.step(&x).unwrap(), sb.step(&y).unwrap(), sab.step(&sum).unwrap());
    for i in 0..us.u.len() {
        assert!((ux.u[i] + uy.u[i] - us.u[i]).abs() < 1e-11);
    }
    for i in 0..us.sigma.len() {
        assert!((ux.sigma[i] + uy.sigma[i] - us.sigma[i]).abs() < 1e-11);
    }
}

#[test]
fn step_count_must_be_an_integer() {
    let config = |tau: f64| RunConfig::new(Problem::allen_cahn_2d(), 2, 0, tau, 1.0);
    assert_eq!(config(0.1).n_steps().unwrap(), 10);
    assert_eq!(config(1.0 / 3.0).n_steps().unwrap(), 3);
    assert!(matches!(config(0.3).n_steps(), Err(Error::InvalidArgument(_))));
    assert!(matches!(config(-0.1).n_steps(), Err(Error::InvalidArgument(_))));
    let out = run(config(1.0 / 3.0)).unwrap();
    assert_eq!(out.state.t, 1.0);
}

#[test]
fn unsupported_degree_is_rejected() {
    let err = Simulation::new(RunConfig::new(Problem::allen_cahn_2d(), 2, 3, 0.5, 1.0)).err().unwrap();
    assert!(matches!(err, Error::Unsupported { dim: 2, r: 3 }));
    assert!(!err.is_numerical());
}

#[test]
fn blow_up_is_reported_with_its_step() {
    // A huge source makes the lagged cubic term overflow on the second step.
    let config = RunConfig::new(Problem::custom(2, cubic(), 1e200), 2, 0, 0.25, 1.0);
    let err = run(config).err().unwrap();
    assert!(matches!(err, Error::Divergence { step: 2 }), "{err}");
    assert!(err.is_numerical());
}

#[test]
fn snapshots_follow_the_stride() {
    let dir = std::env::temp_dir().join(format!("rtmixed-vtk-{}", std::process::id()));
    let mut config = RunConfig::new(Problem::allen_cahn_2d(), 2, 0, 0.2, 1.0);
    config.vtk = Some(VtkOutput {
        directory: dir.clone(),
        prefix: "u".into(),
        stride: 2,
    });
    run(config).unwrap();
    let mut names: Vec<String> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["u_000000.vtk", "u_000002.vtk", "u_000004.vtk", "u_000005.vtk"]);
    let text = std::fs::read_to_string(dir.join("u_000005.vtk")).unwrap();
    assert!(text.starts_with("# vtk DataFile Version"));
    std::fs::remove_dir_all(dir).unwrap();
}
