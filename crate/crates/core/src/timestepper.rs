//! Linearized backward Euler time stepping for the mixed system.
//!
//! Step `n` solves
//!
//! ```text
//! M sigma^n + B u^n                 = 0
//! -B^T sigma^n + (1/tau) D u^n      = (1/tau) D u^{n-1} - F(u^{n-1}, sigma^{n-1}) + G(t_n)
//! ```
//!
//! The nonlinear load `F` lags one step, so the matrix never changes and is
//! factored once per run.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use crate::analysis::{self, StudyRecord};
use crate::assembly::{assemble_saddle, LoadAssembler, SaddleSystem};
use crate::error::{Error, Result};
use crate::mesh::{build_unit_cube_mesh, build_unit_square_mesh, SimplicialMesh};
use crate::problems::{Problem, SourceFn};
use crate::projection::EllipticProjector;
use crate::solver::{factor_form, BlockForm, Factorization};
use crate::spaces::{is_supported, DgField, DgSpace, RtField, RtSpace};
use crate::Point;

/// Where and how often to write VTK snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct VtkOutput {
    pub directory: PathBuf,
    pub prefix: String,
    /// Write every `stride` steps, plus the initial and final states.
    pub stride: usize,
}

/// Everything needed for one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: Problem,
    pub m: usize,
    pub r: usize,
    pub tau: f64,
    pub t_final: f64,
    /// Track errors at every step (needed for the accumulated flux error).
    pub record_history: bool,
    /// Check the first mixed equation residual after every step.
    pub check_first_equation: bool,
    pub vtk: Option<VtkOutput>,
}

impl RunConfig {
    pub fn new(problem: Problem, m: usize, r: usize, tau: f64, t_final: f64) -> Self {
        Self {
            problem,
            m,
            r,
            tau,
            t_final,
            record_history: false,
            check_first_equation: false,
            vtk: None,
        }
    }

    /// Time step `(1/M)^{r+1}`.
    pub fn coupled_tau(m: usize, r: usize) -> f64 {
        (1.0 / m as f64).powi(r as i32 + 1)
    }

    pub fn dim(&self) -> usize {
        self.problem.dim
    }

    /// The number of steps `N = T / tau`, which must be an integer.
    pub fn n_steps(&self) -> Result<usize> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "final time must be positive, got {}",
                self.t_final
            )));
        }
        let n = (self.t_final / self.tau).round();
        if n < 1.0 || (n * self.tau - self.t_final).abs() > 1e-12 * self.t_final {
            return Err(Error::InvalidArgument(format!(
                "T = {} is not an integer multiple of tau = {}",
                self.t_final, self.tau
            )));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if !is_supported(d, self.r) {
            return Err(Error::Unsupported { dim: d, r: self.r });
        }
        if self.m == 0 {
            return Err(Error::InvalidArgument("M must be at least 1".into()));
        }
        if let Some(vtk) = &self.vtk {
            if vtk.stride == 0 {
                return Err(Error::InvalidArgument("VTK stride must be at least 1".into()));
            }
        }
        self.n_steps().map(|_| ())
    }
}

/// The discrete solution after `n` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeStepState {
    pub n: usize,
    pub t: f64,
    pub u: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub n: usize,
    pub t: f64,
    pub err_u_l2: Option<f64>,
    pub err_sigma_l2: Option<f64>,
    pub first_equation_residual: Option<f64>,
}

/// The result of [`Simulation::run`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: TimeStepState,
    pub history: Vec<StepRecord>,
    pub record: StudyRecord,
}

/// Mesh, spaces, assembled blocks and factorization for one configuration.
pub struct Simulation {
    config: RunConfig,
    n_steps: usize,
    mesh: Arc<SimplicialMesh>,
    rt: RtSpace,
    dg: DgSpace,
    system: SaddleSystem,
    fact: Factorization,
    source: Option<SourceFn>,
    initial: Option<(Vec<f64>, Vec<f64>)>,
}

impl Simulation {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let mesh = Arc::new(match config.dim() {
            2 => build_unit_square_mesh(config.m)?,
            _ => build_unit_cube_mesh(config.m)?,
        });
        Self::on_mesh(config, mesh)
    }

    /// Use a prebuilt mesh instead of the structured one.
    pub fn on_mesh(config: RunConfig, mesh: Arc<SimplicialMesh>) -> Result<Self> {
        config.validate()?;
        if mesh.dim() != config.dim() {
            return Err(Error::InvalidArgument(format!(
                "problem is {}D but the mesh is {}D",
                config.dim(),
                mesh.dim()
            )));
        }
        let n_steps = config.n_steps()?;
        let rt = RtSpace::new(mesh.clone(), config.r)?;
        let dg = DgSpace::new(mesh.clone(), config.r)?;
        let system = assemble_saddle(&rt, &dg, config.tau)?;
        let source = config.problem.effective_source();
        // The projector's factorization is dropped before the step matrix is
        // factored, so at most one factorization is alive at a time.
        let initial = match &config.problem.exact {
            Some(exact) => Some(EllipticProjector::from_system(&rt, &dg, &system)?.project_coeffs(exact.as_ref(), 0.0)?),
            None => None,
        };
        let fact = factor_form(&system, BlockForm::NegatedFirstBlock)?;
        Ok(Self {
            config,
            n_steps,
            mesh,
            rt,
            dg,
            system,
            fact,
            source,
            initial,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn mesh(&self) -> &Arc<SimplicialMesh> {
        &self.mesh
    }

    pub fn rt(&self) -> &RtSpace {
        &self.rt
    }

    pub fn dg(&self) -> &DgSpace {
        &self.dg
    }

    pub fn system(&self) -> &SaddleSystem {
        &self.system
    }

    pub fn factorization(&self) -> &Factorization {
        &self.fact
    }

    pub fn loads(&self) -> Result<LoadAssembler<'_>> {
        LoadAssembler::new(&self.rt, &self.dg)
    }

    /// Projection of the exact solution at `t = 0`, or zero data.
    pub fn initial_state(&self) -> Result<TimeStepState> {
        let (sigma, u) = match &self.initial {
            Some(data) => data.clone(),
            None => (vec![0.0; self.rt.n_dofs()], vec![0.0; self.dg.n_dofs()]),
        };
        Ok(TimeStepState {
            n: 0,
            t: 0.0,
            u,
            sigma,
        })
    }

    pub fn u_field<'s>(&'s self, state: &TimeStepState) -> DgField<'s> {
        DgField::new(&self.dg, state.u.clone()).expect("state matches space").at_time(state.t)
    }

    pub fn sigma_field<'s>(&'s self, state: &TimeStepState) -> RtField<'s> {
        RtField::new(&self.rt, state.sigma.clone()).expect("state matches space").at_time(state.t)
    }

    /// `rhs_u` of the step leaving `prev`, with source `G(t_{n+1})`.
    pub fn step_rhs(&self, loads: &LoadAssembler, prev: &TimeStepState) -> Result<Vec<f64>> {
        let t = self.time_of(prev.n + 1);
        let tau = self.config.tau;
        let mut rhs: Vec<f64> = self.system.d.mul_vec(&prev.u).into_iter().map(|v| v / tau).collect();
        let spec = &self.config.problem.nonlinearity;
        if !spec.is_none() {
            let u = DgField::new(&self.dg, prev.u.clone())?;
            let sigma = RtField::new(&self.rt, prev.sigma.clone())?;
            for (r, f) in rhs.iter_mut().zip(loads.nonlinear_load(&u, &sigma, spec)) {
                *r -= f;
            }
        }
        if let Some(g) = &self.source {
            let g = g.clone();
            for (r, s) in rhs.iter_mut().zip(loads.source(move |x: &Point, t| g(x, t), t)) {
                *r += s;
            }
        }
        Ok(rhs)
    }

    /// `t_n = n tau`, with the last step landing exactly on `T`.
    pub fn time_of(&self, n: usize) -> f64 {
        if n == self.n_steps {
            self.config.t_final
        } else {
            n as f64 * self.config.tau
        }
    }

    /// Advance one step with cached load tabulations.
    pub fn step_with(&self, loads: &LoadAssembler, prev: &TimeStepState) -> Result<TimeStepState> {
        let n = prev.n + 1;
        let rhs_u = self.step_rhs(loads, prev)?;
        if rhs_u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step: n });
        }
        let (sigma, u) = match self.fact.solve(&vec![0.0; self.rt.n_dofs()], &rhs_u) {
            Ok(x) => x,
            Err(Error::Singular(_)) => return Err(Error::Divergence { step: n }),
            Err(e) => return Err(e),
        };
        if u.iter().chain(&sigma).any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step: n });
        }
        Ok(TimeStepState {
            n,
            t: self.time_of(n),
            u,
            sigma,
        })
    }

    /// Advance one step.
    pub fn step(&self, prev: &TimeStepState) -> Result<TimeStepState> {
        self.step_with(&self.loads()?, prev)
    }

    /// `max_i |(M sigma + B u)_i|`, the residual of the first equation tested
    /// with every RT basis function.
    pub fn first_equation_residual(&self, state: &TimeStepState) -> f64 {
        let ms = self.system.m.mul_vec(&state.sigma);
        let bu = self.system.b.mul_vec(&state.u);
        ms.iter().zip(&bu).fold(0.0, |m, (a, b)| m.max((a + b).abs()))
    }

    /// `(||u(t) - u_h||, ||sigma(t) - sigma_h||)` if an exact solution is known.
    pub fn errors(&self, state: &TimeStepState) -> Option<(f64, f64)> {
        let exact = self.config.problem.exact.as_ref()?;
        let t = state.t;
        let u = analysis::l2_error_scalar(&self.u_field(state), |x| exact.u(x, t));
        let s = analysis::l2_error_flux(&self.sigma_field(state), |x| exact.grad_u(x, t));
        Some((u, s))
    }

    fn write_snapshot(&self, vtk: &VtkOutput, state: &TimeStepState) -> Result<()> {
        std::fs::create_dir_all(&vtk.directory)?;
        let path = vtk.directory.join(format!("{}_{:06}.vtk", vtk.prefix, state.n));
        let u = self.u_field(state);
        let sigma = self.sigma_field(state);
        let centroid = Point::repeat(1.0 / (self.mesh.dim() + 1) as f64);
        let centroid = if self.mesh.dim() == 2 {
            Point::new(centroid.x, centroid.y, 0.0)
        } else {
            centroid
        };
        let uc: Vec<f64> = (0..self.mesh.n_cells()).map(|c| u.evaluate(c, &centroid)).collect();
        let sc: Vec<Point> = (0..self.mesh.n_cells()).map(|c| sigma.evaluate(c, &centroid)).collect();
        let mut out = BufWriter::new(File::create(path)?);
        self.mesh.write_vtk(&mut out, &[("u", &uc)], &[("sigma", &sc)])?;
        Ok(())
    }

    /// Run from the initial data to `T` and summarize the final state.
    pub fn run(&self) -> Result<RunOutput> {
        let start = Instant::now();
        let loads = self.loads()?;
        let mut state = self.initial_state()?;
        let mut history = Vec::new();
        let mut accumulated = 0.0;
        if let Some(vtk) = &self.config.vtk {
            self.write_snapshot(vtk, &state)?;
        }
        for _ in 0..self.n_steps {
            state = self.step_with(&loads, &state)?;
            let residual = self.config.check_first_equation.then(|| self.first_equation_residual(&state));
            if self.config.record_history {
                let errs = self.errors(&state);
                if let Some((_, es)) = errs {
                    accumulated += self.config.tau * es * es;
                }
                history.push(StepRecord {
                    n: state.n,
                    t: state.t,
                    err_u_l2: errs.map(|e| e.0),
                    err_sigma_l2: errs.map(|e| e.1),
                    first_equation_residual: residual,
                });
            }
            if let Some(vtk) = &self.config.vtk {
                if state.n % vtk.stride == 0 || state.n == self.n_steps {
                    self.write_snapshot(vtk, &state)?;
                }
            }
        }
        let mut record = StudyRecord {
            label: self.config.problem.name.clone(),
            m: self.config.m,
            r: self.config.r,
            tau: self.config.tau,
            ..Default::default()
        };
        if let Some((eu, es)) = self.errors(&state) {
            record.err_u_l2 = Some(eu);
            record.err_sigma_l2 = Some(es);
            if self.config.record_history {
                record.err_sigma_accumulated = Some(accumulated.sqrt());
            }
        }
        if self.config.check_first_equation {
            record.first_equation_residual = history
                .iter()
                .filter_map(|h| h.first_equation_residual)
                .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
                .or(Some(self.first_equation_residual(&state)));
        }
        record.wall_time = Some(start.elapsed().as_secs_f64());
        Ok(RunOutput {
            state,
            history,
            record,
        })
    }
}

/// Build and run one configuration.
pub fn run(config: RunConfig) -> Result<RunOutput> {
    Simulation::new(config)?.run()
}
