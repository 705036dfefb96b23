//! Time loop of the characteristics-mixed method.
//!
//! Each level `n` holds `c_h^n` together with the mixed solution
//! `(u_h^n, p_h^n)` computed from `μ(c_h^n)` at `t_n`. A step transports
//! `c_h^n` along the feet `x − τ u_h^n(x)` to get `c_h^{n+1}`, then solves
//! the Darcy system at `t_{n+1}` with `μ(c_h^{n+1})`. The last level thus
//! carries `(u_h^N, p_h^N)` from the final concentration.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::{
    assemble_concentration, ConcentrationOptions, MixedAssembler, MixedOrder, MixedSolution, DIVERGENCE_IDENTITY_TOL,
};
use crate::error::{Error, Result};
use crate::linalg::{solve_spd_from, SaddleSolver};
use crate::mesh::TriMesh;
use crate::problems::{by_id, ManufacturedProblem};
use crate::quadrature::{triangle_rule, QuadRule};
use crate::spaces::{interpolate_p1, Field, Space, SpaceKind};

fn default_quad_assembly() -> usize {
    4
}

fn default_quad_norm() -> usize {
    5
}

fn default_cg_tol() -> f64 {
    1e-12
}

fn default_saddle_tol() -> f64 {
    1e-11
}

fn default_true() -> bool {
    true
}

/// Parameters of one simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(rename = "M")]
    pub m: usize,
    pub tau: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub problem: String,
    #[serde(default = "default_quad_assembly")]
    pub quad_assembly: usize,
    #[serde(default = "default_quad_norm")]
    pub quad_norm: usize,
    #[serde(default = "default_cg_tol")]
    pub cg_tol: f64,
    #[serde(default = "default_saddle_tol")]
    pub saddle_tol: f64,
    /// Mixed pair used inside the time loop.
    #[serde(default = "default_scheme")]
    pub scheme: MixedOrder,
    #[serde(default = "default_true")]
    pub clamp_feet: bool,
}

fn default_scheme() -> MixedOrder {
    MixedOrder::Lowest
}

impl RunConfig {
    /// `M`, `τ = 1/M²`, `T = 1` on the given problem.
    pub fn new(problem: &str, m: usize) -> Self {
        Self {
            m,
            tau: 1.0 / (m * m) as f64,
            t_final: 1.0,
            problem: problem.to_string(),
            quad_assembly: default_quad_assembly(),
            quad_norm: default_quad_norm(),
            cg_tol: default_cg_tol(),
            saddle_tol: default_saddle_tol(),
            scheme: MixedOrder::Lowest,
            clamp_feet: true,
        }
    }

    /// Number of steps `N = T/τ`; fails unless it is a positive integer.
    pub fn steps(&self) -> Result<usize> {
        if !(self.tau > 0.0 && self.t_final > 0.0 && self.tau.is_finite() && self.t_final.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "tau = {} and T = {} must be positive",
                self.tau, self.t_final
            )));
        }
        let n = (self.t_final / self.tau).round();
        if n < 1.0 || (n * self.tau - self.t_final).abs() > 1e-9 * self.t_final {
            return Err(Error::InvalidConfig(format!(
                "T/tau = {} is not a positive integer",
                self.t_final / self.tau
            )));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<usize> {
        if self.m == 0 {
            return Err(Error::InvalidConfig("M must be at least 1".into()));
        }
        if !(self.cg_tol > 0.0 && self.saddle_tol > 0.0) {
            return Err(Error::InvalidConfig("solver tolerances must be positive".into()));
        }
        triangle_rule::<f64>(self.quad_assembly)?;
        triangle_rule::<f64>(self.quad_norm)?;
        self.steps()
    }
}

/// Discrete solution at one time level.
#[derive(Clone, Debug)]
pub struct TimeState {
    pub n: usize,
    pub t: f64,
    /// Concentration in P1.
    pub c: Field<f64>,
    /// Velocity in RT0 (or RT1 for the first-order loop).
    pub u: Field<f64>,
    /// Mean-zero pressure in P0 (or P1Disc).
    pub p: Field<f64>,
}

/// Per-level diagnostics, streamed as JSON lines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub cg_iterations: usize,
    pub cg_residual: f64,
    pub saddle_residual: f64,
    pub divergence_defect: f64,
    pub divergence_bound: f64,
    pub compatibility_defect: f64,
    pub clamped_feet: usize,
    pub wall_time_seconds: f64,
}

impl StepRecord {
    pub fn divergence_ok(&self) -> bool {
        self.divergence_defect <= self.divergence_bound
    }
}

/// Diagnostics of a whole run.
#[derive(Clone, Debug, Default)]
pub struct Diagnostics {
    pub records: Vec<StepRecord>,
}

impl Diagnostics {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            writeln!(w)?;
        }
        Ok(())
    }

    /// Largest `defect / bound` over all mixed solves.
    pub fn worst_divergence_ratio(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.divergence_defect / r.divergence_bound)
            .fold(0.0, f64::max)
    }

    pub fn total_wall_time(&self) -> f64 {
        self.records.iter().map(|r| r.wall_time_seconds).sum()
    }
}

/// A simulation bound to one mesh and problem.
pub struct Simulation {
    config: RunConfig,
    steps: usize,
    problem: ManufacturedProblem,
    mesh: Arc<TriMesh<f64>>,
    concentration: Arc<Space<f64>>,
    mixed: MixedAssembler,
    solver: SaddleSolver,
    rule: QuadRule<f64>,
    pub diagnostics: Diagnostics,
}

impl std::fmt::Debug for Simulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulation")
            .field("config", &self.config)
            .field("steps", &self.steps)
            .finish_non_exhaustive()
    }
}

impl Simulation {
    pub fn new(config: RunConfig) -> Result<Self> {
        let problem = by_id(&config.problem)?;
        Self::with_problem(config, problem)
    }

    /// Runs a registered id's config against a custom problem.
    pub fn with_problem(config: RunConfig, problem: ManufacturedProblem) -> Result<Self> {
        let steps = config.validate()?;
        let mesh = Arc::new(TriMesh::uniform(config.m));
        Ok(Self {
            steps,
            concentration: Space::new(SpaceKind::P1, mesh.clone()),
            mixed: MixedAssembler::new(mesh.clone(), config.scheme, config.quad_assembly)?,
            solver: SaddleSolver::new(),
            rule: triangle_rule(config.quad_assembly)?,
            mesh,
            problem,
            config,
            diagnostics: Diagnostics::default(),
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn problem(&self) -> &ManufacturedProblem {
        &self.problem
    }

    pub fn mesh(&self) -> &Arc<TriMesh<f64>> {
        &self.mesh
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn mixed_solve(&mut self, c: &Field<f64>, t: f64) -> Result<MixedSolution> {
        let sys = self.mixed.assemble(&self.problem.coeffs, c, t)?;
        self.mixed.solve(&sys, &mut self.solver, self.config.saddle_tol)
    }

    fn record(&mut self, n: usize, t: f64, cg: (usize, f64), clamped: usize, sol: &MixedSolution, start: Instant) {
        self.diagnostics.records.push(StepRecord {
            step: n,
            t,
            cg_iterations: cg.0,
            cg_residual: cg.1,
            saddle_residual: sol.raw.residual,
            divergence_defect: sol.divergence_defect,
            divergence_bound: DIVERGENCE_IDENTITY_TOL * (1.0 + sol.source_sup),
            compatibility_defect: sol.compatibility_defect,
            clamped_feet: clamped,
            wall_time_seconds: start.elapsed().as_secs_f64(),
        });
    }

    /// Level 0: `c_h^0 = I_h c(·, 0)` and the mixed solve with `μ(c_h^0)`.
    pub fn init(&mut self) -> Result<TimeState> {
        let start = Instant::now();
        let exact = self.problem.exact.clone();
        let c = interpolate_p1(&self.concentration, |x| exact.concentration(x, 0.0))?;
        let sol = self.mixed_solve(&c, 0.0)?;
        self.record(0, 0.0, (0, 0.0), 0, &sol, start);
        Ok(TimeState {
            n: 0,
            t: 0.0,
            c,
            u: sol.u,
            p: sol.p,
        })
    }

    /// Advances one level.
    pub fn step(&mut self, state: &TimeState) -> Result<TimeState> {
        let start = Instant::now();
        let n = state.n + 1;
        let t = n as f64 * self.config.tau;
        let sys = assemble_concentration(
            &self.problem.coeffs,
            &state.u,
            &state.c,
            &self.rule,
            ConcentrationOptions {
                tau: self.config.tau,
                t_next: t,
                clamp_feet: self.config.clamp_feet,
            },
        )?;
        let cg = solve_spd_from(&sys.matrix, &sys.rhs, state.c.coeffs().to_vec(), self.config.cg_tol)?;
        let c = Field::from_coeffs(&self.concentration, cg.x)?;
        let sol = self.mixed_solve(&c, t)?;
        self.record(n, t, (cg.iterations, cg.residual), sys.clamped_feet, &sol, start);
        Ok(TimeState {
            n,
            t,
            c,
            u: sol.u,
            p: sol.p,
        })
    }

    /// `init` followed by `N` steps.
    pub fn run(&mut self) -> Result<TimeState> {
        let mut state = self.init()?;
        for _ in 0..self.steps {
            state = self.step(&state)?;
        }
        Ok(state)
    }

    /// RT1 / discontinuous P1 re-solve with `μ(c_h)` at the state's time.
    pub fn postprocess(&self, state: &TimeState) -> Result<PostProcessed> {
        let asm = MixedAssembler::new(self.mesh.clone(), MixedOrder::First, self.config.quad_assembly)?;
        let sys = asm.assemble(&self.problem.coeffs, &state.c, state.t)?;
        let sol = asm.solve(&sys, &mut SaddleSolver::new(), self.config.saddle_tol)?;
        Ok(PostProcessed {
            divergence_bound: DIVERGENCE_IDENTITY_TOL * (1.0 + sol.source_sup),
            divergence_defect: sol.divergence_defect,
            u_hat: sol.u,
            p_hat: sol.p,
        })
    }

    pub fn norm_rule(&self) -> Result<QuadRule<f64>> {
        triangle_rule(self.config.quad_norm)
    }
}

/// Output of [`Simulation::postprocess`].
#[derive(Clone, Debug)]
pub struct PostProcessed {
    pub u_hat: Field<f64>,
    pub p_hat: Field<f64>,
    pub divergence_defect: f64,
    pub divergence_bound: f64,
}

/// Runs a configuration end to end.
pub fn run(config: RunConfig) -> Result<(TimeState, Diagnostics)> {
    let mut sim = Simulation::new(config)?;
    let state = sim.run()?;
    Ok((state, sim.diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::mean_vector;
    use crate::norms::l2_error_scalar;

    fn cfg(problem: &str, m: usize, tau: f64, t_final: f64) -> RunConfig {
        RunConfig {
            tau,
            t_final,
            ..RunConfig::new(problem, m)
        }
    }

    #[test]
    fn steps_validation() {
        assert_eq!(cfg("paper2d", 8, 1.0 / 64.0, 1.0).steps().unwrap(), 64);
        assert_eq!(cfg("paper2d", 8, 0.1, 1.0).steps().unwrap(), 10);
        assert!(cfg("paper2d", 8, 0.3, 1.0).steps().is_err());
        assert!(cfg("paper2d", 8, 0.0, 1.0).steps().is_err());
        assert!(cfg("paper2d", 8, 2.0, 1.0).steps().is_err());
        assert!(Simulation::new(cfg("nope", 8, 0.1, 1.0)).is_err());
    }

    #[test]
    fn init_interpolates() {
        let mut sim = Simulation::new(RunConfig::new("paper2d", 8)).unwrap();
        let s = sim.init().unwrap();
        assert_eq!(s.c.coeffs().len(), 81);
        for (i, x) in sim.mesh().nodes().iter().enumerate() {
            assert_eq!(s.c.coeffs()[i], sim.problem().exact.concentration(*x, 0.0));
        }
        let m = mean_vector(s.p.space());
        let mean: f64 = s.p.coeffs().iter().zip(&m).map(|(a, b)| a * b).sum();
        assert!(mean.abs() < 1e-10);
    }

    #[test]
    fn constant_state_step() {
        let mut sim = Simulation::new(cfg("constant", 8, 0.1, 1.0)).unwrap();
        let s0 = sim.init().unwrap();
        let s1 = sim.step(&s0).unwrap();
        assert!(s1.c.coeffs().iter().all(|v| (v - 0.5).abs() < 1e-10));
        assert!(s1.u.coeffs().iter().all(|v| v.abs() < 1e-12));
        assert!(s1.p.coeffs().iter().all(|v| v.abs() < 1e-12));
        assert_eq!(s1.n, 1);
        assert!((s1.t - 0.1).abs() < 1e-15);
    }

    #[test]
    fn one_step_run_is_init_plus_step() {
        let mut a = Simulation::new(cfg("paper2d", 4, 0.5, 0.5)).unwrap();
        let ra = a.run().unwrap();
        let mut b = Simulation::new(cfg("paper2d", 4, 0.5, 0.5)).unwrap();
        let s0 = b.init().unwrap();
        let rb = b.step(&s0).unwrap();
        assert_eq!(ra.c.coeffs(), rb.c.coeffs());
        assert_eq!(ra.u.coeffs(), rb.u.coeffs());
        assert_eq!(a.diagnostics.records.len(), 2);
    }

    #[test]
    fn short_run_diagnostics() {
        let (state, diag) = run(cfg("paper2d", 8, 1.0 / 64.0, 0.25)).unwrap();
        assert_eq!(state.n, 16);
        assert_eq!(diag.records.len(), 17);
        assert!(diag.worst_divergence_ratio() <= 1.0);
        assert!(diag.records.iter().skip(1).all(|r| r.cg_residual <= 1e-12 && r.saddle_residual <= 1e-11));
        let mut buf = Vec::new();
        diag.write_jsonl(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 17);
    }

    #[test]
    fn paper_m8_error_is_sane() {
        let (state, _) = run(RunConfig::new("paper2d", 8)).unwrap();
        let p = by_id("paper2d").unwrap();
        let rule = triangle_rule(5).unwrap();
        let e = l2_error_scalar(&state.c, |x| p.exact.concentration(x, 1.0), &rule).unwrap();
        assert!(e.is_finite() && e < 10.0 * 3.923e-2, "{e}");
    }

    #[test]
    fn postprocess_zero_data() {
        let mut sim = Simulation::new(cfg("constant", 4, 0.5, 1.0)).unwrap();
        let s = sim.run().unwrap();
        let pp = sim.postprocess(&s).unwrap();
        assert!(pp.u_hat.coeffs().iter().all(|v| v.abs() < 1e-12));
        assert!(pp.p_hat.coeffs().iter().all(|v| v.abs() < 1e-12));
        assert!(pp.divergence_defect <= pp.divergence_bound);
    }

    #[test]
    fn config_json_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"M": 8, "tau": 0.015625, "T": 1.0, "problem": "paper2d"}"#).unwrap();
        assert_eq!(c, RunConfig::new("paper2d", 8));
    }
}
