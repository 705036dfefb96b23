//! Coefficient sets and manufactured solutions.
//!
//! Every registered problem has separable exact fields
//!
//! ```text
//! c(x, y, t) = c₀ + a(t) X(x) X(y)
//! p(x, y, t) = p₀ + b(t) Q(x) Q(y)
//! u = -(k / μ(c)) ∇p
//! ```
//!
//! with hand-derived forcings `f = ∇·u` and
//! `g = c_t + u·∇c - ∇·(D(u)∇c)`. The forcings are checked against a
//! finite-difference reconstruction built only from `c`, `p`, `k`, `μ`
//! and `D` (see [`residual_check`]).

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Point2;

pub type SpaceFn = Arc<dyn Fn(Point2<f64>) -> f64 + Send + Sync>;
pub type SpaceTimeFn = Arc<dyn Fn(Point2<f64>, f64) -> f64 + Send + Sync>;
pub type ViscosityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Velocity-dependent dispersion
/// `D(u) = (molecular + velocity_scaled·|u|²) I + longitudinal · u⊗u`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dispersion {
    pub molecular: f64,
    pub velocity_scaled: f64,
    pub longitudinal: f64,
}

impl Dispersion {
    pub fn tensor(&self, u: Point2<f64>) -> [[f64; 2]; 2] {
        let z = u[0] * u[0] + u[1] * u[1];
        let d = self.molecular + self.velocity_scaled * z;
        let l = self.longitudinal;
        [
            [d + l * u[0] * u[0], l * u[0] * u[1]],
            [l * u[0] * u[1], d + l * u[1] * u[1]],
        ]
    }

    /// Lower bound on the smallest eigenvalue of `D(u)` over all `u`.
    pub fn min_eigenvalue_bound(&self) -> f64 {
        self.molecular
    }
}

/// Physical coefficients and sources of the miscible displacement system.
#[derive(Clone)]
pub struct CoefficientSet {
    /// Permeability `k(x)`.
    pub permeability: SpaceFn,
    /// Viscosity `μ(c)`.
    pub viscosity: ViscosityFn,
    pub dispersion: Dispersion,
    /// `q^I - q^P`, the right side of the divergence equation.
    pub flow_source: SpaceTimeFn,
    /// `c₁ q^I`, the explicit concentration source.
    pub injection: SpaceTimeFn,
    /// `q^P`, kept implicit as a reaction term.
    pub production: SpaceTimeFn,
    /// `k₀` with `1/k₀ ≤ k ≤ k₀`.
    pub permeability_bound: f64,
    /// `μ₀` with `1/μ₀ ≤ μ ≤ μ₀`.
    pub viscosity_bound: f64,
}

impl CoefficientSet {
    /// Builds the source terms from injection/production wells and the
    /// injected concentration.
    #[allow(clippy::too_many_arguments)]
    pub fn from_wells(
        permeability: SpaceFn,
        viscosity: ViscosityFn,
        dispersion: Dispersion,
        injection_rate: SpaceTimeFn,
        production_rate: SpaceTimeFn,
        injected_concentration: SpaceTimeFn,
        permeability_bound: f64,
        viscosity_bound: f64,
    ) -> Self {
        let (qi, qp, c1) = (injection_rate.clone(), production_rate.clone(), injected_concentration);
        let qi2 = injection_rate;
        Self {
            permeability,
            viscosity,
            dispersion,
            flow_source: Arc::new(move |x, t| qi(x, t) - qp(x, t)),
            injection: Arc::new(move |x, t| c1(x, t) * qi2(x, t)),
            production: production_rate,
            permeability_bound,
            viscosity_bound,
        }
    }
}

impl std::fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("dispersion", &self.dispersion)
            .field("permeability_bound", &self.permeability_bound)
            .field("viscosity_bound", &self.viscosity_bound)
            .finish_non_exhaustive()
    }
}

/// Value and first two derivatives of a 1D profile.
type Profile = fn(f64) -> [f64; 3];
/// Value and first derivative of a time amplitude.
type Amplitude = fn(f64) -> [f64; 2];
/// Mobility `k/μ(c)` and its derivative in `c` (with `k ≡ 1`).
type Mobility = fn(f64) -> [f64; 2];

/// Exact fields of a manufactured problem.
pub trait ExactSolution: Send + Sync {
    fn concentration(&self, x: Point2<f64>, t: f64) -> f64;
    fn pressure(&self, x: Point2<f64>, t: f64) -> f64;
    fn velocity(&self, x: Point2<f64>, t: f64) -> Point2<f64>;
    /// `f = ∇·u`.
    fn velocity_div(&self, x: Point2<f64>, t: f64) -> f64;
    /// `g = c_t + u·∇c - ∇·(D(u)∇c)`.
    fn concentration_forcing(&self, x: Point2<f64>, t: f64) -> f64;
}

#[derive(Clone, Copy)]
struct Separable {
    c_base: f64,
    c_amp: Amplitude,
    c_profile: Profile,
    p_base: f64,
    p_amp: Amplitude,
    p_profile: Profile,
    mobility: Mobility,
    dispersion: Dispersion,
}

struct Derivs {
    c: f64,
    c_t: f64,
    grad_c: Point2<f64>,
    // [c_xx, c_xy, c_yy]
    hess_c: [f64; 3],
    grad_p: Point2<f64>,
    hess_p: [f64; 3],
}

impl Separable {
    fn derivs(&self, x: Point2<f64>, t: f64) -> Derivs {
        let [a, a_t] = (self.c_amp)(t);
        let [cx, cx1, cx2] = (self.c_profile)(x[0]);
        let [cy, cy1, cy2] = (self.c_profile)(x[1]);
        let [b, _] = (self.p_amp)(t);
        let [px, px1, px2] = (self.p_profile)(x[0]);
        let [py, py1, py2] = (self.p_profile)(x[1]);
        Derivs {
            c: self.c_base + a * cx * cy,
            c_t: a_t * cx * cy,
            grad_c: [a * cx1 * cy, a * cx * cy1],
            hess_c: [a * cx2 * cy, a * cx1 * cy1, a * cx * cy2],
            grad_p: [b * px1 * py, b * px * py1],
            hess_p: [b * px2 * py, b * px1 * py1, b * px * py2],
        }
    }

    /// Velocity and its Jacobian `J[i][j] = ∂_j u_i`.
    fn velocity_jacobian(&self, d: &Derivs) -> (Point2<f64>, [[f64; 2]; 2]) {
        let [w, w_c] = (self.mobility)(d.c);
        let u = [-w * d.grad_p[0], -w * d.grad_p[1]];
        let hp = [[d.hess_p[0], d.hess_p[1]], [d.hess_p[1], d.hess_p[2]]];
        let mut jac = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                jac[i][j] = -(w_c * d.grad_c[j] * d.grad_p[i] + w * hp[i][j]);
            }
        }
        (u, jac)
    }
}

impl ExactSolution for Separable {
    fn concentration(&self, x: Point2<f64>, t: f64) -> f64 {
        let [a, _] = (self.c_amp)(t);
        self.c_base + a * (self.c_profile)(x[0])[0] * (self.c_profile)(x[1])[0]
    }

    fn pressure(&self, x: Point2<f64>, t: f64) -> f64 {
        let [b, _] = (self.p_amp)(t);
        self.p_base + b * (self.p_profile)(x[0])[0] * (self.p_profile)(x[1])[0]
    }

    fn velocity(&self, x: Point2<f64>, t: f64) -> Point2<f64> {
        let d = self.derivs(x, t);
        self.velocity_jacobian(&d).0
    }

    fn velocity_div(&self, x: Point2<f64>, t: f64) -> f64 {
        let d = self.derivs(x, t);
        let (_, jac) = self.velocity_jacobian(&d);
        jac[0][0] + jac[1][1]
    }

    fn concentration_forcing(&self, x: Point2<f64>, t: f64) -> f64 {
        let d = self.derivs(x, t);
        let (u, jac) = self.velocity_jacobian(&d);
        let gc = d.grad_c;
        let hc = [[d.hess_c[0], d.hess_c[1]], [d.hess_c[1], d.hess_c[2]]];
        let lap_c = d.hess_c[0] + d.hess_c[2];
        let div_u = jac[0][0] + jac[1][1];
        let z = u[0] * u[0] + u[1] * u[1];
        let grad_z = [
            2.0 * (u[0] * jac[0][0] + u[1] * jac[1][0]),
            2.0 * (u[0] * jac[0][1] + u[1] * jac[1][1]),
        ];
        let u_dot_gc = u[0] * gc[0] + u[1] * gc[1];
        // ∇(u·∇c)_j = Σ_i ∂_j u_i ∂_i c + u_i ∂_ij c
        let grad_w = [
            jac[0][0] * gc[0] + jac[1][0] * gc[1] + u[0] * hc[0][0] + u[1] * hc[1][0],
            jac[0][1] * gc[0] + jac[1][1] * gc[1] + u[0] * hc[0][1] + u[1] * hc[1][1],
        ];
        let disp = self.dispersion;
        let isotropic = (disp.molecular + disp.velocity_scaled * z) * lap_c
            + disp.velocity_scaled * (grad_z[0] * gc[0] + grad_z[1] * gc[1]);
        let longitudinal =
            disp.longitudinal * (div_u * u_dot_gc + u[0] * grad_w[0] + u[1] * grad_w[1]);
        d.c_t + u_dot_gc - isotropic - longitudinal
    }
}

/// A manufactured problem: coefficients wired to the exact solution's forcings.
#[derive(Clone)]
pub struct ManufacturedProblem {
    pub id: &'static str,
    pub coeffs: CoefficientSet,
    pub exact: Arc<dyn ExactSolution>,
}

impl std::fmt::Debug for ManufacturedProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManufacturedProblem")
            .field("id", &self.id)
            .field("coeffs", &self.coeffs)
            .finish_non_exhaustive()
    }
}

impl ManufacturedProblem {
    fn from_separable(id: &'static str, exact: Separable, viscosity: ViscosityFn, viscosity_bound: f64) -> Self {
        let exact = Arc::new(exact);
        let (f_src, g_src) = (exact.clone(), exact.clone());
        let coeffs = CoefficientSet {
            permeability: Arc::new(|_| 1.0),
            viscosity,
            dispersion: exact.dispersion,
            flow_source: Arc::new(move |x, t| f_src.velocity_div(x, t)),
            injection: Arc::new(move |x, t| g_src.concentration_forcing(x, t)),
            production: Arc::new(|_, _| 0.0),
            permeability_bound: 1.0,
            viscosity_bound,
        };
        Self { id, coeffs, exact }
    }

    /// Exact pressure gradient is tangential on the unit square, so `u·n = 0`.
    pub fn exact_velocity(&self, x: Point2<f64>, t: f64) -> Point2<f64> {
        self.exact.velocity(x, t)
    }
}

pub const PROBLEM_IDS: &[&str] = &["paper2d", "paper2d_reciprocal", "constant", "linear_darcy", "tensor_smoke"];

/// Looks up a registered problem by id.
pub fn by_id(id: &str) -> Result<ManufacturedProblem> {
    match id {
        "paper2d" => Ok(problem_2d_paper()),
        "paper2d_reciprocal" => Ok(problem_2d_reciprocal()),
        "constant" => Ok(problem_constant()),
        "linear_darcy" => Ok(problem_linear_darcy()),
        "tensor_smoke" => Ok(problem_tensor_smoke()),
        other => Err(Error::UnknownProblem(other.to_string())),
    }
}

fn sin_profile(s: f64) -> [f64; 3] {
    // X(s) = sin(s²)(1 - s)²
    let (sn, cs) = (s * s).sin_cos();
    let q = 1.0 - s;
    [
        sn * q * q,
        2.0 * s * cs * q * q - 2.0 * sn * q,
        (2.0 * cs - 4.0 * s * s * sn) * q * q - 8.0 * s * cs * q + 2.0 * sn,
    ]
}

fn poly_profile(s: f64) -> [f64; 3] {
    // Q(s) = s²(1 - s)³
    let q = 1.0 - s;
    [
        s * s * q * q * q,
        2.0 * s * q * q * q - 3.0 * s * s * q * q,
        2.0 * q * q * q - 12.0 * s * q * q + 6.0 * s * s * q,
    ]
}

fn paper_c_amp(t: f64) -> [f64; 2] {
    let e = t.exp();
    [20.0 * e * (1.0 + t * t), 20.0 * e * (1.0 + t) * (1.0 + t)]
}

fn paper_p_amp(t: f64) -> [f64; 2] {
    let e = t.exp();
    [400.0 * e * (1.0 + t * t * t), 400.0 * e * (1.0 + t * t * t + 3.0 * t * t)]
}

// mobility 1/μ and its derivative
fn quadratic_mobility(c: f64) -> [f64; 2] {
    [1.0 + c * c, 2.0 * c]
}

fn reciprocal_mobility(c: f64) -> [f64; 2] {
    let d = 1.0 + c * c;
    [1.0 / d, -2.0 * c / (d * d)]
}

fn reciprocal_viscosity() -> ViscosityFn {
    Arc::new(|c| 1.0 / (1.0 + c * c))
}

fn quadratic_viscosity() -> ViscosityFn {
    Arc::new(|c| 1.0 + c * c)
}

const PAPER_DISPERSION: Dispersion = Dispersion {
    molecular: 1.0 / 40.0,
    velocity_scaled: 1.0 / 40.0,
    longitudinal: 0.0,
};

fn paper_fields(id: &'static str, mobility: Mobility, viscosity: ViscosityFn) -> ManufacturedProblem {
    ManufacturedProblem::from_separable(
        id,
        Separable {
            c_base: 1.0,
            c_amp: paper_c_amp,
            c_profile: sin_profile,
            p_base: 3.0,
            p_amp: paper_p_amp,
            p_profile: poly_profile,
            mobility,
            dispersion: PAPER_DISPERSION,
        },
        viscosity,
        1.0e3,
    )
}

/// Two-dimensional benchmark: `μ(c) = 1+c²`, `D(u) = (1+|u|²)/40`,
/// `c = 1 + 20eᵗ(1+t²) sin(x²) sin(y²) (1-x)²(1-y)²`,
/// `p = 3 + 400eᵗ(1+t³) x²y²(1-x)³(1-y)³`.
pub fn problem_2d_paper() -> ManufacturedProblem {
    paper_fields("paper2d", reciprocal_mobility, quadratic_viscosity())
}

/// Same fields with `μ(c) = 1/(1+c²)`, i.e. mobility `1+c²`.
pub fn problem_2d_reciprocal() -> ManufacturedProblem {
    paper_fields("paper2d_reciprocal", quadratic_mobility, reciprocal_viscosity())
}

fn zero_amp(_: f64) -> [f64; 2] {
    [0.0, 0.0]
}

fn unit_amp(_: f64) -> [f64; 2] {
    [1.0, 0.0]
}

/// Constant concentration at rest: `c ≡ 0.5`, `p ≡ 0`, `u ≡ 0`.
pub fn problem_constant() -> ManufacturedProblem {
    ManufacturedProblem::from_separable(
        "constant",
        Separable {
            c_base: 0.5,
            c_amp: zero_amp,
            c_profile: sin_profile,
            p_base: 0.0,
            p_amp: zero_amp,
            p_profile: poly_profile,
            mobility: quadratic_mobility,
            dispersion: PAPER_DISPERSION,
        },
        reciprocal_viscosity(),
        1.0e3,
    )
}

fn cos_profile(s: f64) -> [f64; 3] {
    let (sn, cs) = (PI * s).sin_cos();
    [cs, -PI * sn, -PI * PI * cs]
}

fn unit_mobility(_: f64) -> [f64; 2] {
    [1.0, 0.0]
}

/// Pure Darcy check: `μ ≡ k ≡ 1`, `c ≡ 1`, `p = cos(πx) cos(πy)`.
pub fn problem_linear_darcy() -> ManufacturedProblem {
    ManufacturedProblem::from_separable(
        "linear_darcy",
        Separable {
            c_base: 1.0,
            c_amp: zero_amp,
            c_profile: sin_profile,
            p_base: 0.0,
            p_amp: unit_amp,
            p_profile: cos_profile,
            mobility: unit_mobility,
            dispersion: PAPER_DISPERSION,
        },
        Arc::new(|_| 1.0),
        10.0,
    )
}

/// Full-tensor smoke problem (not a published benchmark): the benchmark
/// fields with `D(u) = (I + u⊗u)/40`.
pub fn problem_tensor_smoke() -> ManufacturedProblem {
    ManufacturedProblem::from_separable(
        "tensor_smoke",
        Separable {
            c_base: 1.0,
            c_amp: paper_c_amp,
            c_profile: sin_profile,
            p_base: 3.0,
            p_amp: paper_p_amp,
            p_profile: poly_profile,
            mobility: reciprocal_mobility,
            dispersion: Dispersion {
                molecular: 1.0 / 40.0,
                velocity_scaled: 0.0,
                longitudinal: 1.0 / 40.0,
            },
        },
        quadratic_viscosity(),
        1.0e3,
    )
}

/// Largest residuals seen by [`residual_check`].
#[derive(Clone, Copy, Debug, Default)]
pub struct ResidualReport {
    pub samples: usize,
    pub concentration: f64,
    pub divergence: f64,
    pub boundary_flux: f64,
}

pub const CONCENTRATION_RESIDUAL_TOL: f64 = 1e-5;
pub const DIVERGENCE_RESIDUAL_TOL: f64 = 1e-6;
pub const BOUNDARY_FLUX_TOL: f64 = 1e-12;
const FD_STEP: f64 = 1e-4;

/// Fourth-order central difference with step [`FD_STEP`].
fn central(f: impl Fn(f64) -> f64, s: f64) -> f64 {
    let h = FD_STEP;
    (8.0 * (f(s + h) - f(s - h)) - (f(s + 2.0 * h) - f(s - 2.0 * h))) / (12.0 * h)
}

/// Finite-difference reconstruction of the PDE residuals, using only the
/// exact `c`, `p` and the coefficient functions.
struct FdOracle<'a> {
    problem: &'a ManufacturedProblem,
}

impl FdOracle<'_> {
    fn c(&self, x: Point2<f64>, t: f64) -> f64 {
        self.problem.exact.concentration(x, t)
    }

    fn grad(&self, f: impl Fn(Point2<f64>) -> f64, x: Point2<f64>) -> Point2<f64> {
        [central(|s| f([s, x[1]]), x[0]), central(|s| f([x[0], s]), x[1])]
    }

    fn velocity(&self, x: Point2<f64>, t: f64) -> Point2<f64> {
        let k = (self.problem.coeffs.permeability)(x);
        let mu = (self.problem.coeffs.viscosity)(self.c(x, t));
        let gp = self.grad(|y| self.problem.exact.pressure(y, t), x);
        [-k / mu * gp[0], -k / mu * gp[1]]
    }

    fn div(&self, f: impl Fn(Point2<f64>) -> Point2<f64>, x: Point2<f64>) -> f64 {
        central(|s| f([s, x[1]])[0], x[0]) + central(|s| f([x[0], s])[1], x[1])
    }

    fn divergence(&self, x: Point2<f64>, t: f64) -> f64 {
        self.div(|y| self.velocity(y, t), x)
    }

    fn concentration(&self, x: Point2<f64>, t: f64) -> f64 {
        let c_t = central(|s| self.c(x, s), t);
        let u = self.velocity(x, t);
        let gc = self.grad(|y| self.c(y, t), x);
        let flux = |y: Point2<f64>| {
            let d = self.problem.coeffs.dispersion.tensor(self.velocity(y, t));
            let g = self.grad(|z| self.c(z, t), y);
            [d[0][0] * g[0] + d[0][1] * g[1], d[1][0] * g[0] + d[1][1] * g[1]]
        };
        c_t + u[0] * gc[0] + u[1] * gc[1] - self.div(flux, x)
    }
}

/// Compares hand-derived forcings to finite differences at random interior
/// points and times `{0, 0.37, 1}` plus 20 random times in `[0, 1]`; checks
/// `u·n = 0` on the boundary.
pub fn residual_check(problem: &ManufacturedProblem, points_per_time: usize, seed: u64) -> ResidualReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut times = vec![0.0, 0.37, 1.0];
    times.extend((0..20).map(|_| rng.random_range(0.0..1.0)));
    let oracle = FdOracle { problem };
    let mut report = ResidualReport::default();
    let margin = 8.0 * FD_STEP;
    for &t in &times {
        for _ in 0..points_per_time {
            let x = [rng.random_range(margin..1.0 - margin), rng.random_range(margin..1.0 - margin)];
            let g = problem.exact.concentration_forcing(x, t);
            let f = problem.exact.velocity_div(x, t);
            report.concentration = report.concentration.max((oracle.concentration(x, t) - g).abs());
            report.divergence = report.divergence.max((oracle.divergence(x, t) - f).abs());
            report.samples += 1;

            let s: f64 = rng.random();
            for (pt, normal) in [
                ([s, 0.0], [0.0, -1.0]),
                ([s, 1.0], [0.0, 1.0]),
                ([0.0, s], [-1.0, 0.0]),
                ([1.0, s], [1.0, 0.0]),
            ] {
                let u = problem.exact.velocity(pt, t);
                report.boundary_flux = report.boundary_flux.max((u[0] * normal[0] + u[1] * normal[1]).abs());
            }
        }
    }
    report
}

/// Fails unless every residual is within tolerance.
pub fn residual_gate(problem: &ManufacturedProblem) -> Result<ResidualReport> {
    let r = residual_check(problem, 44, 0x5eed);
    if r.concentration > CONCENTRATION_RESIDUAL_TOL
        || r.divergence > DIVERGENCE_RESIDUAL_TOL
        || r.boundary_flux > BOUNDARY_FLUX_TOL
    {
        return Err(Error::ResidualGate {
            problem: problem.id.to_string(),
            detail: format!("{r:?}"),
        });
    }
    Ok(r)
}
