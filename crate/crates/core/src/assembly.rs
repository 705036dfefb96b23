//! Discrete operators of the characteristics-mixed scheme.
//!
//! The Darcy system is tested as
//!
//! ```text
//! ((μ(c_h)/k) u, v) − (p, ∇·v) = 0
//! (∇·u, φ)                     = (q^I − q^P, φ)
//! ```
//!
//! with `u·n = 0` imposed by dropping boundary edge dofs. The concentration
//! system is `(1/τ)M + A_D + M_qP` with the previous concentration sampled at
//! the characteristic feet `x − τ u_h(x)`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, SaddleSolution, SaddleSolver, SaddleSystem, SparseMatrix};
use crate::mesh::TriMesh;
use crate::problems::CoefficientSet;
use crate::quadrature::{triangle_rule, QuadRule};
use crate::scalar::Point2;
use crate::spaces::{bary_gradients, Field, Space, SpaceKind};

/// Degree of the mixed pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixedOrder {
    /// RT0 velocity, P0 pressure.
    Lowest,
    /// RT1 velocity, discontinuous P1 pressure.
    First,
}

impl MixedOrder {
    pub fn velocity_kind(self) -> SpaceKind {
        match self {
            MixedOrder::Lowest => SpaceKind::Rt0,
            MixedOrder::First => SpaceKind::Rt1,
        }
    }

    pub fn pressure_kind(self) -> SpaceKind {
        match self {
            MixedOrder::Lowest => SpaceKind::P0,
            MixedOrder::First => SpaceKind::P1Disc,
        }
    }

    pub fn index(self) -> usize {
        match self {
            MixedOrder::Lowest => 0,
            MixedOrder::First => 1,
        }
    }
}

/// Discrete pressure-mean functional: `Σ m_i p_i = ∫_Ω p_h`.
pub fn mean_vector(space: &Space<f64>) -> Vec<f64> {
    let mesh = space.mesh();
    match space.kind() {
        SpaceKind::P0 => mesh.areas().to_vec(),
        SpaceKind::P1Disc => mesh.areas().iter().flat_map(|&a| [a / 3.0; 3]).collect(),
        SpaceKind::P1 => {
            let mut m = vec![0.0; mesh.num_nodes()];
            for (e, t) in mesh.elements().iter().enumerate() {
                for &n in t {
                    m[n] += mesh.area(e) / 3.0;
                }
            }
            m
        }
        _ => Vec::new(),
    }
}

fn check_bound(name: &'static str, value: f64, bound: f64, x: Point2<f64>) -> Result<()> {
    if !(value.is_finite() && value >= 1.0 / bound && value <= bound) {
        return Err(Error::CoefficientOutOfBounds {
            name,
            value,
            x: x[0],
            y: x[1],
        });
    }
    Ok(())
}

/// Integral `∫ w ψ_i·ψ_j` over all RT dofs (no boundary conditions).
pub fn weighted_velocity_mass(
    space: &Space<f64>,
    rule: &QuadRule<f64>,
    weight: impl Fn(usize, [f64; 3], Point2<f64>) -> Result<f64> + Sync,
) -> Result<CsrMatrix<f64>> {
    let all: Vec<Option<usize>> = (0..space.ndofs()).map(Some).collect();
    velocity_block(space, rule, &all, &weight)
}

fn velocity_block(
    space: &Space<f64>,
    rule: &QuadRule<f64>,
    map: &[Option<usize>],
    weight: &(impl Fn(usize, [f64; 3], Point2<f64>) -> Result<f64> + Sync),
) -> Result<CsrMatrix<f64>> {
    let mesh = space.mesh();
    let n = space.kind().local_dofs();
    let locals: Vec<[[f64; 8]; 8]> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let jac = 2.0 * mesh.area(e);
            let mut k = [[0.0; 8]; 8];
            for (bary, w) in rule.iter() {
                let x = mesh.point_at(e, bary);
                let wt = weight(e, bary, x)? * w * jac;
                let b = space.vector_basis(e, x);
                for i in 0..n {
                    for j in 0..n {
                        k[i][j] += wt * (b.values[i][0] * b.values[j][0] + b.values[i][1] * b.values[j][1]);
                    }
                }
            }
            Ok(k)
        })
        .collect::<Result<_>>()?;
    let nfree = map.iter().flatten().count();
    let mut a = SparseMatrix::with_capacity(nfree, nfree, locals.len() * n * n);
    for (e, k) in locals.iter().enumerate() {
        let dofs = space.element_dofs(e);
        for (i, &gi) in dofs.as_slice().iter().enumerate() {
            let Some(ri) = map[gi] else { continue };
            for (j, &gj) in dofs.as_slice().iter().enumerate() {
                if let Some(rj) = map[gj] {
                    a.push(ri, rj, k[i][j]);
                }
            }
        }
    }
    Ok(a.finalize())
}

/// Moments `∫_T f φ_i` of a scalar function against a P0 or P1Disc basis.
pub fn pressure_moments(space: &Space<f64>, rule: &QuadRule<f64>, f: impl Fn(Point2<f64>) -> f64 + Sync) -> Vec<f64> {
    moments_and_sup(space, rule, f).0
}

/// Moments together with `max |f|` over the quadrature points.
fn moments_and_sup(space: &Space<f64>, rule: &QuadRule<f64>, f: impl Fn(Point2<f64>) -> f64 + Sync) -> (Vec<f64>, f64) {
    let mesh = space.mesh();
    let n = space.kind().local_dofs();
    let locals: Vec<([f64; 3], f64)> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let jac = 2.0 * mesh.area(e);
            let mut out = [0.0; 3];
            let mut sup = 0.0f64;
            for (bary, w) in rule.iter() {
                let fx = f(mesh.point_at(e, bary));
                sup = sup.max(fx.abs());
                let v = fx * w * jac;
                let phi = space.scalar_basis(bary);
                for i in 0..n {
                    out[i] += v * phi[i];
                }
            }
            (out, sup)
        })
        .collect();
    let mut moments = vec![0.0; space.ndofs()];
    let mut sup = 0.0f64;
    for (e, (m, s)) in locals.iter().enumerate() {
        sup = sup.max(*s);
        for (i, &g) in space.element_dofs(e).as_slice().iter().enumerate() {
            moments[g] += m[i];
        }
    }
    (moments, sup)
}

/// Moments `∫_T (∇·u_h) φ_i` of an RT field's divergence.
pub fn divergence_moments(u: &Field<f64>, pressure: &Space<f64>, rule: &QuadRule<f64>) -> Vec<f64> {
    let mesh = u.mesh();
    let n = pressure.kind().local_dofs();
    let mut moments = vec![0.0; pressure.ndofs()];
    for e in 0..mesh.num_elements() {
        let jac = 2.0 * mesh.area(e);
        let dofs = pressure.element_dofs(e);
        for (bary, w) in rule.iter() {
            let (_, div) = u.vector_at(e, mesh.point_at(e, bary));
            let phi = pressure.scalar_basis(bary);
            for i in 0..n {
                moments[dofs.as_slice()[i]] += div * phi[i] * w * jac;
            }
        }
    }
    moments
}

/// Spaces, boundary handling and quadrature for repeated mixed solves.
#[derive(Debug, Clone)]
pub struct MixedAssembler {
    order: MixedOrder,
    velocity: Arc<Space<f64>>,
    pressure: Arc<Space<f64>>,
    // global velocity dof -> row in the reduced system
    free: Vec<Option<usize>>,
    free_dofs: Vec<usize>,
    mean: Vec<f64>,
    rule: QuadRule<f64>,
    load_rule: QuadRule<f64>,
    coupling: CsrMatrix<f64>,
}

/// Degree of the rule used for source moments in the divergence equation.
pub const LOAD_DEGREE: usize = 8;

impl MixedAssembler {
    pub fn new(mesh: Arc<TriMesh<f64>>, order: MixedOrder, quad_degree: usize) -> Result<Self> {
        let velocity = Space::new(order.velocity_kind(), mesh.clone());
        let pressure = Space::new(order.pressure_kind(), mesh.clone());
        let mut free = vec![Some(0); velocity.ndofs()];
        for &edge in mesh.boundary_edges() {
            let base = velocity.edge_dof_base(edge);
            for k in 0..velocity.dofs_per_edge() {
                free[base + k] = None;
            }
        }
        let mut free_dofs = Vec::new();
        for (g, slot) in free.iter_mut().enumerate() {
            if slot.is_some() {
                *slot = Some(free_dofs.len());
                free_dofs.push(g);
            }
        }
        let rule = triangle_rule(quad_degree)?;
        let load_rule = triangle_rule(LOAD_DEGREE.max(quad_degree))?;
        let mean = mean_vector(&pressure);
        let mut this = Self {
            order,
            velocity,
            pressure,
            free,
            free_dofs,
            mean,
            rule,
            load_rule,
            coupling: CsrMatrix::identity(0),
        };
        this.coupling = this.assemble_coupling();
        Ok(this)
    }

    pub fn order(&self) -> MixedOrder {
        self.order
    }

    pub fn velocity_space(&self) -> &Arc<Space<f64>> {
        &self.velocity
    }

    pub fn pressure_space(&self) -> &Arc<Space<f64>> {
        &self.pressure
    }

    pub fn load_rule(&self) -> &QuadRule<f64> {
        &self.load_rule
    }

    /// Number of velocity unknowns after removing boundary dofs.
    pub fn num_free(&self) -> usize {
        self.free_dofs.len()
    }

    // B_ij = −∫ φ_i ∇·ψ_j; the divergence of an RT1 function is P1 so the
    // assembly rule integrates it exactly.
    fn assemble_coupling(&self) -> CsrMatrix<f64> {
        let mesh = self.velocity.mesh();
        let nv = self.velocity.kind().local_dofs();
        let np = self.pressure.kind().local_dofs();
        let mut b = SparseMatrix::with_capacity(self.pressure.ndofs(), self.num_free(), mesh.num_elements() * nv * np);
        for e in 0..mesh.num_elements() {
            let jac = 2.0 * mesh.area(e);
            let mut k = [[0.0; 8]; 3];
            for (bary, w) in self.rule.iter() {
                let basis = self.velocity.vector_basis(e, mesh.point_at(e, bary));
                let phi = self.pressure.scalar_basis(bary);
                for i in 0..np {
                    for j in 0..nv {
                        k[i][j] -= w * jac * phi[i] * basis.divs[j];
                    }
                }
            }
            let pd = self.pressure.element_dofs(e);
            let vd = self.velocity.element_dofs(e);
            for (i, &gi) in pd.as_slice().iter().enumerate() {
                for (j, &gj) in vd.as_slice().iter().enumerate() {
                    if let Some(c) = self.free[gj] {
                        b.push(gi, c, k[i][j]);
                    }
                }
            }
        }
        b.finalize()
    }

    /// Builds the saddle system for concentration `c_h` (P1) at time `t`.
    pub fn assemble(&self, coeffs: &CoefficientSet, c_h: &Field<f64>, t: f64) -> Result<MixedSystem> {
        if c_h.kind() != SpaceKind::P1 {
            return Err(Error::KindMismatch {
                expected: "P1",
                found: c_h.kind().name(),
            });
        }
        let weight = |e: usize, bary: [f64; 3], x: Point2<f64>| -> Result<f64> {
            let mu = (coeffs.viscosity)(c_h.scalar_at(e, bary));
            let k = (coeffs.permeability)(x);
            check_bound("viscosity", mu, coeffs.viscosity_bound, x)?;
            check_bound("permeability", k, coeffs.permeability_bound, x)?;
            Ok(mu / k)
        };
        let a = velocity_block(&self.velocity, &self.rule, &self.free, &weight)?;
        let source = |x: Point2<f64>| (coeffs.flow_source)(x, t);
        let (load, source_sup) = moments_and_sup(&self.pressure, &self.load_rule, source);
        Ok(MixedSystem {
            system: SaddleSystem {
                a,
                b: self.coupling.clone(),
                f_u: vec![0.0; self.num_free()],
                f_p: load.iter().map(|v| -v).collect(),
                mean: self.mean.clone(),
            },
            load,
            source_sup,
        })
    }

    /// Solves an assembled system and scatters the velocity back to all dofs.
    pub fn solve(&self, sys: &MixedSystem, solver: &mut SaddleSolver, tol: f64) -> Result<MixedSolution> {
        let sol = solver.solve(&sys.system, tol)?;
        let mut coeffs = vec![0.0; self.velocity.ndofs()];
        for (k, &g) in self.free_dofs.iter().enumerate() {
            coeffs[g] = sol.u[k];
        }
        let u = Field::from_coeffs(&self.velocity, coeffs)?;
        let p = Field::from_coeffs(&self.pressure, sol.p.clone())?;
        let moments = divergence_moments(&u, &self.pressure, &self.load_rule);
        let divergence_defect = moments
            .iter()
            .zip(&sys.load)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        Ok(MixedSolution {
            u,
            p,
            divergence_defect,
            source_sup: sys.source_sup,
            compatibility_defect: sol.lambda,
            raw: sol,
        })
    }
}

/// Assembled Darcy saddle system on the free velocity dofs.
#[derive(Debug, Clone)]
pub struct MixedSystem {
    pub system: SaddleSystem<f64>,
    /// `∫_T (q^I − q^P) φ_i`.
    pub load: Vec<f64>,
    /// Largest `|q^I − q^P|` over the load quadrature points.
    pub source_sup: f64,
}

#[derive(Debug, Clone)]
pub struct MixedSolution {
    pub u: Field<f64>,
    pub p: Field<f64>,
    /// `max_i |∫ (∇·u_h) φ_i − ∫ (q^I − q^P) φ_i|`.
    pub divergence_defect: f64,
    pub source_sup: f64,
    /// Multiplier of the mean constraint; equals the discrete source
    /// imbalance `Σ ∫ f φ_i / Σ m_i`.
    pub compatibility_defect: f64,
    pub raw: SaddleSolution<f64>,
}

impl MixedSolution {
    /// `divergence_defect ≤ 1e-10 (1 + ‖f‖_∞)`.
    pub fn divergence_identity_holds(&self) -> bool {
        self.divergence_defect <= DIVERGENCE_IDENTITY_TOL * (1.0 + self.source_sup)
    }
}

pub const DIVERGENCE_IDENTITY_TOL: f64 = 1e-10;

/// One-shot mixed assembly.
pub fn assemble_mixed(
    mesh: Arc<TriMesh<f64>>,
    coeffs: &CoefficientSet,
    c_h: &Field<f64>,
    t: f64,
    order: MixedOrder,
    quad_degree: usize,
) -> Result<(MixedAssembler, MixedSystem)> {
    let asm = MixedAssembler::new(mesh, order, quad_degree)?;
    let sys = asm.assemble(coeffs, c_h, t)?;
    Ok((asm, sys))
}

/// Linear system for the next concentration.
#[derive(Debug, Clone)]
pub struct ConcentrationSystem {
    pub matrix: CsrMatrix<f64>,
    pub rhs: Vec<f64>,
    /// Quadrature points whose characteristic foot left the domain.
    pub clamped_feet: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct ConcentrationOptions {
    pub tau: f64,
    pub t_next: f64,
    pub clamp_feet: bool,
}

/// Assembles `((1/τ)M + A_D + M_qP) c = (1/τ)(c_old ∘ foot, φ) + (c₁q^I, φ)`.
pub fn assemble_concentration(
    coeffs: &CoefficientSet,
    u_h: &Field<f64>,
    c_old: &Field<f64>,
    rule: &QuadRule<f64>,
    opts: ConcentrationOptions,
) -> Result<ConcentrationSystem> {
    if !u_h.kind().is_vector() {
        return Err(Error::KindMismatch {
            expected: "RT0|RT1",
            found: u_h.kind().name(),
        });
    }
    if c_old.kind() != SpaceKind::P1 {
        return Err(Error::KindMismatch {
            expected: "P1",
            found: c_old.kind().name(),
        });
    }
    if !(opts.tau > 0.0) {
        return Err(Error::InvalidConfig(format!("time step must be positive, got {}", opts.tau)));
    }
    let mesh = c_old.mesh();
    let inv_tau = 1.0 / opts.tau;
    let locals: Vec<([[f64; 3]; 3], [f64; 3], usize)> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let jac = 2.0 * mesh.area(e);
            let g = bary_gradients(mesh, e);
            let mut k = [[0.0; 3]; 3];
            let mut r = [0.0; 3];
            let mut clamped = 0;
            for (bary, w) in rule.iter() {
                let wj = w * jac;
                let x = mesh.point_at(e, bary);
                let (u, _) = u_h.vector_at(e, x);
                let d = coeffs.dispersion.tensor(u);
                let qp = (coeffs.production)(x, opts.t_next);
                let raw = [x[0] - opts.tau * u[0], x[1] - opts.tau * u[1]];
                let foot = if opts.clamp_feet {
                    let f = mesh.clamp_to_domain(raw);
                    if f != raw {
                        clamped += 1;
                    }
                    f
                } else {
                    raw
                };
                let loc = mesh.locate(foot)?;
                let c_foot = c_old.scalar_at(loc.element, loc.bary);
                let src = inv_tau * c_foot + (coeffs.injection)(x, opts.t_next);
                for i in 0..3 {
                    r[i] += wj * src * bary[i];
                    let dg = [
                        d[0][0] * g[i][0] + d[0][1] * g[i][1],
                        d[1][0] * g[i][0] + d[1][1] * g[i][1],
                    ];
                    for j in 0..3 {
                        k[i][j] += wj * ((inv_tau + qp) * bary[i] * bary[j] + dg[0] * g[j][0] + dg[1] * g[j][1]);
                    }
                }
            }
            Ok((k, r, clamped))
        })
        .collect::<Result<_>>()?;
    let n = mesh.num_nodes();
    let mut a = SparseMatrix::with_capacity(n, n, 9 * locals.len());
    let mut rhs = vec![0.0; n];
    let mut clamped_feet = 0;
    for (e, (k, r, c)) in locals.iter().enumerate() {
        let t = mesh.elements()[e];
        for i in 0..3 {
            rhs[t[i]] += r[i];
            for j in 0..3 {
                a.push(t[i], t[j], k[i][j]);
            }
        }
        clamped_feet += c;
    }
    Ok(ConcentrationSystem {
        matrix: a.finalize(),
        rhs,
        clamped_feet,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::solve_spd;
    use crate::problems::{problem_2d_paper, problem_constant, Dispersion};
    use crate::spaces::{interpolate_p1, interpolate_rt};

    fn mesh(m: usize) -> Arc<TriMesh<f64>> {
        Arc::new(TriMesh::uniform(m))
    }

    fn quiet_coeffs() -> CoefficientSet {
        let mut c = problem_constant().coeffs;
        c.dispersion = Dispersion {
            molecular: 0.01,
            velocity_scaled: 0.0,
            longitudinal: 0.0,
        };
        c
    }

    #[test]
    fn rt0_mass_on_two_triangles() {
        // dense oracle: Σ_T ∫ ψ_i·ψ_j with ψ = s(x − p)/(2|T|), integrated exactly
        // through the vertex formula ∫_T (x−a)·(x−b) = |T|/12 (Σ ... ) via 6-point sampling
        let m = mesh(1);
        let space = Space::new(SpaceKind::Rt0, m.clone());
        let rule = triangle_rule(2).unwrap();
        let a = weighted_velocity_mass(&space, &rule, |_, _, _| Ok(1.0)).unwrap();
        let mut dense = vec![vec![0.0; m.num_edges()]; m.num_edges()];
        for e in 0..2 {
            let v = m.vertices(e);
            let area = m.area(e);
            let ee = m.element_edges(e);
            // ∫_T (x−p_i)·(x−p_j) = |T| ( Σ_k (v_k−p_i)·(v_k−p_j) + (c3−p_i)·(c3−p_j)·9 ) / 12
            // where c3 is the centroid: the exact formula for quadratics
            let c = [(v[0][0] + v[1][0] + v[2][0]) / 3.0, (v[0][1] + v[1][1] + v[2][1]) / 3.0];
            for i in 0..3 {
                for j in 0..3 {
                    let f = |x: [f64; 2]| (x[0] - v[i][0]) * (x[0] - v[j][0]) + (x[1] - v[i][1]) * (x[1] - v[j][1]);
                    let integral = area * (f(v[0]) + f(v[1]) + f(v[2]) + 9.0 * f(c)) / 12.0;
                    let s = (ee.signs[i] * ee.signs[j]) as f64;
                    dense[ee.ids[i]][ee.ids[j]] += s * integral / (4.0 * area * area);
                }
            }
        }
        for i in 0..m.num_edges() {
            for j in 0..m.num_edges() {
                assert!((a.get(i, j) - dense[i][j]).abs() < 1e-14, "{i} {j}");
            }
        }
    }

    #[test]
    fn zero_source_gives_zero_load() {
        let m = mesh(4);
        let coeffs = problem_constant().coeffs;
        let c = interpolate_p1(&Space::new(SpaceKind::P1, m.clone()), |_| 0.5).unwrap();
        for order in [MixedOrder::Lowest, MixedOrder::First] {
            let (_, sys) = assemble_mixed(m.clone(), &coeffs, &c, 0.3, order, 4).unwrap();
            assert!(sys.system.f_p.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn divergence_identity_both_orders() {
        let m = mesh(8);
        let p = problem_2d_paper();
        let c = interpolate_p1(&Space::new(SpaceKind::P1, m.clone()), |x| p.exact.concentration(x, 0.4)).unwrap();
        for order in [MixedOrder::Lowest, MixedOrder::First] {
            let asm = MixedAssembler::new(m.clone(), order, 4).unwrap();
            let sys = asm.assemble(&p.coeffs, &c, 0.4).unwrap();
            let sol = asm.solve(&sys, &mut SaddleSolver::new(), 1e-11).unwrap();
            assert!(sol.divergence_identity_holds(), "{order:?}: {} (λ = {})", sol.divergence_defect, sol.compatibility_defect);
            let mean: f64 = sol.p.coeffs().iter().zip(mean_vector(asm.pressure_space())).map(|(a, b)| a * b).sum();
            assert!(mean.abs() < 1e-10);
        }
    }

    #[test]
    fn boundary_fluxes_vanish() {
        let m = mesh(4);
        let p = problem_2d_paper();
        let c = interpolate_p1(&Space::new(SpaceKind::P1, m.clone()), |x| p.exact.concentration(x, 0.0)).unwrap();
        let asm = MixedAssembler::new(m.clone(), MixedOrder::First, 4).unwrap();
        let sol = asm.solve(&asm.assemble(&p.coeffs, &c, 0.0).unwrap(), &mut SaddleSolver::new(), 1e-11).unwrap();
        for &edge in m.boundary_edges() {
            assert_eq!(sol.u.coeffs()[2 * edge], 0.0);
            assert_eq!(sol.u.coeffs()[2 * edge + 1], 0.0);
        }
    }

    #[test]
    fn viscosity_bound_violation() {
        let m = mesh(2);
        let mut coeffs = problem_constant().coeffs;
        coeffs.viscosity = Arc::new(|_| 1e6);
        let c = Field::zeros(&Space::new(SpaceKind::P1, m.clone()));
        let err = assemble_mixed(m, &coeffs, &c, 0.0, MixedOrder::Lowest, 4).unwrap_err();
        assert!(matches!(err, Error::CoefficientOutOfBounds { name: "viscosity", .. }));
    }

    fn opts(tau: f64) -> ConcentrationOptions {
        ConcentrationOptions {
            tau,
            t_next: tau,
            clamp_feet: true,
        }
    }

    #[test]
    fn constants_preserved_at_rest() {
        let m = mesh(6);
        let coeffs = quiet_coeffs();
        let p1 = Space::new(SpaceKind::P1, m.clone());
        let u = Field::zeros(&Space::new(SpaceKind::Rt0, m.clone()));
        let c = interpolate_p1(&p1, |_| 1.0).unwrap();
        let rule = triangle_rule(4).unwrap();
        let sys = assemble_concentration(&coeffs, &u, &c, &rule, opts(0.05)).unwrap();
        assert!(sys.matrix.relative_asymmetry() < 1e-15);
        let x = solve_spd(&sys.matrix, &sys.rhs, 1e-12).unwrap().x;
        assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-10));
        // rhs is (1/τ) M c_old
        let mass_c: Vec<f64> = sys.matrix.apply(&c.coeffs().to_vec());
        for (a, b) in mass_c.iter().zip(&sys.rhs) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constants_preserved_under_rotation() {
        let m = mesh(8);
        let coeffs = quiet_coeffs();
        let p1 = Space::new(SpaceKind::P1, m.clone());
        let u = interpolate_rt(&Space::new(SpaceKind::Rt0, m.clone()), |x| [-(x[1] - 0.5), x[0] - 0.5]).unwrap();
        let c = interpolate_p1(&p1, |_| 0.7).unwrap();
        let rule = triangle_rule(4).unwrap();
        let sys = assemble_concentration(&coeffs, &u, &c, &rule, opts(0.1)).unwrap();
        let x = solve_spd(&sys.matrix, &sys.rhs, 1e-12).unwrap().x;
        assert!(x.iter().all(|v| (v - 0.7).abs() < 1e-10));
        assert!(sys.clamped_feet > 0);
    }

    #[test]
    fn shifted_feet_for_uniform_flow() {
        // u = (1, 0), c_old = x: rhs_i = (1/τ) ∫ (x − τ) φ_i away from the inflow side
        let m = mesh(8);
        let coeffs = quiet_coeffs();
        let p1 = Space::new(SpaceKind::P1, m.clone());
        let u = interpolate_rt(&Space::new(SpaceKind::Rt0, m.clone()), |_| [1.0, 0.0]).unwrap();
        let c = interpolate_p1(&p1, |x| x[0]).unwrap();
        let tau = 0.1;
        let rule = triangle_rule(4).unwrap();
        let sys = assemble_concentration(&coeffs, &u, &c, &rule, opts(tau)).unwrap();
        let fine = triangle_rule::<f64>(8).unwrap();
        let mut expect = vec![0.0; m.num_nodes()];
        let mut touches_inflow = vec![false; m.num_nodes()];
        for e in 0..m.num_elements() {
            let t = m.elements()[e];
            let jac = 2.0 * m.area(e);
            let v = m.vertices(e);
            if v.iter().any(|p| p[0] < tau + 1e-12) {
                for &n in &t {
                    touches_inflow[n] = true;
                }
            }
            for (b, w) in fine.iter() {
                let x = m.point_at(e, b);
                for i in 0..3 {
                    expect[t[i]] += w * jac * (x[0] - tau) / tau * b[i];
                }
            }
        }
        let mut checked = 0;
        for n in 0..m.num_nodes() {
            if !touches_inflow[n] {
                assert!((sys.rhs[n] - expect[n]).abs() < 1e-12, "node {n}");
                checked += 1;
            }
        }
        assert!(checked > 40);
    }

    #[test]
    fn unclamped_feet_fail_outside() {
        let m = mesh(4);
        let coeffs = quiet_coeffs();
        let u = interpolate_rt(&Space::new(SpaceKind::Rt0, m.clone()), |_| [1.0, 0.0]).unwrap();
        let c = Field::zeros(&Space::new(SpaceKind::P1, m.clone()));
        let rule = triangle_rule(4).unwrap();
        let o = ConcentrationOptions {
            clamp_feet: false,
            ..opts(0.5)
        };
        assert!(matches!(
            assemble_concentration(&coeffs, &u, &c, &rule, o),
            Err(Error::PointOutsideDomain { .. })
        ));
    }

    #[test]
    fn rejects_wrong_kinds() {
        let m = mesh(2);
        let coeffs = quiet_coeffs();
        let c = Field::zeros(&Space::new(SpaceKind::P1, m.clone()));
        let rule = triangle_rule(4).unwrap();
        assert!(assemble_concentration(&coeffs, &c, &c, &rule, opts(0.1)).is_err());
    }
}
