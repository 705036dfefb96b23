#![allow(dead_code)]

use std::sync::Arc;

use charmix::harness::{run_single, StudySpec};
use charmix::mesh::{geom_eps, TriMesh};
use charmix::problems::{
    by_id, residual_check, CONCENTRATION_RESIDUAL_TOL, DIVERGENCE_RESIDUAL_TOL, PROBLEM_IDS,
};
use charmix::quadrature::triangle_rule;
use charmix::scheme::{RunConfig, Simulation};
use charmix::spaces::{interpolate_rt, Field, Space, SpaceKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Check {
    pub name: &'static str,
    pub ok: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, ok: bool, detail: String) -> Self {
        Self { name, ok, detail }
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `∫ x^a y^b` over the reference triangle `(0,0), (1,0), (0,1)`.
pub fn reference_monomial(a: u32, b: u32) -> f64 {
    factorial(a) * factorial(b) / factorial(a + b + 2)
}

pub fn quadrature_exactness() -> Check {
    let mut worst = 0.0f64;
    for degree in 1..=8 {
        let rule = triangle_rule::<f64>(degree).unwrap();
        for a in 0..=degree as u32 {
            for b in 0..=(degree as u32 - a) {
                let q: f64 = rule.iter().map(|(l, w)| w * l[1].powi(a as i32) * l[2].powi(b as i32)).sum();
                worst = worst.max((q - reference_monomial(a, b)).abs());
            }
        }
    }
    Check::new("quadrature exactness", worst <= 1e-13, format!("max monomial error {worst:.2e} (tol 1e-13)"))
}

/// Global evaluation of an RT field, using the lowest-id containing element.
fn eval_global(f: &Field<f64>, x: [f64; 2]) -> [f64; 2] {
    let loc = f.mesh().locate(x).unwrap();
    f.eval_rt(loc.element, x).unwrap()
}

pub fn rt_duality_error(kind: SpaceKind, m: usize) -> f64 {
    let space = Space::new(kind, Arc::new(TriMesh::uniform(m)));
    let n = space.ndofs();
    let mut worst = 0.0f64;
    for j in 0..n {
        let mut coeffs = vec![0.0; n];
        coeffs[j] = 1.0;
        let phi = Field::from_coeffs(&space, coeffs).unwrap();
        let back = interpolate_rt(&space, |x| eval_global(&phi, x)).unwrap();
        for (i, &v) in back.coeffs().iter().enumerate() {
            let expect = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((v - expect).abs());
        }
    }
    worst
}

pub fn rt_reproduction_error(kind: SpaceKind, m: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mesh = Arc::new(TriMesh::uniform(m));
    let space = Space::new(kind, mesh.clone());
    let c: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let v = |x: [f64; 2]| -> [f64; 2] {
        match kind {
            // RT0 = P0² + x P0
            SpaceKind::Rt0 => [c[0] + c[2] * x[0], c[1] + c[2] * x[1]],
            // RT1 ⊇ P1² + x (homogeneous P1)
            _ => {
                let h = c[4] * x[0] + c[5] * x[1];
                [
                    c[0] + c[1] * x[0] + c[2] * x[1] + x[0] * h,
                    c[3] - c[2] * x[0] + c[1] * x[1] + x[1] * h,
                ]
            }
        }
    };
    let f = interpolate_rt(&space, &v).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let e = rng.random_range(0..mesh.num_elements());
        let (mut a, mut b): (f64, f64) = (rng.random(), rng.random());
        if a + b > 1.0 {
            (a, b) = (1.0 - a, 1.0 - b);
        }
        let x = mesh.point_at(e, [1.0 - a - b, a, b]);
        let got = f.eval_rt(e, x).unwrap();
        let want = v(x);
        worst = worst.max((got[0] - want[0]).abs()).max((got[1] - want[1]).abs());
    }
    worst
}

pub fn rt_duality() -> Check {
    let d0 = rt_duality_error(SpaceKind::Rt0, 3);
    let d1 = rt_duality_error(SpaceKind::Rt1, 3);
    let r0 = rt_reproduction_error(SpaceKind::Rt0, 5, 1);
    let r1 = rt_reproduction_error(SpaceKind::Rt1, 5, 2);
    let worst = d0.max(d1).max(r0).max(r1);
    Check::new(
        "RT0/RT1 duality and reproduction",
        worst <= 1e-12,
        format!("duality {d0:.1e}/{d1:.1e}, reproduction {r0:.1e}/{r1:.1e} (tol 1e-12)"),
    )
}

/// Uniform mesh with interior nodes jittered by up to `0.3 h`.
pub fn jittered_mesh(m: usize, seed: u64) -> TriMesh<f64> {
    let base = TriMesh::<f64>::uniform(m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1.0 / m as f64;
    let nodes = base
        .nodes()
        .iter()
        .map(|&[x, y]| {
            let interior = |s: f64| s > 1e-12 && s < 1.0 - 1e-12;
            if interior(x) && interior(y) {
                [x + 0.3 * h * rng.random_range(-1.0..1.0), y + 0.3 * h * rng.random_range(-1.0..1.0)]
            } else {
                [x, y]
            }
        })
        .collect();
    TriMesh::new(nodes, base.elements().to_vec()).unwrap()
}

fn brute_force(mesh: &TriMesh<f64>, x: [f64; 2]) -> Option<usize> {
    let eps = geom_eps::<f64>();
    (0..mesh.num_elements()).find(|&e| mesh.barycentric(e, x).iter().all(|&l| l >= -eps))
}

pub fn locate_mismatches(mesh: &TriMesh<f64>, n: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for _ in 0..n {
        let x = [rng.random::<f64>(), rng.random::<f64>()];
        if mesh.locate(x).ok().map(|l| l.element) != brute_force(mesh, x) {
            bad += 1;
        }
    }
    bad
}

pub fn point_location() -> Check {
    let a = locate_mismatches(&TriMesh::uniform(13), 10_000, 7);
    let b = locate_mismatches(&jittered_mesh(16, 3), 10_000, 8);
    Check::new(
        "point location vs brute force",
        a == 0 && b == 0,
        format!("mismatches {a} (uniform M=13), {b} (jittered M=16) out of 10000 each"),
    )
}

pub fn constant_preservation() -> Check {
    let mut cfg = RunConfig::new("constant", 8);
    cfg.tau = 0.125;
    let mut sim = Simulation::new(cfg).unwrap();
    let s = sim.run().unwrap();
    let dc = s.c.coeffs().iter().map(|v| (v - 0.5).abs()).fold(0.0, f64::max);
    let du = s.u.coeffs().iter().map(|v| v.abs()).fold(0.0, f64::max);
    Check::new(
        "constant-state preservation",
        dc <= 1e-10 && du <= 1e-10,
        format!("max |c - 0.5| = {dc:.1e}, max |u| = {du:.1e} after {} steps (tol 1e-10)", sim.steps()),
    )
}

pub fn residual_oracle() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for id in PROBLEM_IDS {
        let r = residual_check(&by_id(id).unwrap(), 44, 0x5eed);
        ok &= r.concentration <= CONCENTRATION_RESIDUAL_TOL && r.divergence <= DIVERGENCE_RESIDUAL_TOL;
        parts.push(format!("{id} {:.1e}/{:.1e}", r.concentration, r.divergence));
    }
    Check::new("PDE-residual oracle", ok, parts.join(", "))
}

pub fn csv_determinism() -> Check {
    let read = || {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::new("paper2d", 8);
        cfg.t_final = 0.25;
        run_single(&StudySpec::single(cfg).with_out_dir(dir.path())).unwrap();
        std::fs::read(dir.path().join("single.csv")).unwrap()
    };
    let (a, b) = (read(), read());
    Check::new("byte-identical CSV", a == b, format!("{} bytes, identical: {}", a.len(), a == b))
}

pub fn property_suites() -> Vec<Check> {
    vec![
        quadrature_exactness(),
        rt_duality(),
        point_location(),
        constant_preservation(),
        residual_oracle(),
        csv_determinism(),
    ]
}
