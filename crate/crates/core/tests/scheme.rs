use charmix::harness::{run_convergence, ConvergenceReport, StudySpec};
use charmix::scheme::{RunConfig, Simulation};

fn study(problem: &str, t_final: f64) -> ConvergenceReport {
    let mut spec = StudySpec::convergence(problem, false);
    spec.template.t_final = t_final;
    let r = run_convergence(&spec).unwrap();
    assert!(r.complete, "{:?}", r.failure);
    assert!(r.divergence_identity_holds);
    r
}

fn finest(r: &ConvergenceReport, col: &str) -> f64 {
    r.orders(col).and_then(|o| o.finest()).unwrap()
}

#[test]
fn linear_darcy_first_order() {
    let r = study("linear_darcy", 1.0 / 16.0);
    for col in ["err_u_L2", "err_p_L2", "err_u_Hdiv"] {
        let q = finest(&r, col);
        assert!((0.9..=1.1).contains(&q), "{col} order {q}");
    }
    for col in ["err_uhat_L2", "err_phat_L2"] {
        let q = finest(&r, col);
        assert!((1.8..=2.2).contains(&q), "{col} order {q}");
    }
    assert!(r.rows.iter().all(|row| row.err_c_l2 < 1e-12));
}

#[test]
fn tensor_smoke_concentration_second_order() {
    let r = study("tensor_smoke", 1.0 / 16.0);
    let q = finest(&r, "err_c_L2");
    assert!((1.7..=2.3).contains(&q), "concentration order {q}");
}

#[test]
fn repeated_runs_are_identical() {
    let run = || {
        let mut cfg = RunConfig::new("tensor_smoke", 6);
        cfg.t_final = 0.25;
        cfg.tau = 1.0 / 16.0;
        let mut sim = Simulation::new(cfg).unwrap();
        let s = sim.run().unwrap();
        (s.c.coeffs().to_vec(), s.u.coeffs().to_vec(), s.p.coeffs().to_vec())
    };
    assert_eq!(run(), run());
}
