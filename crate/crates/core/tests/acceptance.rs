mod common;

use std::process::ExitCode;
use std::time::Instant;

use charmix::assembly::MixedOrder;
use charmix::harness::{run_convergence, run_stability, ConvergenceReport, StudySpec};

struct Line {
    id: u8,
    ok: bool,
    text: String,
}

fn in_range(v: Option<f64>, lo: f64, hi: f64) -> bool {
    v.is_some_and(|v| (lo..=hi).contains(&v))
}

fn fmt(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |v| format!("{v:.3}"))
}

fn finest(r: &ConvergenceReport, col: &str) -> Option<f64> {
    r.orders(col).and_then(|o| o.finest())
}

fn convergence_lines(r: &ConvergenceReport, out: &mut Vec<Line>) {
    let c = finest(r, "err_c_L2");
    out.push(Line {
        id: 1,
        ok: r.complete && in_range(c, 1.85, 2.15),
        text: format!("concentration order {} in [1.85, 2.15]", fmt(c)),
    });

    let u = finest(r, "err_u_L2");
    let p = finest(r, "err_p_L2");
    let d = finest(r, "err_u_Hdiv");
    out.push(Line {
        id: 2,
        ok: r.complete && [u, p, d].iter().all(|&v| in_range(v, 0.85, 1.15)),
        text: format!("velocity {} pressure {} H(div) {} orders in [0.85, 1.15]", fmt(u), fmt(p), fmt(d)),
    });

    let uh = finest(r, "err_uhat_L2");
    let ph = finest(r, "err_phat_L2");
    let below = !r.rows.is_empty() && r.rows.iter().all(|row| row.err_uhat_l2.is_some_and(|e| e < row.err_u_l2));
    out.push(Line {
        id: 3,
        ok: r.complete && in_range(uh, 1.85, 2.15) && in_range(ph, 1.85, 2.15) && below,
        text: format!("post-processed orders u {} p {} in [1.85, 2.15], u-hat below u at every M: {below}", fmt(uh), fmt(ph)),
    });
}

fn parity_line(post: &ConvergenceReport) -> Line {
    let mut spec = StudySpec::convergence("paper2d", false);
    spec.ms = vec![8, 16];
    spec.template.scheme = MixedOrder::First;
    spec.postprocess = false;
    let direct = match run_convergence(&spec) {
        Ok(r) if r.complete => r,
        Ok(r) => return Line { id: 4, ok: false, text: format!("direct scheme incomplete: {:?}", r.failure) },
        Err(e) => return Line { id: 4, ok: false, text: format!("direct scheme failed: {e}") },
    };
    let mut worst = 0.0f64;
    let mut ok = true;
    for row in &direct.rows {
        let Some(pp) = post.rows.iter().find(|r| r.m == row.m) else {
            ok = false;
            continue;
        };
        for (a, b) in [(row.err_u_l2, pp.err_uhat_l2), (row.err_p_l2, pp.err_phat_l2)] {
            match b {
                Some(b) if a > 0.0 && b > 0.0 => worst = worst.max((a / b).max(b / a)),
                _ => ok = false,
            }
        }
    }
    let ok = ok && worst <= 1.5 && direct.divergence_identity_holds;
    Line { id: 4, ok, text: format!("RT1 direct vs post-processed worst ratio {worst:.3} (<= 1.5) at M = 8, 16") }
}

fn stability_line() -> (Line, bool) {
    let mut spec = StudySpec::stability("paper2d");
    spec.taus = vec![1.0 / 20.0, 1.0 / 40.0];
    let r = match run_stability(&spec) {
        Ok(r) => r,
        Err(e) => return (Line { id: 5, ok: false, text: format!("stability sweep failed: {e}") }, false),
    };
    let col = "err_c_L2";
    let mut ok = r.complete;
    let mut parts = Vec::new();
    let mut plateaus = Vec::new();
    for &tau in &r.taus {
        let s = r.series(tau, col).unwrap_or_default();
        let e = |m| s.iter().find(|x| x.0 == m).map(|x| x.1);
        match (e(32), e(64)) {
            (Some(a), Some(b)) => {
                let rel = (b - a).abs() / a;
                ok &= rel <= 0.25;
                parts.push(format!("tau=1/{:.0}: M64 vs M32 {:.1}%", 1.0 / tau, 100.0 * rel));
                plateaus.push(b);
            }
            _ => ok = false,
        }
    }
    let ratio = (plateaus.len() == 2).then(|| plateaus[0] / plateaus[1]);
    ok &= in_range(ratio, 1.3, 3.5);
    let text = format!(
        "{}; plateau ratio {} in [1.3, 3.5]; solver failures: {}",
        parts.join(", "),
        fmt(ratio),
        r.failure.as_ref().map_or("none".into(), |f| f.message.clone()),
    );
    (Line { id: 5, ok, text }, r.divergence_identity_holds && r.complete)
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut lines = Vec::new();

    let conv = run_convergence(&StudySpec::convergence("paper2d", false));
    let (conv_div, conv_ratio) = match &conv {
        Ok(r) => {
            convergence_lines(r, &mut lines);
            lines.push(parity_line(r));
            (r.divergence_identity_holds && r.complete, r.worst_divergence_ratio)
        }
        Err(e) => {
            for id in 1..=4 {
                lines.push(Line { id, ok: false, text: format!("convergence study failed: {e}") });
            }
            (false, f64::NAN)
        }
    };

    let (stab, stab_div) = stability_line();
    lines.push(stab);

    lines.push(Line {
        id: 6,
        ok: conv_div && stab_div,
        text: format!("per-element divergence identity at every step, worst defect/bound {conv_ratio:.2e} (<= 1)"),
    });

    let props = common::property_suites();
    let failed: Vec<_> = props.iter().filter(|c| !c.ok).collect();
    let detail: Vec<_> = props.iter().map(|c| format!("{}: {}", c.name, c.detail)).collect();
    lines.push(Line {
        id: 7,
        ok: failed.is_empty(),
        text: format!("{} of {} property suites pass [{}]", props.len() - failed.len(), props.len(), detail.join("; ")),
    });

    lines.sort_by_key(|l| l.id);
    for l in &lines {
        println!("criterion {}: {} - {}", l.id, if l.ok { "PASS" } else { "FAIL" }, l.text);
    }
    println!("elapsed {:.1} s", start.elapsed().as_secs_f64());
    if lines.iter().all(|l| l.ok) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
