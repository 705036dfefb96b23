use std::path::PathBuf;
use std::process::ExitCode;

use charmix::assembly::MixedOrder;
use charmix::harness::{
    run_convergence, run_single, run_stability, write_failure, FailureRecord, FileConfig, StudyKind, StudySpec,
};
use charmix::scheme::RunConfig;
use charmix::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(version, about = "Characteristics-mixed FEM convergence and stability studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Error table and orders with τ = 1/M².
    Convergence(Opts),
    /// Errors at fixed τ over a range of M.
    Stability(Opts),
    /// One run and its error row.
    Single(Opts),
}

#[derive(Args, Clone, Default)]
struct Opts {
    /// Problem id (paper2d, paper2d_reciprocal, constant, linear_darcy, tensor_smoke).
    #[arg(long)]
    problem: Option<String>,

    /// Mesh sizes, comma separated.
    #[arg(long = "M", value_delimiter = ',')]
    m: Option<Vec<usize>>,

    /// Time steps, comma separated; `1/20` style fractions allowed.
    #[arg(long, value_delimiter = ',', value_parser = parse_fraction)]
    tau: Option<Vec<f64>>,

    /// Final time.
    #[arg(long = "T")]
    t_final: Option<f64>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long)]
    quad_assembly: Option<usize>,

    #[arg(long)]
    quad_norm: Option<usize>,

    /// Relative tolerance of the CG and saddle-point solves.
    #[arg(long)]
    tol: Option<f64>,

    /// Mixed pair in the time loop.
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<MixedOrder>,

    /// Settings file (JSON or `key = value` lines); flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Include M = 64 in convergence studies.
    #[arg(long)]
    full: bool,
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
            let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
            a / b
        }
        None => s.trim().parse().map_err(|e| format!("{e}"))?,
    };
    Ok(v)
}

fn parse_scheme(s: &str) -> Result<MixedOrder, String> {
    match s {
        "lowest" | "rt0" => Ok(MixedOrder::Lowest),
        "first" | "rt1" => Ok(MixedOrder::First),
        _ => Err(format!("unknown scheme `{s}` (lowest | first)")),
    }
}

struct Resolved {
    spec: StudySpec,
}

fn resolve(kind: StudyKind, opts: &Opts) -> Result<Resolved, Error> {
    let file = match &opts.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let problem = opts.problem.clone().or(file.problem).unwrap_or_else(|| "paper2d".into());
    let full = opts.full || file.full.unwrap_or(false);
    let ms = opts.m.clone().or(file.m);
    let taus = opts.tau.clone().or(file.tau);
    let mut spec = match kind {
        StudyKind::Convergence => StudySpec::convergence(&problem, full),
        StudyKind::Stability => StudySpec::stability(&problem),
        StudyKind::Single => {
            let m = ms.as_ref().and_then(|v| v.first().copied()).unwrap_or(8);
            StudySpec::single(RunConfig::new(&problem, m))
        }
    };
    if let Some(ms) = ms {
        spec.ms = ms;
    }
    if let Some(taus) = taus {
        spec.taus = taus;
    }
    let t = &mut spec.template;
    if let Some(v) = opts.t_final.or(file.t_final) {
        t.t_final = v;
    }
    if let Some(v) = opts.quad_assembly.or(file.quad_assembly) {
        t.quad_assembly = v;
    }
    if let Some(v) = opts.quad_norm.or(file.quad_norm) {
        t.quad_norm = v;
    }
    if let Some(v) = opts.tol.or(file.tol) {
        t.cg_tol = v;
        t.saddle_tol = v;
    }
    if let Some(v) = opts.scheme.or(file.scheme) {
        t.scheme = v;
    }
    spec.postprocess = spec.template.scheme == MixedOrder::Lowest;
    let out = opts
        .out
        .clone()
        .or(file.out)
        .unwrap_or_else(|| PathBuf::from("results").join(kind.name()));
    spec.out_dir = Some(out);
    Ok(Resolved { spec })
}

fn fail(record: &FailureRecord, out: Option<&PathBuf>) -> ExitCode {
    if let Some(dir) = out {
        let _ = write_failure(dir, record);
    }
    eprintln!("{}", serde_json::to_string(record).unwrap_or_else(|_| record.message.clone()));
    ExitCode::FAILURE
}

fn run(kind: StudyKind, opts: &Opts) -> ExitCode {
    let spec = match resolve(kind, opts) {
        Ok(r) => r.spec,
        Err(e) => return fail(&FailureRecord::from_error(&e), opts.out.as_ref()),
    };
    let out = spec.out_dir.clone();
    let result = match kind {
        StudyKind::Convergence => run_convergence(&spec).map(|r| (r.markdown(), r.failure)),
        StudyKind::Stability => run_stability(&spec).map(|r| (r.markdown(), r.failure)),
        StudyKind::Single => run_single(&spec).map(|o| {
            let r = &o.row;
            let text = format!(
                "M={} tau={} err_c_L2={:.4e} err_u_L2={:.4e} err_u_Hdiv={:.4e} err_p_L2={:.4e} err_uhat_L2={} err_phat_L2={} divergence_identity={}\n",
                r.m,
                r.tau,
                r.err_c_l2,
                r.err_u_l2,
                r.err_u_hdiv,
                r.err_p_l2,
                r.err_uhat_l2.map_or("-".into(), |v| format!("{v:.4e}")),
                r.err_phat_l2.map_or("-".into(), |v| format!("{v:.4e}")),
                if o.divergence_identity_holds() { "ok" } else { "violated" },
            );
            (text, None)
        }),
    };
    match result {
        Ok((text, None)) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Ok((text, Some(f))) => {
            print!("{text}");
            eprintln!("{}", serde_json::to_string(&f).unwrap_or_default());
            ExitCode::FAILURE
        }
        Err(e) => fail(&FailureRecord::from_error(&e), out.as_ref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Convergence(o) => run(StudyKind::Convergence, o),
        Command::Stability(o) => run(StudyKind::Stability, o),
        Command::Single(o) => run(StudyKind::Single, o),
    }
}
