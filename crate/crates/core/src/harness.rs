//! Single runs, convergence studies and fixed-τ stability sweeps, with
//! CSV / Markdown / plot-data reports.
//!
//! Report files are replaced atomically (temporary file in the target
//! directory, then rename). Wall times go to separate `*_timings.csv` files so
//! that the error CSVs of repeated runs are byte-identical.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::{
    convergence_order, hdiv_error, l2_error_mean_free, l2_error_scalar, l2_error_vector, least_squares_order,
    mesh_size, ErrorRow,
};
use crate::problems::{by_id, residual_gate};
use crate::scheme::{Diagnostics, RunConfig, Simulation, TimeState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Convergence,
    Stability,
    Single,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            StudyKind::Convergence => "convergence",
            StudyKind::Stability => "stability",
            StudyKind::Single => "single",
        }
    }
}

/// What to run. `template` carries the problem, final time, quadrature,
/// tolerances and scheme; `M` and `τ` are set per run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    pub kind: StudyKind,
    pub ms: Vec<usize>,
    /// Fixed time steps of a stability sweep. Convergence studies use `τ = 1/M²`.
    pub taus: Vec<f64>,
    pub template: RunConfig,
    pub out_dir: Option<PathBuf>,
    /// Re-solve with RT1 / discontinuous P1 at the final time.
    pub postprocess: bool,
}

pub const DEFAULT_CONVERGENCE_MS: [usize; 3] = [8, 16, 32];
pub const FULL_CONVERGENCE_MS: [usize; 4] = [8, 16, 32, 64];
pub const STABILITY_MS: [usize; 4] = [8, 16, 32, 64];
pub const STABILITY_TAUS: [f64; 3] = [1.0 / 20.0, 1.0 / 30.0, 1.0 / 40.0];

impl StudySpec {
    pub fn convergence(problem: &str, full: bool) -> Self {
        let ms = if full { FULL_CONVERGENCE_MS.to_vec() } else { DEFAULT_CONVERGENCE_MS.to_vec() };
        Self {
            kind: StudyKind::Convergence,
            template: RunConfig::new(problem, ms[0]),
            ms,
            taus: Vec::new(),
            out_dir: None,
            postprocess: true,
        }
    }

    pub fn stability(problem: &str) -> Self {
        Self {
            kind: StudyKind::Stability,
            template: RunConfig::new(problem, STABILITY_MS[0]),
            ms: STABILITY_MS.to_vec(),
            taus: STABILITY_TAUS.to_vec(),
            out_dir: None,
            postprocess: true,
        }
    }

    pub fn single(config: RunConfig) -> Self {
        Self {
            kind: StudyKind::Single,
            ms: vec![config.m],
            taus: vec![config.tau],
            template: config,
            out_dir: None,
            postprocess: true,
        }
    }

    pub fn with_out_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.out_dir = Some(dir.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        by_id(&self.template.problem)?;
        if self.ms.is_empty() {
            return Err(Error::InvalidConfig("empty M list".into()));
        }
        match self.kind {
            StudyKind::Convergence => {
                if self.ms.len() < 2 {
                    return Err(Error::InvalidConfig("a convergence study needs at least two M values".into()));
                }
                let base = self.ms[0];
                for (i, &m) in self.ms.iter().enumerate() {
                    if m != base << i {
                        return Err(Error::InvalidConfig(format!(
                            "M list {:?} is not base·2^k (expected {} at position {i})",
                            self.ms,
                            base << i
                        )));
                    }
                }
            }
            StudyKind::Stability => {
                if self.taus.is_empty() {
                    return Err(Error::InvalidConfig("empty tau list".into()));
                }
                if self.ms.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidConfig("M list must be strictly increasing".into()));
                }
            }
            StudyKind::Single => {
                if self.ms.len() != 1 || self.taus.len() != 1 {
                    return Err(Error::InvalidConfig("a single run takes exactly one M and one tau".into()));
                }
            }
        }
        for &(m, tau) in &self.runs() {
            self.config_for(m, tau).validate()?;
        }
        Ok(())
    }

    /// `(M, τ)` pairs in report order.
    pub fn runs(&self) -> Vec<(usize, f64)> {
        match self.kind {
            StudyKind::Convergence => self.ms.iter().map(|&m| (m, 1.0 / (m * m) as f64)).collect(),
            StudyKind::Stability => self
                .taus
                .iter()
                .flat_map(|&tau| self.ms.iter().map(move |&m| (m, tau)))
                .collect(),
            StudyKind::Single => vec![(self.ms[0], self.taus[0])],
        }
    }

    pub fn config_for(&self, m: usize, tau: f64) -> RunConfig {
        RunConfig {
            m,
            tau,
            ..self.template.clone()
        }
    }
}

/// Machine-readable description of a failure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub kind: String,
    pub message: String,
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

impl FailureRecord {
    pub fn from_error(e: &Error) -> Self {
        Self {
            kind: e.kind().to_string(),
            message: e.to_string(),
            m: None,
            tau: None,
        }
    }

    fn at(mut self, m: usize, tau: f64) -> Self {
        self.m = Some(m);
        self.tau = Some(tau);
        self
    }
}

/// Result of one run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub state: TimeState,
    pub row: ErrorRow,
    pub diagnostics: Diagnostics,
    /// `(defect, bound)` of the post-processing divergence identity.
    pub postprocess_divergence: Option<(f64, f64)>,
}

impl RunOutcome {
    /// True when every mixed solve, including post-processing, satisfied
    /// the per-element divergence identity.
    pub fn divergence_identity_holds(&self) -> bool {
        self.diagnostics.records.iter().all(|r| r.divergence_ok())
            && self.postprocess_divergence.map_or(true, |(d, b)| d <= b)
    }
}

/// Runs one configuration and measures its errors at `t_N`. Does not run the
/// residual gate.
pub fn run_config(config: &RunConfig, postprocess: bool) -> Result<RunOutcome> {
    let start = Instant::now();
    let mut sim = Simulation::new(config.clone())?;
    let state = sim.run()?;
    let exact = sim.problem().exact.clone();
    let rule = sim.norm_rule()?;
    let t = state.t;
    let err_c_l2 = l2_error_scalar(&state.c, |x| exact.concentration(x, t), &rule)?;
    let err_u_l2 = l2_error_vector(&state.u, |x| exact.velocity(x, t), &rule)?;
    let err_u_hdiv = hdiv_error(&state.u, |x| exact.velocity(x, t), |x| exact.velocity_div(x, t), &rule)?;
    let err_p_l2 = l2_error_mean_free(&state.p, |x| exact.pressure(x, t), &rule)?;
    let (err_uhat_l2, err_phat_l2, postprocess_divergence) = if postprocess {
        let pp = sim.postprocess(&state)?;
        (
            Some(l2_error_vector(&pp.u_hat, |x| exact.velocity(x, t), &rule)?),
            Some(l2_error_mean_free(&pp.p_hat, |x| exact.pressure(x, t), &rule)?),
            Some((pp.divergence_defect, pp.divergence_bound)),
        )
    } else {
        (None, None, None)
    };
    let row = ErrorRow {
        m: config.m,
        tau: config.tau,
        err_c_l2,
        err_u_l2,
        err_u_hdiv,
        err_p_l2,
        err_uhat_l2,
        err_phat_l2,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(RunOutcome {
        config: config.clone(),
        state,
        row,
        diagnostics: sim.diagnostics.clone(),
        postprocess_divergence,
    })
}

/// Pairwise and least-squares orders of one error column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnOrders {
    pub column: String,
    /// `None` when an error is zero or not finite.
    pub pairwise: Vec<Option<f64>>,
    pub least_squares: Option<f64>,
}

impl ColumnOrders {
    fn from_rows(column: &str, rows: &[(f64, f64)]) -> Self {
        let pairwise = match convergence_order(rows) {
            Ok(v) => v.into_iter().map(Some).collect(),
            Err(_) => vec![None; rows.len().saturating_sub(1)],
        };
        Self {
            column: column.to_string(),
            pairwise,
            least_squares: least_squares_order(rows).ok(),
        }
    }

    /// Order between the two finest meshes.
    pub fn finest(&self) -> Option<f64> {
        self.pairwise.last().copied().flatten()
    }
}

type Column = (&'static str, &'static str, fn(&ErrorRow) -> Option<f64>);

const COLUMNS: [Column; 6] = [
    ("err_c_L2", "‖c − c_h‖", |r| Some(r.err_c_l2)),
    ("err_u_L2", "‖u − u_h‖", |r| Some(r.err_u_l2)),
    ("err_u_Hdiv", "‖u − u_h‖_div", |r| Some(r.err_u_hdiv)),
    ("err_p_L2", "‖p − p_h‖", |r| Some(r.err_p_l2)),
    ("err_uhat_L2", "‖u − û_h‖", |r| r.err_uhat_l2),
    ("err_phat_L2", "‖p − p̂_h‖", |r| r.err_phat_l2),
];

fn column(name: &str) -> Result<&'static Column> {
    COLUMNS
        .iter()
        .find(|c| c.0 == name)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown error column `{name}`")))
}

/// Errors of one column as `(h, e)` pairs, `None` if any row lacks it.
pub fn column_series(rows: &[ErrorRow], name: &str) -> Result<Option<Vec<(f64, f64)>>> {
    let col = column(name)?;
    Ok(rows.iter().map(|r| (col.2)(r).map(|e| (mesh_size(r.m), e))).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub problem: String,
    pub rows: Vec<ErrorRow>,
    pub orders: Vec<ColumnOrders>,
    /// Largest divergence-identity `defect / bound` over all runs.
    pub worst_divergence_ratio: f64,
    pub divergence_identity_holds: bool,
    pub complete: bool,
    pub failure: Option<FailureRecord>,
    #[serde(skip)]
    pub outcomes: Vec<RunOutcome>,
}

impl ConvergenceReport {
    pub fn orders(&self, column: &str) -> Option<&ColumnOrders> {
        self.orders.iter().find(|o| o.column == column)
    }

    pub fn markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# Convergence study: `{}`\n", self.problem);
        if !self.complete {
            let _ = writeln!(s, "**Incomplete**: {}\n", self.failure.as_ref().map_or("", |f| f.message.as_str()));
        }
        let lowest = ["err_c_L2", "err_u_L2", "err_u_Hdiv", "err_p_L2"];
        let post = ["err_uhat_L2", "err_phat_L2"];
        self.table(&mut s, &lowest);
        if self.rows.iter().all(|r| r.err_uhat_l2.is_some()) && !self.rows.is_empty() {
            let _ = writeln!(s, "\nPost-processed (RT1 / discontinuous P1) at t_N:\n");
            self.table(&mut s, &post);
        }
        let _ = writeln!(
            s,
            "\nWorst divergence-identity ratio (defect / bound): {:.3e}",
            self.worst_divergence_ratio
        );
        s
    }

    fn table(&self, s: &mut String, names: &[&str]) {
        let cols: Vec<&Column> = names.iter().filter_map(|n| column(n).ok()).collect();
        let _ = write!(s, "| τ=1/M² |");
        for c in &cols {
            let _ = write!(s, " {} |", c.1);
        }
        let _ = write!(s, "\n|---|");
        for _ in &cols {
            let _ = write!(s, "---|");
        }
        let _ = writeln!(s);
        for r in &self.rows {
            let _ = write!(s, "| M={} |", r.m);
            for c in &cols {
                let _ = write!(s, " {} |", fmt_err((c.2)(r)));
            }
            let _ = writeln!(s);
        }
        if self.rows.len() >= 2 {
            for i in 0..self.rows.len() - 1 {
                let _ = write!(s, "| order {}→{} |", self.rows[i].m, self.rows[i + 1].m);
                for c in &cols {
                    let o = self.orders(c.0).and_then(|o| o.pairwise.get(i).copied().flatten());
                    let _ = write!(s, " {} |", fmt_order(o));
                }
                let _ = writeln!(s);
            }
            let _ = write!(s, "| least squares |");
            for c in &cols {
                let _ = write!(s, " {} |", fmt_order(self.orders(c.0).and_then(|o| o.least_squares)));
            }
            let _ = writeln!(s);
        }
    }
}

fn fmt_err(e: Option<f64>) -> String {
    e.map_or_else(|| "–".into(), |e| format!("{e:.3e}"))
}

fn fmt_order(o: Option<f64>) -> String {
    o.map_or_else(|| "–".into(), |o| format!("{o:.2}"))
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub problem: String,
    pub taus: Vec<f64>,
    pub ms: Vec<usize>,
    pub rows: Vec<ErrorRow>,
    pub worst_divergence_ratio: f64,
    pub divergence_identity_holds: bool,
    pub complete: bool,
    pub failure: Option<FailureRecord>,
}

/// Error columns tracked by the stability sweep.
pub const STABILITY_COLUMNS: [&str; 3] = ["err_c_L2", "err_uhat_L2", "err_phat_L2"];

impl StabilityReport {
    /// `(M, error)` for one `τ`.
    pub fn series(&self, tau: f64, name: &str) -> Result<Vec<(usize, f64)>> {
        let col = column(name)?;
        Ok(self
            .rows
            .iter()
            .filter(|r| r.tau == tau)
            .filter_map(|r| (col.2)(r).map(|e| (r.m, e)))
            .collect())
    }

    /// Error at the finest `M` for one `τ`.
    pub fn plateau(&self, tau: f64, name: &str) -> Result<Option<f64>> {
        Ok(self.series(tau, name)?.last().map(|&(_, e)| e))
    }

    pub fn markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# Stability sweep: `{}`\n", self.problem);
        if !self.complete {
            let _ = writeln!(s, "**Incomplete**: {}\n", self.failure.as_ref().map_or("", |f| f.message.as_str()));
        }
        for name in STABILITY_COLUMNS {
            let label = column(name).map(|c| c.1).unwrap_or(name);
            let _ = write!(s, "{label} at t_N:\n\n| M |");
            for tau in &self.taus {
                let _ = write!(s, " τ=1/{} |", (1.0 / tau).round());
            }
            let _ = write!(s, "\n|---|");
            for _ in &self.taus {
                let _ = write!(s, "---|");
            }
            let _ = writeln!(s);
            for &m in &self.ms {
                let _ = write!(s, "| {m} |");
                for &tau in &self.taus {
                    let e = self
                        .series(tau, name)
                        .ok()
                        .and_then(|v| v.iter().find(|p| p.0 == m).map(|p| p.1));
                    let _ = write!(s, " {} |", fmt_err(e));
                }
                let _ = writeln!(s);
            }
            let _ = writeln!(s);
        }
        let _ = writeln!(
            s,
            "Worst divergence-identity ratio (defect / bound): {:.3e}",
            self.worst_divergence_ratio
        );
        s
    }

    /// Whitespace-delimited columns `M  e(τ_1)  e(τ_2) ...`.
    pub fn plot_data(&self, name: &str) -> Result<String> {
        let mut s = String::from("# M");
        for tau in &self.taus {
            let _ = write!(s, " tau={tau}");
        }
        s.push('\n');
        for &m in &self.ms {
            let _ = write!(s, "{m}");
            for &tau in &self.taus {
                match self.series(tau, name)?.iter().find(|p| p.0 == m) {
                    Some(p) => {
                        let _ = write!(s, " {:e}", p.1);
                    }
                    None => s.push_str(" nan"),
                }
            }
            s.push('\n');
        }
        Ok(s)
    }
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory and an atomic rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn rows_csv(rows: &[ErrorRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

#[derive(Serialize)]
struct TimingRow {
    #[serde(rename = "M")]
    m: usize,
    tau: f64,
    wall_time_seconds: f64,
}

fn timings_csv(rows: &[ErrorRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(TimingRow {
            m: r.m,
            tau: r.tau,
            wall_time_seconds: r.wall_time_seconds,
        })?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn diagnostics_jsonl(d: &Diagnostics) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    d.write_jsonl(&mut buf)?;
    Ok(buf)
}

pub fn write_failure(dir: &Path, failure: &FailureRecord) -> Result<()> {
    write_atomic(&dir.join("failure.json"), &serde_json::to_vec_pretty(failure)?)
}

fn gate(spec: &StudySpec) -> Result<()> {
    spec.validate()?;
    residual_gate(&by_id(&spec.template.problem)?).map(|_| ())
}

/// Runs every `(M, τ)` of the spec in parallel; successes sorted by run order
/// plus the first failure in that order.
fn run_all(spec: &StudySpec) -> (Vec<RunOutcome>, Option<FailureRecord>) {
    let runs = spec.runs();
    let results: Vec<Result<RunOutcome>> = runs
        .par_iter()
        .map(|&(m, tau)| run_config(&spec.config_for(m, tau), spec.postprocess))
        .collect();
    let mut outcomes = Vec::new();
    let mut failure = None;
    for ((m, tau), r) in runs.into_iter().zip(results) {
        match r {
            Ok(o) => outcomes.push(o),
            Err(e) if failure.is_none() => failure = Some(FailureRecord::from_error(&e).at(m, tau)),
            Err(_) => {}
        }
    }
    (outcomes, failure)
}

fn divergence_summary(outcomes: &[RunOutcome]) -> (f64, bool) {
    let worst = outcomes
        .iter()
        .map(|o| {
            let pp = o.postprocess_divergence.map_or(0.0, |(d, b)| d / b);
            o.diagnostics.worst_divergence_ratio().max(pp)
        })
        .fold(0.0, f64::max);
    (worst, outcomes.iter().all(RunOutcome::divergence_identity_holds))
}

/// Convergence study with `τ = 1/M²`. Run failures give an incomplete report
/// (`complete == false`) over the successful rows; validation, residual-gate
/// and I/O failures are returned as errors.
pub fn run_convergence(spec: &StudySpec) -> Result<ConvergenceReport> {
    if spec.kind != StudyKind::Convergence {
        return Err(Error::InvalidConfig("not a convergence spec".into()));
    }
    gate(spec)?;
    let (outcomes, failure) = run_all(spec);
    let rows: Vec<ErrorRow> = outcomes.iter().map(|o| o.row.clone()).collect();
    let mut orders = Vec::new();
    for c in &COLUMNS {
        if let Some(series) = column_series(&rows, c.0)? {
            if series.len() >= 2 {
                orders.push(ColumnOrders::from_rows(c.0, &series));
            }
        }
    }
    let (worst_divergence_ratio, divergence_identity_holds) = divergence_summary(&outcomes);
    let report = ConvergenceReport {
        problem: spec.template.problem.clone(),
        rows,
        orders,
        worst_divergence_ratio,
        divergence_identity_holds,
        complete: failure.is_none(),
        failure,
        outcomes,
    };
    if let Some(dir) = &spec.out_dir {
        write_atomic(&dir.join("convergence.csv"), &rows_csv(&report.rows)?)?;
        write_atomic(&dir.join("convergence_timings.csv"), &timings_csv(&report.rows)?)?;
        write_atomic(&dir.join("convergence.md"), report.markdown().as_bytes())?;
        write_atomic(&dir.join("convergence.json"), &serde_json::to_vec_pretty(&report)?)?;
        for o in &report.outcomes {
            write_atomic(
                &dir.join(format!("diagnostics_M{}.jsonl", o.config.m)),
                &diagnostics_jsonl(&o.diagnostics)?,
            )?;
        }
        if let Some(f) = &report.failure {
            write_failure(dir, f)?;
        }
    }
    Ok(report)
}

/// Fixed-τ sweep over `M`. Failure semantics as in [`run_convergence`].
pub fn run_stability(spec: &StudySpec) -> Result<StabilityReport> {
    if spec.kind != StudyKind::Stability {
        return Err(Error::InvalidConfig("not a stability spec".into()));
    }
    gate(spec)?;
    let (outcomes, failure) = run_all(spec);
    let (worst_divergence_ratio, divergence_identity_holds) = divergence_summary(&outcomes);
    let report = StabilityReport {
        problem: spec.template.problem.clone(),
        taus: spec.taus.clone(),
        ms: spec.ms.clone(),
        rows: outcomes.iter().map(|o| o.row.clone()).collect(),
        worst_divergence_ratio,
        divergence_identity_holds,
        complete: failure.is_none(),
        failure,
    };
    if let Some(dir) = &spec.out_dir {
        write_atomic(&dir.join("stability.csv"), &rows_csv(&report.rows)?)?;
        write_atomic(&dir.join("stability_timings.csv"), &timings_csv(&report.rows)?)?;
        write_atomic(&dir.join("stability.md"), report.markdown().as_bytes())?;
        for name in STABILITY_COLUMNS {
            let file = format!("stability_{}.dat", name.trim_start_matches("err_").trim_end_matches("_L2"));
            write_atomic(&dir.join(file), report.plot_data(name)?.as_bytes())?;
        }
        if let Some(f) = &report.failure {
            write_failure(dir, f)?;
        }
    }
    Ok(report)
}

/// One gated run with its error row.
pub fn run_single(spec: &StudySpec) -> Result<RunOutcome> {
    if spec.kind != StudyKind::Single {
        return Err(Error::InvalidConfig("not a single-run spec".into()));
    }
    gate(spec)?;
    let (m, tau) = spec.runs()[0];
    let outcome = run_config(&spec.config_for(m, tau), spec.postprocess);
    if let Some(dir) = &spec.out_dir {
        match &outcome {
            Ok(o) => {
                let rows = std::slice::from_ref(&o.row);
                write_atomic(&dir.join("single.csv"), &rows_csv(rows)?)?;
                write_atomic(&dir.join("single_timings.csv"), &timings_csv(rows)?)?;
                write_atomic(&dir.join("diagnostics.jsonl"), &diagnostics_jsonl(&o.diagnostics)?)?;
            }
            Err(e) => write_failure(dir, &FailureRecord::from_error(e).at(m, tau))?,
        }
    }
    outcome
}

/// Optional settings read from a config file. Every field may be absent.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub problem: Option<String>,
    #[serde(rename = "M")]
    pub m: Option<Vec<usize>>,
    pub tau: Option<Vec<f64>>,
    #[serde(rename = "T")]
    pub t_final: Option<f64>,
    pub out: Option<PathBuf>,
    pub quad_assembly: Option<usize>,
    pub quad_norm: Option<usize>,
    pub tol: Option<f64>,
    pub scheme: Option<crate::assembly::MixedOrder>,
    pub full: Option<bool>,
}

impl FileConfig {
    /// Parses JSON, or `key = value` lines (`#` comments, lists as
    /// comma-separated values).
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            return Ok(serde_json::from_str(trimmed)?);
        }
        let mut map = serde_json::Map::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected `key = value`", n + 1)))?;
            let key = k.trim().replace('-', "_");
            let key = match key.as_str() {
                "m" => "M".to_string(),
                "t" => "T".to_string(),
                _ => key,
            };
            let list = matches!(key.as_str(), "M" | "tau");
            map.insert(key, parse_value(v.trim(), list));
        }
        Ok(serde_json::from_value(serde_json::Value::Object(map))?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

fn parse_scalar(v: &str) -> serde_json::Value {
    serde_json::from_str(v).unwrap_or_else(|_| serde_json::Value::String(v.trim_matches('"').to_string()))
}

fn parse_value(v: &str, list: bool) -> serde_json::Value {
    if !list {
        return parse_scalar(v);
    }
    if v.starts_with('[') {
        return parse_scalar(v);
    }
    serde_json::Value::Array(v.split(',').map(|p| parse_fraction(p.trim())).collect())
}

/// Accepts `1/20` style fractions in list entries.
fn parse_fraction(v: &str) -> serde_json::Value {
    if let Some((a, b)) = v.split_once('/') {
        if let (Ok(a), Ok(b)) = (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
            return serde_json::json!(a / b);
        }
    }
    parse_scalar(v)
}
