//! Discretization errors against exact fields and observed convergence orders.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::QuadRule;
use crate::scalar::Point2;
use crate::spaces::Field;

fn check_scalar(field: &Field<f64>) -> Result<()> {
    if field.kind().is_vector() {
        return Err(Error::KindMismatch {
            expected: "P1|P0|P1Disc",
            found: field.kind().name(),
        });
    }
    Ok(())
}

fn check_vector(field: &Field<f64>) -> Result<()> {
    if !field.kind().is_vector() {
        return Err(Error::KindMismatch {
            expected: "RT0|RT1",
            found: field.kind().name(),
        });
    }
    Ok(())
}

/// `Σ_T Σ_q 2|T| w_q g(e, bary_q, x_q)`.
fn integrate(field: &Field<f64>, rule: &QuadRule<f64>, g: impl Fn(usize, [f64; 3], Point2<f64>) -> f64) -> f64 {
    let mesh = field.mesh();
    let mut total = 0.0;
    for e in 0..mesh.num_elements() {
        let jac = 2.0 * mesh.area(e);
        let mut local = 0.0;
        for (bary, w) in rule.iter() {
            local += w * g(e, bary, mesh.point_at(e, bary));
        }
        total += jac * local;
    }
    total
}

/// `‖field − exact‖_{L²(Ω)}` for a scalar field.
pub fn l2_error_scalar(field: &Field<f64>, exact: impl Fn(Point2<f64>) -> f64, rule: &QuadRule<f64>) -> Result<f64> {
    check_scalar(field)?;
    Ok(integrate(field, rule, |e, b, x| {
        let d = field.scalar_at(e, b) - exact(x);
        d * d
    })
    .sqrt())
}

/// Mean-normalized pressure error `‖(p_h − p̄_h) − (p − p̄)‖_{L²}`.
pub fn l2_error_mean_free(field: &Field<f64>, exact: impl Fn(Point2<f64>) -> f64, rule: &QuadRule<f64>) -> Result<f64> {
    check_scalar(field)?;
    let area: f64 = field.mesh().areas().iter().sum();
    let mean_h = integrate(field, rule, |e, b, _| field.scalar_at(e, b)) / area;
    let mean = integrate(field, rule, |_, _, x| exact(x)) / area;
    l2_error_scalar(field, |x| exact(x) - mean + mean_h, rule)
}

/// `‖field − exact‖_{L²(Ω)²}` for an RT field.
pub fn l2_error_vector(field: &Field<f64>, exact: impl Fn(Point2<f64>) -> Point2<f64>, rule: &QuadRule<f64>) -> Result<f64> {
    check_vector(field)?;
    Ok(integrate(field, rule, |e, _, x| {
        let (v, _) = field.vector_at(e, x);
        let u = exact(x);
        (v[0] - u[0]).powi(2) + (v[1] - u[1]).powi(2)
    })
    .sqrt())
}

/// `‖field − exact‖_{H(div)} = (‖v − u‖² + ‖∇·v − ∇·u‖²)^{1/2}`.
pub fn hdiv_error(
    field: &Field<f64>,
    exact: impl Fn(Point2<f64>) -> Point2<f64>,
    exact_div: impl Fn(Point2<f64>) -> f64,
    rule: &QuadRule<f64>,
) -> Result<f64> {
    check_vector(field)?;
    Ok(integrate(field, rule, |e, _, x| {
        let (v, d) = field.vector_at(e, x);
        let u = exact(x);
        (v[0] - u[0]).powi(2) + (v[1] - u[1]).powi(2) + (d - exact_div(x)).powi(2)
    })
    .sqrt())
}

/// Pairwise orders `log(e_i/e_{i+1}) / log(h_i/h_{i+1})` for rows sorted by
/// decreasing `h`.
pub fn convergence_order(rows: &[(f64, f64)]) -> Result<Vec<f64>> {
    for (i, &(h, e)) in rows.iter().enumerate() {
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::NonPositiveError { index: i, value: e });
        }
        if !(h > 0.0) {
            return Err(Error::InvalidConfig(format!("mesh size must be positive, got {h}")));
        }
    }
    Ok(rows
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln())
        .collect())
}

/// Least-squares slope of `log e` against `log h`.
pub fn least_squares_order(rows: &[(f64, f64)]) -> Result<f64> {
    convergence_order(rows)?;
    if rows.len() < 2 {
        return Err(Error::InvalidConfig("need at least two rows".into()));
    }
    let n = rows.len() as f64;
    let xs: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// One row of an error table. Post-processed columns are empty when the
/// run did not compute them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    #[serde(rename = "M")]
    pub m: usize,
    pub tau: f64,
    #[serde(rename = "err_c_L2")]
    pub err_c_l2: f64,
    #[serde(rename = "err_u_L2")]
    pub err_u_l2: f64,
    #[serde(rename = "err_u_Hdiv")]
    pub err_u_hdiv: f64,
    #[serde(rename = "err_p_L2")]
    pub err_p_l2: f64,
    #[serde(rename = "err_uhat_L2")]
    pub err_uhat_l2: Option<f64>,
    #[serde(rename = "err_phat_L2")]
    pub err_phat_l2: Option<f64>,
    #[serde(skip)]
    pub wall_time_seconds: f64,
}

impl ErrorRow {
    pub fn is_valid(&self) -> bool {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        [self.err_c_l2, self.err_u_l2, self.err_u_hdiv, self.err_p_l2].into_iter().all(ok)
            && self.err_uhat_l2.map_or(true, ok)
            && self.err_phat_l2.map_or(true, ok)
    }
}

/// Mesh size used for orders: the leg length `1/M` of the uniform mesh.
pub fn mesh_size(m: usize) -> f64 {
    1.0 / m as f64
}
