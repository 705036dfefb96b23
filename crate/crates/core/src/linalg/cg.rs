use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::scalar::Real;

/// Outcome of an iterative solve.
#[derive(Clone, Debug)]
pub struct SpdSolution<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// Final `‖b - A x‖ / ‖b‖`.
    pub residual: T,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
pub fn solve_spd<T: Real>(a: &CsrMatrix<T>, b: &[T], tol: T) -> Result<SpdSolution<T>> {
    solve_spd_from(a, b, vec![T::zero(); b.len()], tol)
}

/// Jacobi-preconditioned conjugate gradients from `x0`. Stops when the true
/// residual satisfies `‖b - A x‖ ≤ tol ‖b‖`.
pub fn solve_spd_from<T: Real>(a: &CsrMatrix<T>, b: &[T], x0: Vec<T>, tol: T) -> Result<SpdSolution<T>> {
    let n = b.len();
    assert_eq!(a.nrows(), n);
    assert_eq!(a.ncols(), n);
    assert_eq!(x0.len(), n);
    let bnorm = dot(b, b).sqrt();
    if bnorm == T::zero() {
        return Ok(SpdSolution {
            x: vec![T::zero(); n],
            iterations: 0,
            residual: T::zero(),
        });
    }
    let inv_diag: Vec<T> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > T::zero() { T::one() / d } else { T::one() })
        .collect();
    let mut x = x0;
    let mut r = a.apply(&x);
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z: Vec<T> = r.iter().zip(&inv_diag).map(|(&ri, &d)| ri * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];
    let max_iter = 2 * n + 100;
    let mut rel = dot(&r, &r).sqrt() / bnorm;
    let mut it = 0;
    while rel > tol {
        if it == max_iter {
            return Err(Error::NotConverged {
                iterations: it,
                residual: rel.to_f64().unwrap_or(f64::NAN),
            });
        }
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= T::zero() {
            // not positive definite along p
            return Err(Error::NotConverged {
                iterations: it,
                residual: rel.to_f64().unwrap_or(f64::NAN),
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        it += 1;
        rel = dot(&r, &r).sqrt() / bnorm;
        if rel <= tol {
            // confirm against the true residual to avoid drift
            let ax = a.apply(&x);
            let true_res: T = ax.iter().zip(b).map(|(&v, &bi)| (bi - v) * (bi - v)).sum::<T>().sqrt() / bnorm;
            rel = true_res;
            if rel <= tol {
                break;
            }
            for i in 0..n {
                r[i] = b[i] - ax[i];
            }
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok(SpdSolution {
        x,
        iterations: it,
        residual: rel,
    })
}
