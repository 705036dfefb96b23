//! Mixed-method saddle-point systems with a zero-mean pressure constraint
//! on the augmented KKT matrix
//!
//! ```text
//! [ A  Bᵀ 0 ] [u]   [f_u]
//! [ B  0  m ] [p] = [f_p]
//! [ 0  mᵀ 0 ] [λ]   [ 0 ]
//! ```

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, SymbolicCholesky, SymmetricOrdering};
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Par, Side};

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::scalar::Real;

/// Scalars usable by the sparse direct solver.
pub trait KktScalar: Real + faer::traits::RealField {}
impl<T: Real + faer::traits::RealField> KktScalar for T {}

#[derive(Clone, Debug)]
pub struct SaddleSystem<T> {
    /// Velocity–velocity block (`nu × nu`, SPD).
    pub a: CsrMatrix<T>,
    /// Pressure–velocity coupling (`np × nu`).
    pub b: CsrMatrix<T>,
    pub f_u: Vec<T>,
    pub f_p: Vec<T>,
    /// Constraint row: `mᵀ p = 0`.
    pub mean: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct SaddleSolution<T> {
    pub u: Vec<T>,
    pub p: Vec<T>,
    pub lambda: T,
    /// Largest block residual relative to `1 + ‖rhs‖_∞`.
    pub residual: T,
}

impl<T: KktScalar> SaddleSystem<T> {
    pub fn nu(&self) -> usize {
        self.a.nrows()
    }

    pub fn np(&self) -> usize {
        self.b.nrows()
    }

    fn check_shapes(&self) -> Result<()> {
        let (nu, np) = (self.nu(), self.np());
        let ok = self.a.ncols() == nu
            && self.b.ncols() == nu
            && self.f_u.len() == nu
            && self.f_p.len() == np
            && self.mean.len() == np;
        if ok {
            Ok(())
        } else {
            Err(Error::SingularSystem("block dimensions do not match".into()))
        }
    }

    fn kkt(&self) -> Result<SparseColMat<usize, T>> {
        let (nu, np) = (self.nu(), self.np());
        let n = nu + np + 1;
        let mut t = Vec::with_capacity(self.a.nnz() + 2 * self.b.nnz() + 2 * np);
        for (i, j, v) in self.a.triplets() {
            t.push(Triplet::new(i, j, v));
        }
        for (i, j, v) in self.b.triplets() {
            t.push(Triplet::new(nu + i, j, v));
            t.push(Triplet::new(j, nu + i, v));
        }
        for (i, &m) in self.mean.iter().enumerate() {
            t.push(Triplet::new(nu + i, nu + np, m));
            t.push(Triplet::new(nu + np, nu + i, m));
        }
        SparseColMat::try_new_from_triplets(n, n, &t).map_err(|e| Error::SingularSystem(format!("{e:?}")))
    }

    /// Block residuals `(‖f_u - A u - Bᵀp‖∞, ‖f_p - B u - m λ‖∞, |mᵀp|)`.
    pub fn residuals(&self, u: &[T], p: &[T], lambda: T) -> (Vec<T>, Vec<T>, T) {
        let au = self.a.apply(u);
        let btp = self.b.apply_transpose(p);
        let bu = self.b.apply(u);
        let ru = (0..self.nu()).map(|i| self.f_u[i] - au[i] - btp[i]).collect();
        let rp = (0..self.np())
            .map(|i| self.f_p[i] - bu[i] - self.mean[i] * lambda)
            .collect();
        let rm = -self.mean.iter().zip(p).map(|(&m, &q)| m * q).sum::<T>();
        (ru, rp, rm)
    }

    fn rhs_scale(&self) -> T {
        let m = self
            .f_u
            .iter()
            .chain(&self.f_p)
            .fold(T::zero(), |m, v| m.max(v.abs()));
        T::one() + m
    }
}

fn inf_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Direct KKT solver that reuses its symbolic factorizations while the
/// sparsity pattern stays the same.
///
/// When `Bᵀ1 = 0` the multiplier is `λ = 1ᵀf_p / 1ᵀm` and the remaining
/// system is solved by a quasi-definite LDLᵀ (pressure block shifted by `-δI`)
/// with iterative refinement on the unshifted equations. Other systems go
/// through sparse LU on the bordered matrix.
#[derive(Default)]
pub struct SaddleSolver {
    lu: Option<(Vec<usize>, Vec<usize>, SymbolicLu<usize>)>,
    ldlt: Option<(Vec<usize>, Vec<usize>, SymbolicCholesky<usize>)>,
}

impl std::fmt::Debug for SaddleSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SaddleSolver")
            .field("lu_cached", &self.lu.is_some())
            .field("ldlt_cached", &self.ldlt.is_some())
            .finish()
    }
}

const REFINEMENT_STEPS: usize = 3;
const QD_REFINEMENT_STEPS: usize = 30;

fn same_pattern(cp: &[usize], ri: &[usize], col_ptr: &[usize], row_idx: &[usize]) -> bool {
    cp == col_ptr && ri == row_idx
}

fn singular<E: std::fmt::Debug>(e: E) -> Error {
    Error::SingularSystem(format!("{e:?}"))
}

impl SaddleSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn solve<T: KktScalar>(&mut self, sys: &SaddleSystem<T>, tol: T) -> Result<SaddleSolution<T>> {
        sys.check_shapes()?;
        if constant_kernel(sys) {
            self.solve_quasi_definite(sys, tol)
        } else {
            self.solve_lu(sys, tol)
        }
    }

    fn solve_quasi_definite<T: KktScalar>(&mut self, sys: &SaddleSystem<T>, tol: T) -> Result<SaddleSolution<T>> {
        let (nu, np) = (sys.nu(), sys.np());
        let n = nu + np;
        let m_sum = sys.mean.iter().copied().sum::<T>();
        let lambda = sys.f_p.iter().copied().sum::<T>() / m_sum;
        let g: Vec<T> = sys.f_p.iter().zip(&sys.mean).map(|(&f, &m)| f - m * lambda).collect();

        let floor = schur_diagonal_floor(sys);
        let delta = if floor.is_finite() { floor } else { T::one() } * T::epsilon().sqrt();
        let mut t = Vec::with_capacity(sys.a.nnz() / 2 + nu + sys.b.nnz() + np);
        for (i, j, v) in sys.a.triplets() {
            if i >= j {
                t.push(Triplet::new(i, j, v));
            }
        }
        for (i, j, v) in sys.b.triplets() {
            t.push(Triplet::new(nu + i, j, v));
        }
        for i in 0..np {
            t.push(Triplet::new(nu + i, nu + i, -delta));
        }
        let k = SparseColMat::try_new_from_triplets(n, n, &t).map_err(singular)?;
        let sym = k.symbolic();
        let reuse = matches!(&self.ldlt, Some((cp, ri, _)) if same_pattern(cp, ri, sym.col_ptr(), sym.row_idx()));
        if !reuse {
            let s = factorize_symbolic_cholesky(sym, Side::Lower, SymmetricOrdering::Amd, Default::default())
                .map_err(singular)?;
            self.ldlt = Some((sym.col_ptr().to_vec(), sym.row_idx().to_vec(), s));
        }
        let symbolic = &self.ldlt.as_ref().expect("symbolic factorization cached").2;
        let mut values = vec![T::zero(); symbolic.len_val()];
        let req = symbolic
            .factorize_numeric_ldlt_scratch::<T>(Par::Seq, Default::default())
            .or(symbolic.solve_in_place_scratch::<T>(1, Par::Seq));
        let mut mem = MemBuffer::new(req);
        let stack = MemStack::new(&mut mem);
        let regularization = LdltRegularization {
            dynamic_regularization_signs: None,
            dynamic_regularization_delta: T::zero(),
            dynamic_regularization_epsilon: T::zero(),
        };
        let ldlt = symbolic
            .factorize_numeric_ldlt(
                &mut values,
                k.as_ref(),
                Side::Lower,
                regularization,
                Par::Seq,
                stack,
                Default::default(),
            )
            .map_err(singular)?;

        let scale = sys.rhs_scale();
        let mut x = vec![T::zero(); n];
        let mut rhs: Vec<T> = sys.f_u.iter().chain(&g).copied().collect();
        let mut residual = T::infinity();
        let mut p = vec![T::zero(); np];
        for _ in 0..QD_REFINEMENT_STEPS {
            let mut col = faer::Mat::<T>::from_fn(n, 1, |i, _| rhs[i]);
            ldlt.solve_in_place_with_conj(faer::Conj::No, col.as_mut(), Par::Seq, MemStack::new(&mut mem));
            for (i, xi) in x.iter_mut().enumerate() {
                *xi += col[(i, 0)];
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::SingularSystem("factorization produced non-finite values".into()));
            }
            let shift = sys.mean.iter().zip(&x[nu..]).map(|(&m, &q)| m * q).sum::<T>() / m_sum;
            p.iter_mut().zip(&x[nu..]).for_each(|(pi, &q)| *pi = q - shift);
            let (ru, rp, rm) = sys.residuals(&x[..nu], &p, lambda);
            residual = inf_norm(&ru).max(inf_norm(&rp)).max(rm.abs()) / scale;
            if residual <= tol {
                break;
            }
            rhs = ru.into_iter().chain(rp).collect();
        }
        if residual > tol {
            return Err(Error::NotConverged {
                iterations: QD_REFINEMENT_STEPS,
                residual: residual.to_f64().unwrap_or(f64::NAN),
            });
        }
        x.truncate(nu);
        Ok(SaddleSolution {
            u: x,
            p,
            lambda,
            residual,
        })
    }

    fn solve_lu<T: KktScalar>(&mut self, sys: &SaddleSystem<T>, tol: T) -> Result<SaddleSolution<T>> {
        let (nu, np) = (sys.nu(), sys.np());
        let n = nu + np + 1;
        let kkt = sys.kkt()?;
        let sym = kkt.symbolic();
        let reuse = matches!(&self.lu, Some((cp, ri, _)) if same_pattern(cp, ri, sym.col_ptr(), sym.row_idx()));
        if !reuse {
            let s = SymbolicLu::try_new(sym).map_err(singular)?;
            self.lu = Some((sym.col_ptr().to_vec(), sym.row_idx().to_vec(), s));
        }
        let symbolic = self.lu.as_ref().map(|s| s.2.clone()).expect("symbolic factorization cached");
        let lu = Lu::try_new_with_symbolic(symbolic, kkt.as_ref()).map_err(singular)?;

        let mut x = vec![T::zero(); n];
        let mut rhs: Vec<T> = sys.f_u.iter().chain(&sys.f_p).copied().chain([T::zero()]).collect();
        let scale = sys.rhs_scale();
        let mut residual = T::infinity();
        for _ in 0..=REFINEMENT_STEPS {
            let mut col = faer::Mat::<T>::from_fn(n, 1, |i, _| rhs[i]);
            lu.solve_in_place_with_conj(faer::Conj::No, col.as_mut());
            for (i, xi) in x.iter_mut().enumerate() {
                *xi += col[(i, 0)];
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::SingularSystem("factorization produced non-finite values".into()));
            }
            let (ru, rp, rm) = sys.residuals(&x[..nu], &x[nu..nu + np], x[nu + np]);
            residual = inf_norm(&ru).max(inf_norm(&rp)).max(rm.abs()) / scale;
            if residual <= tol {
                break;
            }
            rhs = ru.into_iter().chain(rp).chain([rm]).collect();
        }
        if residual > tol {
            return Err(Error::NotConverged {
                iterations: REFINEMENT_STEPS,
                residual: residual.to_f64().unwrap_or(f64::NAN),
            });
        }
        let lambda = x[nu + np];
        let p = x[nu..nu + np].to_vec();
        x.truncate(nu);
        Ok(SaddleSolution {
            u: x,
            p,
            lambda,
            residual,
        })
    }
}

/// Smallest diagonal entry of `B diag(A)⁻¹ Bᵀ`.
fn schur_diagonal_floor<T: KktScalar>(sys: &SaddleSystem<T>) -> T {
    let d = sys.a.diagonal();
    (0..sys.np())
        .map(|i| sys.b.row(i).map(|(j, v)| v * v / d[j].abs()).sum::<T>())
        .filter(|v| *v > T::zero())
        .fold(T::infinity(), |m, v| m.min(v))
}

/// True when constant pressures are invisible to the velocity equations and
/// the constraint row has nonzero total weight.
fn constant_kernel<T: KktScalar>(sys: &SaddleSystem<T>) -> bool {
    let bmax = inf_norm(sys.b.values());
    let m_sum = sys.mean.iter().copied().sum::<T>();
    if bmax == T::zero() || m_sum.abs() <= T::epsilon() * inf_norm(&sys.mean) {
        return false;
    }
    let ones = vec![T::one(); sys.np()];
    let bt1 = sys.b.apply_transpose(&ones);
    let max_row = (0..sys.np()).map(|i| sys.b.row(i).count()).max().unwrap_or(0).max(1);
    inf_norm(&bt1) <= T::from(64.0).unwrap() * T::epsilon() * bmax * T::from(max_row).unwrap()
}

/// One-shot saddle solve.
pub fn solve_saddle<T: KktScalar>(sys: &SaddleSystem<T>, tol: T) -> Result<SaddleSolution<T>> {
    SaddleSolver::new().solve(sys, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SaddleSystem<f64> {
        // two velocity unknowns, two pressures
        SaddleSystem {
            a: CsrMatrix::from_dense(&[vec![2.0, 0.5], vec![0.5, 1.0]]),
            b: CsrMatrix::from_dense(&[vec![1.0, -1.0], vec![-1.0, 1.0]]),
            f_u: vec![1.0, 0.0],
            f_p: vec![0.3, -0.3],
            mean: vec![0.5, 0.5],
        }
    }

    #[test]
    fn zero_data() {
        let mut s = small();
        s.f_u = vec![0.0; 2];
        s.f_p = vec![0.0; 2];
        let sol = solve_saddle(&s, 1e-12).unwrap();
        assert!(sol.u.iter().chain(&sol.p).all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn residual_and_mean() {
        let s = small();
        let sol = solve_saddle(&s, 1e-12).unwrap();
        let (ru, rp, rm) = s.residuals(&sol.u, &sol.p, sol.lambda);
        assert!(inf_norm(&ru) < 1e-12 && inf_norm(&rp) < 1e-12 && rm.abs() < 1e-12);
        assert!(sol.lambda.abs() < 1e-12);
    }

    #[test]
    fn singular_coupling() {
        let mut s = small();
        // without coupling the pressure is only fixed along m
        s.b = CsrMatrix::from_dense(&[vec![0.0, 0.0], vec![0.0, 0.0]]);
        s.f_p = vec![0.3, 0.0];
        assert!(solve_saddle(&s, 1e-12).is_err());
    }

    #[test]
    fn symbolic_reuse() {
        let s = small();
        let mut solver = SaddleSolver::new();
        let a = solver.solve(&s, 1e-12).unwrap();
        let b = solver.solve(&s, 1e-12).unwrap();
        assert_eq!(a.u, b.u);
        assert_eq!(a.p, b.p);
    }

    #[test]
    fn f32_solve() {
        let s = SaddleSystem::<f32> {
            a: CsrMatrix::from_dense(&[vec![2.0, 0.0], vec![0.0, 2.0]]),
            b: CsrMatrix::from_dense(&[vec![1.0, -1.0], vec![-1.0, 1.0]]),
            f_u: vec![0.0, 0.0],
            f_p: vec![1.0, -1.0],
            mean: vec![1.0, 1.0],
        };
        let sol = solve_saddle(&s, 1e-5).unwrap();
        assert!((sol.u[0] - sol.u[1] - 1.0).abs() < 1e-5);
    }
}
