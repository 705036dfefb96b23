//! Sparse storage, the SPD iterative solve, and the KKT direct solve.

mod cg;
pub mod dense;
mod saddle;
mod sparse;

pub use cg::{solve_spd, solve_spd_from, SpdSolution};
pub use saddle::{solve_saddle, KktScalar, SaddleSolution, SaddleSolver, SaddleSystem};
pub use sparse::{CsrMatrix, SparseMatrix};
