pub mod assembly;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod norms;
pub mod problems;
pub mod quadrature;
pub mod scalar;
pub mod scheme;
pub mod spaces;

pub use error::{Error, Result};

/// Double-precision aliases of the scalar-generic building blocks.
pub type Mesh = mesh::TriMesh<f64>;
pub type FeSpace = spaces::Space<f64>;
pub type FeField = spaces::Field<f64>;
pub type Rule = quadrature::QuadRule<f64>;
pub type SparseMatrix = linalg::CsrMatrix<f64>;
pub type Saddle = linalg::SaddleSystem<f64>;
