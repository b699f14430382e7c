pub mod data;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod model;
pub mod projection;
pub mod seed;
pub mod tensor;
pub mod training;

pub use error::{Error, ErrorKind, Result};
pub use tensor::{sym_eig, Matrix, SymEigen, Tensor3, Tensor4};
