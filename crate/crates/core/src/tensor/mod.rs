//! Dense matrices, 4-way tensors and the symmetric eigensolver they share.

mod dense;
mod eig;
mod matrix;

pub use dense::{Tensor3, Tensor4};
pub use eig::{sym_eig, SymEigen};
pub use matrix::Matrix;
