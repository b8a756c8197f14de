//! Self-contained dense linear algebra sized for `d_s × d_s` blocks and
//! `N × d_s` panels.

mod eigen;
mod matrix;
mod random;
mod svd;

pub use eigen::{sym_eig_top_k, SymEigen};
pub use matrix::{dot, rotate_row_into, squared_distance, DenseMatrix};
pub use random::{gaussian_matrix, random_orthogonal};
pub use svd::{svd_square, SvdResult, MAX_SVD_DIM, MAX_SWEEPS};
