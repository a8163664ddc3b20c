//! Special functions and small dense linear algebra shared by every bound.

mod linalg;
mod special;

pub use linalg::{
    cholesky_factor, dot, eigen_range, jacobi_eigenvalues, norm2, quadratic_form, DenseMatrix,
    EigenRange, SpdMatrix,
};
pub use special::{
    chi_square_tail_thresholds, phi, std_normal_cdf, std_normal_pdf, std_normal_quantile,
};
