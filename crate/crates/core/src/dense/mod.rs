//! Complex dense linear algebra: the matrix type, eigendecomposition, and
//! univariate matrix functions.

mod eig;
mod matrix;
mod scalar;

pub use eig::{
    eig, eig_with, matrix_function, matrix_function_from, spectral_residual, EigConfig,
    SpectralDecomposition, DEFAULT_COND_CAP, PERTURBATION_SIZE, TOL_SPECTRAL,
};
pub use matrix::{frobenius_norm, spectral_norm_estimate, vec_norm, ComplexDenseMatrix};
pub use scalar::{phi, phi_derivative, ScalarFunction};
