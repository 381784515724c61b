//! Deterministic RNG, dense matrices, spectral norm, and Gaussian quadrature.

pub mod matrix;
pub mod quadrature;
pub mod rng;
pub mod spectral;

pub use matrix::{dot, norm2, Matrix};
pub use quadrature::{bivariate_dual_quadrature, GaussHermite};
pub use rng::{gaussian_matrix, NormalStream, Rng};
pub use spectral::{min_eigenvalue_symmetric, spectral_norm, symmetric_eigen};
