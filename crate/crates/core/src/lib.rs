//! Finite-width MLPs at the edge of chaos, their empirical Neural Tangent
//! Kernel, and the closed-form infinite-width limit.
//!
//! The crate is organized in layers:
//!
//! * [`numerics`] — deterministic counter-based RNG, dense matrices, power
//!   iteration, and the bivariate-Gaussian quadrature oracle that grounds the
//!   closed-form dual maps.
//! * [`mlp`] — network configuration, EOC-scaled initialization, and the
//!   forward pass with full per-layer traces.
//! * [`kernel`] — backpropagation matrices, the layerwise NTK decomposition,
//!   a dense Jacobian-product oracle, expectation formulas, and the kernel
//!   matrix over a dataset.
//! * [`limit`] — the dual maps ϱ, ϱ', ζ, ω, their iterates, and the limiting
//!   NTK entry/matrix.
//! * [`experiments`] — Monte-Carlo harness for the inverse-cosine-distance,
//!   concentration, and gradient-independence experiments.
//! * [`cli`] — JSON config parsing, dataset loading (CSV/IDX/synthetic), and
//!   CSV/manifest emission behind the `eoc-ntk` binary.
//!
//! Everything is 64-bit floating point and deterministic: a run is a pure
//! function of its configuration and seed, independent of thread count.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod kernel;
pub mod limit;
pub mod mlp;
pub mod numerics;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
