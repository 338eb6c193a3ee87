//! Shrinkage within and across groups (SWAG) for multi-group matrix-variate
//! covariance estimation.
//!
//! Each group `j` observes `n_j` matrices of shape `p1 x p2`, stored as the
//! rows of an `n_j x p` data matrix (column-stacked vectorization). The
//! hierarchical model blends a covariance shrunk towards a pooled target with
//! one shrunk towards a group-specific Kronecker product `C_j ⊗ R_j`:
//!
//! ```text
//! Σ_j = λ Ψ_j + (1 - λ) Λ_j
//! ```
//!
//! The [`sampler`] module fits the model by Metropolis-within-Gibbs,
//! [`estimators`] holds the baselines and posterior point estimates, and
//! [`eval`] provides losses, simulation regimes, QDA and chain diagnostics.

pub mod data;
pub mod error;
pub mod estimators;
pub mod eval;
pub mod io;
pub mod linalg;
pub mod randdist;
pub mod sampler;

mod par;

pub use data::{GroupedDataset, PreprocessRecord};
pub use error::{Result, SwagError};
pub use linalg::{MatrixShape, SpdMatrix};
pub use randdist::RngStream;
pub use sampler::{run_chain, ChainOutput, SwagConfig, SwagState};
