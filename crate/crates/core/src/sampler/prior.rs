//! Forward simulation from the hierarchical prior and the sampling model.
//! Used for joint-distribution checks of the sampler and for synthetic data.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::linalg::{MatrixShape, SpdMatrix};
use crate::randdist::{sample_inv_wishart, sample_matrix_normal_rows, sample_wishart, RngStream};

use super::config::SwagConfig;
use super::state::SwagState;

/// Weight and degrees of freedom held at given values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedScalars {
    pub weight: f64,
    pub across_dof: u32,
    pub within_dof: u32,
    pub pooled_dof: u32,
}

/// Draws every covariance parameter and latent factor from the prior, with
/// the weight and dofs fixed.
pub fn simulate_prior(
    shape: MatrixShape,
    sizes: &[usize],
    config: &SwagConfig,
    fixed: FixedScalars,
    rng: &mut RngStream,
) -> Result<SwagState> {
    let pooled_row = sample_inv_wishart(&config.pooled_row_mean, config.pooled_row_dof, rng)?;
    let pooled_col = sample_inv_wishart(&config.pooled_col_mean, config.pooled_col_dof, rng)?;
    let xi = fixed.pooled_dof as f64;
    let pooled = sample_wishart(&pooled_col.kron(&pooled_row).scaled(1.0 / xi)?, xi, rng)?;
    let mut state = SwagState {
        weight: fixed.weight,
        latent: Vec::with_capacity(sizes.len()),
        across: Vec::with_capacity(sizes.len()),
        within: Vec::with_capacity(sizes.len()),
        pooled,
        across_dof: fixed.across_dof,
        within_dof: fixed.within_dof,
        pooled_dof: fixed.pooled_dof,
        row_cov: Vec::with_capacity(sizes.len()),
        col_cov: Vec::with_capacity(sizes.len()),
        pooled_row,
        pooled_col,
    };
    for &n in sizes {
        let row = sample_wishart(&config.row_scale.scaled(1.0 / config.row_dof)?, config.row_dof, rng)?;
        let col = sample_wishart(&config.col_scale.scaled(1.0 / config.col_dof)?, config.col_dof, rng)?;
        let across = sample_inv_wishart(&state.pooled, fixed.across_dof as f64, rng)?;
        let within = sample_inv_wishart(&col.kron(&row), fixed.within_dof as f64, rng)?;
        state
            .latent
            .push(sample_matrix_normal_rows(&DMatrix::zeros(n, shape.p()), &across, rng));
        state.row_cov.push(row);
        state.col_cov.push(col);
        state.across.push(across);
        state.within.push(within);
    }
    Ok(state)
}

/// `Y_j = λ^{1/2} U_j + (1-λ)^{1/2} E_j` with rows of `E_j` i.i.d. `N(0, Λ_j)`.
pub fn simulate_data(state: &SwagState, rng: &mut RngStream) -> Vec<DMatrix<f64>> {
    let w = state.weight;
    state
        .latent
        .iter()
        .zip(&state.within)
        .map(|(u, within): (&DMatrix<f64>, &SpdMatrix)| {
            let e = sample_matrix_normal_rows(&DMatrix::zeros(u.nrows(), u.ncols()), within, rng);
            u * w.sqrt() + e * (1.0 - w).sqrt()
        })
        .collect()
}
