use nalgebra::DMatrix;

use crate::error::{Result, SwagError};
use crate::linalg::{MatrixShape, SpdMatrix};

use super::config::SwagConfig;

/// One state of the Markov chain.
///
/// `across[j]` is the covariance shrunk towards the pooled target `pooled`,
/// `within[j]` the one shrunk towards `col_cov[j] ⊗ row_cov[j]`, and the
/// group covariance is `weight * across[j] + (1 - weight) * within[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwagState {
    pub weight: f64,
    /// Latent factors, `n_j x p` per group.
    pub latent: Vec<DMatrix<f64>>,
    pub across: Vec<SpdMatrix>,
    pub within: Vec<SpdMatrix>,
    pub pooled: SpdMatrix,
    pub across_dof: u32,
    pub within_dof: u32,
    pub pooled_dof: u32,
    pub row_cov: Vec<SpdMatrix>,
    pub col_cov: Vec<SpdMatrix>,
    pub pooled_row: SpdMatrix,
    pub pooled_col: SpdMatrix,
}

impl SwagState {
    /// Deterministic starting point: weight 1/2, every dof at `p + 2` plus the
    /// rounded prior excess mean, every unstructured covariance equal to the
    /// diagonal of the pooled sample covariance (plus a 1e-6 ridge), identity
    /// Kronecker factors, and `latent = sqrt(1/2) * Y`.
    pub fn initialize(data: &[DMatrix<f64>], shape: MatrixShape, config: &SwagConfig) -> Result<Self> {
        let p = shape.p();
        if data.is_empty() {
            return Err(SwagError::InvalidData("at least one group is required".into()));
        }
        let total: usize = data.iter().map(|y| y.nrows()).sum();
        let mut diag = vec![0.0; p];
        for y in data {
            if y.ncols() != p {
                return Err(SwagError::DimensionMismatch(format!(
                    "group with {} columns, expected {p}",
                    y.ncols()
                )));
            }
            for (c, col) in y.column_iter().enumerate() {
                diag[c] += col.norm_squared();
            }
        }
        for d in &mut diag {
            *d = *d / total as f64 + 1e-6;
        }
        let start = SpdMatrix::from_diagonal(&diag)?;
        let weight = 0.5;
        let dof = p as u32 + 2 + config.dof_prior_excess_mean().round() as u32;
        let j = data.len();
        Ok(Self {
            weight,
            latent: data.iter().map(|y| y * weight.sqrt()).collect(),
            across: vec![start.clone(); j],
            within: vec![start.clone(); j],
            pooled: start,
            across_dof: dof,
            within_dof: dof,
            pooled_dof: dof,
            row_cov: vec![SpdMatrix::identity(shape.p1()); j],
            col_cov: vec![SpdMatrix::identity(shape.p2()); j],
            pooled_row: SpdMatrix::identity(shape.p1()),
            pooled_col: SpdMatrix::identity(shape.p2()),
        })
    }

    pub fn num_groups(&self) -> usize {
        self.across.len()
    }

    /// `Σ_j = λ Ψ_j + (1 - λ) Λ_j`.
    pub fn sigma(&self, j: usize) -> Result<SpdMatrix> {
        blend(self.weight, &self.across[j], &self.within[j])
    }

    pub fn check_invariants(&self, shape: MatrixShape) -> Result<()> {
        let lower = shape.p() as u32 + 2;
        if !(self.weight > 0.0 && self.weight < 1.0) {
            return Err(SwagError::InvalidData(format!("weight {} outside (0,1)", self.weight)));
        }
        for (name, v) in [
            ("across_dof", self.across_dof),
            ("within_dof", self.within_dof),
            ("pooled_dof", self.pooled_dof),
        ] {
            if v < lower {
                return Err(SwagError::InvalidData(format!("{name} = {v} below p + 2 = {lower}")));
            }
        }
        Ok(())
    }
}

pub(crate) fn blend(weight: f64, across: &SpdMatrix, within: &SpdMatrix) -> Result<SpdMatrix> {
    SpdMatrix::new(across.matrix() * weight + within.matrix() * (1.0 - weight))
}
