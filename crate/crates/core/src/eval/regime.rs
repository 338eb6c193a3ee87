use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::data::GroupedDataset;
use crate::error::{Result, SwagError};
use crate::linalg::{MatrixShape, SpdMatrix};
use crate::randdist::{sample_matrix_normal_rows, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Homogeneity {
    /// One covariance shared by every group.
    Ho,
    /// Independently generated covariance per group.
    He,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Structure {
    /// `Z^(p2) ⊗ Z^(p1)`.
    Kron,
    /// Unstructured exchangeable `Z^(p)`.
    NonKron,
}

/// One of the four population covariance scenarios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regime {
    pub homogeneity: Homogeneity,
    pub structure: Structure,
    pub groups: usize,
    pub shape: MatrixShape,
    pub rho_bounds: (f64, f64),
    pub seed: u64,
}

impl Regime {
    pub fn new(homogeneity: Homogeneity, structure: Structure, groups: usize, shape: MatrixShape, seed: u64) -> Self {
        Self {
            homogeneity,
            structure,
            groups,
            shape,
            rho_bounds: (0.35, 0.9),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.rho_bounds;
        if self.groups == 0 {
            return Err(SwagError::InvalidConfig("regime needs at least one group".into()));
        }
        if !(0.0 < lo && lo <= hi && hi < 1.0) {
            return Err(SwagError::InvalidConfig(format!("correlation bounds [{lo}, {hi}] not inside (0,1)")));
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match (self.homogeneity, self.structure) {
            (Homogeneity::Ho, Structure::Kron) => "ho-k",
            (Homogeneity::He, Structure::Kron) => "he-k",
            (Homogeneity::Ho, Structure::NonKron) => "ho-n",
            (Homogeneity::He, Structure::NonKron) => "he-n",
        }
    }
}

impl FromStr for Regime {
    type Err = SwagError;

    /// Parses `ho-k | he-k | ho-n | he-n` with one group, a 1x1 shape and
    /// seed 0; callers fill in the rest.
    fn from_str(s: &str) -> Result<Self> {
        let (h, k) = match s.to_ascii_lowercase().as_str() {
            "ho-k" => (Homogeneity::Ho, Structure::Kron),
            "he-k" => (Homogeneity::He, Structure::Kron),
            "ho-n" => (Homogeneity::Ho, Structure::NonKron),
            "he-n" => (Homogeneity::He, Structure::NonKron),
            other => return Err(SwagError::InvalidConfig(format!("unknown regime '{other}'"))),
        };
        Ok(Regime::new(h, k, 1, MatrixShape::new(1, 1)?, 0))
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Correlations drawn for a regime. Kronecker regimes fill `row`/`col`,
/// the others fill `full`. One entry per distinct covariance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RhoRecord {
    pub row: Vec<f64>,
    pub col: Vec<f64>,
    pub full: Vec<f64>,
}

/// Ones on the diagonal, `rho` elsewhere.
pub fn exch_corr(dim: usize, rho: f64) -> Result<SpdMatrix> {
    let lower = if dim > 1 { -1.0 / (dim as f64 - 1.0) } else { f64::NEG_INFINITY };
    if dim == 0 || !(rho > lower && rho < 1.0) {
        return Err(SwagError::InvalidConfig(format!(
            "exchangeable correlation {rho} not positive definite at dim {dim}"
        )));
    }
    SpdMatrix::new(DMatrix::from_fn(dim, dim, |i, j| if i == j { 1.0 } else { rho }))
}

/// Population covariances for a regime. Correlations are independent
/// uniforms on the bounds, one per factor and, in He regimes, per group.
pub fn generate_regime(regime: &Regime) -> Result<(Vec<SpdMatrix>, RhoRecord)> {
    regime.validate()?;
    let (lo, hi) = regime.rho_bounds;
    let mut rng = RngStream::new(regime.seed, 0);
    let distinct = match regime.homogeneity {
        Homogeneity::Ho => 1,
        Homogeneity::He => regime.groups,
    };
    let mut rho = RhoRecord::default();
    let mut unique = Vec::with_capacity(distinct);
    for _ in 0..distinct {
        let sigma = match regime.structure {
            Structure::Kron => {
                let r = rng.uniform(lo, hi);
                let c = rng.uniform(lo, hi);
                rho.row.push(r);
                rho.col.push(c);
                exch_corr(regime.shape.p2(), c)?.kron(&exch_corr(regime.shape.p1(), r)?)
            }
            Structure::NonKron => {
                let r = rng.uniform(lo, hi);
                rho.full.push(r);
                exch_corr(regime.shape.p(), r)?
            }
        };
        unique.push(sigma);
    }
    let truths = (0..regime.groups)
        .map(|j| unique[j.min(distinct - 1)].clone())
        .collect();
    Ok((truths, rho))
}

/// `n[j]` i.i.d. mean-zero draws with covariance `truths[j]` per group.
pub fn simulate_dataset(truths: &[SpdMatrix], n: &[usize], shape: MatrixShape, seed: u64) -> Result<GroupedDataset> {
    if truths.len() != n.len() {
        return Err(SwagError::DimensionMismatch(format!(
            "{} truths but {} group sizes",
            truths.len(),
            n.len()
        )));
    }
    let data = truths
        .iter()
        .zip(n)
        .enumerate()
        .map(|(j, (sigma, &nj))| {
            let mut rng = RngStream::new(seed, j as u64);
            sample_matrix_normal_rows(&DMatrix::zeros(nj, sigma.dim()), sigma, &mut rng)
        })
        .collect();
    GroupedDataset::from_matrices(data, shape)
}
