//! Baseline covariance estimators and posterior point estimates.
//!
//! All estimators assume pre-centered data and use the divisor `n_j`.

use std::fmt;

use nalgebra::DMatrix;

use crate::data::GroupedDataset;
use crate::error::{Result, SwagError};
use crate::linalg::{symmetrize, unvec, MatrixShape, SpdMatrix};
use crate::randdist::logpdf_matrix_t_unit_rows;
use crate::sampler::ChainOutput;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Posterior estimate under Stein's loss from a fitted chain.
    Swag,
    /// Per-group sample covariance `S_j`.
    SampleMle,
    /// Pooled sample covariance.
    PooledMle,
    /// Per-group separable MLE `Ĉ_j ⊗ R̂_j`.
    KronMle,
    /// Separable MLE of the pooled data.
    PooledKronMle,
    /// Blend of each `S_j` with a pooled target.
    PartialPool,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Swag => "SWAG",
            Method::SampleMle => "S",
            Method::PooledMle => "S_p",
            Method::KronMle => "K",
            Method::PooledKronMle => "K_p",
            Method::PartialPool => "blend",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone)]
pub struct EstimatorResult {
    pub estimates: Vec<SpdMatrix>,
    pub method: Method,
    /// Free-form numeric annotations, e.g. the selected blend dof.
    pub metadata: Vec<(String, f64)>,
}

/// `Σ_i y_i y_iᵀ / n` over the rows of `data`. Not necessarily PD.
pub fn sample_cov(data: &DMatrix<f64>) -> DMatrix<f64> {
    symmetrize(&(data.transpose() * data)) / data.nrows() as f64
}

/// `Σ_j Σ_i y yᵀ / Σ_j n_j`.
pub fn pooled_sample_cov(data: &GroupedDataset) -> DMatrix<f64> {
    let p = data.shape().p();
    let mut acc = DMatrix::zeros(p, p);
    let mut total = 0;
    for g in data.groups() {
        acc += g.data.transpose() * &g.data;
        total += g.data.nrows();
    }
    symmetrize(&acc) / total as f64
}

/// Per-group sample covariances; fails if any is singular (`n_j < p`).
pub fn sample_mle(data: &GroupedDataset) -> Result<EstimatorResult> {
    let estimates = data
        .groups()
        .iter()
        .map(|g| SpdMatrix::new(sample_cov(&g.data)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimatorResult {
        estimates,
        method: Method::SampleMle,
        metadata: Vec::new(),
    })
}

pub fn pooled_mle(data: &GroupedDataset) -> Result<EstimatorResult> {
    let s = SpdMatrix::new(pooled_sample_cov(data))?;
    Ok(EstimatorResult {
        estimates: vec![s; data.num_groups()],
        method: Method::PooledMle,
        metadata: Vec::new(),
    })
}

/// Separable maximum-likelihood fit `Ĉ ⊗ R̂`.
#[derive(Debug, Clone)]
pub struct KronFit {
    pub row: SpdMatrix,
    pub col: SpdMatrix,
    pub iterations: usize,
    pub converged: bool,
    /// Profile log-likelihood (up to a constant) after each sweep.
    pub loglik_trace: Vec<f64>,
}

impl KronFit {
    pub fn covariance(&self) -> SpdMatrix {
        self.col.kron(&self.row)
    }
}

fn kron_loglik(obs: &[DMatrix<f64>], row: &SpdMatrix, col: &SpdMatrix) -> Result<f64> {
    let n = obs.len() as f64;
    let (p1, p2) = (row.dim() as f64, col.dim() as f64);
    let col_inv = col.inverse();
    let mut quad = 0.0;
    for y in obs {
        quad += row.solve(&(y * col_inv.matrix() * y.transpose()))?.trace();
    }
    Ok(-0.5 * n * p2 * row.logdet() - 0.5 * n * p1 * col.logdet() - 0.5 * quad)
}

/// Flip-flop alternation for the separable MLE of one group's rows.
///
/// Starts from `Ĉ = I` and alternates
/// `R̂ ← Σ_i Y_i Ĉ⁻¹ Y_iᵀ / (n p2)` and `Ĉ ← Σ_i Y_iᵀ R̂⁻¹ Y_i / (n p1)`,
/// rescaling after each sweep so that `R̂[0,0] = 1`. Stops when the relative
/// change in log-likelihood drops below `tol`; otherwise returns the last
/// iterate with `converged = false`.
pub fn kron_mle_flipflop(
    data: &DMatrix<f64>,
    shape: MatrixShape,
    tol: f64,
    max_iter: usize,
) -> Result<KronFit> {
    let (p1, p2) = (shape.p1(), shape.p2());
    let n = data.nrows();
    if data.ncols() != shape.p() {
        return Err(SwagError::DimensionMismatch(format!(
            "data has {} columns, shape needs {}",
            data.ncols(),
            shape.p()
        )));
    }
    if n * p2 <= p1 || n * p1 <= p2 {
        return Err(SwagError::InvalidData(format!(
            "separable MLE needs n*p2 > p1 and n*p1 > p2 (n = {n}, {p1}x{p2})"
        )));
    }
    let obs: Vec<DMatrix<f64>> = data
        .row_iter()
        .map(|r| unvec(r.transpose().as_slice(), p1, p2))
        .collect();
    let mut col = SpdMatrix::identity(p2);
    let mut row = SpdMatrix::identity(p1);
    let mut trace = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let col_inv = col.inverse();
        let mut r = DMatrix::zeros(p1, p1);
        for y in &obs {
            r += y * col_inv.matrix() * y.transpose();
        }
        row = SpdMatrix::new(r / (n * p2) as f64)?;
        let row_inv = row.inverse();
        let mut c = DMatrix::zeros(p2, p2);
        for y in &obs {
            c += y.transpose() * row_inv.matrix() * y;
        }
        col = SpdMatrix::new(c / (n * p1) as f64)?;
        let scale = row.matrix()[(0, 0)];
        row = row.scaled(1.0 / scale)?;
        col = col.scaled(scale)?;
        let ll = kron_loglik(&obs, &row, &col)?;
        trace.push(ll);
        if prev.is_finite() && (ll - prev).abs() <= tol * prev.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        prev = ll;
    }
    if !converged {
        log::warn!("flip-flop did not converge in {max_iter} iterations");
    }
    Ok(KronFit {
        row,
        col,
        iterations,
        converged,
        loglik_trace: trace,
    })
}

/// Flip-flop over the union of all groups' observations.
pub fn pooled_kron_mle(data: &GroupedDataset, tol: f64, max_iter: usize) -> Result<KronFit> {
    let p = data.shape().p();
    let total: usize = data.sizes().iter().sum();
    let mut stacked = DMatrix::zeros(total, p);
    let mut at = 0;
    for g in data.groups() {
        let n = g.data.nrows();
        stacked.rows_mut(at, n).copy_from(&g.data);
        at += n;
    }
    kron_mle_flipflop(&stacked, data.shape(), tol, max_iter)
}

pub const FLIPFLOP_TOL: f64 = 1e-10;
pub const FLIPFLOP_MAX_ITER: usize = 500;

pub fn kron_mle(data: &GroupedDataset) -> Result<EstimatorResult> {
    let mut metadata = Vec::new();
    let estimates = data
        .groups()
        .iter()
        .enumerate()
        .map(|(j, g)| {
            let fit = kron_mle_flipflop(&g.data, data.shape(), FLIPFLOP_TOL, FLIPFLOP_MAX_ITER)?;
            metadata.push((format!("iterations_{}", j + 1), fit.iterations as f64));
            Ok(fit.covariance())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimatorResult {
        estimates,
        method: Method::KronMle,
        metadata,
    })
}

pub fn pooled_kron(data: &GroupedDataset) -> Result<EstimatorResult> {
    let fit = pooled_kron_mle(data, FLIPFLOP_TOL, FLIPFLOP_MAX_ITER)?;
    Ok(EstimatorResult {
        estimates: vec![fit.covariance(); data.num_groups()],
        method: Method::PooledKronMle,
        metadata: vec![("iterations".into(), fit.iterations as f64)],
    })
}

/// Weight on `S_j` in the blend: `n_j / (n_j + ν - p - 1)`.
pub fn blend_weight(n: usize, dof: f64, p: usize) -> f64 {
    n as f64 / (n as f64 + dof - p as f64 - 1.0)
}

/// Sum over groups of the log marginal likelihood of `Y_j` when `Σ_j` is
/// inverse-Wishart with mean `pooled` and `dof` degrees of freedom.
pub fn blend_marginal_loglik(data: &GroupedDataset, dof: u32, pooled: &SpdMatrix) -> Result<f64> {
    let p = data.shape().p() as f64;
    let colscale = pooled.scaled(dof as f64 - p - 1.0)?;
    let mut total = 0.0;
    for g in data.groups() {
        let n = g.data.nrows();
        total += logpdf_matrix_t_unit_rows(
            &g.data,
            dof as f64 - p + 1.0,
            &DMatrix::zeros(n, g.data.ncols()),
            &colscale,
        )?;
    }
    Ok(total)
}

/// `Σ̂_j = w S_j + (1 - w) Ψ_0` with `w = n_j / (n_j + ν - p - 1)`.
///
/// `pooled` defaults to the pooled sample covariance. When `dof` is `None`
/// it is chosen on the integer grid `[p + 2, 4p]` by maximizing
/// [`blend_marginal_loglik`].
pub fn partial_pool_blend(
    data: &GroupedDataset,
    dof: Option<u32>,
    pooled: Option<&SpdMatrix>,
) -> Result<EstimatorResult> {
    let p = data.shape().p();
    let owned;
    let pooled = match pooled {
        Some(m) => m,
        None => {
            owned = SpdMatrix::new(pooled_sample_cov(data))?;
            &owned
        }
    };
    let dof = match dof {
        Some(d) if (d as usize) <= p + 1 => {
            return Err(SwagError::InvalidConfig(format!("blend dof {d} must exceed p + 1 = {}", p + 1)))
        }
        Some(d) => d,
        None => {
            let mut best = (p as u32 + 2, f64::NEG_INFINITY);
            for d in (p as u32 + 2)..=(4 * p as u32).max(p as u32 + 2) {
                let ll = blend_marginal_loglik(data, d, pooled)?;
                if ll > best.1 {
                    best = (d, ll);
                }
            }
            best.0
        }
    };
    let estimates = data
        .groups()
        .iter()
        .map(|g| {
            let w = blend_weight(g.data.nrows(), dof as f64, p);
            SpdMatrix::new(sample_cov(&g.data) * w + pooled.matrix() * (1.0 - w))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimatorResult {
        estimates,
        method: Method::PartialPool,
        metadata: vec![("dof".into(), dof as f64)],
    })
}

/// `(mean_s Σ_s⁻¹)⁻¹` for each group's draws.
pub fn bayes_stein_from_draws(draws: &[Vec<DMatrix<f64>>]) -> Result<Vec<SpdMatrix>> {
    draws
        .iter()
        .map(|group| {
            let first = group
                .first()
                .ok_or_else(|| SwagError::InvalidData("no retained draws".into()))?;
            let mut acc = DMatrix::zeros(first.nrows(), first.ncols());
            for d in group {
                acc += SpdMatrix::new(d.clone())?.inverse().matrix();
            }
            Ok(SpdMatrix::new(acc / group.len() as f64)?.inverse())
        })
        .collect()
}

/// Posterior estimate under Stein's loss, `E[Σ_j⁻¹ | Y]⁻¹`.
pub fn bayes_stein_estimate(chain: &ChainOutput) -> Result<EstimatorResult> {
    Ok(EstimatorResult {
        estimates: bayes_stein_from_draws(&chain.sigma_draws)?,
        method: Method::Swag,
        metadata: vec![("weight_mean".into(), chain.posterior_mean_weight())],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::kron;
    use crate::randdist::{sample_matrix_normal_rows, RngStream};

    fn shape(p1: usize, p2: usize) -> MatrixShape {
        MatrixShape::new(p1, p2).unwrap()
    }

    #[test]
    fn sample_cov_cases() {
        let y = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, -1.0]);
        assert_eq!(sample_cov(&y), y.transpose() * &y);
        let e = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(sample_cov(&e), DMatrix::identity(2, 2) / 2.0);
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, -1.0, 0.5, 0.0]);
        let b = DMatrix::from_row_slice(3, 2, &[0.5, 0.0, 1.0, 2.0, 3.0, -1.0]);
        assert!((sample_cov(&a) - sample_cov(&b)).amax() < 1e-15);
    }

    #[test]
    fn pooled_weights_by_group_size() {
        let s = shape(1, 2);
        let g1 = DMatrix::from_row_slice(1, 2, &[2.0, 0.0]);
        let g2 = DMatrix::from_row_slice(3, 2, &[0.0, 1.0, 1.0, 1.0, -1.0, 0.0]);
        let d = GroupedDataset::from_matrices(vec![g1.clone(), g2.clone()], s).unwrap();
        let expected = sample_cov(&g1) * 0.25 + sample_cov(&g2) * 0.75;
        assert!((pooled_sample_cov(&d) - &expected).amax() < 1e-15);
        let swapped = GroupedDataset::from_matrices(vec![g2, g1.clone()], s).unwrap();
        assert!((pooled_sample_cov(&swapped) - &expected).amax() < 1e-15);
        let same = GroupedDataset::from_matrices(vec![g1.clone(), g1.clone()], s).unwrap();
        assert_eq!(pooled_sample_cov(&same), sample_cov(&g1));
    }

    fn kron_data(n: usize, seed: u64, row: &SpdMatrix, col: &SpdMatrix) -> DMatrix<f64> {
        let cov = col.kron(row);
        let mut rng = RngStream::new(seed, 0);
        sample_matrix_normal_rows(&DMatrix::zeros(n, cov.dim()), &cov, &mut rng)
    }

    #[test]
    fn flipflop_recovers_separable_truth() {
        let row = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 2.0])).unwrap();
        let col = SpdMatrix::new(DMatrix::from_row_slice(
            3,
            3,
            &[1.5, 0.4, 0.2, 0.4, 1.0, 0.3, 0.2, 0.3, 0.8],
        ))
        .unwrap();
        let y = kron_data(2_000, 5, &row, &col);
        let fit = kron_mle_flipflop(&y, shape(2, 3), 1e-12, 200).unwrap();
        assert!(fit.converged);
        assert_eq!(fit.row.matrix()[(0, 0)], 1.0);
        let truth = kron(col.matrix(), row.matrix());
        let est = fit.covariance();
        assert!((est.matrix() - &truth).norm() / truth.norm() < 0.05);
        for w in fit.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs(), "log-likelihood decreased");
        }
    }

    #[test]
    fn flipflop_single_row_dimension() {
        let col = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0])).unwrap();
        let y = kron_data(50, 2, &SpdMatrix::identity(1), &col);
        let fit = kron_mle_flipflop(&y, shape(1, 2), 1e-12, 50).unwrap();
        assert_eq!(fit.row.matrix()[(0, 0)], 1.0);
        assert!(fit.iterations <= 2);
        assert!((fit.col.matrix() - sample_cov(&y)).amax() < 1e-12);
    }

    #[test]
    fn flipflop_scale_homogeneity() {
        let col = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0])).unwrap();
        let row = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, -0.5, -0.5, 1.0])).unwrap();
        let y = kron_data(40, 3, &row, &col);
        let a = kron_mle_flipflop(&y, shape(2, 2), 1e-13, 500).unwrap();
        let b = kron_mle_flipflop(&(&y * 2.0), shape(2, 2), 1e-13, 500).unwrap();
        assert!((b.covariance().matrix() - a.covariance().matrix() * 4.0).amax() < 1e-8);
        assert!((b.row.matrix() - a.row.matrix()).amax() < 1e-8);
    }

    #[test]
    fn flipflop_preconditions_and_nonconvergence_flag() {
        assert!(kron_mle_flipflop(&DMatrix::zeros(1, 6), shape(2, 3), 1e-8, 10).is_err());
        let row = SpdMatrix::identity(2);
        let y = kron_data(10, 9, &row, &SpdMatrix::identity(3));
        let fit = kron_mle_flipflop(&y, shape(2, 3), 0.0, 3).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 3);
    }

    #[test]
    fn blend_weight_cases() {
        assert!(blend_weight(1_000_000, 6.0 + 11.0, 6) > 0.9999);
        assert_eq!(blend_weight(1, 8.0, 6), 0.5);
    }

    #[test]
    fn blend_equal_endpoints_and_bounds() {
        let s = shape(1, 2);
        let g = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, -1.0, 2.0, 0.3, -0.7]);
        let d = GroupedDataset::from_matrices(vec![g.clone()], s).unwrap();
        let target = SpdMatrix::new(sample_cov(&g)).unwrap();
        for dof in [4, 7, 20] {
            let r = partial_pool_blend(&d, Some(dof), Some(&target)).unwrap();
            assert!((r.estimates[0].matrix() - target.matrix()).amax() < 1e-14);
        }
        assert!(partial_pool_blend(&d, Some(3), Some(&target)).is_err());

        let mut rng = RngStream::new(12, 0);
        let groups: Vec<_> = (0..3)
            .map(|j| sample_matrix_normal_rows(&DMatrix::zeros(5 + j, 4), &SpdMatrix::identity(4), &mut rng))
            .collect();
        let d = GroupedDataset::from_matrices(groups, shape(2, 2)).unwrap();
        let r = partial_pool_blend(&d, None, None).unwrap();
        let dof = r.metadata[0].1;
        assert!((6.0..=16.0).contains(&dof));
        let pooled = pooled_sample_cov(&d);
        let pooled_min = pooled.clone().symmetric_eigenvalues().min();
        for (j, est) in r.estimates.iter().enumerate() {
            let s_min = sample_cov(d.data(j)).symmetric_eigenvalues().min();
            assert!(est.eigen_range().0 >= s_min.min(pooled_min) - 1e-10);
        }
    }

    #[test]
    fn bayes_stein_cases() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let one = bayes_stein_from_draws(&[vec![a.clone()]]).unwrap();
        assert!((one[0].matrix() - &a).amax() < 1e-12);
        let same = bayes_stein_from_draws(&[vec![a.clone(); 4]]).unwrap();
        assert!((same[0].matrix() - &a).amax() < 1e-12);
        let i = DMatrix::<f64>::identity(2, 2);
        let r = bayes_stein_from_draws(&[vec![i.clone(), &i * 3.0]]).unwrap();
        assert!((r[0].matrix() - &i * 1.5).amax() < 1e-12);
        assert!(bayes_stein_from_draws(&[vec![]]).is_err());
    }

    #[test]
    fn bayes_stein_congruence_equivariance() {
        let mut rng = RngStream::new(77, 0);
        let draws: Vec<DMatrix<f64>> = (0..5)
            .map(|_| {
                let z = crate::randdist::standard_normal_matrix(3, 3, &mut rng);
                &z * z.transpose() + DMatrix::identity(3, 3)
            })
            .collect();
        let a = crate::randdist::standard_normal_matrix(3, 3, &mut rng) + DMatrix::identity(3, 3) * 2.0;
        let mapped: Vec<_> = draws.iter().map(|d| &a * d * a.transpose()).collect();
        let e = bayes_stein_from_draws(&[draws]).unwrap();
        let f = bayes_stein_from_draws(&[mapped]).unwrap();
        let expected = &a * e[0].matrix() * a.transpose();
        assert!((f[0].matrix() - &expected).amax() < 1e-9 * expected.amax());
    }
}
