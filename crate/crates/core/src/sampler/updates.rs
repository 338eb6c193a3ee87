//! Full-conditional updates of the Metropolis-within-Gibbs sweep.
//!
//! Per-group conjugate draws use their own random streams derived from
//! `(seed, sweep, step, group)`, so results do not depend on how the group
//! loop is scheduled. Shared parameters and all Metropolis decisions draw
//! from the caller's serial stream.

use nalgebra::DMatrix;

use crate::error::{Result, SwagError};
use crate::linalg::{chol_column_expansion, contract_cols, contract_rows, MatrixShape, SpdMatrix};
use crate::par::map_groups;
use crate::randdist::{
    logpdf_beta, logpdf_matrix_t_unit_rows, logpdf_wishart, logpmf_negbin_trunc, sample_inverse_wishart_scale,
    sample_matrix_normal_rows, sample_wishart_inv_scale, RngStream,
};

use super::config::SwagConfig;
use super::state::{blend, SwagState};

const STEP_LATENT: u64 = 1;
const STEP_ACROSS: u64 = 2;
const STEP_WITHIN: u64 = 3;
const STEP_FACTORS: u64 = 4;

/// Reflects a uniform random-walk proposal into `(0, 1)`: values at or below
/// zero map to `|x|`, values at or above one map to `2 - x`. Returns `None`
/// if the proposal lands exactly on a bound.
pub fn reflect_unit(mut x: f64) -> Option<f64> {
    for _ in 0..64 {
        if x > 0.0 && x < 1.0 {
            return Some(x);
        }
        if x == 0.0 || x == 1.0 || !x.is_finite() {
            return None;
        }
        x = if x < 0.0 { -x } else { 2.0 - x };
    }
    None
}

/// Reflects a proposal at the lower bound: `x` if `x >= lower`, otherwise
/// `lower + (lower - x)`.
pub fn reflect_lower(x: f64, lower: f64) -> f64 {
    if x >= lower {
        x
    } else {
        2.0 * lower - x
    }
}

/// Continuous reflecting uniform proposal around an integer dof, rounded back
/// to the integers.
///
/// The reflection point is `lower - 1/2`, the edge of the rounding cell of
/// `lower`. Reflecting at `lower` itself would give that state a half-width
/// cell and break proposal symmetry there.
pub fn propose_dof(current: u32, step: f64, lower: u32, rng: &mut RngStream) -> u32 {
    let raw = rng.uniform(current as f64 - step, current as f64 + step);
    let reflected = reflect_lower(raw, lower as f64 - 0.5).round();
    (reflected as u32).max(lower)
}

fn metropolis_accept(log_ratio: f64, rng: &mut RngStream) -> bool {
    if log_ratio.is_nan() {
        return false;
    }
    if log_ratio >= 0.0 {
        return true;
    }
    rng.uniform(0.0, 1.0).ln() < log_ratio
}

/// Data and hyperparameters shared by all updates.
#[derive(Debug, Clone)]
pub struct Sampler {
    config: SwagConfig,
    shape: MatrixShape,
    data: Vec<DMatrix<f64>>,
    scatter: Vec<DMatrix<f64>>,
    row_scale_inv: SpdMatrix,
    col_scale_inv: SpdMatrix,
}

impl Sampler {
    pub fn new(data: Vec<DMatrix<f64>>, shape: MatrixShape, config: SwagConfig) -> Result<Self> {
        config.validate(shape)?;
        if data.is_empty() {
            return Err(SwagError::InvalidData("at least one group is required".into()));
        }
        for y in &data {
            if y.ncols() != shape.p() || y.nrows() == 0 {
                return Err(SwagError::DimensionMismatch(format!(
                    "group data is {}x{}, expected n x {}",
                    y.nrows(),
                    y.ncols(),
                    shape.p()
                )));
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(SwagError::InvalidData("non-finite data".into()));
            }
        }
        let scatter = data.iter().map(|y| y.transpose() * y).collect();
        let row_scale_inv = config.row_scale.inverse();
        let col_scale_inv = config.col_scale.inverse();
        Ok(Self {
            config,
            shape,
            data,
            scatter,
            row_scale_inv,
            col_scale_inv,
        })
    }

    pub fn config(&self) -> &SwagConfig {
        &self.config
    }

    pub fn shape(&self) -> MatrixShape {
        self.shape
    }

    pub fn data(&self) -> &[DMatrix<f64>] {
        &self.data
    }

    /// Replaces the observed data (same group sizes expected by the state).
    pub fn set_data(&mut self, data: Vec<DMatrix<f64>>) {
        self.scatter = data.iter().map(|y| y.transpose() * y).collect();
        self.data = data;
    }

    fn p(&self) -> f64 {
        self.shape.p() as f64
    }

    fn dof_lower(&self) -> u32 {
        self.shape.p() as u32 + 2
    }

    fn dof_log_prior(&self, dof: u32) -> f64 {
        logpmf_negbin_trunc(
            dof as i64,
            self.config.dof_size,
            self.config.dof_prob,
            self.dof_lower() as i64,
        )
    }

    fn group_stream(&self, sweep: u64, step: u64, group: usize) -> RngStream {
        RngStream::derive(self.config.seed, &[sweep, step], group as u64)
    }

    // ---- weight and latent factors ------------------------------------

    /// Log full conditional of the weight with the latent factors integrated
    /// out, up to a constant. Non-PD blends give `-inf`.
    pub fn log_target_weight(&self, state: &SwagState, weight: f64) -> f64 {
        if !(weight > 0.0 && weight < 1.0) {
            return f64::NEG_INFINITY;
        }
        let terms = map_groups(self.data.len(), |j| {
            let sigma = match blend(weight, &state.across[j], &state.within[j]) {
                Ok(s) => s,
                Err(_) => return f64::NEG_INFINITY,
            };
            let n = self.data[j].nrows() as f64;
            match sigma.solve(&self.scatter[j]) {
                Ok(x) => -0.5 * n * sigma.logdet() - 0.5 * x.trace(),
                Err(_) => f64::NEG_INFINITY,
            }
        });
        terms.iter().sum::<f64>() + logpdf_beta(weight, self.config.alpha, self.config.beta)
    }

    /// Reflecting random-walk Metropolis step on the weight, then an exact
    /// draw of every latent factor. Returns whether the weight moved.
    pub fn update_weight_and_latent(
        &self,
        state: &mut SwagState,
        sweep: u64,
        rng: &mut RngStream,
    ) -> Result<bool> {
        let step = self.config.weight_step;
        let raw = rng.uniform(state.weight - step, state.weight + step);
        let accepted = match reflect_unit(raw) {
            Some(proposal) => {
                let ratio = self.log_target_weight(state, proposal)
                    - self.log_target_weight(state, state.weight);
                let ok = metropolis_accept(ratio, rng);
                if ok {
                    state.weight = proposal;
                }
                ok
            }
            None => false,
        };
        self.draw_latent(state, sweep)?;
        Ok(accepted)
    }

    /// `U_j ~ N(M_j, S_j ⊗ I)` with `S_j = (Ψ_j⁻¹ + λ/(1-λ) Λ_j⁻¹)⁻¹` and
    /// `M_j = λ^{1/2}/(1-λ) Y_j Λ_j⁻¹ S_j`.
    pub fn draw_latent(&self, state: &mut SwagState, sweep: u64) -> Result<()> {
        let w = state.weight;
        let odds = w / (1.0 - w);
        let lead = w.sqrt() / (1.0 - w);
        let draws = map_groups(self.data.len(), |j| -> Result<DMatrix<f64>> {
            let within_inv = state.within[j].inverse();
            let precision =
                SpdMatrix::new(state.across[j].inverse().matrix() + within_inv.matrix() * odds)?;
            let cov = precision.inverse();
            let mean = (&self.data[j] * within_inv.matrix() * cov.matrix()) * lead;
            let mut rng = self.group_stream(sweep, STEP_LATENT, j);
            Ok(sample_matrix_normal_rows(&mean, &cov, &mut rng))
        });
        for (j, d) in draws.into_iter().enumerate() {
            state.latent[j] = d.map_err(|e| e.in_step("latent factor draw"))?;
        }
        Ok(())
    }

    // ---- across-group dof and covariances -----------------------------

    /// `Σ_j log p(U_j | Ψ_0, ν) + log p(ν)` with the matrix-t marginal
    /// `T(ν - p + 1, 0, (ν - p - 1) Ψ_0 ⊗ I)`.
    pub fn log_target_across_dof(&self, state: &SwagState, dof: u32) -> f64 {
        let p = self.p();
        let colscale = match state.pooled.scaled(dof as f64 - p - 1.0) {
            Ok(c) => c,
            Err(_) => return f64::NEG_INFINITY,
        };
        let terms = map_groups(self.data.len(), |j| {
            let u = &state.latent[j];
            let n = u.nrows();
            logpdf_matrix_t_unit_rows(
                u,
                dof as f64 - p + 1.0,
                &DMatrix::zeros(n, u.ncols()),
                &colscale,
            )
            .unwrap_or(f64::NEG_INFINITY)
        });
        terms.iter().sum::<f64>() + self.dof_log_prior(dof)
    }

    /// Metropolis step on `ν` with `Ψ_j` integrated out, then exact draws
    /// `Ψ_j⁻¹ ~ Wishart((U_jᵀU_j + (ν-p-1)Ψ_0)⁻¹, ν + n_j)`.
    pub fn update_across(&self, state: &mut SwagState, sweep: u64, rng: &mut RngStream) -> Result<bool> {
        let proposal = propose_dof(state.across_dof, self.config.across_dof_step, self.dof_lower(), rng);
        let accepted = if proposal == state.across_dof {
            true
        } else {
            let ratio = self.log_target_across_dof(state, proposal)
                - self.log_target_across_dof(state, state.across_dof);
            metropolis_accept(ratio, rng)
        };
        if accepted {
            state.across_dof = proposal;
        }
        self.draw_across(state, sweep)?;
        Ok(accepted)
    }

    pub fn draw_across(&self, state: &mut SwagState, sweep: u64) -> Result<()> {
        let dof = state.across_dof as f64;
        let prior = state.pooled.matrix() * (dof - self.p() - 1.0);
        let draws = map_groups(self.data.len(), |j| -> Result<SpdMatrix> {
            let u = &state.latent[j];
            let scale = SpdMatrix::new(u.transpose() * u + &prior)?;
            let mut rng = self.group_stream(sweep, STEP_ACROSS, j);
            sample_inverse_wishart_scale(&scale, dof + u.nrows() as f64, &mut rng)
        });
        for (j, d) in draws.into_iter().enumerate() {
            state.across[j] = d.map_err(|e| e.in_step("across-group covariance draw"))?;
        }
        Ok(())
    }

    // ---- within-group dof and covariances -----------------------------

    fn residuals(&self, state: &SwagState) -> Vec<DMatrix<f64>> {
        let s = state.weight.sqrt();
        self.data
            .iter()
            .zip(&state.latent)
            .map(|(y, u)| y - u * s)
            .collect()
    }

    /// `Σ_j log p(Y_j | λ, U_j, R_j, C_j, γ) + log p(γ)` with the matrix-t
    /// marginal `T(γ - p + 1, λ^{1/2} U_j, (1-λ)(γ-p-1)(C_j ⊗ R_j) ⊗ I)`.
    pub fn log_target_within_dof(&self, state: &SwagState, dof: u32) -> f64 {
        let residuals = self.residuals(state);
        self.log_target_within_dof_with(state, dof, &residuals)
    }

    fn log_target_within_dof_with(&self, state: &SwagState, dof: u32, residuals: &[DMatrix<f64>]) -> f64 {
        let p = self.p();
        let factor = (1.0 - state.weight) * (dof as f64 - p - 1.0);
        let terms = map_groups(self.data.len(), |j| {
            let colscale = match state.col_cov[j].kron(&state.row_cov[j]).scaled(factor) {
                Ok(c) => c,
                Err(_) => return f64::NEG_INFINITY,
            };
            let r = &residuals[j];
            let n = r.nrows();
            logpdf_matrix_t_unit_rows(
                r,
                dof as f64 - p + 1.0,
                &DMatrix::zeros(n, r.ncols()),
                &colscale,
            )
            .unwrap_or(f64::NEG_INFINITY)
        });
        terms.iter().sum::<f64>() + self.dof_log_prior(dof)
    }

    /// Metropolis step on `γ` with `Λ_j` integrated out, then exact draws
    /// `Λ_j⁻¹ ~ Wishart((ỸᵀỸ/(1-λ) + (γ-p-1) C_j ⊗ R_j)⁻¹, γ + n_j)`,
    /// `Ỹ = Y_j - λ^{1/2} U_j`.
    pub fn update_within(&self, state: &mut SwagState, sweep: u64, rng: &mut RngStream) -> Result<bool> {
        let residuals = self.residuals(state);
        let proposal = propose_dof(state.within_dof, self.config.within_dof_step, self.dof_lower(), rng);
        let accepted = if proposal == state.within_dof {
            true
        } else {
            let ratio = self.log_target_within_dof_with(state, proposal, &residuals)
                - self.log_target_within_dof_with(state, state.within_dof, &residuals);
            metropolis_accept(ratio, rng)
        };
        if accepted {
            state.within_dof = proposal;
        }
        self.draw_within_with(state, sweep, &residuals)?;
        Ok(accepted)
    }

    pub fn draw_within(&self, state: &mut SwagState, sweep: u64) -> Result<()> {
        let residuals = self.residuals(state);
        self.draw_within_with(state, sweep, &residuals)
    }

    fn draw_within_with(&self, state: &mut SwagState, sweep: u64, residuals: &[DMatrix<f64>]) -> Result<()> {
        let dof = state.within_dof as f64;
        let shrink = dof - self.p() - 1.0;
        let inv_rest = 1.0 / (1.0 - state.weight);
        let draws = map_groups(self.data.len(), |j| -> Result<SpdMatrix> {
            let r = &residuals[j];
            let target = state.col_cov[j].kron(&state.row_cov[j]);
            let scale = SpdMatrix::new(r.transpose() * r * inv_rest + target.matrix() * shrink)?;
            let mut rng = self.group_stream(sweep, STEP_WITHIN, j);
            sample_inverse_wishart_scale(&scale, dof + r.nrows() as f64, &mut rng)
        });
        for (j, d) in draws.into_iter().enumerate() {
            state.within[j] = d.map_err(|e| e.in_step("within-group covariance draw"))?;
        }
        Ok(())
    }

    // ---- group Kronecker factors --------------------------------------

    /// `R_j` then `C_j` from their Wishart full conditionals, using the
    /// column expansion of `Λ_j⁻¹`.
    pub fn update_kron_factors(&self, state: &mut SwagState, sweep: u64) -> Result<()> {
        let shape = self.shape;
        let (p1, p2) = (shape.p1() as f64, shape.p2() as f64);
        let gamma = state.within_dof as f64;
        let shrink = gamma - self.p() - 1.0;
        let cfg = &self.config;
        let draws = map_groups(self.data.len(), |j| -> Result<(SpdMatrix, SpdMatrix)> {
            let ex = chol_column_expansion(&state.within[j].inverse(), shape)?;
            let mut rng = self.group_stream(sweep, STEP_FACTORS, j);
            let row_inv_scale = SpdMatrix::new(
                contract_rows(&ex, state.col_cov[j].matrix()) * shrink
                    + self.row_scale_inv.matrix() * cfg.row_dof,
            )?;
            let row = sample_wishart_inv_scale(&row_inv_scale, cfg.row_dof + gamma * p2, &mut rng)?;
            let col_inv_scale = SpdMatrix::new(
                contract_cols(&ex, row.matrix()) * shrink + self.col_scale_inv.matrix() * cfg.col_dof,
            )?;
            let col = sample_wishart_inv_scale(&col_inv_scale, cfg.col_dof + gamma * p1, &mut rng)?;
            Ok((row, col))
        });
        for (j, d) in draws.into_iter().enumerate() {
            let (row, col) = d.map_err(|e| e.in_step("row/column covariance draw"))?;
            state.row_cov[j] = row;
            state.col_cov[j] = col;
        }
        Ok(())
    }

    // ---- pooled covariance, pooled factors, pooled dof ----------------

    /// `Ψ_0 ~ Wishart(((ν-p-1) Σ_j Ψ_j⁻¹ + ξ (P_2 ⊗ P_1)⁻¹)⁻¹, ξ + Jν)`.
    pub fn draw_pooled(&self, state: &mut SwagState, rng: &mut RngStream) -> Result<()> {
        let p = self.p();
        let nu = state.across_dof as f64;
        let xi = state.pooled_dof as f64;
        let mut acc = state.pooled_col.inverse().kron(&state.pooled_row.inverse()).into_matrix() * xi;
        for a in &state.across {
            acc += a.inverse().matrix() * (nu - p - 1.0);
        }
        let inv_scale = SpdMatrix::new(acc).map_err(|e| e.in_step("pooled covariance"))?;
        let dof = xi + state.num_groups() as f64 * nu;
        state.pooled = sample_wishart_inv_scale(&inv_scale, dof, rng).map_err(|e| e.in_step("pooled covariance"))?;
        Ok(())
    }

    /// `P_1` then `P_2` from their inverse-Wishart full conditionals. The
    /// Kronecker contractions use the column expansion of `Ψ_0` itself,
    /// which is what the Wishart likelihood `tr((P_2 ⊗ P_1)⁻¹ Ψ_0)` yields.
    pub fn draw_pooled_factors(&self, state: &mut SwagState, rng: &mut RngStream) -> Result<()> {
        let shape = self.shape;
        let (p1, p2) = (shape.p1() as f64, shape.p2() as f64);
        let xi = state.pooled_dof as f64;
        let cfg = &self.config;
        let ex = chol_column_expansion(&state.pooled, shape)?;
        let row_scale = SpdMatrix::new(
            contract_rows(&ex, state.pooled_col.inverse().matrix()) * xi
                + cfg.pooled_row_mean.matrix() * (cfg.pooled_row_dof - p1 - 1.0),
        )
        .map_err(|e| e.in_step("pooled row covariance"))?;
        state.pooled_row = sample_inverse_wishart_scale(&row_scale, cfg.pooled_row_dof + xi * p2, rng)
            .map_err(|e| e.in_step("pooled row covariance"))?;
        let col_scale = SpdMatrix::new(
            contract_cols(&ex, state.pooled_row.inverse().matrix()) * xi
                + cfg.pooled_col_mean.matrix() * (cfg.pooled_col_dof - p2 - 1.0),
        )
        .map_err(|e| e.in_step("pooled column covariance"))?;
        state.pooled_col = sample_inverse_wishart_scale(&col_scale, cfg.pooled_col_dof + xi * p1, rng)
            .map_err(|e| e.in_step("pooled column covariance"))?;
        Ok(())
    }

    /// `log Wishart(Ψ_0; (P_2 ⊗ P_1)/ξ, ξ) + log p(ξ)`.
    pub fn log_target_pooled_dof(&self, state: &SwagState, dof: u32) -> f64 {
        let target = state.pooled_col.kron(&state.pooled_row);
        match target.scaled(1.0 / dof as f64) {
            Ok(scale) => logpdf_wishart(&state.pooled, &scale, dof as f64).unwrap_or(f64::NEG_INFINITY)
                + self.dof_log_prior(dof),
            Err(_) => f64::NEG_INFINITY,
        }
    }

    /// Conjugate draws of `Ψ_0`, `P_1`, `P_2`, then a Metropolis step on `ξ`.
    pub fn update_pooled(&self, state: &mut SwagState, rng: &mut RngStream) -> Result<bool> {
        self.draw_pooled(state, rng)?;
        self.draw_pooled_factors(state, rng)?;
        let proposal = propose_dof(state.pooled_dof, self.config.pooled_dof_step, self.dof_lower(), rng);
        let accepted = if proposal == state.pooled_dof {
            true
        } else {
            let ratio = self.log_target_pooled_dof(state, proposal)
                - self.log_target_pooled_dof(state, state.pooled_dof);
            metropolis_accept(ratio, rng)
        };
        if accepted {
            state.pooled_dof = proposal;
        }
        Ok(accepted)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_reflection() {
        assert!((reflect_unit(1.1).unwrap() - 0.9).abs() < 1e-15);
        assert!((reflect_unit(-0.2).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(reflect_unit(0.4), Some(0.4));
        assert_eq!(reflect_unit(0.0), None);
        assert_eq!(reflect_unit(1.0), None);
        assert!((reflect_unit(2.3).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn dof_reflection() {
        // p = 6: lower bound 8, proposal 7.2 reflects to 8.8.
        assert!((reflect_lower(7.2, 8.0) - 8.8).abs() < 1e-12);
        assert_eq!(reflect_lower(9.5, 8.0), 9.5);
        let mut rng = RngStream::new(3, 0);
        for _ in 0..1000 {
            let d = propose_dof(8, 3.0, 8, &mut rng);
            assert!((8..=11).contains(&d));
        }
    }

    #[test]
    fn dof_proposal_is_symmetric() {
        // q(a -> b) = q(b -> a) for integer states near the boundary.
        let lower = 8;
        let step = 2.0;
        let trials = 200_000;
        let freq = |from: u32, to: u32| {
            let mut rng = RngStream::new(from as u64 * 31 + to as u64, 0);
            (0..trials).filter(|_| propose_dof(from, step, lower, &mut rng) == to).count() as f64
                / trials as f64
        };
        for (a, b) in [(8, 9), (8, 10), (9, 10), (9, 11)] {
            let (ab, ba) = (freq(a, b), freq(b, a));
            assert!((ab - ba).abs() < 0.006, "{a}->{b}: {ab} vs {ba}");
        }
    }

    #[test]
    fn metropolis_edge_cases() {
        let mut rng = RngStream::new(0, 0);
        assert!(metropolis_accept(0.0, &mut rng));
        assert!(!metropolis_accept(f64::NAN, &mut rng));
        assert!(!metropolis_accept(f64::NEG_INFINITY, &mut rng));
    }
}
