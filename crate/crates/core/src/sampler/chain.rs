use nalgebra::DMatrix;

use crate::data::GroupedDataset;
use crate::error::{Result, SwagError};
use crate::randdist::RngStream;

use super::config::SwagConfig;
use super::state::SwagState;
use super::updates::Sampler;

/// Serial stream id for shared-parameter draws and Metropolis decisions.
const SERIAL_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
}

impl Schedule {
    /// Whether zero-based iteration `t` is kept.
    pub fn retains(&self, t: usize) -> bool {
        t >= self.burn_in && (t - self.burn_in + 1).is_multiple_of(self.thin)
    }

    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// Acceptance fractions of the four Metropolis steps over all iterations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AcceptanceRates {
    pub weight: f64,
    pub across_dof: f64,
    pub within_dof: f64,
    pub pooled_dof: f64,
}

/// Retained draws of the pooled and Kronecker components, when requested.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ComponentDraws {
    pub pooled: Vec<DMatrix<f64>>,
    pub pooled_row: Vec<DMatrix<f64>>,
    pub pooled_col: Vec<DMatrix<f64>>,
    /// `[group][draw]`.
    pub row_cov: Vec<Vec<DMatrix<f64>>>,
    pub col_cov: Vec<Vec<DMatrix<f64>>>,
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    /// `[group][draw]` retained group covariances.
    pub sigma_draws: Vec<Vec<DMatrix<f64>>>,
    pub weight: Vec<f64>,
    pub across_dof: Vec<u32>,
    pub within_dof: Vec<u32>,
    pub pooled_dof: Vec<u32>,
    pub components: Option<ComponentDraws>,
    pub acceptance: AcceptanceRates,
    pub schedule: Schedule,
    pub final_state: SwagState,
}

impl ChainOutput {
    pub fn num_draws(&self) -> usize {
        self.weight.len()
    }

    pub fn posterior_mean_weight(&self) -> f64 {
        self.weight.iter().sum::<f64>() / self.weight.len().max(1) as f64
    }
}

/// Runs the sampler from the deterministic initial state.
///
/// Sweep order: weight and latent factors, across-group dof and covariances,
/// within-group dof and covariances, group Kronecker factors, then the pooled
/// covariance, its factors and its dof.
pub fn run_chain(data: &GroupedDataset, config: &SwagConfig) -> Result<ChainOutput> {
    let shape = data.shape();
    let matrices: Vec<DMatrix<f64>> = data.groups().iter().map(|g| g.data.clone()).collect();
    let sampler = Sampler::new(matrices, shape, config.clone())?;
    let state = SwagState::initialize(sampler.data(), shape, config)?;
    run_chain_from(&sampler, state)
}

pub fn run_chain_from(sampler: &Sampler, mut state: SwagState) -> Result<ChainOutput> {
    let config = sampler.config();
    let shape = sampler.shape();
    let schedule = Schedule {
        iterations: config.iterations,
        burn_in: config.burn_in,
        thin: config.thin,
    };
    if state.num_groups() != sampler.data().len() {
        return Err(SwagError::DimensionMismatch(
            "state and data disagree on the number of groups".into(),
        ));
    }
    let j = state.num_groups();
    let keep = schedule.retained();
    let mut sigma_draws = vec![Vec::with_capacity(keep); j];
    let mut weight = Vec::with_capacity(keep);
    let mut across_dof = Vec::with_capacity(keep);
    let mut within_dof = Vec::with_capacity(keep);
    let mut pooled_dof = Vec::with_capacity(keep);
    let mut components = config.record_components.then(|| ComponentDraws {
        row_cov: vec![Vec::with_capacity(keep); j],
        col_cov: vec![Vec::with_capacity(keep); j],
        ..Default::default()
    });
    let mut accepted = [0usize; 4];
    let mut rng = RngStream::new(config.seed, SERIAL_STREAM);

    for t in 0..schedule.iterations {
        let sweep = t as u64;
        accepted[0] += sampler.update_weight_and_latent(&mut state, sweep, &mut rng)? as usize;
        accepted[1] += sampler.update_across(&mut state, sweep, &mut rng)? as usize;
        accepted[2] += sampler.update_within(&mut state, sweep, &mut rng)? as usize;
        sampler.update_kron_factors(&mut state, sweep)?;
        accepted[3] += sampler.update_pooled(&mut state, &mut rng)? as usize;

        if schedule.retains(t) {
            state.check_invariants(shape)?;
            for (g, draws) in sigma_draws.iter_mut().enumerate() {
                draws.push(state.sigma(g).map_err(|e| e.in_step("group covariance"))?.into_matrix());
            }
            weight.push(state.weight);
            across_dof.push(state.across_dof);
            within_dof.push(state.within_dof);
            pooled_dof.push(state.pooled_dof);
            if let Some(c) = components.as_mut() {
                c.pooled.push(state.pooled.matrix().clone());
                c.pooled_row.push(state.pooled_row.matrix().clone());
                c.pooled_col.push(state.pooled_col.matrix().clone());
                for g in 0..j {
                    c.row_cov[g].push(state.row_cov[g].matrix().clone());
                    c.col_cov[g].push(state.col_cov[g].matrix().clone());
                }
            }
        }
    }
    let total = schedule.iterations as f64;
    Ok(ChainOutput {
        sigma_draws,
        weight,
        across_dof,
        within_dof,
        pooled_dof,
        components,
        acceptance: AcceptanceRates {
            weight: accepted[0] as f64 / total,
            across_dof: accepted[1] as f64 / total,
            within_dof: accepted[2] as f64 / total,
            pooled_dof: accepted[3] as f64 / total,
        },
        schedule,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_retention_counts() {
        for (it, burn, thin, expect) in [(28_000, 3_000, 10, 2_500), (33_000, 3_000, 30, 1_000), (10, 3, 4, 1)] {
            let s = Schedule {
                iterations: it,
                burn_in: burn,
                thin,
            };
            assert_eq!(s.retained(), expect);
            assert_eq!((0..it).filter(|&t| s.retains(t)).count(), expect);
        }
    }
}
