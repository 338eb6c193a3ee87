//! The hierarchical model state and its Metropolis-within-Gibbs sampler.

mod chain;
mod config;
mod prior;
mod state;
mod updates;

pub use chain::{run_chain, run_chain_from, AcceptanceRates, ChainOutput, ComponentDraws, Schedule};
pub use config::SwagConfig;
pub use prior::{simulate_data, simulate_prior, FixedScalars};
pub use state::SwagState;
pub use updates::{propose_dof, reflect_lower, reflect_unit, Sampler};
