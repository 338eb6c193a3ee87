//! Losses, simulation regimes, QDA and MCMC diagnostics.

mod diagnostics;
mod loss;
mod qda;
mod regime;

pub use diagnostics::{autocorr, ess, SeriesSummary};
pub use loss::{avg_stein_loss, stein_loss};
pub use qda::{qda_classify, qda_score, ClassModel, ConfusionMatrix};
pub use regime::{
    exch_corr, generate_regime, simulate_dataset, Homogeneity, Regime, RhoRecord, Structure,
};
