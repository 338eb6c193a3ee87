//! In-browser demo: regime simulation with estimator losses, a short chain
//! trace of the blend weight, and a heatmap of a blended covariance.
//!
//! Every export returns a JSON string, or an error message.

use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

use swag_core::estimators::{bayes_stein_estimate, kron_mle, pooled_kron, pooled_mle, sample_mle, EstimatorResult};
use swag_core::eval::{avg_stein_loss, exch_corr, generate_regime, simulate_dataset, Regime};
use swag_core::{run_chain, GroupedDataset, MatrixShape, Result, SpdMatrix, SwagConfig};

/// Browsers run single-threaded; keep chains short enough to stay
/// responsive.
const MAX_ITERATIONS: usize = 20_000;

fn regime_data(regime: &str, groups: usize, p1: usize, p2: usize, n: usize, seed: u64) -> Result<(Vec<SpdMatrix>, GroupedDataset)> {
    let shape = MatrixShape::new(p1, p2)?;
    let mut r: Regime = regime.parse()?;
    r.groups = groups;
    r.shape = shape;
    r.seed = seed;
    let (truths, _) = generate_regime(&r)?;
    let data = simulate_dataset(&truths, &vec![n; groups], shape, seed.wrapping_add(1))?;
    Ok((truths, data))
}

fn demo_config(shape: MatrixShape, iterations: usize, seed: u64) -> SwagConfig {
    let iterations = iterations.clamp(100, MAX_ITERATIONS);
    let burn_in = iterations / 5;
    SwagConfig::defaults(shape)
        .with_schedule(iterations, burn_in, ((iterations - burn_in) / 500).max(1))
        .with_seed(seed)
}

fn matrix_json(m: &SpdMatrix) -> Value {
    let d = m.dim();
    json!((0..d).map(|r| (0..d).map(|c| m.matrix()[(r, c)]).collect::<Vec<_>>()).collect::<Vec<_>>())
}

fn loss(truths: &[SpdMatrix], r: Result<EstimatorResult>) -> Value {
    match r.and_then(|e| avg_stein_loss(truths, &e.estimates)) {
        Ok(v) => json!(v),
        Err(_) => Value::Null,
    }
}

/// One replicate of a regime: Stein losses of the five estimators and the
/// weight trace of the chain.
pub fn simulate_losses_json(regime: &str, groups: usize, p1: usize, p2: usize, n: usize, iterations: usize, seed: u64) -> Result<String> {
    let (truths, data) = regime_data(regime, groups, p1, p2, n, seed)?;
    let config = demo_config(data.shape(), iterations, seed);
    let chain = run_chain(&data, &config)?;
    let losses = json!({
        "SWAG": loss(&truths, bayes_stein_estimate(&chain)),
        "S": loss(&truths, sample_mle(&data)),
        "S_p": loss(&truths, pooled_mle(&data)),
        "K": loss(&truths, kron_mle(&data)),
        "K_p": loss(&truths, pooled_kron(&data)),
    });
    Ok(json!({
        "regime": regime,
        "losses": losses,
        "weight_mean": chain.posterior_mean_weight(),
        "weight_trace": chain.weight,
        "acceptance": {
            "weight": chain.acceptance.weight,
            "across_dof": chain.acceptance.across_dof,
            "within_dof": chain.acceptance.within_dof,
            "pooled_dof": chain.acceptance.pooled_dof,
        },
    })
    .to_string())
}

/// Truth and posterior estimate of group 1, for side-by-side heatmaps.
pub fn estimate_heatmap_json(regime: &str, groups: usize, p1: usize, p2: usize, n: usize, iterations: usize, seed: u64) -> Result<String> {
    let (truths, data) = regime_data(regime, groups, p1, p2, n, seed)?;
    let config = demo_config(data.shape(), iterations, seed);
    let est = bayes_stein_estimate(&run_chain(&data, &config)?)?;
    let sample = swag_core::estimators::sample_cov(data.data(0));
    Ok(json!({
        "truth": matrix_json(&truths[0]),
        "estimate": matrix_json(&est.estimates[0]),
        "sample": (0..sample.nrows()).map(|r| sample.row(r).iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>(),
    })
    .to_string())
}

/// `w Z(p) + (1 - w) Z(p2) ⊗ Z(p1)` with exchangeable `Z` factors.
pub fn blend_structure_json(p1: usize, p2: usize, rho_full: f64, rho_row: f64, rho_col: f64, weight: f64) -> Result<String> {
    let shape = MatrixShape::new(p1, p2)?;
    if !(0.0..=1.0).contains(&weight) {
        return Err(swag_core::SwagError::InvalidConfig(format!("weight {weight} outside [0,1]")));
    }
    let full = exch_corr(shape.p(), rho_full)?;
    let kron = exch_corr(p2, rho_col)?.kron(&exch_corr(p1, rho_row)?);
    let blend = SpdMatrix::new(full.matrix() * weight + kron.matrix() * (1.0 - weight))?;
    Ok(json!({ "matrix": matrix_json(&blend), "logdet": blend.logdet() }).to_string())
}

#[wasm_bindgen]
pub fn simulate_losses(regime: &str, groups: usize, p1: usize, p2: usize, n: usize, iterations: usize, seed: u32) -> std::result::Result<String, String> {
    simulate_losses_json(regime, groups, p1, p2, n, iterations, seed as u64).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn estimate_heatmap(regime: &str, groups: usize, p1: usize, p2: usize, n: usize, iterations: usize, seed: u32) -> std::result::Result<String, String> {
    estimate_heatmap_json(regime, groups, p1, p2, n, iterations, seed as u64).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn blend_structure(p1: usize, p2: usize, rho_full: f64, rho_row: f64, rho_col: f64, weight: f64) -> std::result::Result<String, String> {
    blend_structure_json(p1, p2, rho_full, rho_row, rho_col, weight).map_err(|e| e.to_string())
}
