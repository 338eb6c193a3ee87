//! Joint-distribution checks: forward draws from prior plus likelihood are
//! compared with a chain that alternates full sweeps and fresh data draws.

use nalgebra::DMatrix;
use rand_distr::{Beta, Distribution, Gamma, Poisson};
use swag_core::eval::ess;
use swag_core::sampler::{simulate_data, simulate_prior, FixedScalars, Sampler};
use swag_core::{MatrixShape, RngStream, SwagConfig, SwagState};

const SIZES: [usize; 2] = [3, 3];

fn config(shape: MatrixShape) -> SwagConfig {
    let mut c = SwagConfig::defaults(shape);
    c.dof_size = 2.0;
    c.dof_prob = 0.4;
    c.pooled_row_dof = shape.p1() as f64 + 6.0;
    c.pooled_col_dof = shape.p2() as f64 + 6.0;
    c.row_dof = shape.p1() as f64 + 4.0;
    c.col_dof = shape.p2() as f64 + 4.0;
    c.across_dof_step = 2.0;
    c.within_dof_step = 2.0;
    c.pooled_dof_step = 2.0;
    c.weight_step = 0.2;
    c
}

fn summaries(s: &SwagState) -> Vec<f64> {
    vec![
        s.weight,
        s.across_dof as f64,
        s.within_dof as f64,
        s.pooled_dof as f64,
        s.across[0].logdet(),
        s.within[0].logdet(),
        s.pooled.logdet(),
        s.row_cov[0].logdet(),
        s.pooled_row.logdet(),
    ]
}

const NAMES: [&str; 9] = [
    "weight", "across_dof", "within_dof", "pooled_dof", "logdet across_1", "logdet within_1",
    "logdet pooled", "logdet row_1", "logdet pooled_row",
];

fn draw_dof(config: &SwagConfig, lower: u32, rng: &mut RngStream) -> u32 {
    let scale = (1.0 - config.dof_prob) / config.dof_prob;
    let rate = Gamma::new(config.dof_size, scale).unwrap().sample(rng);
    let k = if rate > 0.0 { Poisson::new(rate).unwrap().sample(rng) as u32 } else { 0 };
    lower + k
}

fn forward(shape: MatrixShape, config: &SwagConfig, rng: &mut RngStream) -> SwagState {
    let lower = shape.p() as u32 + 2;
    let fixed = FixedScalars {
        weight: Beta::new(config.alpha, config.beta).unwrap().sample(rng).clamp(1e-12, 1.0 - 1e-12),
        across_dof: draw_dof(config, lower, rng),
        within_dof: draw_dof(config, lower, rng),
        pooled_dof: draw_dof(config, lower, rng),
    };
    simulate_prior(shape, &SIZES, config, fixed, rng).unwrap()
}

fn compare(forward: &[Vec<f64>], chain: &[Vec<f64>], names: &[&str]) -> Vec<String> {
    let mut failures = Vec::new();
    for (k, name) in names.iter().enumerate() {
        let f: Vec<f64> = forward.iter().map(|v| v[k]).collect();
        let c: Vec<f64> = chain.iter().map(|v| v[k]).collect();
        let (mf, vf) = mean_var(&f);
        let (mc, vc) = mean_var(&c);
        let se = (vf / f.len() as f64 + vc / ess(&c)).sqrt();
        let z = (mf - mc) / se;
        eprintln!("{name:>18}: forward {mf:.4} chain {mc:.4} z {z:+.2}");
        if z.abs() > 3.0 {
            failures.push(format!("{name}: z = {z:.2}"));
        }
    }
    failures
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn full_sweep_matches_joint_distribution() {
    let shape = MatrixShape::new(2, 2).unwrap();
    let config = config(shape);
    let mut rng = RngStream::new(2024, 1);
    let fwd: Vec<Vec<f64>> = (0..100_000).map(|_| summaries(&forward(shape, &config, &mut rng))).collect();

    let mut state = forward(shape, &config, &mut rng);
    let mut sampler = Sampler::new(simulate_data(&state, &mut rng), shape, config.clone()).unwrap();
    let mut serial = RngStream::new(2024, u64::MAX);
    let mut chain = Vec::new();
    for t in 0..200_000u64 {
        sampler.update_weight_and_latent(&mut state, t, &mut serial).unwrap();
        sampler.update_across(&mut state, t, &mut serial).unwrap();
        sampler.update_within(&mut state, t, &mut serial).unwrap();
        sampler.update_kron_factors(&mut state, t).unwrap();
        sampler.update_pooled(&mut state, &mut serial).unwrap();
        let y: Vec<DMatrix<f64>> = simulate_data(&state, &mut serial);
        sampler.set_data(y);
        if t >= 1_000 {
            chain.push(summaries(&state));
        }
    }
    let failures = compare(&fwd, &chain, &NAMES);
    assert!(failures.is_empty(), "{failures:?}");
}
