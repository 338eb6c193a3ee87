use std::fmt::Write as _;
use std::fs;

use swag_core::data::{save_dataset, write_matrix_csv};
use swag_core::estimators::{bayes_stein_estimate, kron_mle, pooled_kron, pooled_mle, sample_mle, EstimatorResult, Method};
use swag_core::eval::{avg_stein_loss, generate_regime, simulate_dataset, Regime};
use swag_core::io::fmt_f64;
use swag_core::{run_chain, MatrixShape, Result, SwagConfig, SwagError};

use crate::args::SimulateArgs;
use crate::fit::write_text;
use crate::load_config;
use crate::manifest::RunManifest;

pub const ESTIMATORS: [Method; 5] = [
    Method::Swag,
    Method::SampleMle,
    Method::PooledMle,
    Method::KronMle,
    Method::PooledKronMle,
];

/// Seed for the data and chain of replicate `rep` (0-based).
pub fn replicate_seed(seed: u64, rep: usize) -> u64 {
    swag_core::RngStream::derive(seed, &[rep as u64], 0).seed()
}

/// Average Stein loss per estimator over replicates. A loss is infinite
/// when an estimator is singular, e.g. `S` with `n_j < p`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTable {
    pub regime: String,
    pub groups: usize,
    pub shape: MatrixShape,
    pub n: usize,
    /// `losses[rep][k]` for estimator `ESTIMATORS[k]`.
    pub losses: Vec<[f64; 5]>,
}

impl SimulationTable {
    pub fn mean(&self, k: usize) -> f64 {
        self.losses.iter().map(|l| l[k]).sum::<f64>() / self.losses.len() as f64
    }

    pub fn sd(&self, k: usize) -> f64 {
        let m = self.mean(k);
        let r = self.losses.len() as f64;
        if r < 2.0 || !m.is_finite() {
            return f64::NAN;
        }
        (self.losses.iter().map(|l| (l[k] - m).powi(2)).sum::<f64>() / (r - 1.0)).sqrt()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# regime={} J={} p1={} p2={} n={} reps={}",
            self.regime,
            self.groups,
            self.shape.p1(),
            self.shape.p2(),
            self.n,
            self.losses.len()
        );
        s.push_str("estimator,mean_loss,sd_loss\n");
        for (k, m) in ESTIMATORS.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", m.label(), fmt_f64(self.mean(k)), fmt_f64(self.sd(k)));
        }
        s
    }

    pub fn per_rep_csv(&self) -> String {
        let mut s = String::from("rep");
        for m in ESTIMATORS {
            s.push(',');
            s.push_str(m.label());
        }
        s.push('\n');
        for (r, l) in self.losses.iter().enumerate() {
            let cells: Vec<String> = l.iter().map(|v| fmt_f64(*v)).collect();
            let _ = writeln!(s, "{},{}", r + 1, cells.join(","));
        }
        s
    }
}

fn loss_of(truths: &[swag_core::SpdMatrix], result: Result<EstimatorResult>) -> Result<f64> {
    match result {
        Ok(r) => avg_stein_loss(truths, &r.estimates),
        Err(SwagError::NotPositiveDefinite(msg)) => {
            log::warn!("estimator singular, loss set to inf: {msg}");
            Ok(f64::INFINITY)
        }
        Err(e) => Err(e),
    }
}

/// Losses of the five estimators on one dataset.
pub fn replicate_losses(
    truths: &[swag_core::SpdMatrix],
    data: &swag_core::GroupedDataset,
    config: &SwagConfig,
) -> Result<[f64; 5]> {
    let chain = run_chain(data, config)?;
    Ok([
        loss_of(truths, bayes_stein_estimate(&chain))?,
        loss_of(truths, sample_mle(data))?,
        loss_of(truths, pooled_mle(data))?,
        loss_of(truths, kron_mle(data))?,
        loss_of(truths, pooled_kron(data))?,
    ])
}

/// Writes `truths/`, `rho.txt`, `data/rep_<r>/`, `losses.csv`,
/// `results.csv` and `run_manifest.txt` under `--out`.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<SimulationTable> {
    let shape = MatrixShape::new(args.p1, args.p2)?;
    let n = args.n.unwrap_or(shape.p() + 1);
    if args.reps == 0 || n == 0 {
        return Err(SwagError::InvalidConfig("--reps and --n must be positive".into()));
    }
    let base = load_config(&args.common, &args.schedule, shape)?;
    let mut regime: Regime = args.regime.parse()?;
    regime.groups = args.groups;
    regime.shape = shape;
    regime.seed = base.seed;
    let (truths, rho) = generate_regime(&regime)?;

    let out = args.common.out_dir();
    let truth_dir = out.join("truths");
    fs::create_dir_all(&truth_dir)?;
    let mut written = Vec::new();
    for (j, t) in truths.iter().enumerate() {
        let path = truth_dir.join(format!("truth_{}.csv", j + 1));
        write_matrix_csv(&path, t.matrix(), Some(&format!("group={} rows={} cols={}", j + 1, t.dim(), t.dim())))?;
        written.push(path);
    }
    let fmt_list = |v: &[f64]| v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",");
    written.push(write_text(
        &out,
        "rho.txt",
        &format!("row = {}\ncol = {}\nfull = {}\n", fmt_list(&rho.row), fmt_list(&rho.col), fmt_list(&rho.full)),
    )?);

    let mut table = SimulationTable {
        regime: regime.name().into(),
        groups: args.groups,
        shape,
        n,
        losses: Vec::with_capacity(args.reps),
    };
    for rep in 0..args.reps {
        let seed = replicate_seed(base.seed, rep);
        let data = simulate_dataset(&truths, &vec![n; args.groups], shape, seed)?;
        let manifest = save_dataset(&out.join("data").join(format!("rep_{}", rep + 1)), &data)?;
        written.push(manifest);
        for j in 0..args.groups {
            written.push(out.join("data").join(format!("rep_{}", rep + 1)).join(format!("group_{}.csv", j + 1)));
        }
        let config = base.clone().with_seed(seed);
        let losses = replicate_losses(&truths, &data, &config)?;
        log::info!("rep {} losses {:?}", rep + 1, losses);
        table.losses.push(losses);
    }
    written.push(write_text(&out, "losses.csv", &table.per_rep_csv())?);
    written.push(write_text(&out, "results.csv", &table.to_csv())?);
    written.push(write_text(&out, "config.txt", &base.to_kv_text())?);

    let mut manifest = RunManifest::new("simulate", base.seed, base.to_kv_text());
    for p in &written {
        manifest.add_output(&out, p)?;
    }
    manifest.write(&out)?;
    Ok(table)
}
