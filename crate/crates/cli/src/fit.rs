use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use swag_core::data::{load_dataset, write_matrix_csv};
use swag_core::estimators::bayes_stein_estimate;
use swag_core::io::{fmt_f64, write_draws, DrawSet};
use swag_core::{run_chain, ChainOutput, PreprocessRecord, Result};

use crate::args::FitArgs;
use crate::diagnose::summarize_draws;
use crate::load_config;
use crate::manifest::RunManifest;

/// Output files of `swag fit`, relative to `--out`:
///
/// ```text
/// sigma_hat_<j>.csv   posterior estimate per group, original data scale
/// draws.swag          retained covariance draws, original data scale
/// acceptance.txt      Metropolis acceptance rates
/// diagnostics.txt     ESS and lag-10 autocorrelation of the draws
/// chain_scalars.csv   weight and dof draws
/// config.txt          full configuration used
/// run_manifest.txt    seed, config, input and output digests
/// ```
pub fn cmd_fit(args: &FitArgs) -> Result<PathBuf> {
    let start = Instant::now();
    let raw = load_dataset(&args.data)?;
    let shape = raw.shape();
    let config = load_config(&args.common, &args.schedule, shape)?;
    let standardize = !args.no_standardize;
    let (data, record) = raw.preprocess(standardize)?;
    let out = args.common.out_dir();
    fs::create_dir_all(&out)?;

    let chain = run_chain(&data, &config)?;
    let estimate = bayes_stein_estimate(&chain)?;

    let mut manifest = RunManifest::new("fit", config.seed, config.to_kv_text());
    manifest.add_input(&args.data)?;
    let mut written = Vec::new();

    for (j, sigma) in estimate.estimates.iter().enumerate() {
        let sigma = record.rescale(j, sigma)?;
        let path = out.join(format!("sigma_hat_{}.csv", j + 1));
        let header = format!(
            "group={} rows={} cols={} standardized={standardize}",
            data.groups()[j].label,
            sigma.dim(),
            sigma.dim()
        );
        write_matrix_csv(&path, sigma.matrix(), Some(&header))?;
        written.push(path);
    }

    let draws = rescale_draws(&chain, &record)?;
    let draws_path = out.join("draws.swag");
    write_draws(BufWriter::new(File::create(&draws_path)?), &draws)?;
    written.push(draws_path);

    let set = DrawSet {
        dim: shape.p(),
        draws,
    };
    let diag = summarize_draws(&set)?;
    written.push(write_text(&out, "diagnostics.txt", &diag.report())?);
    written.push(write_text(&out, "acceptance.txt", &acceptance_text(&chain))?);
    written.push(write_text(&out, "chain_scalars.csv", &scalars_csv(&chain))?);
    written.push(write_text(&out, "config.txt", &config.to_kv_text())?);

    for p in &written {
        manifest.add_output(&out, p)?;
    }
    let elapsed = start.elapsed().as_secs_f64();
    if args.record_timing {
        manifest.timing_seconds = Some(elapsed);
    }
    log::info!("fit finished in {elapsed:.2} s");
    manifest.write(&out)?;
    Ok(out)
}

pub(crate) fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, text)?;
    Ok(path)
}

fn rescale_draws(chain: &ChainOutput, record: &PreprocessRecord) -> Result<Vec<Vec<nalgebra::DMatrix<f64>>>> {
    chain
        .sigma_draws
        .iter()
        .enumerate()
        .map(|(j, group)| {
            let s = &record.scales[j];
            Ok(group
                .iter()
                .map(|m| nalgebra::DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| s[r] * m[(r, c)] * s[c]))
                .collect())
        })
        .collect()
}

fn acceptance_text(chain: &ChainOutput) -> String {
    let a = &chain.acceptance;
    let mut s = String::new();
    let _ = writeln!(s, "weight = {}", fmt_f64(a.weight));
    let _ = writeln!(s, "across_dof = {}", fmt_f64(a.across_dof));
    let _ = writeln!(s, "within_dof = {}", fmt_f64(a.within_dof));
    let _ = writeln!(s, "pooled_dof = {}", fmt_f64(a.pooled_dof));
    let _ = writeln!(s, "retained_draws = {}", chain.num_draws());
    let _ = writeln!(s, "weight_posterior_mean = {}", fmt_f64(chain.posterior_mean_weight()));
    s
}

fn scalars_csv(chain: &ChainOutput) -> String {
    let mut s = String::from("draw,weight,across_dof,within_dof,pooled_dof\n");
    for t in 0..chain.num_draws() {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            t + 1,
            fmt_f64(chain.weight[t]),
            chain.across_dof[t],
            chain.within_dof[t],
            chain.pooled_dof[t]
        );
    }
    s
}
