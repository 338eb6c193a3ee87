use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufReader;

use swag_core::eval::{autocorr, ess, SeriesSummary};
use swag_core::io::{fmt_f64, read_draws, DrawSet};
use swag_core::{Result, SwagError};

use crate::args::DiagnoseArgs;

/// ESS and lag-10 autocorrelation over every upper-triangle element of
/// every group's draws.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawDiagnostics {
    pub groups: usize,
    pub dim: usize,
    pub draws: usize,
    pub elements: usize,
    pub ess: SeriesSummary,
    /// `None` when every element is constant or the chain is too short.
    pub lag10: Option<SeriesSummary>,
}

impl DrawDiagnostics {
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "groups = {}", self.groups);
        let _ = writeln!(s, "dim = {}", self.dim);
        let _ = writeln!(s, "draws = {}", self.draws);
        let _ = writeln!(s, "elements = {}", self.elements);
        let _ = writeln!(s, "ess_max = {}", fmt_f64(self.ess.max));
        let _ = writeln!(s, "ess_mean = {}", fmt_f64(self.ess.mean));
        let _ = writeln!(s, "ess_min = {}", fmt_f64(self.ess.min));
        match &self.lag10 {
            Some(a) => {
                let _ = writeln!(s, "lag10_autocorr_max = {}", fmt_f64(a.max));
                let _ = writeln!(s, "lag10_autocorr_mean = {}", fmt_f64(a.mean));
                let _ = writeln!(s, "lag10_autocorr_min = {}", fmt_f64(a.min));
            }
            None => s.push_str("lag10_autocorr = undefined\n"),
        }
        s
    }
}

pub fn summarize_draws(set: &DrawSet) -> Result<DrawDiagnostics> {
    if set.num_draws() == 0 {
        return Err(SwagError::InvalidData("draw set is empty".into()));
    }
    let mut ess_values = Vec::new();
    let mut lag = Vec::new();
    for g in 0..set.num_groups() {
        for c in 0..set.dim {
            for r in 0..=c {
                let series = set.element_series(g, r, c);
                ess_values.push(ess(&series));
                lag.push(autocorr(&series, 10).unwrap_or(f64::NAN));
            }
        }
    }
    Ok(DrawDiagnostics {
        groups: set.num_groups(),
        dim: set.dim,
        draws: set.num_draws(),
        elements: ess_values.len(),
        ess: SeriesSummary::of(&ess_values).expect("at least one element"),
        lag10: SeriesSummary::of(&lag),
    })
}

fn parse_element(spec: &str, set: &DrawSet) -> Result<(usize, usize, usize)> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || SwagError::InvalidConfig(format!("element '{spec}' is not group:row:col (1-based)"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut idx = [0usize; 3];
    for (slot, p) in idx.iter_mut().zip(&parts) {
        *slot = p.trim().parse::<usize>().map_err(|_| bad())?;
        if *slot == 0 {
            return Err(bad());
        }
    }
    let (g, r, c) = (idx[0] - 1, idx[1] - 1, idx[2] - 1);
    if g >= set.num_groups() || r >= set.dim || c >= set.dim {
        return Err(SwagError::InvalidConfig(format!(
            "element '{spec}' outside {} groups of {}x{}",
            set.num_groups(),
            set.dim,
            set.dim
        )));
    }
    Ok((g, r, c))
}

/// Prints a summary; with `--out`, also writes `diagnostics.txt` and one
/// `trace_g{g}_r{r}_c{c}.csv` per requested element.
pub fn cmd_diagnose(args: &DiagnoseArgs) -> Result<DrawDiagnostics> {
    let set = read_draws(BufReader::new(File::open(&args.draws)?))?;
    let diag = summarize_draws(&set)?;
    let elements = args
        .elements
        .iter()
        .filter(|e| !e.trim().is_empty())
        .map(|e| parse_element(e, &set))
        .collect::<Result<Vec<_>>>()?;
    if let Some(out) = &args.common.out {
        fs::create_dir_all(out)?;
        fs::write(out.join("diagnostics.txt"), diag.report())?;
        for (g, r, c) in elements {
            let series = set.element_series(g, r, c);
            let mut text = String::from("draw,value\n");
            for (t, v) in series.iter().enumerate() {
                let _ = writeln!(text, "{},{}", t + 1, fmt_f64(*v));
            }
            fs::write(out.join(format!("trace_g{}_r{}_c{}.csv", g + 1, r + 1, c + 1)), text)?;
        }
    }
    Ok(diag)
}
