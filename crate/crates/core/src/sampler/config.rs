use nalgebra::DMatrix;

use crate::error::{Result, SwagError};
use crate::io::{fmt_f64, parse_key_values};
use crate::linalg::{MatrixShape, SpdMatrix};

/// Hyperparameters, proposal half-widths and chain schedule.
///
/// Degrees-of-freedom priors share one shifted negative binomial
/// (`dof_size`, `dof_prob`) supported on `p + 2, p + 3, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwagConfig {
    /// Beta prior on the blend weight.
    pub alpha: f64,
    pub beta: f64,
    /// Negative-binomial size `r0`.
    pub dof_size: f64,
    /// Negative-binomial success probability `p0`.
    pub dof_prob: f64,
    /// Wishart dof of the row-covariance prior (`η1`).
    pub row_dof: f64,
    /// Wishart dof of the column-covariance prior (`η2`).
    pub col_dof: f64,
    /// Wishart dof of the pooled row precision prior (`η3`).
    pub pooled_row_dof: f64,
    /// Wishart dof of the pooled column precision prior (`η4`).
    pub pooled_col_dof: f64,
    /// Prior mean of each row covariance (`R0`).
    pub row_scale: SpdMatrix,
    /// Prior mean of each column covariance (`C0`).
    pub col_scale: SpdMatrix,
    /// Prior mean of the pooled row covariance (`P01`).
    pub pooled_row_mean: SpdMatrix,
    /// Prior mean of the pooled column covariance (`P02`).
    pub pooled_col_mean: SpdMatrix,
    pub weight_step: f64,
    pub across_dof_step: f64,
    pub within_dof_step: f64,
    pub pooled_dof_step: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Keep pooled and Kronecker factor draws in the chain output.
    pub record_components: bool,
}

impl SwagConfig {
    /// Weakly informative defaults for a given observation shape: a
    /// `Beta(1/2, 1/2)` weight prior, degrees-of-freedom priors with mean near
    /// the first quartile of `[p + 2, 2p]`, identity prior means with the
    /// smallest dofs that keep first moments finite, and a 28,000 / 3,000 / 10
    /// schedule.
    pub fn defaults(shape: MatrixShape) -> Self {
        let (p1, p2, p) = (shape.p1(), shape.p2(), shape.p());
        let dof_prob = if p <= 64 { 0.2 } else { 0.01 };
        let excess_mean = ((p as f64 - 2.0) / 4.0).max(1.0);
        let dof_size = excess_mean * dof_prob / (1.0 - dof_prob);
        let dof_step = ((p as f64 / 4.0).round()).max(2.0);
        Self {
            alpha: 0.5,
            beta: 0.5,
            dof_size,
            dof_prob,
            row_dof: p1 as f64 + 2.0,
            col_dof: p2 as f64 + 2.0,
            pooled_row_dof: p1 as f64 + 2.0,
            pooled_col_dof: p2 as f64 + 2.0,
            row_scale: SpdMatrix::identity(p1),
            col_scale: SpdMatrix::identity(p2),
            pooled_row_mean: SpdMatrix::identity(p1),
            pooled_col_mean: SpdMatrix::identity(p2),
            weight_step: 0.1,
            across_dof_step: dof_step,
            within_dof_step: dof_step,
            pooled_dof_step: dof_step,
            iterations: 28_000,
            burn_in: 3_000,
            thin: 10,
            seed: 0,
            record_components: false,
        }
    }

    pub fn with_schedule(mut self, iterations: usize, burn_in: usize, thin: usize) -> Self {
        self.iterations = iterations;
        self.burn_in = burn_in;
        self.thin = thin;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Mean of the negative-binomial excess over the lower bound.
    pub fn dof_prior_excess_mean(&self) -> f64 {
        self.dof_size * (1.0 - self.dof_prob) / self.dof_prob
    }

    /// Number of draws the schedule retains.
    pub fn retained_draws(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }

    pub fn validate(&self, shape: MatrixShape) -> Result<()> {
        let (p1, p2) = (shape.p1() as f64, shape.p2() as f64);
        let bad = |msg: String| Err(SwagError::InvalidConfig(msg));
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return bad(format!("alpha and beta must be positive (alpha = {}, beta = {})", self.alpha, self.beta));
        }
        if !(self.dof_size > 0.0) || !(self.dof_prob > 0.0 && self.dof_prob < 1.0) {
            return bad(format!(
                "negative binomial needs r0 > 0 and p0 in (0,1), got ({}, {})",
                self.dof_size, self.dof_prob
            ));
        }
        for (name, v, min) in [
            ("eta1", self.row_dof, p1 + 2.0),
            ("eta2", self.col_dof, p2 + 2.0),
            ("eta3", self.pooled_row_dof, p1 + 2.0),
            ("eta4", self.pooled_col_dof, p2 + 2.0),
        ] {
            if !(v >= min) {
                return bad(format!("{name} = {v} must be at least {min}"));
            }
        }
        for (name, m, d) in [
            ("row_scale", &self.row_scale, shape.p1()),
            ("col_scale", &self.col_scale, shape.p2()),
            ("pooled_row_mean", &self.pooled_row_mean, shape.p1()),
            ("pooled_col_mean", &self.pooled_col_mean, shape.p2()),
        ] {
            if m.dim() != d {
                return bad(format!("{name} has dimension {} but {d} is required", m.dim()));
            }
        }
        for (name, v) in [
            ("delta_lambda", self.weight_step),
            ("delta_nu", self.across_dof_step),
            ("delta_gamma", self.within_dof_step),
            ("delta_xi", self.pooled_dof_step),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.thin == 0 {
            return bad("thin must be at least 1".into());
        }
        if self.burn_in >= self.iterations {
            return bad(format!(
                "burn_in ({}) must be less than iterations ({})",
                self.burn_in, self.iterations
            ));
        }
        Ok(())
    }

    /// Applies `key = value` overrides on top of `self`.
    ///
    /// Matrix-valued keys (`row_scale`, `col_scale`, `pooled_row_mean`,
    /// `pooled_col_mean`) accept `identity`, a positive scalar multiple of the
    /// identity, or `d*d` comma-separated entries in row-major order.
    pub fn apply_overrides(mut self, text: &str, shape: MatrixShape) -> Result<Self> {
        for (key, value, line) in parse_key_values(text)? {
            let num = || {
                value.parse::<f64>().map_err(|_| {
                    SwagError::InvalidConfig(format!("line {line}: '{key}' expects a number, got '{value}'"))
                })
            };
            let int = || {
                value.parse::<u64>().map_err(|_| {
                    SwagError::InvalidConfig(format!("line {line}: '{key}' expects an integer, got '{value}'"))
                })
            };
            match key.as_str() {
                "alpha" => self.alpha = num()?,
                "beta" => self.beta = num()?,
                "r0" => self.dof_size = num()?,
                "p0" => self.dof_prob = num()?,
                "eta1" => self.row_dof = num()?,
                "eta2" => self.col_dof = num()?,
                "eta3" => self.pooled_row_dof = num()?,
                "eta4" => self.pooled_col_dof = num()?,
                "delta_lambda" => self.weight_step = num()?,
                "delta_nu" => self.across_dof_step = num()?,
                "delta_gamma" => self.within_dof_step = num()?,
                "delta_xi" => self.pooled_dof_step = num()?,
                "iterations" => self.iterations = int()? as usize,
                "burn_in" => self.burn_in = int()? as usize,
                "thin" => self.thin = int()? as usize,
                "seed" => self.seed = int()?,
                "record_components" => {
                    self.record_components = match value.as_str() {
                        "true" | "1" => true,
                        "false" | "0" => false,
                        _ => {
                            return Err(SwagError::InvalidConfig(format!(
                                "line {line}: record_components expects true/false"
                            )))
                        }
                    }
                }
                "row_scale" => self.row_scale = parse_matrix(&value, shape.p1(), line)?,
                "col_scale" => self.col_scale = parse_matrix(&value, shape.p2(), line)?,
                "pooled_row_mean" => self.pooled_row_mean = parse_matrix(&value, shape.p1(), line)?,
                "pooled_col_mean" => self.pooled_col_mean = parse_matrix(&value, shape.p2(), line)?,
                other => {
                    return Err(SwagError::InvalidConfig(format!("line {line}: unknown key '{other}'")))
                }
            }
        }
        Ok(self)
    }

    /// Full key-value echo, readable by [`SwagConfig::apply_overrides`].
    pub fn to_kv_text(&self) -> String {
        let mat = |m: &SpdMatrix| {
            let m = m.matrix();
            let mut cells = Vec::new();
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    cells.push(fmt_f64(m[(i, j)]));
                }
            }
            cells.join(",")
        };
        let mut out = String::new();
        for (k, v) in [
            ("alpha", fmt_f64(self.alpha)),
            ("beta", fmt_f64(self.beta)),
            ("r0", fmt_f64(self.dof_size)),
            ("p0", fmt_f64(self.dof_prob)),
            ("eta1", fmt_f64(self.row_dof)),
            ("eta2", fmt_f64(self.col_dof)),
            ("eta3", fmt_f64(self.pooled_row_dof)),
            ("eta4", fmt_f64(self.pooled_col_dof)),
            ("row_scale", mat(&self.row_scale)),
            ("col_scale", mat(&self.col_scale)),
            ("pooled_row_mean", mat(&self.pooled_row_mean)),
            ("pooled_col_mean", mat(&self.pooled_col_mean)),
            ("delta_lambda", fmt_f64(self.weight_step)),
            ("delta_nu", fmt_f64(self.across_dof_step)),
            ("delta_gamma", fmt_f64(self.within_dof_step)),
            ("delta_xi", fmt_f64(self.pooled_dof_step)),
            ("iterations", self.iterations.to_string()),
            ("burn_in", self.burn_in.to_string()),
            ("thin", self.thin.to_string()),
            ("seed", self.seed.to_string()),
            ("record_components", self.record_components.to_string()),
        ] {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

fn parse_matrix(value: &str, d: usize, line: usize) -> Result<SpdMatrix> {
    let err = |msg: String| SwagError::InvalidConfig(format!("line {line}: {msg}"));
    if value == "identity" {
        return Ok(SpdMatrix::identity(d));
    }
    let cells = value
        .split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|_| err(format!("bad matrix entry '{c}'"))))
        .collect::<Result<Vec<_>>>()?;
    let m = match cells.len() {
        1 => DMatrix::identity(d, d) * cells[0],
        n if n == d * d => DMatrix::from_row_slice(d, d, &cells),
        n => return Err(err(format!("expected 1 or {} matrix entries, found {n}", d * d))),
    };
    SpdMatrix::new(m).map_err(|e| err(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_hit_first_quartile() {
        for (p1, p2) in [(2, 3), (4, 3), (13, 9), (1, 1)] {
            let shape = MatrixShape::new(p1, p2).unwrap();
            let c = SwagConfig::defaults(shape);
            c.validate(shape).unwrap();
            let p = shape.p() as f64;
            if p >= 6.0 {
                assert!((c.dof_prior_excess_mean() - (p - 2.0) / 4.0).abs() < 1e-9);
            }
        }
        let big = SwagConfig::defaults(MatrixShape::new(13, 9).unwrap());
        assert_eq!(big.dof_prob, 0.01);
        assert_eq!(big.across_dof_step, 29.0);
        let small = SwagConfig::defaults(MatrixShape::new(2, 3).unwrap());
        assert_eq!(small.across_dof_step, 2.0);
        assert_eq!(small.alpha, 0.5);
        assert_eq!(small.row_dof, 4.0);
        assert_eq!(small.col_dof, 5.0);
    }

    #[test]
    fn schedule_counts() {
        let shape = MatrixShape::new(2, 3).unwrap();
        let c = SwagConfig::defaults(shape);
        assert_eq!(c.retained_draws(), 2_500);
        assert_eq!(c.clone().with_schedule(33_000, 3_000, 30).retained_draws(), 1_000);
    }

    #[test]
    fn validation_failures() {
        let shape = MatrixShape::new(2, 3).unwrap();
        let base = SwagConfig::defaults(shape);
        let mut c = base.clone();
        c.row_dof = 3.0;
        assert!(c.validate(shape).is_err());
        let c = base.clone().with_schedule(100, 100, 1);
        assert!(c.validate(shape).is_err());
        let c = base.clone().with_schedule(100, 10, 0);
        assert!(c.validate(shape).is_err());
        let mut c = base.clone();
        c.weight_step = 0.0;
        assert!(c.validate(shape).is_err());
        let mut c = base;
        c.dof_prob = 1.0;
        assert!(c.validate(shape).is_err());
    }

    #[test]
    fn overrides_and_echo_round_trip() {
        let shape = MatrixShape::new(2, 2).unwrap();
        let c = SwagConfig::defaults(shape)
            .apply_overrides(
                "alpha = 2\nthin = 5\nrow_scale = 2,0.5,0.5,1\ncol_scale = 3\nseed = 99\n",
                shape,
            )
            .unwrap();
        assert_eq!(c.alpha, 2.0);
        assert_eq!(c.thin, 5);
        assert_eq!(c.row_scale.matrix()[(0, 1)], 0.5);
        assert_eq!(c.col_scale.matrix()[(1, 1)], 3.0);
        let back = SwagConfig::defaults(shape).apply_overrides(&c.to_kv_text(), shape).unwrap();
        assert_eq!(back, c);
        assert!(SwagConfig::defaults(shape).apply_overrides("bogus = 1", shape).is_err());
        assert!(SwagConfig::defaults(shape).apply_overrides("thin = x", shape).is_err());
        assert!(SwagConfig::defaults(shape).apply_overrides("row_scale = 1,2,3", shape).is_err());
    }
}
