/// Lag-`lag` sample autocorrelation (autocovariances use divisor `n`).
/// `None` for a constant series or when `lag + 2 > n`.
pub fn autocorr(series: &[f64], lag: usize) -> Option<f64> {
    let n = series.len();
    if n < lag + 2 {
        return None;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let c0: f64 = series.iter().map(|x| (x - mean).powi(2)).sum();
    if c0 <= 0.0 || !c0.is_finite() {
        return None;
    }
    let ck: f64 = (0..n - lag).map(|t| (series[t] - mean) * (series[t + lag] - mean)).sum();
    Some((ck / c0).clamp(-1.0, 1.0))
}

/// Effective sample size by Geyer's initial positive sequence, capped at the
/// series length. Constant series return the length.
pub fn ess(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 4 {
        return n as f64;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let c0: f64 = centered.iter().map(|x| x * x).sum();
    if c0 <= 0.0 || !c0.is_finite() {
        return n as f64;
    }
    let rho = |k: usize| -> f64 {
        (0..n - k).map(|t| centered[t] * centered[t + k]).sum::<f64>() / c0
    };
    let mut tau = -1.0;
    let mut k = 0;
    while k + 1 < n {
        let pair = rho(k) + rho(k + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        k += 2;
    }
    (n as f64 / tau.max(1e-12)).min(n as f64)
}

/// Max / mean / min over a set of per-element statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSummary {
    pub max: f64,
    pub mean: f64,
    pub min: f64,
}

impl SeriesSummary {
    /// Ignores NaN entries; `None` if nothing is left.
    pub fn of(values: &[f64]) -> Option<Self> {
        let finite: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
        if finite.is_empty() {
            return None;
        }
        Some(Self {
            max: finite.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: finite.iter().sum::<f64>() / finite.len() as f64,
            min: finite.iter().copied().fold(f64::INFINITY, f64::min),
        })
    }
}
