//! Random matrix samplers and the log-densities used in Metropolis ratios.
//!
//! Wishart variates use the mean parameterization `E[W] = dof * scale`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Result, SwagError};
use crate::linalg::SpdMatrix;

/// A reproducible random stream identified by `(seed, stream id)`.
///
/// Streams with the same seed and different ids are independent ChaCha
/// streams.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    /// A stream keyed by a base seed and a path of integers (for instance
    /// `[sweep, step]`), with `stream` selecting e.g. the group.
    pub fn derive(seed: u64, path: &[u64], stream: u64) -> Self {
        let mut s = splitmix64(seed);
        for &p in path {
            s = splitmix64(s ^ splitmix64(p.wrapping_add(0x632b_e59b_d9b4_e019)));
        }
        Self::new(s, stream)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(self)
    }

    /// Uniform draw on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        lo + (hi - lo) * u
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Lower-triangular Bartlett factor `B` with `B Bᵀ ~ Wishart(I, dof)`.
fn bartlett_factor(d: usize, dof: f64, rng: &mut RngStream) -> Result<DMatrix<f64>> {
    if !(dof > d as f64 - 1.0) {
        return Err(SwagError::InvalidConfig(format!(
            "Wishart dof {dof} must exceed dimension - 1 = {}",
            d as f64 - 1.0
        )));
    }
    let mut b = DMatrix::zeros(d, d);
    for i in 0..d {
        let chi = ChiSquared::new(dof - i as f64)
            .map_err(|e| SwagError::InvalidConfig(e.to_string()))?;
        b[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            b[(i, j)] = rng.standard_normal();
        }
    }
    Ok(b)
}

/// Draw from `Wishart(scale, dof)` by Bartlett decomposition.
pub fn sample_wishart(scale: &SpdMatrix, dof: f64, rng: &mut RngStream) -> Result<SpdMatrix> {
    let b = bartlett_factor(scale.dim(), dof, rng)?;
    SpdMatrix::from_lower_factor(scale.factor() * b)
}

/// Draw from `Wishart(inv_scale⁻¹, dof)` without forming the inverse.
///
/// With `inv_scale = L Lᵀ`, the matrix `L⁻ᵀ` is a square root of the scale,
/// so `L⁻ᵀ B Bᵀ L⁻¹` has the requested law.
pub fn sample_wishart_inv_scale(
    inv_scale: &SpdMatrix,
    dof: f64,
    rng: &mut RngStream,
) -> Result<SpdMatrix> {
    let b = bartlett_factor(inv_scale.dim(), dof, rng)?;
    let mut f = b;
    if !inv_scale.factor().tr_solve_lower_triangular_mut(&mut f) {
        return Err(SwagError::NotPositiveDefinite("Wishart inverse scale".into()));
    }
    SpdMatrix::new(&f * f.transpose())
}

/// Draw `W⁻¹` where `W ~ Wishart(inv_scale⁻¹, dof)`, i.e. an inverse-Wishart
/// variate with scale matrix `inv_scale` (mean `inv_scale / (dof - d - 1)`).
///
/// `W⁻¹ = (L B⁻ᵀ)(L B⁻ᵀ)ᵀ`, computed with one triangular solve.
pub fn sample_inverse_wishart_scale(
    inv_scale: &SpdMatrix,
    dof: f64,
    rng: &mut RngStream,
) -> Result<SpdMatrix> {
    let d = inv_scale.dim();
    let b = bartlett_factor(d, dof, rng)?;
    // T = L B⁻ᵀ  <=>  B Tᵀ = Lᵀ.
    let mut tt = inv_scale.factor().transpose();
    if !b.solve_lower_triangular_mut(&mut tt) {
        return Err(SwagError::NotPositiveDefinite("Bartlett factor".into()));
    }
    let t = tt.transpose();
    SpdMatrix::new(&t * t.transpose())
}

/// Inverse-Wishart draw parameterized by its mean:
/// `Σ⁻¹ ~ Wishart(meanlike⁻¹ / (dof - d - 1), dof)`.
pub fn sample_inv_wishart(
    meanlike: &SpdMatrix,
    dof: f64,
    rng: &mut RngStream,
) -> Result<SpdMatrix> {
    let d = meanlike.dim() as f64;
    if !(dof > d + 1.0) {
        return Err(SwagError::InvalidConfig(format!(
            "inverse-Wishart dof {dof} must exceed dimension + 1 = {}",
            d + 1.0
        )));
    }
    sample_inverse_wishart_scale(&meanlike.scaled(dof - d - 1.0)?, dof, rng)
}

/// `mean + A Z Bᵀ` with `A`, `B` the factors of `rowcov`, `colcov`, so that
/// `vec(draw)` has covariance `colcov ⊗ rowcov`.
pub fn sample_matrix_normal(
    mean: &DMatrix<f64>,
    rowcov: &SpdMatrix,
    colcov: &SpdMatrix,
    rng: &mut RngStream,
) -> Result<DMatrix<f64>> {
    let (n, d) = mean.shape();
    if rowcov.dim() != n || colcov.dim() != d {
        return Err(SwagError::DimensionMismatch(format!(
            "matrix normal mean {n}x{d} with covariances {}x{} and {}x{}",
            rowcov.dim(),
            rowcov.dim(),
            colcov.dim(),
            colcov.dim()
        )));
    }
    let z = standard_normal_matrix(n, d, rng);
    Ok(mean + rowcov.factor() * z * colcov.factor().transpose())
}

/// Rows i.i.d. `N(mean_row, colcov)`: the identity-row-covariance case.
pub(crate) fn sample_matrix_normal_rows(
    mean: &DMatrix<f64>,
    colcov: &SpdMatrix,
    rng: &mut RngStream,
) -> DMatrix<f64> {
    let (n, d) = mean.shape();
    let z = standard_normal_matrix(n, d, rng);
    mean + z * colcov.factor().transpose()
}

pub(crate) fn standard_normal_matrix(n: usize, d: usize, rng: &mut RngStream) -> DMatrix<f64> {
    let mut z = DMatrix::zeros(n, d);
    for v in z.iter_mut() {
        *v = rng.standard_normal();
    }
    z
}

/// Log of the multivariate gamma function `Γ_d(a)`.
pub fn ln_multigamma(d: usize, a: f64) -> f64 {
    let df = d as f64;
    df * (df - 1.0) / 4.0 * PI.ln()
        + (0..d).map(|i| ln_gamma(a - i as f64 / 2.0)).sum::<f64>()
}

/// Log-density of the `n x d` matrix-t distribution with degrees of freedom
/// `dof`, location `mean` and vec-scale `colscale ⊗ rowscale`:
///
/// ```text
/// Γ_n((δ+n+d-1)/2) / (π^{nd/2} Γ_n((δ+n-1)/2)) |rowscale|^{-d/2} |colscale|^{-n/2}
///   |I_n + rowscale⁻¹ E colscale⁻¹ Eᵀ|^{-(δ+n+d-1)/2},   E = X - mean.
/// ```
///
/// This is the marginal of a matrix-normal `N(mean, Σ ⊗ rowscale)` with
/// `Σ` inverse-Wishart of scale `colscale` and `δ + d - 1` degrees of freedom.
/// The determinant and the gamma ratio are evaluated in whichever of the two
/// dimensions is smaller.
pub fn logpdf_matrix_t(
    x: &DMatrix<f64>,
    dof: f64,
    mean: &DMatrix<f64>,
    colscale: &SpdMatrix,
    rowscale: &SpdMatrix,
) -> Result<f64> {
    matrix_t(x, dof, mean, colscale, Some(rowscale))
}

/// [`logpdf_matrix_t`] with `rowscale = I_n`, without forming it.
pub fn logpdf_matrix_t_unit_rows(
    x: &DMatrix<f64>,
    dof: f64,
    mean: &DMatrix<f64>,
    colscale: &SpdMatrix,
) -> Result<f64> {
    matrix_t(x, dof, mean, colscale, None)
}

fn matrix_t(
    x: &DMatrix<f64>,
    dof: f64,
    mean: &DMatrix<f64>,
    colscale: &SpdMatrix,
    rowscale: Option<&SpdMatrix>,
) -> Result<f64> {
    let (n, d) = x.shape();
    if mean.shape() != (n, d) || colscale.dim() != d || rowscale.is_some_and(|r| r.dim() != n) {
        return Err(SwagError::DimensionMismatch(
            "matrix-t argument shapes do not conform".into(),
        ));
    }
    if !(dof > 0.0) {
        return Err(SwagError::InvalidConfig(format!("matrix-t dof {dof} must be positive")));
    }
    // W = Lr⁻¹ E Lc⁻ᵀ so that |I_n + W Wᵀ| is the required determinant.
    let mut w = x - mean;
    if let Some(r) = rowscale {
        r.factor().solve_lower_triangular_mut(&mut w);
    }
    let mut wt = w.transpose();
    colscale.factor().solve_lower_triangular_mut(&mut wt);
    let gram = if n <= d {
        DMatrix::identity(n, n) + wt.transpose() * &wt
    } else {
        DMatrix::identity(d, d) + &wt * wt.transpose()
    };
    let logdet_gram = SpdMatrix::new(gram)?.logdet();
    let (nf, df) = (n as f64, d as f64);
    let a = (dof + nf + df - 1.0) / 2.0;
    let gamma_ratio = if n <= d {
        ln_multigamma(n, a) - ln_multigamma(n, (dof + nf - 1.0) / 2.0)
    } else {
        ln_multigamma(d, a) - ln_multigamma(d, (dof + df - 1.0) / 2.0)
    };
    let row_logdet = rowscale.map_or(0.0, |r| r.logdet());
    Ok(gamma_ratio - nf * df / 2.0 * PI.ln() - df / 2.0 * row_logdet - nf / 2.0 * colscale.logdet()
        - a * logdet_gram)
}

/// Log-density of `Wishart(scale, dof)` at `x`.
pub fn logpdf_wishart(x: &SpdMatrix, scale: &SpdMatrix, dof: f64) -> Result<f64> {
    let d = x.dim();
    if scale.dim() != d {
        return Err(SwagError::DimensionMismatch("Wishart argument dims differ".into()));
    }
    let df = d as f64;
    let tr = scale.solve(x.matrix())?.trace();
    Ok((dof - df - 1.0) / 2.0 * x.logdet()
        - tr / 2.0
        - dof * df / 2.0 * 2f64.ln()
        - dof / 2.0 * scale.logdet()
        - ln_multigamma(d, dof / 2.0))
}

/// Negative binomial on `{lower, lower + 1, ...}`: `k = lower + K` where `K`
/// counts failures before the `size`-th success, `E[K] = size (1 - prob) / prob`.
pub fn logpmf_negbin_trunc(k: i64, size: f64, prob: f64, lower: i64) -> f64 {
    if k < lower {
        return f64::NEG_INFINITY;
    }
    let kf = (k - lower) as f64;
    ln_gamma(kf + size) - ln_gamma(size) - ln_gamma(kf + 1.0)
        + size * prob.ln()
        + kf * (1.0 - prob).ln()
}

pub fn logpdf_beta(x: f64, alpha: f64, beta: f64) -> f64 {
    if !(x > 0.0 && x < 1.0) {
        return f64::NEG_INFINITY;
    }
    ln_gamma(alpha + beta) - ln_gamma(alpha) - ln_gamma(beta)
        + (alpha - 1.0) * x.ln()
        + (beta - 1.0) * (1.0 - x).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{Continuous, StudentsT};

    fn mean_of(draws: &[DMatrix<f64>]) -> DMatrix<f64> {
        let mut acc = DMatrix::zeros(draws[0].nrows(), draws[0].ncols());
        for d in draws {
            acc += d;
        }
        acc / draws.len() as f64
    }

    #[test]
    fn wishart_mean_matches_dof_times_scale() {
        let scale = SpdMatrix::identity(3).scaled(0.2).unwrap();
        let mut rng = RngStream::new(42, 0);
        let draws: Vec<_> = (0..20_000)
            .map(|_| sample_wishart(&scale, 5.0, &mut rng).unwrap().into_matrix())
            .collect();
        let m = mean_of(&draws);
        assert!((m - DMatrix::<f64>::identity(3, 3)).abs().max() < 0.05);
    }

    #[test]
    fn wishart_scalar_case_is_gamma() {
        // W ~ Gamma(dof/2, scale 2s): mean dof * s.
        let s = SpdMatrix::from_diagonal(&[1.7]).unwrap();
        let mut rng = RngStream::new(9, 0);
        let mean: f64 = (0..100_000)
            .map(|_| sample_wishart(&s, 3.5, &mut rng).unwrap().matrix()[(0, 0)])
            .sum::<f64>()
            / 1e5;
        assert!((mean / (3.5 * 1.7) - 1.0).abs() < 0.02);
    }

    #[test]
    fn wishart_inv_scale_agrees_with_explicit_scale_in_mean() {
        let a = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap();
        let mut rng = RngStream::new(4, 0);
        let draws: Vec<_> = (0..20_000)
            .map(|_| sample_wishart_inv_scale(&a, 6.0, &mut rng).unwrap().into_matrix())
            .collect();
        let expected = a.inverse().matrix() * 6.0;
        assert!((mean_of(&draws) - expected).abs().max() < 0.06);
    }

    #[test]
    fn inverse_wishart_mean() {
        let mut rng = RngStream::new(17, 0);
        let draws: Vec<_> = (0..20_000)
            .map(|_| sample_inv_wishart(&SpdMatrix::identity(2), 10.0, &mut rng).unwrap().into_matrix())
            .collect();
        assert!((mean_of(&draws) - DMatrix::<f64>::identity(2, 2)).abs().max() < 0.05);
    }

    #[test]
    fn inverse_wishart_scalar_case() {
        // d = 1: inverse-gamma with mean equal to the meanlike value.
        let m = SpdMatrix::from_diagonal(&[2.5]).unwrap();
        let mut rng = RngStream::new(23, 0);
        let mean: f64 = (0..100_000)
            .map(|_| sample_inv_wishart(&m, 12.0, &mut rng).unwrap().matrix()[(0, 0)])
            .sum::<f64>()
            / 1e5;
        assert!((mean / 2.5 - 1.0).abs() < 0.02);
        assert!(sample_inv_wishart(&m, 2.0, &mut rng).is_err());
    }

    #[test]
    fn samplers_are_deterministic() {
        let s = SpdMatrix::identity(3);
        let a = sample_wishart(&s, 4.0, &mut RngStream::new(1, 2)).unwrap();
        let b = sample_wishart(&s, 4.0, &mut RngStream::new(1, 2)).unwrap();
        assert_eq!(a, b);
        let c = sample_wishart(&s, 4.0, &mut RngStream::new(1, 3)).unwrap();
        assert_ne!(a, c);
        let a = sample_inv_wishart(&s, 6.0, &mut RngStream::new(5, 0)).unwrap();
        let b = sample_inv_wishart(&s, 6.0, &mut RngStream::new(5, 0)).unwrap();
        assert_eq!(a, b);
        let m = DMatrix::zeros(2, 3);
        let x = sample_matrix_normal(&m, &SpdMatrix::identity(2), &s, &mut RngStream::new(8, 0)).unwrap();
        let y = sample_matrix_normal(&m, &SpdMatrix::identity(2), &s, &mut RngStream::new(8, 0)).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn matrix_normal_moments() {
        let mut rng = RngStream::new(31, 0);
        let zero = DMatrix::zeros(10, 10);
        let id = SpdMatrix::identity(10);
        let mut sq = 0.0;
        for _ in 0..1000 {
            let z = sample_matrix_normal(&zero, &id, &id, &mut rng).unwrap();
            sq += z.norm_squared();
        }
        assert!((sq / 1e5 - 1.0).abs() < 0.03);

        let mean = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 3.0]);
        let row = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0])).unwrap();
        let col = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 1.0])).unwrap();
        let draws: Vec<_> = (0..20_000)
            .map(|_| sample_matrix_normal(&mean, &row, &col, &mut rng).unwrap())
            .collect();
        assert!((mean_of(&draws) - &mean).abs().max() < 0.05);
    }

    #[test]
    fn matrix_t_scalar_case_is_student_t() {
        // n = d = 1: Student-t with dof δ and scale sqrt(r c / δ).
        let (r, c, dof) = (1.3, 0.7, 4.5);
        let rs = SpdMatrix::from_diagonal(&[r]).unwrap();
        let cs = SpdMatrix::from_diagonal(&[c]).unwrap();
        let t = StudentsT::new(0.25, (r * c / dof).sqrt(), dof).unwrap();
        for x in [-3.0, -0.4, 0.25, 1.0, 6.0] {
            let lp = logpdf_matrix_t(
                &DMatrix::from_element(1, 1, x),
                dof,
                &DMatrix::from_element(1, 1, 0.25),
                &cs,
                &rs,
            )
            .unwrap();
            assert!((lp - t.ln_pdf(x)).abs() < 1e-10, "x = {x}");
        }
    }

    #[test]
    fn matrix_t_peaks_at_location_and_ratio_is_finite() {
        let mean = DMatrix::from_row_slice(2, 3, &[0.1, 0.2, -0.3, 1.0, 0.0, 0.5]);
        let col = SpdMatrix::new(DMatrix::from_row_slice(
            3,
            3,
            &[2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 1.5],
        ))
        .unwrap();
        let row = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.0])).unwrap();
        let at_mean = logpdf_matrix_t(&mean, 5.0, &mean, &col, &row).unwrap();
        for i in 0..6 {
            for step in [-0.5, -0.05, 0.05, 0.5] {
                let mut x = mean.clone();
                x[i] += step;
                assert!(logpdf_matrix_t(&x, 5.0, &mean, &col, &row).unwrap() < at_mean);
            }
        }
        let x = DMatrix::from_row_slice(2, 3, &[1.0, -1.0, 0.3, 0.2, 0.9, -2.0]);
        let r = (logpdf_matrix_t(&x, 3.0, &mean, &col, &row).unwrap()
            - logpdf_matrix_t(&x, 9.0, &mean, &col, &row).unwrap())
        .exp();
        assert!(r.is_finite() && r > 0.0);
    }

    #[test]
    fn matrix_t_is_symmetric_in_orientation() {
        // The transposed variate is matrix-t with the scales swapped.
        let x = DMatrix::from_row_slice(2, 3, &[1.0, -1.0, 0.3, 0.2, 0.9, -2.0]);
        let zero = DMatrix::zeros(2, 3);
        let col = SpdMatrix::new(DMatrix::from_row_slice(
            3,
            3,
            &[2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 1.5],
        ))
        .unwrap();
        let row = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.0])).unwrap();
        let a = logpdf_matrix_t(&x, 4.0, &zero, &col, &row).unwrap();
        let b = logpdf_matrix_t(&x.transpose(), 4.0, &zero.transpose(), &row, &col).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn unit_row_matrix_t_matches_general_form() {
        let col = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.5, 0.3, 0.3, 0.8])).unwrap();
        for n in [1, 2, 5] {
            let x = DMatrix::from_fn(n, 2, |i, j| ((i * 3 + j) as f64 * 0.7).sin());
            let mean = DMatrix::from_element(n, 2, 0.1);
            let a = logpdf_matrix_t(&x, 3.5, &mean, &col, &SpdMatrix::identity(n)).unwrap();
            let b = logpdf_matrix_t_unit_rows(&x, 3.5, &mean, &col).unwrap();
            assert!((a - b).abs() < 1e-12, "n = {n}: {a} vs {b}");
        }
    }

    #[test]
    fn negbin_normalizes_and_has_shifted_mean() {
        let (size, prob, lower) = (2.5, 0.2, 8);
        let mean_nb = size * (1.0 - prob) / prob;
        let upper = lower + (10.0 * mean_nb) as i64;
        let mut total = 0.0;
        let mut first = 0.0;
        for k in lower..=upper {
            let w = logpmf_negbin_trunc(k, size, prob, lower).exp();
            total += w;
            first += k as f64 * w;
        }
        assert!((total - 1.0).abs() < 1e-6);
        assert!((first - (lower as f64 + mean_nb)).abs() < 1e-3);
        assert_eq!(logpmf_negbin_trunc(7, size, prob, lower), f64::NEG_INFINITY);
    }

    #[test]
    fn beta_cases() {
        for x in [0.1, 0.5, 0.93] {
            assert!(logpdf_beta(x, 1.0, 1.0).abs() < 1e-14);
            assert!((logpdf_beta(x, 2.5, 0.7) - logpdf_beta(1.0 - x, 0.7, 2.5)).abs() < 1e-12);
        }
        assert!((logpdf_beta(0.5, 0.5, 0.5) - (2.0 / PI).ln()).abs() < 1e-12);
        assert_eq!(logpdf_beta(1.0, 2.0, 2.0), f64::NEG_INFINITY);
        assert_eq!(logpdf_beta(-0.1, 2.0, 2.0), f64::NEG_INFINITY);
    }

    #[test]
    fn wishart_logpdf_scalar_case() {
        // d = 1: Gamma(dof/2, scale 2s) density.
        let (s, dof, x) = (0.8, 5.0, 2.2);
        let g = statrs::distribution::Gamma::new(dof / 2.0, 1.0 / (2.0 * s)).unwrap();
        let lp = logpdf_wishart(
            &SpdMatrix::from_diagonal(&[x]).unwrap(),
            &SpdMatrix::from_diagonal(&[s]).unwrap(),
            dof,
        )
        .unwrap();
        assert!((lp - g.ln_pdf(x)).abs() < 1e-12);
    }
}
