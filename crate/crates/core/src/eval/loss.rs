use crate::error::{Result, SwagError};
use crate::linalg::SpdMatrix;

/// Stein's loss `tr(Σ⁻¹Σ̂) - log|Σ⁻¹Σ̂| - p`.
pub fn stein_loss(truth: &SpdMatrix, estimate: &SpdMatrix) -> Result<f64> {
    if truth.dim() != estimate.dim() {
        return Err(SwagError::DimensionMismatch(format!(
            "truth is {0}x{0}, estimate is {1}x{1}",
            truth.dim(),
            estimate.dim()
        )));
    }
    let ratio = truth.solve(estimate.matrix())?;
    let loss = ratio.trace() - (estimate.logdet() - truth.logdet()) - truth.dim() as f64;
    // Rounding can leave a tiny negative value at the minimum.
    Ok(loss.max(0.0))
}

pub fn avg_stein_loss(truths: &[SpdMatrix], estimates: &[SpdMatrix]) -> Result<f64> {
    if truths.len() != estimates.len() || truths.is_empty() {
        return Err(SwagError::DimensionMismatch(format!(
            "{} truths vs {} estimates",
            truths.len(),
            estimates.len()
        )));
    }
    let mut total = 0.0;
    for (t, e) in truths.iter().zip(estimates) {
        total += stein_loss(t, e)?;
    }
    Ok(total / truths.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randdist::{standard_normal_matrix, RngStream};
    use nalgebra::DMatrix;

    fn random_spd(d: usize, rng: &mut RngStream) -> SpdMatrix {
        let z = standard_normal_matrix(d, d, rng);
        SpdMatrix::new(&z * z.transpose() + DMatrix::identity(d, d) * 0.5).unwrap()
    }

    #[test]
    fn zero_at_truth() {
        let mut rng = RngStream::new(1, 0);
        for d in 1..6 {
            let s = random_spd(d, &mut rng);
            assert!(stein_loss(&s, &s).unwrap() < 1e-12);
        }
    }

    #[test]
    fn doubled_identity() {
        for p in [1usize, 3, 6] {
            let l = stein_loss(&SpdMatrix::identity(p), &SpdMatrix::identity(p).scaled(2.0).unwrap()).unwrap();
            assert!((l - p as f64 * (1.0 - 2f64.ln())).abs() < 1e-12);
        }
    }

    #[test]
    fn asymmetric_and_congruence_invariant() {
        let mut rng = RngStream::new(2, 0);
        let a = random_spd(4, &mut rng);
        let b = random_spd(4, &mut rng);
        let ab = stein_loss(&a, &b).unwrap();
        assert!((ab - stein_loss(&b, &a).unwrap()).abs() > 1e-6);
        let m = standard_normal_matrix(4, 4, &mut rng) + DMatrix::identity(4, 4) * 3.0;
        let ma = SpdMatrix::new(&m * a.matrix() * m.transpose()).unwrap();
        let mb = SpdMatrix::new(&m * b.matrix() * m.transpose()).unwrap();
        assert!((stein_loss(&ma, &mb).unwrap() - ab).abs() < 1e-8);
    }

    #[test]
    fn average_cases() {
        let i = SpdMatrix::identity(2);
        let two = i.scaled(2.0).unwrap();
        assert_eq!(avg_stein_loss(std::slice::from_ref(&i), std::slice::from_ref(&two)).unwrap(), stein_loss(&i, &two).unwrap());
        let l = stein_loss(&i, &two).unwrap();
        assert!((avg_stein_loss(&[i.clone(), i.clone()], &[two.clone(), two.clone()]).unwrap() - l).abs() < 1e-15);
        // Losses 1 and 3 average to 2: on 1x1, tr - log - 1 = x - ln x - 1.
        let x1 = solve_scalar_loss(1.0);
        let x3 = solve_scalar_loss(3.0);
        let one = SpdMatrix::identity(1);
        let est = [SpdMatrix::from_diagonal(&[x1]).unwrap(), SpdMatrix::from_diagonal(&[x3]).unwrap()];
        let avg = avg_stein_loss(&[one.clone(), one], &est).unwrap();
        assert!((avg - 2.0).abs() < 1e-9);
        assert!(avg_stein_loss(&[i], &[]).is_err());
        assert!(stein_loss(&SpdMatrix::identity(2), &SpdMatrix::identity(3)).is_err());
    }

    fn solve_scalar_loss(target: f64) -> f64 {
        // x - ln x - 1 is increasing for x > 1.
        let (mut lo, mut hi) = (1.0, 100.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid - f64::ln(mid) - 1.0 < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}
