use nalgebra::DVector;

use crate::error::{Result, SwagError};
use crate::linalg::SpdMatrix;

/// Discriminant score `(y-μ)ᵀΣ⁻¹(y-μ) + log|Σ|`; smaller is closer.
pub fn qda_score(y: &DVector<f64>, mu: &DVector<f64>, sigma: &SpdMatrix) -> Result<f64> {
    if y.len() != sigma.dim() || mu.len() != sigma.dim() {
        return Err(SwagError::DimensionMismatch(format!(
            "vector of length {} / {} against {}x{} covariance",
            y.len(),
            mu.len(),
            sigma.dim(),
            sigma.dim()
        )));
    }
    let r = y - mu;
    let l = sigma.factor();
    let z = l
        .solve_lower_triangular(&r)
        .ok_or_else(|| SwagError::NotPositiveDefinite("singular factor in QDA score".into()))?;
    Ok(z.norm_squared() + sigma.logdet())
}

#[derive(Debug, Clone)]
pub struct ClassModel {
    pub mean: DVector<f64>,
    pub cov: SpdMatrix,
}

/// Counts with rows = true class, columns = predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn row_total(&self, class: usize) -> usize {
        self.counts[class].iter().sum()
    }

    /// Fraction of each class's test points assigned to it; NaN for an
    /// empty class.
    pub fn class_rates(&self) -> Vec<f64> {
        (0..self.num_classes())
            .map(|c| self.counts[c][c] as f64 / self.row_total(c) as f64)
            .collect()
    }

    pub fn accuracy(&self) -> f64 {
        let total: usize = (0..self.num_classes()).map(|c| self.row_total(c)).sum();
        let right: usize = (0..self.num_classes()).map(|c| self.counts[c][c]).sum();
        right as f64 / total as f64
    }
}

/// Assigns each test vector to the class of smallest score; ties go to the
/// lowest class index. `test[c]` holds the vectors whose true class is `c`.
pub fn qda_classify(test: &[Vec<DVector<f64>>], models: &[ClassModel]) -> Result<(ConfusionMatrix, Vec<f64>)> {
    if test.len() != models.len() {
        return Err(SwagError::DimensionMismatch(format!(
            "{} test classes but {} models",
            test.len(),
            models.len()
        )));
    }
    let k = models.len();
    let mut counts = vec![vec![0usize; k]; k];
    for (truth, points) in test.iter().enumerate() {
        for y in points {
            let mut best = (0, f64::INFINITY);
            for (c, m) in models.iter().enumerate() {
                let s = qda_score(y, &m.mean, &m.cov)?;
                if s < best.1 {
                    best = (c, s);
                }
            }
            counts[truth][best.0] += 1;
        }
    }
    let cm = ConfusionMatrix { counts };
    let rates = cm.class_rates();
    Ok((cm, rates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randdist::RngStream;
    use nalgebra::DMatrix;

    #[test]
    fn score_spot_values() {
        let z = DVector::zeros(2);
        assert_eq!(qda_score(&z, &z, &SpdMatrix::identity(2)).unwrap(), 0.0);
        let y = DVector::from_vec(vec![1.0, 0.0]);
        let s = SpdMatrix::from_diagonal(&[4.0, 1.0]).unwrap();
        assert!((qda_score(&y, &z, &s).unwrap() - (0.25 + 4f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn score_scaling_identity() {
        let y = DVector::from_vec(vec![0.3, -1.2, 0.7]);
        let mu = DVector::from_vec(vec![0.1, 0.2, -0.4]);
        let s = SpdMatrix::new(DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 1.5])).unwrap();
        let c = 2.5;
        let base = qda_score(&y, &mu, &s).unwrap();
        let maha = base - s.logdet();
        let scaled = qda_score(&y, &mu, &s.scaled(c).unwrap()).unwrap();
        assert!((base - scaled - ((1.0 - 1.0 / c) * maha - 3.0 * c.ln())).abs() < 1e-12);
    }

    #[test]
    fn ties_go_to_first_class() {
        let m = ClassModel {
            mean: DVector::zeros(2),
            cov: SpdMatrix::identity(2),
        };
        let pts = vec![DVector::from_vec(vec![0.5, 1.0]); 3];
        let (cm, rates) = qda_classify(&[pts.clone(), pts], &[m.clone(), m]).unwrap();
        assert_eq!(cm.counts, vec![vec![3, 0], vec![3, 0]]);
        assert_eq!(rates, vec![1.0, 0.0]);
    }

    #[test]
    fn separated_classes() {
        let mut rng = RngStream::new(3, 0);
        let models: Vec<ClassModel> = (0..2)
            .map(|c| ClassModel {
                mean: DVector::from_element(2, 10.0 * c as f64),
                cov: SpdMatrix::identity(2),
            })
            .collect();
        let test: Vec<Vec<DVector<f64>>> = models
            .iter()
            .map(|m| (0..100).map(|_| &m.mean + DVector::from_fn(2, |_, _| rng.standard_normal())).collect())
            .collect();
        let (cm, rates) = qda_classify(&test, &models).unwrap();
        assert_eq!(cm.accuracy(), 1.0);
        assert_eq!(cm.row_total(0), 100);
        assert!(rates.iter().all(|r| (0.0..=1.0).contains(r)));
    }
}
