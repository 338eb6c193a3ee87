//! Dense symmetric and Kronecker linear algebra.
//!
//! Conventions used throughout the crate: a `p1 x p2` matrix observation `Y`
//! is vectorized by stacking columns, and a separable covariance of `vec(Y)`
//! is written `C ⊗ R` with the `p2 x p2` column covariance on the left and the
//! `p1 x p1` row covariance on the right.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SwagError};

/// Row/column dimensions of a matrix-variate observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MatrixShape {
    p1: usize,
    p2: usize,
}

impl MatrixShape {
    pub fn new(p1: usize, p2: usize) -> Result<Self> {
        if p1 == 0 || p2 == 0 {
            return Err(SwagError::DimensionMismatch(format!(
                "matrix shape must be at least 1x1, got {p1}x{p2}"
            )));
        }
        Ok(Self { p1, p2 })
    }

    /// Row dimension.
    pub fn p1(&self) -> usize {
        self.p1
    }

    /// Column dimension.
    pub fn p2(&self) -> usize {
        self.p2
    }

    /// Length of the vectorized observation, `p1 * p2`.
    pub fn p(&self) -> usize {
        self.p1 * self.p2
    }
}

/// A symmetric positive-definite matrix together with its lower Cholesky
/// factor.
///
/// Construction symmetrizes the input and fails if any Cholesky pivot is not
/// strictly positive, so every live value is usable for solves and
/// determinants without further checks.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    entries: DMatrix<f64>,
    factor: DMatrix<f64>,
}

impl PartialEq for SpdMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl SpdMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(SwagError::DimensionMismatch(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(SwagError::NotPositiveDefinite(
                "non-finite entry".to_string(),
            ));
        }
        let entries = symmetrize(&m);
        let factor = cholesky_lower(&entries)?;
        Ok(Self { entries, factor })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            entries: DMatrix::identity(dim, dim),
            factor: DMatrix::identity(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let d = DVector::from_column_slice(diag);
        Self::new(DMatrix::from_diagonal(&d))
    }

    /// Builds the matrix `F Fᵀ` from a lower-triangular `F` with a strictly
    /// positive diagonal, reusing `F` as the factor.
    pub(crate) fn from_lower_factor(factor: DMatrix<f64>) -> Result<Self> {
        if factor.diagonal().iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(SwagError::NotPositiveDefinite(
                "triangular factor has a non-positive pivot".to_string(),
            ));
        }
        let factor = factor.lower_triangle();
        let entries = symmetrize(&(&factor * factor.transpose()));
        Ok(Self { entries, factor })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    /// Lower-triangular `L` with `L Lᵀ` equal to this matrix.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn solve(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        solve_spd(self, b)
    }

    pub fn logdet(&self) -> f64 {
        logdet_spd(self)
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    pub fn inverse(&self) -> SpdMatrix {
        let n = self.dim();
        // Inverse of the factor is lower triangular; (L⁻¹)ᵀ L⁻¹ = S⁻¹.
        let mut linv = DMatrix::identity(n, n);
        self.factor.solve_lower_triangular_mut(&mut linv);
        let inv = symmetrize(&(linv.transpose() * &linv));
        SpdMatrix::new(inv.clone()).unwrap_or_else(|_| {
            // Severe ill-conditioning can defeat the re-factorization even
            // though the inverse is PD in exact arithmetic.
            let jitter = inv.diagonal().max() * 1e-14;
            SpdMatrix::new(inv + DMatrix::identity(n, n) * jitter)
                .expect("inverse of an SPD matrix is SPD")
        })
    }

    /// `c * self` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<SpdMatrix> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(SwagError::NotPositiveDefinite(format!(
                "scale factor {c} is not positive"
            )));
        }
        Ok(Self {
            entries: &self.entries * c,
            factor: &self.factor * c.sqrt(),
        })
    }

    /// `self ⊗ right`; the factor is the Kronecker product of the factors.
    pub fn kron(&self, right: &SpdMatrix) -> SpdMatrix {
        Self {
            entries: kron(&self.entries, &right.entries),
            factor: kron(&self.factor, &right.factor),
        }
    }

    /// Sum of two SPD matrices.
    pub fn add(&self, other: &SpdMatrix) -> Result<SpdMatrix> {
        SpdMatrix::new(&self.entries + &other.entries)
    }

    /// Smallest and largest eigenvalues.
    pub fn eigen_range(&self) -> (f64, f64) {
        let eig = self.entries.clone().symmetric_eigenvalues();
        (eig.min(), eig.max())
    }
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn cholesky_lower(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Err(SwagError::NotPositiveDefinite(format!(
                "pivot {j} of {n} is {d:e}"
            )));
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Kronecker product `a ⊗ b`: block `(i, j)` of the result is `a[i, j] * b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Column-stacking vectorization.
pub fn vec_matrix(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_matrix`] for a `p1 x p2` matrix.
pub fn unvec(v: &[f64], p1: usize, p2: usize) -> DMatrix<f64> {
    assert_eq!(v.len(), p1 * p2, "unvec length does not match shape");
    DMatrix::from_column_slice(p1, p2, v)
}

/// Reshapes the columns `l_k` of the Cholesky factor of `s` into `p1 x p2`
/// matrices `L_k`, so that `s = Σ_k vec(L_k) vec(L_k)ᵀ`.
pub fn chol_column_expansion(s: &SpdMatrix, shape: MatrixShape) -> Result<Vec<DMatrix<f64>>> {
    let p = shape.p();
    if s.dim() != p {
        return Err(SwagError::DimensionMismatch(format!(
            "matrix of dim {} cannot be expanded over shape {}x{}",
            s.dim(),
            shape.p1(),
            shape.p2()
        )));
    }
    let f = s.factor();
    Ok((0..p)
        .map(|k| unvec(f.column(k).as_slice(), shape.p1(), shape.p2()))
        .collect())
}

/// `Σ_k L_k C L_kᵀ`, a `p1 x p1` matrix.
pub fn contract_rows(expansion: &[DMatrix<f64>], col: &DMatrix<f64>) -> DMatrix<f64> {
    let p1 = expansion.first().map_or(0, |l| l.nrows());
    let mut acc = DMatrix::zeros(p1, p1);
    for l in expansion {
        acc += l * col * l.transpose();
    }
    symmetrize(&acc)
}

/// `Σ_k L_kᵀ R L_k`, a `p2 x p2` matrix.
pub fn contract_cols(expansion: &[DMatrix<f64>], row: &DMatrix<f64>) -> DMatrix<f64> {
    let p2 = expansion.first().map_or(0, |l| l.ncols());
    let mut acc = DMatrix::zeros(p2, p2);
    for l in expansion {
        acc += l.transpose() * row * l;
    }
    symmetrize(&acc)
}

/// Solves `s x = b` through the cached triangular factor.
pub fn solve_spd(s: &SpdMatrix, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if b.nrows() != s.dim() {
        return Err(SwagError::DimensionMismatch(format!(
            "cannot solve a {}x{} system against {} rows",
            s.dim(),
            s.dim(),
            b.nrows()
        )));
    }
    let mut x = b.clone();
    if !s.factor.solve_lower_triangular_mut(&mut x) || !s.factor.tr_solve_lower_triangular_mut(&mut x) {
        return Err(SwagError::NotPositiveDefinite(
            "zero pivot in triangular solve".to_string(),
        ));
    }
    Ok(x)
}

pub fn logdet_spd(s: &SpdMatrix) -> f64 {
    2.0 * s.factor.diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// `tr(a b)` without forming the product.
pub fn trace_of_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(&b.transpose()).sum()
}
