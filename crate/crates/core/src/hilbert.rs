//! Galerkin-truncated Hilbert spaces `H`, `G`, `U`, the covariance `Q` of the
//! noise and the Hilbert–Schmidt class `L_2(U_0, H)`.
//!
//! The canonical basis of `U` diagonalizes `Q`, so `U_0 = Q^{1/2}(U)` is
//! spanned by `sqrt(q_k) e_k` and every Hilbert–Schmidt norm reduces to a
//! weighted column sum.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HilbertSpec {
    dim_h: usize,
    dim_u: usize,
    g_weight: Option<DMatrix<f64>>,
}

impl HilbertSpec {
    pub fn new(dim_h: usize, dim_u: usize, g_weight: Option<DMatrix<f64>>) -> Result<Self> {
        if dim_h == 0 || dim_u == 0 {
            return Err(Error::InvalidParameter(format!(
                "space dimensions must be positive (dim_H = {dim_h}, dim_U = {dim_u})"
            )));
        }
        if let Some(w) = &g_weight {
            if w.nrows() != dim_h || w.ncols() != dim_h {
                return Err(Error::DimensionMismatch {
                    context: "G weight matrix",
                    expected: dim_h,
                    found: w.nrows().max(w.ncols()),
                });
            }
            let asym = asymmetry(w);
            if asym > 1e-12 * (1.0 + w.norm()) {
                return Err(Error::NotSymmetric(asym));
            }
            if w.clone().cholesky().is_none() {
                return Err(Error::InvalidParameter(
                    "G weight matrix must be positive definite".into(),
                ));
            }
        }
        Ok(Self { dim_h, dim_u, g_weight })
    }

    pub fn dim_h(&self) -> usize {
        self.dim_h
    }

    pub fn dim_u(&self) -> usize {
        self.dim_u
    }

    pub fn h_norm(&self, x: &DVector<f64>) -> f64 {
        x.norm()
    }

    /// `|x|_G`; equals `|x|_H` when no weight is set (`G = H`).
    pub fn g_norm(&self, x: &DVector<f64>) -> f64 {
        match &self.g_weight {
            Some(w) => x.dot(&(w * x)).max(0.0).sqrt(),
            None => x.norm(),
        }
    }
}

/// Covariance operator `Q` of the Wiener process, diagonal in the canonical basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CovOperator {
    eigenvalues: Vec<f64>,
    cylindrical: bool,
}

impl CovOperator {
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidParameter("covariance needs at least one mode".into()));
        }
        if let Some(q) = eigenvalues.iter().find(|q| !(q.is_finite() && **q >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "covariance eigenvalues must be finite and nonnegative, got {q}"
            )));
        }
        Ok(Self {
            eigenvalues,
            cylindrical: false,
        })
    }

    /// `K`-mode truncation of a cylindrical Wiener process (`Q = I`, `Tr Q = ∞`).
    pub fn cylindrical(modes: usize) -> Result<Self> {
        let mut cov = Self::new(vec![1.0; modes])?;
        cov.cylindrical = true;
        Ok(cov)
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_cylindrical(&self) -> bool {
        self.cylindrical
    }

    /// Trace of the truncated operator.
    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.eigenvalues))
    }
}

/// A bounded operator `U -> H`, stored as a `dim_H × dim_U` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HSOperator {
    matrix: DMatrix<f64>,
}

impl HSOperator {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("operator entries must be finite".into()));
        }
        Ok(Self { matrix })
    }

    pub fn zeros(dim_h: usize, dim_u: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(dim_h, dim_u),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim_h(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dim_u(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            matrix: &self.matrix * c,
        }
    }

    pub fn add(&self, other: &HSOperator) -> Result<Self> {
        if self.matrix.shape() != other.matrix.shape() {
            return Err(Error::DimensionMismatch {
                context: "operator sum",
                expected: self.matrix.len(),
                found: other.matrix.len(),
            });
        }
        Ok(Self {
            matrix: &self.matrix + &other.matrix,
        })
    }
}

/// `|B|_{L_2(U_0,H)} = sqrt(Tr(B Q B*)) = sqrt(Σ_k q_k |B e_k|²)`.
pub fn hs_norm(b: &HSOperator, q: &CovOperator) -> Result<f64> {
    if b.dim_u() != q.dim() {
        return Err(Error::DimensionMismatch {
            context: "hs_norm: columns of B vs modes of Q",
            expected: b.dim_u(),
            found: q.dim(),
        });
    }
    Ok(weighted_column_norm_sq(b.matrix(), q.eigenvalues()).sqrt())
}

pub(crate) fn weighted_column_norm_sq(m: &DMatrix<f64>, q: &[f64]) -> f64 {
    m.column_iter().zip(q).map(|(col, qk)| qk * col.norm_squared()).sum()
}

/// Spectral (operator 2-) norm.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = m.transpose() * m;
    let top = gram.symmetric_eigenvalues().iter().cloned().fold(0.0_f64, f64::max);
    top.sqrt()
}

pub(crate) fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_hs_norm_is_sqrt_dim() {
        let b = HSOperator::identity(3);
        let q = CovOperator::new(vec![1.0; 3]).unwrap();
        assert!((hs_norm(&b, &q).unwrap() - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_operator_has_zero_norm() {
        let q = CovOperator::new(vec![2.0, 3.0]).unwrap();
        assert_eq!(hs_norm(&HSOperator::zeros(4, 2), &q).unwrap(), 0.0);
    }

    #[test]
    fn diagonal_case_matches_trace() {
        let b = HSOperator::new(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]))).unwrap();
        let q = CovOperator::new(vec![4.0, 1.0]).unwrap();
        let trace = (b.matrix() * q.matrix() * b.matrix().transpose()).trace();
        assert_eq!(trace, 8.0);
        assert!((hs_norm(&b, &q).unwrap() - 8f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn norm_vanishes_off_support() {
        let b = HSOperator::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 5.0])).unwrap();
        let q = CovOperator::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(hs_norm(&b, &q).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_names_both() {
        let q = CovOperator::new(vec![1.0; 3]).unwrap();
        let err = hs_norm(&HSOperator::zeros(2, 2), &q).unwrap_err();
        assert_eq!(
            err,
            Error::DimensionMismatch {
                context: "hs_norm: columns of B vs modes of Q",
                expected: 2,
                found: 3
            }
        );
    }

    #[test]
    fn covariance_validation() {
        assert!(CovOperator::new(vec![1.0, -0.5]).is_err());
        assert!(CovOperator::new(vec![]).is_err());
        let cyl = CovOperator::cylindrical(4).unwrap();
        assert!(cyl.is_cylindrical());
        assert_eq!(cyl.trace(), 4.0);
    }

    #[test]
    fn g_weight_must_be_spd() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(HilbertSpec::new(2, 2, Some(bad)).is_err());
        let good = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let spec = HilbertSpec::new(2, 3, Some(good)).unwrap();
        let x = DVector::from_vec(vec![1.0, 1.0]);
        assert!((spec.g_norm(&x) - 3f64.sqrt()).abs() < 1e-15);
        assert!((spec.h_norm(&x) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn operator_norm_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, -3.0, 2.0]));
        assert!((operator_norm(&m) - 3.0).abs() < 1e-14);
    }
}
