//! Covariance, correlation and the small amount of dense linear algebra the
//! estimators need.

pub mod special;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A dense real symmetric matrix. Symmetry is enforced on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Builds a symmetric matrix, averaging `m` with its transpose.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidArgument(format!(
                "matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let mut m = m;
        let p = m.nrows();
        for i in 0..p {
            for j in (i + 1)..p {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(SymMatrix(m))
    }

    /// Builds from the upper triangle produced by `f(i, j)` with `i <= j`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidArgument("rows do not form a square matrix".into()));
        }
        Self::from_matrix(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(values)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.0[(i, j)] = v;
        self.0[(j, i)] = v;
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }

    /// Principal submatrix on `idx`, in the given order.
    pub fn submatrix(&self, idx: &[usize]) -> SymMatrix {
        SymMatrix::from_fn(idx.len(), |a, b| self.0[(idx[a], idx[b])])
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        (&self.0 - &other.0).abs().max()
    }

    /// Largest absolute off-diagonal element.
    pub fn max_abs_off_diagonal(&self) -> f64 {
        let p = self.dim();
        let mut best = 0.0f64;
        for i in 0..p {
            for j in (i + 1)..p {
                best = best.max(self.0[(i, j)].abs());
            }
        }
        best
    }

    /// `tr(self * other)` without forming the product.
    pub fn trace_product(&self, other: &SymMatrix) -> f64 {
        self.0.component_mul(&other.0).sum()
    }

    pub fn is_positive_definite(&self) -> bool {
        self.0.clone().cholesky().is_some()
    }

    /// Log-determinant through a Cholesky factorization.
    pub fn log_det(&self) -> Result<f64> {
        let chol = self
            .0
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("log-determinant".into()))?;
        Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        SymMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Pearson correlation with its two-sided significance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub p: f64,
    pub n: usize,
}

/// Unbiased sample covariance (divisor `n - 1`) of a respondents x items matrix.
pub fn covariance(rows: &DMatrix<f64>) -> Result<SymMatrix> {
    let n = rows.nrows();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "covariance needs at least 2 complete rows, got {n}"
        )));
    }
    let means = rows.row_mean();
    let mut centered = rows.clone();
    for mut r in centered.row_iter_mut() {
        r -= &means;
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    SymMatrix::from_matrix(cov)
}

/// Rescales a covariance matrix to unit diagonal.
pub fn correlation_from_covariance(cov: &SymMatrix) -> Result<SymMatrix> {
    let sd: Vec<f64> = cov.diag().iter().map(|v| v.sqrt()).collect();
    if let Some(i) = sd.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::UndefinedCorrelation(format!("column {i} has zero variance")));
    }
    Ok(SymMatrix::from_fn(cov.dim(), |i, j| {
        if i == j {
            1.0
        } else {
            cov.get(i, j) / (sd[i] * sd[j])
        }
    }))
}

/// Sample correlation matrix of a respondents x items matrix.
pub fn correlation(rows: &DMatrix<f64>) -> Result<SymMatrix> {
    correlation_from_covariance(&covariance(rows)?)
}

/// Pearson correlation with a two-sided p-value from the Student-t
/// distribution on `n - 2` degrees of freedom.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "pearson: length mismatch {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("pearson needs n >= 3, got {n}")));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input".into()));
    }
    let r = if sxx == syy && sxy == sxx {
        1.0
    } else {
        (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
    };
    let df = n as f64 - 2.0;
    let p = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        special::student_t_two_sided(t, df)
    };
    Ok(CorrelationResult { r, p, n })
}

/// Inverse of a positive definite matrix through its Cholesky factor.
pub fn spd_inverse(m: &SymMatrix) -> Result<SymMatrix> {
    let chol = m
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("inverse".into()))?;
    SymMatrix::from_matrix(chol.inverse())
}
