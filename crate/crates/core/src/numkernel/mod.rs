//! Deterministic numeric primitives: sample moments, functions of small
//! symmetric positive-definite matrices, and the normal / chi-square
//! distribution functions used to build critical values and p-values.

mod dist;

pub use dist::{dist_cdf, dist_quantile, dist_sf, Distribution};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue floor: eigenvalues at or below `1e-10 * trace / m` are
/// treated as zero.
pub const RELATIVE_EIGEN_FLOOR: f64 = 1e-10;

/// An `n x m` matrix of real observations, one unit per row.
///
/// Entries are stored row-major. Construction rejects non-finite entries,
/// fewer than two rows and zero columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Vec<f64>,
    n: usize,
    m: usize,
}

impl DataMatrix {
    pub fn from_row_major(n: usize, m: usize, values: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidData(format!("need at least 2 rows, got {n}")));
        }
        if m < 1 {
            return Err(Error::InvalidData("need at least 1 column".into()));
        }
        if values.len() != n * m {
            return Err(Error::InvalidData(format!(
                "expected {} values for a {n}x{m} matrix, got {}",
                n * m,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite entry at row {}, column {}",
                pos / m,
                pos % m
            )));
        }
        Ok(Self { values, n, m })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let m = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut values = Vec::with_capacity(rows.len() * m);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != m {
                return Err(Error::InvalidData(format!(
                    "row {i} has {} columns, expected {m}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::from_row_major(rows.len(), m, values)
    }

    /// Single-column matrix.
    pub fn from_column(column: &[f64]) -> Result<Self> {
        Self::from_row_major(column.len(), 1, column.to_vec())
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.m + k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.m)
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows().map(|r| r[k]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Applies `f` to every entry. The result must stay finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_row_major(self.n, self.m, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Returns the matrix with `shift[k]` subtracted from column `k`.
    pub fn centered_at(&self, shift: &[f64]) -> Result<Self> {
        check_dim(shift, self.m)?;
        let values = self
            .rows()
            .flat_map(|r| r.iter().zip(shift).map(|(x, s)| x - s))
            .collect();
        Self::from_row_major(self.n, self.m, values)
    }

    /// Keeps only the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&bad) = cols.iter().find(|&&k| k >= self.m) {
            return Err(Error::InvalidData(format!("column {bad} out of range")));
        }
        let values = self
            .rows()
            .flat_map(|r| cols.iter().map(move |&k| r[k]))
            .collect();
        Self::from_row_major(self.n, cols.len(), values)
    }
}

pub(crate) fn check_dim(v: &[f64], m: usize) -> Result<()> {
    if v.len() != m {
        return Err(Error::InvalidData(format!(
            "vector has length {}, data has {m} columns",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidData("vector has non-finite entries".into()));
    }
    Ok(())
}

pub fn sample_mean(x: &DataMatrix) -> Vec<f64> {
    let mut mean = vec![0.0; x.m];
    for row in x.rows() {
        for (acc, v) in mean.iter_mut().zip(row) {
            *acc += v;
        }
    }
    let n = x.n as f64;
    mean.iter_mut().for_each(|v| *v /= n);
    mean
}

/// Sample covariance with divisor `n` together with its inverse square root.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub sigma_hat: DMatrix<f64>,
    pub inv_sqrt: DMatrix<f64>,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

impl CovarianceEstimate {
    pub fn dim(&self) -> usize {
        self.sigma_hat.nrows()
    }

    /// `Σ̂^{-1}`, formed as the square of the inverse square root.
    pub fn precision(&self) -> DMatrix<f64> {
        &self.inv_sqrt * &self.inv_sqrt
    }

    pub fn condition_number(&self) -> f64 {
        self.max_eigenvalue / self.min_eigenvalue
    }
}

/// Covariance matrix with divisor `n` (no small-sample correction).
pub fn covariance_matrix(x: &DataMatrix) -> DMatrix<f64> {
    let mean = sample_mean(x);
    let m = x.m;
    let mut s = DMatrix::<f64>::zeros(m, m);
    let mut dev = vec![0.0; m];
    for row in x.rows() {
        for k in 0..m {
            dev[k] = row[k] - mean[k];
        }
        for a in 0..m {
            for b in a..m {
                s[(a, b)] += dev[a] * dev[b];
            }
        }
    }
    let n = x.n as f64;
    for a in 0..m {
        for b in a..m {
            let v = s[(a, b)] / n;
            s[(a, b)] = v;
            s[(b, a)] = v;
        }
    }
    s
}

/// Fails with `SingularCovariance` when the smallest eigenvalue is at or
/// below the larger of [`default_floor`] and the rounding-noise level of a
/// constant column, `(1e-12 · max |x|)²`.
pub fn sample_covariance(x: &DataMatrix) -> Result<CovarianceEstimate> {
    let sigma_hat = covariance_matrix(x);
    let scale = x.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let floor = default_floor(&sigma_hat).max((1e-12 * scale).powi(2));
    let (inv_sqrt, min_eigenvalue, max_eigenvalue) = inv_sqrt_with_spectrum(&sigma_hat, floor)?;
    Ok(CovarianceEstimate {
        sigma_hat,
        inv_sqrt,
        min_eigenvalue,
        max_eigenvalue,
    })
}

/// `1e-10 * trace(M) / m`.
pub fn default_floor(m: &DMatrix<f64>) -> f64 {
    RELATIVE_EIGEN_FLOOR * m.trace() / m.nrows() as f64
}

/// `V diag(λ^{-1/2}) V'` from the symmetric eigendecomposition of `m`.
pub fn inv_sqrt_psd(m: &DMatrix<f64>, floor: f64) -> Result<DMatrix<f64>> {
    inv_sqrt_with_spectrum(m, floor).map(|(s, _, _)| s)
}

fn inv_sqrt_with_spectrum(m: &DMatrix<f64>, floor: f64) -> Result<(DMatrix<f64>, f64, f64)> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::InvalidData("matrix must be square and non-empty".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("matrix has non-finite entries".into()));
    }
    let eig = SymmetricEigen::new(m.clone());
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.max();
    if min <= floor {
        return Err(Error::SingularCovariance {
            min_eigenvalue: min,
            floor,
        });
    }
    let d = DVector::from_iterator(m.nrows(), eig.eigenvalues.iter().map(|l| l.powf(-0.5)));
    let v = &eig.eigenvectors;
    let mut out = v * DMatrix::from_diagonal(&d) * v.transpose();
    symmetrize(&mut out);
    Ok((out, min, max))
}

fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}
