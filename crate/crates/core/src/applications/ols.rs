use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numkernel::DataMatrix;

/// Smallest singular value of the design, relative to the largest, below
/// which the design counts as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Outcome vector and `n x k` design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    y: Vec<f64>,
    d: DMatrix<f64>,
}

impl RegressionData {
    /// `design` holds one row of covariates per unit.
    pub fn new<R: AsRef<[f64]>>(y: Vec<f64>, design: &[R]) -> Result<Self> {
        let n = y.len();
        if design.len() != n {
            return Err(Error::InvalidData(format!(
                "{} outcomes but {} design rows",
                n,
                design.len()
            )));
        }
        let k = design.first().map_or(0, |r| r.as_ref().len());
        if k == 0 || n < 2 {
            return Err(Error::InvalidData("need at least two units and one covariate".into()));
        }
        if design.iter().any(|r| r.as_ref().len() != k) {
            return Err(Error::InvalidData("ragged design matrix".into()));
        }
        let d = DMatrix::from_fn(n, k, |i, j| design[i].as_ref()[j]);
        if y.iter().chain(d.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite regression data".into()));
        }
        Ok(Self { y, d })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn k(&self) -> usize {
        self.d.ncols()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.d
    }

    /// `(D'D)^{-1} D'` through the SVD of `D`, after the rank check.
    fn pseudo_inverse(&self) -> Result<DMatrix<f64>> {
        let svd = self.d.clone().svd(true, true);
        let sv = &svd.singular_values;
        let (max, min) = (sv.max(), sv.min());
        let rel = if max > 0.0 { min / max } else { 0.0 };
        if self.n() < self.k() || !(rel > RANK_TOLERANCE) {
            return Err(Error::RankDeficient(rel));
        }
        let u = svd.u.expect("requested");
        let vt = svd.v_t.expect("requested");
        let inv = DMatrix::from_diagonal(&sv.map(|s| 1.0 / s));
        Ok(vt.transpose() * inv * u.transpose())
    }

    /// OLS coefficients.
    pub fn ols(&self) -> Result<Vec<f64>> {
        let p = self.pseudo_inverse()?;
        Ok((p * DVector::from_column_slice(&self.y)).iter().copied().collect())
    }

    /// Row `j` of `n (D'D)^{-1} D'`.
    pub fn weights(&self, j: usize) -> Result<Vec<f64>> {
        if j >= self.k() {
            return Err(Error::BadConfig(format!("coefficient {j} out of range (k = {})", self.k())));
        }
        let p = self.pseudo_inverse()?;
        let n = self.n() as f64;
        Ok(p.row(j).iter().map(|w| n * w).collect())
    }
}

/// `X_i = W_ji Y_i - β_0j` with `W = n (D'D)^{-1} D'`, so that
/// `X̄ = β̂_j - β_0j`. `j` is zero-based.
pub fn influence_ols(data: &RegressionData, j: usize, beta0j: f64) -> Result<DataMatrix> {
    let w = data.weights(j)?;
    let x: Vec<f64> = w.iter().zip(data.y()).map(|(w, y)| w * y - beta0j).collect();
    DataMatrix::from_column(&x)
}
