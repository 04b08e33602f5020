use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::DataMatrix;

/// Treatment cell `(d, t, γ)`: own treatment, treated neighbours, degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub d: bool,
    pub t: u32,
    pub gamma: u32,
}

impl Cell {
    pub fn new(d: bool, t: u32, gamma: u32) -> Self {
        Self { d, t, gamma }
    }
}

/// Per-unit outcome, treatment, treated-neighbour count and degree.
#[derive(Debug, Clone, PartialEq)]
pub struct SpilloverData {
    y: Vec<f64>,
    d: Vec<bool>,
    t: Vec<u32>,
    gamma: Vec<u32>,
}

impl SpilloverData {
    /// Requires equal lengths, finite outcomes and `t_i <= gamma_i`.
    pub fn new(y: Vec<f64>, d: Vec<bool>, t: Vec<u32>, gamma: Vec<u32>) -> Result<Self> {
        let n = y.len();
        if d.len() != n || t.len() != n || gamma.len() != n {
            return Err(Error::InvalidData("spillover fields differ in length".into()));
        }
        if n < 2 {
            return Err(Error::InvalidData("need at least two units".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite outcome".into()));
        }
        if let Some(i) = (0..n).find(|&i| t[i] > gamma[i]) {
            return Err(Error::InvalidData(format!(
                "unit {i} has {} treated neighbours but degree {}",
                t[i], gamma[i]
            )));
        }
        Ok(Self { y, d, t, gamma })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn treated(&self) -> &[bool] {
        &self.d
    }

    pub fn treated_neighbours(&self) -> &[u32] {
        &self.t
    }

    pub fn degree(&self) -> &[u32] {
        &self.gamma
    }

    fn in_cell(&self, i: usize, c: Cell) -> bool {
        self.d[i] == c.d && self.t[i] == c.t && self.gamma[i] == c.gamma
    }

    /// Share of units in `c`; `EmptyCell` when none are.
    fn frequency(&self, c: Cell) -> Result<f64> {
        let count = (0..self.n()).filter(|&i| self.in_cell(i, c)).count();
        if count == 0 {
            return Err(Error::EmptyCell(format!("(d={}, t={}, gamma={})", c.d as u8, c.t, c.gamma)));
        }
        Ok(count as f64 / self.n() as f64)
    }
}

/// `X_i = Y_i 1_i(a) / p̂_a - Y_i 1_i(b) / p̂_b - β_0`, where `p̂` are the
/// cell shares; `X̄` is the difference in cell means minus `β_0`.
pub fn influence_spillover(data: &SpilloverData, a: Cell, b: Cell, beta0: f64) -> Result<DataMatrix> {
    let pa = data.frequency(a)?;
    let pb = data.frequency(b)?;
    let x: Vec<f64> = (0..data.n())
        .map(|i| {
            let ya = if data.in_cell(i, a) { data.y[i] / pa } else { 0.0 };
            let yb = if data.in_cell(i, b) { data.y[i] / pb } else { 0.0 };
            ya - yb - beta0
        })
        .collect();
    DataMatrix::from_column(&x)
}

/// Difference of the mean outcome in cell `a` and in cell `b`.
pub fn spillover_contrast(data: &SpilloverData, a: Cell, b: Cell) -> Result<f64> {
    let mean = |c: Cell| -> Result<f64> {
        data.frequency(c)?;
        let (s, k) = (0..data.n())
            .filter(|&i| data.in_cell(i, c))
            .fold((0.0, 0usize), |(s, k), i| (s + data.y[i], k + 1));
        Ok(s / k as f64)
    };
    Ok(mean(a)? - mean(b)?)
}
