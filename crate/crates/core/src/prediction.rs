//! Model outputs: survival curves on a shared grid and scalar risks.

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::data::TimeGrid;
use crate::error::{Error, Result};

/// `surv[[i, k]]` is the predicted `S(grid[k] | x_i)`.
///
/// Rows are individually non-increasing but may cross each other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPredictionMatrix {
    grid: TimeGrid,
    surv: Array2<f64>,
}

impl SurvivalPredictionMatrix {
    pub fn new(grid: TimeGrid, surv: Array2<f64>) -> Result<Self> {
        if surv.ncols() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: surv.ncols() });
        }
        for (i, row) in surv.axis_iter(Axis(0)).enumerate() {
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidArgument(format!("row {i} has values outside [0, 1]")));
            }
            if row.windows(2).into_iter().any(|w| w[1] > w[0]) {
                return Err(Error::InvalidArgument(format!("row {i} is not non-increasing")));
            }
        }
        Ok(Self { grid, surv })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn surv(&self) -> &Array2<f64> {
        &self.surv
    }

    pub fn n_subjects(&self) -> usize {
        self.surv.nrows()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.surv.row(i)
    }

    /// Survival of subject `i` at `t`; 1 before the first knot, last value
    /// after the last knot.
    pub fn eval(&self, i: usize, t: f64) -> f64 {
        match self.grid.locate(t) {
            None => 1.0,
            Some(k) => self.surv[[i, k]],
        }
    }

    /// `S(t-)` for subject `i`.
    pub fn eval_left(&self, i: usize, t: f64) -> f64 {
        match self.grid.locate_left(t) {
            None => 1.0,
            Some(k) => self.surv[[i, k]],
        }
    }

    /// Survival of every subject at `t`.
    pub fn column_at(&self, t: f64) -> Vec<f64> {
        match self.grid.locate(t) {
            None => vec![1.0; self.n_subjects()],
            Some(k) => self.surv.column(k).to_vec(),
        }
    }

    /// True when every pair of rows is ordered the same way at every knot,
    /// i.e. no two curves cross.
    pub fn rows_never_cross(&self) -> bool {
        let n = self.n_subjects();
        for a in 0..n {
            for b in (a + 1)..n {
                let (ra, rb) = (self.surv.row(a), self.surv.row(b));
                let le = ra.iter().zip(rb.iter()).all(|(x, y)| x <= y);
                let ge = ra.iter().zip(rb.iter()).all(|(x, y)| x >= y);
                if !(le || ge) {
                    return false;
                }
            }
        }
        true
    }
}

/// Scalar risks; larger means an earlier expected event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskVector(Vec<f64>);

impl RiskVector {
    pub fn new(risks: Vec<f64>) -> Result<Self> {
        if let Some(i) = risks.iter().position(|r| !r.is_finite()) {
            return Err(Error::InvalidArgument(format!("risk {i} is not finite")));
        }
        Ok(Self(risks))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_increasing_rows_and_out_of_range() {
        let g = TimeGrid::new(vec![1.0, 2.0]).unwrap();
        assert!(SurvivalPredictionMatrix::new(g.clone(), array![[0.5, 0.6]]).is_err());
        assert!(SurvivalPredictionMatrix::new(g.clone(), array![[1.2, 0.6]]).is_err());
        assert!(SurvivalPredictionMatrix::new(g, array![[0.9, 0.6]]).is_ok());
    }

    #[test]
    fn evaluation_clamps_and_defaults_to_one() {
        let g = TimeGrid::new(vec![1.0, 2.0]).unwrap();
        let m = SurvivalPredictionMatrix::new(g, array![[0.9, 0.6], [0.8, 0.7]]).unwrap();
        assert_eq!(m.eval(0, 0.5), 1.0);
        assert_eq!(m.eval(0, 1.5), 0.9);
        assert_eq!(m.eval(0, 50.0), 0.6);
        assert_eq!(m.eval_left(1, 2.0), 0.8);
        assert_eq!(m.column_at(2.0), vec![0.6, 0.7]);
        assert!(!m.rows_never_cross());
    }

    #[test]
    fn risk_vector_rejects_nan() {
        assert!(RiskVector::new(vec![1.0, f64::NAN]).is_err());
    }
}
