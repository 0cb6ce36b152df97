use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-feature range observed on the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScaleParams {
    pub fn scale(&self, col: usize, x: f64) -> f64 {
        let (lo, hi) = (self.min[col], self.max[col]);
        if hi > lo {
            ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    /// Inverse of [`ScaleParams::scale`] for non-constant columns.
    pub fn unscale(&self, col: usize, x: f64) -> f64 {
        self.min[col] + x * (self.max[col] - self.min[col])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub users: Vec<String>,
    pub features: Vec<String>,
    /// Rows are users, columns are features.
    pub values: DMatrix<f64>,
    /// Set once the matrix has been scaled.
    pub scale: Option<ScaleParams>,
}

impl FeatureMatrix {
    pub fn new(users: Vec<String>, features: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let d = features.len();
        if rows.len() != users.len() {
            return Err(Error::InvalidArgument(format!(
                "{} rows for {} users",
                rows.len(),
                users.len()
            )));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::InvalidArgument(format!(
                "row {bad} has {} values, expected {d}",
                rows[bad].len()
            )));
        }
        let values = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Ok(FeatureMatrix {
            users,
            features,
            values,
            scale: None,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            users: rows.iter().map(|&r| self.users[r].clone()).collect(),
            features: self.features.clone(),
            values: self.values.select_rows(rows),
            scale: self.scale.clone(),
        }
    }

    /// Columns of `other` appended on the right; both must list the same users.
    pub fn hstack(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if self.users != other.users {
            return Err(Error::InvalidArgument("hstack over different user lists".into()));
        }
        let (n, a, b) = (self.n_rows(), self.n_features(), other.n_features());
        let values = DMatrix::from_fn(n, a + b, |i, j| {
            if j < a {
                self.values[(i, j)]
            } else {
                other.values[(i, j - a)]
            }
        });
        let mut features = self.features.clone();
        features.extend(other.features.iter().cloned());
        Ok(FeatureMatrix {
            users: self.users.clone(),
            features,
            values,
            scale: None,
        })
    }

    /// CSV: `user_id` followed by one column per feature.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["user_id".to_string()];
        header.extend(self.features.iter().cloned());
        w.write_record(&header)?;
        for (i, user) in self.users.iter().enumerate() {
            let mut rec = vec![user.clone()];
            rec.extend(self.values.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<feature matrix>", e))?;
        Ok(())
    }
}

/// Min-max scales every column using the range over `train_rows`. Constant
/// training columns map to 0; all values are clipped into [0, 1].
pub fn minmax_scale(matrix: &FeatureMatrix, train_rows: &[usize]) -> Result<FeatureMatrix> {
    if train_rows.is_empty() {
        return Err(Error::InvalidArgument("min-max scaling needs at least one training row".into()));
    }
    let d = matrix.n_features();
    let mut min = vec![f64::INFINITY; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    for &r in train_rows {
        for j in 0..d {
            let v = matrix.values[(r, j)];
            if !v.is_finite() {
                return Err(Error::NonFinite { row: r, col: j });
            }
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    let params = ScaleParams { min, max };
    let values = DMatrix::from_fn(matrix.n_rows(), d, |i, j| params.scale(j, matrix.values[(i, j)]));
    Ok(FeatureMatrix {
        users: matrix.users.clone(),
        features: matrix.features.clone(),
        values,
        scale: Some(params),
    })
}
