use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Correlation, mean absolute error and root mean squared error.
///
/// `r` is `None` when either vector has zero variance; that is reported as
/// undefined rather than zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub r: Option<f64>,
    pub mae: f64,
    pub rmse: f64,
    pub n: usize,
}

pub fn compute_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<Metrics> {
    if y_true.len() != y_pred.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} targets vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::InvalidArgument("metrics need at least one pair".into()));
    }
    let n = y_true.len() as f64;
    let (mut abs, mut sq) = (0.0, 0.0);
    for (t, p) in y_true.iter().zip(y_pred) {
        let e = t - p;
        abs += e.abs();
        sq += e * e;
    }
    Ok(Metrics {
        r: pearson(y_true, y_pred),
        mae: abs / n,
        rmse: (sq / n).sqrt(),
        n: y_true.len(),
    })
}

/// Pearson correlation, `None` for zero variance on either side.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.is_empty() {
        return None;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}
