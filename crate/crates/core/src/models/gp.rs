//! Exact Gaussian-process regression with a squared-exponential kernel.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::svr::check_finite;
use crate::error::{Error, Result};

/// Hyperparameters; `None` picks the data-driven default (length scale 1,
/// signal variance = var(y), noise variance = 0.1 var(y)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct GpParams {
    pub length_scale: Option<f64>,
    pub signal_var: Option<f64>,
    pub noise_var: Option<f64>,
    /// Pick length scale and noise by log marginal likelihood on the
    /// training rows.
    #[serde(default)]
    pub grid_search: bool,
}

#[derive(Debug, Clone)]
pub struct GaussianProcess {
    pub length_scale: f64,
    pub signal_var: f64,
    pub noise_var: f64,
    /// Training mean of y, used as the prior mean.
    pub prior_mean: f64,
    train_rows: Vec<Vec<f64>>,
    alpha: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
}

/// Serializable summary of a fitted GP (training data omitted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpSummary {
    pub length_scale: f64,
    pub signal_var: f64,
    pub noise_var: f64,
    pub prior_mean: f64,
    pub n_train: usize,
    pub log_marginal_likelihood: f64,
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn se_kernel(a: &[f64], b: &[f64], length_scale: f64, signal_var: f64) -> f64 {
    signal_var * (-sq_dist(a, b) / (2.0 * length_scale * length_scale)).exp()
}

fn rows(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect()
}

fn variance(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let m = y.iter().sum::<f64>() / n;
    y.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n
}

pub fn train_gp(
    x: &DMatrix<f64>,
    y: &[f64],
    length_scale: f64,
    signal_var: f64,
    noise_var: f64,
) -> Result<GaussianProcess> {
    check_shape(x, y)?;
    let pts = rows(x);
    let d2 = sq_dist_matrix(&pts);
    fit_precomputed(pts, &d2, y, length_scale, signal_var, noise_var)
}

fn check_shape(x: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() || y.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "GP needs matching, non-empty data ({} rows, {} targets)",
            x.nrows(),
            y.len()
        )));
    }
    check_finite(x)
}

fn sq_dist_matrix(pts: &[Vec<f64>]) -> DMatrix<f64> {
    let n = pts.len();
    let mut d2 = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let v = sq_dist(&pts[i], &pts[j]);
            d2[(i, j)] = v;
            d2[(j, i)] = v;
        }
    }
    d2
}

fn fit_precomputed(
    pts: Vec<Vec<f64>>,
    d2: &DMatrix<f64>,
    y: &[f64],
    length_scale: f64,
    signal_var: f64,
    noise_var: f64,
) -> Result<GaussianProcess> {
    if !(noise_var > 0.0) || !(length_scale > 0.0) || !(signal_var >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "GP hyperparameters out of range: length_scale={length_scale}, signal_var={signal_var}, noise_var={noise_var}"
        )));
    }
    let n = y.len();
    let prior_mean = y.iter().sum::<f64>() / n as f64;
    let inv = 1.0 / (2.0 * length_scale * length_scale);
    let k = DMatrix::from_fn(n, n, |i, j| {
        signal_var * (-d2[(i, j)] * inv).exp() + if i == j { noise_var } else { 0.0 }
    });
    let chol = Cholesky::new(k).ok_or(Error::NotPositiveDefinite)?;
    let centered = DVector::from_iterator(n, y.iter().map(|v| v - prior_mean));
    let alpha = chol.solve(&centered);
    Ok(GaussianProcess {
        length_scale,
        signal_var,
        noise_var,
        prior_mean,
        train_rows: pts,
        alpha,
        chol,
    })
}

/// Fits with `params`, filling defaults from the data and optionally
/// searching a small grid.
pub fn fit_gp(x: &DMatrix<f64>, y: &[f64], params: &GpParams) -> Result<GaussianProcess> {
    if y.is_empty() {
        return Err(Error::InvalidArgument("GP needs at least one row".into()));
    }
    let var = variance(y);
    let base_var = if var > 0.0 { var } else { 1.0 };
    let signal = params.signal_var.unwrap_or(base_var);
    if !params.grid_search {
        return train_gp(
            x,
            y,
            params.length_scale.unwrap_or(1.0),
            signal,
            params.noise_var.unwrap_or(0.1 * base_var),
        );
    }
    check_shape(x, y)?;
    let pts = rows(x);
    let d2 = sq_dist_matrix(&pts);
    let scale = median_distance(&d2).unwrap_or(1.0);
    let lengths: Vec<f64> = match params.length_scale {
        Some(l) => vec![l],
        None => [0.5, 1.0, 2.0, 4.0, 8.0].iter().map(|f| f * scale).collect(),
    };
    let noises: Vec<f64> = match params.noise_var {
        Some(v) => vec![v],
        None => [0.03, 0.1, 0.3, 1.0].iter().map(|f| f * base_var).collect(),
    };
    let mut best: Option<(f64, GaussianProcess)> = None;
    for &l in &lengths {
        for &nv in &noises {
            let Ok(gp) = fit_precomputed(pts.clone(), &d2, y, l, signal, nv) else {
                continue;
            };
            let lml = gp.log_marginal_likelihood();
            if best.as_ref().is_none_or(|(b, _)| lml > *b) {
                best = Some((lml, gp));
            }
        }
    }
    best.map(|(_, gp)| gp).ok_or(Error::NotPositiveDefinite)
}

fn median_distance(d2: &DMatrix<f64>) -> Option<f64> {
    let n = d2.nrows();
    let mut d: Vec<f64> = Vec::new();
    // Subsample pairs on large inputs to bound the cost.
    let step = (n / 200).max(1);
    for i in (0..n).step_by(step) {
        for j in (i + 1..n).step_by(step) {
            d.push(d2[(i, j)].sqrt());
        }
    }
    d.retain(|v| *v > 0.0);
    if d.is_empty() {
        return None;
    }
    d.sort_by(f64::total_cmp);
    Some(d[d.len() / 2])
}

impl GaussianProcess {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.prior_mean
            + self
                .train_rows
                .iter()
                .zip(self.alpha.iter())
                .map(|(t, a)| a * se_kernel(t, row, self.length_scale, self.signal_var))
                .sum::<f64>()
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        rows(x).iter().map(|r| self.predict_row(r)).collect()
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.alpha.len() as f64;
        let centered = self.chol.l_dirty() * (self.chol.l_dirty().transpose() * &self.alpha);
        let fit = centered.dot(&self.alpha);
        let log_det: f64 = self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
        -0.5 * fit - log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }

    pub fn summary(&self) -> GpSummary {
        GpSummary {
            length_scale: self.length_scale,
            signal_var: self.signal_var,
            noise_var: self.noise_var,
            prior_mean: self.prior_mean,
            n_train: self.alpha.len(),
            log_marginal_likelihood: self.log_marginal_likelihood(),
        }
    }
}
