//! Linear-kernel epsilon-insensitive support vector regression.
//!
//! The dual is solved with SMO using second-order working-set selection over
//! the 2n variables (alpha, alpha*). The bias is left unregularized, so the
//! fit is equivariant to shifting the targets.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvrParams {
    pub c: f64,
    pub epsilon: f64,
    /// Stop once the maximal KKT violation drops below this.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for SvrParams {
    fn default() -> Self {
        SvrParams {
            c: 1.0,
            epsilon: 0.1,
            tolerance: 1e-6,
            max_iter: 20_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvr {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub c: f64,
    pub epsilon: f64,
    pub iterations: usize,
    /// Final maximal KKT violation.
    pub gap: f64,
    pub converged: bool,
}

impl LinearSvr {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
    }
}

pub(crate) fn check_finite(x: &DMatrix<f64>) -> Result<()> {
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            if !x[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

const TAU: f64 = 1e-12;

pub fn train_svr_linear(x: &DMatrix<f64>, y: &[f64], params: &SvrParams) -> Result<LinearSvr> {
    let l = y.len();
    if x.nrows() != l {
        return Err(Error::InvalidArgument(format!("{} rows but {} targets", x.nrows(), l)));
    }
    if l < 2 {
        return Err(Error::InvalidArgument("SVR needs at least two rows".into()));
    }
    if !(params.c > 0.0) || !(params.epsilon >= 0.0) {
        return Err(Error::InvalidArgument("SVR needs C > 0 and epsilon >= 0".into()));
    }
    check_finite(x)?;
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite target at row {i}")));
    }

    let c = params.c;
    let kernel = x * x.transpose();
    let k = |a: usize, b: usize| kernel[(a % l, b % l)];
    let m = 2 * l;
    let sign = |t: usize| if t < l { 1.0 } else { -1.0 };
    let qd: Vec<f64> = (0..m).map(|t| k(t, t)).collect();

    let mut alpha = vec![0.0; m];
    let mut grad: Vec<f64> = (0..m)
        .map(|t| if t < l { params.epsilon - y[t] } else { params.epsilon + y[t - l] })
        .collect();

    let mut iterations = 0;
    let mut gap;
    loop {
        // Maximal violating i from the "up" set.
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..m {
            if sign(t) > 0.0 {
                if alpha[t] < c && -grad[t] >= gmax {
                    gmax = -grad[t];
                    i = t;
                }
            } else if alpha[t] > 0.0 && grad[t] >= gmax {
                gmax = grad[t];
                i = t;
            }
        }

        // Second-order choice of j from the "low" set.
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut obj_min = f64::INFINITY;
        if i != usize::MAX {
            for t in 0..m {
                let grad_diff = if sign(t) > 0.0 {
                    if alpha[t] <= 0.0 {
                        continue;
                    }
                    gmax2 = gmax2.max(grad[t]);
                    gmax + grad[t]
                } else {
                    if alpha[t] >= c {
                        continue;
                    }
                    gmax2 = gmax2.max(-grad[t]);
                    gmax - grad[t]
                };
                if grad_diff > 0.0 {
                    let quad = qd[i] + qd[t] - 2.0 * k(i, t);
                    let quad = if quad > 0.0 { quad } else { TAU };
                    let obj = -(grad_diff * grad_diff) / quad;
                    if obj <= obj_min {
                        obj_min = obj;
                        j = t;
                    }
                }
            }
        }

        gap = gmax + gmax2;
        if j == usize::MAX || gap < params.tolerance || iterations >= params.max_iter {
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let q_ij = sign(i) * sign(j) * k(i, j);
        if sign(i) != sign(j) {
            let quad = qd[i] + qd[j] + 2.0 * q_ij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            // Both variables share the same upper bound C.
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = qd[i] + qd[j] - 2.0 * q_ij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        let (si, sj) = (sign(i), sign(j));
        for t in 0..m {
            let st = sign(t);
            grad[t] += st * (si * k(i, t) * di + sj * k(j, t) * dj);
        }
    }

    // Bias from the free variables, or the midpoint of the feasible range.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut n_free, mut sum_free) = (0usize, 0.0);
    for t in 0..m {
        let yg = sign(t) * grad[t];
        if alpha[t] >= c {
            if sign(t) < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if sign(t) > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };

    let mut weights = vec![0.0; x.ncols()];
    for r in 0..l {
        let coef = alpha[r] - alpha[r + l];
        if coef != 0.0 {
            for (w, v) in weights.iter_mut().zip(x.row(r).iter()) {
                *w += coef * v;
            }
        }
    }
    // gap is -inf when one working set is empty.
    let converged = gap < params.tolerance;
    if !converged {
        log::warn!("SVR stopped after {iterations} iterations with KKT gap {gap:e}");
    }
    Ok(LinearSvr {
        weights,
        intercept: -rho,
        c,
        epsilon: params.epsilon,
        iterations,
        gap,
        converged,
    })
}
