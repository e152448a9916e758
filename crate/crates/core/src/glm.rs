//! Weighted logistic regression fitted by iteratively reweighted least
//! squares. Every treatment and measurement-time probability model in the
//! weighting schemes runs through this module.

use nalgebra::{Cholesky, DMatrix, DVector};
use std::collections::HashMap;
use thiserror::Error;

/// Name given to the implicit intercept column.
pub const INTERCEPT: &str = "(intercept)";

/// Coefficient max-change threshold at which IRLS is declared converged.
pub const IRLS_TOLERANCE: f64 = 1e-8;
/// Iteration cap; hitting it flags the model as non-converged (separation).
pub const IRLS_MAX_ITER: usize = 50;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GlmError {
    #[error("design matrix is rank deficient")]
    DegenerateDesign,
    #[error("response takes a single value among positively weighted rows")]
    AllOneClass,
    #[error("row is missing regressor `{0}`")]
    MissingRegressor(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Dense row-major design matrix with named columns. The intercept column is
/// always present and always first.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    names: Vec<String>,
    n: usize,
    data: Vec<f64>,
}

impl DesignMatrix {
    /// Build from named columns; the intercept is prepended automatically.
    pub fn from_columns(n: usize, columns: &[(&str, &[f64])]) -> Self {
        let mut names = Vec::with_capacity(columns.len() + 1);
        names.push(INTERCEPT.to_string());
        for (name, col) in columns {
            assert_eq!(col.len(), n, "column `{name}` has wrong length");
            names.push((*name).to_string());
        }
        let p = names.len();
        let mut data = vec![0.0; n * p];
        for i in 0..n {
            data[i * p] = 1.0;
            for (j, (_, col)) in columns.iter().enumerate() {
                data[i * p + j + 1] = col[i];
            }
        }
        Self { names, n, data }
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    #[inline]
    fn value(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.names.len() + col]
    }

    pub fn column(&self, idx: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.value(i, idx)).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|c| c == name)
    }

    /// Check all entries are finite; used by constructors of higher layers.
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Drop non-intercept columns that carry no information among positively
    /// weighted rows: constants, and exact duplicates of an earlier kept
    /// column. Returns the reduced matrix. Collinearity that survives this
    /// pass surfaces as `DegenerateDesign` during fitting.
    pub fn prune_degenerate(&self, weights: &[f64]) -> DesignMatrix {
        let p = self.names.len();
        let active: Vec<usize> = (0..self.n).filter(|&i| weights[i] > 0.0).collect();
        let mut kept: Vec<usize> = vec![0];
        for j in 1..p {
            let col: Vec<f64> = active.iter().map(|&i| self.value(i, j)).collect();
            let constant = col.windows(2).all(|w| w[0] == w[1]);
            if constant {
                continue;
            }
            let duplicate = kept.iter().skip(1).any(|&k| {
                active
                    .iter()
                    .enumerate()
                    .all(|(idx, &i)| self.value(i, k) == col[idx])
            });
            if duplicate {
                continue;
            }
            kept.push(j);
        }
        if kept.len() == p {
            return self.clone();
        }
        let names = kept.iter().map(|&j| self.names[j].clone()).collect();
        let mut data = Vec::with_capacity(self.n * kept.len());
        for i in 0..self.n {
            for &j in &kept {
                data.push(self.value(i, j));
            }
        }
        DesignMatrix { names, n: self.n, data }
    }
}

/// Fitted logistic model. `converged == false` signals separation or another
/// failure to meet the tolerance; coefficients are still usable for clamped
/// predictions downstream.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    pub coefficients: Vec<(String, f64)>,
    pub converged: bool,
    pub iterations: usize,
}

/// Inverse logit (expit). Monotone, maps the real line into (0, 1).
#[inline]
pub fn inv_logit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Weighted Bernoulli log-likelihood at `beta`.
pub fn log_likelihood(x: &DesignMatrix, y: &[u8], w: &[f64], beta: &[f64]) -> f64 {
    let p = x.n_cols();
    assert_eq!(beta.len(), p);
    let mut ll = 0.0;
    for i in 0..x.n_rows() {
        let mut eta = 0.0;
        for j in 0..p {
            eta += x.value(i, j) * beta[j];
        }
        // y*eta - log(1 + e^eta), written to stay finite for large |eta|.
        let log1pe = if eta > 0.0 { eta + (-eta).exp().ln_1p() } else { eta.exp().ln_1p() };
        ll += w[i] * (f64::from(y[i]) * eta - log1pe);
    }
    ll
}

/// Analytic gradient of the weighted log-likelihood: X' (w * (y - p)).
pub fn score(x: &DesignMatrix, y: &[u8], w: &[f64], beta: &[f64]) -> Vec<f64> {
    let p = x.n_cols();
    let mut g = vec![0.0; p];
    for i in 0..x.n_rows() {
        let mut eta = 0.0;
        for j in 0..p {
            eta += x.value(i, j) * beta[j];
        }
        let resid = w[i] * (f64::from(y[i]) - inv_logit(eta));
        for j in 0..p {
            g[j] += x.value(i, j) * resid;
        }
    }
    g
}

/// Maximize the weighted Bernoulli log-likelihood by IRLS.
///
/// Non-convergence (separation) is reported through the `converged` flag
/// rather than an error, so callers can clamp predicted probabilities and
/// surface a positivity warning instead of crashing.
pub fn fit_weighted_logistic(
    x: &DesignMatrix,
    y: &[u8],
    w: &[f64],
) -> Result<LogisticModel, GlmError> {
    let n = x.n_rows();
    let p = x.n_cols();
    if y.len() != n || w.len() != n {
        return Err(GlmError::DimensionMismatch(format!(
            "design has {n} rows, response {} and weights {}",
            y.len(),
            w.len()
        )));
    }
    if n < p {
        return Err(GlmError::DegenerateDesign);
    }
    let mut seen = [false, false];
    for i in 0..n {
        if w[i] > 0.0 {
            seen[usize::from(y[i] != 0)] = true;
        }
    }
    if !(seen[0] && seen[1]) {
        return Err(GlmError::AllOneClass);
    }

    let mut beta = DVector::zeros(p);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < IRLS_MAX_ITER {
        iterations += 1;
        let mut hessian = DMatrix::zeros(p, p);
        let mut gradient = DVector::zeros(p);
        for i in 0..n {
            if w[i] == 0.0 {
                continue;
            }
            let mut eta = 0.0;
            for j in 0..p {
                eta += x.value(i, j) * beta[j];
            }
            let prob = inv_logit(eta).clamp(1e-10, 1.0 - 1e-10);
            let wi = w[i] * prob * (1.0 - prob);
            let ri = w[i] * (f64::from(y[i]) - prob);
            for j in 0..p {
                let xij = x.value(i, j);
                gradient[j] += xij * ri;
                for l in j..p {
                    hessian[(j, l)] += wi * xij * x.value(i, l);
                }
            }
        }
        for j in 0..p {
            for l in 0..j {
                hessian[(j, l)] = hessian[(l, j)];
            }
        }
        let step = match Cholesky::new(hessian) {
            Some(chol) => chol.solve(&gradient),
            None if iterations == 1 => return Err(GlmError::DegenerateDesign),
            // Curvature collapsed mid-fit (separation); keep the current fit.
            None => break,
        };
        if step.iter().any(|v| !v.is_finite()) {
            break;
        }
        beta += &step;
        if step.amax() <= IRLS_TOLERANCE {
            converged = true;
            break;
        }
    }

    Ok(LogisticModel {
        coefficients: x
            .names()
            .iter()
            .cloned()
            .zip(beta.iter().copied())
            .collect(),
        converged,
        iterations,
    })
}

impl LogisticModel {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.coefficients
            .iter()
            .find(|(c, _)| c == name)
            .map(|(_, v)| *v)
    }

    /// Predicted probability for a named row of regressor values.
    pub fn predict_prob(&self, row: &HashMap<String, f64>) -> Result<f64, GlmError> {
        let mut eta = 0.0;
        for (name, coef) in &self.coefficients {
            if name == INTERCEPT {
                eta += coef;
            } else {
                let value = row
                    .get(name)
                    .ok_or_else(|| GlmError::MissingRegressor(name.clone()))?;
                eta += coef * value;
            }
        }
        Ok(inv_logit(eta))
    }

    /// Predicted probabilities for every row of a design matrix, matching
    /// regressors by column name.
    pub fn predict_matrix(&self, x: &DesignMatrix) -> Result<Vec<f64>, GlmError> {
        let cols: Vec<(usize, f64)> = self
            .coefficients
            .iter()
            .map(|(name, coef)| {
                x.column_index(name)
                    .map(|idx| (idx, *coef))
                    .ok_or_else(|| GlmError::MissingRegressor(name.clone()))
            })
            .collect::<Result<_, _>>()?;
        Ok((0..x.n_rows())
            .map(|i| {
                let eta: f64 = cols.iter().map(|&(j, c)| c * x.value(i, j)).sum();
                inv_logit(eta)
            })
            .collect())
    }
}
