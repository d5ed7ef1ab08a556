//! Poisson regression with log link, fitted by iteratively reweighted least
//! squares. MPR-1 uses climate predictors only; MPR-2 adds the prior month's
//! case count.
//!
//! Predictors are standardized internally (the IRLS normal equations would
//! otherwise mix mm-scale rainfall with percent-scale humidity); reported
//! coefficients are on the raw scale with standardized values alongside.

use thiserror::Error;

use crate::data::DesignMatrix;
use crate::diagnostics::ln_gamma;
use crate::linalg;

/// Linear predictors are capped here during fitting and prediction; a fit
/// whose optimum sits on the cap is reported as diverged.
pub const LINEAR_PREDICTOR_CAP: f64 = 30.0;

const GRADIENT_TOLERANCE: f64 = 1e-8;
const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Error)]
pub enum PoissonError {
    #[error("design matrix is rank deficient after standardization")]
    RankDeficient,
    #[error("linear predictor reached the +-{LINEAR_PREDICTOR_CAP} cap at convergence")]
    Diverged,
    #[error("targets must be nonnegative integers (found {value} at row {row})")]
    InvalidTarget { row: usize, value: f64 },
    #[error("design columns do not match the fit ({got:?} vs {expected:?})")]
    ColumnMismatch {
        got: Vec<String>,
        expected: Vec<String>,
    },
    #[error("variant {variant:?} requires the case-lag column to be {requirement}")]
    VariantMismatch {
        variant: PoissonVariant,
        requirement: &'static str,
    },
    #[error("need at least {min} rows, got {rows}")]
    TooFewRows { rows: usize, min: usize },
}

/// Climate-only (MPR-1) or climate plus lagged cases (MPR-2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoissonVariant {
    Mpr1,
    Mpr2,
}

/// A fitted Poisson regression. Coefficients are raw-scale; the
/// `_std` fields carry the standardized-predictor equivalents.
#[derive(Debug, Clone)]
pub struct PoissonFit {
    pub variant: PoissonVariant,
    pub col_names: Vec<String>,
    pub beta0: f64,
    /// Raw-scale coefficients for the non-case-lag columns, in design order.
    pub betas: Vec<f64>,
    /// Raw-scale case-lag coefficient (MPR-2 only).
    pub case_lag_coef: Option<f64>,
    pub beta0_std: f64,
    pub betas_std: Vec<f64>,
    pub case_lag_coef_std: Option<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Log-likelihood after each IRLS iteration (nondecreasing).
    pub loglik_trace: Vec<f64>,
}

impl PoissonFit {
    /// Estimated parameter count (intercept + slopes).
    pub fn n_params(&self) -> usize {
        1 + self.betas.len() + usize::from(self.case_lag_coef.is_some())
    }
}

fn check_targets(y: &[f64]) -> Result<(), PoissonError> {
    for (row, &v) in y.iter().enumerate() {
        if !(v.is_finite() && v >= 0.0 && (v - v.round()).abs() < 1e-9) {
            return Err(PoissonError::InvalidTarget { row, value: v });
        }
    }
    Ok(())
}

fn poisson_loglik(y: &[f64], eta: &[f64]) -> f64 {
    y.iter()
        .zip(eta)
        .map(|(yi, e)| yi * e - e.exp() - ln_gamma(yi + 1.0))
        .sum()
}

/// Fits by IRLS from `beta0 = ln(mean(y) + 0.5)`, all slopes zero; Newton
/// steps are halved whenever they would decrease the log-likelihood.
pub fn fit_irls(
    design: &DesignMatrix,
    variant: PoissonVariant,
) -> Result<PoissonFit, PoissonError> {
    match (variant, design.case_lag_col()) {
        (PoissonVariant::Mpr2, None) => {
            return Err(PoissonError::VariantMismatch {
                variant,
                requirement: "present",
            })
        }
        (PoissonVariant::Mpr1, Some(_)) => {
            return Err(PoissonError::VariantMismatch {
                variant,
                requirement: "absent",
            })
        }
        _ => {}
    }

    let n = design.nrows();
    let k = design.ncols();
    if n < k + 2 {
        return Err(PoissonError::TooFewRows {
            rows: n,
            min: k + 2,
        });
    }
    let y = design.y();
    check_targets(y)?;

    // Standardize each predictor column; a zero-variance column duplicates
    // the intercept.
    let mut means = vec![0.0; k];
    let mut sds = vec![0.0; k];
    for j in 0..k {
        let col = design.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        if var <= 0.0 {
            return Err(PoissonError::RankDeficient);
        }
        means[j] = mean;
        sds[j] = var.sqrt();
    }
    let xs: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = Vec::with_capacity(k + 1);
            row.push(1.0);
            for (j, v) in design.row(i).iter().enumerate() {
                row.push((v - means[j]) / sds[j]);
            }
            row
        })
        .collect();
    let p = k + 1;

    let y_mean = y.iter().sum::<f64>() / n as f64;
    let mut beta = vec![0.0; p];
    beta[0] = (y_mean + 0.5).ln();

    let eta_of = |beta: &[f64]| -> Vec<f64> {
        xs.iter()
            .map(|row| {
                row.iter()
                    .zip(beta)
                    .map(|(x, b)| x * b)
                    .sum::<f64>()
                    .clamp(-LINEAR_PREDICTOR_CAP, LINEAR_PREDICTOR_CAP)
            })
            .collect()
    };

    let mut eta = eta_of(&beta);
    let mut loglik = poisson_loglik(y, &eta);
    let mut loglik_trace = vec![loglik];
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=MAX_ITERATIONS {
        iterations = iter;
        let mu: Vec<f64> = eta.iter().map(|e| e.exp()).collect();

        // Gradient of the log-likelihood: X'(y - mu).
        let mut grad = vec![0.0; p];
        for (i, row) in xs.iter().enumerate() {
            let d = y[i] - mu[i];
            for (g, x) in grad.iter_mut().zip(row) {
                *g += x * d;
            }
        }
        // One more Newton step is taken after the tolerance is met; the
        // quadratic rate turns a just-under-tolerance point into machine
        // precision.
        let at_tolerance = grad.iter().all(|g| g.abs() < GRADIENT_TOLERANCE);

        // Weighted normal equations: (X' W X) delta = X'(y - mu), W = diag(mu).
        let mut xtwx = vec![vec![0.0; p]; p];
        for (i, row) in xs.iter().enumerate() {
            for a in 0..p {
                let wa = mu[i] * row[a];
                for b in a..p {
                    xtwx[a][b] += wa * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                xtwx[a][b] = xtwx[b][a];
            }
        }
        let delta = match linalg::solve(xtwx, grad) {
            Some(delta) => delta,
            None if at_tolerance => {
                converged = true;
                break;
            }
            None => return Err(PoissonError::RankDeficient),
        };

        // Newton direction with step halving keeps the trace monotone.
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate: Vec<f64> = beta.iter().zip(&delta).map(|(b, d)| b + step * d).collect();
            let candidate_eta = eta_of(&candidate);
            let candidate_ll = poisson_loglik(y, &candidate_eta);
            if candidate_ll >= loglik - 1e-12 {
                beta = candidate;
                eta = candidate_eta;
                loglik = candidate_ll;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            converged = at_tolerance;
            break;
        }
        loglik_trace.push(loglik);
        if at_tolerance {
            converged = true;
            break;
        }
    }

    if eta.iter().any(|e| e.abs() >= LINEAR_PREDICTOR_CAP) {
        return Err(PoissonError::Diverged);
    }

    // Back-transform to raw-scale coefficients.
    let mut beta0_raw = beta[0];
    let mut raw = Vec::with_capacity(k);
    for j in 0..k {
        let b = beta[j + 1] / sds[j];
        beta0_raw -= beta[j + 1] * means[j] / sds[j];
        raw.push(b);
    }

    let case_col = design.case_lag_col();
    let split = |vals: &[f64]| -> (Vec<f64>, Option<f64>) {
        match case_col {
            Some(c) => (
                vals.iter()
                    .enumerate()
                    .filter(|(j, _)| *j != c)
                    .map(|(_, v)| *v)
                    .collect(),
                Some(vals[c]),
            ),
            None => (vals.to_vec(), None),
        }
    };
    let (betas, case_lag_coef) = split(&raw);
    let (betas_std, case_lag_coef_std) = split(&beta[1..]);

    Ok(PoissonFit {
        variant,
        col_names: design.col_names().to_vec(),
        beta0: beta0_raw,
        betas,
        case_lag_coef,
        beta0_std: beta[0],
        betas_std,
        case_lag_coef_std,
        loglik,
        converged,
        iterations,
        loglik_trace,
    })
}

/// Expected counts `mu = exp(beta0 + x'beta)` for each design row, with the
/// linear predictor capped at [`LINEAR_PREDICTOR_CAP`].
pub fn predict(fit: &PoissonFit, design: &DesignMatrix) -> Result<Vec<f64>, PoissonError> {
    if design.col_names() != fit.col_names {
        return Err(PoissonError::ColumnMismatch {
            got: design.col_names().to_vec(),
            expected: fit.col_names.clone(),
        });
    }
    let case_col = design.case_lag_col();
    Ok((0..design.nrows())
        .map(|i| {
            let mut eta = fit.beta0;
            let mut slope_at = 0usize;
            for (j, x) in design.row(i).iter().enumerate() {
                if Some(j) == case_col {
                    eta += fit.case_lag_coef.unwrap_or(0.0) * x;
                } else {
                    eta += fit.betas[slope_at] * x;
                    slope_at += 1;
                }
            }
            eta.clamp(-LINEAR_PREDICTOR_CAP, LINEAR_PREDICTOR_CAP).exp()
        })
        .collect())
}
