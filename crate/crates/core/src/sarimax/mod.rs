//! Seasonal ARIMA with exogenous regressors.
//!
//! The (p,d,q)(P,D,Q,s) model is fitted by exact Gaussian maximum
//! likelihood: differencing is applied explicitly, the multiplicative
//! seasonal ARMA part is evaluated in state-space form by a Kalman filter
//! with stationary initialization, and the exogenous coefficients and
//! innovation variance are profiled out of the likelihood, leaving a
//! low-dimensional simplex search over transformed ARMA coefficients.

mod kalman;
mod nelder_mead;
mod transform;

use rayon::prelude::*;
use thiserror::Error;

use crate::diagnostics;
use crate::evaluation::{metrics, MetricTriple};
use kalman::{filter_multi, predict_mean, StateSpace};
use nelder_mead::NelderMead;

#[derive(Debug, Error)]
pub enum SarimaxError {
    #[error("series of {len} points too short (need at least {min})")]
    SeriesTooShort { len: usize, min: usize },
    #[error("history of {len} points cannot seed integration (need at least {need})")]
    InsufficientHistory { len: usize, need: usize },
    #[error("parameters outside the stationarity/invertibility region")]
    NonStationaryParams,
    #[error("Kalman filter produced a non-finite innovation variance")]
    FilterDivergence,
    #[error("no parameter start produced a finite likelihood")]
    OptimizationFailed,
    #[error("exogenous column has {got} rows, expected {expected}")]
    ExogLengthMismatch { got: usize, expected: usize },
    #[error("future exogenous rows ({got}) do not match the horizon ({horizon})")]
    HorizonMismatch { got: usize, horizon: usize },
    #[error("exogenous columns are collinear after differencing")]
    ExogCollinear,
    #[error("invalid order: {0}")]
    InvalidOrder(String),
    #[error("every candidate order failed to fit")]
    AllCandidatesFailed,
}

/// Model order `(p,d,q)(P,D,Q,s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SarimaxOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub seasonal_p: usize,
    pub seasonal_d: usize,
    pub seasonal_q: usize,
    pub s: usize,
}

impl SarimaxOrder {
    pub fn new(
        p: usize,
        d: usize,
        q: usize,
        seasonal_p: usize,
        seasonal_d: usize,
        seasonal_q: usize,
        s: usize,
    ) -> Result<Self, SarimaxError> {
        if s < 2 {
            return Err(SarimaxError::InvalidOrder(format!(
                "seasonal period {s} < 2"
            )));
        }
        if d + seasonal_d > 2 {
            return Err(SarimaxError::InvalidOrder(format!(
                "d + D = {} exceeds 2",
                d + seasonal_d
            )));
        }
        Ok(Self {
            p,
            d,
            q,
            seasonal_p,
            seasonal_d,
            seasonal_q,
            s,
        })
    }

    /// Number of ARMA coefficients (p + q + P + Q).
    pub fn arma_params(&self) -> usize {
        self.p + self.q + self.seasonal_p + self.seasonal_q
    }

    /// Total rows consumed by differencing.
    pub fn differencing_depth(&self) -> usize {
        self.d + self.seasonal_d * self.s
    }

    /// The standard candidate grid: p, q in {0,1,2}, d = 1, P = 1,
    /// D, Q in {0,1}, s = 12.
    pub fn standard_grid() -> Vec<SarimaxOrder> {
        let mut grid = Vec::with_capacity(36);
        for p in 0..=2 {
            for q in 0..=2 {
                for seasonal_d in 0..=1 {
                    for seasonal_q in 0..=1 {
                        grid.push(
                            SarimaxOrder::new(p, 1, q, 1, seasonal_d, seasonal_q, 12).unwrap(),
                        );
                    }
                }
            }
        }
        grid
    }
}

impl std::fmt::Display for SarimaxOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "({},{},{})({},{},{},{})",
            self.p, self.d, self.q, self.seasonal_p, self.seasonal_d, self.seasonal_q, self.s
        )
    }
}

/// Coefficients of a fitted (or hypothesized) model.
#[derive(Debug, Clone, PartialEq)]
pub struct SarimaxParams {
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub seasonal_ar: Vec<f64>,
    pub seasonal_ma: Vec<f64>,
    pub beta: Vec<f64>,
    pub sigma2: f64,
}

/// How exogenous regressors enter the differenced-scale model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExogMode {
    /// Difference the regressors exactly like the target
    /// ("regression with SARIMA errors").
    #[default]
    DifferenceWithTarget,
    /// Use the raw regressor rows aligned to the differenced target.
    Untransformed,
}

#[derive(Debug, Clone, Default)]
pub struct FitOptions {
    pub exog_mode: ExogMode,
}

/// A maximum-likelihood fit.
#[derive(Debug, Clone)]
pub struct SarimaxFit {
    pub order: SarimaxOrder,
    pub params: SarimaxParams,
    /// Gaussian log-likelihood on the differenced scale.
    pub loglik: f64,
    /// Differenced sample size.
    pub n_obs: usize,
    /// Standardized one-step prediction errors.
    pub residuals: Vec<f64>,
    exog_mode: ExogMode,
    exog_means: Vec<f64>,
    /// Trailing raw exogenous rows needed to difference future regressors.
    exog_tail: Vec<Vec<f64>>,
    terminal_state: Vec<f64>,
}

impl SarimaxFit {
    /// Parameter count for information criteria: ARMA coefficients,
    /// exogenous coefficients, and the innovation variance.
    pub fn n_params(&self) -> usize {
        self.order.arma_params() + self.params.beta.len() + 1
    }
}

/// Point forecasts on the case scale.
#[derive(Debug, Clone)]
pub struct SarimaxForecast {
    /// Raw re-integrated values (may be negative).
    pub raw: Vec<f64>,
}

impl SarimaxForecast {
    /// Values clamped at zero, the reporting convention for counts.
    pub fn clamped(&self) -> Vec<f64> {
        self.raw.iter().map(|v| v.max(0.0)).collect()
    }
}

/// Applies `(1-B)^d (1-B^s)^D`; output is shorter by `d + D*s`.
pub fn difference(
    y: &[f64],
    d: usize,
    seasonal_d: usize,
    s: usize,
) -> Result<Vec<f64>, SarimaxError> {
    let poly = transform::differencing_poly(d, seasonal_d, s);
    let deg = poly.len() - 1;
    if y.len() <= deg {
        return Err(SarimaxError::SeriesTooShort {
            len: y.len(),
            min: deg + 1,
        });
    }
    Ok((deg..y.len())
        .map(|t| poly.iter().enumerate().map(|(j, c)| c * y[t - j]).sum())
        .collect())
}

/// Inverts [`difference`]: reconstructs level values for a differenced
/// forecast, seeded by the trailing raw history.
pub fn integrate(
    forecast_diff: &[f64],
    history: &[f64],
    d: usize,
    seasonal_d: usize,
    s: usize,
) -> Result<Vec<f64>, SarimaxError> {
    let poly = transform::differencing_poly(d, seasonal_d, s);
    let deg = poly.len() - 1;
    if history.len() < deg {
        return Err(SarimaxError::InsufficientHistory {
            len: history.len(),
            need: deg,
        });
    }
    let mut levels: Vec<f64> = history[history.len() - deg..].to_vec();
    let mut out = Vec::with_capacity(forecast_diff.len());
    for &w in forecast_diff {
        let mut value = w;
        for (j, &c) in poly.iter().enumerate().skip(1) {
            value -= c * levels[levels.len() - j];
        }
        levels.push(value);
        out.push(value);
    }
    Ok(out)
}

fn expand_coeffs(order: &SarimaxOrder, params: &SarimaxParams) -> (Vec<f64>, Vec<f64>) {
    (
        transform::expand_ar(&params.ar, &params.seasonal_ar, order.s),
        transform::expand_ma(&params.ma, &params.seasonal_ma, order.s),
    )
}

/// Exact Gaussian log-likelihood of the differenced series `z` (with
/// exogenous effect `beta' x_t` subtracted from the observation) under the
/// given coefficients. `z` and the exogenous columns are on the differenced
/// scale already.
pub fn kalman_loglik(
    order: &SarimaxOrder,
    params: &SarimaxParams,
    z: &[f64],
    exog: &[Vec<f64>],
) -> Result<f64, SarimaxError> {
    if params.sigma2 <= 0.0 || !params.sigma2.is_finite() {
        return Err(SarimaxError::NonStationaryParams);
    }
    for col in exog {
        if col.len() != z.len() {
            return Err(SarimaxError::ExogLengthMismatch {
                got: col.len(),
                expected: z.len(),
            });
        }
    }
    if !transform::is_stationary(&params.ar)
        || !transform::is_stationary(&params.seasonal_ar)
        || !transform::is_invertible(&params.ma)
        || !transform::is_invertible(&params.seasonal_ma)
    {
        return Err(SarimaxError::NonStationaryParams);
    }

    let adjusted: Vec<f64> = (0..z.len())
        .map(|t| {
            z[t] - params
                .beta
                .iter()
                .zip(exog)
                .map(|(b, col)| b * col[t])
                .sum::<f64>()
        })
        .collect();

    let (phi, theta) = expand_coeffs(order, params);
    let ss = StateSpace::new(&phi, &theta);
    let out = filter_multi(&ss, &[&adjusted])?;
    let n = z.len() as f64;
    let ssq: f64 = out.innovations[0]
        .iter()
        .zip(&out.gains_f)
        .map(|(v, f)| v * v / f)
        .sum();
    Ok(-0.5 * n * (2.0 * std::f64::consts::PI).ln()
        - 0.5 * (n * params.sigma2.ln() + out.sum_ln_f)
        - 0.5 * ssq / params.sigma2)
}

struct Concentrated {
    loglik: f64,
    beta: Vec<f64>,
    sigma2: f64,
    residuals: Vec<f64>,
    terminal_state: Vec<f64>,
}

/// Profile likelihood for fixed ARMA coefficients: beta by innovation-space
/// weighted least squares, sigma^2 in closed form.
fn concentrated_fit(
    phi: &[f64],
    theta: &[f64],
    w: &[f64],
    exog: &[Vec<f64>],
) -> Result<Concentrated, SarimaxError> {
    let ss = StateSpace::new(phi, theta);
    let mut series: Vec<&[f64]> = Vec::with_capacity(1 + exog.len());
    series.push(w);
    for col in exog {
        series.push(col);
    }
    let out = filter_multi(&ss, &series)?;
    let n = w.len();
    let k = exog.len();

    let beta = if k == 0 {
        Vec::new()
    } else {
        let mut a = vec![vec![0.0; k]; k];
        let mut b = vec![0.0; k];
        for t in 0..n {
            let f = out.gains_f[t];
            for i in 0..k {
                let vi = out.innovations[i + 1][t];
                b[i] += vi * out.innovations[0][t] / f;
                for j in 0..=i {
                    a[i][j] += vi * out.innovations[j + 1][t] / f;
                }
            }
        }
        for i in 0..k {
            for j in i + 1..k {
                a[i][j] = a[j][i];
            }
        }
        crate::linalg::solve(a, b).ok_or(SarimaxError::ExogCollinear)?
    };

    let mut rss = 0.0;
    let mut residuals = Vec::with_capacity(n);
    for t in 0..n {
        let e = out.innovations[0][t]
            - beta
                .iter()
                .enumerate()
                .map(|(j, bj)| bj * out.innovations[j + 1][t])
                .sum::<f64>();
        rss += e * e / out.gains_f[t];
        residuals.push(e);
    }
    let sigma2 = rss / n as f64;
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(SarimaxError::OptimizationFailed);
    }
    for (t, r) in residuals.iter_mut().enumerate() {
        *r /= (sigma2 * out.gains_f[t]).sqrt();
    }

    let loglik = -0.5 * n as f64 * ((2.0 * std::f64::consts::PI).ln() + 1.0 + sigma2.ln())
        - 0.5 * out.sum_ln_f;

    let mut terminal_state = out.terminal_states[0].clone();
    for (j, bj) in beta.iter().enumerate() {
        for (ts, xs) in terminal_state.iter_mut().zip(&out.terminal_states[j + 1]) {
            *ts -= bj * xs;
        }
    }

    Ok(Concentrated {
        loglik,
        beta,
        sigma2,
        residuals,
        terminal_state,
    })
}

/// Splits the unconstrained optimizer vector into the four coefficient
/// blocks, each mapped into its stationarity/invertibility region.
fn decode(order: &SarimaxOrder, t: &[f64]) -> SarimaxParams {
    let mut at = 0usize;
    let mut take = |len: usize| {
        let part = &t[at..at + len];
        at += len;
        transform::reflection_to_ar(&transform::unconstrained_to_reflection(part))
    };
    let ar = take(order.p);
    let ma_raw = take(order.q);
    let seasonal_ar = take(order.seasonal_p);
    let seasonal_ma_raw = take(order.seasonal_q);
    SarimaxParams {
        ar,
        ma: ma_raw.iter().map(|v| -v).collect(),
        seasonal_ar,
        seasonal_ma: seasonal_ma_raw.iter().map(|v| -v).collect(),
        beta: Vec::new(),
        sigma2: 1.0,
    }
}

fn prepare_exog(
    exog: &[Vec<f64>],
    order: &SarimaxOrder,
    mode: ExogMode,
    n_raw: usize,
) -> Result<Vec<Vec<f64>>, SarimaxError> {
    let deg = order.differencing_depth();
    exog.iter()
        .map(|col| {
            if col.len() != n_raw {
                return Err(SarimaxError::ExogLengthMismatch {
                    got: col.len(),
                    expected: n_raw,
                });
            }
            match mode {
                ExogMode::DifferenceWithTarget => {
                    difference(col, order.d, order.seasonal_d, order.s)
                }
                ExogMode::Untransformed => Ok(col[deg..].to_vec()),
            }
        })
        .collect()
}

/// Fits by maximum likelihood with the default exogenous handling.
pub fn fit_mle(
    y: &[f64],
    exog: &[Vec<f64>],
    order: &SarimaxOrder,
) -> Result<SarimaxFit, SarimaxError> {
    fit_mle_with(y, exog, order, &FitOptions::default())
}

pub fn fit_mle_with(
    y: &[f64],
    exog: &[Vec<f64>],
    order: &SarimaxOrder,
    options: &FitOptions,
) -> Result<SarimaxFit, SarimaxError> {
    let w = difference(y, order.d, order.seasonal_d, order.s)?;
    let mut xw = prepare_exog(exog, order, options.exog_mode, y.len())?;
    let n = w.len();
    let n_params = order.arma_params() + exog.len() + 1;
    if n < 3 * n_params {
        return Err(SarimaxError::SeriesTooShort {
            len: n,
            min: 3 * n_params,
        });
    }

    // Demean the (differenced) regressors so the optimum is invariant to
    // column centering; there is no intercept on the differenced scale.
    let exog_means: Vec<f64> = xw
        .iter_mut()
        .map(|col| {
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            for v in col.iter_mut() {
                *v -= mean;
            }
            mean
        })
        .collect();

    let dims = order.arma_params();
    let objective = |t: &[f64]| -> f64 {
        let params = decode(order, t);
        let (phi, theta) = expand_coeffs(order, &params);
        match concentrated_fit(&phi, &theta, &w, &xw) {
            Ok(c) => -c.loglik,
            Err(_) => f64::INFINITY,
        }
    };

    // Deterministic starts: all coefficients 0, then +-0.3 (as reflection
    // coefficients, mapped back to the unconstrained scale).
    let spread = transform::reflection_to_unconstrained(&[0.3])[0];
    let starts = [0.0, spread, -spread];
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s0 in starts {
        let start = vec![s0; dims];
        let (point, value) = NelderMead::default().minimize(&start, objective);
        if value.is_finite() && best.as_ref().map_or(true, |(_, v)| value < *v) {
            best = Some((point, value));
        }
        if dims == 0 {
            break;
        }
    }
    let (best_point, _) = best.ok_or(SarimaxError::OptimizationFailed)?;

    let mut params = decode(order, &best_point);
    let (phi, theta) = expand_coeffs(order, &params);
    let c = concentrated_fit(&phi, &theta, &w, &xw)?;
    params.beta = c.beta;
    params.sigma2 = c.sigma2;

    let deg = order.differencing_depth();
    let exog_tail: Vec<Vec<f64>> = exog
        .iter()
        .map(|col| col[col.len() - deg.min(col.len())..].to_vec())
        .collect();

    Ok(SarimaxFit {
        order: *order,
        params,
        loglik: c.loglik,
        n_obs: n,
        residuals: c.residuals,
        exog_mode: options.exog_mode,
        exog_means,
        exog_tail,
        terminal_state: c.terminal_state,
    })
}

/// Iterated state-space prediction plus the exogenous effect, re-integrated
/// to the case scale. `history` supplies the integration seed (the raw
/// training series).
pub fn forecast(
    fit: &SarimaxFit,
    horizon: usize,
    exog_future: &[Vec<f64>],
    history: &[f64],
) -> Result<SarimaxForecast, SarimaxError> {
    if exog_future.len() != fit.params.beta.len() {
        return Err(SarimaxError::ExogLengthMismatch {
            got: exog_future.len(),
            expected: fit.params.beta.len(),
        });
    }
    for col in exog_future {
        if col.len() != horizon {
            return Err(SarimaxError::HorizonMismatch {
                got: col.len(),
                horizon,
            });
        }
    }

    let order = &fit.order;
    let xw_future: Vec<Vec<f64>> = match fit.exog_mode {
        ExogMode::DifferenceWithTarget => exog_future
            .iter()
            .zip(&fit.exog_tail)
            .map(|(col, tail)| {
                let mut joined = tail.clone();
                joined.extend_from_slice(col);
                difference(&joined, order.d, order.seasonal_d, order.s)
                    .map(|diffed| diffed[diffed.len() - horizon..].to_vec())
            })
            .collect::<Result<_, _>>()?,
        ExogMode::Untransformed => exog_future.to_vec(),
    };

    let (phi, theta) = expand_coeffs(order, &fit.params);
    let ss = StateSpace::new(&phi, &theta);
    let mut diff_forecast = predict_mean(&ss, &fit.terminal_state, horizon);
    for (h, value) in diff_forecast.iter_mut().enumerate() {
        for (j, beta) in fit.params.beta.iter().enumerate() {
            *value += beta * (xw_future[j][h] - fit.exog_means[j]);
        }
    }

    let raw = integrate(&diff_forecast, history, order.d, order.seasonal_d, order.s)?;
    Ok(SarimaxForecast { raw })
}

/// One candidate evaluated by [`grid_search`].
#[derive(Debug, Clone)]
pub struct GridEntry {
    pub order: SarimaxOrder,
    pub fit: SarimaxFit,
    /// Clamped test-window forecast.
    pub forecast: Vec<f64>,
    pub metrics: MetricTriple,
    pub aic: f64,
    pub bic: f64,
    pub ljung_box_p: Option<f64>,
}

#[derive(Debug)]
pub struct GridSearchResult {
    /// Successful candidates ranked by test RMSE (ascending).
    pub ranked: Vec<GridEntry>,
    /// Candidates that failed to fit, with the reason.
    pub failed: Vec<(SarimaxOrder, String)>,
}

impl GridSearchResult {
    pub fn best(&self) -> &GridEntry {
        &self.ranked[0]
    }
}

/// Fits every candidate on the training window, forecasts the test window,
/// and ranks by test RMSE. Individual failures are recorded, never fatal.
pub fn grid_search(
    train_y: &[f64],
    test_y: &[f64],
    exog_train: &[Vec<f64>],
    exog_test: &[Vec<f64>],
    grid: &[SarimaxOrder],
) -> Result<GridSearchResult, SarimaxError> {
    if grid.is_empty() {
        return Err(SarimaxError::AllCandidatesFailed);
    }
    let horizon = test_y.len();

    let outcomes: Vec<(SarimaxOrder, Result<GridEntry, String>)> = grid
        .par_iter()
        .map(|order| {
            let entry = evaluate_candidate(order, train_y, test_y, exog_train, exog_test, horizon);
            (*order, entry)
        })
        .collect();

    let mut ranked = Vec::new();
    let mut failed = Vec::new();
    for (order, outcome) in outcomes {
        match outcome {
            Ok(entry) => ranked.push(entry),
            Err(reason) => failed.push((order, reason)),
        }
    }
    if ranked.is_empty() {
        return Err(SarimaxError::AllCandidatesFailed);
    }
    ranked.sort_by(|a, b| {
        a.metrics
            .rmse
            .partial_cmp(&b.metrics.rmse)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| format!("{}", a.order).cmp(&format!("{}", b.order)))
    });
    Ok(GridSearchResult { ranked, failed })
}

fn evaluate_candidate(
    order: &SarimaxOrder,
    train_y: &[f64],
    test_y: &[f64],
    exog_train: &[Vec<f64>],
    exog_test: &[Vec<f64>],
    horizon: usize,
) -> Result<GridEntry, String> {
    let fit = fit_mle(train_y, exog_train, order).map_err(|e| e.to_string())?;
    let prediction = forecast(&fit, horizon, exog_test, train_y).map_err(|e| e.to_string())?;
    let clamped = prediction.clamped();
    let test_metrics = metrics(test_y, &clamped).map_err(|e| e.to_string())?;
    let (aic, bic) = diagnostics::aic_bic(fit.loglik, fit.n_params(), fit.n_obs);
    let ljung_box_p = diagnostics::ljung_box(&fit.residuals, 12, order.arma_params())
        .ok()
        .map(|r| r.p);
    Ok(GridEntry {
        order: *order,
        fit,
        forecast: clamped,
        metrics: test_metrics,
        aic,
        bic,
        ljung_box_p,
    })
}
