//! Additive seasonal-trend decomposition using LOESS (STL).
//!
//! The inner loop follows the classic procedure: detrend, smooth each
//! cycle-subseries (extended one period at both ends), remove a low-pass
//! filtered version, then smooth the deseasonalized series for the trend.
//! Outer iterations downweight outliers with bisquare robustness weights.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum StlError {
    #[error("loess window {window} must be odd and >= {min}")]
    BadWindow { window: usize, min: usize },
    #[error("series of {len} points too short (need at least {min})")]
    SeriesTooShort { len: usize, min: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Smoothing parameters for [`stl_decompose`].
#[derive(Debug, Clone)]
pub struct LoessConfig {
    pub seasonal_window: usize,
    pub trend_window: usize,
    pub inner_iterations: usize,
    pub robust_iterations: usize,
    pub local_degree: usize,
}

impl LoessConfig {
    pub fn new(
        seasonal_window: usize,
        trend_window: usize,
        inner_iterations: usize,
        robust_iterations: usize,
        local_degree: usize,
    ) -> Result<Self, StlError> {
        if seasonal_window % 2 == 0 || seasonal_window < 7 {
            return Err(StlError::BadWindow {
                window: seasonal_window,
                min: 7,
            });
        }
        if trend_window % 2 == 0 {
            return Err(StlError::BadWindow {
                window: trend_window,
                min: 3,
            });
        }
        if inner_iterations < 1 {
            return Err(StlError::InvalidConfig(
                "inner_iterations must be >= 1".into(),
            ));
        }
        if local_degree > 1 {
            return Err(StlError::InvalidConfig(
                "local_degree must be 0 or 1".into(),
            ));
        }
        Ok(Self {
            seasonal_window,
            trend_window,
            inner_iterations,
            robust_iterations,
            local_degree,
        })
    }

    /// Defaults for monthly data: seasonal 13, trend 23, two inner passes,
    /// one robustness pass, locally linear fits.
    pub fn monthly_default() -> Self {
        Self {
            seasonal_window: 13,
            trend_window: 23,
            inner_iterations: 2,
            robust_iterations: 1,
            local_degree: 1,
        }
    }
}

/// Decomposition output; `trend + seasonal + remainder` reconstructs the
/// input exactly (the remainder is defined as the residual).
#[derive(Debug, Clone)]
pub struct StlComponents {
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub remainder: Vec<f64>,
    pub period: usize,
}

/// Locally weighted least-squares fit evaluated at `x_eval` over the point
/// window `[lo, hi]` (indices into `y`). Tricube distance weights times
/// optional robustness weights; degree 0 fits a weighted mean, degree 1 a
/// weighted line. Returns `None` when every point has zero weight.
fn local_fit(
    y: &[f64],
    weights: Option<&[f64]>,
    window: usize,
    degree: usize,
    x_eval: f64,
    lo: usize,
    hi: usize,
) -> Option<f64> {
    let span = hi - lo + 1;
    let mut h = (x_eval - lo as f64).max(hi as f64 - x_eval);
    if window > y.len() {
        h += (window - y.len()) as f64 / 2.0;
    }
    let h9 = 0.999 * h;
    let h1 = 0.001 * h;

    let mut w = vec![0.0; span];
    let mut total = 0.0;
    for (k, wk) in w.iter_mut().enumerate() {
        let j = lo + k;
        let r = (j as f64 - x_eval).abs();
        if r <= h9 {
            *wk = if r <= h1 {
                1.0
            } else {
                let u = r / h;
                (1.0 - u * u * u).powi(3)
            };
            if let Some(rw) = weights {
                *wk *= rw[j];
            }
            total += *wk;
        }
    }
    if total <= 0.0 {
        return None;
    }
    for wk in &mut w {
        *wk /= total;
    }

    if degree == 1 && h > 0.0 {
        // Reweight so the dot product below evaluates the weighted linear
        // fit at x_eval instead of the weighted mean.
        let x_bar: f64 = w
            .iter()
            .enumerate()
            .map(|(k, wk)| wk * (lo + k) as f64)
            .sum();
        let c: f64 = w
            .iter()
            .enumerate()
            .map(|(k, wk)| wk * ((lo + k) as f64 - x_bar).powi(2))
            .sum();
        if c.sqrt() > 0.001 * (y.len().max(2) - 1) as f64 {
            let b = (x_eval - x_bar) / c;
            for (k, wk) in w.iter_mut().enumerate() {
                *wk *= 1.0 + b * ((lo + k) as f64 - x_bar);
            }
        }
    }

    Some(w.iter().zip(&y[lo..=hi]).map(|(wk, yk)| wk * yk).sum())
}

fn window_bounds(t: usize, n: usize, window: usize) -> (usize, usize) {
    if window >= n {
        return (0, n - 1);
    }
    let half = window / 2;
    if t < half {
        (0, window - 1)
    } else if t + half >= n {
        (n - window, n - 1)
    } else {
        (t - half, t + half)
    }
}

/// Smooths a series with LOESS using the `window` nearest neighbors at each
/// point (truncated at the ends).
pub fn loess_smooth(
    y: &[f64],
    window: usize,
    degree: usize,
    weights: Option<&[f64]>,
) -> Result<Vec<f64>, StlError> {
    if window < 3 || window % 2 == 0 {
        return Err(StlError::BadWindow { window, min: 3 });
    }
    if y.len() < 2 {
        return Err(StlError::SeriesTooShort {
            len: y.len(),
            min: 2,
        });
    }
    if degree > 1 {
        return Err(StlError::InvalidConfig("degree must be 0 or 1".into()));
    }
    let n = y.len();
    Ok((0..n)
        .map(|t| {
            let (lo, hi) = window_bounds(t, n, window);
            local_fit(y, weights, window, degree, t as f64, lo, hi).unwrap_or(y[t])
        })
        .collect())
}

/// Centered moving average chain used as the STL low-pass filter:
/// MA(period) twice, then MA(3). Input of length `n + 2*period` shrinks to
/// exactly `n`.
fn low_pass(x: &[f64], period: usize) -> Vec<f64> {
    let a = moving_average(x, period);
    let b = moving_average(&a, period);
    moving_average(&b, 3)
}

fn moving_average(x: &[f64], len: usize) -> Vec<f64> {
    let out_len = x.len() + 1 - len;
    let mut out = Vec::with_capacity(out_len);
    let mut acc: f64 = x[..len].iter().sum();
    out.push(acc / len as f64);
    for i in 1..out_len {
        acc += x[i + len - 1] - x[i - 1];
        out.push(acc / len as f64);
    }
    out
}

/// Bisquare robustness weights with scale 6 * median(|remainder|).
fn robustness_weights(remainder: &[f64]) -> Vec<f64> {
    let mut abs: Vec<f64> = remainder.iter().map(|r| r.abs()).collect();
    abs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = abs.len();
    let median = if n % 2 == 0 {
        (abs[n / 2 - 1] + abs[n / 2]) / 2.0
    } else {
        abs[n / 2]
    };
    let scale = 6.0 * median;
    let c1 = 0.001 * scale;
    let c9 = 0.999 * scale;
    remainder
        .iter()
        .map(|r| {
            let r = r.abs();
            if r <= c1 {
                1.0
            } else if r <= c9 {
                let u = r / scale;
                (1.0 - u * u).powi(2)
            } else {
                0.0
            }
        })
        .collect()
}

/// Smooths each cycle-subseries and extends it one period before and after,
/// producing `n + 2*period` values.
fn smooth_cycle_subseries(
    detrended: &[f64],
    period: usize,
    window: usize,
    degree: usize,
    rw: Option<&[f64]>,
) -> Vec<f64> {
    let n = detrended.len();
    let mut out = vec![0.0; n + 2 * period];
    for phase in 0..period {
        let idx: Vec<usize> = (phase..n).step_by(period).collect();
        let sub: Vec<f64> = idx.iter().map(|&i| detrended[i]).collect();
        let sub_w: Option<Vec<f64>> = rw.map(|w| idx.iter().map(|&i| w[i]).collect());
        let k = sub.len();

        let fit_at = |x: f64, lo: usize, hi: usize| {
            local_fit(&sub, sub_w.as_deref(), window, degree, x, lo, hi)
        };

        // Interior points, then one extrapolated value at each end.
        let mut smoothed = Vec::with_capacity(k + 2);
        let head = fit_at(-1.0, 0, window.min(k) - 1).unwrap_or(sub[0]);
        smoothed.push(head);
        for t in 0..k {
            let (lo, hi) = window_bounds(t, k, window);
            smoothed.push(fit_at(t as f64, lo, hi).unwrap_or(sub[t]));
        }
        let tail_lo = k.saturating_sub(window);
        let tail = fit_at(k as f64, tail_lo, k - 1).unwrap_or(sub[k - 1]);
        smoothed.push(tail);

        for (m, value) in smoothed.into_iter().enumerate() {
            out[m * period + phase] = value;
        }
    }
    out
}

/// Decomposes `y` into trend, seasonal, and remainder components.
pub fn stl_decompose(
    y: &[f64],
    period: usize,
    config: &LoessConfig,
) -> Result<StlComponents, StlError> {
    if period < 2 {
        return Err(StlError::InvalidConfig("period must be >= 2".into()));
    }
    if y.len() < 2 * period {
        return Err(StlError::SeriesTooShort {
            len: y.len(),
            min: 2 * period,
        });
    }
    if config.trend_window <= period {
        return Err(StlError::BadWindow {
            window: config.trend_window,
            min: period + 1,
        });
    }
    let n = y.len();
    let low_pass_window = period | 1; // next odd
    let degree = config.local_degree;

    let mut trend = vec![0.0; n];
    let mut seasonal = vec![0.0; n];
    let mut rw: Option<Vec<f64>> = None;

    for outer in 0..=config.robust_iterations {
        for _ in 0..config.inner_iterations {
            let detrended: Vec<f64> = y.iter().zip(&trend).map(|(a, b)| a - b).collect();
            let extended = smooth_cycle_subseries(
                &detrended,
                period,
                config.seasonal_window,
                degree,
                rw.as_deref(),
            );
            let filtered =
                loess_smooth(&low_pass(&extended, period), low_pass_window, degree, None)?;
            for t in 0..n {
                seasonal[t] = extended[period + t] - filtered[t];
            }
            let deseasonalized: Vec<f64> = y.iter().zip(&seasonal).map(|(a, b)| a - b).collect();
            trend = loess_smooth(&deseasonalized, config.trend_window, degree, rw.as_deref())?;
        }
        if outer < config.robust_iterations {
            let remainder: Vec<f64> = (0..n).map(|t| y[t] - trend[t] - seasonal[t]).collect();
            rw = Some(robustness_weights(&remainder));
        }
    }

    let remainder: Vec<f64> = (0..n).map(|t| y[t] - trend[t] - seasonal[t]).collect();
    Ok(StlComponents {
        trend,
        seasonal,
        remainder,
        period,
    })
}
