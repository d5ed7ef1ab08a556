//! State-space form and Kalman filtering for the (expanded) ARMA part.
//!
//! Companion-form representation: `x[t+1] = T x[t] + R e[t]`, `z[t] = x[t][0]`
//! with `T` holding the expanded AR coefficients in its first column and ones
//! on the superdiagonal, and `R = [1, theta_1, ..]`. The filter runs with unit
//! innovation variance; sigma^2 is profiled out by the caller.

use super::SarimaxError;

const MAX_DOUBLING_ITERATIONS: usize = 80;

/// Companion state-space matrices for an ARMA(p*, q*) with unit variance.
pub(crate) struct StateSpace {
    dim: usize,
    ar: Vec<f64>,    // padded to dim
    noise: Vec<f64>, // [1, theta..], padded to dim
}

impl StateSpace {
    pub(crate) fn new(ar: &[f64], ma: &[f64]) -> Self {
        let dim = ar.len().max(ma.len() + 1).max(1);
        let mut ar_padded = ar.to_vec();
        ar_padded.resize(dim, 0.0);
        let mut noise = vec![1.0];
        noise.extend_from_slice(ma);
        noise.resize(dim, 0.0);
        Self {
            dim,
            ar: ar_padded,
            noise,
        }
    }

    pub(crate) fn dim(&self) -> usize {
        self.dim
    }

    /// `x_pred = T x`, exploiting the companion structure.
    fn predict_state(&self, x: &[f64], out: &mut [f64]) {
        let r = self.dim;
        for i in 0..r {
            out[i] = self.ar[i] * x[0] + if i + 1 < r { x[i + 1] } else { 0.0 };
        }
    }

    /// Dense transition matrix (needed only for the Lyapunov doubling).
    fn transition_matrix(&self) -> Vec<f64> {
        let r = self.dim;
        let mut t = vec![0.0; r * r];
        for i in 0..r {
            t[i * r] = self.ar[i];
            if i + 1 < r {
                t[i * r + i + 1] = 1.0;
            }
        }
        t
    }

    /// `P_pred = T P T' + R R'` in O(dim^2) using the companion structure.
    fn predict_cov(&self, p: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        let r = self.dim;
        // scratch = T P
        for i in 0..r {
            for j in 0..r {
                scratch[i * r + j] =
                    self.ar[i] * p[j] + if i + 1 < r { p[(i + 1) * r + j] } else { 0.0 };
            }
        }
        // out = scratch T' + noise noise'
        for i in 0..r {
            for j in 0..r {
                out[i * r + j] = self.noise[i] * self.noise[j]
                    + self.ar[j] * scratch[i * r]
                    + if j + 1 < r {
                        scratch[i * r + j + 1]
                    } else {
                        0.0
                    };
            }
        }
    }

    /// Stationary state covariance: solves `P = T P T' + R R'` by doubling
    /// (quadratic convergence; each step squares the transition matrix).
    pub(crate) fn stationary_cov(&self) -> Result<Vec<f64>, SarimaxError> {
        let r = self.dim;
        let mut s: Vec<f64> = (0..r * r)
            .map(|k| self.noise[k / r] * self.noise[k % r])
            .collect();
        let mut m = self.transition_matrix();
        let mut next_m = vec![0.0; r * r];
        let mut tmp = vec![0.0; r * r];
        let mut msm = vec![0.0; r * r];

        for _ in 0..MAX_DOUBLING_ITERATIONS {
            // msm = (M S) M'
            matmul(&m, &s, &mut tmp, r);
            matmul_transpose_b(&tmp, &m, &mut msm, r);
            let mut delta: f64 = 0.0;
            let mut scale: f64 = 1.0;
            for k in 0..r * r {
                s[k] += msm[k];
                delta = delta.max(msm[k].abs());
                scale = scale.max(s[k].abs());
            }
            if !scale.is_finite() || scale > 1e14 {
                return Err(SarimaxError::NonStationaryParams);
            }
            if delta <= 1e-12 * scale {
                return Ok(s);
            }
            // M <- M^2
            matmul(&m, &m, &mut next_m, r);
            std::mem::swap(&mut m, &mut next_m);
        }
        Err(SarimaxError::NonStationaryParams)
    }
}

fn matmul(a: &[f64], b: &[f64], out: &mut [f64], r: usize) {
    for i in 0..r {
        for j in 0..r {
            out[i * r + j] = 0.0;
        }
        for k in 0..r {
            let aik = a[i * r + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..r {
                out[i * r + j] += aik * b[k * r + j];
            }
        }
    }
}

fn matmul_transpose_b(a: &[f64], b: &[f64], out: &mut [f64], r: usize) {
    for i in 0..r {
        for j in 0..r {
            let mut acc = 0.0;
            for k in 0..r {
                acc += a[i * r + k] * b[j * r + k];
            }
            out[i * r + j] = acc;
        }
    }
}

/// One full filter pass over several series sharing the same state space.
///
/// The gain sequence depends only on the model, so the case series and each
/// exogenous column are filtered simultaneously; their innovations are what
/// the profile-likelihood regression consumes.
pub(crate) struct FilterOutput {
    /// `innovations[series][t]`.
    pub(crate) innovations: Vec<Vec<f64>>,
    /// Normalized innovation variances `f_t` (unit sigma^2).
    pub(crate) gains_f: Vec<f64>,
    pub(crate) sum_ln_f: f64,
    /// Post-update state per series after the final observation.
    pub(crate) terminal_states: Vec<Vec<f64>>,
}

pub(crate) fn filter_multi(
    ss: &StateSpace,
    series: &[&[f64]],
) -> Result<FilterOutput, SarimaxError> {
    let r = ss.dim();
    let n = series[0].len();
    let m = series.len();

    let mut p = ss.stationary_cov()?;
    let mut p_pred = vec![0.0; r * r];
    let mut scratch = vec![0.0; r * r];
    let mut gain = vec![0.0; r];
    let mut states = vec![vec![0.0; r]; m];
    let mut x_pred = vec![0.0; r];

    let mut innovations = vec![Vec::with_capacity(n); m];
    let mut gains_f = Vec::with_capacity(n);
    let mut sum_ln_f = 0.0;

    for t in 0..n {
        ss.predict_cov(&p, &mut p_pred, &mut scratch);
        let f = p_pred[0];
        if !f.is_finite() || f <= 0.0 {
            return Err(SarimaxError::FilterDivergence);
        }
        for i in 0..r {
            gain[i] = p_pred[i * r] / f;
        }

        for (s, state) in states.iter_mut().enumerate() {
            ss.predict_state(state, &mut x_pred);
            let v = series[s][t] - x_pred[0];
            for i in 0..r {
                state[i] = x_pred[i] + gain[i] * v;
            }
            innovations[s].push(v);
        }

        sum_ln_f += f.ln();
        gains_f.push(f);

        // P = P_pred - K P_pred[0, :]
        for i in 0..r {
            for j in 0..r {
                p[i * r + j] = p_pred[i * r + j] - gain[i] * p_pred[j];
            }
        }
    }

    Ok(FilterOutput {
        innovations,
        gains_f,
        sum_ln_f,
        terminal_states: states,
    })
}

/// Iterates the state prediction `horizon` steps past the end of the filtered
/// sample, returning the observable component at each step.
pub(crate) fn predict_mean(ss: &StateSpace, terminal_state: &[f64], horizon: usize) -> Vec<f64> {
    let r = ss.dim();
    let mut state = terminal_state.to_vec();
    let mut next = vec![0.0; r];
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        ss.predict_state(&state, &mut next);
        std::mem::swap(&mut state, &mut next);
        out.push(state[0]);
    }
    out
}
