//! Shared model diagnostics: autocorrelation and partial autocorrelation,
//! the Ljung-Box portmanteau test, and information criteria.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("series is constant; statistic undefined")]
    ConstantSeries,
    #[error("series of {len} points too short for max lag {max_lag}")]
    TooShort { len: usize, max_lag: usize },
    #[error("Durbin-Levinson recursion became singular at lag {lag}")]
    NumericalSingularity { lag: usize },
}

/// Sample autocorrelations at lags `0..=max_lag` (biased 1/n denominator).
#[derive(Debug, Clone)]
pub struct AcfResult {
    pub values: Vec<f64>,
    pub n: usize,
}

/// Ljung-Box statistic with its chi-square p-value.
#[derive(Debug, Clone, Copy)]
pub struct LjungBoxResult {
    pub q: f64,
    pub h: usize,
    pub dof: usize,
    pub p: f64,
}

pub fn acf(y: &[f64], max_lag: usize) -> Result<AcfResult, DiagnosticsError> {
    let n = y.len();
    if n <= max_lag + 1 {
        return Err(DiagnosticsError::TooShort { len: n, max_lag });
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let denom: f64 = centered.iter().map(|v| v * v).sum();
    if denom == 0.0 {
        return Err(DiagnosticsError::ConstantSeries);
    }
    let values = (0..=max_lag)
        .map(|k| {
            centered[k..]
                .iter()
                .zip(&centered)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / denom
        })
        .collect();
    Ok(AcfResult { values, n })
}

/// Partial autocorrelations at lags `1..=max_lag` via the Durbin-Levinson
/// recursion on the sample ACF.
pub fn pacf(y: &[f64], max_lag: usize) -> Result<Vec<f64>, DiagnosticsError> {
    let rho = acf(y, max_lag)?.values;
    pacf_from_acf(&rho)
}

/// Durbin-Levinson on a given autocorrelation sequence (`rho[0] == 1`).
pub fn pacf_from_acf(rho: &[f64]) -> Result<Vec<f64>, DiagnosticsError> {
    let max_lag = rho.len() - 1;
    let mut out = Vec::with_capacity(max_lag);
    let mut phi_prev: Vec<f64> = Vec::new();
    for k in 1..=max_lag {
        let phi_kk = if k == 1 {
            rho[1]
        } else {
            let num = rho[k]
                - phi_prev
                    .iter()
                    .enumerate()
                    .map(|(j, p)| p * rho[k - 1 - j])
                    .sum::<f64>();
            let den = 1.0
                - phi_prev
                    .iter()
                    .enumerate()
                    .map(|(j, p)| p * rho[j + 1])
                    .sum::<f64>();
            if den.abs() < 1e-12 {
                return Err(DiagnosticsError::NumericalSingularity { lag: k });
            }
            num / den
        };
        let mut phi_k = Vec::with_capacity(k);
        for j in 0..k - 1 {
            phi_k.push(phi_prev[j] - phi_kk * phi_prev[k - 2 - j]);
        }
        phi_k.push(phi_kk);
        out.push(phi_kk);
        phi_prev = phi_k;
    }
    Ok(out)
}

/// Ljung-Box portmanteau test of residual autocorrelation up to lag `h`.
///
/// Degrees of freedom are `h` minus the fitted parameter count, floored at 1.
pub fn ljung_box(
    residuals: &[f64],
    h: usize,
    fitted_params: usize,
) -> Result<LjungBoxResult, DiagnosticsError> {
    let n = residuals.len();
    if n <= h + 1 {
        return Err(DiagnosticsError::TooShort { len: n, max_lag: h });
    }
    let rho = acf(residuals, h)?.values;
    let nf = n as f64;
    let q = nf
        * (nf + 2.0)
        * (1..=h)
            .map(|k| rho[k] * rho[k] / (nf - k as f64))
            .sum::<f64>();
    let dof = (h.saturating_sub(fitted_params)).max(1);
    Ok(LjungBoxResult {
        q,
        h,
        dof,
        p: chi_square_sf(q, dof as f64),
    })
}

/// Akaike and Bayesian information criteria.
pub fn aic_bic(loglik: f64, k: usize, n: usize) -> (f64, f64) {
    let aic = 2.0 * k as f64 - 2.0 * loglik;
    let bic = k as f64 * (n as f64).ln() - 2.0 * loglik;
    (aic, bic)
}

/// Chi-square survival function `P(X > x)` with `dof` degrees of freedom,
/// i.e. the regularized upper incomplete gamma `Q(dof/2, x/2)`.
pub fn chi_square_sf(x: f64, dof: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    regularized_gamma_q(dof / 2.0, x / 2.0)
}

/// Regularized upper incomplete gamma Q(a, x): series expansion below the
/// crossover x = a + 1, Lentz continued fraction above it.
pub fn regularized_gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_series_p(a, x)
    } else {
        gamma_cf_q(a, x)
    }
}

fn gamma_series_p(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    for n in 1..500 {
        term *= x / (a + n as f64);
        sum += term;
        if term.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * (a * x.ln() - x - ln_gamma(a)).exp()
}

fn gamma_cf_q(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (a * x.ln() - x - ln_gamma(a)).exp() * h
}

/// Lanczos approximation of ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEFFS: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // Reflection formula.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEFFS[0];
    for (i, c) in COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn simulate_ar(phi: &[f64], n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let burn = 200;
        let mut y = vec![0.0; n + burn];
        for t in phi.len()..n + burn {
            let noise: f64 = StandardNormal.sample(&mut rng);
            y[t] = phi
                .iter()
                .enumerate()
                .map(|(j, p)| p * y[t - 1 - j])
                .sum::<f64>()
                + noise;
        }
        y.split_off(burn)
    }

    #[test]
    fn acf_lag_zero_is_one() {
        let y = vec![1.0, 5.0, 2.0, 8.0, 3.0, 9.0];
        let result = acf(&y, 3).unwrap();
        assert_abs_diff_eq!(result.values[0], 1.0, epsilon = 1e-15);
        for v in &result.values {
            assert!(v.abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn alternating_series_has_lag_one_near_minus_one() {
        let y: Vec<f64> = (0..100)
            .map(|t| if t % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let result = acf(&y, 2).unwrap();
        assert!(
            (result.values[1] + 1.0).abs() < 0.05,
            "rho1 = {}",
            result.values[1]
        );
    }

    #[test]
    fn ar1_acf_matches_phi() {
        let mut within = 0;
        for seed in 0..10 {
            let y = simulate_ar(&[0.8], 2000, seed);
            let rho1 = acf(&y, 1).unwrap().values[1];
            if (0.74..=0.86).contains(&rho1) {
                within += 1;
            }
        }
        assert!(within >= 9, "only {within}/10 inside the band");
    }

    #[test]
    fn constant_series_rejected() {
        assert!(matches!(
            acf(&[3.0; 20], 4),
            Err(DiagnosticsError::ConstantSeries)
        ));
        assert!(matches!(
            ljung_box(&[3.0; 20], 4, 0),
            Err(DiagnosticsError::ConstantSeries)
        ));
    }

    #[test]
    fn pacf_base_case_equals_acf() {
        let y = simulate_ar(&[0.6], 300, 5);
        let rho1 = acf(&y, 1).unwrap().values[1];
        let p = pacf(&y, 4).unwrap();
        assert_abs_diff_eq!(p[0], rho1, epsilon = 1e-12);
    }

    #[test]
    fn ar1_pacf_cuts_off_after_lag_one() {
        let mut ok = 0;
        for seed in 0..10 {
            let y = simulate_ar(&[0.8], 2000, 100 + seed);
            let p = pacf(&y, 3).unwrap();
            if p[1].abs() < 0.08 {
                ok += 1;
            }
        }
        assert!(ok >= 9, "lag-2 pacf too large in {} runs", 10 - ok);
    }

    #[test]
    fn ar2_pacf_lag_two_near_phi2() {
        let mut ok = 0;
        for seed in 0..10 {
            let y = simulate_ar(&[0.5, 0.3], 2000, 200 + seed);
            let p = pacf(&y, 3).unwrap();
            if (0.22..=0.38).contains(&p[1]) {
                ok += 1;
            }
        }
        assert!(ok >= 9, "{}/10 inside the band", ok);
    }

    /// Independent route: solve the Yule-Walker system for order k with
    /// Gaussian elimination and take the last coefficient.
    fn yule_walker_last_coeff(rho: &[f64], k: usize) -> f64 {
        let mut a = vec![vec![0.0; k + 1]; k];
        for i in 0..k {
            for j in 0..k {
                a[i][j] = rho[(i as isize - j as isize).unsigned_abs()];
            }
            a[i][k] = rho[i + 1];
        }
        for col in 0..k {
            let pivot = (col..k)
                .max_by(|&r1, &r2| a[r1][col].abs().partial_cmp(&a[r2][col].abs()).unwrap());
            a.swap(col, pivot.unwrap());
            for row in col + 1..k {
                let f = a[row][col] / a[col][col];
                for j in col..=k {
                    a[row][j] -= f * a[col][j];
                }
            }
        }
        let mut x = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = a[i][k];
            for j in i + 1..k {
                s -= a[i][j] * x[j];
            }
            x[i] = s / a[i][i];
        }
        x[k - 1]
    }

    #[test]
    fn durbin_levinson_matches_direct_yule_walker_solve() {
        for seed in 0..8 {
            let y = simulate_ar(&[0.5, -0.2], 50, 300 + seed);
            let rho = acf(&y, 3).unwrap().values;
            let p = pacf(&y, 3).unwrap();
            for k in 1..=3 {
                let direct = yule_walker_last_coeff(&rho, k);
                assert_abs_diff_eq!(p[k - 1], direct, epsilon = 1e-10);
            }
        }
    }

    /// OLS autoregression of order k (with intercept); its last coefficient
    /// approximates the Yule-Walker value on short series.
    fn ols_ar_last_coeff(y: &[f64], k: usize) -> f64 {
        let n = y.len();
        let rows = n - k;
        let cols = k + 1;
        let mut xtx = vec![vec![0.0; cols]; cols];
        let mut xty = vec![0.0; cols];
        for t in k..n {
            let mut row = vec![1.0];
            for j in 1..=k {
                row.push(y[t - j]);
            }
            for i in 0..cols {
                for j in 0..cols {
                    xtx[i][j] += row[i] * row[j];
                }
                xty[i] += row[i] * y[t];
            }
        }
        assert!(rows > cols);
        for col in 0..cols {
            for row in col + 1..cols {
                let f = xtx[row][col] / xtx[col][col];
                for j in col..cols {
                    xtx[row][j] -= f * xtx[col][j];
                }
                xty[row] -= f * xty[col];
            }
        }
        let mut beta = vec![0.0; cols];
        for i in (0..cols).rev() {
            let mut s = xty[i];
            for j in i + 1..cols {
                s -= xtx[i][j] * beta[j];
            }
            beta[i] = s / xtx[i][i];
        }
        beta[k]
    }

    #[test]
    fn pacf_tracks_ols_autoregression_on_short_series() {
        for seed in 0..6 {
            let y = simulate_ar(&[0.6], 50, 400 + seed);
            for k in 1..=3 {
                let dl = pacf(&y, k).unwrap()[k - 1];
                let ols = ols_ar_last_coeff(&y, k);
                assert!(
                    (dl - ols).abs() < 0.15,
                    "seed {seed} k {k}: DL {dl} vs OLS {ols}"
                );
            }
        }
    }

    #[test]
    fn acf_pacf_affine_invariant() {
        let y = simulate_ar(&[0.4, 0.2], 400, 9);
        let scaled: Vec<f64> = y.iter().map(|v| 3.5 * v + 100.0).collect();
        let a1 = acf(&y, 5).unwrap().values;
        let a2 = acf(&scaled, 5).unwrap().values;
        for (u, v) in a1.iter().zip(&a2) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-10);
        }
        let p1 = pacf(&y, 5).unwrap();
        let p2 = pacf(&scaled, 5).unwrap();
        for (u, v) in p1.iter().zip(&p2) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-10);
        }
    }

    #[test]
    fn ljung_box_flags_strong_autocorrelation() {
        let y = simulate_ar(&[0.9], 200, 17);
        let result = ljung_box(&y, 12, 0).unwrap();
        assert!(result.p < 0.001, "p = {}", result.p);
    }

    #[test]
    fn ljung_box_q_monotone_in_h() {
        let y = simulate_ar(&[0.3], 120, 23);
        let mut prev = 0.0;
        for h in 1..=15 {
            let result = ljung_box(&y, h, 0).unwrap();
            assert!(result.q >= prev - 1e-12, "Q decreased at h = {h}");
            prev = result.q;
        }
    }

    #[test]
    fn ljung_box_dof_floors_at_one() {
        let y = simulate_ar(&[0.3], 120, 29);
        let result = ljung_box(&y, 3, 10).unwrap();
        assert_eq!(result.dof, 1);
    }

    #[test]
    fn aic_bic_hand_values() {
        assert_eq!(aic_bic(0.0, 0, 10), (0.0, 0.0));
        let (aic, bic) = aic_bic(-10.0, 3, 30);
        assert_abs_diff_eq!(aic, 26.0, epsilon = 1e-12);
        assert_abs_diff_eq!(bic, 20.0 + 3.0 * (30.0_f64).ln(), epsilon = 1e-3);
        // k = 0 collapses both to -2*loglik.
        let (a0, b0) = aic_bic(-7.5, 0, 999);
        assert_eq!(a0, b0);
        assert_abs_diff_eq!(a0, 15.0, epsilon = 1e-12);
    }

    #[test]
    fn aic_below_bic_for_n_above_e_squared() {
        for n in [8, 20, 100] {
            for k in [1, 3, 7] {
                let (aic, bic) = aic_bic(-42.0, k, n);
                assert!(aic < bic, "n = {n}, k = {k}");
            }
        }
    }

    #[test]
    fn chi_square_sf_known_values() {
        // df = 2 is the exponential distribution: sf(x) = exp(-x/2).
        for x in [0.5, 2.0, 7.3, 20.0] {
            assert_abs_diff_eq!(chi_square_sf(x, 2.0), (-x / 2.0_f64).exp(), epsilon = 1e-12);
        }
        // Standard table values.
        assert_abs_diff_eq!(chi_square_sf(3.841458820694124, 1.0), 0.05, epsilon = 1e-9);
        assert_abs_diff_eq!(
            chi_square_sf(18.307038053275146, 10.0),
            0.05,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(chi_square_sf(21.02606981748307, 12.0), 0.05, epsilon = 1e-9);
        assert_abs_diff_eq!(chi_square_sf(0.0, 5.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn ln_gamma_reference_points() {
        assert_abs_diff_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ln_gamma(2.0), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ln_gamma(5.0), (24.0_f64).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(
            ln_gamma(0.5),
            0.5 * std::f64::consts::PI.ln(),
            epsilon = 1e-12
        );
        // Factorial check at a larger argument.
        let ln_20_fact: f64 = (1..=20).map(|k| (k as f64).ln()).sum();
        assert_abs_diff_eq!(ln_gamma(21.0), ln_20_fact, epsilon = 1e-10);
    }

    #[test]
    fn short_series_rejected() {
        assert!(matches!(
            acf(&[1.0, 2.0, 3.0], 4),
            Err(DiagnosticsError::TooShort { .. })
        ));
        assert!(matches!(
            ljung_box(&[1.0, 2.0, 3.0], 12, 0),
            Err(DiagnosticsError::TooShort { .. })
        ));
    }
}
