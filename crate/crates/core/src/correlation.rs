//! Lagged Pearson correlation screening between cases and climate variables.
//!
//! For lag L the climate column is shifted back L months: `climate[0..n-L]`
//! is correlated with `cases[L..n]` (overlap is dropped, never wrapped).

use thiserror::Error;

use crate::data::{AlignedPanel, ClimateVar};

#[derive(Debug, Error)]
pub enum CorrelationError {
    #[error("series lengths differ ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("series too short: {len} points (need at least 3)")]
    TooShort { len: usize },
    #[error("{which} series is constant; correlation undefined")]
    ConstantSeries { which: &'static str },
}

/// Correlation of every climate variable with cases at lags `0..=max_lag`.
#[derive(Debug, Clone)]
pub struct LagCorrelationMatrix {
    pub variables: Vec<ClimateVar>,
    pub max_lag: u32,
    /// `r[v][lag]`, indexed like `variables`.
    pub r: Vec<Vec<f64>>,
    /// Effective sample size per lag (series length minus lag).
    pub n_eff: Vec<usize>,
}

/// Strongest (by |r|) lag per variable; ties resolved toward the smaller lag.
#[derive(Debug, Clone)]
pub struct BestLagSummary {
    pub entries: Vec<BestLag>,
}

#[derive(Debug, Clone, Copy)]
pub struct BestLag {
    pub variable: ClimateVar,
    pub lag: u32,
    pub r: f64,
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, CorrelationError> {
    if x.len() != y.len() {
        return Err(CorrelationError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(CorrelationError::TooShort { len: x.len() });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 {
        return Err(CorrelationError::ConstantSeries { which: "x" });
    }
    if syy == 0.0 {
        return Err(CorrelationError::ConstantSeries { which: "y" });
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Correlates each climate variable, shifted back by 0..=max_lag months,
/// with the case series over the maximal per-cell overlap.
pub fn lagged_matrix(
    panel: &AlignedPanel,
    max_lag: u32,
) -> Result<LagCorrelationMatrix, CorrelationError> {
    let n = panel.len();
    if n <= max_lag as usize + 3 {
        return Err(CorrelationError::TooShort { len: n });
    }
    let cases = panel.cases_f64();
    let mut r = Vec::with_capacity(ClimateVar::ALL.len());
    for var in ClimateVar::ALL {
        let column = panel.climate(var);
        let mut row = Vec::with_capacity(max_lag as usize + 1);
        for lag in 0..=max_lag as usize {
            row.push(pearson(&column[..n - lag], &cases[lag..])?);
        }
        r.push(row);
    }
    Ok(LagCorrelationMatrix {
        variables: ClimateVar::ALL.to_vec(),
        max_lag,
        r,
        n_eff: (0..=max_lag as usize).map(|lag| n - lag).collect(),
    })
}

/// Per-variable argmax of |r| over the scanned lags.
pub fn best_lags(matrix: &LagCorrelationMatrix) -> BestLagSummary {
    let entries = matrix
        .variables
        .iter()
        .zip(&matrix.r)
        .map(|(variable, row)| {
            let mut best = 0usize;
            for (lag, value) in row.iter().enumerate().skip(1) {
                if value.abs() > row[best].abs() {
                    best = lag;
                }
            }
            BestLag {
                variable: *variable,
                lag: best as u32,
                r: row[best],
            }
        })
        .collect();
    BestLagSummary { entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{align_panel, CaseSeries, ClimateTable, MonthIndex};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn months(start: &str, n: usize) -> Vec<MonthIndex> {
        let mut m: MonthIndex = start.parse().unwrap();
        (0..n)
            .map(|_| {
                let cur = m;
                m = m.succ();
                cur
            })
            .collect()
    }

    fn panel_from(cases: Vec<u32>, columns: [Vec<f64>; 6]) -> AlignedPanel {
        let ms = months("2000-01", cases.len());
        align_panel(
            &CaseSeries {
                division: "t".into(),
                months: ms.clone(),
                counts: cases,
            },
            &ClimateTable {
                months: ms,
                columns,
            },
        )
        .unwrap()
    }

    #[test]
    fn self_correlation_is_one() {
        let x = vec![1.0, 4.0, 2.0, 8.0, 5.0];
        assert_abs_diff_eq!(pearson(&x, &x).unwrap(), 1.0, epsilon = 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_abs_diff_eq!(pearson(&x, &neg).unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn hand_computed_triple() {
        // cov and variances computed directly from the definition.
        let r = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert_abs_diff_eq!(r, 0.981981, epsilon = 1e-5);
        // Direct formula: sxy = 3, sxx = 2, syy = 14/3.
        assert_abs_diff_eq!(
            r,
            3.0 / (2.0_f64.sqrt() * (14.0_f64 / 3.0).sqrt()),
            epsilon = 1e-12
        );
    }

    #[test]
    fn error_paths() {
        assert!(matches!(
            pearson(&[1.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(CorrelationError::LengthMismatch { .. })
        ));
        assert!(matches!(
            pearson(&[1.0, 2.0], &[1.0, 2.0]),
            Err(CorrelationError::TooShort { .. })
        ));
        assert!(matches!(
            pearson(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(CorrelationError::ConstantSeries { .. })
        ));
    }

    #[test]
    fn symmetry_and_affine_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let x: Vec<f64> = (0..30).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let y: Vec<f64> = (0..30).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let rxy = pearson(&x, &y).unwrap();
            let ryx = pearson(&y, &x).unwrap();
            assert_abs_diff_eq!(rxy, ryx, epsilon = 1e-12);

            let a = rng.gen_range(0.1..4.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let b = rng.gen_range(-10.0..10.0);
            let scaled: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let r_scaled = pearson(&scaled, &y).unwrap();
            assert_abs_diff_eq!(r_scaled, a.signum() * rxy, epsilon = 1e-10);
        }
    }

    #[test]
    fn perfect_lag_two_construction() {
        // Climate variable equal to cases advanced by two months.
        let n = 40;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cases: Vec<u32> = (0..n).map(|_| rng.gen_range(0..500)).collect();
        let driver: Vec<f64> = (0..n)
            .map(|t| {
                if t + 2 < n {
                    f64::from(cases[t + 2])
                } else {
                    rng.gen_range(0.0..500.0)
                }
            })
            .collect();
        // Keep fillers inside every column's valid range (rainy days <= 28).
        let filler = |seed: u64| -> Vec<f64> {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| r.gen_range(1.0..20.0)).collect()
        };
        let panel = panel_from(
            cases,
            [
                driver,
                filler(5),
                filler(6),
                filler(7),
                filler(8),
                filler(9),
            ],
        );
        let matrix = lagged_matrix(&panel, 4).unwrap();
        let temp_row = &matrix.r[0];
        // Lag-2 cells correlate driver[..n-2] with cases[2..]; by
        // construction driver[t] = cases[t+2] on that whole overlap.
        assert_abs_diff_eq!(temp_row[2], 1.0, epsilon = 1e-12);
        for (lag, r) in temp_row.iter().enumerate() {
            if lag != 2 {
                assert!(r.abs() < 1.0 - 1e-6, "lag {lag} unexpectedly perfect");
            }
        }

        let summary = best_lags(&matrix);
        assert_eq!(summary.entries[0].lag, 2);
        assert_abs_diff_eq!(summary.entries[0].r, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn white_noise_stays_small() {
        // Null correlations on n=200 stay below 0.2 for these seeds.
        let n = 200;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let cases: Vec<u32> = (0..n).map(|_| rng.gen_range(0..1000)).collect();
        let noise = |seed: u64| -> Vec<f64> {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| r.gen_range(0.0..28.0)).collect()
        };
        let panel = panel_from(
            cases,
            [noise(1), noise(2), noise(3), noise(4), noise(5), noise(6)],
        );
        let matrix = lagged_matrix(&panel, 4).unwrap();
        for row in &matrix.r {
            for r in row {
                assert!(r.abs() < 0.2, "null correlation {r} too large");
            }
        }
        assert_eq!(matrix.n_eff, vec![200, 199, 198, 197, 196]);
    }

    #[test]
    fn lag_zero_equals_plain_pearson() {
        let n = 30;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cases: Vec<u32> = (0..n).map(|_| rng.gen_range(0..100)).collect();
        let cols: [Vec<f64>; 6] = std::array::from_fn(|k| {
            let mut r = ChaCha8Rng::seed_from_u64(20 + k as u64);
            (0..n).map(|_| r.gen_range(1.0..27.0)).collect()
        });
        let panel = panel_from(cases, cols);
        let matrix = lagged_matrix(&panel, 4).unwrap();
        let cases_f = panel.cases_f64();
        for (k, var) in ClimateVar::ALL.iter().enumerate() {
            let direct = pearson(panel.climate(*var), &cases_f).unwrap();
            assert_abs_diff_eq!(matrix.r[k][0], direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn best_lag_argmax_and_tie_break() {
        let matrix = LagCorrelationMatrix {
            variables: vec![ClimateVar::TempAvg, ClimateVar::Humidity],
            max_lag: 4,
            r: vec![
                vec![0.1, 0.5, 0.9, 0.2, 0.1],
                vec![-0.9, 0.9, 0.3, 0.0, 0.1],
            ],
            n_eff: vec![40, 39, 38, 37, 36],
        };
        let summary = best_lags(&matrix);
        assert_eq!(summary.entries[0].lag, 2);
        assert_abs_diff_eq!(summary.entries[0].r, 0.9, epsilon = 1e-15);
        // |r| ties at lags 0 and 1 resolve to the smaller lag.
        assert_eq!(summary.entries[1].lag, 0);
        assert_abs_diff_eq!(summary.entries[1].r, -0.9, epsilon = 1e-15);
    }

    #[test]
    fn best_lags_invariant_to_positive_rescaling() {
        let n = 48;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let cases: Vec<u32> = (0..n)
            .map(|t| (200.0 + 150.0 * (t as f64 / 6.0).sin() + rng.gen_range(0.0..40.0)) as u32)
            .collect();
        let cols: [Vec<f64>; 6] = std::array::from_fn(|k| {
            let mut r = ChaCha8Rng::seed_from_u64(30 + k as u64);
            (0..n)
                .map(|t| 10.0 + 5.0 * ((t + k) as f64 / 5.0).cos() + r.gen_range(0.0..3.0))
                .collect()
        });
        let panel = panel_from(cases.clone(), cols.clone());
        let scaled_cols: [Vec<f64>; 6] =
            std::array::from_fn(|k| cols[k].iter().map(|v| v * (0.5 + k as f64)).collect());
        let scaled_panel = panel_from(cases, scaled_cols);

        let a = best_lags(&lagged_matrix(&panel, 4).unwrap());
        let b = best_lags(&lagged_matrix(&scaled_panel, 4).unwrap());
        for (x, y) in a.entries.iter().zip(&b.entries) {
            assert_eq!(x.lag, y.lag);
            assert_abs_diff_eq!(x.r, y.r, epsilon = 1e-10);
        }
    }

    #[test]
    fn short_panel_rejected() {
        let n = 7;
        let cases: Vec<u32> = (0..n as u32).map(|i| i * 2 + 1).collect();
        let cols: [Vec<f64>; 6] =
            std::array::from_fn(|k| (0..n).map(|t| (t * (k + 1)) as f64).collect());
        let panel = panel_from(cases, cols);
        assert!(matches!(
            lagged_matrix(&panel, 4),
            Err(CorrelationError::TooShort { .. })
        ));
    }
}
