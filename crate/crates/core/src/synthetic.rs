//! Deterministic synthetic data: ARMA/SARIMA simulators for recovery tests
//! and a bundled monthly panel fixture (seasonal climate drivers feeding a
//! lagged Poisson case process) so everything runs without network access.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::data::{align_panel, AlignedPanel, CaseSeries, ClimateTable, MonthIndex};
use crate::sarimax::integrate;

/// Simulates a stationary ARMA process (plain coefficients, unit-lag), with
/// a 300-sample burn-in discarded.
pub fn simulate_arma(ar: &[f64], ma: &[f64], sigma: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let burn = 300;
    let total = n + burn;
    let mut shocks = Vec::with_capacity(total);
    let mut y = Vec::with_capacity(total);
    for t in 0..total {
        let e: f64 = StandardNormal.sample(&mut rng);
        let e = e * sigma;
        let mut value = e;
        for (j, &theta) in ma.iter().enumerate() {
            if t > j {
                value += theta * shocks[t - 1 - j];
            }
        }
        for (i, &phi) in ar.iter().enumerate() {
            if t > i {
                value += phi * y[t - 1 - i];
            }
        }
        shocks.push(e);
        y.push(value);
    }
    y.split_off(burn)
}

/// Simulates a seasonal ARIMA process: the multiplicative seasonal ARMA part
/// is expanded to plain coefficients, simulated, then integrated `d` and `D`
/// times (seeded at zero).
#[allow(clippy::too_many_arguments)]
pub fn simulate_sarima(
    ar: &[f64],
    ma: &[f64],
    seasonal_ar: &[f64],
    seasonal_ma: &[f64],
    d: usize,
    seasonal_d: usize,
    s: usize,
    sigma: f64,
    n: usize,
    seed: u64,
) -> Vec<f64> {
    let phi = expand_product(ar, seasonal_ar, s, -1.0);
    let theta = expand_product(ma, seasonal_ma, s, 1.0);
    let w = simulate_arma(&phi, &theta, sigma, n, seed);
    let depth = d + seasonal_d * s;
    if depth == 0 {
        return w;
    }
    integrate(&w, &vec![0.0; depth], d, seasonal_d, s).expect("zero seed history is long enough")
}

fn expand_product(block: &[f64], seasonal_block: &[f64], s: usize, sign: f64) -> Vec<f64> {
    // (1 +- b(B)) * (1 +- B_s(B^s)) expanded to plain coefficients.
    let mut a = vec![0.0; block.len() + 1];
    a[0] = 1.0;
    for (i, &c) in block.iter().enumerate() {
        a[i + 1] = sign * c;
    }
    let mut b = vec![0.0; seasonal_block.len() * s + 1];
    b[0] = 1.0;
    for (i, &c) in seasonal_block.iter().enumerate() {
        b[(i + 1) * s] = sign * c;
    }
    let mut product = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            product[i + j] += ai * bj;
        }
    }
    product[1..].iter().map(|c| sign * c).collect()
}

/// Generates the bundled fixture panel: six seasonal climate columns and a
/// Poisson case series driven by rainy days (2-month lag), humidity (1-month
/// lag), and sunshine (2-month lag, negative).
pub fn generate_panel(division: &str, n_months: usize, seed: u64) -> AlignedPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start: MonthIndex = "2022-01".parse().unwrap();
    let tau = 2.0 * std::f64::consts::PI / 12.0;

    // Climate formulas evaluated from t = -4 so every lagged driver is
    // well-defined for the first panel month.
    let lead = 4usize;
    let total = n_months + lead;
    let noise = |rng: &mut ChaCha8Rng, scale: f64| -> f64 {
        let e: f64 = StandardNormal.sample(rng);
        e * scale
    };

    let mut temp = Vec::with_capacity(total);
    let mut rainy = Vec::with_capacity(total);
    let mut rainfall = Vec::with_capacity(total);
    let mut sun_hours = Vec::with_capacity(total);
    let mut sun_days = Vec::with_capacity(total);
    let mut humidity = Vec::with_capacity(total);
    for i in 0..total {
        let t = i as f64 - lead as f64;
        let monsoon = (tau * (t - 5.0)).sin(); // peaks mid-year
        temp.push(27.0 + 5.0 * (tau * (t - 3.5)).sin() + noise(&mut rng, 0.6));
        rainy.push((12.0 + 9.0 * monsoon + noise(&mut rng, 2.5)).clamp(0.0, 28.0));
        rainfall.push((180.0 + 170.0 * monsoon + noise(&mut rng, 45.0)).max(0.0));
        sun_hours.push((210.0 - 110.0 * monsoon + noise(&mut rng, 22.0)).max(5.0));
        sun_days.push((19.0 - 8.0 * monsoon + noise(&mut rng, 1.8)).clamp(1.0, 28.0));
        // Humidity carries enough idiosyncratic variation that its own lag
        // is identifiable against the shared monsoon cycle.
        humidity.push((65.0 + 11.0 * monsoon + noise(&mut rng, 5.0)).clamp(30.0, 98.0));
    }

    let z = |v: f64, mean: f64, sd: f64| (v - mean) / sd;
    let mut counts = Vec::with_capacity(n_months);
    for i in lead..total {
        let log_mu = 5.6 + 0.8 * z(rainy[i - 2], 12.0, 7.0) + 0.8 * z(humidity[i - 1], 65.0, 10.0)
            - 0.5 * z(sun_hours[i - 2], 210.0, 80.0)
            + 0.15 * z(temp[i - 3], 27.0, 3.5);
        let mu = log_mu.exp().max(0.1);
        let draw = Poisson::new(mu).expect("positive mean").sample(&mut rng);
        counts.push(draw.min(u32::MAX as f64) as u32);
    }

    let months: Vec<MonthIndex> = (0..n_months).map(|k| start.add_months(k as i64)).collect();
    let cases = CaseSeries {
        division: division.to_string(),
        months: months.clone(),
        counts,
    };
    let climate = ClimateTable {
        months,
        columns: [
            temp.split_off(lead),
            rainy.split_off(lead),
            rainfall.split_off(lead),
            sun_hours.split_off(lead),
            sun_days.split_off(lead),
            humidity.split_off(lead),
        ],
    };
    align_panel(&cases, &climate).expect("fixture construction is valid")
}
