//! Parameter transforms and lag-polynomial helpers.
//!
//! The optimizer searches an unconstrained space; coordinates map through
//! t -> t/sqrt(1+t^2) to reflection coefficients in (-1, 1) and then through
//! the Levinson recursion to AR (or MA) coefficients, which keeps every
//! candidate inside the stationarity (invertibility) region.

/// Unconstrained reals -> reflection coefficients in (-1, 1).
pub(crate) fn unconstrained_to_reflection(t: &[f64]) -> Vec<f64> {
    t.iter().map(|v| v / (1.0 + v * v).sqrt()).collect()
}

/// Inverse of [`unconstrained_to_reflection`]; requires |r| < 1.
pub(crate) fn reflection_to_unconstrained(r: &[f64]) -> Vec<f64> {
    r.iter().map(|v| v / (1.0 - v * v).sqrt()).collect()
}

/// Levinson step-up: reflection coefficients -> AR coefficients
/// (convention `y_t = sum phi_j y_{t-j} + e_t`).
pub(crate) fn reflection_to_ar(reflection: &[f64]) -> Vec<f64> {
    let mut phi: Vec<f64> = Vec::with_capacity(reflection.len());
    for (k, &r) in reflection.iter().enumerate() {
        let prev = phi.clone();
        phi.push(0.0);
        for j in 0..k {
            phi[j] = prev[j] - r * prev[k - 1 - j];
        }
        phi[k] = r;
    }
    phi
}

/// Levinson step-down: AR coefficients -> reflection coefficients.
/// Returns `None` when the polynomial is not stationary.
pub(crate) fn ar_to_reflection(phi: &[f64]) -> Option<Vec<f64>> {
    let mut work = phi.to_vec();
    let mut reflection = vec![0.0; phi.len()];
    for k in (0..phi.len()).rev() {
        let r = work[k];
        if !r.is_finite() || r.abs() >= 1.0 {
            return None;
        }
        reflection[k] = r;
        let denom = 1.0 - r * r;
        let prev = work.clone();
        for j in 0..k {
            work[j] = (prev[j] + r * prev[k - 1 - j]) / denom;
        }
    }
    Some(reflection)
}

/// True when `1 - phi_1 B - ... - phi_p B^p` has all roots outside the unit
/// circle.
pub(crate) fn is_stationary(phi: &[f64]) -> bool {
    phi.is_empty() || ar_to_reflection(phi).is_some()
}

/// MA coefficients (convention `e_t + sum theta_j e_{t-j}`) are invertible
/// exactly when `-theta` is stationary as an AR polynomial.
pub(crate) fn is_invertible(theta: &[f64]) -> bool {
    let negated: Vec<f64> = theta.iter().map(|v| -v).collect();
    is_stationary(&negated)
}

/// Polynomial product; inputs and output are coefficient vectors with the
/// constant term first.
pub(crate) fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

fn seasonal_poly(coeffs: &[f64], s: usize, sign: f64) -> Vec<f64> {
    let mut poly = vec![0.0; coeffs.len() * s + 1];
    poly[0] = 1.0;
    for (k, &c) in coeffs.iter().enumerate() {
        poly[(k + 1) * s] = sign * c;
    }
    poly
}

/// Expands `phi(B) * PHI(B^s)` into plain AR coefficients of order `p + s*P`.
pub(crate) fn expand_ar(ar: &[f64], seasonal_ar: &[f64], s: usize) -> Vec<f64> {
    let a = seasonal_poly(ar, 1, -1.0);
    let b = seasonal_poly(seasonal_ar, s, -1.0);
    let product = convolve(&a, &b);
    product[1..].iter().map(|c| -c).collect()
}

/// Expands `theta(B) * THETA(B^s)` into plain MA coefficients of order `q + s*Q`.
pub(crate) fn expand_ma(ma: &[f64], seasonal_ma: &[f64], s: usize) -> Vec<f64> {
    let a = seasonal_poly(ma, 1, 1.0);
    let b = seasonal_poly(seasonal_ma, s, 1.0);
    convolve(&a, &b)[1..].to_vec()
}

/// Coefficients of `(1-B)^d (1-B^s)^D`, constant term first.
pub(crate) fn differencing_poly(d: usize, seasonal_d: usize, s: usize) -> Vec<f64> {
    let mut poly = vec![1.0];
    for _ in 0..d {
        poly = convolve(&poly, &[1.0, -1.0]);
    }
    let mut seasonal = vec![0.0; s + 1];
    seasonal[0] = 1.0;
    seasonal[s] = -1.0;
    for _ in 0..seasonal_d {
        poly = convolve(&poly, &seasonal);
    }
    poly
}
