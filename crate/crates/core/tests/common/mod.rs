//! Test oracles, independent of the library's implementation paths.
//!
//! The quadrature oracle integrates the defining CRPS integral directly;
//! the naive estimators follow the textbook double-loop definitions with no
//! sorting or compensated summation. Acceptance and property tests compare
//! the library against these.

#![allow(dead_code)]

/// Standard normal CDF for the oracle (via libm's erfc, ~1 ulp).
pub fn oracle_norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, m: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(f, a, lm, m, fa, flm, fm);
    let right = simpson(f, m, rm, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + adaptive_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Adaptive Simpson integration to absolute tolerance `tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(&f, a, m, b, fa, fm, fb);
    adaptive_step(&f, a, b, fa, fm, fb, whole, tol, 48)
}

/// CRPS of N(mean, std^2) against `y_obs` by direct numerical integration of
/// the squared CDF gap, truncated at 12 standard deviations (tail mass below
/// 1e-30). Split at the observation so each piece is smooth.
pub fn crps_quadrature(mean: f64, std: f64, y_obs: f64) -> f64 {
    let cdf = |t: f64| oracle_norm_cdf((t - mean) / std);
    let lo = (mean - 12.0 * std).min(y_obs);
    let hi = (mean + 12.0 * std).max(y_obs);
    let below = integrate(|t| cdf(t).powi(2), lo, y_obs, 1e-11);
    let above = integrate(|t| (cdf(t) - 1.0).powi(2), y_obs, hi, 1e-11);
    below + above
}

/// Plain-definition PWM plug-in terms: (error, mean, cdf, total).
pub fn naive_pwm(samples: &[f64], y_obs: f64) -> (f64, f64, f64, f64) {
    let m = samples.len() as f64;
    let err: f64 = samples.iter().map(|y| (y - y_obs).abs()).sum::<f64>() / m;
    let mean: f64 = samples.iter().sum::<f64>() / m;
    let mut cdf = 0.0;
    for &yi in samples {
        let rank = samples.iter().filter(|&&yj| yj <= yi).count() as f64;
        cdf += yi * rank / m;
    }
    cdf /= m;
    (err, mean, cdf, err + mean - 2.0 * cdf)
}

fn h_pair_naive(a: f64, b: f64) -> f64 {
    let mut v = 0.0;
    if a > b {
        v += a;
    }
    if b > a {
        v += b;
    }
    0.5 * v
}

/// Plain-definition U-statistic estimate: (error, mean, cdf, total).
pub fn naive_unbiased(samples: &[f64], y_obs: f64) -> (f64, f64, f64, f64) {
    let m = samples.len() as f64;
    let err: f64 = samples.iter().map(|y| (y - y_obs).abs()).sum::<f64>() / m;
    let mean: f64 = samples.iter().sum::<f64>() / m;
    let mut pairs = 0.0;
    for (i, &yi) in samples.iter().enumerate() {
        for (j, &yj) in samples.iter().enumerate() {
            if i != j {
                pairs += h_pair_naive(yi, yj);
            }
        }
    }
    let cdf = pairs / (m * (m - 1.0));
    (err, mean, cdf, err + mean - 2.0 * cdf)
}

/// Plain-definition energy form.
pub fn naive_energy(samples: &[f64], y_obs: f64) -> f64 {
    let m = samples.len() as f64;
    let err: f64 = samples.iter().map(|y| (y - y_obs).abs()).sum::<f64>() / m;
    let mut spread = 0.0;
    for (i, &yi) in samples.iter().enumerate() {
        for (j, &yj) in samples.iter().enumerate() {
            if i != j {
                spread += (yi - yj).abs();
            }
        }
    }
    err - spread / (2.0 * m * (m - 1.0))
}

/// Quantile estimator via quickselect order statistics, O(Q M).
pub fn naive_quantile(samples: &[f64], y_obs: f64, levels: &[f64]) -> f64 {
    let m = samples.len();
    let mut total = 0.0;
    for &kappa in levels {
        let k = ((kappa * m as f64).ceil() as usize).clamp(1, m);
        let mut copy = samples.to_vec();
        let (_, q, _) = copy.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
        let q = *q;
        let indicator = if y_obs < q { 1.0 } else { 0.0 };
        total += 2.0 * (kappa - indicator) * (y_obs - q);
    }
    total / levels.len() as f64
}

/// Mean and standard error of a sample.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
