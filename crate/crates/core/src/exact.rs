//! Closed-form CRPS for Gaussian predictions and related analytical values.
//!
//! These are the reference quantities every sample-based estimator in this
//! crate is validated against: the Gaussian closed form, its three-term
//! (error / mean / CDF) decomposition, the DKW empirical-CDF band, and the
//! predicted O(1/M) plug-in bias of the PWM CDF term.

use crate::error::{ensure_finite, CrpsError, Result};
use crate::forecast::GaussianPredictive;
use serde::Serialize;
use std::f64::consts::PI;

/// 1/sqrt(pi)
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Standard normal CDF via the complementary error function.
///
/// libm's `erfc` (musl port) is correct to about 1 ulp, so the absolute
/// error here stays below 1e-15 everywhere.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Standard normal quantile function: a rational-approximation seed
/// polished by two Newton steps against [`norm_cdf`], giving close to
/// full double precision.
pub fn norm_quantile(p: f64) -> f64 {
    let mut x = -std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p);
    for _ in 0..2 {
        let density = norm_pdf(x);
        if density <= f64::MIN_POSITIVE {
            break;
        }
        x -= (norm_cdf(x) - p) / density;
    }
    x
}

/// The three PWM terms of a CRPS value plus their recombination.
///
/// `total` always equals `error_term + mean_term - 2 * cdf_term`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrpsTermValues {
    /// E|y - y_obs| under the predictive distribution.
    pub error_term: f64,
    /// E[y] under the predictive distribution.
    pub mean_term: f64,
    /// E[y F(y)] under the predictive distribution.
    pub cdf_term: f64,
    pub total: f64,
}

impl CrpsTermValues {
    pub fn from_terms(error_term: f64, mean_term: f64, cdf_term: f64) -> Self {
        CrpsTermValues {
            error_term,
            mean_term,
            cdf_term,
            total: error_term + mean_term - 2.0 * cdf_term,
        }
    }
}

/// Closed-form CRPS of a Gaussian predictive distribution against one
/// observation: `sigma * [z(2 Phi(z) - 1) + 2 phi(z) - 1/sqrt(pi)]` with
/// `z = (y_obs - mean)/sigma`. Always nonnegative.
pub fn crps_gaussian(pred: &GaussianPredictive, y_obs: f64) -> Result<f64> {
    ensure_finite("y_obs", y_obs)?;
    let z = (y_obs - pred.mean) / pred.std;
    Ok(pred.std * crps_standard(z))
}

/// The bracketed standardized factor: CRPS of N(0,1) against z.
pub(crate) fn crps_standard(z: f64) -> f64 {
    z * (2.0 * norm_cdf(z) - 1.0) + 2.0 * norm_pdf(z) - FRAC_1_SQRT_PI
}

/// Per-term decomposition of the Gaussian closed form.
///
/// error term: `sigma [z(2 Phi(z) - 1) + 2 phi(z)]`; mean term: `m`;
/// CDF term: `(m + sigma/sqrt(pi)) / 2`.
pub fn crps_gaussian_terms(pred: &GaussianPredictive, y_obs: f64) -> Result<CrpsTermValues> {
    ensure_finite("y_obs", y_obs)?;
    let z = (y_obs - pred.mean) / pred.std;
    let error_term = pred.std * (z * (2.0 * norm_cdf(z) - 1.0) + 2.0 * norm_pdf(z));
    let mean_term = pred.mean;
    let cdf_term = 0.5 * (pred.mean + pred.std * FRAC_1_SQRT_PI);
    Ok(CrpsTermValues::from_terms(error_term, mean_term, cdf_term))
}

/// Half-width of the DKW uniform confidence band for an M-sample empirical
/// CDF at level `1 - alpha`: `sqrt(ln(2/alpha) / (2M))`.
pub fn dkw_epsilon(m: usize, alpha: f64) -> Result<f64> {
    if m == 0 {
        return Err(CrpsError::invalid("DKW bound needs M >= 1"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CrpsError::invalid(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    Ok(((2.0 / alpha).ln() / (2.0 * m as f64)).sqrt())
}

/// Expected bias of the plug-in CDF-term estimator `(1/M) sum y_i F_hat(y_i)`
/// at sample size M: `(mean - cdf_term) / M = (m/2 - sigma/(2 sqrt(pi))) / M`.
///
/// The induced bias on the full PWM CRPS estimate is `-2` times this value.
pub fn predicted_plugin_bias(pred: &GaussianPredictive, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(CrpsError::invalid("plug-in bias needs M >= 1"));
    }
    Ok((0.5 * pred.mean - 0.5 * pred.std * FRAC_1_SQRT_PI) / m as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pred(mean: f64, std: f64) -> GaussianPredictive {
        GaussianPredictive::new(mean, std).unwrap()
    }

    // Frozen reference values, computed independently with 40-digit
    // arithmetic from the defining integral.
    const CRPS_STANDARD_AT_ZERO: f64 = 0.233_694_977_255_109_07;
    const CRPS_0_1_10: f64 = 9.435_810_416_452_244;
    const CRPS_2_HALF_1: f64 = 0.726_395_910_842_951_5;
    const CDF_TERM_0_1: f64 = 0.282_094_791_773_878_14;

    #[test]
    fn normal_cdf_matches_reference_values() {
        // abs error must stay below 1e-15 on these table points
        assert_abs_diff_eq!(norm_cdf(0.0), 0.5, epsilon = 1e-16);
        assert_abs_diff_eq!(norm_cdf(1.0), 0.841_344_746_068_542_9, epsilon = 1e-15);
        assert_abs_diff_eq!(norm_cdf(2.0), 0.977_249_868_051_820_8, epsilon = 1e-15);
        assert_abs_diff_eq!(norm_cdf(-1.5), 0.066_807_201_268_858_07, epsilon = 1e-15);
        assert_abs_diff_eq!(norm_pdf(0.0), 0.398_942_280_401_432_7, epsilon = 1e-16);
    }

    #[test]
    fn norm_quantile_inverts_cdf() {
        for &p in &[0.1, 0.25, 0.5, 0.77, 0.9, 0.99] {
            assert_abs_diff_eq!(norm_cdf(norm_quantile(p)), p, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(norm_quantile(0.9), 1.281_551_565_544_600_5, epsilon = 1e-9);
    }

    #[test]
    fn standard_crps_at_the_mean() {
        let v = crps_gaussian(&pred(0.0, 1.0), 0.0).unwrap();
        assert_abs_diff_eq!(v, CRPS_STANDARD_AT_ZERO, epsilon = 1e-14);
    }

    #[test]
    fn sigma_scales_multiplicatively_at_z_zero() {
        let base = crps_gaussian(&pred(0.0, 1.0), 0.0).unwrap();
        for &c in &[0.1, 0.5, 2.0, 7.5, 100.0] {
            let scaled = crps_gaussian(&pred(0.0, c), 0.0).unwrap();
            assert_abs_diff_eq!(scaled, c * base, epsilon = 1e-12 * c.max(1.0));
        }
    }

    #[test]
    fn far_observation_approaches_absolute_error() {
        let v = crps_gaussian(&pred(0.0, 1.0), 10.0).unwrap();
        assert_abs_diff_eq!(v, CRPS_0_1_10, epsilon = 1e-9);
        assert!(v >= 9.43 && v <= 10.0);
    }

    #[test]
    fn generic_point_matches_frozen_oracle() {
        let v = crps_gaussian(&pred(2.0, 0.5), 1.0).unwrap();
        assert_abs_diff_eq!(v, CRPS_2_HALF_1, epsilon = 1e-13);
    }

    #[test]
    fn rejects_non_finite_observation() {
        assert!(crps_gaussian(&pred(0.0, 1.0), f64::NAN).is_err());
        assert!(crps_gaussian(&pred(0.0, 1.0), f64::INFINITY).is_err());
    }

    #[test]
    fn cdf_term_standard_normal() {
        let t = crps_gaussian_terms(&pred(0.0, 1.0), 0.0).unwrap();
        assert_abs_diff_eq!(t.cdf_term, CDF_TERM_0_1, epsilon = 1e-15);
    }

    #[test]
    fn terms_recombine_to_closed_form() {
        // deterministic pseudo-grid of (m, sigma, y) triples
        let mut worst: f64 = 0.0;
        for i in 0..1000 {
            let m = -3.0 + 6.0 * (i as f64 * 0.618_033_988_749_894_9).fract();
            let s = 0.05 + 4.0 * (i as f64 * 0.414_213_562_373_095_1).fract();
            let y = -5.0 + 10.0 * (i as f64 * 0.732_050_807_568_877_3).fract();
            let p = pred(m, s);
            let t = crps_gaussian_terms(&p, y).unwrap();
            let direct = crps_gaussian(&p, y).unwrap();
            worst = worst.max((t.total - direct).abs());
            assert!((t.total - (t.error_term + t.mean_term - 2.0 * t.cdf_term)).abs() < 1e-12);
        }
        assert!(worst < 1e-12, "worst recombination gap {worst}");
    }

    #[test]
    fn small_sigma_limit_of_terms() {
        let mu = 3.0;
        let y = 1.0;
        let t = crps_gaussian_terms(&pred(mu, 1e-9), y).unwrap();
        assert_abs_diff_eq!(t.error_term, (mu - y).abs(), epsilon = 1e-7);
        assert_abs_diff_eq!(t.cdf_term, mu / 2.0, epsilon = 1e-7);
    }

    #[test]
    fn crps_translation_invariance() {
        for &c in &[-10.0, -0.5, 0.0, 3.25, 1e3] {
            let a = crps_gaussian(&pred(1.0 + c, 0.7), 0.3 + c).unwrap();
            let b = crps_gaussian(&pred(1.0, 0.7), 0.3).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn crps_nonnegative_and_minimal_at_mean() {
        let at_mean = crps_gaussian(&pred(1.5, 0.8), 1.5).unwrap();
        for i in 0..200 {
            let y = -6.0 + 12.0 * i as f64 / 199.0;
            let v = crps_gaussian(&pred(1.5, 0.8), y).unwrap();
            assert!(v >= 0.0);
            assert!(v + 1e-14 >= at_mean);
        }
    }

    #[test]
    fn bracket_factor_is_convex_in_z() {
        // midpoint below chord on a grid
        let zs: Vec<f64> = (0..400).map(|i| -6.0 + 12.0 * i as f64 / 399.0).collect();
        for w in zs.windows(3) {
            let (z1, z2, z3) = (w[0], w[1], w[2]);
            let chord = 0.5 * (crps_standard(z1) + crps_standard(z3));
            assert!(crps_standard(z2) <= chord + 1e-9);
        }
    }

    #[test]
    fn dkw_reference_and_scaling() {
        let e = dkw_epsilon(100, 0.05).unwrap();
        assert_abs_diff_eq!(e, 0.135_810_151_574_061_95, epsilon = 1e-12);
        // quadrupling M halves the bound
        let e4 = dkw_epsilon(400, 0.05).unwrap();
        assert_abs_diff_eq!(e4, e / 2.0, epsilon = 1e-15);
        // ln(2/alpha) = 2 at alpha = 2/e^2, so the M=1 bound is exactly 1
        let unit = dkw_epsilon(1, 2.0 / std::f64::consts::E.powi(2)).unwrap();
        assert_abs_diff_eq!(unit, 1.0, epsilon = 1e-15);
        assert!(dkw_epsilon(100, 0.0).is_err());
        assert!(dkw_epsilon(100, 1.0).is_err());
        assert!(dkw_epsilon(0, 0.5).is_err());
    }

    #[test]
    fn plugin_bias_values() {
        let b = predicted_plugin_bias(&pred(0.0, 1.0), 100).unwrap();
        assert_abs_diff_eq!(b, -CDF_TERM_0_1 / 100.0, epsilon = 1e-15);
        // root of m/2 - sigma/(2 sqrt(pi)): m = sigma/sqrt(pi)
        let root = predicted_plugin_bias(&pred(FRAC_1_SQRT_PI, 1.0), 10).unwrap();
        assert_abs_diff_eq!(root, 0.0, epsilon = 1e-16);
    }
}
