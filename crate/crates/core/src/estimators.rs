//! Sample-based CRPS estimators.
//!
//! Three estimators share the sorted-sample fast path:
//!
//! * [`crps_quantile`] — Eq.-(4)-style average of doubled pinball losses at
//!   empirical quantiles over a fixed grid of levels. Converges to a grid
//!   floor, not to the true CRPS, when the grid stays fixed.
//! * [`crps_pwm_plugin`] — the probability-weighted-moment form with the
//!   empirical CDF plugged in. Its CDF term keeps the self-pair (diagonal)
//!   contribution, which biases the estimate by `-2 (mean - cdf_term)/M`;
//!   the estimator is provided intentionally unchanged for benchmarking.
//! * [`crps_unbiased`] — the U-statistic form with a zero diagonal; unbiased
//!   for the true CRPS at every sample size.
//!
//! [`crps_energy_form`] is an algebraically independent cross-check: for
//! tie-free samples it equals the U-statistic form identically.
//!
//! All accumulation is compensated ([`crate::kahan`]), and the sorted paths
//! are O(M log M).

use crate::error::{ensure_all_finite, ensure_finite, CrpsError, Result};
use crate::exact::{norm_quantile, CrpsTermValues};
use crate::forecast::GaussianPredictive;
use crate::kahan::KahanSum;
use serde::Serialize;

/// Which estimator produced a [`CrpsEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Quantile,
    PwmPlugin,
    Unbiased,
    KernQuad,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Quantile => "quantile",
            EstimatorKind::PwmPlugin => "pwm_plugin",
            EstimatorKind::Unbiased => "unbiased",
            EstimatorKind::KernQuad => "kernquad",
        }
    }
}

/// A CRPS estimate with provenance and optional term decomposition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrpsEstimate {
    pub value: f64,
    pub terms: Option<CrpsTermValues>,
    pub method: EstimatorKind,
    /// Sample count the estimate was computed from.
    pub m: usize,
    /// Quantile-grid size, for the quantile estimator.
    pub q: Option<usize>,
    /// Fraction of sample pairs with exactly equal values. Populated by the
    /// pairwise estimators; values above 0.01 signal a degenerate panel.
    pub tie_fraction: Option<f64>,
}

/// Ordered quantile levels in the open unit interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileGrid {
    levels: Vec<f64>,
}

impl QuantileGrid {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(CrpsError::invalid("quantile grid must be non-empty"));
        }
        for w in levels.windows(2) {
            if !(w[0] < w[1]) {
                return Err(CrpsError::invalid("quantile levels must be strictly increasing"));
            }
        }
        if !(levels[0] > 0.0 && *levels.last().unwrap() < 1.0) {
            return Err(CrpsError::invalid("quantile levels must lie in (0, 1)"));
        }
        Ok(QuantileGrid { levels })
    }

    /// The de facto standard grid (0.1, 0.2, ..., 0.9).
    pub fn deciles() -> Self {
        QuantileGrid {
            levels: (1..=9).map(|i| i as f64 / 10.0).collect(),
        }
    }

    /// Midpoint grid ((2i-1)/2Q for i = 1..Q).
    pub fn midpoint(q: usize) -> Result<Self> {
        if q == 0 {
            return Err(CrpsError::invalid("midpoint grid needs Q >= 1"));
        }
        Ok(QuantileGrid {
            levels: (1..=q).map(|i| (2 * i - 1) as f64 / (2 * q) as f64).collect(),
        })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// Empirical CDF of one panel row, stored as sorted order statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn sorted_samples(&self) -> &[f64] {
        &self.sorted
    }

    /// F_hat(y) = (#samples <= y) / M; right-continuous step function.
    pub fn eval(&self, y: f64) -> f64 {
        let count = self.sorted.partition_point(|&s| s <= y);
        count as f64 / self.sorted.len() as f64
    }

    /// Generalized inverse: the order statistic `y_(ceil(kappa * M))`, the
    /// smallest sample value with `F_hat(y) >= kappa`.
    pub fn quantile(&self, kappa: f64) -> Result<f64> {
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(CrpsError::invalid(format!(
                "quantile level must lie in (0, 1), got {kappa}"
            )));
        }
        let m = self.sorted.len();
        let idx = (kappa * m as f64).ceil() as usize;
        Ok(self.sorted[idx.clamp(1, m) - 1])
    }
}

/// Builds the empirical CDF of a sample row.
pub fn empirical_cdf(samples: &[f64]) -> Result<EmpiricalCdf> {
    validate_samples(samples)?;
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(EmpiricalCdf { sorted })
}

/// Pinball (quantile) loss `(kappa - 1{y < q}) (y - q)`; nonnegative.
pub fn pinball_loss(kappa: f64, q: f64, y: f64) -> f64 {
    let indicator = if y < q { 1.0 } else { 0.0 };
    (kappa - indicator) * (y - q)
}

fn validate_samples(samples: &[f64]) -> Result<()> {
    if samples.len() < 2 {
        return Err(CrpsError::invalid(format!(
            "need at least 2 samples, got {}",
            samples.len()
        )));
    }
    ensure_all_finite("samples", samples)
}

/// Quantile-based CRPS estimate: mean over grid levels of twice the pinball
/// loss at the empirical quantile.
pub fn crps_quantile(samples: &[f64], y_obs: f64, grid: &QuantileGrid) -> Result<CrpsEstimate> {
    ensure_finite("y_obs", y_obs)?;
    let cdf = empirical_cdf(samples)?;
    let mut acc = KahanSum::new();
    for &kappa in grid.levels() {
        acc.add(2.0 * pinball_loss(kappa, cdf.quantile(kappa)?, y_obs));
    }
    Ok(CrpsEstimate {
        value: acc.value() / grid.len() as f64,
        terms: None,
        method: EstimatorKind::Quantile,
        m: samples.len(),
        q: Some(grid.len()),
        tie_fraction: None,
    })
}

/// The value [`crps_quantile`] converges to as M grows with the grid fixed:
/// Eq.-(4)-style average with exact Gaussian quantiles in place of empirical
/// ones. The gap between this and the closed form is the grid bias floor.
pub fn quantile_grid_reference(
    pred: &GaussianPredictive,
    y_obs: f64,
    grid: &QuantileGrid,
) -> Result<f64> {
    ensure_finite("y_obs", y_obs)?;
    let mut acc = KahanSum::new();
    for &kappa in grid.levels() {
        let q = pred.mean + pred.std * norm_quantile(kappa);
        acc.add(2.0 * pinball_loss(kappa, q, y_obs));
    }
    Ok(acc.value() / grid.len() as f64)
}

/// Tie fraction plus sorted samples, shared by the pairwise estimators.
fn sorted_with_tie_fraction(samples: &[f64]) -> (Vec<f64>, f64) {
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let m = sorted.len();
    let mut tie_pairs = 0u64;
    let mut run = 1u64;
    for i in 1..m {
        if sorted[i] == sorted[i - 1] {
            run += 1;
        } else {
            tie_pairs += run * (run - 1);
            run = 1;
        }
    }
    tie_pairs += run * (run - 1);
    let total = (m as u64) * (m as u64 - 1);
    (sorted, tie_pairs as f64 / total as f64)
}

/// PWM form with the empirical CDF plugged in (diagonal included).
///
/// error term `(1/M) sum |y_i - y_obs|`; mean term `(1/M) sum y_i`; CDF term
/// `(1/M) sum y_i F_hat(y_i)`. The self-pair contribution in the CDF term is
/// retained on purpose: this is the biased estimator under study. On a panel
/// whose values are all equal to `y_obs = c` the total degenerates to `-c`.
pub fn crps_pwm_plugin(samples: &[f64], y_obs: f64) -> Result<CrpsEstimate> {
    ensure_finite("y_obs", y_obs)?;
    validate_samples(samples)?;
    let m = samples.len();
    let m_f = m as f64;
    let (sorted, tie_fraction) = sorted_with_tie_fraction(samples);

    let mut err = KahanSum::new();
    let mut mean = KahanSum::new();
    let mut cdf = KahanSum::new();
    let mut i = 0;
    while i < m {
        // run of equal values [i, j): all have F_hat = j/M
        let mut j = i + 1;
        while j < m && sorted[j] == sorted[i] {
            j += 1;
        }
        let f_hat = j as f64 / m_f;
        for &y in &sorted[i..j] {
            err.add((y - y_obs).abs());
            mean.add(y);
            cdf.add(y * f_hat);
        }
        i = j;
    }
    let terms = CrpsTermValues::from_terms(err.value() / m_f, mean.value() / m_f, cdf.value() / m_f);
    Ok(CrpsEstimate {
        value: terms.total,
        terms: Some(terms),
        method: EstimatorKind::PwmPlugin,
        m,
        q: None,
        tie_fraction: Some(tie_fraction),
    })
}

/// Unbiased U-statistic CRPS estimate.
///
/// The CDF term is the mean of `h(y_i, y_j) = (y_i 1{y_i > y_j} + y_j
/// 1{y_j > y_i}) / 2` over ordered pairs `i != j`; strict inequalities zero
/// the diagonal, so exact ties contribute nothing. Computed in O(M log M)
/// from the order statistics: `sum_{i != j} h = sum_k y_(k) * #{values < y_(k)}`.
pub fn crps_unbiased(samples: &[f64], y_obs: f64) -> Result<CrpsEstimate> {
    ensure_finite("y_obs", y_obs)?;
    validate_samples(samples)?;
    let m = samples.len();
    let m_f = m as f64;
    let (sorted, tie_fraction) = sorted_with_tie_fraction(samples);

    let mut err = KahanSum::new();
    let mut mean = KahanSum::new();
    let mut pair = KahanSum::new();
    let mut i = 0;
    while i < m {
        let mut j = i + 1;
        while j < m && sorted[j] == sorted[i] {
            j += 1;
        }
        let below = i as f64; // values strictly less than sorted[i]
        for &y in &sorted[i..j] {
            err.add((y - y_obs).abs());
            mean.add(y);
            pair.add(y * below);
        }
        i = j;
    }
    let cdf_term = pair.value() / (m_f * (m_f - 1.0));
    let terms = CrpsTermValues::from_terms(err.value() / m_f, mean.value() / m_f, cdf_term);
    Ok(CrpsEstimate {
        value: terms.total,
        terms: Some(terms),
        method: EstimatorKind::Unbiased,
        m,
        q: None,
        tie_fraction: Some(tie_fraction),
    })
}

/// Energy-score form `(1/M) sum |y_i - y_obs| - (1/(2 M (M-1))) sum_{i != j}
/// |y_i - y_j|`, an independent algebraic route to the unbiased estimate.
///
/// Equals [`crps_unbiased`] exactly on tie-free samples; on a two-point
/// panel `{c, c}` with `y_obs = c` it returns 0 (the point-mass CRPS).
pub fn crps_energy_form(samples: &[f64], y_obs: f64) -> Result<f64> {
    ensure_finite("y_obs", y_obs)?;
    validate_samples(samples)?;
    let m = samples.len();
    let m_f = m as f64;
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);

    let mut err = KahanSum::new();
    let mut spread = KahanSum::new();
    for (k, &y) in sorted.iter().enumerate() {
        err.add((y - y_obs).abs());
        // sum_{i<j} (y_(j) - y_(i)) via rank weights
        spread.add(y * (2.0 * k as f64 - (m_f - 1.0)));
    }
    Ok(err.value() / m_f - spread.value() / (m_f * (m_f - 1.0)))
}
