//! Synthetic ground truth, a minimal exact GP regressor, and forecast sampling.
//!
//! Two generators cover the benchmark setups: a 1-D Ackley curve with a
//! small random training subset, and a four-component multi-sinusoid with
//! additive Gaussian noise. `fit_gp` performs exact GP regression with a
//! squared-exponential kernel and fixed hyperparameters; `draw_samples`
//! turns the per-timestep Gaussian predictives into an i.i.d. sample panel.

use crate::error::{ensure_all_finite, ensure_finite, CrpsError, Result};
use crate::rng::stream_rng;
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::seq::index::sample as index_sample;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

/// A scalar time series split into a training prefix and a test suffix.
///
/// `inputs[..split]` / `outputs[..split]` are the training points and the
/// rest is the test segment. Each segment is strictly increasing in time;
/// for randomly subsampled training sets (Ackley) the two segments interleave
/// on the time axis, so monotonicity holds per segment rather than globally.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSeriesDataset {
    pub inputs: Vec<f64>,
    pub outputs: Vec<f64>,
    /// Number of training points (the paper's L); test size is `len - split`.
    pub split: usize,
}

impl TimeSeriesDataset {
    pub fn new(inputs: Vec<f64>, outputs: Vec<f64>, split: usize) -> Result<Self> {
        if inputs.len() != outputs.len() {
            return Err(CrpsError::invalid(format!(
                "inputs ({}) and outputs ({}) must have equal length",
                inputs.len(),
                outputs.len()
            )));
        }
        if split == 0 || split >= inputs.len() {
            return Err(CrpsError::invalid(format!(
                "split must lie in [1, {}], got {split}",
                inputs.len().saturating_sub(1)
            )));
        }
        ensure_all_finite("inputs", &inputs)?;
        ensure_all_finite("outputs", &outputs)?;
        for segment in [&inputs[..split], &inputs[split..]] {
            for w in segment.windows(2) {
                if w[1] <= w[0] {
                    return Err(CrpsError::invalid(
                        "timestamps must be strictly increasing within each segment",
                    ));
                }
            }
        }
        Ok(TimeSeriesDataset { inputs, outputs, split })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn train_inputs(&self) -> &[f64] {
        &self.inputs[..self.split]
    }

    pub fn train_outputs(&self) -> &[f64] {
        &self.outputs[..self.split]
    }

    pub fn test_inputs(&self) -> &[f64] {
        &self.inputs[self.split..]
    }

    pub fn test_outputs(&self) -> &[f64] {
        &self.outputs[self.split..]
    }
}

/// Per-timestep Gaussian predictive distribution N(mean, std^2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianPredictive {
    pub mean: f64,
    pub std: f64,
}

impl GaussianPredictive {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        ensure_finite("mean", mean)?;
        ensure_finite("std", std)?;
        if std <= 0.0 {
            return Err(CrpsError::invalid(format!("std must be positive, got {std}")));
        }
        Ok(GaussianPredictive { mean, std })
    }
}

/// T x M matrix of forecast draws plus the T observed values.
///
/// Row `l` holds M i.i.d. draws of the forecast at test timestep `l`.
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePanel {
    pub draws: Vec<Vec<f64>>,
    pub observations: Vec<f64>,
    pub seed: u64,
}

impl SamplePanel {
    pub fn new(draws: Vec<Vec<f64>>, observations: Vec<f64>, seed: u64) -> Result<Self> {
        if draws.len() != observations.len() {
            return Err(CrpsError::invalid(format!(
                "panel has {} rows but {} observations",
                draws.len(),
                observations.len()
            )));
        }
        let m = draws.first().map_or(0, Vec::len);
        if m < 2 {
            return Err(CrpsError::invalid("panel needs M >= 2 samples per row"));
        }
        for (l, row) in draws.iter().enumerate() {
            if row.len() != m {
                return Err(CrpsError::invalid(format!(
                    "row {l} has {} samples, expected {m}",
                    row.len()
                )));
            }
            ensure_all_finite("draws", row)?;
        }
        ensure_all_finite("observations", &observations)?;
        Ok(SamplePanel { draws, observations, seed })
    }

    /// Number of test timesteps (rows).
    pub fn rows(&self) -> usize {
        self.draws.len()
    }

    /// Samples per row.
    pub fn samples_per_row(&self) -> usize {
        self.draws.first().map_or(0, Vec::len)
    }
}

/// 1-D Ackley function, standard parameters a=20, b=0.2, c=2*pi.
pub fn ackley(x: f64) -> f64 {
    let a = 20.0;
    let b = 0.2;
    let c = 2.0 * std::f64::consts::PI;
    a + std::f64::consts::E - a * (-b * x.abs()).exp() - (c * x).cos().exp()
}

/// Samples the Ackley curve on an equispaced grid over `[domain_lo, domain_hi]`
/// and marks `n_train` grid points, drawn uniformly without replacement, as
/// the training set. The remaining points form the test set; both segments
/// are stored sorted by time.
pub fn gen_ackley(
    n_points: usize,
    n_train: usize,
    domain_lo: f64,
    domain_hi: f64,
    seed: u64,
) -> Result<TimeSeriesDataset> {
    if !(domain_lo < domain_hi) {
        return Err(CrpsError::invalid(format!(
            "domain bounds must satisfy lo < hi, got [{domain_lo}, {domain_hi}]"
        )));
    }
    ensure_finite("domain_lo", domain_lo)?;
    ensure_finite("domain_hi", domain_hi)?;
    if n_points < 2 {
        return Err(CrpsError::invalid("need at least 2 grid points"));
    }
    if n_train == 0 || n_train >= n_points {
        return Err(CrpsError::invalid(format!(
            "n_train must lie in [1, {}], got {n_train}",
            n_points - 1
        )));
    }
    let step = (domain_hi - domain_lo) / (n_points - 1) as f64;
    let grid: Vec<f64> = (0..n_points).map(|i| domain_lo + i as f64 * step).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx = index_sample(&mut rng, n_points, n_train).into_vec();
    train_idx.sort_unstable();

    let mut is_train = vec![false; n_points];
    for &i in &train_idx {
        is_train[i] = true;
    }
    let mut inputs = Vec::with_capacity(n_points);
    let mut outputs = Vec::with_capacity(n_points);
    for &i in &train_idx {
        inputs.push(grid[i]);
        outputs.push(ackley(grid[i]));
    }
    for (i, &x) in grid.iter().enumerate() {
        if !is_train[i] {
            inputs.push(x);
            outputs.push(ackley(x));
        }
    }
    TimeSeriesDataset::new(inputs, outputs, n_train)
}

/// Weighted sum of four sinusoids on the unit interval, plus i.i.d. Gaussian
/// noise: `y(t) = sum_k weights[k] sin(2 pi freqs[k] t) + eps`, evaluated on
/// the equispaced grid `t_i = i / (train_len + test_len)`.
///
/// With `noise_std = 0` the output is independent of `seed`.
pub fn gen_multisin(
    freqs: [f64; 4],
    weights: [f64; 4],
    train_len: usize,
    test_len: usize,
    noise_std: f64,
    seed: u64,
) -> Result<TimeSeriesDataset> {
    ensure_all_finite("freqs", &freqs)?;
    ensure_all_finite("weights", &weights)?;
    ensure_finite("noise_std", noise_std)?;
    if noise_std < 0.0 {
        return Err(CrpsError::invalid(format!(
            "noise_std must be nonnegative, got {noise_std}"
        )));
    }
    if train_len == 0 || test_len == 0 {
        return Err(CrpsError::invalid("train_len and test_len must be >= 1"));
    }
    let n = train_len + test_len;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = if noise_std > 0.0 {
        Some(Normal::new(0.0, noise_std).map_err(|e| CrpsError::invalid(e.to_string()))?)
    } else {
        None
    };
    let mut inputs = Vec::with_capacity(n);
    let mut outputs = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / n as f64;
        let mut y = 0.0;
        for k in 0..4 {
            y += weights[k] * (2.0 * std::f64::consts::PI * freqs[k] * t).sin();
        }
        if let Some(dist) = &noise {
            y += dist.sample(&mut rng);
        }
        inputs.push(t);
        outputs.push(y);
    }
    TimeSeriesDataset::new(inputs, outputs, train_len)
}

/// Exact GP regression with a squared-exponential kernel and fixed
/// hyperparameters, zero prior mean.
///
/// Returns the posterior predictive N(mean, var) at every test input, with
/// `noise_var` included in the predictive variance. The training Gram matrix
/// is factorized by Cholesky after adding a diagonal jitter of
/// `1e-10 * trace/n`, escalated tenfold up to five times before giving up.
pub fn fit_gp(
    dataset: &TimeSeriesDataset,
    lengthscale: f64,
    signal_var: f64,
    noise_var: f64,
) -> Result<Vec<GaussianPredictive>> {
    for (name, v) in [
        ("lengthscale", lengthscale),
        ("signal_var", signal_var),
        ("noise_var", noise_var),
    ] {
        ensure_finite(name, v)?;
    }
    if lengthscale <= 0.0 || signal_var <= 0.0 || noise_var < 0.0 {
        return Err(CrpsError::invalid(
            "lengthscale and signal_var must be positive, noise_var nonnegative",
        ));
    }
    let xs = dataset.train_inputs();
    let ys = DVector::from_column_slice(dataset.train_outputs());
    let n = xs.len();

    let se = |a: f64, b: f64| {
        let d = (a - b) / lengthscale;
        signal_var * (-0.5 * d * d).exp()
    };
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = se(xs[i], xs[j]);
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    for i in 0..n {
        gram[(i, i)] += noise_var;
    }

    let base_jitter = 1e-10 * gram.trace() / n as f64;
    let mut chol: Option<Cholesky<f64, nalgebra::Dyn>> = None;
    for escalation in 0..=5u32 {
        let jitter = base_jitter * 10f64.powi(escalation as i32);
        let mut attempt = gram.clone();
        for i in 0..n {
            attempt[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(attempt) {
            chol = Some(c);
            break;
        }
    }
    let chol = chol.ok_or_else(|| {
        CrpsError::numerical("training Gram matrix not positive definite after jitter escalation")
    })?;
    let alpha = chol.solve(&ys);

    let prior_var = signal_var + noise_var;
    let mut preds = Vec::with_capacity(dataset.test_inputs().len());
    for &x_star in dataset.test_inputs() {
        let k_star = DVector::from_iterator(n, xs.iter().map(|&x| se(x, x_star)));
        let mean = k_star.dot(&alpha);
        let v = chol.l_dirty().solve_lower_triangular(&k_star).ok_or_else(|| {
            CrpsError::numerical("triangular solve failed in GP prediction")
        })?;
        let var = (prior_var - v.norm_squared()).max(prior_var * 1e-18);
        preds.push(GaussianPredictive::new(mean, var.sqrt())?);
    }
    Ok(preds)
}

/// Draws an M-sample panel from per-timestep Gaussian predictives.
///
/// Row `l` uses ChaCha8 stream `l` of `seed`, so the panel is a pure function
/// of `(predictives, observations, m, seed)` and rows can be regenerated
/// independently.
pub fn draw_samples(
    predictives: &[GaussianPredictive],
    observations: &[f64],
    m: usize,
    seed: u64,
) -> Result<SamplePanel> {
    if m < 2 {
        return Err(CrpsError::invalid("need M >= 2 samples per row"));
    }
    if predictives.len() != observations.len() {
        return Err(CrpsError::invalid(format!(
            "{} predictives but {} observations",
            predictives.len(),
            observations.len()
        )));
    }
    if predictives.is_empty() {
        return Err(CrpsError::invalid("need at least one timestep"));
    }
    let mut draws = Vec::with_capacity(predictives.len());
    for (l, p) in predictives.iter().enumerate() {
        let mut rng = stream_rng(seed, l as u64);
        let row: Vec<f64> = (0..m)
            .map(|_| p.mean + p.std * rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        draws.push(row);
    }
    SamplePanel::new(draws, observations.to_vec(), seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ackley_minimum_and_symmetry() {
        assert_abs_diff_eq!(ackley(0.0), 0.0, epsilon = 1e-12);
        for i in 1..50 {
            let x = i as f64 * 0.17;
            assert_abs_diff_eq!(ackley(x), ackley(-x), epsilon = 1e-12);
            assert!(ackley(x) > 0.0);
        }
    }

    #[test]
    fn gen_ackley_fig2_shape() {
        let ds = gen_ackley(209, 9, -5.0, 5.0, 3).unwrap();
        assert_eq!(ds.split, 9);
        assert_eq!(ds.len(), 209);
        assert_eq!(ds.test_inputs().len(), 200);
        // outputs are the Ackley values of the inputs
        for (x, y) in ds.inputs.iter().zip(&ds.outputs) {
            assert_abs_diff_eq!(ackley(*x), *y, epsilon = 1e-12);
        }
        // deterministic in the seed
        assert_eq!(ds, gen_ackley(209, 9, -5.0, 5.0, 3).unwrap());
        assert_ne!(ds, gen_ackley(209, 9, -5.0, 5.0, 4).unwrap());
    }

    #[test]
    fn gen_ackley_rejects_bad_domain() {
        assert!(gen_ackley(10, 3, 5.0, -5.0, 0).is_err());
        assert!(gen_ackley(10, 3, 1.0, 1.0, 0).is_err());
        assert!(gen_ackley(1, 0, -1.0, 1.0, 0).is_err());
        assert!(gen_ackley(10, 10, -1.0, 1.0, 0).is_err());
    }

    #[test]
    fn multisin_zero_weights_is_zero_series() {
        let ds = gen_multisin([0.1, 1.0, 2.0, 5.0], [0.0; 4], 10, 5, 0.0, 9).unwrap();
        assert!(ds.outputs.iter().all(|&y| y == 0.0));
    }

    #[test]
    fn multisin_noise_free_ignores_seed() {
        let a = gen_multisin([1.0, 5.0, 10.0, 20.0], [1.0; 4], 800, 100, 0.0, 1).unwrap();
        let b = gen_multisin([1.0, 5.0, 10.0, 20.0], [1.0; 4], 800, 100, 0.0, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.split, 800);
        assert_eq!(a.len(), 900);
    }

    #[test]
    fn multisin_rejects_negative_noise() {
        assert!(gen_multisin([0.1, 1.0, 2.0, 5.0], [1.0; 4], 10, 5, -0.1, 0).is_err());
    }

    #[test]
    fn multisin_matches_formula() {
        let freqs = [0.1, 1.0, 2.0, 5.0];
        let weights = [1.0, 0.5, 0.25, 2.0];
        let ds = gen_multisin(freqs, weights, 8, 4, 0.0, 0).unwrap();
        let t = 3.0 / 12.0;
        let expect: f64 = (0..4)
            .map(|k| weights[k] * (2.0 * std::f64::consts::PI * freqs[k] * t).sin())
            .sum();
        assert_abs_diff_eq!(ds.outputs[3], expect, epsilon = 1e-12);
    }

    #[test]
    fn gp_interpolates_noise_free_training_points() {
        // test point coincides with a training point; noise_var ~ 0
        let ds = TimeSeriesDataset::new(
            vec![-1.0, 0.0, 1.0, 0.0],
            vec![0.3, -0.2, 0.5, -0.2],
            3,
        )
        .unwrap();
        let preds = fit_gp(&ds, 0.5, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(preds[0].mean, -0.2, epsilon = 1e-6);
        assert!(preds[0].std <= 1e-3);
    }

    #[test]
    fn gp_reverts_to_prior_far_from_data() {
        let ds = TimeSeriesDataset::new(vec![0.0, 0.1, 50.0], vec![1.0, 0.8, 0.0], 2).unwrap();
        let preds = fit_gp(&ds, 0.5, 1.3, 0.01).unwrap();
        // 50 is 100 lengthscales away from all training points
        assert_abs_diff_eq!(preds[0].mean, 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(preds[0].std * preds[0].std, 1.31, epsilon = 1e-6);
    }

    #[test]
    fn gp_two_point_closed_form() {
        // Hand-sized 2x2 system solved directly.
        let (x1, x2, xs) = (0.0, 1.0, 0.4);
        let (y1, y2) = (1.0, -1.0);
        let (ell, sv, nv) = (0.7, 1.5, 0.01);
        let ds = TimeSeriesDataset::new(vec![x1, x2, xs], vec![y1, y2, 0.0], 2).unwrap();
        let preds = fit_gp(&ds, ell, sv, nv).unwrap();

        let k = |a: f64, b: f64| sv * (-0.5 * ((a - b) / ell).powi(2)).exp();
        let (a11, a12, a22) = (k(x1, x1) + nv, k(x1, x2), k(x2, x2) + nv);
        let det = a11 * a22 - a12 * a12;
        // inverse of [[a11,a12],[a12,a22]] applied to [y1,y2]
        let alpha1 = (a22 * y1 - a12 * y2) / det;
        let alpha2 = (-a12 * y1 + a11 * y2) / det;
        let (k1, k2) = (k(x1, xs), k(x2, xs));
        let mean = k1 * alpha1 + k2 * alpha2;
        // var = prior - k* A^{-1} k*
        let q1 = (a22 * k1 - a12 * k2) / det;
        let q2 = (-a12 * k1 + a11 * k2) / det;
        let var = sv + nv - (k1 * q1 + k2 * q2);

        assert_abs_diff_eq!(preds[0].mean, mean, epsilon = 1e-9);
        assert_abs_diff_eq!(preds[0].std * preds[0].std, var, epsilon = 1e-8);
    }

    #[test]
    fn gp_posterior_variance_bounded_by_prior() {
        let ds = gen_ackley(60, 12, -5.0, 5.0, 11).unwrap();
        let preds = fit_gp(&ds, 0.5, 1.0, 1e-4).unwrap();
        for p in &preds {
            assert!(p.std > 0.0);
            assert!(p.std * p.std <= 1.0 + 1e-4 + 1e-12);
        }
    }

    #[test]
    fn draw_samples_deterministic_and_degenerate() {
        let preds = vec![GaussianPredictive::new(5.0, 1e-12).unwrap()];
        let obs = [5.0];
        let panel = draw_samples(&preds, &obs, 64, 42).unwrap();
        assert!(panel.draws[0].iter().all(|&v| (v - 5.0).abs() < 1e-9));
        let again = draw_samples(&preds, &obs, 64, 42).unwrap();
        assert_eq!(panel, again);
        let other = draw_samples(&preds, &obs, 64, 43).unwrap();
        assert_ne!(panel, other);
    }

    #[test]
    fn draw_samples_clt_bound() {
        let preds = vec![GaussianPredictive::new(0.0, 1.0).unwrap()];
        let panel = draw_samples(&preds, &[0.0], 1_000_000, 7).unwrap();
        let mean = crate::kahan::kahan_mean(&panel.draws[0]);
        assert!(mean.abs() < 0.005, "CLT bound violated: {mean}");
    }

    #[test]
    fn draw_samples_requires_two() {
        let preds = vec![GaussianPredictive::new(0.0, 1.0).unwrap()];
        assert!(draw_samples(&preds, &[0.0], 1, 0).is_err());
    }

    #[test]
    fn dataset_invariants_enforced() {
        assert!(TimeSeriesDataset::new(vec![0.0, 1.0], vec![0.0], 1).is_err());
        assert!(TimeSeriesDataset::new(vec![0.0, 1.0], vec![0.0, 1.0], 0).is_err());
        assert!(TimeSeriesDataset::new(vec![0.0, 1.0], vec![0.0, 1.0], 2).is_err());
        assert!(TimeSeriesDataset::new(vec![1.0, 0.5, 2.0], vec![0.0; 3], 2).is_err());
        assert!(TimeSeriesDataset::new(vec![0.0, f64::NAN], vec![0.0, 1.0], 1).is_err());
        assert!(GaussianPredictive::new(0.0, 0.0).is_err());
        assert!(GaussianPredictive::new(0.0, -1.0).is_err());
        assert!(GaussianPredictive::new(f64::NAN, 1.0).is_err());
    }
}
