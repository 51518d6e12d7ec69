//! Benchmark harness: convergence sweeps, slicewise bias profiles, and
//! model-ranking fidelity, all referenced against the Gaussian closed form.
//!
//! Every sweep cell owns an RNG stream derived from `(master_seed, cell
//! index)`, cells run on a bounded rayon pool (`CRPSQ_WORKERS` overrides the
//! thread count), and results are gathered in configuration order, so a
//! report is a pure function of its config.

use crate::error::{CrpsError, Result};
use crate::estimators::{crps_pwm_plugin, crps_quantile, crps_unbiased, QuantileGrid};
use crate::exact::{crps_gaussian, crps_gaussian_terms};
use crate::forecast::{
    draw_samples, fit_gp, gen_ackley, gen_multisin, GaussianPredictive, SamplePanel,
};
use crate::kahan::{kahan_mean, KahanSum};
use crate::kernquad::crps_kernquad;
use crate::rng::derive_seed;
use rayon::prelude::*;
use serde::Serialize;
use std::time::Instant;

/// Salt for deriving kernel-quadrature landmark seeds from panel seeds.
const KERNQUAD_SEED_SALT: u64 = 0x6b71;

/// Aggregated score over retraining seeds: mean and unbiased sample variance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreAggregate {
    pub mean_score: f64,
    pub variance: f64,
    pub per_seed: Vec<(u64, f64)>,
}

/// Population mean and unbiased sample variance of per-seed scores.
/// A single entry yields variance 0.
pub fn aggregate_seeds(scores: &[(u64, f64)]) -> Result<ScoreAggregate> {
    if scores.is_empty() {
        return Err(CrpsError::invalid("cannot aggregate an empty score list"));
    }
    let values: Vec<f64> = scores.iter().map(|&(_, s)| s).collect();
    let mean = kahan_mean(&values);
    let variance = if values.len() < 2 {
        0.0
    } else {
        let mut acc = KahanSum::new();
        for v in &values {
            acc.add((v - mean) * (v - mean));
        }
        acc.value() / (values.len() - 1) as f64
    };
    Ok(ScoreAggregate {
        mean_score: mean,
        variance,
        per_seed: scores.to_vec(),
    })
}

/// Scoring method applied per test timestep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ScoreMethod {
    /// Gaussian closed form evaluated on the predictives directly.
    Closed,
    Quantile { grid: QuantileGrid },
    PwmPlugin,
    Unbiased,
    KernQuad { s: usize, n: usize },
}

impl ScoreMethod {
    pub fn name(&self) -> &'static str {
        match self {
            ScoreMethod::Closed => "closed",
            ScoreMethod::Quantile { .. } => "quantile",
            ScoreMethod::PwmPlugin => "pwm_plugin",
            ScoreMethod::Unbiased => "unbiased",
            ScoreMethod::KernQuad { .. } => "kernquad",
        }
    }

    pub fn grid_size(&self) -> Option<usize> {
        match self {
            ScoreMethod::Quantile { grid } => Some(grid.len()),
            _ => None,
        }
    }
}

/// Per-timestep estimate and optional term decomposition.
struct SliceEstimate {
    value: f64,
    terms: Option<crate::exact::CrpsTermValues>,
}

fn estimate_slice(
    row: &[f64],
    y_obs: f64,
    pred: &GaussianPredictive,
    method: &ScoreMethod,
    panel_seed: u64,
    slice: usize,
) -> Result<SliceEstimate> {
    Ok(match method {
        ScoreMethod::Closed => SliceEstimate {
            value: crps_gaussian(pred, y_obs)?,
            terms: Some(crps_gaussian_terms(pred, y_obs)?),
        },
        ScoreMethod::Quantile { grid } => {
            let est = crps_quantile(row, y_obs, grid)?;
            SliceEstimate { value: est.value, terms: est.terms }
        }
        ScoreMethod::PwmPlugin => {
            let est = crps_pwm_plugin(row, y_obs)?;
            SliceEstimate { value: est.value, terms: est.terms }
        }
        ScoreMethod::Unbiased => {
            let est = crps_unbiased(row, y_obs)?;
            SliceEstimate { value: est.value, terms: est.terms }
        }
        ScoreMethod::KernQuad { s, n } => {
            let seed = derive_seed(derive_seed(panel_seed, KERNQUAD_SEED_SALT), slice as u64);
            let est = crps_kernquad(row, y_obs, *s, *n, seed)?;
            SliceEstimate { value: est.value, terms: est.terms }
        }
    })
}

/// Per-timestep estimates for one panel under one method.
pub fn score_slices(
    predictives: &[GaussianPredictive],
    panel: &SamplePanel,
    method: &ScoreMethod,
) -> Result<Vec<f64>> {
    if predictives.len() != panel.rows() {
        return Err(CrpsError::invalid(format!(
            "panel has {} rows but {} predictives were supplied",
            panel.rows(),
            predictives.len()
        )));
    }
    let mut out = Vec::with_capacity(panel.rows());
    for (l, (row, (&y_obs, pred))) in panel
        .draws
        .iter()
        .zip(panel.observations.iter().zip(predictives))
        .enumerate()
    {
        out.push(estimate_slice(row, y_obs, pred, method, panel.seed, l)?.value);
    }
    Ok(out)
}

/// Time-averaged score: mean over test timesteps of the per-slice estimate.
pub fn score_model(
    predictives: &[GaussianPredictive],
    panel: &SamplePanel,
    method: &ScoreMethod,
) -> Result<f64> {
    Ok(kahan_mean(&score_slices(predictives, panel, method)?))
}

/// Synthetic benchmark setups with Gaussian predictives.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DatasetSpec {
    /// A single timestep with a known Gaussian predictive — the cleanest
    /// configuration for convergence studies.
    Gaussian { mean: f64, std: f64, y_obs: f64 },
    /// Ackley curve with a random training subset, fitted by the exact GP.
    Ackley {
        n_points: usize,
        n_train: usize,
        domain_lo: f64,
        domain_hi: f64,
        dataset_seed: u64,
        lengthscale: f64,
        signal_var: f64,
        noise_var: f64,
    },
    /// Four-component multi-sinusoid fitted by the exact GP.
    MultiSin {
        freqs: [f64; 4],
        weights: [f64; 4],
        train_len: usize,
        test_len: usize,
        noise_std: f64,
        dataset_seed: u64,
        lengthscale: f64,
        signal_var: f64,
        noise_var: f64,
    },
}

impl DatasetSpec {
    pub fn ackley_default(dataset_seed: u64) -> Self {
        DatasetSpec::Ackley {
            n_points: 209,
            n_train: 9,
            domain_lo: -5.0,
            domain_hi: 5.0,
            dataset_seed,
            lengthscale: 0.5,
            signal_var: 1.0,
            noise_var: 1e-4,
        }
    }

    /// Test inputs, predictives, and observations of the realized setup.
    pub fn realize(&self) -> Result<(Vec<f64>, Vec<GaussianPredictive>, Vec<f64>)> {
        match self {
            DatasetSpec::Gaussian { mean, std, y_obs } => Ok((
                vec![0.0],
                vec![GaussianPredictive::new(*mean, *std)?],
                vec![*y_obs],
            )),
            DatasetSpec::Ackley {
                n_points,
                n_train,
                domain_lo,
                domain_hi,
                dataset_seed,
                lengthscale,
                signal_var,
                noise_var,
            } => {
                let ds = gen_ackley(*n_points, *n_train, *domain_lo, *domain_hi, *dataset_seed)?;
                let preds = fit_gp(&ds, *lengthscale, *signal_var, *noise_var)?;
                Ok((ds.test_inputs().to_vec(), preds, ds.test_outputs().to_vec()))
            }
            DatasetSpec::MultiSin {
                freqs,
                weights,
                train_len,
                test_len,
                noise_std,
                dataset_seed,
                lengthscale,
                signal_var,
                noise_var,
            } => {
                let ds = gen_multisin(*freqs, *weights, *train_len, *test_len, *noise_std, *dataset_seed)?;
                let preds = fit_gp(&ds, *lengthscale, *signal_var, *noise_var)?;
                Ok((ds.test_inputs().to_vec(), preds, ds.test_outputs().to_vec()))
            }
        }
    }
}

/// Configuration of a convergence sweep over sample sizes (and optionally
/// quantile-grid sizes).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceConfig {
    pub dataset: DatasetSpec,
    pub estimators: Vec<ScoreMethod>,
    pub m_sweep: Vec<usize>,
    /// When set, the quantile estimator additionally sweeps these grid sizes
    /// with midpoint grids.
    pub q_sweep: Option<Vec<usize>>,
    pub seeds: usize,
    pub master_seed: u64,
}

/// One sweep cell result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRecord {
    pub estimator: &'static str,
    pub m: usize,
    pub q: Option<usize>,
    pub seed: usize,
    /// Mean over test timesteps of |estimate - closed form|.
    pub abs_error: f64,
    /// Mean over timesteps of per-term absolute errors
    /// (error term, mean term, CDF term); absent for the quantile estimator.
    pub term_errors: Option<[f64; 3]>,
    pub wall_time_ns: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub records: Vec<ConvergenceRecord>,
}

impl ConvergenceReport {
    /// Mean `abs_error` over seeds for a given estimator/M (and Q).
    pub fn mean_abs_error(&self, estimator: &str, m: usize, q: Option<usize>) -> Option<f64> {
        let values: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.estimator == estimator && r.m == m && r.q == q)
            .map(|r| r.abs_error)
            .collect();
        if values.is_empty() {
            None
        } else {
            Some(kahan_mean(&values))
        }
    }

    /// Mean CDF-term absolute error over seeds.
    pub fn mean_cdf_term_error(&self, estimator: &str, m: usize) -> Option<f64> {
        let values: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.estimator == estimator && r.m == m)
            .filter_map(|r| r.term_errors.map(|t| t[2]))
            .collect();
        if values.is_empty() {
            None
        } else {
            Some(kahan_mean(&values))
        }
    }
}

/// Builds the rayon pool honoring the `CRPSQ_WORKERS` override.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var("CRPSQ_WORKERS") {
        let n: usize = raw
            .parse()
            .map_err(|_| CrpsError::Config(format!("CRPSQ_WORKERS must be an integer, got {raw:?}")))?;
        if n > 0 {
            builder = builder.num_threads(n);
        }
    }
    builder
        .build()
        .map_err(|e| CrpsError::Config(format!("failed to build worker pool: {e}")))
}

/// Runs the convergence sweep: for every (estimator, M, Q, seed) cell a
/// fresh panel is drawn and the per-timestep estimates are compared against
/// the closed form.
pub fn run_convergence(config: &ConvergenceConfig) -> Result<ConvergenceReport> {
    if config.m_sweep.is_empty() {
        return Err(CrpsError::Config("m_sweep must not be empty".into()));
    }
    if config.estimators.is_empty() {
        return Err(CrpsError::Config("estimators must not be empty".into()));
    }
    if config.seeds == 0 {
        return Err(CrpsError::Config("seeds must be >= 1".into()));
    }
    if let Some(qs) = &config.q_sweep {
        if qs.is_empty() {
            return Err(CrpsError::Config("q_sweep must not be empty when present".into()));
        }
    }
    let (_, predictives, observations) = config.dataset.realize()?;
    let exact: Vec<f64> = predictives
        .iter()
        .zip(&observations)
        .map(|(p, &y)| crps_gaussian(p, y))
        .collect::<Result<_>>()?;
    let exact_terms: Vec<crate::exact::CrpsTermValues> = predictives
        .iter()
        .zip(&observations)
        .map(|(p, &y)| crps_gaussian_terms(p, y))
        .collect::<Result<_>>()?;

    // enumerate cells in config order
    struct Cell {
        method: ScoreMethod,
        m: usize,
        q: Option<usize>,
        seed_index: usize,
        cell_index: u64,
    }
    let mut cells = Vec::new();
    let mut cell_index = 0u64;
    for method in &config.estimators {
        let q_variants: Vec<Option<usize>> = match (method, &config.q_sweep) {
            (ScoreMethod::Quantile { .. }, Some(qs)) => qs.iter().map(|&q| Some(q)).collect(),
            (ScoreMethod::Quantile { grid }, None) => vec![Some(grid.len())],
            _ => vec![None],
        };
        for q in q_variants {
            for &m in &config.m_sweep {
                for seed_index in 0..config.seeds {
                    let method = match (method, q) {
                        (ScoreMethod::Quantile { grid }, Some(qv)) if qv != grid.len() => {
                            ScoreMethod::Quantile { grid: QuantileGrid::midpoint(qv)? }
                        }
                        _ => method.clone(),
                    };
                    cells.push(Cell { method, m, q, seed_index, cell_index });
                    cell_index += 1;
                }
            }
        }
    }

    let pool = worker_pool()?;
    let records: Result<Vec<ConvergenceRecord>> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let panel_seed = derive_seed(config.master_seed, cell.cell_index);
                let panel = draw_samples(&predictives, &observations, cell.m, panel_seed)?;
                let start = Instant::now();
                let mut abs_err = KahanSum::new();
                let mut term_err = [KahanSum::new(), KahanSum::new(), KahanSum::new()];
                let mut have_terms = true;
                for (l, row) in panel.draws.iter().enumerate() {
                    let est = estimate_slice(
                        row,
                        observations[l],
                        &predictives[l],
                        &cell.method,
                        panel.seed,
                        l,
                    )?;
                    abs_err.add((est.value - exact[l]).abs());
                    match est.terms {
                        Some(t) => {
                            let e = &exact_terms[l];
                            term_err[0].add((t.error_term - e.error_term).abs());
                            term_err[1].add((t.mean_term - e.mean_term).abs());
                            term_err[2].add((t.cdf_term - e.cdf_term).abs());
                        }
                        None => have_terms = false,
                    }
                }
                let t = panel.rows() as f64;
                Ok(ConvergenceRecord {
                    estimator: cell.method.name(),
                    m: cell.m,
                    q: cell.q,
                    seed: cell.seed_index,
                    abs_error: abs_err.value() / t,
                    term_errors: have_terms.then(|| {
                        [
                            term_err[0].value() / t,
                            term_err[1].value() / t,
                            term_err[2].value() / t,
                        ]
                    }),
                    wall_time_ns: start.elapsed().as_nanos(),
                })
            })
            .collect()
    });
    Ok(ConvergenceReport { records: records? })
}

/// Per-timestep signed-error summary for one estimator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceRecord {
    pub estimator: &'static str,
    pub slice: usize,
    pub t: f64,
    /// Mean over seeds of (estimate - closed form).
    pub mean_signed_error: f64,
    /// Standard error of that mean.
    pub std_error: f64,
    pub pred_mean: f64,
    pub pred_std: f64,
    pub crps_exact: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlicewiseReport {
    pub records: Vec<SliceRecord>,
    pub m: usize,
    pub seeds: usize,
}

impl SlicewiseReport {
    pub fn for_estimator(&self, estimator: &str) -> Vec<&SliceRecord> {
        self.records.iter().filter(|r| r.estimator == estimator).collect()
    }
}

/// Slicewise bias study: signed per-timestep errors averaged over seeds,
/// reported next to the predictive mean and the closed-form CRPS profile.
pub fn run_slicewise(
    dataset: &DatasetSpec,
    estimators: &[ScoreMethod],
    m: usize,
    seed_count: usize,
    master_seed: u64,
) -> Result<SlicewiseReport> {
    if estimators.is_empty() {
        return Err(CrpsError::Config("estimators must not be empty".into()));
    }
    if seed_count == 0 {
        return Err(CrpsError::Config("seeds must be >= 1".into()));
    }
    let (times, predictives, observations) = dataset.realize()?;
    let slices = predictives.len();
    let exact: Vec<f64> = predictives
        .iter()
        .zip(&observations)
        .map(|(p, &y)| crps_gaussian(p, y))
        .collect::<Result<_>>()?;

    let pool = worker_pool()?;
    // per seed: per estimator, per slice signed error
    let per_seed: Result<Vec<Vec<Vec<f64>>>> = pool.install(|| {
        (0..seed_count)
            .into_par_iter()
            .map(|seed_index| {
                let panel_seed = derive_seed(master_seed, seed_index as u64);
                let panel = draw_samples(&predictives, &observations, m, panel_seed)?;
                estimators
                    .iter()
                    .map(|method| {
                        let est = score_slices(&predictives, &panel, method)?;
                        Ok(est.iter().zip(&exact).map(|(e, x)| e - x).collect())
                    })
                    .collect()
            })
            .collect()
    });
    let per_seed = per_seed?;

    let mut records = Vec::with_capacity(estimators.len() * slices);
    for (ei, method) in estimators.iter().enumerate() {
        for l in 0..slices {
            let errors: Vec<f64> = per_seed.iter().map(|s| s[ei][l]).collect();
            let mean = kahan_mean(&errors);
            let std_error = if errors.len() < 2 {
                0.0
            } else {
                let mut acc = KahanSum::new();
                for e in &errors {
                    acc.add((e - mean) * (e - mean));
                }
                (acc.value() / (errors.len() - 1) as f64 / errors.len() as f64).sqrt()
            };
            records.push(SliceRecord {
                estimator: method.name(),
                slice: l,
                t: times[l],
                mean_signed_error: mean,
                std_error,
                pred_mean: predictives[l].mean,
                pred_std: predictives[l].std,
                crps_exact: exact[l],
            });
        }
    }
    Ok(SlicewiseReport { records, m, seeds: seed_count })
}

/// A GP hyperparameter variant playing the role of a candidate model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GpVariant {
    pub name: String,
    pub lengthscale: f64,
    pub signal_var: f64,
    pub noise_var: f64,
}

/// Multi-sinusoid generator settings shared by the ranking datasets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiSinSpec {
    pub freqs: [f64; 4],
    pub weights: [f64; 4],
    pub train_len: usize,
    pub test_len: usize,
    pub noise_std: f64,
}

impl MultiSinSpec {
    /// Low-frequency benchmark preset.
    pub fn low_frequency() -> Self {
        MultiSinSpec {
            freqs: [0.1, 1.0, 2.0, 5.0],
            weights: [1.0; 4],
            train_len: 800,
            test_len: 100,
            noise_std: 0.1,
        }
    }

    /// High-frequency benchmark preset.
    pub fn high_frequency() -> Self {
        MultiSinSpec {
            freqs: [1.0, 5.0, 10.0, 20.0],
            weights: [1.0; 4],
            train_len: 800,
            test_len: 100,
            noise_std: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankingConfig {
    pub datasets: Vec<(String, MultiSinSpec)>,
    pub models: Vec<GpVariant>,
    /// Sample-based estimators to rank with; the closed form is always run.
    pub estimators: Vec<ScoreMethod>,
    pub seeds: usize,
    pub m: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankingEntry {
    pub dataset: String,
    pub estimator: &'static str,
    pub model: String,
    pub aggregate: ScoreAggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankingReport {
    pub entries: Vec<RankingEntry>,
}

impl RankingReport {
    fn scores<'a>(
        &'a self,
        dataset: &str,
        estimator: &str,
    ) -> Vec<(&'a str, &'a ScoreAggregate)> {
        self.entries
            .iter()
            .filter(|e| e.dataset == dataset && e.estimator == estimator)
            .map(|e| (e.model.as_str(), &e.aggregate))
            .collect()
    }

    /// Model names ordered by ascending mean score (best first).
    pub fn ordering(&self, dataset: &str, estimator: &str) -> Vec<String> {
        let mut scored = self.scores(dataset, estimator);
        scored.sort_by(|a, b| a.1.mean_score.total_cmp(&b.1.mean_score));
        scored.into_iter().map(|(m, _)| m.to_string()).collect()
    }

    /// Ordering induced by a single seed's scores.
    pub fn ordering_for_seed(&self, dataset: &str, estimator: &str, seed: u64) -> Vec<String> {
        let mut scored: Vec<(String, f64)> = self
            .scores(dataset, estimator)
            .into_iter()
            .filter_map(|(m, agg)| {
                agg.per_seed
                    .iter()
                    .find(|&&(s, _)| s == seed)
                    .map(|&(_, v)| (m.to_string(), v))
            })
            .collect();
        scored.sort_by(|a, b| a.1.total_cmp(&b.1));
        scored.into_iter().map(|(m, _)| m).collect()
    }

    /// Whether the estimator reproduces the closed-form ordering.
    pub fn matches_closed(&self, dataset: &str, estimator: &str) -> bool {
        self.ordering(dataset, estimator) == self.ordering(dataset, "closed")
    }
}

/// Ranking fidelity study: every model variant is fitted per seed on a fresh
/// noise realization of each dataset, scored in closed form and by every
/// estimator on a shared panel, and the induced model orderings are compared.
pub fn run_ranking(config: &RankingConfig) -> Result<RankingReport> {
    if config.models.len() < 2 {
        return Err(CrpsError::Config("ranking needs at least 2 model variants".into()));
    }
    if config.datasets.is_empty() {
        return Err(CrpsError::Config("ranking needs at least one dataset".into()));
    }
    if config.seeds == 0 {
        return Err(CrpsError::Config("seeds must be >= 1".into()));
    }
    let mut methods: Vec<ScoreMethod> = vec![ScoreMethod::Closed];
    methods.extend(config.estimators.iter().cloned());

    // (dataset, model, seed) jobs; panels shared across estimators
    struct Job {
        dataset_idx: usize,
        model_idx: usize,
        seed_index: usize,
    }
    let mut jobs = Vec::new();
    for dataset_idx in 0..config.datasets.len() {
        for model_idx in 0..config.models.len() {
            for seed_index in 0..config.seeds {
                jobs.push(Job { dataset_idx, model_idx, seed_index });
            }
        }
    }

    let pool = worker_pool()?;
    let scored: Result<Vec<Vec<f64>>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let (name_idx, spec) = (&config.datasets[job.dataset_idx].0, &config.datasets[job.dataset_idx].1);
                let _ = name_idx;
                let model = &config.models[job.model_idx];
                // one noise realization per (dataset, seed), shared by models
                let dataset_seed = derive_seed(
                    config.master_seed,
                    (job.dataset_idx as u64) << 32 | job.seed_index as u64,
                );
                let spec = DatasetSpec::MultiSin {
                    freqs: spec.freqs,
                    weights: spec.weights,
                    train_len: spec.train_len,
                    test_len: spec.test_len,
                    noise_std: spec.noise_std,
                    dataset_seed,
                    lengthscale: model.lengthscale,
                    signal_var: model.signal_var,
                    noise_var: model.noise_var,
                };
                let (_, predictives, observations) = spec.realize()?;
                let panel_seed = derive_seed(
                    dataset_seed,
                    0x9a0b_0000 | job.model_idx as u64,
                );
                let panel = draw_samples(&predictives, &observations, config.m, panel_seed)?;
                methods
                    .iter()
                    .map(|method| score_model(&predictives, &panel, method))
                    .collect()
            })
            .collect()
    });
    let scored = scored?;

    let mut entries = Vec::new();
    for (dataset_idx, (dataset_name, _)) in config.datasets.iter().enumerate() {
        for (mi, method) in methods.iter().enumerate() {
            for (model_idx, model) in config.models.iter().enumerate() {
                let per_seed: Vec<(u64, f64)> = jobs
                    .iter()
                    .enumerate()
                    .filter(|(_, j)| j.dataset_idx == dataset_idx && j.model_idx == model_idx)
                    .map(|(ji, j)| (j.seed_index as u64, scored[ji][mi]))
                    .collect();
                entries.push(RankingEntry {
                    dataset: dataset_name.clone(),
                    estimator: method.name(),
                    model: model.name.clone(),
                    aggregate: aggregate_seeds(&per_seed)?,
                });
            }
        }
    }
    Ok(RankingReport { entries })
}

/// Least-squares slope of `ln(y)` against `ln(x)`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(CrpsError::invalid("slope fit needs at least 2 points"));
    }
    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|&(x, y)| {
            if x <= 0.0 || y <= 0.0 {
                Err(CrpsError::invalid("slope fit needs positive coordinates"))
            } else {
                Ok((x.ln(), y.ln()))
            }
        })
        .collect::<Result<_>>()?;
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in logs {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    if den == 0.0 {
        return Err(CrpsError::invalid("slope fit needs distinct x values"));
    }
    Ok(num / den)
}

/// Pearson correlation of two equal-length series.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(CrpsError::invalid("correlation needs two equal-length series (n >= 2)"));
    }
    let ma = kahan_mean(a);
    let mb = kahan_mean(b);
    let mut num = KahanSum::new();
    let mut va = KahanSum::new();
    let mut vb = KahanSum::new();
    for (x, y) in a.iter().zip(b) {
        num.add((x - ma) * (y - mb));
        va.add((x - ma) * (x - ma));
        vb.add((y - mb) * (y - mb));
    }
    let denom = (va.value() * vb.value()).sqrt();
    if denom == 0.0 {
        return Err(CrpsError::invalid("correlation undefined for constant series"));
    }
    Ok(num.value() / denom)
}
