//! Typed harness configurations from `key = value` files.
//!
//! Shared keys: `dataset` (gaussian | ackley | multisin-low | multisin-high),
//! dataset parameters, `estimators`, `grid`/`q`, `kq_s`/`kq_n`, `seeds`,
//! `master_seed`. Mode-specific keys: `m_sweep`/`q_sweep` (convergence),
//! `m` (slicewise, ranking), `datasets`/`models` (ranking). Unknown keys are
//! rejected by name.

use crate::error::{CrpsError, Result};
use crate::estimators::QuantileGrid;
use crate::harness::{
    ConvergenceConfig, DatasetSpec, GpVariant, MultiSinSpec, RankingConfig, ScoreMethod,
};
use crate::io::KvConfig;

fn parse_dataset(kv: &KvConfig) -> Result<DatasetSpec> {
    let kind = kv.get_or("dataset", "gaussian");
    match kind.as_str() {
        "gaussian" => Ok(DatasetSpec::Gaussian {
            mean: kv.get_f64("mean", 0.0)?,
            std: kv.get_f64("std", 1.0)?,
            y_obs: kv.get_f64("y_obs", 0.0)?,
        }),
        "ackley" => Ok(DatasetSpec::Ackley {
            n_points: kv.get_usize("n_points", 209)?,
            n_train: kv.get_usize("n_train", 9)?,
            domain_lo: kv.get_f64("domain_lo", -5.0)?,
            domain_hi: kv.get_f64("domain_hi", 5.0)?,
            dataset_seed: kv.get_u64("dataset_seed", 0)?,
            lengthscale: kv.get_f64("lengthscale", 0.5)?,
            signal_var: kv.get_f64("signal_var", 1.0)?,
            noise_var: kv.get_f64("noise_var", 1e-4)?,
        }),
        "multisin-low" | "multisin-high" => {
            let preset = if kind == "multisin-low" {
                MultiSinSpec::low_frequency()
            } else {
                MultiSinSpec::high_frequency()
            };
            let spec = multisin_overrides(kv, preset)?;
            let n = (spec.train_len + spec.test_len) as f64;
            Ok(DatasetSpec::MultiSin {
                freqs: spec.freqs,
                weights: spec.weights,
                train_len: spec.train_len,
                test_len: spec.test_len,
                noise_std: spec.noise_std,
                dataset_seed: kv.get_u64("dataset_seed", 0)?,
                // default lengthscale: ten timesteps
                lengthscale: kv.get_f64("lengthscale", 10.0 / n)?,
                signal_var: kv.get_f64("signal_var", 1.0)?,
                noise_var: kv.get_f64("noise_var", 1e-2)?,
            })
        }
        other => Err(CrpsError::Config(format!(
            "dataset must be gaussian, ackley, multisin-low or multisin-high, got {other:?}"
        ))),
    }
}

fn multisin_overrides(kv: &KvConfig, mut spec: MultiSinSpec) -> Result<MultiSinSpec> {
    if let Some(freqs) = kv.get_f64_list("freqs")? {
        spec.freqs = four(&freqs, "freqs")?;
    }
    if let Some(weights) = kv.get_f64_list("weights")? {
        spec.weights = four(&weights, "weights")?;
    }
    spec.train_len = kv.get_usize("train_len", spec.train_len)?;
    spec.test_len = kv.get_usize("test_len", spec.test_len)?;
    spec.noise_std = kv.get_f64("noise_std", spec.noise_std)?;
    Ok(spec)
}

fn four(values: &[f64], key: &str) -> Result<[f64; 4]> {
    values
        .try_into()
        .map_err(|_| CrpsError::Config(format!("key {key}: expected exactly 4 values")))
}

fn parse_grid(kv: &KvConfig) -> Result<QuantileGrid> {
    let q = kv.get_usize("q", 9)?;
    match kv.get_or("grid", "deciles").as_str() {
        "deciles" => Ok(QuantileGrid::deciles()),
        "midpoint" => QuantileGrid::midpoint(q),
        other => Err(CrpsError::Config(format!(
            "grid must be deciles or midpoint, got {other:?}"
        ))),
    }
}

fn parse_estimators(kv: &KvConfig, default: &str) -> Result<Vec<ScoreMethod>> {
    let grid = parse_grid(kv)?;
    let kq_s = kv.get_usize("kq_s", 500)?;
    let kq_n = kv.get_usize("kq_n", 64)?;
    let names = kv.get_or("estimators", default);
    let mut methods = Vec::new();
    for name in names.split(',') {
        methods.push(match name.trim() {
            "closed" => ScoreMethod::Closed,
            "quantile" => ScoreMethod::Quantile { grid: grid.clone() },
            "pwm_plugin" => ScoreMethod::PwmPlugin,
            "unbiased" => ScoreMethod::Unbiased,
            "kernquad" => ScoreMethod::KernQuad { s: kq_s, n: kq_n },
            other => {
                return Err(CrpsError::Config(format!(
                    "unknown estimator {other:?} (expected closed, quantile, pwm_plugin, unbiased or kernquad)"
                )))
            }
        });
    }
    Ok(methods)
}

/// Convergence-sweep config (`m_sweep` required).
pub fn convergence_config(kv: &KvConfig) -> Result<ConvergenceConfig> {
    let config = ConvergenceConfig {
        dataset: parse_dataset(kv)?,
        estimators: parse_estimators(kv, "quantile,pwm_plugin,unbiased,kernquad")?,
        m_sweep: kv
            .get_usize_list("m_sweep")?
            .ok_or_else(|| CrpsError::Config("missing required key m_sweep".into()))?,
        q_sweep: kv.get_usize_list("q_sweep")?,
        seeds: kv.get_usize("seeds", 10)?,
        master_seed: kv.get_u64("master_seed", 42)?,
    };
    kv.finish()?;
    Ok(config)
}

/// Slicewise-study config: dataset, estimators, panel size, seed count.
pub fn slicewise_config(kv: &KvConfig) -> Result<(DatasetSpec, Vec<ScoreMethod>, usize, usize, u64)> {
    let parsed = (
        parse_dataset(kv)?,
        parse_estimators(kv, "quantile,pwm_plugin,unbiased")?,
        kv.get_usize("m", 100)?,
        kv.get_usize("seeds", 100)?,
        kv.get_u64("master_seed", 42)?,
    );
    kv.finish()?;
    Ok(parsed)
}

/// Ranking-study config. `models` is a semicolon-separated list of
/// `name:lengthscale:signal_var:noise_var`; `datasets` selects the
/// multi-sinusoid presets (`low`, `high`).
pub fn ranking_config(kv: &KvConfig) -> Result<RankingConfig> {
    let mut datasets = Vec::new();
    for name in kv.get_or("datasets", "high").split(',') {
        let preset = match name.trim() {
            "low" => MultiSinSpec::low_frequency(),
            "high" => MultiSinSpec::high_frequency(),
            other => {
                return Err(CrpsError::Config(format!(
                    "datasets entries must be low or high, got {other:?}"
                )))
            }
        };
        datasets.push((name.trim().to_string(), multisin_overrides(kv, preset)?));
    }
    let models_raw = kv
        .get("models")
        .ok_or_else(|| CrpsError::Config("missing required key models".into()))?;
    let mut models = Vec::new();
    for chunk in models_raw.split(';') {
        let fields: Vec<&str> = chunk.trim().split(':').collect();
        if fields.len() != 4 {
            return Err(CrpsError::Config(format!(
                "model entry {chunk:?} must be name:lengthscale:signal_var:noise_var"
            )));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|_| CrpsError::Config(format!("model {what} must be a number, got {s:?}")))
        };
        models.push(GpVariant {
            name: fields[0].trim().to_string(),
            lengthscale: num(fields[1], "lengthscale")?,
            signal_var: num(fields[2], "signal_var")?,
            noise_var: num(fields[3], "noise_var")?,
        });
    }
    let config = RankingConfig {
        datasets,
        models,
        estimators: parse_estimators(kv, "quantile,pwm_plugin,unbiased,kernquad")?,
        seeds: kv.get_usize("seeds", 3)?,
        m: kv.get_usize("m", 100)?,
        master_seed: kv.get_u64("master_seed", 42)?,
    };
    kv.finish()?;
    Ok(config)
}
