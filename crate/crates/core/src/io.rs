//! CSV serialization and the plain-text `key = value` config format.
//!
//! Floats are always written with 17 significant digits (`{:.16e}`), which
//! round-trips every f64 exactly, so rerunning any command with the same
//! seeds produces byte-identical files.
//!
//! Schemas:
//! * dataset:      `t,y,split` with split in {train, test}
//! * predictives:  `t,y_obs,mean,std`
//! * panel:        `t,y_obs,s_1,...,s_M`
//! * support:      `index,value,weight`
//! * convergence:  `estimator,m,q,seed,abs_error,err_error_term,err_mean_term,err_cdf_term[,wall_time_ns]`
//! * slicewise:    `estimator,slice,t,mean_signed_error,std_error,pred_mean,pred_std,crps_exact`
//! * ranking:      `dataset,estimator,model,seed,score`

use crate::error::{CrpsError, Result};
use crate::forecast::{GaussianPredictive, SamplePanel, TimeSeriesDataset};
use crate::harness::{ConvergenceReport, RankingReport, SlicewiseReport};
use crate::kernquad::WeightedSupport;
use std::collections::HashMap;
use std::io::{BufRead, Write};

/// Fixed 17-significant-digit float formatting.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_float(raw: &str, line: usize, column: &str) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|_| CrpsError::Parse {
        line,
        msg: format!("column {column}: expected a number, got {raw:?}"),
    })
}

/// Splits CSV lines, skipping blank lines and `#` comments but keeping the
/// original 1-based line numbers for diagnostics.
fn csv_rows(text: &str) -> Vec<(usize, Vec<String>)> {
    text.lines()
        .enumerate()
        .filter_map(|(i, line)| {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                None
            } else {
                Some((i + 1, trimmed.split(',').map(|f| f.trim().to_string()).collect()))
            }
        })
        .collect()
}

fn read_to_string(reader: &mut impl BufRead) -> Result<String> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    Ok(text)
}

fn expect_header(rows: &[(usize, Vec<String>)], expected: &[&str]) -> Result<()> {
    match rows.first() {
        Some((line, fields)) => {
            if fields.len() < expected.len()
                || fields[..expected.len()].iter().zip(expected).any(|(f, e)| f != e)
            {
                Err(CrpsError::Parse {
                    line: *line,
                    msg: format!("expected header starting with {:?}, got {:?}", expected.join(","), fields.join(",")),
                })
            } else {
                Ok(())
            }
        }
        None => Err(CrpsError::Parse { line: 1, msg: "empty file".into() }),
    }
}

pub fn write_dataset_csv(w: &mut impl Write, ds: &TimeSeriesDataset) -> Result<()> {
    writeln!(w, "t,y,split")?;
    for (i, (t, y)) in ds.inputs.iter().zip(&ds.outputs).enumerate() {
        let label = if i < ds.split { "train" } else { "test" };
        writeln!(w, "{},{},{}", fmt_float(*t), fmt_float(*y), label)?;
    }
    Ok(())
}

pub fn read_dataset_csv(reader: &mut impl BufRead) -> Result<TimeSeriesDataset> {
    let text = read_to_string(reader)?;
    let rows = csv_rows(&text);
    expect_header(&rows, &["t", "y", "split"])?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (line, fields) in &rows[1..] {
        if fields.len() != 3 {
            return Err(CrpsError::Parse {
                line: *line,
                msg: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let t = parse_float(&fields[0], *line, "t")?;
        let y = parse_float(&fields[1], *line, "y")?;
        match fields[2].as_str() {
            "train" => train.push((t, y)),
            "test" => test.push((t, y)),
            other => {
                return Err(CrpsError::Parse {
                    line: *line,
                    msg: format!("column split: expected train or test, got {other:?}"),
                })
            }
        }
    }
    let split = train.len();
    let mut inputs = Vec::with_capacity(train.len() + test.len());
    let mut outputs = Vec::with_capacity(inputs.capacity());
    for (t, y) in train.into_iter().chain(test) {
        inputs.push(t);
        outputs.push(y);
    }
    TimeSeriesDataset::new(inputs, outputs, split)
}

pub fn write_predictives_csv(
    w: &mut impl Write,
    times: &[f64],
    observations: &[f64],
    predictives: &[GaussianPredictive],
) -> Result<()> {
    writeln!(w, "t,y_obs,mean,std")?;
    for ((t, y), p) in times.iter().zip(observations).zip(predictives) {
        writeln!(
            w,
            "{},{},{},{}",
            fmt_float(*t),
            fmt_float(*y),
            fmt_float(p.mean),
            fmt_float(p.std)
        )?;
    }
    Ok(())
}

pub fn read_predictives_csv(
    reader: &mut impl BufRead,
) -> Result<(Vec<f64>, Vec<f64>, Vec<GaussianPredictive>)> {
    let text = read_to_string(reader)?;
    let rows = csv_rows(&text);
    expect_header(&rows, &["t", "y_obs", "mean", "std"])?;
    let mut times = Vec::new();
    let mut observations = Vec::new();
    let mut predictives = Vec::new();
    for (line, fields) in &rows[1..] {
        if fields.len() != 4 {
            return Err(CrpsError::Parse {
                line: *line,
                msg: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        times.push(parse_float(&fields[0], *line, "t")?);
        observations.push(parse_float(&fields[1], *line, "y_obs")?);
        let mean = parse_float(&fields[2], *line, "mean")?;
        let std = parse_float(&fields[3], *line, "std")?;
        predictives.push(GaussianPredictive::new(mean, std).map_err(|e| CrpsError::Parse {
            line: *line,
            msg: e.to_string(),
        })?);
    }
    Ok((times, observations, predictives))
}

pub fn write_panel_csv(w: &mut impl Write, times: &[f64], panel: &SamplePanel) -> Result<()> {
    let m = panel.samples_per_row();
    write!(w, "t,y_obs")?;
    for j in 1..=m {
        write!(w, ",s_{j}")?;
    }
    writeln!(w)?;
    for ((t, y), row) in times.iter().zip(&panel.observations).zip(&panel.draws) {
        write!(w, "{},{}", fmt_float(*t), fmt_float(*y))?;
        for v in row {
            write!(w, ",{}", fmt_float(*v))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Reads a panel CSV. The file carries no seed, so the returned panel has
/// seed 0; pass an explicit seed to seed-dependent estimators instead.
pub fn read_panel_csv(reader: &mut impl BufRead) -> Result<(Vec<f64>, SamplePanel)> {
    let text = read_to_string(reader)?;
    let rows = csv_rows(&text);
    expect_header(&rows, &["t", "y_obs", "s_1"])?;
    let width = rows[0].1.len();
    if width < 4 {
        return Err(CrpsError::Parse {
            line: rows[0].0,
            msg: "panel needs at least two sample columns (s_1, s_2)".into(),
        });
    }
    let mut times = Vec::new();
    let mut observations = Vec::new();
    let mut draws = Vec::new();
    for (line, fields) in &rows[1..] {
        if fields.len() != width {
            return Err(CrpsError::Parse {
                line: *line,
                msg: format!("expected {width} fields, got {}", fields.len()),
            });
        }
        times.push(parse_float(&fields[0], *line, "t")?);
        observations.push(parse_float(&fields[1], *line, "y_obs")?);
        let row: Vec<f64> = fields[2..]
            .iter()
            .enumerate()
            .map(|(j, f)| parse_float(f, *line, &format!("s_{}", j + 1)))
            .collect::<Result<_>>()?;
        draws.push(row);
    }
    if draws.is_empty() {
        return Err(CrpsError::Parse { line: rows[0].0, msg: "panel has no data rows".into() });
    }
    let panel = SamplePanel::new(draws, observations, 0)
        .map_err(|e| CrpsError::Parse { line: rows[0].0, msg: e.to_string() })?;
    Ok((times, panel))
}

/// Reads a single-column list of sample values (optional `value` header).
pub fn read_samples_csv(reader: &mut impl BufRead) -> Result<Vec<f64>> {
    let text = read_to_string(reader)?;
    let rows = csv_rows(&text);
    let mut samples = Vec::new();
    for (pos, (line, fields)) in rows.iter().enumerate() {
        if pos == 0 && fields.len() == 1 && fields[0] == "value" {
            continue;
        }
        if fields.len() != 1 {
            return Err(CrpsError::Parse {
                line: *line,
                msg: format!("expected a single value per line, got {} fields", fields.len()),
            });
        }
        samples.push(parse_float(&fields[0], *line, "value")?);
    }
    Ok(samples)
}

pub fn write_support_csv(
    w: &mut impl Write,
    support: &WeightedSupport,
    values: &[f64],
) -> Result<()> {
    writeln!(w, "index,value,weight")?;
    for (&i, &weight) in support.indices.iter().zip(&support.weights) {
        writeln!(w, "{},{},{}", i, fmt_float(values[i]), fmt_float(weight))?;
    }
    Ok(())
}

/// Convergence report CSV. `timing` appends the wall-time column; reruns are
/// byte-identical only without it.
pub fn write_convergence_csv(
    w: &mut impl Write,
    report: &ConvergenceReport,
    timing: bool,
) -> Result<()> {
    write!(w, "estimator,m,q,seed,abs_error,err_error_term,err_mean_term,err_cdf_term")?;
    if timing {
        write!(w, ",wall_time_ns")?;
    }
    writeln!(w)?;
    for r in &report.records {
        let q = r.q.map(|q| q.to_string()).unwrap_or_default();
        let terms = match r.term_errors {
            Some(t) => format!("{},{},{}", fmt_float(t[0]), fmt_float(t[1]), fmt_float(t[2])),
            None => ",,".to_string(),
        };
        write!(
            w,
            "{},{},{},{},{},{}",
            r.estimator,
            r.m,
            q,
            r.seed,
            fmt_float(r.abs_error),
            terms
        )?;
        if timing {
            write!(w, ",{}", r.wall_time_ns)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_slicewise_csv(w: &mut impl Write, report: &SlicewiseReport) -> Result<()> {
    writeln!(
        w,
        "estimator,slice,t,mean_signed_error,std_error,pred_mean,pred_std,crps_exact"
    )?;
    for r in &report.records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.estimator,
            r.slice,
            fmt_float(r.t),
            fmt_float(r.mean_signed_error),
            fmt_float(r.std_error),
            fmt_float(r.pred_mean),
            fmt_float(r.pred_std),
            fmt_float(r.crps_exact)
        )?;
    }
    Ok(())
}

pub fn write_ranking_csv(w: &mut impl Write, report: &RankingReport) -> Result<()> {
    writeln!(w, "dataset,estimator,model,seed,score")?;
    for e in &report.entries {
        for (seed, score) in &e.aggregate.per_seed {
            writeln!(
                w,
                "{},{},{},{},{}",
                e.dataset,
                e.estimator,
                e.model,
                seed,
                fmt_float(*score)
            )?;
        }
    }
    Ok(())
}

/// A parsed `key = value` config file preserving line numbers.
///
/// Keys must be consumed through the typed getters; [`KvConfig::finish`]
/// rejects any key that was never recognized, naming it.
#[derive(Debug, Clone)]
pub struct KvConfig {
    entries: Vec<(String, String, usize)>,
    consumed: std::cell::RefCell<HashMap<String, bool>>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let stripped = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let trimmed = stripped.trim();
            if trimmed.is_empty() {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or(CrpsError::Parse {
                line,
                msg: format!("expected key = value, got {trimmed:?}"),
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(CrpsError::Parse { line, msg: "empty key".into() });
            }
            entries.push((key, value.trim().to_string(), line));
        }
        // duplicate keys are ambiguous
        let mut seen = HashMap::new();
        for (k, _, line) in &entries {
            if let Some(first) = seen.insert(k.clone(), *line) {
                return Err(CrpsError::Parse {
                    line: *line,
                    msg: format!("duplicate key {k:?} (first defined on line {first})"),
                });
            }
        }
        let consumed = entries.iter().map(|(k, _, _)| (k.clone(), false)).collect();
        Ok(KvConfig { entries, consumed: std::cell::RefCell::new(consumed) })
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let found = self.entries.iter().find(|(k, _, _)| k == key);
        if let Some((k, v, _)) = found {
            self.consumed.borrow_mut().insert(k.clone(), true);
            Some(v.clone())
        } else {
            None
        }
    }

    pub fn get_or(&self, key: &str, default: &str) -> String {
        self.get(key).unwrap_or_else(|| default.to_string())
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| CrpsError::Config(format!("key {key}: expected a number, got {v:?}"))),
        }
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| CrpsError::Config(format!("key {key}: expected an integer, got {v:?}"))),
        }
    }

    pub fn get_u64(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| CrpsError::Config(format!("key {key}: expected an integer, got {v:?}"))),
        }
    }

    pub fn get_usize_list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => {
                let items: std::result::Result<Vec<usize>, _> =
                    v.split(',').map(|s| s.trim().parse::<usize>()).collect();
                items.map(Some).map_err(|_| {
                    CrpsError::Config(format!("key {key}: expected comma-separated integers, got {v:?}"))
                })
            }
        }
    }

    pub fn get_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => {
                let items: std::result::Result<Vec<f64>, _> =
                    v.split(',').map(|s| s.trim().parse::<f64>()).collect();
                items.map(Some).map_err(|_| {
                    CrpsError::Config(format!("key {key}: expected comma-separated numbers, got {v:?}"))
                })
            }
        }
    }

    /// Errors on the first key that no getter ever asked for.
    pub fn finish(&self) -> Result<()> {
        let consumed = self.consumed.borrow();
        for (k, _, line) in &self.entries {
            if !consumed.get(k).copied().unwrap_or(false) {
                return Err(CrpsError::Config(format!(
                    "unknown config key {k:?} on line {line}"
                )));
            }
        }
        Ok(())
    }
}
