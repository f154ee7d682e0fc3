//! Per-interval metrics, trailing return windows and the CSV schema.
//!
//! Per-seed CSV columns, in order:
//!
//! | column | meaning |
//! |---|---|
//! | `seed` | run seed |
//! | `env_step` | environment steps at the end of the interval (a multiple of `log_every`) |
//! | `episode_return_mean` | mean return of the last `return_window` completed episodes (Catch) |
//! | `value_mse` | mean over the interval of the value error against the phase-correct truth (walk) |
//! | `outer_loss` .. `target_divergence` | means over the meta-updates that finished in the interval |
//! | `diverged` | fraction of those meta-updates flagged as diverged |
//!
//! Metrics that do not apply to an experiment are `NaN`. Floats are written
//! as `{:.16e}` (17 significant digits). The aggregate CSV has `env_step`,
//! `seeds`, then `<metric>_mean` and `<metric>_std` (sample deviation, 0
//! for one seed) for each metric column.

use std::collections::VecDeque;
use std::io::{Read, Write};

use frodo_core::frodo::MetaUpdateReport;

use crate::error::{LabError, LabResult};

pub const METRICS: [&str; 8] = [
    "episode_return_mean",
    "value_mse",
    "outer_loss",
    "inner_loss_mean",
    "consistency_loss",
    "meta_grad_norm",
    "target_divergence",
    "diverged",
];

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub seed: u64,
    pub env_step: u64,
    pub episode_return_mean: f64,
    pub value_mse: f64,
    pub outer_loss: f64,
    pub inner_loss_mean: f64,
    pub consistency_loss: f64,
    pub meta_grad_norm: f64,
    pub target_divergence: f64,
    pub diverged: f64,
}

impl MetricsRow {
    pub fn metrics(&self) -> [f64; 8] {
        [
            self.episode_return_mean,
            self.value_mse,
            self.outer_loss,
            self.inner_loss_mean,
            self.consistency_loss,
            self.meta_grad_norm,
            self.target_divergence,
            self.diverged,
        ]
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        METRICS.iter().position(|&m| m == name).map(|i| self.metrics()[i])
    }
}

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Mean of the finite values, `NaN` when there are none.
#[derive(Debug, Clone, Copy, Default)]
struct Mean {
    sum: f64,
    n: usize,
}

impl Mean {
    fn push(&mut self, x: f64) {
        if x.is_finite() {
            self.sum += x;
            self.n += 1;
        }
    }

    fn get(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.sum / self.n as f64
        }
    }
}

/// Mean return over the last `capacity` completed episodes.
#[derive(Debug, Clone)]
pub struct ReturnWindow {
    capacity: usize,
    returns: VecDeque<f64>,
}

impl ReturnWindow {
    pub fn new(capacity: usize) -> Self {
        ReturnWindow {
            capacity,
            returns: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, ret: f64) {
        if self.returns.len() == self.capacity {
            self.returns.pop_front();
        }
        self.returns.push_back(ret);
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.returns.is_empty() {
            f64::NAN
        } else {
            self.returns.iter().sum::<f64>() / self.returns.len() as f64
        }
    }
}

/// Builds one [`MetricsRow`] per `log_every` environment steps.
#[derive(Debug, Clone)]
pub struct MetricsLogger {
    seed: u64,
    log_every: u64,
    next_log: u64,
    window: ReturnWindow,
    value_mse: Mean,
    outer: Mean,
    inner: Mean,
    consistency: Mean,
    grad_norm: Mean,
    divergence: Mean,
    meta_steps: usize,
    diverged_steps: usize,
    any_diverged: bool,
    rows: Vec<MetricsRow>,
}

impl MetricsLogger {
    pub fn new(seed: u64, log_every: u64, return_window: usize) -> Self {
        MetricsLogger {
            seed,
            log_every,
            next_log: log_every,
            window: ReturnWindow::new(return_window),
            value_mse: Mean::default(),
            outer: Mean::default(),
            inner: Mean::default(),
            consistency: Mean::default(),
            grad_norm: Mean::default(),
            divergence: Mean::default(),
            meta_steps: 0,
            diverged_steps: 0,
            any_diverged: false,
            rows: Vec::new(),
        }
    }

    pub fn episode_finished(&mut self, ret: f64) {
        self.window.push(ret);
    }

    pub fn value_error(&mut self, mse: f64) {
        self.value_mse.push(mse);
    }

    pub fn meta_update(&mut self, report: &MetaUpdateReport) {
        self.outer.push(report.outer_loss);
        self.inner.push(report.inner_loss_mean());
        self.consistency.push(report.consistency_loss);
        self.grad_norm.push(report.meta_grad_norm);
        self.divergence.push(report.target_divergence);
        self.meta_steps += 1;
        if report.diverged {
            self.diverged_steps += 1;
            self.any_diverged = true;
        }
    }

    /// Emits rows for every log point at or before `env_step`.
    pub fn advance(&mut self, env_step: u64) {
        while env_step >= self.next_log {
            let diverged = if self.meta_steps == 0 {
                f64::NAN
            } else {
                self.diverged_steps as f64 / self.meta_steps as f64
            };
            self.rows.push(MetricsRow {
                seed: self.seed,
                env_step: self.next_log,
                episode_return_mean: self.window.mean(),
                value_mse: self.value_mse.get(),
                outer_loss: self.outer.get(),
                inner_loss_mean: self.inner.get(),
                consistency_loss: self.consistency.get(),
                meta_grad_norm: self.grad_norm.get(),
                target_divergence: self.divergence.get(),
                diverged,
            });
            self.value_mse = Mean::default();
            self.outer = Mean::default();
            self.inner = Mean::default();
            self.consistency = Mean::default();
            self.grad_norm = Mean::default();
            self.divergence = Mean::default();
            self.meta_steps = 0;
            self.diverged_steps = 0;
            self.next_log += self.log_every;
        }
    }

    pub fn any_diverged(&self) -> bool {
        self.any_diverged
    }

    pub fn rows(&self) -> &[MetricsRow] {
        &self.rows
    }

    pub fn finish(self) -> Vec<MetricsRow> {
        self.rows
    }
}

const ROW_HEADER: [&str; 10] = [
    "seed",
    "env_step",
    "episode_return_mean",
    "value_mse",
    "outer_loss",
    "inner_loss_mean",
    "consistency_loss",
    "meta_grad_norm",
    "target_divergence",
    "diverged",
];

pub fn write_rows<W: Write>(rows: &[MetricsRow], out: W) -> LabResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ROW_HEADER)?;
    for r in rows {
        let mut rec = vec![r.seed.to_string(), r.env_step.to_string()];
        rec.extend(r.metrics().iter().map(|&x| format_float(x)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_f64(s: &str) -> LabResult<f64> {
    s.trim()
        .parse()
        .map_err(|_| LabError::data(format!("bad number `{s}`")))
}

pub fn read_rows<R: Read>(input: R) -> LabResult<Vec<MetricsRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().ne(ROW_HEADER) {
        return Err(LabError::data(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let int = |i: usize| {
            rec[i]
                .parse::<u64>()
                .map_err(|_| LabError::data(format!("bad integer `{}`", &rec[i])))
        };
        let f = |i: usize| parse_f64(&rec[i]);
        rows.push(MetricsRow {
            seed: int(0)?,
            env_step: int(1)?,
            episode_return_mean: f(2)?,
            value_mse: f(3)?,
            outer_loss: f(4)?,
            inner_loss_mean: f(5)?,
            consistency_loss: f(6)?,
            meta_grad_norm: f(7)?,
            target_divergence: f(8)?,
            diverged: f(9)?,
        });
    }
    Ok(rows)
}

/// Mean and sample standard deviation across seeds at one log point.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub env_step: u64,
    pub seeds: usize,
    pub mean: [f64; 8],
    pub std: [f64; 8],
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Combines per-seed logs that share the same log points.
pub fn aggregate(runs: &[Vec<MetricsRow>]) -> LabResult<Vec<AggregateRow>> {
    let Some(first) = runs.first() else {
        return Ok(Vec::new());
    };
    for r in runs {
        let same = r.len() == first.len() && r.iter().zip(first).all(|(a, b)| a.env_step == b.env_step);
        if !same {
            return Err(LabError::data("per-seed logs have different log points"));
        }
    }
    let mut out = Vec::with_capacity(first.len());
    for (i, row) in first.iter().enumerate() {
        let mut mean = [0.0; 8];
        let mut std = [0.0; 8];
        for k in 0..8 {
            let xs: Vec<f64> = runs.iter().map(|r| r[i].metrics()[k]).collect();
            (mean[k], std[k]) = mean_std(&xs);
        }
        out.push(AggregateRow {
            env_step: row.env_step,
            seeds: runs.len(),
            mean,
            std,
        });
    }
    Ok(out)
}

pub fn aggregate_header() -> Vec<String> {
    let mut h = vec!["env_step".to_string(), "seeds".to_string()];
    for m in METRICS {
        h.push(format!("{m}_mean"));
        h.push(format!("{m}_std"));
    }
    h
}

pub fn write_aggregate<W: Write>(rows: &[AggregateRow], out: W) -> LabResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(aggregate_header())?;
    for r in rows {
        let mut rec = vec![r.env_step.to_string(), r.seeds.to_string()];
        for k in 0..8 {
            rec.push(format_float(r.mean[k]));
            rec.push(format_float(r.std[k]));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// A CSV read as named float columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn read<R: Read>(input: R) -> LabResult<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        let mut columns = vec![Vec::new(); header.len()];
        for rec in rd.records() {
            let rec = rec?;
            for (c, field) in columns.iter_mut().zip(rec.iter()) {
                c.push(parse_f64(field)?);
            }
        }
        Ok(Table { header, columns })
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.header
            .iter()
            .position(|h| h == name)
            .map(|i| self.columns[i].as_slice())
    }
}
