//! Final-window comparison of a candidate CSV against one or more baselines.

use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{LabError, LabResult};
use crate::metrics::{mean_std, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Better {
    Higher,
    Lower,
}

impl Better {
    /// Errors, losses and norms improve downwards; everything else upwards.
    pub fn for_metric(metric: &str) -> Self {
        let lower = ["mse", "loss", "divergence", "norm", "diverged"];
        if lower.iter().any(|k| metric.contains(k)) {
            Better::Lower
        } else {
            Better::Higher
        }
    }

    pub fn beats(self, a: f64, b: f64) -> bool {
        match self {
            Better::Higher => a > b,
            Better::Lower => a < b,
        }
    }
}

impl FromStr for Better {
    type Err = LabError;

    fn from_str(s: &str) -> LabResult<Self> {
        match s {
            "higher" => Ok(Better::Higher),
            "lower" => Ok(Better::Lower),
            _ => Err(LabError::config(format!("`{s}` is neither higher nor lower"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowStats {
    pub path: PathBuf,
    pub mean: f64,
    pub std: f64,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub metric: String,
    pub better: Better,
    pub baselines: Vec<WindowStats>,
    /// Index into `baselines` of the strongest one.
    pub best: usize,
    pub candidate: WindowStats,
}

impl CompareReport {
    pub fn best_baseline(&self) -> &WindowStats {
        &self.baselines[self.best]
    }

    /// Candidate minus the best baseline.
    pub fn difference(&self) -> f64 {
        self.candidate.mean - self.best_baseline().mean
    }

    pub fn candidate_wins(&self) -> bool {
        self.better.beats(self.candidate.mean, self.best_baseline().mean)
    }
}

impl fmt::Display for CompareReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let line = |f: &mut fmt::Formatter<'_>, label: &str, s: &WindowStats| {
            writeln!(
                f,
                "{label:<10} {:>+.6} ± {:.6} over {} rows  {}",
                s.mean,
                s.std,
                s.rows,
                s.path.display()
            )
        };
        writeln!(f, "metric {} ({} is better)", self.metric, match self.better {
            Better::Higher => "higher",
            Better::Lower => "lower",
        })?;
        for (i, b) in self.baselines.iter().enumerate() {
            line(f, if i == self.best { "baseline*" } else { "baseline" }, b)?;
        }
        line(f, "candidate", &self.candidate)?;
        writeln!(f, "difference {:+.6}", self.difference())?;
        write!(
            f,
            "{}",
            if self.candidate_wins() {
                "candidate beats baseline"
            } else {
                "candidate does not beat baseline"
            }
        )
    }
}

/// Mean and deviation of `metric` (or `<metric>_mean` in aggregate files)
/// over the last `window` fraction of rows, skipping non-finite entries.
pub fn final_window(path: &Path, metric: &str, window: f64) -> LabResult<WindowStats> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(LabError::config(format!("window {window} must lie in (0, 1]")));
    }
    let table = Table::read(File::open(path)?)?;
    let column = table
        .column(metric)
        .or_else(|| table.column(&format!("{metric}_mean")))
        .ok_or_else(|| LabError::data(format!("{} has no column `{metric}`", path.display())))?;
    let n = column.len();
    let take = ((n as f64 * window).ceil() as usize).clamp(1.min(n), n);
    let tail: Vec<f64> = column[n - take..].iter().copied().filter(|x| x.is_finite()).collect();
    if tail.is_empty() {
        return Err(LabError::data(format!(
            "{} has no finite `{metric}` values in its final window",
            path.display()
        )));
    }
    let (mean, std) = mean_std(&tail);
    Ok(WindowStats {
        path: path.to_path_buf(),
        mean,
        std,
        rows: tail.len(),
    })
}

pub fn compare(
    baselines: &[PathBuf],
    candidate: &Path,
    metric: &str,
    window: f64,
    better: Option<Better>,
) -> LabResult<CompareReport> {
    if baselines.is_empty() {
        return Err(LabError::config("at least one baseline is required"));
    }
    let better = better.unwrap_or_else(|| Better::for_metric(metric));
    let stats = baselines
        .iter()
        .map(|p| final_window(p, metric, window))
        .collect::<LabResult<Vec<_>>>()?;
    let mut best = 0;
    for (i, s) in stats.iter().enumerate() {
        if better.beats(s.mean, stats[best].mean) {
            best = i;
        }
    }
    Ok(CompareReport {
        metric: metric.to_string(),
        better,
        baselines: stats,
        best,
        candidate: final_window(candidate, metric, window)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn csv(dir: &Path, name: &str, values: &[f64]) -> PathBuf {
        let p = dir.join(name);
        let mut f = File::create(&p).unwrap();
        writeln!(f, "env_step,episode_return_mean_mean,value_mse_mean").unwrap();
        for (i, v) in values.iter().enumerate() {
            writeln!(f, "{},{v:.16e},{:.16e}", i + 1, 1.0 - v).unwrap();
        }
        p
    }

    #[test]
    fn identical_files_differ_by_zero() {
        let dir = tempfile::tempdir().unwrap();
        let a = csv(dir.path(), "a.csv", &[0.1, 0.5, 0.7]);
        let r = compare(std::slice::from_ref(&a), &a, "episode_return_mean", 0.5, None).unwrap();
        assert_eq!(r.difference(), 0.0);
        assert!(!r.candidate_wins());
    }

    #[test]
    fn reports_signed_difference() {
        let dir = tempfile::tempdir().unwrap();
        let base = csv(dir.path(), "b.csv", &[0.0, 0.6, 0.6]);
        let cand = csv(dir.path(), "c.csv", &[0.0, 0.95, 0.95]);
        let r = compare(&[base], &cand, "episode_return_mean", 0.5, None).unwrap();
        assert!((r.difference() - 0.35).abs() < 1e-12);
        assert!(r.candidate_wins());
        assert!(r.to_string().contains("+0.350000"));
    }

    #[test]
    fn best_of_several_baselines_and_lower_is_better() {
        let dir = tempfile::tempdir().unwrap();
        // value_mse = 1 - v
        let b1 = csv(dir.path(), "b1.csv", &[0.5, 0.5]);
        let b2 = csv(dir.path(), "b2.csv", &[0.9, 0.9]);
        let cand = csv(dir.path(), "c.csv", &[0.8, 0.8]);
        let r = compare(&[b1, b2], &cand, "value_mse", 1.0, None).unwrap();
        assert_eq!(r.better, Better::Lower);
        assert_eq!(r.best, 1);
        assert!(!r.candidate_wins());
    }

    #[test]
    fn missing_column_and_bad_window() {
        let dir = tempfile::tempdir().unwrap();
        let a = csv(dir.path(), "a.csv", &[0.1]);
        assert!(compare(std::slice::from_ref(&a), &a, "nope", 0.1, None).is_err());
        assert!(compare(std::slice::from_ref(&a), &a, "value_mse", 0.0, None).is_err());
        assert!(compare(&[], &a, "value_mse", 0.1, None).is_err());
    }
}
