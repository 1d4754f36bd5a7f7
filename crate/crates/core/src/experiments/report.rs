//! Sweep aggregation and its serialized forms.
//!
//! Output files written by [`emit_report`]:
//!
//! * `summary.csv`: one row per (algorithm, k, mode) cell
//! * `trials.csv`: one row per successful trial
//! * `failures.csv`: one row per trial that exhausted its regenerations
//! * `report.json`: the whole report, canonical and re-parseable
//! * `plots/{time,rate,range}_<algorithm>_<mode>.dat`: `k value` pairs

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{SweepConfig, TrialFailure, TrialRecord};
use crate::dynamics::Status;
use crate::error::{Error, Result};
use crate::selection::Algorithm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Free,
    Capped,
}

impl Mode {
    pub const BOTH: [Mode; 2] = [Mode::Free, Mode::Capped];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Free => "free",
            Mode::Capped => "capped",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub algorithm: Algorithm,
    pub k: usize,
    pub mode: Mode,
    pub trials: usize,
    pub mean_t_e: Option<f64>,
    pub min_t_e: Option<f64>,
    pub max_t_e: Option<f64>,
    pub range_t_e: Option<f64>,
    pub mean_lambda_min: Option<f64>,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: SweepConfig,
    pub cells: Vec<CellSummary>,
    pub trials: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
}

pub const SUMMARY_HEADER: &str = "algorithm,k,mode,trials,mean_t_e,min_t_e,max_t_e,range_t_e,mean_lambda_min,failures";

pub const TRIALS_HEADER: &str = "algorithm,k,trial_index,seed,attempt,nonconverged_attempts,leaders,lambda_min,t_e_free,status_free,t_e_capped,status_capped";

pub const FAILURES_HEADER: &str = "algorithm,k,trial_index,seed,attempts,reason";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Converged => "converged",
        Status::MaxIterations => "max-iterations",
    }
}

fn summarize(algorithm: Algorithm, k: usize, mode: Mode, trials: &[&TrialRecord], failures: usize) -> CellSummary {
    let times: Vec<f64> = trials.iter().filter_map(|t| t.mode(mode).t_e).collect();
    let (mean, min, max) = if times.is_empty() {
        (None, None, None)
    } else {
        let sum: f64 = times.iter().sum();
        let min = times.iter().copied().fold(f64::INFINITY, f64::min);
        let max = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // Clamp so min <= mean <= max survives summation rounding.
        (Some((sum / times.len() as f64).clamp(min, max)), Some(min), Some(max))
    };
    let mean_lambda_min =
        (!trials.is_empty()).then(|| trials.iter().map(|t| t.lambda_min).sum::<f64>() / trials.len() as f64);
    CellSummary {
        algorithm,
        k,
        mode,
        trials: times.len(),
        mean_t_e: mean,
        min_t_e: min,
        max_t_e: max,
        range_t_e: min.zip(max).map(|(lo, hi)| hi - lo),
        mean_lambda_min,
        failures: failures + trials.len() - times.len(),
    }
}

impl ExperimentReport {
    /// Builds per-cell summaries. Input order does not matter: trials and
    /// failures are sorted canonically before folding.
    pub fn aggregate(config: SweepConfig, mut trials: Vec<TrialRecord>, mut failures: Vec<TrialFailure>) -> Self {
        trials.sort_by_key(|t| (t.k, t.trial_index, t.algorithm));
        failures.sort_by_key(|f| (f.k, f.trial_index, f.algorithm));
        let mut cells = Vec::new();
        for &algorithm in &config.algorithms {
            for &k in &config.k_values {
                let cell_trials: Vec<&TrialRecord> =
                    trials.iter().filter(|t| t.algorithm == algorithm && t.k == k).collect();
                let cell_failures = failures.iter().filter(|f| f.algorithm == algorithm && f.k == k).count();
                for mode in Mode::BOTH {
                    cells.push(summarize(algorithm, k, mode, &cell_trials, cell_failures));
                }
            }
        }
        ExperimentReport {
            config,
            cells,
            trials,
            failures,
        }
    }

    pub fn cell(&self, algorithm: Algorithm, k: usize, mode: Mode) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.algorithm == algorithm && c.k == k && c.mode == mode)
    }

    /// Algorithms ordered by mean lambda_min over all k, best first.
    pub fn ranking_by_rate(&self) -> Vec<(Algorithm, f64)> {
        let mut ranking: Vec<(Algorithm, f64)> = self
            .config
            .algorithms
            .iter()
            .filter_map(|&a| {
                let rates: Vec<f64> = self
                    .cells
                    .iter()
                    .filter(|c| c.algorithm == a && c.mode == Mode::Free)
                    .filter_map(|c| c.mean_lambda_min)
                    .collect();
                (!rates.is_empty()).then(|| (a, rates.iter().sum::<f64>() / rates.len() as f64))
            })
            .collect();
        ranking.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranking
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from(SUMMARY_HEADER);
        out.push('\n');
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                c.algorithm,
                c.k,
                c.mode,
                c.trials,
                fmt_opt(c.mean_t_e),
                fmt_opt(c.min_t_e),
                fmt_opt(c.max_t_e),
                fmt_opt(c.range_t_e),
                fmt_opt(c.mean_lambda_min),
                c.failures
            ));
        }
        out
    }

    pub fn trials_csv(&self) -> String {
        let mut out = String::from(TRIALS_HEADER);
        out.push('\n');
        for t in &self.trials {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{:?},{},{},{},{}\n",
                t.algorithm,
                t.k,
                t.trial_index,
                t.seed,
                t.attempt,
                t.nonconverged_attempts,
                t.leaders.joined(),
                t.lambda_min,
                fmt_opt(t.free.t_e),
                status_name(t.free.status),
                fmt_opt(t.capped.t_e),
                status_name(t.capped.status),
            ));
        }
        out
    }

    pub fn failures_csv(&self) -> String {
        let mut out = String::from(FAILURES_HEADER);
        out.push('\n');
        for f in &self.failures {
            let reason = f.reason.replace(['"', ','], " ");
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                f.algorithm, f.k, f.trial_index, f.seed, f.attempts, reason
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// `k value` lines for one figure series.
    pub fn plot_series(&self, figure: Figure, algorithm: Algorithm, mode: Mode) -> String {
        let mut out = String::new();
        for c in self.cells.iter().filter(|c| c.algorithm == algorithm && c.mode == mode) {
            let value = match figure {
                Figure::Time => c.mean_t_e,
                Figure::Rate => c.mean_lambda_min,
                Figure::Range => c.range_t_e,
            };
            if let Some(v) = value {
                out.push_str(&format!("{} {v:?}\n", c.k));
            }
        }
        out
    }
}

/// The three plotted comparisons: mean time, mean rate and time range vs k.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Time,
    Rate,
    Range,
}

impl Figure {
    pub const ALL: [Figure; 3] = [Figure::Time, Figure::Rate, Figure::Range];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Time => "time",
            Figure::Rate => "rate",
            Figure::Range => "range",
        }
    }
}

fn write(path: PathBuf, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Writes every report artifact under `dir`, returning the paths written.
pub fn emit_report(report: &ExperimentReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let plots = dir.join("plots");
    fs::create_dir_all(&plots).map_err(|e| Error::io(&plots, e))?;
    let mut written = Vec::new();
    write(dir.join("summary.csv"), &report.summary_csv(), &mut written)?;
    write(dir.join("trials.csv"), &report.trials_csv(), &mut written)?;
    write(dir.join("failures.csv"), &report.failures_csv(), &mut written)?;
    write(dir.join("report.json"), &report.to_json()?, &mut written)?;
    for figure in Figure::ALL {
        for &algorithm in &report.config.algorithms {
            for mode in Mode::BOTH {
                let name = format!("{}_{}_{}.dat", figure.name(), algorithm, mode);
                write(
                    plots.join(name),
                    &report.plot_series(figure, algorithm, mode),
                    &mut written,
                )?;
            }
        }
    }
    Ok(written)
}
