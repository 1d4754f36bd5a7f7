//! Repeated-trial sweeps comparing leader-selection algorithms.
//!
//! A trial is identified by `(k, trial_index)`. Its seed is derived from the
//! master seed alone, so every algorithm evaluated at the same `(k,
//! trial_index)` sees the same graph. Selector randomness comes from a
//! separate per-algorithm stream.

pub mod report;
pub mod stats;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{SimulationConfig, SimulationOutcome, Simulator, SpeedCap, Status};
use crate::error::{Error, Result};
use crate::graph::{generate_geometric, GeometricParams, LeaderSet, WeightedGraph, MAX_GENERATION_ATTEMPTS};
use crate::rng::derive_seed;
use crate::selection::{select, Algorithm, SelectionParams, DEFAULT_HUGE_RANDOM_SAMPLES};
use crate::spectral::{convergence_rate, SymmetricMatrix};

pub use report::{CellSummary, ExperimentReport, Mode};

const GRAPH_STREAM: u64 = 0x0067_7261_7068;
const SELECTOR_STREAM: u64 = 0x7365_6c65_6374;

/// e-puck2 top speed, cm/s.
pub const EPUCK2_MAX_SPEED: f64 = 15.4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepeatSchedule {
    /// Same repeat count for every k.
    Fixed(usize),
    /// 100 repeats for k <= 9, 30 above.
    Tapered,
}

impl RepeatSchedule {
    pub fn repeats(&self, k: usize) -> usize {
        match *self {
            RepeatSchedule::Fixed(r) => r,
            RepeatSchedule::Tapered => {
                if k <= 9 {
                    100
                } else {
                    30
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub scenario: GeometricParams,
    pub k_values: Vec<usize>,
    pub repeats: RepeatSchedule,
    pub algorithms: Vec<Algorithm>,
    /// Free-dynamics settings; the capped mode adds `speed_cap`.
    pub sim: SimulationConfig,
    pub speed_cap: SpeedCap,
    pub huge_random_samples: usize,
    pub master_seed: u64,
}

impl SweepConfig {
    /// 30 agents, k = 1..9, 20 repeats: minutes on a laptop.
    pub fn desk() -> Self {
        SweepConfig {
            scenario: GeometricParams {
                n: 30,
                side: 10.0,
                radius: 3.0,
                weight_max: 50.0,
            },
            k_values: (1..=9).collect(),
            repeats: RepeatSchedule::Fixed(20),
            algorithms: Algorithm::ALL.to_vec(),
            sim: SimulationConfig::reference(),
            speed_cap: SpeedCap::euclidean(EPUCK2_MAX_SPEED),
            huge_random_samples: DEFAULT_HUGE_RANDOM_SAMPLES,
            master_seed: 1,
        }
    }

    /// The full-scale setting: 100 agents, k = 1..90, 100/30 repeats.
    pub fn full() -> Self {
        SweepConfig {
            scenario: GeometricParams {
                n: 100,
                side: 10.0,
                radius: 3.0,
                weight_max: 50.0,
            },
            k_values: (1..=90).collect(),
            repeats: RepeatSchedule::Tapered,
            ..SweepConfig::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.sim.validate()?;
        self.sim.with_cap(Some(self.speed_cap)).validate()?;
        let n = self.scenario.n;
        if let Some(&k) = self.k_values.iter().find(|&&k| k == 0 || k >= n) {
            return Err(Error::param(format!("k = {k} outside [1, {}]", n.saturating_sub(1))));
        }
        if self.k_values.iter().any(|&k| self.repeats.repeats(k) == 0) {
            return Err(Error::param("repeats must be at least 1"));
        }
        if self.huge_random_samples == 0 {
            return Err(Error::param("huge random samples must be at least 1"));
        }
        Ok(())
    }

    pub fn capped_config(&self) -> SimulationConfig {
        self.sim.with_cap(Some(self.speed_cap))
    }

    pub fn trial_count(&self) -> usize {
        self.k_values.iter().map(|&k| self.repeats.repeats(k)).sum::<usize>() * self.algorithms.len()
    }
}

/// Seed shared by every algorithm at `(k, trial_index)`.
pub fn trial_seed(master_seed: u64, k: usize, trial_index: usize) -> u64 {
    derive_seed(master_seed, &[k as u64, trial_index as u64])
}

/// The graph drawn for a given trial seed and attempt.
pub fn scenario_graph(params: &GeometricParams, trial_seed: u64, attempt: usize) -> Result<WeightedGraph> {
    generate_geometric(params, derive_seed(trial_seed, &[GRAPH_STREAM, attempt as u64]))
}

fn selector_seed(trial_seed: u64, algorithm: Algorithm, attempt: usize) -> u64 {
    derive_seed(trial_seed, &[SELECTOR_STREAM, algorithm.id(), attempt as u64])
}

/// Why a drawn graph was rejected before selection.
fn reject_reason(g: &WeightedGraph, t_s: f64) -> Option<String> {
    if !g.is_connected() {
        return Some("disconnected".into());
    }
    // lambda_max(L_FF) <= lambda_max(L), so this bound holds for any leader set.
    let lambda_max = SymmetricMatrix::new(g.laplacian().into_matrix())
        .ok()?
        .largest_eigenvalue();
    (t_s * lambda_max >= 2.0).then(|| format!("unstable Euler step (t_s * lambda_max = {:.3})", t_s * lambda_max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeOutcome {
    pub status: Status,
    pub t_e: Option<f64>,
    pub steps: u64,
}

impl From<&SimulationOutcome> for ModeOutcome {
    fn from(o: &SimulationOutcome) -> Self {
        ModeOutcome {
            status: o.status,
            t_e: o.t_e,
            steps: o.steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub algorithm: Algorithm,
    pub k: usize,
    pub trial_index: usize,
    pub seed: u64,
    /// Graph attempt that produced this record (0 = first draw).
    pub attempt: usize,
    /// Attempts discarded because a mode failed to converge.
    pub nonconverged_attempts: usize,
    pub leaders: LeaderSet,
    pub lambda_min: f64,
    pub free: ModeOutcome,
    pub capped: ModeOutcome,
    pub max_capped_speed: f64,
}

impl TrialRecord {
    pub fn mode(&self, mode: Mode) -> &ModeOutcome {
        match mode {
            Mode::Free => &self.free,
            Mode::Capped => &self.capped,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub algorithm: Algorithm,
    pub k: usize,
    pub trial_index: usize,
    pub seed: u64,
    pub attempts: usize,
    pub reason: String,
}

/// Runs one trial: draw graphs until one is usable, select leaders, and
/// simulate free and capped dynamics. Graphs are redrawn when disconnected,
/// when 1 ms Euler steps would be unstable, or when either mode fails to
/// converge within the step budget.
pub fn run_trial(
    trial_index: usize,
    algorithm: Algorithm,
    k: usize,
    cfg: &SweepConfig,
) -> std::result::Result<TrialRecord, TrialFailure> {
    let seed = trial_seed(cfg.master_seed, k, trial_index);
    let fail = |attempts: usize, reason: String| TrialFailure {
        algorithm,
        k,
        trial_index,
        seed,
        attempts,
        reason,
    };
    let capped_cfg = cfg.capped_config();
    let mut nonconverged_attempts = 0;
    let mut last_reason = String::from("no attempts made");

    for attempt in 0..MAX_GENERATION_ATTEMPTS {
        let g = scenario_graph(&cfg.scenario, seed, attempt).map_err(|e| fail(attempt + 1, e.to_string()))?;
        if let Some(reason) = reject_reason(&g, cfg.sim.t_s) {
            debug!("trial k={k} #{trial_index}: attempt {attempt} rejected: {reason}");
            last_reason = reason;
            continue;
        }
        let params = SelectionParams {
            seed: selector_seed(seed, algorithm, attempt),
            huge_random_samples: cfg.huge_random_samples,
        };
        let outcome = (|| -> Result<_> {
            let leaders = select(algorithm, &g, k, &params)?;
            let lambda_min = convergence_rate(&crate::graph::ground(&g.laplacian(), &leaders)?)?;
            let sim = Simulator::from_graph(&g, &leaders)?;
            let free = sim.run(&cfg.sim)?;
            let capped = sim.run(&capped_cfg)?;
            Ok((leaders, lambda_min, free, capped))
        })();
        let (leaders, lambda_min, free, capped) = match outcome {
            Ok(v) => v,
            Err(e) => {
                last_reason = e.to_string();
                continue;
            }
        };
        if !(free.converged() && capped.converged()) {
            warn!(
                "trial {algorithm} k={k} #{trial_index}: attempt {attempt} did not converge within {} steps; regenerating",
                cfg.sim.max_steps
            );
            nonconverged_attempts += 1;
            last_reason = "no convergence within the step budget".into();
            continue;
        }
        return Ok(TrialRecord {
            algorithm,
            k,
            trial_index,
            seed,
            attempt,
            nonconverged_attempts,
            leaders,
            lambda_min,
            free: (&free).into(),
            capped: (&capped).into(),
            max_capped_speed: capped.max_applied_speed,
        });
    }
    Err(fail(MAX_GENERATION_ATTEMPTS, last_reason))
}

/// Per-task identity in canonical sweep order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Task {
    k: usize,
    trial_index: usize,
    algorithm_pos: usize,
}

/// Runs every `(k, trial, algorithm)` trial and aggregates the results.
///
/// Trials run on the current rayon pool; aggregation folds over trial order,
/// so the report does not depend on scheduling.
pub fn run_sweep(cfg: &SweepConfig) -> Result<ExperimentReport> {
    run_sweep_with_progress(cfg, |_, _| {})
}

pub fn run_sweep_with_progress(cfg: &SweepConfig, progress: impl Fn(usize, usize) + Sync) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut tasks = Vec::with_capacity(cfg.trial_count());
    for &k in &cfg.k_values {
        for trial_index in 0..cfg.repeats.repeats(k) {
            for algorithm_pos in 0..cfg.algorithms.len() {
                tasks.push(Task {
                    k,
                    trial_index,
                    algorithm_pos,
                });
            }
        }
    }
    let total = tasks.len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<_> = tasks
        .par_iter()
        .map(|t| {
            let r = run_trial(t.trial_index, cfg.algorithms[t.algorithm_pos], t.k, cfg);
            let finished = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
            progress(finished, total);
            r
        })
        .collect();

    let mut trials = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(t) => trials.push(t),
            Err(f) => {
                warn!(
                    "trial {} k={} #{} failed: {}",
                    f.algorithm, f.k, f.trial_index, f.reason
                );
                failures.push(f);
            }
        }
    }
    Ok(ExperimentReport::aggregate(cfg.clone(), trials, failures))
}
