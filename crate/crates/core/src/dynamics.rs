//! Discrete-time simulation of the leader-follower consensus protocol.
//!
//! States are agent coordinates in centimeters. Graph coordinates (meters)
//! are converted with [`METERS_TO_CM`] when a simulation starts. Leaders
//! never move; each follower `i` moves with velocity
//! `-(L x)_i = sum_j w_ij (x_j - x_i)`, optionally capped in speed.

use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ground, GroundedSystem, LaplacianMatrix, LeaderSet, WeightedGraph};
use crate::spectral::{follower_spectral_radius, limit_state, LimitState};

pub const METERS_TO_CM: f64 = 100.0;

/// Extra in-ball steps required before a capped run counts as converged.
pub const CAPPED_CONFIRM_STEPS: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CapMode {
    /// Rescale the 2D velocity so its magnitude is at most `v_max`.
    Euclidean,
    /// Clamp each axis component to `[-v_max, v_max]` independently.
    PerAxis,
}

impl FromStr for CapMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(CapMode::Euclidean),
            "per-axis" => Ok(CapMode::PerAxis),
            _ => Err(Error::param(format!(
                "unknown cap mode '{s}'; valid: euclidean, per-axis"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedCap {
    /// cm/s.
    pub v_max: f64,
    pub mode: CapMode,
}

impl SpeedCap {
    pub fn euclidean(v_max: f64) -> Self {
        SpeedCap {
            v_max,
            mode: CapMode::Euclidean,
        }
    }

    /// Caps the desired velocity `(vx, vy)`.
    pub fn apply(&self, vx: f64, vy: f64) -> (f64, f64) {
        match self.mode {
            CapMode::Euclidean => {
                let speed = vx.hypot(vy);
                if speed > self.v_max {
                    let scale = self.v_max / speed;
                    (vx * scale, vy * scale)
                } else {
                    (vx, vy)
                }
            }
            CapMode::PerAxis => (vx.clamp(-self.v_max, self.v_max), vy.clamp(-self.v_max, self.v_max)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Step length, seconds.
    pub t_s: f64,
    /// Convergence error, cm.
    pub error: f64,
    pub max_steps: u64,
    pub speed_cap: Option<SpeedCap>,
}

impl SimulationConfig {
    /// 1 ms steps, e = 5e-8 cm, N = 2e6, free dynamics.
    pub fn reference() -> Self {
        SimulationConfig {
            t_s: 1e-3,
            error: 5e-8,
            max_steps: 2_000_000,
            speed_cap: None,
        }
    }

    pub fn with_cap(self, cap: Option<SpeedCap>) -> Self {
        SimulationConfig { speed_cap: cap, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_s > 0.0 && self.t_s.is_finite()) {
            return Err(Error::param(format!("step length must be positive, got {}", self.t_s)));
        }
        if !(self.error > 0.0 && self.error.is_finite()) {
            return Err(Error::param(format!(
                "convergence error must be positive, got {}",
                self.error
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::param("max_steps must be at least 1"));
        }
        if let Some(cap) = self.speed_cap {
            if !(cap.v_max > 0.0 && cap.v_max.is_finite()) {
                return Err(Error::param(format!("speed cap must be positive, got {}", cap.v_max)));
            }
        }
        Ok(())
    }
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig::reference()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub t: f64,
}

impl SystemState {
    /// Initial state from graph coordinates, converted to centimeters.
    pub fn from_graph(g: &WeightedGraph) -> Self {
        SystemState {
            x: g.coords().iter().map(|p| p.x * METERS_TO_CM).collect(),
            y: g.coords().iter().map(|p| p.y * METERS_TO_CM).collect(),
            t: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }
}

/// Follower rows of the Laplacian in sparse form.
#[derive(Debug, Clone)]
pub struct ConsensusOperator {
    n: usize,
    rows: Vec<(usize, Vec<(usize, f64)>)>,
}

impl ConsensusOperator {
    pub fn new(laplacian: &LaplacianMatrix, leaders: &LeaderSet) -> Self {
        let n = laplacian.order();
        let l = laplacian.as_matrix();
        let rows = leaders
            .followers(n)
            .into_iter()
            .map(|i| {
                let nbrs = (0..n)
                    .filter(|&j| j != i && l[(i, j)] != 0.0)
                    .map(|j| (j, -l[(i, j)]))
                    .collect();
                (i, nbrs)
            })
            .collect();
        ConsensusOperator { n, rows }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn followers(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows.iter().map(|(i, _)| *i)
    }

    fn desired_velocity(&self, row: &[(usize, f64)], i: usize, x: &[f64]) -> f64 {
        row.iter().map(|&(j, w)| w * (x[j] - x[i])).sum()
    }

    /// Writes follower velocities `-(L x)` per axis into `vx`, `vy`
    /// (indexed like the follower rows).
    fn velocities(&self, state: &SystemState, vx: &mut [f64], vy: &mut [f64]) {
        for (r, (i, row)) in self.rows.iter().enumerate() {
            vx[r] = self.desired_velocity(row, *i, &state.x);
            vy[r] = self.desired_velocity(row, *i, &state.y);
        }
    }
}

/// Applies one Euler step in place and returns the largest applied speed.
fn advance(
    op: &ConsensusOperator,
    state: &mut SystemState,
    t_s: f64,
    cap: Option<SpeedCap>,
    vx: &mut [f64],
    vy: &mut [f64],
) -> f64 {
    op.velocities(state, vx, vy);
    let mut max_speed = 0.0f64;
    for (r, (i, _)) in op.rows.iter().enumerate() {
        let (ax, ay) = match cap {
            Some(cap) => cap.apply(vx[r], vy[r]),
            None => (vx[r], vy[r]),
        };
        max_speed = max_speed.max(ax.hypot(ay));
        state.x[*i] += ax * t_s;
        state.y[*i] += ay * t_s;
    }
    state.t += t_s;
    max_speed
}

pub fn step_free(state: &SystemState, op: &ConsensusOperator, t_s: f64) -> SystemState {
    let mut next = state.clone();
    let m = op.rows.len();
    let (mut vx, mut vy) = (vec![0.0; m], vec![0.0; m]);
    advance(op, &mut next, t_s, None, &mut vx, &mut vy);
    next
}

pub fn step_capped(state: &SystemState, op: &ConsensusOperator, t_s: f64, cap: SpeedCap) -> SystemState {
    let mut next = state.clone();
    let m = op.rows.len();
    let (mut vx, mut vy) = (vec![0.0; m], vec![0.0; m]);
    advance(op, &mut next, t_s, Some(cap), &mut vx, &mut vy);
    next
}

/// Equilibrium positions on both axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub x: LimitState,
    pub y: LimitState,
}

impl Equilibrium {
    pub fn solve(sys: &GroundedSystem, initial: &SystemState) -> Result<Self> {
        Ok(Equilibrium {
            x: limit_state(sys, &initial.x)?,
            y: limit_state(sys, &initial.y)?,
        })
    }
}

/// Euclidean deviation from the equilibrium per axis.
pub fn deviation(state: &SystemState, target: &Equilibrium) -> (f64, f64) {
    let axis = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
    (axis(&state.x, &target.x.x_star), axis(&state.y, &target.y.x_star))
}

/// Both axis deviations within `e` (inclusive).
pub fn check_converged(state: &SystemState, target: &Equilibrium, e: f64) -> bool {
    let (dx, dy) = deviation(state, target);
    dx <= e && dy <= e
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutcome {
    pub status: Status,
    /// Convergence time in seconds, when converged.
    pub t_e: Option<f64>,
    /// Step index at which the error ball was entered for good, or the
    /// number of steps run when the budget ran out.
    pub steps: u64,
    /// Total Euler steps executed, including confirmation steps.
    pub steps_run: u64,
    /// Per-axis deviation (cm) of the final state.
    pub final_deviation: (f64, f64),
    /// Largest per-agent speed applied over the run, cm/s.
    pub max_applied_speed: f64,
}

impl SimulationOutcome {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }
}

/// A prepared leader-follower system ready to be integrated.
#[derive(Debug, Clone)]
pub struct Simulator {
    op: ConsensusOperator,
    target: Equilibrium,
    initial: SystemState,
    lambda_max: f64,
}

impl Simulator {
    pub fn new(laplacian: &LaplacianMatrix, leaders: &LeaderSet, initial: SystemState) -> Result<Self> {
        if initial.n() != laplacian.order() || initial.y.len() != initial.n() {
            return Err(Error::param("initial state does not match the Laplacian order"));
        }
        let sys = ground(laplacian, leaders)?;
        let target = Equilibrium::solve(&sys, &initial)?;
        let lambda_max = follower_spectral_radius(&sys)?;
        Ok(Simulator {
            op: ConsensusOperator::new(laplacian, leaders),
            target,
            initial,
            lambda_max,
        })
    }

    pub fn from_graph(g: &WeightedGraph, leaders: &LeaderSet) -> Result<Self> {
        Simulator::new(&g.laplacian(), leaders, SystemState::from_graph(g))
    }

    pub fn equilibrium(&self) -> &Equilibrium {
        &self.target
    }

    pub fn initial(&self) -> &SystemState {
        &self.initial
    }

    pub fn operator(&self) -> &ConsensusOperator {
        &self.op
    }

    /// `t_s * lambda_max(L_FF)`; explicit Euler needs this below 2.
    pub fn stability_margin(&self, t_s: f64) -> f64 {
        t_s * self.lambda_max
    }

    pub fn run(&self, cfg: &SimulationConfig) -> Result<SimulationOutcome> {
        self.run_observed(cfg, |_, _| {})
    }

    /// Integrates until the state stays within the error ball, calling
    /// `observe(step, state)` on the initial state and after every step.
    ///
    /// Free runs stop at the first entry into the ball (stable Euler
    /// contracts monotonically). Capped runs must stay inside for
    /// [`CAPPED_CONFIRM_STEPS`] more steps; leaving resets the entry time.
    pub fn run_observed(
        &self,
        cfg: &SimulationConfig,
        mut observe: impl FnMut(u64, &SystemState),
    ) -> Result<SimulationOutcome> {
        cfg.validate()?;
        let margin = self.stability_margin(cfg.t_s);
        if margin >= 2.0 {
            return Err(Error::Unstable { margin });
        }
        let confirm = if cfg.speed_cap.is_some() {
            CAPPED_CONFIRM_STEPS
        } else {
            0
        };
        let m = self.op.rows.len();
        let (mut vx, mut vy) = (vec![0.0; m], vec![0.0; m]);
        let mut state = self.initial.clone();
        let mut max_speed = 0.0f64;
        let mut step = 0u64;
        observe(0, &state);
        let mut entered = check_converged(&state, &self.target, cfg.error).then_some(0u64);

        loop {
            match entered {
                Some(s) if step - s >= confirm => {
                    return Ok(SimulationOutcome {
                        status: Status::Converged,
                        t_e: Some(s as f64 * cfg.t_s),
                        steps: s,
                        steps_run: step,
                        final_deviation: deviation(&state, &self.target),
                        max_applied_speed: max_speed,
                    });
                }
                None if step >= cfg.max_steps => {
                    return Ok(SimulationOutcome {
                        status: Status::MaxIterations,
                        t_e: None,
                        steps: step,
                        steps_run: step,
                        final_deviation: deviation(&state, &self.target),
                        max_applied_speed: max_speed,
                    });
                }
                _ => {}
            }
            let speed = advance(&self.op, &mut state, cfg.t_s, cfg.speed_cap, &mut vx, &mut vy);
            max_speed = max_speed.max(speed);
            step += 1;
            state.t = step as f64 * cfg.t_s;
            observe(step, &state);
            let inside = check_converged(&state, &self.target, cfg.error);
            match (inside, entered) {
                (true, None) => entered = Some(step),
                (false, Some(_)) => entered = None,
                _ => {}
            }
        }
    }
}

/// Simulates `g` with `leaders` fixed at their initial coordinates.
pub fn simulate(g: &WeightedGraph, leaders: &LeaderSet, cfg: &SimulationConfig) -> Result<SimulationOutcome> {
    Simulator::from_graph(g, leaders)?.run(cfg)
}

/// Writes `step,t,agent,axis,value` rows for every `stride`-th step.
pub struct TrajectoryCsv<W: Write> {
    out: W,
    stride: u64,
    error: Option<std::io::Error>,
}

impl<W: Write> TrajectoryCsv<W> {
    pub fn new(mut out: W, stride: u64) -> std::io::Result<Self> {
        writeln!(out, "step,t,agent,axis,value")?;
        Ok(TrajectoryCsv {
            out,
            stride: stride.max(1),
            error: None,
        })
    }

    pub fn observe(&mut self, step: u64, state: &SystemState) {
        if self.error.is_some() || !step.is_multiple_of(self.stride) {
            return;
        }
        let res = (|| {
            for (axis, values) in [("x", &state.x), ("y", &state.y)] {
                for (agent, v) in values.iter().enumerate() {
                    writeln!(self.out, "{step},{:?},{agent},{axis},{v:?}", state.t)?;
                }
            }
            Ok(())
        })();
        self.error = res.err();
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;
    use crate::graph::{generate_connected, GeometricParams, Point};

    fn two_agents() -> (LaplacianMatrix, LeaderSet) {
        let g = WeightedGraph::from_edges(line_coords(2), &[(0, 1, 1.0)]).unwrap();
        (g.laplacian(), LeaderSet::new([0], 2).unwrap())
    }

    fn state(x: &[f64], y: &[f64]) -> SystemState {
        SystemState {
            x: x.to_vec(),
            y: y.to_vec(),
            t: 0.0,
        }
    }

    #[test]
    fn free_step_example() {
        let (l, leaders) = two_agents();
        let op = ConsensusOperator::new(&l, &leaders);
        let next = step_free(&state(&[0.0, 100.0], &[0.0, 0.0]), &op, 0.001);
        assert!((next.x[1] - 99.9).abs() < 1e-12);
        assert_eq!(next.x[0], 0.0);
        assert!((next.t - 0.001).abs() < 1e-15);
    }

    #[test]
    fn free_step_fixed_point_and_zero_step() {
        let (l, leaders) = two_agents();
        let op = ConsensusOperator::new(&l, &leaders);
        let s = state(&[3.0, 3.0], &[1.0, 1.0]);
        let next = step_free(&s, &op, 0.001);
        assert_eq!((next.x, next.y), (s.x.clone(), s.y.clone()));
        let s = state(&[0.0, 50.0], &[0.0, 7.0]);
        let next = step_free(&s, &op, 0.0);
        assert_eq!((next.x, next.y), (s.x, s.y));
    }

    #[test]
    fn capped_step_examples() {
        let (l, leaders) = two_agents();
        let op = ConsensusOperator::new(&l, &leaders);
        let cap = SpeedCap::euclidean(15.4);
        let next = step_capped(&state(&[0.0, 100.0], &[0.0, 0.0]), &op, 0.001, cap);
        assert!((next.x[1] - 99.9846).abs() < 1e-12);

        let s = state(&[0.0, 5.0], &[0.0, 0.0]);
        assert_eq!(step_capped(&s, &op, 0.001, cap), step_free(&s, &op, 0.001));

        let (ax, ay) = cap.apply(30.0, 40.0);
        assert!((ax - 9.24).abs() < 1e-12 && (ay - 12.32).abs() < 1e-12);
        let per_axis = SpeedCap {
            v_max: 15.4,
            mode: CapMode::PerAxis,
        };
        assert_eq!(per_axis.apply(30.0, -40.0), (15.4, -15.4));
        assert_eq!(per_axis.apply(3.0, -4.0), (3.0, -4.0));
    }

    fn p3_target(e: f64) -> (Equilibrium, f64) {
        let l = path(3).laplacian();
        let sys = ground(&l, &LeaderSet::new([0], 3).unwrap()).unwrap();
        let s = state(&[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0]);
        (Equilibrium::solve(&sys, &s).unwrap(), e)
    }

    #[test]
    fn convergence_check_boundaries() {
        let (target, e) = p3_target(0.5);
        assert!(check_converged(&state(&[0.0; 3], &[0.0; 3]), &target, e));
        assert!(check_converged(&state(&[0.0, 0.5, 0.0], &[0.0; 3]), &target, e));
        assert!(check_converged(&state(&[0.0; 3], &[0.0, 0.0, 0.5]), &target, e));
        assert!(!check_converged(&state(&[0.0, 0.5 + 1e-9, 0.0], &[0.0; 3]), &target, e));
    }

    #[test]
    fn identical_positions_converge_immediately() {
        let coords = vec![Point::new(1.0, 2.0); 4];
        let g = WeightedGraph::from_edges(coords, &[(0, 1, 3.0), (1, 2, 3.0), (2, 3, 3.0)]).unwrap();
        let leaders = LeaderSet::new([2], 4).unwrap();
        for cap in [None, Some(SpeedCap::euclidean(15.4))] {
            let out = simulate(&g, &leaders, &SimulationConfig::reference().with_cap(cap)).unwrap();
            assert_eq!(out.status, Status::Converged);
            assert_eq!(out.t_e, Some(0.0));
        }
    }

    #[test]
    fn scalar_path_matches_analytic_time() {
        // Follower between leaders at 0 and 10 cm: x(t) = 5 - 5 exp(-2t).
        let coords = vec![Point::new(0.0, 0.0), Point::new(0.0, 0.0), Point::new(0.1, 0.0)];
        let g = WeightedGraph::from_edges(coords, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let leaders = LeaderSet::new([0, 2], 3).unwrap();
        let sim = Simulator::from_graph(&g, &leaders).unwrap();
        assert!((sim.equilibrium().x.x_star[1] - 5.0).abs() < 1e-12);
        let cfg = SimulationConfig::reference();
        let out = sim.run(&cfg).unwrap();
        let analytic = 0.5 * (5.0 / cfg.error).ln();
        let t_e = out.t_e.unwrap();
        assert!((t_e - analytic).abs() / analytic < 0.02, "{t_e} vs {analytic}");
    }

    #[test]
    fn one_step_budget_runs_out() {
        let g = path(3);
        let leaders = LeaderSet::new([0], 3).unwrap();
        let cfg = SimulationConfig {
            max_steps: 1,
            ..SimulationConfig::reference()
        };
        let out = simulate(&g, &leaders, &cfg).unwrap();
        assert_eq!(out.status, Status::MaxIterations);
        assert_eq!(out.t_e, None);
        assert_eq!(out.steps, 1);
    }

    #[test]
    fn unstable_step_rejected() {
        let g = WeightedGraph::from_edges(line_coords(2), &[(0, 1, 5000.0)]).unwrap();
        let leaders = LeaderSet::new([0], 2).unwrap();
        assert!(matches!(
            simulate(&g, &leaders, &SimulationConfig::reference()),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn free_runs_contract_monotonically_and_hold_leaders() {
        let params = GeometricParams {
            n: 20,
            side: 10.0,
            radius: 3.5,
            weight_max: 50.0,
        };
        for seed in 0..8 {
            let (g, _) = generate_connected(&params, seed).unwrap();
            let leaders = LeaderSet::new([seed as usize, 19 - seed as usize], 20).unwrap();
            let sim = Simulator::from_graph(&g, &leaders).unwrap();
            assert!(sim.stability_margin(1e-3) < 2.0);
            let initial = sim.initial().clone();
            let mut prev = f64::INFINITY;
            let out = sim
                .run_observed(&SimulationConfig::reference(), |_, s| {
                    let (dx, dy) = deviation(s, sim.equilibrium());
                    let d = dx.hypot(dy);
                    assert!(d < prev || d == 0.0, "deviation rose from {prev} to {d}");
                    prev = d;
                    for i in leaders.indices() {
                        assert_eq!(s.x[i].to_bits(), initial.x[i].to_bits());
                        assert_eq!(s.y[i].to_bits(), initial.y[i].to_bits());
                    }
                })
                .unwrap();
            assert!(out.converged());
            assert!(out.final_deviation.0 <= 5e-8 && out.final_deviation.1 <= 5e-8);
        }
    }

    #[test]
    fn capped_runs_respect_speed_limit() {
        let params = GeometricParams {
            n: 15,
            side: 10.0,
            radius: 4.0,
            weight_max: 50.0,
        };
        let (g, _) = generate_connected(&params, 3).unwrap();
        let leaders = LeaderSet::new([0], 15).unwrap();
        let sim = Simulator::from_graph(&g, &leaders).unwrap();
        let free = sim.run(&SimulationConfig::reference()).unwrap();
        let cfg = SimulationConfig::reference().with_cap(Some(SpeedCap::euclidean(15.4)));
        let capped = sim.run(&cfg).unwrap();
        assert!(capped.converged());
        assert!(capped.max_applied_speed <= 15.4 + 1e-12);
        assert!(capped.t_e.unwrap() >= free.t_e.unwrap());
        assert!(capped.steps_run >= capped.steps + CAPPED_CONFIRM_STEPS);
    }

    #[test]
    fn trajectory_csv_rows() {
        let (l, leaders) = two_agents();
        let sim = Simulator::new(&l, &leaders, state(&[0.0, 1.0], &[0.0, 0.0])).unwrap();
        let mut csv = TrajectoryCsv::new(Vec::new(), 1).unwrap();
        let cfg = SimulationConfig {
            max_steps: 2,
            error: 1e-12,
            ..SimulationConfig::reference()
        };
        sim.run_observed(&cfg, |step, s| csv.observe(step, s)).unwrap();
        let text = String::from_utf8(csv.finish().unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,t,agent,axis,value");
        assert_eq!(lines.len(), 1 + 3 * 4);
        assert_eq!(lines[1], "0,0.0,0,x,0.0");
        assert_eq!(lines[2], "0,0.0,1,x,1.0");
    }
}
