//! Scenario description and the synchronous step engine.
//!
//! Every step reads one snapshot of all positions, computes each UAV's
//! forces and next velocity from it, then moves everybody at once, so the
//! result does not depend on UAV iteration order.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{control_input, integrate_step, ControllerSpec};
use crate::error::{ConfigError, EscapeError};
use crate::escape::{
    deflection_bound, detect_local_minimum, escape_completed, init_escape, run_escape_step, AnnealParams, EscapeContext,
};
use crate::formation::{virtual_target, FormationSpec, Topology};
use crate::potential::{
    aapf_att_force, aapf_att_potential, aapf_rep_force, aapf_rep_potential, adaptive_gain, classic_att_force,
    classic_rep_force, repulsion_active, smooth_force, CircleObstacle, FieldParams,
};
use crate::vec2::Vec2;

/// Which force model drives the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Classic potential field: fixed gain, no consensus coupling, no
    /// smoothing, no escape.
    Apf,
    /// Adaptive field without the escape procedure.
    Aapf,
    /// Adaptive field with deflected annealing escape.
    #[default]
    DsaAapf,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Apf, Mode::Aapf, Mode::DsaAapf];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Apf => "apf",
            Mode::Aapf => "aapf",
            Mode::DsaAapf => "dsa_aapf",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "apf" => Ok(Mode::Apf),
            "aapf" => Ok(Mode::Aapf),
            "dsa_aapf" => Ok(Mode::DsaAapf),
            other => Err(format!("unknown mode `{other}` (expected apf, aapf or dsa_aapf)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_max_time")]
    pub max_time: f64,
    /// Per-axis convergence tolerance on `X_i - X_gi`.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    /// Keep every n-th step in the trace. The first and last steps are
    /// always kept.
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_dt() -> f64 {
    0.0005
}
fn default_max_time() -> f64 {
    5.0
}
fn default_tol() -> f64 {
    0.011
}
fn default_record_every() -> usize {
    1
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            max_time: default_max_time(),
            tol: default_tol(),
            seed: 0,
            record_every: default_record_every(),
        }
    }
}

/// A complete experiment. UAV 0 is the leader.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub uavs: Vec<Vec2>,
    pub topology: Topology,
    pub formation: FormationSpec,
    pub goal: Vec2,
    pub obstacles: Vec<CircleObstacle>,
    pub field: FieldParams,
    pub controller: ControllerSpec,
    pub anneal: AnnealParams,
    pub sim: SimSettings,
}

impl Scenario {
    pub fn len(&self) -> usize {
        self.uavs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.uavs.is_empty()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.uavs.len();
        if n == 0 {
            return Err(ConfigError::invalid("uavs", "at least one UAV required"));
        }
        for (i, p) in self.uavs.iter().enumerate() {
            if !p.is_finite() {
                return Err(ConfigError::invalid(format!("uavs[{i}]"), "position must be finite"));
            }
        }
        if !self.goal.is_finite() {
            return Err(ConfigError::invalid("goal", "must be finite"));
        }
        if self.topology.len() != n {
            return Err(ConfigError::invalid(
                "topology",
                format!("graph has {} nodes but {n} UAVs are defined", self.topology.len()),
            ));
        }
        if self.formation.offsets.len() != n {
            return Err(ConfigError::invalid(
                "formation.offsets",
                format!("expected {n} offsets, found {}", self.formation.offsets.len()),
            ));
        }
        self.formation.validate()?;
        self.field.validate(n)?;
        self.anneal.validate()?;
        for (k, obs) in self.obstacles.iter().enumerate() {
            obs.validate(&format!("obstacles[{k}]"))?;
            for (i, &p) in self.uavs.iter().enumerate() {
                if obs.clearance(p) <= 0.0 {
                    return Err(ConfigError::invalid(
                        format!("uavs[{i}]"),
                        format!("UAV {} starts inside obstacle {k} centered at {}", i + 1, obs.center),
                    ));
                }
            }
        }
        let s = &self.sim;
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return Err(ConfigError::invalid(
                "sim.dt",
                format!("must be positive, got {}", s.dt),
            ));
        }
        if !(s.max_time > 0.0 && s.max_time.is_finite()) {
            return Err(ConfigError::invalid(
                "sim.max_time",
                format!("must be positive, got {}", s.max_time),
            ));
        }
        if !(s.tol > 0.0 && s.tol.is_finite()) {
            return Err(ConfigError::invalid(
                "sim.tol",
                format!("must be positive, got {}", s.tol),
            ));
        }
        if s.record_every == 0 {
            return Err(ConfigError::invalid("sim.record_every", "must be at least 1"));
        }
        Ok(())
    }

    /// Current target of UAV `i`: the fixed goal for the leader, the
    /// leader-relative virtual target for followers.
    pub fn target(&self, i: usize, positions: &[Vec2]) -> Vec2 {
        if i == 0 {
            self.goal
        } else {
            virtual_target(positions[0], self.formation.offsets[i])
        }
    }

    pub fn targets(&self, positions: &[Vec2]) -> Vec<Vec2> {
        (0..positions.len()).map(|i| self.target(i, positions)).collect()
    }

    /// Smallest surface clearance of `p` over all obstacles.
    pub fn clearance(&self, p: Vec2) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.clearance(p))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UavMode {
    Normal,
    Escaping,
}

impl UavMode {
    pub fn as_str(self) -> &'static str {
        match self {
            UavMode::Normal => "normal",
            UavMode::Escaping => "escaping",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EscapeState {
    pub ctx: EscapeContext,
    /// Velocity of the move currently being flown.
    pub leg_velocity: Vec2,
    pub leg_remaining: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Behavior {
    Normal,
    Escaping(Box<EscapeState>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct UavState {
    pub id: usize,
    pub position: Vec2,
    /// Smoothed force of the previous step.
    pub prev_force: Vec2,
    pub behavior: Behavior,
    history: VecDeque<Vec2>,
    trapped: bool,
}

impl UavState {
    fn new(id: usize, position: Vec2, window: usize) -> Self {
        Self {
            id,
            position,
            prev_force: Vec2::ZERO,
            behavior: Behavior::Normal,
            history: VecDeque::with_capacity(window + 2),
            trapped: false,
        }
    }

    pub fn mode(&self) -> UavMode {
        match self.behavior {
            Behavior::Normal => UavMode::Normal,
            Behavior::Escaping(_) => UavMode::Escaping,
        }
    }

    pub fn escape(&self) -> Option<&EscapeContext> {
        match &self.behavior {
            Behavior::Escaping(e) => Some(&e.ctx),
            Behavior::Normal => None,
        }
    }

    /// Whether the stall detector currently flags this UAV.
    pub fn is_trapped(&self) -> bool {
        self.trapped
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavSample {
    pub position: Vec2,
    /// Force that drove this step: the smoothed field force, or the escape
    /// force while escaping.
    pub force: Vec2,
    pub mode: UavMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub time: f64,
    pub uavs: Vec<UavSample>,
}

/// Forces on one UAV at the current snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldForces {
    pub target: Vec2,
    pub k_att: f64,
    pub rep_active: bool,
    pub attraction: Vec2,
    pub repulsion: Vec2,
}

impl FieldForces {
    pub fn total(&self) -> Vec2 {
        self.attraction + self.repulsion
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error, Serialize, Deserialize)]
pub enum SimError {
    #[error("UAV {uav} penetrated obstacle {obstacle} at t = {time} (position {position})")]
    Penetration {
        uav: usize,
        obstacle: usize,
        time: f64,
        position: Vec2,
    },
    #[error("UAV {uav} state became non-finite at t = {time}")]
    NonFinite { uav: usize, time: f64 },
}

/// Outcome of a full run plus summary metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub mode: Mode,
    pub trace: Vec<StepRecord>,
    pub completed: bool,
    pub t_end: f64,
    pub steps: u64,
    pub final_errors: Vec<Vec2>,
    pub path_lengths: Vec<f64>,
    /// `+∞` when there are no obstacles.
    pub min_clearance: f64,
    pub escape_episodes: Vec<u32>,
    pub trap_detections: Vec<u32>,
    /// The run stopped with at least one UAV flagged by the stall detector.
    pub trapped: bool,
    pub failure: Option<SimError>,
}

impl RunResult {
    pub fn any_trap_detected(&self) -> bool {
        self.trap_detections.iter().any(|&c| c > 0)
    }
}

pub struct Simulation<'a> {
    scenario: &'a Scenario,
    mode: Mode,
    states: Vec<UavState>,
    rng: ChaCha8Rng,
    step: u64,
    escape_episodes: Vec<u32>,
    trap_detections: Vec<u32>,
}

/// Per-UAV decision for the current step.
struct Action {
    velocity: Vec2,
    force: Vec2,
    prev_force: Vec2,
}

impl<'a> Simulation<'a> {
    pub fn new(scenario: &'a Scenario, mode: Mode) -> Result<Self, ConfigError> {
        scenario.validate()?;
        let window = scenario.anneal.trap_window;
        let states = scenario
            .uavs
            .iter()
            .enumerate()
            .map(|(i, &p)| UavState::new(i + 1, p, window))
            .collect();
        Ok(Self {
            scenario,
            mode,
            states,
            rng: ChaCha8Rng::seed_from_u64(scenario.sim.seed),
            step: 0,
            escape_episodes: vec![0; scenario.len()],
            trap_detections: vec![0; scenario.len()],
        })
    }

    pub fn states(&self) -> &[UavState] {
        &self.states
    }

    pub fn states_mut(&mut self) -> &mut [UavState] {
        &mut self.states
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.scenario.sim.dt
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.states.iter().map(|s| s.position).collect()
    }

    /// Deviation of every UAV from its current target.
    pub fn errors(&self) -> Vec<Vec2> {
        let positions = self.positions();
        positions
            .iter()
            .enumerate()
            .map(|(i, &p)| p - self.scenario.target(i, &positions))
            .collect()
    }

    pub fn converged(&self) -> bool {
        let tol = self.scenario.sim.tol;
        self.states.iter().all(|s| s.mode() == UavMode::Normal)
            && self.errors().iter().all(|e| e.x.abs() <= tol && e.y.abs() <= tol)
    }

    /// Field forces on UAV `i` at the given snapshot, according to the mode.
    pub fn field_forces(&self, i: usize, positions: &[Vec2]) -> Result<FieldForces, SimError> {
        let sc = self.scenario;
        let p = positions[i];
        let target = sc.target(i, positions);
        let rep_active = repulsion_active(p, &sc.obstacles);
        let penetration = |k: usize| SimError::Penetration {
            uav: i + 1,
            obstacle: k,
            time: self.time(),
            position: p,
        };
        let mut repulsion = Vec2::ZERO;
        let (k_att, attraction) = match self.mode {
            Mode::Apf => {
                for (k, obs) in sc.obstacles.iter().enumerate().filter(|(_, o)| o.within_reach(p)) {
                    repulsion += classic_rep_force(p, obs, sc.field.k_rep).map_err(|_| penetration(k))?;
                }
                (sc.field.k_att0, classic_att_force(p, target, sc.field.k_att0))
            }
            Mode::Aapf | Mode::DsaAapf => {
                for (k, obs) in sc.obstacles.iter().enumerate().filter(|(_, o)| o.within_reach(p)) {
                    repulsion += aapf_rep_force(p, target, obs, sc.field.k_rep, sc.field.b, sc.field.delta)
                        .map_err(|_| penetration(k))?;
                }
                let k_att = adaptive_gain(i, p, target, rep_active, &sc.field);
                let att = aapf_att_force(i, positions, target, &sc.topology, &sc.formation.offsets, k_att);
                (k_att, att)
            }
        };
        Ok(FieldForces {
            target,
            k_att,
            rep_active,
            attraction,
            repulsion,
        })
    }

    /// Potential energy of UAV `i` if it stood at `x` while everyone else
    /// keeps their snapshot position. Uses the base attractive gain.
    pub fn energy(&self, i: usize, positions: &[Vec2], x: Vec2) -> Option<f64> {
        let sc = self.scenario;
        let target = sc.target(i, positions);
        let mut moved = positions.to_vec();
        moved[i] = x;
        let mut u = aapf_att_potential(i, &moved, target, &sc.topology, &sc.formation.offsets, sc.field.k_att0);
        for obs in sc.obstacles.iter().filter(|o| o.within_reach(x)) {
            u += aapf_rep_potential(x, target, obs, sc.field.k_rep, sc.field.b).ok()?;
        }
        Some(u)
    }

    fn segment_is_clear(&self, a: Vec2, b: Vec2) -> bool {
        !self.scenario.obstacles.iter().any(|o| o.segment_hits(a, b))
    }

    /// Snapshot of the current state as a trace record. Forces are those
    /// of the most recent step.
    fn record(&self, forces: &[Vec2]) -> StepRecord {
        StepRecord {
            step: self.step,
            time: self.time(),
            uavs: self
                .states
                .iter()
                .zip(forces)
                .map(|(s, &f)| UavSample {
                    position: s.position,
                    force: f,
                    mode: s.mode(),
                })
                .collect(),
        }
    }

    fn plan_escape(
        &mut self,
        i: usize,
        positions: &[Vec2],
        mut esc: Box<EscapeState>,
    ) -> Result<(Behavior, Vec2), EscapeError> {
        let sc = self.scenario;
        let pos = positions[i];
        let gamma = sc.formation.gains[i];
        let hold = sc.sim.dt * sc.anneal.leg_steps as f64;
        let mut rng = std::mem::replace(&mut self.rng, ChaCha8Rng::seed_from_u64(0));
        let mv = run_escape_step(
            &mut esc.ctx,
            pos,
            &sc.anneal,
            |x| {
                if x != pos && !self.segment_is_clear(pos, x) {
                    return None;
                }
                self.energy(i, positions, x)
            },
            |f| integrate_step(pos, control_input(f, gamma, sc.controller), hold),
            &mut rng,
        );
        self.rng = rng;
        let mv = mv?;
        match mv.position {
            Some(x) => {
                esc.leg_velocity = (x - pos) / hold;
                esc.leg_remaining = sc.anneal.leg_steps - 1;
                let v = esc.leg_velocity;
                Ok((Behavior::Escaping(esc), v))
            }
            // Boxed in: give up on this episode and let the field take over.
            None => {
                self.states[i].history.clear();
                Ok((Behavior::Normal, Vec2::ZERO))
            }
        }
    }

    fn push_history(&mut self, i: usize) {
        let window = self.scenario.anneal.trap_window;
        let s = &mut self.states[i];
        s.history.push_back(s.position);
        while s.history.len() > window + 1 {
            s.history.pop_front();
        }
    }

    /// Decide what UAV `i` does this step.
    fn plan(&mut self, i: usize, positions: &[Vec2]) -> Result<Action, SimError> {
        let sc = self.scenario;
        let forces = self.field_forces(i, positions)?;
        let raw = forces.total();
        let alpha = if self.mode == Mode::Apf { 0.0 } else { sc.field.alpha };
        let gamma = sc.formation.gains[i];
        let pos = positions[i];

        if let Behavior::Escaping(esc) = &self.states[i].behavior {
            if esc.leg_remaining > 0 {
                let mut esc = esc.clone();
                esc.leg_remaining -= 1;
                let (velocity, force) = (esc.leg_velocity, esc.ctx.f_e);
                self.states[i].behavior = Behavior::Escaping(esc);
                return Ok(Action {
                    velocity,
                    force,
                    prev_force: raw,
                });
            }
            if escape_completed(&esc.ctx, pos, sc.anneal.theta0) {
                self.states[i].behavior = Behavior::Normal;
                self.states[i].history.clear();
                self.states[i].trapped = false;
                // Fresh start for the smoothing: no memory of the escape.
                return Ok(Action {
                    velocity: control_input(raw, gamma, sc.controller),
                    force: raw,
                    prev_force: raw,
                });
            }
            let esc = esc.clone();
            let (behavior, velocity) = self
                .plan_escape(i, positions, esc)
                .expect("deflection interval checked when the episode started");
            let force = match &behavior {
                Behavior::Escaping(e) => e.ctx.f_e,
                Behavior::Normal => raw,
            };
            self.states[i].behavior = behavior;
            return Ok(Action {
                velocity,
                force,
                prev_force: raw,
            });
        }

        let mut smoothed = smooth_force(self.states[i].prev_force, raw, alpha);
        self.push_history(i);
        let stalled = detect_local_minimum(
            self.states[i].history.make_contiguous(),
            raw,
            pos.distance(forces.target),
            sc.field.rho_g,
            forces.rep_active,
            &sc.anneal,
        );
        if stalled && !self.states[i].trapped {
            self.trap_detections[i] += 1;
        }
        self.states[i].trapped = stalled;

        if stalled && self.mode == Mode::DsaAapf {
            let started = init_escape(forces.attraction, forces.repulsion, pos, &sc.anneal)
                .ok()
                .filter(|ctx| deflection_bound(ctx.theta_c, sc.anneal.c) > 0.0)
                // Repulsion weaker than the stall threshold did not cause the stall.
                .filter(|ctx| ctx.f_e.norm() >= sc.anneal.eps_trap);
            match started {
                Some(ctx) => {
                    self.escape_episodes[i] += 1;
                    let esc = Box::new(EscapeState {
                        ctx,
                        leg_velocity: Vec2::ZERO,
                        leg_remaining: 0,
                    });
                    let (behavior, velocity) = self
                        .plan_escape(i, positions, esc)
                        .expect("deflection interval is non-empty");
                    let force = match &behavior {
                        Behavior::Escaping(e) => e.ctx.f_e,
                        Behavior::Normal => raw,
                    };
                    self.states[i].behavior = behavior;
                    self.states[i].history.clear();
                    return Ok(Action {
                        velocity,
                        force,
                        prev_force: smoothed,
                    });
                }
                None => {
                    // Stall without opposing forces: one random kick.
                    let angle = self.rng.gen::<f64>() * 2.0 * PI;
                    smoothed += Vec2::from_angle(angle) * sc.anneal.eps_trap;
                }
            }
        }

        Ok(Action {
            velocity: control_input(smoothed, gamma, sc.controller),
            force: smoothed,
            prev_force: smoothed,
        })
    }

    /// Advances every UAV by one `dt`. Returns the forces that drove the
    /// step.
    pub fn step(&mut self) -> Result<Vec<Vec2>, SimError> {
        let positions = self.positions();
        let n = positions.len();
        let mut actions = Vec::with_capacity(n);
        for i in 0..n {
            actions.push(self.plan(i, &positions)?);
        }
        let dt = self.scenario.sim.dt;
        let time = (self.step + 1) as f64 * dt;
        for (i, action) in actions.iter().enumerate() {
            let from = positions[i];
            let to = integrate_step(from, action.velocity, dt);
            if !to.is_finite() {
                return Err(SimError::NonFinite { uav: i + 1, time });
            }
            for (k, obs) in self.scenario.obstacles.iter().enumerate() {
                if obs.segment_hits(from, to) {
                    return Err(SimError::Penetration {
                        uav: i + 1,
                        obstacle: k,
                        time,
                        position: to,
                    });
                }
            }
            let s = &mut self.states[i];
            s.position = to;
            s.prev_force = action.prev_force;
        }
        self.step += 1;
        Ok(actions.iter().map(|a| a.force).collect())
    }

    /// Steps until convergence, failure or `max_time`.
    pub fn run(mut self) -> RunResult {
        let sc = self.scenario;
        let n = sc.len();
        let max_steps = (sc.sim.max_time / sc.sim.dt).round() as u64;
        let every = sc.sim.record_every as u64;

        let mut trace = vec![self.record(&vec![Vec2::ZERO; n])];
        let mut path_lengths = vec![0.0; n];
        let mut min_clearance = self
            .positions()
            .iter()
            .map(|&p| sc.clearance(p))
            .fold(f64::INFINITY, f64::min);
        let mut completed = self.converged();
        let mut failure = None;

        while !completed && self.step < max_steps {
            let before = self.positions();
            let forces = match self.step() {
                Ok(f) => f,
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            };
            for (i, s) in self.states.iter().enumerate() {
                path_lengths[i] += s.position.distance(before[i]);
                min_clearance = min_clearance.min(sc.clearance(s.position));
            }
            completed = self.converged();
            if completed || self.step.is_multiple_of(every) || self.step == max_steps {
                trace.push(self.record(&forces));
            }
        }

        let trapped = !completed && self.states.iter().any(|s| s.trapped || s.mode() == UavMode::Escaping);
        RunResult {
            mode: self.mode,
            completed,
            t_end: self.time(),
            steps: self.step,
            final_errors: self.errors(),
            path_lengths,
            min_clearance,
            escape_episodes: self.escape_episodes,
            trap_detections: self.trap_detections,
            trapped,
            failure,
            trace,
        }
    }
}

/// Runs a scenario under the given mode.
pub fn run(scenario: &Scenario, mode: Mode) -> Result<RunResult, ConfigError> {
    Ok(Simulation::new(scenario, mode)?.run())
}
