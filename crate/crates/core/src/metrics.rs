//! Summaries computed from a recorded trace.

use serde::{Deserialize, Serialize};

use crate::potential::repulsion_active;
use crate::sim::{Scenario, StepRecord, UavMode};
use crate::vec2::Vec2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub t_end: f64,
    pub final_errors: Vec<Vec2>,
    pub path_lengths: Vec<f64>,
    pub min_clearance: f64,
    pub escape_episodes: Vec<u32>,
}

/// Summary metrics of a non-empty trace.
pub fn metrics(trace: &[StepRecord], scenario: &Scenario) -> Summary {
    let last = trace.last().expect("trace must not be empty");
    let n = last.uavs.len();
    let positions: Vec<Vec2> = last.uavs.iter().map(|u| u.position).collect();
    let final_errors = positions
        .iter()
        .enumerate()
        .map(|(i, &p)| p - scenario.target(i, &positions))
        .collect();
    let min_clearance = trace
        .iter()
        .flat_map(|r| r.uavs.iter())
        .map(|u| scenario.clearance(u.position))
        .fold(f64::INFINITY, f64::min);
    let escape_episodes = (0..n)
        .map(|i| {
            trace
                .windows(2)
                .filter(|w| w[0].uavs[i].mode == UavMode::Normal && w[1].uavs[i].mode == UavMode::Escaping)
                .count() as u32
                + u32::from(trace[0].uavs[i].mode == UavMode::Escaping)
        })
        .collect();
    Summary {
        t_end: last.time,
        final_errors,
        path_lengths: (0..n).map(|i| path_length(trace, i)).collect(),
        min_clearance,
        escape_episodes,
    }
}

pub fn path_length(trace: &[StepRecord], uav: usize) -> f64 {
    trace
        .windows(2)
        .map(|w| w[1].uavs[uav].position.distance(w[0].uavs[uav].position))
        .sum()
}

/// Largest angle between successive displacement vectors of any UAV.
/// Steps shorter than `min_step` are ignored.
pub fn max_heading_change(trace: &[StepRecord], min_step: f64) -> f64 {
    let n = trace.first().map_or(0, |r| r.uavs.len());
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let mut prev: Option<Vec2> = None;
        for w in trace.windows(2) {
            let d = w[1].uavs[i].position - w[0].uavs[i].position;
            if d.norm() <= min_step {
                continue;
            }
            if let Some(p) = prev {
                worst = worst.max(p.angle_between(d));
            }
            prev = Some(d);
        }
    }
    worst
}

/// Mean per-step speed split by where the step started.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedProfile {
    /// Outside every influence band and beyond `rho_g` of the target.
    pub free: f64,
    /// Inside at least one influence band.
    pub influence: f64,
    /// Within `rho_g` of the target, outside influence.
    pub near_goal: f64,
    pub free_samples: usize,
    pub influence_samples: usize,
    pub near_goal_samples: usize,
}

pub fn speed_profile(trace: &[StepRecord], scenario: &Scenario) -> SpeedProfile {
    let mut sums = [0.0; 3];
    let mut counts = [0usize; 3];
    for w in trace.windows(2) {
        let dt = w[1].time - w[0].time;
        if dt <= 0.0 {
            continue;
        }
        let positions: Vec<Vec2> = w[0].uavs.iter().map(|u| u.position).collect();
        for (i, &p) in positions.iter().enumerate() {
            let speed = w[1].uavs[i].position.distance(p) / dt;
            let class = if repulsion_active(p, &scenario.obstacles) {
                1
            } else if p.distance(scenario.target(i, &positions)) < scenario.field.rho_g {
                2
            } else {
                0
            };
            sums[class] += speed;
            counts[class] += 1;
        }
    }
    let mean = |k: usize| {
        if counts[k] > 0 {
            sums[k] / counts[k] as f64
        } else {
            f64::NAN
        }
    };
    SpeedProfile {
        free: mean(0),
        influence: mean(1),
        near_goal: mean(2),
        free_samples: counts[0],
        influence_samples: counts[1],
        near_goal_samples: counts[2],
    }
}

/// Per-record sum of follower offset errors `|X_i - (X_1 - D_i)|`.
pub fn follower_offset_error(trace: &[StepRecord], scenario: &Scenario) -> Vec<f64> {
    trace
        .iter()
        .map(|r| {
            let leader = r.uavs[0].position;
            r.uavs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, u)| (u.position - (leader - scenario.formation.offsets[i])).norm())
                .sum()
        })
        .collect()
}

/// Index of the last record in which any UAV was escaping or under
/// repulsion, if any.
pub fn last_avoidance_index(trace: &[StepRecord], scenario: &Scenario) -> Option<usize> {
    trace.iter().rposition(|r| {
        r.uavs
            .iter()
            .any(|u| u.mode == UavMode::Escaping || repulsion_active(u.position, &scenario.obstacles))
    })
}
