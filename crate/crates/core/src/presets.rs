//! Built-in experiment scenarios.
//!
//! All presets share a five-UAV V formation (leader first) on the
//! communication graph 1-2, 1-4, 1-5, 2-3, 3-4, 4-5.

use std::f64::consts::PI;

use crate::controller::{ControllerSpec, PhiVariant, SVariant};
use crate::error::ConfigError;
use crate::escape::AnnealParams;
use crate::formation::{FormationSpec, Topology};
use crate::potential::{CircleObstacle, FieldParams, DEFAULT_B, DEFAULT_DELTA};
use crate::sim::{Scenario, SimSettings};
use crate::vec2::Vec2;

pub const PRESET_NAMES: [&str; 6] = ["group1", "group2", "group3", "complex", "semi_left", "semi_bottom"];

const EDGES: [(usize, usize); 6] = [(0, 1), (0, 3), (0, 4), (1, 2), (2, 3), (3, 4)];

fn v(x: f64, y: f64) -> Vec2 {
    Vec2::new(x, y)
}

fn formation() -> FormationSpec {
    FormationSpec {
        offsets: vec![v(0.0, 0.0), v(1.0, -1.0), v(1.0, 1.0), v(2.0, -2.0), v(2.0, 2.0)],
        gains: vec![1.0, 3.0, 5.0, 3.0, 3.0],
    }
}

fn field(k_att0: f64, k_rep: f64, h: [f64; 5], tau: [f64; 5]) -> FieldParams {
    FieldParams {
        k_att0,
        k_rep,
        b: DEFAULT_B,
        alpha: 0.2,
        h: h.to_vec(),
        tau: tau.to_vec(),
        rho_g: 0.2,
        delta: DEFAULT_DELTA,
    }
}

/// Overlapping circles of radius `r` along the segment `a -> b`.
pub fn wall(a: Vec2, b: Vec2, r: f64, influence: f64) -> Vec<CircleObstacle> {
    let len = a.distance(b);
    let count = (len / r).ceil().max(1.0) as usize;
    (0..=count)
        .map(|k| CircleObstacle::new(a + (b - a) * (k as f64 / count as f64), r, influence))
        .collect()
}

/// Three walls joining four corners in order: `c0-c1`, `c1-c2`, `c2-c3`.
pub fn u_shape(corners: [Vec2; 4], r: f64, influence: f64) -> Vec<CircleObstacle> {
    let mut out = wall(corners[0], corners[1], r, influence);
    out.extend(wall(corners[1], corners[2], r, influence).into_iter().skip(1));
    out.extend(wall(corners[2], corners[3], r, influence).into_iter().skip(1));
    out
}

fn base(name: &str) -> Scenario {
    Scenario {
        name: name.to_string(),
        uavs: Vec::new(),
        topology: Topology::from_edges(5, &EDGES).expect("static topology"),
        formation: formation(),
        goal: Vec2::ZERO,
        obstacles: Vec::new(),
        field: field(3.0, 3.0, [1.0; 5], [1.0; 5]),
        controller: ControllerSpec::default(),
        anneal: AnnealParams::default(),
        sim: SimSettings::default(),
    }
}

fn reconfiguration(name: &str, k_att0: f64, k_rep: f64, phi: PhiVariant) -> Scenario {
    let mut s = base(name);
    s.uavs = vec![v(1.0, 11.0), v(1.0, 16.0), v(1.0, 4.0), v(1.0, 21.0), v(1.0, 1.0)];
    s.goal = v(50.0, 11.0);
    s.obstacles = vec![CircleObstacle::new(v(25.0, 11.0), 0.5, 3.0)];
    s.field = field(k_att0, k_rep, [13.0, 1.7, 1.7, 1.7, 1.7], [27.0, 4.0, 4.0, 4.0, 4.0]);
    s.controller = ControllerSpec::new(SVariant::Saturation, phi);
    s.sim = SimSettings {
        dt: 1e-5,
        max_time: 3.0,
        record_every: 10,
        ..SimSettings::default()
    };
    s.anneal.trap_window = 2000;
    s
}

fn complex() -> Scenario {
    let mut s = reconfiguration("complex", 3.0, 3.0, PhiVariant::SqrtPlusPow15);
    s.obstacles = [
        (v(24.0, 12.5), 0.5),
        (v(29.0, 8.0), 0.5),
        (v(33.0, 14.0), 0.5),
        (v(36.0, 10.0), 0.5),
        (v(40.0, 7.0), 0.5),
        (v(43.0, 13.0), 0.5),
    ]
    .into_iter()
    .map(|(c, r)| CircleObstacle::new(c, r, 3.0))
    .collect();
    s
}

fn escape_base(name: &str) -> Scenario {
    let mut s = base(name);
    s.goal = v(13.0, 12.0);
    s.field = field(3.0, 3.0, [40.0, 4.0, 4.0, 4.0, 4.0], [27.0, 4.0, 4.0, 4.0, 4.0]);
    s.controller = ControllerSpec::default();
    s.anneal = AnnealParams {
        t0: 10.0,
        beta: 0.99,
        c: 1.28,
        theta0: 4.0 * PI / 9.0,
        trap_window: 2000,
        leg_steps: 1500,
        ..AnnealParams::default()
    };
    s.sim = SimSettings {
        dt: 1e-5,
        max_time: 2.5,
        record_every: 10,
        ..SimSettings::default()
    };
    s
}

fn semi_left() -> Scenario {
    let mut s = escape_base("semi_left");
    s.uavs = vec![v(1.0, 2.0), v(0.0, 7.0), v(0.0, 5.0), v(0.0, 7.0), v(0.0, 5.0)];
    s.obstacles = u_shape([v(5.0, 16.0), v(9.4, 16.0), v(9.4, -1.0), v(5.0, -1.0)], 0.5, 3.0);
    s
}

fn semi_bottom() -> Scenario {
    let mut s = escape_base("semi_bottom");
    s.uavs = vec![v(1.0, 1.0), v(1.0, 3.0), v(1.0, 2.0), v(1.0, 2.0), v(1.0, 0.0)];
    // Roof tilted across the approach so the wings are not pinned under it.
    s.obstacles = u_shape([v(3.8, 9.0), v(3.8, 11.7), v(11.6, 5.5), v(11.6, 3.0)], 0.5, 3.0);
    s.anneal.theta0 = 2.0 * PI / 5.0;
    s
}

/// Looks up a built-in scenario by name.
pub fn preset(name: &str) -> Result<Scenario, ConfigError> {
    match name {
        "group1" => Ok(reconfiguration("group1", 13.0, 5.0, PhiVariant::Linear)),
        "group2" => Ok(reconfiguration("group2", 38.0, 10.0, PhiVariant::Sqrt)),
        "group3" => Ok(reconfiguration("group3", 3.0, 3.0, PhiVariant::SqrtPlusPow15)),
        "complex" => Ok(complex()),
        "semi_left" => Ok(semi_left()),
        "semi_bottom" => Ok(semi_bottom()),
        other => Err(ConfigError::invalid(
            "preset",
            format!("unknown preset `{other}` (expected one of {})", PRESET_NAMES.join(", ")),
        )),
    }
}
