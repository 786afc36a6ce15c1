//! `report.json` and the comparison table.

use formfield::metrics::{max_heading_change, speed_profile, SpeedProfile};
use formfield::{Mode, RunResult, Scenario, SimError, Vec2};
use serde::{Deserialize, Serialize};

/// Displacements shorter than this are ignored when measuring heading
/// changes; they are numerical noise at convergence.
pub const HEADING_MIN_STEP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub mode: Mode,
    pub completed: bool,
    pub trapped: bool,
    pub t_end: f64,
    pub steps: u64,
    pub final_errors: Vec<Vec2>,
    pub final_error_norms: Vec<f64>,
    pub path_lengths: Vec<f64>,
    /// `null` when the scenario has no obstacles.
    pub min_clearance: Option<f64>,
    pub max_heading_change: f64,
    pub speed_profile: SpeedProfile,
    pub escape_episodes: Vec<u32>,
    pub trap_detections: Vec<u32>,
    pub failure: Option<String>,
}

impl Report {
    pub fn new(sc: &Scenario, hash: String, r: &RunResult) -> Self {
        Self {
            scenario: sc.name.clone(),
            scenario_hash: hash,
            seed: sc.sim.seed,
            mode: r.mode,
            completed: r.completed,
            trapped: r.trapped,
            t_end: r.t_end,
            steps: r.steps,
            final_errors: r.final_errors.clone(),
            final_error_norms: r.final_errors.iter().map(|e| e.norm()).collect(),
            path_lengths: r.path_lengths.clone(),
            min_clearance: r.min_clearance.is_finite().then_some(r.min_clearance),
            max_heading_change: max_heading_change(&r.trace, HEADING_MIN_STEP),
            speed_profile: speed_profile(&r.trace, sc),
            escape_episodes: r.escape_episodes.clone(),
            trap_detections: r.trap_detections.clone(),
            failure: r.failure.map(|e| e.to_string()),
        }
    }
}

fn failure_tag(f: Option<SimError>) -> &'static str {
    match f {
        None => "",
        Some(SimError::Penetration { .. }) => "penetration",
        Some(SimError::NonFinite { .. }) => "non_finite",
    }
}

/// One CSV row per run, with per-UAV error norms and path lengths.
pub fn comparison_csv(n: usize, runs: &[(&RunResult, &Report)]) -> String {
    let mut out = String::from("mode,completed,trapped,t_end");
    for i in 1..=n {
        out.push_str(&format!(",error_{i}"));
    }
    for i in 1..=n {
        out.push_str(&format!(",path_{i}"));
    }
    out.push_str(",min_clearance,max_heading_change,failure\n");
    for (r, rep) in runs {
        out.push_str(&format!("{},{},{},{}", r.mode, r.completed, r.trapped, r.t_end));
        for e in &rep.final_error_norms {
            out.push_str(&format!(",{e}"));
        }
        for p in &r.path_lengths {
            out.push_str(&format!(",{p}"));
        }
        out.push_str(&format!(
            ",{},{},{}\n",
            r.min_clearance,
            rep.max_heading_change,
            failure_tag(r.failure)
        ));
    }
    out
}
