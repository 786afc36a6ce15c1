//! Leader-follower UAV formation planning with an adaptive artificial
//! potential field and a deflected simulated-annealing escape from local
//! minima.
//!
//! The crate is organised bottom-up: [`formation`] (graph and formation
//! geometry), [`potential`] (fields and forces), [`controller`] (control
//! law), [`escape`] (stall detection and annealing escape) and [`sim`]
//! (scenario, step engine). [`presets`] holds the built-in scenarios and
//! [`metrics`] trace summaries.

pub mod controller;
pub mod error;
pub mod escape;
pub mod formation;
pub mod metrics;
pub mod potential;
pub mod presets;
pub mod sim;
pub mod vec2;

pub use controller::{ControllerSpec, PhiVariant, SVariant};
pub use error::{ConfigError, EscapeError, GeometryError};
pub use escape::{AnnealParams, EscapeContext, Rotation};
pub use formation::{FormationSpec, Topology};
pub use potential::{CircleObstacle, FieldParams};
pub use presets::{preset, PRESET_NAMES};
pub use sim::{run, Mode, RunResult, Scenario, SimError, SimSettings, StepRecord, UavMode};
pub use vec2::Vec2;
