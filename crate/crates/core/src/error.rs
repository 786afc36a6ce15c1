use thiserror::Error;

use crate::vec2::Vec2;

/// Invalid scenario or parameter values. `field` names the offending
/// configuration path, e.g. `field.k_rep`.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ConfigError {
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("{what}: expected {expected} entries, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, Error, PartialEq)]
pub enum GeometryError {
    /// The query point lies on or inside an obstacle body.
    #[error("obstacle penetration at {point} (obstacle centered at {center})")]
    Penetration { point: Vec2, center: Vec2 },
}

#[derive(Debug, Clone, Copy, Error, PartialEq)]
pub enum EscapeError {
    #[error("deflection interval (0, θ_c - π/c] is empty: c = {c}, θ_c = {theta_c}; need c > π/θ_c")]
    EmptyDeflectionInterval { c: f64, theta_c: f64 },
    #[error("untrapped stall: no repulsion acting at the trap position")]
    NoRepulsion,
    #[error("attractive force is zero; escape direction undefined")]
    NoAttraction,
}
