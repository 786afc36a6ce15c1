//! Consensus control law `u = γ · s(F') · φ(|F'|)`, applied per axis, and
//! single-integrator stepping.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::vec2::Vec2;

/// Direction function `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SVariant {
    /// `sign(z)`, zero at zero.
    Sign,
    /// `5(|z + 0.1| - |z - 0.1|)`.
    Saturation,
    /// `z / (|z| + 0.1)`.
    Smooth,
}

/// Shaping function `φ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiVariant {
    /// `|z|`
    Linear,
    /// `2|z|^0.5`
    Sqrt,
    /// `2|z|^0.5 + 2|z|^1.5`
    SqrtPlusPow15,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSpec {
    pub s: SVariant,
    pub phi: PhiVariant,
}

impl ControllerSpec {
    pub const fn new(s: SVariant, phi: PhiVariant) -> Self {
        Self { s, phi }
    }

    /// The nine direction/shaping pairs, grouped by shaping function.
    pub fn table() -> [ControllerSpec; 9] {
        use PhiVariant::*;
        use SVariant::*;
        let mut out = [ControllerSpec::new(Sign, Linear); 9];
        for (g, phi) in [Linear, Sqrt, SqrtPlusPow15].into_iter().enumerate() {
            for (k, s) in [Sign, Saturation, Smooth].into_iter().enumerate() {
                out[g * 3 + k] = ControllerSpec::new(s, phi);
            }
        }
        out
    }
}

impl Default for ControllerSpec {
    fn default() -> Self {
        ControllerSpec::new(SVariant::Saturation, PhiVariant::SqrtPlusPow15)
    }
}

impl fmt::Display for ControllerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.s {
            SVariant::Sign => "sign",
            SVariant::Saturation => "saturation",
            SVariant::Smooth => "smooth",
        };
        let phi = match self.phi {
            PhiVariant::Linear => "linear",
            PhiVariant::Sqrt => "sqrt",
            PhiVariant::SqrtPlusPow15 => "sqrt_plus_pow15",
        };
        write!(f, "{s}/{phi}")
    }
}

impl FromStr for SVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sign" => Ok(SVariant::Sign),
            "saturation" => Ok(SVariant::Saturation),
            "smooth" => Ok(SVariant::Smooth),
            other => Err(format!("unknown direction function `{other}`")),
        }
    }
}

impl FromStr for PhiVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(PhiVariant::Linear),
            "sqrt" => Ok(PhiVariant::Sqrt),
            "sqrt_plus_pow15" => Ok(PhiVariant::SqrtPlusPow15),
            other => Err(format!("unknown shaping function `{other}`")),
        }
    }
}

pub fn s_func(z: f64, variant: SVariant) -> f64 {
    match variant {
        SVariant::Sign => {
            if z > 0.0 {
                1.0
            } else if z < 0.0 {
                -1.0
            } else {
                0.0
            }
        }
        SVariant::Saturation => 5.0 * ((z + 0.1).abs() - (z - 0.1).abs()),
        SVariant::Smooth => z / (z.abs() + 0.1),
    }
}

pub fn phi_func(z_abs: f64, variant: PhiVariant) -> f64 {
    match variant {
        PhiVariant::Linear => z_abs,
        PhiVariant::Sqrt => 2.0 * z_abs.sqrt(),
        PhiVariant::SqrtPlusPow15 => 2.0 * z_abs.sqrt() + 2.0 * z_abs * z_abs.sqrt(),
    }
}

fn axis_input(z: f64, gamma: f64, spec: ControllerSpec) -> f64 {
    gamma * s_func(z, spec.s) * phi_func(z.abs(), spec.phi)
}

/// Velocity command for a smoothed force, axis by axis.
pub fn control_input(force: Vec2, gamma: f64, spec: ControllerSpec) -> Vec2 {
    Vec2::new(axis_input(force.x, gamma, spec), axis_input(force.y, gamma, spec))
}

/// Explicit Euler step of `Ẋ = u`.
pub fn integrate_step(p: Vec2, u: Vec2, dt: f64) -> Vec2 {
    p + u * dt
}
