//! Local-minimum detection and the deflected simulated-annealing escape.
//!
//! Once a UAV stalls, its repulsive force at the stall point becomes a
//! constant-magnitude escape force. Every annealing iteration rotates a
//! candidate copy of that force by a random angle, always in the same
//! direction, proposes the position it would drive the UAV to, and accepts
//! or rejects the proposal with the Metropolis rule. The accumulated
//! rotation traces an arc out of the trap. The episode ends when the
//! displacement from the stall point has turned at least `theta0` away from
//! the initial escape force.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, EscapeError};
use crate::vec2::Vec2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealParams {
    /// Initial temperature.
    #[serde(default = "default_t0")]
    pub t0: f64,
    /// Geometric cooling factor, strictly in (0, 1).
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Rotation constant; deflection angles are drawn from `(0, θ_c - π/c]`.
    #[serde(default = "default_c")]
    pub c: f64,
    /// Escape threshold angle in `[π/3, 2π/3]`.
    #[serde(default = "default_theta0")]
    pub theta0: f64,
    /// Force magnitude below which a UAV counts as stalled.
    #[serde(default = "default_eps_trap")]
    pub eps_trap: f64,
    /// Steps over which net displacement is measured.
    #[serde(default = "default_trap_window")]
    pub trap_window: usize,
    /// Net displacement below which a UAV under repulsion counts as stalled.
    #[serde(default = "default_trap_disp")]
    pub trap_disp: f64,
    /// Rejected proposals tolerated per iteration before the best one is
    /// forced through.
    #[serde(default = "default_max_rejects")]
    pub max_rejects: usize,
    /// Integration steps each accepted escape move is held for.
    #[serde(default = "default_leg_steps")]
    pub leg_steps: usize,
}

fn default_t0() -> f64 {
    10.0
}
fn default_beta() -> f64 {
    0.99
}
fn default_c() -> f64 {
    1.28
}
fn default_theta0() -> f64 {
    4.0 * PI / 9.0
}
fn default_eps_trap() -> f64 {
    0.1
}
fn default_trap_window() -> usize {
    50
}
fn default_trap_disp() -> f64 {
    0.01
}
fn default_max_rejects() -> usize {
    20
}
fn default_leg_steps() -> usize {
    1
}

impl Default for AnnealParams {
    fn default() -> Self {
        Self {
            t0: default_t0(),
            beta: default_beta(),
            c: default_c(),
            theta0: default_theta0(),
            eps_trap: default_eps_trap(),
            trap_window: default_trap_window(),
            trap_disp: default_trap_disp(),
            max_rejects: default_max_rejects(),
            leg_steps: default_leg_steps(),
        }
    }
}

impl AnnealParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(ConfigError::invalid(
                "anneal.t0",
                format!("must be positive, got {}", self.t0),
            ));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(ConfigError::invalid(
                "anneal.beta",
                format!("must lie strictly between 0 and 1, got {}", self.beta),
            ));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(ConfigError::invalid(
                "anneal.c",
                format!("must be positive, got {}", self.c),
            ));
        }
        // Small slack so 2π/3 written with finite precision is accepted.
        let band = (PI / 3.0 - 1e-12)..=(2.0 * PI / 3.0 + 1e-12);
        if !band.contains(&self.theta0) {
            return Err(ConfigError::invalid(
                "anneal.theta0",
                format!("must lie in [π/3, 2π/3], got {}", self.theta0),
            ));
        }
        if !(self.eps_trap > 0.0 && self.eps_trap.is_finite()) {
            return Err(ConfigError::invalid("anneal.eps_trap", "must be positive"));
        }
        if !(self.trap_disp > 0.0 && self.trap_disp.is_finite()) {
            return Err(ConfigError::invalid("anneal.trap_disp", "must be positive"));
        }
        for (name, v) in [
            ("trap_window", self.trap_window),
            ("max_rejects", self.max_rejects),
            ("leg_steps", self.leg_steps),
        ] {
            if v == 0 {
                return Err(ConfigError::invalid(format!("anneal.{name}"), "must be at least 1"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rotation {
    Cw,
    Ccw,
}

/// State of one escape episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EscapeContext {
    pub trap_pos: Vec2,
    /// Accumulated, rotated escape force.
    pub f_e: Vec2,
    pub f_e_initial: Vec2,
    pub direction: Rotation,
    pub temperature: f64,
    /// Angle between attraction and repulsion at the trap, in `(0, π)`.
    pub theta_c: f64,
    pub accepted_moves: u32,
    pub iterations: u32,
}

/// Stall test on a window of recent positions (oldest first).
///
/// A UAV within `rho_g` of its goal is converging, never trapped.
pub fn detect_local_minimum(
    history: &[Vec2],
    f_now: Vec2,
    dist_to_goal: f64,
    rho_g: f64,
    rep_active: bool,
    params: &AnnealParams,
) -> bool {
    if dist_to_goal <= rho_g {
        return false;
    }
    if f_now.norm() <= params.eps_trap {
        return true;
    }
    if !rep_active || history.len() <= params.trap_window {
        return false;
    }
    let last = history[history.len() - 1];
    let first = history[history.len() - 1 - params.trap_window];
    last.distance(first) < params.trap_disp
}

/// Side of the reversed attraction on which the repulsion lies, as the
/// sign of `f_att × (f_att - f_rep)`. Collinear inputs resolve to CCW.
pub fn deflection_direction(f_att: Vec2, f_rep: Vec2) -> Rotation {
    if f_att.cross(f_att - f_rep) < 0.0 {
        Rotation::Cw
    } else {
        Rotation::Ccw
    }
}

pub fn init_escape(f_att: Vec2, f_rep: Vec2, pos: Vec2, params: &AnnealParams) -> Result<EscapeContext, EscapeError> {
    if f_rep == Vec2::ZERO {
        return Err(EscapeError::NoRepulsion);
    }
    if f_att == Vec2::ZERO {
        return Err(EscapeError::NoAttraction);
    }
    Ok(EscapeContext {
        trap_pos: pos,
        f_e: f_rep,
        f_e_initial: f_rep,
        direction: deflection_direction(f_att, f_rep),
        temperature: params.t0,
        theta_c: f_rep.angle_between(f_att),
        accepted_moves: 0,
        iterations: 0,
    })
}

/// Upper end of the deflection interval, `θ_c - π/c`.
pub fn deflection_bound(theta_c: f64, c: f64) -> f64 {
    theta_c - PI / c
}

/// Uniform draw from `(0, θ_c - π/c]`.
pub fn sample_deflection_angle<R: Rng + ?Sized>(theta_c: f64, c: f64, rng: &mut R) -> Result<f64, EscapeError> {
    let upper = deflection_bound(theta_c, c);
    if upper.is_nan() || upper <= 0.0 {
        return Err(EscapeError::EmptyDeflectionInterval { c, theta_c });
    }
    let u: f64 = rng.gen();
    Ok(upper * (1.0 - u))
}

pub fn rotate_force(f: Vec2, theta: f64, direction: Rotation) -> Vec2 {
    let (s, c) = theta.sin_cos();
    match direction {
        Rotation::Cw => Vec2::new(c * f.x + s * f.y, -s * f.x + c * f.y),
        Rotation::Ccw => Vec2::new(c * f.x - s * f.y, s * f.x + c * f.y),
    }
}

pub fn metropolis_accept<R: Rng + ?Sized>(e_current: f64, e_candidate: f64, temperature: f64, rng: &mut R) -> bool {
    if e_candidate <= e_current {
        return true;
    }
    let p = (-(e_candidate - e_current) / temperature).exp();
    rng.gen::<f64>() < p
}

pub fn cool(temperature: f64, beta: f64) -> f64 {
    beta * temperature
}

/// True once the displacement from the trap has turned at least `theta0`
/// away from the initial escape force.
pub fn escape_completed(ctx: &EscapeContext, pos_now: Vec2, theta0: f64) -> bool {
    let r_e = pos_now - ctx.trap_pos;
    if r_e.norm() < 1e-9 {
        return false;
    }
    r_e.angle_between(ctx.f_e_initial) >= theta0
}

/// Result of one annealing iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscapeMove {
    /// Accepted next position, or `None` when every proposal was infeasible.
    pub position: Option<Vec2>,
    /// The Metropolis rule rejected every proposal and the lowest-energy
    /// one was taken instead.
    pub forced: bool,
    pub proposals: usize,
}

/// One annealing iteration from `current`.
///
/// `propose` maps a candidate escape force to the position it would reach;
/// `energy` returns the potential there, or `None` if the move is
/// infeasible (for example it cuts through an obstacle). Rejected
/// proposals are redrawn at the same temperature up to `max_rejects` times.
/// The context is rotated and cooled only when a move is taken.
pub fn run_escape_step<R, E, P>(
    ctx: &mut EscapeContext,
    current: Vec2,
    params: &AnnealParams,
    mut energy: E,
    mut propose: P,
    rng: &mut R,
) -> Result<EscapeMove, EscapeError>
where
    R: Rng + ?Sized,
    E: FnMut(Vec2) -> Option<f64>,
    P: FnMut(Vec2) -> Vec2,
{
    ctx.iterations += 1;
    let e_current = energy(current).unwrap_or(f64::INFINITY);
    let mut best: Option<(f64, Vec2, Vec2)> = None;
    let mut proposals = 0;

    for _ in 0..params.max_rejects {
        proposals += 1;
        let theta = sample_deflection_angle(ctx.theta_c, params.c, rng)?;
        let f_candidate = rotate_force(ctx.f_e, theta, ctx.direction);
        let x_candidate = propose(f_candidate);
        let Some(e_candidate) = energy(x_candidate) else {
            continue;
        };
        if metropolis_accept(e_current, e_candidate, ctx.temperature, rng) {
            take_move(ctx, f_candidate, params);
            return Ok(EscapeMove {
                position: Some(x_candidate),
                forced: false,
                proposals,
            });
        }
        if best.is_none_or(|(e, _, _)| e_candidate < e) {
            best = Some((e_candidate, f_candidate, x_candidate));
        }
    }

    match best {
        Some((_, f_candidate, x_candidate)) => {
            take_move(ctx, f_candidate, params);
            Ok(EscapeMove {
                position: Some(x_candidate),
                forced: true,
                proposals,
            })
        }
        None => Ok(EscapeMove {
            position: None,
            forced: false,
            proposals,
        }),
    }
}

fn take_move(ctx: &mut EscapeContext, f_candidate: Vec2, params: &AnnealParams) {
    ctx.f_e = f_candidate;
    ctx.temperature = cool(ctx.temperature, params.beta);
    ctx.accepted_moves += 1;
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn detection_cases() {
        let p = AnnealParams::default();
        assert!(detect_local_minimum(&[], Vec2::ZERO, 5.0, 0.2, false, &p));
        assert!(!detect_local_minimum(&[], Vec2::ZERO, 0.1, 0.2, true, &p));

        // Two-point oscillation: net displacement over 50 steps is 0.001.
        let a = Vec2::new(3.0, 3.0);
        let b = Vec2::new(3.001, 3.0);
        let history: Vec<Vec2> = (0..=50).map(|k| if k % 2 == 0 { a } else { b }).collect();
        let f = Vec2::new(0.5, 0.0);
        assert!(a.distance(*history.last().unwrap()) < p.trap_disp);
        let mut odd = history.clone();
        odd.push(b);
        assert!(detect_local_minimum(&odd, f, 5.0, 0.2, true, &p));
        assert!(!detect_local_minimum(&odd, f, 5.0, 0.2, false, &p));
        // Not warm yet.
        assert!(!detect_local_minimum(&odd[..10], f, 5.0, 0.2, true, &p));
    }

    #[test]
    fn direction_examples() {
        assert_eq!(
            deflection_direction(Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.5)),
            Rotation::Cw
        );
        assert_eq!(
            deflection_direction(Vec2::new(0.0, 1.0), Vec2::new(0.5, -1.0)),
            Rotation::Ccw
        );
        assert_eq!(
            deflection_direction(Vec2::new(2.0, 1.0), Vec2::new(-4.0, -2.0)),
            Rotation::Ccw
        );
    }

    #[test]
    fn direction_matches_angle_rule_away_from_wraparound() {
        // θ_a > θ_b -> clockwise, with both angles in (-π/2, π/2).
        let f_att = Vec2::new(1.0, 0.2);
        for f_rep in [Vec2::new(-1.0, 0.5), Vec2::new(-1.0, -0.5), Vec2::new(-0.3, 0.9)] {
            let d = f_att - f_rep;
            let (ta, tb) = (f_att.y.atan2(f_att.x), d.y.atan2(d.x));
            let expected = if ta > tb { Rotation::Cw } else { Rotation::Ccw };
            assert_eq!(deflection_direction(f_att, f_rep), expected);
        }
    }

    #[test]
    fn init_examples() {
        let p = AnnealParams::default();
        let ctx = init_escape(Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.1), Vec2::new(2.0, 2.0), &p).unwrap();
        assert_relative_eq!(ctx.theta_c, PI - 0.1f64.atan(), epsilon = 1e-12);
        assert_relative_eq!(ctx.theta_c, 3.0419, epsilon = 1e-4);
        assert_eq!(ctx.temperature, 10.0);
        assert_eq!(ctx.f_e, ctx.f_e_initial);

        let ctx = init_escape(Vec2::new(1.0, 0.0), Vec2::new(0.0, 2.0), Vec2::ZERO, &p).unwrap();
        assert_relative_eq!(ctx.theta_c, PI / 2.0, epsilon = 1e-15);

        assert_eq!(
            init_escape(Vec2::new(1.0, 0.0), Vec2::ZERO, Vec2::ZERO, &p),
            Err(EscapeError::NoRepulsion)
        );
    }

    #[test]
    fn deflection_interval() {
        let mut r = rng();
        let upper = PI - PI / 1.28;
        assert_relative_eq!(upper, 0.6873, epsilon = 1e-4);
        for _ in 0..1000 {
            let t = sample_deflection_angle(PI, 1.28, &mut r).unwrap();
            assert!(t > 0.0 && t <= upper);
        }
        assert!(matches!(
            sample_deflection_angle(PI / 2.0, 1.28, &mut r),
            Err(EscapeError::EmptyDeflectionInterval { .. })
        ));
        let wide = deflection_bound(1.0, 1e12);
        assert_relative_eq!(wide, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn rotation_examples() {
        let f = Vec2::new(1.0, 0.0);
        let cw = rotate_force(f, PI / 2.0, Rotation::Cw);
        assert_relative_eq!(cw.x, 0.0, epsilon = 1e-15);
        assert_relative_eq!(cw.y, -1.0, epsilon = 1e-15);
        let ccw = rotate_force(f, PI / 2.0, Rotation::Ccw);
        assert_relative_eq!(ccw.x, 0.0, epsilon = 1e-15);
        assert_relative_eq!(ccw.y, 1.0, epsilon = 1e-15);
        assert_eq!(
            rotate_force(Vec2::new(0.3, -2.0), 0.0, Rotation::Cw),
            Vec2::new(0.3, -2.0)
        );
    }

    #[test]
    fn metropolis_and_cooling() {
        let mut r = rng();
        assert!(metropolis_accept(1.0, 0.5, 1e-12, &mut r));
        assert!(metropolis_accept(1.0, 1.0, 1e-12, &mut r));
        assert!(!metropolis_accept(0.0, 1.0, 1e-9, &mut r));
        assert_relative_eq!(cool(10.0, 0.99), 9.9, epsilon = 1e-12);
        assert_eq!(cool(1.0, 0.5), 0.5);
        let mut t = 10.0;
        for _ in 0..5 {
            t = cool(t, 0.99);
        }
        assert_relative_eq!(t, 10.0 * 0.99f64.powi(5), max_relative = 1e-14);
    }

    #[test]
    fn completion_examples() {
        let ctx = init_escape(
            Vec2::new(1.0, 0.0),
            Vec2::new(-1.0, 0.0),
            Vec2::ZERO,
            &AnnealParams::default(),
        )
        .unwrap();
        let theta0 = 4.0 * PI / 9.0;
        assert!(!escape_completed(&ctx, Vec2::new(-2.0, 0.0), theta0));
        assert!(escape_completed(&ctx, Vec2::new(0.0, 1.0), theta0));
        assert!(escape_completed(&ctx, Vec2::new(3.0, 0.0), PI / 3.0));
        assert!(escape_completed(&ctx, Vec2::new(3.0, 0.0), 2.0 * PI / 3.0));
        assert!(!escape_completed(&ctx, Vec2::new(1e-12, 0.0), theta0));
    }

    #[test]
    fn downhill_proposal_accepted_once() {
        let params = AnnealParams::default();
        let mut ctx = init_escape(Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.1), Vec2::ZERO, &params).unwrap();
        let mut r = rng();
        let mv = run_escape_step(&mut ctx, Vec2::ZERO, &params, |x| Some(-x.norm()), |f| f * 0.01, &mut r).unwrap();
        assert_eq!(mv.proposals, 1);
        assert!(!mv.forced);
        assert_eq!(ctx.accepted_moves, 1);
        assert_relative_eq!(ctx.temperature, 9.9, epsilon = 1e-12);
    }

    #[test]
    fn cold_uphill_forces_best_candidate() {
        let params = AnnealParams::default();
        let mut ctx = init_escape(Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.1), Vec2::ZERO, &params).unwrap();
        ctx.temperature = 1e-9;
        let mut r = rng();
        let mut seen = Vec::new();
        let mv = run_escape_step(
            &mut ctx,
            Vec2::ZERO,
            &params,
            |x| {
                if x == Vec2::ZERO {
                    Some(0.0)
                } else {
                    Some(1.0 + x.y.abs())
                }
            },
            |f| {
                seen.push(f * 0.01);
                f * 0.01
            },
            &mut r,
        )
        .unwrap();
        assert!(mv.forced);
        assert_eq!(mv.proposals, params.max_rejects);
        let best = seen
            .iter()
            .copied()
            .min_by(|a, b| a.y.abs().total_cmp(&b.y.abs()))
            .unwrap();
        assert_eq!(mv.position, Some(best));
        assert_eq!(ctx.accepted_moves, 1);
    }

    #[test]
    fn infeasible_everywhere_stays_put() {
        let params = AnnealParams::default();
        let mut ctx = init_escape(Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.1), Vec2::ZERO, &params).unwrap();
        let before = ctx.clone();
        let mv = run_escape_step(
            &mut ctx,
            Vec2::ZERO,
            &params,
            |x| (x == Vec2::ZERO).then_some(0.0),
            |f| f,
            &mut rng(),
        )
        .unwrap();
        assert_eq!(mv.position, None);
        assert_eq!(ctx.f_e, before.f_e);
        assert_eq!(ctx.temperature, before.temperature);
    }

    #[test]
    fn params_validation() {
        let mut p = AnnealParams::default();
        assert!(p.validate().is_ok());
        p.beta = 1.0;
        assert!(p.validate().unwrap_err().to_string().contains("anneal.beta"));
        let mut p = AnnealParams {
            theta0: 0.5,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        p.theta0 = 2.0 * PI / 5.0;
        assert!(p.validate().is_ok());
    }
}
