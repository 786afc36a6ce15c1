//! Potential fields and forces.
//!
//! Two families live here: the classic APF (quadratic attraction, inverse
//! repulsion) used as a baseline, and the adaptive field (AAPF) with
//! consensus-coupled attraction, goal-distance-modulated repulsion, force
//! smoothing and a piecewise attractive gain.
//!
//! Powers of the goal offset `X_i - X_gi` are taken on its Euclidean length,
//! so the repulsive force is exactly the negative gradient of the repulsive
//! potential for a fixed goal.

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, GeometryError};
use crate::formation::Topology;
use crate::vec2::Vec2;

/// Default goal-distance exponent of the adaptive repulsion.
pub const DEFAULT_B: f64 = 0.9;
/// Default regularizer in the far-field gain.
pub const DEFAULT_DELTA: f64 = 1.0e-8;

/// Circular obstacle with body `radius` and influence distance `influence`
/// measured from the surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleObstacle {
    pub center: Vec2,
    pub radius: f64,
    pub influence: f64,
}

impl CircleObstacle {
    pub fn new(center: Vec2, radius: f64, influence: f64) -> Self {
        Self {
            center,
            radius,
            influence,
        }
    }

    pub fn validate(&self, field: &str) -> Result<(), ConfigError> {
        if !self.center.is_finite() {
            return Err(ConfigError::invalid(format!("{field}.center"), "must be finite"));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(ConfigError::invalid(
                format!("{field}.radius"),
                format!("must be positive, got {}", self.radius),
            ));
        }
        // Influence is a distance from the surface; it only has to exceed
        // the body radius to keep a non-trivial repulsion band.
        if !(self.influence > self.radius && self.influence.is_finite()) {
            return Err(ConfigError::invalid(
                format!("{field}.influence"),
                format!("must exceed radius {} (got {})", self.radius, self.influence),
            ));
        }
        Ok(())
    }

    /// True when `p` is strictly inside the influence band or the body.
    pub fn within_reach(&self, p: Vec2) -> bool {
        let reach = self.radius + self.influence;
        (p - self.center).norm_squared() < reach * reach
    }

    /// Signed distance from `p` to the obstacle surface.
    pub fn clearance(&self, p: Vec2) -> f64 {
        p.distance(self.center) - self.radius
    }

    /// True when the segment `a -> b` touches or enters the body.
    pub fn segment_hits(&self, a: Vec2, b: Vec2) -> bool {
        let reach = self.radius + a.distance(b);
        if (a - self.center).norm_squared() > reach * reach {
            return false;
        }
        self.segment_clearance(a, b) <= 0.0
    }

    /// Minimum clearance along the segment `a -> b`.
    pub fn segment_clearance(&self, a: Vec2, b: Vec2) -> f64 {
        let ab = b - a;
        let len2 = ab.norm_squared();
        let t = if len2 > 0.0 {
            ((self.center - a).dot(ab) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (a + ab * t).distance(self.center) - self.radius
    }
}

/// Gains and shape constants for the adaptive field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldParams {
    pub k_att0: f64,
    pub k_rep: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Near-goal gain multipliers, one per UAV.
    pub h: Vec<f64>,
    /// Far-field gain multipliers, one per UAV.
    pub tau: Vec<f64>,
    #[serde(default = "default_rho_g")]
    pub rho_g: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_b() -> f64 {
    DEFAULT_B
}
fn default_alpha() -> f64 {
    0.2
}
fn default_rho_g() -> f64 {
    0.2
}
fn default_delta() -> f64 {
    DEFAULT_DELTA
}

impl FieldParams {
    pub fn validate(&self, n: usize) -> Result<(), ConfigError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::invalid(
                    format!("field.{name}"),
                    format!("must be a positive number, got {v}"),
                ))
            }
        };
        positive("k_att0", self.k_att0)?;
        positive("k_rep", self.k_rep)?;
        positive("rho_g", self.rho_g)?;
        positive("delta", self.delta)?;
        if !(self.b > 0.0 && self.b < 1.0) {
            return Err(ConfigError::invalid(
                "field.b",
                format!("must lie in (0, 1), got {}", self.b),
            ));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(ConfigError::invalid(
                "field.alpha",
                format!("must lie in [0, 1], got {}", self.alpha),
            ));
        }
        for (name, list) in [("h", &self.h), ("tau", &self.tau)] {
            if list.len() != n {
                return Err(ConfigError::invalid(
                    format!("field.{name}"),
                    format!("expected {n} entries (one per UAV), found {}", list.len()),
                ));
            }
            for (i, &v) in list.iter().enumerate() {
                if !(v >= 1.0 && v.is_finite()) {
                    return Err(ConfigError::invalid(
                        format!("field.{name}[{i}]"),
                        format!("must be >= 1, got {v}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Closest point on the obstacle boundary and the signed distance to it.
pub fn nearest_surface_point(p: Vec2, obs: &CircleObstacle) -> Result<(Vec2, f64), GeometryError> {
    let rel = p - obs.center;
    let dir = rel.normalized().ok_or(GeometryError::Penetration {
        point: p,
        center: obs.center,
    })?;
    Ok((obs.center + dir * obs.radius, rel.norm() - obs.radius))
}

/// Distance to the surface and the outward unit normal (`∂ρ/∂X`), failing
/// on contact or penetration.
fn surface_geometry(p: Vec2, obs: &CircleObstacle) -> Result<(f64, Vec2), GeometryError> {
    let (_, rho) = nearest_surface_point(p, obs)?;
    if rho <= 0.0 {
        return Err(GeometryError::Penetration {
            point: p,
            center: obs.center,
        });
    }
    let normal = (p - obs.center).normalized().expect("checked nonzero above");
    Ok((rho, normal))
}

pub fn classic_att_potential(p: Vec2, goal: Vec2, k_att: f64) -> f64 {
    0.5 * k_att * (p - goal).norm_squared()
}

pub fn classic_att_force(p: Vec2, goal: Vec2, k_att: f64) -> Vec2 {
    -k_att * (p - goal)
}

pub fn classic_rep_potential(p: Vec2, obs: &CircleObstacle, k_rep: f64) -> Result<f64, GeometryError> {
    let (rho, _) = surface_geometry(p, obs)?;
    if rho >= obs.influence {
        return Ok(0.0);
    }
    let w = 1.0 / rho - 1.0 / obs.influence;
    Ok(0.5 * k_rep * w * w)
}

pub fn classic_rep_force(p: Vec2, obs: &CircleObstacle, k_rep: f64) -> Result<Vec2, GeometryError> {
    let (rho, normal) = surface_geometry(p, obs)?;
    if rho >= obs.influence {
        return Ok(Vec2::ZERO);
    }
    let w = 1.0 / rho - 1.0 / obs.influence;
    Ok(normal * (k_rep * w / (rho * rho)))
}

/// Consensus residual between UAVs `i` and `j`.
///
/// Targets are leader-relative (`X_gi = X_1 - D_i`), so a satisfied
/// formation has `X_i + D_i` equal for every UAV and the residual is
/// `(X_i + D_i) - (X_j + D_j)`.
pub fn coupling_residual(positions: &[Vec2], offsets: &[Vec2], i: usize, j: usize) -> Vec2 {
    positions[i] - positions[j] + (offsets[i] - offsets[j])
}

/// Attractive potential of UAV `i`: its own tracking term plus the full
/// consensus double sum over every edge of the graph.
pub fn aapf_att_potential(
    i: usize,
    positions: &[Vec2],
    target: Vec2,
    topo: &Topology,
    offsets: &[Vec2],
    k_att: f64,
) -> f64 {
    let own = 0.5 * k_att * (positions[i] - target).norm_squared();
    let n = topo.len();
    let mut coupling = 0.0;
    for a in 0..n {
        for b in topo.neighbors(a) {
            coupling += coupling_residual(positions, offsets, a, b).norm_squared();
        }
    }
    own + 0.25 * k_att * coupling
}

/// Negative gradient of [`aapf_att_potential`] with respect to `X_i`.
pub fn aapf_att_force(
    i: usize,
    positions: &[Vec2],
    target: Vec2,
    topo: &Topology,
    offsets: &[Vec2],
    k_att: f64,
) -> Vec2 {
    let consensus: Vec2 = topo
        .neighbors(i)
        .map(|j| coupling_residual(positions, offsets, i, j))
        .sum();
    -k_att * (positions[i] - target) - k_att * consensus
}

/// Repulsive potential of one obstacle, modulated by the goal distance.
pub fn aapf_rep_potential(p: Vec2, goal: Vec2, obs: &CircleObstacle, k_rep: f64, b: f64) -> Result<f64, GeometryError> {
    let (rho, _) = surface_geometry(p, obs)?;
    if rho >= obs.influence {
        return Ok(0.0);
    }
    let w = 1.0 / rho - 1.0 / obs.influence;
    Ok(0.5 * k_rep * w * w * p.distance(goal).powf(b))
}

/// Repulsion of one obstacle as the sum of a push away from the surface and
/// a pull toward the goal. The goal distance is clamped below by `delta`
/// where its negative power would blow up.
pub fn aapf_rep_force(
    p: Vec2,
    goal: Vec2,
    obs: &CircleObstacle,
    k_rep: f64,
    b: f64,
    delta: f64,
) -> Result<Vec2, GeometryError> {
    let (rho, normal) = surface_geometry(p, obs)?;
    if rho >= obs.influence {
        return Ok(Vec2::ZERO);
    }
    let w = 1.0 / rho - 1.0 / obs.influence;
    let to_goal = goal - p;
    let rho_goal = to_goal.norm();
    let push = normal * (k_rep * w / (rho * rho) * rho_goal.powf(b));
    let pull = match to_goal.normalized() {
        Some(dir) => dir * (0.5 * b * k_rep * w * w * rho_goal.max(delta).powf(b - 1.0)),
        None => Vec2::ZERO,
    };
    Ok(push + pull)
}

pub fn resultant_force(att: Vec2, reps: &[Vec2]) -> Vec2 {
    att + reps.iter().copied().sum::<Vec2>()
}

/// Momentum blend `alpha * f_prev + (1 - alpha) * f_now`.
pub fn smooth_force(f_prev: Vec2, f_now: Vec2, alpha: f64) -> Vec2 {
    f_prev * alpha + f_now * (1.0 - alpha)
}

/// Piecewise attractive gain for UAV `i`.
///
/// Inside an obstacle's influence the base gain is used. In free space the
/// gain is `h_i * k_att0` strictly inside `rho_g` of the goal and
/// `tau_i * k_att0 / (dist + delta)` otherwise.
pub fn adaptive_gain(i: usize, p: Vec2, goal: Vec2, rep_active: bool, params: &FieldParams) -> f64 {
    if rep_active {
        return params.k_att0;
    }
    let dist = p.distance(goal);
    if dist < params.rho_g {
        params.h[i] * params.k_att0
    } else {
        params.tau[i] * params.k_att0 / (dist + params.delta)
    }
}

/// True when `p` lies strictly inside the influence band of any obstacle.
pub fn repulsion_active(p: Vec2, obstacles: &[CircleObstacle]) -> bool {
    obstacles.iter().any(|o| o.within_reach(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_obstacle() -> CircleObstacle {
        CircleObstacle::new(Vec2::ZERO, 1.0, 3.0)
    }

    #[test]
    fn surface_point_examples() {
        let (pt, d) = nearest_surface_point(Vec2::new(2.0, 0.0), &unit_obstacle()).unwrap();
        assert_eq!(pt, Vec2::new(1.0, 0.0));
        assert_eq!(d, 1.0);

        let (_, d) = nearest_surface_point(Vec2::new(0.0, 1.0), &unit_obstacle()).unwrap();
        assert_eq!(d, 0.0);

        let obs = CircleObstacle::new(Vec2::ZERO, 2.0, 5.0);
        let (pt, d) = nearest_surface_point(Vec2::new(3.0, 4.0), &obs).unwrap();
        assert_relative_eq!(pt.x, 1.2, epsilon = 1e-12);
        assert_relative_eq!(pt.y, 1.6, epsilon = 1e-12);
        assert_relative_eq!(d, 3.0, epsilon = 1e-12);

        assert!(nearest_surface_point(Vec2::ZERO, &obs).is_err());
    }

    #[test]
    fn classic_attraction() {
        assert_eq!(
            classic_att_force(Vec2::new(3.0, 4.0), Vec2::new(1.0, 1.0), 2.0),
            Vec2::new(-4.0, -6.0)
        );
        assert_eq!(
            classic_att_force(Vec2::new(1.0, 1.0), Vec2::new(1.0, 1.0), 2.0),
            Vec2::ZERO
        );
        assert_eq!(
            classic_att_force(Vec2::new(1.0, 0.0), Vec2::ZERO, 1.0),
            Vec2::new(-1.0, 0.0)
        );
    }

    #[test]
    fn classic_repulsion() {
        let f = classic_rep_force(Vec2::new(2.0, 0.0), &unit_obstacle(), 5.0).unwrap();
        assert_relative_eq!(f.x, 10.0 / 3.0, epsilon = 1e-12);
        assert_eq!(f.y, 0.0);

        assert_eq!(
            classic_rep_force(Vec2::new(4.0, 0.0), &unit_obstacle(), 5.0).unwrap(),
            Vec2::ZERO
        );
        assert_eq!(
            classic_rep_force(Vec2::new(9.0, 0.0), &unit_obstacle(), 5.0).unwrap(),
            Vec2::ZERO
        );
        assert!(classic_rep_force(Vec2::new(0.5, 0.0), &unit_obstacle(), 5.0).is_err());
        assert!(classic_rep_force(Vec2::new(1.0, 0.0), &unit_obstacle(), 5.0).is_err());
    }

    #[test]
    fn repulsion_vanishes_at_influence_edge() {
        let obs = unit_obstacle();
        let mut last = f64::INFINITY;
        for k in 2..=6 {
            let rho = obs.influence * (1.0 - 10f64.powi(-k));
            let p = Vec2::new(obs.radius + rho, 0.0);
            let classic = classic_rep_force(p, &obs, 5.0).unwrap().norm();
            let adaptive = aapf_rep_force(p, Vec2::new(20.0, 5.0), &obs, 5.0, 0.9, DEFAULT_DELTA)
                .unwrap()
                .norm();
            assert!(classic < last);
            last = classic;
            assert!(adaptive < 10f64.powi(-k + 2));
        }
        assert!(last < 1e-5);
    }

    fn five_uav_topology() -> Topology {
        Topology::from_edges(3, &[(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn att_potential_examples() {
        let offsets = [Vec2::ZERO, Vec2::new(1.0, -1.0)];
        let topo = Topology::from_edges(2, &[(0, 1)]).unwrap();
        // Formation and targets satisfied.
        let positions = [Vec2::new(5.0, 5.0), Vec2::new(4.0, 6.0)];
        assert_eq!(
            aapf_att_potential(1, &positions, positions[1], &topo, &offsets, 3.0),
            0.0
        );

        // Residual (1, 0) on the single edge, counted twice by the double sum.
        let positions = [Vec2::new(6.0, 5.0), Vec2::new(4.0, 6.0)];
        let u = aapf_att_potential(0, &positions, positions[0], &topo, &offsets, 3.0);
        assert_relative_eq!(u, 3.0 / 2.0, epsilon = 1e-12);

        // No edges: tracking term only.
        let u = aapf_att_potential(0, &positions, Vec2::ZERO, &Topology::empty(2), &offsets, 2.0);
        assert_relative_eq!(u, 0.5 * 2.0 * 61.0, epsilon = 1e-12);
    }

    #[test]
    fn att_force_reductions() {
        let offsets = [Vec2::ZERO, Vec2::new(1.0, -1.0), Vec2::new(1.0, 1.0)];
        let positions = [Vec2::new(5.0, 5.0), Vec2::new(4.0, 6.0), Vec2::new(4.0, 4.0)];
        let f = aapf_att_force(2, &positions, positions[2], &five_uav_topology(), &offsets, 3.0);
        assert_eq!(f, Vec2::ZERO);

        let p = Vec2::new(1.0, -2.0);
        let goal = Vec2::new(4.0, 2.0);
        let f = aapf_att_force(
            0,
            &[p, Vec2::new(9.0, 9.0)],
            goal,
            &Topology::empty(2),
            &offsets[..2],
            1.5,
        );
        assert_eq!(f, classic_att_force(p, goal, 1.5));
    }

    #[test]
    fn rep_force_unit_goal_distance_matches_classic_push() {
        let obs = unit_obstacle();
        let p = Vec2::new(2.0, 0.0);
        let goal = Vec2::new(2.0, 1.0);
        let f = aapf_rep_force(p, goal, &obs, 5.0, 0.9, DEFAULT_DELTA).unwrap();
        let classic = classic_rep_force(p, &obs, 5.0).unwrap();
        // The push term equals the classic force; the pull is along +y.
        assert_relative_eq!(f.x, classic.x, epsilon = 1e-12);
        let w = 1.0f64 - 1.0 / 3.0;
        assert_relative_eq!(f.y, 0.45 * 5.0 * w * w, epsilon = 1e-12);

        let far = Vec2::new(5.0, 0.0);
        assert_eq!(
            aapf_rep_force(far, goal, &obs, 5.0, 0.9, DEFAULT_DELTA).unwrap(),
            Vec2::ZERO
        );
    }

    #[test]
    fn rep_force_at_goal_is_finite() {
        let obs = unit_obstacle();
        let p = Vec2::new(2.0, 0.0);
        let f = aapf_rep_force(p, p, &obs, 5.0, 0.9, DEFAULT_DELTA).unwrap();
        assert!(f.is_finite());
        assert_eq!(f, Vec2::ZERO);
        let near = aapf_rep_force(p, p + Vec2::new(0.0, 1e-12), &obs, 5.0, 0.9, DEFAULT_DELTA).unwrap();
        assert!(near.is_finite());
    }

    #[test]
    fn resultant_and_smoothing() {
        assert_eq!(resultant_force(Vec2::new(1.0, 0.0), &[]), Vec2::new(1.0, 0.0));
        assert_eq!(
            resultant_force(Vec2::new(1.0, 0.0), &[Vec2::new(0.0, 1.0), Vec2::new(0.0, -1.0)]),
            Vec2::new(1.0, 0.0)
        );
        assert_eq!(
            resultant_force(Vec2::new(1.0, 1.0), &[Vec2::new(2.0, 0.0)]),
            Vec2::new(3.0, 1.0)
        );

        let prev = Vec2::new(10.0, 0.0);
        let now = Vec2::new(0.0, 10.0);
        let s = smooth_force(prev, now, 0.2);
        assert_relative_eq!(s.x, 2.0, epsilon = 1e-12);
        assert_relative_eq!(s.y, 8.0, epsilon = 1e-12);
        assert_eq!(smooth_force(prev, now, 0.0), now);
        assert_eq!(smooth_force(prev, now, 1.0), prev);
    }

    fn gains() -> FieldParams {
        FieldParams {
            k_att0: 13.0,
            k_rep: 5.0,
            b: DEFAULT_B,
            alpha: 0.2,
            h: vec![13.0, 1.7],
            tau: vec![27.0, 4.0],
            rho_g: 0.2,
            delta: DEFAULT_DELTA,
        }
    }

    #[test]
    fn adaptive_gain_branches() {
        let params = gains();
        let goal = Vec2::new(50.0, 11.0);
        assert_eq!(adaptive_gain(0, Vec2::new(20.0, 11.0), goal, true, &params), 13.0);
        assert_eq!(adaptive_gain(0, Vec2::new(49.9, 11.0), goal, false, &params), 169.0);

        let mut p = params.clone();
        p.k_att0 = 3.0;
        p.tau[1] = 4.0;
        let g = adaptive_gain(1, Vec2::new(48.0, 11.0), goal, false, &p);
        assert_relative_eq!(g, 6.0, epsilon = 1e-7);

        // The near-goal branch needs strict inequality.
        let on_boundary = Vec2::new(50.0 - params.rho_g, 11.0);
        let g = adaptive_gain(0, on_boundary, goal, false, &params);
        let d = on_boundary.distance(goal);
        assert_eq!(g, 27.0 * 13.0 / (d + DEFAULT_DELTA));
    }

    #[test]
    fn field_params_validation() {
        let mut p = gains();
        assert!(p.validate(2).is_ok());
        p.k_rep = -1.0;
        assert!(p.validate(2).unwrap_err().to_string().starts_with("field.k_rep"));
        let mut p = gains();
        p.h.pop();
        assert!(p.validate(2).is_err());
        let mut p = gains();
        p.alpha = 1.5;
        assert!(p.validate(2).is_err());
    }

    #[test]
    fn segment_clearance_catches_tunnelling() {
        let obs = unit_obstacle();
        let a = Vec2::new(-3.0, 0.5);
        let b = Vec2::new(3.0, 0.5);
        assert!(obs.clearance(a) > 0.0 && obs.clearance(b) > 0.0);
        assert!(obs.segment_clearance(a, b) < 0.0);
        assert_relative_eq!(obs.segment_clearance(a, a), obs.clearance(a));
    }
}
