//! Communication graph and leader-relative formation geometry.
//!
//! UAV 0 is the leader. Follower `i` tracks the virtual target
//! `leader - offsets[i]`, which moves with the leader.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::vec2::Vec2;

/// Undirected, unweighted communication graph over `n` UAVs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    adjacency: Vec<bool>,
}

impl Topology {
    /// Builds the graph from zero-based index pairs. Duplicate pairs are
    /// harmless; self-loops and out-of-range indices are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, ConfigError> {
        if n == 0 {
            return Err(ConfigError::invalid("topology", "UAV count must be positive"));
        }
        let mut adjacency = vec![false; n * n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(ConfigError::invalid(
                    "topology.edges",
                    format!("edge ({}, {}) references a UAV outside 1..={n}", i + 1, j + 1),
                ));
            }
            if i == j {
                return Err(ConfigError::invalid(
                    "topology.edges",
                    format!("self-loop on UAV {}", i + 1),
                ));
            }
            adjacency[i * n + j] = true;
            adjacency[j * n + i] = true;
        }
        Ok(Self { n, adjacency })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            n,
            adjacency: vec![false; n * n],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `a_ij` as 0.0 or 1.0.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if self.adjacency[i * self.n + j] {
            1.0
        } else {
            0.0
        }
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n + j]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.adjacency[i * self.n + j])
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors(i).count()
    }

    /// Edge list (zero-based, `i < j`) in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.is_adjacent(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn adjacency_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.weight(i, j))
    }

    pub fn degree_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| if i == j { self.degree(i) as f64 } else { 0.0 })
    }

    /// Graph Laplacian `D - A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        self.degree_matrix() - self.adjacency_matrix()
    }
}

/// Formation offsets `D_i` and controller gains `γ_i`, leader first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormationSpec {
    pub offsets: Vec<Vec2>,
    pub gains: Vec<f64>,
}

impl FormationSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.offsets.is_empty() {
            return Err(ConfigError::invalid("formation.offsets", "at least one UAV required"));
        }
        if self.offsets.len() != self.gains.len() {
            return Err(ConfigError::invalid(
                "formation.gains",
                format!(
                    "expected {} gains to match offsets, found {}",
                    self.offsets.len(),
                    self.gains.len()
                ),
            ));
        }
        if self.offsets[0] != Vec2::ZERO {
            return Err(ConfigError::invalid(
                "formation.offsets[0]",
                "leader offset must be [0, 0]",
            ));
        }
        for (i, d) in self.offsets.iter().enumerate() {
            if !d.is_finite() {
                return Err(ConfigError::invalid(
                    format!("formation.offsets[{i}]"),
                    "must be finite",
                ));
            }
        }
        for (i, &g) in self.gains.iter().enumerate() {
            if !(g > 0.0 && g.is_finite()) {
                return Err(ConfigError::invalid(
                    format!("formation.gains[{i}]"),
                    format!("must be a positive number, got {g}"),
                ));
            }
        }
        Ok(())
    }
}

/// Desired position of a follower given the leader position: `leader - offset`.
pub fn virtual_target(leader_pos: Vec2, offset: Vec2) -> Vec2 {
    leader_pos - offset
}

/// Per-UAV deviation `X_i - X_gi`.
pub fn formation_error(states: &[Vec2], targets: &[Vec2]) -> Result<Vec<Vec2>, ConfigError> {
    if states.len() != targets.len() {
        return Err(ConfigError::LengthMismatch {
            what: "formation_error",
            expected: states.len(),
            found: targets.len(),
        });
    }
    Ok(states.iter().zip(targets).map(|(&s, &t)| s - t).collect())
}
