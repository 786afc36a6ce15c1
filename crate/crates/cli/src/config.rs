//! JSON scenario files.
//!
//! A file is either a complete scenario or a partial one that names a
//! built-in `preset`. A preset is expanded first and the rest of the file is
//! deep-merged on top, so `{"preset": "group3", "sim": {"seed": 7}}` only
//! changes the seed.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use formfield::escape::AnnealParams;
use formfield::{
    preset, CircleObstacle, ControllerSpec, FieldParams, FormationSpec, Mode, Scenario, SimSettings, Topology, Vec2,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    /// Undirected edges between 1-based UAV ids.
    pub edges: Vec<[usize; 2]>,
}

/// On-disk layout of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub name: String,
    pub uavs: Vec<Vec2>,
    pub topology: TopologyConfig,
    pub formation: FormationSpec,
    pub goal: Vec2,
    #[serde(default)]
    pub obstacles: Vec<CircleObstacle>,
    pub field: FieldParams,
    #[serde(default)]
    pub controller: ControllerSpec,
    #[serde(default)]
    pub anneal: AnnealParams,
    #[serde(default)]
    pub sim: SimSettings,
    #[serde(default)]
    pub mode: Mode,
}

impl ConfigFile {
    pub fn from_scenario(sc: &Scenario, mode: Mode) -> Self {
        Self {
            name: sc.name.clone(),
            uavs: sc.uavs.clone(),
            topology: TopologyConfig {
                edges: sc.topology.edges().into_iter().map(|(a, b)| [a + 1, b + 1]).collect(),
            },
            formation: sc.formation.clone(),
            goal: sc.goal,
            obstacles: sc.obstacles.clone(),
            field: sc.field.clone(),
            controller: sc.controller,
            anneal: sc.anneal.clone(),
            sim: sc.sim.clone(),
            mode,
        }
    }

    /// Builds and validates the scenario.
    pub fn to_scenario(&self) -> Result<Scenario> {
        let n = self.uavs.len();
        let mut edges = Vec::with_capacity(self.topology.edges.len());
        for (k, &[a, b]) in self.topology.edges.iter().enumerate() {
            if a == 0 || b == 0 {
                bail!("topology.edges[{k}]: UAV ids are 1-based, got [{a}, {b}]");
            }
            edges.push((a - 1, b - 1));
        }
        let topology = Topology::from_edges(n.max(1), &edges)?;
        let sc = Scenario {
            name: self.name.clone(),
            uavs: self.uavs.clone(),
            topology,
            formation: self.formation.clone(),
            goal: self.goal,
            obstacles: self.obstacles.clone(),
            field: self.field.clone(),
            controller: self.controller,
            anneal: self.anneal.clone(),
            sim: self.sim.clone(),
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_json_pretty(&self) -> String {
        crate::json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Expanded file content for a built-in preset.
pub fn preset_config(name: &str) -> Result<ConfigFile> {
    Ok(ConfigFile::from_scenario(&preset(name)?, Mode::DsaAapf))
}

/// Recursively overlays `patch` onto `base`. Objects merge key by key;
/// anything else replaces.
pub fn deep_merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Parses config text. `fallback_name` is used when the file has no name.
pub fn parse_str(text: &str, fallback_name: &str) -> Result<ConfigFile> {
    let value: Value = serde_json::from_str(text).context("invalid JSON")?;
    let Value::Object(mut obj) = value else {
        bail!("top level must be a JSON object");
    };
    let value = match obj.remove("preset") {
        None => Value::Object(obj),
        Some(Value::String(name)) => {
            let mut base = serde_json::to_value(preset_config(&name)?)?;
            deep_merge(&mut base, Value::Object(obj));
            base
        }
        Some(other) => bail!("preset: expected a preset name, got {other}"),
    };
    let mut cfg: ConfigFile = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            anyhow!("{}", e.inner())
        } else {
            anyhow!("{path}: {}", e.inner())
        }
    })?;
    if cfg.name.is_empty() {
        cfg.name = fallback_name.to_string();
    }
    cfg.to_scenario()?;
    Ok(cfg)
}

pub fn load(path: &Path) -> Result<ConfigFile> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read config file {}", path.display()))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    parse_str(&text, stem).with_context(|| format!("in {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn merge_overlays_nested_keys() {
        let mut base = json!({"a": {"x": 1, "y": 2}, "b": [1, 2]});
        deep_merge(&mut base, json!({"a": {"y": 3}, "b": [9]}));
        assert_eq!(base, json!({"a": {"x": 1, "y": 3}, "b": [9]}));
    }

    #[test]
    fn preset_shorthand_expands() {
        let cfg = parse_str(r#"{"preset": "group3"}"#, "x").unwrap();
        assert_eq!(cfg.to_scenario().unwrap(), preset("group3").unwrap());
    }

    #[test]
    fn zero_based_edge_rejected() {
        let mut v = serde_json::to_value(preset_config("group1").unwrap()).unwrap();
        v["topology"]["edges"][0] = json!([0, 1]);
        let err = parse_str(&v.to_string(), "x").unwrap_err();
        assert!(format!("{err:#}").contains("topology.edges[0]"), "{err:#}");
    }
}
