//! Experiment configuration: one JSON document with the map parameters and
//! an optional section per command. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use htlab::basin::BasinLimits;
use htlab::manifold::RefineOptions;
use htlab::map::Window;
use htlab::MapParams;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params: MapParams,
    #[serde(default)]
    pub orbits: OrbitsSection,
    #[serde(default)]
    pub theory: TheorySection,
    #[serde(default)]
    pub manifolds: ManifoldsSection,
    #[serde(default)]
    pub basins: BasinsSection,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Seed for randomized utilities; recorded, not used by the commands.
    #[serde(default)]
    #[allow(dead_code)]
    pub seed: u64,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitsSection {
    pub k_min: u32,
    pub k_max: u32,
}

impl Default for OrbitsSection {
    fn default() -> Self {
        Self { k_min: 0, k_max: 15 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheorySection {
    /// Parameter overrides, one growth experiment each.
    pub perturbations: Vec<BTreeMap<String, f64>>,
    pub growth_k_min: u32,
    pub growth_k_max: u32,
}

impl Default for TheorySection {
    fn default() -> Self {
        Self {
            perturbations: Vec::new(),
            growth_k_min: 6,
            growth_k_max: 16,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManifoldsSection {
    /// Inverse steps in the stable preimage tree.
    pub depth: u32,
    /// Forward images of the unstable seed segment; derived from the seed
    /// size when absent.
    pub n_images: Option<u32>,
    pub clip: Window,
    pub refinement: RefineOptions,
    pub axis_tol: f64,
}

impl Default for ManifoldsSection {
    fn default() -> Self {
        Self {
            depth: 3,
            n_images: None,
            clip: Window::square(-1.5, 1.5),
            refinement: RefineOptions::default(),
            axis_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasinsSection {
    pub window: Window,
    pub resolution: [usize; 2],
    pub limits: BasinLimits,
    /// `"auto"` to scan for single-round orbits, otherwise the path of an
    /// orbit table written by `find-orbits`.
    pub registry: String,
    pub k_min: u32,
    pub k_max: u32,
    /// Periods of extra attractors to look for from unclassified cells of a
    /// coarse preview raster.
    pub discover_periods: Vec<usize>,
    /// Also write the raw label table.
    pub labels_csv: bool,
}

impl Default for BasinsSection {
    fn default() -> Self {
        Self {
            window: Window::square(-0.5, 1.5),
            resolution: [200, 200],
            limits: BasinLimits::default(),
            registry: "auto".to_string(),
            k_min: 0,
            k_max: 15,
            discover_periods: Vec::new(),
            labels_csv: false,
        }
    }
}

/// Problems that make a configuration unusable.
#[derive(Debug)]
pub enum ConfigError {
    /// The file could not be read.
    Io(String),
    /// The file was read but is invalid.
    Invalid(String),
}

pub fn load(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))
}

pub fn parse(text: &str) -> Result<ExperimentConfig, String> {
    let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
    cfg.params.validate().map_err(|e| e.to_string())?;
    if cfg.orbits.k_min > cfg.orbits.k_max {
        return Err("orbits.k_min exceeds orbits.k_max".into());
    }
    for p in &cfg.theory.perturbations {
        apply_perturbation(&cfg.params, p)?;
    }
    Ok(cfg)
}

/// Parameters with the named fields replaced. Changing `lambda` without
/// giving `h0`/`h1` recomputes the default thresholds.
pub fn apply_perturbation(params: &MapParams, changes: &BTreeMap<String, f64>) -> Result<MapParams, String> {
    let mut value = serde_json::to_value(params).map_err(|e| e.to_string())?;
    let obj = value.as_object_mut().expect("parameters serialise to an object");
    if changes.contains_key("lambda") {
        obj.remove("h0");
        obj.remove("h1");
    }
    for (key, v) in changes {
        if !obj.contains_key(key) && key != "h0" && key != "h1" {
            return Err(format!("unknown parameter `{key}` in perturbation"));
        }
        obj.insert(key.clone(), serde_json::json!(v));
    }
    serde_json::from_value(value).map_err(|e| e.to_string())
}

/// Parses `NxM`.
pub fn parse_resolution(s: &str) -> Result<[usize; 2], String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("resolution {s:?} is not of the form <nx>x<ny>"))?;
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("resolution {s:?}: {e}"));
    Ok([parse(a)?, parse(b)?])
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"params": {"lambda": 0.8, "sigma": 1.25, "c2": -0.5, "d1": 1, "d5": 1}}"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.orbits.k_max, 15);
        assert_eq!(c.basins.resolution, [200, 200]);
        assert_eq!(c.params, MapParams::new(0.8, 1.25, -0.5, 1.0, 1.0));
        assert_eq!(c.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn unknown_keys_are_named() {
        let text = MINIMAL.replace("\"d5\": 1", "\"d5\": 1, \"d9\": 2");
        assert!(parse(&text).unwrap_err().contains("d9"));
        let text =
            r#"{"params": {"lambda": 0.8, "sigma": 1.25, "c2": -0.5, "d1": 1, "d5": 1}, "basins": {"colour": 1}}"#;
        assert!(parse(text).unwrap_err().contains("colour"));
    }

    #[test]
    fn perturbations() {
        let p = MapParams::new(0.8, 1.25, -0.5, 1.0, 1.0);
        let q = apply_perturbation(&p, &BTreeMap::from([("d1".to_string(), 0.99)])).unwrap();
        assert_eq!(q.d1, 0.99);
        assert_eq!(q.sigma, 1.25);
        let q = apply_perturbation(&p, &BTreeMap::from([("lambda".to_string(), 0.5)])).unwrap();
        assert!((q.h0 - 2.0 / 3.0).abs() < 1e-15);
        assert!(apply_perturbation(&p, &BTreeMap::from([("mu".to_string(), 1.0)])).is_err());
    }

    #[test]
    fn resolution_strings() {
        assert_eq!(parse_resolution("200x100").unwrap(), [200, 100]);
        assert!(parse_resolution("200").is_err());
        assert!(parse_resolution("ax2").is_err());
    }
}
