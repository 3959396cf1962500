//! Scenario configuration files.
//!
//! A scenario is one TOML file. Physical quantities carry their unit in the
//! key name (`_m`, `_db`).

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::{FadingParams, FieldModel, PathLossParams, Wall, WallGeometry, DEFAULT_EPSILON_FLOOR_M};
use crate::gradest::EstimatorConfig;
use crate::objectives::{bridge_optimum_oracle, GridSpec, ObjectiveKind, DEFAULT_BRIDGE_OFFSET_DB};
use crate::position::Position;
use crate::sa::{GainSchedule, StopRules};
use crate::sensing::NoiseSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub dimension: usize,
    pub objective: ObjectiveKind,
    pub master_seed: u64,
    pub max_iter: usize,
    pub start: StartConfig,
    pub nodes: Vec<NodeConfig>,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub stop: StopRules,
    #[serde(default)]
    pub bridge: BridgeConfig,
    #[serde(default)]
    pub summary: SummaryConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradcheck: Option<GradcheckConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartConfig {
    pub position_m: Vec<f64>,
    /// Each run starts uniformly within `±jitter_m` per axis of `position_m`.
    #[serde(default)]
    pub jitter_m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub source_m: Vec<f64>,
    pub gamma_pl: f64,
    #[serde(default = "one")]
    pub d0_m: f64,
    #[serde(default = "default_floor")]
    pub epsilon_floor_m: f64,
    #[serde(default)]
    pub walls: Vec<WallConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fading: Option<FadingParams>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallConfig {
    #[serde(flatten)]
    pub geometry: WallGeometry,
    pub attenuation_db: f64,
}

/// Step gain `a`: a number, or `"auto"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainSpec {
    Fixed(f64),
    Auto(AutoTag),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default = "auto_gain")]
    pub a: GainSpec,
    /// With `a = "auto"`: length of the first step on the smooth noise-free
    /// field at the start position.
    #[serde(default = "one")]
    pub auto_first_step_m: f64,
    #[serde(rename = "A", default = "ten")]
    pub stability: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub h0_m: f64,
    #[serde(default = "sixth")]
    pub gamma_s: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            a: auto_gain(),
            auto_first_step_m: 1.0,
            stability: 10.0,
            alpha: 1.0,
            h0_m: 1.0,
            gamma_s: 1.0 / 6.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BridgeConfig {
    #[serde(default = "default_offset")]
    pub offset_db: f64,
    /// Oracle search box; defaults to the nodes' bounding box padded by half
    /// their separation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_min_m: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_max_m: Option<Vec<f64>>,
    #[serde(default = "default_oracle_res")]
    pub oracle_resolution_m: f64,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        BridgeConfig {
            offset_db: DEFAULT_BRIDGE_OFFSET_DB,
            oracle_min_m: None,
            oracle_max_m: None,
            oracle_resolution_m: default_oracle_res(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryConfig {
    #[serde(default = "two")]
    pub success_threshold_m: f64,
    /// First iteration of the rate fit; defaults to `max_iter / 10`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_k_min: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_k_max: Option<usize>,
}

impl Default for SummaryConfig {
    fn default() -> Self {
        SummaryConfig {
            success_threshold_m: 2.0,
            rate_k_min: None,
            rate_k_max: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckConfig {
    pub point_m: Vec<f64>,
    pub sigmas_db: Vec<f64>,
    pub hs_m: Vec<f64>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_var_tol")]
    pub variance_rel_tol: f64,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn ten() -> f64 {
    10.0
}
fn sixth() -> f64 {
    1.0 / 6.0
}
fn default_floor() -> f64 {
    DEFAULT_EPSILON_FLOOR_M
}
fn auto_gain() -> GainSpec {
    GainSpec::Auto(AutoTag::Auto)
}
fn default_offset() -> f64 {
    DEFAULT_BRIDGE_OFFSET_DB
}
fn default_oracle_res() -> f64 {
    0.05
}
fn default_repeats() -> usize {
    100_000
}
fn default_var_tol() -> f64 {
    0.05
}

fn cfg(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl NodeConfig {
    pub fn build(&self, dimension: usize) -> Result<FieldModel> {
        let source = Position::new(self.source_m.clone())
            .map_err(|e| cfg(format!("source_m: {e}")))?;
        if source.dim() != dimension {
            return Err(cfg(format!(
                "source_m has {} coordinates, dimension is {dimension}",
                source.dim()
            )));
        }
        let walls = self
            .walls
            .iter()
            .map(|w| Wall::new(w.geometry.clone(), w.attenuation_db))
            .collect::<Result<Vec<_>>>()?;
        let mut model = FieldModel::new(PathLossParams::new(self.gamma_pl, self.d0_m, source)?)?
            .with_walls(walls)?
            .with_epsilon_floor(self.epsilon_floor_m)?;
        if let Some(f) = &self.fading {
            model = model.with_fading(f.clone())?;
        }
        Ok(model)
    }
}

/// A validated scenario with its fields built.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub fields: Vec<Arc<FieldModel>>,
    /// Point the optimizer should reach: the source for seeking, the grid
    /// argmin of the noise-free objective for bridging.
    pub optimum: Position,
    pub start: Position,
    pub hash: String,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| cfg(e.to_string()))?;
        Scenario::from_config(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg(format!("{}: {e}", path.display())))?;
        Scenario::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => cfg(format!("{}: {m}", path.display())),
            other => cfg(format!("{}: {other}", path.display())),
        })
    }

    pub fn from_config(config: ScenarioConfig) -> Result<Self> {
        let p = config.dimension;
        if !(1..=3).contains(&p) {
            return Err(cfg(format!("dimension must be 1, 2 or 3, got {p}")));
        }
        let expected_nodes = match config.objective {
            ObjectiveKind::Seek => 1,
            ObjectiveKind::Bridge => 2,
        };
        if config.nodes.len() != expected_nodes {
            return Err(cfg(format!(
                "objective {:?} needs {expected_nodes} node(s), got {}",
                config.objective,
                config.nodes.len()
            )));
        }
        let fields = config
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| n.build(p).map(Arc::new).map_err(|e| cfg(format!("nodes[{i}]: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let start = Position::new(config.start.position_m.clone())
            .map_err(|e| cfg(format!("start.position_m: {e}")))?;
        if start.dim() != p {
            return Err(cfg(format!("start.position_m has {} coordinates, dimension is {p}", start.dim())));
        }
        if !(config.start.jitter_m >= 0.0 && config.start.jitter_m.is_finite()) {
            return Err(cfg("start.jitter_m must be >= 0"));
        }
        config.noise.validate().map_err(|e| cfg(format!("noise: {e}")))?;
        config.estimator.validate().map_err(|e| cfg(format!("estimator: {e}")))?;
        let s = &config.schedule;
        if let GainSpec::Fixed(a) = s.a {
            if !(a > 0.0 && a.is_finite()) {
                return Err(cfg("schedule.a must be > 0 or \"auto\""));
            }
        }
        if !(s.auto_first_step_m > 0.0 && s.auto_first_step_m.is_finite()) {
            return Err(cfg("schedule.auto_first_step_m must be > 0"));
        }
        let probe = GainSchedule {
            a: 1.0,
            stability: s.stability,
            alpha: s.alpha,
            h0_m: s.h0_m,
            gamma_s: s.gamma_s,
        };
        probe.validate().map_err(|e| cfg(format!("schedule: {e}")))?;
        if !(config.summary.success_threshold_m > 0.0) {
            return Err(cfg("summary.success_threshold_m must be > 0"));
        }
        if let Some(g) = &config.gradcheck {
            if g.point_m.len() != p || g.sigmas_db.is_empty() || g.hs_m.is_empty() || g.repeats < 2 {
                return Err(cfg("gradcheck: point_m must match the dimension; sigmas_db and hs_m non-empty; repeats >= 2"));
            }
        }

        let optimum = match config.objective {
            ObjectiveKind::Seek => fields[0].source().clone(),
            ObjectiveKind::Bridge => {
                let grid = oracle_grid(&config, &fields)?;
                bridge_optimum_oracle(
                    &fields[0].smooth_part(),
                    &fields[1].smooth_part(),
                    &grid,
                    config.bridge.offset_db,
                )?
            }
        };
        let hash = config_hash(&config);
        Ok(Scenario {
            config,
            fields,
            optimum,
            start,
            hash,
        })
    }

    pub fn dim(&self) -> usize {
        self.config.dimension
    }
}

fn oracle_grid(config: &ScenarioConfig, fields: &[Arc<FieldModel>]) -> Result<GridSpec> {
    let b = &config.bridge;
    let (min, max) = match (&b.oracle_min_m, &b.oracle_max_m) {
        (Some(lo), Some(hi)) => (lo.clone(), hi.clone()),
        (None, None) => {
            let (s1, s2) = (fields[0].source(), fields[1].source());
            let pad = s1.distance(s2) / 2.0;
            let lo = s1.coords().iter().zip(s2.coords()).map(|(a, b)| a.min(*b) - pad).collect();
            let hi = s1.coords().iter().zip(s2.coords()).map(|(a, b)| a.max(*b) + pad).collect();
            (lo, hi)
        }
        _ => return Err(cfg("bridge: give both oracle_min_m and oracle_max_m, or neither")),
    };
    GridSpec::new(min, max, b.oracle_resolution_m).map_err(|e| cfg(format!("bridge oracle grid: {e}")))
}

/// Lowercase hex SHA-256 of the canonical JSON form of the config.
pub fn config_hash(config: &ScenarioConfig) -> String {
    let json = serde_json::to_vec(config).expect("config serializes");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SEEK: &str = r#"
name = "seek"
dimension = 2
objective = "seek"
master_seed = 1
max_iter = 10

[start]
position_m = [20.0, 0.0]

[[nodes]]
source_m = [0.0, 0.0]
gamma_pl = 3.0

[[nodes.walls]]
shape = "segment"
a = [5.0, -1.0]
b = [5.0, 1.0]
attenuation_db = 6.0
"#;

    #[test]
    fn parses_with_defaults() {
        let s = Scenario::from_toml_str(SEEK).unwrap();
        assert_eq!(s.config.schedule, ScheduleConfig::default());
        assert_eq!(s.fields[0].walls().len(), 1);
        assert_eq!(s.optimum.coords(), &[0.0, 0.0]);
        assert_eq!(s.hash.len(), 64);
    }

    #[test]
    fn fixed_gain() {
        let text = format!("{SEEK}\n[schedule]\na = 2.5\n");
        let s = Scenario::from_toml_str(&text).unwrap();
        assert_eq!(s.config.schedule.a, GainSpec::Fixed(2.5));
        let text = format!("{SEEK}\n[schedule]\na = \"often\"\n");
        assert!(Scenario::from_toml_str(&text).is_err());
    }

    #[test]
    fn field_level_errors() {
        let bad = SEEK.replace("gamma_pl = 3.0", "gamma_pl = -3.0");
        let e = Scenario::from_toml_str(&bad).unwrap_err().to_string();
        assert!(e.contains("nodes[0]") && e.contains("gamma_pl"), "{e}");
        let bad = SEEK.replace("max_iter = 10", "max_iter = 10\nmax_iters = 3");
        assert!(Scenario::from_toml_str(&bad).unwrap_err().to_string().contains("max_iters"));
        let bad = SEEK.replace("[20.0, 0.0]", "[20.0, 0.0, 1.0]");
        assert!(Scenario::from_toml_str(&bad).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = Scenario::from_toml_str(SEEK).unwrap();
        let b = Scenario::from_toml_str(&SEEK.replace("master_seed = 1", "master_seed = 2")).unwrap();
        let c = Scenario::from_toml_str(&format!("# comment\n{SEEK}")).unwrap();
        assert_ne!(a.hash, b.hash);
        assert_eq!(a.hash, c.hash);
    }

    #[test]
    fn bridge_optimum_from_oracle() {
        let text = r#"
name = "bridge"
dimension = 2
objective = "bridge"
master_seed = 1
max_iter = 10
[start]
position_m = [3.0, 8.0]
[[nodes]]
source_m = [-5.0, 0.0]
gamma_pl = 3.0
[[nodes]]
source_m = [5.0, 0.0]
gamma_pl = 3.0
"#;
        let s = Scenario::from_toml_str(text).unwrap();
        assert!(s.optimum.norm() < 0.05 * 2f64.sqrt() + 1e-9, "{}", s.optimum);
    }
}
