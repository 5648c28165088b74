//! Scenario files: TOML with a closed schema.

use std::path::Path;

use serde::{Deserialize, Serialize};
use vhi_contact::{ContactData, Material, Tagging};
use vhi_core::instances::LinearInstanceSpec;
use vhi_core::stepper::SteppingMode;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Abstract,
    Contact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_mode")]
    pub mode: SteppingMode,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub static_tol: Option<f64>,
    #[serde(default = "default_sweep_cap")]
    pub sweep_cap: usize,
}

fn default_mode() -> SteppingMode {
    SteppingMode::Marching
}

fn default_tol() -> f64 {
    1e-9
}

fn default_sweep_cap() -> usize {
    200
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { mode: default_mode(), tol: default_tol(), static_tol: None, sweep_cap: default_sweep_cap() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<String>,
    #[serde(default = "yes")]
    pub vtk: bool,
    #[serde(default = "yes")]
    pub trajectory: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: None, vtk: true, trajectory: true }
    }
}

/// Static instance checked by `oracle`: time node nearest `time`, history value `history`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default)]
    pub time: f64,
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    #[serde(default)]
    pub history: Option<Vec<f64>>,
}

fn default_spacing() -> f64 {
    1e-3
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { time: 0.0, spacing: default_spacing(), history: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub width: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
    #[serde(default)]
    pub tagging: Tagging,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub problem: ProblemKind,
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, rename = "abstract", skip_serializing_if = "Option::is_none")]
    pub abstract_problem: Option<LinearInstanceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<MeshConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<Material>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contact: Option<ContactData>,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Canonical TOML text of the parsed configuration.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, msg: &str| Err(CliError::Config(format!("`{field}`: {msg}")));
        if !(self.grid.horizon > 0.0) || !self.grid.horizon.is_finite() {
            return bad("grid.horizon", "must be positive and finite");
        }
        if !(self.solver.tol > 0.0) {
            return bad("solver.tol", "must be positive");
        }
        if let Some(t) = self.solver.static_tol {
            if !(t > 0.0) {
                return bad("solver.static_tol", "must be positive");
            }
        }
        if self.solver.sweep_cap == 0 {
            return bad("solver.sweep_cap", "must be at least 1");
        }
        if let Some(o) = &self.oracle {
            if !(o.spacing > 0.0) {
                return bad("oracle.spacing", "must be positive");
            }
        }
        match self.problem {
            ProblemKind::Abstract => {
                if self.abstract_problem.is_none() {
                    return bad("abstract", "section is required for problem = \"abstract\"");
                }
                if self.mesh.is_some() || self.material.is_some() || self.contact.is_some() {
                    return bad("problem", "abstract runs take no mesh, material or contact section");
                }
            }
            ProblemKind::Contact => {
                if self.abstract_problem.is_some() || self.oracle.is_some() {
                    return bad("problem", "contact runs take no abstract or oracle section");
                }
                let Some(m) = &self.mesh else {
                    return bad("mesh", "section is required for problem = \"contact\"");
                };
                if !(m.width > 0.0 && m.height > 0.0) || m.nx == 0 || m.ny == 0 {
                    return bad("mesh", "width and height must be positive and nx, ny at least 1");
                }
                if let Some(mat) = &self.material {
                    mat.validate().map_err(|e| CliError::Config(e.to_string()))?;
                }
                if let Some(c) = &self.contact {
                    c.validate().map_err(|e| CliError::Config(e.to_string()))?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ODE: &str = include_str!("../examples/ode_memory.cfg");
    const CONTACT: &str = include_str!("../examples/contact_small.cfg");

    #[test]
    fn bundled_configs_parse_and_round_trip() {
        for text in [ODE, CONTACT] {
            let cfg = ScenarioConfig::parse(text).unwrap();
            let canonical = cfg.canonical();
            let again = ScenarioConfig::parse(&canonical).unwrap();
            assert_eq!(cfg, again);
            assert_eq!(canonical, again.canonical());
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let text = ODE.replace("[grid]", "[grid]\nbogus = 1");
        match ScenarioConfig::parse(&text) {
            Err(CliError::Config(msg)) => assert!(msg.contains("bogus") && msg.contains("line"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let text = ODE.replace("horizon = 2.0", "horizon = -2.0");
        match ScenarioConfig::parse(&text) {
            Err(CliError::Config(msg)) => assert!(msg.contains("grid.horizon"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let text = CONTACT.replace("theta = 1.0", "theta = 0.0");
        assert!(matches!(ScenarioConfig::parse(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn malformed_input_never_panics() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let bytes: Vec<char> = CONTACT.chars().collect();
        for _ in 0..500 {
            let mut s = bytes.clone();
            for _ in 0..rng.random_range(1..6) {
                let i = rng.random_range(0..s.len());
                match rng.random_range(0..3) {
                    0 => {
                        s.remove(i);
                    }
                    1 => s.insert(i, ['=', '[', '"', '0', '-', '\n', 'x'][rng.random_range(0..7)]),
                    _ => {
                        let j = rng.random_range(0..s.len());
                        s.swap(i, j);
                    }
                }
            }
            let text: String = s.into_iter().collect();
            let _ = ScenarioConfig::parse(&text);
        }
    }
}
