use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use vexlab_core::{build_mesh, Domain, ExponentField, ExponentSpec, Mesh, SolveConfig};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    SpacesCheck,
    Solve,
    Cascade,
    Pohozaev,
    Verdict,
    Sweep,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::SpacesCheck => "spaces-check",
            Scenario::Solve => "solve",
            Scenario::Cascade => "cascade",
            Scenario::Pohozaev => "pohozaev",
            Scenario::Verdict => "verdict",
            Scenario::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub h: f64,
}

/// Right-hand side for `solve` with `method = "regularized"`; zeroed on the boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LoadSpec {
    Constant { value: f64 },
    /// `amplitude * prod_k sin(pi (x_k - lo_k) / (hi_k - lo_k))` over the bounding box.
    SineProduct { amplitude: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    #[default]
    Nehari,
    Regularized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSection {
    #[serde(default)]
    pub method: SolveMethod,
    #[serde(default)]
    pub load: Option<LoadSpec>,
    /// Regularization for `method = "regularized"`; defaults to `solver.eps_min`.
    #[serde(default)]
    pub epsilon: Option<f64>,
}

impl Default for SolveSection {
    fn default() -> Self {
        SolveSection {
            method: SolveMethod::Nehari,
            load: None,
            epsilon: None,
        }
    }
}

fn default_trials() -> usize {
    20
}
fn default_pairs() -> usize {
    2000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacesSection {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_pairs")]
    pub log_holder_pairs: usize,
}

impl Default for SpacesSection {
    fn default() -> Self {
        SpacesSection {
            trials: default_trials(),
            log_holder_pairs: default_pairs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// JSON pointer into the config, e.g. `/q/value` or `/mesh/h`.
    pub path: String,
    pub values: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub scenario: Scenario,
    pub axes: Vec<SweepAxis>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub scenario: Option<Scenario>,
    pub domain: Domain,
    /// Space dimension N for the verdict; defaults to the domain's.
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub mesh: Option<MeshConfig>,
    pub p: ExponentSpec,
    #[serde(default)]
    pub q: Option<ExponentSpec>,
    #[serde(default)]
    pub solver: SolveConfig,
    #[serde(default)]
    pub origin: Option<Vec<f64>>,
    #[serde(default)]
    pub solve: SolveSection,
    #[serde(default)]
    pub spaces: SpacesSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// A config together with the raw JSON it came from and the directory relative paths resolve against.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub raw: Value,
    pub base_dir: PathBuf,
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl LoadedConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        let raw: Value = serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_value(raw, base_dir)
    }

    pub fn from_value(raw: Value, base_dir: PathBuf) -> Result<Self, CliError> {
        let config: ExperimentConfig = serde_json::from_value(raw.clone()).map_err(|e| config_error(e.to_string()))?;
        Ok(LoadedConfig { config, raw, base_dir })
    }

    /// Seed precedence: command line, then top-level `seed`, then `solver.seed`.
    pub fn apply_seed(&mut self, cli_seed: Option<u64>) {
        let seed = cli_seed.or(self.config.seed).unwrap_or(self.config.solver.seed);
        self.config.seed = Some(seed);
        self.config.solver.seed = seed;
        self.raw["seed"] = Value::from(seed);
        if let Some(s) = self.raw.get_mut("solver").and_then(Value::as_object_mut) {
            s.insert("seed".into(), Value::from(seed));
        }
    }

    pub fn seed(&self) -> u64 {
        self.config.seed.unwrap_or(self.config.solver.seed)
    }

    pub fn validate_for(&self, scenario: Scenario) -> Result<(), CliError> {
        let c = &self.config;
        if let Some(s) = c.scenario {
            if s != scenario {
                return Err(config_error(format!("config is for scenario '{s}' but '{scenario}' was requested")));
            }
        }
        c.domain.validate().map_err(|e| config_error(format!("domain: {e}")))?;
        c.solver.validate().map_err(|e| config_error(format!("solver: {e}")))?;
        if let Some(o) = &c.origin {
            if o.len() != c.domain.dim() {
                return Err(config_error(format!("origin has {} coordinates, domain dimension is {}", o.len(), c.domain.dim())));
            }
        }
        let needs_mesh = matches!(scenario, Scenario::SpacesCheck | Scenario::Solve | Scenario::Cascade | Scenario::Pohozaev);
        if needs_mesh {
            let Some(m) = &c.mesh else {
                return Err(config_error(format!("scenario '{scenario}' needs a 'mesh' section")));
            };
            if !(m.h > 0.0 && m.h.is_finite()) {
                return Err(config_error(format!("mesh.h must be positive, got {}", m.h)));
            }
            if !c.domain.is_meshable() {
                return Err(config_error("this domain kind cannot be meshed"));
            }
            if let Some(d) = c.dim {
                if d != c.domain.dim() {
                    return Err(config_error(format!("dim = {d} differs from the mesh dimension {}", c.domain.dim())));
                }
            }
        }
        let needs_q = matches!(scenario, Scenario::Solve | Scenario::Cascade | Scenario::Pohozaev | Scenario::Verdict);
        if needs_q && c.q.is_none() {
            return Err(config_error(format!("scenario '{scenario}' needs 'q'")));
        }
        if scenario == Scenario::Solve && c.solve.method == SolveMethod::Regularized {
            if c.solve.load.is_none() {
                return Err(config_error("solve.method = regularized needs solve.load"));
            }
            if let Some(e) = c.solve.epsilon {
                if !(e > 0.0) {
                    return Err(config_error(format!("solve.epsilon must be positive, got {e}")));
                }
            }
        }
        if scenario == Scenario::Sweep {
            let Some(sw) = &c.sweep else {
                return Err(config_error("scenario 'sweep' needs a 'sweep' section"));
            };
            if sw.scenario == Scenario::Sweep {
                return Err(config_error("sweeps cannot nest"));
            }
            if sw.axes.is_empty() || sw.axes.iter().any(|a| a.values.is_empty()) {
                return Err(config_error("every sweep axis needs at least one value"));
            }
            for a in &sw.axes {
                if self.raw.pointer(&a.path).is_none() {
                    return Err(config_error(format!("sweep axis '{}' does not name a config entry", a.path)));
                }
            }
        } else {
            // exponent files are checked up front so that a missing table is a config error
            self.exponent(&c.p, "p")?;
            if let Some(q) = &c.q {
                self.exponent(q, "q")?;
            }
        }
        Ok(())
    }

    pub fn exponent(&self, spec: &ExponentSpec, name: &str) -> Result<ExponentField, CliError> {
        spec.build(&self.base_dir).map_err(|e| config_error(format!("{name}: {e}")))
    }

    pub fn p(&self) -> Result<ExponentField, CliError> {
        self.exponent(&self.config.p, "p")
    }

    pub fn q(&self) -> Result<ExponentField, CliError> {
        let spec = self.config.q.as_ref().ok_or_else(|| config_error("missing 'q'"))?;
        self.exponent(spec, "q")
    }

    pub fn mesh(&self) -> Result<Arc<Mesh>, CliError> {
        let m = self.config.mesh.as_ref().ok_or_else(|| config_error("missing 'mesh'"))?;
        Ok(Arc::new(build_mesh(&self.config.domain, m.h).map_err(|e| config_error(format!("mesh: {e}")))?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn load(v: Value) -> LoadedConfig {
        LoadedConfig::from_value(v, PathBuf::from(".")).unwrap()
    }

    fn line() -> Value {
        json!({"domain":{"kind":"interval","a":0,"b":1},"mesh":{"h":0.1},"p":{"kind":"constant","value":2},"solver":{"seed":4}})
    }

    #[test]
    fn seed_precedence() {
        let mut c = load(line());
        c.apply_seed(None);
        assert_eq!(c.seed(), 4);
        let mut v = line();
        v["seed"] = json!(9);
        let mut c = load(v);
        c.apply_seed(None);
        assert_eq!((c.seed(), c.config.solver.seed), (9, 9));
        c.apply_seed(Some(1));
        assert_eq!(c.raw["seed"], 1);
        assert_eq!(c.raw["solver"]["seed"], 1);
    }

    #[test]
    fn requirements_per_scenario() {
        let c = load(line());
        assert!(c.validate_for(Scenario::SpacesCheck).is_ok());
        assert!(c.validate_for(Scenario::Solve).is_err());
        let mut v = line();
        v["q"] = json!({"kind":"constant","value":4});
        v["solve"] = json!({"method":"regularized"});
        assert!(load(v.clone()).validate_for(Scenario::Solve).is_err());
        v["solve"]["load"] = json!({"kind":"constant","value":1});
        assert!(load(v.clone()).validate_for(Scenario::Solve).is_ok());
        v["sweep"] = json!({"scenario":"solve","axes":[{"path":"/q/missing","values":[1]}]});
        assert!(load(v.clone()).validate_for(Scenario::Sweep).is_err());
        v["sweep"]["axes"][0]["path"] = json!("/q/value");
        assert!(load(v).validate_for(Scenario::Sweep).is_ok());
    }

    #[test]
    fn origin_must_match_dimension() {
        let mut v = line();
        v["origin"] = json!([0.5, 0.5]);
        assert!(load(v).validate_for(Scenario::SpacesCheck).is_err());
    }
}
