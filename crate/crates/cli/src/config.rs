use std::path::{Path, PathBuf};

use adiabat_core::evolve::SigmaRule;
use adiabat_core::experiments::Scenario;
use adiabat_core::grid::GridSpec;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Canonical scenario name or an inline scenario object.
    #[serde(default)]
    pub scenario: Option<Value>,
    /// Replaces the grid of the scenario.
    #[serde(default)]
    pub grid: Option<GridSpec>,
    /// Replaces the σ rule of the scenario.
    #[serde(default)]
    pub sigma_rule: Option<SigmaRule>,
    /// Single ε for `simulate` and `radiation`.
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// ε ladder for `sweep` and `radiation`.
    #[serde(default)]
    pub ladder: Option<Vec<f64>>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub radiation: Option<RadiationOptions>,
    #[serde(default)]
    pub oracle: Option<OracleOptions>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiationOptions {
    /// Evaluation time; the end of the window by default.
    #[serde(default)]
    pub time: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleOptions {
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_oracle_eps")]
    pub epsilons: Vec<f64>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { n_max: default_n_max(), epsilons: default_oracle_eps() }
    }
}

fn default_n_max() -> usize {
    adiabat_core::oracle::DEFAULT_N_MAX
}

fn default_oracle_eps() -> Vec<f64> {
    vec![0.5, 0.2, 0.1]
}

/// A parsed config together with its canonical hash.
pub struct Loaded {
    pub config: ExperimentConfig,
    pub hash: String,
    /// Top-level keys that were not recognized.
    pub ignored: Vec<String>,
}

pub fn load(path: &Path, strict: bool) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text, strict)
}

pub fn parse(text: &str, strict: bool) -> Result<Loaded, CliError> {
    let mut ignored = Vec::new();
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ExperimentConfig = serde_ignored::deserialize(de, |path| ignored.push(path.to_string()))
        .map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
    if strict && !ignored.is_empty() {
        return Err(CliError::Config(format!("unknown config field `{}` (strict mode)", ignored[0])));
    }
    let canonical = serde_json::to_vec(&config).expect("config serializes");
    let hash = Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect();
    Ok(Loaded { config, hash, ignored })
}

impl ExperimentConfig {
    /// Resolves the scenario and applies the overrides.
    pub fn scenario(&self, command: &str) -> Result<Scenario, CliError> {
        let raw = self
            .scenario
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("missing field `scenario` (required by {command})")))?;
        let mut s = match raw {
            Value::String(name) => Scenario::by_name(name).map_err(|e| CliError::Config(format!("field `scenario`: {e}")))?,
            Value::Object(_) => serde_json::from_value(raw.clone()).map_err(|e| CliError::Config(format!("field `scenario`: {e}")))?,
            _ => return Err(CliError::Config("field `scenario` must be a name or an object".into())),
        };
        if let Some(grid) = self.grid {
            s.grid = grid;
        }
        if let Some(rule) = self.sigma_rule {
            s.sigma_rule = rule;
        }
        s.validate().map_err(|e| CliError::Config(format!("field `scenario`: {e}")))?;
        Ok(s)
    }

    pub fn epsilon(&self, command: &str) -> Result<f64, CliError> {
        let eps = self.epsilon.ok_or_else(|| CliError::Config(format!("missing field `epsilon` (required by {command})")))?;
        check_epsilon("epsilon", eps)?;
        Ok(eps)
    }

    pub fn ladder(&self) -> Result<Vec<f64>, CliError> {
        let ladder = self.ladder.clone().unwrap_or_else(|| adiabat_core::experiments::DEFAULT_LADDER.to_vec());
        for &e in &ladder {
            check_epsilon("ladder", e)?;
        }
        Ok(ladder)
    }

    pub fn out_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf).or_else(|| self.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn check_epsilon(field: &str, eps: f64) -> Result<(), CliError> {
    if eps.is_finite() && eps > 0.0 && eps <= 1.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("field `{field}`: epsilon must lie in (0, 1], got {eps}")))
    }
}

/// How the σ rule relates to the ε⁸ coupling of the asymptotic analysis.
pub fn sigma_note(rule: &SigmaRule) -> String {
    match *rule {
        SigmaRule::Power { p } if p == 8.0 => "sigma = epsilon^8".into(),
        SigmaRule::Power { p } => format!("desk-scale deviation: sigma = epsilon^{p} instead of epsilon^8"),
        SigmaRule::Fixed { sigma } => format!("desk-scale deviation: fixed sigma = {sigma} instead of epsilon^8"),
    }
}
