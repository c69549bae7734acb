//! JSON run configurations, one per subcommand.

use std::path::{Path, PathBuf};

use lambdaq::descriptors::{DistributionSpec, LambdaSpec, MarketSpec};
use lambdaq::portfolio::ArmijoRule;
use lambdaq::{Method, SolverParams};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::CliError;

/// Optional overrides of the solver defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub delta: Option<f64>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
}

impl SolverOverrides {
    pub fn params(&self) -> Result<SolverParams, CliError> {
        let d = SolverParams::default();
        Ok(SolverParams::new(
            self.delta.unwrap_or(d.delta),
            self.max_iter.unwrap_or(d.max_iter),
            self.tol.unwrap_or(d.tol),
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantileConfig {
    pub distribution: DistributionSpec,
    pub lambda: LambdaSpec,
    #[serde(default)]
    pub solver: SolverOverrides,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmpiricalConfig {
    #[serde(default)]
    pub samples_csv: Option<PathBuf>,
    #[serde(default)]
    pub samples: Option<Vec<f64>>,
    pub lambda: LambdaSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsolateConfig {
    pub distribution: DistributionSpec,
    pub lambda: LambdaSpec,
    #[serde(default = "default_subdivisions")]
    pub subdivisions: usize,
    /// Search interval; defaults to the solver bracket.
    #[serde(default)]
    pub interval: Option<(f64, f64)>,
    #[serde(default = "yes")]
    pub solve: bool,
    #[serde(default)]
    pub solver: SolverOverrides,
}

fn default_subdivisions() -> usize {
    lambdaq::isolation::DEFAULT_SUBDIVISIONS
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodSpec {
    Penalty { t: f64 },
    Kkt,
}

impl From<MethodSpec> for Method {
    fn from(m: MethodSpec) -> Self {
        match m {
            MethodSpec::Penalty { t } => Method::Penalty { t },
            MethodSpec::Kkt => Method::Kkt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    pub market: MarketSpec,
    pub lambda: LambdaSpec,
    pub r_min: f64,
    pub w_init: Vec<f64>,
    pub method: MethodSpec,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub eta0: Option<f64>,
    #[serde(default)]
    pub c1: Option<f64>,
    #[serde(default)]
    pub armijo: Option<ArmijoRule>,
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default)]
    pub solver: SolverOverrides,
}

pub fn parse<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config {
        origin: origin.to_string(),
        message: e.to_string(),
    })
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text, &path.display().to_string())
}

/// Reads a one-column CSV of samples. A non-numeric first row is taken as a header.
pub fn read_samples(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let field = record.get(0).unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(CliError::Input(format!(
                    "{}: row {} is not a number: {field:?}",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(out)
}

/// Resolves `path` against the directory of the config file.
pub fn resolve(base: Option<&Path>, path: &Path) -> PathBuf {
    match base.and_then(Path::parent) {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}
