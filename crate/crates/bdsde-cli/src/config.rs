//! Strict JSON experiment configuration.
//!
//! Unknown keys are rejected everywhere; every run writes the resolved
//! configuration (defaults filled in, command-line overrides applied) next
//! to its outputs.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::CliError;
use bdsde_core::catalog::XiKind;
use bdsde_core::solver::{Scheme, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    VerifyTanaka,
    CheckAssumptions,
    Solve,
    Estimates,
    Cauchy,
    Convergence,
    Uniqueness,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::VerifyTanaka => "verify-tanaka",
            Command::CheckAssumptions => "check-assumptions",
            Command::Solve => "solve",
            Command::Estimates => "estimates",
            Command::Cauchy => "cauchy",
            Command::Convergence => "convergence",
            Command::Uniqueness => "uniqueness",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemConfig>,
    pub grid: GridConfig,
    pub monte_carlo: MonteCarloConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tanaka: Option<TanakaSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cauchy: Option<CauchySection>,
    #[serde(default)]
    pub assumptions: AssumptionsSection,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    #[serde(default)]
    pub dump_paths: bool,
}

fn default_p() -> f64 {
    2.0
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// Catalog name: zero, linear_drift, linear_g, monotone_cubic,
    /// quadratic_bad, heavy_tail_xi.
    pub name: String,
    /// Parameter of the parametric entries (`a`, `beta`, `beta_tail`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<f64>,
    /// Optional replacement terminal condition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<XiConfig>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum XiConfig {
    WTerminal,
    Const { value: f64 },
    HeavyTail { beta: f64 },
}

impl From<XiConfig> for XiKind {
    fn from(value: XiConfig) -> Self {
        match value {
            XiConfig::WTerminal => XiKind::TerminalW,
            XiConfig::Const { value } => XiKind::Const(value),
            XiConfig::HeavyTail { beta } => XiKind::HeavyTail { beta },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Refinement ladder for the study commands; coupled seeds anchor at
    /// the largest value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps_list: Option<Vec<usize>>,
}

impl GridConfig {
    pub fn single_steps(&self) -> Result<usize, CliError> {
        self.steps.ok_or_else(|| {
            CliError::config("this command requires `grid.steps`".to_string())
        })
    }

    pub fn ladder(&self) -> Result<Vec<usize>, CliError> {
        if let Some(list) = &self.steps_list {
            if list.is_empty() {
                return Err(CliError::config("`grid.steps_list` must not be empty".into()));
            }
            Ok(list.clone())
        } else if let Some(steps) = self.steps {
            Ok(vec![steps])
        } else {
            Err(CliError::config(
                "this command requires `grid.steps` or `grid.steps_list`".into(),
            ))
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub paths: usize,
    #[serde(default = "default_b_paths")]
    pub b_path_count: usize,
    pub master_seed: u64,
}

fn default_b_paths() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeConfig {
    Explicit,
    ImplicitPicard,
}

impl From<SchemeConfig> for Scheme {
    fn from(value: SchemeConfig) -> Self {
        match value {
            SchemeConfig::Explicit => Scheme::Explicit,
            SchemeConfig::ImplicitPicard => Scheme::ImplicitPicard,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_scheme")]
    pub scheme: SchemeConfig,
    #[serde(default = "default_basis_degree")]
    pub basis_degree: usize,
    #[serde(default = "default_picard_max_iters")]
    pub picard_max_iters: usize,
    #[serde(default = "default_picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    #[serde(default = "default_nested_inner")]
    pub nested_inner: usize,
}

fn default_scheme() -> SchemeConfig {
    SchemeConfig::Explicit
}
fn default_basis_degree() -> usize {
    2
}
fn default_picard_max_iters() -> usize {
    20
}
fn default_picard_tol() -> f64 {
    1e-10
}
fn default_ridge() -> f64 {
    1e-10
}
fn default_nested_inner() -> usize {
    32
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            scheme: default_scheme(),
            basis_degree: default_basis_degree(),
            picard_max_iters: default_picard_max_iters(),
            picard_tol: default_picard_tol(),
            ridge: default_ridge(),
            nested_inner: default_nested_inner(),
        }
    }
}

impl SolverSection {
    pub fn to_solver_config(&self, mc: &MonteCarloConfig, frozen_b_index: usize) -> SolverConfig {
        SolverConfig {
            scheme: self.scheme.into(),
            picard_max_iters: self.picard_max_iters,
            picard_tol: self.picard_tol,
            basis_degree: self.basis_degree,
            paths: mc.paths,
            b_path_count: mc.b_path_count,
            frozen_b_index,
            nested_inner: self.nested_inner,
            ridge: self.ridge,
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TanakaSection {
    /// Which built-in semimartingale to exercise: `constant`,
    /// `classical_ito` or `smooth_2d`.
    pub case: String,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_epsilon() -> f64 {
    0.1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CauchySection {
    pub n_values: Vec<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssumptionsSection {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_radius")]
    pub y_radius: f64,
    #[serde(default = "default_radius")]
    pub z_radius: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_samples() -> usize {
    100_000
}
fn default_radius() -> f64 {
    3.0
}
fn default_tolerance() -> f64 {
    1e-9
}

impl Default for AssumptionsSection {
    fn default() -> Self {
        AssumptionsSection {
            samples: default_samples(),
            y_radius: default_radius(),
            z_radius: default_radius(),
            tolerance: default_tolerance(),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.monte_carlo.paths < 2 {
            return Err(CliError::config("`monte_carlo.paths` must be at least 2".into()));
        }
        if self.monte_carlo.b_path_count == 0 {
            return Err(CliError::config("`monte_carlo.b_path_count` must be positive".into()));
        }
        if !(self.p > 0.0) {
            return Err(CliError::config(format!("`p` must be positive, got {}", self.p)));
        }
        if self.formats.is_empty() {
            return Err(CliError::config("`formats` must not be empty".into()));
        }
        let needs_problem = !matches!(self.command, Command::VerifyTanaka);
        if needs_problem && self.problem.is_none() {
            return Err(CliError::config(format!(
                "command `{}` requires a `problem` section",
                self.command.name()
            )));
        }
        match self.command {
            Command::VerifyTanaka if self.tanaka.is_none() => Err(CliError::config(
                "command `verify-tanaka` requires a `tanaka` section".into(),
            )),
            Command::Cauchy if self.cauchy.is_none() => Err(CliError::config(
                "command `cauchy` requires a `cauchy` section".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn wants(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }
}
