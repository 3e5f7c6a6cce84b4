use std::path::Path;

use serde::{Deserialize, Serialize};

use super::problems::{example1, example2, patch_problem, ManufacturedProblem};
use crate::adaptivity::{AdaptConfig, MarkingConfig, RefinementMode};
use crate::error::{Result, VemError};
use crate::estimator::EstimatorOptions;
use crate::geometry::MeshFamily;
use crate::solver::{Orders, PicardConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Example1,
    Example2,
    Patch,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterOverrides {
    pub mu: Option<f64>,
    pub lambda: Option<f64>,
    pub theta: Option<f64>,
    pub m_bound: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExportConfig {
    pub indicators: bool,
    pub vtk: bool,
    pub svg: bool,
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self {
            indicators: true,
            vtk: false,
            svg: false,
        }
    }
}

fn default_n() -> usize {
    2
}
fn default_levels() -> usize {
    4
}
fn default_delta() -> f64 {
    0.5
}
fn default_mode() -> RefinementMode {
    RefinementMode::Uniform
}
fn default_output() -> String {
    "vem-sad-out".into()
}

/// One experiment, read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub family: MeshFamily,
    #[serde(default = "default_n")]
    pub n: usize,
    pub k1: usize,
    pub k2: usize,
    #[serde(default = "default_mode")]
    pub mode: RefinementMode,
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default)]
    pub dof_budget: Option<usize>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub parameters: ParameterOverrides,
    #[serde(default)]
    pub picard: PicardConfig,
    #[serde(default)]
    pub estimator: EstimatorOptions,
    #[serde(default = "default_output")]
    pub output: String,
    #[serde(default)]
    pub export: ExportConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s).map_err(|e| VemError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Self::from_toml_str(&s).map_err(|e| match e {
            VemError::Config(m) => VemError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.k1 < 2 {
            return Err(VemError::Config(format!("k1 = {} but must be at least 2", self.k1)));
        }
        if self.k2 < 1 {
            return Err(VemError::Config(format!("k2 = {} but must be at least 1", self.k2)));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(VemError::Config(format!("delta = {} outside [0, 1]", self.delta)));
        }
        if self.k1 != self.k2 + 1 {
            log::warn!("k1 = {}, k2 = {}: the recommended pairing is k1 = k2 + 1", self.k1, self.k2);
        }
        self.problem()?.params.validate()
    }

    /// The manufactured problem with parameter overrides applied.
    pub fn problem(&self) -> Result<ManufacturedProblem> {
        let o = &self.parameters;
        let mut p = match self.problem {
            ProblemKind::Example1 => example1(o.mu.unwrap_or(1.0), o.lambda.unwrap_or(1.0), o.theta.unwrap_or(1e-3)),
            ProblemKind::Example2 => example2(),
            ProblemKind::Patch => patch_problem(self.k1, self.k2, 1.0, 10.0, 0.5),
        };
        if let Some(v) = o.mu {
            p.params.mu = v;
        }
        if let Some(v) = o.lambda {
            p.params.lambda = v;
        }
        if let Some(v) = o.theta {
            p.params.theta = v;
        }
        if let Some(v) = o.m_bound {
            p.params.m_bound = v;
        }
        Ok(p)
    }

    pub fn adapt_config(&self) -> AdaptConfig {
        AdaptConfig {
            orders: Orders::new(self.k1, self.k2),
            mode: self.mode,
            max_levels: self.levels,
            dof_budget: self.dof_budget,
            marking: MarkingConfig { delta: self.delta },
            picard: self.picard,
            estimator: self.estimator,
        }
    }
}
