//! TOML run configuration.
//!
//! ```toml
//! [problem]            # fully observed scalar problem
//! A = 0.0
//! B = 1.0
//! sigma = { polynomial = [1.0, 0.5] }
//! Q = { table = [[0.0, 1.0], [1.0, 2.0]] }
//! D1 = 1.0
//! D2 = 0.0
//! T = 1.0
//!
//! [simulation]         # optional; CLI flags take precedence
//! n_paths = 100000
//! dt = 0.001
//! seed = 42
//! ```
//!
//! Instead of `[problem]` a file may carry `[matrix_problem]` (same keys,
//! matrices as nested arrays) or `[partial_obs]` (`sigma_hat`, `sigma_tilde`,
//! `eta_hat`, `eta_tilde`, `s`, `x`, `T`, `D1`, `D2`). Exactly one problem
//! section is allowed.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MatrixProblemSpec, ProblemSpec};
use crate::partial_obs::PartialObsSpec;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix_problem: Option<MatrixProblemSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partial_obs: Option<PartialObsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSection>,
}

/// The problem a run operates on.
#[derive(Clone, Debug, PartialEq)]
pub enum Problem {
    Full(ProblemSpec),
    Matrix(MatrixProblemSpec),
    Partial(PartialObsSpec),
}

pub const PRESETS: [&str; 4] = ["example1", "example2", "example3", "example4"];

/// Built-in parameter sets; horizon `T = 1`.
pub fn preset(name: &str) -> Result<Problem> {
    match name {
        "example1" => Ok(Problem::Full(ProblemSpec::example1(1.0))),
        "example2" => Ok(Problem::Full(ProblemSpec::example2(1.0))),
        "example3" => Ok(Problem::Partial(PartialObsSpec::example3())),
        "example4" => Ok(Problem::Partial(PartialObsSpec::example4())),
        other => Err(Error::Argument(format!(
            "unknown preset '{other}' (expected one of {})",
            PRESETS.join(", ")
        ))),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            field: e
                .span()
                .map(|span| {
                    let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
                    format!("line {line}")
                })
                .unwrap_or_else(|| "config".into()),
            detail: e.message().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse {
            field: "config".into(),
            detail: e.to_string(),
        })
    }

    /// Config holding a single problem and no simulation overrides.
    pub fn from_problem(problem: &Problem) -> Self {
        let mut cfg = RunConfig::default();
        match problem {
            Problem::Full(p) => cfg.problem = Some(p.clone()),
            Problem::Matrix(p) => cfg.matrix_problem = Some(p.clone()),
            Problem::Partial(p) => cfg.partial_obs = Some(p.clone()),
        }
        cfg
    }

    pub fn problem(&self) -> Result<Problem> {
        match (&self.problem, &self.matrix_problem, &self.partial_obs) {
            (Some(p), None, None) => Ok(Problem::Full(p.clone())),
            (None, Some(p), None) => Ok(Problem::Matrix(p.clone())),
            (None, None, Some(p)) => Ok(Problem::Partial(p.clone())),
            (None, None, None) => Err(Error::Parse {
                field: "config".into(),
                detail: "missing [problem], [matrix_problem] or [partial_obs] section".into(),
            }),
            _ => Err(Error::Parse {
                field: "config".into(),
                detail: "exactly one problem section is allowed".into(),
            }),
        }
    }
}
