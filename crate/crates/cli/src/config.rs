//! Experiment configuration files.

use std::path::PathBuf;

use memlab::multicluster::{FrequencyLaw, MixturePrior, NullTerm};
use memlab::problems::{Family, ProblemSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Suite {
    SimulateError,
    MemUpper,
    SdpiConst,
    Tradeoff,
    VerifyReductions,
    Multicluster,
}

impl Suite {
    pub fn file_stem(self) -> &'static str {
        match self {
            Self::SimulateError => "simulate_error",
            Self::MemUpper => "mem_upper",
            Self::SdpiConst => "sdpi_const",
            Self::Tradeoff => "tradeoff",
            Self::VerifyReductions => "verify_reductions",
            Self::Multicluster => "multicluster",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub family: Family,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    #[serde(rename = "C", default = "default_c")]
    pub c: f64,
    #[serde(default = "default_c_sub")]
    pub c_sub: f64,
    #[serde(default = "default_c_ell")]
    pub c_ell: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ln_model_space: Option<f64>,
    #[serde(default = "one")]
    pub c_p: f64,
    #[serde(default = "one")]
    pub c_k: f64,
}

fn default_c() -> f64 {
    4.0
}
fn default_c_sub() -> f64 {
    16.0
}
fn default_c_ell() -> f64 {
    16.0
}
fn default_alpha() -> f64 {
    1.0 / 3.0
}
fn default_delta() -> f64 {
    0.1
}
fn one() -> f64 {
    1.0
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            c: default_c(),
            c_sub: default_c_sub(),
            c_ell: default_c_ell(),
            alpha: default_alpha(),
            delta: default_delta(),
            ln_model_space: None,
            c_p: 1.0,
            c_k: 1.0,
        }
    }
}

/// Learner selection for the error and memorization suites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerChoice {
    SingleSample,
    NoisyMean,
    ProjectedQuantized,
    MajorityProjected,
    MajorityFull,
    ConstantCoords,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MulticlusterConfig {
    pub k: usize,
    pub prior: FrequencyLaw,
    #[serde(default)]
    pub null_term: NullTerm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub suite: Suite,
    pub problem: ProblemConfig,
    pub n_grid: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub constants: Constants,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learner: Option<LearnerChoice>,
    #[serde(default = "default_bits")]
    pub k_bits: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multicluster: Option<MulticlusterConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

fn default_trials() -> usize {
    10_000
}
fn default_bits() -> u8 {
    6
}

fn range(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

/// Parses a TOML document, rejects unknown keys, fills defaults and validates ranges.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.validated()
}

impl ExperimentConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    fn validated(mut self) -> Result<Self, CliError> {
        let k = &self.constants;
        if !(k.c > 0.0) {
            return Err(range("C", "must be positive"));
        }
        if !(k.alpha > 0.0 && k.alpha <= 0.5) {
            return Err(range("alpha", "must lie in (0, 1/2]"));
        }
        if !(k.delta > 0.0 && k.delta < 1.0) {
            return Err(range("delta", "must lie in (0, 1)"));
        }
        for (name, v) in [("c_sub", k.c_sub), ("c_ell", k.c_ell), ("c_p", k.c_p), ("c_k", k.c_k)] {
            if !(v > 0.0) {
                return Err(range(name, "must be positive"));
            }
        }
        if self.n_grid.is_empty() {
            return Err(range("n_grid", "must be nonempty"));
        }
        if self.n_grid.contains(&0) {
            return Err(range("n_grid", "entries must be at least 1"));
        }
        if self.trials == 0 {
            return Err(range("trials", "must be at least 1"));
        }
        let p = &mut self.problem;
        if p.d == 0 {
            return Err(range("d", "must be at least 1"));
        }
        let d = p.d as f64;
        match p.family {
            Family::Gaussian | Family::Boolean => {
                if p.nu.is_some() {
                    return Err(range("nu", "only applies to the SparseBoolean family"));
                }
                let scale = match &self.multicluster {
                    Some(m) if self.suite == Suite::Multicluster => (m.k.max(2) as f64).ln().sqrt(),
                    _ => 1.0,
                };
                let l = *p.lambda.get_or_insert(self.constants.c * scale * d.powf(-0.25));
                let ok = if p.family == Family::Gaussian { l > 0.0 && l <= 1.0 } else { l > 0.0 && l < 1.0 };
                if !ok {
                    return Err(range("lambda", format!("{l} is out of range")));
                }
            }
            Family::SparseBoolean => {
                if p.lambda.is_some() {
                    return Err(range("lambda", "does not apply to the SparseBoolean family"));
                }
                let v = *p.nu.get_or_insert(self.constants.c / d.sqrt());
                if !(v > 0.0 && v < 1.0) {
                    return Err(range("nu", format!("{v} is out of range")));
                }
            }
        }
        if self.suite == Suite::Multicluster {
            let Some(m) = &self.multicluster else {
                return Err(range("multicluster", "section is required for the Multicluster suite"));
            };
            MixturePrior::new(m.k, m.prior.clone()).map_err(|e| range("multicluster", e))?;
            if self.trials < 1000 {
                return Err(range("trials", "must be at least 1000 for the Multicluster suite"));
            }
        }
        if self.k_bits == 0 || self.k_bits > 30 {
            return Err(range("k_bits", "must lie in 1..=30"));
        }
        Ok(self)
    }

    pub fn spec(&self) -> ProblemSpec {
        let p = &self.problem;
        ProblemSpec { family: p.family, d: p.d, lambda: p.lambda, nu: p.nu }
    }
}
