// SPDX-License-Identifier: Apache-2.0

//! Run configuration: defaults, TOML file, environment, and flag overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::LiveConfig;
use crate::mutation::Toolchain;
use crate::verifier::{ExternalConfig, ExternalVerifier, MockDomain, MockVerifier, Verifier};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("cannot read {path}: {message}")]
    Read { path: PathBuf, message: String },
}

impl ConfigError {
    fn invalid(field: &str, message: impl Into<String>) -> Self {
        Self::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn field(&self) -> Option<&str> {
        match self {
            Self::Invalid { field, .. } => Some(field),
            Self::Read { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Mock,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifierSettings {
    pub backend: Backend,
    pub domain: MockDomain,
    pub external: ExternalConfig,
}

impl Default for VerifierSettings {
    fn default() -> Self {
        Self {
            backend: Backend::Mock,
            domain: MockDomain::default(),
            external: ExternalConfig::default(),
        }
    }
}

impl VerifierSettings {
    pub fn build(&self) -> Box<dyn Verifier> {
        match self.backend {
            Backend::Mock => Box::new(MockVerifier::new(self.domain.clone())),
            Backend::External => Box::new(ExternalVerifier::new(self.external.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub n_refine: usize,
    pub n_repair: usize,
    /// VDR threshold.
    pub t: f64,
    /// Variants sampled per round.
    pub mutation_budget: usize,
    pub seed: u64,
    /// Measure existing clauses before the first round and skip the point
    /// of interest when they already reach `t`.
    pub skip_if_strong: bool,
    pub verifier: VerifierSettings,
    pub model: LiveConfig,
    pub toolchain: Toolchain,
    /// Skip equivalence filtering entirely.
    pub no_tce: bool,
    pub catalog: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_refine: 5,
            n_repair: 5,
            t: 0.75,
            mutation_budget: 24,
            seed: 0,
            skip_if_strong: false,
            verifier: VerifierSettings::default(),
            model: LiveConfig::default(),
            toolchain: Toolchain::default(),
            no_tce: false,
            catalog: None,
        }
    }
}

/// Values given on the command line; `None` means not given.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub n_refine: Option<usize>,
    pub n_repair: Option<usize>,
    pub t: Option<f64>,
    pub mutation_budget: Option<usize>,
    pub seed: Option<u64>,
    pub skip_if_strong: Option<bool>,
    pub backend: Option<Backend>,
    pub cc: Option<String>,
}

fn parse_env<T: std::str::FromStr>(
    env: &BTreeMap<String, String>,
    key: &str,
    field: &str,
) -> Result<Option<T>, ConfigError> {
    match env.get(key) {
        None => Ok(None),
        Some(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| ConfigError::invalid(field, format!("{key}={v} is not a valid value"))),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let field = msg.split('`').nth(1).unwrap_or("config").to_string();
            ConfigError::Invalid { field, message: msg }
        })
    }

    /// Loads with precedence flags > environment > file > defaults.
    pub fn load(path: Option<&Path>, env: &BTreeMap<String, String>, flags: &Overrides) -> Result<Self, ConfigError> {
        let mut c = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Read {
                    path: p.to_path_buf(),
                    message: e.to_string(),
                })?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        if let Some(v) = parse_env(env, "SPECSYN_N_REFINE", "n_refine")? {
            c.n_refine = v;
        }
        if let Some(v) = parse_env(env, "SPECSYN_N_REPAIR", "n_repair")? {
            c.n_repair = v;
        }
        if let Some(v) = parse_env(env, "SPECSYN_T", "t")? {
            c.t = v;
        }
        if let Some(v) = parse_env(env, "SPECSYN_BUDGET", "mutation_budget")? {
            c.mutation_budget = v;
        }
        if let Some(v) = parse_env(env, "SPECSYN_SEED", "seed")? {
            c.seed = v;
        }
        if let Some(v) = env.get("SPECSYN_CC") {
            c.toolchain.cc = v.clone();
        }
        if let Some(v) = env.get("SPECSYN_VERIFIER") {
            c.verifier.backend = Backend::External;
            c.verifier.external.command = v.clone();
        }
        let f = flags;
        if let Some(v) = f.n_refine {
            c.n_refine = v;
        }
        if let Some(v) = f.n_repair {
            c.n_repair = v;
        }
        if let Some(v) = f.t {
            c.t = v;
        }
        if let Some(v) = f.mutation_budget {
            c.mutation_budget = v;
        }
        if let Some(v) = f.seed {
            c.seed = v;
        }
        if let Some(v) = f.skip_if_strong {
            c.skip_if_strong = v;
        }
        if let Some(v) = f.backend {
            c.verifier.backend = v;
        }
        if let Some(v) = &f.cc {
            c.toolchain.cc = v.clone();
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_refine < 1 {
            return Err(ConfigError::invalid("n_refine", "must be at least 1"));
        }
        if self.n_repair < 1 {
            return Err(ConfigError::invalid("n_repair", "must be at least 1"));
        }
        if !(self.t > 0.0 && self.t <= 1.0) {
            return Err(ConfigError::invalid("t", format!("{} is outside (0, 1]", self.t)));
        }
        if self.mutation_budget < 1 {
            return Err(ConfigError::invalid("mutation_budget", "must be at least 1"));
        }
        let d = &self.verifier.domain;
        if d.int_min > d.int_max || d.elem_min > d.elem_max {
            return Err(ConfigError::invalid("verifier.domain", "empty value range"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn empty_config_gives_defaults() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!((c.n_refine, c.n_repair, c.t), (5, 5, 0.75));
        assert_eq!(c.mutation_budget, 24);
    }

    #[test]
    fn precedence() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "t = 0.9\nn_repair = 2\nseed = 1\n").unwrap();
        let flags = Overrides {
            t: Some(0.5),
            ..Default::default()
        };
        let c = RunConfig::load(
            Some(&p),
            &env(&[("SPECSYN_T", "0.6"), ("SPECSYN_N_REPAIR", "3")]),
            &flags,
        )
        .unwrap();
        assert_eq!(c.t, 0.5);
        assert_eq!(c.n_repair, 3);
        assert_eq!(c.seed, 1);
    }

    #[test]
    fn range_checks_name_the_field() {
        let e = RunConfig::load(
            None,
            &env(&[]),
            &Overrides {
                t: Some(1.5),
                ..Default::default()
            },
        )
        .unwrap_err();
        assert_eq!(e.field(), Some("t"));
        let e = RunConfig::load(None, &env(&[("SPECSYN_N_REFINE", "0")]), &Overrides::default()).unwrap_err();
        assert_eq!(e.field(), Some("n_refine"));
        let e = RunConfig::from_toml("t = \"high\"").unwrap_err();
        assert!(e.to_string().contains("t"));
    }

    #[test]
    fn nested_sections() {
        let c = RunConfig::from_toml("[verifier]\nbackend = \"external\"\n[verifier.domain]\nint_max = 4\n").unwrap();
        assert_eq!(c.verifier.backend, Backend::External);
        assert_eq!(c.verifier.domain.int_max, 4);
        assert_eq!(c.verifier.domain.int_min, -8);
    }
}
