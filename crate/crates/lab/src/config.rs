//! Experiment configuration: flat `key = value` text, one setting per line.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use weightlab_core::gen::WeightSpec;

use crate::experiments::EXPERIMENTS;

/// Invalid or missing setting, naming the offending field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

pub const MAX_DEPTH_LINE: u32 = 14;
pub const MAX_DEPTH_SQUARE: u32 = 7;
pub const MAX_VALUE_DIM: usize = 4;
pub const MAX_TRIALS: usize = 100_000;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub depth: u32,
    /// Dimension of the domain, 1 or 2.
    pub dim: u32,
    /// Dimension of vector, matrix and body values.
    pub d: usize,
    pub p: f64,
    pub weight: WeightSpec,
    pub trials: usize,
    pub seed: u64,
    /// Artifact prefix; `None` prints the JSON artifact to stdout.
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults for everything except the experiment name.
    pub fn new(experiment: impl Into<String>) -> Self {
        Self {
            experiment: experiment.into(),
            depth: 8,
            dim: 1,
            d: 2,
            p: 2.0,
            weight: WeightSpec::Random {
                seed: 0,
                roughness: 0.5,
            },
            trials: 20,
            seed: 0,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !EXPERIMENTS.contains(&self.experiment.as_str()) {
            return Err(ConfigError::new(
                "experiment",
                format!("unknown experiment `{}`; expected one of {}", self.experiment, EXPERIMENTS.join(", ")),
            ));
        }
        if self.dim != 1 && self.dim != 2 {
            return Err(ConfigError::new("dim", format!("must be 1 or 2, got {}", self.dim)));
        }
        let max_depth = if self.dim == 1 { MAX_DEPTH_LINE } else { MAX_DEPTH_SQUARE };
        if self.depth < 1 || self.depth > max_depth {
            return Err(ConfigError::new("depth", format!("must be in 1..={max_depth} for dim {}, got {}", self.dim, self.depth)));
        }
        if self.d < 1 || self.d > MAX_VALUE_DIM {
            return Err(ConfigError::new("d", format!("must be in 1..={MAX_VALUE_DIM}, got {}", self.d)));
        }
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(ConfigError::new("p", format!("must satisfy 1 < p < ∞, got {}", self.p)));
        }
        if self.trials < 1 || self.trials > MAX_TRIALS {
            return Err(ConfigError::new("trials", format!("must be in 1..={MAX_TRIALS}, got {}", self.trials)));
        }
        let weight_ok = match &self.weight {
            WeightSpec::Constant(c) => *c > 0.0 && c.is_finite(),
            WeightSpec::Power(a) => a.is_finite(),
            WeightSpec::Random { roughness, .. } => roughness.is_finite() && *roughness >= 0.0,
            WeightSpec::Diagonal(v) => !v.is_empty() && v.iter().all(|a| a.is_finite()),
            WeightSpec::RotatedDiagonal { exponents, .. } => exponents.iter().all(|a| a.is_finite()),
        };
        if !weight_ok {
            return Err(ConfigError::new("weight", format!("parameters out of range in `{}`", self.weight)));
        }
        Ok(())
    }

    /// Parse `key = value` lines; `#` starts a comment. Unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::new("");
        let mut seen: Vec<String> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::new(format!("line {}", n + 1), "expected `key = value`"));
            };
            let key = key.trim();
            if seen.iter().any(|k| k == key) {
                return Err(ConfigError::new(key, "given more than once"));
            }
            cfg.set(key, value.trim())?;
            seen.push(key.to_string());
        }
        if !seen.iter().any(|k| k == "experiment") {
            return Err(ConfigError::new("experiment", "missing"));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Set one field from its text form, without range validation.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
            value
                .parse()
                .map_err(|_| ConfigError::new(key, format!("`{value}` is not a valid number")))
        }
        match key {
            "experiment" => self.experiment = value.to_string(),
            "depth" => self.depth = num(key, value)?,
            "dim" => self.dim = num(key, value)?,
            "d" => self.d = num(key, value)?,
            "p" => self.p = num(key, value)?,
            "weight" => self.weight = value.parse().map_err(|e| ConfigError::new(key, format!("{e}")))?,
            "trials" => self.trials = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "output" => self.output = (!value.is_empty()).then(|| PathBuf::from(value)),
            other => return Err(ConfigError::new(other, "unknown setting")),
        }
        Ok(())
    }

    /// Canonical text form; [`parse`](Self::parse) reads it back unchanged.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "experiment = {}\ndepth = {}\ndim = {}\nd = {}\np = {}\nweight = {}\ntrials = {}\nseed = {}\n",
            self.experiment, self.depth, self.dim, self.d, self.p, self.weight, self.trials, self.seed
        );
        if let Some(o) = &self.output {
            s.push_str(&format!("output = {}\n", o.display()));
        }
        s
    }

    pub fn grid(&self) -> weightlab_core::Result<weightlab_core::DyadicGrid> {
        weightlab_core::DyadicGrid::new(self.dim, self.depth)
    }

    /// Weight generator for trial `t`: seeded families advance their seed by `t`.
    pub fn trial_weight(&self, t: usize) -> WeightSpec {
        match &self.weight {
            WeightSpec::Random { seed, roughness } => WeightSpec::Random {
                seed: seed.wrapping_add(t as u64),
                roughness: *roughness,
            },
            WeightSpec::RotatedDiagonal { seed, exponents } => WeightSpec::RotatedDiagonal {
                seed: seed.wrapping_add(t as u64),
                exponents: exponents.clone(),
            },
            other => other.clone(),
        }
    }
}
