//! TOML run configuration. Every table rejects unknown keys.
//!
//! ```toml
//! master_seed = 7
//! out_dir = "out"
//!
//! [[experiment]]
//! scheme = "bitsep"
//! profile = { kind = "homogeneous", epsilon = 0.5 }
//! k = ["1e4", "1e5"]
//! m = 4
//! trials = 1000
//!
//! [[bounds]]
//! profile = { kind = "periodic", pattern = [0.2, 0.4] }
//! k = 1000
//! m = [1, 4]
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use tandem_core::simnet::MessageKind;
use thiserror::Error;

use crate::montecarlo::{Experiment, ProfileSpec, Scheme, SizeRegime};
use crate::tasks::{BoundsTask, ConverseTask, LppTask, ThresholdTask};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("{block}[{index}]: {reason}")]
    Invalid {
        block: &'static str,
        index: usize,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// A count written as an integer, a float like `1e5`, or a string like `"1e5"`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Count {
    Int(u64),
    Float(f64),
    Text(String),
}

impl Count {
    pub fn value(&self) -> Result<u64, String> {
        match self {
            Count::Int(n) => Ok(*n),
            Count::Float(x) => float_count(*x),
            Count::Text(s) => parse_count(s),
        }
    }
}

fn float_count(x: f64) -> Result<u64, String> {
    if x >= 0.0 && x.fract() == 0.0 && x < 2f64.powi(63) {
        Ok(x as u64)
    } else {
        Err(format!("{x} is not a non-negative integer"))
    }
}

/// Accepts `300`, `1e5` and `2.5e3`.
pub fn parse_count(s: &str) -> Result<u64, String> {
    let s = s.trim();
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    s.parse::<f64>()
        .map_err(|_| format!("`{s}` is not a number"))
        .and_then(float_count)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeName {
    Ftlr,
    Bitsep,
    Gsi,
}

impl From<SchemeName> for Scheme {
    fn from(s: SchemeName) -> Self {
        match s {
            SchemeName::Ftlr => Scheme::Ftlr,
            SchemeName::Bitsep => Scheme::Bitsep,
            SchemeName::Gsi => Scheme::Gsi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageName {
    Uniform,
    Alternating,
}

impl From<MessageName> for MessageKind {
    fn from(m: MessageName) -> Self {
        match m {
            MessageName::Uniform => MessageKind::Uniform,
            MessageName::Alternating => MessageKind::Alternating,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProfileBlock {
    Homogeneous { epsilon: f64 },
    Periodic { pattern: Vec<f64> },
    Explicit { epsilons: Vec<f64> },
}

impl From<&ProfileBlock> for ProfileSpec {
    fn from(p: &ProfileBlock) -> Self {
        match p {
            ProfileBlock::Homogeneous { epsilon } => ProfileSpec::Homogeneous(*epsilon),
            ProfileBlock::Periodic { pattern } => ProfileSpec::Periodic(pattern.clone()),
            ProfileBlock::Explicit { epsilons } => ProfileSpec::Explicit(epsilons.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentBlock {
    pub scheme: SchemeName,
    pub profile: ProfileBlock,
    pub k: OneOrMany<Count>,
    pub m: Option<OneOrMany<Count>>,
    pub rho: Option<OneOrMany<f64>>,
    pub alpha: Option<OneOrMany<f64>>,
    pub c: Option<OneOrMany<f64>>,
    pub delta_sep: Option<OneOrMany<f64>>,
    pub trials: Count,
    pub message: Option<MessageName>,
    pub deadline: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsBlock {
    pub profile: ProfileBlock,
    pub k: OneOrMany<Count>,
    pub m: OneOrMany<Count>,
    pub c: Option<OneOrMany<f64>>,
    pub delta_sep: OneOrMany<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConverseBlock {
    pub profile: ProfileBlock,
    pub i_max: usize,
    pub n_max: usize,
    /// Velocities for the threshold scan; no scan when absent.
    pub alpha: Option<OneOrMany<f64>>,
    /// Scan nodes; defaults to `1 ..= i_max`.
    pub i: Option<OneOrMany<Count>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LppBlock {
    pub epsilon: f64,
    pub k: OneOrMany<Count>,
    pub alpha: OneOrMany<f64>,
    pub trials: Count,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub master_seed: u64,
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub experiment: Vec<ExperimentBlock>,
    #[serde(default)]
    pub bounds: Vec<BoundsBlock>,
    #[serde(default)]
    pub converse: Vec<ConverseBlock>,
    #[serde(default)]
    pub lpp: Vec<LppBlock>,
}

/// Everything a config asks for, validated.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub out_dir: Option<PathBuf>,
    pub experiments: Vec<Experiment>,
    pub bounds: Vec<BoundsTask>,
    pub converse: Vec<ConverseTask>,
    pub scans: Vec<ThresholdTask>,
    pub lpp: Vec<LppTask>,
}

pub fn load(path: &Path) -> Result<Config, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|source| ConfigError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

fn counts(v: &OneOrMany<Count>) -> Result<Vec<u64>, String> {
    v.to_vec().iter().map(Count::value).collect()
}

fn sizes(v: &OneOrMany<Count>) -> Result<Vec<usize>, String> {
    Ok(counts(v)?.into_iter().map(|x| x as usize).collect())
}

/// Message-size regimes from mutually exclusive `m`, `rho`, `alpha`; `m = 1`
/// when none is given.
pub fn size_regimes(
    m: Option<Vec<usize>>,
    rho: Option<Vec<f64>>,
    alpha: Option<Vec<f64>>,
) -> Result<Vec<SizeRegime>, String> {
    match (m, rho, alpha) {
        (None, None, None) => Ok(vec![SizeRegime::Const(1)]),
        (Some(m), None, None) => Ok(m.into_iter().map(SizeRegime::Const).collect()),
        (None, Some(r), None) => Ok(r.into_iter().map(SizeRegime::Poly).collect()),
        (None, None, Some(a)) => Ok(a.into_iter().map(SizeRegime::Linear).collect()),
        _ => Err("give at most one of `m`, `rho`, `alpha`".into()),
    }
}

impl ExperimentBlock {
    pub fn to_experiment(&self, master_seed: u64) -> Result<Experiment, String> {
        let mut exp = Experiment::new(self.scheme.into(), (&self.profile).into(), sizes(&self.k)?);
        exp.sizes = size_regimes(
            self.m.as_ref().map(sizes).transpose()?,
            self.rho.as_ref().map(OneOrMany::to_vec),
            self.alpha.as_ref().map(OneOrMany::to_vec),
        )?;
        if let Some(c) = &self.c {
            exp.c = c.to_vec();
        }
        if let Some(d) = &self.delta_sep {
            exp.delta_sep = d.to_vec();
        }
        exp.trials = self.trials.value()?;
        exp.master_seed = master_seed;
        if let Some(m) = self.message {
            exp.message = m.into();
        }
        exp.deadline = self.deadline;
        Ok(exp)
    }
}

impl Config {
    pub fn plan(&self) -> Result<Plan, ConfigError> {
        let invalid = |block, index| {
            move |reason| ConfigError::Invalid {
                block,
                index,
                reason,
            }
        };
        let mut experiments = Vec::new();
        let mut first_point = 0;
        for (x, b) in self.experiment.iter().enumerate() {
            let mut exp = b
                .to_experiment(self.master_seed)
                .map_err(invalid("experiment", x))?;
            exp.first_point = first_point;
            let (points, _) = crate::montecarlo::plan(&exp)
                .map_err(|e| e.to_string())
                .map_err(invalid("experiment", x))?;
            first_point += points.len() as u64;
            experiments.push(exp);
        }

        let mut bounds = Vec::new();
        for (x, b) in self.bounds.iter().enumerate() {
            let task = BoundsTask {
                profile: (&b.profile).into(),
                k: sizes(&b.k).map_err(invalid("bounds", x))?,
                m: sizes(&b.m).map_err(invalid("bounds", x))?,
                c: b.c.as_ref().map_or(vec![1.0], OneOrMany::to_vec),
                delta_sep: b.delta_sep.to_vec(),
            };
            task.validate().map_err(invalid("bounds", x))?;
            bounds.push(task);
        }

        let mut converse = Vec::new();
        let mut scans = Vec::new();
        for (x, b) in self.converse.iter().enumerate() {
            let task = ConverseTask {
                profile: (&b.profile).into(),
                i_max: b.i_max,
                n_max: b.n_max,
            };
            task.validate().map_err(invalid("converse", x))?;
            if let Some(alpha) = &b.alpha {
                let i = match &b.i {
                    Some(i) => sizes(i).map_err(invalid("converse", x))?,
                    None => (1..=b.i_max).collect(),
                };
                let scan = ThresholdTask {
                    profile: task.profile.clone(),
                    alpha: alpha.to_vec(),
                    i,
                };
                scan.validate().map_err(invalid("converse", x))?;
                scans.push(scan);
            } else if b.i.is_some() {
                return Err(invalid("converse", x)("`i` needs `alpha`".into()));
            }
            converse.push(task);
        }

        let mut lpp = Vec::new();
        for (x, b) in self.lpp.iter().enumerate() {
            let task = LppTask {
                eps: b.epsilon,
                k: sizes(&b.k).map_err(invalid("lpp", x))?,
                alpha: b.alpha.to_vec(),
                trials: b.trials.value().map_err(invalid("lpp", x))?,
                seed: self.master_seed,
            };
            task.validate().map_err(invalid("lpp", x))?;
            lpp.push(task);
        }

        Ok(Plan {
            out_dir: self.out_dir.clone(),
            experiments,
            bounds,
            converse,
            scans,
            lpp,
        })
    }
}
