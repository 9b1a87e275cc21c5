//! Distribution-pair descriptors accepted by `--instance`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use disttest_core::{make_hard_pair, norms, DiscreteDistribution, SeparationParams};
use serde_json::Value;

use crate::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instance {
    /// `gen:hard:N`
    Hard(usize),
    /// `gen:hard-identical:N`, the first half of the hard pair against itself.
    HardIdentical(usize),
    /// `gen:uniform:N`, uniform against itself.
    Uniform(usize),
    /// `p.json,q.json`
    Files(PathBuf, PathBuf),
    /// A single JSON file `{"p": <distribution>, "q": <distribution>}`.
    PairFile(PathBuf),
}

impl FromStr for Instance {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("gen:") {
            let (kind, n) = rest
                .split_once(':')
                .ok_or_else(|| CliError::Usage(format!("generator `{s}` needs the form gen:<kind>:<n>")))?;
            let n: usize = n
                .parse()
                .map_err(|_| CliError::Usage(format!("generator size `{n}` is not a non-negative integer")))?;
            return match kind {
                "hard" => Ok(Instance::Hard(n)),
                "hard-identical" => Ok(Instance::HardIdentical(n)),
                "uniform" => Ok(Instance::Uniform(n)),
                other => Err(CliError::Usage(format!(
                    "unknown generator `{other}` (expected hard, hard-identical or uniform)"
                ))),
            };
        }
        match s.split_once(',') {
            Some((p, q)) => Ok(Instance::Files(p.into(), q.into())),
            None => Ok(Instance::PairFile(s.into())),
        }
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instance::Hard(n) => write!(f, "gen:hard:{n}"),
            Instance::HardIdentical(n) => write!(f, "gen:hard-identical:{n}"),
            Instance::Uniform(n) => write!(f, "gen:uniform:{n}"),
            Instance::Files(p, q) => write!(f, "{},{}", p.display(), q.display()),
            Instance::PairFile(p) => write!(f, "{}", p.display()),
        }
    }
}

/// A materialised instance.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub p: DiscreteDistribution,
    pub q: DiscreteDistribution,
    pub params: SeparationParams,
    /// Parameters that fix default sizes. For `hard-identical` these come
    /// from the hard pair, so the control runs at the same `s`.
    pub reference: SeparationParams,
}

fn read_pair_file(path: &PathBuf) -> Result<(DiscreteDistribution, DiscreteDistribution)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| disttest_core::Error::Io(format!("{}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| disttest_core::Error::Format(e.to_string()))?;
    let side = |key: &str| -> Result<DiscreteDistribution> {
        let d = v
            .get(key)
            .ok_or_else(|| disttest_core::Error::Format(format!("pair file has no `{key}` entry")))?;
        Ok(DiscreteDistribution::from_json_str(&d.to_string())?)
    };
    Ok((side("p")?, side("q")?))
}

impl Instance {
    pub fn load(&self) -> Result<Loaded> {
        let (p, q) = match self {
            Instance::Hard(n) => make_hard_pair(*n)?,
            Instance::HardIdentical(n) => {
                let (p, q) = make_hard_pair(*n)?;
                let reference = norms(&p, &q)?;
                let params = norms(&p, &p)?;
                return Ok(Loaded {
                    q: p.clone(),
                    p,
                    params,
                    reference,
                });
            }
            Instance::Uniform(n) => {
                let u = DiscreteDistribution::uniform(*n)?;
                (u.clone(), u)
            }
            Instance::Files(a, b) => (DiscreteDistribution::load(a)?, DiscreteDistribution::load(b)?),
            Instance::PairFile(path) => read_pair_file(path)?,
        };
        let params = norms(&p, &q)?;
        Ok(Loaded {
            p,
            q,
            params,
            reference: params,
        })
    }
}
