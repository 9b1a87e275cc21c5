//! Command-line parsing into an [`ExperimentSpec`].

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use disttest_core::dist::{DEFAULT_DISJOINT_TOL, DEFAULT_LOWER_BOUND_C};
use disttest_core::lowerbound::{Tester, DEFAULT_TESTER_L};
use disttest_core::NormFailurePolicy;

use crate::instance::Instance;
use crate::table::Format;
use crate::{CliError, Result};

/// Default ceiling on the distinguisher's accuracy parameter `l`.
pub const DEFAULT_L_CAP: u64 = 1000;

#[derive(Debug, Parser)]
#[command(name = "disttest", version, about = "Seeded experiments on distinguishing and closeness testing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Norm-derived quantities of a pair.
    Norms(CommonArgs),
    /// Write a pair to `<out>/p.json` and `<out>/q.json`.
    Generate(CommonArgs),
    /// Seeded distinguisher trials, alternating the testing side.
    Distinguish(CommonArgs),
    /// Closeness tester trials on (P, P) and (P, Q).
    Closeness(CommonArgs),
    /// Distinguisher accuracy over a geometric grid of `s`.
    Sweep(CommonArgs),
    /// Weight concentration and exact type I / type II ratios.
    Concentration(CommonArgs),
    /// Permutation-game statistics and tester error rates.
    Lowerbound(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// `gen:hard:N`, `gen:hard-identical:N`, `gen:uniform:N`, `p.json,q.json` or a pair file.
    #[arg(long, default_value = "gen:hard:1024")]
    pub instance: String,
    /// Sample parameter, or `auto`.
    #[arg(long)]
    pub s: Option<String>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Repeatable `key=value`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Norms,
    Generate,
    Distinguish,
    Closeness,
    Sweep,
    Concentration,
    Lowerbound,
}

impl CommandKind {
    pub fn default_trials(self) -> u64 {
        match self {
            CommandKind::Norms | CommandKind::Generate => 1,
            CommandKind::Distinguish | CommandKind::Closeness => 100,
            CommandKind::Sweep => 20,
            CommandKind::Concentration => 100_000,
            CommandKind::Lowerbound => 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SChoice {
    /// Whatever the command derives from the instance.
    Default,
    Auto,
    Fixed(u64),
}

impl FromStr for SChoice {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(SChoice::Auto);
        }
        s.parse()
            .map(SChoice::Fixed)
            .map_err(|_| CliError::Usage(format!("--s expects a positive integer or `auto`, got `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightChoice {
    /// `A = P`.
    P,
    Zero,
    /// A JSON array of reals.
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BridgeChoice {
    /// `uniform(2s)`: the smallest domain on which every `pᵢ ≤ 1/(2s)`.
    Uniform,
    Instance,
    Off,
}

/// Typed `--override` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Overrides {
    pub l: Option<u64>,
    /// `None` lifts the cap.
    pub l_cap: Option<u64>,
    pub c: f64,
    pub tol: f64,
    pub timing: bool,
    pub trial: Option<u64>,
    pub policy: NormFailurePolicy,
    pub allow_out_of_regime: bool,
    pub s_list: Option<Vec<u64>>,
    pub s_star: Option<u64>,
    pub testers: Vec<Tester>,
    pub tester_l: u64,
    pub weights: WeightChoice,
    pub bridge: BridgeChoice,
    pub bridge_s: Vec<u64>,
    pub permute: bool,
    pub max_doublings: u32,
}

impl Default for Overrides {
    fn default() -> Self {
        Self {
            l: None,
            l_cap: Some(DEFAULT_L_CAP),
            c: DEFAULT_LOWER_BOUND_C,
            tol: DEFAULT_DISJOINT_TOL,
            timing: false,
            trial: None,
            policy: NormFailurePolicy::default(),
            allow_out_of_regime: false,
            s_list: None,
            s_star: None,
            testers: Tester::ALL.to_vec(),
            tester_l: DEFAULT_TESTER_L,
            weights: WeightChoice::P,
            bridge: BridgeChoice::Uniform,
            bridge_s: vec![9, 12],
            permute: false,
            max_doublings: 10,
        }
    }
}

fn bad(key: &str, value: &str, expected: &str) -> CliError {
    CliError::Usage(format!("override {key}={value}: expected {expected}"))
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value, "a number"))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(bad(key, value, "true or false")),
    }
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| num(key, v.trim())).collect()
}

impl Overrides {
    pub fn parse<S: AsRef<str>>(pairs: &[S]) -> Result<Self> {
        let mut o = Self::default();
        for pair in pairs {
            let pair = pair.as_ref();
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("override `{pair}` is not key=value")))?;
            match key {
                "l" => o.l = Some(num(key, value)?),
                "l_cap" => {
                    o.l_cap = match value {
                        "none" | "0" => None,
                        v => Some(num(key, v)?),
                    }
                }
                "c" => o.c = num(key, value)?,
                "tol" => o.tol = num(key, value)?,
                "timing" => o.timing = flag(key, value)?,
                "trial" => o.trial = Some(num(key, value)?),
                "policy" => {
                    o.policy = match value {
                        "skip" | "skip-to-collision" => NormFailurePolicy::SkipToCollision,
                        "abort" => NormFailurePolicy::Abort,
                        _ => return Err(bad(key, value, "skip or abort")),
                    }
                }
                "allow_out_of_regime" => o.allow_out_of_regime = flag(key, value)?,
                "s_list" => o.s_list = Some(list(key, value)?),
                "s_star" => o.s_star = Some(num(key, value)?),
                "testers" => {
                    o.testers = value
                        .split(',')
                        .map(|t| Tester::parse(t.trim()).ok_or_else(|| bad(key, t, "a tester name")))
                        .collect::<Result<_>>()?
                }
                "tester_l" => o.tester_l = num(key, value)?,
                "a" => {
                    o.weights = match value {
                        "p" => WeightChoice::P,
                        "zero" => WeightChoice::Zero,
                        path => WeightChoice::File(path.into()),
                    }
                }
                "bridge" => {
                    o.bridge = match value {
                        "uniform" => BridgeChoice::Uniform,
                        "instance" => BridgeChoice::Instance,
                        "off" => BridgeChoice::Off,
                        _ => return Err(bad(key, value, "uniform, instance or off")),
                    }
                }
                "bridge_s" => o.bridge_s = list(key, value)?,
                "permute" => o.permute = flag(key, value)?,
                "max_doublings" => o.max_doublings = num(key, value)?,
                _ => return Err(CliError::Usage(format!("unknown override key `{key}`"))),
            }
        }
        if o.l.is_some_and(|l| l == 0) || o.c <= 0.0 || !(o.tol >= 0.0) {
            return Err(CliError::Usage("overrides l and c must be positive, tol non-negative".into()));
        }
        Ok(o)
    }
}

/// Everything that determines an experiment's output.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub command: CommandKind,
    pub instance: Instance,
    pub s: SChoice,
    pub trials: u64,
    pub master_seed: u64,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub overrides: Overrides,
}

impl ExperimentSpec {
    /// A spec with every optional field at its default.
    pub fn new(command: CommandKind, instance: Instance) -> Self {
        Self {
            command,
            instance,
            s: SChoice::Default,
            trials: command.default_trials(),
            master_seed: 0,
            output: None,
            format: Format::Csv,
            overrides: Overrides::default(),
        }
    }
}

impl TryFrom<Cli> for ExperimentSpec {
    type Error = CliError;

    fn try_from(cli: Cli) -> Result<Self> {
        let (command, args) = match cli.command {
            Command::Norms(a) => (CommandKind::Norms, a),
            Command::Generate(a) => (CommandKind::Generate, a),
            Command::Distinguish(a) => (CommandKind::Distinguish, a),
            Command::Closeness(a) => (CommandKind::Closeness, a),
            Command::Sweep(a) => (CommandKind::Sweep, a),
            Command::Concentration(a) => (CommandKind::Concentration, a),
            Command::Lowerbound(a) => (CommandKind::Lowerbound, a),
        };
        Ok(Self {
            command,
            instance: args.instance.parse()?,
            s: args.s.as_deref().map_or(Ok(SChoice::Default), str::parse)?,
            trials: args.trials.unwrap_or(command.default_trials()),
            master_seed: args.seed,
            output: args.out,
            format: args.format,
            overrides: Overrides::parse(&args.overrides)?,
        })
    }
}
