//! Command-line flags, the JSON config file and environment overrides,
//! merged into one [`RunConfig`].
//!
//! Every flag has a config-file key of the same name (with `-` replaced by
//! `_`). Precedence is flags, then environment, then file, then defaults.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

pub const ENV_OUT_DIR: &str = "CVDISCORD_OUT_DIR";
pub const ENV_THREADS: &str = "CVDISCORD_THREADS";

#[derive(Debug, Parser)]
#[command(name = "cvdiscord", version, about = "Simulate homodyne records and test them for conditional peak separation")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: CommandArgs,
}

#[derive(Debug, Default, Args, Serialize)]
pub struct GlobalArgs {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Directory for all outputs and the run manifest.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Worker threads for sampling and bootstrap.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Secondary artifacts to write next to the primary output.
    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub emit: Option<Emit>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(untagged)]
pub enum CommandArgs {
    /// Draw homodyne records from a modulation scheme or a Gaussian state.
    Simulate(SimulateArgs),
    /// Split records on Alice's outcome and test Bob's conditionals.
    Verify(VerifyArgs),
    /// Peak separation against modulation depth, with the analytic curve.
    Sweep(SweepArgs),
    /// Fock-space states that bound what peak separation can show.
    Counterexample(CounterexampleArgs),
    /// Run the command named in the config file.
    Run,
}

impl CommandArgs {
    pub fn name(&self) -> Option<CommandName> {
        match self {
            CommandArgs::Simulate(_) => Some(CommandName::Simulate),
            CommandArgs::Verify(_) => Some(CommandName::Verify),
            CommandArgs::Sweep(_) => Some(CommandName::Sweep),
            CommandArgs::Counterexample(_) => Some(CommandName::Counterexample),
            CommandArgs::Run => None,
        }
    }
}

#[derive(Debug, Default, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeName>,
    /// Gaussian state JSON to sample instead of a scheme.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<PathBuf>,
    /// Modulation depth on both quadratures (phase quadrature for switched_phase).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth_x: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth_p: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duty: Option<f64>,
    /// Beam-splitter amplitude transmissivity.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Vacuum quadrature variance.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
    /// Records per phase pair.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// `all`, `default`, or `θA,θB[;θA,θB…]` in radians (`pi/2` allowed).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<String>,
    /// Threshold stored with switched_phase records.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Record file name, relative to the output directory.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub records: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    /// `present` (default), `all`, or `θA,θB[;θA,θB…]`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<String>,
    /// Split threshold on Alice's outcome; defaults to the value stored
    /// with the records, else 0.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_min: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Bootstrap replicates per peak.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    /// Fixed bin count instead of Freedman–Diaconis.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodName>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Serialize)]
pub struct SweepArgs {
    /// `a:b:n`, a comma list, or a single depth.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depths: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodName>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Serialize)]
pub struct CounterexampleArgs {
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub example: Option<Example>,
    /// Coherent amplitude of the zero-discord example.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nbar: Option<f64>,
    /// Squeeze parameter of the hidden-discord example.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim_b: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum CommandName {
    Simulate,
    Verify,
    Sweep,
    Counterexample,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Emit {
    Json,
    Csv,
    #[default]
    Both,
}

impl Emit {
    pub fn json(self) -> bool {
        matches!(self, Emit::Json | Emit::Both)
    }

    pub fn csv(self) -> bool {
        matches!(self, Emit::Csv | Emit::Both)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SchemeName {
    Gaussian,
    SwitchedNoise,
    SwitchedPhase,
    #[value(alias = "async")]
    #[serde(alias = "async")]
    AsyncSine,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Gaussian,
    Mixture,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum MethodName {
    LogPolyFit,
    BinParabolic,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Example {
    ZeroDiscord,
    HiddenDiscord,
    #[default]
    Both,
}

/// Fully merged settings. Unset optional fields fall back to per-command
/// defaults when the command runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: CommandName,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default)]
    pub emit: Emit,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duty: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub records: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodName>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depths: Option<String>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example: Option<Example>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nbar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim_b: Option<usize>,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from(".")
}

impl RunConfig {
    /// Resolves `path` against the output directory unless it is absolute.
    pub fn output_path(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.out_dir.join(path)
        }
    }
}

/// Environment values that override the config file.
#[derive(Clone, Debug, Default)]
pub struct EnvOverrides {
    pub out_dir: Option<String>,
    pub threads: Option<String>,
}

impl EnvOverrides {
    pub fn from_env() -> Self {
        EnvOverrides {
            out_dir: std::env::var(ENV_OUT_DIR).ok().filter(|s| !s.is_empty()),
            threads: std::env::var(ENV_THREADS).ok().filter(|s| !s.is_empty()),
        }
    }

    fn to_map(&self) -> Result<Map<String, Value>, CliError> {
        let mut m = Map::new();
        if let Some(d) = &self.out_dir {
            m.insert("out_dir".into(), Value::String(d.clone()));
        }
        if let Some(t) = &self.threads {
            let n: usize = t
                .trim()
                .parse()
                .map_err(|_| CliError::Validation(format!("{ENV_THREADS} must be a positive integer, got {t:?}")))?;
            m.insert("threads".into(), n.into());
        }
        Ok(m)
    }
}

fn object(v: Value, what: &str) -> Result<Map<String, Value>, CliError> {
    match v {
        Value::Object(m) => Ok(m),
        Value::Null => Ok(Map::new()),
        _ => Err(CliError::Validation(format!("{what} must be a JSON object"))),
    }
}

fn read_config_file(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("config {} is not valid JSON: {e}", path.display())))?;
    object(v, "config file")
}

/// Layers defaults < file < environment < flags.
pub fn resolve(cli: &Cli, env: &EnvOverrides) -> Result<RunConfig, CliError> {
    let mut merged = match &cli.global.config {
        Some(p) => read_config_file(p)?,
        None => Map::new(),
    };
    merged.extend(env.to_map()?);
    let to_map = |v: Result<Value, serde_json::Error>| {
        v.map_err(|e| CliError::Validation(e.to_string())).and_then(|v| object(v, "flags"))
    };
    merged.extend(to_map(serde_json::to_value(&cli.global))?);
    if !matches!(cli.command, CommandArgs::Run) {
        merged.extend(to_map(serde_json::to_value(&cli.command))?);
    }
    if let Some(name) = cli.command.name() {
        merged.insert("command".into(), serde_json::to_value(name).expect("enum serializes"));
    } else if !merged.contains_key("command") {
        return Err(CliError::Validation("`run` needs a config file with a \"command\" key".into()));
    }
    let cfg: RunConfig = serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Validation(format!("invalid configuration: {e}")))?;
    if cfg.threads == Some(0) {
        return Err(CliError::Validation("threads must be at least 1".into()));
    }
    Ok(cfg)
}
