//! Flat run configuration shared by every subcommand.
//!
//! The same keys are accepted as long flags (`c_local` ↔ `--c-local`) and in a
//! TOML file; flags win over the file, the file over built-in defaults. Each
//! run records the values it actually used, with their origin, in a config
//! echo that can be fed back through `--config`.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::ValueEnum;
use serde::{Deserialize, Deserializer, Serialize};

use crate::CliError;

fn one_or_many<'de, D, T>(de: D) -> Result<Option<Vec<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(Option::<OneOrMany<T>>::deserialize(de)?.map(|v| match v {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(xs) => xs,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftKind {
    None,
    Fixed,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Iid,
    Ar1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleKind {
    Plain,
    Lrv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Truncated,
    Bartlett,
    Parzen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    NoAdjust,
    Inflate,
    Lrv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Every configurable key. All optional; each command picks what it needs.
#[derive(Debug, Clone, Default, clap::Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flags {
    /// TOML file with any of the keys below
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Worker threads (results do not depend on it)
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,

    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; stdout when absent. The config echo goes next to it
    #[arg(long)]
    pub out: Option<String>,
    /// Input data (detect)
    #[arg(long)]
    pub data: Option<String>,
    /// Input data starts with a header row
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub header: Option<bool>,
    /// Realized shifts as JSON (generate)
    #[arg(long)]
    pub sidecar: Option<String>,
    #[arg(long)]
    pub format: Option<ReportFormat>,
    /// Tidy long-format CSV (experiments)
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub plot_data: Option<bool>,

    /// Number of streams
    #[arg(long)]
    pub d: Option<usize>,
    /// Training length
    #[arg(long)]
    pub m: Option<usize>,
    /// Window length
    #[arg(long)]
    pub h: Option<usize>,
    /// Monitoring period as a multiple of m
    #[arg(long)]
    pub t_tilde: Option<f64>,
    /// Monitoring period in steps (overrides t_tilde)
    #[arg(long)]
    pub steps: Option<usize>,
    /// h/m for the limit process (calibrate)
    #[arg(long)]
    pub beta: Option<f64>,
    /// Brownian increments over the limit grid
    #[arg(long)]
    pub increments: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Replications for threshold calibration inside experiments
    #[arg(long)]
    pub calibration_reps: Option<usize>,

    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many")]
    pub alpha: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many")]
    pub c_local: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many")]
    pub c_global: Option<Vec<f64>>,

    /// Total series length including training
    #[arg(long)]
    pub total_length: Option<usize>,
    /// Changepoint (absolute time of the first shifted observation)
    #[arg(long)]
    pub tau: Option<usize>,
    /// Number of affected streams (the first p)
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many")]
    pub p: Option<Vec<usize>>,
    #[arg(long)]
    pub shift: Option<ShiftKind>,
    /// Shift size (delta, or eta for random shifts)
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many")]
    pub delta: Option<Vec<f64>>,
    #[arg(long)]
    pub noise: Option<NoiseKind>,
    /// AR(1) coefficient
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many")]
    pub phi: Option<Vec<f64>>,

    #[arg(long)]
    pub scale: Option<ScaleKind>,
    #[arg(long)]
    pub kernel: Option<KernelKind>,
    /// Long-run variance bandwidth; ⌈m^(1/3)⌉ when absent
    #[arg(long)]
    pub bandwidth: Option<usize>,

    /// Training sizes (training study)
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many")]
    pub training_sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many")]
    pub methods: Option<Vec<MethodKind>>,
    /// Reference window length (bandwidth)
    #[arg(long)]
    pub h0: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    /// Reference shift, a number or "auto"
    #[arg(long)]
    pub delta0: Option<String>,
}

impl Flags {
    /// Reads the `--config` file, if any.
    pub fn file_layer(&self) -> Result<Flags, CliError> {
        let Some(path) = &self.config else { return Ok(Flags::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("config: cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("config: {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Origin {
    Flag,
    File,
    Default(&'static str),
    Derived(&'static str),
}

/// Resolves keys across flags, file and defaults and records the outcome.
pub struct Resolver {
    flags: Flags,
    file: Flags,
    entries: Vec<(&'static str, toml::Value, Origin)>,
    command: String,
}

macro_rules! key {
    ($r:expr, $k:ident, $default:expr, $why:expr) => {
        $r.pick(stringify!($k), $r.flags().$k.clone(), $r.file().$k.clone(), $default, $why)
    };
}
pub(crate) use key;

macro_rules! opt_key {
    ($r:expr, $k:ident) => {
        $r.pick_opt(stringify!($k), $r.flags().$k.clone(), $r.file().$k.clone())
    };
}
pub(crate) use opt_key;

impl Resolver {
    pub fn new(command: impl Into<String>, flags: Flags) -> Result<Self, CliError> {
        let file = flags.file_layer()?;
        Ok(Self { flags, file, entries: Vec::new(), command: command.into() })
    }

    pub fn flags(&self) -> &Flags {
        &self.flags
    }

    pub fn file(&self) -> &Flags {
        &self.file
    }

    pub fn pick<T: Serialize + Clone>(
        &mut self,
        key: &'static str,
        flag: Option<T>,
        file: Option<T>,
        default: T,
        why: &'static str,
    ) -> T {
        let (v, origin) = match (flag, file) {
            (Some(v), _) => (v, Origin::Flag),
            (None, Some(v)) => (v, Origin::File),
            (None, None) => (default, Origin::Default(why)),
        };
        self.record(key, &v, origin);
        v
    }

    pub fn pick_opt<T: Serialize + Clone>(&mut self, key: &'static str, flag: Option<T>, file: Option<T>) -> Option<T> {
        let (v, origin) = match (flag, file) {
            (Some(v), _) => (v, Origin::Flag),
            (None, Some(v)) => (v, Origin::File),
            (None, None) => return None,
        };
        self.record(key, &v, origin);
        Some(v)
    }

    /// Records a value computed from other keys (or the data).
    pub fn derived<T: Serialize>(&mut self, key: &'static str, v: &T, why: &'static str) {
        self.record(key, v, Origin::Derived(why));
    }

    fn record<T: Serialize>(&mut self, key: &'static str, v: &T, origin: Origin) {
        let value = toml::Value::try_from(v).expect("config values serialize");
        let value = match value {
            toml::Value::Array(mut xs) if xs.len() == 1 => xs.pop().expect("one element"),
            other => other,
        };
        self.entries.retain(|(k, _, _)| *k != key);
        self.entries.push((key, value, origin));
    }

    /// TOML document listing every value used, with its origin in a comment.
    /// Derived values are commented out so that feeding the echo back does
    /// not pin them.
    pub fn echo(&self) -> String {
        let mut s = format!("# dmosum {}\n", self.command);
        for (key, value, origin) in &self.entries {
            let line = format!("{key} = {value}");
            let _ = match origin {
                Origin::Flag => writeln!(s, "{line}  # flag"),
                Origin::File => writeln!(s, "{line}  # config file"),
                Origin::Default(why) => writeln!(s, "{line}  # default: {why}"),
                Origin::Derived(why) => writeln!(s, "# {line}  ({why})"),
            };
        }
        s
    }
}

/// Single value from a key that may hold a list.
pub fn single<T: Copy>(key: &'static str, v: &[T]) -> Result<T, CliError> {
    match v {
        [x] => Ok(*x),
        _ => Err(CliError::Config(format!("{key}: expected a single value, got {}", v.len()))),
    }
}
