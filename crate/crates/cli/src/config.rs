//! Flag and config-file resolution.
//!
//! A JSON config file may set any flag by its snake_case name, e.g.
//!
//! ```json
//! { "mu_p": 600, "n": [64, 128, 256], "eta": [0.5, 0.8], "strategy": "heterodyne" }
//! ```
//!
//! List-valued parameters accept a scalar or an array in the file and a
//! comma-separated list on the command line. Flags override the file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use qpuk::OpticalChannel;
use serde::{Deserialize, Serialize};

/// Parameter flags shared by `security-check`, `sweep` and `simulate`.
#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    /// Mean probe photon number μ_P (list allowed for sweeps).
    #[arg(long)]
    pub mu_p: Option<String>,
    /// Number of phases N (list allowed for sweeps).
    #[arg(long)]
    pub n: Option<String>,
    /// Response-to-probe photon ratio μ_R/μ_P (list allowed for sweeps).
    #[arg(long, conflicts_with = "channel_file")]
    pub mu_r_ratio: Option<String>,
    /// JSON file describing the optical channel; sets μ_R/μ_P and arg(F).
    #[arg(long)]
    pub channel_file: Option<PathBuf>,
    /// Homodyne efficiency η (list allowed for sweeps).
    #[arg(long)]
    pub eta: Option<String>,
    /// Bin width in units of the homodyne noise, Δ/σ (list allowed for sweeps).
    #[arg(long)]
    pub delta_bar: Option<String>,
    /// Acceptance half-width ε (list allowed for sweeps).
    #[arg(long)]
    pub epsilon: Option<String>,
    /// Confidence parameter ζ of the sample-size rule.
    #[arg(long)]
    pub zeta: Option<f64>,
    /// Global response phase arg(F) in radians.
    #[arg(long, allow_negative_numbers = true)]
    pub arg_f: Option<f64>,
    /// Adversary: honest, oracle, heterodyne, fixed-error:P or fixed-error-adjacent:P.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Number of simulated sessions.
    #[arg(long)]
    pub sessions: Option<usize>,
    /// Queries per session; defaults to the sample size required by ε and ζ.
    #[arg(long)]
    pub m: Option<u64>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON config file supplying defaults for any of these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    mu_p: Option<OneOrMany<f64>>,
    n: Option<OneOrMany<usize>>,
    mu_r_ratio: Option<OneOrMany<f64>>,
    channel_file: Option<PathBuf>,
    eta: Option<OneOrMany<f64>>,
    delta_bar: Option<OneOrMany<f64>>,
    epsilon: Option<OneOrMany<f64>>,
    zeta: Option<f64>,
    arg_f: Option<f64>,
    strategy: Option<String>,
    sessions: Option<usize>,
    m: Option<u64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

/// Which command the parameters are resolved for; selects the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    SecurityCheck,
    Sweep,
    Simulate,
}

/// Fully resolved parameters, echoed into every output for provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Params {
    pub mu_p: Vec<f64>,
    pub n: Vec<usize>,
    pub mu_r_ratio: Vec<f64>,
    pub eta: Vec<f64>,
    pub delta_bar: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub zeta: f64,
    pub arg_f: f64,
    pub strategy: String,
    pub sessions: usize,
    pub m: Option<u64>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel_file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel: Option<OpticalChannel>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

/// One point of the parameter space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub mu_p: f64,
    pub n: usize,
    pub mu_r_ratio: f64,
    pub eta: f64,
    pub delta_bar: f64,
    pub epsilon: f64,
}

pub const DEFAULT_MU_P: f64 = 600.0;
pub const DEFAULT_RATIO: f64 = 0.2;
pub const DEFAULT_ZETA: f64 = 1e-3;
pub const CHECK_EPSILON: f64 = 1e-3;
pub const DESK_EPSILON: f64 = 5e-3;
pub const DEFAULT_SESSIONS: usize = 50;
pub const DEFAULT_SEED: u64 = 1;

/// Parses `"1,2, 3"` into numbers.
pub fn parse_list<T: std::str::FromStr>(flag: &str, text: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|e| anyhow::anyhow!("--{flag}: cannot parse `{s}`: {e}"))
        })
        .collect::<Result<Vec<_>>>()
        .and_then(|v| {
            if v.is_empty() {
                bail!("--{flag}: empty list")
            } else {
                Ok(v)
            }
        })
}

fn pick<T>(
    flag: Option<Vec<T>>,
    file: Option<OneOrMany<T>>,
    default: impl FnOnce() -> Vec<T>,
) -> Vec<T> {
    flag.or_else(|| file.map(OneOrMany::into_vec))
        .unwrap_or_else(default)
}

fn load_file_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

pub fn load_channel(path: &Path) -> Result<OpticalChannel> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading channel file {}", path.display()))?;
    let channel: OpticalChannel = serde_json::from_str(&text)
        .with_context(|| format!("parsing channel file {}", path.display()))?;
    channel
        .validate()
        .with_context(|| format!("channel file {}", path.display()))?;
    Ok(channel)
}

/// Log-spaced integers from `lo` to `hi`. Rounding collisions are resolved
/// by bumping to the previous value plus one, so all `count` values are distinct.
pub fn log_spaced_n(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    if count == 1 {
        return vec![lo];
    }
    let ratio = (hi as f64 / lo as f64).ln();
    let mut out: Vec<usize> = Vec::with_capacity(count);
    for i in 0..count {
        let x = (lo as f64 * (ratio * i as f64 / (count - 1) as f64).exp()).round() as usize;
        let x = match out.last() {
            Some(&prev) if x <= prev => prev + 1,
            _ => x,
        };
        out.push(x);
    }
    out
}

fn sorted_unique<T: Copy + PartialOrd>(mut v: Vec<T>) -> Vec<T> {
    v.sort_by(|a, b| a.partial_cmp(b).expect("values were checked finite"));
    v.dedup();
    v
}

impl ParamArgs {
    pub fn resolve(&self, kind: CommandKind) -> Result<Params> {
        let file = match &self.config {
            Some(path) => load_file_config(path)?,
            None => FileConfig::default(),
        };
        let list = |flag: &str, v: &Option<String>| -> Result<Option<Vec<f64>>> {
            v.as_deref().map(|s| parse_list::<f64>(flag, s)).transpose()
        };
        let is_sweep = kind == CommandKind::Sweep;

        let mu_p = pick(list("mu-p", &self.mu_p)?, file.mu_p, || vec![DEFAULT_MU_P]);
        let n_flag = self
            .n
            .as_deref()
            .map(|s| parse_list::<usize>("n", s))
            .transpose()?;
        let n = match n_flag.or_else(|| file.n.map(OneOrMany::into_vec)) {
            Some(v) => v,
            None if is_sweep => log_spaced_n(4, 1024, 64),
            None => bail!("--n is required"),
        };
        let eta = pick(list("eta", &self.eta)?, file.eta, || {
            if is_sweep {
                vec![0.5, 0.65, 0.8]
            } else {
                vec![0.5]
            }
        });
        let delta_bar = pick(list("delta-bar", &self.delta_bar)?, file.delta_bar, || {
            if is_sweep {
                vec![1.0, 2.0, 3.0]
            } else {
                vec![2.0]
            }
        });
        let epsilon = pick(
            list("epsilon", &self.epsilon)?,
            file.epsilon,
            || match kind {
                CommandKind::SecurityCheck => vec![CHECK_EPSILON],
                CommandKind::Sweep => vec![5e-4, 1e-3, 2e-3],
                CommandKind::Simulate => vec![DESK_EPSILON],
            },
        );

        let (channel_file, file_ratio) = if self.channel_file.is_some() {
            (self.channel_file.clone(), None)
        } else if self.mu_r_ratio.is_some() {
            (None, None)
        } else {
            if file.channel_file.is_some() && file.mu_r_ratio.is_some() {
                bail!("config sets both mu_r_ratio and channel_file");
            }
            (file.channel_file, file.mu_r_ratio)
        };
        let channel = channel_file.as_deref().map(load_channel).transpose()?;
        let mut arg_f = self.arg_f.or(file.arg_f);
        let mu_r_ratio = match &channel {
            Some(ch) => {
                if let Some(a) = arg_f {
                    if a != ch.arg_f {
                        bail!(
                            "arg_f {a} conflicts with the channel file's arg_f {}",
                            ch.arg_f
                        );
                    }
                }
                arg_f = Some(ch.arg_f);
                for w in ch.warnings() {
                    log::warn!("channel: {w:?}");
                }
                vec![ch.enhancement * ch.f_squared()]
            }
            None => pick(list("mu-r-ratio", &self.mu_r_ratio)?, file_ratio, || {
                vec![DEFAULT_RATIO]
            }),
        };

        let params = Params {
            mu_p: sorted_unique(mu_p),
            n: sorted_unique(n),
            mu_r_ratio: sorted_unique(mu_r_ratio),
            eta: sorted_unique(eta),
            delta_bar: sorted_unique(delta_bar),
            epsilon: sorted_unique(epsilon),
            zeta: self.zeta.or(file.zeta).unwrap_or(DEFAULT_ZETA),
            arg_f: arg_f.unwrap_or(0.0),
            strategy: self
                .strategy
                .clone()
                .or(file.strategy)
                .unwrap_or_else(|| "honest".into()),
            sessions: self.sessions.or(file.sessions).unwrap_or(DEFAULT_SESSIONS),
            m: self.m.or(file.m),
            seed: self.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            channel_file,
            channel,
            out: self.out.clone().or(file.out),
        };
        params.validate(kind)?;
        Ok(params)
    }
}

impl Params {
    fn validate(&self, kind: CommandKind) -> Result<()> {
        let finite = |name: &str, v: &[f64]| -> Result<()> {
            if let Some(x) = v.iter().find(|x| !x.is_finite()) {
                bail!("{name}: non-finite value {x}");
            }
            Ok(())
        };
        finite("mu_p", &self.mu_p)?;
        finite("mu_r_ratio", &self.mu_r_ratio)?;
        finite("eta", &self.eta)?;
        finite("delta_bar", &self.delta_bar)?;
        finite("epsilon", &self.epsilon)?;
        if let Some(r) = self.mu_r_ratio.iter().find(|&&r| r < 0.0) {
            bail!("mu_r_ratio must be >= 0, got {r}");
        }
        if kind == CommandKind::Sweep {
            if let Some(r) = self.mu_r_ratio.iter().find(|&&r| r > 0.7) {
                bail!("sweep ratios must lie in [0, 0.7], got {r}");
            }
        } else {
            for (name, len) in [
                ("mu_p", self.mu_p.len()),
                ("n", self.n.len()),
                ("mu_r_ratio", self.mu_r_ratio.len()),
                ("eta", self.eta.len()),
                ("delta_bar", self.delta_bar.len()),
                ("epsilon", self.epsilon.len()),
            ] {
                if len != 1 {
                    bail!("{name}: this command takes a single value, got {len}");
                }
            }
        }
        if kind == CommandKind::Simulate && self.sessions == 0 {
            bail!("--sessions must be at least 1");
        }
        if !self.arg_f.is_finite() {
            bail!("arg_f must be finite");
        }
        Ok(())
    }

    /// The single point of a non-sweep command.
    pub fn point(&self) -> Point {
        Point {
            mu_p: self.mu_p[0],
            n: self.n[0],
            mu_r_ratio: self.mu_r_ratio[0],
            eta: self.eta[0],
            delta_bar: self.delta_bar[0],
            epsilon: self.epsilon[0],
        }
    }
}
