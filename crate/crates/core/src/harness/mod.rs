//! Experiment orchestration: configuration files, seed lists, parallel runs
//! and CSV output.
//!
//! A configuration file is TOML with a few top-level keys and a `[params]`
//! table whose fields depend on the experiment kind:
//!
//! ```toml
//! kind = "bounds_sweep"
//! seeds = "0..4"      # also "0..=3", "7" or "1,5,9"
//! jobs = 2
//! out = "results"
//!
//! [params]
//! n = 3
//! c_env = 0.1
//! ```
//!
//! Unknown keys are errors at every level. Missing keys take the defaults of
//! the parameter structs below. Every CSV file starts with a metadata block
//! holding the crate version, the experiment, the seeds and the effective
//! configuration (without `out` and `jobs`, which do not affect results), so
//! [`ExperimentConfig::from_metadata`] can rebuild the run from any output.

pub mod cli;
pub mod csv_out;
pub mod experiments;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learn::{SharingMode, TrainConfig};
use crate::mailp::LearningFunction;
use crate::pursuit::PursuitConfig;

pub use csv_out::{emit_csv, format_float, parse_csv, render_csv, Value};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("check failed: {0}")]
    Check(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Domain(_) => 3,
            HarnessError::Check(_) => 4,
            HarnessError::Io { .. } => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

macro_rules! domain_from {
    ($($t:ty),*) => {$(
        impl From<$t> for HarnessError {
            fn from(e: $t) -> Self {
                HarnessError::Domain(e.to_string())
            }
        }
    )*};
}

domain_from!(
    crate::mailp::MailpError,
    crate::bounds::BoundsError,
    crate::posg::PosgError,
    crate::pursuit::PursuitError,
    crate::learn::LearnError
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    BoundsSweep,
    MailpSim,
    MailpVerify,
    PosgProps,
    PursuitTrain,
    PursuitEval,
    PursuitRandom,
}

impl Kind {
    pub const ALL: [Kind; 7] = [
        Kind::BoundsSweep,
        Kind::MailpSim,
        Kind::MailpVerify,
        Kind::PosgProps,
        Kind::PursuitTrain,
        Kind::PursuitEval,
        Kind::PursuitRandom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::BoundsSweep => "bounds_sweep",
            Kind::MailpSim => "mailp_sim",
            Kind::MailpVerify => "mailp_verify",
            Kind::PosgProps => "posg_props",
            Kind::PursuitTrain => "pursuit_train",
            Kind::PursuitEval => "pursuit_eval",
            Kind::PursuitRandom => "pursuit_random",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ordered list of run seeds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedList(pub Vec<u64>);

impl FromStr for SeedList {
    type Err = HarnessError;

    /// Accepts `a..b` (half-open), `a..=b`, a single seed, or a comma list.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || HarnessError::Config(format!("malformed seed list {s:?}"));
        let num = |t: &str| t.trim().parse::<u64>().map_err(|_| bad());
        let s = s.trim();
        let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..=") {
            (num(a)?..=num(b)?).collect()
        } else if let Some((a, b)) = s.split_once("..") {
            (num(a)?..num(b)?).collect()
        } else {
            s.split(',').map(num).collect::<Result<_>>()?
        };
        if seeds.is_empty() {
            return Err(HarnessError::Config(format!("seed list {s:?} is empty")));
        }
        Ok(SeedList(seeds))
    }
}

impl fmt::Display for SeedList {
    /// Contiguous lists print as `a..b`, others as comma lists.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = &self.0;
        let contiguous = v.len() > 1 && v.windows(2).all(|w| w[1] == w[0].wrapping_add(1));
        if contiguous && v[v.len() - 1] < u64::MAX {
            write!(f, "{}..{}", v[0], v[v.len() - 1] + 1)
        } else {
            let parts: Vec<String> = v.iter().map(u64::to_string).collect();
            f.write_str(&parts.join(","))
        }
    }
}

impl Default for SeedList {
    fn default() -> Self {
        SeedList(vec![0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsSweepParams {
    pub n: usize,
    pub c_env: f64,
    pub i0: f64,
    pub eps: f64,
    /// Defaults to [`crate::bounds::default_k_grid`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_grid: Option<Vec<f64>>,
    /// Also simulate the homogeneous process at every grid point.
    pub simulate: bool,
    pub learning_fn: LearningFunction,
    pub max_steps: u64,
}

impl Default for BoundsSweepParams {
    fn default() -> Self {
        BoundsSweepParams {
            n: 3,
            c_env: 0.1,
            i0: 0.01,
            eps: 0.001,
            k_grid: None,
            simulate: false,
            learning_fn: LearningFunction::Identity,
            max_steps: 1_000_000,
        }
    }
}

/// Homogeneous MAILP run; `n = 1` runs a single agent learning only about the
/// environment with `K_env = k_star`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MailpSimParams {
    pub n: usize,
    pub c_env: f64,
    pub k_star: f64,
    pub learning_fn: LearningFunction,
    pub i0: f64,
    pub eps: f64,
    pub max_steps: u64,
}

impl Default for MailpSimParams {
    fn default() -> Self {
        MailpSimParams {
            n: 3,
            c_env: 0.1,
            k_star: 0.5,
            learning_fn: LearningFunction::Identity,
            i0: 0.01,
            eps: 0.001,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MailpVerifyParams {
    pub single_k: Vec<f64>,
    pub single_i0: Vec<f64>,
    pub single_eps: Vec<f64>,
    pub multi_n: Vec<usize>,
    pub multi_k: Vec<f64>,
    pub multi_learning_fns: Vec<LearningFunction>,
    pub c_env: f64,
    pub i0: f64,
    pub eps: f64,
    /// Random recurrences per seed, each checked in both cases.
    pub recurrence_cases: usize,
    pub recurrence_max_t: u32,
    pub max_steps: u64,
}

impl Default for MailpVerifyParams {
    fn default() -> Self {
        MailpVerifyParams {
            single_k: vec![0.07, 0.13, 0.29, 0.41, 0.67],
            single_i0: vec![0.0, 0.05, 0.2, 0.45, 0.7],
            single_eps: vec![0.003, 0.011, 0.04, 0.09, 0.17],
            multi_n: vec![2, 3, 5],
            multi_k: (1..=10).map(|k| k as f64 / 10.0).collect(),
            multi_learning_fns: vec![
                LearningFunction::Identity,
                LearningFunction::Scaled { beta: 0.5 },
            ],
            c_env: 0.1,
            i0: 0.01,
            eps: 0.001,
            recurrence_cases: 100,
            recurrence_max_t: 1000,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PosgPropsParams {
    pub max_agents: usize,
    pub max_size: usize,
    pub horizon: usize,
    pub min_instances: usize,
}

impl Default for PosgPropsParams {
    fn default() -> Self {
        PosgPropsParams {
            max_agents: 3,
            max_size: 3,
            horizon: 3,
            min_instances: 1000,
        }
    }
}

/// `env.seed` is replaced by each run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PursuitRandomParams {
    pub env: PursuitConfig,
    pub episodes: usize,
}

impl Default for PursuitRandomParams {
    fn default() -> Self {
        PursuitRandomParams {
            env: PursuitConfig::default(),
            episodes: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub name: String,
    pub mode: SharingMode,
    pub agent_indication: bool,
}

/// Each variant trains once per seed. `train.mode`, `train.agent_indication`
/// and `train.seed` are replaced by the variant and the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PursuitTrainParams {
    pub env: PursuitConfig,
    pub train: TrainConfig,
    pub variants: Vec<Variant>,
    /// Write `policy_<variant>_seed<seed>.json` for every run.
    pub save_policies: bool,
    /// Fraction of the final reward used for the episodes-to-target column.
    pub target_fraction: f64,
}

impl Default for PursuitTrainParams {
    fn default() -> Self {
        PursuitTrainParams {
            env: PursuitConfig::small(),
            train: TrainConfig::default(),
            variants: vec![
                Variant {
                    name: "shared".into(),
                    mode: SharingMode::Shared,
                    agent_indication: false,
                },
                Variant {
                    name: "independent".into(),
                    mode: SharingMode::Independent,
                    agent_indication: false,
                },
            ],
            save_policies: false,
            target_fraction: 0.9,
        }
    }
}

/// Greedy evaluation of a saved policy, once per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PursuitEvalParams {
    pub env: PursuitConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<PathBuf>,
    pub episodes: u64,
    /// Dump the first episode of every seed as `trajectory_seed<seed>.jsonl`.
    pub trajectory: bool,
}

impl Default for PursuitEvalParams {
    fn default() -> Self {
        PursuitEvalParams {
            env: PursuitConfig::small(),
            policy: None,
            episodes: 100,
            trajectory: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    BoundsSweep(BoundsSweepParams),
    MailpSim(MailpSimParams),
    MailpVerify(MailpVerifyParams),
    PosgProps(PosgPropsParams),
    PursuitTrain(PursuitTrainParams),
    PursuitEval(PursuitEvalParams),
    PursuitRandom(PursuitRandomParams),
}

impl Params {
    pub fn default_for(kind: Kind) -> Params {
        match kind {
            Kind::BoundsSweep => Params::BoundsSweep(Default::default()),
            Kind::MailpSim => Params::MailpSim(Default::default()),
            Kind::MailpVerify => Params::MailpVerify(Default::default()),
            Kind::PosgProps => Params::PosgProps(Default::default()),
            Kind::PursuitTrain => Params::PursuitTrain(Default::default()),
            Kind::PursuitEval => Params::PursuitEval(Default::default()),
            Kind::PursuitRandom => Params::PursuitRandom(Default::default()),
        }
    }

    pub fn kind(&self) -> Kind {
        match self {
            Params::BoundsSweep(_) => Kind::BoundsSweep,
            Params::MailpSim(_) => Kind::MailpSim,
            Params::MailpVerify(_) => Kind::MailpVerify,
            Params::PosgProps(_) => Kind::PosgProps,
            Params::PursuitTrain(_) => Kind::PursuitTrain,
            Params::PursuitEval(_) => Kind::PursuitEval,
            Params::PursuitRandom(_) => Kind::PursuitRandom,
        }
    }

    fn parse(kind: Kind, table: toml::Table) -> Result<Params> {
        fn de<T: serde::de::DeserializeOwned>(table: toml::Table) -> Result<T> {
            T::deserialize(table).map_err(|e| HarnessError::Config(format!("[params]: {e}")))
        }
        fn merge(base: &mut toml::Table, over: toml::Table) {
            for (key, value) in over {
                match (base.get_mut(&key), value) {
                    (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
                    (_, value) => {
                        base.insert(key, value);
                    }
                }
            }
        }
        // Nested tables fill their gaps from the kind's defaults.
        let mut merged = Params::default_for(kind).to_table();
        merge(&mut merged, table);
        let table = merged;
        Ok(match kind {
            Kind::BoundsSweep => Params::BoundsSweep(de(table)?),
            Kind::MailpSim => Params::MailpSim(de(table)?),
            Kind::MailpVerify => Params::MailpVerify(de(table)?),
            Kind::PosgProps => Params::PosgProps(de(table)?),
            Kind::PursuitTrain => Params::PursuitTrain(de(table)?),
            Kind::PursuitEval => Params::PursuitEval(de(table)?),
            Kind::PursuitRandom => Params::PursuitRandom(de(table)?),
        })
    }

    fn to_table(&self) -> toml::Table {
        fn ser<T: Serialize>(p: &T) -> toml::Table {
            toml::Table::try_from(p).expect("parameters serialize to a table")
        }
        match self {
            Params::BoundsSweep(p) => ser(p),
            Params::MailpSim(p) => ser(p),
            Params::MailpVerify(p) => ser(p),
            Params::PosgProps(p) => ser(p),
            Params::PursuitTrain(p) => ser(p),
            Params::PursuitEval(p) => ser(p),
            Params::PursuitRandom(p) => ser(p),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: Option<Kind>,
    out: Option<PathBuf>,
    seeds: Option<String>,
    jobs: Option<usize>,
    params: Option<toml::Table>,
}

#[derive(Serialize)]
struct Echo<'a> {
    kind: Kind,
    seeds: String,
    params: &'a toml::Table,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub out: PathBuf,
    pub seeds: SeedList,
    pub jobs: usize,
    pub params: Params,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seeds: Option<SeedList>,
    pub jobs: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(params: Params) -> Self {
        ExperimentConfig {
            out: PathBuf::from("out"),
            seeds: SeedList::default(),
            jobs: 1,
            params,
        }
    }

    pub fn kind(&self) -> Kind {
        self.params.kind()
    }

    /// Parses configuration text. `expected` is the kind implied by the
    /// command; the file may omit `kind` but must not contradict it.
    pub fn parse(text: &str, expected: Option<Kind>) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        let kind = match (raw.kind, expected) {
            (Some(k), Some(e)) if k != e => {
                return Err(HarnessError::Config(format!(
                    "configuration is for {k}, command runs {e}"
                )))
            }
            (Some(k), _) | (None, Some(k)) => k,
            (None, None) => return Err(HarnessError::Config("missing key `kind`".into())),
        };
        let params = Params::parse(kind, raw.params.unwrap_or_default())?;
        let mut config = ExperimentConfig::new(params);
        if let Some(out) = raw.out {
            config.out = out;
        }
        if let Some(s) = raw.seeds {
            config.seeds = s.parse()?;
        }
        if let Some(j) = raw.jobs {
            config.jobs = j;
        }
        config.check_jobs()?;
        Ok(config)
    }

    pub fn load(path: &Path, expected: Option<Kind>) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, expected)
    }

    pub fn apply(&mut self, overrides: Overrides) -> Result<()> {
        if let Some(out) = overrides.out {
            self.out = out;
        }
        if let Some(seeds) = overrides.seeds {
            self.seeds = seeds;
        }
        if let Some(jobs) = overrides.jobs {
            self.jobs = jobs;
        }
        self.check_jobs()
    }

    fn check_jobs(&self) -> Result<()> {
        if self.jobs == 0 {
            return Err(HarnessError::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }

    /// TOML text of everything that affects results.
    pub fn effective_toml(&self) -> String {
        let table = self.params.to_table();
        toml::to_string(&Echo {
            kind: self.kind(),
            seeds: self.seeds.to_string(),
            params: &table,
        })
        .expect("configuration serializes")
    }

    /// Metadata lines written above every CSV header.
    pub fn metadata(&self) -> Vec<String> {
        let mut lines = vec![
            format!("parshare {VERSION}"),
            format!("experiment: {}", self.kind()),
            format!("seeds: {}", self.seeds),
            "config:".to_string(),
        ];
        lines.extend(self.effective_toml().lines().map(str::to_string));
        lines
    }

    /// Rebuilds the configuration from the metadata block of an output file.
    pub fn from_metadata(csv_text: &str) -> Result<Self> {
        let (meta, _) = parse_csv(csv_text)?;
        let start = meta
            .iter()
            .position(|l| l == "config:")
            .ok_or_else(|| HarnessError::Config("no configuration in metadata".into()))?;
        Self::parse(&meta[start + 1..].join("\n"), None)
    }
}

/// A finished run: files to write and an optional failed check.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<(String, String)>,
    pub failure: Option<String>,
}

/// Computes every output of `config` in memory.
pub fn execute(config: &ExperimentConfig) -> Result<Outcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| HarnessError::Domain(format!("thread pool: {e}")))?;
    pool.install(|| experiments::dispatch(config))
}

/// Runs `config`, writes its outputs under `config.out`, and returns the
/// written paths. A failed check still writes its report before erroring.
pub fn run(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let outcome = execute(config)?;
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| HarnessError::Io { path, source }
    };
    fs::create_dir_all(&config.out).map_err(io(&config.out))?;
    let mut written = Vec::new();
    for (name, text) in &outcome.files {
        let path = config.out.join(name);
        fs::write(&path, text).map_err(io(&path))?;
        written.push(path);
    }
    match outcome.failure {
        Some(msg) => Err(HarnessError::Check(msg)),
        None => Ok(written),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!("0..3".parse::<SeedList>().unwrap().0, vec![0, 1, 2]);
        assert_eq!("2..=4".parse::<SeedList>().unwrap().0, vec![2, 3, 4]);
        assert_eq!("7".parse::<SeedList>().unwrap().0, vec![7]);
        assert_eq!("1, 5,9".parse::<SeedList>().unwrap().0, vec![1, 5, 9]);
        assert!("3..3".parse::<SeedList>().is_err());
        assert!("a..b".parse::<SeedList>().is_err());
        assert_eq!(SeedList(vec![4, 5, 6]).to_string(), "4..7");
        assert_eq!(SeedList(vec![4]).to_string(), "4");
        assert_eq!(SeedList(vec![4, 9]).to_string(), "4,9");
    }

    #[test]
    fn strict_parsing() {
        let err = ExperimentConfig::parse("kind = \"bounds_sweep\"\nbogus = 1\n", None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = ExperimentConfig::parse("kind = \"bounds_sweep\"\n[params]\nnn = 3\n", None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = ExperimentConfig::parse("kind = \"mailp_sim\"\n", Some(Kind::BoundsSweep)).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = ExperimentConfig::parse("jobs = 0\n", Some(Kind::PosgProps)).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn echo_round_trips_for_every_kind() {
        for kind in Kind::ALL {
            let mut config = ExperimentConfig::new(Params::default_for(kind));
            config.seeds = SeedList(vec![3, 8]);
            let again = ExperimentConfig::parse(&config.effective_toml(), None).unwrap();
            assert_eq!(again, config, "{kind}");
        }
    }

    #[test]
    fn nested_params_parse() {
        let text = r#"
kind = "pursuit_train"
seeds = "0..2"
[params.env]
grid_w = 10
[params.train]
episodes = 5
exploration = { start = 1.0, end = 0.1, decay_episodes = 3 }
[[params.variants]]
name = "solo"
mode = "independent"
agent_indication = false
"#;
        let c = ExperimentConfig::parse(text, Some(Kind::PursuitTrain)).unwrap();
        let Params::PursuitTrain(p) = &c.params else { panic!() };
        assert_eq!(p.env.grid_w, 10);
        assert_eq!(p.env.grid_h, 8);
        assert_eq!(p.train.episodes, 5);
        assert_eq!(p.variants.len(), 1);
    }
}
