//! Tabular Q-learning for pursuit in two centralization modes.
//!
//! `Shared` trains one table that every pursuer reads and writes; updates
//! within a step are applied in agent-index order. `Independent` gives every
//! pursuer its own table. With agent indication on, shared keys carry the
//! agent index; since windows are encoded exactly, indicated keys of different
//! agents never collide and a shared indicated table holds the same entries
//! as a set of independent tables.

use std::collections::HashMap;
use std::hash::Hash;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pursuit::{
    episode_seed, run_episode, Action, MeanStderr, PursuitConfig, PursuitError,
    PursuitObservation,
};

pub const N_ACTIONS: usize = Action::ALL.len();
const KEY_WORDS: usize = 4;
const TRAIN_SALT: u64 = 0x7472_6169_6e00_0000;
const EVAL_SALT: u64 = 0x6576_616c_0000_0000;
const EXPLORE_SALT: u64 = 0x6578_706c_0000_0000;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error(transparent)]
    Env(#[from] PursuitError),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("observation window of {0} cells does not fit a table key")]
    ObservationTooLarge(usize),
    #[error("non-finite action value at episode {episode}")]
    Divergence { episode: u64 },
    #[error("malformed policy file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, LearnError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharingMode {
    Shared,
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_episodes: u64,
}

impl EpsilonSchedule {
    /// Linear decay from `start` to `end`, then constant.
    pub fn value(&self, episode: u64) -> f64 {
        if self.decay_episodes == 0 || episode >= self.decay_episodes {
            return self.end;
        }
        let frac = episode as f64 / self.decay_episodes as f64;
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: SharingMode,
    /// Tag shared-table keys with the agent index.
    pub agent_indication: bool,
    pub learning_rate: f64,
    pub gamma: f64,
    pub exploration: EpsilonSchedule,
    pub episodes: u64,
    pub eval_every: u64,
    pub eval_episodes: u64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: SharingMode::Shared,
            agent_indication: true,
            learning_rate: 0.1,
            gamma: 0.99,
            exploration: EpsilonSchedule {
                start: 1.0,
                end: 0.05,
                decay_episodes: 10_000,
            },
            episodes: 20_000,
            eval_every: 1_000,
            eval_episodes: 50,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LearnError::Config(m));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0,1), got {}", self.gamma));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!(
                "learning_rate must lie in (0,1], got {}",
                self.learning_rate
            ));
        }
        let e = &self.exploration;
        if !(0.0..=1.0).contains(&e.start) || !(0.0..=1.0).contains(&e.end) {
            return bad("exploration rates must lie in [0,1]".into());
        }
        if self.eval_every == 0 {
            return bad("eval_every must be positive".into());
        }
        Ok(())
    }
}

/// Exact encoding of an observation window, optionally tagged with the agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObsKey {
    pub agent: Option<u16>,
    pub bits: [u64; KEY_WORDS],
}

/// Table key for `agent`'s observation. Shared tables with indication tag the
/// key; independent tables never do.
pub fn obs_key(
    obs: &PursuitObservation,
    agent: usize,
    mode: SharingMode,
    agent_indication: bool,
) -> Result<ObsKey> {
    if obs.data.len() > 64 * KEY_WORDS {
        return Err(LearnError::ObservationTooLarge(obs.data.len()));
    }
    let mut bits = [0u64; KEY_WORDS];
    for (k, &v) in obs.data.iter().enumerate() {
        if v != 0 {
            bits[k / 64] |= 1 << (k % 64);
        }
    }
    let agent = match mode {
        SharingMode::Shared if agent_indication => Some(agent as u16),
        _ => None,
    };
    Ok(ObsKey { agent, bits })
}

/// Action values with zero default for unseen keys.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable<K: Hash + Eq> {
    n_actions: usize,
    values: HashMap<K, Box<[f64]>>,
}

impl<K: Hash + Eq + Clone> QTable<K> {
    pub fn new(n_actions: usize) -> Self {
        QTable {
            n_actions,
            values: HashMap::new(),
        }
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, key: &K) -> Option<&[f64]> {
        self.values.get(key).map(|r| &r[..])
    }

    pub fn value(&self, key: &K, action: usize) -> f64 {
        self.values.get(key).map_or(0.0, |r| r[action])
    }

    pub fn max_value(&self, key: &K) -> f64 {
        self.values
            .get(key)
            .map_or(0.0, |r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    /// Highest-valued action, lowest index on ties.
    pub fn greedy(&self, key: &K) -> usize {
        match self.values.get(key) {
            None => 0,
            Some(r) => {
                let mut best = 0;
                for (a, &v) in r.iter().enumerate().skip(1) {
                    if v > r[best] {
                        best = a;
                    }
                }
                best
            }
        }
    }

    /// `Q(k, a) += lr · (target − Q(k, a))`; returns the new value.
    pub fn update(&mut self, key: &K, action: usize, target: f64, lr: f64) -> f64 {
        let n = self.n_actions;
        let row = self
            .values
            .entry(key.clone())
            .or_insert_with(|| vec![0.0; n].into_boxed_slice());
        row[action] += lr * (target - row[action]);
        row[action]
    }

    pub fn keys(&self) -> impl Iterator<Item = &K> {
        self.values.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &[f64])> {
        self.values.iter().map(|(k, v)| (k, &v[..]))
    }

    pub fn insert_row(&mut self, key: K, row: Vec<f64>) {
        self.values.insert(key, row.into_boxed_slice());
    }
}

/// Greedy pursuit policies backed by one shared table or one table per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPolicy {
    pub mode: SharingMode,
    pub agent_indication: bool,
    pub n_agents: usize,
    pub tables: Vec<QTable<ObsKey>>,
}

impl JointPolicy {
    pub fn new(mode: SharingMode, agent_indication: bool, n_agents: usize) -> Self {
        let n_tables = match mode {
            SharingMode::Shared => 1,
            SharingMode::Independent => n_agents,
        };
        JointPolicy {
            mode,
            agent_indication,
            n_agents,
            tables: (0..n_tables).map(|_| QTable::new(N_ACTIONS)).collect(),
        }
    }

    pub fn table_index(&self, agent: usize) -> usize {
        match self.mode {
            SharingMode::Shared => 0,
            SharingMode::Independent => agent,
        }
    }

    pub fn table(&self, agent: usize) -> &QTable<ObsKey> {
        &self.tables[self.table_index(agent)]
    }

    pub fn key(&self, obs: &PursuitObservation, agent: usize) -> Result<ObsKey> {
        obs_key(obs, agent, self.mode, self.agent_indication)
    }

    pub fn greedy_action(&self, agent: usize, obs: &PursuitObservation) -> Result<Action> {
        let key = self.key(obs, agent)?;
        Ok(Action::from_index(self.table(agent).greedy(&key)))
    }

    /// JSON with rows sorted by key, so identical tables give identical text.
    pub fn to_json(&self) -> String {
        let tables = self
            .tables
            .iter()
            .map(|t| {
                let mut rows: Vec<PolicyRow> = t
                    .iter()
                    .map(|(k, q)| PolicyRow {
                        agent: k.agent,
                        bits: k.bits,
                        q: q.to_vec(),
                    })
                    .collect();
                rows.sort_by_key(|r| (r.agent, r.bits));
                rows
            })
            .collect();
        serde_json::to_string(&PolicyFile {
            mode: self.mode,
            agent_indication: self.agent_indication,
            n_agents: self.n_agents,
            tables,
        })
        .expect("policy serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: PolicyFile =
            serde_json::from_str(text).map_err(|e| LearnError::Format(e.to_string()))?;
        let mut policy = JointPolicy::new(file.mode, file.agent_indication, file.n_agents);
        if file.tables.len() != policy.tables.len() {
            return Err(LearnError::Format(format!(
                "expected {} tables, found {}",
                policy.tables.len(),
                file.tables.len()
            )));
        }
        for (table, rows) in policy.tables.iter_mut().zip(file.tables) {
            for row in rows {
                if row.q.len() != N_ACTIONS || row.q.iter().any(|v| !v.is_finite()) {
                    return Err(LearnError::Format("malformed action-value row".into()));
                }
                table.insert_row(
                    ObsKey {
                        agent: row.agent,
                        bits: row.bits,
                    },
                    row.q,
                );
            }
        }
        Ok(policy)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyFile {
    mode: SharingMode,
    agent_indication: bool,
    n_agents: usize,
    tables: Vec<Vec<PolicyRow>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyRow {
    agent: Option<u16>,
    bits: [u64; KEY_WORDS],
    q: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub episode: u64,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LearningCurve {
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    pub fn final_mean(&self) -> Option<f64> {
        self.points.last().map(|p| p.mean)
    }

    /// First evaluated episode whose mean reaches `fraction` of the final mean.
    pub fn episodes_to_fraction(&self, fraction: f64) -> Option<u64> {
        let target = fraction * self.final_mean()?;
        self.points
            .iter()
            .find(|p| p.mean >= target)
            .map(|p| p.episode)
    }
}

/// Greedy evaluation: mean and standard error of total episode reward.
pub fn evaluate(
    policy: &JointPolicy,
    env_config: &PursuitConfig,
    episodes: u64,
    seed: u64,
) -> Result<MeanStderr> {
    if policy.n_agents != env_config.n_pursuers {
        return Err(LearnError::Config(format!(
            "policy covers {} agents, environment has {}",
            policy.n_agents, env_config.n_pursuers
        )));
    }
    let mut totals = Vec::with_capacity(episodes as usize);
    for e in 0..episodes {
        let cfg = PursuitConfig {
            seed: episode_seed(seed, e),
            ..env_config.clone()
        };
        let mut key_error = None;
        let total = run_episode(&cfg, |i, obs| match policy.greedy_action(i, obs) {
            Ok(a) => a,
            Err(err) => {
                key_error.get_or_insert(err);
                Action::Stay
            }
        })?;
        if let Some(err) = key_error {
            return Err(err);
        }
        totals.push(total);
    }
    Ok(MeanStderr::from_samples(&totals))
}

/// Seed of the fixed evaluation episodes used during training.
pub fn eval_seed(train_seed: u64) -> u64 {
    train_seed ^ EVAL_SALT
}

/// ε-greedy Q-learning on pursuit, with greedy evaluation every `eval_every`
/// episodes and after the last one.
///
/// The random stream consumed per decision does not depend on the mode, so
/// runs that only differ in mode see the same environment and exploration
/// draws.
pub fn train(env_config: &PursuitConfig, cfg: &TrainConfig) -> Result<(JointPolicy, LearningCurve)> {
    env_config.validate()?;
    cfg.validate()?;
    let n = env_config.n_pursuers;
    let mut policy = JointPolicy::new(cfg.mode, cfg.agent_indication, n);
    let mut curve = LearningCurve::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ EXPLORE_SALT);

    let mut obs = PursuitObservation {
        range: env_config.obs_range,
        data: Vec::new(),
    };
    let mut keys = vec![ObsKey { agent: None, bits: [0; KEY_WORDS] }; n];
    let mut next_keys = keys.clone();
    let mut actions = vec![Action::Stay; n];

    for episode in 0..cfg.episodes {
        let epsilon = cfg.exploration.value(episode);
        let mut env = crate::pursuit::PursuitEnv::reset(&PursuitConfig {
            seed: episode_seed(cfg.seed ^ TRAIN_SALT, episode),
            ..env_config.clone()
        })?;
        for (i, key) in keys.iter_mut().enumerate() {
            env.observe_into(i, &mut obs)?;
            *key = policy.key(&obs, i)?;
        }
        while !env.is_done() {
            for (i, a) in actions.iter_mut().enumerate() {
                let explore = rng.gen::<f64>() < epsilon;
                let random = rng.gen_range(0..N_ACTIONS);
                *a = Action::from_index(if explore {
                    random
                } else {
                    policy.table(i).greedy(&keys[i])
                });
            }
            let out = env.step(&actions)?;
            let terminal = env.state().alive_evaders() == 0;
            for (i, key) in next_keys.iter_mut().enumerate() {
                env.observe_into(i, &mut obs)?;
                *key = policy.key(&obs, i)?;
            }
            for i in 0..n {
                let t = policy.table_index(i);
                let table = &mut policy.tables[t];
                let bootstrap = if terminal { 0.0 } else { table.max_value(&next_keys[i]) };
                let target = out.rewards[i] + cfg.gamma * bootstrap;
                let v = table.update(&keys[i], actions[i].index(), target, cfg.learning_rate);
                if !v.is_finite() {
                    return Err(LearnError::Divergence { episode });
                }
            }
            std::mem::swap(&mut keys, &mut next_keys);
        }
        let done = episode + 1;
        if done % cfg.eval_every == 0 || done == cfg.episodes {
            let m = evaluate(&policy, env_config, cfg.eval_episodes, eval_seed(cfg.seed))?;
            curve.points.push(CurvePoint {
                episode: done,
                mean: m.mean,
                stderr: m.stderr,
            });
        }
    }
    Ok((policy, curve))
}

/// Median, averaging the two middle elements for even lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    Some(if v.len().is_multiple_of(2) { (v[m - 1] + v[m]) / 2.0 } else { v[m] })
}
