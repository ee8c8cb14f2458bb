//! Finite partially observable stochastic games and the transforms that let a
//! single shared policy serve heterogeneous agents.
//!
//! A [`Posg`] stores dense probability tables. Joint actions are encoded in
//! mixed radix with agent 0 as the least significant digit, see
//! [`Posg::joint_index`].
//!
//! The JSON form (via serde) is the fixture format used by the harness:
//!
//! ```json
//! {
//!   "n_states": 2,
//!   "actions": [[0, 1], [0]],
//!   "observations": [[{"symbol": 0, "tags": []}], [{"symbol": 1, "tags": []}]],
//!   "initial": [1.0, 0.0],
//!   "transition": [ ... n_states * n_joint * n_states ... ],
//!   "rewards": [[ ... n_states * n_joint * n_states ... ], [ ... ]],
//!   "obs_fn": [[ ... n_joint * n_states * |Ω_0| ... ], [ ... ]]
//! }
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const PROB_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PosgError {
    #[error("invalid game: {0}")]
    Invalid(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("observation {obs} is shared by agents {first} and {second}")]
    NotDisjoint {
        obs: Observation,
        first: usize,
        second: usize,
    },
    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, PosgError>;

/// Observation label. Agent indication appends the agent index to `tags`, so
/// `(ω, i)` is `tags == [i]` and `((ω, i), j)` is `tags == [i, j]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Observation {
    pub symbol: u32,
    #[serde(default)]
    pub tags: Vec<usize>,
}

impl Observation {
    pub fn new(symbol: u32) -> Self {
        Observation {
            symbol,
            tags: Vec::new(),
        }
    }

    pub fn tagged(&self, agent: usize) -> Self {
        let mut tags = self.tags.clone();
        tags.push(agent);
        Observation {
            symbol: self.symbol,
            tags,
        }
    }
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "o{}", self.symbol)?;
        for t in &self.tags {
            write!(f, "#{t}")?;
        }
        Ok(())
    }
}

pub type ActionId = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Posg {
    pub n_states: usize,
    /// `A_i` as action labels; equal labels across agents denote the same action.
    pub actions: Vec<Vec<ActionId>>,
    pub observations: Vec<Vec<Observation>>,
    pub initial: Vec<f64>,
    /// `P(s' | s, a)` at `[(s * n_joint + a) * n_states + s']`.
    pub transition: Vec<f64>,
    /// Per agent, `R_i(s, a, s')` laid out like `transition`.
    pub rewards: Vec<Vec<f64>>,
    /// Per agent, `O_i(ω | a, s')` at `[(a * n_states + s') * |Ω_i| + ω]`.
    pub obs_fn: Vec<Vec<f64>>,
}

impl Posg {
    pub fn n_agents(&self) -> usize {
        self.actions.len()
    }

    pub fn n_joint_actions(&self) -> usize {
        self.actions.iter().map(Vec::len).product()
    }

    /// Mixed-radix index of a joint action given per-agent action positions.
    pub fn joint_index(&self, positions: &[usize]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (i, &p) in positions.iter().enumerate() {
            idx += p * stride;
            stride *= self.actions[i].len();
        }
        idx
    }

    pub fn joint_positions(&self, mut idx: usize) -> Vec<usize> {
        self.actions
            .iter()
            .map(|a| {
                let p = idx % a.len();
                idx /= a.len();
                p
            })
            .collect()
    }

    pub fn transition(&self, s: usize, joint: usize, next: usize) -> f64 {
        self.transition[(s * self.n_joint_actions() + joint) * self.n_states + next]
    }

    pub fn reward(&self, agent: usize, s: usize, joint: usize, next: usize) -> f64 {
        self.rewards[agent][(s * self.n_joint_actions() + joint) * self.n_states + next]
    }

    fn obs_index(&self, agent: usize, obs: &Observation) -> Option<usize> {
        self.observations[agent].iter().position(|o| o == obs)
    }

    /// `O_i(ω | a, s)`; zero for observations outside `Ω_i`.
    pub fn obs_prob(&self, agent: usize, joint: usize, s: usize, obs: &Observation) -> f64 {
        match self.obs_index(agent, obs) {
            Some(k) => self.obs_prob_at(agent, joint, s, k),
            None => 0.0,
        }
    }

    fn obs_prob_at(&self, agent: usize, joint: usize, s: usize, k: usize) -> f64 {
        let m = self.observations[agent].len();
        self.obs_fn[agent][(joint * self.n_states + s) * m + k]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_agents();
        let invalid = |m: String| Err(PosgError::Invalid(m));
        if n == 0 || self.n_states == 0 {
            return invalid("need at least one agent and one state".into());
        }
        if self.observations.len() != n || self.rewards.len() != n || self.obs_fn.len() != n {
            return invalid("per-agent tables disagree on the agent count".into());
        }
        for i in 0..n {
            if self.actions[i].is_empty() || self.observations[i].is_empty() {
                return invalid(format!("agent {i} has an empty action or observation set"));
            }
            if self.actions[i].iter().collect::<BTreeSet<_>>().len() != self.actions[i].len() {
                return invalid(format!("agent {i} lists an action twice"));
            }
            if self.observations[i].iter().collect::<BTreeSet<_>>().len()
                != self.observations[i].len()
            {
                return invalid(format!("agent {i} lists an observation twice"));
            }
        }
        let ns = self.n_states;
        let nj = self.n_joint_actions();
        if self.initial.len() != ns || !is_distribution(&self.initial) {
            return invalid("initial state distribution is malformed".into());
        }
        if self.transition.len() != ns * nj * ns {
            return invalid("transition table has the wrong size".into());
        }
        for row in self.transition.chunks(ns) {
            if !is_distribution(row) {
                return invalid("transition row does not sum to 1".into());
            }
        }
        for i in 0..n {
            if self.rewards[i].len() != ns * nj * ns
                || self.rewards[i].iter().any(|r| !r.is_finite())
            {
                return invalid(format!("reward table of agent {i} is malformed"));
            }
            let m = self.observations[i].len();
            if self.obs_fn[i].len() != nj * ns * m {
                return invalid(format!("observation table of agent {i} has the wrong size"));
            }
            for row in self.obs_fn[i].chunks(m) {
                if !is_distribution(row) {
                    return invalid(format!("observation row of agent {i} does not sum to 1"));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("game serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: Posg =
            serde_json::from_str(text).map_err(|e| PosgError::Invalid(e.to_string()))?;
        g.validate()?;
        Ok(g)
    }

    /// Union of all action sets, sorted.
    pub fn action_union(&self) -> BTreeSet<ActionId> {
        self.actions.iter().flatten().copied().collect()
    }

    pub fn observation_union(&self) -> BTreeSet<Observation> {
        self.observations.iter().flatten().cloned().collect()
    }
}

fn is_distribution(row: &[f64]) -> bool {
    row.iter().all(|&p| (0.0..=1.0 + PROB_TOL).contains(&p))
        && (row.iter().sum::<f64>() - 1.0).abs() <= PROB_TOL
}

/// Who a policy belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyOwner {
    Agent(usize),
    Shared,
}

/// Stochastic reactive policy `π(ω, a)`; missing entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub owner: PolicyOwner,
    pub table: BTreeMap<(Observation, ActionId), f64>,
}

impl Policy {
    pub fn prob(&self, obs: &Observation, action: ActionId) -> f64 {
        self.table
            .get(&(obs.clone(), action))
            .copied()
            .unwrap_or(0.0)
    }

    /// Checks that every row over `observations` sums to 1 across `actions`.
    pub fn validate(&self, observations: &[Observation], actions: &[ActionId]) -> Result<()> {
        for obs in observations {
            let row: Vec<f64> = actions.iter().map(|&a| self.prob(obs, a)).collect();
            if !is_distribution(&row) {
                return Err(PosgError::InvalidPolicy(format!(
                    "row for {obs} sums to {}",
                    row.iter().sum::<f64>()
                )));
            }
        }
        Ok(())
    }

    /// Relabels every observation `ω` as `(ω, agent)`.
    pub fn tagged(&self, agent: usize) -> Policy {
        Policy {
            owner: self.owner,
            table: self
                .table
                .iter()
                .map(|((o, a), &p)| ((o.tagged(agent), *a), p))
                .collect(),
        }
    }

    /// A uniformly random valid policy for `agent` in `g`.
    pub fn random<R: Rng>(g: &Posg, agent: usize, rng: &mut R) -> Policy {
        let mut table = BTreeMap::new();
        for obs in &g.observations[agent] {
            let row = random_distribution(rng, g.actions[agent].len());
            for (&a, p) in g.actions[agent].iter().zip(row) {
                table.insert((obs.clone(), a), p);
            }
        }
        Policy {
            owner: PolicyOwner::Agent(agent),
            table,
        }
    }
}

/// True iff no observation appears in two agents' spaces.
pub fn observation_spaces_disjoint(g: &Posg) -> bool {
    observation_owner_map(g).is_ok()
}

fn observation_owner_map(g: &Posg) -> Result<BTreeMap<Observation, usize>> {
    let mut owner = BTreeMap::new();
    for (i, space) in g.observations.iter().enumerate() {
        for obs in space {
            if let Some(&first) = owner.get(obs) {
                if first != i {
                    return Err(PosgError::NotDisjoint {
                        obs: obs.clone(),
                        first,
                        second: i,
                    });
                }
            }
            owner.insert(obs.clone(), i);
        }
    }
    Ok(owner)
}

/// Tags every agent's observations with its index: `Ω'_i = Ω_i × {i}` and
/// `O'_i(a, s, (ω, i)) = O_i(a, s, ω)`. The tables keep their order, so the
/// resulting spaces are always disjoint.
pub fn apply_agent_indication(g: &Posg) -> Posg {
    let mut out = g.clone();
    for (i, space) in out.observations.iter_mut().enumerate() {
        for obs in space.iter_mut() {
            *obs = obs.tagged(i);
        }
    }
    out
}

/// Combines per-agent policies into one policy over `(∪Ω_i) × (∪A_i)`.
///
/// For `ω ∈ Ω_i` the merged row copies `π_i(ω, ·)` on `A_i` and is zero on
/// every other action.
pub fn merge_policies(g: &Posg, policies: &[Policy]) -> Result<Policy> {
    let owner = observation_owner_map(g)?;
    if policies.len() != g.n_agents() {
        return Err(PosgError::Precondition(format!(
            "{} policies for {} agents",
            policies.len(),
            g.n_agents()
        )));
    }
    for (i, pi) in policies.iter().enumerate() {
        pi.validate(&g.observations[i], &g.actions[i])?;
    }
    let actions = g.action_union();
    let mut table = BTreeMap::new();
    for (obs, &i) in &owner {
        for &a in &actions {
            let p = if g.actions[i].contains(&a) {
                policies[i].prob(obs, a)
            } else {
                0.0
            };
            table.insert((obs.clone(), a), p);
        }
    }
    Ok(Policy {
        owner: PolicyOwner::Shared,
        table,
    })
}

/// Expected per-agent return over `horizon` steps with every agent acting on
/// its current observation through `policies[i]`, restricted to `A_i`.
///
/// The initial observation of each agent is drawn from `O_i(0, s_0, ·)`.
/// Evaluation is exact: it propagates the joint distribution over
/// `(state, joint observation)`.
pub fn expected_returns(g: &Posg, policies: &[&Policy], horizon: usize) -> Vec<f64> {
    let n = g.n_agents();
    let ns = g.n_states;
    let nj = g.n_joint_actions();
    let obs_sizes: Vec<usize> = g.observations.iter().map(Vec::len).collect();
    let n_joint_obs: usize = obs_sizes.iter().product();
    let decode_obs = |mut idx: usize| -> Vec<usize> {
        obs_sizes
            .iter()
            .map(|&m| {
                let k = idx % m;
                idx /= m;
                k
            })
            .collect()
    };
    let joint_obs_prob = |joint: usize, s: usize, jo: &[usize]| -> f64 {
        (0..n).map(|i| g.obs_prob_at(i, joint, s, jo[i])).product()
    };
    // action_prob[i][k][p] = π_i(Ω_i[k], A_i[p])
    let action_prob: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|i| {
            g.observations[i]
                .iter()
                .map(|o| g.actions[i].iter().map(|&a| policies[i].prob(o, a)).collect())
                .collect()
        })
        .collect();
    let joint_obs: Vec<Vec<usize>> = (0..n_joint_obs).map(decode_obs).collect();
    let joint_actions: Vec<Vec<usize>> = (0..nj).map(|j| g.joint_positions(j)).collect();

    let mut dist = vec![0.0; ns * n_joint_obs];
    for s in 0..ns {
        for (k, jo) in joint_obs.iter().enumerate() {
            dist[s * n_joint_obs + k] = g.initial[s] * joint_obs_prob(0, s, jo);
        }
    }
    let mut returns = vec![0.0; n];
    for _ in 0..horizon {
        let mut next = vec![0.0; ns * n_joint_obs];
        for s in 0..ns {
            for (k, jo) in joint_obs.iter().enumerate() {
                let p = dist[s * n_joint_obs + k];
                if p == 0.0 {
                    continue;
                }
                for (ja, positions) in joint_actions.iter().enumerate() {
                    let pa: f64 = (0..n).map(|i| action_prob[i][jo[i]][positions[i]]).product();
                    if pa == 0.0 {
                        continue;
                    }
                    for s2 in 0..ns {
                        let pt = p * pa * g.transition(s, ja, s2);
                        if pt == 0.0 {
                            continue;
                        }
                        for (i, r) in returns.iter_mut().enumerate() {
                            *r += pt * g.reward(i, s, ja, s2);
                        }
                        for (k2, jo2) in joint_obs.iter().enumerate() {
                            next[s2 * n_joint_obs + k2] += pt * joint_obs_prob(ja, s2, jo2);
                        }
                    }
                }
            }
        }
        dist = next;
    }
    returns
}

/// Sizes used by [`random_posg`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PosgShape {
    pub n_states: usize,
    pub action_sizes: Vec<usize>,
    pub obs_sizes: Vec<usize>,
}

impl PosgShape {
    /// Every shape with `n_agents ≤ max_agents` and all other sizes in
    /// `1..=max_size`, agents listed in order.
    pub fn enumerate(max_agents: usize, max_size: usize) -> Vec<PosgShape> {
        let mut out = Vec::new();
        for n in 1..=max_agents {
            let per_agent = max_size * max_size;
            let combos = per_agent.pow(n as u32);
            for n_states in 1..=max_size {
                for mut c in 0..combos {
                    let mut action_sizes = Vec::with_capacity(n);
                    let mut obs_sizes = Vec::with_capacity(n);
                    for _ in 0..n {
                        let d = c % per_agent;
                        c /= per_agent;
                        action_sizes.push(d / max_size + 1);
                        obs_sizes.push(d % max_size + 1);
                    }
                    out.push(PosgShape {
                        n_states,
                        action_sizes,
                        obs_sizes,
                    });
                }
            }
        }
        out
    }
}

fn random_distribution<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    // Occasional exact zeros exercise sparse rows.
    let mut w: Vec<f64> = (0..len)
        .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen::<f64>() + 1e-3 })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        w[rng.gen_range(0..len)] = 1.0;
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// Random game with the given shape. Observation and action labels are drawn
/// from small shared pools so that, unless `disjoint`, agents commonly share
/// labels.
pub fn random_posg<R: Rng>(shape: &PosgShape, disjoint: bool, rng: &mut R) -> Posg {
    let n = shape.action_sizes.len();
    let pick_labels = |rng: &mut R, size: usize, pool: u32, offset: u32| -> Vec<u32> {
        let mut labels: Vec<u32> = (0..pool).collect();
        for k in 0..size {
            let j = rng.gen_range(k..labels.len());
            labels.swap(k, j);
        }
        labels.truncate(size);
        labels.iter().map(|l| l + offset).collect()
    };
    let max_a = *shape.action_sizes.iter().max().unwrap_or(&1) as u32;
    let mut actions = Vec::with_capacity(n);
    let mut observations = Vec::with_capacity(n);
    for i in 0..n {
        actions.push(pick_labels(rng, shape.action_sizes[i], max_a + 1, 0));
        let pool = shape.obs_sizes[i] as u32 + 1;
        let offset = if disjoint { 100 * i as u32 } else { 0 };
        observations.push(
            pick_labels(rng, shape.obs_sizes[i], pool, offset)
                .into_iter()
                .map(Observation::new)
                .collect(),
        );
    }
    let ns = shape.n_states;
    let nj: usize = shape.action_sizes.iter().product();
    let initial = random_distribution(rng, ns);
    let transition = (0..ns * nj).flat_map(|_| random_distribution(rng, ns)).collect();
    let rewards = (0..n)
        .map(|_| (0..ns * nj * ns).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let obs_fn = (0..n)
        .map(|i| {
            (0..nj * ns)
                .flat_map(|_| random_distribution(rng, shape.obs_sizes[i]))
                .collect()
        })
        .collect();
    let g = Posg {
        n_states: ns,
        actions,
        observations,
        initial,
        transition,
        rewards,
        obs_fn,
    };
    debug_assert!(g.validate().is_ok());
    g
}

/// How the agent identity is appended to a padded observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdEncoding {
    /// The index itself in the final slot.
    Scalar,
    /// A one-hot block of `n_agents` slots at the end.
    OneHot { n_agents: usize },
}

impl IdEncoding {
    fn width(&self) -> usize {
        match self {
            IdEncoding::Scalar => 1,
            IdEncoding::OneHot { n_agents } => *n_agents,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaddedObservation {
    pub data: Vec<f64>,
    pub true_len: usize,
    pub agent_id: Option<usize>,
    pub encoding: IdEncoding,
}

impl PaddedObservation {
    /// The original observation.
    pub fn unpad(&self) -> &[f64] {
        &self.data[..self.true_len]
    }

    /// Reads the identity back out of the id slot(s).
    pub fn decoded_id(&self) -> Option<usize> {
        self.agent_id?;
        let len = self.data.len();
        match self.encoding {
            IdEncoding::Scalar => Some(self.data[len - 1] as usize),
            IdEncoding::OneHot { n_agents } => {
                self.data[len - n_agents..].iter().position(|&x| x == 1.0)
            }
        }
    }
}

/// `(ω_1, …, ω_o, 0, …, 0[, i])` of length `padded_len`, id as a scalar.
pub fn pad_observation(
    obs: &[f64],
    padded_len: usize,
    agent_id: Option<usize>,
) -> Result<PaddedObservation> {
    pad_observation_with(obs, padded_len, agent_id, IdEncoding::Scalar)
}

pub fn pad_observation_with(
    obs: &[f64],
    padded_len: usize,
    agent_id: Option<usize>,
    encoding: IdEncoding,
) -> Result<PaddedObservation> {
    let id_width = if agent_id.is_some() { encoding.width() } else { 0 };
    if obs.len() + id_width > padded_len {
        return Err(PosgError::Precondition(format!(
            "observation of length {} plus {id_width} id slot(s) exceeds padded length {padded_len}",
            obs.len()
        )));
    }
    let mut data = vec![0.0; padded_len];
    data[..obs.len()].copy_from_slice(obs);
    if let Some(id) = agent_id {
        match encoding {
            IdEncoding::Scalar => data[padded_len - 1] = id as f64,
            IdEncoding::OneHot { n_agents } => {
                if id >= n_agents {
                    return Err(PosgError::Precondition(format!(
                        "agent id {id} does not fit a one-hot block of {n_agents}"
                    )));
                }
                data[padded_len - n_agents + id] = 1.0;
            }
        }
    }
    Ok(PaddedObservation {
        data,
        true_len: obs.len(),
        agent_id,
        encoding,
    })
}

/// Keeps the first `len` entries of a padded action vector and renormalizes
/// them; an all-zero prefix becomes uniform.
pub fn trim_action_vector(v: &[f64], len: usize) -> Result<Vec<f64>> {
    if len == 0 || len > v.len() {
        return Err(PosgError::Precondition(format!(
            "trim length {len} outside 1..={}",
            v.len()
        )));
    }
    if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(PosgError::Precondition(
            "action vector entries must be finite and nonnegative".into(),
        ));
    }
    let head = &v[..len];
    let mass: f64 = head.iter().sum();
    if mass > 0.0 {
        Ok(head.iter().map(|x| x / mass).collect())
    } else {
        Ok(vec![1.0 / len as f64; len])
    }
}

/// One-hot vector for observation `obs` of `agent`, indexed by its position in `Ω_i`.
pub fn observation_vector(g: &Posg, agent: usize, obs: &Observation) -> Option<Vec<f64>> {
    let k = g.obs_index(agent, obs)?;
    let mut v = vec![0.0; g.observations[agent].len()];
    v[k] = 1.0;
    Some(v)
}

/// Results of one named property over many checks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropertyTally {
    pub property: &'static str,
    pub checked: u64,
    pub failures: u64,
}

/// Property names in report order.
pub const PROPERTIES: [&str; 7] = [
    "indication_disjoint",
    "observation_fn_preserved",
    "merge_restriction",
    "merge_row_sums",
    "merged_returns_equal",
    "padding_round_trip",
    "trim_argmax",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropertyReport {
    pub instances: u64,
    pub tallies: Vec<PropertyTally>,
}

impl PropertyReport {
    pub fn new() -> Self {
        PropertyReport {
            instances: 0,
            tallies: PROPERTIES
                .iter()
                .map(|&property| PropertyTally {
                    property,
                    checked: 0,
                    failures: 0,
                })
                .collect(),
        }
    }

    fn record(&mut self, k: usize, ok: bool) {
        self.tallies[k].checked += 1;
        self.tallies[k].failures += u64::from(!ok);
    }

    pub fn total_failures(&self) -> u64 {
        self.tallies.iter().map(|t| t.failures).sum()
    }
}

impl Default for PropertyReport {
    fn default() -> Self {
        Self::new()
    }
}

fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = k;
        }
    }
    best
}

/// Checks every transform on `g`, which may have overlapping observation
/// spaces. Random policies and action vectors come from `rng`.
pub fn check_instance<R: Rng>(g: &Posg, horizon: usize, rng: &mut R, report: &mut PropertyReport) {
    report.instances += 1;
    let n = g.n_agents();
    let tagged = apply_agent_indication(g);
    report.record(0, observation_spaces_disjoint(&tagged));

    for i in 0..n {
        for joint in 0..g.n_joint_actions() {
            for s in 0..g.n_states {
                for obs in &g.observations[i] {
                    let ok = tagged.obs_prob(i, joint, s, &obs.tagged(i)) == g.obs_prob(i, joint, s, obs);
                    report.record(1, ok);
                }
            }
        }
    }

    // Policies learned on the original game, carried to the tagged game.
    let individual: Vec<Policy> = (0..n).map(|i| Policy::random(g, i, rng)).collect();
    let lifted: Vec<Policy> = individual.iter().enumerate().map(|(i, p)| p.tagged(i)).collect();
    let merged = match merge_policies(&tagged, &lifted) {
        Ok(m) => m,
        Err(_) => {
            report.record(2, false);
            return;
        }
    };
    for (i, own) in individual.iter().enumerate() {
        for obs in &g.observations[i] {
            for &a in &g.actions[i] {
                report.record(2, merged.prob(&obs.tagged(i), a) == own.prob(obs, a));
            }
        }
    }
    let all_actions: Vec<ActionId> = tagged.action_union().into_iter().collect();
    for obs in tagged.observation_union() {
        let sum: f64 = all_actions.iter().map(|&a| merged.prob(&obs, a)).sum();
        report.record(3, (sum - 1.0).abs() <= PROB_TOL);
    }
    let refs: Vec<&Policy> = individual.iter().collect();
    let before = expected_returns(g, &refs, horizon);
    let shared: Vec<&Policy> = vec![&merged; n];
    let after = expected_returns(&tagged, &shared, horizon);
    for (b, a) in before.iter().zip(&after) {
        report.record(4, (b - a).abs() <= 1e-9 * (1.0 + b.abs()));
    }

    let padded_len = g.observations.iter().map(Vec::len).max().unwrap_or(0) + 1;
    let mut seen = BTreeSet::new();
    for i in 0..n {
        for obs in &g.observations[i] {
            let v = observation_vector(g, i, obs).expect("observation belongs to agent");
            let ok = match pad_observation(&v, padded_len, Some(i)) {
                Ok(p) => {
                    let bits: Vec<u64> = p.data.iter().map(|x| x.to_bits()).collect();
                    p.unpad() == v.as_slice() && p.decoded_id() == Some(i) && seen.insert(bits)
                }
                Err(_) => false,
            };
            report.record(5, ok);
        }
    }

    let alpha = g.actions.iter().map(Vec::len).max().unwrap_or(1);
    for (i, own) in individual.iter().enumerate() {
        let len = g.actions[i].len();
        // Padded rows of the agent's own policy come back unchanged.
        for obs in &g.observations[i] {
            let mut row: Vec<f64> = g.actions[i].iter().map(|&a| own.prob(obs, a)).collect();
            let head_argmax = argmax_first(&row);
            row.resize(alpha, 0.0);
            let ok = trim_action_vector(&row, len).is_ok_and(|t| argmax_first(&t) == head_argmax);
            report.record(6, ok);
        }
        let v: Vec<f64> = (0..alpha).map(|_| rng.gen::<f64>()).collect();
        let ok = trim_action_vector(&v, len).is_ok_and(|t| {
            argmax_first(&t) == argmax_first(&v[..len]) && (t.iter().sum::<f64>() - 1.0).abs() <= PROB_TOL
        });
        report.record(6, ok);
    }
}

/// Runs [`check_instance`] on one random game per shape in
/// [`PosgShape::enumerate`], alternating overlapping and disjoint labels,
/// until at least `min_instances` games have been checked.
pub fn run_property_suite(
    seed: u64,
    max_agents: usize,
    max_size: usize,
    horizon: usize,
    min_instances: usize,
) -> PropertyReport {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let shapes = PosgShape::enumerate(max_agents, max_size);
    let mut report = PropertyReport::new();
    let total = shapes.len().max(min_instances);
    for k in 0..total {
        let g = random_posg(&shapes[k % shapes.len()], k % 2 == 1, &mut rng);
        check_instance(&g, horizon, &mut rng, &mut report);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny(obs: [Vec<u32>; 2]) -> Posg {
        let observations: Vec<Vec<Observation>> = obs
            .iter()
            .map(|o| o.iter().copied().map(Observation::new).collect())
            .collect();
        let obs_fn = observations
            .iter()
            .map(|o| {
                let m = o.len();
                (0..2).flat_map(|_| {
                    let mut row = vec![0.0; m];
                    row[0] = 1.0;
                    row
                })
                .collect()
            })
            .collect();
        Posg {
            n_states: 1,
            actions: vec![vec![0, 1], vec![2]],
            observations,
            initial: vec![1.0],
            transition: vec![1.0, 1.0],
            rewards: vec![vec![1.0, 0.0], vec![0.5, 0.5]],
            obs_fn,
        }
    }

    #[test]
    fn disjointness_examples() {
        let g = tiny([vec![0, 1], vec![2]]);
        g.validate().unwrap();
        assert!(observation_spaces_disjoint(&g));
        let shared = tiny([vec![0], vec![0]]);
        assert!(!observation_spaces_disjoint(&shared));
        let tagged = apply_agent_indication(&shared);
        assert!(observation_spaces_disjoint(&tagged));
        assert_eq!(tagged.observations[0][0], Observation { symbol: 0, tags: vec![0] });
        assert_eq!(tagged.observations[1][0], Observation { symbol: 0, tags: vec![1] });
        let twice = apply_agent_indication(&tagged);
        assert_eq!(twice.observations[1][0].tags, vec![1, 1]);
    }

    #[test]
    fn merge_zeroes_cross_agent_actions() {
        let g = tiny([vec![0, 1], vec![2]]);
        let p0 = Policy {
            owner: PolicyOwner::Agent(0),
            table: BTreeMap::from([
                ((Observation::new(0), 0), 1.0),
                ((Observation::new(1), 1), 1.0),
            ]),
        };
        let p1 = Policy {
            owner: PolicyOwner::Agent(1),
            table: BTreeMap::from([((Observation::new(2), 2), 1.0)]),
        };
        let merged = merge_policies(&g, &[p0, p1]).unwrap();
        assert_eq!(merged.owner, PolicyOwner::Shared);
        assert_eq!(merged.prob(&Observation::new(0), 0), 1.0);
        assert_eq!(merged.prob(&Observation::new(0), 2), 0.0);
        assert_eq!(merged.prob(&Observation::new(2), 2), 1.0);
        assert_eq!(merged.prob(&Observation::new(2), 0), 0.0);
        let all: Vec<ActionId> = g.action_union().into_iter().collect();
        merged
            .validate(&g.observation_union().into_iter().collect::<Vec<_>>(), &all)
            .unwrap();
    }

    #[test]
    fn merge_rejects_overlap() {
        let g = tiny([vec![0], vec![0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ps = vec![Policy::random(&g, 0, &mut rng), Policy::random(&g, 1, &mut rng)];
        assert!(matches!(
            merge_policies(&g, &ps),
            Err(PosgError::NotDisjoint { .. })
        ));
    }

    #[test]
    fn merge_restriction_five_agents() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let shape = PosgShape {
            n_states: 2,
            action_sizes: vec![2, 3, 1, 2, 3],
            obs_sizes: vec![3, 1, 2, 2, 3],
        };
        let g = random_posg(&shape, true, &mut rng);
        assert!(observation_spaces_disjoint(&g));
        let ps: Vec<Policy> = (0..5).map(|i| Policy::random(&g, i, &mut rng)).collect();
        let merged = merge_policies(&g, &ps).unwrap();
        for (i, p) in ps.iter().enumerate() {
            for o in &g.observations[i] {
                for &a in &g.actions[i] {
                    assert_eq!(merged.prob(o, a), p.prob(o, a));
                }
            }
        }
    }

    #[test]
    fn padding_examples() {
        let p = pad_observation(&[1.0, 2.0], 4, Some(3)).unwrap();
        assert_eq!(p.data, vec![1.0, 2.0, 0.0, 3.0]);
        assert_eq!(p.decoded_id(), Some(3));
        assert_eq!(pad_observation(&[1.0, 2.0, 3.0], 3, None).unwrap().data, vec![1.0, 2.0, 3.0]);
        assert_eq!(pad_observation(&[], 2, Some(0)).unwrap().data, vec![0.0, 0.0]);
        assert!(pad_observation(&[1.0, 2.0, 3.0], 3, Some(0)).is_err());
        let one_hot =
            pad_observation_with(&[5.0], 4, Some(1), IdEncoding::OneHot { n_agents: 2 }).unwrap();
        assert_eq!(one_hot.data, vec![5.0, 0.0, 0.0, 1.0]);
        assert_eq!(one_hot.decoded_id(), Some(1));
    }

    #[test]
    fn trim_examples() {
        assert_eq!(trim_action_vector(&[0.5, 0.5, 0.0, 0.0], 2).unwrap(), vec![0.5, 0.5]);
        // 0.2 / (0.2 + 0.2) on each side
        assert_eq!(trim_action_vector(&[0.2, 0.2, 0.6], 2).unwrap(), vec![0.5, 0.5]);
        assert_eq!(trim_action_vector(&[0.0, 0.0, 1.0], 2).unwrap(), vec![0.5, 0.5]);
        assert!(trim_action_vector(&[0.5], 0).is_err());
        assert!(trim_action_vector(&[0.5], 2).is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shape = PosgShape {
            n_states: 2,
            action_sizes: vec![2, 2],
            obs_sizes: vec![2, 3],
        };
        let g = random_posg(&shape, false, &mut rng);
        let back = Posg::from_json(&g.to_json()).unwrap();
        assert_eq!(back, g);
        assert!(Posg::from_json("{\"n_states\": 1}").is_err());
    }

    #[test]
    fn shape_enumeration_counts() {
        // (9 + 81 + 729) agent combos times 3 state counts
        assert_eq!(PosgShape::enumerate(3, 3).len(), 3 * (9 + 81 + 729));
    }

    #[test]
    fn expected_returns_one_state() {
        // One state, agent 0 plays action 0 with prob 1 → reward 1, agent 1 gets 0.5.
        let g = tiny([vec![0, 1], vec![2]]);
        let p0 = Policy {
            owner: PolicyOwner::Agent(0),
            table: BTreeMap::from([
                ((Observation::new(0), 0), 1.0),
                ((Observation::new(1), 0), 1.0),
            ]),
        };
        let p1 = Policy {
            owner: PolicyOwner::Agent(1),
            table: BTreeMap::from([((Observation::new(2), 2), 1.0)]),
        };
        let r = expected_returns(&g, &[&p0, &p1], 4);
        assert!((r[0] - 4.0).abs() < 1e-12);
        assert!((r[1] - 2.0).abs() < 1e-12);
    }
}
