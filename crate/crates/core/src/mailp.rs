//! Discrete-time simulator for multi-agent informational learning processes.
//!
//! Every agent `i` holds information `I_{i,χ}` about a set of targets χ: the
//! environment, or a group of other agents. Each step an agent gains
//!
//! ```text
//! gain(i, χ) = K_{i,χ} · Λ(C_{i,χ} − I_{i,χ}(t−1))
//! ```
//!
//! and loses part of what it knows about a group `G` whenever the members of
//! `G` learn something themselves:
//!
//! ```text
//! loss(i, G) = gain(G) · I_{i,G}(t−1) / (I_G(t−1) + gain(G))
//! ```
//!
//! All right-hand sides read the state at `t−1`; the update is synchronous.
//! Environment targets never lose information.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used for every state invariant.
pub const TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MailpError {
    #[error("agent {agent} has no target {target}")]
    MissingTarget { agent: usize, target: TargetKey },
    #[error("agent {0} is out of range")]
    UnknownAgent(usize),
    #[error("group target must not be empty")]
    EmptyGroup,
    #[error("invalid structure: {0}")]
    Structure(String),
    #[error("invariant violated for agent {agent}, target {target}: {detail}")]
    Invariant {
        agent: usize,
        target: TargetKey,
        detail: String,
    },
    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, MailpError>;

/// Per-step information acquisition profile `Λ`.
///
/// Every variant satisfies `0 ≤ Λ(x) ≤ x` and is nondecreasing on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LearningFunction {
    Identity,
    /// `Λ(x) = βx` with `β ∈ (0, 1]`.
    Scaled { beta: f64 },
    /// `Λ(x) = x·c / (c + x)` with `c > 0`.
    Saturating { c: f64 },
}

impl LearningFunction {
    pub fn scaled(beta: f64) -> Result<Self> {
        let f = LearningFunction::Scaled { beta };
        f.validate()?;
        Ok(f)
    }

    pub fn saturating(c: f64) -> Result<Self> {
        let f = LearningFunction::Saturating { c };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LearningFunction::Identity => Ok(()),
            LearningFunction::Scaled { beta } if beta > 0.0 && beta <= 1.0 => Ok(()),
            LearningFunction::Scaled { beta } => Err(MailpError::Precondition(format!(
                "scaled learning function needs beta in (0,1], got {beta}"
            ))),
            LearningFunction::Saturating { c } if c > 0.0 && c.is_finite() => Ok(()),
            LearningFunction::Saturating { c } => Err(MailpError::Precondition(format!(
                "saturating learning function needs c > 0, got {c}"
            ))),
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            LearningFunction::Identity => x,
            LearningFunction::Scaled { beta } => beta * x,
            LearningFunction::Saturating { c } => {
                if x <= 0.0 {
                    0.0
                } else {
                    x * c / (c + x)
                }
            }
        }
    }
}

impl fmt::Display for LearningFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearningFunction::Identity => write!(f, "identity"),
            LearningFunction::Scaled { beta } => write!(f, "scaled({beta})"),
            LearningFunction::Saturating { c } => write!(f, "saturating({c})"),
        }
    }
}

/// What a piece of an agent's information is about.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKey {
    Env,
    Group(BTreeSet<usize>),
}

impl TargetKey {
    pub fn agent(j: usize) -> Self {
        TargetKey::Group(BTreeSet::from([j]))
    }

    pub fn group<I: IntoIterator<Item = usize>>(members: I) -> Self {
        TargetKey::Group(members.into_iter().collect())
    }

    pub fn members(&self) -> Option<&BTreeSet<usize>> {
        match self {
            TargetKey::Env => None,
            TargetKey::Group(g) => Some(g),
        }
    }
}

impl fmt::Display for TargetKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetKey::Env => write!(f, "env"),
            TargetKey::Group(g) => {
                write!(f, "{{")?;
                for (k, j) in g.iter().enumerate() {
                    if k > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{j}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

/// Coordination and centralization coefficients of one `(agent, target)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub coordination: f64,
    pub centralization: f64,
}

/// Coordination tensor `C`, centralization tensor `K` and learning function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MailpSpec {
    n_agents: usize,
    targets: Vec<BTreeMap<TargetKey, Coefficients>>,
    learning_fn: LearningFunction,
}

impl MailpSpec {
    /// Validates and builds a spec. `targets[i]` lists every target of agent `i`.
    pub fn new(
        targets: Vec<BTreeMap<TargetKey, Coefficients>>,
        learning_fn: LearningFunction,
    ) -> Result<Self> {
        learning_fn.validate()?;
        let n_agents = targets.len();
        if n_agents == 0 {
            return Err(MailpError::Structure("at least one agent required".into()));
        }
        for (i, row) in targets.iter().enumerate() {
            let mut total = 0.0;
            for (key, c) in row {
                if let TargetKey::Group(g) = key {
                    if g.is_empty() {
                        return Err(MailpError::EmptyGroup);
                    }
                    if g.contains(&i) {
                        return Err(MailpError::Structure(format!(
                            "agent {i} cannot hold target {key} containing itself"
                        )));
                    }
                    if let Some(&j) = g.iter().find(|&&j| j >= n_agents) {
                        return Err(MailpError::UnknownAgent(j));
                    }
                }
                if !(c.coordination >= 0.0 && c.coordination.is_finite()) {
                    return Err(MailpError::Invariant {
                        agent: i,
                        target: key.clone(),
                        detail: format!("coordination {} is negative", c.coordination),
                    });
                }
                if !(c.centralization > 0.0 && c.centralization <= 1.0) {
                    return Err(MailpError::Invariant {
                        agent: i,
                        target: key.clone(),
                        detail: format!("centralization {} outside (0,1]", c.centralization),
                    });
                }
                total += c.coordination;
            }
            if (total - 1.0).abs() > TOLERANCE {
                return Err(MailpError::Structure(format!(
                    "coordination of agent {i} sums to {total}, expected 1"
                )));
            }
        }
        Ok(MailpSpec {
            n_agents,
            targets,
            learning_fn,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn learning_fn(&self) -> LearningFunction {
        self.learning_fn
    }

    pub fn targets(&self, i: usize) -> Result<&BTreeMap<TargetKey, Coefficients>> {
        self.targets.get(i).ok_or(MailpError::UnknownAgent(i))
    }

    pub fn coefficients(&self, i: usize, key: &TargetKey) -> Result<Coefficients> {
        self.targets(i)?
            .get(key)
            .copied()
            .ok_or_else(|| MailpError::MissingTarget {
                agent: i,
                target: key.clone(),
            })
    }

    /// A state at `t = 0` with every entry zero.
    pub fn zero_state(&self) -> InformationState {
        InformationState {
            t: 0,
            info: self
                .targets
                .iter()
                .map(|row| row.keys().map(|k| (k.clone(), 0.0)).collect())
                .collect(),
        }
    }
}

/// Information tensor `I_{i,χ}(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InformationState {
    pub t: u64,
    info: Vec<BTreeMap<TargetKey, f64>>,
}

impl InformationState {
    pub fn get(&self, i: usize, key: &TargetKey) -> Result<f64> {
        self.info
            .get(i)
            .ok_or(MailpError::UnknownAgent(i))?
            .get(key)
            .copied()
            .ok_or_else(|| MailpError::MissingTarget {
                agent: i,
                target: key.clone(),
            })
    }

    pub fn set(&mut self, i: usize, key: &TargetKey, value: f64) -> Result<()> {
        let slot = self
            .info
            .get_mut(i)
            .ok_or(MailpError::UnknownAgent(i))?
            .get_mut(key)
            .ok_or_else(|| MailpError::MissingTarget {
                agent: i,
                target: key.clone(),
            })?;
        *slot = value;
        Ok(())
    }

    pub fn n_agents(&self) -> usize {
        self.info.len()
    }

    pub fn entries(&self, i: usize) -> impl Iterator<Item = (&TargetKey, f64)> {
        self.info[i].iter().map(|(k, v)| (k, *v))
    }

    /// Total information `I_i = Σ_χ I_{i,χ}` of agent `i`.
    pub fn total(&self, i: usize) -> f64 {
        self.info[i].values().sum()
    }

    pub fn totals(&self) -> Vec<f64> {
        (0..self.info.len()).map(|i| self.total(i)).collect()
    }

    /// Sum of the members' total information.
    pub fn group_total(&self, group: &BTreeSet<usize>) -> f64 {
        group.iter().map(|&j| self.total(j)).sum()
    }

    /// Checks `0 ≤ I_{i,χ} ≤ C_{i,χ}` and `I_i ∈ [0, 1]` within [`TOLERANCE`].
    pub fn validate(&self, spec: &MailpSpec) -> Result<()> {
        if self.info.len() != spec.n_agents {
            return Err(MailpError::Structure(format!(
                "state has {} agents, spec has {}",
                self.info.len(),
                spec.n_agents
            )));
        }
        for (i, row) in self.info.iter().enumerate() {
            let targets = &spec.targets[i];
            if row.len() != targets.len() || row.keys().any(|k| !targets.contains_key(k)) {
                return Err(MailpError::Structure(format!(
                    "state targets of agent {i} do not match the spec"
                )));
            }
            for (key, &value) in row {
                check_entry(i, key, value, targets[key].coordination)?;
            }
            let total = self.total(i);
            if !(-TOLERANCE..=1.0 + TOLERANCE).contains(&total) {
                return Err(MailpError::Invariant {
                    agent: i,
                    target: TargetKey::Env,
                    detail: format!("total information {total} outside [0,1]"),
                });
            }
        }
        Ok(())
    }
}

fn check_entry(i: usize, key: &TargetKey, value: f64, coordination: f64) -> Result<()> {
    if !value.is_finite() || value < -TOLERANCE || value > coordination + TOLERANCE {
        return Err(MailpError::Invariant {
            agent: i,
            target: key.clone(),
            detail: format!("information {value} outside [0, {coordination}]"),
        });
    }
    Ok(())
}

/// `K_{i,χ} · Λ(C_{i,χ} − I_{i,χ})` for the state at `t−1`.
pub fn info_gain(
    state: &InformationState,
    spec: &MailpSpec,
    i: usize,
    key: &TargetKey,
) -> Result<f64> {
    let c = spec.coefficients(i, key)?;
    let current = state.get(i, key)?;
    check_entry(i, key, current, c.coordination)?;
    let gap = (c.coordination - current).max(0.0);
    Ok(c.centralization * spec.learning_fn.eval(gap))
}

/// Aggregate gain of all members of `group`, summed over each member's targets.
pub fn group_info_gain(
    state: &InformationState,
    spec: &MailpSpec,
    group: &BTreeSet<usize>,
) -> Result<f64> {
    if group.is_empty() {
        return Err(MailpError::EmptyGroup);
    }
    let mut total = 0.0;
    for &j in group {
        for key in spec.targets(j)?.keys() {
            total += info_gain(state, spec, j, key)?;
        }
    }
    Ok(total)
}

/// Nonstationarity loss for raw inputs: what agent `i` knew about the group,
/// the group's own information and the group's gain this step.
pub fn loss_term(group_gain: f64, held: f64, group_info: f64) -> Result<f64> {
    if group_gain < 0.0 || held < -TOLERANCE || group_info < 0.0 {
        return Err(MailpError::Precondition(format!(
            "loss inputs must be nonnegative (gain {group_gain}, held {held}, group {group_info})"
        )));
    }
    let denom = group_info + group_gain;
    if group_gain == 0.0 || held <= 0.0 || denom == 0.0 {
        return Ok(0.0);
    }
    Ok(group_gain * held / denom)
}

/// Information agent `i` loses about group `key` this step.
pub fn info_loss(
    state: &InformationState,
    spec: &MailpSpec,
    i: usize,
    key: &TargetKey,
) -> Result<f64> {
    let group = match key {
        TargetKey::Env => {
            return Err(MailpError::Precondition(
                "the environment target has no loss term".into(),
            ))
        }
        TargetKey::Group(g) => g,
    };
    spec.coefficients(i, key)?;
    let gain = group_info_gain(state, spec, group)?;
    loss_term(gain, state.get(i, key)?, state.group_total(group))
}

/// Per-entry decomposition of one synchronous update.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDeltas {
    pub gain: Vec<BTreeMap<TargetKey, f64>>,
    pub loss: Vec<BTreeMap<TargetKey, f64>>,
}

/// Computes every gain and loss from the state at `t−1` without applying them.
pub fn step_deltas(state: &InformationState, spec: &MailpSpec) -> Result<StepDeltas> {
    state.validate(spec)?;
    let n = spec.n_agents;
    let mut gain = Vec::with_capacity(n);
    let mut agent_gain = vec![0.0; n];
    for (i, total) in agent_gain.iter_mut().enumerate() {
        let mut row = BTreeMap::new();
        for key in spec.targets[i].keys() {
            let g = info_gain(state, spec, i, key)?;
            *total += g;
            row.insert(key.clone(), g);
        }
        gain.push(row);
    }
    let totals = state.totals();
    let mut loss = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = BTreeMap::new();
        for key in spec.targets[i].keys() {
            let l = match key {
                TargetKey::Env => 0.0,
                TargetKey::Group(g) => {
                    let group_gain: f64 = g.iter().map(|&j| agent_gain[j]).sum();
                    let group_info: f64 = g.iter().map(|&j| totals[j]).sum();
                    loss_term(group_gain, state.get(i, key)?, group_info)?
                }
            };
            row.insert(key.clone(), l);
        }
        loss.push(row);
    }
    Ok(StepDeltas { gain, loss })
}

/// Advances the state by one synchronous step.
pub fn step(state: &InformationState, spec: &MailpSpec) -> Result<InformationState> {
    let deltas = step_deltas(state, spec)?;
    let mut next = state.clone();
    next.t += 1;
    for (i, row) in next.info.iter_mut().enumerate() {
        for (key, value) in row.iter_mut() {
            *value += deltas.gain[i][key] - deltas.loss[i][key];
            check_entry(i, key, *value, spec.targets[i][key].coordination)?;
        }
    }
    next.validate(spec)?;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub converged: bool,
    /// First step where every agent reached `1 − ε`; the final step otherwise.
    pub steps: u64,
    pub trajectory: Vec<(u64, Vec<f64>)>,
    pub final_state: InformationState,
}

/// Steps until `min_i I_i(t) ≥ 1 − ε` or `max_t` steps have been taken.
pub fn run_until(
    state: &InformationState,
    spec: &MailpSpec,
    eps: f64,
    max_t: u64,
) -> Result<ConvergenceReport> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(MailpError::Precondition(format!(
            "epsilon must lie in (0,1], got {eps}"
        )));
    }
    if max_t == 0 {
        return Err(MailpError::Precondition("max_t must be at least 1".into()));
    }
    state.validate(spec)?;
    let threshold = 1.0 - eps;
    let passed = |s: &InformationState| s.totals().iter().all(|&v| v >= threshold);

    let mut current = state.clone();
    let mut trajectory = vec![(current.t, current.totals())];
    let start = current.t;
    let mut converged = passed(&current);
    while !converged && current.t - start < max_t {
        current = step(&current, spec)?;
        trajectory.push((current.t, current.totals()));
        converged = passed(&current);
    }
    Ok(ConvergenceReport {
        converged,
        steps: current.t - start,
        trajectory,
        final_state: current,
    })
}

/// Parameters of the symmetric setting where every agent depends on every
/// other agent in equal proportion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Homogeneous {
    pub n: usize,
    pub c_env: f64,
    pub k_star: f64,
    pub learning_fn: LearningFunction,
    pub i0_star: f64,
    pub eps: f64,
}

impl Homogeneous {
    /// Pairwise coordination `C_⋆ = (1 − C_env)/(n − 1)`.
    pub fn c_star(&self) -> f64 {
        (1.0 - self.c_env) / (self.n as f64 - 1.0)
    }
}

/// Builds the symmetric spec and its initial state.
///
/// Pairwise targets are singletons with `C_⋆` and `K_⋆`; the environment target
/// uses `C_env` and `K_⋆`. Environment information starts at `(1 − ε)·C_env`
/// and every pairwise entry at `i0_star`.
pub fn homogeneous_spec(params: &Homogeneous) -> Result<(MailpSpec, InformationState)> {
    let Homogeneous {
        n,
        c_env,
        k_star,
        learning_fn,
        i0_star,
        eps,
    } = *params;
    if n < 2 {
        return Err(MailpError::Precondition(format!(
            "homogeneous setting needs n >= 2, got {n}"
        )));
    }
    if !(0.0..1.0).contains(&c_env) {
        return Err(MailpError::Precondition(format!(
            "C_env must lie in [0,1), got {c_env}"
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(MailpError::Precondition(format!(
            "epsilon must lie in (0,1), got {eps}"
        )));
    }
    let c_star = params.c_star();
    if !(0.0..=c_star).contains(&i0_star) {
        return Err(MailpError::Precondition(format!(
            "initial pairwise information {i0_star} outside [0, C_star = {c_star}]"
        )));
    }
    let targets = (0..n)
        .map(|i| {
            let mut row = BTreeMap::new();
            row.insert(
                TargetKey::Env,
                Coefficients {
                    coordination: c_env,
                    centralization: k_star,
                },
            );
            for j in (0..n).filter(|&j| j != i) {
                row.insert(
                    TargetKey::agent(j),
                    Coefficients {
                        coordination: c_star,
                        centralization: k_star,
                    },
                );
            }
            row
        })
        .collect();
    let spec = MailpSpec::new(targets, learning_fn)?;
    let mut state = spec.zero_state();
    for i in 0..n {
        state.set(i, &TargetKey::Env, (1.0 - eps) * c_env)?;
        for j in (0..n).filter(|&j| j != i) {
            state.set(i, &TargetKey::agent(j), i0_star)?;
        }
    }
    state.validate(&spec)?;
    Ok((spec, state))
}

/// One agent whose information is entirely about the environment.
pub fn single_agent_spec(
    k_env: f64,
    learning_fn: LearningFunction,
    i0: f64,
) -> Result<(MailpSpec, InformationState)> {
    let mut row = BTreeMap::new();
    row.insert(
        TargetKey::Env,
        Coefficients {
            coordination: 1.0,
            centralization: k_env,
        },
    );
    let spec = MailpSpec::new(vec![row], learning_fn)?;
    let mut state = spec.zero_state();
    state.set(0, &TargetKey::Env, i0)?;
    state.validate(&spec)?;
    Ok((spec, state))
}
