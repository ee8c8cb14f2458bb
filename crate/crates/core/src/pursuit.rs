//! Pursuit gridworld: pursuers try to surround randomly moving evaders.
//!
//! Coordinates are `(x, y)` with `y` growing downward, so `Up` decreases `y`.
//! One step runs in a fixed order: pursuers move simultaneously, evaders move
//! one at a time in index order, touch rewards are paid, then captures are
//! resolved.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PursuitError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("expected {expected} actions, got {got}")]
    JointAction { expected: usize, got: usize },
    #[error("pursuer {0} does not exist")]
    UnknownPursuer(usize),
}

pub type Result<T> = std::result::Result<T, PursuitError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PursuitConfig {
    pub grid_w: usize,
    pub grid_h: usize,
    pub n_pursuers: usize,
    pub n_evaders: usize,
    pub obs_range: usize,
    pub max_steps: u32,
    pub capture_reward: f64,
    pub touch_reward: f64,
    pub seed: u64,
}

impl Default for PursuitConfig {
    fn default() -> Self {
        PursuitConfig {
            grid_w: 16,
            grid_h: 16,
            n_pursuers: 8,
            n_evaders: 30,
            obs_range: 7,
            max_steps: 500,
            capture_reward: 5.0,
            touch_reward: 0.01,
            seed: 0,
        }
    }
}

impl PursuitConfig {
    /// 8×8 grid, 4 pursuers, 6 evaders, 5×5 windows.
    pub fn small() -> Self {
        PursuitConfig {
            grid_w: 8,
            grid_h: 8,
            n_pursuers: 4,
            n_evaders: 6,
            obs_range: 5,
            ..PursuitConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.obs_range < 3 || self.obs_range.is_multiple_of(2) {
            return Err(PursuitError::Config(format!(
                "obs_range must be odd and at least 3, got {}",
                self.obs_range
            )));
        }
        if self.grid_w == 0 || self.grid_h == 0 {
            return Err(PursuitError::Config("grid must be non-empty".into()));
        }
        if self.max_steps == 0 {
            return Err(PursuitError::Config("max_steps must be positive".into()));
        }
        if !(self.capture_reward.is_finite() && self.touch_reward.is_finite()) {
            return Err(PursuitError::Config("rewards must be finite".into()));
        }
        let free = self.grid_w * self.grid_h - self.obstacle_size().0 * self.obstacle_size().1;
        if self.n_pursuers + self.n_evaders > free {
            return Err(PursuitError::Config(format!(
                "{} entities do not fit into {free} free cells",
                self.n_pursuers + self.n_evaders
            )));
        }
        Ok(())
    }

    /// Obstacle extent `(⌈w/4⌉, ⌈h/4⌉)`.
    pub fn obstacle_size(&self) -> (usize, usize) {
        (self.grid_w.div_ceil(4), self.grid_h.div_ceil(4))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl Action {
    pub const ALL: [Action; 5] = [Action::Up, Action::Down, Action::Left, Action::Right, Action::Stay];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Action {
        Action::ALL[i]
    }

    fn delta(self) -> (i64, i64) {
        match self {
            Action::Up => (0, -1),
            Action::Down => (0, 1),
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
            Action::Stay => (0, 0),
        }
    }
}

pub type Pos = (usize, usize);

const CARDINALS: [(i64, i64); 4] = [(0, -1), (0, 1), (-1, 0), (1, 0)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cell {
    Free,
    Obstacle,
    Pursuer,
    Evader,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Touch { pursuer: usize, evader: usize },
    Capture { evader: usize, pursuers: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub rewards: Vec<f64>,
    pub done: bool,
    pub events: Vec<Event>,
}

/// Grid occupancy plus the seeded evader movement stream.
#[derive(Debug, Clone, PartialEq)]
pub struct PursuitState {
    pub pursuers: Vec<Pos>,
    /// Indexed by evader id; `None` once captured.
    pub evaders: Vec<Option<Pos>>,
    obstacle: Vec<bool>,
    cells: Vec<Cell>,
    pub step: u32,
    rng: ChaCha8Rng,
}

impl PursuitState {
    pub fn is_obstacle(&self, w: usize, p: Pos) -> bool {
        self.obstacle[p.1 * w + p.0]
    }

    pub fn alive_evaders(&self) -> usize {
        self.evaders.iter().filter(|e| e.is_some()).count()
    }
}

/// Three `obs_range × obs_range` binary planes centered on the observer,
/// stored row-major per plane: pursuers, evaders, obstacles.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PursuitObservation {
    pub range: usize,
    pub data: Vec<u8>,
}

impl PursuitObservation {
    pub const PURSUERS: usize = 0;
    pub const EVADERS: usize = 1;
    pub const OBSTACLES: usize = 2;

    /// Value at offset `(dx, dy)` from the observer.
    pub fn get(&self, plane: usize, dx: i64, dy: i64) -> u8 {
        let half = (self.range / 2) as i64;
        let (c, r) = ((dx + half) as usize, (dy + half) as usize);
        self.data[plane * self.range * self.range + r * self.range + c]
    }

    pub fn plane(&self, plane: usize) -> &[u8] {
        let n = self.range * self.range;
        &self.data[plane * n..(plane + 1) * n]
    }
}

#[derive(Debug, Clone)]
pub struct PursuitEnv {
    config: PursuitConfig,
    state: PursuitState,
}

impl PursuitEnv {
    /// Places the obstacle, then pursuers and evaders on distinct free cells.
    pub fn reset(config: &PursuitConfig) -> Result<Self> {
        config.validate()?;
        let (w, h) = (config.grid_w, config.grid_h);
        let (ow, oh) = config.obstacle_size();
        let (ox, oy) = ((w - ow) / 2, (h - oh) / 2);
        let mut obstacle = vec![false; w * h];
        for y in oy..oy + oh {
            for x in ox..ox + ow {
                obstacle[y * w + x] = true;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut free: Vec<Pos> = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .filter(|&(x, y)| !obstacle[y * w + x])
            .collect();
        let (chosen, _) = free.partial_shuffle(&mut rng, config.n_pursuers + config.n_evaders);
        let pursuers = chosen[..config.n_pursuers].to_vec();
        let evaders = chosen[config.n_pursuers..].iter().map(|&p| Some(p)).collect();
        let mut state = PursuitState {
            pursuers,
            evaders,
            cells: Vec::new(),
            obstacle,
            step: 0,
            rng,
        };
        state.cells = rebuild_cells(&state, w);
        Ok(PursuitEnv {
            config: config.clone(),
            state,
        })
    }

    pub fn config(&self) -> &PursuitConfig {
        &self.config
    }

    pub fn state(&self) -> &PursuitState {
        &self.state
    }

    pub fn n_pursuers(&self) -> usize {
        self.config.n_pursuers
    }

    pub fn is_done(&self) -> bool {
        self.state.step >= self.config.max_steps || self.state.alive_evaders() == 0
    }

    fn offset(&self, p: Pos, d: (i64, i64)) -> Option<Pos> {
        let x = p.0 as i64 + d.0;
        let y = p.1 as i64 + d.1;
        if x < 0 || y < 0 || x >= self.config.grid_w as i64 || y >= self.config.grid_h as i64 {
            None
        } else {
            Some((x as usize, y as usize))
        }
    }

    fn cell(&self, p: Pos) -> Cell {
        self.state.cells[p.1 * self.config.grid_w + p.0]
    }

    fn set_cell(&mut self, p: Pos, c: Cell) {
        let w = self.config.grid_w;
        self.state.cells[p.1 * w + p.0] = c;
    }

    pub fn observe(&self, i: usize) -> Result<PursuitObservation> {
        let mut obs = PursuitObservation {
            range: self.config.obs_range,
            data: Vec::new(),
        };
        self.observe_into(i, &mut obs)?;
        Ok(obs)
    }

    /// Like [`observe`](Self::observe) but reuses `out`'s buffer.
    pub fn observe_into(&self, i: usize, out: &mut PursuitObservation) -> Result<()> {
        let &center = self
            .state
            .pursuers
            .get(i)
            .ok_or(PursuitError::UnknownPursuer(i))?;
        let r = self.config.obs_range;
        let half = (r / 2) as i64;
        out.range = r;
        out.data.clear();
        out.data.resize(3 * r * r, 0);
        let plane = r * r;
        for dy in -half..=half {
            for dx in -half..=half {
                let idx = ((dy + half) as usize) * r + (dx + half) as usize;
                match self.offset(center, (dx, dy)).map(|p| self.cell(p)) {
                    None | Some(Cell::Obstacle) => out.data[2 * plane + idx] = 1,
                    Some(Cell::Pursuer) => out.data[idx] = 1,
                    Some(Cell::Evader) => out.data[plane + idx] = 1,
                    Some(Cell::Free) => {}
                }
            }
        }
        Ok(())
    }

    pub fn step(&mut self, actions: &[Action]) -> Result<StepOutcome> {
        let n = self.config.n_pursuers;
        if actions.len() != n {
            return Err(PursuitError::JointAction {
                expected: n,
                got: actions.len(),
            });
        }
        self.move_pursuers(actions);
        self.move_evaders();

        let mut rewards = vec![0.0; n];
        let mut events = Vec::new();
        let pursuer_at = |env: &Self, p: Pos| env.state.pursuers.iter().position(|&q| q == p);

        for (e, pos) in self.state.evaders.iter().enumerate() {
            let Some(pos) = *pos else { continue };
            for d in CARDINALS {
                if let Some(q) = self.offset(pos, d) {
                    if self.cell(q) == Cell::Pursuer {
                        let i = pursuer_at(self, q).expect("pursuer cell has a pursuer");
                        rewards[i] += self.config.touch_reward;
                        events.push(Event::Touch { pursuer: i, evader: e });
                    }
                }
            }
        }

        for e in 0..self.state.evaders.len() {
            let Some(pos) = self.state.evaders[e] else { continue };
            let mut surrounding = Vec::new();
            let mut enclosed = true;
            for d in CARDINALS {
                match self.offset(pos, d).map(|q| (q, self.cell(q))) {
                    None | Some((_, Cell::Obstacle)) => {}
                    Some((q, Cell::Pursuer)) => {
                        surrounding.push(pursuer_at(self, q).expect("pursuer cell has a pursuer"))
                    }
                    Some(_) => enclosed = false,
                }
            }
            if enclosed && !surrounding.is_empty() {
                surrounding.sort_unstable();
                for &i in &surrounding {
                    rewards[i] += self.config.capture_reward;
                }
                self.state.evaders[e] = None;
                self.set_cell(pos, Cell::Free);
                events.push(Event::Capture {
                    evader: e,
                    pursuers: surrounding,
                });
            }
        }

        self.state.step += 1;
        Ok(StepOutcome {
            rewards,
            done: self.is_done(),
            events,
        })
    }

    /// Simultaneous move. Targets off-grid, on the obstacle or on an evader
    /// become stays; a cell wanted by several movers goes to the lowest index;
    /// a mover into a cell whose occupant stays is blocked. Blocking repeats
    /// until nothing changes.
    fn move_pursuers(&mut self, actions: &[Action]) {
        let current = self.state.pursuers.clone();
        let mut target: Vec<Pos> = current
            .iter()
            .zip(actions)
            .map(|(&p, a)| match self.offset(p, a.delta()) {
                Some(q) if matches!(self.cell(q), Cell::Free | Cell::Pursuer) => q,
                _ => p,
            })
            .collect();
        loop {
            let mut changed = false;
            for i in 0..target.len() {
                if target[i] == current[i] {
                    continue;
                }
                let blocked_by_stayer = (0..target.len())
                    .any(|j| j != i && current[j] == target[i] && target[j] == current[j]);
                let lost_contest = (0..i).any(|j| target[j] == target[i] && target[j] != current[j]);
                if blocked_by_stayer || lost_contest {
                    target[i] = current[i];
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        for &p in &current {
            self.set_cell(p, Cell::Free);
        }
        for &p in &target {
            self.set_cell(p, Cell::Pursuer);
        }
        self.state.pursuers = target;
    }

    fn move_evaders(&mut self) {
        let mut options: Vec<Pos> = Vec::with_capacity(5);
        for e in 0..self.state.evaders.len() {
            let Some(pos) = self.state.evaders[e] else { continue };
            options.clear();
            options.push(pos);
            for d in CARDINALS {
                if let Some(q) = self.offset(pos, d) {
                    if self.cell(q) == Cell::Free {
                        options.push(q);
                    }
                }
            }
            let next = options[self.state.rng.gen_range(0..options.len())];
            if next != pos {
                self.set_cell(pos, Cell::Free);
                self.set_cell(next, Cell::Evader);
                self.state.evaders[e] = Some(next);
            }
        }
    }

    /// Replaces entity positions; used to set up hand-traced scenarios.
    pub fn set_positions(&mut self, pursuers: Vec<Pos>, evaders: Vec<Option<Pos>>) -> Result<()> {
        if pursuers.len() != self.config.n_pursuers {
            return Err(PursuitError::Config("pursuer count must not change".into()));
        }
        let w = self.config.grid_w;
        let mut seen = std::collections::BTreeSet::new();
        for &p in pursuers.iter().chain(evaders.iter().flatten()) {
            if p.0 >= w || p.1 >= self.config.grid_h || self.state.obstacle[p.1 * w + p.0] {
                return Err(PursuitError::Config(format!("position {p:?} is not a free cell")));
            }
            if !seen.insert(p) {
                return Err(PursuitError::Config(format!("position {p:?} used twice")));
            }
        }
        self.state.pursuers = pursuers;
        self.state.evaders = evaders;
        self.state.cells = rebuild_cells(&self.state, w);
        Ok(())
    }
}

fn rebuild_cells(state: &PursuitState, w: usize) -> Vec<Cell> {
    let mut cells: Vec<Cell> = state
        .obstacle
        .iter()
        .map(|&o| if o { Cell::Obstacle } else { Cell::Free })
        .collect();
    for &(x, y) in &state.pursuers {
        cells[y * w + x] = Cell::Pursuer;
    }
    for &(x, y) in state.evaders.iter().flatten() {
        cells[y * w + x] = Cell::Evader;
    }
    cells
}

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl MeanStderr {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return MeanStderr {
                mean: 0.0,
                stderr: 0.0,
                n,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        MeanStderr { mean, stderr, n }
    }
}

/// Seed of episode `episode` in a run seeded with `base`.
pub fn episode_seed(base: u64, episode: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = base
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(episode.wrapping_add(1).wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs one episode with `act` choosing each pursuer's action from its
/// observation. Returns the reward summed over agents and steps.
pub fn run_episode<F>(config: &PursuitConfig, mut act: F) -> Result<f64>
where
    F: FnMut(usize, &PursuitObservation) -> Action,
{
    let mut env = PursuitEnv::reset(config)?;
    let n = env.n_pursuers();
    let mut obs = PursuitObservation {
        range: config.obs_range,
        data: Vec::new(),
    };
    let mut actions = vec![Action::Stay; n];
    let mut total = 0.0;
    while !env.is_done() {
        for (i, a) in actions.iter_mut().enumerate() {
            env.observe_into(i, &mut obs)?;
            *a = act(i, &obs);
        }
        let out = env.step(&actions)?;
        total += out.rewards.iter().sum::<f64>();
    }
    Ok(total)
}

/// Like [`run_episode`], keeping one record per step.
pub fn record_episode<F>(config: &PursuitConfig, mut act: F) -> Result<Vec<StepRecord>>
where
    F: FnMut(usize, &PursuitObservation) -> Action,
{
    let mut env = PursuitEnv::reset(config)?;
    let n = env.n_pursuers();
    let mut obs = PursuitObservation {
        range: config.obs_range,
        data: Vec::new(),
    };
    let mut records = Vec::new();
    while !env.is_done() {
        let mut actions = Vec::with_capacity(n);
        for i in 0..n {
            env.observe_into(i, &mut obs)?;
            actions.push(act(i, &obs));
        }
        let out = env.step(&actions)?;
        let state = env.state();
        records.push(StepRecord {
            t: state.step,
            pursuers: state.pursuers.clone(),
            evaders: state.evaders.clone(),
            actions,
            rewards: out.rewards,
            events: out.events,
        });
    }
    Ok(records)
}

/// Total reward of uniformly random joint actions over `episodes` episodes.
pub fn random_baseline(config: &PursuitConfig, episodes: usize) -> Result<MeanStderr> {
    config.validate()?;
    let mut totals = Vec::with_capacity(episodes);
    for e in 0..episodes as u64 {
        let env_config = PursuitConfig {
            seed: episode_seed(config.seed, e),
            ..config.clone()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(episode_seed(!config.seed, e));
        totals.push(run_episode(&env_config, |_, _| {
            Action::from_index(rng.gen_range(0..Action::ALL.len()))
        })?);
    }
    Ok(MeanStderr::from_samples(&totals))
}

/// One line of a trajectory dump.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: u32,
    pub pursuers: Vec<Pos>,
    pub evaders: Vec<Option<Pos>>,
    pub actions: Vec<Action>,
    pub rewards: Vec<f64>,
    pub events: Vec<Event>,
}

impl StepRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("step record serializes")
    }
}
