//! Training loop, hyperparameters, metrics and greedy rollouts.
//!
//! Every run draws from a single ChaCha8 generator seeded with
//! `TrainConfig::seed`. Draw order: DQN weight init (once, before the first
//! episode); then per step the ε-greedy draws for the action, followed by
//! the replay batch indices when an update happens. SARSA draws its next
//! action right after the environment step.

use std::collections::HashSet;
use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{
    dqn_update, greedy_action, qlearning_update, sarsa_update, select_action, AgentError,
    EpsilonSchedule, MlpParams, Model, QTable, ReplayBuffer, DEFAULT_LAYERS,
};
use crate::env::{Action, AgentState, EnvConfig, EnvError, StepEvent, Transition, REWARD_GOAL};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("model kind `{0}` does not match algorithm `{1}`")]
    ModelMismatch(&'static str, Algo),
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value `{value}` for `{key}`")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    #[serde(rename = "qlearning")]
    QLearning,
    Sarsa,
    Dqn,
}

impl Algo {
    pub const ALL: [Algo; 3] = [Algo::QLearning, Algo::Sarsa, Algo::Dqn];

    /// Episode budget used when none is configured.
    pub fn default_episodes(self) -> usize {
        match self {
            Algo::Dqn => 300,
            Algo::QLearning | Algo::Sarsa => 500,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Algo::QLearning => "qlearning",
            Algo::Sarsa => "sarsa",
            Algo::Dqn => "dqn",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algo {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "qlearning" => Ok(Algo::QLearning),
            "sarsa" => Ok(Algo::Sarsa),
            "dqn" => Ok(Algo::Dqn),
            other => Err(format!(
                "unknown algorithm `{other}` (expected qlearning, sarsa or dqn)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub algo: Algo,
    pub gamma: f64,
    pub eps_initial: f64,
    pub eps_final: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    /// `None` means the per-algorithm default.
    pub episodes: Option<usize>,
    pub alpha: f64,
    pub eta: f64,
    pub seed: u64,
    pub env: EnvConfig,
}

impl TrainConfig {
    pub fn new(algo: Algo, seed: u64, env: EnvConfig) -> Self {
        TrainConfig {
            algo,
            gamma: 0.99,
            eps_initial: 0.6,
            eps_final: 0.1,
            buffer_capacity: 100_000,
            batch_size: 128,
            episodes: None,
            alpha: 0.01,
            eta: 0.001,
            seed,
            env,
        }
    }

    pub fn episodes(&self) -> usize {
        self.episodes
            .unwrap_or_else(|| self.algo.default_episodes())
    }

    pub fn schedule(&self) -> EpsilonSchedule {
        EpsilonSchedule::new(self.eps_initial, self.eps_final, self.episodes())
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let invalid = |m: String| Err(TrainError::InvalidConfig(m));
        if !(0.0..1.0).contains(&self.gamma) {
            return invalid(format!("gamma must be in [0, 1), got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.eps_initial) || !(0.0..=1.0).contains(&self.eps_final) {
            return invalid("exploration rates must be in [0, 1]".into());
        }
        if self.eps_final > self.eps_initial {
            return invalid("eps_final must not exceed eps_initial".into());
        }
        if self.episodes() == 0 {
            return invalid("episodes must be at least 1".into());
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_capacity {
            return invalid("batch_size must be in 1..=buffer_capacity".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return invalid(format!("alpha must be in (0, 1], got {}", self.alpha));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return invalid(format!("eta must be positive, got {}", self.eta));
        }
        self.env.validate()?;
        Ok(())
    }

    /// Parses `key = value` lines on top of the defaults for `env`
    /// (algorithm `dqn` unless `algo` is given).
    /// Blank lines and `#` comments are ignored; unknown keys are errors.
    pub fn parse(text: &str, seed: u64, env: EnvConfig) -> Result<Self, ConfigError> {
        let mut cfg = TrainConfig::new(Algo::Dqn, seed, env);
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or(ConfigError::Syntax { line: line_no })?;
            let bad = || ConfigError::BadValue {
                line: line_no,
                key: key.to_string(),
                value: value.to_string(),
            };
            fn num<T: FromStr>(v: &str, bad: impl Fn() -> ConfigError) -> Result<T, ConfigError> {
                v.parse().map_err(|_| bad())
            }
            match key {
                "algo" => cfg.algo = value.parse().map_err(|_| bad())?,
                "gamma" => cfg.gamma = num(value, bad)?,
                "eps_initial" => cfg.eps_initial = num(value, bad)?,
                "eps_final" => cfg.eps_final = num(value, bad)?,
                "buffer_capacity" => cfg.buffer_capacity = num(value, bad)?,
                "batch_size" => cfg.batch_size = num(value, bad)?,
                "episodes" => cfg.episodes = Some(num(value, bad)?),
                "alpha" => cfg.alpha = num(value, bad)?,
                "eta" => cfg.eta = num(value, bad)?,
                "seed" => cfg.seed = num(value, bad)?,
                "step" => cfg.env.step = num(value, bad)?,
                "footprint_w" => cfg.env.footprint.0 = num(value, bad)?,
                "footprint_h" => cfg.env.footprint.1 = num(value, bad)?,
                "start_x" => cfg.env.start.x = num(value, bad)?,
                "start_y" => cfg.env.start.y = num(value, bad)?,
                "goal_x" => cfg.env.goal.x = num(value, bad)?,
                "goal_y" => cfg.env.goal.y = num(value, bad)?,
                "max_steps" => cfg.env.max_steps = num(value, bad)?,
                "collision_terminates" => cfg.env.collision_terminates = num(value, bad)?,
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line: line_no,
                        key: key.to_string(),
                    })
                }
            }
        }
        cfg.validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }

    /// Inverse of [`TrainConfig::parse`] (the grid itself is not included).
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "algo = {}", self.algo);
        let _ = writeln!(s, "gamma = {}", self.gamma);
        let _ = writeln!(s, "eps_initial = {}", self.eps_initial);
        let _ = writeln!(s, "eps_final = {}", self.eps_final);
        let _ = writeln!(s, "buffer_capacity = {}", self.buffer_capacity);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        if let Some(e) = self.episodes {
            let _ = writeln!(s, "episodes = {e}");
        }
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "eta = {}", self.eta);
        let _ = writeln!(s, "seed = {}", self.seed);
        let env = &self.env;
        let _ = writeln!(s, "step = {}", env.step);
        let _ = writeln!(s, "footprint_w = {}", env.footprint.0);
        let _ = writeln!(s, "footprint_h = {}", env.footprint.1);
        let _ = writeln!(s, "start_x = {}", env.start.x);
        let _ = writeln!(s, "start_y = {}", env.start.y);
        let _ = writeln!(s, "goal_x = {}", env.goal.x);
        let _ = writeln!(s, "goal_y = {}", env.goal.y);
        let _ = writeln!(s, "max_steps = {}", env.max_steps);
        let _ = writeln!(s, "collision_terminates = {}", env.collision_terminates);
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub steps: usize,
    /// Undiscounted sum of the episode's rewards, goal bonus included.
    pub accumulated_reward: f64,
    pub epsilon: f64,
    pub reached_goal: bool,
    pub wall_ms: f64,
    pub collisions: usize,
    pub diagonal_moves: usize,
}

pub const METRICS_HEADER: &str = "episode,steps,accumulated_reward,epsilon,reached_goal,wall_ms";

/// Renders metrics as CSV. With `with_timing = false` the `wall_ms` column
/// is written as 0 so repeated runs produce identical files.
pub fn metrics_csv(metrics: &[EpisodeMetrics], with_timing: bool) -> String {
    let mut s = String::with_capacity(64 * (metrics.len() + 1));
    s.push_str(METRICS_HEADER);
    s.push('\n');
    for m in metrics {
        let wall = if with_timing { m.wall_ms } else { 0.0 };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:.3}",
            m.episode, m.steps, m.accumulated_reward, m.epsilon, m.reached_goal, wall
        );
    }
    s
}

/// A rollout of a fixed policy.
///
/// `states` starts with the start state and gains one entry per successful
/// move. A rollout that ends in a collision records the offending action
/// and its reward but no new state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathTrace {
    pub states: Vec<AgentState>,
    pub actions: Vec<Action>,
    pub rewards: Vec<f64>,
    pub total_reward: f64,
    pub steps: usize,
    pub reached_goal: bool,
}

impl PathTrace {
    /// Summed movement and collision penalties, i.e. the total reward
    /// with the arrival bonus taken out.
    pub fn cost(&self) -> f64 {
        let bonus = if self.reached_goal && self.steps > 0 {
            REWARD_GOAL
        } else {
            0.0
        };
        bonus - self.total_reward
    }

    pub fn diagonal_moves(&self) -> usize {
        self.actions.iter().filter(|a| a.is_diagonal()).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serialises") + "\n"
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub metrics: Vec<EpisodeMetrics>,
}

fn q_row(model: &Model, env: &EnvConfig, s: AgentState) -> Result<[f64; 8], TrainError> {
    Ok(model.q_values(env, s)?)
}

pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let env = &cfg.env;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = match cfg.algo {
        Algo::Dqn => Model::Mlp(MlpParams::init(&DEFAULT_LAYERS, &mut rng)),
        Algo::QLearning | Algo::Sarsa => Model::Table(QTable::zeros(env.n_states())),
    };
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let schedule = cfg.schedule();
    let mut metrics = Vec::with_capacity(cfg.episodes());

    for episode in 0..cfg.episodes() {
        let clock = Instant::now();
        let eps = schedule.epsilon_at(episode);
        let mut s = env.start;
        let mut m = EpisodeMetrics {
            episode,
            steps: 0,
            accumulated_reward: 0.0,
            epsilon: eps,
            reached_goal: false,
            wall_ms: 0.0,
            collisions: 0,
            diagonal_moves: 0,
        };
        let mut pending: Option<Action> = None;

        loop {
            let a = match pending.take() {
                Some(a) => a,
                None => select_action(&q_row(&model, env, s)?, eps, &mut rng),
            };
            let out = env.step(s, a, m.steps)?;
            let t = Transition {
                s,
                a,
                r: out.reward,
                s_next: out.next_state,
                done: out.terminal,
            };
            m.steps += 1;
            m.accumulated_reward += out.reward;
            match out.event {
                StepEvent::Collided => m.collisions += 1,
                StepEvent::ReachedGoal => m.reached_goal = true,
                _ => {}
            }
            if out.event != StepEvent::Collided && a.is_diagonal() {
                m.diagonal_moves += 1;
            }

            match (&mut model, cfg.algo) {
                (Model::Table(table), Algo::QLearning) => {
                    buffer.push(t);
                    if buffer.len() >= cfg.batch_size {
                        for tr in buffer.sample(cfg.batch_size, &mut rng)? {
                            let si = env.state_index(tr.s)?;
                            let ni = env.state_index(tr.s_next)?;
                            qlearning_update(table, &tr, si, ni, cfg.alpha, cfg.gamma);
                        }
                    }
                }
                (Model::Table(table), Algo::Sarsa) => {
                    let si = env.state_index(t.s)?;
                    let ni = env.state_index(t.s_next)?;
                    let a_next = if t.done {
                        Action::Up
                    } else {
                        let next = select_action(table.row(ni), eps, &mut rng);
                        if !out.done {
                            pending = Some(next);
                        }
                        next
                    };
                    sarsa_update(table, &t, si, ni, a_next, cfg.alpha, cfg.gamma);
                }
                (Model::Mlp(params), Algo::Dqn) => {
                    buffer.push(t);
                    if buffer.len() >= cfg.batch_size {
                        let batch = buffer.sample(cfg.batch_size, &mut rng)?;
                        dqn_update(params, env, &batch, cfg.eta, cfg.gamma)?;
                    }
                }
                (model, algo) => return Err(TrainError::ModelMismatch(model.kind(), algo)),
            }

            if out.done {
                break;
            }
            s = out.next_state;
        }
        m.wall_ms = clock.elapsed().as_secs_f64() * 1e3;
        metrics.push(m);
    }
    Ok(TrainOutcome { model, metrics })
}

/// Follows the greedy policy from the start state until the goal, a
/// collision, a revisited state (the deterministic policy would cycle) or
/// the step cap.
pub fn evaluate_greedy(model: &Model, env: &EnvConfig) -> Result<PathTrace, TrainError> {
    env.validate()?;
    let mut s = env.start;
    let mut trace = PathTrace {
        states: vec![s],
        actions: Vec::new(),
        rewards: Vec::new(),
        total_reward: 0.0,
        steps: 0,
        reached_goal: false,
    };
    let mut visited = HashSet::from([s]);
    while trace.steps < env.max_steps {
        let a = greedy_action(model, env, s)?;
        let out = env.step(s, a, trace.steps)?;
        trace.actions.push(a);
        trace.rewards.push(out.reward);
        trace.total_reward += out.reward;
        trace.steps += 1;
        if out.event == StepEvent::Collided {
            break;
        }
        s = out.next_state;
        trace.states.push(s);
        if out.event == StepEvent::ReachedGoal {
            trace.reached_goal = true;
            break;
        }
        if !visited.insert(s) || out.done {
            break;
        }
    }
    Ok(trace)
}

/// Window over the last episodes used for the final-reward statistic.
pub const FINAL_WINDOW: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub algo: Algo,
    pub seed: u64,
    pub episodes: usize,
    pub greedy: PathTrace,
    /// Mean accumulated reward over the last [`FINAL_WINDOW`] episodes.
    pub final_window_reward: f64,
    pub first_goal_episode: Option<usize>,
    pub training_goal_rate: f64,
}

impl RunSummary {
    pub fn path_cost(&self) -> Option<f64> {
        self.greedy.reached_goal.then(|| self.greedy.cost())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgoSummary {
    pub algo: Algo,
    pub runs: usize,
    pub goal_rate: f64,
    pub median_final_reward: f64,
    pub median_path_cost: Option<f64>,
    pub median_first_goal: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub runs: Vec<RunSummary>,
    pub per_algo: Vec<AlgoSummary>,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

pub fn summarize_run(cfg: &TrainConfig, outcome: &TrainOutcome) -> Result<RunSummary, TrainError> {
    let greedy = evaluate_greedy(&outcome.model, &cfg.env)?;
    let metrics = &outcome.metrics;
    let window = &metrics[metrics.len().saturating_sub(FINAL_WINDOW)..];
    Ok(RunSummary {
        algo: cfg.algo,
        seed: cfg.seed,
        episodes: metrics.len(),
        greedy,
        final_window_reward: window.iter().map(|m| m.accumulated_reward).sum::<f64>()
            / window.len() as f64,
        first_goal_episode: metrics.iter().find(|m| m.reached_goal).map(|m| m.episode),
        training_goal_rate: metrics.iter().filter(|m| m.reached_goal).count() as f64
            / metrics.len() as f64,
    })
}

fn aggregate(algo: Algo, runs: &[&RunSummary]) -> AlgoSummary {
    let finals: Vec<f64> = runs.iter().map(|r| r.final_window_reward).collect();
    let costs: Vec<f64> = runs.iter().filter_map(|r| r.path_cost()).collect();
    let firsts: Vec<f64> = runs
        .iter()
        .filter_map(|r| r.first_goal_episode.map(|e| e as f64))
        .collect();
    AlgoSummary {
        algo,
        runs: runs.len(),
        goal_rate: runs.iter().filter(|r| r.greedy.reached_goal).count() as f64
            / runs.len().max(1) as f64,
        median_final_reward: median(&finals).unwrap_or(f64::NAN),
        median_path_cost: median(&costs),
        median_first_goal: median(&firsts),
    }
}

/// Trains every algorithm for every seed; `base.episodes` applies to all of
/// them when set, otherwise each gets its default budget.
pub fn run_comparison(base: &TrainConfig, seeds: &[u64]) -> Result<ComparisonReport, TrainError> {
    run_comparison_with(base, seeds, |algo| {
        base.episodes.unwrap_or(algo.default_episodes())
    })
}

/// As [`run_comparison`], with the episode budget chosen per algorithm.
pub fn run_comparison_with(
    base: &TrainConfig,
    seeds: &[u64],
    episodes_for: impl Fn(Algo) -> usize,
) -> Result<ComparisonReport, TrainError> {
    if seeds.is_empty() {
        return Err(TrainError::InvalidConfig(
            "at least one seed is required".into(),
        ));
    }
    let mut runs = Vec::with_capacity(seeds.len() * Algo::ALL.len());
    for &seed in seeds {
        for algo in Algo::ALL {
            let cfg = TrainConfig {
                algo,
                seed,
                episodes: Some(episodes_for(algo)),
                ..base.clone()
            };
            let outcome = train(&cfg)?;
            runs.push(summarize_run(&cfg, &outcome)?);
        }
    }
    let per_algo = Algo::ALL
        .iter()
        .map(|&algo| {
            let of_algo: Vec<&RunSummary> = runs.iter().filter(|r| r.algo == algo).collect();
            aggregate(algo, &of_algo)
        })
        .collect();
    Ok(ComparisonReport { runs, per_algo })
}

pub const REPORT_HEADER: &str =
    "algo,seed,episodes,greedy_reached_goal,greedy_steps,greedy_reward,path_cost,final_window_reward,first_goal_episode,training_goal_rate";

impl ComparisonReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(REPORT_HEADER);
        s.push('\n');
        let opt = |v: Option<String>| v.unwrap_or_default();
        for r in &self.runs {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                r.algo,
                r.seed,
                r.episodes,
                r.greedy.reached_goal,
                r.greedy.steps,
                r.greedy.total_reward,
                opt(r.path_cost().map(|c| c.to_string())),
                r.final_window_reward,
                opt(r.first_goal_episode.map(|e| e.to_string())),
                r.training_goal_rate
            );
        }
        s
    }

    pub fn summary(&self, algo: Algo) -> Option<&AlgoSummary> {
        self.per_algo.iter().find(|a| a.algo == algo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{default_layout, open_layout};

    fn quick(algo: Algo, episodes: usize) -> TrainConfig {
        TrainConfig {
            episodes: Some(episodes),
            ..TrainConfig::new(algo, 7, default_layout())
        }
    }

    #[test]
    fn single_episode_contract() {
        for algo in Algo::ALL {
            let out = train(&quick(algo, 1)).unwrap();
            assert_eq!(out.metrics.len(), 1);
            assert!(out.metrics[0].steps <= 200);
            assert_eq!(out.metrics[0].epsilon, 0.6);
        }
    }

    #[test]
    fn training_is_deterministic() {
        for algo in Algo::ALL {
            let cfg = quick(algo, 3);
            let a = train(&cfg).unwrap();
            let b = train(&cfg).unwrap();
            assert_eq!(
                metrics_csv(&a.metrics, false),
                metrics_csv(&b.metrics, false)
            );
            assert_eq!(a.model, b.model);
        }
    }

    #[test]
    fn default_episode_budgets() {
        assert_eq!(quick(Algo::Dqn, 1).episodes(), 1);
        assert_eq!(
            TrainConfig::new(Algo::Dqn, 0, default_layout()).episodes(),
            300
        );
        assert_eq!(
            TrainConfig::new(Algo::QLearning, 0, default_layout()).episodes(),
            500
        );
        assert_eq!(
            TrainConfig::new(Algo::Sarsa, 0, default_layout()).episodes(),
            500
        );
    }

    #[test]
    fn metrics_accounting() {
        let out = train(&quick(Algo::QLearning, 20)).unwrap();
        let mut prev = f64::INFINITY;
        for m in &out.metrics {
            assert!(m.epsilon <= prev);
            prev = m.epsilon;
            let axis = m.steps - m.collisions - m.diagonal_moves;
            let expected =
                -(axis as f64) - 1.5 * m.diagonal_moves as f64 - 20.0 * m.collisions as f64;
            let bonus = if m.reached_goal { 20.0 } else { 0.0 };
            assert_eq!(m.accumulated_reward, expected + bonus);
        }
    }

    #[test]
    fn zero_table_rollout_is_deterministic() {
        let env = default_layout();
        let model = Model::Table(QTable::zeros(env.n_states()));
        let a = evaluate_greedy(&model, &env).unwrap();
        assert_eq!(a, evaluate_greedy(&model, &env).unwrap());
        assert!(!a.reached_goal);
        assert!(a.actions.iter().all(|&x| x == Action::Up));
        // up from (0,0) to (0,90), then the boundary stops it
        assert_eq!(a.states.last(), Some(&AgentState::new(0, 90)));
        assert_eq!(*a.rewards.last().unwrap(), -20.0);
    }

    #[test]
    fn rollout_of_a_hand_built_table() {
        let env = open_layout();
        let mut t = QTable::zeros(env.n_states());
        for i in 0..env.n_states() {
            t.row_mut(i)[Action::UpperRight.index()] = 1.0;
        }
        let trace = evaluate_greedy(&Model::Table(t), &env).unwrap();
        assert!(trace.reached_goal);
        assert_eq!(trace.steps, 9);
        assert_eq!(trace.total_reward, 6.5);
        assert_eq!(trace.cost(), 13.5);
    }

    #[test]
    fn config_parsing() {
        let text =
            "# table 3\nalgo = sarsa\ngamma = 0.9\nepisodes = 10\nseed = 3\nmax_steps = 50\n\n";
        let cfg = TrainConfig::parse(text, 0, default_layout()).unwrap();
        assert_eq!(cfg.algo, Algo::Sarsa);
        assert_eq!(cfg.gamma, 0.9);
        assert_eq!(cfg.episodes(), 10);
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.env.max_steps, 50);
        let back = TrainConfig::parse(&cfg.to_config_text(), 99, default_layout()).unwrap();
        assert_eq!(back, cfg);

        assert_eq!(
            TrainConfig::parse("colour = red\n", 0, default_layout()),
            Err(ConfigError::UnknownKey {
                line: 1,
                key: "colour".into()
            })
        );
        assert!(matches!(
            TrainConfig::parse("gamma = 1.0\n", 0, default_layout()),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            TrainConfig::parse("alpha 0.1\n", 0, default_layout()),
            Err(ConfigError::Syntax { line: 1 })
        ));
        assert!(matches!(
            TrainConfig::parse("batch_size = many\n", 0, default_layout()),
            Err(ConfigError::BadValue { .. })
        ));
    }

    #[test]
    fn csv_header_and_rows() {
        let out = train(&quick(Algo::Sarsa, 2)).unwrap();
        let csv = metrics_csv(&out.metrics, false);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(METRICS_HEADER));
        assert_eq!(lines.count(), 2);
    }

    #[test]
    fn comparison_shape() {
        let base = TrainConfig::new(Algo::Dqn, 0, default_layout());
        let report = run_comparison_with(&base, &[5], |_| 2).unwrap();
        assert_eq!(report.runs.len(), 3);
        assert_eq!(report.per_algo.len(), 3);
        for r in &report.runs {
            let cfg = TrainConfig {
                algo: r.algo,
                seed: 5,
                episodes: Some(2),
                ..base.clone()
            };
            let again = summarize_run(&cfg, &train(&cfg).unwrap()).unwrap();
            assert_eq!(&again, r);
        }
        assert_eq!(report.to_csv().lines().count(), 4);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }

    #[test]
    fn trace_json_round_trip() {
        let env = open_layout();
        let model = Model::Table(QTable::zeros(env.n_states()));
        let trace = evaluate_greedy(&model, &env).unwrap();
        let json = trace.to_json();
        for key in [
            "states",
            "actions",
            "rewards",
            "total_reward",
            "steps",
            "reached_goal",
        ] {
            assert!(json.contains(&format!("\"{key}\"")));
        }
        assert_eq!(PathTrace::from_json(&json).unwrap(), trace);
    }
}
