//! Value-learning agents: tabular Q-learning and SARSA, and a small
//! fully-connected deep Q-network, plus the shared exploration policy and
//! replay buffer.

mod mlp;
mod model_io;
mod qtable;
mod replay;

use rand::Rng;
use thiserror::Error;

use crate::env::{Action, AgentState, EnvConfig};

pub use mlp::{
    dqn_gradient, dqn_samples, dqn_update, mlp_forward, sample_loss_gradient, DqnSample, Gradient,
    Layer, MlpParams, DEFAULT_LAYERS,
};
pub use model_io::{load_model, load_model_as, save_model, ModelIoError};
pub use qtable::{qlearning_update, sarsa_update, state_value, QTable};
pub use replay::ReplayBuffer;

pub type QValues = [f64; Action::COUNT];

#[derive(Debug, Error, PartialEq)]
pub enum AgentError {
    #[error("batch is empty")]
    EmptyBatch,
    #[error("buffer holds {available} transitions, {requested} requested")]
    InsufficientSamples { available: usize, requested: usize },
    #[error("policy is not a probability distribution: {0}")]
    BadDistribution(String),
    #[error(transparent)]
    Env(#[from] crate::env::EnvError),
}

/// TD target and error of one update; `td_error = prediction - td_target`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdQuantities {
    pub td_target: f64,
    pub td_error: f64,
}

/// Linear decay from `eps_initial` to `eps_final` over `total_episodes`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub eps_initial: f64,
    pub eps_final: f64,
    pub total_episodes: usize,
}

impl EpsilonSchedule {
    pub fn new(eps_initial: f64, eps_final: f64, total_episodes: usize) -> Self {
        EpsilonSchedule {
            eps_initial,
            eps_final,
            total_episodes,
        }
    }

    pub fn epsilon_at(&self, episode: usize) -> f64 {
        let delta = (self.eps_initial - self.eps_final) / self.total_episodes.max(1) as f64;
        (self.eps_initial - episode as f64 * delta).max(self.eps_final)
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(q: &QValues) -> Action {
    let mut best = 0;
    for i in 1..q.len() {
        if q[i] > q[best] {
            best = i;
        }
    }
    Action::ALL[best]
}

/// ε-greedy choice. Consumes one uniform draw for the explore test and,
/// when exploring, one more for the action.
pub fn select_action<R: Rng + ?Sized>(q: &QValues, eps: f64, rng: &mut R) -> Action {
    if rng.gen::<f64>() < eps {
        Action::ALL[rng.gen_range(0..Action::COUNT)]
    } else {
        argmax(q)
    }
}

/// A trained value model of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Table(QTable),
    Mlp(MlpParams),
}

impl Model {
    pub fn q_values(&self, env: &EnvConfig, s: AgentState) -> Result<QValues, AgentError> {
        match self {
            Model::Table(t) => Ok(*t.row(env.state_index(s)?)),
            Model::Mlp(p) => Ok(mlp_forward(p, env.normalize(s))),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Model::Table(_) => "qtable",
            Model::Mlp(_) => "mlp",
        }
    }
}

pub fn greedy_action(model: &Model, env: &EnvConfig, s: AgentState) -> Result<Action, AgentError> {
    Ok(argmax(&model.q_values(env, s)?))
}
