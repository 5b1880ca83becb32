//! Deterministic grid-world MDP: an agent with a square footprint moves on a
//! lattice of step `d` over an occupancy grid using eight fixed moves.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridmap::{CellState, OccupancyGrid};

pub const REWARD_COLLISION: f64 = -20.0;
pub const REWARD_AXIS: f64 = -1.0;
pub const REWARD_DIAGONAL: f64 = -1.5;
/// Arrival bonus, paid on top of the cost of the move that reaches the goal.
pub const REWARD_GOAL: f64 = 20.0;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("invalid state ({x}, {y}): {reason}")]
    InvalidState { x: i64, y: i64, reason: String },
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AgentState {
    pub x: i64,
    pub y: i64,
}

impl AgentState {
    pub const fn new(x: i64, y: i64) -> Self {
        AgentState { x, y }
    }
}

/// The eight moves, in the order a1..a8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    UpperLeft,
    UpperRight,
    LowerLeft,
    LowerRight,
}

impl Action {
    pub const COUNT: usize = 8;
    pub const ALL: [Action; 8] = [
        Action::Up,
        Action::Down,
        Action::Left,
        Action::Right,
        Action::UpperLeft,
        Action::UpperRight,
        Action::LowerLeft,
        Action::LowerRight,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    /// Unit displacement; multiply by the step length.
    pub fn delta(self) -> (i64, i64) {
        match self {
            Action::Up => (0, 1),
            Action::Down => (0, -1),
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
            Action::UpperLeft => (-1, 1),
            Action::UpperRight => (1, 1),
            Action::LowerLeft => (-1, -1),
            Action::LowerRight => (1, -1),
        }
    }

    pub fn is_diagonal(self) -> bool {
        self.index() >= 4
    }

    pub fn move_reward(self) -> f64 {
        if self.is_diagonal() {
            REWARD_DIAGONAL
        } else {
            REWARD_AXIS
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepEvent {
    Moved,
    MovedDiagonal,
    Collided,
    ReachedGoal,
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next_state: AgentState,
    pub reward: f64,
    /// Episode is over, for any reason (goal, terminal collision, step cap).
    pub done: bool,
    /// Episode ended in an absorbing state; value bootstrapping stops here.
    /// Truncation by the step cap is not terminal.
    pub terminal: bool,
    pub event: StepEvent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: AgentState,
    pub a: Action,
    pub r: f64,
    pub s_next: AgentState,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub grid: OccupancyGrid,
    pub step: i64,
    pub footprint: (usize, usize),
    pub start: AgentState,
    pub goal: AgentState,
    pub max_steps: usize,
    pub collision_terminates: bool,
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        if self.step <= 0 {
            return Err(EnvError::InvalidConfig(format!(
                "step must be positive, got {}",
                self.step
            )));
        }
        if self.footprint.0 == 0 || self.footprint.1 == 0 {
            return Err(EnvError::InvalidConfig(
                "footprint must be at least 1x1".into(),
            ));
        }
        if self.max_steps == 0 {
            return Err(EnvError::InvalidConfig("max_steps must be positive".into()));
        }
        if self.start == self.goal {
            return Err(EnvError::InvalidConfig("start and goal coincide".into()));
        }
        self.check_state(self.start)?;
        self.check_state(self.goal)
    }

    pub fn cols(&self) -> usize {
        self.grid.width() / self.step as usize
    }

    pub fn rows(&self) -> usize {
        self.grid.height() / self.step as usize
    }

    pub fn n_states(&self) -> usize {
        self.cols() * self.rows()
    }

    pub fn on_lattice(&self, s: AgentState) -> bool {
        s.x >= 0
            && s.y >= 0
            && s.x % self.step == 0
            && s.y % self.step == 0
            && ((s.x / self.step) as usize) < self.cols()
            && ((s.y / self.step) as usize) < self.rows()
    }

    pub fn collides(&self, s: AgentState) -> bool {
        self.grid
            .footprint_collides(s.x, s.y, self.footprint.0, self.footprint.1)
    }

    pub fn check_state(&self, s: AgentState) -> Result<(), EnvError> {
        let invalid = |reason: &str| EnvError::InvalidState {
            x: s.x,
            y: s.y,
            reason: reason.to_string(),
        };
        if !self.on_lattice(s) {
            return Err(invalid("not on the lattice"));
        }
        if self.collides(s) {
            return Err(invalid("footprint collides"));
        }
        Ok(())
    }

    pub fn is_valid(&self, s: AgentState) -> bool {
        self.on_lattice(s) && !self.collides(s)
    }

    /// Row-major lattice index.
    pub fn state_index(&self, s: AgentState) -> Result<usize, EnvError> {
        if !self.on_lattice(s) {
            return Err(EnvError::InvalidState {
                x: s.x,
                y: s.y,
                reason: "not on the lattice".into(),
            });
        }
        Ok((s.y / self.step) as usize * self.cols() + (s.x / self.step) as usize)
    }

    pub fn state_from_index(&self, idx: usize) -> Option<AgentState> {
        (idx < self.n_states()).then(|| {
            AgentState::new(
                (idx % self.cols()) as i64 * self.step,
                (idx / self.cols()) as i64 * self.step,
            )
        })
    }

    /// All non-colliding lattice states, in index order.
    pub fn valid_states(&self) -> Vec<AgentState> {
        (0..self.n_states())
            .filter_map(|i| self.state_from_index(i))
            .filter(|&s| !self.collides(s))
            .collect()
    }

    /// Agent coordinates scaled into `[0, 1)` by the grid extent.
    pub fn normalize(&self, s: AgentState) -> [f64; 2] {
        [
            s.x as f64 / self.grid.width() as f64,
            s.y as f64 / self.grid.height() as f64,
        ]
    }

    pub fn displaced(&self, s: AgentState, a: Action) -> AgentState {
        let (dx, dy) = a.delta();
        AgentState::new(s.x + dx * self.step, s.y + dy * self.step)
    }

    pub fn step(
        &self,
        s: AgentState,
        a: Action,
        steps_so_far: usize,
    ) -> Result<StepOutcome, EnvError> {
        self.check_state(s)?;
        let truncated = steps_so_far + 1 >= self.max_steps;
        let candidate = self.displaced(s, a);
        let outcome = if !self.on_lattice(candidate) || self.collides(candidate) {
            StepOutcome {
                next_state: s,
                reward: REWARD_COLLISION,
                done: self.collision_terminates || truncated,
                terminal: self.collision_terminates,
                event: StepEvent::Collided,
            }
        } else if candidate == self.goal {
            StepOutcome {
                next_state: candidate,
                reward: a.move_reward() + REWARD_GOAL,
                done: true,
                terminal: true,
                event: StepEvent::ReachedGoal,
            }
        } else {
            let event = if truncated {
                StepEvent::Truncated
            } else if a.is_diagonal() {
                StepEvent::MovedDiagonal
            } else {
                StepEvent::Moved
            };
            StepOutcome {
                next_state: candidate,
                reward: a.move_reward(),
                done: truncated,
                terminal: false,
                event,
            }
        };
        Ok(outcome)
    }
}

/// Obstacle rectangles `[x0, x1) x [y0, y1)` of the built-in slalom layout.
pub const DEFAULT_OBSTACLES: [(usize, usize, usize, usize); 2] =
    [(30, 0, 40, 60), (60, 40, 70, 100)];

/// 100x100 free grid with two 10x60 walls forcing two crossings, start in
/// the lower-left corner and goal in the upper-right corner.
pub fn default_layout() -> EnvConfig {
    let mut grid = OccupancyGrid::filled(100, 100, 1.0, (0.0, 0.0), CellState::Free)
        .expect("static layout is valid");
    for (x0, y0, x1, y1) in DEFAULT_OBSTACLES {
        grid.fill_rect(x0, y0, x1, y1, CellState::Occupied);
    }
    EnvConfig {
        grid,
        step: 10,
        footprint: (10, 10),
        start: AgentState::new(0, 0),
        goal: AgentState::new(90, 90),
        max_steps: 200,
        collision_terminates: false,
    }
}

/// Same geometry as the default layout without obstacles.
pub fn open_layout() -> EnvConfig {
    EnvConfig {
        grid: OccupancyGrid::filled(100, 100, 1.0, (0.0, 0.0), CellState::Free)
            .expect("static layout is valid"),
        ..default_layout()
    }
}

/// `sum_k gamma^k * r_k`.
pub fn episode_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |acc, &r| r + gamma * acc)
}
