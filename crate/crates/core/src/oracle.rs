//! Exact shortest paths over the lattice graph of an environment.
//!
//! Nodes are the non-colliding lattice states; every move that lands on a
//! non-colliding state is an edge costing 1 (axis) or 1.5 (diagonal), the
//! negated movement rewards. Costs are kept doubled (2 and 3) so Dijkstra
//! works on exact integers.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::env::{Action, EnvConfig, EnvError, REWARD_GOAL};
use crate::trainer::PathTrace;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("goal is not reachable from the start")]
    Unreachable,
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Doubled edge cost of an action.
pub fn doubled_cost(a: Action) -> u64 {
    if a.is_diagonal() {
        3
    } else {
        2
    }
}

/// Outgoing edges of a lattice state, as `(target index, action)`.
pub fn neighbours(env: &EnvConfig, idx: usize) -> Vec<(usize, Action)> {
    let Some(s) = env.state_from_index(idx).filter(|&s| env.is_valid(s)) else {
        return Vec::new();
    };
    Action::ALL
        .into_iter()
        .filter_map(|a| {
            let t = env.displaced(s, a);
            env.is_valid(t)
                .then(|| env.state_index(t).ok().map(|ti| (ti, a)))
                .flatten()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShortestPath {
    pub cost: f64,
    pub trace: PathTrace,
}

/// Doubled shortest-path costs from `from` to every lattice index
/// (`u64::MAX` where unreachable), plus the chosen predecessor edges.
pub fn dijkstra(env: &EnvConfig, from: usize) -> (Vec<u64>, Vec<Option<(usize, Action)>>) {
    let n = env.n_states();
    let mut dist = vec![u64::MAX; n];
    let mut pred: Vec<Option<(usize, Action)>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[from] = 0;
    heap.push(Reverse((0u64, from)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for (v, a) in neighbours(env, u) {
            let nd = d + doubled_cost(a);
            let better = nd < dist[v]
                || (nd == dist[v]
                    && pred[v].is_some_and(|(pu, pa)| (u, a.index()) < (pu, pa.index())));
            if better {
                dist[v] = nd;
                pred[v] = Some((u, a));
                heap.push(Reverse((nd, v)));
            }
        }
    }
    (dist, pred)
}

/// Minimum-cost start-to-goal path. Among equal-cost paths, predecessors
/// with lower state index, then lower action index, win.
pub fn shortest_path(env: &EnvConfig) -> Result<ShortestPath, OracleError> {
    env.check_state(env.start)?;
    env.check_state(env.goal)?;
    let start = env.state_index(env.start)?;
    let goal = env.state_index(env.goal)?;
    let empty = |s| PathTrace {
        states: vec![s],
        actions: Vec::new(),
        rewards: Vec::new(),
        total_reward: 0.0,
        steps: 0,
        reached_goal: true,
    };
    if start == goal {
        return Ok(ShortestPath {
            cost: 0.0,
            trace: empty(env.start),
        });
    }

    let (dist, pred) = dijkstra(env, start);
    if dist[goal] == u64::MAX {
        return Err(OracleError::Unreachable);
    }
    let mut actions = Vec::new();
    let mut at = goal;
    while at != start {
        let (prev, a) = pred[at].expect("reachable node has a predecessor");
        actions.push(a);
        at = prev;
    }
    actions.reverse();

    let mut trace = empty(env.start);
    trace.reached_goal = false;
    let mut s = env.start;
    for &a in &actions {
        s = env.displaced(s, a);
        let r = a.move_reward() + if s == env.goal { REWARD_GOAL } else { 0.0 };
        trace.states.push(s);
        trace.actions.push(a);
        trace.rewards.push(r);
        trace.total_reward += r;
        trace.steps += 1;
    }
    trace.reached_goal = s == env.goal;
    Ok(ShortestPath {
        cost: dist[goal] as f64 / 2.0,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{default_layout, open_layout, AgentState};

    #[test]
    fn open_grid_is_all_diagonals() {
        let sp = shortest_path(&open_layout()).unwrap();
        assert_eq!(sp.cost, 13.5);
        assert_eq!(sp.trace.steps, 9);
        assert_eq!(sp.trace.total_reward, 6.5);
        assert!(sp.trace.actions.iter().all(|&a| a == Action::UpperRight));
    }

    #[test]
    fn start_equals_goal() {
        let mut env = open_layout();
        env.goal = env.start;
        let sp = shortest_path(&env).unwrap();
        assert_eq!(sp.cost, 0.0);
        assert!(sp.trace.actions.is_empty());
    }

    #[test]
    fn unreachable_goal() {
        let mut env = open_layout();
        // wall the goal corner off completely
        env.grid
            .fill_rect(80, 70, 100, 80, crate::gridmap::CellState::Occupied);
        env.grid
            .fill_rect(70, 70, 80, 100, crate::gridmap::CellState::Occupied);
        assert_eq!(shortest_path(&env), Err(OracleError::Unreachable));
    }

    #[test]
    fn default_layout_is_solvable() {
        let env = default_layout();
        let sp = shortest_path(&env).unwrap();
        assert!(sp.trace.reached_goal);
        assert_eq!(sp.trace.total_reward, REWARD_GOAL - sp.cost);
        assert_eq!(sp.trace.cost(), sp.cost);
        let mut s = env.start;
        for (i, &a) in sp.trace.actions.iter().enumerate() {
            let out = env.step(s, a, i).unwrap();
            assert_eq!(out.reward, sp.trace.rewards[i]);
            s = out.next_state;
        }
        assert_eq!(s, AgentState::new(90, 90));
    }

    #[test]
    fn edges_are_symmetric() {
        let env = default_layout();
        for u in 0..env.n_states() {
            for (v, a) in neighbours(&env, u) {
                let back = neighbours(&env, v);
                assert!(back
                    .iter()
                    .any(|&(w, b)| w == u && doubled_cost(b) == doubled_cost(a)));
            }
        }
    }
}
