use crate::env::{Action, Transition};

use super::{AgentError, QValues, TdQuantities};

/// State x action value table, zero-initialised.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    rows: Vec<QValues>,
}

impl QTable {
    pub fn zeros(n_states: usize) -> Self {
        QTable {
            rows: vec![[0.0; Action::COUNT]; n_states],
        }
    }

    pub fn from_rows(rows: Vec<QValues>) -> Self {
        QTable { rows }
    }

    pub fn n_states(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, s: usize) -> &QValues {
        &self.rows[s]
    }

    pub fn row_mut(&mut self, s: usize) -> &mut QValues {
        &mut self.rows[s]
    }

    pub fn rows(&self) -> &[QValues] {
        &self.rows
    }

    pub fn get(&self, s: usize, a: Action) -> f64 {
        self.rows[s][a.index()]
    }

    pub fn max_abs(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    fn blend(&mut self, s: usize, a: Action, target: f64, alpha: f64) -> TdQuantities {
        let q = &mut self.rows[s][a.index()];
        let prediction = *q;
        *q = (1.0 - alpha) * prediction + alpha * target;
        TdQuantities {
            td_target: target,
            td_error: prediction - target,
        }
    }
}

/// Off-policy update: bootstraps from the best action at `s_next`.
///
/// `s` and `s_next` are table indices of the transition's states.
pub fn qlearning_update(
    table: &mut QTable,
    t: &Transition,
    s: usize,
    s_next: usize,
    alpha: f64,
    gamma: f64,
) -> TdQuantities {
    let bootstrap = if t.done {
        0.0
    } else {
        table.rows[s_next]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    };
    table.blend(s, t.a, t.r + gamma * bootstrap, alpha)
}

/// On-policy update: bootstraps from the action actually chosen at `s_next`.
pub fn sarsa_update(
    table: &mut QTable,
    t: &Transition,
    s: usize,
    s_next: usize,
    a_next: Action,
    alpha: f64,
    gamma: f64,
) -> TdQuantities {
    let bootstrap = if t.done {
        0.0
    } else {
        table.get(s_next, a_next)
    };
    table.blend(s, t.a, t.r + gamma * bootstrap, alpha)
}

/// `sum_a pi(a|s) * Q(s, a)`.
pub fn state_value(table: &QTable, s: usize, policy: &QValues) -> Result<f64, AgentError> {
    if policy.iter().any(|&p| p.is_nan() || p < 0.0) {
        return Err(AgentError::BadDistribution(
            "negative or NaN probability".into(),
        ));
    }
    let total: f64 = policy.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(AgentError::BadDistribution(format!(
            "probabilities sum to {total}"
        )));
    }
    Ok(policy.iter().zip(table.row(s)).map(|(p, q)| p * q).sum())
}
