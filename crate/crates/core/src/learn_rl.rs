//! Tabular SARSA with epsilon-greedy action selection.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::rng::SimRng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RlHyperparams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl RlHyperparams {
    pub fn new(alpha: f64, gamma: f64, epsilon: f64, seed: u64) -> Result<Self> {
        let hp = RlHyperparams {
            alpha,
            gamma,
            epsilon,
            seed,
        };
        hp.validate()?;
        Ok(hp)
    }

    /// Learning rate must lie in (0, 1]; zero is accepted as well so a frozen
    /// learner can be expressed.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(config_err(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(config_err(format!(
                "gamma must lie in [0, 1), got {}",
                self.gamma
            )));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(config_err(format!(
                "epsilon must lie in [0, 1], got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Exploration rate over time: constant unless a final value and decay
/// horizon are given, in which case it falls linearly and then holds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl EpsilonSchedule {
    pub fn constant(epsilon: f64) -> Self {
        EpsilonSchedule {
            start: epsilon,
            end: epsilon,
            decay_steps: 0,
        }
    }

    pub fn at(&self, step: u64) -> f64 {
        if self.decay_steps == 0 || step >= self.decay_steps {
            if self.decay_steps == 0 {
                self.start
            } else {
                self.end
            }
        } else {
            let frac = step as f64 / self.decay_steps as f64;
            self.start + (self.end - self.start) * frac
        }
    }
}

#[derive(Clone, Debug)]
struct Row {
    q: Vec<f64>,
    stamp: u64,
}

/// Sparse Q-value store keyed by state id, one dense row of action values per
/// visited state.
///
/// With a state cap, inserting a new state beyond the cap drops the
/// least-recently-touched state. Reads through [`QTable::select_action`] and
/// writes both count as touches.
#[derive(Clone, Debug)]
pub struct QTable {
    rows: HashMap<u64, Row>,
    recency: BTreeMap<u64, u64>,
    clock: u64,
    num_actions: usize,
    default_q: f64,
    max_states: Option<usize>,
    evicted_states: u64,
}

impl QTable {
    pub fn new(num_actions: usize) -> Self {
        assert!(num_actions >= 1, "a Q-table needs at least one action");
        QTable {
            rows: HashMap::new(),
            recency: BTreeMap::new(),
            clock: 0,
            num_actions,
            default_q: 0.0,
            max_states: None,
            evicted_states: 0,
        }
    }

    pub fn with_capacity_limit(num_actions: usize, max_states: usize) -> Self {
        assert!(max_states >= 1);
        QTable {
            max_states: Some(max_states),
            ..QTable::new(num_actions)
        }
    }

    pub fn with_default(mut self, default_q: f64) -> Self {
        assert!(default_q.is_finite());
        self.default_q = default_q;
        self
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn default_q(&self) -> f64 {
        self.default_q
    }

    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn max_states(&self) -> Option<usize> {
        self.max_states
    }

    pub fn evicted_states(&self) -> u64 {
        self.evicted_states
    }

    pub fn get(&self, state: u64, action: usize) -> f64 {
        self.rows
            .get(&state)
            .map_or(self.default_q, |r| r.q[action])
    }

    /// Action values for `state`, defaulted when unvisited.
    pub fn values(&self, state: u64) -> Vec<f64> {
        match self.rows.get(&state) {
            Some(r) => r.q.clone(),
            None => vec![self.default_q; self.num_actions],
        }
    }

    /// Greedy action; ties go to the lowest action id.
    pub fn greedy(&self, state: u64) -> usize {
        match self.rows.get(&state) {
            Some(r) => argmax(&r.q),
            None => 0,
        }
    }

    /// Epsilon-greedy choice. The exploration draw happens only when
    /// `epsilon > 0`, so a greedy agent consumes no randomness.
    pub fn select_action(&mut self, state: u64, epsilon: f64, rng: &mut SimRng) -> usize {
        self.touch(state);
        if epsilon > 0.0 && rng.chance(epsilon) {
            rng.below(self.num_actions as u64) as usize
        } else {
            self.greedy(state)
        }
    }

    pub fn set(&mut self, state: u64, action: usize, q: f64) {
        assert!(q.is_finite(), "Q-values must stay finite");
        self.row_mut(state).q[action] = q;
    }

    /// One SARSA step:
    /// `Q(s,a) <- Q(s,a) + alpha * (r + gamma * Q(s',a') - Q(s,a))`.
    /// Returns the applied change.
    pub fn sarsa_update(
        &mut self,
        state: u64,
        action: usize,
        reward: f64,
        next_state: u64,
        next_action: usize,
        hp: &RlHyperparams,
    ) -> Result<f64> {
        if !reward.is_finite() {
            return Err(Error::NonFiniteReward(reward));
        }
        for a in [action, next_action] {
            if a >= self.num_actions {
                return Err(Error::OutOfRange(format!(
                    "action {a} with {} actions",
                    self.num_actions
                )));
            }
        }
        let next_q = self.get(next_state, next_action);
        let current = self.get(state, action);
        let delta = hp.alpha * (reward + hp.gamma * next_q - current);
        if delta != 0.0 {
            self.set(state, action, current + delta);
        } else {
            self.touch(state);
        }
        Ok(delta)
    }

    fn touch(&mut self, state: u64) {
        if self.rows.contains_key(&state) {
            self.row_mut(state);
        }
    }

    fn row_mut(&mut self, state: u64) -> &mut Row {
        self.clock += 1;
        let stamp = self.clock;
        if let Some(row) = self.rows.get_mut(&state) {
            self.recency.remove(&row.stamp);
            row.stamp = stamp;
            self.recency.insert(stamp, state);
        } else {
            if let Some(cap) = self.max_states {
                if self.rows.len() >= cap {
                    if let Some((_, victim)) = self.recency.pop_first() {
                        self.rows.remove(&victim);
                        self.evicted_states += 1;
                    }
                }
            }
            self.rows.insert(
                state,
                Row {
                    q: vec![self.default_q; self.num_actions],
                    stamp,
                },
            );
            self.recency.insert(stamp, state);
        }
        self.rows.get_mut(&state).expect("row just inserted")
    }

    /// Forget every learned value.
    pub fn clear(&mut self) {
        self.rows.clear();
        self.recency.clear();
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// A Q-table bundled with its hyperparameters, exploration schedule and
/// random stream.
#[derive(Clone, Debug)]
pub struct SarsaAgent {
    pub table: QTable,
    pub hp: RlHyperparams,
    pub schedule: EpsilonSchedule,
    rng: SimRng,
    steps: u64,
}

impl SarsaAgent {
    pub fn new(table: QTable, hp: RlHyperparams) -> Result<Self> {
        hp.validate()?;
        Ok(SarsaAgent {
            table,
            schedule: EpsilonSchedule::constant(hp.epsilon),
            rng: SimRng::new(hp.seed),
            hp,
            steps: 0,
        })
    }

    pub fn with_schedule(mut self, schedule: EpsilonSchedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn epsilon(&self) -> f64 {
        self.schedule.at(self.steps)
    }

    pub fn act(&mut self, state: u64) -> usize {
        let eps = self.epsilon();
        self.steps += 1;
        self.table.select_action(state, eps, &mut self.rng)
    }

    pub fn update(
        &mut self,
        state: u64,
        action: usize,
        reward: f64,
        next_state: u64,
        next_action: usize,
    ) -> Result<f64> {
        let hp = self.hp;
        self.table
            .sarsa_update(state, action, reward, next_state, next_action, &hp)
    }
}
