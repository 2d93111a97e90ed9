use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::device::Device;
use super::net::{Adam, Sample, ValueNet, OUTPUTS};
use super::observe::Observation;
use super::storage::Outcome;
use crate::error::{config_err, Result};
use crate::learn_rl::{argmax, EpsilonSchedule};
use crate::rng::SimRng;

/// `1 / L_t`, or `max(0, 1 / L_t - 0.001 * L_e)` when the placement forced an
/// eviction.
pub fn reward(latency: f64, evicted: bool, eviction_cost: f64) -> f64 {
    let base = 1.0 / latency;
    if evicted {
        (base - 0.001 * eviction_cost).max(0.0)
    } else {
        base
    }
}

/// Which observation closes a transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionMode {
    /// The next request in the trace.
    NextRequest,
    /// The next request to the same page; transitions still open after
    /// `horizon` requests are stored as terminal.
    NextPageAccess,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SibylConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: u64,
    pub batch_size: usize,
    pub buffer_size: usize,
    pub sync_period: u64,
    pub train_freq: usize,
    pub transition: TransitionMode,
    pub horizon: u64,
    /// Multiplier applied to rewards before they enter the replay buffer.
    /// Only the scale of learned values changes, not their ordering.
    pub reward_scale: f64,
    /// Bootstrap targets from the periodically synced inference network
    /// instead of the network being trained.
    pub bootstrap_from_inference: bool,
    pub seed: u64,
}

impl Default for SibylConfig {
    fn default() -> Self {
        SibylConfig {
            hidden: 32,
            learning_rate: 1e-3,
            gamma: 0.9,
            epsilon_start: 0.05,
            epsilon_end: 0.01,
            epsilon_decay_steps: 10_000,
            batch_size: 32,
            buffer_size: 4096,
            sync_period: 500,
            train_freq: 1,
            transition: TransitionMode::NextPageAccess,
            horizon: 8192,
            reward_scale: 1000.0,
            bootstrap_from_inference: true,
            seed: 0,
        }
    }
}

impl SibylConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.batch_size == 0 || self.buffer_size == 0 {
            return Err(config_err(
                "hidden, batch_size and buffer_size must be positive",
            ));
        }
        if self.sync_period == 0 {
            return Err(config_err("sync_period must be positive"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(config_err("gamma must lie in [0, 1)"));
        }
        for e in [self.epsilon_start, self.epsilon_end] {
            if !(0.0..=1.0).contains(&e) {
                return Err(config_err("epsilon must lie in [0, 1]"));
            }
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return Err(config_err("reward_scale must be finite and positive"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(config_err("learning_rate must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn schedule(&self) -> EpsilonSchedule {
        EpsilonSchedule {
            start: self.epsilon_start,
            end: self.epsilon_end,
            decay_steps: self.epsilon_decay_steps,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Experience {
    pub obs: Observation,
    pub action: usize,
    pub reward: f64,
    /// `None` marks a terminal transition.
    pub next: Option<Observation>,
}

/// Bounded ring of experiences; the oldest is overwritten when full.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    items: Vec<Experience>,
    capacity: usize,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            items: Vec::with_capacity(capacity),
            capacity,
            head: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, e: Experience) {
        if self.items.len() < self.capacity {
            self.items.push(e);
        } else {
            self.items[self.head] = e;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Uniform sample with replacement.
    pub fn sample(&self, n: usize, rng: &mut SimRng) -> Vec<Experience> {
        (0..n)
            .map(|_| self.items[rng.below(self.items.len() as u64) as usize])
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }
}

#[derive(Clone, Copy, Debug)]
struct Pending {
    obs: Observation,
    action: usize,
    reward: f64,
    seq: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentStats {
    pub decisions: u64,
    pub explorations: u64,
    pub train_steps: u64,
    pub syncs: u64,
    pub experiences: u64,
    pub total_reward: f64,
}

/// Placement agent: decides with the inference network, learns with the
/// training network, and copies training into inference every
/// `sync_period` decisions.
#[derive(Clone, Debug)]
pub struct SibylAgent {
    cfg: SibylConfig,
    inference: ValueNet,
    training: ValueNet,
    adam: Adam,
    buffer: ReplayBuffer,
    rng: SimRng,
    schedule: EpsilonSchedule,
    last: Option<Pending>,
    pending: HashMap<u64, Pending>,
    open: VecDeque<(u64, u64)>,
    stats: AgentStats,
}

impl SibylAgent {
    pub fn new(cfg: SibylConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = SimRng::new(cfg.seed);
        let training = ValueNet::new(cfg.hidden, &mut rng);
        Ok(SibylAgent {
            inference: training.clone(),
            adam: Adam::new(cfg.learning_rate, training.params().len()),
            training,
            buffer: ReplayBuffer::new(cfg.buffer_size),
            rng,
            schedule: cfg.schedule(),
            last: None,
            pending: HashMap::new(),
            open: VecDeque::new(),
            stats: AgentStats::default(),
            cfg,
        })
    }

    pub fn config(&self) -> &SibylConfig {
        &self.cfg
    }

    pub fn stats(&self) -> &AgentStats {
        &self.stats
    }

    pub fn inference(&self) -> &ValueNet {
        &self.inference
    }

    pub fn training(&self) -> &ValueNet {
        &self.training
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn q_values(&self, obs: &Observation) -> [f64; OUTPUTS] {
        self.inference.forward(&obs.normalized())
    }

    /// Epsilon-greedy over the inference network.
    pub fn place(&mut self, obs: &Observation) -> Device {
        let eps = self.schedule.at(self.stats.decisions);
        let action = if eps > 0.0 && self.rng.chance(eps) {
            self.stats.explorations += 1;
            self.rng.below(OUTPUTS as u64) as usize
        } else {
            argmax(&self.q_values(obs))
        };
        Device::from_index(action)
    }

    /// Record the result of a placement, train, and sync when due.
    pub fn observe_outcome(
        &mut self,
        page: u64,
        obs: Observation,
        action: Device,
        outcome: &Outcome,
    ) {
        let r = reward(
            outcome.latency_us,
            !outcome.evicted.is_empty(),
            outcome.eviction_us,
        );
        self.stats.decisions += 1;
        self.stats.total_reward += r;
        let seq = self.stats.decisions;
        let step = Pending {
            obs,
            action: action.index(),
            reward: r * self.cfg.reward_scale,
            seq,
        };
        match self.cfg.transition {
            TransitionMode::NextRequest => {
                if let Some(prev) = self.last.replace(step) {
                    self.push(prev, Some(obs));
                }
            }
            TransitionMode::NextPageAccess => {
                if let Some(prev) = self.pending.insert(page, step) {
                    self.push(prev, Some(obs));
                }
                self.open.push_back((seq, page));
                while let Some(&(s, p)) = self.open.front() {
                    if s + self.cfg.horizon > seq {
                        break;
                    }
                    self.open.pop_front();
                    if self.pending.get(&p).is_some_and(|e| e.seq == s) {
                        let e = self.pending.remove(&p).expect("checked");
                        self.push(e, None);
                    }
                }
            }
        }
        for _ in 0..self.cfg.train_freq {
            self.train_step();
        }
        if seq.is_multiple_of(self.cfg.sync_period) {
            self.sync_networks();
        }
    }

    fn push(&mut self, p: Pending, next: Option<Observation>) {
        self.stats.experiences += 1;
        self.buffer.push(Experience {
            obs: p.obs,
            action: p.action,
            reward: p.reward,
            next,
        });
    }

    pub fn add_experience(&mut self, e: Experience) {
        self.stats.experiences += 1;
        self.buffer.push(e);
    }

    /// One mini-batch temporal-difference step on the training network.
    pub fn train_step(&mut self) {
        if self.buffer.is_empty() {
            return;
        }
        let batch = self.buffer.sample(self.cfg.batch_size, &mut self.rng);
        let samples: Vec<Sample> = batch
            .iter()
            .map(|e| {
                let bootstrap = e.next.map_or(0.0, |n| {
                    let net = if self.cfg.bootstrap_from_inference {
                        &self.inference
                    } else {
                        &self.training
                    };
                    let q = net.forward(&n.normalized());
                    q[argmax(&q)]
                });
                Sample {
                    input: e.obs.normalized(),
                    action: e.action,
                    target: e.reward + self.cfg.gamma * bootstrap,
                }
            })
            .collect();
        let grad = self.training.gradient(&samples);
        self.adam.step(self.training.params_mut(), &grad);
        self.stats.train_steps += 1;
    }

    pub fn sync_networks(&mut self) {
        self.inference = self.training.clone();
        self.stats.syncs += 1;
    }
}
