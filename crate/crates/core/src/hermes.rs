//! Off-chip load prediction: the POPET hashed perceptron, the speculative
//! direct-to-DRAM request it enables, and simple comparison predictors.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::hash::fold_all;
use crate::learn_perceptron::{FeatureTable, Perceptron, PerceptronConfig};
use crate::mem_sim::metrics::SimMetrics;
use crate::mem_sim::{DramModel, OffChipPredictor};
use crate::rng::SimRng;
use crate::trace::{MemoryAccess, LINES_PER_PAGE};

/// Weight storage budget in bits (3.2 KiB).
pub const POPET_BUDGET_BITS: usize = 3 * 1024 * 8 + 1024 * 8 / 5;

const MAX_MISS_DISTANCE: u64 = 127;
const PC_HISTORY: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopetFeatureKind {
    Pc,
    PcXorOffset,
    PageNumberHash,
    CachelineHash,
    LastMissDistance,
    PcHistoryHash,
}

impl PopetFeatureKind {
    fn id(self) -> u32 {
        self as u32 + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopetFeature {
    pub kind: PopetFeatureKind,
    pub table_size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PopetConfig {
    pub features: Vec<PopetFeature>,
    pub tau_act: i32,
    pub t_pos: i32,
    pub t_neg: i32,
    pub weight_bits: u8,
}

impl Default for PopetConfig {
    fn default() -> Self {
        use PopetFeatureKind::*;
        PopetConfig {
            features: vec![
                PopetFeature {
                    kind: Pc,
                    table_size: 1024,
                },
                PopetFeature {
                    kind: PcXorOffset,
                    table_size: 1024,
                },
                PopetFeature {
                    kind: CachelineHash,
                    table_size: 512,
                },
                PopetFeature {
                    kind: LastMissDistance,
                    table_size: 128,
                },
            ],
            tau_act: -18,
            t_pos: 12,
            t_neg: -35,
            weight_bits: 5,
        }
    }
}

impl PopetConfig {
    pub fn perceptron_config(&self) -> PerceptronConfig {
        PerceptronConfig {
            tau_act: self.tau_act,
            t_pos: self.t_pos,
            t_neg: self.t_neg,
            weight_bits: self.weight_bits,
            features: self
                .features
                .iter()
                .map(|f| FeatureTable {
                    feature_id: f.kind.id(),
                    table_size: f.table_size,
                })
                .collect(),
        }
    }
}

/// Metadata carried by a load from prediction until it completes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoadQueueMeta {
    pub pc: u64,
    pub line: u64,
    pub indices: Vec<usize>,
    pub w_sigma: i32,
    pub predicted_off_chip: bool,
    pub hermes_issue_cycle: Option<u64>,
}

impl LoadQueueMeta {
    /// Metadata for predictors that keep no perceptron state.
    pub fn plain(acc: &MemoryAccess, predicted_off_chip: bool) -> Self {
        LoadQueueMeta {
            pc: acc.pc,
            line: acc.line(),
            indices: Vec::new(),
            w_sigma: 0,
            predicted_off_chip,
            hermes_issue_cycle: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HermesRequest {
    pub line: u64,
    pub issue_cycle: u64,
    pub completion_cycle: u64,
    pub consumed: bool,
}

/// Speculative DRAM read issued `latency` cycles after the load. The
/// completion is estimated from the current channel state without reserving
/// it: the demand path still schedules its own request, so channel timing
/// and cache fills are the same whether or not Hermes runs.
pub fn issue_hermes(
    dram: &DramModel,
    acc: &MemoryAccess,
    meta: &LoadQueueMeta,
    latency: u64,
) -> HermesRequest {
    debug_assert!(meta.predicted_off_chip);
    let issue_cycle = acc.cycle + latency;
    HermesRequest {
        line: acc.line(),
        issue_cycle,
        completion_cycle: dram.peek_completion(issue_cycle),
        consumed: false,
    }
}

/// Perceptron off-chip predictor.
#[derive(Clone, Debug)]
pub struct Popet {
    config: PopetConfig,
    perceptron: Perceptron,
    last_miss: HashMap<u64, u64>,
    history: VecDeque<u64>,
    trained: u64,
}

impl Popet {
    pub fn new(config: PopetConfig) -> Result<Self> {
        if config.features.is_empty() {
            return Err(config_err("POPET needs at least one feature"));
        }
        let perceptron = Perceptron::new(config.perceptron_config())?;
        let bits = perceptron.storage_bits();
        if bits > POPET_BUDGET_BITS {
            return Err(Error::Budget {
                what: "POPET weight tables",
                needed: bits,
                limit: POPET_BUDGET_BITS,
            });
        }
        Ok(Popet {
            config,
            perceptron,
            last_miss: HashMap::new(),
            history: VecDeque::with_capacity(PC_HISTORY),
            trained: 0,
        })
    }

    pub fn config(&self) -> &PopetConfig {
        &self.config
    }

    pub fn perceptron(&self) -> &Perceptron {
        &self.perceptron
    }

    pub fn storage_bits(&self) -> usize {
        self.perceptron.storage_bits()
    }

    /// Number of training calls that changed weights.
    pub fn trained(&self) -> u64 {
        self.trained
    }

    fn feature_values(&self, acc: &MemoryAccess) -> Vec<u64> {
        let line = acc.line();
        self.config
            .features
            .iter()
            .map(|f| match f.kind {
                PopetFeatureKind::Pc => acc.pc,
                PopetFeatureKind::PcXorOffset => acc.pc ^ (line % LINES_PER_PAGE),
                PopetFeatureKind::PageNumberHash => fold_all([acc.page()]),
                PopetFeatureKind::CachelineHash => fold_all([line]),
                PopetFeatureKind::LastMissDistance => self
                    .last_miss
                    .get(&acc.pc)
                    .copied()
                    .unwrap_or(MAX_MISS_DISTANCE),
                PopetFeatureKind::PcHistoryHash => {
                    fold_all(self.history.iter().copied().chain([acc.pc]))
                }
            })
            .collect()
    }

    pub fn predict_off_chip(&mut self, acc: &MemoryAccess) -> LoadQueueMeta {
        let values = self.feature_values(acc);
        let p = self.perceptron.predict(&values);
        if self.history.len() == PC_HISTORY {
            self.history.pop_front();
        }
        self.history.push_back(acc.pc);
        LoadQueueMeta {
            pc: acc.pc,
            line: acc.line(),
            indices: p.indices,
            w_sigma: p.w_sigma,
            predicted_off_chip: p.prediction,
            hermes_issue_cycle: None,
        }
    }

    pub fn train_popet(&mut self, meta: &LoadQueueMeta, went_off_chip: bool) {
        if self
            .perceptron
            .train(&meta.indices, meta.w_sigma, went_off_chip)
        {
            self.trained += 1;
        }
        let d = self.last_miss.entry(meta.pc).or_insert(MAX_MISS_DISTANCE);
        *d = if went_off_chip {
            0
        } else {
            (*d + 1).min(MAX_MISS_DISTANCE)
        };
    }
}

impl OffChipPredictor for Popet {
    fn name(&self) -> &str {
        "popet"
    }

    fn predict(&mut self, acc: &MemoryAccess) -> LoadQueueMeta {
        self.predict_off_chip(acc)
    }

    fn train(&mut self, meta: &LoadQueueMeta, went_off_chip: bool) {
        self.train_popet(meta, went_off_chip)
    }
}

/// Tag-tracking baseline: a bounded LRU shadow of recently resident lines.
/// Predicts off-chip iff the line is absent from the shadow.
#[derive(Clone, Debug)]
pub struct TtpPredictor {
    capacity: usize,
    stamps: HashMap<u64, u64>,
    order: BTreeMap<u64, u64>,
    clock: u64,
}

impl TtpPredictor {
    pub fn new(capacity: usize) -> Self {
        TtpPredictor {
            capacity: capacity.max(1),
            stamps: HashMap::new(),
            order: BTreeMap::new(),
            clock: 0,
        }
    }

    pub fn contains(&self, line: u64) -> bool {
        self.stamps.contains_key(&line)
    }

    pub fn len(&self) -> usize {
        self.stamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stamps.is_empty()
    }

    pub fn predict_line(&self, line: u64) -> bool {
        !self.contains(line)
    }

    pub fn insert(&mut self, line: u64) {
        self.clock += 1;
        if let Some(old) = self.stamps.insert(line, self.clock) {
            self.order.remove(&old);
        } else if self.stamps.len() > self.capacity {
            if let Some((_, victim)) = self.order.pop_first() {
                self.stamps.remove(&victim);
            }
        }
        self.order.insert(self.clock, line);
    }
}

impl OffChipPredictor for TtpPredictor {
    fn name(&self) -> &str {
        "ttp"
    }

    fn predict(&mut self, acc: &MemoryAccess) -> LoadQueueMeta {
        LoadQueueMeta::plain(acc, self.predict_line(acc.line()))
    }

    fn train(&mut self, meta: &LoadQueueMeta, _went_off_chip: bool) {
        self.insert(meta.line);
    }

    fn on_prefetch_fill(&mut self, line: u64) {
        self.insert(line);
    }
}

/// Predicts off-chip with a fixed probability.
#[derive(Clone, Debug)]
pub struct RandomPredictor {
    probability: f64,
    rng: SimRng,
}

impl RandomPredictor {
    pub fn new(probability: f64, seed: u64) -> Self {
        RandomPredictor {
            probability,
            rng: SimRng::new(seed),
        }
    }
}

impl OffChipPredictor for RandomPredictor {
    fn name(&self) -> &str {
        "random"
    }

    fn predict(&mut self, acc: &MemoryAccess) -> LoadQueueMeta {
        let p = self.rng.chance(self.probability);
        LoadQueueMeta::plain(acc, p)
    }

    fn train(&mut self, _meta: &LoadQueueMeta, _went_off_chip: bool) {}
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorMetrics {
    /// Predicted off-chip loads that went off-chip.
    pub accuracy: f64,
    /// Off-chip loads that were predicted.
    pub coverage: f64,
    /// No load was predicted off-chip; `accuracy` is reported as 1.0.
    pub accuracy_undefined: bool,
    /// No load went off-chip; `coverage` is reported as 1.0.
    pub coverage_undefined: bool,
}

pub fn predictor_metrics(m: &SimMetrics) -> PredictorMetrics {
    let tp = m.offchip_true_pos as f64;
    let predicted = tp + m.offchip_false_pos as f64;
    let actual = tp + m.offchip_false_neg as f64;
    PredictorMetrics {
        accuracy: if predicted == 0.0 {
            1.0
        } else {
            tp / predicted
        },
        coverage: if actual == 0.0 { 1.0 } else { tp / actual },
        accuracy_undefined: predicted == 0.0,
        coverage_undefined: actual == 0.0,
    }
}
