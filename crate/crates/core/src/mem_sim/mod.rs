//! Three-level inclusive cache hierarchy in front of a bandwidth-limited
//! DRAM channel.
//!
//! Timing is open-loop: each demand issues at its trace cycle and completes
//! after the lookup latencies of the levels it walks (L1, then L2, then the
//! LLC) plus DRAM service when it misses everywhere. Cache state updates are
//! applied at issue. Prefetches are asynchronous DRAM requests whose fills
//! are applied when simulated time passes their completion.

pub mod cache;
pub mod dram;
pub mod metrics;
pub mod prefetch;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::hermes::{HermesRequest, LoadQueueMeta};
use crate::trace::{line_page, AccessKind, MemoryAccess};

pub use cache::{CacheGeometry, CacheLevel, Level};
pub use dram::{BwLevel, DramConfig, DramModel};
pub use metrics::SimMetrics;
pub use prefetch::{DemandContext, NextLinePrefetcher, NoPrefetcher, Prefetcher, StridePrefetcher};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillLevel {
    L2,
    Llc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrefetchTrigger {
    L1Miss,
    AllDemands,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MemConfig {
    pub l1: CacheGeometry,
    pub l2: CacheGeometry,
    pub llc: CacheGeometry,
    pub dram: DramConfig,
    pub prefetch_fill: FillLevel,
    pub trigger: PrefetchTrigger,
}

impl Default for MemConfig {
    fn default() -> Self {
        MemConfig {
            l1: CacheGeometry {
                sets: 64,
                ways: 8,
                latency: 4,
            },
            l2: CacheGeometry {
                sets: 512,
                ways: 8,
                latency: 12,
            },
            llc: CacheGeometry {
                sets: 2048,
                ways: 16,
                latency: 38,
            },
            dram: DramConfig::default(),
            prefetch_fill: FillLevel::L2,
            trigger: PrefetchTrigger::L1Miss,
        }
    }
}

impl MemConfig {
    /// Cycles from issue until an LLC miss is known.
    pub fn walk_latency(&self) -> u64 {
        self.l1.latency + self.l2.latency + self.llc.latency
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServedBy {
    L1,
    L2,
    Llc,
    Dram,
    /// Missed every level and waited on an in-flight prefetch of the line.
    PrefetchMerge,
}

impl ServedBy {
    pub fn is_off_chip(self) -> bool {
        matches!(self, ServedBy::Dram | ServedBy::PrefetchMerge)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AccessResult {
    pub issue_cycle: u64,
    pub completion_cycle: u64,
    pub served_by: ServedBy,
}

impl AccessResult {
    pub fn latency(&self) -> u64 {
        self.completion_cycle - self.issue_cycle
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrefetchOutcome {
    Issued {
        completion_cycle: u64,
    },
    /// Already resident at or above the fill level, or already in flight.
    Redundant,
}

#[derive(Clone, Copy, Debug)]
struct InFlight {
    line: u64,
    fill: FillLevel,
    measured: bool,
}

/// Cache levels, DRAM and prefetch bookkeeping.
#[derive(Clone, Debug)]
pub struct MemorySystem {
    cfg: MemConfig,
    l1: CacheLevel,
    l2: CacheLevel,
    llc: CacheLevel,
    dram: DramModel,
    inflight: BTreeMap<(u64, u64), InFlight>,
    inflight_lines: HashMap<u64, (u64, u64)>,
    /// Prefetched lines filled but not yet demanded, with their measured flag.
    prefetched: HashMap<u64, bool>,
    /// Lines brought in by a demand miss and the cycle their data arrives.
    pending_fill: HashMap<u64, u64>,
    seq: u64,
    filled: Vec<u64>,
    measuring: bool,
    metrics: SimMetrics,
}

impl MemorySystem {
    pub fn new(cfg: MemConfig) -> Self {
        MemorySystem {
            l1: CacheLevel::new(Level::L1, cfg.l1),
            l2: CacheLevel::new(Level::L2, cfg.l2),
            llc: CacheLevel::new(Level::Llc, cfg.llc),
            dram: DramModel::new(cfg.dram),
            cfg,
            inflight: BTreeMap::new(),
            inflight_lines: HashMap::new(),
            prefetched: HashMap::new(),
            pending_fill: HashMap::new(),
            seq: 0,
            filled: Vec::new(),
            measuring: true,
            metrics: SimMetrics::default(),
        }
    }

    pub fn config(&self) -> &MemConfig {
        &self.cfg
    }

    pub fn dram(&self) -> &DramModel {
        &self.dram
    }

    pub fn metrics(&self) -> &SimMetrics {
        &self.metrics
    }

    pub fn metrics_mut(&mut self) -> &mut SimMetrics {
        &mut self.metrics
    }

    pub fn level(&self, level: Level) -> &CacheLevel {
        match level {
            Level::L1 => &self.l1,
            Level::L2 => &self.l2,
            Level::Llc => &self.llc,
        }
    }

    /// Stop counting (warmup) or restart counting from zero.
    pub fn set_measuring(&mut self, on: bool) {
        self.measuring = on;
        if on {
            self.metrics = SimMetrics::default();
        }
    }

    pub fn bandwidth_level(&self, now: u64) -> BwLevel {
        self.dram.bandwidth_level(now)
    }

    /// Sorted resident lines of every level.
    pub fn contents(&self) -> [Vec<u64>; 3] {
        [
            self.l1.resident_lines(),
            self.l2.resident_lines(),
            self.llc.resident_lines(),
        ]
    }

    /// Lines whose prefetch fills completed since the last call.
    pub fn take_fills(&mut self) -> Vec<u64> {
        std::mem::take(&mut self.filled)
    }

    pub fn in_flight_prefetches(&self) -> usize {
        self.inflight.len()
    }

    fn leave_hierarchy(&mut self, line: u64) {
        self.l2.invalidate(line);
        self.l1.invalidate(line);
        if let Some(measured) = self.prefetched.remove(&line) {
            if measured {
                self.metrics.prefetch_unused += 1;
            }
        }
    }

    fn fill_llc(&mut self, line: u64) {
        if let Some(victim) = self.llc.fill(line) {
            self.leave_hierarchy(victim);
        }
    }

    fn fill_l2(&mut self, line: u64) {
        self.fill_llc(line);
        if let Some(victim) = self.l2.fill(line) {
            self.l1.invalidate(victim);
        }
    }

    fn fill_all(&mut self, line: u64) {
        self.fill_l2(line);
        self.l1.fill(line);
    }

    /// Apply every prefetch fill completing at or before `now`.
    pub fn drain_fills(&mut self, now: u64) {
        while let Some((&(completion, seq), _)) = self.inflight.first_key_value() {
            if completion > now {
                break;
            }
            let pf = self.inflight.remove(&(completion, seq)).expect("present");
            self.inflight_lines.remove(&pf.line);
            match pf.fill {
                FillLevel::L2 => self.fill_l2(pf.line),
                FillLevel::Llc => self.fill_llc(pf.line),
            }
            // an earlier prefetch of the same line that was never demanded
            if let Some(true) = self.prefetched.insert(pf.line, pf.measured) {
                self.metrics.prefetch_unused += 1;
            }
            self.filled.push(pf.line);
        }
    }

    /// Serve one demand. `hermes` is a speculative DRAM request already
    /// issued for this access; it only shortens an off-chip completion and
    /// never touches cache state.
    pub fn access(
        &mut self,
        acc: &MemoryAccess,
        hermes: Option<&mut HermesRequest>,
    ) -> AccessResult {
        let t = acc.cycle;
        self.drain_fills(t);
        let line = acc.line();
        let lat1 = self.l1.latency();
        let lat2 = lat1 + self.l2.latency();
        let lat3 = lat2 + self.llc.latency();

        let (served_by, mut completion) = if self.l1.touch(line) {
            (ServedBy::L1, t + lat1)
        } else if self.l2.touch(line) {
            self.l1.fill(line);
            (ServedBy::L2, t + lat2)
        } else if self.llc.touch(line) {
            self.fill_all(line);
            (ServedBy::Llc, t + lat3)
        } else if let Some(key) = self.inflight_lines.remove(&line) {
            let pf = self
                .inflight
                .remove(&key)
                .expect("in-flight index consistent");
            let mut ready = key.0;
            if let Some(h) = hermes {
                ready = ready.min(h.completion_cycle);
                h.consumed = true;
            }
            if pf.measured && self.measuring {
                self.metrics.prefetch_useful += 1;
                self.metrics.prefetch_late += 1;
            }
            self.fill_all(line);
            (ServedBy::PrefetchMerge, ready.max(t + lat3))
        } else {
            let mut ready = self.dram.schedule(t + lat3);
            if self.measuring {
                self.metrics.dram_requests += 1;
            }
            if let Some(h) = hermes {
                ready = ready.min(h.completion_cycle.max(t + lat3));
                h.consumed = true;
            }
            self.fill_all(line);
            (ServedBy::Dram, ready)
        };

        if served_by.is_off_chip() {
            self.pending_fill.insert(line, completion);
            if self.pending_fill.len() > 4096 {
                self.pending_fill.retain(|_, ready| *ready > t);
            }
        } else {
            if let Some(&ready) = self.pending_fill.get(&line) {
                if ready > t {
                    completion = completion.max(ready);
                } else {
                    self.pending_fill.remove(&line);
                }
            }
            if let Some(measured) = self.prefetched.remove(&line) {
                if measured && self.measuring {
                    self.metrics.prefetch_useful += 1;
                }
            }
        }

        if self.measuring {
            let m = &mut self.metrics;
            m.demand_accesses += 1;
            if acc.kind == AccessKind::Load {
                m.loads += 1;
            }
            match served_by {
                ServedBy::L1 => m.l1_hits += 1,
                ServedBy::L2 => m.l2_hits += 1,
                ServedBy::Llc => m.llc_hits += 1,
                ServedBy::Dram | ServedBy::PrefetchMerge => m.off_chip_loads += 1,
            }
            m.total_load_cycles += completion - t;
        }

        AccessResult {
            issue_cycle: t,
            completion_cycle: completion,
            served_by,
        }
    }

    /// Request `line` into `fill` (and the levels below it) at cycle `at`.
    pub fn issue_prefetch(&mut self, line: u64, fill: FillLevel, at: u64) -> PrefetchOutcome {
        if self.measuring {
            self.metrics.prefetches_issued += 1;
        }
        let resident = match fill {
            FillLevel::L2 => self.l2.contains(line),
            FillLevel::Llc => self.llc.contains(line),
        };
        if resident || self.inflight_lines.contains_key(&line) {
            if self.measuring {
                self.metrics.prefetch_redundant += 1;
            }
            return PrefetchOutcome::Redundant;
        }
        let completion = self.dram.schedule(at);
        if self.measuring {
            self.metrics.dram_requests += 1;
        }
        self.seq += 1;
        let key = (completion, self.seq);
        self.inflight.insert(
            key,
            InFlight {
                line,
                fill,
                measured: self.measuring,
            },
        );
        self.inflight_lines.insert(line, key);
        PrefetchOutcome::Issued {
            completion_cycle: completion,
        }
    }

    /// Close the books: undemanded prefetched lines count as unused and
    /// unfinished prefetches as in flight.
    pub fn finish(&mut self) -> SimMetrics {
        let unused = self.prefetched.values().filter(|m| **m).count() as u64;
        let in_flight = self.inflight.values().filter(|p| p.measured).count() as u64;
        self.metrics.prefetch_unused += unused;
        self.metrics.prefetch_in_flight_end += in_flight;
        self.prefetched.clear();
        self.metrics
    }
}

/// Off-chip load predictor hook, invoked at load issue and trained when the
/// load completes.
pub trait OffChipPredictor {
    fn name(&self) -> &str;
    fn predict(&mut self, acc: &MemoryAccess) -> LoadQueueMeta;
    fn train(&mut self, meta: &LoadQueueMeta, went_off_chip: bool);
    fn on_prefetch_fill(&mut self, _line: u64) {}
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunOptions {
    /// Leading accesses excluded from metrics.
    pub warmup: usize,
    /// Issue Hermes requests for loads predicted off-chip.
    pub hermes: bool,
    pub hermes_issue_latency: u64,
    pub record_outcomes: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            warmup: 0,
            hermes: false,
            hermes_issue_latency: 6,
            record_outcomes: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub metrics: SimMetrics,
    pub outcomes: Vec<AccessResult>,
    pub contents: [Vec<u64>; 3],
}

/// Drives a [`MemorySystem`] with optional prefetcher and off-chip predictor.
pub struct Simulator<'a> {
    pub mem: MemorySystem,
    prefetcher: Option<&'a mut dyn Prefetcher>,
    predictor: Option<&'a mut dyn OffChipPredictor>,
    opts: RunOptions,
    steps: usize,
    outcomes: Vec<AccessResult>,
}

impl<'a> Simulator<'a> {
    pub fn new(
        cfg: MemConfig,
        prefetcher: Option<&'a mut dyn Prefetcher>,
        predictor: Option<&'a mut dyn OffChipPredictor>,
        opts: RunOptions,
    ) -> Self {
        let mut mem = MemorySystem::new(cfg);
        mem.set_measuring(opts.warmup == 0);
        Simulator {
            mem,
            prefetcher,
            predictor,
            opts,
            steps: 0,
            outcomes: Vec::new(),
        }
    }

    fn forward_fills(&mut self) {
        for line in self.mem.take_fills() {
            if let Some(p) = self.prefetcher.as_deref_mut() {
                p.on_fill(line);
            }
            if let Some(p) = self.predictor.as_deref_mut() {
                p.on_prefetch_fill(line);
            }
        }
    }

    pub fn step(&mut self, acc: &MemoryAccess) -> AccessResult {
        if self.steps == self.opts.warmup && self.opts.warmup > 0 {
            self.mem.set_measuring(true);
            if let Some(p) = self.prefetcher.as_deref_mut() {
                p.reset_stats();
            }
        }
        self.steps += 1;
        let t = acc.cycle;
        self.mem.drain_fills(t);
        self.forward_fills();

        let is_load = acc.kind == AccessKind::Load;
        let meta = match (self.predictor.as_deref_mut(), is_load) {
            (Some(p), true) => Some(p.predict(acc)),
            _ => None,
        };
        let mut hermes = match &meta {
            Some(m) if self.opts.hermes && m.predicted_off_chip => {
                Some(crate::hermes::issue_hermes(
                    self.mem.dram(),
                    acc,
                    m,
                    self.opts.hermes_issue_latency,
                ))
            }
            _ => None,
        };

        let result = self.mem.access(acc, hermes.as_mut());
        let measuring = self.mem.measuring;

        if let Some(h) = &hermes {
            if measuring {
                let m = self.mem.metrics_mut();
                m.hermes_issued += 1;
                if h.consumed {
                    m.hermes_consumed += 1;
                } else {
                    m.hermes_discarded += 1;
                }
            }
        }

        if let (Some(meta), Some(p)) = (meta, self.predictor.as_deref_mut()) {
            let actual = result.served_by.is_off_chip();
            p.train(&meta, actual);
            if measuring {
                let m = self.mem.metrics_mut();
                match (meta.predicted_off_chip, actual) {
                    (true, true) => m.offchip_true_pos += 1,
                    (true, false) => m.offchip_false_pos += 1,
                    (false, true) => m.offchip_false_neg += 1,
                    (false, false) => m.offchip_true_neg += 1,
                }
            }
        }

        let trigger = match self.mem.config().trigger {
            PrefetchTrigger::L1Miss => result.served_by != ServedBy::L1,
            PrefetchTrigger::AllDemands => true,
        };
        if trigger {
            if let Some(p) = self.prefetcher.as_deref_mut() {
                let ctx = DemandContext {
                    access: *acc,
                    line: acc.line(),
                    served_by: result.served_by,
                    bandwidth: self.mem.bandwidth_level(t),
                };
                let target = p.on_demand(&ctx);
                if measuring {
                    self.mem.metrics_mut().prefetch_triggers += 1;
                }
                if let Some(target) = target {
                    if measuring && line_page(target) != line_page(ctx.line) {
                        self.mem.metrics_mut().prefetch_cross_page += 1;
                    }
                    let fill = self.mem.config().prefetch_fill;
                    let at = t + self.mem.config().l1.latency;
                    if self.mem.issue_prefetch(target, fill, at) == PrefetchOutcome::Redundant
                        && !self.mem.inflight_lines.contains_key(&target)
                    {
                        // Already resident: the data is there now.
                        p.on_fill(target);
                    }
                }
            }
        }

        if self.opts.record_outcomes {
            self.outcomes.push(result);
        }
        result
    }

    pub fn finish(mut self) -> RunResult {
        let metrics = self.mem.finish();
        RunResult {
            metrics,
            contents: self.mem.contents(),
            outcomes: self.outcomes,
        }
    }
}

/// Feed a whole trace through the hierarchy.
pub fn run<'a>(
    cfg: &MemConfig,
    trace: &[MemoryAccess],
    prefetcher: Option<&'a mut dyn Prefetcher>,
    predictor: Option<&'a mut dyn OffChipPredictor>,
    opts: RunOptions,
) -> RunResult {
    let mut sim = Simulator::new(cfg.clone(), prefetcher, predictor, opts);
    for acc in trace {
        sim.step(acc);
    }
    sim.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{generate_memory_trace, GeneratorKind, TraceSpec};

    fn small_cfg() -> MemConfig {
        MemConfig {
            l1: CacheGeometry {
                sets: 1,
                ways: 2,
                latency: 4,
            },
            l2: CacheGeometry {
                sets: 1,
                ways: 4,
                latency: 12,
            },
            llc: CacheGeometry {
                sets: 1,
                ways: 8,
                latency: 38,
            },
            ..MemConfig::default()
        }
    }

    fn load(line: u64, cycle: u64) -> MemoryAccess {
        MemoryAccess::load(0x400, line * 64, cycle)
    }

    #[test]
    fn repeat_access_hits_l1() {
        let mut m = MemorySystem::new(MemConfig::default());
        let first = m.access(&load(10, 0), None);
        assert_eq!(first.served_by, ServedBy::Dram);
        let second = m.access(&load(10, 1000), None);
        assert_eq!(second.served_by, ServedBy::L1);
        assert_eq!(second.latency(), 4);
    }

    #[test]
    fn cold_miss_pays_full_walk() {
        let mut m = MemorySystem::new(MemConfig::default());
        let r = m.access(&load(99, 0), None);
        assert_eq!(r.served_by, ServedBy::Dram);
        assert!(r.latency() >= 4 + 12 + 38 + 200);
    }

    #[test]
    fn lru_eviction_from_two_way_l1() {
        let mut m = MemorySystem::new(small_cfg());
        for (i, line) in [1u64, 2, 3].iter().enumerate() {
            m.access(&load(*line, i as u64 * 1000), None);
        }
        // line 1 was LRU in the 2-way L1 and got evicted; still in L2
        let r = m.access(&load(1, 10_000), None);
        assert_eq!(r.served_by, ServedBy::L2);
    }

    #[test]
    fn inclusion_back_invalidates() {
        let mut m = MemorySystem::new(small_cfg());
        for line in 0..9u64 {
            m.access(&load(line, line * 1000), None);
        }
        // the 8-way LLC evicted line 0, so no level may hold it
        let [l1, l2, llc] = m.contents();
        assert!(!llc.contains(&0));
        assert!(l2.iter().all(|l| llc.contains(l)));
        assert!(l1.iter().all(|l| l2.contains(l)));
    }

    #[test]
    fn prefetch_of_resident_line_is_redundant() {
        let mut m = MemorySystem::new(MemConfig::default());
        m.access(&load(5, 0), None);
        assert_eq!(
            m.issue_prefetch(5, FillLevel::L2, 10),
            PrefetchOutcome::Redundant
        );
        assert_eq!(m.metrics().prefetch_redundant, 1);
    }

    #[test]
    fn timely_prefetch_makes_demand_hit() {
        let mut m = MemorySystem::new(MemConfig::default());
        let PrefetchOutcome::Issued { completion_cycle } = m.issue_prefetch(7, FillLevel::L2, 0)
        else {
            panic!("expected issue")
        };
        let r = m.access(&load(7, completion_cycle + 1), None);
        assert_eq!(r.served_by, ServedBy::L2);
        assert_eq!(m.metrics().prefetch_useful, 1);
        assert_eq!(m.metrics().prefetch_late, 0);
    }

    #[test]
    fn late_prefetch_merges() {
        let mut m = MemorySystem::new(MemConfig::default());
        let PrefetchOutcome::Issued { completion_cycle } = m.issue_prefetch(7, FillLevel::L2, 0)
        else {
            panic!("expected issue")
        };
        let r = m.access(&load(7, 10), None);
        assert_eq!(r.served_by, ServedBy::PrefetchMerge);
        assert_eq!(r.completion_cycle, completion_cycle.max(10 + 54));
        assert_eq!(m.metrics().prefetch_late, 1);
        assert_eq!(m.metrics().prefetch_useful, 1);
    }

    #[test]
    fn prefetch_fill_leaves_l1_untouched() {
        let mut m = MemorySystem::new(MemConfig::default());
        m.issue_prefetch(7, FillLevel::Llc, 0);
        m.drain_fills(10_000);
        assert!(!m.level(Level::L1).contains(7));
        assert!(!m.level(Level::L2).contains(7));
        assert!(m.level(Level::Llc).contains(7));
    }

    #[test]
    fn empty_trace_all_zero() {
        let r = run(
            &MemConfig::default(),
            &[],
            None,
            None,
            RunOptions::default(),
        );
        assert_eq!(r.metrics, SimMetrics::default());
    }

    fn stride_trace(stride: i64, len: usize) -> Vec<MemoryAccess> {
        let mut spec = TraceSpec::new(GeneratorKind::Stride, len, 1);
        spec.stride = stride;
        generate_memory_trace(&spec).unwrap()
    }

    #[test]
    fn no_prefetcher_issues_nothing() {
        let t = stride_trace(1, 2000);
        let mut p = NoPrefetcher;
        let r = run(
            &MemConfig::default(),
            &t,
            Some(&mut p),
            None,
            RunOptions::default(),
        );
        assert_eq!(r.metrics.prefetches_issued, 0);
        assert_eq!(r.metrics.coverage(), 0.0);
    }

    #[test]
    fn stride_prefetcher_covers_stride_trace() {
        let t = stride_trace(2, 20_000);
        let mut p = StridePrefetcher::new();
        let opts = RunOptions {
            warmup: 2000,
            ..RunOptions::default()
        };
        let r = run(&MemConfig::default(), &t, Some(&mut p), None, opts);
        assert!(
            r.metrics.coverage() >= 0.9,
            "coverage {}",
            r.metrics.coverage()
        );
    }

    #[test]
    fn conservation_and_prefetch_accounting() {
        let mut spec = TraceSpec::new(GeneratorKind::MixedPcStride, 30_000, 4);
        spec.strides = vec![1, 3, -2, 0];
        spec.noise = 0.2;
        spec.footprint = 4096;
        let t = generate_memory_trace(&spec).unwrap();
        for fill in [FillLevel::L2, FillLevel::Llc] {
            let cfg = MemConfig {
                prefetch_fill: fill,
                ..MemConfig::default()
            };
            let mut p = NextLinePrefetcher;
            let m = run(&cfg, &t, Some(&mut p), None, RunOptions::default()).metrics;
            assert_eq!(
                m.demand_accesses,
                m.l1_hits + m.l2_hits + m.llc_hits + m.off_chip_loads
            );
            assert_eq!(
                m.prefetches_issued,
                m.prefetch_useful
                    + m.prefetch_unused
                    + m.prefetch_redundant
                    + m.prefetch_in_flight_end
            );
            assert!((0.0..=1.0).contains(&m.coverage()));
        }
    }

    #[test]
    fn completed_prefetch_never_slows_a_demand() {
        let t = stride_trace(1, 5000);
        let opts = RunOptions {
            record_outcomes: true,
            ..RunOptions::default()
        };
        let base = run(&MemConfig::default(), &t, None, None, opts);
        let mut p = NextLinePrefetcher;
        let with = run(&MemConfig::default(), &t, Some(&mut p), None, opts);
        for (a, b) in with.outcomes.iter().zip(&base.outcomes) {
            if matches!(a.served_by, ServedBy::L2 | ServedBy::Llc) && b.served_by == ServedBy::Dram
            {
                assert!(a.completion_cycle <= b.completion_cycle);
            }
        }
    }
}
