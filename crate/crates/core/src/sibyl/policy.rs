use std::collections::{BTreeSet, HashMap};

use super::agent::SibylAgent;
use super::device::Device;
use super::observe::Observation;
use super::storage::{HybridStorage, Outcome};
use crate::trace::{RequestKind, StorageRequest};

pub struct Decision<'a> {
    pub index: usize,
    pub req: &'a StorageRequest,
    pub obs: Observation,
    pub storage: &'a HybridStorage,
}

pub trait PlacementPolicy {
    fn name(&self) -> &str;

    /// Idealized policies run against a fast device without capacity limit.
    fn unbounded_fast(&self) -> bool {
        false
    }

    fn decide(&mut self, d: &Decision) -> Device;

    /// Fast pages to evict so that `needed` slots are free. LRU by default.
    fn victims(&mut self, d: &Decision, needed: u64) -> Vec<u64> {
        d.storage.lru_victims(d.req, needed)
    }

    fn feedback(&mut self, _d: &Decision, _action: Device, _outcome: &Outcome) {}
}

pub struct SlowOnly;

impl PlacementPolicy for SlowOnly {
    fn name(&self) -> &str {
        "slow_only"
    }

    fn decide(&mut self, _d: &Decision) -> Device {
        Device::Slow
    }
}

pub struct FastOnly;

impl PlacementPolicy for FastOnly {
    fn name(&self) -> &str {
        "fast_only"
    }

    fn unbounded_fast(&self) -> bool {
        true
    }

    fn decide(&mut self, _d: &Decision) -> Device {
        Device::Fast
    }
}

/// Writes go to the fast device (demoting LRU pages under pressure); reads
/// leave data where it is.
pub struct RecencyHeuristic;

impl PlacementPolicy for RecencyHeuristic {
    fn name(&self) -> &str {
        "recency"
    }

    fn decide(&mut self, d: &Decision) -> Device {
        match d.req.kind {
            RequestKind::Write => Device::Fast,
            RequestKind::Read => d.storage.map().device_of(d.req.page_id),
        }
    }
}

/// Future-knowledge placement under the fast capacity: a page goes to the
/// fast device only if it is used again, and only if its next use comes
/// before that of some fast-resident page (which is then evicted,
/// farthest next use first). Pages already fast stay fast.
pub struct Oracle {
    next_use: Vec<u64>,
    /// Next use of every fast-resident page, as tracked by the oracle.
    fast_next: BTreeSet<(u64, u64)>,
    page_next: HashMap<u64, u64>,
}

pub const NEVER: u64 = u64::MAX;

impl Oracle {
    /// First pass: index of the next request to the same page.
    pub fn new(trace: &[StorageRequest]) -> Self {
        let mut next_use = vec![NEVER; trace.len()];
        let mut seen: HashMap<u64, u64> = HashMap::new();
        for (i, r) in trace.iter().enumerate().rev() {
            if let Some(n) = seen.insert(r.page_id, i as u64) {
                next_use[i] = n;
            }
        }
        Oracle {
            next_use,
            fast_next: BTreeSet::new(),
            page_next: HashMap::new(),
        }
    }

    fn farthest(&self, exclude: &[u64]) -> impl Iterator<Item = &(u64, u64)> + '_ {
        let ex = exclude.to_vec();
        self.fast_next
            .iter()
            .rev()
            .filter(move |(_, p)| !ex.contains(p))
    }
}

impl PlacementPolicy for Oracle {
    fn name(&self) -> &str {
        "oracle"
    }

    fn decide(&mut self, d: &Decision) -> Device {
        let map = d.storage.map();
        if map.device_of(d.req.page_id) == Device::Fast {
            return Device::Fast;
        }
        let next = self.next_use[d.index];
        if next == NEVER {
            return Device::Slow;
        }
        let needed = d.storage.fast_shortfall(d.req, Device::Fast);
        if needed == 0 {
            return Device::Fast;
        }
        let exclude: Vec<u64> = d.req.pages().collect();
        let farther = self
            .farthest(&exclude)
            .take(needed as usize)
            .filter(|(n, _)| *n > next)
            .count() as u64;
        if farther == needed {
            Device::Fast
        } else {
            Device::Slow
        }
    }

    fn victims(&mut self, d: &Decision, needed: u64) -> Vec<u64> {
        let exclude: Vec<u64> = d.req.pages().collect();
        self.farthest(&exclude)
            .take(needed as usize)
            .map(|(_, p)| *p)
            .collect()
    }

    fn feedback(&mut self, d: &Decision, _action: Device, outcome: &Outcome) {
        for v in &outcome.evicted {
            if let Some(n) = self.page_next.remove(v) {
                self.fast_next.remove(&(n, *v));
            }
        }
        let next = self.next_use[d.index];
        for p in d.req.pages() {
            if let Some(n) = self.page_next.remove(&p) {
                self.fast_next.remove(&(n, p));
            }
            if d.storage.map().device_of(p) == Device::Fast {
                // pages other than the keyed one are tracked with its next use
                self.page_next.insert(p, next);
                self.fast_next.insert((next, p));
            }
        }
    }
}

pub struct SibylPolicy {
    pub agent: SibylAgent,
}

impl PlacementPolicy for SibylPolicy {
    fn name(&self) -> &str {
        "sibyl"
    }

    fn decide(&mut self, d: &Decision) -> Device {
        self.agent.place(&d.obs)
    }

    fn feedback(&mut self, d: &Decision, action: Device, outcome: &Outcome) {
        self.agent
            .observe_outcome(d.req.page_id, d.obs, action, outcome);
    }
}
