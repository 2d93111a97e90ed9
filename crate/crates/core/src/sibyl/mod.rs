//! Hybrid storage: a small fast device in front of a large slow one, with a
//! learned placement agent and boundary/heuristic baselines.

pub mod agent;
pub mod device;
pub mod net;
pub mod observe;
pub mod pagemap;
pub mod policy;
pub mod storage;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::trace::StorageRequest;

pub use agent::{reward, Experience, ReplayBuffer, SibylAgent, SibylConfig, TransitionMode};
pub use device::{Affine, Device, DeviceConfig, DeviceModel};
pub use net::{Adam, Sample, ValueNet};
pub use observe::{observe, Observation};
pub use pagemap::PageMap;
pub use policy::{
    Decision, FastOnly, Oracle, PlacementPolicy, RecencyHeuristic, SibylPolicy, SlowOnly,
};
pub use storage::{HssConfig, HybridStorage, Outcome};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HssMetrics {
    pub requests: u64,
    pub total_latency_us: f64,
    pub fast_placements: u64,
    pub slow_placements: u64,
    pub eviction_events: u64,
    pub evicted_pages: u64,
    pub migrated_pages: u64,
    pub total_reward: f64,
}

impl HssMetrics {
    pub fn mean_latency_us(&self) -> f64 {
        if self.requests == 0 {
            0.0
        } else {
            self.total_latency_us / self.requests as f64
        }
    }

    pub fn fast_fraction(&self) -> f64 {
        if self.requests == 0 {
            0.0
        } else {
            self.fast_placements as f64 / self.requests as f64
        }
    }
}

#[derive(Clone, Debug)]
pub struct HssRun {
    pub metrics: HssMetrics,
    pub latencies: Vec<f64>,
    pub placements: Vec<Device>,
}

/// Serve every request of `trace` with `policy` choosing placements.
pub fn run_hss(
    cfg: &HssConfig,
    trace: &[StorageRequest],
    policy: &mut dyn PlacementPolicy,
) -> Result<HssRun> {
    cfg.validate()?;
    let mut storage = if policy.unbounded_fast() {
        HybridStorage::unbounded_fast(cfg)
    } else {
        HybridStorage::new(cfg)
    };
    let mut m = HssMetrics::default();
    let mut latencies = Vec::with_capacity(trace.len());
    let mut placements = Vec::with_capacity(trace.len());
    for (index, req) in trace.iter().enumerate() {
        let obs = observe(storage.map(), req);
        let d = Decision {
            index,
            req,
            obs,
            storage: &storage,
        };
        let action = policy.decide(&d);
        let needed = storage.fast_shortfall(req, action);
        let victims = if needed > 0 {
            policy.victims(&d, needed)
        } else {
            Vec::new()
        };
        let outcome = storage.apply(req, action, &victims)?;
        let d = Decision {
            index,
            req,
            obs,
            storage: &storage,
        };
        policy.feedback(&d, action, &outcome);

        m.requests += 1;
        m.total_latency_us += outcome.latency_us;
        match action {
            Device::Fast => m.fast_placements += 1,
            Device::Slow => m.slow_placements += 1,
        }
        if !outcome.evicted.is_empty() {
            m.eviction_events += 1;
            m.evicted_pages += outcome.evicted.len() as u64;
        }
        m.migrated_pages += outcome.migrated_pages;
        m.total_reward += reward(
            outcome.latency_us,
            !outcome.evicted.is_empty(),
            outcome.eviction_us,
        );
        latencies.push(outcome.latency_us);
        placements.push(action);
    }
    Ok(HssRun {
        metrics: m,
        latencies,
        placements,
    })
}
