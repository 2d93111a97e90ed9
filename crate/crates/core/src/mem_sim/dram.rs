//! Bandwidth-limited DRAM channel.
//!
//! The channel is a single FIFO server. Each cacheline occupies the data bus
//! for `transfers_per_line * core_mhz / mtps` core cycles; a request starts
//! once both it has arrived and the bus is free, and completes
//! `base_latency` cycles after it starts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BwLevel {
    Low,
    High,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DramConfig {
    pub base_latency: u64,
    /// Million transfers per second.
    pub mtps: u32,
    pub core_mhz: u32,
    pub transfers_per_line: u32,
    pub window_cycles: u64,
    pub bw_threshold: f64,
}

impl Default for DramConfig {
    fn default() -> Self {
        DramConfig {
            base_latency: 200,
            mtps: 2400,
            core_mhz: 4000,
            transfers_per_line: 8,
            window_cycles: 1024,
            bw_threshold: 0.5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DramModel {
    cfg: DramConfig,
    occupancy: f64,
    bus_free: f64,
    arrivals: BTreeMap<u64, u32>,
    requests: u64,
    start_log: Option<Vec<f64>>,
}

impl DramModel {
    pub fn new(cfg: DramConfig) -> Self {
        assert!(cfg.mtps > 0, "mtps must be positive");
        assert!(cfg.window_cycles > 0, "bandwidth window must be positive");
        let occupancy = cfg.transfers_per_line as f64 * cfg.core_mhz as f64 / cfg.mtps as f64;
        DramModel {
            cfg,
            occupancy,
            bus_free: 0.0,
            arrivals: BTreeMap::new(),
            requests: 0,
            start_log: None,
        }
    }

    /// Keep every bus start time (for bandwidth-cap checks).
    pub fn with_start_log(mut self) -> Self {
        self.start_log = Some(Vec::new());
        self
    }

    pub fn config(&self) -> &DramConfig {
        &self.cfg
    }

    /// Bus cycles one cacheline transfer occupies.
    pub fn occupancy_cycles(&self) -> f64 {
        self.occupancy
    }

    pub fn requests(&self) -> u64 {
        self.requests
    }

    pub fn start_log(&self) -> Option<&[f64]> {
        self.start_log.as_deref()
    }

    /// Enqueue one line transfer arriving at `at`; returns its completion cycle.
    pub fn schedule(&mut self, at: u64) -> u64 {
        let start = self.bus_free.max(at as f64);
        self.bus_free = start + self.occupancy;
        self.requests += 1;
        *self.arrivals.entry(at).or_insert(0) += 1;
        if let Some(log) = self.start_log.as_mut() {
            log.push(start);
        }
        // Entries older than two windows can no longer be counted.
        let horizon = at.saturating_sub(2 * self.cfg.window_cycles);
        if self
            .arrivals
            .first_key_value()
            .is_some_and(|(k, _)| *k < horizon)
        {
            self.arrivals = self.arrivals.split_off(&horizon);
        }
        start.ceil() as u64 + self.cfg.base_latency
    }

    /// Completion a request arriving at `at` would see, without reserving
    /// the bus.
    pub fn peek_completion(&self, at: u64) -> u64 {
        self.bus_free.max(at as f64).ceil() as u64 + self.cfg.base_latency
    }

    /// Bus demand over the trailing window `[now - window, now]`, as a
    /// fraction of the window (may exceed 1 when requests queue).
    pub fn utilization(&self, now: u64) -> f64 {
        let from = now.saturating_sub(self.cfg.window_cycles);
        let arrived: u32 = self.arrivals.range(from..=now).map(|(_, c)| *c).sum();
        arrived as f64 * self.occupancy / self.cfg.window_cycles as f64
    }

    /// `High` iff utilization is at or above the threshold.
    pub fn bandwidth_level(&self, now: u64) -> BwLevel {
        if self.utilization(now) >= self.cfg.bw_threshold {
            BwLevel::High
        } else {
            BwLevel::Low
        }
    }
}
