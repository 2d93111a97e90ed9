use serde::{Deserialize, Serialize};

/// Counters for one simulation window. Ratios are derived on demand.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub demand_accesses: u64,
    pub loads: u64,
    pub l1_hits: u64,
    pub l2_hits: u64,
    pub llc_hits: u64,
    /// Demands that missed every level, including those that merged with an
    /// in-flight prefetch.
    pub off_chip_loads: u64,
    pub total_load_cycles: u64,
    pub dram_requests: u64,

    pub prefetch_triggers: u64,
    pub prefetches_issued: u64,
    /// Prefetched lines demanded after or while being filled.
    pub prefetch_useful: u64,
    /// Subset of `prefetch_useful` demanded before the fill completed.
    pub prefetch_late: u64,
    pub prefetch_unused: u64,
    pub prefetch_redundant: u64,
    pub prefetch_in_flight_end: u64,
    pub prefetch_cross_page: u64,

    pub offchip_true_pos: u64,
    pub offchip_false_pos: u64,
    pub offchip_false_neg: u64,
    pub offchip_true_neg: u64,

    pub hermes_issued: u64,
    pub hermes_consumed: u64,
    pub hermes_discarded: u64,
}

impl SimMetrics {
    /// Fraction of would-be off-chip demands that a prefetch served, either
    /// by arriving first or by merging with the demand.
    pub fn coverage(&self) -> f64 {
        let uncovered = self.off_chip_loads.saturating_sub(self.prefetch_late);
        let denom = self.prefetch_useful + uncovered;
        if denom == 0 {
            0.0
        } else {
            self.prefetch_useful as f64 / denom as f64
        }
    }

    /// Fraction of resolved prefetches that were never demanded.
    pub fn overprediction_rate(&self) -> f64 {
        let resolved = self.prefetch_useful + self.prefetch_unused;
        if resolved == 0 {
            0.0
        } else {
            self.prefetch_unused as f64 / resolved as f64
        }
    }

    pub fn mean_load_cycles(&self) -> f64 {
        if self.demand_accesses == 0 {
            0.0
        } else {
            self.total_load_cycles as f64 / self.demand_accesses as f64
        }
    }

    pub fn off_chip_fraction(&self) -> f64 {
        if self.demand_accesses == 0 {
            0.0
        } else {
            self.off_chip_loads as f64 / self.demand_accesses as f64
        }
    }
}
