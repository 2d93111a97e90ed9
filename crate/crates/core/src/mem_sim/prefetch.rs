//! Prefetcher hook and the simple human-designed baselines.

use std::collections::HashMap;

use crate::trace::{line_page, MemoryAccess};

use super::dram::BwLevel;
use super::ServedBy;

/// What a prefetcher sees for each triggering demand.
#[derive(Clone, Copy, Debug)]
pub struct DemandContext {
    pub access: MemoryAccess,
    pub line: u64,
    pub served_by: ServedBy,
    pub bandwidth: BwLevel,
}

pub trait Prefetcher {
    fn name(&self) -> &str;

    /// Called once per triggering demand in trace order; returns at most one
    /// cacheline to prefetch.
    fn on_demand(&mut self, ctx: &DemandContext) -> Option<u64>;

    /// A prefetched line finished filling (or was already resident).
    fn on_fill(&mut self, _line: u64) {}

    /// Forget statistics gathered so far (learned state is kept).
    fn reset_stats(&mut self) {}
}

#[derive(Debug, Default)]
pub struct NoPrefetcher;

impl Prefetcher for NoPrefetcher {
    fn name(&self) -> &str {
        "none"
    }

    fn on_demand(&mut self, _ctx: &DemandContext) -> Option<u64> {
        None
    }
}

/// Next cacheline within the same page.
#[derive(Debug, Default)]
pub struct NextLinePrefetcher;

impl Prefetcher for NextLinePrefetcher {
    fn name(&self) -> &str {
        "next_line"
    }

    fn on_demand(&mut self, ctx: &DemandContext) -> Option<u64> {
        let next = ctx.line + 1;
        (line_page(next) == line_page(ctx.line)).then_some(next)
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct StrideEntry {
    last_line: u64,
    stride: i64,
    confidence: u8,
}

/// PC-indexed stride detector with a 2-bit confidence counter; prefetches
/// `line + stride` once the same stride has been seen twice in a row, never
/// leaving the demand's page.
#[derive(Debug, Default)]
pub struct StridePrefetcher {
    table: HashMap<u64, StrideEntry>,
}

impl StridePrefetcher {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Prefetcher for StridePrefetcher {
    fn name(&self) -> &str {
        "stride"
    }

    fn on_demand(&mut self, ctx: &DemandContext) -> Option<u64> {
        let line = ctx.line;
        let entry = self.table.entry(ctx.access.pc).or_insert(StrideEntry {
            last_line: line,
            stride: 0,
            confidence: 0,
        });
        let stride = line as i64 - entry.last_line as i64;
        if stride != 0 && stride == entry.stride {
            entry.confidence = (entry.confidence + 1).min(3);
        } else if entry.confidence > 0 {
            entry.confidence -= 1;
        } else {
            entry.stride = stride;
        }
        entry.last_line = line;
        if entry.confidence >= 2 {
            let target = line as i64 + entry.stride;
            if target >= 0 && line_page(target as u64) == line_page(line) {
                return Some(target as u64);
            }
        }
        None
    }
}
