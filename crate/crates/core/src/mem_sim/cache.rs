//! Set-associative LRU cache level.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    L1,
    L2,
    Llc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheGeometry {
    pub sets: usize,
    pub ways: usize,
    /// Extra cycles to look up this level after missing the one above.
    pub latency: u64,
}

impl CacheGeometry {
    pub fn capacity_bytes(&self) -> usize {
        self.sets * self.ways * crate::trace::CACHELINE_BYTES as usize
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Way {
    line: u64,
    valid: bool,
    stamp: u64,
}

#[derive(Clone, Debug)]
pub struct CacheLevel {
    level: Level,
    geometry: CacheGeometry,
    ways: Vec<Way>,
    clock: u64,
}

impl CacheLevel {
    pub fn new(level: Level, geometry: CacheGeometry) -> Self {
        assert!(
            geometry.sets > 0 && geometry.ways > 0,
            "empty cache geometry"
        );
        CacheLevel {
            level,
            geometry,
            ways: vec![Way::default(); geometry.sets * geometry.ways],
            clock: 0,
        }
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn latency(&self) -> u64 {
        self.geometry.latency
    }

    pub fn geometry(&self) -> CacheGeometry {
        self.geometry
    }

    fn set_range(&self, line: u64) -> std::ops::Range<usize> {
        let set = (line % self.geometry.sets as u64) as usize;
        let start = set * self.geometry.ways;
        start..start + self.geometry.ways
    }

    fn find(&self, line: u64) -> Option<usize> {
        self.set_range(line)
            .find(|&i| self.ways[i].valid && self.ways[i].line == line)
    }

    /// Residency check without touching LRU state.
    pub fn contains(&self, line: u64) -> bool {
        self.find(line).is_some()
    }

    /// Lookup that promotes a hit to most-recently-used.
    pub fn touch(&mut self, line: u64) -> bool {
        match self.find(line) {
            Some(i) => {
                self.clock += 1;
                self.ways[i].stamp = self.clock;
                true
            }
            None => false,
        }
    }

    /// Insert `line` as most-recently-used, returning the evicted line if a
    /// valid one was displaced. Filling a resident line only touches it.
    pub fn fill(&mut self, line: u64) -> Option<u64> {
        if self.touch(line) {
            return None;
        }
        let range = self.set_range(line);
        let slot = range
            .clone()
            .find(|&i| !self.ways[i].valid)
            .unwrap_or_else(|| {
                range
                    .min_by_key(|&i| self.ways[i].stamp)
                    .expect("at least one way")
            });
        let victim = self.ways[slot];
        self.clock += 1;
        self.ways[slot] = Way {
            line,
            valid: true,
            stamp: self.clock,
        };
        victim.valid.then_some(victim.line)
    }

    pub fn invalidate(&mut self, line: u64) -> bool {
        match self.find(line) {
            Some(i) => {
                self.ways[i].valid = false;
                true
            }
            None => false,
        }
    }

    /// Sorted resident lines.
    pub fn resident_lines(&self) -> Vec<u64> {
        let mut v: Vec<u64> = self
            .ways
            .iter()
            .filter(|w| w.valid)
            .map(|w| w.line)
            .collect();
        v.sort_unstable();
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_way() -> CacheLevel {
        CacheLevel::new(
            Level::L1,
            CacheGeometry {
                sets: 4,
                ways: 2,
                latency: 1,
            },
        )
    }

    #[test]
    fn resident_line_hits() {
        let mut c = two_way();
        assert!(!c.touch(8));
        assert_eq!(c.fill(8), None);
        assert!(c.touch(8));
    }

    #[test]
    fn lru_eviction_in_two_way_set() {
        // lines 0, 4, 8 all map to set 0
        let mut c = two_way();
        c.fill(0);
        c.fill(4);
        assert_eq!(c.fill(8), Some(0));
        assert!(!c.contains(0));
        assert!(c.contains(4) && c.contains(8));
    }

    #[test]
    fn touch_protects_from_eviction() {
        let mut c = two_way();
        c.fill(0);
        c.fill(4);
        c.touch(0);
        assert_eq!(c.fill(8), Some(4));
    }

    #[test]
    fn invalidate_frees_way() {
        let mut c = two_way();
        c.fill(0);
        c.fill(4);
        assert!(c.invalidate(0));
        assert_eq!(c.fill(8), None);
        assert_eq!(c.resident_lines(), vec![4, 8]);
    }

    #[test]
    fn default_capacities() {
        let g = CacheGeometry {
            sets: 64,
            ways: 8,
            latency: 4,
        };
        assert_eq!(g.capacity_bytes(), 32 * 1024);
    }
}
