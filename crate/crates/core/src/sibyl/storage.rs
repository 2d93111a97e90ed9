use serde::{Deserialize, Serialize};

use super::device::{Device, DeviceConfig, DeviceModel};
use super::pagemap::PageMap;
use crate::error::{Error, Result};
use crate::trace::{RequestKind, StorageRequest};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HssConfig {
    pub fast: DeviceConfig,
    pub slow: DeviceConfig,
}

impl Default for HssConfig {
    fn default() -> Self {
        HssConfig {
            fast: DeviceConfig::default_fast(),
            slow: DeviceConfig::default_slow(),
        }
    }
}

impl HssConfig {
    pub fn validate(&self) -> Result<()> {
        self.fast.validate()?;
        self.slow.validate()?;
        Ok(())
    }
}

/// What serving one request cost.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    /// Arrival to completion, including queueing and eviction.
    pub latency_us: f64,
    pub evicted: Vec<u64>,
    /// Transfer cost of the eviction: fast read plus slow write of the
    /// victims. Zero without eviction.
    pub eviction_us: f64,
    /// Pages whose data moved between devices to serve the request.
    pub migrated_pages: u64,
}

/// Fast and slow devices plus the page map.
#[derive(Clone, Debug)]
pub struct HybridStorage {
    fast: DeviceModel,
    slow: DeviceModel,
    map: PageMap,
}

impl HybridStorage {
    pub fn new(cfg: &HssConfig) -> Self {
        HybridStorage {
            map: PageMap::new(cfg.fast.capacity_pages, Device::Slow),
            fast: DeviceModel::new(cfg.fast),
            slow: DeviceModel::new(cfg.slow),
        }
    }

    /// Fast device without a capacity limit, every page initially on it.
    pub fn unbounded_fast(cfg: &HssConfig) -> Self {
        let mut fast = cfg.fast;
        fast.capacity_pages = None;
        HybridStorage {
            map: PageMap::new(None, Device::Fast),
            fast: DeviceModel::new(fast),
            slow: DeviceModel::new(cfg.slow),
        }
    }

    pub fn map(&self) -> &PageMap {
        &self.map
    }

    pub fn device(&self, d: Device) -> &DeviceModel {
        match d {
            Device::Fast => &self.fast,
            Device::Slow => &self.slow,
        }
    }

    fn device_mut(&mut self, d: Device) -> &mut DeviceModel {
        match d {
            Device::Fast => &mut self.fast,
            Device::Slow => &mut self.slow,
        }
    }

    /// Fast slots that must be freed before placing `req` on `target`.
    pub fn fast_shortfall(&self, req: &StorageRequest, target: Device) -> u64 {
        if target != Device::Fast {
            return 0;
        }
        let incoming = req
            .pages()
            .filter(|p| self.map.device_of(*p) != Device::Fast)
            .count() as u64;
        match self.map.fast_free() {
            Some(free) => incoming.saturating_sub(free),
            None => 0,
        }
    }

    /// Least-recently-used fast pages outside the request.
    pub fn lru_victims(&self, req: &StorageRequest, needed: u64) -> Vec<u64> {
        let exclude: Vec<u64> = req.pages().collect();
        self.map.lru_fast(needed, &exclude)
    }

    /// Move `victims` from fast to slow, starting at `at`. Returns the
    /// finish time and the transfer cost.
    pub fn evict(&mut self, at: f64, victims: &[u64]) -> (f64, f64) {
        if victims.is_empty() {
            return (at, 0.0);
        }
        let n = victims.len() as u64;
        let read_done = self.fast.serve(at, RequestKind::Read, n);
        let done = self.slow.serve(read_done, RequestKind::Write, n);
        for v in victims {
            self.map.set_device(*v, Device::Slow);
        }
        let cost = self.fast.cost(RequestKind::Read, n) + self.slow.cost(RequestKind::Write, n);
        (done, cost)
    }

    /// Serve `req` with its pages placed on `target`, evicting `victims`
    /// first. Writes go straight to `target`; reads are served where the
    /// data lives and pages not already on `target` are then written there.
    pub fn apply(
        &mut self,
        req: &StorageRequest,
        target: Device,
        victims: &[u64],
    ) -> Result<Outcome> {
        let needed = self.fast_shortfall(req, target);
        if let Some(cap) = self.map.fast_capacity() {
            if needed > cap {
                return Err(Error::Capacity {
                    needed,
                    capacity: cap,
                });
            }
        }
        if (victims.len() as u64) < needed {
            return Err(Error::Capacity {
                needed,
                capacity: self.map.fast_free().unwrap_or(0) + victims.len() as u64,
            });
        }
        let now = req.timestamp as f64;
        let (start, eviction_us) = self.evict(now, victims);
        let pages: Vec<u64> = req.pages().collect();
        let mut migrated = 0;
        let finish = match req.kind {
            RequestKind::Write => {
                let n = pages.len() as u64;
                self.device_mut(target).serve(start, RequestKind::Write, n)
            }
            RequestKind::Read => {
                let mut finish = start;
                for src in [Device::Fast, Device::Slow] {
                    let n = pages
                        .iter()
                        .filter(|p| self.map.device_of(**p) == src)
                        .count() as u64;
                    if n == 0 {
                        continue;
                    }
                    let read_done = self.device_mut(src).serve(start, RequestKind::Read, n);
                    let done = if src != target {
                        migrated += n;
                        self.device_mut(target)
                            .serve(read_done, RequestKind::Write, n)
                    } else {
                        read_done
                    };
                    finish = finish.max(done);
                }
                finish
            }
        };
        for p in &pages {
            if self.map.device_of(*p) != target {
                self.map.set_device(*p, target);
            }
            self.map.record_access(*p, req.timestamp);
        }
        Ok(Outcome {
            latency_us: finish - now,
            evicted: victims.to_vec(),
            eviction_us,
            migrated_pages: migrated,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(page: u64, kind: RequestKind, ts: u64) -> StorageRequest {
        StorageRequest {
            page_id: page,
            size_pages: 1,
            kind,
            timestamp: ts,
        }
    }

    fn small(cap: u64) -> HssConfig {
        let mut c = HssConfig::default();
        c.fast.capacity_pages = Some(cap);
        c
    }

    #[test]
    fn one_page_victim_cost() {
        let cfg = small(1);
        let mut s = HybridStorage::new(&cfg);
        s.apply(&req(1, RequestKind::Write, 0), Device::Fast, &[])
            .unwrap();
        let r = req(2, RequestKind::Write, 10_000);
        assert_eq!(s.fast_shortfall(&r, Device::Fast), 1);
        let v = s.lru_victims(&r, 1);
        assert_eq!(v, vec![1]);
        let o = s.apply(&r, Device::Fast, &v).unwrap();
        assert_eq!(o.eviction_us, 84.0 + 1014.0);
        assert_eq!(s.map().device_of(1), Device::Slow);
        assert!(s.map().check());
    }

    #[test]
    fn no_shortfall_no_eviction() {
        let mut s = HybridStorage::new(&small(4));
        let (t, cost) = s.evict(5.0, &[]);
        assert_eq!((t, cost), (5.0, 0.0));
    }

    #[test]
    fn request_larger_than_fast_rejected() {
        let mut s = HybridStorage::new(&small(2));
        let r = StorageRequest {
            page_id: 0,
            size_pages: 3,
            kind: RequestKind::Write,
            timestamp: 0,
        };
        assert!(matches!(
            s.apply(&r, Device::Fast, &[]),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn fast_to_fast_moves_nothing() {
        let mut s = HybridStorage::new(&small(4));
        s.apply(&req(1, RequestKind::Write, 0), Device::Fast, &[])
            .unwrap();
        let o = s
            .apply(&req(1, RequestKind::Read, 5000), Device::Fast, &[])
            .unwrap();
        assert_eq!(o.migrated_pages, 0);
        assert_eq!(o.latency_us, 84.0);
        assert_eq!(s.map().info(1).unwrap().access_count, 2);
    }

    #[test]
    fn promotion_pays_read_then_write() {
        let mut s = HybridStorage::new(&small(4));
        let o = s
            .apply(&req(1, RequestKind::Read, 0), Device::Fast, &[])
            .unwrap();
        assert_eq!(o.latency_us, 912.0 + 92.4);
        assert_eq!(o.migrated_pages, 1);
    }
}
