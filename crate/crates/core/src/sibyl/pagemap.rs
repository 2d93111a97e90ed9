use std::collections::{BTreeMap, HashMap};

use super::device::Device;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PageInfo {
    pub device: Device,
    pub access_count: u64,
    /// Timestamp of the previous access, `None` before the first.
    pub last_access_us: Option<u64>,
    stamp: u64,
}

/// Page placement and per-page access history. Pages never seen live on
/// the default device.
#[derive(Clone, Debug)]
pub struct PageMap {
    pages: HashMap<u64, PageInfo>,
    /// Fast-resident pages by recency stamp, oldest first.
    fast_lru: BTreeMap<u64, u64>,
    fast_capacity: Option<u64>,
    fast_used: u64,
    default_device: Device,
    clock: u64,
}

impl PageMap {
    pub fn new(fast_capacity: Option<u64>, default_device: Device) -> Self {
        PageMap {
            pages: HashMap::new(),
            fast_lru: BTreeMap::new(),
            fast_capacity,
            fast_used: 0,
            default_device,
            clock: 0,
        }
    }

    pub fn fast_capacity(&self) -> Option<u64> {
        self.fast_capacity
    }

    pub fn fast_used(&self) -> u64 {
        self.fast_used
    }

    /// Free fast pages; `None` when the fast device is unbounded.
    pub fn fast_free(&self) -> Option<u64> {
        self.fast_capacity.map(|c| c - self.fast_used)
    }

    pub fn device_of(&self, page: u64) -> Device {
        self.pages
            .get(&page)
            .map_or(self.default_device, |p| p.device)
    }

    pub fn info(&self, page: u64) -> Option<&PageInfo> {
        self.pages.get(&page)
    }

    fn entry(&mut self, page: u64) -> &mut PageInfo {
        let default_device = self.default_device;
        if !self.pages.contains_key(&page) && default_device == Device::Fast {
            self.fast_used += 1;
            self.clock += 1;
            self.fast_lru.insert(self.clock, page);
            self.pages.insert(
                page,
                PageInfo {
                    device: Device::Fast,
                    access_count: 0,
                    last_access_us: None,
                    stamp: self.clock,
                },
            );
        }
        self.pages.entry(page).or_insert(PageInfo {
            device: default_device,
            access_count: 0,
            last_access_us: None,
            stamp: 0,
        })
    }

    /// Move `page` to `device`, keeping the fast occupancy count and LRU
    /// order consistent.
    pub fn set_device(&mut self, page: u64, device: Device) {
        self.clock += 1;
        let clock = self.clock;
        let info = self.entry(page);
        let (old, old_stamp) = (info.device, info.stamp);
        info.device = device;
        if device == Device::Fast {
            info.stamp = clock;
        }
        match (old, device) {
            (Device::Fast, Device::Fast) => {
                self.fast_lru.remove(&old_stamp);
                self.fast_lru.insert(clock, page);
            }
            (Device::Slow, Device::Fast) => {
                self.fast_used += 1;
                self.fast_lru.insert(clock, page);
            }
            (Device::Fast, Device::Slow) => {
                self.fast_used -= 1;
                self.fast_lru.remove(&old_stamp);
            }
            (Device::Slow, Device::Slow) => {}
        }
    }

    /// Record an access at `now_us` (after placement).
    pub fn record_access(&mut self, page: u64, now_us: u64) {
        let info = self.entry(page);
        info.access_count += 1;
        info.last_access_us = Some(now_us);
        if info.device == Device::Fast {
            self.set_device(page, Device::Fast);
        }
    }

    /// Least-recently-accessed fast pages, oldest first, skipping `exclude`.
    pub fn lru_fast(&self, count: u64, exclude: &[u64]) -> Vec<u64> {
        self.fast_lru
            .values()
            .copied()
            .filter(|p| !exclude.contains(p))
            .take(count as usize)
            .collect()
    }

    pub fn fast_pages(&self) -> impl Iterator<Item = u64> + '_ {
        self.fast_lru.values().copied()
    }

    /// Consistency check used by tests: occupancy equals the number of
    /// pages mapped fast and stays within capacity.
    pub fn check(&self) -> bool {
        let mapped = self
            .pages
            .values()
            .filter(|p| p.device == Device::Fast)
            .count() as u64;
        mapped == self.fast_used
            && self.fast_lru.len() as u64 == self.fast_used
            && self.fast_capacity.is_none_or(|c| self.fast_used <= c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unseen_pages_use_default() {
        let m = PageMap::new(Some(4), Device::Slow);
        assert_eq!(m.device_of(9), Device::Slow);
        assert_eq!(m.fast_free(), Some(4));
    }

    #[test]
    fn moves_track_occupancy() {
        let mut m = PageMap::new(Some(4), Device::Slow);
        m.set_device(1, Device::Fast);
        m.set_device(2, Device::Fast);
        assert_eq!(m.fast_free(), Some(2));
        m.set_device(1, Device::Slow);
        assert_eq!(m.fast_free(), Some(3));
        assert!(m.check());
    }

    #[test]
    fn lru_order_follows_accesses() {
        let mut m = PageMap::new(Some(4), Device::Slow);
        for p in [1, 2, 3] {
            m.set_device(p, Device::Fast);
        }
        m.record_access(1, 10);
        assert_eq!(m.lru_fast(2, &[]), vec![2, 3]);
        assert_eq!(m.lru_fast(2, &[2]), vec![3, 1]);
    }
}
