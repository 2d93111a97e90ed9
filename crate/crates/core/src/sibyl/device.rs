use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::trace::RequestKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Device {
    Fast,
    Slow,
}

impl Device {
    /// Action index: fast is 0, slow is 1.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Device {
        if i == 0 {
            Device::Fast
        } else {
            Device::Slow
        }
    }
}

/// Affine cost `fixed + per_page * pages` in microseconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Affine {
    pub fixed_us: f64,
    pub per_page_us: f64,
}

impl Affine {
    pub fn cost(&self, pages: u64) -> f64 {
        self.fixed_us + self.per_page_us * pages as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub read: Affine,
    pub write: Affine,
    /// Page capacity; `None` is unbounded.
    pub capacity_pages: Option<u64>,
}

impl DeviceConfig {
    pub fn default_fast() -> Self {
        DeviceConfig {
            read: Affine {
                fixed_us: 82.0,
                per_page_us: 2.0,
            },
            write: Affine {
                fixed_us: 90.0,
                per_page_us: 2.4,
            },
            capacity_pages: Some(4096),
        }
    }

    pub fn default_slow() -> Self {
        DeviceConfig {
            read: Affine {
                fixed_us: 900.0,
                per_page_us: 12.0,
            },
            write: Affine {
                fixed_us: 1000.0,
                per_page_us: 14.0,
            },
            capacity_pages: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for a in [self.read, self.write] {
            if !(a.fixed_us.is_finite() && a.per_page_us.is_finite())
                || a.fixed_us < 0.0
                || a.per_page_us < 0.0
                || a.cost(1) <= 0.0
            {
                return Err(config_err("device latencies must be finite and positive"));
            }
        }
        Ok(())
    }
}

/// One device with a single FIFO service queue.
#[derive(Clone, Debug)]
pub struct DeviceModel {
    pub config: DeviceConfig,
    busy_until: f64,
}

impl DeviceModel {
    pub fn new(config: DeviceConfig) -> Self {
        DeviceModel {
            config,
            busy_until: 0.0,
        }
    }

    pub fn busy_until(&self) -> f64 {
        self.busy_until
    }

    pub fn cost(&self, kind: RequestKind, pages: u64) -> f64 {
        match kind {
            RequestKind::Read => self.config.read.cost(pages),
            RequestKind::Write => self.config.write.cost(pages),
        }
    }

    /// Serve an operation arriving at `at`; returns its finish time.
    pub fn serve(&mut self, at: f64, kind: RequestKind, pages: u64) -> f64 {
        let start = at.max(self.busy_until);
        self.busy_until = start + self.cost(kind, pages);
        self.busy_until
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idle_single_page_read() {
        let mut d = DeviceModel::new(DeviceConfig {
            read: Affine {
                fixed_us: 80.0,
                per_page_us: 2.0,
            },
            ..DeviceConfig::default_fast()
        });
        assert_eq!(d.serve(0.0, RequestKind::Read, 1), 82.0);
    }

    #[test]
    fn back_to_back_requests_queue() {
        let mut d = DeviceModel::new(DeviceConfig::default_fast());
        let first = d.serve(0.0, RequestKind::Read, 1);
        let second = d.serve(0.0, RequestKind::Read, 1);
        assert_eq!(second, 2.0 * first);
    }

    #[test]
    fn slow_is_slower() {
        let f = DeviceModel::new(DeviceConfig::default_fast());
        let s = DeviceModel::new(DeviceConfig::default_slow());
        for kind in [RequestKind::Read, RequestKind::Write] {
            for pages in [1, 8, 64] {
                assert!(s.cost(kind, pages) > f.cost(kind, pages));
            }
        }
        assert!(s.config.read.per_page_us > f.config.read.per_page_us);
        assert!(s.config.write.per_page_us > f.config.write.per_page_us);
    }
}
