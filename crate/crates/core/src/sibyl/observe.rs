//! Quantized request observation.
//!
//! | field | bins | encoded bits | binning |
//! |-------|------|--------------|---------|
//! | size  | 8    | 8            | `min(7, (pages - 1) / 8)` |
//! | kind  | 2    | 4            | read 0, write 1 |
//! | intr  | 64   | 8            | `log_bin(now - last)`, first access 63 |
//! | cnt   | 64   | 8            | `log_bin(previous accesses)` |
//! | cap   | 8    | 8            | `min(7, floor(8 * free / capacity))`, unbounded 7 |
//! | curr  | 2    | 4            | fast 0, slow 1 |
//!
//! `log_bin(0) = 0`; otherwise with `m` the index of the highest set bit and
//! `h` the bit just below it, `log_bin(x) = min(62, 1 + 2m + h)`: two bins
//! per power of two.

use serde::{Deserialize, Serialize};

use super::pagemap::PageMap;
use crate::trace::{RequestKind, StorageRequest};

pub const SIZE_BINS: u8 = 8;
pub const KIND_BINS: u8 = 2;
pub const INTR_BINS: u8 = 64;
pub const CNT_BINS: u8 = 64;
pub const CAP_BINS: u8 = 8;
pub const CURR_BINS: u8 = 2;

const WIDTHS: [u32; 6] = [8, 4, 8, 8, 8, 4];

pub fn log_bin(x: u64) -> u8 {
    if x == 0 {
        return 0;
    }
    let m = 63 - x.leading_zeros();
    let h = if m == 0 { 0 } else { (x >> (m - 1)) & 1 };
    (1 + 2 * m as u64 + h).min(62) as u8
}

pub fn size_bin(pages: u32) -> u8 {
    ((pages.max(1) - 1) / 8).min(7) as u8
}

pub fn cap_bin(free: Option<u64>, capacity: Option<u64>) -> u8 {
    match (free, capacity) {
        (Some(f), Some(c)) if c > 0 => ((8 * f) / c).min(7) as u8,
        (Some(_), Some(_)) => 0,
        _ => CAP_BINS - 1,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Observation {
    pub size: u8,
    pub kind: u8,
    pub intr: u8,
    pub cnt: u8,
    pub cap: u8,
    pub curr: u8,
}

impl Observation {
    fn fields(&self) -> [u8; 6] {
        [
            self.size, self.kind, self.intr, self.cnt, self.cap, self.curr,
        ]
    }

    /// Pack into 40 bits, `size` in the most significant field.
    pub fn encode(&self) -> u64 {
        self.fields()
            .iter()
            .zip(WIDTHS)
            .fold(0u64, |acc, (v, w)| (acc << w) | *v as u64)
    }

    pub fn decode(code: u64) -> Observation {
        let mut out = [0u8; 6];
        let mut rest = code;
        for i in (0..6).rev() {
            out[i] = (rest & ((1 << WIDTHS[i]) - 1)) as u8;
            rest >>= WIDTHS[i];
        }
        Observation {
            size: out[0],
            kind: out[1],
            intr: out[2],
            cnt: out[3],
            cap: out[4],
            curr: out[5],
        }
    }

    /// Each field scaled to `[0, 1]` by its bin count.
    pub fn normalized(&self) -> [f64; 6] {
        let bins = [
            SIZE_BINS, KIND_BINS, INTR_BINS, CNT_BINS, CAP_BINS, CURR_BINS,
        ];
        let f = self.fields();
        std::array::from_fn(|i| f[i] as f64 / (bins[i] - 1) as f64)
    }

    pub fn in_range(&self) -> bool {
        self.size < SIZE_BINS
            && self.kind < KIND_BINS
            && self.intr < INTR_BINS
            && self.cnt < CNT_BINS
            && self.cap < CAP_BINS
            && self.curr < CURR_BINS
    }
}

/// Observation for `req` arriving at its timestamp, keyed on its first page.
pub fn observe(map: &PageMap, req: &StorageRequest) -> Observation {
    let info = map.info(req.page_id);
    let intr = match info.and_then(|i| i.last_access_us) {
        Some(last) => log_bin(req.timestamp.saturating_sub(last)),
        None => INTR_BINS - 1,
    };
    let cnt = log_bin(info.map_or(0, |i| i.access_count)).min(CNT_BINS - 1);
    Observation {
        size: size_bin(req.size_pages),
        kind: match req.kind {
            RequestKind::Read => 0,
            RequestKind::Write => 1,
        },
        intr,
        cnt,
        cap: cap_bin(map.fast_free(), map.fast_capacity()),
        curr: map.device_of(req.page_id).index() as u8,
    }
}
