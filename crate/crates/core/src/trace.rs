//! Trace events, seeded synthetic generators and the text trace format.
//!
//! A trace file is plain text: a one-line schema header (`memaccess,v1` or
//! `storagereq,v1`) followed by one comma-separated event per line.
//!
//! ```text
//! memaccess,v1
//! 0x400000,0x10000000,0,load
//! 0x400000,0x100001c0,40,load
//! ```
//!
//! ```text
//! storagereq,v1
//! 17,1,read,0
//! 4242,8,write,1500
//! ```
//!
//! Addresses are lower-case hexadecimal with a `0x` prefix; page numbers,
//! sizes, cycles and timestamps are decimal.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::rng::SimRng;

pub const CACHELINE_BYTES: u64 = 64;
pub const PAGE_BYTES: u64 = 4096;
pub const LINES_PER_PAGE: u64 = PAGE_BYTES / CACHELINE_BYTES;

#[inline]
pub fn cacheline(vaddr: u64) -> u64 {
    vaddr / CACHELINE_BYTES
}

#[inline]
pub fn page(vaddr: u64) -> u64 {
    vaddr / PAGE_BYTES
}

/// Page number of a cacheline address.
#[inline]
pub fn line_page(line: u64) -> u64 {
    line / LINES_PER_PAGE
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessKind {
    Load,
    Store,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MemoryAccess {
    pub pc: u64,
    pub vaddr: u64,
    pub cycle: u64,
    pub kind: AccessKind,
}

impl MemoryAccess {
    pub fn load(pc: u64, vaddr: u64, cycle: u64) -> Self {
        MemoryAccess {
            pc,
            vaddr,
            cycle,
            kind: AccessKind::Load,
        }
    }

    #[inline]
    pub fn line(&self) -> u64 {
        cacheline(self.vaddr)
    }

    #[inline]
    pub fn page(&self) -> u64 {
        page(self.vaddr)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    Read,
    Write,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StorageRequest {
    pub page_id: u64,
    pub size_pages: u32,
    pub kind: RequestKind,
    pub timestamp: u64,
}

impl StorageRequest {
    pub fn pages(&self) -> impl Iterator<Item = u64> {
        self.page_id..self.page_id + self.size_pages as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Stride,
    MixedPcStride,
    Random,
    HotCold,
    SequentialBurst,
}

/// Parameters of a synthetic trace. Fields not used by the selected
/// generator are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSpec {
    pub generator: GeneratorKind,
    pub length: usize,
    pub seed: u64,
    /// Cacheline stride for `stride`; fallback stream stride for `mixed_pc_stride`.
    #[serde(default = "defaults::stride")]
    pub stride: i64,
    /// Per-stream strides for `mixed_pc_stride`, assigned round-robin to PCs.
    #[serde(default)]
    pub strides: Vec<i64>,
    /// Number of PC streams for `mixed_pc_stride`.
    #[serde(default = "defaults::pc_pool")]
    pub pc_pool: usize,
    #[serde(default = "defaults::base")]
    pub base: u64,
    #[serde(default = "defaults::pc")]
    pub pc: u64,
    /// Cachelines (memory) or pages (storage) addressable by random draws.
    #[serde(default = "defaults::footprint")]
    pub footprint: u64,
    #[serde(default = "defaults::hot_set")]
    pub hot_set: u64,
    #[serde(default = "defaults::hot_fraction")]
    pub hot_fraction: f64,
    /// Fraction of events replaced by uniformly random accesses.
    #[serde(default)]
    pub noise: f64,
    #[serde(default = "defaults::size_pages")]
    pub size_pages: u32,
    #[serde(default = "defaults::burst_len")]
    pub burst_len: u32,
    #[serde(default = "defaults::write_fraction")]
    pub write_fraction: f64,
    #[serde(default)]
    pub store_fraction: f64,
    #[serde(default = "defaults::cycle_step")]
    pub cycle_step: u64,
    #[serde(default = "defaults::interarrival_us")]
    pub interarrival_us: u64,
}

mod defaults {
    pub fn stride() -> i64 {
        1
    }
    pub fn pc_pool() -> usize {
        4
    }
    pub fn base() -> u64 {
        0x1000_0000
    }
    pub fn pc() -> u64 {
        0x40_0000
    }
    pub fn footprint() -> u64 {
        1 << 16
    }
    pub fn hot_set() -> u64 {
        1024
    }
    pub fn hot_fraction() -> f64 {
        0.9
    }
    pub fn size_pages() -> u32 {
        1
    }
    pub fn burst_len() -> u32 {
        16
    }
    pub fn write_fraction() -> f64 {
        0.3
    }
    pub fn cycle_step() -> u64 {
        40
    }
    pub fn interarrival_us() -> u64 {
        1500
    }
}

impl TraceSpec {
    pub fn new(generator: GeneratorKind, length: usize, seed: u64) -> Self {
        TraceSpec {
            generator,
            length,
            seed,
            stride: defaults::stride(),
            strides: Vec::new(),
            pc_pool: defaults::pc_pool(),
            base: defaults::base(),
            pc: defaults::pc(),
            footprint: defaults::footprint(),
            hot_set: defaults::hot_set(),
            hot_fraction: defaults::hot_fraction(),
            noise: 0.0,
            size_pages: defaults::size_pages(),
            burst_len: defaults::burst_len(),
            write_fraction: defaults::write_fraction(),
            store_fraction: 0.0,
            cycle_step: defaults::cycle_step(),
            interarrival_us: defaults::interarrival_us(),
        }
    }

    pub fn is_storage(&self) -> bool {
        matches!(
            self.generator,
            GeneratorKind::HotCold | GeneratorKind::SequentialBurst
        )
    }

    fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(config_err("trace length must be positive"));
        }
        for (name, v) in [
            ("noise", self.noise),
            ("hot_fraction", self.hot_fraction),
            ("write_fraction", self.write_fraction),
            ("store_fraction", self.store_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(config_err(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.footprint == 0 {
            return Err(config_err("footprint must be positive"));
        }
        Ok(())
    }
}

/// Generate a cache-level trace from a `stride`, `mixed_pc_stride` or
/// `random` spec.
pub fn generate_memory_trace(spec: &TraceSpec) -> Result<Vec<MemoryAccess>> {
    spec.validate()?;
    let mut rng = SimRng::new(spec.seed);
    let mut out = Vec::with_capacity(spec.length);

    // Each mixed stream lives in its own 4 GiB region, starting mid-region so
    // negative strides do not wrap.
    const REGION: u64 = 1 << 32;
    const NOISE_REGION: u64 = 1 << 44;

    let streams: Vec<(u64, i64)> = match spec.generator {
        GeneratorKind::Stride => {
            if spec.stride == 0 {
                return Err(config_err("stride generator requires a non-zero stride"));
            }
            vec![(spec.pc, spec.stride)]
        }
        GeneratorKind::MixedPcStride => {
            if spec.pc_pool == 0 {
                return Err(config_err("pc_pool must be positive"));
            }
            (0..spec.pc_pool)
                .map(|i| {
                    let stride = if spec.strides.is_empty() {
                        spec.stride
                    } else {
                        spec.strides[i % spec.strides.len()]
                    };
                    (spec.pc + 0x40 * i as u64, stride)
                })
                .collect()
        }
        GeneratorKind::Random => vec![(spec.pc, 0)],
        other => {
            return Err(config_err(format!(
                "{other:?} is a storage generator, not a memory generator"
            )))
        }
    };
    let mut positions = vec![0i64; streams.len()];

    for i in 0..spec.length {
        let cycle = i as u64 * spec.cycle_step;
        let noisy = spec.noise > 0.0 && rng.chance(spec.noise);
        let (pc, vaddr) = match spec.generator {
            GeneratorKind::Stride => {
                let (pc, stride) = streams[0];
                let v = spec
                    .base
                    .wrapping_add((positions[0] * stride * CACHELINE_BYTES as i64) as u64);
                positions[0] += 1;
                (pc, v)
            }
            GeneratorKind::MixedPcStride => {
                let s = rng.below(streams.len() as u64) as usize;
                let (pc, stride) = streams[s];
                let region = spec.base.wrapping_add(s as u64 * REGION) + REGION / 2;
                let v =
                    region.wrapping_add((positions[s] * stride * CACHELINE_BYTES as i64) as u64);
                positions[s] += 1;
                (pc, v)
            }
            _ => {
                let line = rng.below(spec.footprint);
                (spec.pc, spec.base + line * CACHELINE_BYTES)
            }
        };
        let vaddr = if noisy {
            spec.base.wrapping_add(NOISE_REGION) + rng.below(spec.footprint) * CACHELINE_BYTES
        } else {
            vaddr
        };
        let kind = if spec.store_fraction > 0.0 && rng.chance(spec.store_fraction) {
            AccessKind::Store
        } else {
            AccessKind::Load
        };
        out.push(MemoryAccess {
            pc,
            vaddr,
            cycle,
            kind,
        });
    }
    Ok(out)
}

/// Generate a storage-level trace from a `hot_cold`, `sequential_burst` or
/// `random` spec.
pub fn generate_storage_trace(spec: &TraceSpec) -> Result<Vec<StorageRequest>> {
    spec.validate()?;
    if spec.size_pages == 0 {
        return Err(config_err("size_pages must be at least 1"));
    }
    if spec.hot_set > spec.footprint {
        return Err(config_err(format!(
            "hot set ({}) exceeds footprint ({})",
            spec.hot_set, spec.footprint
        )));
    }
    let mut rng = SimRng::new(spec.seed);
    let mut out = Vec::with_capacity(spec.length);
    let mut burst_next = 0u64;
    let mut burst_left = 0u32;

    for i in 0..spec.length {
        let timestamp = i as u64 * spec.interarrival_us;
        let noisy = spec.noise > 0.0 && rng.chance(spec.noise);
        let page_id = match spec.generator {
            GeneratorKind::HotCold => {
                if spec.hot_set == 0 {
                    return Err(config_err("hot_cold requires a non-empty hot set"));
                }
                let cold = spec.footprint - spec.hot_set;
                if rng.chance(spec.hot_fraction) || cold == 0 {
                    rng.below(spec.hot_set)
                } else {
                    spec.hot_set + rng.below(cold)
                }
            }
            GeneratorKind::SequentialBurst => {
                if burst_left == 0 {
                    burst_next = rng.below(spec.footprint);
                    burst_left = spec.burst_len.max(1);
                }
                let p = burst_next;
                burst_next = (burst_next + spec.size_pages as u64) % spec.footprint;
                burst_left -= 1;
                p
            }
            GeneratorKind::Random => rng.below(spec.footprint),
            other => {
                return Err(config_err(format!(
                    "{other:?} is a memory generator, not a storage generator"
                )))
            }
        };
        let page_id = if noisy {
            rng.below(spec.footprint)
        } else {
            page_id
        };
        let kind = if rng.chance(spec.write_fraction) {
            RequestKind::Write
        } else {
            RequestKind::Read
        };
        out.push(StorageRequest {
            page_id,
            size_pages: spec.size_pages,
            kind,
            timestamp,
        });
    }
    Ok(out)
}

/// Either kind of trace, as produced by [`generate`] or [`read_any_trace`].
#[derive(Clone, Debug, PartialEq)]
pub enum Trace {
    Memory(Vec<MemoryAccess>),
    Storage(Vec<StorageRequest>),
}

impl Trace {
    pub fn len(&self) -> usize {
        match self {
            Trace::Memory(v) => v.len(),
            Trace::Storage(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Generate the trace kind implied by the generator (`random` is a memory
/// generator here; use [`generate_storage_trace`] for random storage traces).
pub fn generate(spec: &TraceSpec) -> Result<Trace> {
    if spec.is_storage() {
        generate_storage_trace(spec).map(Trace::Storage)
    } else {
        generate_memory_trace(spec).map(Trace::Memory)
    }
}

/// One serializable trace event.
pub trait TraceRecord: Sized {
    const SCHEMA: &'static str;
    const FIELDS: usize;

    fn time(&self) -> u64;
    fn format_record(&self, out: &mut String);
    fn parse_record(fields: &[&str]) -> std::result::Result<Self, String>;
}

fn parse_hex(s: &str) -> std::result::Result<u64, String> {
    let digits = s
        .strip_prefix("0x")
        .ok_or_else(|| format!("expected 0x-prefixed hex, got `{s}`"))?;
    u64::from_str_radix(digits, 16).map_err(|e| format!("bad hex `{s}`: {e}"))
}

fn parse_dec<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| format!("bad number `{s}`: {e}"))
}

impl TraceRecord for MemoryAccess {
    const SCHEMA: &'static str = "memaccess,v1";
    const FIELDS: usize = 4;

    fn time(&self) -> u64 {
        self.cycle
    }

    fn format_record(&self, out: &mut String) {
        let kind = match self.kind {
            AccessKind::Load => "load",
            AccessKind::Store => "store",
        };
        let _ = write!(
            out,
            "{:#x},{:#x},{},{}",
            self.pc, self.vaddr, self.cycle, kind
        );
    }

    fn parse_record(f: &[&str]) -> std::result::Result<Self, String> {
        let kind = match f[3] {
            "load" => AccessKind::Load,
            "store" => AccessKind::Store,
            other => return Err(format!("unknown access kind `{other}`")),
        };
        Ok(MemoryAccess {
            pc: parse_hex(f[0])?,
            vaddr: parse_hex(f[1])?,
            cycle: parse_dec(f[2])?,
            kind,
        })
    }
}

impl TraceRecord for StorageRequest {
    const SCHEMA: &'static str = "storagereq,v1";
    const FIELDS: usize = 4;

    fn time(&self) -> u64 {
        self.timestamp
    }

    fn format_record(&self, out: &mut String) {
        let kind = match self.kind {
            RequestKind::Read => "read",
            RequestKind::Write => "write",
        };
        let _ = write!(
            out,
            "{},{},{},{}",
            self.page_id, self.size_pages, kind, self.timestamp
        );
    }

    fn parse_record(f: &[&str]) -> std::result::Result<Self, String> {
        let kind = match f[2] {
            "read" => RequestKind::Read,
            "write" => RequestKind::Write,
            other => return Err(format!("unknown request kind `{other}`")),
        };
        let size_pages: u32 = parse_dec(f[1])?;
        if size_pages == 0 {
            return Err("size_pages must be at least 1".into());
        }
        Ok(StorageRequest {
            page_id: parse_dec(f[0])?,
            size_pages,
            kind,
            timestamp: parse_dec(f[3])?,
        })
    }
}

pub fn write_trace<E: TraceRecord, W: Write>(events: &[E], mut out: W) -> Result<()> {
    let mut buf = String::with_capacity(32 * (events.len() + 1));
    buf.push_str(E::SCHEMA);
    buf.push('\n');
    for e in events {
        e.format_record(&mut buf);
        buf.push('\n');
    }
    out.write_all(buf.as_bytes())?;
    out.flush()?;
    Ok(())
}

pub fn read_trace<E: TraceRecord, R: BufRead>(input: R) -> Result<Vec<E>> {
    let mut out = Vec::new();
    let mut seen_header = false;
    let mut previous: Option<u64> = None;
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if !seen_header {
            if line != E::SCHEMA {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected header `{}`, got `{line}`", E::SCHEMA),
                });
            }
            seen_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != E::FIELDS {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {} fields, found {}", E::FIELDS, fields.len()),
            });
        }
        let event = E::parse_record(&fields).map_err(|msg| Error::Parse { line: line_no, msg })?;
        if let Some(prev) = previous {
            if event.time() < prev {
                return Err(Error::TimestampRegression {
                    line: line_no,
                    previous: prev,
                    found: event.time(),
                });
            }
        }
        previous = Some(event.time());
        out.push(event);
    }
    Ok(out)
}

pub fn save_trace<E: TraceRecord>(events: &[E], path: impl AsRef<Path>) -> Result<()> {
    let file = fs::File::create(path)?;
    write_trace(events, std::io::BufWriter::new(file))
}

pub fn load_trace<E: TraceRecord>(path: impl AsRef<Path>) -> Result<Vec<E>> {
    let file = fs::File::open(path)?;
    read_trace(BufReader::new(file))
}

pub fn save_any_trace(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    match trace {
        Trace::Memory(v) => save_trace(v, path),
        Trace::Storage(v) => save_trace(v, path),
    }
}

/// Read a trace of either kind, dispatching on the header. An empty file
/// yields an empty memory trace.
pub fn read_any_trace(path: impl AsRef<Path>) -> Result<Trace> {
    let text = fs::read_to_string(path)?;
    let header = text.lines().map(str::trim).find(|l| !l.is_empty());
    match header {
        Some(h) if h == StorageRequest::SCHEMA => read_trace(text.as_bytes()).map(Trace::Storage),
        _ => read_trace(text.as_bytes()).map(Trace::Memory),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mem(spec: &TraceSpec) -> Vec<MemoryAccess> {
        generate_memory_trace(spec).unwrap()
    }

    #[test]
    fn geometry_constants() {
        assert_eq!(LINES_PER_PAGE, 64);
        assert_eq!(cacheline(4096 + 65), 65);
        assert_eq!(page(8191), 1);
    }

    #[test]
    fn stride_four_from_zero() {
        let mut spec = TraceSpec::new(GeneratorKind::Stride, 3, 0);
        spec.stride = 4;
        spec.base = 0;
        let lines: Vec<u64> = mem(&spec).iter().map(|a| a.line()).collect();
        assert_eq!(lines, vec![0, 4, 8]);
    }

    #[test]
    fn unit_stride_has_unit_deltas() {
        let mut spec = TraceSpec::new(GeneratorKind::Stride, 500, 0);
        spec.stride = 1;
        let t = mem(&spec);
        assert!(t.windows(2).all(|w| w[1].line() - w[0].line() == 1));
        assert!(t.windows(2).all(|w| w[1].cycle >= w[0].cycle));
    }

    #[test]
    fn zero_stride_rejected() {
        let mut spec = TraceSpec::new(GeneratorKind::Stride, 3, 0);
        spec.stride = 0;
        assert!(matches!(
            generate_memory_trace(&spec),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn noise_out_of_range_rejected() {
        let mut spec = TraceSpec::new(GeneratorKind::Stride, 3, 0);
        spec.noise = 1.5;
        assert!(generate_memory_trace(&spec).is_err());
        spec.noise = -0.1;
        assert!(generate_memory_trace(&spec).is_err());
    }

    #[test]
    fn zero_length_rejected() {
        let spec = TraceSpec::new(GeneratorKind::Random, 0, 0);
        assert!(generate_memory_trace(&spec).is_err());
    }

    #[test]
    fn mixed_streams_keep_their_strides() {
        let mut spec = TraceSpec::new(GeneratorKind::MixedPcStride, 4000, 11);
        spec.pc_pool = 3;
        spec.strides = vec![1, -2, 5];
        let t = mem(&spec);
        for (i, stride) in [1i64, -2, 5].iter().enumerate() {
            let pc = spec.pc + 0x40 * i as u64;
            let lines: Vec<u64> = t.iter().filter(|a| a.pc == pc).map(|a| a.line()).collect();
            assert!(lines.len() > 1000);
            assert!(lines
                .windows(2)
                .all(|w| w[1] as i64 - w[0] as i64 == *stride));
        }
    }

    #[test]
    fn hot_cold_all_hot() {
        let mut spec = TraceSpec::new(GeneratorKind::HotCold, 2000, 5);
        spec.hot_fraction = 1.0;
        spec.hot_set = 10;
        spec.footprint = 1000;
        let t = generate_storage_trace(&spec).unwrap();
        assert!(t.iter().all(|r| r.page_id < 10));
    }

    #[test]
    fn hot_cold_fraction_binomial_band() {
        let mut spec = TraceSpec::new(GeneratorKind::HotCold, 10_000, 3);
        spec.hot_fraction = 0.9;
        spec.hot_set = 100;
        spec.footprint = 10_000;
        let t = generate_storage_trace(&spec).unwrap();
        let hot = t.iter().filter(|r| r.page_id < 100).count();
        // mean 9000, sd 30; the band is roughly +-6.7 sd
        assert!((8800..=9200).contains(&hot), "hot = {hot}");
    }

    #[test]
    fn hot_set_larger_than_footprint_rejected() {
        let mut spec = TraceSpec::new(GeneratorKind::HotCold, 10, 3);
        spec.hot_set = 20;
        spec.footprint = 10;
        assert!(generate_storage_trace(&spec).is_err());
    }

    #[test]
    fn sequential_burst_sizes() {
        let mut spec = TraceSpec::new(GeneratorKind::SequentialBurst, 300, 3);
        spec.size_pages = 8;
        spec.footprint = 100_000;
        let t = generate_storage_trace(&spec).unwrap();
        assert!(t.iter().all(|r| r.size_pages == 8));
        assert_eq!(t[1].page_id, t[0].page_id + 8);
    }

    #[test]
    fn wrong_trace_kind_rejected() {
        let spec = TraceSpec::new(GeneratorKind::HotCold, 10, 0);
        assert!(generate_memory_trace(&spec).is_err());
        let spec = TraceSpec::new(GeneratorKind::Stride, 10, 0);
        assert!(generate_storage_trace(&spec).is_err());
    }

    #[test]
    fn empty_input_is_empty_trace() {
        let t: Vec<MemoryAccess> = read_trace("".as_bytes()).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn short_line_reports_line_number() {
        let text = "memaccess,v1\n0x1,0x40,0,load\n0x1,0x80,4\n";
        match read_trace::<MemoryAccess, _>(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn timestamp_regression_rejected() {
        let text = "storagereq,v1\n1,1,read,10\n2,1,write,5\n";
        assert!(matches!(
            read_trace::<StorageRequest, _>(text.as_bytes()),
            Err(Error::TimestampRegression { line: 3, .. })
        ));
    }

    #[test]
    fn wrong_header_rejected() {
        let text = "storagereq,v1\n1,1,read,10\n";
        assert!(read_trace::<MemoryAccess, _>(text.as_bytes()).is_err());
    }

    #[test]
    fn record_format_is_stable() {
        let mut s = String::new();
        MemoryAccess::load(0x400000, 0x1000_01c0, 40).format_record(&mut s);
        assert_eq!(s, "0x400000,0x100001c0,40,load");
    }
}
