//! Experiment driver: builds the trace and policies named by a config, runs
//! every policy (at every DRAM rate for memory experiments) and collects the
//! results into a [`MetricsReport`].

pub mod config;
pub mod report;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{config_err, Result};
use crate::hermes::{predictor_metrics, Popet, RandomPredictor, TtpPredictor};
use crate::mem_sim::{
    run, NextLinePrefetcher, OffChipPredictor, Prefetcher, RunOptions, RunResult, StridePrefetcher,
};
use crate::pythia::Pythia;
use crate::sibyl::{
    run_hss, FastOnly, HssRun, Oracle, PlacementPolicy, RecencyHeuristic, SibylAgent, SibylPolicy,
    SlowOnly,
};
use crate::trace::{generate, read_any_trace, MemoryAccess, StorageRequest, Trace};

pub use config::{ExperimentConfig, ExperimentKind, OffchipOptions, CONFIG_VERSION};
pub use report::{
    compare, emit, render, Cell, CompareRow, CompareTable, Format, MetricsReport, ReportMeta,
    ReportRow,
};

/// Hex SHA-256 of the config's canonical JSON form. The output location is
/// not part of the experiment and is left out.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let mut c = cfg.clone();
    c.output = None;
    let value = serde_json::to_value(&c)?;
    let bytes = serde_json::to_vec(&value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn load_experiment_trace(cfg: &ExperimentConfig) -> Result<Trace> {
    let trace = match (&cfg.trace, &cfg.trace_file) {
        (Some(spec), _) => generate(spec)?,
        (None, Some(path)) => read_any_trace(path)?,
        (None, None) => return Err(config_err("a trace or trace_file is required")),
    };
    match (&trace, cfg.kind) {
        (Trace::Storage(_), ExperimentKind::Hss) => Ok(trace),
        (Trace::Memory(_), ExperimentKind::Prefetch | ExperimentKind::Offchip) => Ok(trace),
        // an empty file carries no header to tell the kinds apart
        (Trace::Memory(v), ExperimentKind::Hss) if v.is_empty() => Ok(Trace::Storage(vec![])),
        _ => Err(config_err(format!(
            "trace kind does not fit a {} experiment",
            cfg.kind.as_str()
        ))),
    }
}

/// Run the experiment described by `cfg`. Independent runs execute in
/// parallel; rows keep matrix order (DRAM rate major, then policy order).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    cfg.validate()?;
    let trace = load_experiment_trace(cfg)?;
    log::info!(
        "{} experiment: {} events, {} policies",
        cfg.kind.as_str(),
        trace.len(),
        cfg.policies.len()
    );
    let rows = match &trace {
        Trace::Memory(t) => memory_rows(cfg, t)?,
        Trace::Storage(t) => hss_rows(cfg, t)?,
    };
    Ok(MetricsReport {
        meta: ReportMeta {
            config_hash: config_hash(cfg)?,
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            kind: cfg.kind.as_str().to_string(),
            trace_events: trace.len(),
        },
        rows,
    })
}

fn memory_rows(cfg: &ExperimentConfig, trace: &[MemoryAccess]) -> Result<Vec<ReportRow>> {
    let jobs: Vec<(u32, &String)> = cfg
        .mtps_values()
        .into_iter()
        .flat_map(|m| cfg.policies.iter().map(move |p| (m, p)))
        .collect();
    jobs.par_iter()
        .map(|(mtps, policy)| {
            log::debug!("running {policy} at {mtps} MT/s");
            match cfg.kind {
                ExperimentKind::Prefetch => prefetch_row(cfg, trace, policy, *mtps),
                _ => offchip_row(cfg, trace, policy, *mtps),
            }
        })
        .collect()
}

fn run_options(cfg: &ExperimentConfig, hermes: bool) -> RunOptions {
    RunOptions {
        warmup: cfg.warmup,
        hermes,
        hermes_issue_latency: cfg.offchip.issue_latency,
        record_outcomes: false,
    }
}

/// Runs the memory simulation with the named prefetcher. Pythia's action
/// counts come back as a histogram keyed by offset.
fn simulate(
    cfg: &ExperimentConfig,
    trace: &[MemoryAccess],
    prefetcher: &str,
    mtps: u32,
    predictor: Option<&mut dyn OffChipPredictor>,
    hermes: bool,
) -> Result<(RunResult, Vec<(String, u64)>, Option<f64>)> {
    let mut mem = cfg.mem.clone();
    mem.dram.mtps = mtps;
    let opts = run_options(cfg, hermes);
    let mut pythia: Option<Pythia> = None;
    let mut next_line = NextLinePrefetcher;
    let mut stride = StridePrefetcher::new();
    let p: Option<&mut dyn Prefetcher> = match prefetcher {
        "none" => None,
        "next_line" => Some(&mut next_line),
        "stride" => Some(&mut stride),
        "pythia" => {
            let mut pc = cfg.pythia.clone();
            pc.seed = cfg.seed;
            pythia = Some(Pythia::new(pc)?);
            pythia.as_mut().map(|p| p as &mut dyn Prefetcher)
        }
        other => return Err(crate::error::Error::UnknownPolicy(other.to_string())),
    };
    let predictor = predictor.map(|q| q as &mut dyn OffChipPredictor);
    let result = run(&mem, trace, p, predictor, opts);
    let mut hist = vec![];
    let mut no_prefetch = None;
    if let Some(py) = &pythia {
        for (o, c) in py.offsets().iter().zip(&py.stats().action_counts) {
            hist.push((format!("offset_{o}"), *c));
        }
        no_prefetch = Some(py.no_prefetch_fraction());
    }
    Ok((result, hist, no_prefetch))
}

fn prefetch_row(
    cfg: &ExperimentConfig,
    trace: &[MemoryAccess],
    policy: &str,
    mtps: u32,
) -> Result<ReportRow> {
    let (res, hist, no_prefetch) = simulate(cfg, trace, policy, mtps, None, false)?;
    let m = &res.metrics;
    let mut row = ReportRow::new(policy, Some(mtps));
    for (k, v) in [
        ("coverage", m.coverage()),
        ("overprediction_rate", m.overprediction_rate()),
        ("mean_load_cycles", m.mean_load_cycles()),
        ("off_chip_fraction", m.off_chip_fraction()),
        ("prefetches_issued", m.prefetches_issued as f64),
        ("prefetch_useful", m.prefetch_useful as f64),
        ("prefetch_late", m.prefetch_late as f64),
        ("prefetch_unused", m.prefetch_unused as f64),
    ] {
        row.metrics.insert(k.to_string(), v);
    }
    if let Some(f) = no_prefetch {
        row.metrics.insert("no_prefetch_fraction".into(), f);
    }
    row.histogram.extend(hist);
    Ok(row)
}

fn offchip_row(
    cfg: &ExperimentConfig,
    trace: &[MemoryAccess],
    policy: &str,
    mtps: u32,
) -> Result<ReportRow> {
    let llc = cfg.mem.llc;
    let mut popet;
    let mut ttp;
    let mut random;
    let predictor: Option<&mut dyn OffChipPredictor> = match policy {
        "none" => None,
        "popet" => {
            popet = Popet::new(cfg.popet.clone())?;
            Some(&mut popet)
        }
        "ttp" => {
            let cap = cfg.offchip.ttp_capacity.unwrap_or(llc.sets * llc.ways);
            ttp = TtpPredictor::new(cap);
            Some(&mut ttp)
        }
        "random" => {
            random = RandomPredictor::new(cfg.offchip.random_probability, cfg.seed);
            Some(&mut random)
        }
        other => return Err(crate::error::Error::UnknownPolicy(other.to_string())),
    };
    let hermes = cfg.offchip.hermes && predictor.is_some();
    let (res, _, _) = simulate(cfg, trace, &cfg.offchip.prefetcher, mtps, predictor, hermes)?;
    let m = &res.metrics;
    let mut row = ReportRow::new(policy, Some(mtps));
    let pm = predictor_metrics(m);
    if policy != "none" {
        if !pm.accuracy_undefined {
            row.metrics.insert("offchip_accuracy".into(), pm.accuracy);
        }
        if !pm.coverage_undefined {
            row.metrics.insert("offchip_coverage".into(), pm.coverage);
        }
    }
    for (k, v) in [
        ("mean_load_cycles", m.mean_load_cycles()),
        ("off_chip_fraction", m.off_chip_fraction()),
        ("hermes_issued", m.hermes_issued as f64),
        ("hermes_consumed", m.hermes_consumed as f64),
    ] {
        row.metrics.insert(k.to_string(), v);
    }
    Ok(row)
}

fn hss_policy(
    cfg: &ExperimentConfig,
    name: &str,
    trace: &[StorageRequest],
) -> Result<Box<dyn PlacementPolicy>> {
    Ok(match name {
        "fast_only" => Box::new(FastOnly),
        "slow_only" => Box::new(SlowOnly),
        "oracle" => Box::new(Oracle::new(trace)),
        "recency" => Box::new(RecencyHeuristic),
        "sibyl" => {
            let mut sc = cfg.sibyl;
            sc.seed = cfg.seed;
            Box::new(SibylPolicy {
                agent: SibylAgent::new(sc)?,
            })
        }
        other => return Err(crate::error::Error::UnknownPolicy(other.to_string())),
    })
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let i = ((sorted.len() as f64 * q).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[i]
}

fn hss_rows(cfg: &ExperimentConfig, trace: &[StorageRequest]) -> Result<Vec<ReportRow>> {
    // the fast_only run doubles as the normalization reference
    let mut names: Vec<&str> = cfg.policies.iter().map(String::as_str).collect();
    let reference = match names.iter().position(|p| *p == "fast_only") {
        Some(i) => i,
        None => {
            names.push("fast_only");
            names.len() - 1
        }
    };
    let runs: Vec<HssRun> = names
        .par_iter()
        .map(|name| {
            log::debug!("running {name}");
            let mut p = hss_policy(cfg, name, trace)?;
            run_hss(&cfg.storage, trace, p.as_mut())
        })
        .collect::<Result<_>>()?;
    let fast_mean = runs[reference].metrics.mean_latency_us();
    let rows = cfg
        .policies
        .iter()
        .zip(&runs)
        .map(|(name, run)| {
            let m = &run.metrics;
            let mean = m.mean_latency_us();
            let normalized = if fast_mean == 0.0 {
                if mean == 0.0 {
                    1.0
                } else {
                    f64::INFINITY
                }
            } else {
                mean / fast_mean
            };
            let mut sorted = run.latencies.clone();
            sorted.sort_by(f64::total_cmp);
            let mut row = ReportRow::new(name, None);
            for (k, v) in [
                ("mean_request_latency_us", mean),
                ("normalized_latency_vs_fast_only", normalized),
                ("p99_request_latency_us", percentile(&sorted, 0.99)),
                ("fast_fraction", m.fast_fraction()),
                ("eviction_events", m.eviction_events as f64),
                ("evicted_pages", m.evicted_pages as f64),
                ("migrated_pages", m.migrated_pages as f64),
                (
                    "mean_reward",
                    if m.requests == 0 {
                        0.0
                    } else {
                        m.total_reward / m.requests as f64
                    },
                ),
            ] {
                row.metrics.insert(k.to_string(), v);
            }
            row.histogram.insert("fast".into(), m.fast_placements);
            row.histogram.insert("slow".into(), m.slow_placements);
            row
        })
        .collect();
    Ok(rows)
}
