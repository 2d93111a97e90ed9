use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::hermes::PopetConfig;
use crate::mem_sim::MemConfig;
use crate::pythia::PythiaConfig;
use crate::sibyl::{HssConfig, SibylConfig};
use crate::trace::TraceSpec;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Prefetch,
    Offchip,
    Hss,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Prefetch => "prefetch",
            ExperimentKind::Offchip => "offchip",
            ExperimentKind::Hss => "hss",
        }
    }

    /// Policy names accepted for this kind of experiment.
    pub fn policies(&self) -> &'static [&'static str] {
        match self {
            ExperimentKind::Prefetch => &["none", "next_line", "stride", "pythia"],
            ExperimentKind::Offchip => &["none", "popet", "ttp", "random"],
            ExperimentKind::Hss => &["fast_only", "slow_only", "oracle", "recency", "sibyl"],
        }
    }

    fn is_memory(&self) -> bool {
        !matches!(self, ExperimentKind::Hss)
    }
}

/// Off-chip prediction settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OffchipOptions {
    /// Issue speculative DRAM requests for loads predicted off-chip.
    pub hermes: bool,
    pub issue_latency: u64,
    /// Lines tracked by `ttp`; the LLC line count when absent.
    pub ttp_capacity: Option<usize>,
    /// Off-chip probability of the `random` predictor.
    pub random_probability: f64,
    /// Prefetcher running alongside the predictor.
    pub prefetcher: String,
}

impl Default for OffchipOptions {
    fn default() -> Self {
        OffchipOptions {
            hermes: true,
            issue_latency: 6,
            ttp_capacity: None,
            random_probability: 0.5,
            prefetcher: "none".into(),
        }
    }
}

/// One experiment: a trace, a policy list and simulator parameters. Memory
/// experiments run every policy at every listed DRAM rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub kind: ExperimentKind,
    pub seed: u64,
    #[serde(default)]
    pub policies: Vec<String>,
    #[serde(default)]
    pub trace: Option<TraceSpec>,
    #[serde(default)]
    pub trace_file: Option<PathBuf>,
    /// Leading accesses excluded from memory metrics.
    #[serde(default)]
    pub warmup: usize,
    #[serde(default)]
    pub mtps: Vec<u32>,
    #[serde(default)]
    pub mem: MemConfig,
    #[serde(default)]
    pub pythia: PythiaConfig,
    #[serde(default)]
    pub popet: PopetConfig,
    #[serde(default)]
    pub offchip: OffchipOptions,
    #[serde(default)]
    pub storage: HssConfig,
    #[serde(default)]
    pub sibyl: SibylConfig,
    /// Directory for report files; stdout when absent.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, seed: u64, trace: TraceSpec) -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            kind,
            seed,
            policies: Vec::new(),
            trace: Some(trace),
            trace_file: None,
            warmup: 0,
            mtps: Vec::new(),
            mem: MemConfig::default(),
            pythia: PythiaConfig::default(),
            popet: PopetConfig::default(),
            offchip: OffchipOptions::default(),
            storage: HssConfig::default(),
            sibyl: SibylConfig::default(),
            output: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse a config file. A relative `trace_file` is resolved against the
    /// config's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_toml(&std::fs::read_to_string(path)?)?;
        if let (Some(tf), Some(dir)) = (&cfg.trace_file, path.parent()) {
            if tf.is_relative() {
                cfg.trace_file = Some(dir.join(tf));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(config_err(format!(
                "unsupported config version {}, expected {CONFIG_VERSION}",
                self.version
            )));
        }
        let known = self.kind.policies();
        for p in &self.policies {
            if !known.contains(&p.as_str()) {
                return Err(Error::UnknownPolicy(p.clone()));
            }
        }
        match (&self.trace, &self.trace_file) {
            (Some(_), Some(_)) => {
                return Err(config_err("give either trace or trace_file, not both"))
            }
            (None, None) => return Err(config_err("a trace or trace_file is required")),
            (Some(spec), None) if spec.is_storage() == self.kind.is_memory() => {
                return Err(config_err(format!(
                    "{:?} traces do not fit a {} experiment",
                    spec.generator,
                    self.kind.as_str()
                )));
            }
            _ => {}
        }
        if !self.kind.is_memory() && !self.mtps.is_empty() {
            return Err(config_err("mtps applies only to memory experiments"));
        }
        if self.mtps.contains(&0) {
            return Err(config_err("mtps must be positive"));
        }
        if self.kind == ExperimentKind::Offchip
            && !ExperimentKind::Prefetch
                .policies()
                .contains(&self.offchip.prefetcher.as_str())
        {
            return Err(Error::UnknownPolicy(self.offchip.prefetcher.clone()));
        }
        if !(0.0..=1.0).contains(&self.offchip.random_probability) {
            return Err(config_err("random_probability must lie in [0, 1]"));
        }
        Ok(())
    }

    /// DRAM rates to sweep; the configured rate when none are listed.
    pub fn mtps_values(&self) -> Vec<u32> {
        if self.mtps.is_empty() {
            vec![self.mem.dram.mtps]
        } else {
            self.mtps.clone()
        }
    }
}
