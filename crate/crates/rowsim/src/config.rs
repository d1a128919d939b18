//! Simulation configuration: validated types, TOML I/O and built-in presets.
//!
//! Presets model a Zen4-class DDR5 system: two 32-bit channels at
//! 6400 MT/s, 4 bankgroups x 4 banks, 65536 rows of 1024 line-sized bursts,
//! RFM threshold 16 and PRAC threshold 512 with blast radius 2. The `prac`
//! preset swaps in the altered precharge timings that per-row activation
//! counting requires.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::addrmap::{AddrMapError, MappingDescriptor, BLOCK_BYTES};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("field `{field}`: {reason}")]
    Invariant { field: String, reason: String },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error(transparent)]
    Mapping(#[from] AddrMapError),
}

fn invariant(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invariant {
        field: field.into(),
        reason: reason.into(),
    }
}

/// One cache level. Levels are ordered first (closest to the core) to last
/// (the LLC). The last level is shared by all cores; upper levels are
/// duplicated per core.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheConfig {
    pub name: String,
    pub size_bytes: u64,
    pub ways: u32,
    pub latency_cycles: u64,
    pub mshr_entries: u32,
    pub replacement: ReplacementKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplacementKind {
    Lru,
    Ship,
}

impl CacheConfig {
    pub fn lines(&self) -> u64 {
        self.size_bytes / BLOCK_BYTES
    }
    pub fn sets(&self) -> u64 {
        self.lines() / self.ways as u64
    }

    fn validate(&self, idx: usize) -> Result<(), ConfigError> {
        let field = format!("cache_levels[{idx}] ({})", self.name);
        if self.size_bytes == 0 || self.size_bytes % BLOCK_BYTES != 0 {
            return Err(invariant(&field, "size must be a nonzero multiple of 64 B"));
        }
        if self.ways == 0 || self.lines() % self.ways as u64 != 0 {
            return Err(invariant(&field, "associativity must divide line count"));
        }
        if !self.sets().is_power_of_two() {
            return Err(invariant(&field, "set count must be a power of two"));
        }
        if self.mshr_entries == 0 {
            return Err(invariant(&field, "mshr_entries must be positive"));
        }
        Ok(())
    }
}

/// DDR5 timing parameters in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingsNs {
    pub ncl: f64,
    pub nrcd: f64,
    pub nrp: f64,
    pub nras: f64,
    pub nrc: f64,
    pub nwr: f64,
    pub nrtp: f64,
}

impl TimingsNs {
    /// Standard DDR5-6400 timings.
    pub const STANDARD: TimingsNs = TimingsNs {
        ncl: 16.25,
        nrcd: 16.25,
        nrp: 16.25,
        nras: 32.5,
        nrc: 48.0,
        nwr: 30.0,
        nrtp: 7.5,
    };
    /// Timing set with the precharge stretch required by per-row activation
    /// counters.
    pub const PRAC: TimingsNs = TimingsNs {
        ncl: 16.25,
        nrcd: 16.25,
        nrp: 36.25,
        nras: 16.25,
        nrc: 52.0,
        nwr: 10.0,
        nrtp: 5.0,
    };
}

/// Per-command energies in pJ plus active-standby power.
///
/// Datasheet-style magnitudes for a DDR5 device; only relative comparisons
/// are meaningful, and all presets share this one set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConstants {
    pub act_pj: f64,
    pub pre_pj: f64,
    pub rd_pj: f64,
    pub wr_pj: f64,
    pub ref_pj: f64,
    pub rfm_pj: f64,
    /// Accrued per nanosecond for every bank holding a row open
    /// (activate to precharge-complete).
    pub active_standby_pj_per_ns: f64,
}

impl Default for EnergyConstants {
    fn default() -> Self {
        EnergyConstants {
            act_pj: 250.0,
            pre_pj: 150.0,
            rd_pj: 100.0,
            wr_pj: 110.0,
            ref_pj: 600.0,
            rfm_pj: 600.0,
            active_standby_pj_per_ns: 1.0,
        }
    }
}

/// Memory-controller policy knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    pub write_queue_capacity: u32,
    pub write_high_watermark: u32,
    pub write_low_watermark: u32,
    /// Consecutive prefetch reads served from one open row before the
    /// scheduler reconsiders other requests.
    pub prefetch_batch_quota: u32,
    /// Adaptive row policy: initial idle timeout before closing an open row.
    pub row_timeout_initial_ns: f64,
    pub row_timeout_min_ns: f64,
    pub row_timeout_max_ns: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            write_queue_capacity: 64,
            write_high_watermark: 32,
            write_low_watermark: 8,
            prefetch_batch_quota: 4,
            row_timeout_initial_ns: 75.0,
            row_timeout_min_ns: 5.0,
            row_timeout_max_ns: 2000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DramConfig {
    pub channels: u32,
    pub ranks: u32,
    pub bankgroups: u32,
    pub banks: u32,
    pub rows: u64,
    /// Line-sized bursts per row.
    pub columns: u32,
    pub channel_width_bits: u32,
    pub data_rate_mtps: u32,
    pub refresh_period_ms: f64,
    /// Per-rank blackout per refresh command (tRFC-class).
    pub refresh_blackout_ns: f64,
    pub timings_ns: TimingsNs,
    #[serde(default)]
    pub energy: EnergyConstants,
    #[serde(default)]
    pub controller: ControllerConfig,
}

impl DramConfig {
    /// Bytes moved per read/write burst (BL16 at the channel width).
    pub fn burst_bytes(&self) -> u64 {
        (self.channel_width_bits as u64 / 8) * 16
    }

    fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("dram.timings_ns.ncl", self.timings_ns.ncl),
            ("dram.timings_ns.nrcd", self.timings_ns.nrcd),
            ("dram.timings_ns.nrp", self.timings_ns.nrp),
            ("dram.timings_ns.nras", self.timings_ns.nras),
            ("dram.timings_ns.nrc", self.timings_ns.nrc),
            ("dram.timings_ns.nwr", self.timings_ns.nwr),
            ("dram.timings_ns.nrtp", self.timings_ns.nrtp),
        ] {
            if !(v > 0.0) {
                return Err(invariant(name, "timing must be strictly positive"));
            }
        }
        if self.timings_ns.nrc < self.timings_ns.nras {
            return Err(invariant("dram.timings_ns.nrc", "nRC must be >= nRAS"));
        }
        if self.timings_ns.nras < self.timings_ns.nrcd {
            return Err(invariant("dram.timings_ns.nras", "nRAS must be >= nRCD"));
        }
        for (name, v) in [
            ("dram.channels", self.channels as u64),
            ("dram.ranks", self.ranks as u64),
            ("dram.bankgroups", self.bankgroups as u64),
            ("dram.banks", self.banks as u64),
            ("dram.rows", self.rows),
            ("dram.columns", self.columns as u64),
        ] {
            if v == 0 {
                return Err(invariant(name, "must be positive"));
            }
        }
        if self.burst_bytes() != BLOCK_BYTES {
            return Err(invariant(
                "dram.channel_width_bits",
                format!(
                    "burst ({} B) must equal the 64 B line size",
                    self.burst_bytes()
                ),
            ));
        }
        if self.data_rate_mtps == 0 {
            return Err(invariant("dram.data_rate_mtps", "must be positive"));
        }
        if !(self.refresh_period_ms > 0.0) || !(self.refresh_blackout_ns > 0.0) {
            return Err(invariant("dram.refresh_period_ms", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MitigationKind {
    None,
    Rfm,
    Prac,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MitigationConfig {
    pub kind: MitigationKind,
    pub rfm_threshold: u32,
    pub rfm_service_time_ns: f64,
    pub prac_threshold: u32,
    pub blast_radius: u32,
    pub prac_recovery_time_ns: f64,
}

impl Default for MitigationConfig {
    fn default() -> Self {
        MitigationConfig {
            kind: MitigationKind::None,
            rfm_threshold: 16,
            rfm_service_time_ns: 350.0,
            prac_threshold: 512,
            blast_radius: 2,
            prac_recovery_time_ns: 350.0,
        }
    }
}

impl MitigationConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        if self.rfm_threshold == 0 {
            return Err(invariant("mitigation.rfm_threshold", "must be >= 1"));
        }
        if self.prac_threshold == 0 {
            return Err(invariant("mitigation.prac_threshold", "must be >= 1"));
        }
        if self.blast_radius == 0 {
            return Err(invariant("mitigation.blast_radius", "must be >= 1"));
        }
        if !(self.rfm_service_time_ns > 0.0) || !(self.prac_recovery_time_ns > 0.0) {
            return Err(invariant(
                "mitigation.rfm_service_time_ns",
                "service times must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FirstLevelPrefetcher {
    None,
    NextLine,
    Stride,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LlcPrefetcher {
    None,
    Orap,
    OrapHsd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrefetcherConfig {
    pub first_level: FirstLevelPrefetcher,
    pub llc: LlcPrefetcher,
}

impl Default for PrefetcherConfig {
    fn default() -> Self {
        PrefetcherConfig {
            first_level: FirstLevelPrefetcher::None,
            llc: LlcPrefetcher::None,
        }
    }
}

/// Confidence-engine parameters for the row-access prefetcher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrapParams {
    /// Issue-counter rollover point (fills per confidence decrement).
    pub issue_max: u8,
    /// Useful-counter rollover point (hits per confidence increment).
    pub useful_max: u8,
    /// Confidence step applied on either rollover.
    pub confidence_increment: u8,
    /// Confidence assigned to a freshly allocated table entry.
    pub init_confidence: u8,
    /// Confidence at and above which no trigger is gated.
    pub gate_full_confidence: u8,
    /// Issue probability per point of confidence below the full threshold.
    pub gate_slope: f64,
    /// Floor probability at zero confidence; lets cold entries recover.
    /// Zero disables recovery probes entirely.
    pub gate_floor: f64,
    /// Confidence-to-cluster-depth step table, one entry per confidence
    /// value. Monotone nondecreasing; tunable without code changes.
    pub depth_table: Vec<u8>,
    /// Candidates handed to the bank-leveling buffer per cycle.
    pub generate_per_cycle: u32,
    pub ipct_entries: u32,
    pub ipct_ways: u32,
    pub rct_entries: u32,
    pub rct_ways: u32,
    pub pot_entries: u32,
    pub pot_ways: u32,
}

/// Default depth mapping: zero at zero confidence, otherwise one cluster
/// per 32 confidence points, capped at 8.
pub fn default_depth_table() -> Vec<u8> {
    (0..=255u32)
        .map(|c| if c == 0 { 0 } else { (c / 32 + 1).min(8) as u8 })
        .collect()
}

impl Default for OrapParams {
    fn default() -> Self {
        OrapParams {
            issue_max: 5,
            useful_max: 4,
            confidence_increment: 1,
            init_confidence: 32,
            gate_full_confidence: 100,
            gate_slope: 0.0095,
            gate_floor: 0.005,
            depth_table: default_depth_table(),
            generate_per_cycle: 2,
            ipct_entries: 1024,
            ipct_ways: 8,
            rct_entries: 1024,
            rct_ways: 8,
            pot_entries: 256,
            pot_ways: 8,
        }
    }
}

impl OrapParams {
    fn validate(&self) -> Result<(), ConfigError> {
        if self.issue_max == 0 || self.useful_max == 0 {
            return Err(invariant("orap.issue_max", "counter maxima must be >= 1"));
        }
        if self.useful_max > self.issue_max {
            return Err(invariant(
                "orap.useful_max",
                "useful_max must not exceed issue_max",
            ));
        }
        if self.confidence_increment == 0 {
            return Err(invariant("orap.confidence_increment", "must be >= 1"));
        }
        if self.depth_table.len() != 256 {
            return Err(invariant("orap.depth_table", "must have 256 entries"));
        }
        if self.depth_table.windows(2).any(|w| w[1] < w[0]) {
            return Err(invariant(
                "orap.depth_table",
                "must be monotone nondecreasing",
            ));
        }
        for (f, v) in [("orap.gate_slope", self.gate_slope), ("orap.gate_floor", self.gate_floor)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invariant(f, "must lie in [0, 1]"));
            }
        }
        for (f, entries, ways) in [
            ("orap.ipct", self.ipct_entries, self.ipct_ways),
            ("orap.rct", self.rct_entries, self.rct_ways),
            ("orap.pot", self.pot_entries, self.pot_ways),
        ] {
            if entries == 0 || ways == 0 || entries % ways != 0 || !(entries / ways).is_power_of_two()
            {
                return Err(invariant(f, "entries/ways must give a power-of-two set count"));
            }
        }
        Ok(())
    }
}

/// Stream-detection engine parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HsdParams {
    pub streams: u32,
    /// Maximum forward depth in blocks.
    pub max_depth: u32,
    /// Accesses per histogram epoch.
    pub epoch_accesses: u32,
    /// Probability requirement at zero confidence.
    pub p_req_max: f64,
    /// Probability requirement at full confidence.
    pub p_req_min: f64,
}

impl Default for HsdParams {
    fn default() -> Self {
        HsdParams {
            streams: 32,
            max_depth: 64,
            epoch_accesses: 8192,
            p_req_max: 0.9,
            p_req_min: 0.3,
        }
    }
}

impl HsdParams {
    fn validate(&self) -> Result<(), ConfigError> {
        if self.streams == 0 || self.max_depth == 0 || self.max_depth > 64 {
            return Err(invariant("hsd.max_depth", "must be in 1..=64"));
        }
        if self.epoch_accesses == 0 {
            return Err(invariant("hsd.epoch_accesses", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.p_req_min)
            || !(0.0..=1.0).contains(&self.p_req_max)
            || self.p_req_min > self.p_req_max
        {
            return Err(invariant("hsd.p_req_min", "need 0 <= p_req_min <= p_req_max <= 1"));
        }
        Ok(())
    }
}

/// Bank-leveling buffer geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlpParams {
    pub sub_buffers: u32,
    pub entries_per_core: u32,
    /// Prefetch requests released per cycle, each from a distinct sub-buffer.
    pub issues_per_cycle: u32,
}

impl Default for BlpParams {
    fn default() -> Self {
        BlpParams {
            sub_buffers: 16,
            entries_per_core: 64,
            issues_per_cycle: 2,
        }
    }
}

impl BlpParams {
    pub fn entries_per_sub_buffer(&self) -> u32 {
        self.entries_per_core / self.sub_buffers
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.sub_buffers == 0
            || self.entries_per_core == 0
            || self.entries_per_core % self.sub_buffers != 0
        {
            return Err(invariant(
                "blp.entries_per_core",
                "must be a positive multiple of sub_buffers",
            ));
        }
        if self.issues_per_cycle == 0 {
            return Err(invariant("blp.issues_per_cycle", "must be positive"));
        }
        Ok(())
    }
}

/// Mapping selection: exactly one of a named preset or an explicit layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct MappingChoice {
    pub preset: Option<String>,
    pub explicit: Option<MappingDescriptor>,
}

impl MappingChoice {
    pub fn preset(name: &str) -> Self {
        MappingChoice {
            preset: Some(name.into()),
            explicit: None,
        }
    }

    pub fn resolve(&self) -> Result<MappingDescriptor, ConfigError> {
        match (&self.preset, &self.explicit) {
            (Some(name), None) => Ok(MappingDescriptor::preset(name)?),
            (None, Some(d)) => {
                d.validate()?;
                Ok(d.clone())
            }
            _ => Err(invariant(
                "mapping",
                "exactly one of `preset` or `explicit` must be set",
            )),
        }
    }
}

/// In-order-retire core front parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoreConfig {
    pub rob_capacity: u32,
    /// Cycles charged per instruction of non-memory work.
    pub base_cpi_non_mem: f64,
}

impl Default for CoreConfig {
    fn default() -> Self {
        CoreConfig {
            rob_capacity: 512,
            base_cpi_non_mem: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub core_count: u32,
    pub core_freq_ghz: f64,
    pub rng_seed: u64,
    #[serde(default)]
    pub core: CoreConfig,
    pub cache_levels: Vec<CacheConfig>,
    pub dram: DramConfig,
    pub mapping: MappingChoice,
    #[serde(default)]
    pub mitigation: MitigationConfig,
    #[serde(default)]
    pub prefetchers: PrefetcherConfig,
    #[serde(default)]
    pub orap: OrapParams,
    #[serde(default)]
    pub hsd: HsdParams,
    #[serde(default)]
    pub blp: BlpParams,
}

pub const PRESET_NAMES: &[&str] = &["zen4-1core", "zen4-rfm", "zen4-prac", "zen4-8core", "tiny-1gib"];

impl SimConfig {
    /// Built-in configurations. `zen4-1core` is the reference single-core
    /// DDR5 system; `zen4-rfm`/`zen4-prac` enable the two mitigations
    /// (`zen4-prac` also swaps the timing set); `zen4-8core` widens the
    /// memory system; `tiny-1gib` is a downscaled system for exhaustive and
    /// fast tests.
    pub fn preset(name: &str) -> Result<SimConfig, ConfigError> {
        let base_caches = vec![
            CacheConfig {
                name: "l1d".into(),
                size_bytes: 48 * 1024,
                ways: 12,
                latency_cycles: 5,
                mshr_entries: 32,
                replacement: ReplacementKind::Lru,
            },
            CacheConfig {
                name: "l2".into(),
                size_bytes: 1024 * 1024,
                ways: 16,
                latency_cycles: 10,
                mshr_entries: 64,
                replacement: ReplacementKind::Lru,
            },
            CacheConfig {
                name: "llc".into(),
                size_bytes: 8 * 1024 * 1024,
                ways: 16,
                latency_cycles: 60,
                mshr_entries: 40,
                replacement: ReplacementKind::Ship,
            },
        ];
        let dram_1core = DramConfig {
            channels: 2,
            ranks: 1,
            bankgroups: 4,
            banks: 4,
            rows: 65536,
            columns: 1024,
            channel_width_bits: 32,
            data_rate_mtps: 6400,
            refresh_period_ms: 32.0,
            refresh_blackout_ns: 295.0,
            timings_ns: TimingsNs::STANDARD,
            energy: EnergyConstants::default(),
            controller: ControllerConfig::default(),
        };
        let cfg = match name {
            "zen4-1core" => SimConfig {
                core_count: 1,
                core_freq_ghz: 4.0,
                rng_seed: 42,
                core: CoreConfig::default(),
                cache_levels: base_caches,
                dram: dram_1core,
                mapping: MappingChoice::preset("zen4"),
                mitigation: MitigationConfig::default(),
                prefetchers: PrefetcherConfig::default(),
                orap: OrapParams::default(),
                hsd: HsdParams::default(),
                blp: BlpParams::default(),
            },
            "zen4-rfm" => {
                let mut c = SimConfig::preset("zen4-1core")?;
                c.mitigation.kind = MitigationKind::Rfm;
                c
            }
            "zen4-prac" => {
                let mut c = SimConfig::preset("zen4-1core")?;
                c.mitigation.kind = MitigationKind::Prac;
                c.dram.timings_ns = TimingsNs::PRAC;
                c
            }
            "zen4-8core" => {
                let mut c = SimConfig::preset("zen4-1core")?;
                c.core_count = 8;
                c.cache_levels[2].size_bytes = 64 * 1024 * 1024;
                c.cache_levels[2].mshr_entries = 320;
                c.dram.channels = 4;
                c.dram.ranks = 2;
                c.dram.bankgroups = 8;
                c.mapping = MappingChoice::preset("zen4-8core");
                c
            }
            "tiny-1gib" => {
                let mut c = SimConfig::preset("zen4-1core")?;
                c.dram.rows = 512;
                c.mapping = MappingChoice::preset("zen4-1gib");
                c.cache_levels[0].size_bytes = 4 * 1024;
                c.cache_levels[0].ways = 4;
                c.cache_levels[0].mshr_entries = 8;
                c.cache_levels[1].size_bytes = 16 * 1024;
                c.cache_levels[1].ways = 8;
                c.cache_levels[1].mshr_entries = 16;
                c.cache_levels[1].latency_cycles = 10;
                c.cache_levels[2].size_bytes = 64 * 1024;
                c.cache_levels[2].ways = 16;
                c.cache_levels[2].mshr_entries = 16;
                c.cache_levels[2].latency_cycles = 20;
                c
            }
            other => return Err(ConfigError::UnknownPreset(other.into())),
        };
        // Presets are constructed valid; normalize derived fields eagerly.
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(s: &str) -> Result<SimConfig, ConfigError> {
        let cfg: SimConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SimConfig, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        SimConfig::from_toml_str(&text)
    }

    pub fn mapping_descriptor(&self) -> Result<MappingDescriptor, ConfigError> {
        self.mapping.resolve()
    }

    /// Cross-field invariant checks. Every failure names the offending field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.core_count == 0 {
            return Err(invariant("core_count", "must be positive"));
        }
        if !(self.core_freq_ghz > 0.0) {
            return Err(invariant("core_freq_ghz", "must be positive"));
        }
        if self.cache_levels.len() < 2 {
            return Err(invariant("cache_levels", "need at least two levels"));
        }
        for (i, c) in self.cache_levels.iter().enumerate() {
            c.validate(i)?;
        }
        self.dram.validate()?;
        self.mitigation.validate()?;
        self.orap.validate()?;
        self.hsd.validate()?;
        self.blp.validate()?;
        let mapping = self.mapping.resolve()?;
        if mapping.channels() != self.dram.channels {
            return Err(invariant(
                "dram.channels",
                format!("mapping provides {}", mapping.channels()),
            ));
        }
        if mapping.ranks() != self.dram.ranks {
            return Err(invariant(
                "dram.ranks",
                format!("mapping provides {}", mapping.ranks()),
            ));
        }
        if mapping.bankgroups() != self.dram.bankgroups {
            return Err(invariant(
                "dram.bankgroups",
                format!("mapping provides {}", mapping.bankgroups()),
            ));
        }
        if mapping.banks() != self.dram.banks {
            return Err(invariant(
                "dram.banks",
                format!("mapping provides {}", mapping.banks()),
            ));
        }
        if mapping.rows() != self.dram.rows {
            return Err(invariant(
                "dram.rows",
                format!("mapping provides {}", mapping.rows()),
            ));
        }
        if mapping.columns_per_row() != self.dram.columns {
            return Err(invariant(
                "dram.columns",
                format!("mapping provides {}", mapping.columns_per_row()),
            ));
        }
        Ok(())
    }

    /// Addressable bytes under the resolved mapping.
    pub fn physical_bytes(&self) -> u64 {
        self.mapping
            .resolve()
            .map(|m| m.physical_bytes())
            .unwrap_or(0)
    }
}

/// Load and validate a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<SimConfig, ConfigError> {
    SimConfig::load(path)
}
