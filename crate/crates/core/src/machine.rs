//! Machine topology, rate parameters and the partitioned global address space.
//!
//! A machine is a set of nodes, each holding a fixed number of nodelets. A
//! nodelet pairs one narrow memory channel with its near-memory core(s).
//! Every word of simulated memory is owned by exactly one nodelet and is
//! named by a [`GlobalAddress`].

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Simulated memory word. All benchmark data is integer valued.
pub type Word = i64;

/// Index of a nodelet in `[0, total_nodelets)`.
pub type NodeletId = usize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("config field `{0}` must be strictly positive")]
    NotPositive(&'static str),
    #[error("word_bytes ({0}) must be a power of two no larger than 64")]
    BadWordSize(u64),
    #[error("context_bytes ({context}) must be a multiple of word_bytes ({word})")]
    ContextNotWordAligned { context: u64, word: u64 },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for config key `{key}`: {reason}")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("config line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("cannot read config file: {0}")]
    Io(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("nodelet {id} out of range (machine has {total} nodelets)")]
    NodeletOutOfRange { id: NodeletId, total: usize },
}

/// Topology and rate parameters of the simulated machine.
///
/// Defaults mirror the 8-node prototype: 64 nodelets with one 175 MHz
/// core each, 64 resident threads per core and 1.6 GB/s narrow channels.
/// The migration, memory-latency, issue-interval, spawn and network values
/// are not measured quantities; they are placeholders sized so that a few
/// dozen threads per core cover them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MachineConfig {
    pub nodes: usize,
    pub nodelets_per_node: usize,
    pub cores_per_nodelet: usize,
    pub max_threads_per_core: usize,
    pub core_freq_hz: u64,
    /// Per-nodelet memory channel bandwidth.
    pub channel_bw_bytes_per_sec: u64,
    /// Memory access granularity.
    pub word_bytes: u64,
    /// Size of a migrated (or remotely spawned) thread context.
    pub context_bytes: u64,
    pub intra_node_migration_latency_cycles: u64,
    pub inter_node_migration_latency_cycles: u64,
    /// Bandwidth of one nodelet's migration port and of one node-pair link.
    pub network_bw_bytes_per_sec: u64,
    /// DRAM access latency after channel service, in core cycles.
    pub mem_latency_cycles: u64,
    /// Minimum spacing between two instructions of the same thread.
    pub issue_interval_cycles: u64,
    /// Cycles a SPAWN occupies the spawning core while the context is built.
    pub spawn_cycles: u64,
    /// Optional per-nodelet capacity in words; `None` means unbounded.
    pub nodelet_capacity_words: Option<u64>,
    pub seed: u64,
}

impl Default for MachineConfig {
    fn default() -> Self {
        Self {
            nodes: 8,
            nodelets_per_node: 8,
            cores_per_nodelet: 1,
            max_threads_per_core: 64,
            core_freq_hz: 175_000_000,
            channel_bw_bytes_per_sec: 1_600_000_000,
            word_bytes: 8,
            context_bytes: 200,
            intra_node_migration_latency_cycles: 50,
            inter_node_migration_latency_cycles: 200,
            network_bw_bytes_per_sec: 1_000_000_000,
            mem_latency_cycles: 60,
            issue_interval_cycles: 16,
            spawn_cycles: 200,
            nodelet_capacity_words: None,
            seed: 0,
        }
    }
}

/// Names accepted by [`MachineConfig::set`] and in config files.
pub const CONFIG_KEYS: &[&str] = &[
    "nodes",
    "nodelets_per_node",
    "cores_per_nodelet",
    "max_threads_per_core",
    "core_freq_hz",
    "channel_bw_bytes_per_sec",
    "word_bytes",
    "context_bytes",
    "intra_node_migration_latency_cycles",
    "inter_node_migration_latency_cycles",
    "network_bw_bytes_per_sec",
    "mem_latency_cycles",
    "issue_interval_cycles",
    "spawn_cycles",
    "nodelet_capacity_words",
    "seed",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    // Accept `1.6e9`-style rates as long as they are integral.
    let trimmed = value.trim().replace('_', "");
    if let Ok(v) = trimmed.parse::<T>() {
        return Ok(v);
    }
    let bad = |reason: String| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason,
    };
    let f: f64 = trimmed.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?;
    if f.fract() != 0.0 || f < 0.0 || !f.is_finite() {
        return Err(bad("expected a non-negative integer".into()));
    }
    format!("{}", f as u64)
        .parse::<T>()
        .map_err(|e| bad(e.to_string()))
}

impl MachineConfig {
    /// Single-node, eight-nodelet machine (one node card).
    pub fn single_node() -> Self {
        Self {
            nodes: 1,
            ..Self::default()
        }
    }

    /// Machine with exactly one nodelet.
    pub fn single_nodelet() -> Self {
        Self {
            nodes: 1,
            nodelets_per_node: 1,
            ..Self::default()
        }
    }

    pub fn total_nodelets(&self) -> usize {
        self.nodes * self.nodelets_per_node
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive: [(&'static str, u64); 12] = [
            ("nodes", self.nodes as u64),
            ("nodelets_per_node", self.nodelets_per_node as u64),
            ("cores_per_nodelet", self.cores_per_nodelet as u64),
            ("max_threads_per_core", self.max_threads_per_core as u64),
            ("core_freq_hz", self.core_freq_hz),
            ("channel_bw_bytes_per_sec", self.channel_bw_bytes_per_sec),
            ("word_bytes", self.word_bytes),
            ("context_bytes", self.context_bytes),
            ("network_bw_bytes_per_sec", self.network_bw_bytes_per_sec),
            ("issue_interval_cycles", self.issue_interval_cycles),
            ("intra_node_migration_latency_cycles", self.intra_node_migration_latency_cycles),
            ("inter_node_migration_latency_cycles", self.inter_node_migration_latency_cycles),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(ConfigError::NotPositive(name));
            }
        }
        if self.nodelet_capacity_words == Some(0) {
            return Err(ConfigError::NotPositive("nodelet_capacity_words"));
        }
        if !self.word_bytes.is_power_of_two() || self.word_bytes > 64 {
            return Err(ConfigError::BadWordSize(self.word_bytes));
        }
        // The context is moved as a whole number of words.
        if !self.context_bytes.is_multiple_of(self.word_bytes) {
            return Err(ConfigError::ContextNotWordAligned {
                context: self.context_bytes,
                word: self.word_bytes,
            });
        }
        Ok(())
    }

    /// Sets one parameter by name from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "nodes" => self.nodes = parse_num(key, value)?,
            "nodelets_per_node" => self.nodelets_per_node = parse_num(key, value)?,
            "cores_per_nodelet" => self.cores_per_nodelet = parse_num(key, value)?,
            "max_threads_per_core" => self.max_threads_per_core = parse_num(key, value)?,
            "core_freq_hz" => self.core_freq_hz = parse_num(key, value)?,
            "channel_bw_bytes_per_sec" => self.channel_bw_bytes_per_sec = parse_num(key, value)?,
            "word_bytes" => self.word_bytes = parse_num(key, value)?,
            "context_bytes" => self.context_bytes = parse_num(key, value)?,
            "intra_node_migration_latency_cycles" => {
                self.intra_node_migration_latency_cycles = parse_num(key, value)?
            }
            "inter_node_migration_latency_cycles" => {
                self.inter_node_migration_latency_cycles = parse_num(key, value)?
            }
            "network_bw_bytes_per_sec" => self.network_bw_bytes_per_sec = parse_num(key, value)?,
            "mem_latency_cycles" => self.mem_latency_cycles = parse_num(key, value)?,
            "issue_interval_cycles" => self.issue_interval_cycles = parse_num(key, value)?,
            "spawn_cycles" => self.spawn_cycles = parse_num(key, value)?,
            "nodelet_capacity_words" => {
                self.nodelet_capacity_words = match value.trim() {
                    "none" | "unbounded" | "" => None,
                    v => Some(parse_num(key, v)?),
                }
            }
            "seed" => self.seed = parse_num(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Parses a flat `key = value` text, one parameter per line, starting
    /// from the defaults. `#` starts a comment; blank lines are ignored.
    /// Unknown keys are rejected unless `ignore_unknown` is set.
    pub fn parse_flat(text: &str, ignore_unknown: bool) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| ConfigError::Syntax {
                    line: i + 1,
                    text: raw.to_string(),
                })?;
            let v = v.trim().trim_matches('"');
            match cfg.set(k.trim(), v) {
                Err(ConfigError::UnknownKey(_)) if ignore_unknown => {}
                r => r?,
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(e.to_string()))?;
        Self::parse_flat(&text, false)
    }

    /// Renders the config in the flat format read by [`Self::parse_flat`].
    pub fn to_flat(&self) -> String {
        let mut out = String::new();
        let cap = self
            .nodelet_capacity_words
            .map_or_else(|| "none".to_string(), |c| c.to_string());
        let pairs: [(&str, String); 16] = [
            ("nodes", self.nodes.to_string()),
            ("nodelets_per_node", self.nodelets_per_node.to_string()),
            ("cores_per_nodelet", self.cores_per_nodelet.to_string()),
            ("max_threads_per_core", self.max_threads_per_core.to_string()),
            ("core_freq_hz", self.core_freq_hz.to_string()),
            ("channel_bw_bytes_per_sec", self.channel_bw_bytes_per_sec.to_string()),
            ("word_bytes", self.word_bytes.to_string()),
            ("context_bytes", self.context_bytes.to_string()),
            (
                "intra_node_migration_latency_cycles",
                self.intra_node_migration_latency_cycles.to_string(),
            ),
            (
                "inter_node_migration_latency_cycles",
                self.inter_node_migration_latency_cycles.to_string(),
            ),
            ("network_bw_bytes_per_sec", self.network_bw_bytes_per_sec.to_string()),
            ("mem_latency_cycles", self.mem_latency_cycles.to_string()),
            ("issue_interval_cycles", self.issue_interval_cycles.to_string()),
            ("spawn_cycles", self.spawn_cycles.to_string()),
            ("nodelet_capacity_words", cap),
            ("seed", self.seed.to_string()),
        ];
        for (k, v) in pairs {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    /// Stable 64-bit FNV-1a hash of the flat rendering, used to tag result rows.
    pub fn config_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_flat().bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h
    }

    /// Cycles to move `bytes` at `bytes_per_sec`, rounded up, minimum one.
    pub fn cycles_for(&self, bytes: u64, bytes_per_sec: u64) -> u64 {
        let num = u128::from(bytes) * u128::from(self.core_freq_hz);
        let den = u128::from(bytes_per_sec);
        (num.div_ceil(den) as u64).max(1)
    }

    /// Channel occupancy of one word access.
    pub fn channel_service_cycles(&self) -> u64 {
        self.cycles_for(self.word_bytes, self.channel_bw_bytes_per_sec)
    }

    /// Serialization time of one thread context on a port or link.
    pub fn context_transfer_cycles(&self) -> u64 {
        self.cycles_for(self.context_bytes, self.network_bw_bytes_per_sec)
    }
}

/// A word address in the partitioned global address space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GlobalAddress {
    pub nodelet_id: NodeletId,
    pub offset_words: u64,
}

const OFFSET_BITS: u32 = 40;
const OFFSET_MASK: u64 = (1 << OFFSET_BITS) - 1;

/// Encoding of a null pointer when addresses are stored in memory.
pub const NULL_POINTER: Word = -1;

impl GlobalAddress {
    pub const fn new(nodelet_id: NodeletId, offset_words: u64) -> Self {
        Self {
            nodelet_id,
            offset_words,
        }
    }

    pub fn nodelet(&self) -> NodeletId {
        self.nodelet_id
    }

    /// The address `words` further on within the same nodelet.
    pub fn offset(self, words: u64) -> Self {
        Self::new(self.nodelet_id, self.offset_words + words)
    }

    /// Packs the address into a memory word so it can be stored as a pointer.
    pub fn to_word(self) -> Word {
        debug_assert!(self.offset_words <= OFFSET_MASK);
        (((self.nodelet_id as u64) << OFFSET_BITS) | self.offset_words) as Word
    }

    /// Inverse of [`Self::to_word`]; `None` for [`NULL_POINTER`].
    pub fn from_word(w: Word) -> Option<Self> {
        if w < 0 {
            return None;
        }
        let w = w as u64;
        Some(Self::new((w >> OFFSET_BITS) as NodeletId, w & OFFSET_MASK))
    }
}

impl fmt::Display for GlobalAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}+{}", self.nodelet_id, self.offset_words)
    }
}

/// The simulated machine: immutable topology plus per-nodelet memory.
///
/// Memory is filled during the single-threaded setup phase (allocation and
/// initialization) and then handed to a simulation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Machine {
    config: MachineConfig,
    memory: Vec<Vec<Word>>,
}

impl Machine {
    pub fn new(config: MachineConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let memory = vec![Vec::new(); config.total_nodelets()];
        Ok(Self { config, memory })
    }

    pub fn config(&self) -> &MachineConfig {
        &self.config
    }

    pub fn total_nodelets(&self) -> usize {
        self.memory.len()
    }

    /// Words allocated so far on `nodelet`.
    pub fn extent(&self, nodelet: NodeletId) -> u64 {
        self.memory[nodelet].len() as u64
    }

    pub fn nodelet_of(&self, addr: GlobalAddress) -> NodeletId {
        addr.nodelet_id
    }

    pub fn node_of(&self, nodelet: NodeletId) -> Result<usize, TopologyError> {
        self.check_nodelet(nodelet)?;
        Ok(nodelet / self.config.nodelets_per_node)
    }

    pub fn check_nodelet(&self, nodelet: NodeletId) -> Result<(), TopologyError> {
        if nodelet < self.total_nodelets() {
            Ok(())
        } else {
            Err(TopologyError::NodeletOutOfRange {
                id: nodelet,
                total: self.total_nodelets(),
            })
        }
    }

    /// True when `addr` names an allocated word.
    pub fn is_valid(&self, addr: GlobalAddress) -> bool {
        addr.nodelet_id < self.memory.len() && addr.offset_words < self.extent(addr.nodelet_id)
    }

    /// Reserves `words` zeroed words at the end of `nodelet`'s extent and
    /// returns the base offset. Capacity checks are the allocator's job.
    pub(crate) fn reserve(&mut self, nodelet: NodeletId, words: u64) -> u64 {
        let mem = &mut self.memory[nodelet];
        let base = mem.len() as u64;
        mem.resize(mem.len() + words as usize, 0);
        base
    }

    pub fn read(&self, addr: GlobalAddress) -> Word {
        self.memory[addr.nodelet_id][addr.offset_words as usize]
    }

    pub fn write(&mut self, addr: GlobalAddress, value: Word) {
        self.memory[addr.nodelet_id][addr.offset_words as usize] = value;
    }

    pub(crate) fn fetch_add(&mut self, addr: GlobalAddress, value: Word) {
        let slot = &mut self.memory[addr.nodelet_id][addr.offset_words as usize];
        *slot = slot.wrapping_add(value);
    }
}

/// Builds a machine, validating the config.
pub fn build_machine(config: MachineConfig) -> Result<Machine, ConfigError> {
    Machine::new(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_machine_has_64_nodelets() {
        let m = build_machine(MachineConfig::default()).unwrap();
        assert_eq!(m.total_nodelets(), 64);
        assert!((0..64).all(|n| m.extent(n) == 0));
    }

    #[test]
    fn minimal_and_single_node_topologies() {
        assert_eq!(build_machine(MachineConfig::single_nodelet()).unwrap().total_nodelets(), 1);
        let m = build_machine(MachineConfig::single_node()).unwrap();
        assert_eq!(m.total_nodelets(), 8);
        assert_eq!(m.node_of(7), Ok(0));
    }

    #[test]
    fn node_of_divides() {
        let m = build_machine(MachineConfig::default()).unwrap();
        assert_eq!(m.node_of(0), Ok(0));
        assert_eq!(m.node_of(63), Ok(7));
        // integer division oracle
        for id in 0..64 {
            assert_eq!(m.node_of(id).unwrap(), (id as f64 / 8.0).floor() as usize);
        }
        assert_eq!(
            m.node_of(64),
            Err(TopologyError::NodeletOutOfRange { id: 64, total: 64 })
        );
    }

    #[test]
    fn nodelet_of_is_projection() {
        let m = build_machine(MachineConfig::default()).unwrap();
        assert_eq!(m.nodelet_of(GlobalAddress::new(5, 0)), 5);
        assert_eq!(m.nodelet_of(GlobalAddress::new(0, 100)), 0);
    }

    #[test]
    fn rejects_invalid_configs() {
        let zero = MachineConfig {
            nodes: 0,
            ..MachineConfig::default()
        };
        assert_eq!(build_machine(zero), Err(ConfigError::NotPositive("nodes")));
        let odd_word = MachineConfig {
            word_bytes: 6,
            ..MachineConfig::default()
        };
        assert_eq!(build_machine(odd_word), Err(ConfigError::BadWordSize(6)));
        let ctx = MachineConfig {
            context_bytes: 201,
            ..MachineConfig::default()
        };
        assert!(matches!(
            build_machine(ctx),
            Err(ConfigError::ContextNotWordAligned { .. })
        ));
    }

    #[test]
    fn equal_configs_build_equal_machines() {
        let a = build_machine(MachineConfig::default()).unwrap();
        let b = build_machine(MachineConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn flat_config_round_trips() {
        let mut cfg = MachineConfig::default();
        cfg.set("nodes", "2").unwrap();
        cfg.set("channel_bw_bytes_per_sec", "2e9").unwrap();
        cfg.set("nodelet_capacity_words", "4096").unwrap();
        let parsed = MachineConfig::parse_flat(&cfg.to_flat(), false).unwrap();
        assert_eq!(parsed, cfg);
        assert_eq!(parsed.config_hash(), cfg.config_hash());
    }

    #[test]
    fn flat_parser_errors() {
        assert!(matches!(
            MachineConfig::parse_flat("bogus = 1", false),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(MachineConfig::parse_flat("bogus = 1", true).is_ok());
        assert!(matches!(
            MachineConfig::parse_flat("nodes 3", false),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            MachineConfig::parse_flat("nodes = 1.5", false),
            Err(ConfigError::BadValue { .. })
        ));
    }

    #[test]
    fn service_cycles_round_up() {
        let cfg = MachineConfig::default();
        // 8 B at 1.6 GB/s is 0.875 cycles at 175 MHz.
        assert_eq!(cfg.channel_service_cycles(), 1);
        // 200 B at 1 GB/s is 35 cycles.
        assert_eq!(cfg.context_transfer_cycles(), 35);
    }

    #[test]
    fn pointer_words_round_trip() {
        let a = GlobalAddress::new(63, 123_456);
        assert_eq!(GlobalAddress::from_word(a.to_word()), Some(a));
        assert_eq!(GlobalAddress::from_word(NULL_POINTER), None);
    }
}
