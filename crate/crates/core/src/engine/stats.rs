use serde::{Deserialize, Serialize};

/// Counters for one nodelet.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeletStats {
    pub channel_busy_cycles: u64,
    pub core_busy_cycles: u64,
    pub instructions: u64,
    pub loads: u64,
    /// Local stores served by this nodelet's channel.
    pub stores: u64,
    /// Memory-side operations (remote stores, atomic adds) served here.
    pub remote_writes: u64,
    pub migrations_in: u64,
    pub migrations_out: u64,
    pub spawns: u64,
}

/// Result of one simulation run. All bandwidth figures derive from here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub sim_cycles: u64,
    pub core_freq_hz: u64,
    pub word_bytes: u64,
    pub nodelets: Vec<NodeletStats>,
    pub bytes_moved: u64,
    pub thread_count: u64,
    pub seconds: f64,
    pub achieved_bw_bytes_per_sec: f64,
    pub timed_out: bool,
}

impl SimStats {
    pub(crate) fn new(nodelets: usize, core_freq_hz: u64, word_bytes: u64) -> Self {
        Self {
            sim_cycles: 0,
            core_freq_hz,
            word_bytes,
            nodelets: vec![NodeletStats::default(); nodelets],
            bytes_moved: 0,
            thread_count: 0,
            seconds: 0.0,
            achieved_bw_bytes_per_sec: 0.0,
            timed_out: false,
        }
    }

    /// Recomputes the derived totals from the per-nodelet counters.
    pub(crate) fn finalize(&mut self, sim_cycles: u64) {
        self.sim_cycles = sim_cycles;
        let words: u64 = self
            .nodelets
            .iter()
            .map(|n| n.loads + n.stores + n.remote_writes)
            .sum();
        self.bytes_moved = words * self.word_bytes;
        self.seconds = sim_cycles as f64 / self.core_freq_hz as f64;
        self.achieved_bw_bytes_per_sec = if sim_cycles == 0 {
            0.0
        } else {
            self.bytes_moved as f64 / self.seconds
        };
    }

    pub fn bandwidth_mb_per_sec(&self) -> f64 {
        self.achieved_bw_bytes_per_sec / 1e6
    }

    pub fn total_migrations(&self) -> u64 {
        self.nodelets.iter().map(|n| n.migrations_out).sum()
    }

    pub fn total_migrations_in(&self) -> u64 {
        self.nodelets.iter().map(|n| n.migrations_in).sum()
    }

    pub fn total_spawns(&self) -> u64 {
        self.nodelets.iter().map(|n| n.spawns).sum()
    }

    pub fn total_loads(&self) -> u64 {
        self.nodelets.iter().map(|n| n.loads).sum()
    }

    pub fn total_stores(&self) -> u64 {
        self.nodelets.iter().map(|n| n.stores).sum()
    }

    pub fn total_remote_writes(&self) -> u64 {
        self.nodelets.iter().map(|n| n.remote_writes).sum()
    }

    pub fn total_instructions(&self) -> u64 {
        self.nodelets.iter().map(|n| n.instructions).sum()
    }

    /// Bandwidth served by one nodelet's channel.
    pub fn nodelet_bw_bytes_per_sec(&self, nodelet: usize) -> f64 {
        let n = &self.nodelets[nodelet];
        if self.sim_cycles == 0 {
            return 0.0;
        }
        let bytes = (n.loads + n.stores + n.remote_writes) * self.word_bytes;
        bytes as f64 * self.core_freq_hz as f64 / self.sim_cycles as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }
}
