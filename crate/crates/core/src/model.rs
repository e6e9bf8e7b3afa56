//! Analytic bandwidth calculators.
//!
//! A core that issues one instruction per cycle can sustain at most
//! `freq × (mem_ops / total_insts) × word_bytes` of memory traffic. Whether a
//! machine is compute- or memory-bound follows from comparing that, summed
//! over cores, with the aggregate channel bandwidth. Units are decimal.

use num_rational::Ratio;
use serde::Serialize;
use thiserror::Error;

use crate::machine::MachineConfig;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("instruction mix needs total_insts >= mem_ops >= 1 (got {mem_ops}/{total_insts})")]
    BadMix { mem_ops: u64, total_insts: u64 },
    #[error("reference bandwidth must be positive")]
    ZeroReference,
}

/// Exact bandwidth in bytes per second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Bandwidth(pub Ratio<u128>);

impl Bandwidth {
    pub fn from_bytes_per_sec(b: u64) -> Self {
        Self(Ratio::from_integer(u128::from(b)))
    }

    pub fn bytes_per_sec(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }

    pub fn mb_per_sec(&self) -> f64 {
        self.bytes_per_sec() / 1e6
    }

    /// Exact MB/s value as a ratio.
    pub fn mb_ratio(&self) -> Ratio<u128> {
        self.0 / Ratio::from_integer(1_000_000)
    }
}

impl Serialize for Bandwidth {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.bytes_per_sec())
    }
}

/// Memory operations out of total instructions for one loop iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct InstructionMix {
    pub mem_ops: u64,
    pub total_insts: u64,
}

/// STREAM ADD inner loop: two loads and a store among 21 instructions.
pub const STREAM_ADD_MIX: InstructionMix = InstructionMix {
    mem_ops: 3,
    total_insts: 21,
};

/// Peak bandwidth of one core issuing `mem_ops` memory operations every
/// `total_insts` instructions at one instruction per cycle.
pub fn peak_core_bw(freq_hz: u64, mem_ops: u64, total_insts: u64, word_bytes: u64) -> Result<Bandwidth, ModelError> {
    if mem_ops == 0 || total_insts < mem_ops {
        return Err(ModelError::BadMix { mem_ops, total_insts });
    }
    let bytes = Ratio::new(
        u128::from(freq_hz) * u128::from(mem_ops) * u128::from(word_bytes),
        u128::from(total_insts),
    );
    Ok(Bandwidth(bytes))
}

/// Aggregate theoretical channel bandwidth of the machine.
pub fn ncdimm_peak(config: &MachineConfig) -> Bandwidth {
    Bandwidth(Ratio::from_integer(
        config.total_nodelets() as u128 * u128::from(config.channel_bw_bytes_per_sec),
    ))
}

/// `measured / reference`. The reference is normally the best STREAM
/// result on the same machine.
pub fn utilization(measured_bw: f64, reference_peak_bw: f64) -> Result<f64, ModelError> {
    if reference_peak_bw <= 0.0 || !reference_peak_bw.is_finite() {
        return Err(ModelError::ZeroReference);
    }
    Ok(measured_bw / reference_peak_bw)
}

/// Smallest number of cores per nodelet whose combined issue-limited
/// bandwidth for `mix` reaches the channel bandwidth.
pub fn what_if_cores(config: &MachineConfig, mix: InstructionMix) -> Result<u64, ModelError> {
    let per_core = peak_core_bw(config.core_freq_hz, mix.mem_ops, mix.total_insts, config.word_bytes)?;
    let channel = Ratio::from_integer(u128::from(config.channel_bw_bytes_per_sec));
    let cores = (channel / per_core.0).ceil();
    Ok((*cores.numer() / *cores.denom()).max(1) as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Binding {
    ComputeBound,
    MemoryBound,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PeakReport {
    pub mix: InstructionMix,
    pub per_core_bw: Bandwidth,
    pub per_nodelet_channel_bw: Bandwidth,
    pub machine_compute_peak: Bandwidth,
    pub machine_memory_peak: Bandwidth,
    pub binding: Binding,
    pub cores_for_memory_bound: u64,
}

pub fn peak_report(config: &MachineConfig, mix: InstructionMix) -> Result<PeakReport, ModelError> {
    let per_core = peak_core_bw(config.core_freq_hz, mix.mem_ops, mix.total_insts, config.word_bytes)?;
    let cores = (config.total_nodelets() * config.cores_per_nodelet) as u128;
    let compute = Bandwidth(per_core.0 * Ratio::from_integer(cores));
    let memory = ncdimm_peak(config);
    let binding = if compute < memory {
        Binding::ComputeBound
    } else {
        Binding::MemoryBound
    };
    Ok(PeakReport {
        mix,
        per_core_bw: per_core,
        per_nodelet_channel_bw: Bandwidth::from_bytes_per_sec(config.channel_bw_bytes_per_sec),
        machine_compute_peak: compute,
        machine_memory_peak: memory,
        binding,
        cores_for_memory_bound: what_if_cores(config, mix)?,
    })
}

impl PeakReport {
    pub fn to_table(&self) -> String {
        let rows = [
            ("mix (mem ops / insts)", format!("{} / {}", self.mix.mem_ops, self.mix.total_insts)),
            ("per-core peak", format!("{:.2} MB/s", self.per_core_bw.mb_per_sec())),
            ("per-nodelet channel", format!("{:.2} MB/s", self.per_nodelet_channel_bw.mb_per_sec())),
            ("machine compute peak", format!("{:.2} MB/s", self.machine_compute_peak.mb_per_sec())),
            ("machine memory peak", format!("{:.2} MB/s", self.machine_memory_peak.mb_per_sec())),
            ("binding", format!("{:?}", self.binding)),
            ("cores/nodelet to be memory-bound", self.cores_for_memory_bound.to_string()),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        rows.iter()
            .map(|(k, v)| format!("{k:<width$}  {v}\n"))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
