//! Benchmark workloads built as thread programs: STREAM ADD, pointer
//! chasing over block-shuffled lists, and CSR SpMV under three layouts.
//!
//! Each kernel allocates and initializes its data on a [`Machine`], launches
//! a spawn tree, runs the simulation and checks its numeric result exactly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::SimError;
use crate::machine::ConfigError;
use crate::memalloc::AllocError;

mod chase;
mod csr;
mod spawn;
mod spmv;
mod stream;

pub use chase::{build_chase_list, chase, run_chase, ChaseConfig, ChaseList, ChaseResult, Permutation};
pub use csr::{laplacian_csr, CsrError, CsrMatrix, LaplacianSpec};
pub use spawn::{partition, SpawnEdge, SpawnKind, SpawnPlan, SpawnStrategy};
pub use spmv::{spmv, SpmvConfig, SpmvLayout, SpmvResult};
pub use stream::{round_threads, stream_add, StreamConfig, StreamResult};

/// Generous default deadline; a run that hits it is treated as a hang.
pub const DEFAULT_DEADLINE_CYCLES: u64 = 1 << 42;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Csr(#[from] CsrError),
    #[error("simulation hit the deadline of {0} cycles")]
    Timeout(u64),
    #[error("invalid cost model: {mem_ops} memory ops in {total_insts} instructions")]
    BadCostModel { mem_ops: u32, total_insts: u32 },
    #[error("thread count must be at least one")]
    NoThreads,
    #[error("block size {block} exceeds the per-nodelet share of {share} elements")]
    BlockTooLarge { block: u64, share: u64 },
    #[error("block size must be at least one")]
    ZeroBlock,
    #[error("broken chain for thread {thread}: visited {visited} of {expected} elements")]
    BrokenChain { thread: usize, visited: u64, expected: u64 },
    #[error("dimension mismatch: matrix has {cols} columns, vector has {len} entries")]
    DimensionMismatch { cols: usize, len: usize },
}

/// Memory operations and total instructions per loop iteration. The
/// non-memory remainder is issued as COMPUTE, spread ahead of each memory op.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelCostModel {
    pub mem_ops_per_iter: u32,
    pub total_insts_per_iter: u32,
}

impl KernelCostModel {
    /// Two loads and a store among 21 instructions.
    pub const STREAM_ADD: Self = Self::new(3, 21);
    /// Payload and next-pointer loads plus address arithmetic and accumulate.
    pub const CHASE: Self = Self::new(2, 7);
    /// Column index, value and x loads plus address arithmetic and multiply-add.
    pub const SPMV: Self = Self::new(3, 12);

    pub const fn new(mem_ops_per_iter: u32, total_insts_per_iter: u32) -> Self {
        Self {
            mem_ops_per_iter,
            total_insts_per_iter,
        }
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        if self.mem_ops_per_iter == 0 || self.total_insts_per_iter < self.mem_ops_per_iter {
            return Err(KernelError::BadCostModel {
                mem_ops: self.mem_ops_per_iter,
                total_insts: self.total_insts_per_iter,
            });
        }
        Ok(())
    }

    pub fn overhead(&self) -> u32 {
        self.total_insts_per_iter - self.mem_ops_per_iter
    }

    /// Issue schedule for one iteration, given that the kernel performs
    /// `mem_ops` memory operations in it.
    pub(crate) fn schedule(&self, mem_ops: u32) -> IterSchedule {
        let overhead = self.overhead();
        let per = overhead / mem_ops;
        let mut extra = overhead % mem_ops;
        let mut slots = Vec::with_capacity(2 * mem_ops as usize);
        for m in 0..mem_ops {
            let mut c = per;
            if extra > 0 {
                c += 1;
                extra -= 1;
            }
            if c > 0 {
                slots.push(Slot::Compute(c));
            }
            slots.push(Slot::Mem(m));
        }
        IterSchedule { slots }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Slot {
    Compute(u32),
    Mem(u32),
}

/// The per-iteration sequence of COMPUTE blocks and memory operations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct IterSchedule {
    pub slots: Vec<Slot>,
}

impl IterSchedule {
    pub fn len(&self) -> u32 {
        self.slots.len() as u32
    }

    #[cfg(test)]
    pub fn instructions(&self) -> u32 {
        self.slots
            .iter()
            .map(|s| match s {
                Slot::Compute(c) => *c,
                Slot::Mem(_) => 1,
            })
            .sum()
    }
}
