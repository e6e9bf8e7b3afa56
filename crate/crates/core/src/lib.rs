//! Deterministic simulator of a migratory-thread PGAS machine.
//!
//! The crate is organized bottom-up:
//! - [`machine`]: topology, rates and the global address space
//! - [`memalloc`]: local, striped, row-co-located and replicated allocations
//! - [`engine`]: the discrete-event core that runs thread programs
//! - [`kernels`]: STREAM ADD, pointer chasing and CSR SpMV workloads
//! - [`model`]: analytic per-core and channel peak bandwidths
//! - [`sweep`] and [`report`]: parameter sweeps and result tables

pub mod engine;
pub mod kernels;
pub mod machine;
pub mod memalloc;
pub mod model;
pub mod report;
pub mod sweep;

pub use engine::{SimStats, Simulation};
pub use machine::{build_machine, GlobalAddress, Machine, MachineConfig, NodeletId, Word};
