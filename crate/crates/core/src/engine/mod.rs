//! Discrete-event core: fine-grained multithreaded cores, FIFO memory
//! channels, migration on remote reads and memory-side remote writes.
//!
//! Scheduling contract, per cycle:
//! - each core issues at most one instruction, round-robin over its ready
//!   threads; a thread may issue again only after `issue_interval_cycles`
//! - at most `max_threads_per_core` threads are resident on a core, the
//!   rest queue in arrival order
//! - a local load holds the channel for one word's service time and wakes
//!   the thread `mem_latency_cycles` later
//! - a remote load sends the context to the owning nodelet, which then
//!   performs the load locally
//! - stores are posted; remote stores and atomic adds travel as small
//!   messages and never move the thread
//!
//! Time is integer cycles throughout.

mod program;
mod sim;
mod stats;

pub use program::{Op, Registers, Script, ScriptOp, SpawnRequest, ThreadProgram, NUM_REGS};
pub use sim::{SimError, Simulation, SpawnMode, ThreadContext, ThreadId, ThreadStatus};
pub use stats::{NodeletStats, SimStats};
