use std::fmt;
use std::sync::Arc;

use crate::machine::{GlobalAddress, NodeletId, Word};

/// Size of a thread's general-purpose register file.
pub const NUM_REGS: usize = 16;

/// Architectural state carried by a thread context: a program counter and a
/// small fixed register file. Everything a program needs to resume lives here.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Registers {
    pub pc: u32,
    pub r: [Word; NUM_REGS],
}

impl Registers {
    pub fn with_args(args: &[Word]) -> Self {
        assert!(args.len() <= NUM_REGS, "too many thread arguments");
        let mut regs = Self::default();
        regs.r[..args.len()].copy_from_slice(args);
        regs
    }
}

/// A request to create a new thread.
pub struct SpawnRequest {
    pub target: NodeletId,
    pub program: Arc<dyn ThreadProgram>,
    pub regs: Registers,
}

impl fmt::Debug for SpawnRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpawnRequest")
            .field("target", &self.target)
            .field("program", &self.program.name())
            .field("regs", &self.regs)
            .finish()
    }
}

/// Abstract instruction issued by a thread.
#[derive(Debug)]
pub enum Op {
    /// `n` non-memory instructions, issued one per slot.
    Compute(u32),
    /// Read a word into register `dst`. Migrates the thread when remote.
    Load { addr: GlobalAddress, dst: u8 },
    /// Write a word. Remote stores are memory-side; the thread stays put.
    Store { addr: GlobalAddress, value: Word },
    /// Memory-side atomic add; never migrates the thread.
    RemoteAdd { addr: GlobalAddress, value: Word },
    /// Create a thread on `target`; local when `target` is the current nodelet.
    Spawn(Box<SpawnRequest>),
    End,
}

impl Op {
    pub fn spawn(target: NodeletId, program: Arc<dyn ThreadProgram>, regs: Registers) -> Self {
        Op::Spawn(Box::new(SpawnRequest {
            target,
            program,
            regs,
        }))
    }
}

/// Code executed by simulated threads.
///
/// A program is immutable and shared by every thread running it; all
/// per-thread state is in [`Registers`]. `step` is called once per issued
/// instruction with the nodelet the thread currently resides on and returns
/// the next abstract instruction. Load results are written to the requested
/// register before the following `step`.
pub trait ThreadProgram: Send + Sync {
    fn step(&self, regs: &mut Registers, here: NodeletId) -> Op;

    fn name(&self) -> &str {
        "program"
    }
}

/// A program given as a fixed list of instructions; handy for tests and
/// microbenchmarks. Each thread walks the list once.
pub struct Script {
    ops: Vec<ScriptOp>,
}

/// Copyable subset of [`Op`] used by [`Script`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScriptOp {
    Compute(u32),
    Load(GlobalAddress),
    Store(GlobalAddress, Word),
    RemoteAdd(GlobalAddress, Word),
}

impl Script {
    pub fn new(ops: Vec<ScriptOp>) -> Arc<Self> {
        Arc::new(Self { ops })
    }
}

impl ThreadProgram for Script {
    fn step(&self, regs: &mut Registers, _here: NodeletId) -> Op {
        let pc = regs.pc as usize;
        regs.pc += 1;
        match self.ops.get(pc) {
            None => Op::End,
            Some(&ScriptOp::Compute(n)) => Op::Compute(n),
            Some(&ScriptOp::Load(addr)) => Op::Load { addr, dst: 0 },
            Some(&ScriptOp::Store(addr, value)) => Op::Store { addr, value },
            Some(&ScriptOp::RemoteAdd(addr, value)) => Op::RemoteAdd { addr, value },
        }
    }

    fn name(&self) -> &str {
        "script"
    }
}
