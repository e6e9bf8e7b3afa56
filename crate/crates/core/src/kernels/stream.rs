use std::sync::Arc;

use serde::Serialize;

use super::spawn::{partition, SpawnPlan, SpawnStrategy};
use super::{IterSchedule, KernelCostModel, KernelError, Slot, DEFAULT_DEADLINE_CYCLES};
use crate::engine::{Op, Registers, SimStats, Simulation, ThreadProgram};
use crate::machine::{Machine, MachineConfig, NodeletId, Word};
use crate::memalloc::{alloc_1d_striped, Allocation};

#[derive(Debug, Clone, Serialize)]
pub struct StreamConfig {
    /// log2 of the element count.
    pub scale: u32,
    pub threads: usize,
    pub strategy: SpawnStrategy,
    pub cost_model: KernelCostModel,
    pub deadline_cycles: u64,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self {
            scale: 20,
            threads: 64,
            strategy: SpawnStrategy::RecursiveRemoteSpawn,
            cost_model: KernelCostModel::STREAM_ADD,
            deadline_cycles: DEFAULT_DEADLINE_CYCLES,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StreamResult {
    pub stats: SimStats,
    pub threads_used: usize,
    pub checksum: i64,
    pub verified: bool,
}

/// Largest power of two not above `threads`.
pub fn round_threads(threads: usize) -> usize {
    if threads == 0 {
        0
    } else {
        1 << (usize::BITS - 1 - threads.leading_zeros())
    }
}

/// Work is numbered nodelet by nodelet: unit `u` of nodelet `k`'s share is
/// element `j * N + k`, so a contiguous range of units is a strided,
/// nodelet-local loop.
struct UnitSpace {
    nodelets: u64,
    /// starts[k] = first unit on nodelet k; final entry is the total.
    starts: Vec<u64>,
}

impl UnitSpace {
    fn new(n: u64, nodelets: usize) -> Self {
        let nl = nodelets as u64;
        let mut starts = Vec::with_capacity(nodelets + 1);
        let mut acc = 0;
        for k in 0..nl {
            starts.push(acc);
            acc += n.saturating_sub(k).div_ceil(nl);
        }
        starts.push(acc);
        Self { nodelets: nl, starts }
    }

    fn locate(&self, unit: u64) -> (NodeletId, u64) {
        let k = self.starts.partition_point(|&s| s <= unit) - 1;
        (k, unit - self.starts[k])
    }

    fn element(&self, unit: u64) -> u64 {
        let (k, j) = self.locate(unit);
        j * self.nodelets + k as u64
    }
}

struct StreamAdd {
    a: Allocation,
    b: Allocation,
    c: Allocation,
    units: UnitSpace,
    schedule: IterSchedule,
}

// r0 = next unit, r1 = end unit, r2/r3 = loaded a/b, pc = slot in iteration
impl ThreadProgram for StreamAdd {
    fn step(&self, regs: &mut Registers, _here: NodeletId) -> Op {
        if regs.r[0] >= regs.r[1] {
            return Op::End;
        }
        let i = self.units.element(regs.r[0] as u64);
        let slot = self.schedule.slots[regs.pc as usize];
        regs.pc += 1;
        if regs.pc == self.schedule.len() {
            regs.pc = 0;
            regs.r[0] += 1;
        }
        match slot {
            Slot::Compute(n) => Op::Compute(n),
            Slot::Mem(0) => Op::Load {
                addr: self.a.resolve_unchecked(i, 0),
                dst: 2,
            },
            Slot::Mem(1) => Op::Load {
                addr: self.b.resolve_unchecked(i, 0),
                dst: 3,
            },
            Slot::Mem(_) => Op::Store {
                addr: self.c.resolve_unchecked(i, 0),
                value: regs.r[2].wrapping_add(regs.r[3]),
            },
        }
    }

    fn name(&self) -> &str {
        "stream_add"
    }
}

/// Runs STREAM ADD `c = a + b` with `a[i] = i`, `b[i] = 2i` on a fresh
/// machine and verifies `c` element by element.
pub fn stream_add(config: &MachineConfig, sc: &StreamConfig) -> Result<StreamResult, KernelError> {
    sc.cost_model.validate()?;
    if sc.threads == 0 {
        return Err(KernelError::NoThreads);
    }
    let threads = round_threads(sc.threads);
    if threads != sc.threads {
        log::warn!("thread count {} rounded down to {}", sc.threads, threads);
    }
    let mut machine = Machine::new(config.clone())?;
    let n = 1u64 << sc.scale;
    let a = alloc_1d_striped(&mut machine, n)?;
    let b = alloc_1d_striped(&mut machine, n)?;
    let c = alloc_1d_striped(&mut machine, n)?;
    for i in 0..n {
        a.write_all(&mut machine, i, i as Word)?;
        b.write_all(&mut machine, i, 2 * i as Word)?;
    }
    let units = UnitSpace::new(n, machine.total_nodelets());
    let ranges = partition(n, threads);
    let homes: Vec<NodeletId> = ranges
        .iter()
        .map(|r| units.locate(r.start.min(n.saturating_sub(1))).0)
        .collect();
    let args: Vec<Registers> = ranges
        .iter()
        .map(|r| Registers::with_args(&[r.start as Word, r.end as Word]))
        .collect();
    let program = Arc::new(StreamAdd {
        a,
        b,
        c,
        units,
        schedule: sc.cost_model.schedule(3),
    });
    let plan = SpawnPlan::new(sc.strategy, &homes, 0);
    let mut sim = Simulation::new(machine);
    plan.launch(&mut sim, program.clone(), args)?;
    let stats = sim.run_until_idle(sc.deadline_cycles)?;
    if stats.timed_out {
        return Err(KernelError::Timeout(sc.deadline_cycles));
    }
    let machine = sim.into_machine();
    let out = program.c.read_all(&machine, 0);
    let verified = out.iter().enumerate().all(|(i, &v)| v == 3 * i as Word);
    let checksum = out.iter().fold(0i64, |s, &v| s.wrapping_add(v));
    Ok(StreamResult {
        stats,
        threads_used: threads,
        checksum,
        verified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(round_threads(1), 1);
        assert_eq!(round_threads(3), 2);
        assert_eq!(round_threads(64), 64);
        assert_eq!(round_threads(100), 64);
        assert_eq!(round_threads(0), 0);
    }

    #[test]
    fn unit_space_is_a_permutation() {
        for (n, nl) in [(10u64, 3usize), (16, 4), (5, 8), (1, 1)] {
            let u = UnitSpace::new(n, nl);
            assert_eq!(*u.starts.last().unwrap(), n);
            let mut seen: Vec<u64> = (0..n).map(|x| u.element(x)).collect();
            for x in 0..n {
                let (k, _) = u.locate(x);
                assert_eq!(u.element(x) % nl as u64, k as u64);
            }
            seen.sort_unstable();
            assert_eq!(seen, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn small_run_verifies() {
        let cfg = MachineConfig::single_node();
        for strategy in SpawnStrategy::ALL {
            let sc = StreamConfig {
                scale: 8,
                threads: 16,
                strategy,
                ..StreamConfig::default()
            };
            let r = stream_add(&cfg, &sc).unwrap();
            assert!(r.verified);
            let n = 256i64;
            assert_eq!(r.checksum, 3 * n * (n - 1) / 2);
            assert_eq!(r.stats.bytes_moved, 3 * 256 * 8);
        }
    }
}
