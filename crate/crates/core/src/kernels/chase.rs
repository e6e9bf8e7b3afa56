use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::spawn::{SpawnPlan, SpawnStrategy};
use super::{IterSchedule, KernelCostModel, KernelError, Slot, DEFAULT_DEADLINE_CYCLES};
use crate::engine::{Op, Registers, SimStats, Simulation, ThreadProgram};
use crate::machine::{GlobalAddress, Machine, MachineConfig, NodeletId, Word, NULL_POINTER};
use crate::memalloc::{alloc_striped, Allocation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Permutation {
    Ordered,
    IntraBlockShuffle,
    BlockShuffle,
    FullBlockShuffle,
}

impl Permutation {
    pub const ALL: [Permutation; 4] = [
        Permutation::Ordered,
        Permutation::IntraBlockShuffle,
        Permutation::BlockShuffle,
        Permutation::FullBlockShuffle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ordered => "ordered",
            Self::IntraBlockShuffle => "intra_block_shuffle",
            Self::BlockShuffle => "block_shuffle",
            Self::FullBlockShuffle => "full_block_shuffle",
        }
    }

    fn shuffles_blocks(self) -> bool {
        matches!(self, Self::BlockShuffle | Self::FullBlockShuffle)
    }

    fn shuffles_within(self) -> bool {
        matches!(self, Self::IntraBlockShuffle | Self::FullBlockShuffle)
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Permutation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown permutation `{s}`"))
    }
}

/// A set of linked lists, one per thread, over 2-word elements
/// (payload, next). Blocks of `block_size` elements are placed whole on
/// nodelets, round-robin by block.
#[derive(Debug, Clone)]
pub struct ChaseList {
    pub n_elements: u64,
    pub block_size: u64,
    pub permutation: Permutation,
    pub seed: u64,
    pub threads: usize,
    pub storage: Allocation,
    pub heads: Vec<GlobalAddress>,
    /// Element ids in visit order, chain after chain.
    pub order: Vec<u64>,
}

impl ChaseList {
    pub fn chain_len(&self) -> u64 {
        self.n_elements / self.threads as u64
    }

    pub fn element_addr(&self, e: u64) -> GlobalAddress {
        self.storage.resolve_unchecked(2 * e, 0)
    }

    pub fn nodelet_of_element(&self, e: u64) -> NodeletId {
        self.element_addr(e).nodelet_id
    }

    /// Sum of payloads along chain `t` (payloads are element ids).
    pub fn expected_sum(&self, t: usize) -> i64 {
        let m = self.chain_len();
        let lo = t as u64 * m;
        let hi = lo + m;
        ((hi * (hi - 1) / 2) - (lo * lo.saturating_sub(1) / 2)) as i64
    }

    /// Inter-nodelet transitions when walking every chain in order.
    pub fn crossings(&self) -> u64 {
        let m = self.chain_len() as usize;
        self.order
            .chunks(m)
            .map(|c| {
                c.windows(2)
                    .filter(|w| self.nodelet_of_element(w[0]) != self.nodelet_of_element(w[1]))
                    .count() as u64
            })
            .sum()
    }
}

/// Lays out `n` elements (rounded up to a multiple of `threads × block`)
/// and links one chain per thread according to `permutation`.
pub fn build_chase_list(
    machine: &mut Machine,
    n: u64,
    block_size: u64,
    permutation: Permutation,
    seed: u64,
    threads: usize,
) -> Result<ChaseList, KernelError> {
    if threads == 0 {
        return Err(KernelError::NoThreads);
    }
    if block_size == 0 {
        return Err(KernelError::ZeroBlock);
    }
    let unit = threads as u64 * block_size;
    let n = n.max(1).div_ceil(unit) * unit;
    let share = n / machine.total_nodelets() as u64;
    if block_size > share {
        return Err(KernelError::BlockTooLarge {
            block: block_size,
            share,
        });
    }
    let storage = alloc_striped(machine, 2 * n, 2 * block_size)?;
    let m = n / threads as u64;
    let blocks_per_chain = (m / block_size) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = Vec::with_capacity(n as usize);
    let mut heads = Vec::with_capacity(threads);
    for t in 0..threads as u64 {
        let first_block = t * m / block_size;
        let mut blocks: Vec<u64> = (0..blocks_per_chain as u64).map(|b| first_block + b).collect();
        if permutation.shuffles_blocks() {
            blocks.shuffle(&mut rng);
        }
        let start = order.len();
        for b in blocks {
            let mut elems: Vec<u64> = (b * block_size..(b + 1) * block_size).collect();
            if permutation.shuffles_within() {
                elems.shuffle(&mut rng);
            }
            order.extend(elems);
        }
        let chain = &order[start..];
        for (k, &e) in chain.iter().enumerate() {
            let here = storage.resolve_unchecked(2 * e, 0);
            let next = chain
                .get(k + 1)
                .map_or(NULL_POINTER, |&nx| storage.resolve_unchecked(2 * nx, 0).to_word());
            machine.write(here, e as Word);
            machine.write(here.offset(1), next);
        }
        heads.push(storage.resolve_unchecked(2 * chain[0], 0));
    }
    Ok(ChaseList {
        n_elements: n,
        block_size,
        permutation,
        seed,
        threads,
        storage,
        heads,
        order,
    })
}

struct Chase {
    results: Allocation,
    schedule: IterSchedule,
    limit: Word,
}

// r0 = current element address, r1 = sum, r2 = count, r3 = payload,
// r4 = next, r5 = thread index. pc walks the iteration slots; pc == len is
// the accumulate step, then two result stores.
impl ThreadProgram for Chase {
    fn step(&self, regs: &mut Registers, _here: NodeletId) -> Op {
        let len = self.schedule.len();
        let t = regs.r[5] as u64;
        if regs.pc == len {
            regs.r[1] = regs.r[1].wrapping_add(regs.r[3]);
            regs.r[2] += 1;
            if regs.r[4] != NULL_POINTER && regs.r[2] < self.limit {
                regs.r[0] = regs.r[4];
                regs.pc = 0;
            } else {
                regs.pc += 1;
                return Op::Store {
                    addr: self.results.resolve_unchecked(2 * t, 0),
                    value: regs.r[1],
                };
            }
        }
        if regs.pc == len + 1 {
            regs.pc += 1;
            return Op::Store {
                addr: self.results.resolve_unchecked(2 * t + 1, 0),
                value: regs.r[2],
            };
        }
        if regs.pc > len {
            return Op::End;
        }
        let cur = GlobalAddress::from_word(regs.r[0]).expect("chain pointer is valid");
        let slot = self.schedule.slots[regs.pc as usize];
        regs.pc += 1;
        match slot {
            Slot::Compute(n) => Op::Compute(n),
            Slot::Mem(0) => Op::Load { addr: cur, dst: 3 },
            Slot::Mem(_) => Op::Load {
                addr: cur.offset(1),
                dst: 4,
            },
        }
    }

    fn name(&self) -> &str {
        "chase"
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChaseConfig {
    pub n: u64,
    pub block_size: u64,
    pub permutation: Permutation,
    pub seed: u64,
    pub threads: usize,
    pub strategy: SpawnStrategy,
    pub cost_model: KernelCostModel,
    pub deadline_cycles: u64,
}

impl Default for ChaseConfig {
    fn default() -> Self {
        Self {
            n: 1 << 20,
            block_size: 64,
            permutation: Permutation::FullBlockShuffle,
            seed: 0,
            threads: 640,
            strategy: SpawnStrategy::RecursiveRemoteSpawn,
            cost_model: KernelCostModel::CHASE,
            deadline_cycles: DEFAULT_DEADLINE_CYCLES,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChaseResult {
    pub stats: SimStats,
    pub n_elements: u64,
    pub sums: Vec<i64>,
    pub counts: Vec<i64>,
    pub verified: bool,
}

impl ChaseResult {
    pub fn migrations_per_element(&self) -> f64 {
        self.stats.total_migrations() as f64 / self.n_elements as f64
    }
}

/// Walks every chain of `list` with one thread each and checks the sums.
pub fn run_chase(
    mut machine: Machine,
    list: &ChaseList,
    cost_model: KernelCostModel,
    strategy: SpawnStrategy,
    deadline_cycles: u64,
) -> Result<ChaseResult, KernelError> {
    cost_model.validate()?;
    let results = alloc_striped(&mut machine, 2 * list.threads as u64, 2)?;
    let m = list.chain_len();
    let program = Arc::new(Chase {
        results: results.clone(),
        schedule: cost_model.schedule(2),
        limit: m as Word + 1,
    });
    let homes: Vec<NodeletId> = list.heads.iter().map(|h| h.nodelet_id).collect();
    let args: Vec<Registers> = list
        .heads
        .iter()
        .enumerate()
        .map(|(t, h)| Registers::with_args(&[h.to_word(), 0, 0, 0, 0, t as Word]))
        .collect();
    let mut sim = Simulation::new(machine);
    SpawnPlan::new(strategy, &homes, 0).launch(&mut sim, program, args)?;
    let stats = sim.run_until_idle(deadline_cycles)?;
    if stats.timed_out {
        return Err(KernelError::Timeout(deadline_cycles));
    }
    let out = results.read_all(sim.machine(), 0);
    let sums: Vec<i64> = out.iter().step_by(2).copied().collect();
    let counts: Vec<i64> = out.iter().skip(1).step_by(2).copied().collect();
    if let Some(t) = counts.iter().position(|&c| c != m as i64) {
        return Err(KernelError::BrokenChain {
            thread: t,
            visited: counts[t].max(0) as u64,
            expected: m,
        });
    }
    let verified = sums.iter().enumerate().all(|(t, &s)| s == list.expected_sum(t));
    Ok(ChaseResult {
        stats,
        n_elements: list.n_elements,
        sums,
        counts,
        verified,
    })
}

/// Builds a list on a fresh machine and chases it.
pub fn chase(config: &MachineConfig, cc: &ChaseConfig) -> Result<ChaseResult, KernelError> {
    let mut machine = Machine::new(config.clone())?;
    let list = build_chase_list(&mut machine, cc.n, cc.block_size, cc.permutation, cc.seed, cc.threads)?;
    run_chase(machine, &list, cc.cost_model, cc.strategy, cc.deadline_cycles)
}
