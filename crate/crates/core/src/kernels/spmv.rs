use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::csr::CsrMatrix;
use super::spawn::{partition, SpawnPlan, SpawnStrategy};
use super::{IterSchedule, KernelCostModel, KernelError, Slot, DEFAULT_DEADLINE_CYCLES};
use crate::engine::{Op, Registers, SimStats, Simulation, SpawnMode, ThreadProgram};
use crate::machine::{Machine, MachineConfig, NodeletId, Word};
use crate::memalloc::{alloc_1d_striped, alloc_2d_rows, alloc_local, alloc_replicated, Allocation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpmvLayout {
    /// Every array on nodelet 0.
    Local,
    /// `row_ptr`, `col` and `V` striped word by word; `y` on nodelet 0.
    Striped1D,
    /// Each row's `col` and `V` entries co-located with the row.
    Rows2D,
}

impl SpmvLayout {
    pub const ALL: [SpmvLayout; 3] = [SpmvLayout::Local, SpmvLayout::Striped1D, SpmvLayout::Rows2D];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Local => "local",
            Self::Striped1D => "1d",
            Self::Rows2D => "2d",
        }
    }

    pub fn default_strategy(self) -> SpawnStrategy {
        match self {
            Self::Local => SpawnStrategy::RecursiveSpawn,
            Self::Striped1D | Self::Rows2D => SpawnStrategy::RecursiveRemoteSpawn,
        }
    }
}

impl fmt::Display for SpmvLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SpmvLayout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "local" => Ok(Self::Local),
            "1d" | "striped1d" | "striped_1d" => Ok(Self::Striped1D),
            "2d" | "rows2d" | "rows_2d" => Ok(Self::Rows2D),
            _ => Err(format!("unknown layout `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpmvConfig {
    pub layout: SpmvLayout,
    pub threads: usize,
    /// `None` picks the layout's natural strategy.
    pub strategy: Option<SpawnStrategy>,
    pub cost_model: KernelCostModel,
    pub deadline_cycles: u64,
}

impl Default for SpmvConfig {
    fn default() -> Self {
        Self {
            layout: SpmvLayout::Rows2D,
            threads: 256,
            strategy: None,
            cost_model: KernelCostModel::SPMV,
            deadline_cycles: DEFAULT_DEADLINE_CYCLES,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpmvResult {
    pub stats: SimStats,
    pub y: Vec<Word>,
    pub verified: bool,
}

/// How the row-level loop finishes a row.
#[derive(Debug, Clone, Copy)]
enum RowSink {
    Store,
    RemoteAdd,
    /// Store into the copy local to the row's nodelet.
    StoreLocalCopy,
}

struct SpmvWorker {
    /// Row bounds: the pair (start, end) of row `r` at `bounds[bi(r)]`,
    /// `bounds[bi(r) + 1]`.
    bounds: Allocation,
    pair_bounds: bool,
    col: Allocation,
    val: Allocation,
    x: Allocation,
    y: Allocation,
    sink: RowSink,
    schedule: IterSchedule,
}

// Registers: r0 row, r1 row limit, r2 k, r3 k limit, r4 acc, r5 col,
// r6 value, r7 x[col], r8 row end, r9 row stride, r10 row start, r11 hi.
const ROW: u32 = 0;
const ROW_END: u32 = 1;
const ROW_SETUP: u32 = 2;
const LOOP: u32 = 3;
const FINISH: u32 = 4;
const ACCUMULATE: u32 = 5;
const SLOTS: u32 = 10;

impl SpmvWorker {
    fn bound_index(&self, r: u64, second: bool) -> u64 {
        if self.pair_bounds {
            2 * r + u64::from(second)
        } else {
            r + u64::from(second)
        }
    }
}

impl ThreadProgram for SpmvWorker {
    fn step(&self, regs: &mut Registers, here: NodeletId) -> Op {
        loop {
            match regs.pc {
                ROW => {
                    if regs.r[0] >= regs.r[1] || regs.r[2] >= regs.r[3] {
                        return Op::End;
                    }
                    regs.pc = ROW_END;
                    let r = regs.r[0] as u64;
                    return Op::Load {
                        addr: self.bounds.resolve_unchecked(self.bound_index(r, false), 0),
                        dst: 10,
                    };
                }
                ROW_END => {
                    regs.pc = ROW_SETUP;
                    let r = regs.r[0] as u64;
                    return Op::Load {
                        addr: self.bounds.resolve_unchecked(self.bound_index(r, true), 0),
                        dst: 8,
                    };
                }
                ROW_SETUP => {
                    regs.r[2] = regs.r[2].max(regs.r[10]);
                    regs.r[11] = regs.r[8].min(regs.r[3]);
                    regs.r[4] = 0;
                    regs.pc = LOOP;
                }
                LOOP => {
                    regs.pc = if regs.r[2] < regs.r[11] { SLOTS } else { FINISH };
                }
                ACCUMULATE => {
                    regs.r[4] = regs.r[4].wrapping_add(regs.r[6].wrapping_mul(regs.r[7]));
                    regs.r[2] += 1;
                    regs.pc = LOOP;
                }
                FINISH => {
                    let r = regs.r[0] as u64;
                    let acc = regs.r[4];
                    regs.r[0] += regs.r[9];
                    regs.pc = ROW;
                    return match self.sink {
                        RowSink::Store => Op::Store {
                            addr: self.y.resolve_unchecked(r, 0),
                            value: acc,
                        },
                        RowSink::RemoteAdd => Op::RemoteAdd {
                            addr: self.y.resolve_unchecked(r, 0),
                            value: acc,
                        },
                        RowSink::StoreLocalCopy => Op::Store {
                            addr: self.y.resolve_unchecked(r, here),
                            value: acc,
                        },
                    };
                }
                pc => {
                    let s = pc - SLOTS;
                    regs.pc = if s + 1 == self.schedule.len() { ACCUMULATE } else { pc + 1 };
                    let k = regs.r[2] as u64;
                    return match self.schedule.slots[s as usize] {
                        Slot::Compute(n) => Op::Compute(n),
                        Slot::Mem(0) => Op::Load {
                            addr: self.col.resolve_unchecked(k, 0),
                            dst: 5,
                        },
                        Slot::Mem(1) => Op::Load {
                            addr: self.val.resolve_unchecked(k, 0),
                            dst: 6,
                        },
                        Slot::Mem(_) => Op::Load {
                            addr: self.x.resolve_unchecked(regs.r[5] as u64, here),
                            dst: 7,
                        },
                    };
                }
            }
        }
    }

    fn name(&self) -> &str {
        "spmv"
    }
}

/// Copies the rows a nodelet owns from its local `y` copy into copy 0.
struct Reducer {
    y: Allocation,
    rows: u64,
    stride: u64,
}

// r0 = next row; pc 0 loads, pc 1 stores
impl ThreadProgram for Reducer {
    fn step(&self, regs: &mut Registers, here: NodeletId) -> Op {
        let r = regs.r[0] as u64;
        if r >= self.rows {
            return Op::End;
        }
        if regs.pc == 0 {
            regs.pc = 1;
            Op::Load {
                addr: self.y.resolve_unchecked(r, here),
                dst: 1,
            }
        } else {
            regs.pc = 0;
            regs.r[0] += self.stride as Word;
            Op::Store {
                addr: self.y.resolve_unchecked(r, 0),
                value: regs.r[1],
            }
        }
    }

    fn name(&self) -> &str {
        "spmv_reduce"
    }
}

fn to_words(v: &[usize]) -> Vec<Word> {
    v.iter().map(|&x| x as Word).collect()
}

/// Computes `y = A·x` on a fresh machine with the requested layout and
/// checks it against a sequential product.
pub fn spmv(config: &MachineConfig, a: &CsrMatrix, x: &[Word], sc: &SpmvConfig) -> Result<SpmvResult, KernelError> {
    sc.cost_model.validate()?;
    a.validate()?;
    if x.len() != a.n_cols {
        return Err(KernelError::DimensionMismatch {
            cols: a.n_cols,
            len: x.len(),
        });
    }
    if sc.threads == 0 {
        return Err(KernelError::NoThreads);
    }
    let mut machine = Machine::new(config.clone())?;
    let nodelets = machine.total_nodelets();
    let rows = a.n_rows as u64;
    let nnz = a.nnz() as u64;
    let threads = sc.threads;

    let xs = alloc_replicated(&mut machine, a.n_cols as u64)?;
    xs.fill_from(&mut machine, x)?;

    let (bounds, pair_bounds, col, val, y, sink) = match sc.layout {
        SpmvLayout::Local => (
            alloc_local(&mut machine, 0, rows + 1)?,
            false,
            alloc_local(&mut machine, 0, nnz)?,
            alloc_local(&mut machine, 0, nnz)?,
            alloc_local(&mut machine, 0, rows)?,
            RowSink::Store,
        ),
        SpmvLayout::Striped1D => (
            alloc_1d_striped(&mut machine, rows + 1)?,
            false,
            alloc_1d_striped(&mut machine, nnz)?,
            alloc_1d_striped(&mut machine, nnz)?,
            alloc_local(&mut machine, 0, rows)?,
            RowSink::RemoteAdd,
        ),
        SpmvLayout::Rows2D => {
            let lens: Vec<u64> = (0..a.n_rows).map(|r| a.row_len(r) as u64).collect();
            (
                alloc_2d_rows(&mut machine, &vec![2; a.n_rows])?,
                true,
                alloc_2d_rows(&mut machine, &lens)?,
                alloc_2d_rows(&mut machine, &lens)?,
                alloc_replicated(&mut machine, rows)?,
                RowSink::StoreLocalCopy,
            )
        }
    };
    if pair_bounds {
        for r in 0..a.n_rows {
            bounds.write_all(&mut machine, 2 * r as u64, a.row_ptr[r] as Word)?;
            bounds.write_all(&mut machine, 2 * r as u64 + 1, a.row_ptr[r + 1] as Word)?;
        }
    } else {
        bounds.fill_from(&mut machine, &to_words(&a.row_ptr))?;
    }
    col.fill_from(&mut machine, &to_words(&a.col_idx))?;
    val.fill_from(&mut machine, &a.values)?;

    // worker arguments: row, row limit, k, k limit, ..., stride in r9
    let mut args = Vec::new();
    let mut homes = Vec::new();
    let push = |args: &mut Vec<Registers>, row: u64, row_lim: u64, k: u64, k_lim: u64, stride: u64| {
        let mut r = Registers::with_args(&[row as Word, row_lim as Word, k as Word, k_lim as Word]);
        r.r[9] = stride as Word;
        args.push(r);
    };
    match sc.layout {
        SpmvLayout::Local => {
            for rg in partition(rows, threads) {
                push(&mut args, rg.start, rg.end, 0, Word::MAX as u64, 1);
                homes.push(0);
            }
        }
        SpmvLayout::Striped1D => {
            for rg in partition(nnz, threads) {
                let row = a.row_ptr.partition_point(|&p| p as u64 <= rg.start).saturating_sub(1) as u64;
                push(&mut args, row, rows, rg.start, rg.end, 1);
                homes.push(if nnz == 0 { 0 } else { col.nodelet_of(rg.start.min(nnz - 1), 0) });
            }
        }
        SpmvLayout::Rows2D => {
            let n = nodelets as u64;
            // every nodelet holding rows needs at least one worker
            let active = nodelets.min(a.n_rows);
            let threads = threads.max(active);
            if threads != sc.threads {
                log::warn!("2d layout raised thread count from {} to {}", sc.threads, threads);
            }
            for (k, workers) in partition(threads as u64, active).into_iter().enumerate() {
                let k = k as u64;
                let owned = rows.saturating_sub(k).div_ceil(n);
                for rg in partition(owned, (workers.end - workers.start) as usize) {
                    push(&mut args, k + rg.start * n, k + rg.end * n, 0, Word::MAX as u64, n);
                    homes.push(k as NodeletId);
                }
            }
        }
    }

    let worker = Arc::new(SpmvWorker {
        bounds,
        pair_bounds,
        col,
        val,
        x: xs,
        y: y.clone(),
        sink,
        schedule: sc.cost_model.schedule(3),
    });
    let strategy = sc.strategy.unwrap_or(sc.layout.default_strategy());
    let mut sim = Simulation::new(machine);
    SpawnPlan::new(strategy, &homes, 0).launch(&mut sim, worker, args)?;
    let mut stats = sim.run_until_idle(sc.deadline_cycles)?;

    if sc.layout == SpmvLayout::Rows2D && !stats.timed_out && nodelets > 1 {
        let reducer = Arc::new(Reducer {
            y: y.clone(),
            rows,
            stride: nodelets as u64,
        });
        for k in 1..nodelets.min(a.n_rows) {
            sim.spawn_thread(reducer.clone(), Registers::with_args(&[k as Word]), k, SpawnMode::Remote)?;
        }
        stats = sim.run_until_idle(sc.deadline_cycles)?;
    }
    if stats.timed_out {
        return Err(KernelError::Timeout(sc.deadline_cycles));
    }
    let out = y.read_all(sim.machine(), 0);
    let verified = out == a.matvec(x);
    Ok(SpmvResult {
        stats,
        y: out,
        verified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{laplacian_csr, LaplacianSpec};

    #[test]
    fn laplacian_all_layouts() {
        let a = laplacian_csr(LaplacianSpec { n: 4 }).unwrap();
        let x: Vec<Word> = (0..16).collect();
        let cfg = MachineConfig::single_node();
        for layout in SpmvLayout::ALL {
            for threads in [1, 3, 8, 16] {
                let sc = SpmvConfig {
                    layout,
                    threads,
                    ..SpmvConfig::default()
                };
                let r = spmv(&cfg, &a, &x, &sc).unwrap();
                assert!(r.verified, "{layout} with {threads} threads");
            }
        }
    }

    #[test]
    fn local_uses_one_channel() {
        let a = laplacian_csr(LaplacianSpec { n: 4 }).unwrap();
        let sc = SpmvConfig {
            layout: SpmvLayout::Local,
            threads: 4,
            ..SpmvConfig::default()
        };
        let r = spmv(&MachineConfig::single_node(), &a, &[1; 16], &sc).unwrap();
        assert!(r.stats.nodelets[1..].iter().all(|n| n.channel_busy_cycles == 0));
        assert_eq!(r.stats.total_migrations(), 0);
    }

    #[test]
    fn dimension_mismatch() {
        let a = laplacian_csr(LaplacianSpec { n: 2 }).unwrap();
        let err = spmv(&MachineConfig::single_node(), &a, &[1; 3], &SpmvConfig::default()).unwrap_err();
        assert!(matches!(err, KernelError::DimensionMismatch { cols: 4, len: 3 }));
    }
}
