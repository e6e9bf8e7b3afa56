//! Thread spawn strategies.
//!
//! Local strategies create every worker on the launching nodelet (serially
//! or through a binary tree) and let workers migrate to their data. Remote
//! strategies first place one level-1 thread on each nodelet that hosts
//! workers, serially or through a binary tree across nodelets; each level-1
//! thread then creates its nodelet's workers locally and becomes the first
//! of them.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::engine::{Op, Registers, SimError, Simulation, SpawnMode, ThreadId, ThreadProgram, NUM_REGS};
use crate::machine::{NodeletId, Word};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpawnStrategy {
    SerialSpawn,
    RecursiveSpawn,
    SerialRemoteSpawn,
    RecursiveRemoteSpawn,
}

impl SpawnStrategy {
    pub const ALL: [SpawnStrategy; 4] = [
        SpawnStrategy::SerialSpawn,
        SpawnStrategy::RecursiveSpawn,
        SpawnStrategy::SerialRemoteSpawn,
        SpawnStrategy::RecursiveRemoteSpawn,
    ];

    pub fn is_remote(self) -> bool {
        matches!(self, Self::SerialRemoteSpawn | Self::RecursiveRemoteSpawn)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SerialSpawn => "serial_spawn",
            Self::RecursiveSpawn => "recursive_spawn",
            Self::SerialRemoteSpawn => "serial_remote_spawn",
            Self::RecursiveRemoteSpawn => "recursive_remote_spawn",
        }
    }
}

impl fmt::Display for SpawnStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SpawnStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| format!("unknown spawn strategy `{s}`"))
    }
}

/// Splits `len` units into `parts` contiguous, balanced ranges.
pub fn partition(len: u64, parts: usize) -> Vec<std::ops::Range<u64>> {
    let p = parts as u64;
    (0..p).map(|w| (w * len / p)..((w + 1) * len / p)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpawnKind {
    /// Creates a level-1 thread on a (possibly different) nodelet.
    Level1,
    /// Creates a thread on the spawner's own nodelet.
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SpawnEdge {
    pub from: NodeletId,
    pub to: NodeletId,
    pub kind: SpawnKind,
}

/// Workers sharing a start nodelet, as a contiguous range of worker ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Group {
    nodelet: NodeletId,
    first: usize,
    end: usize,
}

/// Who creates whom. `homes[w]` is where worker `w` starts; for local
/// strategies every worker starts on the launch nodelet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpawnPlan {
    pub strategy: SpawnStrategy,
    pub launch: NodeletId,
    pub homes: Vec<NodeletId>,
    pub edges: Vec<SpawnEdge>,
    groups: Vec<Group>,
}

// Role tags kept in the last register of tree threads; workers see 0 there.
const ROLE: usize = NUM_REGS - 1;
const WORKER: Word = 0;
const SERIAL_MAIN: Word = 1;
const LOCAL_TREE: Word = 2;
const SERIAL_REMOTE_MAIN: Word = 3;
const LEVEL1_SERIAL: Word = 4;
const REMOTE_TREE: Word = 5;
const REMOTE_MAIN: Word = 6;
const FINISHED: Word = 7;

impl SpawnPlan {
    /// Plans a spawn tree for `data_homes.len()` workers, where
    /// `data_homes[w]` is the nodelet holding the start of worker `w`'s data.
    /// Workers with equal homes must be contiguous.
    pub fn new(strategy: SpawnStrategy, data_homes: &[NodeletId], launch: NodeletId) -> Self {
        let homes: Vec<NodeletId> = if strategy.is_remote() {
            data_homes.to_vec()
        } else {
            vec![launch; data_homes.len()]
        };
        let mut groups: Vec<Group> = Vec::new();
        for (w, &h) in homes.iter().enumerate() {
            match groups.last_mut() {
                Some(g) if g.nodelet == h => g.end = w + 1,
                _ => groups.push(Group {
                    nodelet: h,
                    first: w,
                    end: w + 1,
                }),
            }
        }
        let mut plan = Self {
            strategy,
            launch,
            homes,
            edges: Vec::new(),
            groups,
        };
        plan.edges = plan.enumerate_edges();
        plan
    }

    pub fn workers(&self) -> usize {
        self.homes.len()
    }

    pub fn count(&self, kind: SpawnKind) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count()
    }

    /// Edges that cross nodelets.
    pub fn remote_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.from != e.to).count()
    }

    /// Symbolic walk of the same role machine the threads execute.
    fn enumerate_edges(&self) -> Vec<SpawnEdge> {
        let mut edges = Vec::new();
        let local = |edges: &mut Vec<SpawnEdge>, at: NodeletId, n: usize| {
            for _ in 0..n {
                edges.push(SpawnEdge {
                    from: at,
                    to: at,
                    kind: SpawnKind::Local,
                });
            }
        };
        let l1 = |edges: &mut Vec<SpawnEdge>, from: NodeletId, to: NodeletId| {
            edges.push(SpawnEdge {
                from,
                to,
                kind: SpawnKind::Level1,
            })
        };
        let w = self.workers();
        match self.strategy {
            SpawnStrategy::SerialSpawn => local(&mut edges, self.launch, w),
            // binary tree whose root is the main thread: one spawn per extra worker
            SpawnStrategy::RecursiveSpawn => local(&mut edges, self.launch, w.saturating_sub(1)),
            SpawnStrategy::SerialRemoteSpawn => {
                for g in &self.groups {
                    l1(&mut edges, self.launch, g.nodelet);
                    local(&mut edges, g.nodelet, g.end - g.first - 1);
                }
            }
            SpawnStrategy::RecursiveRemoteSpawn => {
                fn tree(plan: &SpawnPlan, edges: &mut Vec<SpawnEdge>, lo: usize, hi: usize) {
                    if hi - lo > 1 {
                        let mid = (lo + hi) / 2;
                        edges.push(SpawnEdge {
                            from: plan.groups[lo].nodelet,
                            to: plan.groups[mid].nodelet,
                            kind: SpawnKind::Level1,
                        });
                        tree(plan, edges, mid, hi);
                        tree(plan, edges, lo, mid);
                    } else {
                        let g = plan.groups[lo];
                        for _ in 0..(g.end - g.first - 1) {
                            edges.push(SpawnEdge {
                                from: g.nodelet,
                                to: g.nodelet,
                                kind: SpawnKind::Local,
                            });
                        }
                    }
                }
                if !self.groups.is_empty() {
                    l1(&mut edges, self.launch, self.groups[0].nodelet);
                    tree(self, &mut edges, 0, self.groups.len());
                }
            }
        }
        edges
    }

    /// Launches the main thread of the tree on the host. Each worker runs
    /// `worker` starting from `worker_args[w]`; workers must leave the last
    /// register zero.
    pub fn launch(
        &self,
        sim: &mut Simulation,
        worker: Arc<dyn ThreadProgram>,
        worker_args: Vec<Registers>,
    ) -> Result<ThreadId, SimError> {
        assert_eq!(worker_args.len(), self.workers(), "one argument set per worker");
        assert!(worker_args.iter().all(|r| r.r[ROLE] == WORKER));
        let tree = Arc::new(SpawnTree(Arc::new(TreeData {
            worker,
            worker_args,
            groups: self.groups.clone(),
        })));
        let mut regs = Registers::default();
        regs.r[ROLE] = match self.strategy {
            SpawnStrategy::SerialSpawn => SERIAL_MAIN,
            SpawnStrategy::RecursiveSpawn => {
                regs.r[0] = 0;
                regs.r[1] = self.workers() as Word;
                LOCAL_TREE
            }
            SpawnStrategy::SerialRemoteSpawn => SERIAL_REMOTE_MAIN,
            SpawnStrategy::RecursiveRemoteSpawn => REMOTE_MAIN,
        };
        sim.spawn_thread(tree, regs, self.launch, SpawnMode::Local)
    }
}

struct TreeData {
    worker: Arc<dyn ThreadProgram>,
    worker_args: Vec<Registers>,
    groups: Vec<Group>,
}

/// Thread program that runs the spawn roles and then the worker code.
#[derive(Clone)]
struct SpawnTree(Arc<TreeData>);

impl SpawnTree {
    fn spawn_role(&self, target: NodeletId, role: Word, a: Word, b: Word) -> Op {
        let mut regs = Registers::default();
        regs.r[ROLE] = role;
        regs.r[0] = a;
        regs.r[1] = b;
        Op::spawn(target, Arc::new(self.clone()), regs)
    }

    fn spawn_worker(&self, target: NodeletId, w: usize) -> Op {
        Op::spawn(target, self.0.worker.clone(), self.0.worker_args[w])
    }

    fn become_worker(&self, regs: &mut Registers, w: usize, here: NodeletId) -> Op {
        *regs = self.0.worker_args[w];
        self.0.worker.step(regs, here)
    }

    /// Local binary tree over workers `[lo, hi)`; the caller keeps `lo`.
    fn local_tree(&self, regs: &mut Registers, here: NodeletId) -> Op {
        let (lo, hi) = (regs.r[0] as usize, regs.r[1] as usize);
        if hi - lo <= 1 {
            return self.become_worker(regs, lo, here);
        }
        let mid = (lo + hi) / 2;
        regs.r[1] = mid as Word;
        self.spawn_role(here, LOCAL_TREE, mid as Word, hi as Word)
    }
}

impl ThreadProgram for SpawnTree {
    fn step(&self, regs: &mut Registers, here: NodeletId) -> Op {
        let data = &self.0;
        match regs.r[ROLE] {
            WORKER => data.worker.step(regs, here),
            SERIAL_MAIN => {
                let w = regs.r[0] as usize;
                if w < data.worker_args.len() {
                    regs.r[0] += 1;
                    self.spawn_worker(here, w)
                } else {
                    Op::End
                }
            }
            LOCAL_TREE => self.local_tree(regs, here),
            SERIAL_REMOTE_MAIN => {
                let g = regs.r[0] as usize;
                if g < data.groups.len() {
                    regs.r[0] += 1;
                    self.spawn_role(data.groups[g].nodelet, LEVEL1_SERIAL, g as Word, 1)
                } else {
                    Op::End
                }
            }
            LEVEL1_SERIAL => {
                let g = data.groups[regs.r[0] as usize];
                let j = regs.r[1] as usize;
                if g.first + j < g.end {
                    regs.r[1] += 1;
                    self.spawn_worker(here, g.first + j)
                } else {
                    self.become_worker(regs, g.first, here)
                }
            }
            REMOTE_MAIN => {
                if data.groups.is_empty() {
                    return Op::End;
                }
                regs.r[ROLE] = FINISHED;
                self.spawn_role(data.groups[0].nodelet, REMOTE_TREE, 0, data.groups.len() as Word)
            }
            REMOTE_TREE => {
                let (lo, hi) = (regs.r[0] as usize, regs.r[1] as usize);
                if hi - lo > 1 {
                    let mid = (lo + hi) / 2;
                    regs.r[1] = mid as Word;
                    self.spawn_role(data.groups[mid].nodelet, REMOTE_TREE, mid as Word, hi as Word)
                } else {
                    let g = data.groups[lo];
                    regs.r[ROLE] = LOCAL_TREE;
                    regs.r[0] = g.first as Word;
                    regs.r[1] = g.end as Word;
                    self.local_tree(regs, here)
                }
            }
            _ => Op::End,
        }
    }

    fn name(&self) -> &str {
        "spawn_tree"
    }
}
