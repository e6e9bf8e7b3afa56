use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::sync::Arc;

use thiserror::Error;

use super::program::{Op, Registers, SpawnRequest, ThreadProgram};
use super::stats::SimStats;
use crate::machine::{GlobalAddress, Machine, MachineConfig, NodeletId, Word};

pub type ThreadId = usize;

/// Where the host places a thread it launches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpawnMode {
    /// Context is created directly on the target nodelet at no network cost.
    Local,
    /// Context is shipped from nodelet 0 to the target as a spawn message.
    Remote,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("spawn target nodelet {target} out of range ({total} nodelets)")]
    BadSpawnTarget { target: NodeletId, total: usize },
    #[error("thread {thread} accessed unallocated address {addr}")]
    BadAddress { thread: ThreadId, addr: GlobalAddress },
    #[error("load destination register {reg} out of range")]
    BadRegister { reg: u8 },
    #[error("no threads to run")]
    NoThreads,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThreadStatus {
    /// Resident on a core, waiting for an issue slot.
    Ready,
    /// Resident, waiting on memory or the issue interval.
    Blocked,
    /// Arrived but waiting for a free thread slot on a core.
    Queued,
    /// In flight between nodelets (or being created).
    Migrating,
    Done,
}

/// A migratable thread context.
#[derive(Clone)]
pub struct ThreadContext {
    pub id: ThreadId,
    pub program: Arc<dyn ThreadProgram>,
    pub regs: Registers,
    pub nodelet: NodeletId,
    pub status: ThreadStatus,
    core: usize,
    compute_left: u32,
    pending_load: Option<(GlobalAddress, u8)>,
}

impl std::fmt::Debug for ThreadContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ThreadContext")
            .field("id", &self.id)
            .field("program", &self.program.name())
            .field("nodelet", &self.nodelet)
            .field("status", &self.status)
            .field("regs", &self.regs)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    Wake(ThreadId),
    Arrive(ThreadId, NodeletId),
    MemWrite { addr: GlobalAddress, value: Word, add: bool },
}

#[derive(Debug, Default)]
struct Core {
    ready: VecDeque<ThreadId>,
    /// Threads sitting out the issue interval; times are non-decreasing.
    cooling: VecDeque<(u64, ThreadId)>,
    waiting: VecDeque<ThreadId>,
    resident: usize,
    busy_until: u64,
}

/// One deterministic simulation instance.
///
/// Threads are launched with [`Simulation::spawn_thread`] and run with
/// [`Simulation::run_until_idle`]. Runs can be chained: threads launched
/// after a run continue from the current simulated time and the statistics
/// accumulate.
pub struct Simulation {
    machine: Machine,
    cfg: MachineConfig,
    threads: Vec<ThreadContext>,
    cores: Vec<Core>,
    channel_free: Vec<u64>,
    port_free: Vec<u64>,
    link_free: Vec<u64>,
    events: BinaryHeap<Reverse<(u64, u64, Event)>>,
    seq: u64,
    now: u64,
    horizon: u64,
    live: usize,
    stats: SimStats,
    channel_cycles: u64,
    xfer_cycles: u64,
    write_msg_cycles: u64,
}

impl Simulation {
    pub fn new(machine: Machine) -> Self {
        let cfg = machine.config().clone();
        let n = cfg.total_nodelets();
        let cores = (0..n * cfg.cores_per_nodelet)
            .map(|_| Core::default())
            .collect();
        let stats = SimStats::new(n, cfg.core_freq_hz, cfg.word_bytes);
        Self {
            channel_cycles: cfg.channel_service_cycles(),
            xfer_cycles: cfg.context_transfer_cycles(),
            write_msg_cycles: cfg.cycles_for(2 * cfg.word_bytes, cfg.network_bw_bytes_per_sec),
            machine,
            threads: Vec::new(),
            cores,
            channel_free: vec![0; n],
            port_free: vec![0; n],
            link_free: vec![0; cfg.nodes * cfg.nodes],
            events: BinaryHeap::new(),
            seq: 0,
            now: 0,
            horizon: 0,
            live: 0,
            stats,
            cfg,
        }
    }

    pub fn machine(&self) -> &Machine {
        &self.machine
    }

    pub fn into_machine(self) -> Machine {
        self.machine
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn thread(&self, id: ThreadId) -> Option<&ThreadContext> {
        self.threads.get(id)
    }

    pub fn threads(&self) -> &[ThreadContext] {
        &self.threads
    }

    pub fn stats(&self) -> &SimStats {
        &self.stats
    }

    /// Launches a thread from the host. A remote launch is charged one
    /// context transfer from nodelet 0; neither kind counts as a migration.
    pub fn spawn_thread(
        &mut self,
        program: Arc<dyn ThreadProgram>,
        regs: Registers,
        target: NodeletId,
        mode: SpawnMode,
    ) -> Result<ThreadId, SimError> {
        self.check_target(target)?;
        let id = self.new_thread(program, regs, target);
        self.stats.nodelets[target].spawns += 1;
        match mode {
            SpawnMode::Local => self.arrive(id, target),
            SpawnMode::Remote => {
                let at = self.send(0, target, self.now, self.xfer_cycles);
                self.schedule(at, Event::Arrive(id, target));
            }
        }
        Ok(id)
    }

    fn check_target(&self, target: NodeletId) -> Result<(), SimError> {
        if target < self.channel_free.len() {
            Ok(())
        } else {
            Err(SimError::BadSpawnTarget {
                target,
                total: self.channel_free.len(),
            })
        }
    }

    fn new_thread(&mut self, program: Arc<dyn ThreadProgram>, regs: Registers, nodelet: NodeletId) -> ThreadId {
        let id = self.threads.len();
        self.threads.push(ThreadContext {
            id,
            program,
            regs,
            nodelet,
            status: ThreadStatus::Migrating,
            core: usize::MAX,
            compute_left: 0,
            pending_load: None,
        });
        self.live += 1;
        self.stats.thread_count += 1;
        id
    }

    fn schedule(&mut self, at: u64, ev: Event) {
        self.seq += 1;
        self.events.push(Reverse((at, self.seq, ev)));
    }

    /// Ships `cycles` worth of data from `src` to `dst` starting no earlier
    /// than `at`; returns the arrival time. The source port serializes all
    /// outgoing traffic; inter-node traffic also holds the node-pair link.
    fn send(&mut self, src: NodeletId, dst: NodeletId, at: u64, cycles: u64) -> u64 {
        let per_node = self.cfg.nodelets_per_node;
        let (sn, dn) = (src / per_node, dst / per_node);
        let mut start = at.max(self.port_free[src]);
        let latency = if sn == dn {
            self.cfg.intra_node_migration_latency_cycles
        } else {
            let link = sn * self.cfg.nodes + dn;
            start = start.max(self.link_free[link]);
            self.link_free[link] = start + cycles;
            self.cfg.inter_node_migration_latency_cycles
        };
        self.port_free[src] = start + cycles;
        start + cycles + latency
    }

    /// FIFO channel service; returns the cycle the service finishes.
    fn channel(&mut self, nodelet: NodeletId, at: u64) -> u64 {
        let start = at.max(self.channel_free[nodelet]);
        let end = start + self.channel_cycles;
        self.channel_free[nodelet] = end;
        self.stats.nodelets[nodelet].channel_busy_cycles += self.channel_cycles;
        self.horizon = self.horizon.max(end);
        end
    }

    fn arrive(&mut self, id: ThreadId, nodelet: NodeletId) {
        let cpn = self.cfg.cores_per_nodelet;
        let base = nodelet * cpn;
        let core = (base..base + cpn)
            .min_by_key(|&c| self.cores[c].resident)
            .expect("at least one core");
        let t = &mut self.threads[id];
        t.nodelet = nodelet;
        t.core = core;
        let c = &mut self.cores[core];
        if c.resident < self.cfg.max_threads_per_core {
            c.resident += 1;
            t.status = ThreadStatus::Ready;
            c.ready.push_back(id);
        } else {
            t.status = ThreadStatus::Queued;
            c.waiting.push_back(id);
        }
    }

    fn leave_core(&mut self, id: ThreadId) {
        let core = self.threads[id].core;
        let c = &mut self.cores[core];
        c.resident -= 1;
        if let Some(next) = c.waiting.pop_front() {
            c.resident += 1;
            c.ready.push_back(next);
            self.threads[next].status = ThreadStatus::Ready;
        }
    }

    /// Makes `id` ready again at `at`.
    fn ready_at(&mut self, id: ThreadId, at: u64) {
        self.threads[id].status = ThreadStatus::Blocked;
        let core = self.threads[id].core;
        if at == self.now + self.cfg.issue_interval_cycles {
            self.cores[core].cooling.push_back((at, id));
        } else {
            self.schedule(at, Event::Wake(id));
        }
    }

    fn handle(&mut self, ev: Event) {
        match ev {
            Event::Wake(id) => {
                let t = &mut self.threads[id];
                t.status = ThreadStatus::Ready;
                self.cores[t.core].ready.push_back(id);
            }
            Event::Arrive(id, nodelet) => self.arrive(id, nodelet),
            Event::MemWrite { addr, value, add } => {
                self.channel(addr.nodelet_id, self.now);
                self.stats.nodelets[addr.nodelet_id].remote_writes += 1;
                if add {
                    self.machine.fetch_add(addr, value);
                } else {
                    self.machine.write(addr, value);
                }
            }
        }
    }

    fn check_addr(&self, id: ThreadId, addr: GlobalAddress) -> Result<(), SimError> {
        if self.machine.is_valid(addr) {
            Ok(())
        } else {
            Err(SimError::BadAddress { thread: id, addr })
        }
    }

    /// Issues one instruction of thread `id` on its core at the current cycle.
    fn issue(&mut self, id: ThreadId) -> Result<(), SimError> {
        let now = self.now;
        let p = self.cfg.issue_interval_cycles;
        let here = self.threads[id].nodelet;
        let core = self.threads[id].core;
        {
            let ns = &mut self.stats.nodelets[here];
            ns.instructions += 1;
            ns.core_busy_cycles += 1;
        }
        self.cores[core].busy_until = now + 1;

        let op = {
            let t = &mut self.threads[id];
            if t.compute_left > 0 {
                t.compute_left -= 1;
                Op::Compute(1)
            } else if let Some((addr, dst)) = t.pending_load.take() {
                Op::Load { addr, dst }
            } else {
                t.program.step(&mut t.regs, here)
            }
        };

        match op {
            Op::Compute(n) => {
                if n > 1 {
                    self.threads[id].compute_left = n - 1;
                }
                self.ready_at(id, now + p);
            }
            Op::Load { addr, dst } => {
                self.check_addr(id, addr)?;
                if dst as usize >= self.threads[id].regs.r.len() {
                    return Err(SimError::BadRegister { reg: dst });
                }
                if addr.nodelet_id == here {
                    let done = self.channel(here, now) + self.cfg.mem_latency_cycles;
                    self.stats.nodelets[here].loads += 1;
                    self.threads[id].regs.r[dst as usize] = self.machine.read(addr);
                    self.ready_at(id, done.max(now + p));
                } else {
                    let dstn = addr.nodelet_id;
                    self.leave_core(id);
                    let t = &mut self.threads[id];
                    t.pending_load = Some((addr, dst));
                    t.status = ThreadStatus::Migrating;
                    self.stats.nodelets[here].migrations_out += 1;
                    self.stats.nodelets[dstn].migrations_in += 1;
                    let at = self.send(here, dstn, now + 1, self.xfer_cycles);
                    self.schedule(at, Event::Arrive(id, dstn));
                }
            }
            Op::Store { addr, value } | Op::RemoteAdd { addr, value } => {
                let add = matches!(op, Op::RemoteAdd { .. });
                self.check_addr(id, addr)?;
                let target = addr.nodelet_id;
                if target == here {
                    self.channel(here, now);
                    if add {
                        self.stats.nodelets[here].remote_writes += 1;
                        self.machine.fetch_add(addr, value);
                    } else {
                        self.stats.nodelets[here].stores += 1;
                        self.machine.write(addr, value);
                    }
                } else {
                    let at = self.send(here, target, now + 1, self.write_msg_cycles);
                    self.schedule(at, Event::MemWrite { addr, value, add });
                }
                self.ready_at(id, now + p);
            }
            Op::Spawn(req) => {
                let SpawnRequest { target, program, regs } = *req;
                self.check_target(target)?;
                let cost = self.cfg.spawn_cycles.max(1);
                self.cores[core].busy_until = now + cost;
                self.stats.nodelets[here].core_busy_cycles += cost - 1;
                self.horizon = self.horizon.max(now + cost);
                let child = self.new_thread(program, regs, target);
                self.stats.nodelets[target].spawns += 1;
                let built = now + cost;
                let at = if target == here {
                    built
                } else {
                    self.send(here, target, built, self.xfer_cycles)
                };
                self.schedule(at, Event::Arrive(child, target));
                self.ready_at(id, built.max(now + p));
            }
            Op::End => {
                self.leave_core(id);
                self.threads[id].status = ThreadStatus::Done;
                self.live -= 1;
                self.horizon = self.horizon.max(now + 1);
            }
        }
        Ok(())
    }

    /// Advances until every thread is done and all in-flight memory traffic
    /// has drained, or until `deadline_cycles` (absolute) is reached. On
    /// deadline the returned stats are partial and `timed_out` is set.
    pub fn run_until_idle(&mut self, deadline_cycles: u64) -> Result<SimStats, SimError> {
        if self.live == 0 && self.events.is_empty() && self.stats.thread_count == 0 {
            return Err(SimError::NoThreads);
        }
        let mut timed_out = false;
        loop {
            while let Some(Reverse((at, _, _))) = self.events.peek() {
                if *at > self.now {
                    break;
                }
                let Reverse((_, _, ev)) = self.events.pop().expect("peeked");
                self.handle(ev);
            }
            let now = self.now;
            for ci in 0..self.cores.len() {
                let core = &mut self.cores[ci];
                while let Some(&(at, id)) = core.cooling.front() {
                    if at > now {
                        break;
                    }
                    core.cooling.pop_front();
                    core.ready.push_back(id);
                    self.threads[id].status = ThreadStatus::Ready;
                }
                if core.busy_until <= now {
                    if let Some(id) = core.ready.pop_front() {
                        self.issue(id)?;
                    }
                }
            }
            if self.live == 0 && self.events.is_empty() {
                break;
            }
            let mut next = u64::MAX;
            for core in &self.cores {
                if !core.ready.is_empty() {
                    next = next.min(core.busy_until.max(now + 1));
                }
                if let Some(&(at, _)) = core.cooling.front() {
                    next = next.min(at.max(now + 1));
                }
            }
            if let Some(Reverse((at, _, _))) = self.events.peek() {
                next = next.min((*at).max(now + 1));
            }
            if next == u64::MAX {
                // live threads but nothing can ever make progress
                timed_out = true;
                break;
            }
            if next > deadline_cycles {
                self.now = deadline_cycles;
                timed_out = true;
                break;
            }
            self.now = next;
        }
        let end = self.now.max(self.horizon);
        self.stats.finalize(end);
        self.stats.timed_out = timed_out;
        Ok(self.stats.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::program::{Script, ScriptOp};
    use crate::machine::{build_machine, MachineConfig};
    use crate::memalloc::{alloc_local, Allocation};

    fn machine(nodes: usize, per_node: usize) -> Machine {
        build_machine(MachineConfig {
            nodes,
            nodelets_per_node: per_node,
            ..MachineConfig::default()
        })
        .unwrap()
    }

    fn addr(a: &Allocation, i: u64) -> GlobalAddress {
        a.resolve(i, None).unwrap()
    }

    #[test]
    fn compute_only_thread() {
        let m = machine(1, 1);
        let mut sim = Simulation::new(m);
        sim.spawn_thread(Script::new(vec![ScriptOp::Compute(10)]), Registers::default(), 0, SpawnMode::Local)
            .unwrap();
        let s = sim.run_until_idle(u64::MAX).unwrap();
        assert!(s.sim_cycles >= 10);
        assert_eq!(s.bytes_moved, 0);
        assert_eq!(s.nodelets[0].instructions, 11); // 10 compute + END
        assert!(!s.timed_out);
    }

    #[test]
    fn single_local_load() {
        let mut m = machine(1, 8);
        let a = alloc_local(&mut m, 0, 4).unwrap();
        m.write(addr(&a, 2), 99);
        let mut sim = Simulation::new(m);
        let t = sim
            .spawn_thread(Script::new(vec![ScriptOp::Load(addr(&a, 2))]), Registers::default(), 0, SpawnMode::Local)
            .unwrap();
        let s = sim.run_until_idle(u64::MAX).unwrap();
        assert_eq!(s.nodelets[0].loads, 1);
        assert_eq!(s.bytes_moved, 8);
        assert_eq!(s.total_migrations(), 0);
        assert_eq!(sim.thread(t).unwrap().regs.r[0], 99);
    }

    #[test]
    fn remote_load_migrates_once() {
        let mut m = machine(1, 8);
        let a = alloc_local(&mut m, 1, 4).unwrap();
        let mut sim = Simulation::new(m);
        let t = sim
            .spawn_thread(Script::new(vec![ScriptOp::Load(addr(&a, 0))]), Registers::default(), 0, SpawnMode::Local)
            .unwrap();
        let s = sim.run_until_idle(u64::MAX).unwrap();
        assert_eq!(s.total_migrations(), 1);
        assert_eq!(s.nodelets[0].migrations_out, 1);
        assert_eq!(s.nodelets[1].migrations_in, 1);
        assert_eq!(s.nodelets[1].loads, 1);
        assert_eq!(sim.thread(t).unwrap().nodelet, 1);
    }

    #[test]
    fn ping_pong_migrations() {
        // trace oracle: alternating homes, each switch after the first load migrates
        let mut m = machine(1, 2);
        let a0 = alloc_local(&mut m, 0, 1).unwrap();
        let a1 = alloc_local(&mut m, 1, 1).unwrap();
        for k in [1u64, 2, 5, 16] {
            let ops: Vec<ScriptOp> = (0..2 * k)
                .map(|i| ScriptOp::Load(if i % 2 == 0 { addr(&a0, 0) } else { addr(&a1, 0) }))
                .collect();
            let expected = ops
                .windows(2)
                .filter(|w| match (w[0], w[1]) {
                    (ScriptOp::Load(x), ScriptOp::Load(y)) => x.nodelet_id != y.nodelet_id,
                    _ => false,
                })
                .count() as u64;
            let mut sim = Simulation::new(m.clone());
            sim.spawn_thread(Script::new(ops), Registers::default(), 0, SpawnMode::Local)
                .unwrap();
            let s = sim.run_until_idle(u64::MAX).unwrap();
            assert_eq!(expected, 2 * k - 1);
            assert_eq!(s.total_migrations(), expected);
            assert_eq!(s.total_loads(), 2 * k);
        }
    }

    #[test]
    fn remote_launch_is_not_a_migration() {
        let m = machine(1, 8);
        let mut sim = Simulation::new(m);
        sim.spawn_thread(Script::new(vec![ScriptOp::Compute(1)]), Registers::default(), 7, SpawnMode::Remote)
            .unwrap();
        let s = sim.run_until_idle(u64::MAX).unwrap();
        assert_eq!(s.total_migrations(), 0);
        assert_eq!(s.nodelets[7].spawns, 1);
        assert_eq!(s.nodelets[7].instructions, 2);
    }

    #[test]
    fn remote_store_and_add_do_not_migrate() {
        let mut m = machine(2, 2);
        let a = alloc_local(&mut m, 3, 2).unwrap();
        let mut sim = Simulation::new(m);
        sim.spawn_thread(
            Script::new(vec![
                ScriptOp::Store(addr(&a, 0), 5),
                ScriptOp::RemoteAdd(addr(&a, 1), 3),
                ScriptOp::RemoteAdd(addr(&a, 1), 4),
            ]),
            Registers::default(),
            0,
            SpawnMode::Local,
        )
        .unwrap();
        let s = sim.run_until_idle(u64::MAX).unwrap();
        assert_eq!(s.total_migrations(), 0);
        assert_eq!(s.nodelets[3].remote_writes, 3);
        assert_eq!(s.bytes_moved, 24);
        let m = sim.into_machine();
        assert_eq!(m.read(addr(&a, 0)), 5);
        assert_eq!(m.read(addr(&a, 1)), 7);
    }

    #[test]
    fn pure_compute_is_issue_bound() {
        let m = machine(1, 1);
        let mut sim = Simulation::new(m);
        let prog = Script::new(vec![ScriptOp::Compute(1000)]);
        for _ in 0..64 {
            sim.spawn_thread(prog.clone(), Registers::default(), 0, SpawnMode::Local)
                .unwrap();
        }
        let s = sim.run_until_idle(u64::MAX).unwrap();
        let insts = s.total_instructions();
        // one instruction per cycle at most, and close to it once saturated
        assert!(insts <= s.sim_cycles + 1);
        assert!(insts as f64 / s.sim_cycles as f64 > 0.97);
    }

    #[test]
    fn thread_cap_queues_excess() {
        let m = build_machine(MachineConfig {
            nodes: 1,
            nodelets_per_node: 1,
            max_threads_per_core: 2,
            ..MachineConfig::default()
        })
        .unwrap();
        let mut sim = Simulation::new(m);
        let prog = Script::new(vec![ScriptOp::Compute(5)]);
        for _ in 0..5 {
            sim.spawn_thread(prog.clone(), Registers::default(), 0, SpawnMode::Local)
                .unwrap();
        }
        let queued = sim
            .threads()
            .iter()
            .filter(|t| t.status == ThreadStatus::Queued)
            .count();
        assert_eq!(queued, 3);
        let s = sim.run_until_idle(u64::MAX).unwrap();
        assert!(sim.threads().iter().all(|t| t.status == ThreadStatus::Done));
        assert_eq!(s.nodelets[0].instructions, 5 * 6);
    }

    #[test]
    fn deadline_sets_timeout_flag() {
        let m = machine(1, 1);
        let mut sim = Simulation::new(m);
        sim.spawn_thread(Script::new(vec![ScriptOp::Compute(100_000)]), Registers::default(), 0, SpawnMode::Local)
            .unwrap();
        let s = sim.run_until_idle(1000).unwrap();
        assert!(s.timed_out);
        assert_eq!(s.sim_cycles, 1000);
    }

    #[test]
    fn errors() {
        let m = machine(1, 2);
        let mut sim = Simulation::new(m);
        assert_eq!(
            sim.spawn_thread(Script::new(vec![]), Registers::default(), 2, SpawnMode::Local),
            Err(SimError::BadSpawnTarget { target: 2, total: 2 })
        );
        assert_eq!(sim.run_until_idle(10).unwrap_err(), SimError::NoThreads);
        sim.spawn_thread(
            Script::new(vec![ScriptOp::Load(GlobalAddress::new(1, 5))]),
            Registers::default(),
            0,
            SpawnMode::Local,
        )
        .unwrap();
        assert!(matches!(sim.run_until_idle(u64::MAX), Err(SimError::BadAddress { .. })));
    }
}
