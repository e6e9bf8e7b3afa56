use std::sync::Arc;

use migsim::engine::{Registers, Script, ScriptOp, SimStats, Simulation, SpawnMode, ThreadProgram};
use migsim::kernels::{stream_add, SpawnStrategy, StreamConfig};
use migsim::machine::{GlobalAddress, Machine, MachineConfig};
use migsim::memalloc::{alloc_1d_striped, alloc_local, Allocation};
use migsim::model::peak_core_bw;
use proptest::prelude::*;

const DEADLINE: u64 = 1 << 40;

fn config(nodes: usize, per_node: usize, cores: usize) -> MachineConfig {
    MachineConfig {
        nodes,
        nodelets_per_node: per_node,
        cores_per_nodelet: cores,
        ..MachineConfig::default()
    }
}

#[derive(Debug, Clone)]
enum Step {
    Compute(u32),
    Load(u64),
    Store(u64, i64),
    Add(u64, i64),
}

fn step_strategy(words: u64) -> impl Strategy<Value = Step> {
    prop_oneof![
        (1u32..5).prop_map(Step::Compute),
        (0..words).prop_map(Step::Load),
        (0..words, -9i64..10).prop_map(|(i, v)| Step::Store(i, v)),
        (0..words, -9i64..10).prop_map(|(i, v)| Step::Add(i, v)),
    ]
}

#[derive(Debug, Clone)]
struct Workload {
    nodes: usize,
    per_node: usize,
    cores: usize,
    threads: Vec<(usize, bool, Vec<Step>)>,
}

const WORDS: u64 = 48;

fn workload() -> impl Strategy<Value = Workload> {
    (1usize..=2, 1usize..=4, 1usize..=2).prop_flat_map(|(nodes, per_node, cores)| {
        let n = nodes * per_node;
        let thread = (0..n, any::<bool>(), prop::collection::vec(step_strategy(WORDS), 0..12));
        prop::collection::vec(thread, 1..20).prop_map(move |threads| Workload {
            nodes,
            per_node,
            cores,
            threads,
        })
    })
}

fn script(data: &Allocation, steps: &[Step]) -> Arc<Script> {
    let at = |i: u64| data.resolve(i, None).unwrap();
    Script::new(
        steps
            .iter()
            .map(|s| match *s {
                Step::Compute(c) => ScriptOp::Compute(c),
                Step::Load(i) => ScriptOp::Load(at(i)),
                Step::Store(i, v) => ScriptOp::Store(at(i), v),
                Step::Add(i, v) => ScriptOp::RemoteAdd(at(i), v),
            })
            .collect(),
    )
}

fn run(w: &Workload) -> (SimStats, Vec<i64>) {
    let mut machine = Machine::new(config(w.nodes, w.per_node, w.cores)).unwrap();
    let data = alloc_1d_striped(&mut machine, WORDS).unwrap();
    let mut sim = Simulation::new(machine);
    for (target, remote, steps) in &w.threads {
        let mode = if *remote { SpawnMode::Remote } else { SpawnMode::Local };
        sim.spawn_thread(script(&data, steps), Registers::default(), *target, mode)
            .unwrap();
    }
    let stats = sim.run_until_idle(DEADLINE).unwrap();
    let mem = data.read_all(sim.machine(), 0);
    (stats, mem)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn runs_are_deterministic(w in workload()) {
        let (a, ma) = run(&w);
        let (b, mb) = run(&w);
        prop_assert_eq!(a, b);
        prop_assert_eq!(ma, mb);
    }

    #[test]
    fn counters_are_consistent(w in workload()) {
        let (s, _) = run(&w);
        prop_assert!(!s.timed_out);
        prop_assert_eq!(s.total_migrations(), s.total_migrations_in());
        for n in &s.nodelets {
            prop_assert!(n.channel_busy_cycles <= s.sim_cycles);
            prop_assert!(n.core_busy_cycles <= s.sim_cycles * w.cores as u64);
        }
        let mut loads = 0u64;
        let mut writes = 0u64;
        let mut insts = 0u64;
        for (_, _, steps) in &w.threads {
            for st in steps {
                match st {
                    Step::Compute(c) => insts += u64::from(*c),
                    Step::Load(_) => { loads += 1; insts += 1; }
                    Step::Store(..) | Step::Add(..) => { writes += 1; insts += 1; }
                }
            }
        }
        prop_assert_eq!(s.total_loads(), loads);
        prop_assert_eq!(s.total_stores() + s.total_remote_writes(), writes);
        prop_assert_eq!(s.bytes_moved, 8 * (loads + writes));
        // one END per thread, and a migrating load issues again on arrival
        prop_assert_eq!(s.total_instructions(), insts + w.threads.len() as u64 + s.total_migrations());
        prop_assert_eq!(s.total_spawns(), w.threads.len() as u64);
        prop_assert_eq!(s.thread_count, w.threads.len() as u64);
    }

    #[test]
    fn atomic_adds_commute(w in workload()) {
        // with only adds, final memory is the plain sum regardless of timing
        let adds_only = Workload {
            threads: w.threads.iter().map(|(t, r, steps)| {
                (*t, *r, steps.iter().filter(|s| matches!(s, Step::Add(..) | Step::Compute(_))).cloned().collect())
            }).collect(),
            ..w
        };
        let mut expected = vec![0i64; WORDS as usize];
        for (_, _, steps) in &adds_only.threads {
            for st in steps {
                if let Step::Add(i, v) = st {
                    expected[*i as usize] += v;
                }
            }
        }
        let (_, mem) = run(&adds_only);
        prop_assert_eq!(mem, expected);
    }

    #[test]
    fn issue_rate_bounds_core_bandwidth(
        threads in 1usize..80,
        mem_ops in 1u32..4,
        overhead in 0u32..20,
        iters in 1usize..6,
    ) {
        let cfg = config(1, 1, 1);
        let mut machine = Machine::new(cfg.clone()).unwrap();
        let data = alloc_local(&mut machine, 0, 64).unwrap();
        let mut ops = Vec::new();
        for k in 0..iters {
            if overhead > 0 {
                ops.push(ScriptOp::Compute(overhead));
            }
            for m in 0..mem_ops {
                ops.push(ScriptOp::Load(data.resolve(((k as u64) * 3 + u64::from(m)) % 64, None).unwrap()));
            }
        }
        let prog: Arc<dyn ThreadProgram> = Script::new(ops);
        let mut sim = Simulation::new(machine);
        for _ in 0..threads {
            sim.spawn_thread(prog.clone(), Registers::default(), 0, SpawnMode::Local).unwrap();
        }
        let s = sim.run_until_idle(DEADLINE).unwrap();
        let bound = peak_core_bw(cfg.core_freq_hz, u64::from(mem_ops), u64::from(mem_ops + overhead), cfg.word_bytes)
            .unwrap()
            .bytes_per_sec();
        prop_assert!(s.achieved_bw_bytes_per_sec <= bound * (1.0 + 1e-12),
            "{} > {}", s.achieved_bw_bytes_per_sec, bound);
    }
}

fn single(cfg: MachineConfig, build: impl FnOnce(&mut Machine) -> (Arc<Script>, usize, SpawnMode)) -> SimStats {
    let mut machine = Machine::new(cfg).unwrap();
    let (prog, target, mode) = build(&mut machine);
    let mut sim = Simulation::new(machine);
    sim.spawn_thread(prog, Registers::default(), target, mode).unwrap();
    sim.run_until_idle(DEADLINE).unwrap()
}

#[test]
fn remote_spawn_is_not_a_migration() {
    let s = single(config(1, 8, 1), |_| (Script::new(vec![ScriptOp::Compute(1)]), 7, SpawnMode::Remote));
    assert_eq!(s.total_migrations(), 0);
    assert_eq!(s.nodelets[7].spawns, 1);
}

#[test]
fn local_data_means_no_migrations() {
    let s = single(config(1, 8, 1), |m| {
        let a = alloc_local(m, 0, 8).unwrap();
        let ops = (0..8).map(|i| ScriptOp::Load(a.resolve(i, None).unwrap())).collect();
        (Script::new(ops), 0, SpawnMode::Local)
    });
    assert_eq!(s.total_migrations(), 0);
    assert_eq!(s.total_loads(), 8);
}

#[test]
fn first_remote_load_migrates_once() {
    let s = single(config(1, 8, 1), |m| {
        let a = alloc_local(m, 1, 4).unwrap();
        let ops = (0..4).map(|i| ScriptOp::Load(a.resolve(i, None).unwrap())).collect();
        (Script::new(ops), 0, SpawnMode::Local)
    });
    assert_eq!(s.total_migrations(), 1);
    assert_eq!(s.nodelets[0].migrations_out, 1);
    assert_eq!(s.nodelets[1].migrations_in, 1);
    assert_eq!(s.nodelets[1].loads, 4);
}

#[test]
fn remote_writes_do_not_migrate() {
    let s = single(config(2, 4, 1), |m| {
        let a = alloc_1d_striped(m, 8).unwrap();
        let mut ops: Vec<ScriptOp> = (0..8).map(|i| ScriptOp::Store(a.resolve(i, None).unwrap(), 1)).collect();
        ops.push(ScriptOp::RemoteAdd(a.resolve(5, None).unwrap(), 2));
        (Script::new(ops), 0, SpawnMode::Local)
    });
    assert_eq!(s.total_migrations(), 0);
    assert_eq!(s.total_remote_writes(), 8);
    assert_eq!(s.nodelets[0].stores, 1);
}

#[test]
fn bad_address_and_target_are_errors() {
    let machine = Machine::new(config(1, 2, 1)).unwrap();
    let mut sim = Simulation::new(machine);
    let prog = Script::new(vec![ScriptOp::Load(GlobalAddress::new(1, 99))]);
    assert!(sim.spawn_thread(prog.clone(), Registers::default(), 2, SpawnMode::Local).is_err());
    sim.spawn_thread(prog, Registers::default(), 0, SpawnMode::Local).unwrap();
    assert!(sim.run_until_idle(DEADLINE).is_err());
}

#[test]
fn serial_spawn_migrates_most_threads() {
    let cfg = config(8, 8, 1);
    let sc = StreamConfig {
        scale: 12,
        threads: 64,
        strategy: SpawnStrategy::SerialSpawn,
        ..StreamConfig::default()
    };
    let r = stream_add(&cfg, &sc).unwrap();
    assert!(r.verified);
    let floor = (64.0 * (1.0 - 1.0 / 64.0)) as u64;
    assert!(r.stats.total_migrations() >= floor, "{} migrations", r.stats.total_migrations());

    let remote = stream_add(&cfg, &StreamConfig { strategy: SpawnStrategy::RecursiveRemoteSpawn, ..sc }).unwrap();
    assert_eq!(remote.stats.total_migrations(), 0);
}
