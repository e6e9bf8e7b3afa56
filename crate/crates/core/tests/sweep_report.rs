use std::fs;

use migsim::report::{ResultRow, ResultTable};
use migsim::sweep::{run_sweep, SweepError, SweepSpec};

fn row(index: usize, benchmark: &str, bw: f64) -> ResultRow {
    ResultRow {
        index,
        config_hash: "00000000deadbeef".into(),
        benchmark: benchmark.into(),
        nodelets: 8,
        threads: Some(64),
        strategy: Some("serial_remote_spawn".into()),
        scale: Some(16),
        elements: None,
        block_size: None,
        permutation: None,
        layout: None,
        n: None,
        cores_per_nodelet: None,
        seed: 3,
        trials: 1,
        bw_mb_mean: bw,
        bw_mb_min: bw,
        bw_mb_max: bw,
        util_stream: 0.5,
        util_ncdimm: 0.125,
        migrations: 7,
        spawns: 65,
        sim_cycles: 12345,
        verified: true,
    }
}

#[test]
fn csv_layout_is_stable() {
    let table = ResultTable::new(vec![row(0, "stream", 1600.0), row(1, "stream", 1234.56789)]);
    let expected = "\
index,config_hash,benchmark,nodelets,threads,strategy,scale,elements,block_size,permutation,layout,n,cores_per_nodelet,seed,trials,bw_mb_mean,bw_mb_min,bw_mb_max,util_stream,util_ncdimm,migrations,spawns,sim_cycles,verified
0,00000000deadbeef,stream,8,64,serial_remote_spawn,16,,,,,,,3,1,1600.000,1600.000,1600.000,0.5000,0.1250,7,65,12345,true
1,00000000deadbeef,stream,8,64,serial_remote_spawn,16,,,,,,,3,1,1234.568,1234.568,1234.568,0.5000,0.1250,7,65,12345,true
";
    assert_eq!(table.to_csv(), expected);

    let long = table.to_long_csv();
    let lines: Vec<&str> = long.lines().collect();
    assert_eq!(lines[0], "index,benchmark,nodelets,series,x_name,x,metric,value");
    assert_eq!(lines.len(), 1 + 2 * 6);
    assert_eq!(lines[1], "0,stream,8,serial_remote_spawn,threads,64,bw_mb_mean,1600.000");
    assert_eq!(lines[12], "1,stream,8,serial_remote_spawn,threads,64,migrations,7");

    let back: Vec<ResultRow> = serde_json::from_str(&table.to_json()).unwrap();
    assert_eq!(back, table.rows);
}

fn write_spec(dir: &std::path::Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn repeated_sweeps_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    write_spec(dir.path(), "machine.cfg", "nodes = 1\nnodelets_per_node = 4\n");
    let specs = [
        "benchmark = stream\nconfig = machine.cfg\nthreads = 1, 4, 16\nstrategies = serial_spawn, recursive_remote_spawn\nscale = 10\n",
        "benchmark = chase\nconfig = machine.cfg\nelements = 2048\nblock_sizes = 1..8\npermutations = full_block_shuffle, ordered\nthreads = 8\ntrials = 3\nseed = 5\n",
        "benchmark = spmv\nconfig = machine.cfg\nn = 4, 6\nlayouts = local, 1d, 2d\nthreads = 8\n",
    ];
    for (i, body) in specs.iter().enumerate() {
        let path = write_spec(dir.path(), &format!("s{i}.sweep"), body);
        let spec = SweepSpec::from_file(&path).unwrap();
        let a = run_sweep(&spec).unwrap();
        let b = run_sweep(&SweepSpec::from_file(&path).unwrap()).unwrap();
        assert_eq!(a.to_csv(), b.to_csv(), "spec {i}");
        assert_eq!(a.to_long_csv(), b.to_long_csv());
        assert!(a.rows.iter().all(|r| r.verified), "spec {i}");
        assert!(a.rows.iter().all(|r| r.nodelets == 4));
    }
}

#[test]
fn chase_trials_vary_only_the_seed() {
    let spec = SweepSpec::parse(
        "benchmark = chase\nmachine.nodes = 1\nmachine.nodelets_per_node = 4\nelements = 1024\nblock_sizes = 2\nthreads = 4\ntrials = 4\nseed = 1\nstream_reference_mb = 100\n",
        None,
    )
    .unwrap();
    let t = run_sweep(&spec).unwrap();
    assert_eq!(t.rows.len(), 1);
    let r = &t.rows[0];
    assert_eq!(r.trials, 4);
    assert!(r.bw_mb_min <= r.bw_mb_mean && r.bw_mb_mean <= r.bw_mb_max);
    assert!((r.util_stream - r.bw_mb_mean / 100.0).abs() < 1e-9);
}

#[test]
fn bad_specs_are_rejected() {
    assert!(matches!(SweepSpec::parse("threads = 4\n", None), Err(SweepError::Parse { .. })));
    assert!(matches!(
        SweepSpec::parse("benchmark = stream\nwidgets = 3\n", None),
        Err(SweepError::Parse { line: 2, .. })
    ));
    let big = SweepSpec::parse("benchmark = stream\nthreads = 1..1024\nscale = 1..20\nmax_runs = 10\n", None).unwrap();
    assert!(matches!(run_sweep(&big), Err(SweepError::CapExceeded { .. })));
}

#[test]
fn summary_flags_checks() {
    let mut rows = vec![row(0, "stream", 100.0)];
    rows[0].verified = false;
    let s = ResultTable::new(rows).summary();
    assert!(s.contains("FAIL all results verified"), "{s}");
}
