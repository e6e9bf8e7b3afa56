//! Parameter sweeps over the benchmarks.
//!
//! A sweep is described by a flat `key = value` file:
//!
//! ```text
//! benchmark = stream
//! threads = 1..4096          # powers of two from 1 to 4096
//! strategies = serial_spawn, recursive_remote_spawn
//! scale = 20
//! trials = 10
//! config = machine.cfg       # optional, relative to the spec file
//! machine.nodes = 8          # machine overrides
//! ```
//!
//! Grid points run concurrently; rows come back in grid order.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::kernels::{
    chase, laplacian_csr, spmv, stream_add, ChaseConfig, KernelError, LaplacianSpec, Permutation, SpawnStrategy,
    SpmvConfig, SpmvLayout, StreamConfig,
};
use crate::machine::{ConfigError, MachineConfig, Word};
use crate::model::{ncdimm_peak, peak_report, ModelError, STREAM_ADD_MIX};
use crate::report::{ResultRow, ResultTable};

pub const DEFAULT_MAX_RUNS: usize = 10_000;
pub const DEFAULT_TRIALS: usize = 10;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("sweep has {runs} runs, above the cap of {cap}")]
    CapExceeded { runs: usize, cap: usize },
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    Stream,
    Chase,
    Spmv,
    Model,
}

impl Benchmark {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Stream => "stream",
            Self::Chase => "chase",
            Self::Spmv => "spmv",
            Self::Model => "model",
        }
    }
}

impl FromStr for Benchmark {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stream" => Ok(Self::Stream),
            "chase" => Ok(Self::Chase),
            "spmv" => Ok(Self::Spmv),
            "model" => Ok(Self::Model),
            _ => Err(format!("unknown benchmark `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSpec {
    pub benchmark: Benchmark,
    pub machine: MachineConfig,
    pub threads: Vec<usize>,
    pub strategies: Vec<SpawnStrategy>,
    pub scales: Vec<u32>,
    pub elements: Vec<u64>,
    pub block_sizes: Vec<u64>,
    pub permutations: Vec<Permutation>,
    pub layouts: Vec<SpmvLayout>,
    pub grid_n: Vec<usize>,
    pub cores: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub max_runs: usize,
    pub output: Option<PathBuf>,
    /// Best STREAM bandwidth to normalize against; measured when absent.
    pub stream_reference_mb: Option<f64>,
}

impl SweepSpec {
    pub fn new(benchmark: Benchmark, machine: MachineConfig) -> Self {
        Self {
            benchmark,
            machine,
            threads: Vec::new(),
            strategies: Vec::new(),
            scales: Vec::new(),
            elements: Vec::new(),
            block_sizes: Vec::new(),
            permutations: Vec::new(),
            layouts: Vec::new(),
            grid_n: Vec::new(),
            cores: Vec::new(),
            trials: DEFAULT_TRIALS,
            seed: 0,
            max_runs: DEFAULT_MAX_RUNS,
            output: None,
            stream_reference_mb: None,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, SweepError> {
        let text = std::fs::read_to_string(path).map_err(|source| SweepError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path.parent())
    }

    /// Parses a spec; `base` resolves a relative `config` path.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self, SweepError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| SweepError::Parse {
                line: i + 1,
                msg: "expected `key = value`".into(),
            })?;
            entries.push((i + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let find = |key: &str| entries.iter().find(|e| e.1 == key);
        let (bl, _, bv) = find("benchmark").ok_or(SweepError::Parse {
            line: 0,
            msg: "missing `benchmark`".into(),
        })?;
        let benchmark = bv.parse().map_err(|msg| SweepError::Parse { line: *bl, msg })?;
        let mut machine = match find("config") {
            Some((_, _, p)) => {
                let p = Path::new(p);
                let full = match base {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p.to_path_buf(),
                };
                MachineConfig::from_file(&full)?
            }
            None => MachineConfig::default(),
        };
        for (_, k, v) in &entries {
            if let Some(key) = k.strip_prefix("machine.") {
                machine.set(key, v)?;
            }
        }
        machine.validate()?;
        let mut spec = SweepSpec::new(benchmark, machine);
        for (line, k, v) in &entries {
            let line = *line;
            let perr = |msg: String| SweepError::Parse { line, msg };
            match k.as_str() {
                "benchmark" | "config" => {}
                k if k.starts_with("machine.") => {}
                "threads" => spec.threads = parse_list(v).map_err(perr)?,
                "strategies" | "strategy" => spec.strategies = parse_names(v).map_err(perr)?,
                "scale" | "scales" => spec.scales = parse_list(v).map_err(perr)?,
                "elements" => spec.elements = parse_list(v).map_err(perr)?,
                "block_sizes" | "block_size" => spec.block_sizes = parse_list(v).map_err(perr)?,
                "permutations" | "permutation" => spec.permutations = parse_names(v).map_err(perr)?,
                "layouts" | "layout" => spec.layouts = parse_names(v).map_err(perr)?,
                "n" => spec.grid_n = parse_list(v).map_err(perr)?,
                "cores" => spec.cores = parse_list(v).map_err(perr)?,
                "trials" => spec.trials = parse_one(v).map_err(perr)?,
                "seed" => spec.seed = parse_one(v).map_err(perr)?,
                "max_runs" => spec.max_runs = parse_one(v).map_err(perr)?,
                "output" => spec.output = Some(PathBuf::from(v)),
                "stream_reference_mb" => spec.stream_reference_mb = Some(parse_one(v).map_err(perr)?),
                other => return Err(perr(format!("unknown key `{other}`"))),
            }
        }
        if spec.trials == 0 {
            return Err(SweepError::Parse {
                line: 0,
                msg: "trials must be at least one".into(),
            });
        }
        Ok(spec)
    }

    /// Expands the parameter grid, filling unset axes with defaults.
    pub fn points(&self) -> Vec<Point> {
        fn or<T: Clone>(v: &[T], d: T) -> Vec<T> {
            if v.is_empty() {
                vec![d]
            } else {
                v.to_vec()
            }
        }
        let mut out = Vec::new();
        match self.benchmark {
            Benchmark::Stream => {
                let d = StreamConfig::default();
                for &scale in &or(&self.scales, d.scale) {
                    for &strategy in &or(&self.strategies, d.strategy) {
                        for &threads in &or(&self.threads, d.threads) {
                            out.push(Point::Stream { scale, strategy, threads });
                        }
                    }
                }
            }
            Benchmark::Chase => {
                let d = ChaseConfig::default();
                for &elements in &or(&self.elements, d.n) {
                    for &strategy in &or(&self.strategies, d.strategy) {
                        for &threads in &or(&self.threads, d.threads) {
                            for &permutation in &or(&self.permutations, d.permutation) {
                                for &block_size in &or(&self.block_sizes, d.block_size) {
                                    out.push(Point::Chase {
                                        elements,
                                        strategy,
                                        threads,
                                        permutation,
                                        block_size,
                                    });
                                }
                            }
                        }
                    }
                }
            }
            Benchmark::Spmv => {
                let d = SpmvConfig::default();
                let strategies: Vec<Option<SpawnStrategy>> = if self.strategies.is_empty() {
                    vec![None]
                } else {
                    self.strategies.iter().copied().map(Some).collect()
                };
                for &strategy in &strategies {
                    for &threads in &or(&self.threads, d.threads) {
                        for &n in &or(&self.grid_n, 64) {
                            for &layout in &or(&self.layouts, d.layout) {
                                out.push(Point::Spmv {
                                    strategy,
                                    threads,
                                    n,
                                    layout,
                                });
                            }
                        }
                    }
                }
            }
            Benchmark::Model => {
                for &cores in &or(&self.cores, self.machine.cores_per_nodelet) {
                    out.push(Point::Model { cores });
                }
            }
        }
        out
    }

    /// Simulations the sweep will run, counting trials.
    pub fn run_count(&self) -> usize {
        let per_point = if self.benchmark == Benchmark::Chase { self.trials } else { 1 };
        self.points().len() * per_point
    }
}

/// One grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Point {
    Stream {
        scale: u32,
        strategy: SpawnStrategy,
        threads: usize,
    },
    Chase {
        elements: u64,
        strategy: SpawnStrategy,
        threads: usize,
        permutation: Permutation,
        block_size: u64,
    },
    Spmv {
        strategy: Option<SpawnStrategy>,
        threads: usize,
        n: usize,
        layout: SpmvLayout,
    },
    Model {
        cores: usize,
    },
}

fn parse_one<T: FromStr>(v: &str) -> Result<T, String> {
    v.trim().parse().map_err(|_| format!("bad value `{v}`"))
}

/// Comma-separated integers; `lo..hi` expands to lo, 2·lo, 4·lo, … up to hi.
fn parse_list<T>(v: &str) -> Result<Vec<T>, String>
where
    T: FromStr + TryFrom<u64>,
{
    let mut out = Vec::new();
    for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((lo, hi)) = item.split_once("..") {
            let lo: u64 = parse_one(lo)?;
            let hi: u64 = parse_one(hi)?;
            if lo == 0 || lo > hi {
                return Err(format!("bad range `{item}`"));
            }
            let mut x = lo;
            while x <= hi {
                out.push(T::try_from(x).map_err(|_| format!("`{x}` out of range"))?);
                x *= 2;
            }
        } else {
            out.push(parse_one(item)?);
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(out)
}

fn parse_names<T: FromStr<Err = String>>(v: &str) -> Result<Vec<T>, String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(T::from_str)
        .collect()
}

/// Raw outcome of one simulation.
#[derive(Debug, Clone)]
struct Trial {
    bw_mb: f64,
    migrations: u64,
    spawns: u64,
    sim_cycles: u64,
    verified: bool,
}

fn run_trial(machine: &MachineConfig, point: &Point, seed: u64) -> Result<Trial, SweepError> {
    let from = |s: &crate::engine::SimStats, verified: bool| Trial {
        bw_mb: s.bandwidth_mb_per_sec(),
        migrations: s.total_migrations(),
        spawns: s.total_spawns(),
        sim_cycles: s.sim_cycles,
        verified,
    };
    Ok(match *point {
        Point::Stream { scale, strategy, threads } => {
            let r = stream_add(
                machine,
                &StreamConfig {
                    scale,
                    threads,
                    strategy,
                    ..StreamConfig::default()
                },
            )?;
            from(&r.stats, r.verified)
        }
        Point::Chase {
            elements,
            strategy,
            threads,
            permutation,
            block_size,
        } => {
            let r = chase(
                machine,
                &ChaseConfig {
                    n: elements,
                    block_size,
                    permutation,
                    seed,
                    threads,
                    strategy,
                    ..ChaseConfig::default()
                },
            )?;
            from(&r.stats, r.verified)
        }
        Point::Spmv {
            strategy,
            threads,
            n,
            layout,
        } => {
            let a = laplacian_csr(LaplacianSpec { n }).map_err(KernelError::from)?;
            let x: Vec<Word> = (0..a.n_cols as Word).map(|i| i % 7 - 3).collect();
            let r = spmv(
                machine,
                &a,
                &x,
                &SpmvConfig {
                    layout,
                    threads,
                    strategy,
                    ..SpmvConfig::default()
                },
            )?;
            from(&r.stats, r.verified)
        }
        Point::Model { cores } => {
            let cfg = MachineConfig {
                cores_per_nodelet: cores,
                ..machine.clone()
            };
            let p = peak_report(&cfg, STREAM_ADD_MIX)?;
            Trial {
                bw_mb: p.machine_compute_peak.min(p.machine_memory_peak).mb_per_sec(),
                migrations: 0,
                spawns: 0,
                sim_cycles: 0,
                verified: true,
            }
        }
    })
}

/// Best STREAM bandwidth on `machine` with every thread slot filled.
pub fn measure_stream_reference(machine: &MachineConfig, scale: u32) -> Result<f64, SweepError> {
    let threads = machine.total_nodelets() * machine.cores_per_nodelet * machine.max_threads_per_core;
    let r = stream_add(
        machine,
        &StreamConfig {
            scale,
            threads,
            strategy: SpawnStrategy::RecursiveRemoteSpawn,
            ..StreamConfig::default()
        },
    )?;
    Ok(r.stats.bandwidth_mb_per_sec())
}

pub fn run_sweep(spec: &SweepSpec) -> Result<ResultTable, SweepError> {
    let points = spec.points();
    if points.is_empty() {
        return Err(SweepError::EmptyGrid);
    }
    let runs = spec.run_count();
    if runs > spec.max_runs {
        return Err(SweepError::CapExceeded {
            runs,
            cap: spec.max_runs,
        });
    }
    let trials_run = if spec.benchmark == Benchmark::Chase { spec.trials } else { 1 };
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..trials_run).map(move |t| (p, t)))
        .collect();
    let results: Vec<Trial> = jobs
        .par_iter()
        .map(|&(p, t)| run_trial(&spec.machine, &points[p], spec.seed + t as u64))
        .collect::<Result<_, _>>()?;

    let reference = match (spec.stream_reference_mb, spec.benchmark) {
        (Some(r), _) => r,
        (None, Benchmark::Stream) => results.iter().map(|t| t.bw_mb).fold(0.0, f64::max),
        (None, Benchmark::Model) => 0.0,
        (None, _) => measure_stream_reference(&spec.machine, StreamConfig::default().scale)?,
    };
    let ncdimm = ncdimm_peak(&spec.machine).mb_per_sec();
    let hash = format!("{:016x}", spec.machine.config_hash());

    let rows = points
        .iter()
        .enumerate()
        .map(|(i, point)| {
            let ts = &results[i * trials_run..(i + 1) * trials_run];
            let mean = ts.iter().map(|t| t.bw_mb).sum::<f64>() / ts.len() as f64;
            let mut row = ResultRow {
                index: i,
                config_hash: hash.clone(),
                benchmark: spec.benchmark.as_str().to_string(),
                nodelets: spec.machine.total_nodelets(),
                threads: None,
                strategy: None,
                scale: None,
                elements: None,
                block_size: None,
                permutation: None,
                layout: None,
                n: None,
                cores_per_nodelet: None,
                seed: spec.seed,
                trials: spec.trials,
                bw_mb_mean: mean,
                bw_mb_min: ts.iter().map(|t| t.bw_mb).fold(f64::INFINITY, f64::min),
                bw_mb_max: ts.iter().map(|t| t.bw_mb).fold(0.0, f64::max),
                util_stream: if reference > 0.0 { mean / reference } else { 0.0 },
                util_ncdimm: mean / ncdimm,
                migrations: ts[0].migrations,
                spawns: ts[0].spawns,
                sim_cycles: ts[0].sim_cycles,
                verified: ts.iter().all(|t| t.verified),
            };
            match *point {
                Point::Stream { scale, strategy, threads } => {
                    row.scale = Some(scale);
                    row.strategy = Some(strategy.to_string());
                    row.threads = Some(threads);
                }
                Point::Chase {
                    elements,
                    strategy,
                    threads,
                    permutation,
                    block_size,
                } => {
                    row.elements = Some(elements);
                    row.strategy = Some(strategy.to_string());
                    row.threads = Some(threads);
                    row.permutation = Some(permutation.to_string());
                    row.block_size = Some(block_size);
                }
                Point::Spmv {
                    strategy,
                    threads,
                    n,
                    layout,
                } => {
                    row.strategy = Some(strategy.unwrap_or(layout.default_strategy()).to_string());
                    row.threads = Some(threads);
                    row.n = Some(n);
                    row.layout = Some(layout.to_string());
                }
                Point::Model { cores } => row.cores_per_nodelet = Some(cores),
            }
            row
        })
        .collect();
    Ok(ResultTable::new(rows))
}
