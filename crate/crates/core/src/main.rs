use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use migsim::kernels::{ChaseConfig, CsrMatrix, Permutation, SpawnStrategy, SpmvConfig, SpmvLayout};
use migsim::model::{peak_report, InstructionMix};
use migsim::report::ResultTable;
use migsim::sweep::{run_sweep, Benchmark, SweepSpec};
use migsim::MachineConfig;

type CliResult<T> = Result<T, Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(name = "migsim", version, about = "Migratory-thread PGAS machine simulator")]
struct Cli {
    #[command(flatten)]
    machine: MachineArgs,

    #[command(flatten)]
    output: OutputArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct MachineArgs {
    /// Flat `key = value` machine config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one machine parameter, e.g. `--set spawn_cycles=100`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    #[arg(long, global = true)]
    nodes: Option<usize>,

    #[arg(long, global = true)]
    nodelets_per_node: Option<usize>,

    #[arg(long, global = true)]
    cores_per_nodelet: Option<usize>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Print the effective machine config and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, global = true, default_value_t = Format::Text)]
    format: Format,

    /// Shorthand for `--format csv`.
    #[arg(long, global = true, conflicts_with = "json")]
    csv: bool,

    /// Shorthand for `--format json`.
    #[arg(long, global = true)]
    json: bool,

    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// STREAM ADD over three striped arrays.
    Stream {
        #[arg(long, default_value_t = 20)]
        scale: u32,
        #[arg(long, default_value_t = 64)]
        threads: usize,
        #[arg(long, default_value = "recursive_remote_spawn")]
        strategy: SpawnStrategy,
    },
    /// Pointer chase over block-shuffled lists.
    Chase {
        #[arg(long, default_value_t = 1 << 20)]
        elements: u64,
        #[arg(long, default_value_t = 64)]
        block_size: u64,
        #[arg(long, default_value = "full_block_shuffle")]
        permutation: Permutation,
        #[arg(long, default_value_t = ChaseConfig::default().threads)]
        threads: usize,
        #[arg(long, default_value = "recursive_remote_spawn")]
        strategy: SpawnStrategy,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// Normalize utilization against this STREAM bandwidth (MB/s)
        /// instead of measuring it.
        #[arg(long)]
        reference_mb: Option<f64>,
    },
    /// CSR SpMV on a 5-point Laplacian or a Matrix Market file.
    Spmv {
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value = "2d")]
        layout: SpmvLayout,
        #[arg(long, default_value_t = SpmvConfig::default().threads)]
        threads: usize,
        #[arg(long)]
        strategy: Option<SpawnStrategy>,
        /// Integer Matrix Market file to use instead of the Laplacian.
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long)]
        reference_mb: Option<f64>,
    },
    /// Analytic peak bandwidths for an instruction mix.
    Model {
        #[arg(long, default_value_t = 3)]
        mem_ops: u64,
        #[arg(long, default_value_t = 21)]
        total_insts: u64,
    },
    /// Run a sweep described by a flat spec file.
    Sweep {
        spec: PathBuf,
        /// Where to write the wide CSV (overrides the spec's `output`).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write plot-ready long-format CSV here.
        #[arg(long)]
        long: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
    },
}

fn machine_config(args: &MachineArgs) -> CliResult<MachineConfig> {
    let mut cfg = match &args.config {
        Some(p) => MachineConfig::from_file(p)?,
        None => MachineConfig::default(),
    };
    if let Some(v) = args.nodes {
        cfg.nodes = v;
    }
    if let Some(v) = args.nodelets_per_node {
        cfg.nodelets_per_node = v;
    }
    if let Some(v) = args.cores_per_nodelet {
        cfg.cores_per_nodelet = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    for o in &args.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| format!("override `{o}` is not KEY=VALUE"))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(table: &ResultTable, format: Format) {
    match format {
        Format::Csv => print!("{}", table.to_csv()),
        Format::Json => println!("{}", table.to_json()),
        Format::Text => {
            for r in &table.rows {
                println!(
                    "{} on {} nodelets: {:.2} MB/s (min {:.2}, max {:.2}), utilization {:.3} of STREAM, {:.4} of channel peak",
                    r.benchmark, r.nodelets, r.bw_mb_mean, r.bw_mb_min, r.bw_mb_max, r.util_stream, r.util_ncdimm
                );
                println!(
                    "  migrations {}, spawns {}, cycles {}, verified {}",
                    r.migrations, r.spawns, r.sim_cycles, r.verified
                );
            }
        }
    }
}

fn run(cli: Cli) -> CliResult<bool> {
    let machine = machine_config(&cli.machine)?;
    if cli.machine.print_config {
        print!("{}", machine.to_flat());
        return Ok(true);
    }
    let format = if cli.output.csv {
        Format::Csv
    } else if cli.output.json {
        Format::Json
    } else {
        cli.output.format
    };
    let seed = machine.seed;
    let table = match cli.command {
        Command::Stream { scale, threads, strategy } => {
            let mut spec = SweepSpec::new(Benchmark::Stream, machine);
            spec.scales = vec![scale];
            spec.threads = vec![threads];
            spec.strategies = vec![strategy];
            spec.trials = 1;
            spec.seed = seed;
            run_sweep(&spec)?
        }
        Command::Chase {
            elements,
            block_size,
            permutation,
            threads,
            strategy,
            trials,
            reference_mb,
        } => {
            let mut spec = SweepSpec::new(Benchmark::Chase, machine);
            spec.elements = vec![elements];
            spec.block_sizes = vec![block_size];
            spec.permutations = vec![permutation];
            spec.threads = vec![threads];
            spec.strategies = vec![strategy];
            spec.trials = trials.max(1);
            spec.seed = seed;
            spec.stream_reference_mb = reference_mb;
            run_sweep(&spec)?
        }
        Command::Spmv {
            n,
            layout,
            threads,
            strategy,
            matrix,
            reference_mb,
        } => {
            if let Some(path) = matrix {
                return run_matrix_file(&machine, &path, layout, threads, strategy, format);
            }
            let mut spec = SweepSpec::new(Benchmark::Spmv, machine);
            spec.grid_n = vec![n];
            spec.layouts = vec![layout];
            spec.threads = vec![threads];
            spec.strategies = strategy.into_iter().collect();
            spec.trials = 1;
            spec.seed = seed;
            spec.stream_reference_mb = reference_mb;
            run_sweep(&spec)?
        }
        Command::Model { mem_ops, total_insts } => {
            let report = peak_report(&machine, InstructionMix { mem_ops, total_insts })?;
            match format {
                Format::Json => println!("{}", report.to_json()),
                _ => {
                    print!("{}", report.to_table());
                    if format == Format::Text {
                        println!();
                        println!("{}", report.to_json());
                    }
                }
            }
            return Ok(true);
        }
        Command::Sweep {
            spec,
            output,
            long,
            trials,
        } => {
            let mut s = SweepSpec::from_file(&spec)?;
            if let Some(t) = trials {
                s.trials = t.max(1);
            }
            let table = run_sweep(&s)?;
            let body = match format {
                Format::Json => table.to_json(),
                _ => table.to_csv(),
            };
            match output.or(s.output.clone()) {
                Some(path) => std::fs::write(&path, body).map_err(|e| format!("{}: {e}", path.display()))?,
                None => print!("{body}"),
            }
            if let Some(path) = long {
                std::fs::write(&path, table.to_long_csv()).map_err(|e| format!("{}: {e}", path.display()))?;
            }
            eprint!("{}", table.summary());
            return Ok(table.rows.iter().all(|r| r.verified));
        }
    };
    emit(&table, format);
    Ok(table.rows.iter().all(|r| r.verified))
}

fn run_matrix_file(
    machine: &MachineConfig,
    path: &PathBuf,
    layout: SpmvLayout,
    threads: usize,
    strategy: Option<SpawnStrategy>,
    format: Format,
) -> CliResult<bool> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let a = CsrMatrix::from_matrix_market(&text)?;
    let x: Vec<i64> = (0..a.n_cols as i64).map(|i| i % 7 - 3).collect();
    let r = migsim::kernels::spmv(
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
    match format {
        Format::Json => println!("{}", r.stats.to_json()),
        _ => println!(
            "spmv {} ({}x{}, {} nonzeros): {:.2} MB/s, migrations {}, verified {}",
            layout,
            a.n_rows,
            a.n_cols,
            a.nnz(),
            r.stats.bandwidth_mb_per_sec(),
            r.stats.total_migrations(),
            r.verified
        ),
    }
    Ok(r.verified)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.output.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
