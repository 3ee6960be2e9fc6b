// Copyright (c) The Anthemius Contributors
// SPDX-License-Identifier: Apache-2.0

//! Command-line front end for the throughput and latency experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use anthemius::harness::{
    emit_report, run_latency, run_throughput, write_csv, write_json, Builder, Engine, ExperimentConfig,
    Format, Mode, RunReport, SchedulerOverrides, WorkloadSpec, DEFAULT_GAS_PER_SECOND, DEFAULT_MAX_BLOCKS,
};
use anthemius::{Preset, Result, WorkloadConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "anthemius", version, about = "Good-block construction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time to execute the first batch, per worker count.
    Throughput(RunArgs),
    /// Per-transaction latency percentiles over all batches.
    Latency(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Preset workloads, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "workload")]
    preset: Vec<Preset>,
    /// Custom workload config (TOML).
    #[arg(long)]
    workload: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "anthemius")]
    builder: Vec<Builder>,
    #[arg(long, value_delimiter = ',', default_value = "guided")]
    engine: Vec<Engine>,
    /// Worker counts, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "4,8,12,16,20,24,28,32")]
    threads: Vec<u32>,
    #[arg(long, default_value_t = 5)]
    batches: usize,
    /// Transactions per batch [default: maxlen].
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, default_value = "decoupled")]
    mode: Mode,
    /// Workload seed [default: the workload's own seed].
    #[arg(long)]
    seed: Option<u64>,
    /// Runs per cell [default: 10 when coupled, 1 when decoupled].
    #[arg(long)]
    repeat: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_GAS_PER_SECOND)]
    gas_per_second: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_BLOCKS)]
    max_blocks: usize,
    /// Output file [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: Format,
    #[command(flatten)]
    sched: SchedArgs,
}

#[derive(Args)]
struct SchedArgs {
    /// Block gas budget [default: maxlen times the largest transaction gas].
    #[arg(long)]
    maxgas: Option<u64>,
    #[arg(long)]
    maxlen: Option<usize>,
    #[arg(long)]
    lim: Option<usize>,
    #[arg(long)]
    maxhotr: Option<u32>,
    #[arg(long)]
    maxrelaxnum: Option<u32>,
    #[arg(long)]
    maxrelaxrate: Option<f64>,
    #[arg(long)]
    target_inc_rate: Option<f64>,
    #[arg(long)]
    target_scale: Option<f64>,
}

impl From<SchedArgs> for SchedulerOverrides {
    fn from(a: SchedArgs) -> Self {
        SchedulerOverrides {
            maxgas: a.maxgas,
            maxlen: a.maxlen,
            lim: a.lim,
            maxhotr: a.maxhotr,
            maxrelaxnum: a.maxrelaxnum,
            maxrelaxrate: a.maxrelaxrate,
            target_inc_rate: a.target_inc_rate,
            target_scale: a.target_scale,
        }
    }
}

fn workloads(args: &RunArgs) -> Result<Vec<WorkloadSpec>> {
    if let Some(path) = &args.workload {
        let name = path
            .file_stem()
            .map_or_else(|| "custom".to_string(), |s| s.to_string_lossy().into_owned());
        return Ok(vec![WorkloadSpec::custom(name, WorkloadConfig::load(path)?)]);
    }
    let presets = if args.preset.is_empty() {
        Preset::ALL.to_vec()
    } else {
        args.preset.clone()
    };
    Ok(presets.into_iter().map(WorkloadSpec::from).collect())
}

fn execute(args: RunArgs, latency: bool) -> Result<()> {
    let specs = workloads(&args)?;
    let repetitions = args.repeat.unwrap_or(match args.mode {
        Mode::Coupled => 10,
        Mode::Decoupled => 1,
    });
    let scheduler = SchedulerOverrides::from(args.sched);
    let mut report = RunReport::default();
    for spec in specs {
        for &builder in &args.builder {
            for &engine in &args.engine {
                let mut cfg = ExperimentConfig::new(builder, engine, spec.clone());
                cfg.worker_counts = args.threads.clone();
                cfg.num_batches = args.batches;
                cfg.batch_size = args.batch_size;
                cfg.scheduler = scheduler.clone();
                cfg.gas_per_second = args.gas_per_second;
                cfg.mode = args.mode;
                cfg.seed = args.seed.unwrap_or(spec.config.seed);
                cfg.repetitions = repetitions;
                cfg.max_blocks = args.max_blocks;
                report.extend(if latency {
                    run_latency(&cfg)?
                } else {
                    run_throughput(&cfg)?
                });
            }
        }
    }
    match &args.out {
        Some(path) => emit_report(&report, path, args.format),
        None => {
            let stdout = std::io::stdout().lock();
            match args.format {
                Format::Csv => write_csv(&report, stdout),
                Format::Json => write_json(&report, stdout),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Throughput(args) => execute(args, false),
        Command::Latency(args) => execute(args, true),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
