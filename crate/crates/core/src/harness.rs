// Copyright (c) The Anthemius Contributors
// SPDX-License-Identifier: Apache-2.0

//! Throughput and latency experiments.
//!
//! A run fills a mempool with `num_batches` seeded batches of identical
//! distribution, then repeatedly builds a block (timed on the wall clock),
//! simulates its execution on `c` workers and advances a simulated clock by
//! the makespan divided by `gas_per_second`.
//!
//! * Throughput runs stop once every transaction of the first batch has
//!   executed. With the FIFO builder and the default gas budget this is a
//!   single block holding the whole first batch.
//! * Latency runs stop once every generated transaction has executed. A
//!   transaction's latency is the simulated time at which its block finishes,
//!   plus, in coupled mode, the scheduling time spent so far.
//!
//! Coupled mode charges block construction on the critical path; decoupled mode
//! leaves it out entirely. Percentiles use the nearest-rank method.
//!
//! # CSV schema
//!
//! `builder,engine,workload,c,mode,seed,blocks,throughput_txps,sched_s,exec_s,p10,p25,p50,p75,p90`
//!
//! Latency percentiles are in seconds.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::execsim::{guided_makespan, optimistic_execute};
use crate::mempool::Mempool;
use crate::params::{default_target_inc_rate, SchedulerParams, DEFAULT_MAXLEN};
use crate::scheduler::{create_good_block, fifo_block};
use crate::types::{Block, Gas, TxId};
use crate::workload::{Preset, Workload, WorkloadConfig};

pub const CSV_COLUMNS: [&str; 15] = [
    "builder",
    "engine",
    "workload",
    "c",
    "mode",
    "seed",
    "blocks",
    "throughput_txps",
    "sched_s",
    "exec_s",
    "p10",
    "p25",
    "p50",
    "p75",
    "p90",
];

pub const DEFAULT_GAS_PER_SECOND: f64 = 1e6;
pub const DEFAULT_MAX_BLOCKS: usize = 100;
/// Worker counts of the published sweep: 4 to 32 in steps of 4.
pub const DEFAULT_WORKER_COUNTS: [u32; 8] = [4, 8, 12, 16, 20, 24, 28, 32];

macro_rules! cli_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($text => Ok($name::$variant),)+
                    _ => Err(Error::InvalidExperiment(format!(
                        concat!("unknown ", stringify!($name), " {:?}"),
                        s
                    ))),
                }
            }
        }
    };
}

cli_enum!(
    /// How blocks are assembled.
    Builder { Anthemius => "anthemius", Fifo => "fifo" }
);
cli_enum!(
    /// Which execution simulator runs the blocks.
    Engine { Guided => "guided", Optimistic => "optimistic" }
);
cli_enum!(
    /// Whether block construction time counts toward the run time.
    Mode { Coupled => "coupled", Decoupled => "decoupled" }
);

/// A named workload: one of the presets or a custom config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub name: String,
    pub config: WorkloadConfig,
}

impl From<Preset> for WorkloadSpec {
    fn from(p: Preset) -> Self {
        WorkloadSpec {
            name: p.name().to_string(),
            config: p.config(),
        }
    }
}

impl WorkloadSpec {
    pub fn custom(name: impl Into<String>, config: WorkloadConfig) -> Self {
        WorkloadSpec {
            name: name.into(),
            config,
        }
    }
}

/// Optional replacements for the derived scheduler parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SchedulerOverrides {
    pub maxgas: Option<u64>,
    pub maxlen: Option<usize>,
    pub lim: Option<usize>,
    pub maxhotr: Option<u32>,
    pub maxrelaxnum: Option<u32>,
    pub maxrelaxrate: Option<f64>,
    pub target_inc_rate: Option<f64>,
    pub target_scale: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub builder: Builder,
    pub engine: Engine,
    pub workload: WorkloadSpec,
    pub worker_counts: Vec<u32>,
    pub num_batches: usize,
    /// Batch size; defaults to `maxlen`.
    pub batch_size: Option<usize>,
    pub scheduler: SchedulerOverrides,
    pub gas_per_second: f64,
    pub mode: Mode,
    /// Replaces the workload's own seed.
    pub seed: u64,
    /// Runs per cell. Simulated metrics are identical across runs; only the
    /// measured scheduling time is averaged.
    pub repetitions: usize,
    pub max_blocks: usize,
}

impl ExperimentConfig {
    pub fn new(builder: Builder, engine: Engine, workload: impl Into<WorkloadSpec>) -> Self {
        ExperimentConfig {
            builder,
            engine,
            workload: workload.into(),
            worker_counts: DEFAULT_WORKER_COUNTS.to_vec(),
            num_batches: 5,
            batch_size: None,
            scheduler: SchedulerOverrides::default(),
            gas_per_second: DEFAULT_GAS_PER_SECOND,
            mode: Mode::Decoupled,
            seed: 0,
            repetitions: 1,
            max_blocks: DEFAULT_MAX_BLOCKS,
        }
    }

    pub fn maxlen(&self) -> usize {
        self.scheduler.maxlen.unwrap_or(DEFAULT_MAXLEN)
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size.unwrap_or_else(|| self.maxlen())
    }

    /// Default gas budget: `maxlen` transactions at the workload's largest gas,
    /// so a FIFO block always reaches `maxlen`.
    pub fn maxgas(&self) -> Gas {
        Gas(self.scheduler.maxgas.unwrap_or_else(|| {
            (self.maxlen() as u64).saturating_mul(self.workload.config.gas_range.hi)
        }))
    }

    /// Scheduler parameters for `c` workers.
    pub fn params(&self, c: u32) -> SchedulerParams {
        let o = &self.scheduler;
        let maxlen = self.maxlen();
        let mut p = SchedulerParams::new(self.maxgas(), c, maxlen);
        p.target_inc_rate = default_target_inc_rate(c, maxlen, self.batch_size());
        if let Some(v) = o.lim {
            p.lim = v;
        }
        if let Some(v) = o.maxhotr {
            p.maxhotr = v;
        }
        if let Some(v) = o.maxrelaxnum {
            p.maxrelaxnum = v;
        }
        if let Some(v) = o.maxrelaxrate {
            p.maxrelaxrate = v;
        }
        if let Some(v) = o.target_inc_rate {
            p.target_inc_rate = v;
        }
        if let Some(v) = o.target_scale {
            p.target_scale = v;
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidExperiment(msg.to_string()));
        if self.worker_counts.is_empty() {
            return bad("worker_counts must not be empty");
        }
        if self.worker_counts.contains(&0) {
            return bad("worker counts must be positive");
        }
        if self.num_batches == 0 {
            return bad("num_batches must be at least 1");
        }
        if self.batch_size() == 0 {
            return bad("batch size must be positive");
        }
        if !(self.gas_per_second.is_finite() && self.gas_per_second > 0.0) {
            return bad("gas_per_second must be positive");
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1");
        }
        if self.max_blocks == 0 {
            return bad("max_blocks must be at least 1");
        }
        self.workload.config.validate()?;
        for &c in &self.worker_counts {
            self.params(c).validate()?;
        }
        Ok(())
    }
}

/// Results for one `(builder, engine, c)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub builder: Builder,
    pub engine: Engine,
    pub workload: String,
    pub c: u32,
    pub mode: Mode,
    pub seed: u64,
    pub blocks: usize,
    pub executed_txs: usize,
    pub throughput_txps: f64,
    pub sched_s: f64,
    pub exec_s: f64,
    /// Sum of block makespans, in gas.
    pub exec_gas: u64,
    pub reexecutions: u64,
    /// Transactions too heavy for any relaxed per-worker budget.
    pub starved: usize,
    pub p10: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p90: f64,
    /// Per-transaction latency in seconds, in execution order.
    pub latencies: Vec<f64>,
}

impl RunRow {
    /// Throughput counting simulated execution only.
    pub fn simulated_throughput(&self) -> f64 {
        self.executed_txs as f64 / self.exec_s
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub rows: Vec<RunRow>,
}

impl RunReport {
    pub fn extend(&mut self, other: RunReport) {
        self.rows.extend(other.rows);
    }

    pub fn row(&self, builder: Builder, engine: Engine, c: u32) -> Option<&RunRow> {
        self.rows
            .iter()
            .find(|r| r.builder == builder && r.engine == engine && r.c == c)
    }
}

/// Nearest-rank percentile: the smallest sample such that at least `p`
/// percent of the samples are less than or equal to it. `None` when empty.
pub fn percentile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Until {
    FirstBatch,
    AllBatches,
}

struct BlockTrace {
    len: usize,
    makespan: Gas,
    reexecutions: u64,
    sched: Duration,
}

struct CellTrace {
    blocks: Vec<BlockTrace>,
    starved: usize,
}

fn simulate_cell(cfg: &ExperimentConfig, workload: &Workload, c: u32, until: Until) -> Result<CellTrace> {
    let params = cfg.params(c);
    let batch_size = cfg.batch_size();
    let mut pool = Mempool::new(batch_size);
    for b in 0..cfg.num_batches {
        let first_id = (b * batch_size) as u64;
        pool.push(workload.batch(b as u64, batch_size, first_id).into_txs())?;
    }
    let tracked = match until {
        Until::FirstBatch => batch_size,
        Until::AllBatches => batch_size * cfg.num_batches,
    };
    let is_tracked = |id: TxId| (id.0 as usize) < tracked;
    let mut pending = tracked;
    let mut trace = CellTrace {
        blocks: Vec::new(),
        starved: 0,
    };

    while pending > 0 {
        if trace.blocks.len() == cfg.max_blocks {
            return Err(Error::BlockLimit {
                limit: cfg.max_blocks,
                pending,
            });
        }
        let started = Instant::now();
        let block: Block = match cfg.builder {
            Builder::Anthemius => {
                let (block, report) = create_good_block(&mut pool, &params)?;
                trace.starved = trace.starved.max(report.oversized.len());
                block
            }
            Builder::Fifo => fifo_block(&mut pool, &params)?,
        };
        let sched = started.elapsed();
        if block.is_empty() {
            return Err(Error::Stalled { pending });
        }
        let (makespan, reexecutions) = match cfg.engine {
            Engine::Guided => (guided_makespan(&block, c).makespan, 0),
            Engine::Optimistic => {
                let r = optimistic_execute(&block, c);
                (r.makespan, r.reexecutions)
            }
        };
        pending -= block.txs().iter().filter(|t| is_tracked(t.id())).count();
        trace.blocks.push(BlockTrace {
            len: block.len(),
            makespan,
            reexecutions,
            sched,
        });
    }
    Ok(trace)
}

fn run_cell(cfg: &ExperimentConfig, workload: &Workload, c: u32, until: Until) -> Result<RunRow> {
    let first = simulate_cell(cfg, workload, c, until)?;
    let mut sched_per_block: Vec<f64> = first.blocks.iter().map(|b| b.sched.as_secs_f64()).collect();
    for _ in 1..cfg.repetitions {
        let again = simulate_cell(cfg, workload, c, until)?;
        debug_assert_eq!(again.blocks.len(), first.blocks.len());
        for (acc, b) in sched_per_block.iter_mut().zip(&again.blocks) {
            *acc += b.sched.as_secs_f64();
        }
    }
    let reps = cfg.repetitions as f64;
    for s in &mut sched_per_block {
        *s /= reps;
    }

    let gps = cfg.gas_per_second;
    let coupled = cfg.mode == Mode::Coupled;
    let mut exec_gas = 0u64;
    let mut sched_s = 0.0;
    let mut latencies = Vec::new();
    for (b, &sched) in first.blocks.iter().zip(&sched_per_block) {
        exec_gas += b.makespan.get();
        sched_s += sched;
        let mut at = exec_gas as f64 / gps;
        if coupled {
            at += sched_s;
        }
        latencies.extend(std::iter::repeat_n(at, b.len));
    }
    let exec_s = exec_gas as f64 / gps;
    let executed_txs: usize = first.blocks.iter().map(|b| b.len).sum();
    let total_s = if coupled { exec_s + sched_s } else { exec_s };

    let mut sorted = latencies.clone();
    sorted.sort_by(f64::total_cmp);
    let pct = |p| percentile(&sorted, p).unwrap_or(0.0);
    Ok(RunRow {
        builder: cfg.builder,
        engine: cfg.engine,
        workload: cfg.workload.name.clone(),
        c,
        mode: cfg.mode,
        seed: cfg.seed,
        blocks: first.blocks.len(),
        executed_txs,
        throughput_txps: executed_txs as f64 / total_s,
        sched_s,
        exec_s,
        exec_gas,
        reexecutions: first.blocks.iter().map(|b| b.reexecutions).sum(),
        starved: first.starved,
        p10: pct(10.0),
        p25: pct(25.0),
        p50: pct(50.0),
        p75: pct(75.0),
        p90: pct(90.0),
        latencies,
    })
}

fn run(cfg: &ExperimentConfig, until: Until) -> Result<RunReport> {
    cfg.validate()?;
    let mut wcfg = cfg.workload.config.clone();
    wcfg.seed = cfg.seed;
    let workload = Workload::new(wcfg)?;
    let rows = cfg
        .worker_counts
        .iter()
        .map(|&c| run_cell(cfg, &workload, c, until))
        .collect::<Result<_>>()?;
    Ok(RunReport { rows })
}

/// Runs until every transaction of the first batch has executed, for each
/// worker count.
pub fn run_throughput(cfg: &ExperimentConfig) -> Result<RunReport> {
    run(cfg, Until::FirstBatch)
}

/// Runs until every generated transaction has executed, for each worker
/// count.
pub fn run_latency(cfg: &ExperimentConfig) -> Result<RunReport> {
    run(cfg, Until::AllBatches)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::InvalidExperiment(format!("unknown format {s:?}"))),
        }
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    builder: Builder,
    engine: Engine,
    workload: &'a str,
    c: u32,
    mode: Mode,
    seed: u64,
    blocks: usize,
    throughput_txps: f64,
    sched_s: f64,
    exec_s: f64,
    p10: f64,
    p25: f64,
    p50: f64,
    p75: f64,
    p90: f64,
}

pub fn write_csv<W: Write>(report: &RunReport, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in &report.rows {
        w.serialize(CsvRow {
            builder: r.builder,
            engine: r.engine,
            workload: &r.workload,
            c: r.c,
            mode: r.mode,
            seed: r.seed,
            blocks: r.blocks,
            throughput_txps: r.throughput_txps,
            sched_s: r.sched_s,
            exec_s: r.exec_s,
            p10: r.p10,
            p25: r.p25,
            p50: r.p50,
            p75: r.p75,
            p90: r.p90,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(report: &RunReport, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, report)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_json(text: &str) -> Result<RunReport> {
    Ok(serde_json::from_str(text)?)
}

/// Writes `report` to `path` in the given format.
pub fn emit_report(report: &RunReport, path: impl AsRef<Path>, format: Format) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    match format {
        Format::Csv => write_csv(report, file),
        Format::Json => write_json(report, file),
    }
}
