// Copyright (c) The Anthemius Contributors
// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails or overruns its time limit.

// NaN must fail a check, so conditions stay negated.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use anthemius::execsim::work_bound;
use anthemius::harness::{run_latency, run_throughput, Builder, Engine, ExperimentConfig, CSV_COLUMNS};
use anthemius::{
    brute_force_min_makespan, critical_path, guided_makespan, optimistic_execute, schedule_batch, Batch, Block,
    BlockState, ChainUpdate, ClientId, Gas, Preset, ResourceId, SchedulerParams, SkipReason, Transaction, TxId,
};
use common::*;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn prop<S: Strategy>(
    name: &str,
    cases: u32,
    strategy: S,
    check: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    runner(cases)
        .run(&strategy, check)
        .map_err(|e| format!("{name}: {e}"))
}

fn four_tx_batch() -> Batch {
    let txs = vec![
        tx(1, 0xa, &[], &[1], 10),
        tx(2, 0xb, &[1], &[1], 10),
        tx(3, 0xc, &[1], &[2], 10),
        tx(4, 0xb, &[], &[], 5),
    ];
    Batch::new(txs, 4).unwrap()
}

fn ids(block: &Block) -> Vec<u64> {
    block.txs().iter().map(|t| t.id().0).collect()
}

fn scheduler_conformance() -> Outcome {
    // Four-transaction trace, seqlimit 20, c 2.
    let params = SchedulerParams::new(Gas(40), 2, 100);
    let mut state = BlockState::new();
    let out = schedule_batch(&mut state, four_tx_batch(), Gas(20), &params);
    ensure!(ids(&state.block) == [1, 2, 4], "trace included {:?}", ids(&state.block));
    ensure!(out.rate.included == 3 && out.rate.batch_len == 4, "rate {:?}", out.rate);
    ensure!(state.resmap.peek(ResourceId(1)) == Some(Gas(20)), "resmap[x] {:?}", state.resmap.peek(ResourceId(1)));
    ensure!(out.skipped == [(TxId(3), SkipReason::ChainLimit)], "skips {:?}", out.skipped);
    ensure!(state.skipped_clients.contains(&ClientId(0xc)), "C not skipped");
    ensure!(!state.skipped_clients.contains(&ClientId(0xb)), "B skipped");

    // Hot-read rule: lim 1, maxhotr 2, two-tx block of gas 8, c 4.
    let mut params = SchedulerParams::new(Gas(1_000), 4, 10);
    params.lim = 1;
    params.maxhotr = 2;
    let mut state = BlockState::new();
    state.block = Block::from_txs([tx(100, 1, &[], &[], 4), tx(101, 2, &[], &[], 4)]).unwrap();
    state.resmap = [(ResourceId(1), Gas(5)), (ResourceId(2), Gas(6))].into_iter().collect();
    let hot = Batch::new(vec![tx(7, 0xd, &[1, 2], &[], 1)], 1).unwrap();
    let out = schedule_batch(&mut state, hot, Gas(250), &params);
    ensure!(out.skipped == [(TxId(7), SkipReason::HotReads)], "hot-read skips {:?}", out.skipped);
    ensure!(state.skipped_clients.contains(&ClientId(0xd)), "D not skipped");

    // Literal chain update: the third writer fits.
    let mut params = SchedulerParams::new(Gas(40), 2, 100);
    params.chain_update = ChainUpdate::ReadsOnly;
    let mut state = BlockState::new();
    let out = schedule_batch(&mut state, four_tx_batch(), Gas(20), &params);
    ensure!(ids(&state.block) == [1, 2, 3, 4], "reads-only included {:?}", ids(&state.block));
    ensure!(out.rate.included == 4, "reads-only rate {:?}", out.rate);
    Ok("trace 3/4, hot-read skip, reads-only admits t3".into())
}

fn invariant_suite() -> Outcome {
    const CASES: u32 = 1_000;
    prop("client order", CASES, arb_case(), |(t, c, p)| check_client_order(&t, c, &p))?;
    prop("chain bound", CASES, arb_case(), |(t, c, p)| check_chain_bound(&t, c, &p))?;
    prop("resmap monotone", CASES, (arb_case(), 1u64..200), |((t, c, p), s)| {
        check_resmap_monotone(&t, c, &p, s)
    })?;
    prop("gas/len caps", CASES, arb_case(), |(t, c, p)| check_caps(&t, c, &p))?;
    prop("relaxation bound", CASES, arb_case(), |(t, c, p)| check_relaxation(&t, c, &p))?;
    prop("determinism", CASES, arb_case(), |(t, c, p)| check_determinism(&t, c, &p))?;
    Ok(format!("6 properties x {CASES} cases"))
}

fn complexity() -> Outcome {
    prop("access bound", 1_000, arb_case(), |(t, c, p)| check_access_bound(&t, c, &p))?;
    let small = resmap_accesses_for(10_000);
    let large = resmap_accesses_for(20_000);
    let ratio = large as f64 / small as f64;
    ensure!((1.8..=2.2).contains(&ratio), "doubling N gave ratio {ratio:.3}");
    Ok(format!("accesses <= 3*sum(k) on 1000 cases; N 10k -> 20k ratio {ratio:.3}"))
}

fn oracle_equivalence() -> Outcome {
    prop("oracle", 300, (arb_block(8, 4, 12), 1u32..=3), |(block, c)| {
        let opt = brute_force_min_makespan(&block, c).unwrap().get() as f64;
        let r = guided_makespan(&block, c);
        let guided = r.makespan.get() as f64;
        prop_assert!(guided <= (2.0 - 1.0 / f64::from(c)) * opt + 1e-9);
        let cp = critical_path(&block);
        prop_assert!(r.makespan >= cp.max(work_bound(&block, c)));
        if c as usize >= block.len() {
            prop_assert_eq!(r.makespan, cp);
        }
        Ok(())
    })?;
    Ok("300 blocks, len <= 8, c <= 3".into())
}

fn desk(builder: Builder, preset: Preset) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(builder, Engine::Guided, preset);
    cfg.scheduler.maxlen = Some(1_000);
    cfg.worker_counts = vec![16];
    cfg.num_batches = 5;
    cfg
}

fn directional_throughput() -> Outcome {
    let mut notes = Vec::new();
    let mut failures = Vec::new();
    for (preset, floor) in [(Preset::DexBursty, 1.2), (Preset::Mixed, 1.2), (Preset::Nft, 0.9)] {
        let anth = run_throughput(&desk(Builder::Anthemius, preset)).map_err(|e| e.to_string())?;
        let fifo = run_throughput(&desk(Builder::Fifo, preset)).map_err(|e| e.to_string())?;
        let ratio = anth.rows[0].simulated_throughput() / fifo.rows[0].simulated_throughput();
        notes.push(format!("{preset} {ratio:.2} (>= {floor})"));
        if ratio < floor {
            failures.push(preset);
        }
    }
    let summary = notes.join(", ");
    ensure!(failures.is_empty(), "{summary}");
    Ok(summary)
}

fn directional_latency() -> Outcome {
    let anth = run_latency(&desk(Builder::Anthemius, Preset::DexBursty)).map_err(|e| e.to_string())?;
    let fifo = run_latency(&desk(Builder::Fifo, Preset::DexBursty)).map_err(|e| e.to_string())?;
    let (a, f) = (&anth.rows[0], &fifo.rows[0]);
    let summary = format!(
        "p50 {:.4}s vs fifo {:.4}s; p90 ratio {:.2} (reported only)",
        a.p50,
        f.p50,
        a.p90 / f.p90
    );
    ensure!(a.p50 <= f.p50, "{summary}");
    Ok(summary)
}

fn conflict_free_block() -> impl Strategy<Value = (Block, u32)> {
    let txs = proptest::collection::vec((0usize..3, 0usize..3, 1u64..50), 0..40).prop_map(|specs| {
        specs
            .into_iter()
            .enumerate()
            .map(|(i, (r, w, g))| {
                // Resources private to each transaction.
                let base = 10 * i as u64;
                let reads: Vec<u64> = (0..r as u64).map(|k| base + k).collect();
                let writes: Vec<u64> = (0..w as u64).map(|k| base + 5 + k).collect();
                tx(i as u64, i as u64, &reads, &writes, g)
            })
            .collect::<Vec<Transaction>>()
    });
    (txs.prop_map(|t| Block::from_txs(t).unwrap()), 1u32..20)
}

fn optimistic_sanity() -> Outcome {
    prop("conflict-free", 500, conflict_free_block(), |(block, c)| {
        let g = guided_makespan(&block, c);
        let o = optimistic_execute(&block, c);
        prop_assert_eq!(o.makespan, g.makespan);
        prop_assert_eq!(o.reexecutions, 0);
        prop_assert_eq!(g.reexecutions, 0);
        prop_assert_eq!(o.total_work, block.gas());
        Ok(())
    })?;
    let block = Block::from_txs([tx(1, 1, &[], &[1], 10), tx(2, 2, &[1], &[], 10)]).unwrap();
    let r = optimistic_execute(&block, 2);
    ensure!(
        (r.makespan, r.reexecutions, r.total_work) == (Gas(20), 1, Gas(30)),
        "two-tx example gave makespan {}, reexecutions {}, total_work {}",
        r.makespan,
        r.reexecutions,
        r.total_work
    );
    Ok("500 conflict-free blocks equal; two-tx example (20, 1, 30)".into())
}

// Every column but sched_s is simulated in decoupled mode.
const SIMULATED: [usize; 14] = [0, 1, 2, 3, 4, 5, 6, 7, 9, 10, 11, 12, 13, 14];

fn cli_run(sub: &str, out: &std::path::Path) -> Result<String, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_anthemius"))
        .args([sub, "--builder", "anthemius,fifo", "--threads", "4,8,12,16,20,24,28,32", "--maxlen", "1000"])
        .arg("--out")
        .arg(out)
        .status()
        .map_err(|e| e.to_string())?;
    ensure!(status.success(), "{sub} exited with {status}");
    std::fs::read_to_string(out).map_err(|e| e.to_string())
}

fn simulated_columns(text: &str) -> Result<Vec<Vec<String>>, String> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers().map_err(|e| e.to_string())?.iter().map(str::to_string).collect();
    ensure!(headers == CSV_COLUMNS, "header {headers:?}");
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record.map_err(|e| e.to_string())?;
        ensure!(r.len() == CSV_COLUMNS.len(), "row width {}", r.len());
        for i in 6..15 {
            r[i].parse::<f64>().map_err(|e| format!("column {}: {e}", CSV_COLUMNS[i]))?;
        }
        rows.push(SIMULATED.iter().map(|&i| r[i].to_string()).collect());
    }
    Ok(rows)
}

fn cli_round_trip() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for sub in ["throughput", "latency"] {
        let first = simulated_columns(&cli_run(sub, &dir.path().join("a.csv"))?)?;
        let second = simulated_columns(&cli_run(sub, &dir.path().join("b.csv"))?)?;
        ensure!(first.len() == 5 * 2 * 8, "{sub}: {} rows", first.len());
        for preset in Preset::ALL {
            let threads: Vec<&str> = first
                .iter()
                .filter(|r| r[2] == preset.name() && r[0] == "anthemius")
                .map(|r| r[3].as_str())
                .collect();
            ensure!(threads == ["4", "8", "12", "16", "20", "24", "28", "32"], "{sub} {preset}: {threads:?}");
        }
        ensure!(first == second, "{sub}: simulated columns differ between runs");
    }
    let status = Command::new(env!("CARGO_BIN_EXE_anthemius"))
        .args(["throughput", "--threads", "0"])
        .output()
        .map_err(|e| e.to_string())?
        .status;
    ensure!(!status.success(), "invalid config exited successfully");
    Ok("5 presets x 2 builders x 8 thread counts, both subcommands reproducible".into())
}

struct Criterion {
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { name: "scheduler conformance", limit: Duration::from_secs(1), run: scheduler_conformance },
        Criterion { name: "invariant suite", limit: Duration::from_secs(60), run: invariant_suite },
        Criterion { name: "complexity check", limit: Duration::from_secs(30), run: complexity },
        Criterion { name: "oracle equivalence", limit: Duration::from_secs(60), run: oracle_equivalence },
        Criterion { name: "directional throughput", limit: Duration::from_secs(120), run: directional_throughput },
        Criterion { name: "directional latency", limit: Duration::from_secs(120), run: directional_latency },
        Criterion { name: "optimistic vs guided sanity", limit: Duration::from_secs(5), run: optimistic_sanity },
        Criterion { name: "cli round-trip", limit: Duration::from_secs(300), run: cli_round_trip },
    ];

    let mut failed = 0;
    for c in &criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        let elapsed = started.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= c.limit => (true, d),
            Ok(d) => (false, format!("{d}; over time limit")),
            Err(e) => (false, e),
        };
        failed += usize::from(!ok);
        println!(
            "{} {}: {} [{:.2}s / {}s]",
            if ok { "PASS" } else { "FAIL" },
            c.name,
            detail,
            elapsed.as_secs_f64(),
            c.limit.as_secs()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} of {} criteria failed", criteria.len());
        ExitCode::FAILURE
    }
}
