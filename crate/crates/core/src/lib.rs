// Copyright (c) The Anthemius Contributors
// SPDX-License-Identifier: Apache-2.0

//! Dependency- and gas-aware block construction for parallel execution.
//!
//! The crate is organized along the path a transaction takes:
//!
//! * [`mempool`] holds pending transactions and hands them out in batches.
//! * [`scheduler`] assembles blocks whose longest conflict chain fits the
//!   per-worker gas budget ([`create_good_block`]), or fills them in arrival
//!   order ([`fifo_block`]) as a baseline.
//! * [`execsim`] simulates guided and optimistic parallel execution of a
//!   block in logical (gas) time.
//! * [`workload`] generates seeded, Zipf-contended batches.
//! * [`harness`] ties them together into throughput and latency experiments.

pub mod error;
pub mod execsim;
pub mod harness;
pub mod mempool;
pub mod params;
pub mod scheduler;
pub mod types;
pub mod workload;

pub use error::{Error, Result};
pub use execsim::{
    brute_force_min_makespan, critical_path, guided_makespan, optimistic_execute, ExecutionReport,
};
pub use mempool::Mempool;
pub use params::{ChainUpdate, HotReadRegion, SchedulerParams};
pub use scheduler::{
    analyze_reads, create_good_block, fifo_block, schedule_batch, BatchOutcome, BatchSource, BlockState,
    InclusionRate, ReadAnalysis, SchedulingReport, SkipReason, StopReason,
};
pub use types::{conflicts, Batch, Block, ClientId, Gas, ResourceId, ResourceMap, Transaction, TxId};
pub use workload::{generate_batch, Preset, WorkloadConfig};
