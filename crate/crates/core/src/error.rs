// Copyright (c) The Anthemius Contributors
// SPDX-License-Identifier: Apache-2.0

use std::io;

use thiserror::Error;

use crate::types::{Gas, TxId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("gas overflow: {lhs} + {rhs} does not fit in 64 bits")]
    GasOverflow { lhs: Gas, rhs: Gas },

    #[error("invalid transaction {id}: {reason}")]
    InvalidTransaction { id: TxId, reason: &'static str },

    #[error("invalid scheduler parameters: {0}")]
    InvalidParams(String),

    #[error("invalid workload config: {0}")]
    InvalidWorkload(String),

    #[error("invalid experiment config: {0}")]
    InvalidExperiment(String),

    #[error("transaction {0} is already pending")]
    DuplicateTx(TxId),

    #[error("transaction {0} is not pending")]
    UnknownTx(TxId),

    #[error("batch holds {len} transactions but its capacity is {capacity}")]
    BatchOverCapacity { len: usize, capacity: usize },

    #[error("exhaustive search is limited to {max_len} transactions on {max_workers} workers, got {len} on {workers}")]
    OracleTooLarge {
        len: usize,
        workers: u32,
        max_len: usize,
        max_workers: u32,
    },

    #[error("batch source failed: {0}")]
    Source(String),

    #[error("run did not finish within {limit} blocks ({pending} transactions still pending)")]
    BlockLimit { limit: usize, pending: usize },

    #[error("block construction made no progress with {pending} transactions pending")]
    Stalled { pending: usize },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
