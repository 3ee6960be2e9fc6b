// Copyright (c) The Anthemius Contributors
// SPDX-License-Identifier: Apache-2.0

//! Good-block construction.
//!
//! The batch handler ([`create_good_block`]) pulls batches from a
//! [`BatchSource`] and hands each one to the batch scheduler
//! ([`schedule_batch`]). The scheduler walks the batch once, looks up the
//! chain cost of every declared read in the [`ResourceMap`], and admits a
//! transaction only if the chain it extends stays within the per-worker budget
//! `seqlimit` and the block stays within `seqlimit * c` gas. Admitted writers
//! record the new chain cost for every resource they write. The handler reacts
//! to the fraction of the batch that got in, relaxing `seqlimit` a bounded
//! number of times before giving up on the block.
//!
//! Every resource map lookup and update is counted, so the cost of building a
//! block is observable as `O(N * k)` map accesses for `N` transactions with
//! `k` declared accesses each.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::params::{ChainUpdate, HotReadRegion, SchedulerParams};
use crate::types::{Batch, Block, ClientId, Gas, ResourceMap, Transaction, TxId};

/// Anything that can feed batches to the block builder.
///
/// An empty batch means the source is exhausted for now.
pub trait BatchSource {
    fn poll_batch(&mut self) -> Result<Batch>;

    /// Returns transactions that were polled but not included. They must come
    /// out of the next polls first, in the given order.
    fn requeue_front(&mut self, txs: Vec<Transaction>);
}

/// Result of scanning a transaction's read set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReadAnalysis {
    /// Largest chain cost among the resources read.
    pub chain_cost: Gas,
    /// Reads whose chain cost exceeds `floor(block_gas / c)`.
    pub hot_resources: u32,
}

pub fn analyze_reads(
    tx: &Transaction,
    resmap: &mut ResourceMap,
    block_gas: Gas,
    concurrency: u32,
) -> ReadAnalysis {
    let hot_threshold = block_gas.per_worker(concurrency);
    let mut analysis = ReadAnalysis::default();
    for &res in tx.read_set() {
        if let Some(cost) = resmap.get(res) {
            if cost > analysis.chain_cost {
                analysis.chain_cost = cost;
            }
            if cost > hot_threshold {
                analysis.hot_resources += 1;
            }
        }
    }
    analysis
}

/// Fraction of a batch admitted by one scheduler pass, kept exact.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InclusionRate {
    pub included: usize,
    pub batch_len: usize,
}

impl InclusionRate {
    /// An empty batch counts as fully included so that it never triggers a
    /// relaxation.
    pub fn value(self) -> f64 {
        if self.batch_len == 0 {
            1.0
        } else {
            self.included as f64 / self.batch_len as f64
        }
    }

    pub fn is_zero(self) -> bool {
        self.batch_len > 0 && self.included == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    /// An earlier transaction of the same sender was skipped in this block.
    SkippedClient,
    /// Too many hot reads in the interior of the block.
    HotReads,
    /// The chain through this transaction would exceed `seqlimit`.
    ChainLimit,
    /// The block would exceed `seqlimit * c` gas.
    BlockGas,
}

/// One admission decision, kept so the chain bound can be re-checked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Admission {
    pub tx: TxId,
    pub chain_cost: Gas,
    pub gas: Gas,
    pub seqlimit: Gas,
    /// Block gas after the transaction was appended.
    pub block_gas: Gas,
}

/// Mutable state of one block construction. Not shared between threads.
#[derive(Debug, Default)]
pub struct BlockState {
    pub block: Block,
    pub resmap: ResourceMap,
    pub skipped_clients: HashSet<ClientId>,
}

impl BlockState {
    pub fn new() -> Self {
        BlockState::default()
    }
}

#[derive(Debug, Default)]
pub struct BatchOutcome {
    pub rate: InclusionRate,
    pub skipped: Vec<(TxId, SkipReason)>,
    /// Transactions of the batch that are not in the block, in batch order.
    /// Includes the unexamined tail when the block hit `maxlen`.
    pub leftovers: Vec<Transaction>,
    pub admissions: Vec<Admission>,
    /// Skipped transactions heavier than any relaxed `seqlimit`.
    pub oversized: Vec<TxId>,
}

fn hot_region_applies(params: &SchedulerParams, len: usize) -> bool {
    let tail_start = params.maxlen.saturating_sub(params.lim);
    match params.hot_read_region {
        HotReadRegion::Interior => params.lim < len && len < tail_start,
        HotReadRegion::Disjunction => len > params.lim || len < tail_start,
    }
}

/// Tries to append every transaction of `batch` to the block in `state`.
pub fn schedule_batch(
    state: &mut BlockState,
    batch: Batch,
    seqlimit: Gas,
    params: &SchedulerParams,
) -> BatchOutcome {
    let c = params.concurrency;
    let gas_cap = Gas(seqlimit.get().saturating_mul(u64::from(c)));
    let max_seqlimit = params.max_seqlimit();
    let batch_len = batch.len();
    let mut out = BatchOutcome {
        rate: InclusionRate {
            included: 0,
            batch_len,
        },
        ..BatchOutcome::default()
    };

    let mut txs = batch.into_txs().into_iter();
    while let Some(tx) = txs.next() {
        if state.block.len() >= params.maxlen {
            out.leftovers.push(tx);
            out.leftovers.extend(txs.by_ref());
            break;
        }
        if state.skipped_clients.contains(&tx.sender()) {
            out.skipped.push((tx.id(), SkipReason::SkippedClient));
            out.leftovers.push(tx);
            continue;
        }

        let reads = analyze_reads(&tx, &mut state.resmap, state.block.gas(), c);

        let reason = if reads.hot_resources >= params.maxhotr
            && hot_region_applies(params, state.block.len())
        {
            Some(SkipReason::HotReads)
        } else if reads.chain_cost.saturating_add(tx.gas()) > seqlimit {
            Some(SkipReason::ChainLimit)
        } else if state.block.gas().saturating_add(tx.gas()) > gas_cap {
            Some(SkipReason::BlockGas)
        } else {
            None
        };
        if let Some(reason) = reason {
            if tx.gas() > max_seqlimit {
                out.oversized.push(tx.id());
            }
            state.skipped_clients.insert(tx.sender());
            out.skipped.push((tx.id(), reason));
            out.leftovers.push(tx);
            continue;
        }

        let new_chain = match params.chain_update {
            ChainUpdate::IncludeWriter => reads.chain_cost + tx.gas(),
            ChainUpdate::ReadsOnly => reads.chain_cost,
        };
        for &res in tx.write_set() {
            state.resmap.raise(res, new_chain);
        }
        out.admissions.push(Admission {
            tx: tx.id(),
            chain_cost: reads.chain_cost,
            gas: tx.gas(),
            seqlimit,
            block_gas: state.block.gas() + tx.gas(),
        });
        // Cannot overflow: block gas plus tx gas was bounded by gas_cap above.
        state
            .block
            .push(tx)
            .expect("block gas bounded by seqlimit * c");
        out.rate.included += 1;
    }
    out
}

/// Why the batch handler stopped filling a block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The source had no more transactions.
    #[default]
    Exhausted,
    /// The block reached `maxlen`.
    MaxLen,
    /// The inclusion rate stayed low after `maxrelaxnum` relaxations.
    RelaxationBudget,
    /// A full batch contributed nothing.
    ZeroInclusion,
}

/// Outcome of [`create_good_block`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SchedulingReport {
    pub included: usize,
    pub skipped: usize,
    pub relaxations_used: u32,
    pub final_seqlimit: Gas,
    pub resmap_accesses: u64,
    pub per_batch_inclusion_rates: Vec<InclusionRate>,
    pub skipped_clients: BTreeSet<ClientId>,
    pub skip_reasons: Vec<(TxId, SkipReason)>,
    pub admissions: Vec<Admission>,
    /// Examined transactions whose own gas exceeds the largest `seqlimit` any
    /// relaxation can reach. They can never be included.
    pub oversized: Vec<TxId>,
    pub stop: StopReason,
}

impl SchedulingReport {
    pub fn examined(&self) -> usize {
        self.included + self.skipped
    }
}

/// Builds one block from `source`.
///
/// Transactions that were polled but not included go back to the front of the
/// source in their original order, ready for the next block. If the source
/// fails, everything polled so far is returned to it and the error propagates.
pub fn create_good_block<S>(source: &mut S, params: &SchedulerParams) -> Result<(Block, SchedulingReport)>
where
    S: BatchSource + ?Sized,
{
    params.validate()?;
    let mut seqlimit = params.base_seqlimit();
    let mut state = BlockState::new();
    let mut report = SchedulingReport::default();
    let mut leftovers: Vec<Transaction> = Vec::new();
    let mut polled: Vec<TxId> = Vec::new();

    loop {
        if state.block.len() >= params.maxlen {
            report.stop = StopReason::MaxLen;
            break;
        }
        let batch = match source.poll_batch() {
            Ok(batch) => batch,
            Err(e) => {
                restore(source, state.block, leftovers, &polled);
                return Err(e);
            }
        };
        if batch.is_empty() {
            report.stop = StopReason::Exhausted;
            break;
        }
        let was_full = batch.is_full();
        polled.extend(batch.txs().iter().map(Transaction::id));

        let outcome = schedule_batch(&mut state, batch, seqlimit, params);
        report.included += outcome.rate.included;
        report.skipped += outcome.skipped.len();
        report.oversized.extend(outcome.oversized);
        report.skip_reasons.extend(outcome.skipped);
        report.admissions.extend(outcome.admissions);
        report.per_batch_inclusion_rates.push(outcome.rate);
        leftovers.extend(outcome.leftovers);

        let rate = outcome.rate;
        if rate.value() < params.target_inc_rate {
            if report.relaxations_used >= params.maxrelaxnum {
                report.stop = StopReason::RelaxationBudget;
                break;
            }
            if rate.is_zero() && was_full {
                report.stop = StopReason::ZeroInclusion;
                break;
            }
            seqlimit = params.relaxed_seqlimit(rate.value());
            report.relaxations_used += 1;
        }
    }

    report.final_seqlimit = seqlimit;
    report.resmap_accesses = state.resmap.accesses();
    report.skipped_clients = state.skipped_clients.into_iter().collect();
    source.requeue_front(leftovers);
    Ok((state.block, report))
}

// Puts every polled transaction back in polling order.
fn restore<S: BatchSource + ?Sized>(
    source: &mut S,
    block: Block,
    leftovers: Vec<Transaction>,
    polled: &[TxId],
) {
    let mut by_id: HashMap<TxId, Transaction> = block
        .into_txs()
        .into_iter()
        .chain(leftovers)
        .map(|tx| (tx.id(), tx))
        .collect();
    let txs = polled.iter().filter_map(|id| by_id.remove(id)).collect();
    source.requeue_front(txs);
}

/// Dependency-blind baseline: takes transactions in arrival order until the
/// next one would exceed `maxgas` or the block holds `maxlen`.
pub fn fifo_block<S>(source: &mut S, params: &SchedulerParams) -> Result<Block>
where
    S: BatchSource + ?Sized,
{
    params.validate()?;
    let mut block = Block::new();
    let mut leftovers = Vec::new();
    'fill: while block.len() < params.maxlen {
        let batch = match source.poll_batch() {
            Ok(batch) => batch,
            Err(e) => {
                let mut back = block.into_txs();
                back.extend(leftovers);
                source.requeue_front(back);
                return Err(e);
            }
        };
        if batch.is_empty() {
            break;
        }
        let mut txs = batch.into_txs().into_iter();
        while let Some(tx) = txs.next() {
            let fits = block.len() < params.maxlen
                && block.gas().saturating_add(tx.gas()) <= params.maxgas;
            if !fits {
                leftovers.push(tx);
                leftovers.extend(txs);
                break 'fill;
            }
            block.push(tx)?;
        }
    }
    source.requeue_front(leftovers);
    Ok(block)
}

/// Convenience wrapper matching the batch-source contract for a fixed list of
/// batches. Requeued transactions form a batch of their own.
#[derive(Debug, Default)]
pub struct BatchQueue {
    batches: std::collections::VecDeque<Batch>,
}

impl BatchQueue {
    pub fn new(batches: impl IntoIterator<Item = Batch>) -> Self {
        BatchQueue {
            batches: batches.into_iter().collect(),
        }
    }

    pub fn remaining(&self) -> usize {
        self.batches.iter().map(Batch::len).sum()
    }
}

impl BatchSource for BatchQueue {
    fn poll_batch(&mut self) -> Result<Batch> {
        Ok(self.batches.pop_front().unwrap_or_default())
    }

    fn requeue_front(&mut self, txs: Vec<Transaction>) {
        if txs.is_empty() {
            return;
        }
        let capacity = txs.len();
        match Batch::new(txs, capacity) {
            Ok(batch) => self.batches.push_front(batch),
            Err(_) => unreachable!("capacity equals length"),
        }
    }
}
