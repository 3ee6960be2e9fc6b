// Copyright (c) The Anthemius Contributors
// SPDX-License-Identifier: Apache-2.0

//! Ordered store of pending transactions that feeds the block builder.

use std::collections::{HashSet, VecDeque};

use crate::error::{Error, Result};
use crate::scheduler::BatchSource;
use crate::types::{Batch, Transaction, TxId};

/// FIFO of pending transactions, polled in fixed-size batches.
///
/// Per-client order is preserved by every operation: polled-but-skipped
/// transactions come back at the front in their original order, and
/// [`Mempool::fast_track`] drags a client's earlier transactions along with
/// the one being promoted.
#[derive(Debug)]
pub struct Mempool {
    pending: VecDeque<Transaction>,
    ids: HashSet<TxId>,
    batch_capacity: usize,
}

impl Mempool {
    /// # Panics
    ///
    /// If `batch_capacity` is zero.
    pub fn new(batch_capacity: usize) -> Self {
        assert!(batch_capacity > 0, "batch capacity must be positive");
        Mempool {
            pending: VecDeque::new(),
            ids: HashSet::new(),
            batch_capacity,
        }
    }

    pub fn batch_capacity(&self) -> usize {
        self.batch_capacity
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn contains(&self, id: TxId) -> bool {
        self.ids.contains(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transaction> {
        self.pending.iter()
    }

    /// Appends `txs` in order. Nothing is added if any id is already pending
    /// or repeated within `txs`. Transactions flagged for the fast track are
    /// promoted right away, keeping their relative order.
    pub fn push(&mut self, txs: Vec<Transaction>) -> Result<()> {
        let mut fresh = HashSet::with_capacity(txs.len());
        for tx in &txs {
            if self.ids.contains(&tx.id()) || !fresh.insert(tx.id()) {
                return Err(Error::DuplicateTx(tx.id()));
            }
        }
        let promoted: Vec<TxId> = txs.iter().filter(|t| t.fast_track()).map(Transaction::id).collect();
        self.ids.extend(fresh);
        self.pending.extend(txs);
        for id in promoted.into_iter().rev() {
            self.fast_track(id)?;
        }
        Ok(())
    }

    /// Removes up to `batch_capacity` transactions from the front.
    pub fn poll_batch(&mut self) -> Batch {
        let n = self.pending.len().min(self.batch_capacity);
        let txs: Vec<Transaction> = self.pending.drain(..n).collect();
        for tx in &txs {
            self.ids.remove(&tx.id());
        }
        Batch::new(txs, self.batch_capacity).expect("drained at most batch_capacity")
    }

    /// Puts transactions back at the front, in the given order.
    ///
    /// Ids that are already pending are dropped rather than duplicated.
    pub fn requeue_front(&mut self, txs: Vec<Transaction>) {
        for tx in txs.into_iter().rev() {
            if self.ids.insert(tx.id()) {
                self.pending.push_front(tx);
            }
        }
    }

    /// Moves `id` to the head of the queue. Earlier pending transactions of
    /// the same sender move with it, ahead of it and in their original order.
    pub fn fast_track(&mut self, id: TxId) -> Result<()> {
        let pos = self
            .pending
            .iter()
            .position(|t| t.id() == id)
            .ok_or(Error::UnknownTx(id))?;
        let sender = self.pending[pos].sender();

        let mut moved = Vec::new();
        let mut kept = VecDeque::with_capacity(self.pending.len());
        for (i, tx) in self.pending.drain(..).enumerate() {
            if i <= pos && tx.sender() == sender {
                moved.push(tx);
            } else {
                kept.push_back(tx);
            }
        }
        for tx in moved.into_iter().rev() {
            kept.push_front(tx);
        }
        self.pending = kept;
        Ok(())
    }
}

impl BatchSource for Mempool {
    fn poll_batch(&mut self) -> Result<Batch> {
        Ok(Mempool::poll_batch(self))
    }

    fn requeue_front(&mut self, txs: Vec<Transaction>) {
        Mempool::requeue_front(self, txs)
    }
}
