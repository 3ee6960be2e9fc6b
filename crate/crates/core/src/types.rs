// Copyright (c) The Anthemius Contributors
// SPDX-License-Identifier: Apache-2.0

//! Domain types shared by the scheduler, the simulators and the harness.
//!
//! Identifiers are opaque integers. Gas is an unsigned integer so every
//! comparison made while building a block is exact, and every division by the
//! concurrency parameter is a floor division.

use std::collections::HashMap;
use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Abstract execution cost. One gas unit is one logical time unit inside the
/// simulators.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Gas(pub u64);

impl Gas {
    pub const ZERO: Gas = Gas(0);

    pub const fn get(self) -> u64 {
        self.0
    }

    pub fn checked_add(self, rhs: Gas) -> Result<Gas> {
        self.0
            .checked_add(rhs.0)
            .map(Gas)
            .ok_or(Error::GasOverflow { lhs: self, rhs })
    }

    pub fn saturating_add(self, rhs: Gas) -> Gas {
        Gas(self.0.saturating_add(rhs.0))
    }

    /// Floor division by the concurrency parameter.
    pub fn per_worker(self, workers: u32) -> Gas {
        Gas(self.0 / u64::from(workers.max(1)))
    }
}

/// Panics on overflow. Use [`Gas::checked_add`] where the operands are not
/// already known to be bounded.
impl Add for Gas {
    type Output = Gas;

    fn add(self, rhs: Gas) -> Gas {
        match self.checked_add(rhs) {
            Ok(sum) => sum,
            Err(e) => panic!("{e}"),
        }
    }
}

impl std::iter::Sum for Gas {
    fn sum<I: Iterator<Item = Gas>>(iter: I) -> Gas {
        iter.fold(Gas::ZERO, Add::add)
    }
}

impl fmt::Display for Gas {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u64> for Gas {
    fn from(v: u64) -> Gas {
        Gas(v)
    }
}

macro_rules! opaque_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(
            Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }
    };
}

opaque_id!(
    /// A state address a transaction may read or write.
    ResourceId
);
opaque_id!(
    /// Sender of a transaction.
    ClientId
);
opaque_id!(
    /// Unique within a run. Ids are handed out in submission order, so the
    /// per-client order of a block can be checked by comparing ids.
    TxId
);

/// A transaction together with its declared read and write sets.
///
/// Both sets are stored sorted and deduplicated. They may overlap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transaction {
    id: TxId,
    sender: ClientId,
    read_set: Box<[ResourceId]>,
    write_set: Box<[ResourceId]>,
    gas: Gas,
    fast_track: bool,
}

impl Transaction {
    pub fn new(
        id: TxId,
        sender: ClientId,
        read_set: impl IntoIterator<Item = ResourceId>,
        write_set: impl IntoIterator<Item = ResourceId>,
        gas: Gas,
    ) -> Result<Self> {
        if gas == Gas::ZERO {
            return Err(Error::InvalidTransaction {
                id,
                reason: "gas must be positive",
            });
        }
        Ok(Transaction {
            id,
            sender,
            read_set: sorted_set(read_set),
            write_set: sorted_set(write_set),
            gas,
            fast_track: false,
        })
    }

    /// Marks the transaction for the mempool's priority lane.
    pub fn with_fast_track(mut self, fast_track: bool) -> Self {
        self.fast_track = fast_track;
        self
    }

    pub fn id(&self) -> TxId {
        self.id
    }

    pub fn sender(&self) -> ClientId {
        self.sender
    }

    pub fn read_set(&self) -> &[ResourceId] {
        &self.read_set
    }

    pub fn write_set(&self) -> &[ResourceId] {
        &self.write_set
    }

    pub fn gas(&self) -> Gas {
        self.gas
    }

    pub fn fast_track(&self) -> bool {
        self.fast_track
    }

    /// Number of declared resource accesses, counting a resource that is both
    /// read and written twice.
    pub fn accesses(&self) -> usize {
        self.read_set.len() + self.write_set.len()
    }

    pub fn conflicts_with(&self, other: &Transaction) -> bool {
        conflicts(self, other)
    }
}

fn sorted_set(items: impl IntoIterator<Item = ResourceId>) -> Box<[ResourceId]> {
    let mut v: Vec<ResourceId> = items.into_iter().collect();
    v.sort_unstable();
    v.dedup();
    v.into_boxed_slice()
}

fn intersects(a: &[ResourceId], b: &[ResourceId]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

/// Two transactions conflict when one writes a resource the other reads or
/// writes. Read-read sharing never conflicts.
pub fn conflicts(a: &Transaction, b: &Transaction) -> bool {
    intersects(&a.write_set, &b.write_set)
        || intersects(&a.write_set, &b.read_set)
        || intersects(&a.read_set, &b.write_set)
}

/// A slice of the mempool handed to the scheduler in one call.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Batch {
    txs: Vec<Transaction>,
    capacity: usize,
}

impl Batch {
    pub fn new(txs: Vec<Transaction>, capacity: usize) -> Result<Self> {
        if txs.len() > capacity {
            return Err(Error::BatchOverCapacity {
                len: txs.len(),
                capacity,
            });
        }
        Ok(Batch { txs, capacity })
    }

    pub fn txs(&self) -> &[Transaction] {
        &self.txs
    }

    pub fn into_txs(self) -> Vec<Transaction> {
        self.txs
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.txs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.txs.is_empty()
    }

    /// A zero-capacity batch counts as full.
    pub fn is_full(&self) -> bool {
        self.txs.len() == self.capacity
    }
}

/// Ordered transactions with their accumulated gas.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Block {
    txs: Vec<Transaction>,
    gas: Gas,
}

impl Block {
    pub fn new() -> Self {
        Block::default()
    }

    /// Builds a block from an ordered list, failing only on gas overflow.
    pub fn from_txs(txs: impl IntoIterator<Item = Transaction>) -> Result<Self> {
        let mut block = Block::new();
        for tx in txs {
            block.push(tx)?;
        }
        Ok(block)
    }

    /// Appends a transaction. The block is unchanged if its gas would
    /// overflow.
    pub fn push(&mut self, tx: Transaction) -> Result<()> {
        self.gas = self.gas.checked_add(tx.gas)?;
        self.txs.push(tx);
        Ok(())
    }

    pub fn txs(&self) -> &[Transaction] {
        &self.txs
    }

    pub fn into_txs(self) -> Vec<Transaction> {
        self.txs
    }

    pub fn gas(&self) -> Gas {
        self.gas
    }

    pub fn len(&self) -> usize {
        self.txs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.txs.is_empty()
    }

    /// Checks that the accumulated gas matches the contents and that every
    /// client's transactions appear in submission (id) order.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let mut sum = Gas::ZERO;
        for tx in &self.txs {
            sum = sum
                .checked_add(tx.gas)
                .map_err(|e| format!("recomputing block gas: {e}"))?;
        }
        if sum != self.gas {
            return Err(format!(
                "block gas is {} but its transactions sum to {}",
                self.gas, sum
            ));
        }
        let mut last_seen: HashMap<ClientId, TxId> = HashMap::new();
        for tx in &self.txs {
            if let Some(prev) = last_seen.insert(tx.sender, tx.id) {
                if prev >= tx.id {
                    return Err(format!(
                        "client {} has {} after {} in the block",
                        tx.sender, tx.id, prev
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Longest known chain cost ending in a write to each resource, for the block
/// under construction.
///
/// Values only ever grow. Every lookup and every update is counted so the
/// linear-time claim of the scheduler can be checked.
#[derive(Clone, Debug, Default)]
pub struct ResourceMap {
    chains: HashMap<ResourceId, Gas>,
    accesses: u64,
}

impl ResourceMap {
    pub fn new() -> Self {
        ResourceMap::default()
    }

    pub fn get(&mut self, res: ResourceId) -> Option<Gas> {
        self.accesses += 1;
        self.chains.get(&res).copied()
    }

    /// Raises the stored chain cost to `cost` if it is larger.
    pub fn raise(&mut self, res: ResourceId, cost: Gas) {
        self.accesses += 1;
        let slot = self.chains.entry(res).or_insert(cost);
        if *slot < cost {
            *slot = cost;
        }
    }

    /// Reads without counting an access. For tests and reports.
    pub fn peek(&self, res: ResourceId) -> Option<Gas> {
        self.chains.get(&res).copied()
    }

    pub fn accesses(&self) -> u64 {
        self.accesses
    }

    pub fn len(&self) -> usize {
        self.chains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }
}

impl FromIterator<(ResourceId, Gas)> for ResourceMap {
    fn from_iter<I: IntoIterator<Item = (ResourceId, Gas)>>(iter: I) -> Self {
        let mut chains = HashMap::new();
        for (res, cost) in iter {
            let slot = chains.entry(res).or_insert(cost);
            if *slot < cost {
                *slot = cost;
            }
        }
        ResourceMap {
            chains,
            accesses: 0,
        }
    }
}
