// Copyright (c) The Anthemius Contributors
// SPDX-License-Identifier: Apache-2.0

//! Logical-time simulators of parallel block execution.
//!
//! One gas unit is one time unit. Transactions conflict through their declared
//! read and write sets, and a conflicting pair must commit in block order.
//!
//! * [`guided_makespan`] models an engine that knows the dependencies up front
//!   and never aborts.
//! * [`optimistic_execute`] models speculative execution that re-runs a
//!   transaction whenever a lower-index conflicting transaction commits after
//!   it started.
//! * [`critical_path`] and [`brute_force_min_makespan`] are the lower bound and
//!   the exact optimum used to check the simulators.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Block, Gas, ResourceId, TxId};

/// Outcome of simulating one block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub makespan: Gas,
    /// Gas executed, counting every aborted incarnation in full.
    pub total_work: Gas,
    pub reexecutions: u64,
    pub finish_time: BTreeMap<TxId, Gas>,
}

/// Direct dependencies of each transaction, in block order.
///
/// For every resource a transaction depends on the last earlier writer, and a
/// writer additionally depends on every reader since that writer. The
/// transitive closure of these edges is exactly the "earlier and conflicting"
/// relation, so the longest path and every ready time computed over them match
/// the pairwise definition.
#[derive(Clone, Debug)]
pub struct DependencyGraph {
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
}

impl DependencyGraph {
    pub fn new(block: &Block) -> Self {
        #[derive(Default)]
        struct Slot {
            last_writer: Option<usize>,
            readers: Vec<usize>,
        }
        let n = block.len();
        let mut slots: HashMap<ResourceId, Slot> = HashMap::new();
        let mut preds = vec![Vec::new(); n];
        for (j, tx) in block.txs().iter().enumerate() {
            let writes = tx.write_set();
            for &res in tx.read_set() {
                if writes.binary_search(&res).is_ok() {
                    continue;
                }
                let slot = slots.entry(res).or_default();
                preds[j].extend(slot.last_writer);
                slot.readers.push(j);
            }
            for &res in writes {
                let slot = slots.entry(res).or_default();
                preds[j].extend(slot.last_writer);
                preds[j].append(&mut slot.readers);
                slot.last_writer = Some(j);
            }
            preds[j].sort_unstable();
            preds[j].dedup();
        }
        let mut succs = vec![Vec::new(); n];
        for (j, ps) in preds.iter().enumerate() {
            for &i in ps {
                succs[i].push(j);
            }
        }
        DependencyGraph { preds, succs }
    }

    pub fn preds(&self, tx: usize) -> &[usize] {
        &self.preds[tx]
    }

    pub fn succs(&self, tx: usize) -> &[usize] {
        &self.succs[tx]
    }

    pub fn len(&self) -> usize {
        self.preds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.preds.is_empty()
    }
}

/// Heaviest conflict-ordered chain of the block.
pub fn critical_path(block: &Block) -> Gas {
    let graph = DependencyGraph::new(block);
    let mut cost = vec![0u64; block.len()];
    for (j, tx) in block.txs().iter().enumerate() {
        let before = graph.preds(j).iter().map(|&i| cost[i]).max().unwrap_or(0);
        cost[j] = before + tx.gas().get();
    }
    Gas(cost.into_iter().max().unwrap_or(0))
}

/// `ceil(block.gas / c)`.
pub fn work_bound(block: &Block, workers: u32) -> Gas {
    Gas(block.gas().get().div_ceil(u64::from(workers.max(1))))
}

// Event-driven list schedule: whenever workers are idle, the lowest-index
// ready transactions start on the lowest-index idle workers.
fn list_schedule(gas: &[u64], graph: &DependencyGraph, workers: u32) -> Vec<u64> {
    let n = gas.len();
    let mut waiting: Vec<usize> = (0..n).map(|j| graph.preds(j).len()).collect();
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&j| waiting[j] == 0).map(Reverse).collect();
    let mut idle: BinaryHeap<Reverse<u32>> = (0..workers).map(Reverse).collect();
    let mut running: BinaryHeap<Reverse<(u64, u32, usize)>> = BinaryHeap::new();
    let mut finish = vec![0u64; n];
    let mut now = 0u64;

    loop {
        while !ready.is_empty() && !idle.is_empty() {
            let Reverse(job) = ready.pop().expect("checked non-empty");
            let Reverse(worker) = idle.pop().expect("checked non-empty");
            let end = now + gas[job];
            finish[job] = end;
            running.push(Reverse((end, worker, job)));
        }
        let Some(Reverse((end, _, _))) = running.peek().copied() else {
            break;
        };
        now = end;
        while let Some(&Reverse((t, worker, job))) = running.peek() {
            if t != now {
                break;
            }
            running.pop();
            idle.push(Reverse(worker));
            for &s in graph.succs(job) {
                waiting[s] -= 1;
                if waiting[s] == 0 {
                    ready.push(Reverse(s));
                }
            }
        }
    }
    finish
}

/// Guided (dependency-aware) execution on `c` workers.
///
/// Transactions are list-scheduled in block order: a transaction becomes ready
/// when every earlier conflicting transaction has finished, and idle workers
/// pick the lowest-index ready transaction (lowest worker index first). Plain
/// list scheduling suffers from Graham's anomalies, where adding a worker can
/// lengthen the schedule. An engine can always leave workers unused, so the
/// reported schedule is the shortest list schedule over `1..=c` active
/// workers; with ties the larger worker count wins.
///
/// # Panics
///
/// If `c` is zero.
pub fn guided_makespan(block: &Block, c: u32) -> ExecutionReport {
    assert!(c >= 1, "at least one worker is required");
    let graph = DependencyGraph::new(block);
    let gas: Vec<u64> = block.txs().iter().map(|t| t.gas().get()).collect();

    let floor = critical_path(block).get();
    let mut best: Option<(u64, Vec<u64>)> = None;
    for workers in (1..=c).rev() {
        let finish = list_schedule(&gas, &graph, workers);
        let makespan = finish.iter().copied().max().unwrap_or(0);
        if best.as_ref().is_none_or(|(m, _)| makespan < *m) {
            best = Some((makespan, finish));
        }
        if makespan == floor {
            break;
        }
    }
    let (makespan, finish) = best.unwrap_or_default();
    ExecutionReport {
        makespan: Gas(makespan),
        total_work: block.gas(),
        reexecutions: 0,
        finish_time: finish_map(block, &finish),
    }
}

fn finish_map(block: &Block, finish: &[u64]) -> BTreeMap<TxId, Gas> {
    block
        .txs()
        .iter()
        .zip(finish)
        .map(|(tx, &f)| (tx.id(), Gas(f)))
        .collect()
}

/// Optimistic (speculative) execution on `c` workers.
///
/// Transactions are dispatched in block order, each to the earliest-free
/// worker (lowest index on ties), without looking at conflicts. An incarnation
/// that started before some lower-index conflicting transaction committed is
/// aborted by that commit: it still occupies its worker for its full gas, and
/// the next incarnation starts on the same worker at the later of the
/// invalidating commit and the end of the aborted run. Each distinct later
/// commit invalidates one more incarnation. The lowest-index transaction of
/// any conflict never aborts, so a single pass in block order settles the
/// schedule.
///
/// # Panics
///
/// If `c` is zero.
pub fn optimistic_execute(block: &Block, c: u32) -> ExecutionReport {
    assert!(c >= 1, "at least one worker is required");
    let mut free: BinaryHeap<Reverse<(u64, u32)>> = (0..c).map(|w| Reverse((0, w))).collect();
    let mut writer_commits: HashMap<ResourceId, Vec<u64>> = HashMap::new();
    let mut access_commits: HashMap<ResourceId, Vec<u64>> = HashMap::new();
    let mut finish = Vec::with_capacity(block.len());
    let mut reexecutions = 0u64;
    let mut total_work = Gas::ZERO;
    let mut commits: Vec<u64> = Vec::new();

    for tx in block.txs() {
        let gas = tx.gas().get();
        commits.clear();
        let writes = tx.write_set();
        for &res in tx.read_set() {
            if writes.binary_search(&res).is_err() {
                commits.extend(writer_commits.get(&res).into_iter().flatten());
            }
        }
        for &res in writes {
            commits.extend(access_commits.get(&res).into_iter().flatten());
        }
        commits.sort_unstable();
        commits.dedup();

        let Reverse((mut start, worker)) = free.pop().expect("at least one worker");
        let mut incarnations = 1u64;
        loop {
            let later = commits.partition_point(|&t| t <= start);
            match commits.get(later) {
                Some(&commit) => {
                    start = commit.max(start + gas);
                    incarnations += 1;
                }
                None => break,
            }
        }
        let end = start + gas;
        free.push(Reverse((end, worker)));

        reexecutions += incarnations - 1;
        total_work = total_work + Gas(gas * incarnations);
        finish.push(end);
        for &res in tx.read_set().iter().chain(writes) {
            access_commits.entry(res).or_default().push(end);
        }
        for &res in writes {
            writer_commits.entry(res).or_default().push(end);
        }
    }
    let makespan = finish.iter().copied().max().unwrap_or(0);
    ExecutionReport {
        makespan: Gas(makespan),
        total_work,
        reexecutions,
        finish_time: finish_map(block, &finish),
    }
}

pub const ORACLE_MAX_LEN: usize = 8;
pub const ORACLE_MAX_WORKERS: u32 = 3;

/// Exact minimum makespan over all non-preemptive schedules on `c` identical
/// workers in which every conflicting pair runs in block order.
///
/// Exhaustive search over decision points: at time zero and at every finish
/// time, any subset of the ready transactions (possibly none) may start on idle
/// workers. Every semi-active schedule starts its jobs at such points, so the
/// optimum is among the states visited. Limited to eight transactions on at
/// most three workers.
pub fn brute_force_min_makespan(block: &Block, c: u32) -> Result<Gas> {
    let n = block.len();
    if n > ORACLE_MAX_LEN || c == 0 || c > ORACLE_MAX_WORKERS {
        return Err(Error::OracleTooLarge {
            len: n,
            workers: c,
            max_len: ORACLE_MAX_LEN,
            max_workers: ORACLE_MAX_WORKERS,
        });
    }
    let txs = block.txs();
    let mut pred_mask = vec![0u16; n];
    for j in 0..n {
        for i in 0..j {
            if txs[i].conflicts_with(&txs[j]) {
                pred_mask[j] |= 1 << i;
            }
        }
    }
    let gas: Vec<u64> = txs.iter().map(|t| t.gas().get()).collect();
    let mut search = Search {
        gas,
        pred_mask,
        workers: c as usize,
        memo: HashMap::new(),
    };
    Ok(Gas(search.best(0, Vec::new())))
}

struct Search {
    gas: Vec<u64>,
    pred_mask: Vec<u16>,
    workers: usize,
    memo: HashMap<(u16, Vec<(usize, u64)>), u64>,
}

impl Search {
    // Minimum remaining time given completed jobs and (job, remaining) pairs
    // currently running.
    fn best(&mut self, done: u16, running: Vec<(usize, u64)>) -> u64 {
        let n = self.gas.len();
        if done.count_ones() as usize == n {
            return 0;
        }
        let key = (done, running.clone());
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }

        let busy: u16 = running.iter().fold(0, |m, &(j, _)| m | 1 << j);
        let ready: Vec<usize> = (0..n)
            .filter(|&j| (done | busy) & (1 << j) == 0 && self.pred_mask[j] & !done == 0)
            .collect();
        let idle = self.workers - running.len();

        let mut best = u64::MAX;
        for subset in 0u32..(1 << ready.len()) {
            let count = subset.count_ones() as usize;
            if count > idle || (count == 0 && running.is_empty()) {
                continue;
            }
            let mut next = running.clone();
            for (k, &j) in ready.iter().enumerate() {
                if subset & (1 << k) != 0 {
                    next.push((j, self.gas[j]));
                }
            }
            let step = next.iter().map(|&(_, r)| r).min().expect("something runs");
            let mut next_done = done;
            next.retain_mut(|(j, r)| {
                *r -= step;
                if *r == 0 {
                    next_done |= 1 << *j;
                    false
                } else {
                    true
                }
            });
            next.sort_unstable();
            let total = step + self.best(next_done, next);
            best = best.min(total);
        }
        self.memo.insert(key, best);
        best
    }
}
