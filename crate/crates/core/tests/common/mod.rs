// Copyright (c) The Anthemius Contributors
// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::collections::HashMap;

use anthemius::{
    create_good_block, schedule_batch, Batch, Block, BlockState, ChainUpdate, ClientId, Gas, HotReadRegion, Mempool, ResourceId, SchedulerParams,
    SchedulingReport, Transaction, TxId,
};
use proptest::prelude::*;

pub fn tx(id: u64, sender: u64, reads: &[u64], writes: &[u64], gas: u64) -> Transaction {
    Transaction::new(
        TxId(id),
        ClientId(sender),
        reads.iter().copied().map(ResourceId),
        writes.iter().copied().map(ResourceId),
        Gas(gas),
    )
    .unwrap()
}

/// Transactions over a small resource space so conflicts are common.
pub fn arb_txs(max_len: usize, resources: u64, max_gas: u64) -> impl Strategy<Value = Vec<Transaction>> {
    proptest::collection::vec(
        (
            0u64..6,
            proptest::collection::vec(0..resources, 0..3),
            proptest::collection::vec(0..resources, 0..3),
            1..=max_gas,
        ),
        0..=max_len,
    )
    .prop_map(|specs| {
        specs
            .into_iter()
            .enumerate()
            .map(|(i, (sender, r, w, g))| tx(i as u64, sender, &r, &w, g))
            .collect()
    })
}

pub fn arb_block(max_len: usize, resources: u64, max_gas: u64) -> impl Strategy<Value = Block> {
    arb_txs(max_len, resources, max_gas).prop_map(|txs| Block::from_txs(txs).unwrap())
}

/// Longest conflict chain by pairwise dynamic programming, independent of the
/// dependency graph used by the simulators.
pub fn pairwise_critical_path(block: &Block) -> u64 {
    let txs = block.txs();
    let mut cost = vec![0u64; txs.len()];
    for j in 0..txs.len() {
        let mut before = 0;
        for i in 0..j {
            if anthemius::conflicts(&txs[i], &txs[j]) {
                before = before.max(cost[i]);
            }
        }
        cost[j] = before + txs[j].gas().get();
    }
    cost.into_iter().max().unwrap_or(0)
}

pub const RESOURCES: u64 = 6;

pub fn arb_params() -> impl Strategy<Value = SchedulerParams> {
    (
        1u32..=5,
        1u64..400,
        1usize..=60,
        (0u32..=3, 1u32..=3),
        (1.0f64..10.0, 0.05f64..1.0, 0.5f64..20.0),
        any::<bool>(),
        any::<bool>(),
        0usize..=30,
    )
        .prop_map(
            |(c, maxgas, maxlen, (relaxnum, hotr), (relaxrate, target, scale), reads_only, disj, lim)| {
                let mut p = SchedulerParams::new(Gas(maxgas.max(u64::from(c))), c, maxlen);
                p.lim = lim.min(maxlen / 2);
                p.maxhotr = hotr;
                p.maxrelaxnum = relaxnum;
                p.maxrelaxrate = relaxrate;
                p.target_inc_rate = target;
                p.target_scale = scale;
                if reads_only {
                    p.chain_update = ChainUpdate::ReadsOnly;
                }
                if disj {
                    p.hot_read_region = HotReadRegion::Disjunction;
                }
                p
            },
        )
}

pub fn arb_case() -> impl Strategy<Value = (Vec<Transaction>, usize, SchedulerParams)> {
    (arb_txs(80, RESOURCES, 60), 1usize..=12, arb_params())
}

pub fn build(txs: &[Transaction], cap: usize, params: &SchedulerParams) -> (Block, SchedulingReport, Mempool) {
    let mut pool = Mempool::new(cap);
    pool.push(txs.to_vec()).unwrap();
    let (block, report) = create_good_block(&mut pool, params).unwrap();
    (block, report, pool)
}

/// Straight-line replay of the resource map over the built block: returns
/// each admitted transaction's chain cost.
pub fn replay_chain_costs(block: &Block, update: ChainUpdate) -> Vec<u64> {
    let mut resmap: HashMap<ResourceId, u64> = HashMap::new();
    block
        .txs()
        .iter()
        .map(|tx| {
            let chain = tx
                .read_set()
                .iter()
                .filter_map(|r| resmap.get(r).copied())
                .max()
                .unwrap_or(0);
            let recorded = match update {
                ChainUpdate::IncludeWriter => chain + tx.gas().get(),
                ChainUpdate::ReadsOnly => chain,
            };
            for w in tx.write_set() {
                let e = resmap.entry(*w).or_insert(0);
                *e = (*e).max(recorded);
            }
            chain
        })
        .collect()
}

pub type Check = Result<(), TestCaseError>;

/// The block is a subsequence of arrival order and, per client, a prefix of
/// that client's transactions; everything else is back in the mempool.
pub fn check_client_order(txs: &[Transaction], cap: usize, params: &SchedulerParams) -> Check {
    let (block, report, pool) = build(txs, cap, params);
    prop_assert!(block.check_invariants().is_ok());
    let included: std::collections::HashSet<_> = block.txs().iter().map(|t| t.id()).collect();
    let mut cut: HashMap<ClientId, bool> = HashMap::new();
    for tx in txs {
        let stopped = cut.entry(tx.sender()).or_insert(false);
        if included.contains(&tx.id()) {
            prop_assert!(!*stopped, "{:?} included after an earlier skip of its client", tx.id());
        } else {
            *stopped = true;
        }
    }
    let order: Vec<_> = txs.iter().map(|t| t.id()).filter(|id| included.contains(id)).collect();
    let got: Vec<_> = block.txs().iter().map(|t| t.id()).collect();
    prop_assert_eq!(got, order);
    for client in &report.skipped_clients {
        prop_assert!(txs.iter().any(|t| t.sender() == *client && !included.contains(&t.id())));
    }
    let rest: Vec<_> = txs.iter().map(|t| t.id()).filter(|id| !included.contains(id)).collect();
    let pending: Vec<_> = pool.iter().map(|t| t.id()).collect();
    prop_assert_eq!(pending, rest);
    Ok(())
}

pub fn check_chain_bound(txs: &[Transaction], cap: usize, params: &SchedulerParams) -> Check {
    let (block, report, _) = build(txs, cap, params);
    let replayed = replay_chain_costs(&block, params.chain_update);
    prop_assert_eq!(report.admissions.len(), block.len());
    for (adm, chain) in report.admissions.iter().zip(replayed) {
        prop_assert_eq!(adm.chain_cost.get(), chain);
        prop_assert!(chain + adm.gas.get() <= adm.seqlimit.get());
        prop_assert!(adm.seqlimit <= params.max_seqlimit());
        prop_assert!(adm.block_gas.get() <= adm.seqlimit.get() * u64::from(params.concurrency));
    }
    Ok(())
}

pub fn check_caps(txs: &[Transaction], cap: usize, params: &SchedulerParams) -> Check {
    let (block, report, _) = build(txs, cap, params);
    prop_assert!(block.len() <= params.maxlen);
    // Relaxation may also tighten seqlimit, so the cap is the loosest one in
    // force while the block was built.
    let loosest = report.admissions.iter().map(|a| a.seqlimit).max().unwrap_or(Gas::ZERO);
    prop_assert!(block.gas().get() <= loosest.get() * u64::from(params.concurrency));
    let sum: u64 = block.txs().iter().map(|t| t.gas().get()).sum();
    prop_assert_eq!(block.gas().get(), sum);
    Ok(())
}

pub fn check_relaxation(txs: &[Transaction], cap: usize, params: &SchedulerParams) -> Check {
    let (_, report, _) = build(txs, cap, params);
    prop_assert!(report.relaxations_used <= params.maxrelaxnum);
    prop_assert!(report.final_seqlimit <= params.max_seqlimit());
    prop_assert!(report.final_seqlimit >= Gas(1));
    if report.relaxations_used == 0 {
        prop_assert_eq!(report.final_seqlimit, params.base_seqlimit());
    }
    Ok(())
}

/// Feeds `txs` batch by batch and checks no resource's chain cost drops.
pub fn check_resmap_monotone(txs: &[Transaction], cap: usize, params: &SchedulerParams, seqlimit: u64) -> Check {
    let mut state = BlockState::new();
    let mut before: Vec<Option<Gas>> = vec![None; RESOURCES as usize];
    for chunk in txs.chunks(cap) {
        let batch = Batch::new(chunk.to_vec(), cap).unwrap();
        schedule_batch(&mut state, batch, Gas(seqlimit), params);
        for r in 0..RESOURCES {
            let now = state.resmap.peek(ResourceId(r));
            let prev = before[r as usize];
            prop_assert!(prev.is_none() || now >= prev, "resource {} went from {:?} to {:?}", r, prev, now);
            before[r as usize] = now;
        }
    }
    Ok(())
}

pub fn check_determinism(txs: &[Transaction], cap: usize, params: &SchedulerParams) -> Check {
    let (b1, r1, p1) = build(txs, cap, params);
    let (b2, r2, p2) = build(txs, cap, params);
    prop_assert_eq!(b1.txs(), b2.txs());
    prop_assert_eq!(r1, r2);
    let ids1: Vec<_> = p1.iter().map(|t| t.id()).collect();
    let ids2: Vec<_> = p2.iter().map(|t| t.id()).collect();
    prop_assert_eq!(ids1, ids2);
    Ok(())
}

pub fn check_access_bound(txs: &[Transaction], cap: usize, params: &SchedulerParams) -> Check {
    let (_, report, _) = build(txs, cap, params);
    let total: u64 = txs.iter().map(|t| t.accesses() as u64).sum();
    prop_assert!(report.resmap_accesses <= 3 * total);
    Ok(())
}

/// resmap accesses for one block over `n` low-contention transactions with
/// five accesses each.
pub fn resmap_accesses_for(n: usize) -> u64 {
    use anthemius::workload::{IntRange, Workload, WorkloadConfig};

    let cfg = WorkloadConfig {
        num_resources: 1_000_000,
        resource_zipf_s: 0.0,
        num_clients: 1_000_000,
        client_zipf_s: 0.0,
        reads_per_tx: IntRange::new(3, 3),
        writes_per_tx: IntRange::new(2, 2),
        gas_range: IntRange::new(10, 10),
        hot_resources: 0,
        hot_write_prob: 0.0,
        seed: 5,
    };
    let w = Workload::new(cfg).unwrap();
    let mut pool = Mempool::new(1_000);
    for b in 0..(n / 1_000) {
        pool.push(w.batch(b as u64, 1_000, (b * 1_000) as u64).into_txs()).unwrap();
    }
    let params = SchedulerParams::new(Gas(10 * n as u64), 4, n);
    let (block, report) = create_good_block(&mut pool, &params).unwrap();
    assert!(block.len() > n * 9 / 10, "only {} of {n} admitted", block.len());
    report.resmap_accesses
}
