// Copyright (c) The Anthemius Contributors
// SPDX-License-Identifier: Apache-2.0

//! Seeded generator of contended transaction batches.
//!
//! Senders and resources are drawn from Zipf distributions by inverse CDF over
//! precomputed cumulative weights; rank `k` has weight `1 / k^s`. Resource
//! sets are drawn without replacement by rejection. Randomness comes from
//! ChaCha8 seeded per batch with `splitmix64(seed ^ splitmix64(batch_index))`,
//! so every batch is reproducible on its own and across platforms.
//!
//! An optional hot set sits on top of the Zipf draws: with probability
//! `hot_write_prob` a transaction also reads and writes one of the
//! `hot_resources` most popular resources, chosen uniformly. This models a
//! handful of pools or contracts that a large share of traffic goes through,
//! which a single Zipf exponent cannot express without making every access
//! contended.
//!
//! # Config file
//!
//! Custom workloads are TOML files with one key per field:
//!
//! ```toml
//! num_resources = 1000
//! resource_zipf_s = 1.1
//! num_clients = 5000
//! client_zipf_s = 0.4
//! reads_per_tx = [1, 4]
//! writes_per_tx = [1, 2]
//! gas_range = [50, 500]
//! hot_resources = 2     # optional, default 0
//! hot_write_prob = 0.25 # optional, default 0
//! seed = 7              # optional, default 0
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Batch, ClientId, Gas, ResourceId, Transaction, TxId};

/// Inclusive integer range, written `[lo, hi]` in config files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[u64; 2]", into = "[u64; 2]")]
pub struct IntRange {
    pub lo: u64,
    pub hi: u64,
}

impl IntRange {
    pub const fn new(lo: u64, hi: u64) -> Self {
        IntRange { lo, hi }
    }

    pub fn midpoint(self) -> f64 {
        (self.lo as f64 + self.hi as f64) / 2.0
    }

    fn sample(self, rng: &mut ChaCha8Rng) -> u64 {
        rng.random_range(self.lo..=self.hi)
    }
}

impl From<[u64; 2]> for IntRange {
    fn from([lo, hi]: [u64; 2]) -> Self {
        IntRange { lo, hi }
    }
}

impl From<IntRange> for [u64; 2] {
    fn from(r: IntRange) -> Self {
        [r.lo, r.hi]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadConfig {
    pub num_resources: u64,
    /// Popularity skew of resources; 0 is uniform.
    pub resource_zipf_s: f64,
    pub num_clients: u64,
    /// Skew of sender repetition; 0 is uniform.
    pub client_zipf_s: f64,
    pub reads_per_tx: IntRange,
    pub writes_per_tx: IntRange,
    pub gas_range: IntRange,
    /// Size of an optional hot set, made of the most popular resources.
    #[serde(default)]
    pub hot_resources: u64,
    /// Chance that a transaction also reads and writes one resource drawn
    /// uniformly from the hot set.
    #[serde(default)]
    pub hot_write_prob: f64,
    #[serde(default)]
    pub seed: u64,
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidWorkload(msg));
        for (name, r) in [
            ("reads_per_tx", self.reads_per_tx),
            ("writes_per_tx", self.writes_per_tx),
            ("gas_range", self.gas_range),
        ] {
            if r.lo > r.hi {
                return bad(format!("{name} is empty: [{}, {}]", r.lo, r.hi));
            }
        }
        if self.gas_range.lo == 0 {
            return bad("gas_range must start at 1 or more".into());
        }
        if self.num_clients == 0 {
            return bad("num_clients must be positive".into());
        }
        let widest = self.reads_per_tx.hi.max(self.writes_per_tx.hi);
        if self.num_resources < widest.max(1) {
            return bad(format!(
                "num_resources ({}) is smaller than the largest access set ({widest})",
                self.num_resources
            ));
        }
        if self.hot_resources > self.num_resources {
            return bad(format!(
                "hot_resources ({}) exceeds num_resources ({})",
                self.hot_resources, self.num_resources
            ));
        }
        if !(0.0..=1.0).contains(&self.hot_write_prob) {
            return bad(format!("hot_write_prob must lie in [0, 1], got {}", self.hot_write_prob));
        }
        if self.hot_write_prob > 0.0 && self.hot_resources == 0 {
            return bad("hot_write_prob needs a non-empty hot set".into());
        }
        for (name, s) in [
            ("resource_zipf_s", self.resource_zipf_s),
            ("client_zipf_s", self.client_zipf_s),
        ] {
            if !(s.is_finite() && s >= 0.0) {
                return bad(format!("{name} must be finite and non-negative, got {s}"));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: WorkloadConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        WorkloadConfig::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// The five benchmark workload families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    P2pTx,
    DexAvg,
    DexBursty,
    Nft,
    Mixed,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::P2pTx,
        Preset::DexAvg,
        Preset::DexBursty,
        Preset::Nft,
        Preset::Mixed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::P2pTx => "p2ptx",
            Preset::DexAvg => "dexavg",
            Preset::DexBursty => "dexbursty",
            Preset::Nft => "nft",
            Preset::Mixed => "mixed",
        }
    }

    /// Approximate parameters for each family. The values are chosen to
    /// reproduce the qualitative contention ordering of the families, not
    /// measured from any trace.
    ///
    /// * `p2ptx`: transfers with two reads and two writes over a large,
    ///   mildly skewed account space.
    /// * `dexavg`: swaps against a moderately skewed set of pools.
    /// * `dexbursty`: swaps concentrated on a small hot set of pools.
    /// * `nft`: few very active senders minting against one dominant
    ///   collection.
    /// * `mixed`: everything at once, with a wide spread of execution costs.
    pub fn config(self) -> WorkloadConfig {
        match self {
            Preset::P2pTx => WorkloadConfig {
                num_resources: 100_000,
                resource_zipf_s: 0.6,
                num_clients: 50_000,
                client_zipf_s: 0.3,
                reads_per_tx: IntRange::new(2, 2),
                writes_per_tx: IntRange::new(2, 2),
                gas_range: IntRange::new(50, 150),
                hot_resources: 0,
                hot_write_prob: 0.0,
                seed: 0,
            },
            Preset::DexAvg => WorkloadConfig {
                num_resources: 100_000,
                resource_zipf_s: 0.8,
                num_clients: 20_000,
                client_zipf_s: 0.5,
                reads_per_tx: IntRange::new(2, 4),
                writes_per_tx: IntRange::new(1, 2),
                gas_range: IntRange::new(80, 200),
                hot_resources: 4,
                hot_write_prob: 0.3,
                seed: 0,
            },
            Preset::DexBursty => WorkloadConfig {
                num_resources: 100_000,
                resource_zipf_s: 0.95,
                num_clients: 20_000,
                client_zipf_s: 0.5,
                reads_per_tx: IntRange::new(2, 4),
                writes_per_tx: IntRange::new(1, 2),
                gas_range: IntRange::new(80, 200),
                hot_resources: 1,
                hot_write_prob: 0.3,
                seed: 0,
            },
            Preset::Nft => WorkloadConfig {
                num_resources: 5_000,
                resource_zipf_s: 1.0,
                num_clients: 200,
                client_zipf_s: 1.2,
                reads_per_tx: IntRange::new(1, 3),
                writes_per_tx: IntRange::new(1, 2),
                gas_range: IntRange::new(100, 300),
                hot_resources: 1,
                hot_write_prob: 0.5,
                seed: 0,
            },
            Preset::Mixed => WorkloadConfig {
                num_resources: 20_000,
                resource_zipf_s: 0.9,
                num_clients: 10_000,
                client_zipf_s: 0.6,
                reads_per_tx: IntRange::new(1, 5),
                writes_per_tx: IntRange::new(1, 3),
                gas_range: IntRange::new(20, 2_000),
                hot_resources: 3,
                hot_write_prob: 0.3,
                seed: 0,
            },
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::InvalidWorkload(format!(
                    "unknown preset {s:?}; expected one of p2ptx, dexavg, dexbursty, nft, mixed"
                ))
            })
    }
}

pub fn preset(name: &str) -> Result<WorkloadConfig> {
    Ok(name.parse::<Preset>()?.config())
}

/// Zipf distribution over ranks `0..n` (rank 0 most popular).
#[derive(Clone, Debug)]
pub struct Zipf {
    cumulative: Vec<f64>,
}

impl Zipf {
    pub fn new(n: u64, s: f64) -> Self {
        let mut acc = 0.0;
        let cumulative = (1..=n.max(1))
            .map(|k| {
                acc += (k as f64).powf(-s);
                acc
            })
            .collect();
        Zipf { cumulative }
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    /// Probability of rank `k`.
    pub fn probability(&self, k: usize) -> f64 {
        let total = *self.cumulative.last().expect("non-empty");
        let prev = if k == 0 { 0.0 } else { self.cumulative[k - 1] };
        (self.cumulative[k] - prev) / total
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("non-empty");
        let u = rng.random::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }
}

/// Validated config with its sampling tables.
#[derive(Clone, Debug)]
pub struct Workload {
    cfg: WorkloadConfig,
    resources: Zipf,
    clients: Zipf,
}

impl Workload {
    pub fn new(cfg: WorkloadConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Workload {
            resources: Zipf::new(cfg.num_resources, cfg.resource_zipf_s),
            clients: Zipf::new(cfg.num_clients, cfg.client_zipf_s),
            cfg,
        })
    }

    pub fn config(&self) -> &WorkloadConfig {
        &self.cfg
    }

    /// Generates batch number `index`, numbering its transactions from
    /// `first_id`.
    pub fn batch(&self, index: u64, size: usize, first_id: u64) -> Batch {
        let mut rng = ChaCha8Rng::seed_from_u64(batch_seed(self.cfg.seed, index));
        let txs = (0..size as u64)
            .map(|i| self.transaction(&mut rng, TxId(first_id + i)))
            .collect();
        Batch::new(txs, size).expect("size matches capacity")
    }

    fn transaction(&self, rng: &mut ChaCha8Rng, id: TxId) -> Transaction {
        let sender = ClientId(self.clients.sample(rng) as u64);
        let nreads = self.cfg.reads_per_tx.sample(rng) as usize;
        let nwrites = self.cfg.writes_per_tx.sample(rng) as usize;
        let mut reads = self.distinct_resources(rng, nreads);
        let mut writes = self.distinct_resources(rng, nwrites);
        if self.cfg.hot_resources > 0 && rng.random_bool(self.cfg.hot_write_prob) {
            let hot = ResourceId(rng.random_range(0..self.cfg.hot_resources));
            for set in [&mut reads, &mut writes] {
                if !set.contains(&hot) {
                    set.push(hot);
                }
            }
        }
        let gas = Gas(self.cfg.gas_range.sample(rng));
        Transaction::new(id, sender, reads, writes, gas).expect("gas_range starts at 1")
    }

    fn distinct_resources(&self, rng: &mut ChaCha8Rng, count: usize) -> Vec<ResourceId> {
        let mut picked: Vec<u64> = Vec::with_capacity(count);
        let mut attempts = 0;
        while picked.len() < count && attempts < 64 * count.max(1) {
            attempts += 1;
            let r = self.resources.sample(rng) as u64;
            if !picked.contains(&r) {
                picked.push(r);
            }
        }
        // Extremely skewed tables can starve rejection; fall back to the most
        // popular unused ranks.
        let mut next = 0u64;
        while picked.len() < count {
            if !picked.contains(&next) {
                picked.push(next);
            }
            next += 1;
        }
        picked.into_iter().map(ResourceId).collect()
    }
}

/// Batch of `size` transactions with ids `0..size`, drawn from `cfg.seed`.
pub fn generate_batch(cfg: &WorkloadConfig, size: usize) -> Result<Batch> {
    Ok(Workload::new(cfg.clone())?.batch(0, size, 0))
}

/// Per-batch seed; `index` streams are independent for a fixed `seed`.
pub fn batch_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
