// Copyright (c) The Anthemius Contributors
// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Gas;

/// Block length used in the published benchmark setup.
pub const DEFAULT_MAXLEN: usize = 10_000;
pub const DEFAULT_MAXHOTR: u32 = 4;
pub const DEFAULT_MAXRELAXNUM: u32 = 2;
pub const DEFAULT_MAXRELAXRATE: f64 = 100.0;

/// How a newly included writer updates the resource map.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainUpdate {
    /// Store the chain cost including the writer's own gas.
    #[default]
    IncludeWriter,
    /// Store the chain cost of the reads only, as the pseudocode is written.
    /// Kept for differential tests.
    ReadsOnly,
}

/// Where in the block the hot-read rule applies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HotReadRegion {
    /// Only strictly between the first and the last `lim` slots.
    #[default]
    Interior,
    /// `len > lim || len < maxlen - lim`, which holds almost everywhere.
    /// Kept for differential tests.
    Disjunction,
}

/// Capacity knobs and tuning constants of the block builder.
///
/// The block may hold at most `maxgas` gas and `maxlen` transactions, and its
/// longest conflict chain is bounded by `seqlimit`, which starts at
/// `maxgas / concurrency` and can be relaxed when too few transactions of a
/// batch get in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchedulerParams {
    pub maxgas: Gas,
    /// Number of workers of the execution engine (`c`).
    pub concurrency: u32,
    pub maxlen: usize,
    /// Length of the warm-up and tail regions where hot reads are tolerated.
    pub lim: usize,
    pub maxhotr: u32,
    pub maxrelaxnum: u32,
    pub maxrelaxrate: f64,
    /// Inclusion-rate threshold in `[0, 1]` terms below which the handler
    /// relaxes `seqlimit`.
    pub target_inc_rate: f64,
    /// Multiplier applied to the observed inclusion rate when relaxing.
    pub target_scale: f64,
    pub chain_update: ChainUpdate,
    pub hot_read_region: HotReadRegion,
}

impl SchedulerParams {
    /// Parameters for blocks of `maxlen` transactions polled in batches of the
    /// same size: `lim = maxlen / 10`, `target_scale = 2 * maxlen / c` and
    /// `target_inc_rate = min(1, 2 / c)`.
    pub fn new(maxgas: Gas, concurrency: u32, maxlen: usize) -> Self {
        SchedulerParams {
            maxgas,
            concurrency,
            maxlen,
            lim: maxlen / 10,
            maxhotr: DEFAULT_MAXHOTR,
            maxrelaxnum: DEFAULT_MAXRELAXNUM,
            maxrelaxrate: DEFAULT_MAXRELAXRATE,
            target_inc_rate: default_target_inc_rate(concurrency, maxlen, maxlen),
            target_scale: default_target_scale(concurrency, maxlen),
            chain_update: ChainUpdate::default(),
            hot_read_region: HotReadRegion::default(),
        }
    }

    /// Full-scale setup: 10,000-transaction blocks with `lim = 1,000`.
    pub fn full_scale(maxgas: Gas, concurrency: u32) -> Self {
        SchedulerParams::new(maxgas, concurrency, DEFAULT_MAXLEN)
    }

    /// Initial per-worker budget, `floor(maxgas / c)`.
    pub fn base_seqlimit(&self) -> Gas {
        self.maxgas.per_worker(self.concurrency)
    }

    /// Upper bound on any relaxed `seqlimit`.
    pub fn max_seqlimit(&self) -> Gas {
        Gas(scale_floor(self.base_seqlimit(), self.maxrelaxrate).max(1))
    }

    /// `floor(maxgas / c * min(maxrelaxrate, rate * target_scale))`, never
    /// below one gas unit.
    pub fn relaxed_seqlimit(&self, rate: f64) -> Gas {
        let factor = self.maxrelaxrate.min(rate * self.target_scale);
        Gas(scale_floor(self.base_seqlimit(), factor).max(1))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.concurrency == 0 {
            return bad("concurrency must be at least 1".into());
        }
        if self.maxlen == 0 {
            return bad("maxlen must be at least 1".into());
        }
        if self.lim > self.maxlen / 2 {
            return bad(format!(
                "lim ({}) must not exceed maxlen / 2 ({})",
                self.lim,
                self.maxlen / 2
            ));
        }
        if self.maxhotr == 0 {
            return bad("maxhotr must be at least 1".into());
        }
        if self.base_seqlimit() == Gas::ZERO {
            return bad(format!(
                "maxgas ({}) must be at least the concurrency ({})",
                self.maxgas, self.concurrency
            ));
        }
        for (name, v) in [
            ("maxrelaxrate", self.maxrelaxrate),
            ("target_inc_rate", self.target_inc_rate),
            ("target_scale", self.target_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        Ok(())
    }
}

/// `min(1, 2 / c) * maxlen / batch_capacity`.
pub fn default_target_inc_rate(concurrency: u32, maxlen: usize, batch_capacity: usize) -> f64 {
    let c = f64::from(concurrency.max(1));
    (2.0 / c).min(1.0) * maxlen as f64 / batch_capacity.max(1) as f64
}

/// `2 * maxlen / c`.
pub fn default_target_scale(concurrency: u32, maxlen: usize) -> f64 {
    2.0 * maxlen as f64 / f64::from(concurrency.max(1))
}

fn scale_floor(base: Gas, factor: f64) -> u64 {
    let v = (base.get() as f64 * factor).floor();
    if v <= 0.0 || v.is_nan() {
        0
    } else if v >= u64::MAX as f64 {
        u64::MAX
    } else {
        v as u64
    }
}
