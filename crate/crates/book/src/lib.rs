// Copyright (c) The Anthemius Contributors
// SPDX-License-Identifier: Apache-2.0

//! Compiles the guide's listings so they stay in sync with the library.

#[doc = include_str!("../../../README.md")]
pub mod readme {}

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/transactions.md")]
pub mod transactions {}

#[doc = include_str!("../../../book/src/block-construction.md")]
pub mod block_construction {}

#[doc = include_str!("../../../book/src/execution.md")]
pub mod execution {}

#[doc = include_str!("../../../book/src/workloads.md")]
pub mod workloads {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
