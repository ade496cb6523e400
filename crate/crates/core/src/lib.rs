// Copyright 2026 The PoAI Simnet Authors
// SPDX-License-Identifier: Apache-2.0

//! Deterministic simulator for a Proof-of-AI decentralized compute market.
//!
//! The crate is organised around the protocol layers:
//!
//! * [`tokenomics`]: epoch reward allocation from alive time and power score.
//! * [`escrow`]: job funding, settlement, review locks and challenges.
//! * [`ledger`]: the private hash-chained ledger and the oracle that mirrors
//!   committed entries into pool commands.
//! * [`distribution`]: map/reduce job distribution with hash-chain progress proofs.
//! * [`pipeline`]: the low-code pipeline runtime and static plugin vetting.
//! * [`simnet`]: the discrete-event network that ties everything together.
//! * [`cli`]: the `poai` operator commands.

pub mod capability;
pub mod cli;
pub mod codec;
pub mod crypto;
pub mod distribution;
pub mod escrow;
pub mod ids;
pub mod ledger;
pub mod pipeline;
pub mod simnet;
pub mod token;
pub mod tokenomics;

pub use crate::ids::{ChallengeId, DeedId, JobId};
pub use crate::token::Token;

/// Version string written into run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
