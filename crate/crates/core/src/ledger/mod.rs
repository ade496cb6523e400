// Copyright 2026 The PoAI Simnet Authors
// SPDX-License-Identifier: Apache-2.0

//! Private hash-chained ledger.
//!
//! Blocks chain by `prev_hash`, commit to their entries through
//! `entries_root`, and carry their own header hash. Every entry is signed by
//! its author; authors become known to the chain through self-signed
//! `NODE_SPEC` entries, so a dump verifies without outside key material.

mod block;
mod dump;
mod entry;
mod oracle;
mod records;

pub use block::{verify_chain, ChainFault, ChainVerdict, KeyRing, Ledger, LedgerBlock, LedgerError};
pub use dump::{decode_dump, encode_dump, verify_dump, DumpFault, DumpVerdict};
pub use entry::{EntryKind, LedgerEntry};
pub use oracle::{oracle_mirror, PoolCommand};
pub use records::{
    ChallengeRecord, JobStatusRecord, NodeSpecRecord, Payload, PoolEventRecord, RewardLine, RewardRecord,
};
