// Copyright 2026 The PoAI Simnet Authors
// SPDX-License-Identifier: Apache-2.0

//! Binary ledger dump: a sequence of frames, each a big-endian `u32` length
//! followed by one canonically encoded block. No header, no trailer.

use serde::Serialize;

use super::block::{verify_chain, ChainFault, ChainVerdict, LedgerBlock};
use crate::codec::Canonical;

pub fn encode_dump(blocks: &[LedgerBlock]) -> Vec<u8> {
    let mut out = Vec::new();
    for b in blocks {
        let bytes = b.to_canonical_bytes();
        out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
        out.extend_from_slice(&bytes);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DumpFault {
    /// The input ends inside a frame.
    Truncated { offset: usize, blocks_read: usize },
    /// A frame's contents do not decode as a block.
    Malformed { offset: usize, block: usize, reason: String },
    Chain { height: u64, fault: ChainFault },
}

impl DumpFault {
    /// Height of the first block that could not be trusted. Block heights
    /// equal their position in the dump.
    pub fn height(&self) -> u64 {
        match self {
            DumpFault::Truncated { blocks_read, .. } => *blocks_read as u64,
            DumpFault::Malformed { block, .. } => *block as u64,
            DumpFault::Chain { height, .. } => *height,
        }
    }
}

impl std::fmt::Display for DumpFault {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DumpFault::Truncated { offset, blocks_read } => {
                write!(f, "truncated at byte {offset} after {blocks_read} complete blocks")
            }
            DumpFault::Malformed { offset, block, reason } => {
                write!(f, "malformed block {block} at byte {offset}: {reason}")
            }
            DumpFault::Chain { height, fault } => write!(f, "integrity failure at height {height}: {fault}"),
        }
    }
}

pub fn decode_dump(bytes: &[u8]) -> Result<Vec<LedgerBlock>, DumpFault> {
    let mut blocks = Vec::new();
    let mut pos = 0usize;
    while pos < bytes.len() {
        let truncated = DumpFault::Truncated {
            offset: pos,
            blocks_read: blocks.len(),
        };
        let Some(len) = bytes.get(pos..pos + 4) else {
            return Err(truncated);
        };
        let len = u32::from_be_bytes(len.try_into().expect("four bytes")) as usize;
        let Some(frame) = bytes.get(pos + 4..pos + 4 + len) else {
            return Err(truncated);
        };
        let block = LedgerBlock::from_canonical_bytes(frame).map_err(|e| DumpFault::Malformed {
            offset: pos,
            block: blocks.len(),
            reason: e.to_string(),
        })?;
        blocks.push(block);
        pos += 4 + len;
    }
    Ok(blocks)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DumpVerdict {
    Ok { blocks: usize, head_height: u64 },
    Failed(DumpFault),
}

impl DumpVerdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, DumpVerdict::Ok { .. })
    }
}

pub fn verify_dump(bytes: &[u8]) -> DumpVerdict {
    let blocks = match decode_dump(bytes) {
        Ok(b) => b,
        Err(fault) => return DumpVerdict::Failed(fault),
    };
    match verify_chain(&blocks) {
        ChainVerdict::Ok { head_height } => DumpVerdict::Ok {
            blocks: blocks.len(),
            head_height,
        },
        ChainVerdict::Failed { height, fault } => DumpVerdict::Failed(DumpFault::Chain { height, fault }),
    }
}
