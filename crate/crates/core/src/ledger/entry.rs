// Copyright 2026 The PoAI Simnet Authors
// SPDX-License-Identifier: Apache-2.0

use serde::Serialize;

use super::records::Payload;
use crate::codec::{Canonical, CodecError, Reader, Writer};
use crate::crypto::{tagged_hash, Digest, PublicKey, Signature, SigningKey};
use crate::ids::DeedId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EntryKind {
    NodeSpec,
    JobAssign,
    JobStatus,
    ProgressProof,
    Challenge,
    RewardRecord,
    PoolEvent,
}

impl EntryKind {
    pub const ALL: [EntryKind; 7] = [
        EntryKind::NodeSpec,
        EntryKind::JobAssign,
        EntryKind::JobStatus,
        EntryKind::ProgressProof,
        EntryKind::Challenge,
        EntryKind::RewardRecord,
        EntryKind::PoolEvent,
    ];

    pub fn tag(self) -> u8 {
        match self {
            EntryKind::NodeSpec => 1,
            EntryKind::JobAssign => 2,
            EntryKind::JobStatus => 3,
            EntryKind::ProgressProof => 4,
            EntryKind::Challenge => 5,
            EntryKind::RewardRecord => 6,
            EntryKind::PoolEvent => 7,
        }
    }

    pub fn from_tag(tag: u8) -> Option<EntryKind> {
        EntryKind::ALL.into_iter().find(|k| k.tag() == tag)
    }
}

/// A signed ledger record. The signature covers kind, author and payload bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerEntry {
    pub kind: EntryKind,
    pub payload: Vec<u8>,
    pub author: DeedId,
    pub signature: Signature,
}

fn signing_message(kind: EntryKind, author: &DeedId, payload: &[u8]) -> Digest {
    tagged_hash("poai.entry.sig", &[&[kind.tag()], author.as_str().as_bytes(), payload])
}

impl LedgerEntry {
    pub fn signed(payload: &Payload, author: DeedId, key: &SigningKey) -> Self {
        let kind = payload.kind();
        let bytes = payload.encode();
        let signature = key.sign(signing_message(kind, &author, &bytes).as_bytes());
        LedgerEntry {
            kind,
            payload: bytes,
            author,
            signature,
        }
    }

    pub fn verify(&self, key: &PublicKey) -> bool {
        key.verify(
            signing_message(self.kind, &self.author, &self.payload).as_bytes(),
            &self.signature,
        )
    }

    pub fn decode_payload(&self) -> Result<Payload, CodecError> {
        Payload::decode(self.kind, &self.payload)
    }

    pub fn digest(&self) -> Digest {
        tagged_hash("poai.entry", &[&self.to_canonical_bytes()])
    }
}

impl Canonical for EntryKind {
    fn encode_into(&self, w: &mut Writer) {
        w.put_u8(self.tag());
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        let tag = r.get_u8()?;
        EntryKind::from_tag(tag).ok_or(CodecError::InvalidTag { what: "entry kind", tag })
    }
}

impl Canonical for LedgerEntry {
    fn encode_into(&self, w: &mut Writer) {
        self.kind.encode_into(w);
        w.put_bytes(&self.payload);
        self.author.encode_into(w);
        self.signature.encode_into(w);
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(LedgerEntry {
            kind: EntryKind::decode_from(r)?,
            payload: r.get_bytes()?,
            author: DeedId::decode_from(r)?,
            signature: Signature::decode_from(r)?,
        })
    }
}
