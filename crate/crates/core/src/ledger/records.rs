// Copyright 2026 The PoAI Simnet Authors
// SPDX-License-Identifier: Apache-2.0

use serde::Serialize;

use super::entry::EntryKind;
use crate::capability::Capability;
use crate::codec::{Canonical, CodecError, Reader, Writer};
use crate::crypto::{Digest, PublicKey};
use crate::distribution::{Assignment, ProgressProof};
use crate::escrow::{FinalStatus, ReviewVerdict, Vote};
use crate::ids::{ChallengeId, DeedId, JobId};
use crate::token::Token;

/// A node's self-signed registration: identity key, hardware and region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeSpecRecord {
    pub deed_id: DeedId,
    #[serde(skip)]
    pub owner_key: PublicKey,
    pub capability: Capability,
    pub region: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobStatusRecord {
    pub job_id: JobId,
    pub status: FinalStatus,
    pub aggregate_digest: Option<Digest>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ChallengeRecord {
    Open {
        job_id: JobId,
        challenger: DeedId,
        bond: Token,
        rng_seed: u64,
    },
    Resolve {
        challenge_id: ChallengeId,
        votes: Vec<(DeedId, Vote)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewardLine {
    pub deed_id: DeedId,
    pub share: f64,
    pub amount: Token,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewardRecord {
    pub epoch: u64,
    pub lines: Vec<RewardLine>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PoolEventRecord {
    Genesis {
        config_digest: Digest,
        total_supply: Token,
        seed: u64,
    },
    JobFunded {
        job_id: JobId,
        reward: Token,
    },
    ReviewResolved {
        job_id: JobId,
        verdict: ReviewVerdict,
        amount: Token,
    },
    Rollover {
        epoch: u64,
        amount: Token,
    },
    Penalty {
        deed_id: DeedId,
        epoch: u64,
        delta: f64,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    NodeSpec(NodeSpecRecord),
    JobAssign(Assignment),
    JobStatus(JobStatusRecord),
    ProgressProof(ProgressProof),
    Challenge(ChallengeRecord),
    RewardRecord(RewardRecord),
    PoolEvent(PoolEventRecord),
}

impl Payload {
    pub fn kind(&self) -> EntryKind {
        match self {
            Payload::NodeSpec(_) => EntryKind::NodeSpec,
            Payload::JobAssign(_) => EntryKind::JobAssign,
            Payload::JobStatus(_) => EntryKind::JobStatus,
            Payload::ProgressProof(_) => EntryKind::ProgressProof,
            Payload::Challenge(_) => EntryKind::Challenge,
            Payload::RewardRecord(_) => EntryKind::RewardRecord,
            Payload::PoolEvent(_) => EntryKind::PoolEvent,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        match self {
            Payload::NodeSpec(r) => r.to_canonical_bytes(),
            Payload::JobAssign(r) => r.to_canonical_bytes(),
            Payload::JobStatus(r) => r.to_canonical_bytes(),
            Payload::ProgressProof(r) => r.to_canonical_bytes(),
            Payload::Challenge(r) => r.to_canonical_bytes(),
            Payload::RewardRecord(r) => r.to_canonical_bytes(),
            Payload::PoolEvent(r) => r.to_canonical_bytes(),
        }
    }

    pub fn decode(kind: EntryKind, bytes: &[u8]) -> Result<Payload, CodecError> {
        Ok(match kind {
            EntryKind::NodeSpec => Payload::NodeSpec(NodeSpecRecord::from_canonical_bytes(bytes)?),
            EntryKind::JobAssign => Payload::JobAssign(Assignment::from_canonical_bytes(bytes)?),
            EntryKind::JobStatus => Payload::JobStatus(JobStatusRecord::from_canonical_bytes(bytes)?),
            EntryKind::ProgressProof => Payload::ProgressProof(ProgressProof::from_canonical_bytes(bytes)?),
            EntryKind::Challenge => Payload::Challenge(ChallengeRecord::from_canonical_bytes(bytes)?),
            EntryKind::RewardRecord => Payload::RewardRecord(RewardRecord::from_canonical_bytes(bytes)?),
            EntryKind::PoolEvent => Payload::PoolEvent(PoolEventRecord::from_canonical_bytes(bytes)?),
        })
    }
}

impl Canonical for NodeSpecRecord {
    fn encode_into(&self, w: &mut Writer) {
        self.deed_id.encode_into(w);
        self.owner_key.encode_into(w);
        self.capability.encode_into(w);
        w.put_str(&self.region);
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(NodeSpecRecord {
            deed_id: DeedId::decode_from(r)?,
            owner_key: PublicKey::decode_from(r)?,
            capability: Capability::decode_from(r)?,
            region: r.get_str()?,
        })
    }
}

impl Canonical for JobStatusRecord {
    fn encode_into(&self, w: &mut Writer) {
        self.job_id.encode_into(w);
        self.status.encode_into(w);
        self.aggregate_digest.encode_into(w);
        w.put_str(&self.reason);
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(JobStatusRecord {
            job_id: JobId::decode_from(r)?,
            status: FinalStatus::decode_from(r)?,
            aggregate_digest: Option::decode_from(r)?,
            reason: r.get_str()?,
        })
    }
}

impl Canonical for ChallengeRecord {
    fn encode_into(&self, w: &mut Writer) {
        match self {
            ChallengeRecord::Open {
                job_id,
                challenger,
                bond,
                rng_seed,
            } => {
                w.put_u8(1);
                job_id.encode_into(w);
                challenger.encode_into(w);
                bond.encode_into(w);
                w.put_u64(*rng_seed);
            }
            ChallengeRecord::Resolve { challenge_id, votes } => {
                w.put_u8(2);
                challenge_id.encode_into(w);
                w.put_seq(votes);
            }
        }
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        match r.get_u8()? {
            1 => Ok(ChallengeRecord::Open {
                job_id: JobId::decode_from(r)?,
                challenger: DeedId::decode_from(r)?,
                bond: Token::decode_from(r)?,
                rng_seed: r.get_u64()?,
            }),
            2 => Ok(ChallengeRecord::Resolve {
                challenge_id: ChallengeId::decode_from(r)?,
                votes: r.get_seq()?,
            }),
            tag => Err(CodecError::InvalidTag { what: "challenge record", tag }),
        }
    }
}

impl Canonical for RewardLine {
    fn encode_into(&self, w: &mut Writer) {
        self.deed_id.encode_into(w);
        w.put_f64(self.share);
        self.amount.encode_into(w);
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(RewardLine {
            deed_id: DeedId::decode_from(r)?,
            share: r.get_f64()?,
            amount: Token::decode_from(r)?,
        })
    }
}

impl Canonical for RewardRecord {
    fn encode_into(&self, w: &mut Writer) {
        w.put_u64(self.epoch);
        w.put_seq(&self.lines);
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(RewardRecord {
            epoch: r.get_u64()?,
            lines: r.get_seq()?,
        })
    }
}

impl Canonical for PoolEventRecord {
    fn encode_into(&self, w: &mut Writer) {
        match self {
            PoolEventRecord::Genesis {
                config_digest,
                total_supply,
                seed,
            } => {
                w.put_u8(1);
                config_digest.encode_into(w);
                total_supply.encode_into(w);
                w.put_u64(*seed);
            }
            PoolEventRecord::JobFunded { job_id, reward } => {
                w.put_u8(2);
                job_id.encode_into(w);
                reward.encode_into(w);
            }
            PoolEventRecord::ReviewResolved { job_id, verdict, amount } => {
                w.put_u8(3);
                job_id.encode_into(w);
                verdict.encode_into(w);
                amount.encode_into(w);
            }
            PoolEventRecord::Rollover { epoch, amount } => {
                w.put_u8(4);
                w.put_u64(*epoch);
                amount.encode_into(w);
            }
            PoolEventRecord::Penalty {
                deed_id,
                epoch,
                delta,
                reason,
            } => {
                w.put_u8(5);
                deed_id.encode_into(w);
                w.put_u64(*epoch);
                w.put_f64(*delta);
                w.put_str(reason);
            }
        }
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(match r.get_u8()? {
            1 => PoolEventRecord::Genesis {
                config_digest: Digest::decode_from(r)?,
                total_supply: Token::decode_from(r)?,
                seed: r.get_u64()?,
            },
            2 => PoolEventRecord::JobFunded {
                job_id: JobId::decode_from(r)?,
                reward: Token::decode_from(r)?,
            },
            3 => PoolEventRecord::ReviewResolved {
                job_id: JobId::decode_from(r)?,
                verdict: ReviewVerdict::decode_from(r)?,
                amount: Token::decode_from(r)?,
            },
            4 => PoolEventRecord::Rollover {
                epoch: r.get_u64()?,
                amount: Token::decode_from(r)?,
            },
            5 => PoolEventRecord::Penalty {
                deed_id: DeedId::decode_from(r)?,
                epoch: r.get_u64()?,
                delta: r.get_f64()?,
                reason: r.get_str()?,
            },
            tag => return Err(CodecError::InvalidTag { what: "pool event", tag }),
        })
    }
}
