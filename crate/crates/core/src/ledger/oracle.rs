// Copyright 2026 The PoAI Simnet Authors
// SPDX-License-Identifier: Apache-2.0

use serde::Serialize;

use super::entry::LedgerEntry;
use super::records::{ChallengeRecord, Payload};
use crate::escrow::{FinalStatus, Vote};
use crate::ids::{ChallengeId, DeedId, JobId};
use crate::token::Token;

/// A state change the on-chain pool must apply for a committed entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum PoolCommand {
    SettleJob {
        job_id: JobId,
        status: FinalStatus,
    },
    /// Moves `amount` from the reward pool to the deed balance.
    Credit {
        deed_id: DeedId,
        amount: Token,
    },
    OpenChallenge {
        job_id: JobId,
        challenger: DeedId,
        bond: Token,
        rng_seed: u64,
    },
    ResolveChallenge {
        challenge_id: ChallengeId,
        votes: Vec<(DeedId, Vote)>,
    },
}

/// Pure translation of one committed entry into pool commands.
/// Kinds with no on-chain effect, and undecodable payloads, map to nothing.
pub fn oracle_mirror(entry: &LedgerEntry) -> Vec<PoolCommand> {
    let Ok(payload) = entry.decode_payload() else {
        return Vec::new();
    };
    match payload {
        Payload::JobStatus(r) => vec![PoolCommand::SettleJob {
            job_id: r.job_id,
            status: r.status,
        }],
        Payload::RewardRecord(r) => r
            .lines
            .into_iter()
            .map(|l| PoolCommand::Credit {
                deed_id: l.deed_id,
                amount: l.amount,
            })
            .collect(),
        Payload::Challenge(ChallengeRecord::Open {
            job_id,
            challenger,
            bond,
            rng_seed,
        }) => vec![PoolCommand::OpenChallenge {
            job_id,
            challenger,
            bond,
            rng_seed,
        }],
        Payload::Challenge(ChallengeRecord::Resolve { challenge_id, votes }) => {
            vec![PoolCommand::ResolveChallenge { challenge_id, votes }]
        }
        Payload::NodeSpec(_) | Payload::JobAssign(_) | Payload::ProgressProof(_) | Payload::PoolEvent(_) => {
            Vec::new()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{Digest, SigningKey};
    use crate::ledger::{JobStatusRecord, PoolEventRecord, RewardLine, RewardRecord};
    use crate::ledger::EntryKind;

    fn sign(p: Payload) -> LedgerEntry {
        LedgerEntry::signed(&p, DeedId::new("v"), &SigningKey::derive("t", b"v"))
    }

    #[test]
    fn job_status_maps_to_settle() {
        let job_id: JobId = "s:1".parse().unwrap();
        let e = sign(Payload::JobStatus(JobStatusRecord {
            job_id: job_id.clone(),
            status: FinalStatus::Done,
            aggregate_digest: Some(Digest::ZERO),
            reason: String::new(),
        }));
        assert_eq!(
            oracle_mirror(&e),
            vec![PoolCommand::SettleJob {
                job_id,
                status: FinalStatus::Done
            }]
        );
    }

    #[test]
    fn reward_record_maps_line_by_line() {
        let e = sign(Payload::RewardRecord(RewardRecord {
            epoch: 1,
            lines: vec![
                RewardLine {
                    deed_id: DeedId::new("a"),
                    share: 0.75,
                    amount: Token::from_integer(75),
                },
                RewardLine {
                    deed_id: DeedId::new("b"),
                    share: 0.25,
                    amount: Token::from_integer(25),
                },
            ],
        }));
        let cmds = oracle_mirror(&e);
        assert_eq!(cmds.len(), 2);
        assert!(matches!(&cmds[1], PoolCommand::Credit { deed_id, .. } if deed_id.as_str() == "b"));
    }

    #[test]
    fn inert_kinds_and_garbage_map_to_nothing() {
        let e = sign(Payload::PoolEvent(PoolEventRecord::Rollover {
            epoch: 3,
            amount: Token::zero(),
        }));
        assert!(oracle_mirror(&e).is_empty());
        let mut bad = e.clone();
        bad.kind = EntryKind::JobStatus;
        assert!(oracle_mirror(&bad).is_empty());
    }
}
