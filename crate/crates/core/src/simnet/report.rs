// Copyright 2026 The PoAI Simnet Authors
// SPDX-License-Identifier: Apache-2.0

//! Simulation report: one JSON object per line, discriminated by `type`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::broker::BrokerAudit;
use crate::crypto::Digest;
use crate::distribution::ProgressVerdict;
use crate::escrow::{ChallengeVerdict, ReviewVerdict};
use crate::ids::{ChallengeId, DeedId, JobId};
use crate::token::Token;
use crate::tokenomics::{AllocationEntry, RolloverReason};

/// Movements of tokens between balances and pools.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Flow {
    /// Sender balance into escrow.
    Escrowed,
    /// Escrow into the reward pool on a DONE job.
    Rewarded,
    /// Escrow into a review lock on a CANCELLED job.
    Locked,
    /// Review lock into the reward pool.
    ReleasedValid,
    /// Back to the job sender, from a lock or from the reward pool.
    Refunded,
    /// Challenger balance into the bond pool.
    BondPosted,
    BondReturned,
    /// Bond into the reward pool.
    BondForfeited,
    /// Reward pool to a node at epoch close.
    Distributed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum Record {
    Header {
        version: String,
        scenario_digest: Digest,
        seed: u64,
        epoch_seconds: u64,
        horizon_epochs: u64,
        nodes: Vec<DeedId>,
        jobs: usize,
        total_supply: Token,
    },
    Allocation {
        time: u64,
        epoch: u64,
        snapshot: Token,
        entries: Vec<AllocationEntry>,
    },
    Rollover {
        time: u64,
        epoch: u64,
        amount: Token,
        reason: RolloverReason,
    },
    Job {
        time: u64,
        epoch: u64,
        /// 1-based position in the scenario's job list.
        job: usize,
        job_id: Option<JobId>,
        event: String,
        #[serde(skip_serializing_if = "Vec::is_empty")]
        workers: Vec<DeedId>,
        #[serde(skip_serializing_if = "Option::is_none")]
        digest: Option<Digest>,
        #[serde(skip_serializing_if = "String::is_empty")]
        detail: String,
    },
    Pool {
        time: u64,
        epoch: u64,
        flow: Flow,
        job_id: Option<JobId>,
        deed_id: Option<DeedId>,
        amount: Token,
    },
    Progress {
        time: u64,
        epoch: u64,
        job_id: JobId,
        worker: DeedId,
        link_index: u64,
        verdict: ProgressVerdict,
        /// Ledger height of the PROGRESS_PROOF entry for accepted links.
        height: Option<u64>,
    },
    Penalty {
        time: u64,
        epoch: u64,
        deed_id: DeedId,
        delta: f64,
        previous: f64,
        updated: f64,
        reason: String,
    },
    Challenge {
        time: u64,
        epoch: u64,
        challenge_id: ChallengeId,
        job_id: JobId,
        event: String,
        challenger: DeedId,
        bond: Token,
        jury: Vec<DeedId>,
        verdict: ChallengeVerdict,
        #[serde(skip_serializing_if = "Option::is_none")]
        review: Option<ReviewVerdict>,
    },
    Ledger {
        time: u64,
        height: u64,
        kinds: Vec<String>,
    },
    Warning {
        time: u64,
        epoch: u64,
        message: String,
    },
    Audit(BrokerAudit),
    Final {
        time: u64,
        balances: BTreeMap<DeedId, Token>,
        escrow_pool: Token,
        reward_pool: Token,
        locked: Token,
        bonds: Token,
        total: Token,
        conserved: bool,
        conservation_failures: u64,
        ledger_height: u64,
        ledger_head: Digest,
        ledger_verified: bool,
    },
}

impl Record {
    pub fn kind(&self) -> &'static str {
        match self {
            Record::Header { .. } => "header",
            Record::Allocation { .. } => "allocation",
            Record::Rollover { .. } => "rollover",
            Record::Job { .. } => "job",
            Record::Pool { .. } => "pool",
            Record::Progress { .. } => "progress",
            Record::Penalty { .. } => "penalty",
            Record::Challenge { .. } => "challenge",
            Record::Ledger { .. } => "ledger",
            Record::Warning { .. } => "warning",
            Record::Audit(_) => "audit",
            Record::Final { .. } => "final",
        }
    }
}

pub fn to_jsonl(records: &[Record]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

/// Human-readable digest of a report.
pub fn summary(records: &[Record]) -> String {
    let mut s = String::new();
    let mut job_events: BTreeMap<&str, usize> = BTreeMap::new();
    let mut penalties = 0usize;
    let mut warnings = 0usize;
    for r in records {
        match r {
            Record::Header {
                seed,
                epoch_seconds,
                horizon_epochs,
                nodes,
                jobs,
                total_supply,
                scenario_digest,
                ..
            } => {
                let _ = writeln!(s, "scenario {scenario_digest}");
                let _ = writeln!(
                    s,
                    "seed {seed}, {} nodes, {jobs} jobs, {horizon_epochs} epochs of {epoch_seconds}s, supply {total_supply}",
                    nodes.len()
                );
                let _ = writeln!(s);
                let _ = writeln!(s, "epoch  snapshot          top node     top share");
            }
            Record::Allocation {
                epoch, snapshot, entries, ..
            } => {
                let top = entries.iter().max_by(|a, b| a.share.total_cmp(&b.share).then(b.deed_id.cmp(&a.deed_id)));
                let (id, share) = top.map_or(("-".to_string(), 0.0), |e| (e.deed_id.to_string(), e.share));
                let _ = writeln!(s, "{epoch:>5}  {:<16}  {id:<11}  {share:.6}", snapshot.to_decimal(6));
            }
            Record::Rollover { epoch, amount, reason, .. } => {
                let _ = writeln!(s, "{epoch:>5}  {:<16}  rolled over ({reason:?})", amount.to_decimal(6));
            }
            Record::Job { event, .. } => *job_events.entry(event.as_str()).or_default() += 1,
            Record::Penalty { .. } => penalties += 1,
            Record::Warning { .. } => warnings += 1,
            _ => {}
        }
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "job events:");
    for (k, v) in &job_events {
        let _ = writeln!(s, "  {k:<16} {v}");
    }
    for r in records {
        if let Record::Challenge {
            challenge_id,
            job_id,
            event,
            jury,
            verdict,
            ..
        } = r
        {
            let jury: Vec<&str> = jury.iter().map(DeedId::as_str).collect();
            let _ = writeln!(s, "{challenge_id} on {job_id}: {event}, jury [{}], {verdict:?}", jury.join(", "));
        }
    }
    let _ = writeln!(s, "penalties: {penalties}, warnings: {warnings}");
    for r in records {
        match r {
            Record::Audit(a) => {
                let _ = writeln!(
                    s,
                    "messages: {} published, {} delivered, {} dropped, {} rejected, {} in flight",
                    a.published, a.delivered, a.dropped, a.rejected, a.in_flight
                );
            }
            Record::Final {
                balances,
                reward_pool,
                escrow_pool,
                locked,
                bonds,
                conserved,
                ledger_height,
                ledger_head,
                ledger_verified,
                ..
            } => {
                let _ = writeln!(
                    s,
                    "pools: escrow {escrow_pool}, reward {reward_pool}, locked {locked}, bonds {bonds}"
                );
                let _ = writeln!(s, "token conservation: {}", if *conserved { "held" } else { "VIOLATED" });
                let _ = writeln!(
                    s,
                    "ledger: height {ledger_height}, head {ledger_head}, {}",
                    if *ledger_verified { "verified" } else { "FAILED VERIFICATION" }
                );
                let _ = writeln!(s, "balances:");
                for (id, b) in balances {
                    let _ = writeln!(s, "  {id:<12} {}", b.to_decimal(6));
                }
            }
            _ => {}
        }
    }
    s
}
