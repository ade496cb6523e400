// Copyright 2026 The PoAI Simnet Authors
// SPDX-License-Identifier: Apache-2.0

//! Public-chain pool state machine: job funding, escrow release, review
//! locks for cancelled jobs, and the challenge/jury mechanism.
//!
//! Every operation validates fully before touching state, so an `Err` leaves
//! the pools and balances exactly as they were.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::codec::{Canonical, CodecError, Reader, Writer};
use crate::crypto::Digest;
use crate::ids::{ChallengeId, DeedId, JobId};
use crate::token::Token;
use crate::tokenomics::{DeedRegistry, Shortfall, TokenomicsError};

/// 24 hours of logical time.
pub const REVIEW_LOCK_SECONDS: u64 = 86_400;
pub const JURY_SIZE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JobStatus {
    Pending,
    InProgress,
    Done,
    Cancelled,
    LockedForReview,
    Settled,
    Refunded,
}

impl JobStatus {
    /// The allowed lifecycle edges. `Settled → Refunded` is reachable only
    /// through an upheld challenge opened in the settlement epoch.
    pub fn can_transition_to(self, next: JobStatus) -> bool {
        use JobStatus::*;
        matches!(
            (self, next),
            (Pending, InProgress)
                | (InProgress, Done)
                | (InProgress, Cancelled)
                | (Done, Settled)
                | (Cancelled, LockedForReview)
                | (LockedForReview, Settled)
                | (LockedForReview, Refunded)
                | (Settled, Refunded)
        )
    }
}

/// Terminal status reported by the private ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FinalStatus {
    Done,
    Cancelled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReviewVerdict {
    WorkValid,
    WorkInvalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Vote {
    Upheld,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ChallengeVerdict {
    Pending,
    Upheld,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Job {
    pub id: JobId,
    pub sender: DeedId,
    pub reward: Token,
    pub spec: Digest,
    pub n_workers: u32,
    pub status: JobStatus,
    pub workers: Vec<DeedId>,
    pub settled_epoch: Option<u64>,
}

impl Job {
    fn transition(&mut self, next: JobStatus) -> Result<()> {
        if !self.status.can_transition_to(next) {
            return Err(EscrowError::InvalidTransition {
                job: self.id.clone(),
                from: self.status,
                to: next,
            });
        }
        self.status = next;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LockedFunds {
    pub job_id: JobId,
    pub amount: Token,
    pub unlock_time: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChallengeBond {
    pub challenge_id: ChallengeId,
    pub challenger: DeedId,
    pub amount: Token,
}

/// Reward of a settled job under challenge. The funds stay in the reward
/// pool but are excluded from the distributable snapshot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisputeHold {
    pub challenge_id: ChallengeId,
    pub job_id: JobId,
    pub amount: Token,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PoolState {
    pub escrow_pool: Token,
    pub reward_pool: Token,
    pub locked_funds: Vec<LockedFunds>,
    pub challenge_bonds: Vec<ChallengeBond>,
    pub disputed: Vec<DisputeHold>,
}

impl PoolState {
    /// Funds held by the pools: escrow + reward + locked + bonds.
    pub fn total(&self) -> Token {
        let mut t = &self.escrow_pool + &self.reward_pool;
        for l in &self.locked_funds {
            t += &l.amount;
        }
        for b in &self.challenge_bonds {
            t += &b.amount;
        }
        t
    }

    pub fn locked_total(&self) -> Token {
        self.locked_funds.iter().map(|l| &l.amount).sum()
    }

    pub fn bonds_total(&self) -> Token {
        self.challenge_bonds.iter().map(|b| &b.amount).sum()
    }

    /// Reward pool minus amounts held for open disputes.
    pub fn distributable(&self) -> Token {
        let held: Token = self.disputed.iter().map(|d| &d.amount).sum();
        self.reward_pool
            .checked_sub(&held)
            .expect("dispute holds never exceed the reward pool")
    }

    fn take_reward_pool(&mut self, amount: &Token) -> Result<()> {
        self.reward_pool = self
            .reward_pool
            .checked_sub(amount)
            .ok_or(EscrowError::PoolUnderflow("reward"))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Challenge {
    pub id: ChallengeId,
    pub job_id: JobId,
    pub challenger: DeedId,
    pub bond: Token,
    pub jury: Vec<DeedId>,
    pub verdict: ChallengeVerdict,
    pub votes: Vec<(DeedId, Vote)>,
    pub opened_epoch: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EscrowError {
    #[error("job reward must be positive")]
    InvalidReward,
    #[error("job needs at least one worker")]
    NoWorkers,
    #[error("challenge bond must be positive")]
    InvalidBond,
    #[error("unknown job {0}")]
    UnknownJob(JobId),
    #[error("job {0} already settled (status {1:?})")]
    AlreadySettled(JobId, JobStatus),
    #[error("job {job}: transition {from:?} -> {to:?} not allowed")]
    InvalidTransition { job: JobId, from: JobStatus, to: JobStatus },
    #[error("job {0} has no locked funds")]
    NotLocked(JobId),
    #[error("review of job {job} not due before {unlock_time} (now {now})")]
    ReviewNotDue { job: JobId, unlock_time: u64, now: u64 },
    #[error("job {0} is not open to challenge (status {1:?})")]
    NotChallengeable(JobId, JobStatus),
    #[error("job {0} already has an open challenge")]
    ChallengeAlreadyOpen(JobId),
    #[error("no eligible jurors: {available} available, {needed} needed")]
    NoEligibleJurors { available: usize, needed: usize },
    #[error("unknown challenge {0}")]
    UnknownChallenge(ChallengeId),
    #[error("{0} already resolved")]
    AlreadyResolved(ChallengeId),
    #[error("duplicate vote from {0}")]
    DuplicateVote(DeedId),
    #[error("missing vote from juror {0}")]
    MissingVote(DeedId),
    #[error("{0} is not on the jury")]
    NotAJuror(DeedId),
    #[error("{0} pool would go negative")]
    PoolUnderflow(&'static str),
    #[error(transparent)]
    Registry(#[from] TokenomicsError),
}

pub type Result<T, E = EscrowError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EscrowConfig {
    pub review_lock_seconds: u64,
    pub jury_size: usize,
}

impl Default for EscrowConfig {
    fn default() -> Self {
        EscrowConfig {
            review_lock_seconds: REVIEW_LOCK_SECONDS,
            jury_size: JURY_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SettleOutcome {
    /// Reward moved from escrow to the reward pool.
    Rewarded { amount: Token },
    /// Reward moved from escrow into a review lock.
    Locked { amount: Token, unlock_time: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReviewOutcome {
    pub job_id: JobId,
    pub verdict: ReviewVerdict,
    pub amount: Token,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChallengeResolution {
    pub challenge: Challenge,
    /// Set when the verdict also released or refunded a review lock.
    pub review: Option<ReviewOutcome>,
    /// Amount refunded to the job sender on an upheld challenge.
    pub refunded: Option<Token>,
}

#[derive(Debug, Clone, Default)]
pub struct Escrow {
    cfg: EscrowConfig,
    pool: PoolState,
    jobs: BTreeMap<JobId, Job>,
    job_count: BTreeMap<DeedId, u64>,
    /// On-chain status matrix; entries are popped once a job is settled.
    onchain_status: BTreeMap<JobId, JobStatus>,
    challenges: BTreeMap<ChallengeId, Challenge>,
    next_challenge: u64,
}

impl Escrow {
    pub fn new(cfg: EscrowConfig) -> Self {
        Escrow {
            cfg,
            ..Default::default()
        }
    }

    pub fn config(&self) -> &EscrowConfig {
        &self.cfg
    }

    pub fn pool(&self) -> &PoolState {
        &self.pool
    }

    pub fn job(&self, id: &JobId) -> Option<&Job> {
        self.jobs.get(id)
    }

    pub fn jobs(&self) -> impl Iterator<Item = &Job> {
        self.jobs.values()
    }

    pub fn challenge(&self, id: ChallengeId) -> Option<&Challenge> {
        self.challenges.get(&id)
    }

    pub fn challenges(&self) -> impl Iterator<Item = &Challenge> {
        self.challenges.values()
    }

    pub fn onchain_status(&self, id: &JobId) -> Option<JobStatus> {
        self.onchain_status.get(id).copied()
    }

    pub fn job_count(&self, sender: &DeedId) -> u64 {
        self.job_count.get(sender).copied().unwrap_or(0)
    }

    pub fn next_job_id(&self, sender: &DeedId) -> JobId {
        JobId::new(sender.clone(), self.job_count(sender) + 1)
    }

    pub fn next_challenge_id(&self) -> ChallengeId {
        ChallengeId(self.next_challenge + 1)
    }

    pub fn locked(&self, id: &JobId) -> Option<&LockedFunds> {
        self.pool.locked_funds.iter().find(|l| &l.job_id == id)
    }

    fn pending_challenge_for(&self, id: &JobId) -> Option<&Challenge> {
        self.challenges
            .values()
            .find(|c| &c.job_id == id && c.verdict == ChallengeVerdict::Pending)
    }

    fn resolved_challenge_for(&self, id: &JobId) -> Option<&Challenge> {
        self.challenges
            .values()
            .rev()
            .find(|c| &c.job_id == id && c.verdict != ChallengeVerdict::Pending)
    }

    pub fn has_pending_challenge(&self, id: &JobId) -> bool {
        self.pending_challenge_for(id).is_some()
    }

    fn job_mut(&mut self, id: &JobId) -> Result<&mut Job> {
        self.jobs.get_mut(id).ok_or_else(|| EscrowError::UnknownJob(id.clone()))
    }

    /// Funds a new job from the sender's balance into escrow.
    pub fn submit_job(
        &mut self,
        registry: &mut DeedRegistry,
        sender: &DeedId,
        reward: Token,
        spec: Digest,
        n_workers: u32,
    ) -> Result<Job> {
        if reward.is_zero() {
            return Err(EscrowError::InvalidReward);
        }
        if n_workers == 0 {
            return Err(EscrowError::NoWorkers);
        }
        registry.debit(sender, &reward)?;

        let id = self.next_job_id(sender);
        self.job_count.insert(sender.clone(), id.sequence);
        self.pool.escrow_pool += &reward;
        let mut job = Job {
            id: id.clone(),
            sender: sender.clone(),
            reward,
            spec,
            n_workers,
            status: JobStatus::Pending,
            workers: Vec::new(),
            settled_epoch: None,
        };
        job.transition(JobStatus::InProgress)?;
        self.onchain_status.insert(id.clone(), JobStatus::InProgress);
        self.jobs.insert(id, job.clone());
        Ok(job)
    }

    /// Pays an epoch reward out of the reward pool.
    pub fn pay_reward(&mut self, registry: &mut DeedRegistry, deed: &DeedId, amount: &Token) -> Result<()> {
        if !registry.contains(deed) {
            return Err(TokenomicsError::UnknownDeed(deed.clone()).into());
        }
        self.pool.take_reward_pool(amount)?;
        registry.credit(deed, amount)?;
        Ok(())
    }

    /// Records the job's workers; they are excluded from its juries.
    pub fn record_workers(&mut self, id: &JobId, workers: Vec<DeedId>) -> Result<()> {
        self.job_mut(id)?.workers = workers;
        Ok(())
    }

    /// Releases an in-progress job's escrow according to its final status.
    pub fn settle_job(&mut self, id: &JobId, status: FinalStatus, now: u64, epoch: u64) -> Result<SettleOutcome> {
        let lock = self.cfg.review_lock_seconds;
        let job = self.jobs.get(id).ok_or_else(|| EscrowError::UnknownJob(id.clone()))?;
        match job.status {
            JobStatus::InProgress => {}
            JobStatus::Pending => {
                return Err(EscrowError::InvalidTransition {
                    job: id.clone(),
                    from: JobStatus::Pending,
                    to: JobStatus::Done,
                })
            }
            other => return Err(EscrowError::AlreadySettled(id.clone(), other)),
        }
        let reward = job.reward.clone();
        self.pool.escrow_pool = self
            .pool
            .escrow_pool
            .checked_sub(&reward)
            .ok_or(EscrowError::PoolUnderflow("escrow"))?;

        let outcome = match status {
            FinalStatus::Done => {
                self.pool.reward_pool += &reward;
                let job = self.job_mut(id)?;
                job.transition(JobStatus::Done)?;
                job.transition(JobStatus::Settled)?;
                job.settled_epoch = Some(epoch);
                SettleOutcome::Rewarded { amount: reward }
            }
            FinalStatus::Cancelled => {
                let unlock_time = now + lock;
                self.pool.locked_funds.push(LockedFunds {
                    job_id: id.clone(),
                    amount: reward.clone(),
                    unlock_time,
                });
                let job = self.job_mut(id)?;
                job.transition(JobStatus::Cancelled)?;
                job.transition(JobStatus::LockedForReview)?;
                SettleOutcome::Locked {
                    amount: reward,
                    unlock_time,
                }
            }
        };
        self.onchain_status.remove(id);
        Ok(outcome)
    }

    /// Releases a review lock. Allowed once the lock has expired, or earlier
    /// when a challenge on the job has reached a verdict.
    pub fn resolve_review(
        &mut self,
        registry: &mut DeedRegistry,
        id: &JobId,
        verdict: ReviewVerdict,
        now: u64,
        epoch: u64,
    ) -> Result<ReviewOutcome> {
        if !self.jobs.contains_key(id) {
            return Err(EscrowError::UnknownJob(id.clone()));
        }
        let idx = self
            .pool
            .locked_funds
            .iter()
            .position(|l| &l.job_id == id)
            .ok_or_else(|| EscrowError::NotLocked(id.clone()))?;
        let unlock_time = self.pool.locked_funds[idx].unlock_time;
        if now < unlock_time && self.resolved_challenge_for(id).is_none() {
            return Err(EscrowError::ReviewNotDue {
                job: id.clone(),
                unlock_time,
                now,
            });
        }
        self.release_lock(registry, idx, verdict, epoch)
    }

    fn release_lock(
        &mut self,
        registry: &mut DeedRegistry,
        idx: usize,
        verdict: ReviewVerdict,
        epoch: u64,
    ) -> Result<ReviewOutcome> {
        let id = self.pool.locked_funds[idx].job_id.clone();
        let next = match verdict {
            ReviewVerdict::WorkValid => JobStatus::Settled,
            ReviewVerdict::WorkInvalid => JobStatus::Refunded,
        };
        let job = self.jobs.get(&id).ok_or_else(|| EscrowError::UnknownJob(id.clone()))?;
        if !job.status.can_transition_to(next) {
            return Err(EscrowError::InvalidTransition {
                job: id,
                from: job.status,
                to: next,
            });
        }
        let sender = job.sender.clone();
        if !registry.contains(&sender) {
            return Err(TokenomicsError::UnknownDeed(sender).into());
        }

        let locked = self.pool.locked_funds.remove(idx);
        match verdict {
            ReviewVerdict::WorkValid => self.pool.reward_pool += &locked.amount,
            ReviewVerdict::WorkInvalid => registry.credit(&sender, &locked.amount)?,
        }
        let job = self.job_mut(&id)?;
        job.transition(next)?;
        if next == JobStatus::Settled {
            job.settled_epoch = Some(epoch);
        }
        Ok(ReviewOutcome {
            job_id: id,
            verdict,
            amount: locked.amount,
        })
    }

    /// Opens a challenge on a locked job, or on a job settled in the current
    /// epoch. The bond is escrowed and a jury of `jury_size` is drawn from
    /// `active` (excluding the challenger, the sender and the job's workers)
    /// with a ChaCha8 stream seeded by `rng_seed`.
    #[allow(clippy::too_many_arguments)]
    pub fn open_challenge(
        &mut self,
        registry: &mut DeedRegistry,
        challenger: &DeedId,
        id: &JobId,
        bond: Token,
        rng_seed: u64,
        active: &[DeedId],
        current_epoch: u64,
    ) -> Result<Challenge> {
        if bond.is_zero() {
            return Err(EscrowError::InvalidBond);
        }
        let job = self.jobs.get(id).ok_or_else(|| EscrowError::UnknownJob(id.clone()))?;
        let disputes_settled = match job.status {
            JobStatus::LockedForReview => false,
            JobStatus::Settled if job.settled_epoch == Some(current_epoch) => true,
            other => return Err(EscrowError::NotChallengeable(id.clone(), other)),
        };
        if self.pending_challenge_for(id).is_some() {
            return Err(EscrowError::ChallengeAlreadyOpen(id.clone()));
        }
        let balance = registry.balance(challenger)?;
        if balance < &bond {
            return Err(TokenomicsError::InsufficientBalance(Box::new(Shortfall {
                deed: challenger.clone(),
                balance: balance.clone(),
                required: bond,
            }))
            .into());
        }

        let mut excluded: BTreeSet<&DeedId> = job.workers.iter().collect();
        excluded.insert(challenger);
        excluded.insert(&job.sender);
        let eligible: Vec<DeedId> = active
            .iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .filter(|d| !excluded.contains(d))
            .cloned()
            .collect();
        let needed = self.cfg.jury_size;
        if eligible.len() < needed {
            return Err(EscrowError::NoEligibleJurors {
                available: eligible.len(),
                needed,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let jury: Vec<DeedId> = rand::seq::index::sample(&mut rng, eligible.len(), needed)
            .into_iter()
            .map(|i| eligible[i].clone())
            .collect();

        let reward = job.reward.clone();
        registry.debit(challenger, &bond)?;
        self.next_challenge += 1;
        let cid = ChallengeId(self.next_challenge);
        self.pool.challenge_bonds.push(ChallengeBond {
            challenge_id: cid,
            challenger: challenger.clone(),
            amount: bond.clone(),
        });
        if disputes_settled {
            self.pool.disputed.push(DisputeHold {
                challenge_id: cid,
                job_id: id.clone(),
                amount: reward,
            });
        }
        let challenge = Challenge {
            id: cid,
            job_id: id.clone(),
            challenger: challenger.clone(),
            bond,
            jury,
            verdict: ChallengeVerdict::Pending,
            votes: Vec::new(),
            opened_epoch: current_epoch,
        };
        self.challenges.insert(cid, challenge.clone());
        Ok(challenge)
    }

    /// Applies the jury's majority verdict.
    ///
    /// Upheld: the bond returns to the challenger and the job is refunded to
    /// its sender. Rejected: the bond goes to the reward pool and a locked
    /// job is released as valid work.
    pub fn resolve_challenge(
        &mut self,
        registry: &mut DeedRegistry,
        cid: ChallengeId,
        votes: &[(DeedId, Vote)],
        epoch: u64,
    ) -> Result<ChallengeResolution> {
        let challenge = self.challenges.get(&cid).ok_or(EscrowError::UnknownChallenge(cid))?;
        if challenge.verdict != ChallengeVerdict::Pending {
            return Err(EscrowError::AlreadyResolved(cid));
        }
        let mut seen = BTreeSet::new();
        for (juror, _) in votes {
            if !challenge.jury.contains(juror) {
                return Err(EscrowError::NotAJuror(juror.clone()));
            }
            if !seen.insert(juror) {
                return Err(EscrowError::DuplicateVote(juror.clone()));
            }
        }
        if let Some(missing) = challenge.jury.iter().find(|j| !seen.contains(j)) {
            return Err(EscrowError::MissingVote(missing.clone()));
        }
        let upheld = votes.iter().filter(|(_, v)| *v == Vote::Upheld).count();
        let verdict = if upheld * 2 > challenge.jury.len() {
            ChallengeVerdict::Upheld
        } else {
            ChallengeVerdict::Rejected
        };

        let job_id = challenge.job_id.clone();
        let challenger = challenge.challenger.clone();
        let job = self.jobs.get(&job_id).ok_or_else(|| EscrowError::UnknownJob(job_id.clone()))?;
        let sender = job.sender.clone();
        let reward = job.reward.clone();
        let job_status = job.status;
        if !registry.contains(&challenger) {
            return Err(TokenomicsError::UnknownDeed(challenger).into());
        }
        if !registry.contains(&sender) {
            return Err(TokenomicsError::UnknownDeed(sender).into());
        }
        let bond_idx = self
            .pool
            .challenge_bonds
            .iter()
            .position(|b| b.challenge_id == cid)
            .expect("open challenge has a bond");
        let hold_idx = self.pool.disputed.iter().position(|d| d.challenge_id == cid);
        let lock_idx = self.pool.locked_funds.iter().position(|l| l.job_id == job_id);
        if verdict == ChallengeVerdict::Upheld && hold_idx.is_some() && self.pool.reward_pool < reward {
            return Err(EscrowError::PoolUnderflow("reward"));
        }

        // Validation done; mutate.
        let bond = self.pool.challenge_bonds.remove(bond_idx);
        let mut review = None;
        let mut refunded = None;
        match verdict {
            ChallengeVerdict::Upheld => {
                registry.credit(&challenger, &bond.amount)?;
                if let Some(h) = hold_idx {
                    self.pool.disputed.remove(h);
                    self.pool.take_reward_pool(&reward)?;
                    registry.credit(&sender, &reward)?;
                    self.job_mut(&job_id)?.transition(JobStatus::Refunded)?;
                    refunded = Some(reward);
                } else if let Some(l) = lock_idx {
                    let out = self.release_lock(registry, l, ReviewVerdict::WorkInvalid, epoch)?;
                    refunded = Some(out.amount.clone());
                    review = Some(out);
                }
            }
            ChallengeVerdict::Rejected => {
                self.pool.reward_pool += &bond.amount;
                if let Some(h) = hold_idx {
                    self.pool.disputed.remove(h);
                } else if let Some(l) = lock_idx {
                    debug_assert_eq!(job_status, JobStatus::LockedForReview);
                    review = Some(self.release_lock(registry, l, ReviewVerdict::WorkValid, epoch)?);
                }
            }
            ChallengeVerdict::Pending => unreachable!(),
        }

        let challenge = self.challenges.get_mut(&cid).expect("checked above");
        challenge.verdict = verdict;
        challenge.votes = votes.to_vec();
        Ok(ChallengeResolution {
            challenge: challenge.clone(),
            review,
            refunded,
        })
    }
}

impl Canonical for FinalStatus {
    fn encode_into(&self, w: &mut Writer) {
        w.put_u8(match self {
            FinalStatus::Done => 1,
            FinalStatus::Cancelled => 2,
        });
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        match r.get_u8()? {
            1 => Ok(FinalStatus::Done),
            2 => Ok(FinalStatus::Cancelled),
            tag => Err(CodecError::InvalidTag { what: "final status", tag }),
        }
    }
}

impl Canonical for Vote {
    fn encode_into(&self, w: &mut Writer) {
        w.put_u8(match self {
            Vote::Upheld => 1,
            Vote::Rejected => 2,
        });
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        match r.get_u8()? {
            1 => Ok(Vote::Upheld),
            2 => Ok(Vote::Rejected),
            tag => Err(CodecError::InvalidTag { what: "vote", tag }),
        }
    }
}

impl Canonical for ReviewVerdict {
    fn encode_into(&self, w: &mut Writer) {
        w.put_u8(match self {
            ReviewVerdict::WorkValid => 1,
            ReviewVerdict::WorkInvalid => 2,
        });
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        match r.get_u8()? {
            1 => Ok(ReviewVerdict::WorkValid),
            2 => Ok(ReviewVerdict::WorkInvalid),
            tag => Err(CodecError::InvalidTag { what: "review verdict", tag }),
        }
    }
}
