// Copyright 2026 The PoAI Simnet Authors
// SPDX-License-Identifier: Apache-2.0

//! The discrete-event loop.
//!
//! Events are ordered by `(time, sequence)`. Epoch closes are scheduled
//! before anything else, so at an epoch boundary the close runs first and
//! later events at the same instant belong to the next epoch. Each event
//! that produces ledger entries commits them as one block, then feeds every
//! entry through the oracle into the escrow.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::broker::{
    call_topic, latency, node_filter, node_topic, topic_matches, BrokerAudit, Envelope, Message, CALL_FILTER,
};
use super::config::{FaultSpec, ScenarioConfig};
use super::report::{Flow, Record};
use super::rng::substream;
use crate::codec::Canonical;
use crate::crypto::{tagged_hash, Digest, Signature, SigningKey};
use crate::distribution::{
    map_assign, map_search, reduce_gather, Assignment, CapabilityCommitment, DistributionError, GatherError,
    ProgressProof, ProgressTracker, ProofChain, ShardResult,
};
use crate::escrow::{
    ChallengeVerdict, Escrow, EscrowConfig, FinalStatus, JobStatus, ReviewVerdict, SettleOutcome, Vote,
};
use crate::ids::{ChallengeId, DeedId, JobId};
use crate::ledger::{
    oracle_mirror, ChallengeRecord, JobStatusRecord, Ledger, LedgerEntry, LedgerError, NodeSpecRecord, Payload,
    PoolCommand, PoolEventRecord, RewardLine, RewardRecord,
};
use crate::pipeline::{
    execute_step, hash_sign_recheck, shard_params_to_numbers, PipelineSpec, PipelineState, WorkerContext,
};
use crate::token::Token;
use crate::tokenomics::{distribute_epoch_rewards, DeedRegistry, EpochConfig, EpochDistribution, NodeDeed, PowerSource};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("ledger rejected a block: {0}")]
    Ledger(#[from] LedgerError),
    #[error("setup failed: {0}")]
    Setup(String),
}

#[derive(Debug, Clone)]
enum Event {
    EpochClose(u64),
    Heartbeat,
    JobArrival(usize),
    AssignWindow(usize),
    Deadline(usize),
    Unlock(usize),
    Challenge(usize),
    Vote { challenge: ChallengeId, claim_valid: bool },
    WorkerStep { job: usize, node: usize },
    Deliver { to: usize, envelope: Box<Envelope> },
    ForgeEnvelope(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Waiting,
    Calling,
    Running,
    Finished,
}

#[derive(Debug, Clone)]
struct JobRun {
    id: Option<JobId>,
    spec: Option<PipelineSpec>,
    commitments: Vec<CapabilityCommitment>,
    assignment: Option<Assignment>,
    results: BTreeMap<DeedId, ShardResult>,
    phase: Phase,
}

#[derive(Debug, Clone)]
struct WorkerRun {
    job_id: JobId,
    main: usize,
    spec: PipelineSpec,
    ctx: WorkerContext,
    state: PipelineState,
    chain: ProofChain,
}

/// A running scenario.
pub struct Simulation {
    cfg: ScenarioConfig,
    keys: Vec<SigningKey>,
    index: BTreeMap<DeedId, usize>,
    registry: DeedRegistry,
    escrow: Escrow,
    ledger: Ledger,
    epoch: EpochConfig,
    queue: BTreeMap<(u64, u64), Event>,
    seq: u64,
    now: u64,
    subscriptions: Vec<(usize, String)>,
    audit: BrokerAudit,
    jobs: Vec<JobRun>,
    job_index: BTreeMap<JobId, usize>,
    workers: BTreeMap<(usize, usize), WorkerRun>,
    tracker: ProgressTracker,
    records: Vec<Record>,
    drop_rng: ChaCha8Rng,
    jury_rng: ChaCha8Rng,
    supply: Token,
    conservation_failures: u64,
    finished: bool,
}

fn node_key(seed: u64, deed: &DeedId) -> SigningKey {
    let mut label = seed.to_be_bytes().to_vec();
    label.extend_from_slice(deed.as_str().as_bytes());
    SigningKey::derive("poai.node", &label)
}

fn within(windows: &[(u64, u64)], t: u64) -> bool {
    windows.iter().any(|(s, e)| *s <= t && t < *e)
}

impl Simulation {
    pub fn new(cfg: ScenarioConfig) -> Result<Self, SimError> {
        let keys: Vec<SigningKey> = cfg.nodes.iter().map(|n| node_key(cfg.seed, &n.deed_id)).collect();
        let index = cfg.nodes.iter().enumerate().map(|(i, n)| (n.deed_id.clone(), i)).collect();
        let mut registry = DeedRegistry::new();
        for (n, k) in cfg.nodes.iter().zip(&keys) {
            registry
                .register(
                    NodeDeed {
                        deed_id: n.deed_id.clone(),
                        owner_key: k.public_key(),
                        balance: n.balance.clone(),
                        registered_epoch: 1,
                    },
                    n.capability,
                )
                .map_err(|e| SimError::Setup(e.to_string()))?;
        }
        let epoch = EpochConfig::at_epoch(cfg.epoch_seconds, cfg.genesis_time, 1).map_err(|e| SimError::Setup(e.to_string()))?;
        let mut subscriptions = Vec::new();
        for (i, n) in cfg.nodes.iter().enumerate() {
            if n.worker {
                subscriptions.push((i, CALL_FILTER.to_string()));
            }
            subscriptions.push((i, node_filter(&n.deed_id)));
        }
        let jobs = cfg
            .jobs
            .iter()
            .map(|_| JobRun {
                id: None,
                spec: None,
                commitments: Vec::new(),
                assignment: None,
                results: BTreeMap::new(),
                phase: Phase::Waiting,
            })
            .collect();
        let mut sim = Simulation {
            keys,
            index,
            registry,
            escrow: Escrow::new(EscrowConfig {
                review_lock_seconds: cfg.review_lock_seconds,
                jury_size: cfg.jury_size,
            }),
            ledger: Ledger::new(cfg.genesis_time),
            epoch,
            queue: BTreeMap::new(),
            seq: 0,
            now: cfg.genesis_time,
            subscriptions,
            audit: BrokerAudit::default(),
            jobs,
            job_index: BTreeMap::new(),
            workers: BTreeMap::new(),
            tracker: ProgressTracker::new(),
            records: Vec::new(),
            drop_rng: substream(cfg.seed, "broker.drop"),
            jury_rng: substream(cfg.seed, "jury"),
            supply: cfg.total_supply(),
            conservation_failures: 0,
            finished: false,
            cfg,
        };
        sim.genesis()?;
        Ok(sim)
    }

    fn genesis(&mut self) -> Result<(), SimError> {
        self.records.push(Record::Header {
            version: crate::VERSION.to_string(),
            scenario_digest: self.cfg.digest,
            seed: self.cfg.seed,
            epoch_seconds: self.cfg.epoch_seconds,
            horizon_epochs: self.cfg.horizon_epochs,
            nodes: self.cfg.nodes.iter().map(|n| n.deed_id.clone()).collect(),
            jobs: self.cfg.jobs.len(),
            total_supply: self.supply.clone(),
        });
        let mut entries = Vec::new();
        for (i, n) in self.cfg.nodes.iter().enumerate() {
            let rec = NodeSpecRecord {
                deed_id: n.deed_id.clone(),
                owner_key: self.keys[i].public_key(),
                capability: n.capability,
                region: self.cfg.regions[n.region].name.clone(),
            };
            entries.push((Payload::NodeSpec(rec), i));
        }
        entries.push((
            Payload::PoolEvent(PoolEventRecord::Genesis {
                config_digest: self.cfg.digest,
                total_supply: self.supply.clone(),
                seed: self.cfg.seed,
            }),
            self.validator(),
        ));
        self.commit(entries)?;
        self.set_epoch_power(1);

        for e in 1..=self.cfg.horizon_epochs {
            self.schedule(self.epoch.epoch_end(e), Event::EpochClose(e));
        }
        self.schedule(self.cfg.genesis_time, Event::Heartbeat);
        let arrivals: Vec<u64> = self.cfg.jobs.iter().map(|j| j.arrival).collect();
        for (i, at) in arrivals.into_iter().enumerate() {
            self.schedule(at, Event::JobArrival(i));
        }
        let challenges: Vec<u64> = self.cfg.challenges.iter().map(|c| c.at).collect();
        for (i, at) in challenges.into_iter().enumerate() {
            self.schedule(at, Event::Challenge(i));
        }
        let forged: Vec<(usize, u64)> = self
            .cfg
            .faults
            .iter()
            .enumerate()
            .filter_map(|(i, f)| match f {
                FaultSpec::ForgeEnvelope { at, .. } => Some((i, *at)),
                _ => None,
            })
            .collect();
        for (i, at) in forged {
            self.schedule(at, Event::ForgeEnvelope(i));
        }
        Ok(())
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn current_epoch(&self) -> u64 {
        self.epoch.current_epoch
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn escrow(&self) -> &Escrow {
        &self.escrow
    }

    pub fn registry(&self) -> &DeedRegistry {
        &self.registry
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn broker_audit(&self) -> BrokerAudit {
        self.audit
    }

    pub fn total_supply(&self) -> &Token {
        &self.supply
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Balances plus every pool equal the genesis supply.
    pub fn conserved(&self) -> bool {
        self.registry.total_balance() + self.escrow.pool().total() == self.supply
    }

    pub fn conservation_failures(&self) -> u64 {
        self.conservation_failures
    }

    pub fn signing_key(&self, deed: &DeedId) -> Option<&SigningKey> {
        self.index.get(deed).map(|i| &self.keys[*i])
    }

    fn validator(&self) -> usize {
        self.index[&self.cfg.regions[0].validator]
    }

    fn epoch_no(&self) -> u64 {
        self.epoch.current_epoch
    }

    fn schedule(&mut self, at: u64, ev: Event) {
        self.seq += 1;
        self.queue.insert((at, self.seq), ev);
    }

    fn is_up(&self, node: usize, t: u64) -> bool {
        let n = &self.cfg.nodes[node];
        if let Some(w) = &n.uptime {
            if !within(w, t) {
                return false;
            }
        }
        !self.cfg.faults.iter().any(|f| match f {
            FaultSpec::Down { node: id, start, end } => id == n.deed_id.as_str() && *start <= t && t < *end,
            _ => false,
        })
    }

    fn drop_probability(&self, region: usize, t: u64) -> f64 {
        let r = &self.cfg.regions[region];
        self.cfg
            .faults
            .iter()
            .rev()
            .find_map(|f| match f {
                FaultSpec::Drop {
                    region: name,
                    probability,
                    start,
                    end,
                } if *name == r.name && *start <= t && t < *end => Some(*probability),
                _ => None,
            })
            .unwrap_or(r.drop_probability)
    }

    fn has_fault(&self, pred: impl Fn(&FaultSpec) -> bool) -> bool {
        self.cfg.faults.iter().any(pred)
    }

    fn set_epoch_power(&mut self, e: u64) {
        let mut clamped = Vec::new();
        for n in &self.cfg.nodes {
            let p = match self.cfg.power_source {
                PowerSource::Measured => n.measured_power(e),
                PowerSource::Capability => self.cfg.capability_weights.score(&n.capability),
            };
            let act = self.registry.activity_mut(&n.deed_id).expect("registered");
            if let Ok(true) = act.set_power(e, p, e) {
                clamped.push(format!("power {p} of {} clamped in epoch {e}", n.deed_id));
            }
        }
        for m in clamped {
            self.warn(m);
        }
    }

    fn warn(&mut self, message: String) {
        self.records.push(Record::Warning {
            time: self.now,
            epoch: self.epoch_no(),
            message,
        });
    }

    fn job_record(&mut self, job: usize, event: &str, workers: Vec<DeedId>, digest: Option<Digest>, detail: String) {
        self.records.push(Record::Job {
            time: self.now,
            epoch: self.epoch_no(),
            job: job + 1,
            job_id: self.jobs[job].id.clone(),
            event: event.to_string(),
            workers,
            digest,
            detail,
        });
    }

    fn pool_record(&mut self, flow: Flow, job_id: Option<JobId>, deed_id: Option<DeedId>, amount: Token) {
        self.records.push(Record::Pool {
            time: self.now,
            epoch: self.epoch_no(),
            flow,
            job_id,
            deed_id,
            amount,
        });
    }

    // Ledger and oracle.

    /// Appends one block and mirrors every entry into the escrow.
    fn commit(&mut self, entries: Vec<(Payload, usize)>) -> Result<Option<u64>, SimError> {
        if entries.is_empty() {
            return Ok(None);
        }
        let signed: Vec<LedgerEntry> = entries
            .iter()
            .map(|(p, a)| LedgerEntry::signed(p, self.cfg.nodes[*a].deed_id.clone(), &self.keys[*a]))
            .collect();
        let kinds = entries.iter().map(|(p, _)| format!("{:?}", p.kind())).collect();
        let height = self.ledger.append_entries(signed.clone(), self.now)?.height;
        self.records.push(Record::Ledger {
            time: self.now,
            height,
            kinds,
        });
        for e in &signed {
            for cmd in oracle_mirror(e) {
                self.apply(cmd);
            }
        }
        Ok(Some(height))
    }

    fn apply(&mut self, cmd: PoolCommand) {
        let (now, epoch) = (self.now, self.epoch_no());
        match cmd {
            PoolCommand::SettleJob { job_id, status } => match self.escrow.settle_job(&job_id, status, now, epoch) {
                Ok(SettleOutcome::Rewarded { amount }) => self.pool_record(Flow::Rewarded, Some(job_id), None, amount),
                Ok(SettleOutcome::Locked { amount, unlock_time }) => {
                    self.pool_record(Flow::Locked, Some(job_id.clone()), None, amount);
                    if let Some(&j) = self.job_index.get(&job_id) {
                        self.schedule(unlock_time, Event::Unlock(j));
                    }
                }
                Err(e) => self.warn(format!("settle {job_id}: {e}")),
            },
            PoolCommand::Credit { deed_id, amount } => {
                match self.escrow.pay_reward(&mut self.registry, &deed_id, &amount) {
                    Ok(()) => self.pool_record(Flow::Distributed, None, Some(deed_id), amount),
                    Err(e) => self.warn(format!("credit {deed_id}: {e}")),
                }
            }
            PoolCommand::OpenChallenge {
                job_id,
                challenger,
                bond,
                rng_seed,
            } => {
                let active: Vec<DeedId> = (0..self.cfg.nodes.len())
                    .filter(|i| self.is_up(*i, now))
                    .map(|i| self.cfg.nodes[i].deed_id.clone())
                    .collect();
                match self
                    .escrow
                    .open_challenge(&mut self.registry, &challenger, &job_id, bond, rng_seed, &active, epoch)
                {
                    Ok(c) => {
                        self.pool_record(Flow::BondPosted, Some(job_id.clone()), Some(challenger.clone()), c.bond.clone());
                        self.records.push(Record::Challenge {
                            time: now,
                            epoch,
                            challenge_id: c.id,
                            job_id,
                            event: "opened".into(),
                            challenger,
                            bond: c.bond,
                            jury: c.jury,
                            verdict: c.verdict,
                            review: None,
                        });
                    }
                    Err(e) => self.warn(format!("challenge on {job_id} by {challenger}: {e}")),
                }
            }
            PoolCommand::ResolveChallenge { challenge_id, votes } => {
                match self.escrow.resolve_challenge(&mut self.registry, challenge_id, &votes, epoch) {
                    Ok(res) => {
                        let c = res.challenge;
                        let job = Some(c.job_id.clone());
                        let flow = if c.verdict == ChallengeVerdict::Upheld {
                            Flow::BondReturned
                        } else {
                            Flow::BondForfeited
                        };
                        self.pool_record(flow, job.clone(), Some(c.challenger.clone()), c.bond.clone());
                        if let Some(r) = &res.review {
                            if r.verdict == ReviewVerdict::WorkValid {
                                self.pool_record(Flow::ReleasedValid, job.clone(), None, r.amount.clone());
                            }
                        }
                        if let Some(amount) = res.refunded {
                            let sender = self.escrow.job(&c.job_id).map(|j| j.sender.clone());
                            self.pool_record(Flow::Refunded, job, sender, amount);
                        }
                        self.records.push(Record::Challenge {
                            time: now,
                            epoch,
                            challenge_id: c.id,
                            job_id: c.job_id,
                            event: "resolved".into(),
                            challenger: c.challenger,
                            bond: c.bond,
                            jury: c.jury,
                            verdict: c.verdict,
                            review: res.review.map(|r| r.verdict),
                        });
                    }
                    Err(e) => self.warn(format!("resolve {challenge_id}: {e}")),
                }
            }
        }
    }

    fn penalize(&mut self, node: usize, reason: String, entries: &mut Vec<(Payload, usize)>) {
        let deed = self.cfg.nodes[node].deed_id.clone();
        let epoch = self.epoch_no();
        let delta = self.cfg.penalty_delta;
        match self.registry.apply_penalty(&deed, epoch, delta, epoch) {
            Ok(out) => {
                self.records.push(Record::Penalty {
                    time: self.now,
                    epoch,
                    deed_id: deed.clone(),
                    delta,
                    previous: out.previous,
                    updated: out.updated,
                    reason: reason.clone(),
                });
                entries.push((
                    Payload::PoolEvent(PoolEventRecord::Penalty {
                        deed_id: deed,
                        epoch,
                        delta,
                        reason,
                    }),
                    self.validator(),
                ));
            }
            Err(e) => self.warn(format!("penalty on {deed}: {e}")),
        }
    }

    // Messaging.

    fn publish(&mut self, from: usize, topic: String, message: Message) {
        let env = Envelope::signed(topic, self.cfg.nodes[from].deed_id.clone(), message, &self.keys[from]);
        self.route(from, env);
    }

    fn route(&mut self, from: usize, env: Envelope) {
        let subscribers: Vec<usize> = self
            .subscriptions
            .iter()
            .filter(|(n, f)| *n != from && topic_matches(f, &env.topic))
            .map(|(n, _)| *n)
            .collect();
        self.audit.published += subscribers.len() as u64;
        let authentic = self.ledger.key_of(&env.sender).is_some_and(|k| env.verify(k)) && env.sender == self.cfg.nodes[from].deed_id;
        if !authentic {
            self.audit.rejected += subscribers.len() as u64;
            return;
        }
        let src = self.cfg.nodes[from].region;
        for to in subscribers {
            let dst = self.cfg.nodes[to].region;
            let p = self.drop_probability(src, self.now).max(self.drop_probability(dst, self.now));
            let dropped = if p <= 0.0 {
                false
            } else if p >= 1.0 {
                true
            } else {
                self.drop_rng.gen::<f64>() < p
            };
            if dropped {
                self.audit.dropped += 1;
                continue;
            }
            let (s, d) = (&self.cfg.regions[src], &self.cfg.regions[dst]);
            let delay = latency((s.intra_latency, s.inter_latency), (d.intra_latency, d.inter_latency), src == dst);
            self.audit.in_flight += 1;
            self.schedule(
                self.now + delay,
                Event::Deliver {
                    to,
                    envelope: Box::new(env.clone()),
                },
            );
        }
    }

    // The loop.

    /// Processes the next event. Returns false once the horizon is reached.
    pub fn step(&mut self) -> Result<bool, SimError> {
        if self.finished {
            return Ok(false);
        }
        let Some(((at, _), ev)) = self.queue.pop_first() else {
            self.finish();
            return Ok(false);
        };
        self.now = at;
        let last_close = matches!(ev, Event::EpochClose(e) if e == self.cfg.horizon_epochs);
        self.handle(ev)?;
        if !self.conserved() {
            self.conservation_failures += 1;
            self.warn("token conservation violated".into());
        }
        if last_close {
            self.finish();
            return Ok(false);
        }
        Ok(true)
    }

    pub fn run(&mut self) -> Result<&[Record], SimError> {
        while self.step()? {}
        Ok(&self.records)
    }

    fn finish(&mut self) {
        if self.finished {
            return;
        }
        self.finished = true;
        self.queue.clear();
        self.records.push(Record::Audit(self.audit));
        let pool = self.escrow.pool().clone();
        let balances = self
            .registry
            .deeds()
            .map(|d| (d.deed_id.clone(), d.balance.clone()))
            .collect();
        self.records.push(Record::Final {
            time: self.now,
            balances,
            escrow_pool: pool.escrow_pool.clone(),
            reward_pool: pool.reward_pool.clone(),
            locked: pool.locked_total(),
            bonds: pool.bonds_total(),
            total: self.registry.total_balance() + pool.total(),
            conserved: self.conserved(),
            conservation_failures: self.conservation_failures,
            ledger_height: self.ledger.height(),
            ledger_head: self.ledger.head().digest(),
            ledger_verified: self.ledger.verify().is_ok(),
        });
    }

    fn handle(&mut self, ev: Event) -> Result<(), SimError> {
        match ev {
            Event::EpochClose(e) => self.close_epoch(e),
            Event::Heartbeat => {
                let period = self.cfg.heartbeat_seconds;
                for i in 0..self.cfg.nodes.len() {
                    if self.is_up(i, self.now) {
                        let id = self.cfg.nodes[i].deed_id.clone();
                        self.registry.activity_mut(&id).expect("registered").total_alive_seconds += period;
                    }
                }
                if self.now + period < self.cfg.horizon() {
                    self.schedule(self.now + period, Event::Heartbeat);
                }
                Ok(())
            }
            Event::JobArrival(j) => self.job_arrival(j),
            Event::AssignWindow(j) => self.assign_window(j),
            Event::Deadline(j) => self.deadline(j),
            Event::Unlock(j) => self.unlock(j),
            Event::Challenge(c) => self.open_challenge(c),
            Event::Vote { challenge, claim_valid } => self.vote(challenge, claim_valid),
            Event::WorkerStep { job, node } => self.worker_step(job, node),
            Event::Deliver { to, envelope } => {
                self.audit.in_flight -= 1;
                if !self.is_up(to, self.now) {
                    self.audit.dropped += 1;
                    return Ok(());
                }
                self.audit.delivered += 1;
                self.deliver(to, *envelope)
            }
            Event::ForgeEnvelope(f) => {
                let FaultSpec::ForgeEnvelope { node, .. } = &self.cfg.faults[f] else {
                    unreachable!("scheduled from a forge fault")
                };
                let from = self.index[&DeedId::new(node.clone())];
                let env = Envelope {
                    topic: call_topic(&JobId::new(DeedId::new(node.clone()), 0)),
                    sender: self.cfg.nodes[from].deed_id.clone(),
                    message: Message::Noise("forged".into()),
                    signature: Signature([0; 64]),
                };
                self.warn(format!("forged envelope injected as {node}"));
                self.route(from, env);
                Ok(())
            }
        }
    }

    fn close_epoch(&mut self, e: u64) -> Result<(), SimError> {
        let snapshot = self.escrow.pool().distributable();
        let active = self.registry.activities();
        let validator = self.validator();
        match distribute_epoch_rewards(&snapshot, &active, &self.epoch) {
            Ok(EpochDistribution::Allocated(alloc)) => {
                let lines = alloc
                    .entries
                    .iter()
                    .map(|a| RewardLine {
                        deed_id: a.deed_id.clone(),
                        share: a.share,
                        amount: a.amount.clone(),
                    })
                    .collect();
                self.records.push(Record::Allocation {
                    time: self.now,
                    epoch: e,
                    snapshot,
                    entries: alloc.entries,
                });
                self.commit(vec![(Payload::RewardRecord(RewardRecord { epoch: e, lines }), validator)])?;
            }
            Ok(EpochDistribution::RolledOver { epoch, amount, reason }) => {
                self.records.push(Record::Rollover {
                    time: self.now,
                    epoch,
                    amount: amount.clone(),
                    reason,
                });
                self.commit(vec![(Payload::PoolEvent(PoolEventRecord::Rollover { epoch, amount }), validator)])?;
            }
            Err(err) => self.warn(format!("epoch {e} allocation failed: {err}")),
        }
        if e < self.cfg.horizon_epochs {
            self.epoch.advance_to(e + 1).expect("epochs move forward");
            self.set_epoch_power(e + 1);
        }
        Ok(())
    }

    // Jobs.

    fn job_arrival(&mut self, j: usize) -> Result<(), SimError> {
        let job = self.cfg.jobs[j].clone();
        let sender = self.index[&job.sender];
        let mut spec = self.cfg.pipelines[&job.pipeline].clone();
        let mut refusals = Vec::new();
        for code in spec.custom_code_mut() {
            let verdict = code.vet(&self.cfg.safety_policy).clone();
            if verdict.is_safe() {
                code.sign(job.sender.clone(), &self.keys[sender]);
            } else {
                refusals.push(verdict.to_string());
            }
        }
        if !refusals.is_empty() {
            self.jobs[j].phase = Phase::Finished;
            self.job_record(j, "refused", Vec::new(), None, refusals.join("; "));
            let mut entries = Vec::new();
            self.penalize(sender, format!("unsafe pipeline for job {}", j + 1), &mut entries);
            self.commit(entries)?;
            return Ok(());
        }
        let funded = self
            .escrow
            .submit_job(&mut self.registry, &job.sender, job.reward.clone(), spec.digest, job.workers);
        let funded = match funded {
            Ok(f) => f,
            Err(e) => {
                self.jobs[j].phase = Phase::Finished;
                self.job_record(j, "rejected", Vec::new(), None, e.to_string());
                return Ok(());
            }
        };
        let id = funded.id.clone();
        self.jobs[j].id = Some(id.clone());
        self.jobs[j].spec = Some(spec);
        self.jobs[j].phase = Phase::Calling;
        self.job_index.insert(id.clone(), j);
        self.pool_record(Flow::Escrowed, Some(id.clone()), Some(job.sender.clone()), job.reward.clone());
        self.job_record(j, "funded", Vec::new(), None, String::new());
        self.commit(vec![(
            Payload::PoolEvent(PoolEventRecord::JobFunded {
                job_id: id.clone(),
                reward: job.reward.clone(),
            }),
            sender,
        )])?;
        self.publish(
            sender,
            call_topic(&id),
            Message::Call {
                job_id: id,
                requirements: job.requirements,
            },
        );
        self.schedule(self.now + self.cfg.assign_window_seconds, Event::AssignWindow(j));
        self.schedule(self.now + job.deadline_epochs * self.cfg.epoch_seconds, Event::Deadline(j));
        Ok(())
    }

    fn assign_window(&mut self, j: usize) -> Result<(), SimError> {
        if self.jobs[j].phase != Phase::Calling {
            return Ok(());
        }
        let job = self.cfg.jobs[j].clone();
        let id = self.jobs[j].id.clone().expect("funded");
        let sender = self.index[&job.sender];
        let spec = self.jobs[j].spec.clone().expect("funded");
        let ranked = map_search(&job.requirements, &self.jobs[j].commitments, &self.cfg.capability_weights);
        match map_assign(&id, job.workers as usize, &ranked, &spec.shard_configs(), self.ledger.height() + 1) {
            Ok(assignment) => {
                let workers: Vec<DeedId> = assignment.workers().cloned().collect();
                if let Err(e) = self.escrow.record_workers(&id, workers.clone()) {
                    self.warn(format!("record workers of {id}: {e}"));
                }
                self.commit(vec![(Payload::JobAssign(assignment.clone()), sender)])?;
                self.job_record(j, "assigned", workers.clone(), None, String::new());
                self.jobs[j].assignment = Some(assignment.clone());
                self.jobs[j].phase = Phase::Running;
                for (shard, w) in workers.iter().enumerate() {
                    let mut spec = spec.clone();
                    let tampered = self.has_fault(|f| matches!(f, FaultSpec::TamperCode { job, worker } if *job == j + 1 && *worker == shard));
                    if tampered {
                        for code in spec.custom_code_mut() {
                            code.source.push_str(" + 1");
                        }
                    }
                    self.publish(
                        sender,
                        node_topic(w, "assign"),
                        Message::Assign {
                            assignment: assignment.clone(),
                            shard,
                            spec,
                        },
                    );
                }
            }
            Err(DistributionError::InsufficientWorkers { available, needed, .. }) => {
                let deadline = job.arrival + job.deadline_epochs * self.cfg.epoch_seconds;
                let retry_at = self.now + self.cfg.retry_seconds;
                self.job_record(
                    j,
                    "retry",
                    Vec::new(),
                    None,
                    format!("{available} of {needed} workers committed"),
                );
                if retry_at < deadline {
                    self.publish(
                        sender,
                        call_topic(&id),
                        Message::Call {
                            job_id: id,
                            requirements: job.requirements,
                        },
                    );
                    self.schedule(retry_at, Event::AssignWindow(j));
                }
            }
            Err(e) => self.warn(format!("assign {id}: {e}")),
        }
        Ok(())
    }

    fn finish_job(&mut self, j: usize, status: FinalStatus, digest: Option<Digest>, reason: String, mut entries: Vec<(Payload, usize)>) -> Result<(), SimError> {
        let id = self.jobs[j].id.clone().expect("funded");
        let sender = self.index[&self.cfg.jobs[j].sender];
        self.jobs[j].phase = Phase::Finished;
        entries.push((
            Payload::JobStatus(JobStatusRecord {
                job_id: id,
                status,
                aggregate_digest: digest,
                reason: reason.clone(),
            }),
            sender,
        ));
        let event = match status {
            FinalStatus::Done => "done",
            FinalStatus::Cancelled => "cancelled",
        };
        self.job_record(j, event, Vec::new(), digest, reason);
        self.commit(entries)?;
        Ok(())
    }

    fn deadline(&mut self, j: usize) -> Result<(), SimError> {
        if matches!(self.jobs[j].phase, Phase::Calling | Phase::Running) {
            self.finish_job(j, FinalStatus::Cancelled, None, "deadline".into(), Vec::new())?;
        }
        Ok(())
    }

    fn unlock(&mut self, j: usize) -> Result<(), SimError> {
        let Some(id) = self.jobs[j].id.clone() else { return Ok(()) };
        if self.escrow.locked(&id).is_none() {
            return Ok(());
        }
        if self.escrow.has_pending_challenge(&id) {
            self.job_record(j, "review_deferred", Vec::new(), None, "challenge pending".into());
            return Ok(());
        }
        let epoch = self.epoch_no();
        match self
            .escrow
            .resolve_review(&mut self.registry, &id, ReviewVerdict::WorkValid, self.now, epoch)
        {
            Ok(out) => {
                self.pool_record(Flow::ReleasedValid, Some(id.clone()), None, out.amount.clone());
                self.job_record(j, "review_released", Vec::new(), None, "WORK_VALID".into());
                let v = self.validator();
                self.commit(vec![(
                    Payload::PoolEvent(PoolEventRecord::ReviewResolved {
                        job_id: id,
                        verdict: out.verdict,
                        amount: out.amount,
                    }),
                    v,
                )])?;
            }
            Err(e) => self.warn(format!("review of {id}: {e}")),
        }
        Ok(())
    }

    // Challenges.

    fn open_challenge(&mut self, c: usize) -> Result<(), SimError> {
        let ch = self.cfg.challenges[c].clone();
        let Some(id) = self.jobs[ch.job].id.clone() else {
            self.warn(format!("challenge {}: job {} was never funded", c + 1, ch.job + 1));
            return Ok(());
        };
        let bond = match ch.bond {
            Some(b) => b,
            None => {
                let fraction: Token = format!("{}", self.cfg.challenge_bond_fraction)
                    .parse()
                    .expect("finite fraction parses");
                match self.cfg.jobs[ch.job].reward.mul_ratio(fraction.as_rational()) {
                    Ok(b) => b,
                    Err(e) => {
                        self.warn(format!("challenge {}: {e}", c + 1));
                        return Ok(());
                    }
                }
            }
        };
        let rng_seed: u64 = self.jury_rng.gen();
        let challenger = self.index[&ch.challenger];
        let next = self.escrow.next_challenge_id();
        self.commit(vec![(
            Payload::Challenge(ChallengeRecord::Open {
                job_id: id,
                challenger: ch.challenger.clone(),
                bond,
                rng_seed,
            }),
            challenger,
        )])?;
        if self.escrow.challenge(next).is_some() {
            self.schedule(
                self.now + self.cfg.vote_delay_seconds,
                Event::Vote {
                    challenge: next,
                    claim_valid: ch.claim_valid,
                },
            );
        }
        Ok(())
    }

    fn vote(&mut self, cid: ChallengeId, claim_valid: bool) -> Result<(), SimError> {
        let Some(c) = self.escrow.challenge(cid) else { return Ok(()) };
        let vote = if claim_valid { Vote::Upheld } else { Vote::Rejected };
        let votes = c.jury.iter().map(|j| (j.clone(), vote)).collect();
        let v = self.validator();
        self.commit(vec![(
            Payload::Challenge(ChallengeRecord::Resolve {
                challenge_id: cid,
                votes,
            }),
            v,
        )])?;
        Ok(())
    }

    // Workers.

    fn deliver(&mut self, to: usize, env: Envelope) -> Result<(), SimError> {
        let from = self.index[&env.sender];
        match env.message {
            Message::Call { job_id, .. } => {
                if self.cfg.nodes[to].worker {
                    let n = &self.cfg.nodes[to];
                    let c = CapabilityCommitment::signed(job_id, n.deed_id.clone(), n.capability, &self.keys[to]);
                    self.publish(to, node_topic(&env.sender, "commit"), Message::Commit(c));
                }
                Ok(())
            }
            Message::Commit(c) => {
                let Some(&j) = self.job_index.get(&c.job_id) else { return Ok(()) };
                let valid = c.deed_id == env.sender && self.ledger.key_of(&c.deed_id).is_some_and(|k| c.verify(k));
                if valid && self.jobs[j].phase == Phase::Calling {
                    self.jobs[j].commitments.push(c);
                }
                Ok(())
            }
            Message::Assign {
                assignment,
                shard,
                mut spec,
            } => self.accept_assignment(to, from, assignment, shard, &mut spec),
            Message::Progress { proof, nonce } => self.receive_progress(from, proof, nonce),
            Message::Result { job_id, result } => self.receive_result(from, job_id, result),
            Message::Noise(_) => Ok(()),
        }
    }

    fn accept_assignment(
        &mut self,
        me: usize,
        main: usize,
        assignment: Assignment,
        shard: usize,
        spec: &mut PipelineSpec,
    ) -> Result<(), SimError> {
        let Some(&j) = self.job_index.get(&assignment.job_id) else { return Ok(()) };
        let deed = self.cfg.nodes[me].deed_id.clone();
        if assignment.shards.get(shard).map(|s| &s.worker) != Some(&deed) {
            return Ok(());
        }
        let author_key = *self.ledger.key_of(&self.cfg.nodes[main].deed_id).expect("registered at genesis");
        let mut problems = Vec::new();
        for code in spec.custom_code_mut() {
            code.vet(&self.cfg.safety_policy);
            let verdict = hash_sign_recheck(code, &author_key, 1);
            if !verdict.is_safe() {
                problems.push(verdict.to_string());
            }
        }
        if !problems.is_empty() {
            self.job_record(j, "code_rejected", vec![deed], None, problems.join("; "));
            return Ok(());
        }
        let params = match shard_params_to_numbers(&assignment.shards[shard].params) {
            Ok(p) => p,
            Err(e) => {
                self.job_record(j, "shard_rejected", vec![deed], None, e.to_string());
                return Ok(());
            }
        };
        let id = assignment.job_id.clone();
        let idb = id.to_canonical_bytes();
        let seed_digest = tagged_hash("poai.jobseed", &[&self.cfg.seed.to_be_bytes(), &idb]);
        let secret = tagged_hash(
            "poai.worker",
            &[&self.cfg.seed.to_be_bytes(), &deed.to_canonical_bytes(), &idb],
        )
        .0;
        let ctx = WorkerContext {
            seed: u64::from_be_bytes(seed_digest.0[..8].try_into().expect("eight bytes")),
            worker_index: shard,
            n_shards: assignment.shards.len(),
            params,
            secret,
        };
        let run = WorkerRun {
            job_id: id.clone(),
            main,
            state: PipelineState::new(spec),
            spec: spec.clone(),
            ctx,
            chain: ProofChain::new(id, deed, secret),
        };
        self.workers.insert((j, me), run);
        self.schedule(self.now + self.cfg.step_seconds, Event::WorkerStep { job: j, node: me });
        Ok(())
    }

    fn worker_step(&mut self, j: usize, me: usize) -> Result<(), SimError> {
        if self.jobs[j].phase != Phase::Running {
            return Ok(());
        }
        let step_at = self.now + self.cfg.step_seconds;
        if !self.is_up(me, self.now) {
            self.schedule(step_at, Event::WorkerStep { job: j, node: me });
            return Ok(());
        }
        let Some(run) = self.workers.get_mut(&(j, me)) else { return Ok(()) };
        let out = match execute_step(&run.spec, &run.ctx, &run.state) {
            Ok(o) => o,
            Err(e) => {
                let deed = self.cfg.nodes[me].deed_id.clone();
                self.workers.remove(&(j, me));
                self.job_record(j, "runtime_error", vec![deed], None, e.to_string());
                return Ok(());
            }
        };
        run.state = out.state;
        let before = run.chain.head();
        let proof = run.chain.advance_with(out.nonce);
        let link = proof.link_index;
        let main = run.main;
        let done = link >= self.cfg.jobs[j].shard_steps;
        let job_id = run.job_id.clone();
        let shard = run.ctx.worker_index;
        let main_id = self.cfg.nodes[main].deed_id.clone();
        let topic = node_topic(&main_id, "progress");

        let forge = self.has_fault(|f| matches!(f, FaultSpec::ForgeProof { job, worker, link: l } if *job == j + 1 && *worker == shard && *l == link));
        if forge {
            let mut forged = proof.clone();
            forged.prev_commitment = before;
            forged.commitment = tagged_hash("poai.forged", &[proof.commitment.as_bytes()]);
            self.publish(me, topic.clone(), Message::Progress { proof: forged, nonce: out.nonce });
        }
        self.publish(me, topic.clone(), Message::Progress { proof: proof.clone(), nonce: out.nonce });
        let replay = self.has_fault(|f| matches!(f, FaultSpec::ReplayProof { job, worker, link: l } if *job == j + 1 && *worker == shard && *l == link));
        if replay {
            self.publish(me, topic, Message::Progress { proof, nonce: out.nonce });
        }

        if done {
            let deed = self.cfg.nodes[me].deed_id.clone();
            let mut result = ShardResult::new(deed, out.payload);
            let corrupt = self.has_fault(|f| matches!(f, FaultSpec::CorruptResult { job, worker } if *job == j + 1 && *worker == shard));
            if corrupt {
                match result.payload.first_mut() {
                    Some(b) => *b ^= 0x01,
                    None => result.payload.push(0),
                }
            }
            self.publish(me, node_topic(&main_id, "result"), Message::Result { job_id, result });
        } else {
            self.schedule(step_at, Event::WorkerStep { job: j, node: me });
        }
        Ok(())
    }

    fn receive_progress(&mut self, from: usize, proof: ProgressProof, nonce: [u8; 32]) -> Result<(), SimError> {
        let Some(&j) = self.job_index.get(&proof.job_id) else { return Ok(()) };
        let assigned = self.jobs[j].assignment.as_ref().is_some_and(|a| a.shard_of(&proof.worker).is_some());
        if !assigned || proof.worker != self.cfg.nodes[from].deed_id || self.jobs[j].phase != Phase::Running {
            return Ok(());
        }
        let events = self.tracker.submit(proof, nonce);
        let mut entries = Vec::new();
        let mut accepted = Vec::new();
        for ev in events {
            let worker = self.index[&ev.proof.worker];
            if ev.verdict.penalizes() {
                let reason = format!("{:?} progress link {} on {}", ev.verdict, ev.proof.link_index, ev.proof.job_id);
                self.penalize(worker, reason.to_lowercase(), &mut entries);
            }
            if ev.verdict == crate::distribution::ProgressVerdict::Ok {
                accepted.push(self.records.len());
                entries.push((Payload::ProgressProof(ev.proof.clone()), worker));
            }
            self.records.push(Record::Progress {
                time: self.now,
                epoch: self.epoch_no(),
                job_id: ev.proof.job_id.clone(),
                worker: ev.proof.worker.clone(),
                link_index: ev.proof.link_index,
                verdict: ev.verdict,
                height: None,
            });
        }
        let height = self.commit(entries)?;
        for i in accepted {
            if let Record::Progress { height: h, .. } = &mut self.records[i] {
                *h = height;
            }
        }
        Ok(())
    }

    fn receive_result(&mut self, from: usize, job_id: JobId, result: ShardResult) -> Result<(), SimError> {
        let Some(&j) = self.job_index.get(&job_id) else { return Ok(()) };
        if self.jobs[j].phase != Phase::Running || result.worker != self.cfg.nodes[from].deed_id {
            return Ok(());
        }
        let Some(assignment) = self.jobs[j].assignment.clone() else { return Ok(()) };
        if assignment.shard_of(&result.worker).is_none() {
            return Ok(());
        }
        let needed = self.cfg.jobs[j].shard_steps;
        let have = self.tracker.progress(&job_id, &result.worker);
        if have < needed {
            let w = result.worker.clone();
            self.job_record(j, "result_rejected", vec![w], None, format!("progress {have} of {needed}"));
            return Ok(());
        }
        self.jobs[j].results.insert(result.worker.clone(), result);
        if self.jobs[j].results.len() < assignment.shards.len() {
            return Ok(());
        }
        let results: Vec<ShardResult> = self.jobs[j].results.values().cloned().collect();
        match reduce_gather(&assignment, &results) {
            Ok(g) => self.finish_job(j, FinalStatus::Done, Some(g.digest), "gathered".into(), Vec::new()),
            Err(GatherError::Corrupt(bad)) => {
                let mut entries = Vec::new();
                let names: Vec<String> = bad.iter().map(|d| d.to_string()).collect();
                for d in &bad {
                    let w = self.index[d];
                    self.penalize(w, format!("corrupt result on {job_id}"), &mut entries);
                }
                self.finish_job(
                    j,
                    FinalStatus::Cancelled,
                    None,
                    format!("corrupt result from {}", names.join(", ")),
                    entries,
                )
            }
            Err(e) => {
                self.warn(format!("gather {job_id}: {e:?}"));
                Ok(())
            }
        }
    }

    /// On-chain status of the job at config position `j` (0-based).
    pub fn job_status(&self, j: usize) -> Option<JobStatus> {
        let id = self.jobs.get(j)?.id.as_ref()?;
        self.escrow.job(id).map(|job| job.status)
    }

    pub fn job_id(&self, j: usize) -> Option<&JobId> {
        self.jobs.get(j)?.id.as_ref()
    }
}
