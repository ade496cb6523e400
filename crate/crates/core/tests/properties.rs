// Copyright 2026 The PoAI Simnet Authors
// SPDX-License-Identifier: Apache-2.0

//! Invariants as properties over random inputs.

use std::collections::BTreeMap;

use poai_core::capability::Capability;
use poai_core::crypto::{tagged_hash, Digest, SigningKey};
use poai_core::distribution::{ProgressProof, ProgressTracker, ProgressVerdict, ProofChain};
use poai_core::escrow::{ChallengeVerdict, Escrow, FinalStatus, JobStatus, ReviewVerdict, Vote};
use poai_core::ledger::{
    decode_dump, encode_dump, verify_dump, ChallengeRecord, JobStatusRecord, Ledger, LedgerEntry, NodeSpecRecord,
    Payload, PoolEventRecord, RewardLine, RewardRecord,
};
use poai_core::pipeline::{safety_check, SafetyPolicy};
use poai_core::tokenomics::{
    compute_shares, distribute_epoch_rewards, DeedRegistry, EpochConfig, EpochDistribution, NodeActivity, NodeDeed,
};
use poai_core::{ChallengeId, DeedId, JobId, Token};
use proptest::prelude::*;

fn activities(nodes: &[(f64, u64)], shift: f64) -> Vec<NodeActivity> {
    nodes
        .iter()
        .enumerate()
        .map(|(i, &(p, t))| {
            let mut a = NodeActivity::new(DeedId::new(format!("n{i}")), Capability::default());
            a.total_alive_seconds = t;
            a.power_score_per_epoch.insert(3, p + shift);
            a
        })
        .collect()
}

fn fleet() -> impl Strategy<Value = Vec<(f64, u64)>> {
    prop::collection::vec((-5.0f64..5.0, 0u64..=3000), 1..9)
        .prop_filter("one node alive", |v| v.iter().any(|n| n.1 > 0))
}

proptest! {
    #[test]
    fn shares_normalise_and_amounts_are_exact(nodes in fleet(), pool in 0u64..1_000_000) {
        let cfg = EpochConfig::at_epoch(1000, 0, 3).unwrap();
        let active = activities(&nodes, 0.0);
        let shares = compute_shares(&active, &cfg).unwrap();
        let sum: f64 = shares.iter().map(|s| s.share).sum();
        prop_assert!((sum - 1.0).abs() <= 1e-9);
        prop_assert!(shares.iter().all(|s| s.share >= 0.0));
        let snapshot = Token::from_integer(pool);
        let EpochDistribution::Allocated(alloc) = distribute_epoch_rewards(&snapshot, &active, &cfg).unwrap() else {
            panic!("allocation expected");
        };
        prop_assert_eq!(alloc.total(), snapshot);
        for (e, &(_, t)) in alloc.entries.iter().zip(&nodes) {
            if t == 0 {
                prop_assert!(e.amount.is_zero());
            }
        }
    }

    #[test]
    fn shares_ignore_uniform_power_shift(nodes in fleet(), c in -10.0f64..10.0) {
        let cfg = EpochConfig::at_epoch(1000, 0, 3).unwrap();
        let a = compute_shares(&activities(&nodes, 0.0), &cfg).unwrap();
        let b = compute_shares(&activities(&nodes, c), &cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.share - y.share).abs() <= 1e-9);
        }
    }

    #[test]
    fn penalty_never_raises_a_share(nodes in fleet(), who in 0usize..8, delta in 0.01f64..5.0) {
        let cfg = EpochConfig::at_epoch(1000, 0, 3).unwrap();
        let who = who % nodes.len();
        let before = compute_shares(&activities(&nodes, 0.0), &cfg).unwrap();
        let mut hit = nodes.clone();
        hit[who].0 -= delta;
        let after = compute_shares(&activities(&hit, 0.0), &cfg).unwrap();
        prop_assert!(after[who].share <= before[who].share);
        if nodes[who].1 > 0 && nodes.iter().enumerate().any(|(i, n)| i != who && n.1 > 0) {
            prop_assert!(after[who].share < before[who].share);
        }
    }
}

// ---------------------------------------------------------------------------
// Escrow

#[derive(Debug, Clone)]
enum Op {
    Submit { sender: usize, reward: u64 },
    Settle { job: usize, done: bool },
    Review { job: usize, valid: bool, wait: u64 },
    Challenge { who: usize, job: usize, bond: u64 },
    Vote { challenge: usize, upheld: bool },
    Pay { to: usize, amount: u64 },
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0usize..6, 1u64..40).prop_map(|(sender, reward)| Op::Submit { sender, reward }),
        (0usize..12, any::<bool>()).prop_map(|(job, done)| Op::Settle { job, done }),
        (0usize..12, any::<bool>(), 0u64..200_000).prop_map(|(job, valid, wait)| Op::Review { job, valid, wait }),
        (0usize..6, 0usize..12, 1u64..10).prop_map(|(who, job, bond)| Op::Challenge { who, job, bond }),
        (0usize..4, any::<bool>()).prop_map(|(challenge, upheld)| Op::Vote { challenge, upheld }),
        (0usize..6, 1u64..20).prop_map(|(to, amount)| Op::Pay { to, amount }),
    ]
}

fn deeds() -> Vec<DeedId> {
    (0..6).map(|i| DeedId::new(format!("d{i}"))).collect()
}

fn registry() -> DeedRegistry {
    let mut r = DeedRegistry::new();
    for (i, id) in deeds().into_iter().enumerate() {
        r.register(
            NodeDeed {
                owner_key: SigningKey::derive("prop", id.as_str().as_bytes()).public_key(),
                deed_id: id,
                balance: Token::from_integer(50 + 10 * i as u64),
                registered_epoch: 0,
            },
            Capability::default(),
        )
        .unwrap();
    }
    r
}

fn supply(reg: &DeedRegistry, esc: &Escrow) -> Token {
    reg.total_balance() + esc.pool().total()
}

/// One operation may take several lifecycle edges, e.g. DONE then SETTLED.
fn reachable(from: JobStatus, to: JobStatus) -> bool {
    use JobStatus::*;
    let all = [Pending, InProgress, Done, Cancelled, LockedForReview, Settled, Refunded];
    let mut seen = vec![from];
    let mut i = 0;
    while i < seen.len() {
        for n in all {
            if seen[i].can_transition_to(n) && !seen.contains(&n) {
                seen.push(n);
            }
        }
        i += 1;
    }
    seen.contains(&to)
}

fn statuses(esc: &Escrow) -> BTreeMap<JobId, JobStatus> {
    esc.jobs().map(|j| (j.id.clone(), j.status)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn escrow_conserves_tokens_and_follows_the_status_graph(ops in prop::collection::vec(op(), 1..60)) {
        let mut reg = registry();
        let mut esc = Escrow::default();
        let total = supply(&reg, &esc);
        let ids = deeds();
        let mut jobs: Vec<JobId> = Vec::new();
        let mut challenges: Vec<ChallengeId> = Vec::new();
        let mut now = 0u64;
        for op in ops {
            now += 1000;
            let epoch = now / 3600 + 1;
            let before_pool = esc.pool().clone();
            let before_status = statuses(&esc);
            let before_balances: Vec<Token> = ids.iter().map(|d| reg.balance(d).unwrap().clone()).collect();
            let ok = match &op {
                Op::Submit { sender, reward } => esc
                    .submit_job(&mut reg, &ids[*sender], Token::from_integer(*reward), Digest::ZERO, 1)
                    .map(|j| jobs.push(j.id))
                    .is_ok(),
                Op::Settle { job, done } => jobs.get(*job).is_some_and(|id| {
                    let st = if *done { FinalStatus::Done } else { FinalStatus::Cancelled };
                    esc.settle_job(id, st, now, epoch).is_ok()
                }),
                Op::Review { job, valid, wait } => jobs.get(*job).is_some_and(|id| {
                    now += wait;
                    let v = if *valid { ReviewVerdict::WorkValid } else { ReviewVerdict::WorkInvalid };
                    esc.resolve_review(&mut reg, id, v, now, epoch).is_ok()
                }),
                Op::Challenge { who, job, bond } => jobs.get(*job).is_some_and(|id| {
                    esc.open_challenge(&mut reg, &ids[*who], id, Token::from_integer(*bond), now, &ids, epoch)
                        .map(|c| challenges.push(c.id))
                        .is_ok()
                }),
                Op::Vote { challenge, upheld } => challenges.get(*challenge).copied().is_some_and(|cid| {
                    let jury = esc.challenge(cid).unwrap().jury.clone();
                    let v = if *upheld { Vote::Upheld } else { Vote::Rejected };
                    let votes: Vec<_> = jury.into_iter().map(|j| (j, v)).collect();
                    esc.resolve_challenge(&mut reg, cid, &votes, epoch).is_ok()
                }),
                Op::Pay { to, amount } => esc.pay_reward(&mut reg, &ids[*to], &Token::from_integer(*amount)).is_ok(),
            };
            prop_assert_eq!(supply(&reg, &esc), total.clone(), "after {:?}", op);
            let after_status = statuses(&esc);
            if ok {
                for (id, st) in &after_status {
                    if let Some(prev) = before_status.get(id) {
                        prop_assert!(reachable(*prev, *st), "{id}: {prev:?} -> {st:?}");
                    }
                }
            } else {
                prop_assert_eq!(esc.pool(), &before_pool, "failed {:?} changed pools", op);
                prop_assert_eq!(&after_status, &before_status);
                let balances: Vec<Token> = ids.iter().map(|d| reg.balance(d).unwrap().clone()).collect();
                prop_assert_eq!(balances, before_balances);
            }
            let mut locked: Vec<&JobId> = esc.pool().locked_funds.iter().map(|l| &l.job_id).collect();
            let n = locked.len();
            locked.dedup();
            prop_assert_eq!(locked.len(), n, "job locked twice");
            for c in esc.challenges() {
                if c.verdict != ChallengeVerdict::Pending {
                    prop_assert!(!c.jury.contains(&c.challenger) && !c.jury.contains(&c.job_id.sender));
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Ledger

fn token() -> impl Strategy<Value = Token> {
    (0u64..1_000_000, 1u64..1000).prop_map(|(n, d)| Token::from_ratio(n, d))
}

fn deed() -> impl Strategy<Value = DeedId> {
    "[a-z][a-z0-9]{0,6}".prop_map(DeedId::new)
}

fn job_id() -> impl Strategy<Value = JobId> {
    (deed(), 1u64..1000).prop_map(|(d, s)| JobId::new(d, s))
}

fn digest() -> impl Strategy<Value = Digest> {
    any::<[u8; 32]>().prop_map(Digest)
}

fn payload() -> impl Strategy<Value = Payload> {
    prop_oneof![
        (job_id(), any::<bool>(), prop::option::of(digest()), ".{0,20}").prop_map(|(job_id, done, aggregate_digest, reason)| {
            Payload::JobStatus(JobStatusRecord {
                job_id,
                status: if done { FinalStatus::Done } else { FinalStatus::Cancelled },
                aggregate_digest,
                reason,
            })
        }),
        (job_id(), deed(), 1u64..100, digest(), digest()).prop_map(|(job_id, worker, link_index, prev_commitment, commitment)| {
            Payload::ProgressProof(ProgressProof {
                job_id,
                worker,
                link_index,
                prev_commitment,
                commitment,
            })
        }),
        (job_id(), deed(), token(), any::<u64>()).prop_map(|(job_id, challenger, bond, rng_seed)| {
            Payload::Challenge(ChallengeRecord::Open {
                job_id,
                challenger,
                bond,
                rng_seed,
            })
        }),
        (any::<u64>(), prop::collection::vec((deed(), any::<bool>()), 0..5)).prop_map(|(c, votes)| {
            Payload::Challenge(ChallengeRecord::Resolve {
                challenge_id: ChallengeId(c),
                votes: votes
                    .into_iter()
                    .map(|(d, u)| (d, if u { Vote::Upheld } else { Vote::Rejected }))
                    .collect(),
            })
        }),
        (1u64..100, prop::collection::vec((deed(), 0.0f64..1.0, token()), 0..5)).prop_map(|(epoch, lines)| {
            Payload::RewardRecord(RewardRecord {
                epoch,
                lines: lines
                    .into_iter()
                    .map(|(deed_id, share, amount)| RewardLine { deed_id, share, amount })
                    .collect(),
            })
        }),
        (job_id(), token()).prop_map(|(job_id, reward)| Payload::PoolEvent(PoolEventRecord::JobFunded { job_id, reward })),
        (deed(), 1u64..50, -3.0f64..3.0, ".{0,16}").prop_map(|(deed_id, epoch, delta, reason)| {
            Payload::PoolEvent(PoolEventRecord::Penalty {
                deed_id,
                epoch,
                delta,
                reason,
            })
        }),
    ]
}

fn signed_ledger(payloads: &[Payload]) -> Ledger {
    let author = DeedId::new("author");
    let key = SigningKey::derive("prop", b"author");
    let mut ledger = Ledger::new(0);
    let spec = Payload::NodeSpec(NodeSpecRecord {
        deed_id: author.clone(),
        owner_key: key.public_key(),
        capability: Capability::default(),
        region: "r".into(),
    });
    ledger
        .append_entries(vec![LedgerEntry::signed(&spec, author.clone(), &key)], 1)
        .unwrap();
    for (i, p) in payloads.iter().enumerate() {
        ledger
            .append_entries(vec![LedgerEntry::signed(p, author.clone(), &key)], 2 + i as u64)
            .unwrap();
    }
    ledger
}

proptest! {
    #[test]
    fn payloads_round_trip_canonically(p in payload()) {
        let bytes = p.encode();
        let back = Payload::decode(p.kind(), &bytes).unwrap();
        prop_assert_eq!(back.encode(), bytes);
        prop_assert_eq!(back, p);
    }

    #[test]
    fn dumps_round_trip_bit_exactly(ps in prop::collection::vec(payload(), 0..12)) {
        let ledger = signed_ledger(&ps);
        let dump = encode_dump(ledger.blocks());
        let blocks = decode_dump(&dump).unwrap();
        prop_assert_eq!(encode_dump(&blocks), dump.clone());
        prop_assert_eq!(&blocks[..], ledger.blocks());
        prop_assert!(verify_dump(&dump).is_ok());
        for (h, b) in blocks.iter().enumerate() {
            prop_assert_eq!(b.height, h as u64);
            if h > 0 {
                prop_assert_eq!(b.prev_hash, blocks[h - 1].block_hash);
            }
        }
    }

    #[test]
    fn any_flip_is_caught(ps in prop::collection::vec(payload(), 1..6), pos in any::<prop::sample::Index>(), mask in 1u8..=255) {
        let dump = encode_dump(signed_ledger(&ps).blocks());
        let mut bad = dump.clone();
        let i = pos.index(bad.len());
        bad[i] ^= mask;
        prop_assert!(!verify_dump(&bad).is_ok());
    }
}

// ---------------------------------------------------------------------------
// Progress chains

#[derive(Debug, Clone)]
enum Send {
    Genuine,
    Replay,
    Forge,
    Skip,
}

fn sends() -> impl Strategy<Value = Vec<Send>> {
    prop::collection::vec(
        prop_oneof![
            4 => Just(Send::Genuine),
            1 => Just(Send::Replay),
            1 => Just(Send::Forge),
            1 => Just(Send::Skip),
        ],
        1..40,
    )
}

proptest! {
    #[test]
    fn accepted_links_are_exactly_one_to_k(plan in sends()) {
        let job = JobId::new(DeedId::new("m"), 1);
        let worker = DeedId::new("w");
        let mut chain = ProofChain::new(job.clone(), worker.clone(), [7; 32]);
        let mut tracker = ProgressTracker::new();
        let mut last: Option<(ProgressProof, [u8; 32])> = None;
        let mut held: Vec<(ProgressProof, [u8; 32])> = Vec::new();
        for s in plan {
            let events = match s {
                Send::Genuine => {
                    let (p, n) = chain.advance();
                    last = Some((p.clone(), n));
                    let mut ev = tracker.submit(p, n);
                    for (hp, hn) in held.drain(..) {
                        ev.extend(tracker.submit(hp, hn));
                    }
                    ev
                }
                Send::Skip => {
                    held.push(chain.advance());
                    Vec::new()
                }
                Send::Replay => match &last {
                    Some((p, n)) => tracker.submit(p.clone(), *n),
                    None => Vec::new(),
                },
                Send::Forge => {
                    let forged = ProgressProof {
                        job_id: job.clone(),
                        worker: worker.clone(),
                        link_index: tracker.progress(&job, &worker) + 1,
                        prev_commitment: chain.head(),
                        commitment: tagged_hash("prop.forged", &[&[1]]),
                    };
                    tracker.submit(forged, [9; 32])
                }
            };
            for e in &events {
                prop_assert!(e.verdict == ProgressVerdict::Ok || e.verdict.penalizes() || e.verdict == ProgressVerdict::Gap);
            }
        }
        let accepted = tracker.accepted(&job, &worker);
        let want: Vec<u64> = (1..=accepted.len() as u64).collect();
        prop_assert_eq!(accepted, &want[..]);
    }
}

// ---------------------------------------------------------------------------
// Vetting

proptest! {
    #[test]
    fn vetting_is_total_and_deterministic(src in ".{0,200}") {
        let policy = SafetyPolicy::builtin();
        prop_assert_eq!(safety_check(&src, &policy), safety_check(&src, &policy));
    }

    #[test]
    fn denied_names_are_always_caught(prefix in "[ax+*() 0-9]{0,20}", pick in any::<prop::sample::Index>()) {
        let policy = SafetyPolicy::builtin();
        let all: Vec<(&str, &str)> = policy
            .deny
            .iter()
            .flat_map(|c| c.tokens.iter().map(move |t| (c.class.as_str(), t.as_str())))
            .collect();
        let (class, tok) = all[pick.index(all.len())];
        let src = format!("{prefix} {tok}(x)");
        prop_assert!(safety_check(&src, &policy).classes().contains(class));
    }
}
