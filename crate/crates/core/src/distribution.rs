// Copyright 2026 The PoAI Simnet Authors
// SPDX-License-Identifier: Apache-2.0

//! Map/Reduce job distribution: worker search, signed capability
//! commitments, assignment, progress chains and result gathering.
//!
//! Progress is proven with a hash chain. Each link commits to
//! `SHA-256(prev ‖ nonce)`; the worker reveals the nonce only to the main node
//! that checks the link, and the ledger stores the commitment alone. This is
//! a count-of-steps proof, not a zero-knowledge system.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::capability::{Capability, CapabilityWeights};
use crate::codec::{Canonical, CodecError, Reader, Writer};
use crate::crypto::{sha256_concat, tagged_hash, Digest, PublicKey, Signature, SigningKey};
use crate::ids::{DeedId, JobId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DistributionError {
    #[error("job {job} needs {needed} workers, {available} available")]
    InsufficientWorkers { job: JobId, available: usize, needed: usize },
    #[error("job {job}: {given} shard configs for {needed} workers")]
    ShardConfigMismatch { job: JobId, given: usize, needed: usize },
    #[error("job {0} needs at least one worker")]
    NoWorkers(JobId),
    #[error("shard {index}: {reason}")]
    BadShard { index: usize, reason: String },
    #[error("shard results do not match the assignment: {0}")]
    ResultSet(String),
}

/// A worker's signed statement of its capability for one job.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapabilityCommitment {
    pub job_id: JobId,
    pub deed_id: DeedId,
    pub capability: Capability,
    pub signature: Signature,
}

fn commitment_message(job: &JobId, deed: &DeedId, cap: &Capability) -> Digest {
    tagged_hash(
        "poai.capability",
        &[&job.to_canonical_bytes(), &deed.to_canonical_bytes(), &cap.to_canonical_bytes()],
    )
}

impl CapabilityCommitment {
    pub fn signed(job_id: JobId, deed_id: DeedId, capability: Capability, key: &SigningKey) -> Self {
        let signature = key.sign(commitment_message(&job_id, &deed_id, &capability).as_bytes());
        CapabilityCommitment {
            job_id,
            deed_id,
            capability,
            signature,
        }
    }

    pub fn verify(&self, key: &PublicKey) -> bool {
        key.verify(
            commitment_message(&self.job_id, &self.deed_id, &self.capability).as_bytes(),
            &self.signature,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedWorker {
    pub deed_id: DeedId,
    pub capability: Capability,
    pub score: f64,
}

/// Keeps candidates whose capability dominates `req`, ranked by score
/// descending and deed id ascending. Signatures must already be checked.
/// A second commitment from the same deed is ignored.
pub fn map_search(
    req: &Capability,
    candidates: &[CapabilityCommitment],
    weights: &CapabilityWeights,
) -> Vec<RankedWorker> {
    let mut seen = BTreeSet::new();
    let mut ranked: Vec<RankedWorker> = candidates
        .iter()
        .filter(|c| seen.insert(c.deed_id.clone()))
        .filter(|c| c.capability.dominates(req))
        .map(|c| RankedWorker {
            deed_id: c.deed_id.clone(),
            capability: c.capability,
            score: weights.score(&c.capability),
        })
        .collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.deed_id.cmp(&b.deed_id)));
    ranked
}

pub type ShardParams = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Shard {
    pub worker: DeedId,
    pub params: ShardParams,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Assignment {
    pub job_id: JobId,
    pub shards: Vec<Shard>,
    /// Ledger height the assignment was published at.
    pub published_at: u64,
}

impl Assignment {
    pub fn workers(&self) -> impl Iterator<Item = &DeedId> {
        self.shards.iter().map(|s| &s.worker)
    }

    pub fn shard_of(&self, worker: &DeedId) -> Option<usize> {
        self.shards.iter().position(|s| &s.worker == worker)
    }
}

/// Gives the top `n_workers` ranked workers one shard each. `configs` is
/// either empty (every shard gets an empty map) or one map per worker.
pub fn map_assign(
    job_id: &JobId,
    n_workers: usize,
    ranked: &[RankedWorker],
    configs: &[ShardParams],
    height: u64,
) -> Result<Assignment, DistributionError> {
    if n_workers == 0 {
        return Err(DistributionError::NoWorkers(job_id.clone()));
    }
    if !configs.is_empty() && configs.len() != n_workers {
        return Err(DistributionError::ShardConfigMismatch {
            job: job_id.clone(),
            given: configs.len(),
            needed: n_workers,
        });
    }
    if ranked.len() < n_workers {
        return Err(DistributionError::InsufficientWorkers {
            job: job_id.clone(),
            available: ranked.len(),
            needed: n_workers,
        });
    }
    let shards = ranked[..n_workers]
        .iter()
        .enumerate()
        .map(|(i, w)| Shard {
            worker: w.deed_id.clone(),
            params: configs.get(i).cloned().unwrap_or_default(),
        })
        .collect();
    Ok(Assignment {
        job_id: job_id.clone(),
        shards,
        published_at: height,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProgressProof {
    pub job_id: JobId,
    pub worker: DeedId,
    pub link_index: u64,
    pub prev_commitment: Digest,
    pub commitment: Digest,
}

/// Chain anchor for a (job, worker) pair; link 0.
pub fn genesis_commitment(job: &JobId, worker: &DeedId) -> Digest {
    tagged_hash("poai.progress", &[&job.to_canonical_bytes(), &worker.to_canonical_bytes()])
}

pub fn next_link(prev: &Digest, nonce: &[u8; 32]) -> Digest {
    sha256_concat(&[&prev.0, nonce])
}

/// Worker-side generator of progress links. Nonces come from a private
/// secret so the chain cannot be extended by anyone else.
#[derive(Debug, Clone)]
pub struct ProofChain {
    job_id: JobId,
    worker: DeedId,
    secret: [u8; 32],
    head: Digest,
    index: u64,
}

impl ProofChain {
    pub fn new(job_id: JobId, worker: DeedId, secret: [u8; 32]) -> Self {
        let head = genesis_commitment(&job_id, &worker);
        ProofChain {
            job_id,
            worker,
            secret,
            head,
            index: 0,
        }
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn head(&self) -> Digest {
        self.head
    }

    pub fn nonce_for(&self, link_index: u64) -> [u8; 32] {
        tagged_hash("poai.nonce", &[&self.secret, &link_index.to_be_bytes()]).0
    }

    /// Produces the next link and the nonce to reveal to the verifier.
    pub fn advance(&mut self) -> (ProgressProof, [u8; 32]) {
        let nonce = self.nonce_for(self.index + 1);
        (self.advance_with(nonce), nonce)
    }

    /// Extends the chain with a caller-supplied nonce, such as a step digest.
    pub fn advance_with(&mut self, nonce: [u8; 32]) -> ProgressProof {
        let index = self.index + 1;
        let commitment = next_link(&self.head, &nonce);
        let proof = ProgressProof {
            job_id: self.job_id.clone(),
            worker: self.worker.clone(),
            link_index: index,
            prev_commitment: self.head,
            commitment,
        };
        self.head = commitment;
        self.index = index;
        proof
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgressVerdict {
    Ok,
    /// Index at or below the accepted head.
    Replay,
    /// Index ahead of the next expected link; held until the gap fills.
    Gap,
    /// Right index, wrong predecessor.
    ChainBreak,
    /// Commitment does not open with the revealed nonce.
    Forged,
}

impl ProgressVerdict {
    pub fn penalizes(self) -> bool {
        matches!(self, ProgressVerdict::Replay | ProgressVerdict::ChainBreak | ProgressVerdict::Forged)
    }
}

/// Checks one link against the accepted head `(prior_index, prior_head)`.
pub fn verify_progress(proof: &ProgressProof, prior_index: u64, prior_head: &Digest, nonce: &[u8; 32]) -> ProgressVerdict {
    if proof.link_index <= prior_index {
        return ProgressVerdict::Replay;
    }
    if proof.link_index > prior_index + 1 {
        return ProgressVerdict::Gap;
    }
    if proof.prev_commitment != *prior_head {
        return ProgressVerdict::ChainBreak;
    }
    if next_link(prior_head, nonce) != proof.commitment {
        return ProgressVerdict::Forged;
    }
    ProgressVerdict::Ok
}

#[derive(Debug, Clone)]
struct ChainHead {
    index: u64,
    head: Digest,
    pending: BTreeMap<u64, (ProgressProof, [u8; 32])>,
    accepted: Vec<u64>,
}

/// One outcome per proof examined, including buffered ones released later.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProgressEvent {
    pub proof: ProgressProof,
    pub verdict: ProgressVerdict,
}

/// Main-node view of every (job, worker) chain.
#[derive(Debug, Clone, Default)]
pub struct ProgressTracker {
    chains: BTreeMap<(JobId, DeedId), ChainHead>,
}

impl ProgressTracker {
    pub fn new() -> Self {
        Self::default()
    }

    fn chain(&mut self, job: &JobId, worker: &DeedId) -> &mut ChainHead {
        self.chains
            .entry((job.clone(), worker.clone()))
            .or_insert_with(|| ChainHead {
                index: 0,
                head: genesis_commitment(job, worker),
                pending: BTreeMap::new(),
                accepted: Vec::new(),
            })
    }

    /// Examines a proof. A gap is buffered; an accepted link drains any
    /// buffered successors. Returns every verdict reached, in order.
    pub fn submit(&mut self, proof: ProgressProof, nonce: [u8; 32]) -> Vec<ProgressEvent> {
        let chain = self.chain(&proof.job_id, &proof.worker);
        let verdict = verify_progress(&proof, chain.index, &chain.head, &nonce);
        let mut out = Vec::new();
        match verdict {
            ProgressVerdict::Gap => {
                chain.pending.insert(proof.link_index, (proof.clone(), nonce));
            }
            ProgressVerdict::Ok => {
                chain.index = proof.link_index;
                chain.head = proof.commitment;
                chain.accepted.push(proof.link_index);
                out.push(ProgressEvent { proof, verdict });
                while let Some((p, n)) = chain.pending.remove(&(chain.index + 1)) {
                    let v = verify_progress(&p, chain.index, &chain.head, &n);
                    if v == ProgressVerdict::Ok {
                        chain.index = p.link_index;
                        chain.head = p.commitment;
                        chain.accepted.push(p.link_index);
                    }
                    out.push(ProgressEvent { proof: p, verdict: v });
                    if v != ProgressVerdict::Ok {
                        break;
                    }
                }
                return out;
            }
            _ => {}
        }
        out.push(ProgressEvent { proof, verdict });
        out
    }

    pub fn progress(&self, job: &JobId, worker: &DeedId) -> u64 {
        self.chains
            .get(&(job.clone(), worker.clone()))
            .map_or(0, |c| c.index)
    }

    pub fn accepted(&self, job: &JobId, worker: &DeedId) -> &[u64] {
        self.chains
            .get(&(job.clone(), worker.clone()))
            .map_or(&[], |c| c.accepted.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardResult {
    pub worker: DeedId,
    pub digest: Digest,
    pub payload: Vec<u8>,
}

impl ShardResult {
    pub fn new(worker: DeedId, payload: Vec<u8>) -> Self {
        let digest = payload_digest(&payload);
        ShardResult { worker, digest, payload }
    }
}

pub fn payload_digest(payload: &[u8]) -> Digest {
    tagged_hash("poai.shard", &[payload])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GatherResult {
    #[serde(with = "hex_bytes")]
    pub aggregate: Vec<u8>,
    pub digest: Digest,
}

mod hex_bytes {
    pub fn serialize<S: serde::Serializer>(b: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(b))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GatherError {
    /// Workers whose shard never arrived.
    Missing(Vec<DeedId>),
    /// Workers whose payload did not match the claimed digest.
    Corrupt(Vec<DeedId>),
    /// Results from workers outside the assignment, or duplicates.
    Unexpected(Vec<DeedId>),
}

/// Concatenates shard payloads in assignment order, each length-prefixed.
pub fn reduce_gather(assignment: &Assignment, results: &[ShardResult]) -> Result<GatherResult, GatherError> {
    let mut by_worker: BTreeMap<&DeedId, &ShardResult> = BTreeMap::new();
    let mut unexpected = Vec::new();
    for r in results {
        if assignment.shard_of(&r.worker).is_none() || by_worker.insert(&r.worker, r).is_some() {
            unexpected.push(r.worker.clone());
        }
    }
    if !unexpected.is_empty() {
        return Err(GatherError::Unexpected(unexpected));
    }
    let corrupt: Vec<DeedId> = results
        .iter()
        .filter(|r| payload_digest(&r.payload) != r.digest)
        .map(|r| r.worker.clone())
        .collect();
    if !corrupt.is_empty() {
        return Err(GatherError::Corrupt(corrupt));
    }
    let missing: Vec<DeedId> = assignment
        .workers()
        .filter(|w| !by_worker.contains_key(w))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(GatherError::Missing(missing));
    }
    let mut aggregate = Vec::new();
    for w in assignment.workers() {
        let p = &by_worker[w].payload;
        aggregate.extend_from_slice(&(p.len() as u32).to_be_bytes());
        aggregate.extend_from_slice(p);
    }
    let digest = tagged_hash("poai.aggregate", &[&assignment.job_id.to_canonical_bytes(), &aggregate]);
    Ok(GatherResult { aggregate, digest })
}

impl Canonical for Shard {
    fn encode_into(&self, w: &mut Writer) {
        self.worker.encode_into(w);
        self.params.encode_into(w);
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(Shard {
            worker: DeedId::decode_from(r)?,
            params: BTreeMap::decode_from(r)?,
        })
    }
}

impl Canonical for Assignment {
    fn encode_into(&self, w: &mut Writer) {
        self.job_id.encode_into(w);
        w.put_seq(&self.shards);
        w.put_u64(self.published_at);
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        let job_id = JobId::decode_from(r)?;
        let shards: Vec<Shard> = r.get_seq()?;
        let mut seen = BTreeSet::new();
        if !shards.iter().all(|s| seen.insert(&s.worker)) {
            return Err(CodecError::Invalid("duplicate worker in assignment".into()));
        }
        Ok(Assignment {
            job_id,
            shards,
            published_at: r.get_u64()?,
        })
    }
}

impl Canonical for ProgressProof {
    fn encode_into(&self, w: &mut Writer) {
        self.job_id.encode_into(w);
        self.worker.encode_into(w);
        w.put_u64(self.link_index);
        self.prev_commitment.encode_into(w);
        self.commitment.encode_into(w);
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(ProgressProof {
            job_id: JobId::decode_from(r)?,
            worker: DeedId::decode_from(r)?,
            link_index: r.get_u64()?,
            prev_commitment: Digest::decode_from(r)?,
            commitment: Digest::decode_from(r)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn job() -> JobId {
        "main:1".parse().unwrap()
    }

    fn commit(id: &str, cap: Capability) -> CapabilityCommitment {
        CapabilityCommitment::signed(job(), DeedId::new(id), cap, &SigningKey::derive("t", id.as_bytes()))
    }

    #[test]
    fn search_filters_by_dominance() {
        let req = Capability::new(2, 0, 0);
        let ranked = map_search(
            &req,
            &[commit("a", Capability::new(4, 0, 0)), commit("b", Capability::new(1, 0, 0))],
            &CapabilityWeights::default(),
        );
        assert_eq!(ranked.len(), 1);
        assert_eq!(ranked[0].deed_id.as_str(), "a");
        assert!(map_search(&req, &[], &CapabilityWeights::default()).is_empty());
    }

    #[test]
    fn search_ties_break_by_deed() {
        let cap = Capability::new(4, 1, 8);
        let ranked = map_search(
            &Capability::default(),
            &[commit("z", cap), commit("m", cap), commit("q", Capability::new(64, 0, 0))],
            &CapabilityWeights::default(),
        );
        let order: Vec<&str> = ranked.iter().map(|w| w.deed_id.as_str()).collect();
        assert_eq!(order, ["q", "m", "z"]);
    }

    #[test]
    fn commitment_signature() {
        let c = commit("a", Capability::new(1, 0, 0));
        assert!(c.verify(&SigningKey::derive("t", b"a").public_key()));
        assert!(!c.verify(&SigningKey::derive("t", b"b").public_key()));
    }

    fn ranked(n: usize) -> Vec<RankedWorker> {
        (0..n)
            .map(|i| RankedWorker {
                deed_id: DeedId::new(format!("w{i}")),
                capability: Capability::default(),
                score: (10 - i) as f64,
            })
            .collect()
    }

    #[test]
    fn assign_top_n() {
        let a = map_assign(&job(), 3, &ranked(5), &[], 4).unwrap();
        let ws: Vec<&str> = a.workers().map(DeedId::as_str).collect();
        assert_eq!(ws, ["w0", "w1", "w2"]);
        assert_eq!(a.published_at, 4);
        assert!(matches!(
            map_assign(&job(), 3, &ranked(2), &[], 4),
            Err(DistributionError::InsufficientWorkers { available: 2, needed: 3, .. })
        ));
        let one = map_assign(&job(), 1, &ranked(5), &[], 0).unwrap();
        assert_eq!(one.shards.len(), 1);
        let cfg = vec![ShardParams::new(); 2];
        assert!(matches!(
            map_assign(&job(), 3, &ranked(5), &cfg, 0),
            Err(DistributionError::ShardConfigMismatch { .. })
        ));
    }

    #[test]
    fn assignment_round_trips() {
        let mut p = ShardParams::new();
        p.insert("param_worker0".into(), "0".into());
        let a = map_assign(&job(), 1, &ranked(1), &[p], 9).unwrap();
        assert_eq!(Assignment::from_canonical_bytes(&a.to_canonical_bytes()).unwrap(), a);
    }

    #[test]
    fn chain_steps_and_rejections() {
        let w = DeedId::new("w");
        let mut chain = ProofChain::new(job(), w.clone(), [7; 32]);
        let mut t = ProgressTracker::new();
        let (p1, n1) = chain.advance();
        assert_eq!(t.submit(p1.clone(), n1)[0].verdict, ProgressVerdict::Ok);
        // Replay of link 1.
        assert_eq!(t.submit(p1, n1)[0].verdict, ProgressVerdict::Replay);
        let (mut p2, n2) = chain.advance();
        let good = p2.clone();
        p2.commitment.0[0] ^= 1;
        let ev = t.submit(p2, n2);
        assert_eq!(ev[0].verdict, ProgressVerdict::Forged);
        assert!(ev[0].verdict.penalizes());
        assert_eq!(t.submit(good, n2)[0].verdict, ProgressVerdict::Ok);
        assert_eq!(t.accepted(&job(), &w), &[1, 2]);
    }

    #[test]
    fn gap_is_buffered_then_drained() {
        let w = DeedId::new("w");
        let mut chain = ProofChain::new(job(), w.clone(), [1; 32]);
        let mut t = ProgressTracker::new();
        let l1 = chain.advance();
        let l2 = chain.advance();
        let l3 = chain.advance();
        assert_eq!(t.submit(l3.0, l3.1)[0].verdict, ProgressVerdict::Gap);
        assert_eq!(t.submit(l2.0, l2.1)[0].verdict, ProgressVerdict::Gap);
        let ev = t.submit(l1.0, l1.1);
        assert_eq!(ev.len(), 3);
        assert!(ev.iter().all(|e| e.verdict == ProgressVerdict::Ok));
        assert_eq!(t.progress(&job(), &w), 3);
    }

    #[test]
    fn chain_break_detected() {
        let w = DeedId::new("w");
        let mut chain = ProofChain::new(job(), w, [1; 32]);
        let mut t = ProgressTracker::new();
        let (mut p, n) = chain.advance();
        p.prev_commitment = Digest([9; 32]);
        assert_eq!(t.submit(p, n)[0].verdict, ProgressVerdict::ChainBreak);
    }

    #[test]
    fn gather_orders_and_checks() {
        let a = map_assign(&job(), 3, &ranked(3), &[], 0).unwrap();
        let rs: Vec<ShardResult> = (0..3)
            .rev()
            .map(|i| ShardResult::new(DeedId::new(format!("w{i}")), vec![i as u8; i + 1]))
            .collect();
        let g = reduce_gather(&a, &rs).unwrap();
        assert_eq!(g.aggregate, [0, 0, 0, 1, 0, 0, 0, 0, 2, 1, 1, 0, 0, 0, 3, 2, 2, 2]);
        let again = reduce_gather(&a, &rs).unwrap();
        assert_eq!(g.digest, again.digest);

        let mut bad = rs.clone();
        bad[0].payload.push(0);
        assert_eq!(reduce_gather(&a, &bad), Err(GatherError::Corrupt(vec![DeedId::new("w2")])));
        assert_eq!(
            reduce_gather(&a, &rs[..2]),
            Err(GatherError::Missing(vec![DeedId::new("w0")]))
        );
    }
}
