// Copyright 2026 The PoAI Simnet Authors
// SPDX-License-Identifier: Apache-2.0

//! Topic-routed, signed messages between nodes.
//!
//! Topic filters follow MQTT: `+` matches one level, a trailing `#` matches
//! the rest. Envelopes are signed by the publisher over the topic and a
//! digest of the body. Plugin code inside an assignment is excluded from
//! that digest because it carries the author's own signature.

use serde::Serialize;

use crate::capability::Capability;
use crate::codec::Canonical;
use crate::crypto::{tagged_hash, Digest, PublicKey, Signature, SigningKey};
use crate::distribution::{Assignment, CapabilityCommitment, ProgressProof, ShardResult};
use crate::ids::{DeedId, JobId};
use crate::pipeline::PipelineSpec;

pub fn call_topic(job: &JobId) -> String {
    format!("poai/jobs/{job}/call")
}

pub const CALL_FILTER: &str = "poai/jobs/+/call";

pub fn node_topic(node: &DeedId, leaf: &str) -> String {
    format!("poai/node/{node}/{leaf}")
}

pub fn node_filter(node: &DeedId) -> String {
    format!("poai/node/{node}/#")
}

pub fn topic_matches(filter: &str, topic: &str) -> bool {
    let mut f = filter.split('/');
    let mut t = topic.split('/');
    loop {
        match (f.next(), t.next()) {
            (Some("#"), _) => return true,
            (Some("+"), Some(_)) => {}
            (Some(a), Some(b)) if a == b => {}
            (None, None) => return true,
            _ => return false,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Message {
    Call {
        job_id: JobId,
        requirements: Capability,
    },
    Commit(CapabilityCommitment),
    Assign {
        assignment: Assignment,
        shard: usize,
        spec: PipelineSpec,
    },
    Progress {
        proof: ProgressProof,
        nonce: [u8; 32],
    },
    Result {
        job_id: JobId,
        result: ShardResult,
    },
    /// Opaque traffic; used for forged envelopes.
    Noise(String),
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Call { .. } => "call",
            Message::Commit(_) => "commit",
            Message::Assign { .. } => "assign",
            Message::Progress { .. } => "progress",
            Message::Result { .. } => "result",
            Message::Noise(_) => "noise",
        }
    }

    pub fn digest(&self) -> Digest {
        let kind = self.kind().as_bytes();
        match self {
            Message::Call { job_id, requirements } => tagged_hash(
                "poai.msg",
                &[kind, &job_id.to_canonical_bytes(), &requirements.to_canonical_bytes()],
            ),
            Message::Commit(c) => tagged_hash(
                "poai.msg",
                &[
                    kind,
                    &c.job_id.to_canonical_bytes(),
                    &c.deed_id.to_canonical_bytes(),
                    &c.capability.to_canonical_bytes(),
                    &c.signature.0,
                ],
            ),
            Message::Assign { assignment, shard, spec } => tagged_hash(
                "poai.msg",
                &[
                    kind,
                    &assignment.to_canonical_bytes(),
                    &(*shard as u64).to_be_bytes(),
                    spec.digest.as_bytes(),
                ],
            ),
            Message::Progress { proof, nonce } => {
                tagged_hash("poai.msg", &[kind, &proof.to_canonical_bytes(), nonce])
            }
            Message::Result { job_id, result } => tagged_hash(
                "poai.msg",
                &[
                    kind,
                    &job_id.to_canonical_bytes(),
                    &result.worker.to_canonical_bytes(),
                    result.digest.as_bytes(),
                    &result.payload,
                ],
            ),
            Message::Noise(s) => tagged_hash("poai.msg", &[kind, s.as_bytes()]),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Envelope {
    pub topic: String,
    pub sender: DeedId,
    pub message: Message,
    pub signature: Signature,
}

fn envelope_digest(topic: &str, sender: &DeedId, message: &Message) -> Digest {
    tagged_hash(
        "poai.envelope",
        &[topic.as_bytes(), &sender.to_canonical_bytes(), message.digest().as_bytes()],
    )
}

impl Envelope {
    pub fn signed(topic: String, sender: DeedId, message: Message, key: &SigningKey) -> Self {
        let signature = key.sign(envelope_digest(&topic, &sender, &message).as_bytes());
        Envelope {
            topic,
            sender,
            message,
            signature,
        }
    }

    pub fn verify(&self, key: &PublicKey) -> bool {
        key.verify(
            envelope_digest(&self.topic, &self.sender, &self.message).as_bytes(),
            &self.signature,
        )
    }
}

/// Per-subscriber delivery accounting. Every (envelope, subscriber) pair is
/// counted once as published and ends in exactly one other bucket.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BrokerAudit {
    pub published: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub rejected: u64,
    pub in_flight: u64,
}

impl BrokerAudit {
    pub fn balanced(&self) -> bool {
        self.published == self.delivered + self.dropped + self.rejected + self.in_flight
    }
}

/// One-way latency between regions: intra-region within one, otherwise
/// both intra legs plus the slower inter-region hop.
pub fn latency(src: (u64, u64), dst: (u64, u64), same_region: bool) -> u64 {
    if same_region {
        src.0
    } else {
        src.0 + src.1.max(dst.1) + dst.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mqtt_wildcards() {
        assert!(topic_matches(CALL_FILTER, "poai/jobs/a#1/call"));
        assert!(!topic_matches(CALL_FILTER, "poai/jobs/a#1/x/call"));
        assert!(topic_matches("poai/node/a/#", "poai/node/a/progress"));
        assert!(!topic_matches("poai/node/a/#", "poai/node/b/progress"));
        assert!(!topic_matches("poai/node/a", "poai/node/a/progress"));
    }

    #[test]
    fn envelope_signature_binds_topic_and_body() {
        let k = SigningKey::derive("t", b"a");
        let env = Envelope::signed("x/y".into(), DeedId::new("a"), Message::Noise("hi".into()), &k);
        assert!(env.verify(&k.public_key()));
        let mut moved = env.clone();
        moved.topic = "x/z".into();
        assert!(!moved.verify(&k.public_key()));
        let mut altered = env;
        altered.message = Message::Noise("ho".into());
        assert!(!altered.verify(&k.public_key()));
    }

    #[test]
    fn latency_paths() {
        assert_eq!(latency((2, 10), (3, 20), true), 2);
        assert_eq!(latency((2, 10), (3, 20), false), 25);
    }
}
