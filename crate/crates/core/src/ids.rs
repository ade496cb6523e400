// Copyright 2026 The PoAI Simnet Authors
// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::codec::{Canonical, CodecError, Reader, Writer};

/// Identifier of a node deed. Ordering is lexicographic and is used for every
/// deterministic tie-break in the protocol.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeedId(String);

impl DeedId {
    pub fn new(id: impl Into<String>) -> Self {
        DeedId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DeedId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DeedId {
    fn from(s: &str) -> Self {
        DeedId::new(s)
    }
}

/// A job is identified by its sender and the sender's job counter at creation.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JobId {
    pub sender: DeedId,
    pub sequence: u64,
}

impl JobId {
    pub fn new(sender: DeedId, sequence: u64) -> Self {
        JobId { sender, sequence }
    }
}

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.sender, self.sequence)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid job id `{0}` (expected `sender:seq` or `(sender,seq)`)")]
pub struct ParseJobIdError(String);

impl FromStr for JobId {
    type Err = ParseJobIdError;

    /// Accepts `sender:3` and `(sender,3)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseJobIdError(s.to_string());
        let t = s.trim();
        let (sender, seq) = if let Some(inner) = t.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
            inner.rsplit_once(',').ok_or_else(err)?
        } else {
            t.rsplit_once(':').ok_or_else(err)?
        };
        let sender = sender.trim();
        if sender.is_empty() {
            return Err(err());
        }
        let sequence = seq.trim().parse::<u64>().map_err(|_| err())?;
        Ok(JobId::new(DeedId::new(sender), sequence))
    }
}

impl Serialize for JobId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for JobId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChallengeId(pub u64);

impl fmt::Display for ChallengeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "challenge-{}", self.0)
    }
}

impl Canonical for DeedId {
    fn encode_into(&self, w: &mut Writer) {
        w.put_str(&self.0);
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(DeedId(r.get_str()?))
    }
}

impl Canonical for JobId {
    fn encode_into(&self, w: &mut Writer) {
        self.sender.encode_into(w);
        w.put_u64(self.sequence);
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        let sender = DeedId::decode_from(r)?;
        let sequence = r.get_u64()?;
        Ok(JobId { sender, sequence })
    }
}

impl Canonical for ChallengeId {
    fn encode_into(&self, w: &mut Writer) {
        w.put_u64(self.0);
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(ChallengeId(r.get_u64()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn job_id_parses_both_forms() {
        let a: JobId = "alice:3".parse().unwrap();
        let b: JobId = "(alice, 3)".parse().unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_string(), "alice:3");
        assert!("alice".parse::<JobId>().is_err());
        assert!(":3".parse::<JobId>().is_err());
        assert!("alice:x".parse::<JobId>().is_err());
    }
}
