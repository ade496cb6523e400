// Copyright 2026 The PoAI Simnet Authors
// SPDX-License-Identifier: Apache-2.0

//! Named random substreams derived from the scenario seed, so adding draws
//! to one concern never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::crypto::tagged_hash;

pub fn substream(seed: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(tagged_hash("poai.rng", &[&seed.to_be_bytes(), name.as_bytes()]).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_independent_and_reproducible() {
        let a: u64 = substream(7, "jury").gen();
        assert_eq!(a, substream(7, "jury").gen::<u64>());
        assert_ne!(a, substream(7, "broker.drop").gen::<u64>());
        assert_ne!(a, substream(8, "jury").gen::<u64>());
    }
}
