// Copyright 2026 The PoAI Simnet Authors
// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::codec::{Canonical, CodecError, Reader, Writer};

/// Declared hardware of a node.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Capability {
    pub cpu: u32,
    pub gpu_units: u32,
    pub memory: u32,
}

impl Capability {
    pub fn new(cpu: u32, gpu_units: u32, memory: u32) -> Self {
        Capability { cpu, gpu_units, memory }
    }

    pub fn has_gpu(&self) -> bool {
        self.gpu_units > 0
    }

    /// Component-wise `self ≥ requirements`.
    pub fn dominates(&self, req: &Capability) -> bool {
        self.cpu >= req.cpu
            && self.memory >= req.memory
            && (!req.has_gpu() || (self.has_gpu() && self.gpu_units >= req.gpu_units))
    }
}

/// Linear ranking weights: `cpu·w_cpu + gpu_flag·gpu_units·w_gpu + memory·w_mem`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapabilityWeights {
    pub cpu: f64,
    pub gpu: f64,
    pub memory: f64,
}

impl Default for CapabilityWeights {
    fn default() -> Self {
        CapabilityWeights {
            cpu: 1.0,
            gpu: 4.0,
            memory: 0.25,
        }
    }
}

impl CapabilityWeights {
    pub fn score(&self, cap: &Capability) -> f64 {
        let gpu_flag = if cap.has_gpu() { 1.0 } else { 0.0 };
        self.cpu * cap.cpu as f64 + self.gpu * gpu_flag * cap.gpu_units as f64 + self.memory * cap.memory as f64
    }
}

impl Canonical for Capability {
    fn encode_into(&self, w: &mut Writer) {
        w.put_u32(self.cpu);
        w.put_u32(self.gpu_units);
        w.put_u32(self.memory);
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(Capability {
            cpu: r.get_u32()?,
            gpu_units: r.get_u32()?,
            memory: r.get_u32()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dominance() {
        let req = Capability::new(2, 0, 0);
        assert!(Capability::new(4, 0, 0).dominates(&req));
        assert!(!Capability::new(1, 0, 0).dominates(&req));
        let gpu_req = Capability::new(1, 1, 0);
        assert!(!Capability::new(8, 0, 64).dominates(&gpu_req));
        assert!(Capability::new(1, 2, 0).dominates(&gpu_req));
    }

    #[test]
    fn default_score() {
        let w = CapabilityWeights::default();
        assert_eq!(w.score(&Capability::new(4, 2, 16)), 4.0 + 8.0 + 4.0);
        assert_eq!(w.score(&Capability::new(4, 0, 0)), 4.0);
    }
}
