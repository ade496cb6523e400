// Copyright 2026 The PoAI Simnet Authors
// SPDX-License-Identifier: Apache-2.0

//! Discrete-event network simulation of nodes, jobs and the ledger.

pub mod broker;
pub mod config;
pub mod report;
pub mod rng;
mod sim;

pub use broker::BrokerAudit;
pub use config::{ChallengeConfig, ConfigError, ConfigIssue, FaultSpec, JobConfig, NodeConfig, Region, ScenarioConfig};
pub use report::{summary, to_jsonl, Flow, Record};
pub use sim::{SimError, Simulation};
