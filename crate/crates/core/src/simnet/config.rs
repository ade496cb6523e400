// Copyright 2026 The PoAI Simnet Authors
// SPDX-License-Identifier: Apache-2.0

//! Scenario files.
//!
//! A scenario is TOML. Times are logical seconds from genesis; jobs and
//! faults refer to jobs by their 1-based position in `[[jobs]]`, and to
//! workers by 0-based shard index. Every error carries the line of the
//! offending item.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use toml_edit::ImDocument;

use crate::capability::{Capability, CapabilityWeights};
use crate::crypto::{tagged_hash, Digest};
use crate::escrow::{JURY_SIZE, REVIEW_LOCK_SECONDS};
use crate::ids::DeedId;
use crate::pipeline::{parse_pipeline, PipelineSpec, SafetyPolicy};
use crate::token::Token;
use crate::tokenomics::PowerSource;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    epoch_seconds: u64,
    horizon_epochs: u64,
    seed: u64,
    #[serde(default)]
    genesis_time: u64,
    heartbeat_seconds: Option<u64>,
    step_seconds: Option<u64>,
    assign_window_seconds: Option<u64>,
    retry_seconds: Option<u64>,
    vote_delay_seconds: Option<u64>,
    #[serde(default = "default_deadline")]
    job_deadline_epochs: u64,
    #[serde(default = "default_bond_fraction")]
    challenge_bond_fraction: f64,
    #[serde(default = "default_review_lock")]
    review_lock_seconds: u64,
    #[serde(default = "default_jury")]
    jury_size: usize,
    #[serde(default = "default_penalty")]
    penalty_delta: f64,
    #[serde(default)]
    power_source: PowerSource,
    #[serde(default)]
    capability_weights: CapabilityWeights,
    safety_policy: Option<SafetyPolicy>,
    regions: Vec<RawRegion>,
    nodes: Vec<RawNode>,
    #[serde(default)]
    jobs: Vec<RawJob>,
    #[serde(default)]
    challenges: Vec<RawChallenge>,
    #[serde(default)]
    faults: Vec<FaultSpec>,
    #[serde(default)]
    pipelines: BTreeMap<String, toml::Table>,
}

fn default_deadline() -> u64 {
    10
}
fn default_bond_fraction() -> f64 {
    0.1
}
fn default_review_lock() -> u64 {
    REVIEW_LOCK_SECONDS
}
fn default_jury() -> usize {
    JURY_SIZE
}
fn default_penalty() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegion {
    name: String,
    validator: String,
    intra_latency: u64,
    inter_latency: u64,
    #[serde(default)]
    drop_probability: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    deed_id: String,
    region: String,
    #[serde(default)]
    balance: Token,
    #[serde(default)]
    capability: Capability,
    #[serde(default)]
    power: Vec<f64>,
    uptime: Option<Vec<[u64; 2]>>,
    #[serde(default = "yes")]
    worker: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJob {
    sender: String,
    arrival: u64,
    reward: Token,
    workers: u32,
    #[serde(default = "default_steps")]
    shard_steps: u64,
    deadline_epochs: Option<u64>,
    #[serde(default)]
    requirements: Capability,
    pipeline: String,
}

fn default_steps() -> u64 {
    5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChallenge {
    job: usize,
    challenger: String,
    at: u64,
    bond: Option<Token>,
    claim_valid: bool,
}

/// Injected misbehaviour and outages.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FaultSpec {
    /// Node offline over `[start, end)`.
    Down { node: String, start: u64, end: u64 },
    /// Region drop probability override over `[start, end)`.
    Drop {
        region: String,
        probability: f64,
        start: u64,
        end: u64,
    },
    /// The worker re-sends link `link` right after sending it.
    ReplayProof { job: usize, worker: usize, link: u64 },
    /// The worker sends a corrupted link `link` before the genuine one.
    ForgeProof { job: usize, worker: usize, link: u64 },
    /// The plugin source is altered on its way to the worker.
    TamperCode { job: usize, worker: usize },
    /// The worker's result payload is altered after its digest is taken.
    CorruptResult { job: usize, worker: usize },
    /// An envelope claiming to come from `node` with a bad signature.
    ForgeEnvelope { node: String, at: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Region {
    pub name: String,
    pub validator: DeedId,
    pub intra_latency: u64,
    pub inter_latency: u64,
    pub drop_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeConfig {
    pub deed_id: DeedId,
    pub region: usize,
    pub balance: Token,
    pub capability: Capability,
    /// Measured power per epoch, epoch 1 first. Past the end the last value repeats.
    pub power: Vec<f64>,
    /// Up windows `[start, end)`; `None` means always up.
    pub uptime: Option<Vec<(u64, u64)>>,
    pub worker: bool,
}

impl NodeConfig {
    pub fn measured_power(&self, epoch: u64) -> f64 {
        if self.power.is_empty() {
            return 0.0;
        }
        let i = (epoch.max(1) - 1) as usize;
        self.power[i.min(self.power.len() - 1)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobConfig {
    pub sender: DeedId,
    pub arrival: u64,
    pub reward: Token,
    pub workers: u32,
    pub shard_steps: u64,
    pub deadline_epochs: u64,
    pub requirements: Capability,
    pub pipeline: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChallengeConfig {
    /// 0-based index into `jobs`.
    pub job: usize,
    pub challenger: DeedId,
    pub at: u64,
    pub bond: Option<Token>,
    /// Ground truth the jurors vote on.
    pub claim_valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub epoch_seconds: u64,
    pub horizon_epochs: u64,
    pub seed: u64,
    pub genesis_time: u64,
    pub heartbeat_seconds: u64,
    pub step_seconds: u64,
    pub assign_window_seconds: u64,
    pub retry_seconds: u64,
    pub vote_delay_seconds: u64,
    pub challenge_bond_fraction: f64,
    pub review_lock_seconds: u64,
    pub jury_size: usize,
    pub penalty_delta: f64,
    pub power_source: PowerSource,
    pub capability_weights: CapabilityWeights,
    pub safety_policy: SafetyPolicy,
    pub regions: Vec<Region>,
    pub nodes: Vec<NodeConfig>,
    pub jobs: Vec<JobConfig>,
    pub challenges: Vec<ChallengeConfig>,
    pub faults: Vec<FaultSpec>,
    pub pipelines: BTreeMap<String, PipelineSpec>,
    /// Digest of the scenario text.
    pub digest: Digest,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

enum Seg<'a> {
    Key(&'a str),
    Idx(usize),
}

struct Anchors<'t> {
    text: &'t str,
    doc: Option<ImDocument<String>>,
}

impl Anchors<'_> {
    fn line_of(&self, offset: usize) -> usize {
        self.text[..offset.min(self.text.len())].matches('\n').count() + 1
    }

    fn locate(&self, path: &[Seg<'_>]) -> Option<usize> {
        let doc = self.doc.as_ref()?;
        let mut item = doc.as_item();
        let mut best = None;
        for seg in path {
            let next = match seg {
                Seg::Key(k) => {
                    if let Some(key) = item.as_table_like().and_then(|t| t.get_key_value(k)).map(|(k, _)| k) {
                        best = key.span().or(best);
                    }
                    item.get(*k)
                }
                Seg::Idx(i) => item.get(*i),
            };
            let Some(next) = next else { break };
            item = next;
            best = item.span().or(best);
        }
        best.map(|s| self.line_of(s.start))
    }
}

struct Issues<'t> {
    anchors: Anchors<'t>,
    list: Vec<ConfigIssue>,
}

impl Issues<'_> {
    fn at(&mut self, path: &[Seg<'_>], message: impl Into<String>) {
        let line = self.anchors.locate(path);
        self.list.push(ConfigIssue {
            line,
            message: message.into(),
        });
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let anchors = Anchors {
            text,
            doc: ImDocument::parse(text.to_string()).ok(),
        };
        let raw: RawScenario = match toml::from_str(text) {
            Ok(r) => r,
            Err(e) => {
                return Err(ConfigError(vec![ConfigIssue {
                    line: e.span().map(|s| anchors.line_of(s.start)),
                    message: e.message().trim().to_string(),
                }]))
            }
        };
        let mut issues = Issues {
            anchors,
            list: Vec::new(),
        };
        let cfg = resolve(raw, text, &mut issues);
        if issues.list.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError(issues.list))
        }
    }

    pub fn horizon(&self) -> u64 {
        self.genesis_time + self.epoch_seconds * self.horizon_epochs
    }

    pub fn node_index(&self, id: &DeedId) -> Option<usize> {
        self.nodes.iter().position(|n| &n.deed_id == id)
    }

    pub fn total_supply(&self) -> Token {
        self.nodes.iter().map(|n| &n.balance).sum()
    }
}

fn resolve(raw: RawScenario, text: &str, is: &mut Issues<'_>) -> ScenarioConfig {
    use Seg::{Idx, Key};
    if raw.epoch_seconds == 0 {
        is.at(&[Key("epoch_seconds")], "epoch_seconds must be positive");
    }
    if raw.horizon_epochs == 0 {
        is.at(&[Key("horizon_epochs")], "horizon_epochs must be positive");
    }
    let es = raw.epoch_seconds.max(1);
    let heartbeat = raw.heartbeat_seconds.unwrap_or(es / 100);
    if heartbeat == 0 || !es.is_multiple_of(heartbeat) {
        is.at(
            &[Key("heartbeat_seconds")],
            format!("heartbeat period {heartbeat} must be positive and divide epoch_seconds {es}"),
        );
    }
    let hb = heartbeat.max(1);
    for (key, v) in [
        ("step_seconds", raw.step_seconds),
        ("assign_window_seconds", raw.assign_window_seconds),
        ("retry_seconds", raw.retry_seconds),
        ("vote_delay_seconds", raw.vote_delay_seconds),
    ] {
        if v == Some(0) {
            is.at(&[Key(key)], format!("{key} must be positive"));
        }
    }
    if !(raw.challenge_bond_fraction > 0.0 && raw.challenge_bond_fraction <= 1.0) {
        is.at(&[Key("challenge_bond_fraction")], "challenge_bond_fraction must be in (0, 1]");
    }
    if raw.jury_size == 0 {
        is.at(&[Key("jury_size")], "jury_size must be positive");
    }
    if !(raw.penalty_delta.is_finite() && raw.penalty_delta >= 0.0) {
        is.at(&[Key("penalty_delta")], "penalty_delta must be a non-negative number");
    }
    if raw.job_deadline_epochs == 0 {
        is.at(&[Key("job_deadline_epochs")], "job_deadline_epochs must be positive");
    }

    let mut region_names = BTreeMap::new();
    if raw.regions.is_empty() {
        is.at(&[Key("regions")], "at least one region is required");
    }
    for (i, r) in raw.regions.iter().enumerate() {
        if region_names.insert(r.name.clone(), i).is_some() {
            is.at(&[Key("regions"), Idx(i), Key("name")], format!("duplicate region `{}`", r.name));
        }
        if !(0.0..=1.0).contains(&r.drop_probability) {
            is.at(
                &[Key("regions"), Idx(i), Key("drop_probability")],
                "drop_probability must be in [0, 1]",
            );
        }
    }

    let mut nodes = Vec::new();
    let mut ids = BTreeSet::new();
    if raw.nodes.is_empty() {
        is.at(&[Key("nodes")], "at least one node is required");
    }
    for (i, n) in raw.nodes.iter().enumerate() {
        let path = |k| [Key("nodes"), Idx(i), Key(k)];
        if n.deed_id.trim().is_empty() {
            is.at(&path("deed_id"), "deed_id must be non-empty");
        }
        if !ids.insert(n.deed_id.clone()) {
            is.at(&path("deed_id"), format!("duplicate node `{}`", n.deed_id));
        }
        let region = match region_names.get(&n.region) {
            Some(r) => *r,
            None => {
                is.at(&path("region"), format!("unknown region `{}`", n.region));
                0
            }
        };
        if n.power.iter().any(|p| !p.is_finite()) {
            is.at(&path("power"), "power scores must be finite");
        }
        let uptime = n.uptime.as_ref().map(|ws| ws.iter().map(|w| (w[0], w[1])).collect::<Vec<_>>());
        if let Some(ws) = &uptime {
            let ordered = ws.iter().all(|(s, e)| s < e) && ws.windows(2).all(|p| p[0].1 <= p[1].0);
            if !ordered {
                is.at(&path("uptime"), "uptime windows must be non-empty, sorted and disjoint");
            }
        }
        nodes.push(NodeConfig {
            deed_id: DeedId::new(n.deed_id.clone()),
            region,
            balance: n.balance.clone(),
            capability: n.capability,
            power: n.power.clone(),
            uptime,
            worker: n.worker,
        });
    }

    let mut regions = Vec::new();
    for (i, r) in raw.regions.iter().enumerate() {
        match nodes.iter().find(|n| n.deed_id.as_str() == r.validator) {
            Some(n) if n.region == i => {}
            Some(_) => is.at(
                &[Key("regions"), Idx(i), Key("validator")],
                format!("validator `{}` is not a member of region `{}`", r.validator, r.name),
            ),
            None => is.at(
                &[Key("regions"), Idx(i), Key("validator")],
                format!("validator `{}` is not a node", r.validator),
            ),
        }
        regions.push(Region {
            name: r.name.clone(),
            validator: DeedId::new(r.validator.clone()),
            intra_latency: r.intra_latency,
            inter_latency: r.inter_latency,
            drop_probability: r.drop_probability,
        });
    }

    let safety_policy = raw.safety_policy.clone().unwrap_or_else(SafetyPolicy::builtin);
    if let Err(e) = safety_policy.validate() {
        is.at(&[Key("safety_policy")], e.to_string());
    }
    let mut pipelines = BTreeMap::new();
    for (name, table) in &raw.pipelines {
        let text = toml::to_string(table).expect("tables serialize");
        match parse_pipeline(&text) {
            Ok(spec) => {
                pipelines.insert(name.clone(), spec);
            }
            Err(e) => is.at(&[Key("pipelines"), Key(name)], format!("pipeline `{name}`: {e}")),
        }
    }

    let horizon = raw.genesis_time + es * raw.horizon_epochs;
    let mut jobs = Vec::new();
    for (i, j) in raw.jobs.iter().enumerate() {
        let path = |k| [Key("jobs"), Idx(i), Key(k)];
        if !ids.contains(&j.sender) {
            is.at(&path("sender"), format!("unknown sender `{}`", j.sender));
        }
        if j.reward.is_zero() {
            is.at(&path("reward"), "reward must be positive");
        }
        if j.workers == 0 {
            is.at(&path("workers"), "workers must be positive");
        }
        if j.shard_steps == 0 {
            is.at(&path("shard_steps"), "shard_steps must be positive");
        }
        if j.deadline_epochs == Some(0) {
            is.at(&path("deadline_epochs"), "deadline_epochs must be positive");
        }
        if j.arrival < raw.genesis_time || j.arrival >= horizon {
            is.at(&path("arrival"), "arrival must fall inside the horizon");
        }
        match pipelines.get(&j.pipeline) {
            None if !raw.pipelines.contains_key(&j.pipeline) => {
                is.at(&path("pipeline"), format!("unknown pipeline `{}`", j.pipeline))
            }
            None => {}
            Some(spec) => {
                if let Err(e) = spec.check_workers(j.workers as usize) {
                    is.at(&path("pipeline"), format!("pipeline `{}`: {e}", j.pipeline));
                }
            }
        }
        jobs.push(JobConfig {
            sender: DeedId::new(j.sender.clone()),
            arrival: j.arrival,
            reward: j.reward.clone(),
            workers: j.workers,
            shard_steps: j.shard_steps,
            deadline_epochs: j.deadline_epochs.unwrap_or(raw.job_deadline_epochs),
            requirements: j.requirements,
            pipeline: j.pipeline.clone(),
        });
    }

    let job_ref = |is: &mut Issues<'_>, path: &[Seg<'_>], job: usize| -> usize {
        if job == 0 || job > raw.jobs.len() {
            is.at(path, format!("job {job} does not exist (jobs are numbered from 1)"));
            0
        } else {
            job - 1
        }
    };

    let mut challenges = Vec::new();
    for (i, c) in raw.challenges.iter().enumerate() {
        let job = job_ref(is, &[Key("challenges"), Idx(i), Key("job")], c.job);
        if !ids.contains(&c.challenger) {
            is.at(
                &[Key("challenges"), Idx(i), Key("challenger")],
                format!("unknown challenger `{}`", c.challenger),
            );
        }
        if c.at >= horizon {
            is.at(&[Key("challenges"), Idx(i), Key("at")], "challenge time must fall inside the horizon");
        }
        if c.bond.as_ref().is_some_and(Token::is_zero) {
            is.at(&[Key("challenges"), Idx(i), Key("bond")], "bond must be positive");
        }
        challenges.push(ChallengeConfig {
            job,
            challenger: DeedId::new(c.challenger.clone()),
            at: c.at,
            bond: c.bond.clone(),
            claim_valid: c.claim_valid,
        });
    }

    for (i, f) in raw.faults.iter().enumerate() {
        let here = |k| [Key("faults"), Idx(i), Key(k)];
        match f {
            FaultSpec::Down { node, start, end } => {
                if !ids.contains(node) {
                    is.at(&here("node"), format!("unknown node `{node}`"));
                }
                if start >= end {
                    is.at(&here("start"), "fault window must be non-empty");
                }
            }
            FaultSpec::Drop {
                region,
                probability,
                start,
                end,
            } => {
                if !region_names.contains_key(region) {
                    is.at(&here("region"), format!("unknown region `{region}`"));
                }
                if !(0.0..=1.0).contains(probability) {
                    is.at(&here("probability"), "probability must be in [0, 1]");
                }
                if start >= end {
                    is.at(&here("start"), "fault window must be non-empty");
                }
            }
            FaultSpec::ReplayProof { job, worker, link } | FaultSpec::ForgeProof { job, worker, link } => {
                let j = job_ref(is, &here("job"), *job);
                if let Some(cfg) = jobs.get(j) {
                    if *worker >= cfg.workers as usize {
                        is.at(&here("worker"), format!("job {job} has no worker {worker}"));
                    }
                    if *link == 0 || *link > cfg.shard_steps {
                        is.at(&here("link"), format!("job {job} has links 1..={}", cfg.shard_steps));
                    }
                }
            }
            FaultSpec::TamperCode { job, worker } | FaultSpec::CorruptResult { job, worker } => {
                let j = job_ref(is, &here("job"), *job);
                if let Some(cfg) = jobs.get(j) {
                    if *worker >= cfg.workers as usize {
                        is.at(&here("worker"), format!("job {job} has no worker {worker}"));
                    }
                    let custom = pipelines.get(&cfg.pipeline).is_some_and(|p| p.custom_code().next().is_some());
                    if matches!(f, FaultSpec::TamperCode { .. }) && !custom {
                        is.at(&here("job"), format!("job {job} carries no plugin code to tamper with"));
                    }
                }
            }
            FaultSpec::ForgeEnvelope { node, at } => {
                if !ids.contains(node) {
                    is.at(&here("node"), format!("unknown node `{node}`"));
                }
                if *at >= horizon {
                    is.at(&here("at"), "fault time must fall inside the horizon");
                }
            }
        }
    }

    ScenarioConfig {
        epoch_seconds: es,
        horizon_epochs: raw.horizon_epochs,
        seed: raw.seed,
        genesis_time: raw.genesis_time,
        heartbeat_seconds: hb,
        step_seconds: raw.step_seconds.unwrap_or(hb),
        assign_window_seconds: raw.assign_window_seconds.unwrap_or(hb),
        retry_seconds: raw.retry_seconds.unwrap_or((es / 10).max(1)),
        vote_delay_seconds: raw.vote_delay_seconds.unwrap_or(hb * 10),
        challenge_bond_fraction: raw.challenge_bond_fraction,
        review_lock_seconds: raw.review_lock_seconds,
        jury_size: raw.jury_size,
        penalty_delta: raw.penalty_delta,
        power_source: raw.power_source,
        capability_weights: raw.capability_weights,
        safety_policy,
        regions,
        nodes,
        jobs,
        challenges,
        faults: raw.faults,
        pipelines,
        digest: tagged_hash("poai.scenario", &[text.as_bytes()]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"epoch_seconds = 3600
horizon_epochs = 2
seed = 1

[[regions]]
name = "eu"
validator = "a"
intra_latency = 2
inter_latency = 5

[[nodes]]
deed_id = "a"
region = "eu"
balance = 100
"#;

    #[test]
    fn minimal_scenario_defaults() {
        let c = ScenarioConfig::from_toml(BASE).unwrap();
        assert_eq!(c.heartbeat_seconds, 36);
        assert_eq!(c.review_lock_seconds, 86_400);
        assert_eq!(c.jury_size, 3);
        assert_eq!(c.challenge_bond_fraction, 0.1);
        assert_eq!(c.total_supply(), Token::from_integer(100));
        assert_eq!(c.horizon(), 7200);
    }

    #[test]
    fn semantic_errors_are_line_anchored() {
        let text = BASE.replace("region = \"eu\"\nbalance", "region = \"us\"\nbalance");
        let err = ScenarioConfig::from_toml(&text).unwrap_err();
        let issue = err.0.iter().find(|i| i.message.contains("unknown region")).unwrap();
        assert_eq!(issue.line, Some(13));
    }

    #[test]
    fn syntax_errors_are_line_anchored() {
        let err = ScenarioConfig::from_toml(&BASE.replace("seed = 1", "seed = ")).unwrap_err();
        assert_eq!(err.0[0].line, Some(3));
        let err = ScenarioConfig::from_toml(&format!("{BASE}bogus = 1\n")).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn heartbeat_must_divide_epoch() {
        let err = ScenarioConfig::from_toml(&BASE.replace("seed = 1", "seed = 1\nheartbeat_seconds = 7")).unwrap_err();
        assert_eq!(err.0[0].line, Some(4));
    }

    #[test]
    fn power_series_repeats_last() {
        let c = ScenarioConfig::from_toml(&BASE.replace("balance = 100", "balance = 100\npower = [1.0, 2.0]")).unwrap();
        let n = &c.nodes[0];
        assert_eq!((n.measured_power(1), n.measured_power(2), n.measured_power(9)), (1.0, 2.0, 2.0));
    }
}
