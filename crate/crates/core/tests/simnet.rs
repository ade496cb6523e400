// Copyright 2026 The PoAI Simnet Authors
// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use num_rational::BigRational;
use num_traits::FromPrimitive;
use poai_core::pipeline::{safety_check, SafetyPolicy};
use poai_core::simnet::{Flow, Record, ScenarioConfig, Simulation};
use poai_core::Token;

fn text(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)).unwrap()
}

fn run(cfg: ScenarioConfig) -> Simulation {
    let mut sim = Simulation::new(cfg).unwrap();
    sim.run().unwrap();
    sim
}

/// Shares of the three-node scenario from first principles: alive for the
/// whole, half and a quarter of the epoch, powers 1, 0, -1.
fn three_node_oracle() -> [f64; 3] {
    let w = [1f64.exp(), 0.5, 0.25 * (-1f64).exp()];
    let s: f64 = w.iter().sum();
    [w[0] / s, w[1] / s, w[2] / s]
}

#[test]
fn three_node_rewards_match_oracle() {
    let sim = run(ScenarioConfig::from_toml(&text("three_node.toml")).unwrap());
    let oracle = three_node_oracle();
    let Some(Record::Allocation { snapshot, entries, .. }) =
        sim.records().iter().find(|r| matches!(r, Record::Allocation { epoch: 1, .. }))
    else {
        panic!("no allocation");
    };
    assert_eq!(*snapshot, Token::from_integer(100));
    let total: Token = entries.iter().map(|e| &e.amount).sum();
    assert_eq!(total, Token::from_integer(100));
    for (e, want) in entries.iter().zip(oracle) {
        assert!((e.share - want).abs() < 1e-12, "{}: {} vs {want}", e.deed_id, e.share);
        assert!((e.amount.to_f64() - 100.0 * want).abs() < 1e-9);
    }
    // Everyone but the top share receives exactly snapshot x share.
    for e in &entries[1..] {
        let exact = BigRational::from_f64(e.share).unwrap() * BigRational::from_integer(100.into());
        assert_eq!(e.amount.as_rational(), &exact);
    }
    let distributed: Token = sim
        .records()
        .iter()
        .filter_map(|r| match r {
            Record::Pool {
                flow: Flow::Distributed,
                amount,
                ..
            } => Some(amount.clone()),
            _ => None,
        })
        .sum();
    assert_eq!(distributed, Token::from_integer(100));
}

#[test]
fn events_are_time_ordered_and_broker_balances() {
    let sim = run(ScenarioConfig::from_toml(&text("reference.toml")).unwrap());
    let times: Vec<u64> = sim
        .records()
        .iter()
        .filter_map(|r| match r {
            Record::Job { time, .. } | Record::Pool { time, .. } | Record::Progress { time, .. } | Record::Ledger { time, .. } => {
                Some(*time)
            }
            _ => None,
        })
        .collect();
    assert!(times.windows(2).all(|w| w[0] <= w[1]));
    let audit = sim.broker_audit();
    assert!(audit.balanced(), "{audit:?}");
    assert!(audit.dropped > 0, "drop window never dropped anything");
    assert!(audit.rejected > 0, "forged envelope was not rejected");
}

#[test]
fn injected_faults_surface_in_the_report() {
    let sim = run(ScenarioConfig::from_toml(&text("reference.toml")).unwrap());
    let events: Vec<(&str, &str)> = sim
        .records()
        .iter()
        .filter_map(|r| match r {
            Record::Job { event, detail, .. } => Some((event.as_str(), detail.as_str())),
            _ => None,
        })
        .collect();
    assert!(events.iter().any(|(e, _)| *e == "code_rejected"), "tampered code accepted");
    let reasons: Vec<&str> = sim
        .records()
        .iter()
        .filter_map(|r| match r {
            Record::Penalty { reason, .. } => Some(reason.as_str()),
            _ => None,
        })
        .collect();
    for want in ["replay", "forged", "corrupt result"] {
        assert!(reasons.iter().any(|r| r.contains(want)), "no {want} penalty in {reasons:?}");
    }
    let Some(Record::Final {
        conserved,
        ledger_verified,
        reward_pool,
        ..
    }) = sim.records().last()
    else {
        panic!("no final record");
    };
    assert!(*conserved && *ledger_verified);
    assert!(reward_pool.is_zero());
}

#[test]
fn unsafe_pipeline_is_refused_and_penalised() {
    let mut t = text("three_node.toml");
    t.push_str(
        r#"
[[jobs]]
sender = "b"
arrival = 20
reward = 10
workers = 1
shard_steps = 2
requirements = { cpu = 1, gpu_units = 0, memory = 1 }
pipeline = "evil"

[pipelines.evil]
name = "evil"

[pipelines.evil.data_source]
kind = "counter"

[[pipelines.evil.business]]
kind = "custom"
code = "acc + system(x)"
"#,
    );
    let sim = run(ScenarioConfig::from_toml(&t).unwrap());
    let refused = sim.records().iter().any(|r| matches!(r, Record::Job { job: 2, event, .. } if event == "refused"));
    assert!(refused);
    assert!(sim
        .records()
        .iter()
        .any(|r| matches!(r, Record::Penalty { deed_id, .. } if deed_id.as_str() == "b")));
    // Refused before funding: nothing was escrowed for it.
    assert!(!sim
        .records()
        .iter()
        .any(|r| matches!(r, Record::Pool { flow: Flow::Escrowed, amount, .. } if *amount == Token::from_integer(10))));
}

#[test]
fn policy_file_loads_standalone_and_inline() {
    let policy_text = text("policy.toml");
    let policy = SafetyPolicy::from_toml(&policy_text).unwrap();
    assert!(!safety_check("x + time", &policy).is_safe());
    assert!(!safety_check("import math; x", &policy).is_safe());
    assert!(safety_check("max(acc, x)", &policy).is_safe());

    let body: String = policy_text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
    let inline = body.replace("[[deny]]", "[[safety_policy.deny]]");
    let (head, tail) = inline.split_once("[[safety_policy.deny]]").unwrap();
    let scenario = format!(
        "{}\n[safety_policy]\n{head}\n[[safety_policy.deny]]{tail}\n",
        text("three_node.toml")
    );
    let cfg = ScenarioConfig::from_toml(&scenario).unwrap();
    assert_eq!(cfg.safety_policy, policy);
}

#[test]
fn different_seeds_still_conserve() {
    for seed in [1, 2, 3] {
        let mut cfg = ScenarioConfig::from_toml(&text("reference.toml")).unwrap();
        cfg.seed = seed;
        let sim = run(cfg);
        assert!(sim.conserved() && sim.conservation_failures() == 0, "seed {seed}");
        assert!(sim.ledger().verify().is_ok(), "seed {seed}");
    }
}
