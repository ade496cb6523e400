// Copyright 2026 The PoAI Simnet Authors
// SPDX-License-Identifier: Apache-2.0

//! Pipeline configs.
//!
//! ```toml
//! name = "dedist"
//! workers = 3
//! per_worker = [{ param_worker0 = 0 }, { param_worker1 = 1 }, { param_worker2 = 2 }]
//!
//! [data_source]
//! kind = "counter"
//! offset = 0
//!
//! [[serving]]
//! kind = "identity"
//!
//! [[business]]
//! kind = "custom"
//! code = "acc + x * (1 + param_worker1)"
//! ```
//!
//! Every key of a plugin table other than `kind` and `code` is a numeric
//! parameter.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use toml::Value;

use super::runtime::PluginCode;
use crate::crypto::{tagged_hash, Digest};
use crate::distribution::ShardParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Subsystem {
    DataSource,
    Serving,
    Business,
}

impl fmt::Display for Subsystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subsystem::DataSource => "data source",
            Subsystem::Serving => "serving",
            Subsystem::Business => "business",
        })
    }
}

/// Registered plugin kinds per subsystem, with the parameters each accepts.
pub const REGISTRY: &[(Subsystem, &str, &[&str])] = &[
    (Subsystem::DataSource, "counter", &["offset"]),
    (Subsystem::DataSource, "constant", &["value"]),
    (Subsystem::DataSource, "seeded", &["low", "high"]),
    (Subsystem::Serving, "identity", &[]),
    (Subsystem::Serving, "running_sum", &[]),
    (Subsystem::Serving, "moving_average", &["window"]),
    (Subsystem::Serving, "threshold", &["level"]),
    (Subsystem::Serving, "custom", &[]),
    (Subsystem::Business, "sum", &[]),
    (Subsystem::Business, "max", &[]),
    (Subsystem::Business, "custom", &[]),
];

pub fn registered_kinds(sub: Subsystem) -> impl Iterator<Item = &'static str> {
    REGISTRY.iter().filter(move |(s, _, _)| *s == sub).map(|(_, k, _)| *k)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Counter { offset: f64 },
    Constant { value: f64 },
    Seeded { low: f64, high: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Serving {
    Identity,
    RunningSum,
    MovingAverage { window: usize },
    Threshold { level: f64 },
    Custom { code: PluginCode, params: BTreeMap<String, f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Business {
    Sum,
    Max,
    Custom { code: PluginCode, params: BTreeMap<String, f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineSpec {
    pub name: String,
    pub workers: Option<usize>,
    pub data_source: DataSource,
    pub serving: Vec<Serving>,
    pub business: Vec<Business>,
    pub per_worker: Vec<BTreeMap<String, f64>>,
    /// Digest of the config text the spec was parsed from.
    pub digest: Digest,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PipelineError {
    #[error("malformed pipeline config: {0}")]
    Malformed(String),
    #[error("unknown {subsystem} plugin kind `{kind}` (known: {known})")]
    UnknownKind {
        subsystem: Subsystem,
        kind: String,
        known: String,
    },
    #[error("{plugin}: {message}")]
    BadParam { plugin: String, message: String },
    #[error("{given} per-worker configs for {workers} workers")]
    WorkerMismatch { given: usize, workers: usize },
    #[error("shard parameter `{key}` = `{value}` is not a number")]
    ShardParam { key: String, value: String },
}

fn malformed<T>(msg: impl Into<String>) -> Result<T, PipelineError> {
    Err(PipelineError::Malformed(msg.into()))
}

fn number(v: &Value) -> Option<f64> {
    match v {
        Value::Integer(i) => Some(*i as f64),
        Value::Float(f) if f.is_finite() => Some(*f),
        _ => None,
    }
}

fn numeric_map(table: &toml::Table, skip: &[&str], what: &str) -> Result<BTreeMap<String, f64>, PipelineError> {
    let mut out = BTreeMap::new();
    for (k, v) in table {
        if skip.contains(&k.as_str()) {
            continue;
        }
        let Some(n) = number(v) else {
            return Err(PipelineError::BadParam {
                plugin: what.into(),
                message: format!("parameter `{k}` must be a number"),
            });
        };
        out.insert(k.clone(), n);
    }
    Ok(out)
}

struct Instance {
    label: String,
    kind: String,
    code: Option<String>,
    params: BTreeMap<String, f64>,
}

fn instance(sub: Subsystem, index: Option<usize>, v: &Value) -> Result<Instance, PipelineError> {
    let label = match index {
        Some(i) => format!("{sub} plugin {i}"),
        None => format!("{sub} plugin"),
    };
    let Some(t) = v.as_table() else {
        return malformed(format!("{label} must be a table"));
    };
    let Some(kind) = t.get("kind").and_then(Value::as_str) else {
        return malformed(format!("{label} needs a string `kind`"));
    };
    let Some((_, _, allowed)) = REGISTRY.iter().find(|(s, k, _)| *s == sub && *k == kind) else {
        return Err(PipelineError::UnknownKind {
            subsystem: sub,
            kind: kind.into(),
            known: registered_kinds(sub).collect::<Vec<_>>().join(", "),
        });
    };
    let code = match t.get("code") {
        None => None,
        Some(Value::String(s)) if kind == "custom" => Some(s.clone()),
        Some(_) if kind == "custom" => return malformed(format!("{label}: `code` must be a string")),
        Some(_) => {
            return Err(PipelineError::BadParam {
                plugin: label,
                message: format!("`{kind}` takes no code"),
            })
        }
    };
    if kind == "custom" && code.is_none() {
        return Err(PipelineError::BadParam {
            plugin: label,
            message: "custom plugin needs `code`".into(),
        });
    }
    let params = numeric_map(t, &["kind", "code"], &label)?;
    if kind != "custom" {
        if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(PipelineError::BadParam {
                plugin: label,
                message: format!("`{kind}` has no parameter `{k}`"),
            });
        }
    }
    Ok(Instance {
        label,
        kind: kind.into(),
        code,
        params,
    })
}

fn param(inst: &Instance, key: &str, default: f64) -> f64 {
    inst.params.get(key).copied().unwrap_or(default)
}

pub fn parse_pipeline(text: &str) -> Result<PipelineSpec, PipelineError> {
    let root: toml::Table = toml::from_str(text).map_err(|e| PipelineError::Malformed(e.message().to_string()))?;
    for k in root.keys() {
        if !["name", "workers", "data_source", "serving", "business", "per_worker"].contains(&k.as_str()) {
            return malformed(format!("unknown key `{k}`"));
        }
    }
    let name = match root.get("name") {
        Some(Value::String(s)) if !s.is_empty() => s.clone(),
        _ => return malformed("`name` must be a non-empty string"),
    };
    let workers = match root.get("workers") {
        None => None,
        Some(Value::Integer(n)) if *n >= 1 => Some(*n as usize),
        Some(_) => return malformed("`workers` must be a positive integer"),
    };
    let Some(ds) = root.get("data_source") else {
        return malformed("missing `data_source`");
    };
    let ds = instance(Subsystem::DataSource, None, ds)?;
    let data_source = match ds.kind.as_str() {
        "counter" => DataSource::Counter {
            offset: param(&ds, "offset", 0.0),
        },
        "constant" => DataSource::Constant {
            value: param(&ds, "value", 0.0),
        },
        "seeded" => {
            let (low, high) = (param(&ds, "low", 0.0), param(&ds, "high", 1.0));
            if low >= high {
                return Err(PipelineError::BadParam {
                    plugin: ds.label,
                    message: "`low` must be below `high`".into(),
                });
            }
            DataSource::Seeded { low, high }
        }
        _ => unreachable!("registry checked"),
    };

    let list = |key: &str| -> Result<Vec<Value>, PipelineError> {
        match root.get(key) {
            None => Ok(Vec::new()),
            Some(Value::Array(a)) => Ok(a.clone()),
            Some(_) => malformed(format!("`{key}` must be an array of tables")),
        }
    };
    let mut serving = Vec::new();
    for (i, v) in list("serving")?.iter().enumerate() {
        let inst = instance(Subsystem::Serving, Some(i), v)?;
        serving.push(match inst.kind.as_str() {
            "identity" => Serving::Identity,
            "running_sum" => Serving::RunningSum,
            "moving_average" => {
                let w = param(&inst, "window", 3.0);
                if w < 1.0 || w.fract() != 0.0 {
                    return Err(PipelineError::BadParam {
                        plugin: inst.label,
                        message: "`window` must be a positive integer".into(),
                    });
                }
                Serving::MovingAverage { window: w as usize }
            }
            "threshold" => Serving::Threshold {
                level: param(&inst, "level", 0.0),
            },
            "custom" => Serving::Custom {
                code: PluginCode::new(inst.code.expect("checked")),
                params: inst.params,
            },
            _ => unreachable!("registry checked"),
        });
    }
    let mut business = Vec::new();
    for (i, v) in list("business")?.iter().enumerate() {
        let inst = instance(Subsystem::Business, Some(i), v)?;
        business.push(match inst.kind.as_str() {
            "sum" => Business::Sum,
            "max" => Business::Max,
            "custom" => Business::Custom {
                code: PluginCode::new(inst.code.expect("checked")),
                params: inst.params,
            },
            _ => unreachable!("registry checked"),
        });
    }
    if business.is_empty() {
        return malformed("at least one `business` plugin is required");
    }
    let mut per_worker = Vec::new();
    for (i, v) in list("per_worker")?.iter().enumerate() {
        let Some(t) = v.as_table() else {
            return malformed(format!("per_worker[{i}] must be a table"));
        };
        per_worker.push(numeric_map(t, &[], &format!("per_worker[{i}]"))?);
    }
    let spec = PipelineSpec {
        name,
        workers,
        data_source,
        serving,
        business,
        per_worker,
        digest: tagged_hash("poai.pipeline", &[text.as_bytes()]),
    };
    if let Some(n) = workers {
        spec.check_workers(n)?;
    }
    Ok(spec)
}

impl PipelineSpec {
    /// A non-empty per-worker list must have exactly one entry per worker.
    pub fn check_workers(&self, n: usize) -> Result<(), PipelineError> {
        if !self.per_worker.is_empty() && self.per_worker.len() != n {
            return Err(PipelineError::WorkerMismatch {
                given: self.per_worker.len(),
                workers: n,
            });
        }
        Ok(())
    }

    pub fn shard_configs(&self) -> Vec<ShardParams> {
        self.per_worker
            .iter()
            .map(|m| m.iter().map(|(k, v)| (k.clone(), format_number(*v))).collect())
            .collect()
    }

    pub fn custom_code(&self) -> impl Iterator<Item = (String, &PluginCode)> {
        let s = self.serving.iter().enumerate().filter_map(|(i, p)| match p {
            Serving::Custom { code, .. } => Some((format!("serving plugin {i}"), code)),
            _ => None,
        });
        let b = self.business.iter().enumerate().filter_map(|(i, p)| match p {
            Business::Custom { code, .. } => Some((format!("business plugin {i}"), code)),
            _ => None,
        });
        s.chain(b)
    }

    pub fn custom_code_mut(&mut self) -> impl Iterator<Item = &mut PluginCode> {
        let s = self.serving.iter_mut().filter_map(|p| match p {
            Serving::Custom { code, .. } => Some(code),
            _ => None,
        });
        let b = self.business.iter_mut().filter_map(|p| match p {
            Business::Custom { code, .. } => Some(code),
            _ => None,
        });
        s.chain(b)
    }
}

/// Shortest text that parses back to the same `f64`.
pub fn format_number(v: f64) -> String {
    format!("{v:?}")
}

pub fn shard_params_to_numbers(p: &ShardParams) -> Result<BTreeMap<String, f64>, PipelineError> {
    p.iter()
        .map(|(k, v)| match v.parse::<f64>() {
            Ok(n) if n.is_finite() => Ok((k.clone(), n)),
            _ => Err(PipelineError::ShardParam {
                key: k.clone(),
                value: v.clone(),
            }),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "name = \"m\"\n[data_source]\nkind = \"counter\"\n[[serving]]\nkind = \"identity\"\n[[business]]\nkind = \"sum\"\n";

    #[test]
    fn minimal_pipeline() {
        let s = parse_pipeline(MINIMAL).unwrap();
        assert_eq!(s.data_source, DataSource::Counter { offset: 0.0 });
        assert_eq!(s.serving, vec![Serving::Identity]);
        assert_eq!(s.business, vec![Business::Sum]);
    }

    #[test]
    fn unknown_kind_named() {
        let err = parse_pipeline(&MINIMAL.replace("identity", "FOO")).unwrap_err();
        assert!(err.to_string().contains("FOO"), "{err}");
    }

    #[test]
    fn worker_arity() {
        let text = format!("workers = 3\nper_worker = [{{ p = 0 }}, {{ p = 1 }}]\n{MINIMAL}");
        assert_eq!(
            parse_pipeline(&text).unwrap_err(),
            PipelineError::WorkerMismatch { given: 2, workers: 3 }
        );
        let text = format!("per_worker = [{{ p = 0 }}, {{ p = 1 }}]\n{MINIMAL}");
        let s = parse_pipeline(&text).unwrap();
        assert!(s.check_workers(3).is_err());
        assert!(s.check_workers(2).is_ok());
    }

    #[test]
    fn bad_params() {
        assert!(parse_pipeline(&MINIMAL.replace("kind = \"counter\"", "kind = \"counter\"\nwindow = 2")).is_err());
        assert!(parse_pipeline(&MINIMAL.replace("kind = \"sum\"", "kind = \"custom\"")).is_err());
        assert!(parse_pipeline(&MINIMAL.replace("kind = \"sum\"", "kind = \"sum\"\ncode = \"x\"")).is_err());
        assert!(parse_pipeline("name = \"m\"").is_err());
    }

    #[test]
    fn shard_params_round_trip() {
        let text = format!("per_worker = [{{ param_worker0 = 0 }}, {{ param_worker1 = 0.1 }}]\n{MINIMAL}");
        let s = parse_pipeline(&text).unwrap();
        let cfgs = s.shard_configs();
        assert_eq!(shard_params_to_numbers(&cfgs[1]).unwrap(), s.per_worker[1]);
    }
}
