// Copyright 2026 The PoAI Simnet Authors
// SPDX-License-Identifier: Apache-2.0

//! The `poai` command line.
//!
//! Exit codes: 0 success, 1 integrity or conservation failure, 2 usage,
//! 3 unreadable or invalid input, 4 truncated dump or output I/O failure.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use crate::crypto::{sha256_concat, Digest};
use crate::ids::JobId;
use crate::ledger::{encode_dump, verify_dump, DumpFault, DumpVerdict};
use crate::simnet::{summary, to_jsonl, ScenarioConfig, Simulation};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_TRUNCATED: i32 = 4;
pub const EXIT_OUTPUT: i32 = 4;

pub const REPORT_FILE: &str = "report.jsonl";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const LEDGER_FILE: &str = "ledger.bin";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "poai", version, about = "Proof-of-AI compute market simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Line-delimited JSON records.
    Records,
    /// A human-readable digest.
    Summary,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write the report, ledger dump and manifest.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Replaces the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// What to print on stdout.
        #[arg(long, value_enum, default_value = "summary")]
        format: Format,
    },
    /// Check a ledger dump's hash chain and signatures.
    Verify {
        ledger: PathBuf,
        #[arg(long, value_enum, default_value = "summary")]
        format: Format,
    },
    /// Filter a report: `epoch=N`, `deed=ID`, `job=SENDER:SEQ`.
    Inspect {
        /// Report directory or report file.
        report: PathBuf,
        query: Vec<String>,
        #[arg(long, value_enum, default_value = "records")]
        format: Format,
    },
}

#[derive(Debug, Serialize)]
struct Manifest {
    version: String,
    config_digest: Digest,
    seed: u64,
    seed_override: Option<u64>,
    scenario_seed: u64,
    ledger_height: u64,
    ledger_head: Digest,
    files: BTreeMap<String, Digest>,
}

/// Parses `args` and runs the command. Returns the exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    execute(cli.command, out, err)
}

pub fn execute(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match cmd {
        Command::Run {
            scenario,
            seed,
            out: dir,
            format,
        } => cmd_run(&scenario, seed, &dir, format, out, err),
        Command::Verify { ledger, format } => cmd_verify(&ledger, format, out, err),
        Command::Inspect { report, query, format } => cmd_inspect(&report, &query, format, out, err),
    }
}

fn cmd_run(path: &Path, seed: Option<u64>, dir: &Path, format: Format, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: cannot read {}: {e}", path.display());
            return EXIT_INPUT;
        }
    };
    let mut cfg = match ScenarioConfig::from_toml(&text) {
        Ok(c) => c,
        Err(e) => {
            for issue in &e.0 {
                let _ = writeln!(err, "{}: {issue}", path.display());
            }
            return EXIT_INPUT;
        }
    };
    let scenario_seed = cfg.seed;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let mut sim = match Simulation::new(cfg) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INPUT;
        }
    };
    if let Err(e) = sim.run() {
        let _ = writeln!(err, "error: simulation aborted: {e}");
        return EXIT_FAILED;
    }
    let report = to_jsonl(sim.records());
    let text_summary = summary(sim.records());
    let dump = encode_dump(sim.ledger().blocks());

    let mut files = BTreeMap::new();
    files.insert(REPORT_FILE.to_string(), sha256_concat(&[report.as_bytes()]));
    files.insert(SUMMARY_FILE.to_string(), sha256_concat(&[text_summary.as_bytes()]));
    files.insert(LEDGER_FILE.to_string(), sha256_concat(&[&dump]));
    let manifest = Manifest {
        version: crate::VERSION.to_string(),
        config_digest: sim.config().digest,
        seed: sim.config().seed,
        seed_override: seed,
        scenario_seed,
        ledger_height: sim.ledger().height(),
        ledger_head: sim.ledger().head().digest(),
        files,
    };
    let manifest = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    let written = fs::create_dir_all(dir)
        .and_then(|_| fs::write(dir.join(REPORT_FILE), &report))
        .and_then(|_| fs::write(dir.join(SUMMARY_FILE), &text_summary))
        .and_then(|_| fs::write(dir.join(LEDGER_FILE), &dump))
        .and_then(|_| fs::write(dir.join(MANIFEST_FILE), &manifest));
    if let Err(e) = written {
        let _ = writeln!(err, "error: writing {}: {e}", dir.display());
        return EXIT_OUTPUT;
    }
    let _ = match format {
        Format::Records => out.write_all(report.as_bytes()),
        Format::Summary => out.write_all(text_summary.as_bytes()),
    };
    if !sim.conserved() || sim.conservation_failures() > 0 || !sim.ledger().verify().is_ok() {
        let _ = writeln!(err, "error: run finished with integrity failures; see {}", dir.join(SUMMARY_FILE).display());
        return EXIT_FAILED;
    }
    EXIT_OK
}

fn cmd_verify(path: &Path, format: Format, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) => {
            let _ = writeln!(err, "error: cannot read {}: {e}", path.display());
            return EXIT_INPUT;
        }
    };
    let verdict = verify_dump(&bytes);
    let _ = match format {
        Format::Records => writeln!(out, "{}", serde_json::to_string(&verdict).expect("verdict serializes")),
        Format::Summary => match &verdict {
            DumpVerdict::Ok { blocks, head_height } => {
                writeln!(out, "ok: {blocks} blocks, head height {head_height}")
            }
            DumpVerdict::Failed(f) => writeln!(out, "FAILED at height {}: {f}", f.height()),
        },
    };
    match verdict {
        DumpVerdict::Ok { .. } => EXIT_OK,
        DumpVerdict::Failed(DumpFault::Truncated { .. }) => EXIT_TRUNCATED,
        DumpVerdict::Failed(_) => EXIT_FAILED,
    }
}

#[derive(Debug, Default)]
struct Query {
    epoch: Option<u64>,
    deed: Option<String>,
    job: Option<String>,
}

fn parse_query(terms: &[String]) -> Result<Query, String> {
    let mut q = Query::default();
    for t in terms {
        let (k, v) = t.split_once('=').ok_or_else(|| format!("query term `{t}` is not key=value"))?;
        match k {
            "epoch" => q.epoch = Some(v.parse().map_err(|_| format!("epoch `{v}` is not a number"))?),
            "deed" => q.deed = Some(v.to_string()),
            "job" => q.job = Some(v.parse::<JobId>().map_err(|e| e.to_string())?.to_string()),
            other => return Err(format!("unknown query key `{other}` (known: epoch, deed, job)")),
        }
    }
    Ok(q)
}

const DEED_FIELDS: [&str; 4] = ["deed_id", "worker", "challenger", "workers"];

fn mentions(v: &Value, deed: &str) -> bool {
    let Some(obj) = v.as_object() else { return false };
    DEED_FIELDS.iter().any(|f| match obj.get(*f) {
        Some(Value::String(s)) => s == deed,
        Some(Value::Array(a)) => a.iter().any(|x| x.as_str() == Some(deed)),
        _ => false,
    })
}

/// Allocation rows, or a job timeline when `job` is given, in report order.
fn select(records: &[Value], q: &Query) -> Vec<Value> {
    let mut rows = Vec::new();
    for r in records {
        let ty = r["type"].as_str().unwrap_or("");
        let epoch_ok = |v: &Value| q.epoch.is_none_or(|e| v["epoch"].as_u64() == Some(e));
        if let Some(job) = &q.job {
            if ty == "ledger" || r["job_id"].as_str() != Some(job.as_str()) || !epoch_ok(r) {
                continue;
            }
            if q.deed.as_deref().is_some_and(|d| !mentions(r, d)) {
                continue;
            }
            rows.push(r.clone());
        } else if ty == "allocation" && epoch_ok(r) {
            for e in r["entries"].as_array().into_iter().flatten() {
                if q.deed.as_deref().is_some_and(|d| e["deed_id"].as_str() != Some(d)) {
                    continue;
                }
                let mut row = serde_json::Map::new();
                row.insert("epoch".into(), r["epoch"].clone());
                if let Some(o) = e.as_object() {
                    row.extend(o.clone());
                }
                rows.push(Value::Object(row));
            }
        }
    }
    rows
}

fn cmd_inspect(path: &Path, terms: &[String], format: Format, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let q = match parse_query(terms) {
        Ok(q) => q,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let file = if path.is_dir() { path.join(REPORT_FILE) } else { path.to_path_buf() };
    let text = match fs::read_to_string(&file) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: cannot read {}: {e}", file.display());
            return EXIT_INPUT;
        }
    };
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        match serde_json::from_str::<Value>(line) {
            Ok(v) => records.push(v),
            Err(e) => {
                let _ = writeln!(err, "error: {}:{}: {e}", file.display(), i + 1);
                return EXIT_INPUT;
            }
        }
    }
    for row in select(&records, &q) {
        let _ = match format {
            Format::Records => writeln!(out, "{row}"),
            Format::Summary => writeln!(out, "{}", render_row(&row)),
        };
    }
    EXIT_OK
}

fn render_row(row: &Value) -> String {
    let Some(obj) = row.as_object() else { return row.to_string() };
    let mut parts = Vec::new();
    for (k, v) in obj {
        let v = match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        parts.push(format!("{k}={v}"));
    }
    parts.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn query_parsing() {
        let q = parse_query(&["epoch=3".into(), "job=(s,1)".into()]).unwrap();
        assert_eq!(q.epoch, Some(3));
        assert_eq!(q.job.as_deref(), Some("s:1"));
        assert!(parse_query(&["colour=red".into()]).unwrap_err().contains("unknown query key"));
        assert!(parse_query(&["epoch".into()]).is_err());
    }

    #[test]
    fn allocation_rows_filter_by_epoch_and_deed() {
        let recs: Vec<Value> = [
            r#"{"type":"allocation","epoch":1,"entries":[{"deed_id":"a","share":0.5},{"deed_id":"b","share":0.5}]}"#,
            r#"{"type":"allocation","epoch":2,"entries":[{"deed_id":"a","share":1.0}]}"#,
            r#"{"type":"job","epoch":1,"job_id":"a:1","event":"funded"}"#,
        ]
        .iter()
        .map(|s| serde_json::from_str(s).unwrap())
        .collect();
        let q = Query {
            epoch: Some(1),
            ..Default::default()
        };
        assert_eq!(select(&recs, &q).len(), 2);
        let q = Query {
            deed: Some("a".into()),
            ..Default::default()
        };
        assert_eq!(select(&recs, &q).len(), 2);
        let q = Query {
            deed: Some("zz".into()),
            ..Default::default()
        };
        assert!(select(&recs, &q).is_empty());
        let q = Query {
            job: Some("a:1".into()),
            ..Default::default()
        };
        assert_eq!(select(&recs, &q)[0]["event"], "funded");
    }
}
