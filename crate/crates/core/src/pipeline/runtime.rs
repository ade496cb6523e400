// Copyright 2026 The PoAI Simnet Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, VecDeque};

use serde::{Serialize, Serializer};

use super::lang::{parse_program, Env, EvalError, Program};
use super::safety::{safety_check, CodeVerdict, SafetyPolicy};
use super::spec::{Business, DataSource, PipelineSpec, Serving};
use crate::crypto::{tagged_hash, Digest, PublicKey, Signature, SigningKey};
use crate::ids::DeedId;

/// User-supplied plugin source with its digest, author signature and
/// vetting verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct PluginCode {
    pub source: String,
    pub code_hash: Digest,
    pub author: Option<DeedId>,
    pub signature: Option<Signature>,
    pub verdict: CodeVerdict,
}

impl Serialize for PluginCode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("PluginCode", 3)?;
        st.serialize_field("source", &self.source)?;
        st.serialize_field("code_hash", &self.code_hash)?;
        st.serialize_field("verdict", &self.verdict)?;
        st.end()
    }
}

pub fn code_digest(source: &[u8]) -> Digest {
    tagged_hash("poai.code", &[source])
}

fn code_message(hash: &Digest, author: &DeedId) -> Digest {
    tagged_hash("poai.code.sig", &[&hash.0, author.as_str().as_bytes()])
}

impl PluginCode {
    pub fn new(source: String) -> Self {
        PluginCode {
            code_hash: code_digest(source.as_bytes()),
            source,
            author: None,
            signature: None,
            verdict: CodeVerdict::Unchecked,
        }
    }

    pub fn sign(&mut self, author: DeedId, key: &SigningKey) {
        self.signature = Some(key.sign(code_message(&self.code_hash, &author).as_bytes()));
        self.author = Some(author);
    }

    /// Runs the static check, then confirms the source parses.
    pub fn vet(&mut self, policy: &SafetyPolicy) -> &CodeVerdict {
        let mut verdict = safety_check(&self.source, policy);
        if verdict.is_safe() {
            if let Err(e) = parse_program(&self.source) {
                verdict = CodeVerdict::rejected("syntax", e.to_string());
            }
        }
        self.verdict = verdict;
        &self.verdict
    }
}

/// Re-verifies code received at a distribution hop. The digest is
/// recomputed from the bytes in hand and the author signature checked
/// against it.
pub fn hash_sign_recheck(code: &PluginCode, author_key: &PublicKey, hop: u32) -> CodeVerdict {
    if !code.verdict.is_safe() {
        return CodeVerdict::rejected("recheck", format!("hop {hop}: code was not vetted safe"));
    }
    if code_digest(code.source.as_bytes()) != code.code_hash {
        return CodeVerdict::rejected("recheck", format!("hop {hop}: digest mismatch"));
    }
    let (Some(author), Some(sig)) = (&code.author, &code.signature) else {
        return CodeVerdict::rejected("recheck", format!("hop {hop}: missing signature"));
    };
    if !author_key.verify(code_message(&code.code_hash, author).as_bytes(), sig) {
        return CodeVerdict::rejected("recheck", format!("hop {hop}: bad signature"));
    }
    CodeVerdict::Safe
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RuntimeError {
    #[error("{plugin} refused: verdict {verdict}")]
    Refused { plugin: String, verdict: CodeVerdict },
    #[error("{plugin}: {source}")]
    Eval { plugin: String, source: EvalError },
    #[error("{plugin}: {message}")]
    Compile { plugin: String, message: String },
}

impl RuntimeError {
    /// Refusals are the sender's fault and carry a penalty.
    pub fn is_refusal(&self) -> bool {
        matches!(self, RuntimeError::Refused { .. })
    }
}

/// What a worker knows about its own shard.
#[derive(Debug, Clone)]
pub struct WorkerContext {
    pub seed: u64,
    pub worker_index: usize,
    pub n_shards: usize,
    pub params: BTreeMap<String, f64>,
    pub secret: [u8; 32],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineState {
    pub step: u64,
    serving: Vec<ServingMemory>,
    business: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
enum ServingMemory {
    Stateless,
    Last(f64),
    Window(VecDeque<f64>),
}

impl PipelineState {
    pub fn new(spec: &PipelineSpec) -> Self {
        PipelineState {
            step: 0,
            serving: spec
                .serving
                .iter()
                .map(|s| match s {
                    Serving::RunningSum | Serving::Custom { .. } => ServingMemory::Last(0.0),
                    Serving::MovingAverage { .. } => ServingMemory::Window(VecDeque::new()),
                    Serving::Identity | Serving::Threshold { .. } => ServingMemory::Stateless,
                })
                .collect(),
            business: vec![None; spec.business.len()],
        }
    }

    pub fn accumulators(&self) -> Vec<f64> {
        self.business.iter().map(|a| a.unwrap_or(0.0)).collect()
    }

    /// Shard payload: each business accumulator as a big-endian `f64`.
    pub fn payload(&self) -> Vec<u8> {
        self.accumulators().iter().flat_map(|a| a.to_be_bytes()).collect()
    }
}

pub fn decode_payload(bytes: &[u8]) -> Option<Vec<f64>> {
    if !bytes.len().is_multiple_of(8) {
        return None;
    }
    Some(
        bytes
            .chunks_exact(8)
            .map(|c| f64::from_be_bytes(c.try_into().expect("eight bytes")))
            .collect(),
    )
}

/// One plugin's contribution to a step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRecord {
    pub worker_index: usize,
    pub step: u64,
    pub plugin: String,
    pub code_hash: Option<Digest>,
    pub verdict: CodeVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepOutput {
    pub state: PipelineState,
    pub payload: Vec<u8>,
    pub nonce: [u8; 32],
    pub audit: Vec<AuditRecord>,
}

fn unit_draw(seed: u64, worker: usize, step: u64) -> f64 {
    let d = tagged_hash(
        "poai.source",
        &[&seed.to_be_bytes(), &(worker as u64).to_be_bytes(), &step.to_be_bytes()],
    );
    let bits = u64::from_be_bytes(d.0[..8].try_into().expect("eight bytes"));
    (bits >> 11) as f64 / (1u64 << 53) as f64
}

fn compile(plugin: &str, code: &PluginCode) -> Result<Program, RuntimeError> {
    if !code.verdict.is_safe() {
        return Err(RuntimeError::Refused {
            plugin: plugin.into(),
            verdict: code.verdict.clone(),
        });
    }
    parse_program(&code.source).map_err(|e| RuntimeError::Compile {
        plugin: plugin.into(),
        message: e.to_string(),
    })
}

fn run_custom(
    plugin: &str,
    prog: &Program,
    base: &Env,
    params: &BTreeMap<String, f64>,
    x: f64,
    acc: f64,
) -> Result<f64, RuntimeError> {
    let mut env = base.clone();
    for (k, v) in params {
        env.set(k.clone(), *v);
    }
    env.set("x", x).set("acc", acc);
    // Parameters absent from this worker's map read as zero.
    for v in prog.body.variables() {
        if v.starts_with("param_") && env_missing(&env, &v) {
            env.set(v, 0.0);
        }
    }
    prog.body.eval(&env).map_err(|source| RuntimeError::Eval {
        plugin: plugin.into(),
        source,
    })
}

fn env_missing(env: &Env, name: &str) -> bool {
    super::lang::Expr::Var(name.into()).eval(env).is_err()
}

/// Runs one step for one worker. Every custom plugin must be vetted safe
/// before anything runs; otherwise nothing is produced.
pub fn execute_step(spec: &PipelineSpec, ctx: &WorkerContext, state: &PipelineState) -> Result<StepOutput, RuntimeError> {
    let mut compiled = BTreeMap::new();
    for (label, code) in spec.custom_code() {
        let prog = compile(&label, code)?;
        compiled.insert(label, prog);
    }
    let step = state.step;
    let mut base = Env::new();
    base.set("step", step as f64)
        .set("worker", ctx.worker_index as f64)
        .set("shard", ctx.n_shards as f64);
    for (k, v) in &ctx.params {
        base.set(k.clone(), *v);
    }
    let mut next = state.clone();
    let mut audit = Vec::new();
    let record = |plugin: String, code: Option<&PluginCode>| AuditRecord {
        worker_index: ctx.worker_index,
        step,
        plugin,
        code_hash: code.map(|c| c.code_hash),
        verdict: code.map_or(CodeVerdict::Safe, |c| c.verdict.clone()),
    };

    let mut x = match spec.data_source {
        DataSource::Counter { offset } => step as f64 + offset,
        DataSource::Constant { value } => value,
        DataSource::Seeded { low, high } => low + (high - low) * unit_draw(ctx.seed, ctx.worker_index, step),
    };
    audit.push(record("data source".into(), None));

    for (i, (plugin, mem)) in spec.serving.iter().zip(next.serving.iter_mut()).enumerate() {
        let label = format!("serving plugin {i}");
        x = match (plugin, mem) {
            (Serving::Identity, _) => x,
            (Serving::Threshold { level }, _) => {
                if x >= *level {
                    1.0
                } else {
                    0.0
                }
            }
            (Serving::RunningSum, ServingMemory::Last(m)) => {
                *m += x;
                *m
            }
            (Serving::MovingAverage { window }, ServingMemory::Window(w)) => {
                w.push_back(x);
                if w.len() > *window {
                    w.pop_front();
                }
                w.iter().sum::<f64>() / w.len() as f64
            }
            (Serving::Custom { params, .. }, ServingMemory::Last(m)) => {
                *m = run_custom(&label, &compiled[&label], &base, params, x, *m)?;
                *m
            }
            _ => unreachable!("state built from the same spec"),
        };
        let code = match plugin {
            Serving::Custom { code, .. } => Some(code),
            _ => None,
        };
        audit.push(record(label, code));
    }

    for (i, (plugin, acc)) in spec.business.iter().zip(next.business.iter_mut()).enumerate() {
        let label = format!("business plugin {i}");
        let prev = acc.unwrap_or(0.0);
        *acc = Some(match plugin {
            Business::Sum => prev + x,
            Business::Max => acc.map_or(x, |a| a.max(x)),
            Business::Custom { params, .. } => run_custom(&label, &compiled[&label], &base, params, x, prev)?,
        });
        let code = match plugin {
            Business::Custom { code, .. } => Some(code),
            _ => None,
        };
        audit.push(record(label, code));
    }

    next.step += 1;
    let payload = next.payload();
    let nonce = tagged_hash(
        "poai.step",
        &[&ctx.secret, &(ctx.worker_index as u64).to_be_bytes(), &step.to_be_bytes(), &payload],
    )
    .0;
    Ok(StepOutput {
        state: next,
        payload,
        nonce,
        audit,
    })
}

/// True when every audited contribution came from code vetted safe.
pub fn audit_clean(records: &[AuditRecord]) -> bool {
    records.iter().all(|r| r.verdict.is_safe())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::spec::parse_pipeline;

    fn ctx(worker: usize) -> WorkerContext {
        WorkerContext {
            seed: 42,
            worker_index: worker,
            n_shards: 3,
            params: BTreeMap::new(),
            secret: [3; 32],
        }
    }

    fn run(spec: &PipelineSpec, c: &WorkerContext, steps: u64) -> Result<StepOutput, RuntimeError> {
        let mut st = PipelineState::new(spec);
        let mut last = None;
        for _ in 0..steps {
            let out = execute_step(spec, c, &st)?;
            st = out.state.clone();
            last = Some(out);
        }
        Ok(last.expect("at least one step"))
    }

    const MINIMAL: &str = "name = \"m\"\n[data_source]\nkind = \"counter\"\n[[serving]]\nkind = \"identity\"\n[[business]]\nkind = \"sum\"\n";

    #[test]
    fn counter_identity_sum() {
        let spec = parse_pipeline(MINIMAL).unwrap();
        let out = run(&spec, &ctx(0), 5).unwrap();
        assert_eq!(decode_payload(&out.payload).unwrap(), vec![10.0]);
        assert!(audit_clean(&out.audit));
    }

    #[test]
    fn same_config_same_payload() {
        let spec = parse_pipeline(&MINIMAL.replace("\"counter\"", "\"seeded\"")).unwrap();
        let a = run(&spec, &ctx(0), 4).unwrap();
        let b = run(&spec, &ctx(0), 4).unwrap();
        assert_eq!(a.payload, b.payload);
        assert_eq!(a.nonce, b.nonce);
        let c = run(&spec, &ctx(1), 4).unwrap();
        assert_ne!(a.payload, c.payload);
    }

    #[test]
    fn serving_transforms() {
        let text = MINIMAL.replace(
            "kind = \"identity\"",
            "kind = \"moving_average\"\nwindow = 2\n[[serving]]\nkind = \"threshold\"\nlevel = 1.5",
        );
        let spec = parse_pipeline(&text).unwrap();
        // Averages of counter 0..4 over window 2: 0, .5, 1.5, 2.5 -> 0, 0, 1, 1.
        let out = run(&spec, &ctx(0), 4).unwrap();
        assert_eq!(decode_payload(&out.payload).unwrap(), vec![2.0]);
    }

    fn custom_spec(code: &str) -> PipelineSpec {
        parse_pipeline(&MINIMAL.replace("kind = \"sum\"", &format!("kind = \"custom\"\ncode = \"{code}\""))).unwrap()
    }

    #[test]
    fn unvetted_or_rejected_code_refused() {
        let mut spec = custom_spec("acc + x");
        let err = run(&spec, &ctx(0), 1).unwrap_err();
        assert!(err.is_refusal());
        spec.custom_code_mut().for_each(|c| {
            c.vet(&SafetyPolicy::builtin());
        });
        assert_eq!(decode_payload(&run(&spec, &ctx(0), 5).unwrap().payload).unwrap(), vec![10.0]);

        let mut bad = custom_spec("acc + system(x)");
        bad.custom_code_mut().for_each(|c| {
            c.vet(&SafetyPolicy::builtin());
        });
        assert!(run(&bad, &ctx(0), 1).unwrap_err().is_refusal());
    }

    #[test]
    fn custom_reads_worker_params() {
        let mut spec = custom_spec("acc + x * param_worker1");
        spec.custom_code_mut().for_each(|c| {
            c.vet(&SafetyPolicy::builtin());
        });
        let mut c1 = ctx(1);
        c1.params.insert("param_worker1".into(), 2.0);
        assert_eq!(decode_payload(&run(&spec, &c1, 5).unwrap().payload).unwrap(), vec![20.0]);
        assert_eq!(decode_payload(&run(&spec, &ctx(0), 5).unwrap().payload).unwrap(), vec![0.0]);
    }

    #[test]
    fn recheck_round_trip_tamper_and_strip() {
        let key = SigningKey::derive("t", b"sender");
        let mut code = PluginCode::new("acc + x".into());
        code.vet(&SafetyPolicy::builtin());
        code.sign(DeedId::new("sender"), &key);
        assert_eq!(hash_sign_recheck(&code, &key.public_key(), 2), CodeVerdict::Safe);

        let mut tampered = code.clone();
        tampered.source = "acc - x".into();
        assert!(!hash_sign_recheck(&tampered, &key.public_key(), 2).is_safe());

        let mut stripped = code.clone();
        stripped.signature = None;
        assert!(!hash_sign_recheck(&stripped, &key.public_key(), 2).is_safe());

        let other = SigningKey::derive("t", b"mallory");
        assert!(!hash_sign_recheck(&code, &other.public_key(), 2).is_safe());
    }
}
