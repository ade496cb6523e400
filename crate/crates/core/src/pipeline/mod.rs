// Copyright 2026 The PoAI Simnet Authors
// SPDX-License-Identifier: Apache-2.0

//! Low-code pipelines: a data source, serving transforms and business
//! folds, with user code vetted before it may run.

pub mod lang;
mod runtime;
mod safety;
mod spec;

pub use runtime::{
    audit_clean, code_digest, decode_payload, execute_step, hash_sign_recheck, AuditRecord, PipelineState,
    PluginCode, RuntimeError, StepOutput, WorkerContext,
};
pub use safety::{
    safety_check, CodeVerdict, DenyClass, PolicyError, SafetyPolicy, Violation, BUILTIN_POLICY, CLASS_CHARACTER,
    CLASS_DEPTH, CLASS_IDENTIFIER, CLASS_IMPORT, CLASS_SIZE, CLASS_TOKENS,
};
pub use spec::{
    format_number, parse_pipeline, registered_kinds, shard_params_to_numbers, Business, DataSource, PipelineError,
    PipelineSpec, Serving, Subsystem, REGISTRY,
};
