// Copyright 2026 The PoAI Simnet Authors
// SPDX-License-Identifier: Apache-2.0

//! C ABI over `poai-core`.
//!
//! Every entry point returns a [`PoaiStatus`]. On failure a message for the
//! calling thread is available from [`poai_last_error`] until the next call.
//! Panics are caught at the boundary and reported as `POAI_STATUS_PANIC`;
//! a simulation handle that panicked should only be freed.
//!
//! Memory handed out by the library is released with the matching
//! `*_free` function and nothing else.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use poai_core::ledger::{encode_dump, verify_dump, DumpVerdict};
use poai_core::pipeline::{safety_check, SafetyPolicy};
use poai_core::simnet::{to_jsonl, Record, ScenarioConfig, Simulation};
use poai_core::tokenomics::{compute_shares, EpochConfig, NodeActivity};
use poai_core::{capability::Capability, DeedId};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoaiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Scenario, policy or numeric input rejected.
    InvalidInput = 3,
    SimulationError = 4,
    /// The run finished but token conservation or ledger verification failed.
    InvariantViolated = 5,
    LedgerInvalid = 6,
    Panic = 7,
}

/// Opaque simulation handle.
pub struct PoaiSimulation {
    sim: Simulation,
    started: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Fail(PoaiStatus, String);

fn set_error(msg: Option<String>) {
    let c = msg.map(|m| CString::new(m.replace('\0', " ")).expect("nul bytes removed"));
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PoaiStatus {
    set_error(None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PoaiStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(Some(msg));
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(Some(format!("panic: {msg}")));
            PoaiStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail(PoaiStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    non_null(p, what)?;
    // SAFETY: caller guarantees a NUL-terminated string.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|e| Fail(PoaiStatus::InvalidUtf8, format!("{what}: {e}")))
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

fn to_c_bytes(bytes: Vec<u8>) -> (*mut u8, usize) {
    let b = bytes.into_boxed_slice();
    let len = b.len();
    (Box::into_raw(b) as *mut u8, len)
}

/// Message for the most recent failure on this thread, or NULL. Owned by
/// the library and valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn poai_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a simulation from scenario TOML.
///
/// # Safety
/// `scenario_toml` must be a NUL-terminated string and `out` a valid
/// pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn poai_simulation_new(scenario_toml: *const c_char, out: *mut *mut PoaiSimulation) -> PoaiStatus {
    guard(|| {
        non_null(out, "out")?;
        // SAFETY: checked non-null; writable per contract.
        unsafe { *out = ptr::null_mut() };
        let text = unsafe { read_str(scenario_toml, "scenario_toml") }?;
        let cfg = ScenarioConfig::from_toml(text).map_err(|e| Fail(PoaiStatus::InvalidInput, e.to_string()))?;
        let sim = Simulation::new(cfg).map_err(|e| Fail(PoaiStatus::InvalidInput, e.to_string()))?;
        unsafe { *out = Box::into_raw(Box::new(PoaiSimulation { sim, started: false })) };
        Ok(())
    })
}

/// Overrides the scenario seed. Only valid before the first run.
///
/// # Safety
/// `sim` must come from [`poai_simulation_new`] and not be freed.
#[no_mangle]
pub unsafe extern "C" fn poai_simulation_set_seed(sim: *mut PoaiSimulation, seed: u64) -> PoaiStatus {
    guard(|| {
        non_null(sim, "sim")?;
        // SAFETY: live handle per contract.
        let h = unsafe { &mut *sim };
        if h.started {
            return Err(Fail(PoaiStatus::InvalidInput, "simulation already started".into()));
        }
        let mut cfg = h.sim.config().clone();
        cfg.seed = seed;
        h.sim = Simulation::new(cfg).map_err(|e| Fail(PoaiStatus::InvalidInput, e.to_string()))?;
        Ok(())
    })
}

/// Runs to the end of the horizon.
///
/// # Safety
/// `sim` must come from [`poai_simulation_new`] and not be freed.
#[no_mangle]
pub unsafe extern "C" fn poai_simulation_run(sim: *mut PoaiSimulation) -> PoaiStatus {
    guard(|| {
        non_null(sim, "sim")?;
        // SAFETY: live handle per contract.
        let h = unsafe { &mut *sim };
        h.started = true;
        h.sim
            .run()
            .map_err(|e| Fail(PoaiStatus::SimulationError, e.to_string()))?;
        match h.sim.records().last() {
            Some(Record::Final {
                conserved: true,
                ledger_verified: true,
                ..
            }) => Ok(()),
            Some(Record::Final {
                conservation_failures,
                ledger_verified,
                ..
            }) => Err(Fail(
                PoaiStatus::InvariantViolated,
                format!("{conservation_failures} conservation failures, ledger verified: {ledger_verified}"),
            )),
            _ => Err(Fail(PoaiStatus::SimulationError, "run ended without a final record".into())),
        }
    })
}

/// Report so far as line-delimited JSON. Free with [`poai_string_free`].
///
/// # Safety
/// `sim` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn poai_simulation_report_jsonl(sim: *const PoaiSimulation, out: *mut *mut c_char) -> PoaiStatus {
    guard(|| {
        non_null(sim, "sim")?;
        non_null(out, "out")?;
        // SAFETY: both checked; validity per contract.
        let h = unsafe { &*sim };
        unsafe { *out = to_c_string(to_jsonl(h.sim.records())) };
        Ok(())
    })
}

/// Binary ledger dump. Free with [`poai_bytes_free`].
///
/// # Safety
/// `sim` must be a live handle; `out` and `out_len` writable.
#[no_mangle]
pub unsafe extern "C" fn poai_simulation_ledger_dump(
    sim: *const PoaiSimulation,
    out: *mut *mut u8,
    out_len: *mut usize,
) -> PoaiStatus {
    guard(|| {
        non_null(sim, "sim")?;
        non_null(out, "out")?;
        non_null(out_len, "out_len")?;
        // SAFETY: all checked; validity per contract.
        let h = unsafe { &*sim };
        let (p, n) = to_c_bytes(encode_dump(h.sim.ledger().blocks()));
        unsafe {
            *out = p;
            *out_len = n;
        }
        Ok(())
    })
}

/// # Safety
/// `sim` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn poai_simulation_free(sim: *mut PoaiSimulation) {
    if !sim.is_null() {
        // SAFETY: allocated by Box in poai_simulation_new.
        let _ = catch_unwind(AssertUnwindSafe(|| drop(unsafe { Box::from_raw(sim) })));
    }
}

/// Verifies a ledger dump. On success `out_height` receives the head
/// height; on `POAI_STATUS_LEDGER_INVALID` it receives the height of the
/// first block that failed.
///
/// # Safety
/// `bytes` must point to `len` readable bytes (it may be NULL when `len`
/// is 0). `out_height` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn poai_ledger_verify(bytes: *const u8, len: usize, out_height: *mut u64) -> PoaiStatus {
    guard(|| {
        let data: &[u8] = if len == 0 {
            &[]
        } else {
            non_null(bytes, "bytes")?;
            // SAFETY: len readable bytes per contract.
            unsafe { std::slice::from_raw_parts(bytes, len) }
        };
        let (height, result) = match verify_dump(data) {
            DumpVerdict::Ok { head_height, .. } => (head_height, Ok(())),
            DumpVerdict::Failed(fault) => (fault.height(), Err(Fail(PoaiStatus::LedgerInvalid, fault.to_string()))),
        };
        if !out_height.is_null() {
            // SAFETY: non-null and writable per contract.
            unsafe { *out_height = height };
        }
        result
    })
}

/// Epoch pool shares for `n` nodes in epoch `current_epoch`, given each
/// node's power score and total alive seconds. Writes `n` shares.
///
/// # Safety
/// `powers` and `alive_seconds` must hold `n` values and `out_shares`
/// room for `n`.
#[no_mangle]
pub unsafe extern "C" fn poai_alloc_shares(
    epoch_seconds: u64,
    current_epoch: u64,
    powers: *const f64,
    alive_seconds: *const u64,
    n: usize,
    out_shares: *mut f64,
) -> PoaiStatus {
    guard(|| {
        non_null(powers, "powers")?;
        non_null(alive_seconds, "alive_seconds")?;
        non_null(out_shares, "out_shares")?;
        // SAFETY: n elements each per contract.
        let (p, a) = unsafe {
            (
                std::slice::from_raw_parts(powers, n),
                std::slice::from_raw_parts(alive_seconds, n),
            )
        };
        let invalid = |e: poai_core::tokenomics::TokenomicsError| Fail(PoaiStatus::InvalidInput, e.to_string());
        let cfg = EpochConfig::at_epoch(epoch_seconds, 0, current_epoch).map_err(invalid)?;
        let mut active = Vec::with_capacity(n);
        for (i, (&power, &alive)) in p.iter().zip(a).enumerate() {
            let mut node = NodeActivity::new(DeedId::new(format!("node{i}")), Capability::default());
            node.total_alive_seconds = alive;
            node.set_power(current_epoch, power, current_epoch).map_err(invalid)?;
            active.push(node);
        }
        let shares = compute_shares(&active, &cfg).map_err(invalid)?;
        // SAFETY: room for n per contract.
        let out = unsafe { std::slice::from_raw_parts_mut(out_shares, n) };
        for (slot, s) in out.iter_mut().zip(shares) {
            *slot = s.share;
        }
        Ok(())
    })
}

/// Vets plugin source. `policy_toml` may be NULL for the builtin policy.
/// `out_safe` receives the verdict; when `out_report` is non-NULL it
/// receives the verdict text (free with [`poai_string_free`]).
///
/// # Safety
/// Strings must be NUL-terminated; `out_safe` writable.
#[no_mangle]
pub unsafe extern "C" fn poai_safety_check(
    code: *const c_char,
    policy_toml: *const c_char,
    out_safe: *mut bool,
    out_report: *mut *mut c_char,
) -> PoaiStatus {
    guard(|| {
        non_null(out_safe, "out_safe")?;
        let src = unsafe { read_str(code, "code") }?;
        let policy = if policy_toml.is_null() {
            SafetyPolicy::builtin()
        } else {
            let text = unsafe { read_str(policy_toml, "policy_toml") }?;
            SafetyPolicy::from_toml(text).map_err(|e| Fail(PoaiStatus::InvalidInput, e.to_string()))?
        };
        let verdict = safety_check(src, &policy);
        // SAFETY: checked above; writable per contract.
        unsafe { *out_safe = verdict.is_safe() };
        if !out_report.is_null() {
            unsafe { *out_report = to_c_string(verdict.to_string()) };
        }
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn poai_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: produced by CString::into_raw.
        drop(unsafe { CString::from_raw(s) });
    }
}

/// # Safety
/// `bytes`/`len` must be NULL/0 or exactly a pair returned by this library.
#[no_mangle]
pub unsafe extern "C" fn poai_bytes_free(bytes: *mut u8, len: usize) {
    if !bytes.is_null() {
        // SAFETY: produced by Box<[u8]>::into_raw with this length.
        drop(unsafe { Box::from_raw(ptr::slice_from_raw_parts_mut(bytes, len)) });
    }
}
