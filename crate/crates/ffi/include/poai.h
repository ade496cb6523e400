/* Copyright 2026 The PoAI Simnet Authors
 * SPDX-License-Identifier: Apache-2.0 */

#ifndef POAI_H
#define POAI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PoaiStatus {
  POAI_STATUS_OK = 0,
  POAI_STATUS_NULL_POINTER = 1,
  POAI_STATUS_INVALID_UTF8 = 2,
  /**
   * Scenario, policy or numeric input rejected.
   */
  POAI_STATUS_INVALID_INPUT = 3,
  POAI_STATUS_SIMULATION_ERROR = 4,
  /**
   * The run finished but token conservation or ledger verification failed.
   */
  POAI_STATUS_INVARIANT_VIOLATED = 5,
  POAI_STATUS_LEDGER_INVALID = 6,
  POAI_STATUS_PANIC = 7,
} PoaiStatus;

/**
 * Opaque simulation handle.
 */
typedef struct PoaiSimulation PoaiSimulation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or NULL. Owned by
 * the library and valid until the next call on this thread.
 */
const char *poai_last_error(void);

/**
 * Builds a simulation from scenario TOML.
 *
 * # Safety
 * `scenario_toml` must be a NUL-terminated string and `out` a valid
 * pointer to writable storage.
 */
enum PoaiStatus poai_simulation_new(const char *scenario_toml, struct PoaiSimulation **out);

/**
 * Overrides the scenario seed. Only valid before the first run.
 *
 * # Safety
 * `sim` must come from [`poai_simulation_new`] and not be freed.
 */
enum PoaiStatus poai_simulation_set_seed(struct PoaiSimulation *sim, uint64_t seed);

/**
 * Runs to the end of the horizon.
 *
 * # Safety
 * `sim` must come from [`poai_simulation_new`] and not be freed.
 */
enum PoaiStatus poai_simulation_run(struct PoaiSimulation *sim);

/**
 * Report so far as line-delimited JSON. Free with [`poai_string_free`].
 *
 * # Safety
 * `sim` must be a live handle and `out` writable.
 */
enum PoaiStatus poai_simulation_report_jsonl(const struct PoaiSimulation *sim, char **out);

/**
 * Binary ledger dump. Free with [`poai_bytes_free`].
 *
 * # Safety
 * `sim` must be a live handle; `out` and `out_len` writable.
 */
enum PoaiStatus poai_simulation_ledger_dump(const struct PoaiSimulation *sim,
                                            uint8_t **out,
                                            size_t *out_len);

/**
 * # Safety
 * `sim` must be NULL or a handle not yet freed.
 */
void poai_simulation_free(struct PoaiSimulation *sim);

/**
 * Verifies a ledger dump. On success `out_height` receives the head
 * height; on `POAI_STATUS_LEDGER_INVALID` it receives the height of the
 * first block that failed.
 *
 * # Safety
 * `bytes` must point to `len` readable bytes (it may be NULL when `len`
 * is 0). `out_height` may be NULL.
 */
enum PoaiStatus poai_ledger_verify(const uint8_t *bytes, size_t len, uint64_t *out_height);

/**
 * Epoch pool shares for `n` nodes in epoch `current_epoch`, given each
 * node's power score and total alive seconds. Writes `n` shares.
 *
 * # Safety
 * `powers` and `alive_seconds` must hold `n` values and `out_shares`
 * room for `n`.
 */
enum PoaiStatus poai_alloc_shares(uint64_t epoch_seconds,
                                  uint64_t current_epoch,
                                  const double *powers,
                                  const uint64_t *alive_seconds,
                                  size_t n,
                                  double *out_shares);

/**
 * Vets plugin source. `policy_toml` may be NULL for the builtin policy.
 * `out_safe` receives the verdict; when `out_report` is non-NULL it
 * receives the verdict text (free with [`poai_string_free`]).
 *
 * # Safety
 * Strings must be NUL-terminated; `out_safe` writable.
 */
enum PoaiStatus poai_safety_check(const char *code,
                                  const char *policy_toml,
                                  bool *out_safe,
                                  char **out_report);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library.
 */
void poai_string_free(char *s);

/**
 * # Safety
 * `bytes`/`len` must be NULL/0 or exactly a pair returned by this library.
 */
void poai_bytes_free(uint8_t *bytes, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POAI_H */
