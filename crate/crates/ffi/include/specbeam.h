/* C interface to the specbeam decoding engine. Generated by cbindgen; do not edit. */

#ifndef SPECBEAM_H
#define SPECBEAM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Commit strategy for the simultaneous decode loop.
 */
typedef enum SbCommitMode {
  SB_COMMIT_MODE_GREEDY = 0,
  SB_COMMIT_MODE_SBS = 1,
  SB_COMMIT_MODE_CHUNK_BEAM = 2,
  SB_COMMIT_MODE_CHUNK_SBS = 3,
} SbCommitMode;

/**
 * Status code returned by every fallible function.
 */
typedef enum SbStatus {
  SB_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SB_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  SB_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed model file, unknown token, or other bad input data.
   */
  SB_STATUS_DATA_ERROR = 3,
  /**
   * A READ/WRITE policy violated the streaming contract.
   */
  SB_STATUS_POLICY_CONTRACT = 4,
  /**
   * An engine precondition was violated (empty source, b = 0, ...).
   */
  SB_STATUS_CONTRACT_VIOLATION = 5,
  /**
   * A metric was requested on inputs where it is undefined.
   */
  SB_STATUS_METRIC_UNDEFINED = 6,
  /**
   * The requested enumeration or decode exceeds the size guard.
   */
  SB_STATUS_INSTANCE_TOO_LARGE = 7,
  /**
   * The underlying file could not be read.
   */
  SB_STATUS_IO_ERROR = 8,
  /**
   * The provided buffer is smaller than the required size.
   */
  SB_STATUS_BUFFER_TOO_SMALL = 9,
  /**
   * The engine panicked; the handle state is unspecified but safe to free.
   */
  SB_STATUS_PANICKED = 10,
} SbStatus;

/**
 * Opaque scoring model handle (tabular file model or seeded hash model).
 */
typedef struct SbModel SbModel;

/**
 * Opaque decode trace handle: the ordered READ/commit/speculation event log
 * of one decode session.
 */
typedef struct SbTrace SbTrace;

/**
 * Decode-time knobs shared by all decode entry points.
 */
typedef struct SbDecodeConfig {
  /**
   * Beam width (>= 1).
   */
  size_t beam;
  /**
   * Speculative window.
   */
  size_t window;
  /**
   * Permit committing eos while the source is still incomplete.
   */
  bool allow_early_eos;
  /**
   * Cap on committed content tokens, excluding eos (>= 1).
   */
  size_t max_len;
  enum SbCommitMode commit_mode;
  /**
   * Per-content-token bonus used only when picking the final tail
   * hypothesis.
   */
  double length_reward;
} SbDecodeConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of the calling thread (empty string if no
 * error occurred yet).
 */
enum SbStatus sb_last_error(char *buf, size_t cap, size_t *written);

/**
 * Static library version string; never null, do not free.
 */
const char *sb_version(void);

/**
 * Loads a tabular model file. On success writes a handle to `out`; free it
 * with `sb_model_free`.
 */
enum SbStatus sb_model_open_tabular(const char *path, struct SbModel **out);

/**
 * Creates a seeded hash model. `alpha` must be positive and `eos_weight`
 * non-negative; `vocab_size` must be at least 2.
 */
enum SbStatus sb_model_new_hash(uint64_t seed,
                                size_t vocab_size,
                                double alpha,
                                double eos_weight,
                                struct SbModel **out);

/**
 * Frees a model handle; a null pointer is ignored.
 */
void sb_model_free(struct SbModel *model);

enum SbStatus sb_model_src_vocab_size(const struct SbModel *model, size_t *out);

enum SbStatus sb_model_tgt_vocab_size(const struct SbModel *model, size_t *out);

/**
 * Runs a simultaneous wait-k decode over `source` (token ids, eos excluded)
 * and writes a trace handle to `out`; free it with `sb_trace_free`.
 */
enum SbStatus sb_decode_wait_k(const struct SbModel *model,
                               const size_t *source,
                               size_t source_len,
                               size_t k,
                               const struct SbDecodeConfig *cfg,
                               struct SbTrace **out);

/**
 * Runs full-sentence speculative beam search (the whole source is known up
 * front, eos is always allowed) and writes a trace handle to `out`.
 * `cfg.commit_mode` and `cfg.allow_early_eos` are ignored here.
 */
enum SbStatus sb_decode_full_sentence(const struct SbModel *model,
                                      const size_t *source,
                                      size_t source_len,
                                      const struct SbDecodeConfig *cfg,
                                      struct SbTrace **out);

/**
 * Frees a trace handle; a null pointer is ignored.
 */
void sb_trace_free(struct SbTrace *trace);

/**
 * Number of committed target tokens (including the final eos).
 */
enum SbStatus sb_trace_commit_count(const struct SbTrace *trace, size_t *out);

/**
 * Copies the committed token ids (two-call protocol; `written` receives the
 * commit count).
 */
enum SbStatus sb_trace_committed(const struct SbTrace *trace,
                                 size_t *buf,
                                 size_t cap,
                                 size_t *written);

/**
 * Copies the per-commit g values, the number of source tokens read at each
 * commit (two-call protocol).
 */
enum SbStatus sb_trace_g_values(const struct SbTrace *trace,
                                size_t *buf,
                                size_t cap,
                                size_t *written);

/**
 * Sum of per-commit log-probabilities over the session.
 */
enum SbStatus sb_trace_logprob_sum(const struct SbTrace *trace, double *out);

/**
 * Serializes the trace as newline-delimited JSON events into a
 * NUL-terminated string (two-call protocol; `written` receives the required
 * capacity in bytes, including the NUL).
 */
enum SbStatus sb_trace_to_jsonl(const struct SbTrace *trace,
                                char *buf,
                                size_t cap,
                                size_t *written);

/**
 * Average Lagging of a decode described by its per-commit g values and the
 * source length.
 */
enum SbStatus sb_average_lagging(const size_t *g, size_t g_len, size_t source_len, double *out);

/**
 * Log-probability of a complete target sequence (must end in eos) given the
 * full source, summed per token.
 */
enum SbStatus sb_sequence_logprob(const struct SbModel *model,
                                  const size_t *source,
                                  size_t source_len,
                                  const size_t *target,
                                  size_t target_len,
                                  double *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SPECBEAM_H */
