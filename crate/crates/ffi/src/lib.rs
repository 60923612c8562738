//! C ABI for the specbeam engine.
//!
//! Conventions: every fallible call returns an [`SbStatus`] code and writes
//! its result through out-pointers; handles are opaque and freed with the
//! matching `sb_*_free`; the most recent failure message is kept per thread
//! and fetched with [`sb_last_error`]. Buffer-filling calls use a two-call
//! protocol: pass a null buffer (or zero capacity) to learn the required
//! size via `written`, then call again with a buffer at least that large.
//!
//! The generated header lives at `include/specbeam.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use specbeam::harness::ModelKind;
use specbeam::metrics::{average_lagging, sequence_logprob, LatencyInputs};
use specbeam::policy::WaitK;
use specbeam::sbs::{full_sentence_sbs_trace, simul_decode, CommitMode, SbsConfig};
use specbeam::scorer::{HashModel, TabularModel};
use specbeam::trace::DecodeTrace;
use specbeam::Error;

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Malformed model file, unknown token, or other bad input data.
    DataError = 3,
    /// A READ/WRITE policy violated the streaming contract.
    PolicyContract = 4,
    /// An engine precondition was violated (empty source, b = 0, ...).
    ContractViolation = 5,
    /// A metric was requested on inputs where it is undefined.
    MetricUndefined = 6,
    /// The requested enumeration or decode exceeds the size guard.
    InstanceTooLarge = 7,
    /// The underlying file could not be read.
    IoError = 8,
    /// The provided buffer is smaller than the required size.
    BufferTooSmall = 9,
    /// The engine panicked; the handle state is unspecified but safe to free.
    Panicked = 10,
}

/// Commit strategy for the simultaneous decode loop.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbCommitMode {
    Greedy = 0,
    Sbs = 1,
    ChunkBeam = 2,
    ChunkSbs = 3,
}

/// Decode-time knobs shared by all decode entry points.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SbDecodeConfig {
    /// Beam width (>= 1).
    pub beam: usize,
    /// Speculative window.
    pub window: usize,
    /// Permit committing eos while the source is still incomplete.
    pub allow_early_eos: bool,
    /// Cap on committed content tokens, excluding eos (>= 1).
    pub max_len: usize,
    pub commit_mode: SbCommitMode,
    /// Per-content-token bonus used only when picking the final tail
    /// hypothesis.
    pub length_reward: f64,
}

/// Opaque scoring model handle (tabular file model or seeded hash model).
pub struct SbModel {
    inner: ModelKind,
}

/// Opaque decode trace handle: the ordered READ/commit/speculation event log
/// of one decode session.
pub struct SbTrace {
    inner: DecodeTrace,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(err: &Error) -> SbStatus {
    set_error(&err.to_string());
    match err {
        Error::ModelParse { .. }
        | Error::ModelValidation { .. }
        | Error::ModelVocab { .. }
        | Error::UnknownInputToken { .. }
        | Error::ScheduleParse { .. }
        | Error::InvalidTokenId { .. }
        | Error::TraceParse { .. }
        | Error::Usage(_) => SbStatus::DataError,
        Error::PolicyContract(_) => SbStatus::PolicyContract,
        Error::Contract(_) => SbStatus::ContractViolation,
        Error::MetricUndefined(_) => SbStatus::MetricUndefined,
        Error::InstanceTooLarge(_) => SbStatus::InstanceTooLarge,
        Error::Io(_) => SbStatus::IoError,
    }
}

fn guarded<F: FnOnce() -> SbStatus>(body: F) -> SbStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            SbStatus::Panicked
        }
    }
}

/// Fills `buf`/`cap` with `bytes` plus a trailing NUL using the two-call
/// protocol; `written` always receives the required capacity.
unsafe fn fill_bytes(
    bytes: &[u8],
    buf: *mut c_char,
    cap: usize,
    written: *mut usize,
) -> SbStatus {
    if written.is_null() {
        set_error("written pointer is null");
        return SbStatus::NullArgument;
    }
    let needed = bytes.len() + 1;
    *written = needed;
    if buf.is_null() || cap == 0 {
        return SbStatus::Ok;
    }
    if cap < needed {
        set_error("buffer too small");
        return SbStatus::BufferTooSmall;
    }
    std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, bytes.len());
    *buf.add(bytes.len()) = 0;
    SbStatus::Ok
}

/// Fills `buf`/`cap` with `values` using the two-call protocol.
unsafe fn fill_usize(
    values: &[usize],
    buf: *mut usize,
    cap: usize,
    written: *mut usize,
) -> SbStatus {
    if written.is_null() {
        set_error("written pointer is null");
        return SbStatus::NullArgument;
    }
    *written = values.len();
    if buf.is_null() || cap == 0 {
        return SbStatus::Ok;
    }
    if cap < values.len() {
        set_error("buffer too small");
        return SbStatus::BufferTooSmall;
    }
    std::ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    SbStatus::Ok
}

unsafe fn slice_arg<'a, T>(ptr: *const T, len: usize) -> Option<&'a [T]> {
    if len == 0 {
        Some(&[])
    } else if ptr.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(ptr, len))
    }
}

fn config_from(cfg: &SbDecodeConfig) -> SbsConfig {
    SbsConfig {
        b: cfg.beam,
        w: cfg.window,
        allow_early_eos: cfg.allow_early_eos,
        max_len: cfg.max_len,
        commit_mode: match cfg.commit_mode {
            SbCommitMode::Greedy => CommitMode::Greedy,
            SbCommitMode::Sbs => CommitMode::Sbs,
            SbCommitMode::ChunkBeam => CommitMode::ChunkBeam,
            SbCommitMode::ChunkSbs => CommitMode::ChunkSbs,
        },
        length_reward: cfg.length_reward,
    }
}

/// Copies the last error message of the calling thread (empty string if no
/// error occurred yet).
#[no_mangle]
pub unsafe extern "C" fn sb_last_error(
    buf: *mut c_char,
    cap: usize,
    written: *mut usize,
) -> SbStatus {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        fill_bytes(msg.as_bytes(), buf, cap, written)
    })
}

/// Static library version string; never null, do not free.
#[no_mangle]
pub extern "C" fn sb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Loads a tabular model file. On success writes a handle to `out`; free it
/// with `sb_model_free`.
#[no_mangle]
pub unsafe extern "C" fn sb_model_open_tabular(
    path: *const c_char,
    out: *mut *mut SbModel,
) -> SbStatus {
    guarded(|| {
        if path.is_null() || out.is_null() {
            set_error("path or out pointer is null");
            return SbStatus::NullArgument;
        }
        let raw = CStr::from_ptr(path);
        let Ok(path) = raw.to_str() else {
            set_error("path is not valid UTF-8");
            return SbStatus::InvalidUtf8;
        };
        match TabularModel::load(Path::new(path)) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(SbModel {
                    inner: ModelKind::Tabular(model),
                }));
                SbStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Creates a seeded hash model. `alpha` must be positive and `eos_weight`
/// non-negative; `vocab_size` must be at least 2.
#[no_mangle]
pub unsafe extern "C" fn sb_model_new_hash(
    seed: u64,
    vocab_size: usize,
    alpha: f64,
    eos_weight: f64,
    out: *mut *mut SbModel,
) -> SbStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out pointer is null");
            return SbStatus::NullArgument;
        }
        match HashModel::with_params(seed, vocab_size, alpha, eos_weight) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(SbModel {
                    inner: ModelKind::Hash(model),
                }));
                SbStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Frees a model handle; a null pointer is ignored.
#[no_mangle]
pub unsafe extern "C" fn sb_model_free(model: *mut SbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

#[no_mangle]
pub unsafe extern "C" fn sb_model_src_vocab_size(
    model: *const SbModel,
    out: *mut usize,
) -> SbStatus {
    guarded(|| {
        if model.is_null() || out.is_null() {
            set_error("model or out pointer is null");
            return SbStatus::NullArgument;
        }
        *out = (*model).inner.scorer().src_vocab_size();
        SbStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn sb_model_tgt_vocab_size(
    model: *const SbModel,
    out: *mut usize,
) -> SbStatus {
    guarded(|| {
        if model.is_null() || out.is_null() {
            set_error("model or out pointer is null");
            return SbStatus::NullArgument;
        }
        *out = (*model).inner.scorer().tgt_vocab_size();
        SbStatus::Ok
    })
}

/// Runs a simultaneous wait-k decode over `source` (token ids, eos excluded)
/// and writes a trace handle to `out`; free it with `sb_trace_free`.
#[no_mangle]
pub unsafe extern "C" fn sb_decode_wait_k(
    model: *const SbModel,
    source: *const usize,
    source_len: usize,
    k: usize,
    cfg: *const SbDecodeConfig,
    out: *mut *mut SbTrace,
) -> SbStatus {
    guarded(|| {
        if model.is_null() || cfg.is_null() || out.is_null() {
            set_error("model, cfg, or out pointer is null");
            return SbStatus::NullArgument;
        }
        let Some(source) = slice_arg(source, source_len) else {
            set_error("source pointer is null with nonzero length");
            return SbStatus::NullArgument;
        };
        let mut policy = match WaitK::new(k) {
            Ok(p) => p,
            Err(err) => return fail(&err),
        };
        let cfg = config_from(&*cfg);
        match simul_decode((*model).inner.scorer(), source, &mut policy, &cfg) {
            Ok(trace) => {
                *out = Box::into_raw(Box::new(SbTrace { inner: trace }));
                SbStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Runs full-sentence speculative beam search (the whole source is known up
/// front, eos is always allowed) and writes a trace handle to `out`.
/// `cfg.commit_mode` and `cfg.allow_early_eos` are ignored here.
#[no_mangle]
pub unsafe extern "C" fn sb_decode_full_sentence(
    model: *const SbModel,
    source: *const usize,
    source_len: usize,
    cfg: *const SbDecodeConfig,
    out: *mut *mut SbTrace,
) -> SbStatus {
    guarded(|| {
        if model.is_null() || cfg.is_null() || out.is_null() {
            set_error("model, cfg, or out pointer is null");
            return SbStatus::NullArgument;
        }
        let Some(source) = slice_arg(source, source_len) else {
            set_error("source pointer is null with nonzero length");
            return SbStatus::NullArgument;
        };
        let cfg = config_from(&*cfg);
        match full_sentence_sbs_trace((*model).inner.scorer(), source, &cfg) {
            Ok(trace) => {
                *out = Box::into_raw(Box::new(SbTrace { inner: trace }));
                SbStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Frees a trace handle; a null pointer is ignored.
#[no_mangle]
pub unsafe extern "C" fn sb_trace_free(trace: *mut SbTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Number of committed target tokens (including the final eos).
#[no_mangle]
pub unsafe extern "C" fn sb_trace_commit_count(
    trace: *const SbTrace,
    out: *mut usize,
) -> SbStatus {
    guarded(|| {
        if trace.is_null() || out.is_null() {
            set_error("trace or out pointer is null");
            return SbStatus::NullArgument;
        }
        *out = (*trace).inner.committed().len();
        SbStatus::Ok
    })
}

/// Copies the committed token ids (two-call protocol; `written` receives the
/// commit count).
#[no_mangle]
pub unsafe extern "C" fn sb_trace_committed(
    trace: *const SbTrace,
    buf: *mut usize,
    cap: usize,
    written: *mut usize,
) -> SbStatus {
    guarded(|| {
        if trace.is_null() {
            set_error("trace pointer is null");
            return SbStatus::NullArgument;
        }
        fill_usize(&(*trace).inner.committed(), buf, cap, written)
    })
}

/// Copies the per-commit g values, the number of source tokens read at each
/// commit (two-call protocol).
#[no_mangle]
pub unsafe extern "C" fn sb_trace_g_values(
    trace: *const SbTrace,
    buf: *mut usize,
    cap: usize,
    written: *mut usize,
) -> SbStatus {
    guarded(|| {
        if trace.is_null() {
            set_error("trace pointer is null");
            return SbStatus::NullArgument;
        }
        fill_usize(&(*trace).inner.g_values(), buf, cap, written)
    })
}

/// Sum of per-commit log-probabilities over the session.
#[no_mangle]
pub unsafe extern "C" fn sb_trace_logprob_sum(
    trace: *const SbTrace,
    out: *mut f64,
) -> SbStatus {
    guarded(|| {
        if trace.is_null() || out.is_null() {
            set_error("trace or out pointer is null");
            return SbStatus::NullArgument;
        }
        *out = (*trace).inner.commit_logprob_sum();
        SbStatus::Ok
    })
}

/// Serializes the trace as newline-delimited JSON events into a
/// NUL-terminated string (two-call protocol; `written` receives the required
/// capacity in bytes, including the NUL).
#[no_mangle]
pub unsafe extern "C" fn sb_trace_to_jsonl(
    trace: *const SbTrace,
    buf: *mut c_char,
    cap: usize,
    written: *mut usize,
) -> SbStatus {
    guarded(|| {
        if trace.is_null() {
            set_error("trace pointer is null");
            return SbStatus::NullArgument;
        }
        fill_bytes((*trace).inner.to_jsonl().as_bytes(), buf, cap, written)
    })
}

/// Average Lagging of a decode described by its per-commit g values and the
/// source length.
#[no_mangle]
pub unsafe extern "C" fn sb_average_lagging(
    g: *const usize,
    g_len: usize,
    source_len: usize,
    out: *mut f64,
) -> SbStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out pointer is null");
            return SbStatus::NullArgument;
        }
        let Some(g) = slice_arg(g, g_len) else {
            set_error("g pointer is null with nonzero length");
            return SbStatus::NullArgument;
        };
        match LatencyInputs::new(g.to_vec(), source_len) {
            Ok(inputs) => {
                *out = average_lagging(&inputs);
                SbStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}

/// Log-probability of a complete target sequence (must end in eos) given the
/// full source, summed per token.
#[no_mangle]
pub unsafe extern "C" fn sb_sequence_logprob(
    model: *const SbModel,
    source: *const usize,
    source_len: usize,
    target: *const usize,
    target_len: usize,
    out: *mut f64,
) -> SbStatus {
    guarded(|| {
        if model.is_null() || out.is_null() {
            set_error("model or out pointer is null");
            return SbStatus::NullArgument;
        }
        let (Some(source), Some(target)) =
            (slice_arg(source, source_len), slice_arg(target, target_len))
        else {
            set_error("source or target pointer is null with nonzero length");
            return SbStatus::NullArgument;
        };
        match sequence_logprob((*model).inner.scorer(), source, target) {
            Ok(value) => {
                *out = value;
                SbStatus::Ok
            }
            Err(err) => fail(&err),
        }
    })
}
