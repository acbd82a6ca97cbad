//! C ABI over the selfteach core: load a multiple-choice scorer checkpoint,
//! score options, and compute the extractive metrics.
//!
//! Every fallible function returns an [`StStatus`]; on failure the message is
//! available from [`st_last_error_message`] on the same thread until the
//! next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use selfteach::error::Error;
use selfteach::metrics;
use selfteach::scorer::encode::encode_mc_parts;
use selfteach::scorer::{forward_mc, Checkpoint, Task};

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Data = 4,
    Shape = 5,
    Numerical = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Opaque handle to a loaded scorer.
pub struct StScorer {
    ckpt: Checkpoint,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: StStatus, msg: impl Into<String>) -> StStatus {
    set_error(msg.into());
    status
}

fn status_of(e: &Error) -> StStatus {
    match e {
        Error::Io { .. } => StStatus::Io,
        Error::NonFinite { .. } => StStatus::Numerical,
        Error::Shape(_) => StStatus::Shape,
        Error::Stage { source, .. } => status_of(source),
        _ => StStatus::Data,
    }
}

fn guard(f: impl FnOnce() -> StStatus) -> StStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(StStatus::Panic, "internal panic"),
    }
}

/// # Safety
/// `p` must be null or point to a nul-terminated string.
unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, StStatus> {
    if p.is_null() {
        return Err(fail(StStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(StStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

/// Message of the last failure on this thread, or null if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn st_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Loads a multiple-choice checkpoint into `*out`.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn st_scorer_load(path: *const c_char, out: *mut *mut StScorer) -> StStatus {
    guard(|| {
        if out.is_null() {
            return fail(StStatus::NullPointer, "out is null");
        }
        let path = match text(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match Checkpoint::load(Path::new(path)) {
            Ok((ckpt, _)) if ckpt.task() != Task::MultipleChoice => fail(
                StStatus::Shape,
                format!("checkpoint {path} is {}, not multiple_choice", ckpt.task()),
            ),
            Ok((ckpt, _)) => {
                *out = Box::into_raw(Box::new(StScorer { ckpt }));
                StStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Writes the probability of each of `n_options` options into `out_probs`,
/// which must hold at least `out_len` values.
///
/// # Safety
/// `scorer` must come from [`st_scorer_load`]; `options` must point to
/// `n_options` nul-terminated strings; `out_probs` must be writable for
/// `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn st_scorer_predict_mc(
    scorer: *const StScorer,
    question: *const c_char,
    options: *const *const c_char,
    n_options: usize,
    context: *const c_char,
    out_probs: *mut f64,
    out_len: usize,
) -> StStatus {
    guard(|| {
        if scorer.is_null() || options.is_null() || out_probs.is_null() {
            return fail(StStatus::NullPointer, "scorer, options or out_probs is null");
        }
        if n_options < 2 {
            return fail(StStatus::Data, format!("need at least 2 options, got {n_options}"));
        }
        if out_len < n_options {
            return fail(
                StStatus::BufferTooSmall,
                format!("out_len {out_len} is smaller than n_options {n_options}"),
            );
        }
        let scorer = &*scorer;
        let question = match text(question, "question") {
            Ok(q) => q,
            Err(s) => return s,
        };
        let context = match text(context, "context") {
            Ok(c) => c,
            Err(s) => return s,
        };
        let mut opts = Vec::with_capacity(n_options);
        for i in 0..n_options {
            match text(*options.add(i), &format!("option {i}")) {
                Ok(o) => opts.push(o.to_string()),
                Err(s) => return s,
            }
        }
        let ck = &scorer.ckpt;
        let enc = encode_mc_parts(question, &opts, context, &ck.vocab, ck.max_len);
        match forward_mc(&ck.params, &enc) {
            Ok(dist) => {
                std::slice::from_raw_parts_mut(out_probs, n_options).copy_from_slice(&dist.probs);
                StStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Releases a scorer; null is ignored.
///
/// # Safety
/// `scorer` must come from [`st_scorer_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn st_scorer_free(scorer: *mut StScorer) {
    if !scorer.is_null() {
        drop(Box::from_raw(scorer));
    }
}

/// Character-level F1 in [0, 1] after answer normalization.
///
/// # Safety
/// `pred` and `gold` must be nul-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn st_char_f1(pred: *const c_char, gold: *const c_char, out: *mut f64) -> StStatus {
    guard(|| {
        if out.is_null() {
            return fail(StStatus::NullPointer, "out is null");
        }
        match (text(pred, "pred"), text(gold, "gold")) {
            (Ok(p), Ok(g)) => {
                *out = metrics::char_f1(p, g);
                StStatus::Ok
            }
            (Err(s), _) | (_, Err(s)) => s,
        }
    })
}

/// 1 if the normalized strings are equal, else 0.
///
/// # Safety
/// `pred` and `gold` must be nul-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn st_exact_match(pred: *const c_char, gold: *const c_char, out: *mut u8) -> StStatus {
    guard(|| {
        if out.is_null() {
            return fail(StStatus::NullPointer, "out is null");
        }
        match (text(pred, "pred"), text(gold, "gold")) {
            (Ok(p), Ok(g)) => {
                *out = metrics::exact_match(p, g);
                StStatus::Ok
            }
            (Err(s), _) | (_, Err(s)) => s,
        }
    })
}
