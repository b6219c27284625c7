//! C ABI over the summarization pipeline: load a checkpoint behind an
//! opaque handle, score or summarize reviews, compute ROUGE. Every
//! function returns a status code; the last failure's message is
//! retrievable per thread via `mpsum_last_error_message`.
//!
//! Memory rules: strings returned through out-parameters are freed with
//! `mpsum_string_free`, score arrays with `mpsum_scores_free`, models
//! with `mpsum_model_free`.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::path::Path;

use libc::{c_char, c_double, c_int};

use mpsum_core::checkpoint::Checkpoint;
use mpsum_core::error::Error;
use mpsum_core::rouge::{rouge_l, rouge_n, rouge_tokens};
use mpsum_core::text::{preprocess, split_sentences, summarize, Paraphraser, Review};

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpsumStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The checkpoint file could not be read.
    Io = 3,
    /// The checkpoint was rejected (wrong tag or corrupted weights).
    BadCheckpoint = 4,
    /// An argument was outside its valid range.
    InvalidArgument = 5,
    /// The review contained no sentences.
    EmptyReview = 6,
    Internal = 7,
}

/// Opaque handle to a loaded checkpoint.
pub struct MpsumModel {
    checkpoint: Checkpoint,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let cstring = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(cstring));
}

fn status_for(err: &Error) -> MpsumStatus {
    match err {
        Error::Io(_) => MpsumStatus::Io,
        Error::BadCheckpoint(_) | Error::Json(_) => MpsumStatus::BadCheckpoint,
        Error::InvalidConfig(_) => MpsumStatus::InvalidArgument,
        Error::EmptyReview => MpsumStatus::EmptyReview,
        _ => MpsumStatus::Internal,
    }
}

fn fail(err: Error) -> MpsumStatus {
    let status = status_for(&err);
    set_error(err.to_string());
    status
}

unsafe fn required_str<'a>(ptr: *const c_char) -> Result<&'a str, MpsumStatus> {
    if ptr.is_null() {
        set_error("null pointer argument".into());
        return Err(MpsumStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8".into());
        MpsumStatus::InvalidUtf8
    })
}

/// Load a checkpoint file into a new model handle.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out_model` a valid
/// pointer; on `MPSUM_STATUS_OK` the caller owns the handle and must
/// release it with `mpsum_model_free`.
#[no_mangle]
pub unsafe extern "C" fn mpsum_model_load(
    path: *const c_char,
    out_model: *mut *mut MpsumModel,
) -> MpsumStatus {
    if out_model.is_null() {
        set_error("out_model is null".into());
        return MpsumStatus::NullArgument;
    }
    *out_model = std::ptr::null_mut();
    let path = match required_str(path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    match Checkpoint::load(Path::new(path)) {
        Ok(checkpoint) => {
            *out_model = Box::into_raw(Box::new(MpsumModel { checkpoint }));
            MpsumStatus::Ok
        }
        Err(err) => fail(err),
    }
}

/// Release a model handle. Null is a no-op.
///
/// # Safety
/// `model` must have come from `mpsum_model_load` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mpsum_model_free(model: *mut MpsumModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Summarize a raw review. `top_k <= 0` means threshold selection;
/// `threshold` must lie in [0, 1]. The summary lands in `out_summary`
/// (free with `mpsum_string_free`).
///
/// # Safety
/// `model`, `review_text`, and `out_summary` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn mpsum_summarize(
    model: *const MpsumModel,
    review_text: *const c_char,
    threshold: c_double,
    top_k: c_int,
    out_summary: *mut *mut c_char,
) -> MpsumStatus {
    if model.is_null() || out_summary.is_null() {
        set_error("null pointer argument".into());
        return MpsumStatus::NullArgument;
    }
    *out_summary = std::ptr::null_mut();
    let text = match required_str(review_text) {
        Ok(t) => t,
        Err(status) => return status,
    };
    if !(0.0..=1.0).contains(&threshold) {
        set_error(format!("threshold must be in [0, 1], got {threshold}"));
        return MpsumStatus::InvalidArgument;
    }
    let model = &*model;
    let review = Review {
        review_id: "ffi".into(),
        text: text.to_string(),
        summary: None,
    };
    let top_k = (top_k > 0).then_some(top_k as usize);
    match summarize(
        &review,
        &model.checkpoint,
        &Paraphraser::Identity,
        threshold,
        top_k,
        1,
    ) {
        Ok(result) => match CString::new(result.final_summary) {
            Ok(s) => {
                *out_summary = s.into_raw();
                MpsumStatus::Ok
            }
            Err(_) => {
                set_error("summary contained an interior NUL".into());
                MpsumStatus::Internal
            }
        },
        Err(err) => fail(err),
    }
}

/// Relevance probability for every sentence of a raw review, in review
/// order. On success `*out_scores` points at `*out_len` doubles; free
/// with `mpsum_scores_free`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mpsum_score_sentences(
    model: *const MpsumModel,
    review_text: *const c_char,
    out_scores: *mut *mut c_double,
    out_len: *mut usize,
) -> MpsumStatus {
    if model.is_null() || out_scores.is_null() || out_len.is_null() {
        set_error("null pointer argument".into());
        return MpsumStatus::NullArgument;
    }
    *out_scores = std::ptr::null_mut();
    *out_len = 0;
    let text = match required_str(review_text) {
        Ok(t) => t,
        Err(status) => return status,
    };
    let model = &*model;
    let texts: Vec<String> = split_sentences(text).iter().map(|s| preprocess(s)).collect();
    if texts.is_empty() {
        return fail(Error::EmptyReview);
    }
    let review_repr = texts.join(" ");
    let mut scores = Vec::with_capacity(texts.len());
    for sentence in &texts {
        match model.checkpoint.score_sentence(&review_repr, sentence) {
            Ok(p) => scores.push(p),
            Err(err) => return fail(err),
        }
    }
    let boxed = scores.into_boxed_slice();
    *out_len = boxed.len();
    *out_scores = Box::into_raw(boxed) as *mut c_double;
    MpsumStatus::Ok
}

/// ROUGE-1 / ROUGE-2 / ROUGE-L F1 between two texts (pipeline
/// tokenization).
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mpsum_rouge_f1(
    candidate: *const c_char,
    reference: *const c_char,
    out_rouge1: *mut c_double,
    out_rouge2: *mut c_double,
    out_rouge_l: *mut c_double,
) -> MpsumStatus {
    if out_rouge1.is_null() || out_rouge2.is_null() || out_rouge_l.is_null() {
        set_error("null pointer argument".into());
        return MpsumStatus::NullArgument;
    }
    let cand = match required_str(candidate) {
        Ok(t) => t,
        Err(status) => return status,
    };
    let refr = match required_str(reference) {
        Ok(t) => t,
        Err(status) => return status,
    };
    let cand_tokens = rouge_tokens(cand);
    let ref_tokens = rouge_tokens(refr);
    *out_rouge1 = rouge_n(&cand_tokens, &ref_tokens, 1).f1;
    *out_rouge2 = rouge_n(&cand_tokens, &ref_tokens, 2).f1;
    *out_rouge_l = rouge_l(&cand_tokens, &ref_tokens).f1;
    MpsumStatus::Ok
}

/// Free a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must have been returned by this library and not freed before.
#[no_mangle]
pub unsafe extern "C" fn mpsum_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Free a score array returned by `mpsum_score_sentences`.
///
/// # Safety
/// `scores`/`len` must match a successful `mpsum_score_sentences` call.
#[no_mangle]
pub unsafe extern "C" fn mpsum_scores_free(scores: *mut c_double, len: usize) {
    if !scores.is_null() {
        drop(Box::from_raw(std::slice::from_raw_parts_mut(scores, len)));
    }
}

/// The last error message raised on this thread, or null if none. The
/// caller owns the returned string (free with `mpsum_string_free`).
#[no_mangle]
pub extern "C" fn mpsum_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(msg) => msg.clone().into_raw(),
        None => std::ptr::null_mut(),
    })
}

/// The checkpoint format tag this library reads.
#[no_mangle]
pub extern "C" fn mpsum_format_tag() -> *const c_char {
    // NUL-terminated static storage.
    concat!("mpsum_checkpoint_v1", "\0").as_ptr() as *const c_char
}
