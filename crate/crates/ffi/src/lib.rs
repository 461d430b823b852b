//! C ABI over `levqe`.
//!
//! Every fallible function returns an [`LqStatus`]; on failure the message is
//! kept per thread and read with [`lq_last_error`]. Tag sequences and
//! evaluators are opaque handles released with their `_free` function.
//! Strings returned to the caller are released with [`lq_string_free`].
//! Sentences cross the boundary as UTF-8, whitespace-tokenized C strings.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use levqe::subword::{heuristic_subword_tags, subword_to_word_tags, word_tags};
use levqe::tags::{mcc, sentence_confusion, ConfusionCounts, Metrics, QeTags};
use levqe::{ter_align, Error, FlatTagSeq, Scope, SubwordSeq, Tag, TokenSeq};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LqStatus {
    Ok = 0,
    /// Null pointer, bad UTF-8 or an out-of-range argument.
    InvalidArgument = 1,
    /// Input violates a data invariant (tag layout, lengths, markers).
    Data = 2,
    /// A pluggable component broke its protocol.
    Protocol = 3,
    /// A Rust panic was caught at the boundary.
    Internal = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LqScope {
    All = 0,
    Words = 1,
    Gaps = 2,
}

impl From<LqScope> for Scope {
    fn from(s: LqScope) -> Self {
        match s {
            LqScope::All => Scope::All,
            LqScope::Words => Scope::WordsOnly,
            LqScope::Gaps => Scope::GapsOnly,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LqMetrics {
    pub mcc: f64,
    pub f1_ok: f64,
    pub f1_bad: f64,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

/// Word and gap tags in the alternating `gap, word, ..., gap` layout.
pub struct LqTags(FlatTagSeq);

/// Pooled confusion counts over added sentence pairs.
pub struct LqEvaluator {
    scope: Scope,
    counts: ConfusionCounts,
    sentences: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', "?")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: LqStatus, msg: impl Into<String>) -> LqStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> LqStatus {
    let status = match e.exit_code() {
        3 => LqStatus::Protocol,
        2 => LqStatus::Data,
        _ => LqStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

/// Runs `f` with panics turned into `LqStatus::Internal`.
fn guard(f: impl FnOnce() -> Result<(), LqStatus>) -> LqStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LqStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(LqStatus::Internal, "panic inside levqe"),
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, LqStatus> {
    if p.is_null() {
        return Err(fail(LqStatus::InvalidArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(LqStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, LqStatus> {
    p.as_mut()
        .ok_or_else(|| fail(LqStatus::InvalidArgument, format!("{what} is null")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, LqStatus> {
    p.as_ref()
        .ok_or_else(|| fail(LqStatus::InvalidArgument, format!("{what} is null")))
}

unsafe fn subwords(tokens: *const c_char, marker: *const c_char) -> Result<SubwordSeq, LqStatus> {
    let marker = if marker.is_null() {
        levqe::subword::DEFAULT_MARKER
    } else {
        text(marker, "marker")?
    };
    SubwordSeq::parse(TokenSeq::from_line(text(tokens, "tokens")?), marker).map_err(from_error)
}

fn boxed(tags: FlatTagSeq) -> *mut LqTags {
    Box::into_raw(Box::new(LqTags(tags)))
}

/// Message for the last failure on this thread, or null. Valid until the
/// next `lq_` call on the same thread.
#[no_mangle]
pub extern "C" fn lq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn lq_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Edit cost of turning `hyp` into `reference`, with or without block shifts.
///
/// # Safety
/// String arguments must be valid NUL-terminated strings; `cost` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn lq_edit_cost(
    hyp: *const c_char,
    reference: *const c_char,
    shifts: bool,
    cost: *mut usize,
) -> LqStatus {
    guard(|| {
        let h = TokenSeq::from_line(text(hyp, "hyp")?);
        let r = TokenSeq::from_line(text(reference, "reference")?);
        *out(cost, "cost")? = ter_align(h.tokens(), r.tokens(), shifts).cost;
        Ok(())
    })
}

/// Sentence TER with shifts. Fails on an empty reference.
///
/// # Safety
/// As for [`lq_edit_cost`].
#[no_mangle]
pub unsafe extern "C" fn lq_ter(hyp: *const c_char, reference: *const c_char, ter: *mut f64) -> LqStatus {
    guard(|| {
        let h = TokenSeq::from_line(text(hyp, "hyp")?);
        let r = TokenSeq::from_line(text(reference, "reference")?);
        *out(ter, "ter")? = levqe::ter_score(h.tokens(), r.tokens()).map_err(from_error)?;
        Ok(())
    })
}

/// Reference tags of `mt` against its post-edit `pe`.
///
/// # Safety
/// String arguments must be valid; `tags` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lq_tags_from_pair(mt: *const c_char, pe: *const c_char, tags: *mut *mut LqTags) -> LqStatus {
    guard(|| {
        let m = TokenSeq::from_line(text(mt, "mt")?);
        let p = TokenSeq::from_line(text(pe, "pe")?);
        *out(tags, "tags")? = boxed(word_tags(m.tokens(), p.tokens()));
        Ok(())
    })
}

/// Parses a tag line such as `"OK BAD OK"`.
///
/// # Safety
/// `line` must be valid; `tags` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lq_tags_parse(line: *const c_char, tags: *mut *mut LqTags) -> LqStatus {
    guard(|| {
        let parsed: FlatTagSeq = text(line, "line")?.parse().map_err(from_error)?;
        *out(tags, "tags")? = boxed(parsed);
        Ok(())
    })
}

/// Number of tokens (words or subwords) the tags describe.
///
/// # Safety
/// `tags` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lq_tags_token_count(tags: *const LqTags) -> usize {
    tags.as_ref().map_or(0, |t| t.0.token_count())
}

/// Tag at flat position `index` (even = gap, odd = token): 1 for BAD,
/// 0 for OK.
///
/// # Safety
/// `tags` must be a live handle; `bad` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lq_tags_get(tags: *const LqTags, index: usize, bad: *mut bool) -> LqStatus {
    guard(|| {
        let t = handle(tags, "tags")?;
        let tag = t.0.tags().get(index).ok_or_else(|| {
            fail(
                LqStatus::InvalidArgument,
                format!("index {index} outside {} tags", t.0.tags().len()),
            )
        })?;
        *out(bad, "bad")? = *tag == Tag::Bad;
        Ok(())
    })
}

/// The tag line; release with [`lq_string_free`]. Null on a null handle.
///
/// # Safety
/// `tags` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lq_tags_to_string(tags: *const LqTags) -> *mut c_char {
    match tags.as_ref() {
        Some(t) => CString::new(t.0.to_string()).expect("tag text").into_raw(),
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `tags` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lq_tags_free(tags: *mut LqTags) {
    if !tags.is_null() {
        drop(Box::from_raw(tags));
    }
}

/// Collapses subword tags to word tags. `marker` may be null for `@@`.
///
/// # Safety
/// String arguments must be valid; `subword_tags` must be live; `word_tags`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn lq_subword_to_word(
    tokens: *const c_char,
    marker: *const c_char,
    subword_tags: *const LqTags,
    word_tags: *mut *mut LqTags,
) -> LqStatus {
    guard(|| {
        let sw = subwords(tokens, marker)?;
        let q = handle(subword_tags, "subword_tags")?;
        *out(word_tags, "word_tags")? = boxed(subword_to_word_tags(&sw, &q.0).map_err(from_error)?);
        Ok(())
    })
}

/// Subword tags from naive subword tags and word tags that collapse back to
/// the word tags exactly. `marker` may be null for `@@`.
///
/// # Safety
/// As for [`lq_subword_to_word`].
#[no_mangle]
pub unsafe extern "C" fn lq_heuristic_subword(
    tokens: *const c_char,
    marker: *const c_char,
    naive_tags: *const LqTags,
    word_tags: *const LqTags,
    subword_tags: *mut *mut LqTags,
) -> LqStatus {
    guard(|| {
        let sw = subwords(tokens, marker)?;
        let naive = handle(naive_tags, "naive_tags")?;
        let words = handle(word_tags, "word_tags")?;
        let q = heuristic_subword_tags(&sw, &naive.0, &words.0).map_err(from_error)?;
        *out(subword_tags, "subword_tags")? = boxed(q);
        Ok(())
    })
}

/// MCC of raw confusion counts (BAD positive). Fails when all are zero.
///
/// # Safety
/// `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lq_mcc(tp: u64, fp: u64, tn: u64, fn_: u64, value: *mut f64) -> LqStatus {
    guard(|| {
        *out(value, "value")? = mcc(&ConfusionCounts::new(tp, fp, tn, fn_)).map_err(from_error)?;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn lq_evaluator_new(scope: LqScope) -> *mut LqEvaluator {
    Box::into_raw(Box::new(LqEvaluator {
        scope: scope.into(),
        counts: ConfusionCounts::default(),
        sentences: 0,
    }))
}

/// Adds one sentence's predicted and gold tags to the pool.
///
/// # Safety
/// All handles must be live.
#[no_mangle]
pub unsafe extern "C" fn lq_evaluator_add(ev: *mut LqEvaluator, pred: *const LqTags, gold: *const LqTags) -> LqStatus {
    guard(|| {
        let ev = out(ev, "evaluator")?;
        let p = QeTags::from(&handle(pred, "pred")?.0);
        let g = QeTags::from(&handle(gold, "gold")?.0);
        let c = sentence_confusion(&p, &g, ev.scope, ev.sentences).map_err(from_error)?;
        ev.counts = ev.counts + c;
        ev.sentences += 1;
        Ok(())
    })
}

/// Pooled MCC, F1-OK, F1-BAD and counts. Fails if nothing was added.
///
/// # Safety
/// `ev` must be live; `metrics` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lq_evaluator_metrics(ev: *const LqEvaluator, metrics: *mut LqMetrics) -> LqStatus {
    guard(|| {
        let ev = handle(ev, "evaluator")?;
        let m = Metrics::from_counts(ev.counts).map_err(from_error)?;
        *out(metrics, "metrics")? = LqMetrics {
            mcc: m.mcc,
            f1_ok: m.f1_ok,
            f1_bad: m.f1_bad,
            tp: m.counts.tp,
            fp: m.counts.fp,
            tn: m.counts.tn,
            fn_: m.counts.fn_,
        };
        Ok(())
    })
}

/// # Safety
/// `ev` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lq_evaluator_free(ev: *mut LqEvaluator) {
    if !ev.is_null() {
        drop(Box::from_raw(ev));
    }
}
