//! C bindings for the `autkc` crate.
//!
//! Every fallible function returns an [`AutkcStatus`]; on failure a message
//! is kept per thread and can be read with [`autkc_last_error`]. Results are
//! written through out-pointers, which are left untouched on failure.
//! Handles ([`AutkcScoreSet`], [`AutkcLoss`]) are created by the library and
//! must be released with the matching `_free` function.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use autkc::losses::softmax;
use autkc::metrics::{aerr_k, autkc_up, enumerate_comparison, topk_curve};
use autkc::ranking::worst_case_rank;
use autkc::{Error, LossSpec, ScoredSet};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AutkcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfRange = 3,
    NonFinite = 4,
    InvalidLoss = 5,
    ClassMismatch = 6,
    Panic = 7,
}

/// Pair counts comparing AUTKC with top-k accuracy.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AutkcComparison {
    pub r: u64,
    pub s: u64,
    pub p: u64,
    pub q: u64,
}

/// A growing set of scored samples with one class count.
pub struct AutkcScoreSet {
    inner: ScoredSet,
}

/// A parsed loss such as `autkc-exp@5`.
pub struct AutkcLoss {
    spec: LossSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> AutkcStatus {
    match e {
        Error::NonFinite(_) => AutkcStatus::NonFinite,
        Error::OutOfRange { .. } | Error::LabelOutOfRange { .. } | Error::TooFewClasses(_) => AutkcStatus::OutOfRange,
        Error::InvalidLoss { .. } => AutkcStatus::InvalidLoss,
        Error::ClassMismatch { .. } => AutkcStatus::ClassMismatch,
        _ => AutkcStatus::InvalidArgument,
    }
}

struct Fail(AutkcStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(AutkcStatus::NullPointer, format!("{what} is NULL"))
}

/// Runs `f`, records any error or panic, and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> AutkcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AutkcStatus::Ok,
        Ok(Err(Fail(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            AutkcStatus::Panic
        }
    }
}

unsafe fn input<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

/// Score arrays must be finite; NaN would make every rank meaningless.
unsafe fn scores<'a>(ptr: *const f64, len: usize) -> Result<&'a [f64], Fail> {
    let s = input(ptr, len, "scores")?;
    if let Some(i) = s.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i).into());
    }
    Ok(s)
}

unsafe fn output<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    ptr.as_mut().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn autkc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn autkc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Rank of `label` with every tie broken against it (1 = top).
#[no_mangle]
pub unsafe extern "C" fn autkc_worst_case_rank(
    scores_ptr: *const f64,
    classes: usize,
    label: usize,
    out_rank: *mut usize,
) -> AutkcStatus {
    guard(|| {
        let s = scores(scores_ptr, classes)?;
        let out = output(out_rank, "out_rank")?;
        *out = worst_case_rank(s, label)?;
        Ok(())
    })
}

/// Average top-k error over `k = 1..=big_k` for one sample.
#[no_mangle]
pub unsafe extern "C" fn autkc_aerr(
    scores_ptr: *const f64,
    classes: usize,
    label: usize,
    big_k: usize,
    out: *mut f64,
) -> AutkcStatus {
    guard(|| {
        let s = scores(scores_ptr, classes)?;
        let out = output(out, "out")?;
        *out = aerr_k(s, label, big_k)?;
        Ok(())
    })
}

/// Writes `classes` probabilities to `out`.
#[no_mangle]
pub unsafe extern "C" fn autkc_softmax(scores_ptr: *const f64, classes: usize, out: *mut f64) -> AutkcStatus {
    guard(|| {
        let s = scores(scores_ptr, classes)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let u = softmax(s);
        slice::from_raw_parts_mut(out, classes).copy_from_slice(&u);
        Ok(())
    })
}

/// Enumerated pair counts for `1 <= k < big_k <= classes`.
#[no_mangle]
pub unsafe extern "C" fn autkc_compare_metrics(
    classes: usize,
    k: usize,
    big_k: usize,
    out: *mut AutkcComparison,
) -> AutkcStatus {
    guard(|| {
        let out = output(out, "out")?;
        let c = enumerate_comparison(classes, k, big_k)?;
        *out = AutkcComparison {
            r: c.r,
            s: c.s,
            p: c.p,
            q: c.q,
        };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn autkc_score_set_new(classes: usize, out: *mut *mut AutkcScoreSet) -> AutkcStatus {
    guard(|| {
        let out = output(out, "out")?;
        let inner = ScoredSet::new(classes)?;
        *out = Box::into_raw(Box::new(AutkcScoreSet { inner }));
        Ok(())
    })
}

/// Appends one sample; `classes` must match the set.
#[no_mangle]
pub unsafe extern "C" fn autkc_score_set_push(
    set: *mut AutkcScoreSet,
    scores_ptr: *const f64,
    classes: usize,
    label: usize,
) -> AutkcStatus {
    guard(|| {
        let set = output(set, "set")?;
        let s = scores(scores_ptr, classes)?;
        set.inner.push(s, label)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn autkc_score_set_len(set: *const AutkcScoreSet, out: *mut usize) -> AutkcStatus {
    guard(|| {
        let set = set.as_ref().ok_or_else(|| null("set"))?;
        *output(out, "out")? = set.inner.len();
        Ok(())
    })
}

/// Dataset AUTKC↑ at cutoff `big_k`.
#[no_mangle]
pub unsafe extern "C" fn autkc_score_set_autkc_up(
    set: *const AutkcScoreSet,
    big_k: usize,
    out: *mut f64,
) -> AutkcStatus {
    guard(|| {
        let set = set.as_ref().ok_or_else(|| null("set"))?;
        let out = output(out, "out")?;
        *out = autkc_up(&set.inner, big_k)?;
        Ok(())
    })
}

/// Writes top-k accuracy for `k = 1..=k_max` into `out[0..k_max]`.
#[no_mangle]
pub unsafe extern "C" fn autkc_score_set_topk_curve(
    set: *const AutkcScoreSet,
    k_max: usize,
    out: *mut f64,
) -> AutkcStatus {
    guard(|| {
        let set = set.as_ref().ok_or_else(|| null("set"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let acc = topk_curve(&set.inner, k_max)?.acc();
        slice::from_raw_parts_mut(out, k_max).copy_from_slice(&acc);
        Ok(())
    })
}

/// Releases a set; NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn autkc_score_set_free(set: *mut AutkcScoreSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Parses a loss spec such as `ce`, `l5@3` or `autkc-exp@5`.
#[no_mangle]
pub unsafe extern "C" fn autkc_loss_parse(spec: *const c_char, out: *mut *mut AutkcLoss) -> AutkcStatus {
    guard(|| {
        if spec.is_null() {
            return Err(null("spec"));
        }
        let out = output(out, "out")?;
        let text = CStr::from_ptr(spec)
            .to_str()
            .map_err(|_| Fail(AutkcStatus::InvalidLoss, "loss spec is not UTF-8".into()))?;
        let spec: LossSpec = text.parse()?;
        *out = Box::into_raw(Box::new(AutkcLoss { spec }));
        Ok(())
    })
}

/// Loss value at raw `scores`; the gradient is written to `grad` (length
/// `classes`) unless it is NULL.
#[no_mangle]
pub unsafe extern "C" fn autkc_loss_eval(
    loss: *const AutkcLoss,
    scores_ptr: *const f64,
    classes: usize,
    label: usize,
    out_value: *mut f64,
    grad: *mut f64,
) -> AutkcStatus {
    guard(|| {
        let loss = loss.as_ref().ok_or_else(|| null("loss"))?;
        let s = scores(scores_ptr, classes)?;
        let value = output(out_value, "out_value")?;
        loss.spec.validate(classes)?;
        if label >= classes {
            return Err(Error::LabelOutOfRange { label, classes }.into());
        }
        let r = loss.spec.evaluate(s, label)?;
        *value = r.value;
        if !grad.is_null() {
            slice::from_raw_parts_mut(grad, classes).copy_from_slice(&r.grad);
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn autkc_loss_free(loss: *mut AutkcLoss) {
    if !loss.is_null() {
        drop(Box::from_raw(loss));
    }
}
