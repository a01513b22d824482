//! C ABI over refsel. Objects cross the boundary as opaque handles that
//! the caller frees with the matching `_free` function. Every fallible call
//! returns a status code; on failure the message is available from
//! [`refsel_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString, OsString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use refsel::corpus::{parse_corpus, parse_corpus_str, CorpusSplit, SplitName};
use refsel::models::{gradcheck_suite, load_model, Model};
use refsel::training::{evaluate, predict};
use refsel::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefselStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Validation = 4,
    Config = 5,
    Numerical = 6,
    BufferTooSmall = 7,
    Other = 8,
    Panic = 9,
}

/// A parsed corpus split.
pub struct RefselSplit(CorpusSplit);

/// A trained model loaded from a checkpoint directory.
pub struct RefselModel(Model);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(e: &Error) -> RefselStatus {
    match e {
        Error::Io { .. } => RefselStatus::Io,
        Error::Malformed { .. } | Error::Invariant { .. } | Error::DuplicateDoc(_) | Error::EmptySplit => {
            RefselStatus::Validation
        }
        Error::Config(_) => RefselStatus::Config,
        Error::Numerical(_) => RefselStatus::Numerical,
        _ => RefselStatus::Other,
    }
}

fn fail(status: RefselStatus, message: impl Into<String>) -> RefselStatus {
    set_error(message);
    status
}

/// Runs `body`, turning errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), RefselStatus>) -> RefselStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => RefselStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(RefselStatus::Panic, "panic inside refsel"),
    }
}

fn lift<T>(r: refsel::Result<T>) -> Result<T, RefselStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, RefselStatus> {
    if p.is_null() {
        return Err(fail(RefselStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(RefselStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), RefselStatus> {
    if p.is_null() {
        Err(fail(RefselStatus::NullArgument, format!("{name} is null")))
    } else {
        Ok(())
    }
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn refsel_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn refsel_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a JSONL corpus file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn refsel_split_load(path: *const c_char, out: *mut *mut RefselSplit) -> RefselStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = str_arg(path, "path")?;
        let split = lift(parse_corpus(path, SplitName::Test))?;
        *out = Box::into_raw(Box::new(RefselSplit(split)));
        Ok(())
    })
}

/// Parses JSONL corpus text held in memory.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn refsel_split_parse(text: *const c_char, out: *mut *mut RefselSplit) -> RefselStatus {
    guard(|| {
        non_null(out, "out")?;
        let text = str_arg(text, "text")?;
        let split = lift(parse_corpus_str(text, SplitName::Test))?;
        *out = Box::into_raw(Box::new(RefselSplit(split)));
        Ok(())
    })
}

/// # Safety
/// `split` must come from `refsel_split_load` or `refsel_split_parse`, or be null.
#[no_mangle]
pub unsafe extern "C" fn refsel_split_free(split: *mut RefselSplit) {
    if !split.is_null() {
        drop(Box::from_raw(split));
    }
}

/// # Safety
/// `split` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn refsel_split_document_count(split: *const RefselSplit) -> usize {
    split.as_ref().map_or(0, |s| s.0.documents.len())
}

/// # Safety
/// `split` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn refsel_split_mention_count(split: *const RefselSplit) -> usize {
    split.as_ref().map_or(0, |s| s.0.mention_count())
}

/// Loads a model checkpoint directory.
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn refsel_model_load(dir: *const c_char, out: *mut *mut RefselModel) -> RefselStatus {
    guard(|| {
        non_null(out, "out")?;
        let dir = str_arg(dir, "dir")?;
        let model = lift(load_model(dir))?;
        *out = Box::into_raw(Box::new(RefselModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must come from `refsel_model_load`, or be null.
#[no_mangle]
pub unsafe extern "C" fn refsel_model_free(model: *mut RefselModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of output classes of the model's label scheme.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn refsel_model_class_count(model: *const RefselModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.scheme().num_classes())
}

/// Predicted class of every mention in corpus order. `capacity` is the
/// length of `labels`; `written` receives the mention count, also when the
/// buffer is too small.
///
/// # Safety
/// Handles must be live; `labels` must hold `capacity` elements and
/// `written` must be valid.
#[no_mangle]
pub unsafe extern "C" fn refsel_model_predict(
    model: *const RefselModel,
    split: *const RefselSplit,
    labels: *mut u32,
    capacity: usize,
    written: *mut usize,
) -> RefselStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(split, "split")?;
        non_null(written, "written")?;
        let predicted = lift(predict(&(*model).0, &(*split).0))?;
        *written = predicted.len();
        if predicted.len() > capacity {
            return Err(fail(
                RefselStatus::BufferTooSmall,
                format!("need {} labels, buffer holds {capacity}", predicted.len()),
            ));
        }
        if !predicted.is_empty() {
            non_null(labels, "labels")?;
            for (i, &p) in predicted.iter().enumerate() {
                *labels.add(i) = p as u32;
            }
        }
        Ok(())
    })
}

/// Macro-F1 and accuracy of the model on a split.
///
/// # Safety
/// Handles must be live and the out pointers valid.
#[no_mangle]
pub unsafe extern "C" fn refsel_model_evaluate(
    model: *const RefselModel,
    split: *const RefselSplit,
    macro_f1: *mut f64,
    accuracy: *mut f64,
) -> RefselStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(split, "split")?;
        non_null(macro_f1, "macro_f1")?;
        non_null(accuracy, "accuracy")?;
        let m = lift(evaluate(&(*model).0, &(*split).0))?;
        *macro_f1 = m.macro_f1;
        *accuracy = m.accuracy;
        Ok(())
    })
}

/// Runs the finite-difference gradient checks. Returns `Numerical` when any
/// check exceeds `tolerance`; `max_error` receives the worst relative error
/// either way.
///
/// # Safety
/// `max_error` must be valid.
#[no_mangle]
pub unsafe extern "C" fn refsel_gradcheck(seed: u64, tolerance: f64, max_error: *mut f64) -> RefselStatus {
    guard(|| {
        non_null(max_error, "max_error")?;
        let reports = lift(gradcheck_suite(seed, tolerance))?;
        *max_error = reports.iter().map(|r| r.max_relative_error).fold(0.0, f64::max);
        match reports.iter().find(|r| !r.passed) {
            Some(r) => Err(fail(
                RefselStatus::Numerical,
                format!(
                    "{}: relative error {:e} above {tolerance:e}",
                    r.label, r.max_relative_error
                ),
            )),
            None => Ok(()),
        }
    })
}

/// Runs the command-line interface with `argv[0..argc]` and returns its
/// exit code. `argv[0]` is the program name.
///
/// # Safety
/// `argv` must hold `argc` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn refsel_cli_run(argc: c_int, argv: *const *const c_char) -> c_int {
    if argv.is_null() || argc < 1 {
        set_error("argv is empty");
        return refsel::cli::EXIT_USAGE;
    }
    let args: Vec<OsString> = (0..argc as usize)
        .map(|i| OsString::from(CStr::from_ptr(*argv.add(i)).to_string_lossy().into_owned()))
        .collect();
    catch_unwind(|| refsel::cli::run(args)).unwrap_or_else(|_| {
        set_error("panic inside refsel");
        refsel::cli::EXIT_USAGE
    })
}
