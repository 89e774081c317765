//! C ABI over the `usp` library.
//!
//! Tables live behind an opaque [`UspTable`] handle created by
//! `usp_table_new` or `usp_table_from_dataset` and released with
//! `usp_table_free`. Every fallible call returns a [`UspStatus`]; on failure
//! `usp_last_error_message` describes the most recent error on the calling
//! thread. Enumerated arguments are passed as `uint32_t` using the
//! `USP_METHOD_*`, `USP_MODE_*`, `USP_STATISTIC_*`, `USP_CLASSIC_TEST_*` and
//! `USP_DATASET_*` constants.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use usp::asymptotics::{asymptotic_size, ClassicTest};
use usp::estimators::statistic;
use usp::perm::{run_test, Method, Mode, PermutationConfig, TiePolicy};
use usp::{ContingencyTable, EmbeddedDataset, StatisticKind, UspError};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UspStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidTable = 2,
    InvalidArgument = 3,
    UndefinedStatistic = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UspMethod {
    Usp = 0,
    Pearson = 1,
    G = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UspMode {
    Permutation = 0,
    Classic = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UspStatistic {
    Pearson = 0,
    G = 1,
    Usp = 2,
    Dhat = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UspClassicTest {
    Pearson = 0,
    G = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UspDataset {
    Marital = 0,
    EyeColour = 1,
}

/// Outcome of `usp_run_test`. `permutations` is 0 in classic mode and `df`
/// is 0 in permutation mode.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UspTestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub permutations: u64,
    pub df: u64,
    pub seed: u64,
}

/// Opaque contingency table handle.
pub struct UspTable {
    inner: ContingencyTable,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: UspStatus, msg: impl Into<String>) -> UspStatus {
    set_last_error(msg);
    status
}

fn status_of(err: &UspError) -> UspStatus {
    match err {
        UspError::UndefinedStatistic(_) => UspStatus::UndefinedStatistic,
        UspError::NegativeCount { .. }
        | UspError::EmptyTable
        | UspError::RaggedTable { .. }
        | UspError::EmptySample
        | UspError::SampleTooSmall { .. } => UspStatus::InvalidTable,
        _ => UspStatus::InvalidArgument,
    }
}

fn from_lib(err: UspError) -> UspStatus {
    fail(status_of(&err), err.to_string())
}

fn guard<F: FnOnce() -> UspStatus>(f: F) -> UspStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(UspStatus::Panic, "internal panic"))
}

fn method_of(v: u32) -> Option<Method> {
    Some(match v {
        0 => Method::Usp,
        1 => Method::Pearson,
        2 => Method::G,
        _ => return None,
    })
}

fn mode_of(v: u32) -> Option<Mode> {
    Some(match v {
        0 => Mode::Permutation,
        1 => Mode::Classic,
        _ => return None,
    })
}

fn statistic_of(v: u32) -> Option<StatisticKind> {
    Some(match v {
        0 => StatisticKind::Pearson,
        1 => StatisticKind::G,
        2 => StatisticKind::Usp,
        3 => StatisticKind::Dhat,
        _ => return None,
    })
}

fn classic_of(v: u32) -> Option<ClassicTest> {
    Some(match v {
        0 => ClassicTest::Pearson,
        1 => ClassicTest::G,
        _ => return None,
    })
}

fn dataset_of(v: u32) -> Option<EmbeddedDataset> {
    Some(match v {
        0 => EmbeddedDataset::Marital,
        1 => EmbeddedDataset::EyeColour,
        _ => return None,
    })
}

fn bad_enum(name: &str, v: u32) -> UspStatus {
    fail(UspStatus::InvalidArgument, format!("unknown {name} value {v}"))
}

fn store_table(table: ContingencyTable, out: *mut *mut UspTable) -> UspStatus {
    let handle = Box::new(UspTable { inner: table });
    // SAFETY: caller checked `out` for null.
    unsafe { *out = Box::into_raw(handle) };
    UspStatus::Ok
}

/// Creates a table from `rows * cols` row-major counts.
///
/// # Safety
/// `counts` must point to `rows * cols` readable values and `out` must be
/// writable. The handle written to `out` must be released with
/// `usp_table_free`.
#[no_mangle]
pub unsafe extern "C" fn usp_table_new(
    rows: usize,
    cols: usize,
    counts: *const u64,
    out: *mut *mut UspTable,
) -> UspStatus {
    guard(|| {
        if out.is_null() || (counts.is_null() && rows * cols > 0) {
            return fail(UspStatus::NullPointer, "null pointer argument");
        }
        let Some(len) = rows.checked_mul(cols) else {
            return fail(UspStatus::InvalidTable, "table dimensions overflow");
        };
        let cells = if len == 0 {
            Vec::new()
        } else {
            unsafe { std::slice::from_raw_parts(counts, len) }.to_vec()
        };
        match ContingencyTable::from_counts(rows, cols, cells) {
            Ok(t) => store_table(t, out),
            Err(e) => from_lib(e),
        }
    })
}

/// Creates a handle holding one of the built-in tables.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn usp_table_from_dataset(dataset: u32, out: *mut *mut UspTable) -> UspStatus {
    guard(|| {
        if out.is_null() {
            return fail(UspStatus::NullPointer, "null pointer argument");
        }
        match dataset_of(dataset) {
            Some(d) => store_table(d.table(), out),
            None => bad_enum("dataset", dataset),
        }
    })
}

/// Releases a table handle. Null is ignored.
///
/// # Safety
/// `table` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn usp_table_free(table: *mut UspTable) {
    if !table.is_null() {
        drop(unsafe { Box::from_raw(table) });
    }
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn usp_table_rows(table: *const UspTable) -> usize {
    unsafe { table.as_ref() }.map_or(0, |t| t.inner.rows())
}

/// Number of columns, or 0 for a null handle.
///
/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn usp_table_cols(table: *const UspTable) -> usize {
    unsafe { table.as_ref() }.map_or(0, |t| t.inner.cols())
}

/// Total count `n`, or 0 for a null handle.
///
/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn usp_table_total(table: *const UspTable) -> u64 {
    unsafe { table.as_ref() }.map_or(0, |t| t.inner.n())
}

/// Evaluates a statistic (`USP_STATISTIC_*`) on a table.
///
/// # Safety
/// `table` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn usp_statistic(table: *const UspTable, kind: u32, out: *mut f64) -> UspStatus {
    guard(|| {
        let Some(t) = (unsafe { table.as_ref() }) else {
            return fail(UspStatus::NullPointer, "null table handle");
        };
        if out.is_null() {
            return fail(UspStatus::NullPointer, "null output pointer");
        }
        let Some(kind) = statistic_of(kind) else {
            return bad_enum("statistic", kind);
        };
        match statistic(kind, &t.inner) {
            Ok(v) => {
                unsafe { *out = v };
                UspStatus::Ok
            }
            Err(e) => from_lib(e),
        }
    })
}

/// Runs an independence test. `permutations` is ignored in classic mode.
/// With `conservative_ties` false, ties are broken at random.
///
/// # Safety
/// `table` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn usp_run_test(
    table: *const UspTable,
    method: u32,
    mode: u32,
    permutations: u64,
    alpha: f64,
    seed: u64,
    conservative_ties: bool,
    out: *mut UspTestResult,
) -> UspStatus {
    guard(|| {
        let Some(t) = (unsafe { table.as_ref() }) else {
            return fail(UspStatus::NullPointer, "null table handle");
        };
        if out.is_null() {
            return fail(UspStatus::NullPointer, "null output pointer");
        }
        let Some(method) = method_of(method) else {
            return bad_enum("method", method);
        };
        let Some(mode) = mode_of(mode) else {
            return bad_enum("mode", mode);
        };
        let config = PermutationConfig {
            permutations: if mode == Mode::Classic { permutations.max(1) } else { permutations },
            alpha,
            seed,
            tie_policy: if conservative_ties {
                TiePolicy::Conservative
            } else {
                TiePolicy::Randomized
            },
        };
        match run_test(&t.inner, method, mode, &config) {
            Ok(r) => {
                unsafe {
                    *out = UspTestResult {
                        statistic: r.statistic,
                        p_value: r.p_value,
                        reject: r.reject,
                        alpha: r.alpha,
                        permutations: r.permutations.unwrap_or(0),
                        df: r.df.unwrap_or(0),
                        seed: r.seed,
                    }
                };
                UspStatus::Ok
            }
            Err(e) => from_lib(e),
        }
    })
}

/// Limiting size of a classic test (`USP_CLASSIC_TEST_*`) in the sparse 2x2
/// regime with scale `lambda`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn usp_asymptotic_size(test: u32, lambda: f64, alpha: f64, out: *mut f64) -> UspStatus {
    guard(|| {
        if out.is_null() {
            return fail(UspStatus::NullPointer, "null output pointer");
        }
        let Some(test) = classic_of(test) else {
            return bad_enum("classic test", test);
        };
        match asymptotic_size(test, lambda, alpha) {
            Ok(v) => {
                unsafe { *out = v };
                UspStatus::Ok
            }
            Err(e) => from_lib(e),
        }
    })
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn usp_status_message(status: UspStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        UspStatus::Ok => b"ok\0",
        UspStatus::NullPointer => b"null pointer argument\0",
        UspStatus::InvalidTable => b"invalid table\0",
        UspStatus::InvalidArgument => b"invalid argument\0",
        UspStatus::UndefinedStatistic => b"statistic undefined for this table\0",
        UspStatus::Panic => b"internal panic\0",
    };
    s.as_ptr().cast()
}

/// Message for the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn usp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}
