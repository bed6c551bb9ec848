//! C ABI for the hierarchical sparse solver.
//!
//! Handles are opaque pointers owned by the library; every constructor has a
//! matching `_free`. Functions return an [`HluStatus`] and never unwind
//! across the boundary. `hlu_last_error_message` returns a thread-local
//! description of the most recent failure.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use hlu::{
    factorize, gmres_solve, BlockSparseMatrix, DepthSpec, FactorConfig, FactorStats,
    Factorization, GmresConfig, PartitionStrategy, TruncationRule,
};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HluStatus {
    Ok = 0,
    InvalidArgument = 1,
    ParseError = 2,
    SingularPivot = 3,
    NotConverged = 4,
    InternalPanic = 5,
}

/// Opaque sparse matrix handle.
pub struct HluMatrix {
    inner: BlockSparseMatrix,
}

/// Opaque factorization handle; also carries the build statistics.
pub struct HluFactorization {
    inner: Factorization,
    stats: FactorStats,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(err: &hlu::Error) -> HluStatus {
    match err {
        hlu::Error::SingularPivot { .. } => HluStatus::SingularPivot,
        hlu::Error::MatrixMarket(_) | hlu::Error::Io(_) => HluStatus::ParseError,
        _ => HluStatus::InvalidArgument,
    }
}

fn guarded<F: FnOnce() -> HluStatus>(f: F) -> HluStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic in hlu".into());
            set_error(msg);
            HluStatus::InternalPanic
        }
    }
}

/// Most recent error message on this thread, or null. The pointer is valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hlu_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map(|c| c.as_ptr())
            .unwrap_or(std::ptr::null())
    })
}

/// Build a square sparse matrix from coordinate data. Duplicate coordinates
/// are summed.
///
/// # Safety
/// `rows`, `cols`, `values` must point to `nnz` readable elements and `out`
/// must be a valid location for one pointer.
#[no_mangle]
pub unsafe extern "C" fn hlu_matrix_from_coo(
    n: usize,
    nnz: usize,
    rows: *const usize,
    cols: *const usize,
    values: *const f64,
    out: *mut *mut HluMatrix,
) -> HluStatus {
    if out.is_null() || (nnz > 0 && (rows.is_null() || cols.is_null() || values.is_null())) {
        set_error("null pointer argument".into());
        return HluStatus::InvalidArgument;
    }
    let rows = std::slice::from_raw_parts(rows, nnz);
    let cols = std::slice::from_raw_parts(cols, nnz);
    let values = std::slice::from_raw_parts(values, nnz);
    guarded(|| {
        let entries: Vec<(usize, usize, f64)> = rows
            .iter()
            .zip(cols)
            .zip(values)
            .map(|((&r, &c), &v)| (r, c, v))
            .collect();
        match BlockSparseMatrix::from_coo(n, &entries) {
            Ok(m) => {
                unsafe { *out = Box::into_raw(Box::new(HluMatrix { inner: m })) };
                HluStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Load a coordinate Matrix Market file (real, general or symmetric).
///
/// # Safety
/// `path` must be a valid NUL-terminated string, `out` a valid location.
#[no_mangle]
pub unsafe extern "C" fn hlu_matrix_from_mtx(
    path: *const c_char,
    out: *mut *mut HluMatrix,
) -> HluStatus {
    if path.is_null() || out.is_null() {
        set_error("null pointer argument".into());
        return HluStatus::InvalidArgument;
    }
    let path = match CStr::from_ptr(path).to_str() {
        Ok(p) => p.to_string(),
        Err(_) => {
            set_error("path is not valid UTF-8".into());
            return HluStatus::InvalidArgument;
        }
    };
    guarded(|| match hlu::load_matrix_market(&path) {
        Ok(m) => {
            unsafe { *out = Box::into_raw(Box::new(HluMatrix { inner: m })) };
            HluStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            status_of(&e)
        }
    })
}

/// Dimension of the matrix behind the handle.
///
/// # Safety
/// `m` must be a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn hlu_matrix_n(m: *const HluMatrix) -> usize {
    if m.is_null() {
        return 0;
    }
    (*m).inner.n()
}

/// # Safety
/// `m` must have come from a matrix constructor and not been freed.
#[no_mangle]
pub unsafe extern "C" fn hlu_matrix_free(m: *mut HluMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Compute the hierarchical factorization.
///
/// `rule` selects the truncation criterion: 0 keeps singular values with
/// sigma_k/sigma_0 >= epsilon, 1 uses the running Frobenius criterion.
///
/// # Safety
/// `m` must be a live matrix handle and `out` a valid location.
#[no_mangle]
pub unsafe extern "C" fn hlu_factorize(
    m: *const HluMatrix,
    epsilon: f64,
    rule: i32,
    target_leaf: usize,
    seed: u64,
    out: *mut *mut HluFactorization,
) -> HluStatus {
    if m.is_null() || out.is_null() {
        set_error("null pointer argument".into());
        return HluStatus::InvalidArgument;
    }
    let matrix = &(*m).inner;
    guarded(|| {
        let rule = match rule {
            0 => TruncationRule::RelativeSigma(epsilon),
            1 => TruncationRule::FrobeniusGlobal(epsilon),
            other => {
                set_error(format!("unknown truncation rule {other}"));
                return HluStatus::InvalidArgument;
            }
        };
        let cfg = FactorConfig {
            rule,
            depth: DepthSpec::TargetLeaf(target_leaf.max(1)),
            seed,
            instrument: false,
            partition: PartitionStrategy::GraphBisection,
        };
        match factorize(matrix, &cfg) {
            Ok((fact, stats)) => {
                unsafe {
                    *out = Box::into_raw(Box::new(HluFactorization { inner: fact, stats }))
                };
                HluStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// # Safety
/// `f` must have come from `hlu_factorize` and not been freed.
#[no_mangle]
pub unsafe extern "C" fn hlu_factorization_free(f: *mut HluFactorization) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Direct solve: x = A^-1 b through the factorization.
///
/// # Safety
/// `b` and `x` must point to `n` readable/writable doubles; `f` must be live.
#[no_mangle]
pub unsafe extern "C" fn hlu_solve(
    f: *const HluFactorization,
    b: *const f64,
    x: *mut f64,
    n: usize,
) -> HluStatus {
    if f.is_null() || b.is_null() || x.is_null() {
        set_error("null pointer argument".into());
        return HluStatus::InvalidArgument;
    }
    let fact = &(*f).inner;
    if n != fact.n() {
        set_error(format!("length {n} does not match matrix size {}", fact.n()));
        return HluStatus::InvalidArgument;
    }
    let b = std::slice::from_raw_parts(b, n);
    let x = std::slice::from_raw_parts_mut(x, n);
    guarded(|| match fact.solve(b) {
        Ok(solution) => {
            x.copy_from_slice(&solution);
            HluStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            status_of(&e)
        }
    })
}

/// GMRES on A x = b with the factorization as left preconditioner. Writes
/// the iterate into `x` and the iteration count into `out_iterations`
/// (when non-null). Returns `NotConverged` when the tolerance was not met
/// within `max_iters`.
///
/// # Safety
/// Pointer arguments as in `hlu_solve`; `m` and `f` must be live handles of
/// matching dimension.
#[no_mangle]
pub unsafe extern "C" fn hlu_gmres(
    m: *const HluMatrix,
    f: *const HluFactorization,
    b: *const f64,
    x: *mut f64,
    n: usize,
    tol: f64,
    max_iters: usize,
    out_iterations: *mut usize,
) -> HluStatus {
    if m.is_null() || f.is_null() || b.is_null() || x.is_null() {
        set_error("null pointer argument".into());
        return HluStatus::InvalidArgument;
    }
    let matrix = &(*m).inner;
    let fact = &(*f).inner;
    if n != matrix.n() || n != fact.n() {
        set_error("dimension mismatch between matrix, factorization, and vectors".into());
        return HluStatus::InvalidArgument;
    }
    let b = std::slice::from_raw_parts(b, n);
    let x = std::slice::from_raw_parts_mut(x, n);
    guarded(|| {
        let cfg = GmresConfig {
            tol,
            max_iters: max_iters.max(1),
            restart: None,
        };
        match gmres_solve(matrix, Some(fact), b, &cfg) {
            Ok(result) => {
                x.copy_from_slice(&result.x);
                if !out_iterations.is_null() {
                    unsafe { *out_iterations = result.iterations };
                }
                if result.converged {
                    HluStatus::Ok
                } else {
                    set_error(format!(
                        "gmres stopped at residual {:e} after {} iterations",
                        result.history.last().copied().unwrap_or(f64::NAN),
                        result.iterations
                    ));
                    HluStatus::NotConverged
                }
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Factorization statistics as a JSON document. Free with
/// `hlu_string_free`.
///
/// # Safety
/// `f` must be a live factorization handle.
#[no_mangle]
pub unsafe extern "C" fn hlu_stats_json(f: *const HluFactorization) -> *mut c_char {
    if f.is_null() {
        return std::ptr::null_mut();
    }
    let stats = &(*f).stats;
    match serde_json_string(stats) {
        Some(text) => CString::new(text)
            .map(|c| c.into_raw())
            .unwrap_or(std::ptr::null_mut()),
        None => std::ptr::null_mut(),
    }
}

fn serde_json_string(stats: &FactorStats) -> Option<String> {
    // FactorStats is Serialize; hlu re-exports serde_json through its own
    // dependency tree, so serialize via the library helper
    hlu::factor_stats_json(stats)
}

/// # Safety
/// `s` must be a pointer previously returned by `hlu_stats_json` and not
/// yet freed.
#[no_mangle]
pub unsafe extern "C" fn hlu_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
