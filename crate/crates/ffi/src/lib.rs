//! C ABI over the training, transform and persistence entry points.
//!
//! All functions return a `ParrepStatus` code; on failure the thread-local
//! error message is readable through `parrep_last_error`. Models are opaque
//! handles owned by the library and released with `parrep_model_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use ndarray::{Array2, ArrayView2};
use parrep::data::Dataset;
use parrep::losses::Method;
use parrep::trainer::{
    fit_with_preprocessing, load_model, save_model, transform, FitResult, Model, TrainConfig,
};

/// Status codes returned by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParrepStatus {
    Ok = 0,
    InvalidArgument = 1,
    IoError = 2,
    Unsupported = 3,
    InternalError = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap_or_default());
}

fn status_of(err: &parrep::Error) -> ParrepStatus {
    use parrep::Error as E;
    match err {
        E::InvalidArgument(_)
        | E::DimensionMismatch { .. }
        | E::DatasetTooSmall { .. }
        | E::UnknownMetric(_) => ParrepStatus::InvalidArgument,
        E::Io { .. } | E::BadMagic | E::BadVersion(_) | E::Truncated(_) | E::Parse { .. } => {
            ParrepStatus::IoError
        }
        E::LookupTransformUnsupported => ParrepStatus::Unsupported,
        E::NonFinite(_) | E::Json(_) => ParrepStatus::InternalError,
    }
}

fn fail(err: parrep::Error) -> ParrepStatus {
    set_error(&err.to_string());
    status_of(&err)
}

/// Opaque handle: a trained (or loaded) model plus the training embedding
/// when one exists.
pub struct ParrepModel {
    model: Model,
    embedding: Option<Array2<f64>>,
}

/// Copies the message of the most recent error on this thread into `buf`
/// (NUL-terminated, truncated to `cap` bytes) and returns the full message
/// length in bytes, excluding the terminator. A zero `cap` only queries the
/// length.
///
/// # Safety
/// `buf` must point to `cap` writable bytes, or be null with `cap` zero.
#[no_mangle]
pub unsafe extern "C" fn parrep_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

unsafe fn matrix_from_raw<'a>(
    x: *const f64,
    n: usize,
    d: usize,
) -> Result<ArrayView2<'a, f64>, ParrepStatus> {
    if x.is_null() || n == 0 || d == 0 {
        set_error("null or empty input matrix");
        return Err(ParrepStatus::InvalidArgument);
    }
    let slice = std::slice::from_raw_parts(x, n * d);
    if slice.iter().any(|v| !v.is_finite()) {
        set_error("input matrix contains non-finite values");
        return Err(ParrepStatus::InvalidArgument);
    }
    Ok(ArrayView2::from_shape((n, d), slice).expect("contiguous row-major shape"))
}

/// Trains a model on a row-major `n` x `d` matrix.
///
/// `method` is one of `paramrepulsor`, `parampacmap`, `umap`, `negtsne`,
/// `infonctsne`, `ncvis`. `pca_dims` of zero disables PCA. The new handle
/// is written to `out`; free it with `parrep_model_free`.
///
/// # Safety
/// `x` must point to `n * d` doubles; `method` must be a NUL-terminated
/// string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn parrep_fit(
    x: *const f64,
    n: usize,
    d: usize,
    method: *const c_char,
    n_epochs: usize,
    seed: u64,
    standardize: bool,
    pca_dims: usize,
    out: *mut *mut ParrepModel,
) -> ParrepStatus {
    if out.is_null() || method.is_null() {
        set_error("null output or method pointer");
        return ParrepStatus::InvalidArgument;
    }
    let view = match matrix_from_raw(x, n, d) {
        Ok(v) => v,
        Err(s) => return s,
    };
    let method = match CStr::from_ptr(method).to_str() {
        Ok(s) => s,
        Err(_) => {
            set_error("method is not valid UTF-8");
            return ParrepStatus::InvalidArgument;
        }
    };
    let method = match Method::parse(method) {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    let dataset = match Dataset::new(view.to_owned(), None, "ffi") {
        Ok(ds) => ds,
        Err(e) => return fail(e),
    };
    let config = TrainConfig { method, n_epochs, seed, ..TrainConfig::default() };
    let pca = (pca_dims > 0).then_some(pca_dims);
    match fit_with_preprocessing(&dataset, &config, standardize, pca) {
        Ok(FitResult { model, embedding, .. }) => {
            let handle = Box::new(ParrepModel { model, embedding: Some(embedding) });
            *out = Box::into_raw(handle);
            ParrepStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Returns the embedding dimensionality of the model, or zero for null.
///
/// # Safety
/// `model` must be a live handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn parrep_embedding_dim(model: *const ParrepModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.projector.output_dim())
}

/// Returns the expected raw input width of the model, or zero for null.
///
/// # Safety
/// `model` must be a live handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn parrep_input_dim(model: *const ParrepModel) -> usize {
    model.as_ref().map_or(0, |m| {
        m.model
            .preprocessing
            .input_dim()
            .unwrap_or_else(|| m.model.projector.input_dim())
    })
}

/// Number of rows in the stored training embedding (zero after load).
///
/// # Safety
/// `model` must be a live handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn parrep_training_rows(model: *const ParrepModel) -> usize {
    model
        .as_ref()
        .and_then(|m| m.embedding.as_ref())
        .map_or(0, |e| e.nrows())
}

/// Copies the training embedding into `out` (row-major, `rows` x
/// `embedding_dim` as reported by the query functions).
///
/// # Safety
/// `model` must be a live handle; `out` must hold the full matrix.
#[no_mangle]
pub unsafe extern "C" fn parrep_training_embedding(
    model: *const ParrepModel,
    out: *mut f64,
) -> ParrepStatus {
    let Some(handle) = model.as_ref() else {
        set_error("null model handle");
        return ParrepStatus::InvalidArgument;
    };
    let Some(embedding) = handle.embedding.as_ref() else {
        set_error("model has no stored training embedding");
        return ParrepStatus::Unsupported;
    };
    if out.is_null() {
        set_error("null output buffer");
        return ParrepStatus::InvalidArgument;
    }
    for (i, v) in embedding.iter().enumerate() {
        *out.add(i) = *v;
    }
    ParrepStatus::Ok
}

/// Projects `n` new rows of width `d` and writes the row-major result
/// (`n` x `embedding_dim`) into `out`.
///
/// # Safety
/// `model` must be a live handle; `x` must hold `n * d` doubles; `out`
/// must hold `n * embedding_dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn parrep_transform(
    model: *const ParrepModel,
    x: *const f64,
    n: usize,
    d: usize,
    out: *mut f64,
) -> ParrepStatus {
    let Some(handle) = model.as_ref() else {
        set_error("null model handle");
        return ParrepStatus::InvalidArgument;
    };
    if out.is_null() {
        set_error("null output buffer");
        return ParrepStatus::InvalidArgument;
    }
    let view = match matrix_from_raw(x, n, d) {
        Ok(v) => v,
        Err(s) => return s,
    };
    match transform(&handle.model, view) {
        Ok(y) => {
            for (i, v) in y.iter().enumerate() {
                *out.add(i) = *v;
            }
            ParrepStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Saves the model to `path` in the library's binary format.
///
/// # Safety
/// `model` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn parrep_save(model: *const ParrepModel, path: *const c_char) -> ParrepStatus {
    let Some(handle) = model.as_ref() else {
        set_error("null model handle");
        return ParrepStatus::InvalidArgument;
    };
    let Some(path) = cstr_path(path) else {
        return ParrepStatus::InvalidArgument;
    };
    match save_model(&handle.model, Path::new(&path)) {
        Ok(()) => ParrepStatus::Ok,
        Err(e) => fail(e),
    }
}

/// Loads a model saved by `parrep_save` and writes the handle to `out`.
/// Loaded models carry no training embedding.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn parrep_load(path: *const c_char, out: *mut *mut ParrepModel) -> ParrepStatus {
    if out.is_null() {
        set_error("null output pointer");
        return ParrepStatus::InvalidArgument;
    }
    let Some(path) = cstr_path(path) else {
        return ParrepStatus::InvalidArgument;
    };
    match load_model(Path::new(&path)) {
        Ok(model) => {
            *out = Box::into_raw(Box::new(ParrepModel { model, embedding: None }));
            ParrepStatus::Ok
        }
        Err(e) => fail(e),
    }
}

unsafe fn cstr_path(path: *const c_char) -> Option<String> {
    if path.is_null() {
        set_error("null path");
        return None;
    }
    match CStr::from_ptr(path).to_str() {
        Ok(s) => Some(s.to_string()),
        Err(_) => {
            set_error("path is not valid UTF-8");
            None
        }
    }
}

/// Releases a model handle. Null is a no-op.
///
/// # Safety
/// `model` must be a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn parrep_model_free(model: *mut ParrepModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
