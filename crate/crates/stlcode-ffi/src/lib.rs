//! C ABI for the stlcode toolkit: opaque model handles, status codes, and a
//! thread-local last-error message. The matching header is generated into
//! `include/stlcode.h` at build time.
//!
//! Matrices cross the boundary as row-major `f64` buffers with explicit
//! dimensions; labels are 1-based `u32`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use stlcode::error::Error;
use stlcode::pipeline::{self, LabeledDataset, PipelineConfig, SelfTaughtModel, UnlabeledDataset};
use stlcode::{model_io, Family};

/// Result of every fallible call. Anything other than `Ok` leaves a
/// description in `stlc_last_error_message`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StlcStatus {
    Ok = 0,
    /// A pointer argument was null.
    NullPointer = 1,
    /// Bad dimensions, hyperparameters, or out-of-domain data.
    InvalidArgument = 2,
    /// An input file failed to parse.
    ParseError = 3,
    /// An iterative method diverged.
    NumericalError = 4,
    /// Filesystem failure.
    IoError = 5,
    /// A model file is corrupt or has an unknown version.
    ModelFormatError = 6,
}

/// Observation model selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StlcFamily {
    Gaussian = 0,
    Bernoulli = 1,
    Poisson = 2,
}

impl From<StlcFamily> for Family {
    fn from(f: StlcFamily) -> Self {
        match f {
            StlcFamily::Gaussian => Family::Gaussian,
            StlcFamily::Bernoulli => Family::Bernoulli,
            StlcFamily::Poisson => Family::Poisson,
        }
    }
}

/// Full-pipeline hyperparameters. Get defaults from
/// `stlc_train_config_default` and override fields as needed.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct StlcTrainConfig {
    pub family: StlcFamily,
    pub seed: u64,
    /// Number of dictionary atoms.
    pub n_basis: usize,
    /// Dictionary-training L1 penalty.
    pub beta: f64,
    /// Encoding penalty override; any value <= 0 means "use beta".
    pub encode_beta: f64,
    /// Per-example encoding stop threshold.
    pub epsilon: f64,
    /// Squared-norm bound on each atom.
    pub norm_bound: f64,
    /// Maximum dictionary alternation sweeps.
    pub sweeps: usize,
    /// Relative sweep decrease that stops dictionary learning.
    pub dict_tol: f64,
    /// Retained PCA components; 0 disables the reducer.
    pub pca: usize,
    /// Hidden-layer width of the classifier.
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub init_scale: f64,
    pub l2_decay: f64,
}

impl StlcTrainConfig {
    fn to_pipeline(self) -> PipelineConfig {
        PipelineConfig {
            family: self.family.into(),
            seed: self.seed,
            n_basis: self.n_basis,
            beta: self.beta,
            encode_beta: (self.encode_beta > 0.0).then_some(self.encode_beta),
            epsilon: self.epsilon,
            norm_bound: self.norm_bound,
            sweeps: self.sweeps,
            dict_tol: self.dict_tol,
            pca: (self.pca > 0).then_some(self.pca),
            hidden: self.hidden,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            init_scale: self.init_scale,
            l2_decay: self.l2_decay,
        }
    }
}

/// Opaque handle to a trained model.
pub struct StlcModel {
    inner: SelfTaughtModel,
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

fn status_of(err: &Error) -> StlcStatus {
    match err {
        Error::InvalidInput(_) | Error::Domain(_) => StlcStatus::InvalidArgument,
        Error::Parse { .. } => StlcStatus::ParseError,
        Error::Numerical(_) => StlcStatus::NumericalError,
        Error::Io(_) => StlcStatus::IoError,
        Error::ModelFormat(_) => StlcStatus::ModelFormatError,
        Error::Stage { source, .. } => status_of(source),
    }
}

fn fail(err: Error) -> StlcStatus {
    set_error(&err.to_string());
    status_of(&err)
}

fn fail_null(what: &str) -> StlcStatus {
    set_error(&format!("{what} must not be null"));
    StlcStatus::NullPointer
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn stlc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the most recent failure on this thread. The pointer stays
/// valid until the next failing stlc call on the same thread.
#[no_mangle]
pub extern "C" fn stlc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Defaults matching the CLI: gaussian family, 8 atoms, beta 0.1, no PCA.
#[no_mangle]
pub extern "C" fn stlc_train_config_default() -> StlcTrainConfig {
    let d = PipelineConfig::default();
    StlcTrainConfig {
        family: StlcFamily::Gaussian,
        seed: d.seed,
        n_basis: d.n_basis,
        beta: d.beta,
        encode_beta: 0.0,
        epsilon: d.epsilon,
        norm_bound: d.norm_bound,
        sweeps: d.sweeps,
        dict_tol: d.dict_tol,
        pca: 0,
        hidden: d.hidden,
        learning_rate: d.learning_rate,
        epochs: d.epochs,
        batch_size: d.batch_size,
        init_scale: d.init_scale,
        l2_decay: d.l2_decay,
    }
}

unsafe fn path_from(ptr: *const c_char) -> Result<PathBuf, StlcStatus> {
    if ptr.is_null() {
        return Err(fail_null("path"));
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(StlcStatus::InvalidArgument)
        }
    }
}

/// Train the full pipeline on row-major data.
///
/// `unlabeled` is `unlabeled_rows x dim`, `labeled` is `labeled_rows x dim`,
/// and `labels` holds `labeled_rows` 1-based class indices covering every
/// class in `1..=num_classes`. On success `*out` owns the new model; free it
/// with `stlc_model_free`.
///
/// # Safety
/// All pointers must be valid for the stated lengths and `out` must point
/// to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn stlc_train(
    unlabeled: *const f64,
    unlabeled_rows: usize,
    labeled: *const f64,
    labeled_rows: usize,
    dim: usize,
    labels: *const u32,
    num_classes: u32,
    config: *const StlcTrainConfig,
    out: *mut *mut StlcModel,
) -> StlcStatus {
    if out.is_null() {
        return fail_null("out");
    }
    if unlabeled.is_null() || labeled.is_null() || labels.is_null() || config.is_null() {
        return fail_null("data, labels, and config");
    }
    if dim == 0 || unlabeled_rows == 0 || labeled_rows == 0 {
        set_error("dimensions and row counts must be nonzero");
        return StlcStatus::InvalidArgument;
    }

    let config = (*config).to_pipeline();
    let xu = std::slice::from_raw_parts(unlabeled, unlabeled_rows * dim);
    let xl = std::slice::from_raw_parts(labeled, labeled_rows * dim);
    let ys = std::slice::from_raw_parts(labels, labeled_rows);

    let xu = DMatrix::from_fn(unlabeled_rows, dim, |i, j| xu[i * dim + j]);
    let xl = DMatrix::from_fn(labeled_rows, dim, |i, j| xl[i * dim + j]);
    let ys: Vec<usize> = ys.iter().map(|&y| y as usize).collect();

    let trained = UnlabeledDataset::new(xu, config.family)
        .and_then(|u| {
            let l = LabeledDataset::new(xl, ys, num_classes as usize)?;
            pipeline::self_taught_train(&u, &l, &config)
        });
    match trained {
        Ok(model) => {
            *out = Box::into_raw(Box::new(StlcModel { inner: model }));
            StlcStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Load a model file produced by `stlc_model_save` or the CLI.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn stlc_model_load(
    path: *const c_char,
    out: *mut *mut StlcModel,
) -> StlcStatus {
    if out.is_null() {
        return fail_null("out");
    }
    let path = match path_from(path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    match model_io::load_model(&path) {
        Ok(model) => {
            *out = Box::into_raw(Box::new(StlcModel { inner: model }));
            StlcStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Save a model to the toolkit's text format.
///
/// # Safety
/// `model` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn stlc_model_save(
    model: *const StlcModel,
    path: *const c_char,
) -> StlcStatus {
    if model.is_null() {
        return fail_null("model");
    }
    let path = match path_from(path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    match model_io::save_model(&(*model).inner, &path, &[]) {
        Ok(()) => StlcStatus::Ok,
        Err(e) => fail(e),
    }
}

/// Release a model handle. Null is a no-op.
///
/// # Safety
/// `model` must be a pointer returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn stlc_model_free(model: *mut StlcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Observation dimension the model expects.
///
/// # Safety
/// `model` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn stlc_model_input_dim(model: *const StlcModel) -> usize {
    if model.is_null() {
        return 0;
    }
    (*model).inner.dictionary.input_dim()
}

/// Sparse-code feature dimension (number of dictionary atoms).
///
/// # Safety
/// `model` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn stlc_model_feature_dim(model: *const StlcModel) -> usize {
    if model.is_null() {
        return 0;
    }
    (*model).inner.dictionary.n_basis()
}

/// Number of classes the classifier separates.
///
/// # Safety
/// `model` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn stlc_model_num_classes(model: *const StlcModel) -> usize {
    if model.is_null() {
        return 0;
    }
    (*model).inner.num_classes()
}

/// Sparse-encode one observation of length `x_len == input_dim` into
/// `out_code` of length `code_len == feature_dim`.
///
/// # Safety
/// Buffers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn stlc_model_encode(
    model: *const StlcModel,
    x: *const f64,
    x_len: usize,
    out_code: *mut f64,
    code_len: usize,
) -> StlcStatus {
    if model.is_null() || x.is_null() || out_code.is_null() {
        return fail_null("model, x, and out_code");
    }
    let model = &(*model).inner;
    if code_len != model.dictionary.n_basis() {
        set_error(&format!(
            "out_code has length {code_len} but the model produces {}",
            model.dictionary.n_basis()
        ));
        return StlcStatus::InvalidArgument;
    }
    let x = std::slice::from_raw_parts(x, x_len);
    let row = DMatrix::from_fn(1, x_len, |_, j| x[j]);
    let encode_config = stlcode::irls::EncodeConfig {
        beta: model.config.effective_encode_beta(),
        epsilon: model.config.epsilon,
        ..stlcode::irls::EncodeConfig::default()
    };
    match pipeline::encode_features_opts(&model.dictionary, &row, &encode_config, 1) {
        Ok(features) => {
            for j in 0..code_len {
                *out_code.add(j) = features[(0, j)];
            }
            StlcStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Predict one observation: writes the 1-based label to `out_label` and,
/// when `out_probs` is non-null, the class probabilities to its
/// `probs_len == num_classes` slots.
///
/// # Safety
/// Buffers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn stlc_model_predict(
    model: *const StlcModel,
    x: *const f64,
    x_len: usize,
    out_label: *mut u32,
    out_probs: *mut f64,
    probs_len: usize,
) -> StlcStatus {
    if model.is_null() || x.is_null() || out_label.is_null() {
        return fail_null("model, x, and out_label");
    }
    let model = &(*model).inner;
    if !out_probs.is_null() && probs_len != model.num_classes() {
        set_error(&format!(
            "out_probs has length {probs_len} but the model has {} classes",
            model.num_classes()
        ));
        return StlcStatus::InvalidArgument;
    }
    let x = std::slice::from_raw_parts(x, x_len);
    let x = DVector::from_column_slice(x);
    match pipeline::predict(model, &x) {
        Ok((label, probs)) => {
            *out_label = label as u32;
            if !out_probs.is_null() {
                for j in 0..probs_len {
                    *out_probs.add(j) = probs[j];
                }
            }
            StlcStatus::Ok
        }
        Err(e) => fail(e),
    }
}
