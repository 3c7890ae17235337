//! C ABI over the ordinal-regression toolkit.
//!
//! Conventions: objects cross the boundary as opaque handles created and
//! released by `thor_*` constructor/`thor_*_free` pairs; every fallible call
//! returns a [`thor_status`] and leaves a human-readable explanation in a
//! thread-local buffer readable via [`thor_last_error_message`]. Out
//! parameters are written only on `THOR_OK`.

#![allow(non_camel_case_types)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use thor::losses::Method;
use thor::net::Activation;
use thor::ordinal::{Boundaries, OrdinalDataset};
use thor::trainer::{self, BoundarySpec, Head, SelectOn, TrainConfig, TrainedModel};
use thor::Error;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

/// Status code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum thor_status {
    THOR_OK = 0,
    THOR_NULL_POINTER = 1,
    THOR_INVALID_ARGUMENT = 2,
    THOR_NUMERIC_FAULT = 3,
    THOR_IO_ERROR = 4,
    THOR_PARSE_ERROR = 5,
}

fn status_of(err: &Error) -> thor_status {
    match err {
        Error::NumericFault(_) => thor_status::THOR_NUMERIC_FAULT,
        Error::Io(_) => thor_status::THOR_IO_ERROR,
        Error::CsvParse { .. } | Error::CheckpointFormat { .. } => thor_status::THOR_PARSE_ERROR,
        _ => thor_status::THOR_INVALID_ARGUMENT,
    }
}

fn fail(err: Error) -> thor_status {
    set_last_error(&err.to_string());
    status_of(&err)
}

fn null_pointer(what: &str) -> thor_status {
    set_last_error(&format!("null pointer: {what}"));
    thor_status::THOR_NULL_POINTER
}

/// Training method selector.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum thor_method {
    THOR_METHOD_THOR = 0,
    THOR_METHOD_ORCNN = 1,
    THOR_METHOD_CORAL = 2,
    THOR_METHOD_CNNPOR = 3,
    THOR_METHOD_HYBRID = 4,
}

impl From<thor_method> for Method {
    fn from(value: thor_method) -> Method {
        match value {
            thor_method::THOR_METHOD_THOR => Method::Thor,
            thor_method::THOR_METHOD_ORCNN => Method::Orcnn,
            thor_method::THOR_METHOD_CORAL => Method::Coral,
            thor_method::THOR_METHOD_CNNPOR => Method::Cnnpor,
            thor_method::THOR_METHOD_HYBRID => Method::Hybrid,
        }
    }
}

/// Hidden-layer activation.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum thor_activation {
    THOR_ACTIVATION_RELU = 0,
    THOR_ACTIVATION_TANH = 1,
    THOR_ACTIVATION_IDENTITY = 2,
}

impl From<thor_activation> for Activation {
    fn from(value: thor_activation) -> Activation {
        match value {
            thor_activation::THOR_ACTIVATION_RELU => Activation::Relu,
            thor_activation::THOR_ACTIVATION_TANH => Activation::Tanh,
            thor_activation::THOR_ACTIVATION_IDENTITY => Activation::Identity,
        }
    }
}

/// Validation metric used to pick the best epoch.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum thor_select {
    THOR_SELECT_MAE = 0,
    THOR_SELECT_ACCURACY = 1,
}

/// Inference head for two-headed (hybrid) models; `AUTO` lets single-headed
/// methods pick their own rule and is an error for hybrid models.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum thor_head {
    THOR_HEAD_AUTO = 0,
    THOR_HEAD_CLASSIFICATION = 1,
    THOR_HEAD_REGRESSION = 2,
}

impl From<thor_head> for Option<Head> {
    fn from(value: thor_head) -> Option<Head> {
        match value {
            thor_head::THOR_HEAD_AUTO => None,
            thor_head::THOR_HEAD_CLASSIFICATION => Some(Head::Classification),
            thor_head::THOR_HEAD_REGRESSION => Some(Head::Regression),
        }
    }
}

/// Opaque dataset handle.
pub struct thor_dataset {
    inner: OrdinalDataset,
}

/// Opaque trained-model handle (model, thresholds, method and any head state).
pub struct thor_model {
    inner: TrainedModel,
}

/// Training hyperparameters. `hidden` may be NULL to use the default trunk
/// (64, 32); otherwise it points at `hidden_len` layer widths.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct thor_train_config {
    pub method: thor_method,
    pub epochs: u32,
    pub batch_size: u32,
    pub lr: f64,
    pub gamma: f64,
    pub seed: u64,
    pub hidden: *const u32,
    pub hidden_len: usize,
    pub activation: thor_activation,
    pub select_on: thor_select,
    pub allow_infeasible_margin: bool,
}

/// Evaluation summary. `inconsistency_rate` is meaningful only when
/// `has_inconsistency_rate` is true (binary-decomposition methods).
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct thor_metrics {
    pub accuracy: f64,
    pub mae: f64,
    pub n: usize,
    pub has_inconsistency_rate: bool,
    pub inconsistency_rate: f64,
}

unsafe fn path_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a Path, thor_status> {
    if ptr.is_null() {
        return Err(null_pointer(what));
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => {
            set_last_error(&format!("{what} is not valid UTF-8"));
            Err(thor_status::THOR_PARSE_ERROR)
        }
    }
}

/// Version string of the library; static storage, do not free.
#[no_mangle]
pub extern "C" fn thor_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Explanation of the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn thor_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Generates a synthetic ordinal dataset.
///
/// # Safety
/// `out` must be a valid pointer; on `THOR_OK` it receives a handle that must
/// be released with [`thor_dataset_free`].
#[no_mangle]
pub unsafe extern "C" fn thor_dataset_synthetic(
    k: usize,
    per_class: usize,
    dim: usize,
    noise: f64,
    label_noise: f64,
    transform_seed: u64,
    seed: u64,
    out: *mut *mut thor_dataset,
) -> thor_status {
    if out.is_null() {
        return null_pointer("out");
    }
    let spec = thor::data::SyntheticSpec {
        k,
        per_class,
        d: dim,
        noise,
        transform_seed,
        label_noise,
        seed,
    };
    match thor::data::generate_synthetic(&spec) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(thor_dataset { inner }));
            thor_status::THOR_OK
        }
        Err(e) => fail(e),
    }
}

/// Loads `f1,...,fd,label` rows from a CSV file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` as in
/// [`thor_dataset_synthetic`].
#[no_mangle]
pub unsafe extern "C" fn thor_dataset_load_csv(
    path: *const c_char,
    k: usize,
    has_header: bool,
    out: *mut *mut thor_dataset,
) -> thor_status {
    if out.is_null() {
        return null_pointer("out");
    }
    let path = match path_arg(path, "path") {
        Ok(p) => p,
        Err(status) => return status,
    };
    match thor::data::load_csv(path, k, has_header) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(thor_dataset { inner }));
            thor_status::THOR_OK
        }
        Err(e) => fail(e),
    }
}

/// Writes the dataset in the CSV schema [`thor_dataset_load_csv`] reads.
///
/// # Safety
/// `dataset` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn thor_dataset_save_csv(
    dataset: *const thor_dataset,
    path: *const c_char,
    header: bool,
) -> thor_status {
    let Some(ds) = dataset.as_ref() else {
        return null_pointer("dataset");
    };
    let path = match path_arg(path, "path") {
        Ok(p) => p,
        Err(status) => return status,
    };
    match thor::data::write_csv(path, &ds.inner, header) {
        Ok(()) => thor_status::THOR_OK,
        Err(e) => fail(e),
    }
}

/// Stratified train/validation/test split; all three out parameters receive
/// fresh handles on success.
///
/// # Safety
/// `dataset` must be a live handle and the out pointers valid.
#[no_mangle]
pub unsafe extern "C" fn thor_dataset_split(
    dataset: *const thor_dataset,
    train_ratio: f64,
    val_ratio: f64,
    test_ratio: f64,
    seed: u64,
    out_train: *mut *mut thor_dataset,
    out_val: *mut *mut thor_dataset,
    out_test: *mut *mut thor_dataset,
) -> thor_status {
    let Some(ds) = dataset.as_ref() else {
        return null_pointer("dataset");
    };
    if out_train.is_null() || out_val.is_null() || out_test.is_null() {
        return null_pointer("split outputs");
    }
    match thor::data::split(&ds.inner, (train_ratio, val_ratio, test_ratio), seed) {
        Ok((train, val, test)) => {
            *out_train = Box::into_raw(Box::new(thor_dataset { inner: train }));
            *out_val = Box::into_raw(Box::new(thor_dataset { inner: val }));
            *out_test = Box::into_raw(Box::new(thor_dataset { inner: test }));
            thor_status::THOR_OK
        }
        Err(e) => fail(e),
    }
}

/// Number of examples; 0 for a NULL handle.
///
/// # Safety
/// `dataset` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn thor_dataset_len(dataset: *const thor_dataset) -> usize {
    dataset.as_ref().map_or(0, |ds| ds.inner.len())
}

/// Feature dimension; 0 for a NULL handle.
///
/// # Safety
/// `dataset` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn thor_dataset_dim(dataset: *const thor_dataset) -> usize {
    dataset.as_ref().map_or(0, |ds| ds.inner.dim())
}

/// Number of ordered classes; 0 for a NULL handle.
///
/// # Safety
/// `dataset` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn thor_dataset_classes(dataset: *const thor_dataset) -> usize {
    dataset.as_ref().map_or(0, |ds| ds.inner.k())
}

/// Releases a dataset handle; NULL is a no-op.
///
/// # Safety
/// `dataset` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn thor_dataset_free(dataset: *mut thor_dataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Defaults for one method: 100 epochs, batch 32, lr 0.02, margin 0.5,
/// seed 42, default trunk, rectifier, best epoch by validation MAE.
#[no_mangle]
pub extern "C" fn thor_train_config_default(method: thor_method) -> thor_train_config {
    thor_train_config {
        method,
        epochs: 100,
        batch_size: 32,
        lr: 0.02,
        gamma: 0.5,
        seed: 42,
        hidden: std::ptr::null(),
        hidden_len: 0,
        activation: thor_activation::THOR_ACTIVATION_RELU,
        select_on: thor_select::THOR_SELECT_MAE,
        allow_infeasible_margin: false,
    }
}

unsafe fn build_config(cfg: &thor_train_config) -> TrainConfig {
    let hidden = if cfg.hidden.is_null() {
        vec![64, 32]
    } else {
        std::slice::from_raw_parts(cfg.hidden, cfg.hidden_len)
            .iter()
            .map(|&w| w as usize)
            .collect()
    };
    TrainConfig {
        method: cfg.method.into(),
        epochs: cfg.epochs as usize,
        batch_size: cfg.batch_size as usize,
        lr: cfg.lr,
        gamma: cfg.gamma,
        seed: cfg.seed,
        boundaries: BoundarySpec::Default,
        hidden,
        activation: cfg.activation.into(),
        select_on: match cfg.select_on {
            thor_select::THOR_SELECT_MAE => SelectOn::Mae,
            thor_select::THOR_SELECT_ACCURACY => SelectOn::Accuracy,
        },
        allow_infeasible_margin: cfg.allow_infeasible_margin,
        ..TrainConfig::new(cfg.method.into())
    }
}

/// Trains on the train split with per-epoch validation and returns the best
/// model by the configured selection metric. Deterministic per seed.
///
/// # Safety
/// `train`/`val` must be live handles, `config` and `out` valid pointers; if
/// `config->hidden` is non-NULL it must point at `hidden_len` widths. The
/// returned handle must be released with [`thor_model_free`].
#[no_mangle]
pub unsafe extern "C" fn thor_train(
    train: *const thor_dataset,
    val: *const thor_dataset,
    config: *const thor_train_config,
    out: *mut *mut thor_model,
) -> thor_status {
    let Some(train) = train.as_ref() else {
        return null_pointer("train");
    };
    let Some(val) = val.as_ref() else {
        return null_pointer("val");
    };
    let Some(config) = config.as_ref() else {
        return null_pointer("config");
    };
    if out.is_null() {
        return null_pointer("out");
    }
    let cfg = build_config(config);
    let scratch = match tempfile::tempdir() {
        Ok(dir) => dir,
        Err(e) => return fail(Error::Io(e)),
    };
    match trainer::train(&train.inner, &val.inner, &cfg, scratch.path()) {
        Ok(outcome) => {
            *out = Box::into_raw(Box::new(thor_model {
                inner: outcome.model,
            }));
            thor_status::THOR_OK
        }
        Err(e) => fail(e),
    }
}

/// Serializes a model in the versioned text checkpoint format.
///
/// # Safety
/// `model` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn thor_model_save(
    model: *const thor_model,
    path: *const c_char,
) -> thor_status {
    let Some(model) = model.as_ref() else {
        return null_pointer("model");
    };
    let path = match path_arg(path, "path") {
        Ok(p) => p,
        Err(status) => return status,
    };
    match model.inner.save(path) {
        Ok(()) => thor_status::THOR_OK,
        Err(e) => fail(e),
    }
}

/// Loads a checkpoint saved by [`thor_model_save`] (or the CLI), binding it
/// to the given method and the default thresholds for `k` classes.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` as in [`thor_train`].
#[no_mangle]
pub unsafe extern "C" fn thor_model_load(
    path: *const c_char,
    method: thor_method,
    k: usize,
    out: *mut *mut thor_model,
) -> thor_status {
    if out.is_null() {
        return null_pointer("out");
    }
    let path = match path_arg(path, "path") {
        Ok(p) => p,
        Err(status) => return status,
    };
    let boundaries = match Boundaries::default_for(k).and_then(|b| b.with_margin(0.0)) {
        Ok(b) => b,
        Err(e) => return fail(e),
    };
    match TrainedModel::load(path, method.into(), boundaries) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(thor_model { inner }));
            thor_status::THOR_OK
        }
        Err(e) => fail(e),
    }
}

/// Predicts the rank (1-based) of one feature vector.
///
/// # Safety
/// `model` must be a live handle, `features` must point at `len` doubles and
/// `out_rank` must be valid.
#[no_mangle]
pub unsafe extern "C" fn thor_model_predict(
    model: *const thor_model,
    features: *const f64,
    len: usize,
    head: thor_head,
    out_rank: *mut usize,
) -> thor_status {
    let Some(model) = model.as_ref() else {
        return null_pointer("model");
    };
    if features.is_null() {
        return null_pointer("features");
    }
    if out_rank.is_null() {
        return null_pointer("out_rank");
    }
    let x = std::slice::from_raw_parts(features, len);
    match model.inner.predict(x, head.into()) {
        Ok(rank) => {
            *out_rank = rank.get();
            thor_status::THOR_OK
        }
        Err(e) => fail(e),
    }
}

/// Evaluates accuracy, MAE and (for the binary-decomposition methods) the
/// inconsistency rate of the model on a dataset.
///
/// # Safety
/// `model` and `dataset` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn thor_model_evaluate(
    model: *const thor_model,
    dataset: *const thor_dataset,
    head: thor_head,
    out: *mut thor_metrics,
) -> thor_status {
    let Some(model) = model.as_ref() else {
        return null_pointer("model");
    };
    let Some(dataset) = dataset.as_ref() else {
        return null_pointer("dataset");
    };
    if out.is_null() {
        return null_pointer("out");
    }
    match trainer::evaluate(&model.inner, &dataset.inner, head.into()) {
        Ok(report) => {
            *out = thor_metrics {
                accuracy: report.accuracy,
                mae: report.mae,
                n: report.n,
                has_inconsistency_rate: report.inconsistency_rate.is_some(),
                inconsistency_rate: report.inconsistency_rate.unwrap_or(0.0),
            };
            thor_status::THOR_OK
        }
        Err(e) => fail(e),
    }
}

/// Releases a model handle; NULL is a no-op.
///
/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn thor_model_free(model: *mut thor_model) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
