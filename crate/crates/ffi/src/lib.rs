//! C ABI over `wsvd-core`.
//!
//! Datasets and models cross the boundary as opaque handles that the caller
//! releases with the matching `*_free` function. Every fallible call returns
//! a [`WsvdStatus`]; on failure a message is kept per thread and can be read
//! with [`wsvd_last_error`]. Panics are caught at the boundary and reported
//! as `WSVD_STATUS_PANIC`.
//!
//! The header `include/wsvd.h` is regenerated by the build script.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use wsvd_core::experiment::ExperimentError;
use wsvd_core::{
    eval, ingest, param_count, train, DatasetFormat, Encoding, HyperParams, ModelKind, PerBlock, RatingsDataset,
    SplitSpec, TrainError, TrainedModel, UpdateRule,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WsvdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Diverged = 5,
    ModelFile = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WsvdModelKind {
    Average = 0,
    Bias = 1,
    Pmf = 2,
    Svd = 3,
    SvdPlusPlus = 4,
    Wsvd = 5,
}

impl From<WsvdModelKind> for ModelKind {
    fn from(k: WsvdModelKind) -> Self {
        match k {
            WsvdModelKind::Average => ModelKind::Average,
            WsvdModelKind::Bias => ModelKind::Bias,
            WsvdModelKind::Pmf => ModelKind::Pmf,
            WsvdModelKind::Svd => ModelKind::Svd,
            WsvdModelKind::SvdPlusPlus => ModelKind::SvdPlusPlus,
            WsvdModelKind::Wsvd => ModelKind::Wsvd,
        }
    }
}

impl From<ModelKind> for WsvdModelKind {
    fn from(k: ModelKind) -> Self {
        match k {
            ModelKind::Average => WsvdModelKind::Average,
            ModelKind::Bias => WsvdModelKind::Bias,
            ModelKind::Pmf => WsvdModelKind::Pmf,
            ModelKind::Svd => WsvdModelKind::Svd,
            ModelKind::SvdPlusPlus => WsvdModelKind::SvdPlusPlus,
            ModelKind::Wsvd => WsvdModelKind::Wsvd,
        }
    }
}

/// Hyperparameters with one learning rate and one regularization value per
/// block. `update` is 0 for the shared-residual rule, 1 for sequential.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WsvdHyperParams {
    pub k: usize,
    pub epochs: usize,
    pub seed: u64,
    pub decay: f64,
    pub lr_weights: f64,
    pub lr_user_factors: f64,
    pub lr_item_factors: f64,
    pub lr_user_bias: f64,
    pub lr_item_bias: f64,
    pub reg_weights: f64,
    pub reg_user_factors: f64,
    pub reg_item_factors: f64,
    pub reg_user_bias: f64,
    pub reg_item_bias: f64,
    pub shuffle: bool,
    pub update: u32,
}

impl From<&HyperParams> for WsvdHyperParams {
    fn from(hp: &HyperParams) -> Self {
        Self {
            k: hp.k,
            epochs: hp.epochs,
            seed: hp.seed,
            decay: hp.decay,
            lr_weights: hp.lr.weights,
            lr_user_factors: hp.lr.user_factors,
            lr_item_factors: hp.lr.item_factors,
            lr_user_bias: hp.lr.user_bias,
            lr_item_bias: hp.lr.item_bias,
            reg_weights: hp.reg.weights,
            reg_user_factors: hp.reg.user_factors,
            reg_item_factors: hp.reg.item_factors,
            reg_user_bias: hp.reg.user_bias,
            reg_item_bias: hp.reg.item_bias,
            shuffle: hp.shuffle,
            update: match hp.update {
                UpdateRule::SharedResidual => 0,
                UpdateRule::Sequential => 1,
            },
        }
    }
}

impl WsvdHyperParams {
    fn to_core(self) -> Result<HyperParams, Failure> {
        let update = match self.update {
            0 => UpdateRule::SharedResidual,
            1 => UpdateRule::Sequential,
            u => return Err(Failure::invalid(format!("unknown update rule {u}"))),
        };
        Ok(HyperParams {
            k: self.k,
            reg: PerBlock {
                weights: self.reg_weights,
                user_factors: self.reg_user_factors,
                item_factors: self.reg_item_factors,
                user_bias: self.reg_user_bias,
                item_bias: self.reg_item_bias,
            },
            lr: PerBlock {
                weights: self.lr_weights,
                user_factors: self.lr_user_factors,
                item_factors: self.lr_item_factors,
                user_bias: self.lr_user_bias,
                item_bias: self.lr_item_bias,
            },
            decay: self.decay,
            epochs: self.epochs,
            seed: self.seed,
            shuffle: self.shuffle,
            update,
        })
    }
}

/// Opaque rating dataset.
pub struct WsvdDataset {
    inner: RatingsDataset,
}

/// Opaque trained model together with its id maps and training feedback.
pub struct WsvdModel {
    inner: TrainedModel,
}

struct Failure {
    status: WsvdStatus,
    message: String,
}

impl Failure {
    fn new(status: WsvdStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self::new(WsvdStatus::InvalidArgument, message)
    }

    fn null(what: &str) -> Self {
        Self::new(WsvdStatus::NullPointer, format!("{what} is null"))
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        let status = match &e {
            ExperimentError::Config(_) => WsvdStatus::InvalidArgument,
            ExperimentError::Ingest(ingest::IngestError::Io(_)) => WsvdStatus::Io,
            ExperimentError::Ingest(_) | ExperimentError::Dataset(_) => WsvdStatus::Parse,
            ExperimentError::Train(TrainError::Diverged { .. }) => WsvdStatus::Diverged,
            ExperimentError::Train(_) => WsvdStatus::InvalidArgument,
            ExperimentError::Output { .. } => WsvdStatus::Io,
            ExperimentError::Model(_) => WsvdStatus::ModelFile,
        };
        Self::new(status, e.to_string())
    }
}

macro_rules! impl_failure_from {
    ($($t:ty),*) => {
        $(impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                ExperimentError::from(e).into()
            }
        })*
    };
}
impl_failure_from!(
    ingest::IngestError,
    wsvd_core::DatasetError,
    TrainError,
    wsvd_core::PersistError
);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> WsvdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            WsvdStatus::Ok
        }
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            WsvdStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::null(what))
}

/// Message of the last failed call on this thread, or NULL after a
/// successful call. The pointer stays valid until the next call into the
/// library on the same thread.
#[no_mangle]
pub extern "C" fn wsvd_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Number of learnable parameters of `kind` on an `m x n` problem.
#[no_mangle]
pub extern "C" fn wsvd_param_count(kind: WsvdModelKind, users: usize, items: usize, k: usize) -> usize {
    param_count(kind.into(), users, items, k)
}

/// Reads a rating file. `format` is one of `ml100k`, `movielens-delim`,
/// `filmtrust`, `epinions`, `epinions-csv`, `epinions-tsv`, `epinions-ssv`.
///
/// # Safety
/// `path` and `format` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wsvd_dataset_load(
    path: *const c_char,
    format: *const c_char,
    out: *mut *mut WsvdDataset,
) -> WsvdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let format: DatasetFormat = str_arg(format, "format")?.parse()?;
        let inner = ingest::parse_file(Path::new(path), format)?;
        *out = Box::into_raw(Box::new(WsvdDataset { inner }));
        Ok(())
    })
}

/// # Safety
/// `dataset` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn wsvd_dataset_free(dataset: *mut WsvdDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Shape of a dataset: user count, item count, rating count.
///
/// # Safety
/// `dataset` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn wsvd_dataset_shape(
    dataset: *const WsvdDataset,
    users: *mut usize,
    items: *mut usize,
    ratings: *mut usize,
) -> WsvdStatus {
    guard(|| {
        let ds = &ref_arg(dataset, "dataset")?.inner;
        *out_arg(users, "users")? = ds.n_users();
        *out_arg(items, "items")? = ds.n_items();
        *out_arg(ratings, "ratings")? = ds.len();
        Ok(())
    })
}

/// Seeded uniform train/test partition.
///
/// # Safety
/// `dataset` must be a live handle; `train` and `test` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wsvd_dataset_split(
    dataset: *const WsvdDataset,
    train_fraction: f64,
    seed: u64,
    train: *mut *mut WsvdDataset,
    test: *mut *mut WsvdDataset,
) -> WsvdStatus {
    guard(|| {
        let train = out_arg(train, "train")?;
        let test = out_arg(test, "test")?;
        *train = ptr::null_mut();
        *test = ptr::null_mut();
        let ds = &ref_arg(dataset, "dataset")?.inner;
        let (a, b) = ds.split(SplitSpec::new(train_fraction, seed)?)?;
        *train = Box::into_raw(Box::new(WsvdDataset { inner: a }));
        *test = Box::into_raw(Box::new(WsvdDataset { inner: b }));
        Ok(())
    })
}

/// Standard hyperparameters for `kind`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wsvd_hyperparams_default(kind: WsvdModelKind, out: *mut WsvdHyperParams) -> WsvdStatus {
    guard(|| {
        *out_arg(out, "out")? = (&HyperParams::defaults_for(kind.into())).into();
        Ok(())
    })
}

/// Trains `kind` on `train_set`. `hp` may be NULL for the defaults.
///
/// # Safety
/// `train_set` must be a live handle, `hp` NULL or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wsvd_train(
    kind: WsvdModelKind,
    train_set: *const WsvdDataset,
    hp: *const WsvdHyperParams,
    out: *mut *mut WsvdModel,
) -> WsvdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let ds = &ref_arg(train_set, "train")?.inner;
        let kind: ModelKind = kind.into();
        let hp = match hp.as_ref() {
            Some(h) => h.to_core()?,
            None => HyperParams::defaults_for(kind),
        };
        let (params, _) = train::train(kind, ds, None, &hp)?;
        *out = Box::into_raw(Box::new(WsvdModel {
            inner: TrainedModel::new(params, ds),
        }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn wsvd_model_free(model: *mut WsvdModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Kind and shape of a model.
///
/// # Safety
/// `model` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn wsvd_model_info(
    model: *const WsvdModel,
    kind: *mut WsvdModelKind,
    users: *mut usize,
    items: *mut usize,
    k: *mut usize,
) -> WsvdStatus {
    guard(|| {
        let p = &ref_arg(model, "model")?.inner.params;
        *out_arg(kind, "kind")? = p.kind.into();
        *out_arg(users, "users")? = p.n_users;
        *out_arg(items, "items")? = p.n_items;
        *out_arg(k, "k")? = p.k;
        Ok(())
    })
}

/// Predicted rating for raw ids, unclipped. Unknown ids use the
/// cold-start fallback.
///
/// # Safety
/// `model` must be a live handle, `user`/`item` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wsvd_model_predict(
    model: *const WsvdModel,
    user: *const c_char,
    item: *const c_char,
    out: *mut f64,
) -> WsvdStatus {
    guard(|| {
        let m = &ref_arg(model, "model")?.inner;
        let r = m.predict_raw(str_arg(user, "user")?, str_arg(item, "item")?);
        *out_arg(out, "out")? = r;
        Ok(())
    })
}

/// RMSE of the model on `dataset`, matching ratings by raw id.
///
/// # Safety
/// `model` and `dataset` must be live handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wsvd_model_rmse(
    model: *const WsvdModel,
    dataset: *const WsvdDataset,
    out: *mut f64,
) -> WsvdStatus {
    guard(|| {
        let m = &ref_arg(model, "model")?.inner;
        let ds = &ref_arg(dataset, "dataset")?.inner;
        let out = out_arg(out, "out")?;
        if ds.is_empty() {
            return Err(Failure::invalid("dataset is empty"));
        }
        let (users, items) = (ds.users(), ds.items());
        let sse: f64 = ds
            .ratings()
            .iter()
            .map(|r| {
                let u = users.raw_id(r.user).expect("user index in range");
                let i = items.raw_id(r.item).expect("item index in range");
                let e = r.value - m.predict_raw(u, i);
                e * e
            })
            .sum();
        *out = (sse / ds.len() as f64).sqrt();
        Ok(())
    })
}

/// Copies the WSVD factor weights into `buf`. `needed` always receives the
/// weight count; a short buffer yields `WSVD_STATUS_BUFFER_TOO_SMALL`.
///
/// # Safety
/// `buf` must have room for `len` doubles (may be NULL when `len` is 0).
#[no_mangle]
pub unsafe extern "C" fn wsvd_model_weights(
    model: *const WsvdModel,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> WsvdStatus {
    guard(|| {
        let w = &ref_arg(model, "model")?.inner.params.weights;
        *out_arg(needed, "needed")? = w.len();
        copy_out(w, buf, len)
    })
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<(), Failure> {
    if len < src.len() {
        return Err(Failure::new(
            WsvdStatus::BufferTooSmall,
            format!("buffer holds {len}, need {}", src.len()),
        ));
    }
    if !src.is_empty() {
        if buf.is_null() {
            return Err(Failure::null("buf"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    }
    Ok(())
}

/// Each weight divided by the smallest absolute weight, written to `out`
/// (`len` entries).
///
/// # Safety
/// `weights` and `out` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn wsvd_relative_importance(weights: *const f64, len: usize, out: *mut f64) -> WsvdStatus {
    guard(|| {
        if weights.is_null() {
            return Err(Failure::null("weights"));
        }
        let w = std::slice::from_raw_parts(weights, len);
        let r = eval::relative_importance(w).map_err(|e| Failure::invalid(e.to_string()))?;
        copy_out(&r, out, len)
    })
}

/// Writes the model file; `binary` selects the bit-exact encoding, else text.
///
/// # Safety
/// `model` must be a live handle and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn wsvd_model_save(model: *const WsvdModel, path: *const c_char, binary: bool) -> WsvdStatus {
    guard(|| {
        let m = &ref_arg(model, "model")?.inner;
        let encoding = if binary { Encoding::Binary } else { Encoding::Text };
        m.save(str_arg(path, "path")?, encoding)?;
        Ok(())
    })
}

/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wsvd_model_load(path: *const c_char, out: *mut *mut WsvdModel) -> WsvdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let inner = TrainedModel::load(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(WsvdModel { inner }));
        Ok(())
    })
}
