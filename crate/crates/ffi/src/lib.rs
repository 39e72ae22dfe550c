//! C ABI over `vcrb-lab`.
//!
//! Every function returns a [`VcrbStatus`]; results go through out-pointers.
//! On failure a message is kept per thread and read with
//! [`vcrb_last_error`]. Models are opaque handles released with
//! [`vcrb_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use vcrb_lab::backtest::{profitability_threshold, StrategyConfig};
use vcrb_lab::explain::{footrule, RankVector};
use vcrb_lab::gbdt::GbdtModel;
use vcrb_lab::stats::{bonferroni, wilcoxon_one_sided, Alternative, PairedSample};
use vcrb_lab::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VcrbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    Degenerate = 5,
    Internal = 6,
}

/// Trained classifier.
pub struct VcrbModel {
    inner: GbdtModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn status_of(e: &Error) -> VcrbStatus {
    match e {
        Error::Parse { .. } | Error::Serde(_) => VcrbStatus::Parse,
        Error::Io { .. } => VcrbStatus::Io,
        Error::Degenerate(_) => VcrbStatus::Degenerate,
        _ => VcrbStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (VcrbStatus, String)>) -> VcrbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VcrbStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            VcrbStatus::Internal
        }
    }
}

fn lib(e: Error) -> (VcrbStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (VcrbStatus, String) {
    (VcrbStatus::NullPointer, format!("{what} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (VcrbStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (VcrbStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], (VcrbStatus, String)> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn vcrb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vcrb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vcrb_model_from_json(json: *const c_char, out: *mut *mut VcrbModel) -> VcrbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = c_str(json, "json")?;
        let inner = GbdtModel::from_json(text).map_err(lib)?;
        *out = Box::into_raw(Box::new(VcrbModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vcrb_model_load(path: *const c_char, out: *mut *mut VcrbModel) -> VcrbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = c_str(path, "path")?;
        let inner = GbdtModel::load(Path::new(p)).map_err(lib)?;
        *out = Box::into_raw(Box::new(VcrbModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from a `vcrb_model_*` constructor; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn vcrb_model_n_features(model: *const VcrbModel, out: *mut usize) -> VcrbStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = m.inner.n_features();
        Ok(())
    })
}

/// Positive-class probabilities for `n_rows` row-major rows of
/// `n_features` values in the model's feature order. NaN marks a missing
/// value.
///
/// # Safety
/// `rows` must hold `n_rows * n_features` doubles and `out` room for
/// `n_rows` doubles.
#[no_mangle]
pub unsafe extern "C" fn vcrb_model_predict(
    model: *const VcrbModel,
    rows: *const f64,
    n_rows: usize,
    n_features: usize,
    out: *mut f64,
) -> VcrbStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if n_features != m.inner.n_features() {
            return Err((
                VcrbStatus::InvalidArgument,
                format!("model has {} features, got {n_features}", m.inner.n_features()),
            ));
        }
        let total = n_rows
            .checked_mul(n_features)
            .ok_or((VcrbStatus::InvalidArgument, "row buffer size overflows".to_string()))?;
        let values = slice(rows, total, "rows")?;
        if n_rows > 0 && out.is_null() {
            return Err(null("out"));
        }
        let mut buf = vec![None; n_features];
        for r in 0..n_rows {
            for (b, v) in buf.iter_mut().zip(&values[r * n_features..(r + 1) * n_features]) {
                *b = if v.is_nan() { None } else { Some(*v) };
            }
            *out.add(r) = m.inner.predict_row(&buf);
        }
        Ok(())
    })
}

/// # Safety
/// `model` must be null or come from a `vcrb_model_*` constructor, and must
/// not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vcrb_model_free(model: *mut VcrbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Break-even precision of the take-profit/stop-loss strategy, all values
/// in ticks.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vcrb_profitability_threshold(
    take_profit: f64,
    stop_loss: f64,
    fee: f64,
    spread: f64,
    out: *mut f64,
) -> VcrbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = StrategyConfig {
            take_profit_ticks: take_profit,
            stop_loss_ticks: stop_loss,
            fee_ticks: fee,
            spread_ticks: spread,
            ..StrategyConfig::default()
        };
        cfg.validate().map_err(lib)?;
        *out = profitability_threshold(&cfg).map_err(lib)?;
        Ok(())
    })
}

/// One-sided Wilcoxon signed-rank test that `treatment` exceeds `control`.
///
/// # Safety
/// Both arrays must hold `n` doubles; the out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn vcrb_wilcoxon_greater(
    treatment: *const f64,
    control: *const f64,
    n: usize,
    statistic: *mut f64,
    p_value: *mut f64,
) -> VcrbStatus {
    guard(|| {
        if statistic.is_null() || p_value.is_null() {
            return Err(null("out"));
        }
        let t = slice(treatment, n, "treatment")?.to_vec();
        let c = slice(control, n, "control")?.to_vec();
        let sample = PairedSample::new((0..n).map(|i| i.to_string()).collect(), t, c).map_err(lib)?;
        let r = wilcoxon_one_sided(&sample, Alternative::Greater).map_err(lib)?;
        *statistic = r.statistic;
        *p_value = r.p_value;
        Ok(())
    })
}

/// Spearman footrule distance between two rank vectors of length `n`.
///
/// # Safety
/// Both arrays must hold `n` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn vcrb_footrule(a: *const usize, b: *const usize, n: usize, out: *mut u64) -> VcrbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let a = RankVector(slice(a, n, "a")?.to_vec());
        let b = RankVector(slice(b, n, "b")?.to_vec());
        *out = footrule(&a, &b).map_err(lib)?;
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vcrb_bonferroni(alpha: f64, m: usize, out: *mut f64) -> VcrbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = bonferroni(alpha, m).map_err(lib)?;
        Ok(())
    })
}
