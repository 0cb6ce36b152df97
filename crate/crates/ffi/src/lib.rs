//! C ABI over the `qsfuse` core.
//!
//! Every fallible call returns a [`QsStatus`]; on failure the message is
//! available from [`qs_last_error`] on the same thread until the next failing
//! call. Handles are opaque and must be released with their `_free` function.
//! Panics never cross the boundary; they surface as `QS_STATUS_ERR_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nalgebra::DMatrix;
use qsfuse::ingest::{keyword_prefilter, PatternTable, SourceClass};
use qsfuse::lexfeat::{category_features, load_lexicon, tokenize, Lexicon, Provenance};
use qsfuse::models::{compute_metrics, FittedModel, GpParams, SvrParams, Trainer};
use qsfuse::pipeline::{Pipeline, PipelineConfig, Stage};
use qsfuse::weighin::{
    apply_exclusions, build_series, count_violations, parse_weighin, pounds_to_kg, reference_weight, to_pounds,
    ExclusionReason, ExclusionThresholds, NoMatch, Unit, WeighIn, WeighInGrammar, WeighInSeries,
};
use qsfuse::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QsStatus {
    Ok = 0,
    /// A required pointer argument was null.
    ErrNull = 1,
    ErrInvalidArgument = 2,
    /// Malformed input text or file.
    ErrParse = 3,
    ErrIo = 4,
    /// An upstream pipeline stage has not been run.
    ErrMissingStage = 5,
    /// Kernel matrix not positive definite, or non-finite values.
    ErrNumeric = 6,
    ErrConfig = 7,
    /// No weigh-in rule matched, or the matched value was not positive.
    ErrNoMatch = 8,
    /// The series is excluded or empty, so no reference weight exists.
    ErrNoReference = 9,
    ErrPanic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QsUnit {
    Kg = 0,
    Lb = 1,
}

impl From<QsUnit> for Unit {
    fn from(u: QsUnit) -> Unit {
        match u {
            QsUnit::Kg => Unit::Kg,
            QsUnit::Lb => Unit::Lb,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QsSourceClass {
    WeighIn = 0,
    OtherWeightLoss = 1,
    Fitness = 2,
    Normal = 3,
}

impl From<SourceClass> for QsSourceClass {
    fn from(c: SourceClass) -> Self {
        match c {
            SourceClass::WeighIn => QsSourceClass::WeighIn,
            SourceClass::OtherWeightLoss => QsSourceClass::OtherWeightLoss,
            SourceClass::Fitness => QsSourceClass::Fitness,
            SourceClass::Normal => QsSourceClass::Normal,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QsExclusion {
    None = 0,
    Violations = 1,
    LowAvg = 2,
    HighAvg = 3,
}

impl From<ExclusionReason> for QsExclusion {
    fn from(r: ExclusionReason) -> Self {
        match r {
            ExclusionReason::None => QsExclusion::None,
            ExclusionReason::Violations => QsExclusion::Violations,
            ExclusionReason::LowAvg => QsExclusion::LowAvg,
            ExclusionReason::HighAvg => QsExclusion::HighAvg,
        }
    }
}

/// `r` is only meaningful when `r_defined` is true.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QsMetrics {
    pub r: f64,
    pub r_defined: bool,
    pub mae: f64,
    pub rmse: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QsThresholds {
    pub max_violations: usize,
    pub low_lb: f64,
    pub high_lb: f64,
}

/// Default cleaning thresholds.
#[no_mangle]
pub extern "C" fn qs_thresholds_default() -> QsThresholds {
    let t = ExclusionThresholds::default();
    QsThresholds {
        max_violations: t.max_violations,
        low_lb: t.low_lb,
        high_lb: t.high_lb,
    }
}

/// Weigh-in series under construction. Opaque.
pub struct QsSeries {
    user_id: String,
    obs: Vec<WeighIn>,
}

/// Loaded lexicon. Opaque.
pub struct QsLexicon {
    inner: Lexicon,
}

/// Fitted regression model. Opaque.
pub struct QsModel {
    inner: FittedModel,
    n_features: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: QsStatus, msg: impl Into<String>) -> QsStatus {
    set_error(msg.into());
    status
}

fn status_of(e: &Error) -> QsStatus {
    match e {
        Error::Io { .. } => QsStatus::ErrIo,
        Error::Parse { .. } | Error::Json(_) | Error::Csv(_) => QsStatus::ErrParse,
        Error::InvalidArgument(_) | Error::LabelMismatch(_) => QsStatus::ErrInvalidArgument,
        Error::NoReferenceWeight(_) => QsStatus::ErrNoReference,
        Error::NotPositiveDefinite | Error::NonFinite { .. } => QsStatus::ErrNumeric,
        Error::MissingStage { .. } => QsStatus::ErrMissingStage,
        Error::Config(_) => QsStatus::ErrConfig,
    }
}

fn from_error(e: Error) -> QsStatus {
    fail(status_of(&e), e.to_string())
}

/// Runs `f`, converting panics into `ErrPanic`.
fn guard(f: impl FnOnce() -> QsStatus) -> QsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            fail(QsStatus::ErrPanic, format!("internal panic: {msg}"))
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, QsStatus> {
    if p.is_null() {
        return Err(fail(QsStatus::ErrNull, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(QsStatus::ErrInvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], QsStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(QsStatus::ErrNull, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! out_arg {
    ($p:expr) => {
        if $p.is_null() {
            return fail(QsStatus::ErrNull, concat!(stringify!($p), " is null"));
        }
    };
}

/// Message for the last failing call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Converts a weight to pounds. Fails on non-finite or negative input.
#[no_mangle]
pub extern "C" fn qs_to_pounds(value: f64, unit: QsUnit, out_lb: *mut f64) -> QsStatus {
    guard(|| {
        out_arg!(out_lb);
        match to_pounds(value, unit.into()) {
            Ok(v) => {
                unsafe { *out_lb = v };
                QsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

#[no_mangle]
pub extern "C" fn qs_pounds_to_kg(lb: f64) -> f64 {
    pounds_to_kg(lb)
}

/// Extracts a weigh-in value with the default grammar.
///
/// # Safety
/// `text` must be a NUL-terminated string; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn qs_parse_weighin(text: *const c_char, out_value: *mut f64, out_unit: *mut QsUnit) -> QsStatus {
    guard(|| {
        let text = tri!(str_arg(text, "text"));
        out_arg!(out_value);
        out_arg!(out_unit);
        let grammar = WeighInGrammar::default();
        match parse_weighin(text, &grammar) {
            Ok(m) => {
                *out_value = m.value;
                *out_unit = match m.unit {
                    Unit::Kg => QsUnit::Kg,
                    Unit::Lb => QsUnit::Lb,
                };
                QsStatus::Ok
            }
            Err(NoMatch::NoRule) => fail(QsStatus::ErrNoMatch, "no weigh-in rule matched"),
            Err(NoMatch::Nonpositive) => fail(QsStatus::ErrNoMatch, "weigh-in value is not positive"),
        }
    })
}

/// Classifies a tweet's source label with the default pattern table.
///
/// # Safety
/// `label` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qs_classify_source(label: *const c_char, out: *mut QsSourceClass) -> QsStatus {
    guard(|| {
        let label = tri!(str_arg(label, "label"));
        out_arg!(out);
        *out = PatternTable::default().classify(label).into();
        QsStatus::Ok
    })
}

/// Keyword prefilter for raw stream captures.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qs_keyword_prefilter(text: *const c_char, out: *mut bool) -> QsStatus {
    guard(|| {
        let text = tri!(str_arg(text, "text"));
        out_arg!(out);
        *out = keyword_prefilter(text);
        QsStatus::Ok
    })
}

/// Pearson r, MAE and RMSE over `n` pairs.
///
/// # Safety
/// Both arrays must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qs_metrics(y_true: *const f64, y_pred: *const f64, n: usize, out: *mut QsMetrics) -> QsStatus {
    guard(|| {
        let a = tri!(slice_arg(y_true, n, "y_true"));
        let b = tri!(slice_arg(y_pred, n, "y_pred"));
        out_arg!(out);
        match compute_metrics(a, b) {
            Ok(m) => {
                *out = QsMetrics {
                    r: m.r.unwrap_or(f64::NAN),
                    r_defined: m.r.is_some(),
                    mae: m.mae,
                    rmse: m.rmse,
                };
                QsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Starts an empty series for `user_id`.
///
/// # Safety
/// `user_id` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qs_series_new(user_id: *const c_char, out: *mut *mut QsSeries) -> QsStatus {
    guard(|| {
        let user_id = tri!(str_arg(user_id, "user_id"));
        out_arg!(out);
        *out = Box::into_raw(Box::new(QsSeries {
            user_id: user_id.to_string(),
            obs: Vec::new(),
        }));
        QsStatus::Ok
    })
}

/// # Safety
/// `series` must come from [`qs_series_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qs_series_push(series: *mut QsSeries, day_index: i64, weight_lb: f64) -> QsStatus {
    guard(|| {
        out_arg!(series);
        if !weight_lb.is_finite() {
            return fail(QsStatus::ErrInvalidArgument, "weight is not finite");
        }
        let s = &mut *series;
        s.obs.push(WeighIn {
            user_id: s.user_id.clone(),
            day_index,
            weight_lb,
        });
        QsStatus::Ok
    })
}

unsafe fn built(series: *const QsSeries) -> WeighInSeries {
    let s = &*series;
    build_series(&s.user_id, s.obs.clone())
}

/// Number of implausible consecutive transitions (after sorting by day).
///
/// # Safety
/// `series` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qs_series_violations(series: *const QsSeries, out: *mut usize) -> QsStatus {
    guard(|| {
        out_arg!(series);
        out_arg!(out);
        *out = count_violations(&built(series));
        QsStatus::Ok
    })
}

/// Applies the exclusion rules. A null `thresholds` means the defaults.
///
/// # Safety
/// `series` must be a live handle; `thresholds` null or valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qs_series_exclusion(
    series: *const QsSeries,
    thresholds: *const QsThresholds,
    out: *mut QsExclusion,
) -> QsStatus {
    guard(|| {
        out_arg!(series);
        out_arg!(out);
        let t = if thresholds.is_null() {
            ExclusionThresholds::default()
        } else {
            let t = &*thresholds;
            ExclusionThresholds {
                max_violations: t.max_violations,
                low_lb: t.low_lb,
                high_lb: t.high_lb,
            }
        };
        *out = apply_exclusions(built(series), &t).excluded.unwrap_or_default().into();
        QsStatus::Ok
    })
}

/// Mean weight of a series that passes the default exclusion rules.
///
/// # Safety
/// `series` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qs_series_reference_weight(series: *const QsSeries, out: *mut f64) -> QsStatus {
    guard(|| {
        out_arg!(series);
        out_arg!(out);
        let s = apply_exclusions(built(series), &ExclusionThresholds::default());
        match reference_weight(&s) {
            Ok(v) => {
                *out = v;
                QsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `series` must be null or a handle from [`qs_series_new`], freed once.
#[no_mangle]
pub unsafe extern "C" fn qs_series_free(series: *mut QsSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Loads a `.dic` lexicon file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qs_lexicon_load(path: *const c_char, out: *mut *mut QsLexicon) -> QsStatus {
    guard(|| {
        let path = tri!(str_arg(path, "path"));
        out_arg!(out);
        match load_lexicon(Path::new(path)) {
            Ok(l) => {
                *out = Box::into_raw(Box::new(QsLexicon { inner: l }));
                QsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `lexicon` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qs_lexicon_category_count(lexicon: *const QsLexicon) -> usize {
    if lexicon.is_null() {
        return 0;
    }
    (*lexicon).inner.category_count()
}

/// Per-category token rates of `text`, in the lexicon's category order.
/// `out` must have room for `cap` values; `written` receives the category
/// count, and the call fails if `cap` is smaller.
///
/// # Safety
/// Pointers must be valid; `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn qs_lexicon_rates(
    lexicon: *const QsLexicon,
    text: *const c_char,
    out: *mut f64,
    cap: usize,
    written: *mut usize,
) -> QsStatus {
    guard(|| {
        out_arg!(lexicon);
        let text = tri!(str_arg(text, "text"));
        out_arg!(written);
        let lex = &(*lexicon).inner;
        let rates = category_features(&tokenize(text), lex, Provenance::Tweet);
        *written = rates.len();
        if cap < rates.len() {
            return fail(
                QsStatus::ErrInvalidArgument,
                format!("output holds {cap} values, lexicon has {} categories", rates.len()),
            );
        }
        if !rates.is_empty() {
            out_arg!(out);
        }
        for (i, (_, v)) in rates.into_iter().enumerate() {
            *out.add(i) = v;
        }
        QsStatus::Ok
    })
}

/// # Safety
/// `lexicon` must be null or a handle from [`qs_lexicon_load`], freed once.
#[no_mangle]
pub unsafe extern "C" fn qs_lexicon_free(lexicon: *mut QsLexicon) {
    if !lexicon.is_null() {
        drop(Box::from_raw(lexicon));
    }
}

unsafe fn fit(x: *const f64, n: usize, d: usize, y: *const f64, trainer: Trainer, out: *mut *mut QsModel) -> QsStatus {
    let Some(len) = n.checked_mul(d) else {
        return fail(QsStatus::ErrInvalidArgument, "n * d overflows");
    };
    let xs = tri!(slice_arg(x, len, "x"));
    let ys = tri!(slice_arg(y, n, "y"));
    out_arg!(out);
    let m = DMatrix::from_row_slice(n, d, xs);
    let langs = vec![String::new(); n];
    match trainer.fit(&m, ys, &langs) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(QsModel { inner, n_features: d }));
            QsStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Fits a squared-exponential GP on a row-major `n x d` matrix. Non-positive
/// `length_scale` or `noise_var` mean "use the default"; `grid_search`
/// selects both by marginal likelihood instead.
///
/// # Safety
/// `x` must hold `n * d` doubles, `y` `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qs_gp_fit(
    x: *const f64,
    n: usize,
    d: usize,
    y: *const f64,
    length_scale: f64,
    noise_var: f64,
    grid_search: bool,
    out: *mut *mut QsModel,
) -> QsStatus {
    guard(|| {
        let p = GpParams {
            length_scale: (length_scale > 0.0).then_some(length_scale),
            signal_var: None,
            noise_var: (noise_var > 0.0).then_some(noise_var),
            grid_search,
        };
        fit(x, n, d, y, Trainer::GpRbf(p), out)
    })
}

/// Fits an epsilon-insensitive linear SVR on a row-major `n x d` matrix.
///
/// # Safety
/// `x` must hold `n * d` doubles, `y` `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qs_svr_fit(
    x: *const f64,
    n: usize,
    d: usize,
    y: *const f64,
    c: f64,
    epsilon: f64,
    out: *mut *mut QsModel,
) -> QsStatus {
    guard(|| {
        let p = SvrParams {
            c,
            epsilon,
            ..Default::default()
        };
        fit(x, n, d, y, Trainer::SvrLinear(p), out)
    })
}

/// Predicts `n` rows of a row-major matrix with the fitted width.
///
/// # Safety
/// `model` must be live; `x` must hold `n * d` doubles and `out` `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn qs_model_predict(
    model: *const QsModel,
    x: *const f64,
    n: usize,
    d: usize,
    out: *mut f64,
) -> QsStatus {
    guard(|| {
        out_arg!(model);
        let m = &*model;
        if d != m.n_features {
            return fail(
                QsStatus::ErrInvalidArgument,
                format!("model expects {} features, got {d}", m.n_features),
            );
        }
        let Some(len) = n.checked_mul(d) else {
            return fail(QsStatus::ErrInvalidArgument, "n * d overflows");
        };
        let xs = tri!(slice_arg(x, len, "x"));
        if n > 0 {
            out_arg!(out);
        }
        for i in 0..n {
            *out.add(i) = m.inner.predict_row(&xs[i * d..(i + 1) * d], "");
        }
        QsStatus::Ok
    })
}

/// # Safety
/// `model` must be null or a handle from a `_fit` call, freed once.
#[no_mangle]
pub unsafe extern "C" fn qs_model_free(model: *mut QsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Runs one pipeline stage (`"synth"`, `"ingest"`, ..., `"report"`) in
/// `out_dir`. `config_path` may be null for the default configuration. A
/// report with missing sections returns `ErrMissingStage`.
///
/// # Safety
/// String arguments must be NUL-terminated (or null where allowed).
#[no_mangle]
pub unsafe extern "C" fn qs_run_stage(config_path: *const c_char, out_dir: *const c_char, stage: *const c_char) -> QsStatus {
    guard(|| {
        let out_dir = tri!(str_arg(out_dir, "out_dir"));
        let stage = tri!(str_arg(stage, "stage"));
        let stage: Stage = match stage.parse() {
            Ok(s) => s,
            Err(e) => return from_error(e),
        };
        let config = if config_path.is_null() {
            PipelineConfig::default()
        } else {
            match PipelineConfig::load(Path::new(tri!(str_arg(config_path, "config_path")))) {
                Ok(c) => c,
                Err(e) => return from_error(e),
            }
        };
        let outcome = Pipeline::new(config, Path::new(out_dir)).and_then(|p| p.run(stage));
        match outcome {
            Ok(o) if o.gaps.is_empty() => QsStatus::Ok,
            Ok(o) => fail(QsStatus::ErrMissingStage, o.gaps.join("; ")),
            Err(e) => from_error(e),
        }
    })
}
