//! C ABI over the `privfair` auditing library.
//!
//! Every fallible function returns a [`PfStatus`] and writes results through
//! out-pointers. On failure, [`pf_last_error_message`] describes the error on
//! the calling thread. Objects are opaque handles released with their
//! matching `*_free` function; strings returned by the library are released
//! with [`pf_string_free`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use privfair::data::{generate_synthetic, load_csv, DatasetSchema, LabeledDataset, SyntheticSpec};
use privfair::fairness::{
    accuracy_variance_bound, audit_reports, disagreement_probability, expected_accuracy, norm_bounds, AuditOptions,
    MeasureKind, NoiseContext,
};
use privfair::linmodel::{Label, LinearModel};
use privfair::numerics::{std_normal_cdf, std_normal_quantile, DenseMatrix, SpdMatrix};
use privfair::privacy::{calibrate_sigma, perturb, privacy_condition, NoiseSpec, PrivacyBudget};
use privfair::{rng, Error};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Shape = 4,
    NotPositiveDefinite = 5,
    Degenerate = 6,
    Calibration = 7,
    Config = 8,
    Ingestion = 9,
    Divergence = 10,
    Io = 11,
    Panic = 12,
}

/// A linear model `theta`.
pub struct PfModel(LinearModel);

/// A noise law `sigma * N(0, Sigma)`.
pub struct PfNoise(NoiseSpec);

/// A labeled dataset with a trailing bias feature.
pub struct PfDataset(LabeledDataset);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(PfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Domain(_) => PfStatus::Domain,
            Error::Shape { .. } => PfStatus::Shape,
            Error::Asymmetric { .. } | Error::NotPositiveDefinite { .. } => PfStatus::NotPositiveDefinite,
            Error::DegenerateExample(_) | Error::DegenerateGroup(_) => PfStatus::Degenerate,
            Error::Calibration(_) => PfStatus::Calibration,
            Error::Config(_) | Error::Json(_) => PfStatus::Config,
            Error::Ingestion { .. } | Error::Csv(_) => PfStatus::Ingestion,
            Error::Divergence(_) => PfStatus::Divergence,
            Error::Io(_) => PfStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

type FfiResult<T> = Result<T, Failure>;

fn set_last_error(msg: Option<String>) {
    let c = msg.map(|m| CString::new(m.replace('\0', " ")).expect("interior NULs removed"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn guard(body: impl FnOnce() -> FfiResult<()>) -> PfStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error(None);
            PfStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(Some(msg));
            status
        }
        Err(_) => {
            set_last_error(Some("internal panic".into()));
            PfStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(PfStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> FfiResult<()> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> FfiResult<&'a [f64]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn string(p: *const c_char, what: &str) -> FfiResult<String> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Failure(PfStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL after a success.
/// Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn pf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by the library. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn pf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub unsafe extern "C" fn pf_std_normal_cdf(x: f64, out: *mut f64) -> PfStatus {
    guard(|| write(out, std_normal_cdf(x)?, "out"))
}

#[no_mangle]
pub unsafe extern "C" fn pf_std_normal_quantile(q: f64, out: *mut f64) -> PfStatus {
    guard(|| write(out, std_normal_quantile(q)?, "out"))
}

/// Smallest `sigma` meeting the `(epsilon, delta)` budget at the given
/// sensitivity.
#[no_mangle]
pub unsafe extern "C" fn pf_calibrate_sigma(
    epsilon: f64,
    delta: f64,
    sensitivity: f64,
    sigma_out: *mut f64,
) -> PfStatus {
    guard(|| {
        let budget = PrivacyBudget::new(epsilon, delta, sensitivity)?;
        write(sigma_out, calibrate_sigma(&budget)?.sigma, "sigma_out")
    })
}

/// Left-hand side of the privacy condition at `sigma`.
#[no_mangle]
pub unsafe extern "C" fn pf_privacy_condition(
    sigma: f64,
    epsilon: f64,
    delta: f64,
    sensitivity: f64,
    out: *mut f64,
) -> PfStatus {
    guard(|| {
        let budget = PrivacyBudget::new(epsilon, delta, sensitivity)?;
        write(out, privacy_condition(sigma, &budget)?, "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn pf_model_new(weights: *const f64, len: usize, out: *mut *mut PfModel) -> PfStatus {
    guard(|| {
        let w = slice(weights, len, "weights")?.to_vec();
        write(out, boxed(PfModel(LinearModel::new(w)?)), "out")
    })
}

/// Reads a model file `{"weights": [...]}`.
#[no_mangle]
pub unsafe extern "C" fn pf_model_load_json(path: *const c_char, out: *mut *mut PfModel) -> PfStatus {
    guard(|| {
        let path = string(path, "path")?;
        write(out, boxed(PfModel(LinearModel::from_json_file(path)?)), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn pf_model_dim(model: *const PfModel, out: *mut usize) -> PfStatus {
    guard(|| write(out, deref(model, "model")?.0.dim(), "out"))
}

/// Copies the weights into `buffer`, which must hold exactly `len` values.
#[no_mangle]
pub unsafe extern "C" fn pf_model_weights(model: *const PfModel, buffer: *mut f64, len: usize) -> PfStatus {
    guard(|| {
        let w = deref(model, "model")?.0.weights();
        if len != w.len() {
            return Err(Error::Shape { expected: w.len(), got: len }.into());
        }
        if buffer.is_null() {
            return Err(null("buffer"));
        }
        ptr::copy_nonoverlapping(w.as_ptr(), buffer, len);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pf_model_free(model: *mut PfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

#[no_mangle]
pub unsafe extern "C" fn pf_noise_isotropic(sigma: f64, dim: usize, out: *mut *mut PfNoise) -> PfStatus {
    guard(|| write(out, boxed(PfNoise(NoiseSpec::isotropic(sigma, dim)?)), "out"))
}

/// Noise with a `dim x dim` SPD covariance given row-major.
#[no_mangle]
pub unsafe extern "C" fn pf_noise_new(
    sigma: f64,
    covariance: *const f64,
    dim: usize,
    out: *mut *mut PfNoise,
) -> PfStatus {
    guard(|| {
        let entries = slice(covariance, dim * dim, "covariance")?;
        let rows: Vec<Vec<f64>> = entries.chunks(dim.max(1)).map(<[f64]>::to_vec).collect();
        let cov = SpdMatrix::new(DenseMatrix::from_rows(&rows)?)?;
        write(out, boxed(PfNoise(NoiseSpec::new(sigma, cov)?)), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn pf_noise_free(noise: *mut PfNoise) {
    if !noise.is_null() {
        drop(Box::from_raw(noise));
    }
}

/// Draws one private model `theta + sigma * xi` from stream `seed`.
#[no_mangle]
pub unsafe extern "C" fn pf_perturb(
    model: *const PfModel,
    noise: *const PfNoise,
    seed: u64,
    out: *mut *mut PfModel,
) -> PfStatus {
    guard(|| {
        let private = perturb(&deref(model, "model")?.0, &deref(noise, "noise")?.0, &mut rng::stream(seed))?;
        write(out, boxed(PfModel(private)), "out")
    })
}

/// Loads a CSV file; `schema_json` is the column-role schema as JSON.
#[no_mangle]
pub unsafe extern "C" fn pf_dataset_load_csv(
    path: *const c_char,
    schema_json: *const c_char,
    out: *mut *mut PfDataset,
) -> PfStatus {
    guard(|| {
        let path = string(path, "path")?;
        let schema: DatasetSchema = serde_json::from_str(&string(schema_json, "schema_json")?).map_err(Error::from)?;
        write(out, boxed(PfDataset(load_csv(path, &schema)?)), "out")
    })
}

/// Built-in two-group synthetic population.
#[no_mangle]
pub unsafe extern "C" fn pf_dataset_synthetic(
    n: usize,
    p: usize,
    proportion_a: f64,
    separation: f64,
    seed: u64,
    out: *mut *mut PfDataset,
) -> PfStatus {
    guard(|| {
        let spec = SyntheticSpec::two_groups(n, p, (proportion_a, 1.0 - proportion_a), separation, seed);
        write(out, boxed(PfDataset(generate_synthetic(&spec)?)), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn pf_dataset_len(dataset: *const PfDataset, out: *mut usize) -> PfStatus {
    guard(|| write(out, deref(dataset, "dataset")?.0.len(), "out"))
}

/// Feature dimension including the bias.
#[no_mangle]
pub unsafe extern "C" fn pf_dataset_dim(dataset: *const PfDataset, out: *mut usize) -> PfStatus {
    guard(|| write(out, deref(dataset, "dataset")?.0.dim(), "out"))
}

#[no_mangle]
pub unsafe extern "C" fn pf_dataset_free(dataset: *mut PfDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// High-probability bounds on the norm of the private model.
#[no_mangle]
pub unsafe extern "C" fn pf_norm_bounds(
    model: *const PfModel,
    noise: *const PfNoise,
    zeta: f64,
    lower: *mut f64,
    upper: *mut f64,
) -> PfStatus {
    guard(|| {
        let b = norm_bounds(&deref(model, "model")?.0, &deref(noise, "noise")?.0, zeta)?;
        write(lower, b.lower, "lower")?;
        write(upper, b.upper, "upper")
    })
}

/// Probability that the private model flips the prediction on `x`;
/// `label` is +1 or -1.
#[no_mangle]
pub unsafe extern "C" fn pf_disagreement_probability(
    model: *const PfModel,
    noise: *const PfNoise,
    x: *const f64,
    len: usize,
    label: c_int,
    out: *mut f64,
) -> PfStatus {
    guard(|| {
        let y = match label {
            1 => Label::Positive,
            -1 => Label::Negative,
            other => return Err(Failure(PfStatus::InvalidArgument, format!("label must be +1 or -1, got {other}"))),
        };
        let x = slice(x, len, "x")?;
        let q = disagreement_probability(&deref(model, "model")?.0, &deref(noise, "noise")?.0, x, y)?;
        write(out, q, "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn pf_expected_accuracy(
    model: *const PfModel,
    noise: *const PfNoise,
    dataset: *const PfDataset,
    out: *mut f64,
) -> PfStatus {
    guard(|| {
        let d = &deref(dataset, "dataset")?.0;
        let e = expected_accuracy(&deref(model, "model")?.0, &deref(noise, "noise")?.0, d.examples())?;
        write(out, e, "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn pf_accuracy_variance_bound(
    model: *const PfModel,
    noise: *const PfNoise,
    dataset: *const PfDataset,
    out: *mut f64,
) -> PfStatus {
    guard(|| {
        let d = &deref(dataset, "dataset")?.0;
        let v = accuracy_variance_bound(&deref(model, "model")?.0, &deref(noise, "noise")?.0, d.examples())?;
        write(out, v, "out")
    })
}

/// Every bound report (norm, disagreement, accuracy, all fairness measures)
/// at each confidence level, as a JSON array. Free with [`pf_string_free`].
#[no_mangle]
pub unsafe extern "C" fn pf_audit_json(
    model: *const PfModel,
    noise: *const PfNoise,
    dataset: *const PfDataset,
    zetas: *const f64,
    n_zetas: usize,
    out: *mut *mut c_char,
) -> PfStatus {
    guard(|| {
        let noise = &deref(noise, "noise")?.0;
        let zetas = slice(zetas, n_zetas, "zetas")?;
        if zetas.is_empty() {
            return Err(Failure(PfStatus::InvalidArgument, "need at least one zeta".into()));
        }
        let options = AuditOptions {
            zetas: zetas.to_vec(),
            measures: MeasureKind::ALL.to_vec(),
            finite_sample: None,
        };
        let ctx = NoiseContext::new(noise, None);
        let reports = audit_reports(&deref(model, "model")?.0, noise, &ctx, &deref(dataset, "dataset")?.0, &options)?;
        let text = serde_json::to_string(&reports).map_err(Error::from)?;
        let c = CString::new(text).map_err(|_| Failure(PfStatus::InvalidArgument, "report contains NUL".into()))?;
        write(out, c.into_raw(), "out")
    })
}
