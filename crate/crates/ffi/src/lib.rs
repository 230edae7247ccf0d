//! C ABI for `netar`.
//!
//! Every fallible function returns a [`NetarStatus`]; on failure the message
//! is available from [`netar_last_error`] on the same thread. Objects are
//! opaque handles released with their `_free` function. Matrices cross the
//! boundary as column-major `double` arrays: a `d x n` series stores
//! component `r` of time `k` at `k * d + r`, and a network series stores
//! snapshot `k` entry `(i, j)` at `k * d * d + j * d + i`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nalgebra::DMatrix;
use netar::estimate::ModelFit;
use netar::forecast::{forecast_h, NetworkForecastPolicy};
use netar::harness::{run_experiment, ExperimentConfig, MethodConfig, ScenarioConfig};
use netar::model::{ProcessScenario, SimOptions, SimPath};
use netar::netdyn::AdjacencySeries;
use netar::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetarStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Domain = 4,
    NotStationary = 5,
    Singular = 6,
    MissingSnapshot = 7,
    Parse = 8,
    Io = 9,
    TooManyFailures = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

/// Simulation scenario: network model, process and innovations.
pub struct NetarScenario(ProcessScenario);

/// Simulated series and network snapshots.
pub struct NetarPath(SimPath);

/// Fitted NAR, LNAR or VAR model.
pub struct NetarFit(ModelFit);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> NetarStatus {
    match e {
        Error::Dimension(_) => NetarStatus::Dimension,
        Error::InvalidArgument(_) => NetarStatus::InvalidArgument,
        Error::Domain(_) | Error::NonFinite { .. } => NetarStatus::Domain,
        Error::NotStationary { .. } => NetarStatus::NotStationary,
        Error::Singular { .. } | Error::EigenFailure => NetarStatus::Singular,
        Error::MissingSnapshot { .. } | Error::NetworkTooShort { .. } => {
            NetarStatus::MissingSnapshot
        }
        Error::Parse(_) | Error::Json(_) | Error::Csv(_) | Error::Panel(_) => NetarStatus::Parse,
        Error::Io(_) => NetarStatus::Io,
        Error::TooManyFailures { .. } => NetarStatus::TooManyFailures,
    }
}

enum Fail {
    Lib(Error),
    Null(&'static str),
    Small(usize),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

type Out<T> = std::result::Result<T, Fail>;

/// Runs `f`, records failures and converts panics into [`NetarStatus::Panic`].
fn guard(f: impl FnOnce() -> Out<()>) -> NetarStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NetarStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("{what} is null"));
            NetarStatus::NullPointer
        }
        Ok(Err(Fail::Small(need))) => {
            set_error(format!("output buffer too small: need {need} values"));
            NetarStatus::BufferTooSmall
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            NetarStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Out<&'a str> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Lib(Error::Parse(format!("{what} is not UTF-8"))))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &'static str) -> Out<&'a T> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &'static str) -> Out<&'a [f64]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out(out: *mut f64, cap: usize, data: &[f64]) -> Out<()> {
    if out.is_null() {
        return Err(Fail::Null("output buffer"));
    }
    if cap < data.len() {
        return Err(Fail::Small(data.len()));
    }
    ptr::copy_nonoverlapping(data.as_ptr(), out, data.len());
    Ok(())
}

unsafe fn put<T>(out: *mut *mut T, v: T) -> Out<()> {
    if out.is_null() {
        return Err(Fail::Null("output handle"));
    }
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

unsafe fn network_arg(p: *const f64, d: usize, count: usize) -> Out<AdjacencySeries> {
    let data = slice_arg(p, d * d * count, "network")?;
    let mats = data
        .chunks_exact(d * d.max(1))
        .map(|c| DMatrix::from_column_slice(d, d, c))
        .collect();
    Ok(AdjacencySeries::new(d, 0, mats)?)
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn netar_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn netar_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn netar_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a scenario from JSON (`{"kind": "example1"}`, `{"kind": "custom", ...}`).
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn netar_scenario_from_json(
    json: *const c_char,
    out: *mut *mut NetarScenario,
) -> NetarStatus {
    guard(|| {
        let cfg: ScenarioConfig =
            serde_json::from_str(str_arg(json, "json")?).map_err(Error::from)?;
        put(out, NetarScenario(cfg.build()?))
    })
}

/// # Safety
/// `s` must come from [`netar_scenario_from_json`] or be null.
#[no_mangle]
pub unsafe extern "C" fn netar_scenario_free(s: *mut NetarScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of vertices, 0 for a null handle.
///
/// # Safety
/// `s` must be a live scenario handle or null.
#[no_mangle]
pub unsafe extern "C" fn netar_scenario_dim(s: *const NetarScenario) -> usize {
    s.as_ref().map_or(0, |s| s.0.d())
}

/// Simulates `n` observations after `burn_in` discarded steps. Replicate
/// `replicate` of `seed` is the same path the harness would draw.
///
/// # Safety
/// `s` must be a live scenario handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn netar_scenario_simulate(
    s: *const NetarScenario,
    n: usize,
    burn_in: usize,
    seed: u64,
    replicate: u64,
    out: *mut *mut NetarPath,
) -> NetarStatus {
    guard(|| {
        let s = ref_arg(s, "scenario")?;
        let path =
            s.0.simulate_path(n, &SimOptions::burn_in(burn_in), seed, replicate)?;
        put(out, NetarPath(path))
    })
}

/// # Safety
/// `p` must come from [`netar_scenario_simulate`] or be null.
#[no_mangle]
pub unsafe extern "C" fn netar_path_free(p: *mut NetarPath) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Dimension and length of a path.
///
/// # Safety
/// `p` must be a live path handle; `d` and `n` must be writable.
#[no_mangle]
pub unsafe extern "C" fn netar_path_shape(
    p: *const NetarPath,
    d: *mut usize,
    n: *mut usize,
) -> NetarStatus {
    guard(|| {
        let p = ref_arg(p, "path")?;
        if d.is_null() || n.is_null() {
            return Err(Fail::Null("shape output"));
        }
        *d = p.0.x.nrows();
        *n = p.0.x.ncols();
        Ok(())
    })
}

/// Copies the `d x n` series into `out` (capacity `cap` values).
///
/// # Safety
/// `p` must be a live path handle; `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn netar_path_series(
    p: *const NetarPath,
    out: *mut f64,
    cap: usize,
) -> NetarStatus {
    guard(|| write_out(out, cap, ref_arg(p, "path")?.0.x.as_slice()))
}

/// Copies the `n` network snapshots (`d * d * n` values) into `out`.
/// Snapshot `k` belongs to column `k` of the series.
///
/// # Safety
/// `p` must be a live path handle; `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn netar_path_networks(
    p: *const NetarPath,
    out: *mut f64,
    cap: usize,
) -> NetarStatus {
    guard(|| {
        let p = ref_arg(p, "path")?;
        let flat: Vec<f64> =
            p.0.ads
                .mats()
                .iter()
                .flat_map(|m| m.iter().copied())
                .collect();
        write_out(out, cap, &flat)
    })
}

/// Fits a method described by JSON (`{"family": "nar", "G": [{"kind": "transpose"}]}`)
/// to the `d x n` series `x` with `n_ads` network snapshots aligned to its
/// columns. A fixed `order` in the JSON is used as is; otherwise BIC picks
/// the order in `1..=p_max`.
///
/// # Safety
/// `x` must hold `d * n` doubles, `ads` `d * d * n_ads` doubles (may be null
/// when `n_ads` is 0), `method_json` a nul-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn netar_fit(
    x: *const f64,
    d: usize,
    n: usize,
    ads: *const f64,
    n_ads: usize,
    method_json: *const c_char,
    p_max: usize,
    out: *mut *mut NetarFit,
) -> NetarStatus {
    guard(|| {
        let m: MethodConfig =
            serde_json::from_str(str_arg(method_json, "method_json")?).map_err(Error::from)?;
        m.validate()?;
        let x = DMatrix::from_column_slice(d, n, slice_arg(x, d * n, "x")?);
        let net = network_arg(ads, d, n_ads)?;
        put(out, NetarFit(m.fit(&x, net.mats(), p_max)?))
    })
}

/// # Safety
/// `f` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn netar_fit_free(f: *mut NetarFit) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Selected lag order, 0 for a null handle.
///
/// # Safety
/// `f` must be a live fit handle or null.
#[no_mangle]
pub unsafe extern "C" fn netar_fit_order(f: *const NetarFit) -> usize {
    f.as_ref().map_or(0, |f| f.0.p())
}

/// Fit as JSON; release with [`netar_string_free`].
///
/// # Safety
/// `f` must be a live fit handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn netar_fit_to_json(
    f: *const NetarFit,
    out: *mut *mut c_char,
) -> NetarStatus {
    guard(|| {
        let f = ref_arg(f, "fit")?;
        if out.is_null() {
            return Err(Fail::Null("output string"));
        }
        *out = CString::new(f.0.to_json())
            .expect("JSON has no nul bytes")
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn netar_fit_from_json(
    json: *const c_char,
    out: *mut *mut NetarFit,
) -> NetarStatus {
    guard(|| put(out, NetarFit(ModelFit::from_json(str_arg(json, "json")?)?)))
}

/// `h`-step forecasts from the end of `x` into `out` (`d * h` values).
/// `policy_json` is `{"kind": "known" | "hold_last" | "per_edge_markov"}`.
/// Snapshots of `ads` beyond column `n - 1` are the known future and are
/// read only under the `known` policy.
///
/// # Safety
/// Same layout rules as [`netar_fit`]; `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn netar_forecast(
    f: *const NetarFit,
    x: *const f64,
    d: usize,
    n: usize,
    ads: *const f64,
    n_ads: usize,
    policy_json: *const c_char,
    h: usize,
    out: *mut f64,
    cap: usize,
) -> NetarStatus {
    guard(|| {
        let f = ref_arg(f, "fit")?;
        let policy: NetworkForecastPolicy =
            serde_json::from_str(str_arg(policy_json, "policy_json")?).map_err(Error::from)?;
        let x = DMatrix::from_column_slice(d, n, slice_arg(x, d * n, "x")?);
        let net = network_arg(ads, d, n_ads)?;
        let observed = net.slice(0, net.len().min(n));
        let future = &net.mats()[observed.len()..];
        let fc = forecast_h(&f.0, &x, &observed, &policy, h, Some(future))?;
        write_out(out, cap, fc.points.as_slice())
    })
}

/// Runs an experiment config (JSON text) and writes its report files into
/// `out_dir`.
///
/// # Safety
/// Both arguments must be nul-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn netar_run_experiment(
    config_json: *const c_char,
    out_dir: *const c_char,
) -> NetarStatus {
    guard(|| {
        let cfg = ExperimentConfig::from_json(str_arg(config_json, "config_json")?)?;
        let dir = str_arg(out_dir, "out_dir")?;
        run_experiment(&cfg)?.write(Path::new(dir))?;
        Ok(())
    })
}
