//! C interface to `onquench`.
//!
//! Every function returns an [`OnqStatus`]; results are written through
//! out-pointers. Models are opaque handles created by `onq_model_new*` and
//! released with [`onq_model_free`]. The message of the last failure on the
//! calling thread is available from [`onq_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use onquench::config::ModelConfig;
use onquench::correlators::KernelTable;
use onquench::entropy::{mode_entropy, slab_entropy};
use onquench::error::Error;
use onquench::evolve::{ModeState, QuenchModel};
use onquench::pipeline::Context;
use onquench::symplectic::EntanglementBlock;

/// Result codes. Nonzero values mirror the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OnqStatus {
    Ok = 0,
    /// Invalid configuration or argument.
    InvalidArgument = 2,
    /// Integration or linear-algebra failure.
    Numerical = 3,
    /// File or format failure.
    Io = 4,
    /// A required pointer was null.
    NullPointer = 5,
    /// The output buffer is too small; the required length was written.
    BufferTooSmall = 6,
    /// Internal panic; the handle must not be used again.
    Panic = 7,
}

/// Opaque model handle: configuration, grids and the current mode state.
pub struct OnqModel {
    model: QuenchModel,
    ctx: Context,
    state: ModeState,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut v = e.borrow_mut();
        v.clear();
        v.extend_from_slice(msg.as_bytes());
        v.push(0);
    });
}

fn status_of(e: &Error) -> OnqStatus {
    match e.exit_code() {
        2 => OnqStatus::InvalidArgument,
        4 => OnqStatus::Io,
        _ => OnqStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), OnqStatus>) -> OnqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OnqStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            OnqStatus::Panic
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, OnqStatus>;
}

impl<T> OrStatus<T> for onquench::error::Result<T> {
    fn or_status(self) -> Result<T, OnqStatus> {
        self.map_err(|e| {
            set_error(&e.to_string());
            status_of(&e)
        })
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), OnqStatus> {
    if p.is_null() {
        set_error(&format!("{name} is null"));
        Err(OnqStatus::NullPointer)
    } else {
        Ok(())
    }
}

fn build(cfg: ModelConfig) -> onquench::error::Result<OnqModel> {
    let model = QuenchModel::new(cfg.clone())?;
    let ctx = Context::new(&cfg)?;
    let state = model.init_modes();
    Ok(OnqModel { model, ctx, state })
}

/// Copies the last error message of this thread (NUL terminated) into
/// `buf`. Returns the full message length including the terminator, so a
/// call with `cap = 0` queries the size.
///
/// # Safety
/// `buf` must be valid for `cap` bytes or null when `cap` is 0.
#[no_mangle]
pub unsafe extern "C" fn onq_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let v = e.borrow();
        let msg: &[u8] = if v.is_empty() { b"\0" } else { &v };
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n - 1) = 0;
        }
        msg.len()
    })
}

/// Creates a model from the desk-scale preset with quench depth `delta`.
///
/// # Safety
/// `out` must be a valid pointer to write a handle into.
#[no_mangle]
pub unsafe extern "C" fn onq_model_new_desk(delta: f64, out: *mut *mut OnqModel) -> OnqStatus {
    guard(|| {
        non_null(out, "out")?;
        let m = build(ModelConfig::desk().with_delta(delta)).or_status()?;
        *out = Box::into_raw(Box::new(m));
        Ok(())
    })
}

/// Creates a model from a JSON configuration document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn onq_model_new_json(json: *const c_char, out: *mut *mut OnqModel) -> OnqStatus {
    guard(|| {
        non_null(json, "json")?;
        non_null(out, "out")?;
        let text = CStr::from_ptr(json).to_str().map_err(|_| {
            set_error("configuration is not UTF-8");
            OnqStatus::InvalidArgument
        })?;
        let m = build(ModelConfig::from_json(text).or_status()?).or_status()?;
        *out = Box::into_raw(Box::new(m));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `model` must come from `onq_model_new*` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn onq_model_free(model: *mut OnqModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Critical mass `r_c` and post-quench mass `r`.
///
/// # Safety
/// `model` must be a live handle; the out-pointers valid or null.
#[no_mangle]
pub unsafe extern "C" fn onq_model_masses(model: *const OnqModel, r_c: *mut f64, r: *mut f64) -> OnqStatus {
    guard(|| {
        non_null(model, "model")?;
        let m = &*model;
        if !r_c.is_null() {
            *r_c = m.model.critical_mass();
        }
        if !r.is_null() {
            *r = m.model.mass();
        }
        Ok(())
    })
}

/// Current time and effective mass of the handle's state.
///
/// # Safety
/// `model` must be a live handle; the out-pointers valid or null.
#[no_mangle]
pub unsafe extern "C" fn onq_model_state(model: *const OnqModel, t: *mut f64, r_eff: *mut f64) -> OnqStatus {
    guard(|| {
        non_null(model, "model")?;
        let m = &*model;
        if !t.is_null() {
            *t = m.state.t;
        }
        if !r_eff.is_null() {
            *r_eff = m.state.r_eff;
        }
        Ok(())
    })
}

/// Advances the state to the step nearest `t`. Times before the current
/// state are rejected.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn onq_model_evolve_to(model: *mut OnqModel, t: f64) -> OnqStatus {
    guard(|| {
        non_null(model, "model")?;
        let m = &mut *model;
        let dt = m.model.config().dt;
        let now = (m.state.t / dt).round() as i64;
        if !t.is_finite() || (t / dt).round() < now as f64 {
            set_error(&format!("cannot evolve from t = {} back to {t}", m.state.t));
            return Err(OnqStatus::InvalidArgument);
        }
        let target = (t / dt).round() as i64;
        let mut s = m.state.clone();
        for _ in now..target {
            s = m.model.step(&s).or_status()?;
        }
        m.state = s;
        Ok(())
    })
}

/// Symplectic eigenvalues (descending) of the slab block at transverse
/// momentum `q_par` for the first `n_s` sites. Writes `n_s` values to
/// `lambdas` if `cap >= n_s`; always writes the count to `len`.
///
/// # Safety
/// `model` must be a live handle; `lambdas` valid for `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn onq_model_spectrum(
    model: *const OnqModel,
    q_par: f64,
    n_s: usize,
    lambdas: *mut f64,
    cap: usize,
    len: *mut usize,
) -> OnqStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(len, "len")?;
        let m = &*model;
        if n_s == 0 || n_s > m.ctx.geom.n_s {
            set_error(&format!("n_s must lie in 1..={}", m.ctx.geom.n_s));
            return Err(OnqStatus::InvalidArgument);
        }
        *len = n_s;
        if cap < n_s {
            set_error("lambda buffer too small");
            return Err(OnqStatus::BufferTooSmall);
        }
        non_null(lambdas, "lambdas")?;
        let cm = m.ctx.matrix(&m.state, q_par).or_status()?.truncated(n_s);
        let block = EntanglementBlock::from_correlation(&cm).or_status()?;
        ptr::copy_nonoverlapping(block.lambdas.as_ptr(), lambdas, n_s);
        Ok(())
    })
}

/// Slab entropy of the configured width: per unit transverse area and the
/// `q_par = 0` block alone.
///
/// # Safety
/// `model` must be a live handle; the out-pointers valid or null.
#[no_mangle]
pub unsafe extern "C" fn onq_model_entropy(
    model: *const OnqModel,
    s_per_area: *mut f64,
    s_zero_mode: *mut f64,
) -> OnqStatus {
    guard(|| {
        non_null(model, "model")?;
        let m = &*model;
        let table = KernelTable::new(&m.state, &m.ctx.grid).or_status()?;
        let rec = slab_entropy(&table, &m.ctx.geom, &m.ctx.transform).or_status()?;
        if !s_per_area.is_null() {
            *s_per_area = rec.s_per_area;
        }
        if !s_zero_mode.is_null() {
            *s_zero_mode = rec.s_zero_mode;
        }
        Ok(())
    })
}

/// Bose-Einstein entropy of one mode with occupation `n >= 0`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn onq_mode_entropy(n: f64, out: *mut f64) -> OnqStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = mode_entropy(n).or_status()?;
        Ok(())
    })
}
