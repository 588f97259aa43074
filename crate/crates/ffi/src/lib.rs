//! C ABI for the `ofdm-isac` toolkit.
//!
//! Every fallible function returns an [`IsacStatus`]; on failure the message
//! is kept per thread and can be read with [`isac_last_error_message`].
//! Configuration objects are opaque handles created by `*_new` and released
//! by the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ofdm_isac::alloc::{greedy_mi_allocation, waterfilling, AllocationProblem};
use ofdm_isac::kpi::{crb_bounds, resolutions, Role};
use ofdm_isac::radar_rx::theoretical_pd;
use ofdm_isac::{max_phase_excursion, ArrayConfig, FrameConfig, IsacError};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsacStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Infeasible = 4,
    Singular = 5,
    BufferTooSmall = 6,
    Internal = 7,
}

/// Opaque frame configuration.
pub struct IsacFrameConfig(FrameConfig);

/// Opaque antenna-array configuration.
pub struct IsacArrayConfig(ArrayConfig);

/// Range (m^2), velocity ((m/s)^2) and angle (rad^2) bounds.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IsacCrb {
    pub range: f64,
    pub velocity: f64,
    pub angle: f64,
}

/// Range (m), velocity (m/s) and angle (rad) resolutions.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IsacResolutions {
    pub range: f64,
    pub velocity: f64,
    pub angle: f64,
}

/// Outcome of a greedy allocation in bits.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IsacMiReward {
    pub mi_sensing: f64,
    pub mi_comm: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &IsacError) -> IsacStatus {
    match e {
        IsacError::DimensionMismatch { .. } => IsacStatus::DimensionMismatch,
        IsacError::Infeasible(_) => IsacStatus::Infeasible,
        IsacError::Singular(_) => IsacStatus::Singular,
        IsacError::Io(_) => IsacStatus::Internal,
        _ => IsacStatus::InvalidArgument,
    }
}

struct Failure(IsacStatus, String);

impl From<IsacError> for Failure {
    fn from(e: IsacError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(IsacStatus::NullPointer, format!("`{name}` is null"))
}

/// Runs `f`, records any error or panic, and maps it to a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> IsacStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IsacStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            IsacStatus::Internal
        }
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn slice<'a>(p: *const f64, n: usize, name: &str) -> Result<&'a [f64], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn slice_mut<'a, T>(p: *mut T, n: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn isac_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Length in bytes of the last error message of this thread, including the
/// terminating NUL; 0 when the last call succeeded.
#[no_mangle]
pub extern "C" fn isac_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |s| s.as_bytes_with_nul().len()))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated).
/// Writes an empty string when there is no error.
///
/// # Safety
/// `buf` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn isac_last_error_message(buf: *mut c_char, len: usize) -> IsacStatus {
    if buf.is_null() {
        return IsacStatus::NullPointer;
    }
    let bytes = LAST_ERROR.with(|e| {
        e.borrow()
            .as_ref()
            .map_or_else(|| vec![0], |s| s.as_bytes_with_nul().to_vec())
    });
    if len < bytes.len() {
        return IsacStatus::BufferTooSmall;
    }
    ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, bytes.len());
    IsacStatus::Ok
}

/// Creates a frame of `n` subcarriers and `m` symbols with spacing `df` (Hz),
/// cyclic prefix `cp_ratio / df` and carrier `fc` (Hz); total power `n m`.
///
/// # Safety
/// `out` must be a valid pointer; the handle must be released with
/// [`isac_frame_config_free`].
#[no_mangle]
pub unsafe extern "C" fn isac_frame_config_new(
    n: usize,
    m: usize,
    df: f64,
    cp_ratio: f64,
    fc: f64,
    out: *mut *mut IsacFrameConfig,
) -> IsacStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let cfg = FrameConfig::with_cp_ratio(n, m, df, cp_ratio, fc)?;
        *out = Box::into_raw(Box::new(IsacFrameConfig(cfg)));
        Ok(())
    })
}

/// Releases a frame handle; null is ignored.
///
/// # Safety
/// `cfg` must come from [`isac_frame_config_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn isac_frame_config_free(cfg: *mut IsacFrameConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// OFDM symbol duration including the cyclic prefix (s).
///
/// # Safety
/// `cfg` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn isac_frame_symbol_duration(cfg: *const IsacFrameConfig, out: *mut f64) -> IsacStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        *out_ref(out, "out")? = cfg.0.symbol_duration();
        Ok(())
    })
}

/// Creates an array description: `n_tx`, `n_rx`, `n_comm` elements with
/// spacing `spacing` (m) at wavelength `wavelength` (m).
///
/// # Safety
/// `out` must be valid; release with [`isac_array_config_free`].
#[no_mangle]
pub unsafe extern "C" fn isac_array_config_new(
    n_tx: usize,
    n_rx: usize,
    n_comm: usize,
    spacing: f64,
    wavelength: f64,
    out: *mut *mut IsacArrayConfig,
) -> IsacStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let a = ArrayConfig::new(n_tx, n_rx, n_comm, spacing, wavelength)?;
        *out = Box::into_raw(Box::new(IsacArrayConfig(a)));
        Ok(())
    })
}

/// Releases an array handle; null is ignored.
///
/// # Safety
/// `arrays` must come from [`isac_array_config_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn isac_array_config_free(arrays: *mut IsacArrayConfig) {
    if !arrays.is_null() {
        drop(Box::from_raw(arrays));
    }
}

/// Detection probability `Q1(sqrt(2 gamma), sqrt(-2 ln pfa))` for linear SNR `gamma`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn isac_theoretical_pd(gamma: f64, pfa: f64, out: *mut f64) -> IsacStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = theoretical_pd(gamma, pfa)?;
        Ok(())
    })
}

/// Largest ICI phase `2 pi (2 |v| fc / c) / df` (rad) over one OFDM symbol.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn isac_max_phase_excursion(velocity: f64, fc: f64, df: f64, out: *mut f64) -> IsacStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if !(fc > 0.0 && df > 0.0 && velocity.is_finite()) {
            return Err(Failure(
                IsacStatus::InvalidArgument,
                format!("needs finite velocity and fc, df > 0, got ({velocity}, {fc}, {df})"),
            ));
        }
        *out = max_phase_excursion(velocity, fc, df);
        Ok(())
    })
}

/// Single-target CRBs at linear SNR `gamma` and angle `angle` (rad).
///
/// # Safety
/// Handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn isac_crb_bounds(
    gamma: f64,
    cfg: *const IsacFrameConfig,
    arrays: *const IsacArrayConfig,
    angle: f64,
    out: *mut IsacCrb,
) -> IsacStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        let arrays = arrays.as_ref().ok_or_else(|| null("arrays"))?;
        let out = out_ref(out, "out")?;
        let b = crb_bounds(gamma, &cfg.0, &arrays.0, angle)?;
        *out = IsacCrb {
            range: b.range,
            velocity: b.velocity,
            angle: b.angle,
        };
        Ok(())
    })
}

/// Range, velocity and angle resolutions.
///
/// # Safety
/// Handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn isac_resolutions(
    cfg: *const IsacFrameConfig,
    arrays: *const IsacArrayConfig,
    out: *mut IsacResolutions,
) -> IsacStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        let arrays = arrays.as_ref().ok_or_else(|| null("arrays"))?;
        let r = resolutions(&cfg.0, &arrays.0);
        *out_ref(out, "out")? = IsacResolutions {
            range: r.range,
            velocity: r.velocity,
            angle: r.angle,
        };
        Ok(())
    })
}

/// Water-filling of `total` over `n` gains into `powers_out`.
///
/// # Safety
/// `gains` and `powers_out` must hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn isac_waterfilling(
    gains: *const f64,
    n: usize,
    total: f64,
    powers_out: *mut f64,
) -> IsacStatus {
    guard(|| {
        let g = slice(gains, n, "gains")?;
        let out = slice_mut(powers_out, n, "powers_out")?;
        let p = waterfilling(g, total)?;
        out.copy_from_slice(&p);
        Ok(())
    })
}

/// Greedy sensing/communication split of `n` subcarriers. Writes the powers,
/// the roles (0 sensing, 1 communication) and the achieved MI.
///
/// # Safety
/// `g_comm`, `g_sense`, `powers_out` and `roles_out` must hold `n` elements;
/// `reward_out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn isac_greedy_allocation(
    g_comm: *const f64,
    g_sense: *const f64,
    n: usize,
    total: f64,
    rate_floor: f64,
    powers_out: *mut f64,
    roles_out: *mut u8,
    reward_out: *mut IsacMiReward,
) -> IsacStatus {
    guard(|| {
        let problem = AllocationProblem {
            g_comm: slice(g_comm, n, "g_comm")?.to_vec(),
            g_sense: slice(g_sense, n, "g_sense")?.to_vec(),
            total_power: total,
            rate_floor,
            interference_caps: Vec::new(),
        };
        let powers = slice_mut(powers_out, n, "powers_out")?;
        let roles = slice_mut(roles_out, n, "roles_out")?;
        let reward = out_ref(reward_out, "reward_out")?;
        let r = greedy_mi_allocation(&problem)?;
        powers.copy_from_slice(&r.powers);
        for (o, w) in roles.iter_mut().zip(&r.assignment) {
            *o = u8::from(*w == Role::Comm);
        }
        *reward = IsacMiReward {
            mi_sensing: r.mi_sensing,
            mi_comm: r.mi_comm,
        };
        Ok(())
    })
}
