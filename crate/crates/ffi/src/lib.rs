//! C interface to the heralded-state simulator.
//!
//! Every function returns a [`PbStatus`]; results go through out-pointers.
//! On failure `pb_last_error()` describes the most recent error on the
//! calling thread. Handles are opaque and must be released with their
//! matching `*_free` function.

use paintbrush::evolve::{heralded_state, transmission_rate};
use paintbrush::herald::{fidelity_min, DetectorModel};
use paintbrush::linalg::C64;
use paintbrush::pulses::{cat_pulse, mech_qubit_pulse, synthesize_from_coeffs, CoeffBasis, CoefficientTarget, DriveWaveform};
use paintbrush::statespace::{vacuum_in_displaced_basis, CavityModel, MechModel, SpinModel, SystemModel};
use paintbrush::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PbStatus {
    Ok = 0,
    /// Null pointer, wrong buffer length or out-of-range parameter.
    InvalidArgument = 1,
    /// Matter basis too small for the state produced.
    CutoffInsufficient = 2,
    /// Cavity population reached the largest cutoff tried.
    CavityLeakage = 3,
    UnreachableTarget = 4,
    InvalidTarget = 5,
    /// Integrator or quadrature failure, or a zero-norm state.
    Numerical = 6,
    /// Malformed waveform JSON.
    Parse = 7,
    /// A Rust panic was caught at the boundary.
    Panic = 8,
}

/// Matter system together with its cavity.
pub struct PbSystem {
    system: SystemModel,
    cavity: CavityModel,
}

pub struct PbWaveform(DriveWaveform);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("NUL bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> PbStatus {
    match err {
        Error::InvalidParameter(_) | Error::Config(_) => PbStatus::InvalidArgument,
        Error::CutoffInsufficient { .. } => PbStatus::CutoffInsufficient,
        Error::CavityLeakage { .. } => PbStatus::CavityLeakage,
        Error::UnreachableTarget { .. } => PbStatus::UnreachableTarget,
        Error::InvalidTarget(_) => PbStatus::InvalidTarget,
        Error::StepUnderflow { .. } | Error::Quadrature(_) | Error::ZeroNorm => PbStatus::Numerical,
        Error::Json(_) | Error::Io(_) => PbStatus::Parse,
        Error::Shared(e) => status_of(e),
    }
}

struct Fail(PbStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn bad(msg: &str) -> Fail {
    Fail(PbStatus::InvalidArgument, msg.to_string())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PbStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            PbStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| bad(&format!("{what} is null")))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(bad(&format!("{what} is null")));
    }
    out.write(value);
    Ok(())
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn pb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn new_system(system: SystemModel, kappa: f64, kappa_loss: f64, out: *mut *mut PbSystem) -> Result<(), Fail> {
    let cavity = CavityModel::new(kappa)?.with_loss(kappa_loss)?;
    let handle = Box::into_raw(Box::new(PbSystem { system, cavity }));
    // SAFETY: checked for null in `put`; on failure the box is reclaimed.
    unsafe {
        put(out, handle, "out").inspect_err(|_| drop(Box::from_raw(handle)))
    }
}

/// Collective spin of `n_atoms` atoms with shift `omega_s` per photon.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn pb_system_spin_new(
    n_atoms: usize,
    omega_s: f64,
    kappa: f64,
    kappa_loss: f64,
    out: *mut *mut PbSystem,
) -> PbStatus {
    guard(|| new_system(SpinModel::new(n_atoms, omega_s)?.into(), kappa, kappa_loss, out))
}

/// Mechanical oscillator truncated at `n_ph_max` phonons.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn pb_system_mech_new(
    omega_m: f64,
    g0: f64,
    n_ph_max: usize,
    kappa: f64,
    kappa_loss: f64,
    out: *mut *mut PbSystem,
) -> PbStatus {
    guard(|| new_system(MechModel::new(omega_m, g0, n_ph_max)?.into(), kappa, kappa_loss, out))
}

/// # Safety
/// `sys` must be null or a handle from `pb_system_*_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pb_system_free(sys: *mut PbSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Dimension of the matter basis (length of state vectors).
///
/// # Safety
/// `sys` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pb_system_dim(sys: *const PbSystem, out: *mut usize) -> PbStatus {
    guard(|| put(out, get(sys, "sys")?.system.dim(), "out"))
}

fn new_waveform(w: DriveWaveform, out: *mut *mut PbWaveform) -> Result<(), Fail> {
    let handle = Box::into_raw(Box::new(PbWaveform(w)));
    // SAFETY: as in `new_system`.
    unsafe { put(out, handle, "out").inspect_err(|_| drop(Box::from_raw(handle))) }
}

/// Double-kick cat drive with branch separation `phi_sep`.
///
/// # Safety
/// `sys` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pb_waveform_cat(
    sys: *const PbSystem,
    phi_sep: f64,
    rel_phase: f64,
    eps_over_omega: f64,
    out: *mut *mut PbWaveform,
) -> PbStatus {
    guard(|| {
        let s = get(sys, "sys")?;
        let omega = s.system.omega();
        new_waveform(cat_pulse(phi_sep, rel_phase, omega, s.cavity.kappa_n(), eps_over_omega * omega)?, out)
    })
}

/// Drive painting the target coefficients `re[k] + i im[k]` onto the default
/// initial state: Dicke levels in ascending `m` for spins, displaced Fock
/// levels from `k = 0` for mechanics.
///
/// # Safety
/// `sys` must be a live handle, `re` and `im` readable for `len` doubles and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pb_waveform_coeffs(
    sys: *const PbSystem,
    re: *const f64,
    im: *const f64,
    len: usize,
    eps_over_omega: f64,
    out: *mut *mut PbWaveform,
) -> PbStatus {
    guard(|| {
        let s = get(sys, "sys")?;
        if re.is_null() || im.is_null() || len == 0 {
            return Err(bad("coefficient arrays must be non-null and non-empty"));
        }
        let re = std::slice::from_raw_parts(re, len);
        let im = std::slice::from_raw_parts(im, len);
        let coeffs: Vec<C64> = re.iter().zip(im).map(|(&a, &b)| C64::new(a, b)).collect();
        let omega = s.system.omega();
        let (target, c0, mu) = match &s.system {
            SystemModel::Spin(_) => {
                let c0: Vec<C64> = s.system.default_initial().iter().copied().collect();
                (CoefficientTarget::new(coeffs, CoeffBasis::Dicke)?, c0, 0.0)
            }
            SystemModel::Mech(m) => {
                let c0 = vacuum_in_displaced_basis(m.x1(), len).into_iter().map(|v| C64::new(v, 0.0)).collect();
                (CoefficientTarget::new(coeffs, CoeffBasis::DisplacedFock)?, c0, m.mu())
            }
        };
        new_waveform(synthesize_from_coeffs(&target, &c0, omega, s.cavity.kappa_n(), mu, eps_over_omega * omega)?, out)
    })
}

/// Mechanical-qubit drive; fails with `InvalidArgument` for spin systems.
///
/// # Safety
/// `sys` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pb_waveform_mech_qubit(sys: *const PbSystem, eps_over_omega: f64, out: *mut *mut PbWaveform) -> PbStatus {
    guard(|| {
        let s = get(sys, "sys")?;
        let SystemModel::Mech(m) = &s.system else {
            return Err(bad("the qubit drive needs a mechanical system"));
        };
        new_waveform(mech_qubit_pulse(m, s.cavity.kappa_n(), eps_over_omega * m.omega_m())?, out)
    })
}

/// Parses a waveform from its JSON exchange form.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pb_waveform_from_json(json: *const c_char, out: *mut *mut PbWaveform) -> PbStatus {
    guard(|| {
        if json.is_null() {
            return Err(bad("json is null"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| Fail(PbStatus::Parse, e.to_string()))?;
        new_waveform(DriveWaveform::from_json(text)?, out)
    })
}

/// Serializes a waveform; free the string with `pb_string_free`.
///
/// # Safety
/// `w` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pb_waveform_to_json(w: *const PbWaveform, out: *mut *mut c_char) -> PbStatus {
    guard(|| {
        let json = get(w, "waveform")?.0.to_json()?;
        let c = CString::new(json).map_err(|e| Fail(PbStatus::Parse, e.to_string()))?.into_raw();
        put(out, c, "out").inspect_err(|_| drop(CString::from_raw(c)))
    })
}

/// End of the drive's shaped part.
///
/// # Safety
/// `w` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pb_waveform_t_end(w: *const PbWaveform, out: *mut f64) -> PbStatus {
    guard(|| put(out, get(w, "waveform")?.0.t_end(), "out"))
}

/// # Safety
/// `w` must be null or a waveform handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pb_waveform_free(w: *mut PbWaveform) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Unnormalized heralded matter state for a click at `t_d`, starting from the
/// system's default state, written to `re`/`im` (length `pb_system_dim`).
/// Its squared norm, the success rate density, goes to `r_s`.
///
/// # Safety
/// Handles must be live, `re` and `im` writable for `len` doubles, `r_s`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn pb_heralded_state(
    sys: *const PbSystem,
    w: *const PbWaveform,
    t_d: f64,
    re: *mut f64,
    im: *mut f64,
    len: usize,
    r_s: *mut f64,
) -> PbStatus {
    guard(|| {
        let s = get(sys, "sys")?;
        let w = get(w, "waveform")?;
        if re.is_null() || im.is_null() || len != s.system.dim() {
            return Err(bad(&format!("state buffers must be non-null with length {}", s.system.dim())));
        }
        if r_s.is_null() {
            return Err(bad("r_s is null"));
        }
        let h = heralded_state(&s.system.default_initial(), &s.system, &s.cavity, &w.0, t_d, None)?;
        let re = std::slice::from_raw_parts_mut(re, len);
        let im = std::slice::from_raw_parts_mut(im, len);
        for (k, z) in h.psi1.iter().enumerate() {
            re[k] = z.re;
            im[k] = z.im;
        }
        r_s.write(h.r_s);
        Ok(())
    })
}

/// Unconditional transmitted-photon rate `κ⟨c†c⟩` at time `t`.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pb_transmission_rate(sys: *const PbSystem, w: *const PbWaveform, t: f64, out: *mut f64) -> PbStatus {
    guard(|| {
        let s = get(sys, "sys")?;
        let w = get(w, "waveform")?;
        let r = transmission_rate(&s.system.default_initial(), &s.system, &s.cavity, &w.0, t)?;
        put(out, r, "out")
    })
}

/// `F_ε R_s/(R_t + R_d/Q)` for a detector of efficiency `q` and dark rate `r_d`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pb_fidelity_min(f_eps: f64, r_s: f64, r_t: f64, q: f64, r_d: f64, out: *mut f64) -> PbStatus {
    guard(|| {
        let d = DetectorModel::new(q, r_d)?;
        put(out, fidelity_min(f_eps, r_s, r_t, &d), "out")
    })
}
