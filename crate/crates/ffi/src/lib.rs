//! C ABI for the ktup toolkit.
//!
//! Opaque handles own the model plus integrator configuration; every call
//! returns a status code and writes results through out-pointers. On any
//! non-OK status a human-readable message is available from
//! `ktup_last_error_message` until the next call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ktup::error::Error;
use ktup::floquet::{tls_floquet, tls_qed, IntegratorConfig, Scheme};
use ktup::hamiltonians::{
    nv_eigenstructure, renormalized_amplitude, DriveParams, NvModel, TlsModel,
};
use ktup::ktupling::{find_amplitude, find_amplitude_nv, ScanConfig};

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_last_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KtupStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotFound = 3,
    InsufficientData = 4,
    ContractViolation = 5,
    CalibrationFailure = 6,
    Panic = 7,
    Internal = 8,
}

fn status_of(err: &Error) -> KtupStatus {
    match err {
        Error::InvalidArgument(_) | Error::Usage(_) | Error::Config(_) | Error::Parse { .. } => {
            KtupStatus::InvalidArgument
        }
        Error::NotFound(_) => KtupStatus::NotFound,
        Error::InsufficientData(_) => KtupStatus::InsufficientData,
        Error::ContractViolation(_) | Error::IntegratorAccuracy { .. } => {
            KtupStatus::ContractViolation
        }
        Error::CalibrationFailure { .. } => KtupStatus::CalibrationFailure,
        Error::Io(_) => KtupStatus::Internal,
    }
}

fn guard<F: FnOnce() -> KtupStatus>(body: F) -> KtupStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("panic across the FFI boundary");
            KtupStatus::Panic
        }
    }
}

fn fail(err: &Error) -> KtupStatus {
    set_last_error(&err.to_string());
    status_of(err)
}

/// Opaque driven two-level system handle.
pub struct KtupTls {
    model: TlsModel,
    integrator: IntegratorConfig,
}

/// Opaque six-level NV model handle.
pub struct KtupNv {
    model: NvModel,
    integrator: IntegratorConfig,
}

/// Root of the k-tupling condition qed = j/k.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct KtupRoot {
    pub j: u32,
    pub k: u32,
    /// MHz for two-level roots, mV for NV roots.
    pub amplitude: f64,
    pub nu_d_mhz: f64,
    pub residual: f64,
    pub certificate_fidelity: f64,
}

/// Plain-data mirror of the NV model parameters.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct KtupNvParams {
    pub d_zfs_mhz: f64,
    pub b_z_gauss: f64,
    pub gamma_e_mhz_per_g: f64,
    pub gamma_n_mhz_per_g: f64,
    pub a_par_mhz: f64,
    pub a_perp_mhz: f64,
    pub gamma_x_mhz_per_g: f64,
    pub amplitude_calibration_mhz_per_mv: f64,
    /// 0 = drop the nuclear drive term, anything else = keep it.
    pub nuclear_drive: u8,
}

impl From<&KtupNvParams> for NvModel {
    fn from(p: &KtupNvParams) -> Self {
        NvModel {
            d_zfs_mhz: p.d_zfs_mhz,
            b_z_gauss: p.b_z_gauss,
            gamma_e_mhz_per_g: p.gamma_e_mhz_per_g,
            gamma_n_mhz_per_g: p.gamma_n_mhz_per_g,
            a_par_mhz: p.a_par_mhz,
            a_perp_mhz: p.a_perp_mhz,
            gamma_x_mhz_per_g: p.gamma_x_mhz_per_g,
            amplitude_calibration_mhz_per_mv: p.amplitude_calibration_mhz_per_mv,
            nuclear_drive: p.nuclear_drive != 0,
        }
    }
}

/// Static eigenstructure summary of the NV model.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct KtupNvEigen {
    /// Eigenenergies in MHz, ascending.
    pub energies_mhz: [f64; 6],
    pub alpha_sq: f64,
    pub delta0_selected_mhz: f64,
    /// Nonzero when the hybridizing pair is exactly degenerate.
    pub at_crossing: i32,
}

/// Version string of the underlying crate; static, do not free.
#[no_mangle]
pub extern "C" fn ktup_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent error on this thread; valid until the next
/// ktup call on the same thread. Do not free.
#[no_mangle]
pub extern "C" fn ktup_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Create a two-level handle with level spacing `delta0_mhz` (> 0).
/// Returns NULL on invalid input.
#[no_mangle]
pub extern "C" fn ktup_tls_new(delta0_mhz: f64) -> *mut KtupTls {
    match TlsModel::new(delta0_mhz) {
        Ok(model) => Box::into_raw(Box::new(KtupTls {
            model,
            integrator: IntegratorConfig::default(),
        })),
        Err(e) => {
            set_last_error(&e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Free a two-level handle.
///
/// # Safety
/// `handle` must be NULL or a pointer returned by `ktup_tls_new` that has
/// not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn ktup_tls_free(handle: *mut KtupTls) {
    if !handle.is_null() {
        drop(unsafe { Box::from_raw(handle) });
    }
}

/// Configure the integrator: scheme 0 = 4th-order commutator-free
/// (default), 1 = exponential midpoint; `steps_per_period` >= 64;
/// `verify` != 0 re-integrates with doubled steps as a convergence check.
///
/// # Safety
/// `handle` must be a live pointer from `ktup_tls_new`.
#[no_mangle]
pub unsafe extern "C" fn ktup_tls_set_integrator(
    handle: *mut KtupTls,
    steps_per_period: u32,
    scheme: i32,
    verify: u8,
) -> KtupStatus {
    guard(|| {
        let Some(tls) = (unsafe { handle.as_mut() }) else {
            set_last_error("handle is NULL");
            return KtupStatus::NullPointer;
        };
        let scheme = match scheme {
            0 => Scheme::CommutatorFree4,
            1 => Scheme::ExponentialMidpoint,
            _ => {
                set_last_error("scheme must be 0 (cf4) or 1 (midpoint)");
                return KtupStatus::InvalidArgument;
            }
        };
        match IntegratorConfig::new(steps_per_period as usize, scheme) {
            Ok(mut cfg) => {
                cfg.verify = verify != 0;
                tls.integrator = cfg;
                KtupStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Folded quasi-energy difference |eps2 - eps1| / nu_d in [0, 1).
///
/// # Safety
/// `handle` must be a live pointer from `ktup_tls_new`; `out` must point to
/// a writable f64.
#[no_mangle]
pub unsafe extern "C" fn ktup_tls_qed(
    handle: *const KtupTls,
    amplitude_mhz: f64,
    nu_d_mhz: f64,
    out: *mut f64,
) -> KtupStatus {
    guard(|| {
        let (Some(tls), Some(out)) = (unsafe { handle.as_ref() }, unsafe { out.as_mut() }) else {
            set_last_error("handle or out pointer is NULL");
            return KtupStatus::NullPointer;
        };
        let drive = match DriveParams::new(amplitude_mhz, nu_d_mhz, 0.0) {
            Ok(d) => d,
            Err(e) => return fail(&e),
        };
        match tls_qed(&tls.model, &drive, &tls.integrator) {
            Ok(q) => {
                *out = q;
                KtupStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Locate the smallest-amplitude root of qed = j/k in [a_min, a_max] MHz.
/// `grid_points` = 0 uses the default grid density (2048).
///
/// # Safety
/// `handle` must be a live pointer from `ktup_tls_new`; `out` must point to
/// a writable KtupRoot.
#[no_mangle]
pub unsafe extern "C" fn ktup_tls_find_amplitude(
    handle: *const KtupTls,
    j: u32,
    k: u32,
    nu_d_mhz: f64,
    a_min_mhz: f64,
    a_max_mhz: f64,
    grid_points: u32,
    out: *mut KtupRoot,
) -> KtupStatus {
    guard(|| {
        let (Some(tls), Some(out)) = (unsafe { handle.as_ref() }, unsafe { out.as_mut() }) else {
            set_last_error("handle or out pointer is NULL");
            return KtupStatus::NullPointer;
        };
        let scan = ScanConfig {
            a_min: a_min_mhz,
            a_max: a_max_mhz,
            grid_points: if grid_points == 0 { 2048 } else { grid_points as usize },
        };
        match find_amplitude(j, k, nu_d_mhz, &scan, &tls.model, &tls.integrator, 1) {
            Ok(found) => {
                *out = KtupRoot {
                    j: found.point.j,
                    k: found.point.k,
                    amplitude: found.point.a_pk,
                    nu_d_mhz: found.point.nu_d_mhz,
                    residual: found.point.residual,
                    certificate_fidelity: found.point.certificate_fidelity,
                };
                KtupStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Stroboscopic <sigma_z> from the ground state: writes n_values entries
/// for n = 1..=n_values drive periods.
///
/// # Safety
/// `handle` must be a live pointer from `ktup_tls_new`; `out` must point to
/// a writable buffer of at least `n_values` f64.
#[no_mangle]
pub unsafe extern "C" fn ktup_tls_stroboscopic_sigma_z(
    handle: *const KtupTls,
    amplitude_mhz: f64,
    nu_d_mhz: f64,
    n_values: usize,
    out: *mut f64,
) -> KtupStatus {
    guard(|| {
        let Some(tls) = (unsafe { handle.as_ref() }) else {
            set_last_error("handle is NULL");
            return KtupStatus::NullPointer;
        };
        if out.is_null() || n_values == 0 {
            set_last_error("out buffer is NULL or empty");
            return KtupStatus::NullPointer;
        }
        let drive = match DriveParams::new(amplitude_mhz, nu_d_mhz, 0.0) {
            Ok(d) => d,
            Err(e) => return fail(&e),
        };
        let dec = match tls_floquet(&tls.model, &drive, &tls.integrator) {
            Ok(d) => d,
            Err(e) => return fail(&e),
        };
        let g = tls.model.ground_state();
        let sz = ktup::hamiltonians::sigma_z();
        let buf = unsafe { std::slice::from_raw_parts_mut(out, n_values) };
        for (i, slot) in buf.iter_mut().enumerate() {
            match ktup::floquet::stroboscopic_evolve(&g, (i + 1) as u64, &dec) {
                Ok(state) => *slot = state.expectation(&sz),
                Err(e) => return fail(&e),
            }
        }
        KtupStatus::Ok
    })
}

/// Fill `out` with the default NV model parameters.
///
/// # Safety
/// `out` must point to a writable KtupNvParams.
#[no_mangle]
pub unsafe extern "C" fn ktup_nv_default_params(out: *mut KtupNvParams) -> KtupStatus {
    guard(|| {
        let Some(out) = (unsafe { out.as_mut() }) else {
            set_last_error("out pointer is NULL");
            return KtupStatus::NullPointer;
        };
        let m = NvModel::default();
        *out = KtupNvParams {
            d_zfs_mhz: m.d_zfs_mhz,
            b_z_gauss: m.b_z_gauss,
            gamma_e_mhz_per_g: m.gamma_e_mhz_per_g,
            gamma_n_mhz_per_g: m.gamma_n_mhz_per_g,
            a_par_mhz: m.a_par_mhz,
            a_perp_mhz: m.a_perp_mhz,
            gamma_x_mhz_per_g: m.gamma_x_mhz_per_g,
            amplitude_calibration_mhz_per_mv: m.amplitude_calibration_mhz_per_mv,
            nuclear_drive: m.nuclear_drive as u8,
        };
        KtupStatus::Ok
    })
}

/// Create a six-level NV handle. Returns NULL on invalid parameters.
///
/// # Safety
/// `params` must be NULL (use defaults) or point to a readable
/// KtupNvParams.
#[no_mangle]
pub unsafe extern "C" fn ktup_nv_new(params: *const KtupNvParams) -> *mut KtupNv {
    let model = match unsafe { params.as_ref() } {
        Some(p) => NvModel::from(p),
        None => NvModel::default(),
    };
    if let Err(e) = model.validate() {
        set_last_error(&e.to_string());
        return std::ptr::null_mut();
    }
    Box::into_raw(Box::new(KtupNv { model, integrator: IntegratorConfig::default() }))
}

/// Free an NV handle.
///
/// # Safety
/// `handle` must be NULL or a pointer returned by `ktup_nv_new` that has
/// not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn ktup_nv_free(handle: *mut KtupNv) {
    if !handle.is_null() {
        drop(unsafe { Box::from_raw(handle) });
    }
}

/// Static eigenstructure of the NV model: energies, hybridization, and the
/// selected transition spacing.
///
/// # Safety
/// `handle` must be a live pointer from `ktup_nv_new`; `out` must point to
/// a writable KtupNvEigen.
#[no_mangle]
pub unsafe extern "C" fn ktup_nv_eigenstructure(
    handle: *const KtupNv,
    out: *mut KtupNvEigen,
) -> KtupStatus {
    guard(|| {
        let (Some(nv), Some(out)) = (unsafe { handle.as_ref() }, unsafe { out.as_mut() }) else {
            set_last_error("handle or out pointer is NULL");
            return KtupStatus::NullPointer;
        };
        match nv_eigenstructure(&nv.model) {
            Ok(s) => {
                let mut energies = [0.0; 6];
                energies.copy_from_slice(&s.energies_mhz);
                *out = KtupNvEigen {
                    energies_mhz: energies,
                    alpha_sq: s.alpha_sq,
                    delta0_selected_mhz: s.delta0_selected_mhz,
                    at_crossing: s.at_crossing as i32,
                };
                KtupStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Renormalized (dimensionless) drive amplitude of the selected transition
/// for a programmed amplitude in mV.
///
/// # Safety
/// `handle` must be a live pointer from `ktup_nv_new`; `out` must point to
/// a writable f64.
#[no_mangle]
pub unsafe extern "C" fn ktup_nv_renormalized_amplitude(
    handle: *const KtupNv,
    a_rf_mv: f64,
    out: *mut f64,
) -> KtupStatus {
    guard(|| {
        let (Some(nv), Some(out)) = (unsafe { handle.as_ref() }, unsafe { out.as_mut() }) else {
            set_last_error("handle or out pointer is NULL");
            return KtupStatus::NullPointer;
        };
        let structure = match nv_eigenstructure(&nv.model) {
            Ok(s) => s,
            Err(e) => return fail(&e),
        };
        match renormalized_amplitude(&nv.model, &structure, a_rf_mv) {
            Ok(v) => {
                *out = v;
                KtupStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Locate the k-tupling amplitude of the NV's selected transition, in mV,
/// searching [a_min_mv, a_max_mv]. `grid_points` = 0 uses the default.
///
/// # Safety
/// `handle` must be a live pointer from `ktup_nv_new`; `out` must point to
/// a writable KtupRoot.
#[no_mangle]
pub unsafe extern "C" fn ktup_nv_find_amplitude(
    handle: *const KtupNv,
    j: u32,
    k: u32,
    a_min_mv: f64,
    a_max_mv: f64,
    grid_points: u32,
    out: *mut KtupRoot,
) -> KtupStatus {
    guard(|| {
        let (Some(nv), Some(out)) = (unsafe { handle.as_ref() }, unsafe { out.as_mut() }) else {
            set_last_error("handle or out pointer is NULL");
            return KtupStatus::NullPointer;
        };
        let scan = ScanConfig {
            a_min: a_min_mv,
            a_max: a_max_mv,
            grid_points: if grid_points == 0 { 2048 } else { grid_points as usize },
        };
        match find_amplitude_nv(&nv.model, j, k, &scan, &nv.integrator, 1) {
            Ok(found) => {
                *out = KtupRoot {
                    j: found.point.j,
                    k: found.point.k,
                    amplitude: found.point.a_pk,
                    nu_d_mhz: found.point.nu_d_mhz,
                    residual: found.point.residual,
                    certificate_fidelity: found.point.certificate_fidelity,
                };
                KtupStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}
