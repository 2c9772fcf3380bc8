//! C ABI for `slgate`.
//!
//! Objects are opaque handles created by `slg_*_new` functions and released
//! with the matching `slg_*_free`. Every fallible call returns an
//! [`SlgStatus`]; on failure the message is kept per thread and can be read
//! with [`slg_last_error`]. Panics never cross the boundary.
//!
//! Units are SI throughout (m, s, J), lattice depths in recoil energies.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use slgate::addressing::{analyze, TargetChoice, ThresholdSpec};
use slgate::atomphys::{Polarization, QubitState, Species};
use slgate::mergeopt::{gate_report, read_pulse, ControlPulse, MergeConfig, MergeModel};
use slgate::superlattice::{Superlattice, SuperlatticeConfig};
use slgate::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlgStatus {
    Ok = 0,
    NullPointer = 1,
    /// bad input: parameters, files, parse errors
    InvalidArgument = 2,
    /// the physics or numerics failed for valid input
    Numerical = 3,
    Panic = 4,
}

pub struct SlgSpecies(Species);

pub struct SlgSuperlattice {
    config: SuperlatticeConfig,
    lattice: Superlattice,
}

pub struct SlgMergeModel(MergeModel);

pub struct SlgPulse(ControlPulse);

/// Single-qubit addressing of one well.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SlgAddressing {
    /// rad/s
    pub min_detuning: f64,
    pub detuning_over_eta_er: f64,
    /// s
    pub gate_time: f64,
    pub success_probability: f64,
    pub target_site: u32,
    pub limiting_site: u32,
    /// nonzero when wells merged or failed to pair
    pub reduced: u8,
}

/// Fidelities, gate times (s) and scattering of one merge pulse.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SlgGateReport {
    pub f_target: f64,
    pub f_all: f64,
    pub f_error: f64,
    pub merge_phase: f64,
    /// J
    pub u_int: f64,
    pub t_swap: f64,
    pub t_sqrt_swap: f64,
    pub p_sc_swap: f64,
    pub p_sc_sqrt_swap: f64,
    /// nonzero when the merge failed; the reason is in the last error
    pub failed: u8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SlgStatus {
    if e.is_config() {
        SlgStatus::InvalidArgument
    } else {
        SlgStatus::Numerical
    }
}

fn guard(f: impl FnOnce() -> Result<(), (SlgStatus, String)>) -> SlgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SlgStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            SlgStatus::Panic
        }
    }
}

fn lib<T>(r: slgate::Result<T>) -> Result<T, (SlgStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn invalid<T>(msg: &str) -> Result<T, (SlgStatus, String)> {
    Err((SlgStatus::InvalidArgument, msg.to_string()))
}

unsafe fn borrow<'a, T>(p: *const T, name: &str) -> Result<&'a T, (SlgStatus, String)> {
    // SAFETY: caller passes a handle from the matching constructor or null
    unsafe { p.as_ref() }.ok_or_else(|| (SlgStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, (SlgStatus, String)> {
    // SAFETY: caller passes writable storage or null
    unsafe { p.as_mut() }.ok_or_else(|| (SlgStatus::NullPointer, format!("{name} is null")))
}

unsafe fn path<'a>(p: *const c_char) -> Result<&'a str, (SlgStatus, String)> {
    if p.is_null() {
        return Err((SlgStatus::NullPointer, "path is null".into()));
    }
    // SAFETY: non-null, caller guarantees a nul-terminated string
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| (SlgStatus::InvalidArgument, "path is not UTF-8".into()))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn slg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, static string.
#[no_mangle]
pub extern "C" fn slg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Built-in Rb-87 data.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn slg_species_rb87(out_species: *mut *mut SlgSpecies) -> SlgStatus {
    guard(|| {
        let o = unsafe { out(out_species, "out_species") }?;
        *o = Box::into_raw(Box::new(SlgSpecies(Species::rb87())));
        Ok(())
    })
}

/// Species from a TOML file.
///
/// # Safety
/// `file` must be null or a nul-terminated string; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn slg_species_from_file(file: *const c_char, out_species: *mut *mut SlgSpecies) -> SlgStatus {
    guard(|| {
        let p = unsafe { path(file) }?;
        let o = unsafe { out(out_species, "out_species") }?;
        let s = lib(Species::from_file(p))?;
        *o = Box::into_raw(Box::new(SlgSpecies(s)));
        Ok(())
    })
}

/// # Safety
/// `species` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn slg_species_free(species: *mut SlgSpecies) {
    if !species.is_null() {
        // SAFETY: created by Box::into_raw in this crate
        drop(unsafe { Box::from_raw(species) });
    }
}

/// Two-color lattice. Polarizations are -1, 0 or +1.
///
/// # Safety
/// `species` must be a live handle; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn slg_superlattice_new(
    species: *const SlgSpecies,
    lambda1: f64,
    lambda2: f64,
    eta: f64,
    a: f64,
    pol1: i32,
    pol2: i32,
    out_lattice: *mut *mut SlgSuperlattice,
) -> SlgStatus {
    guard(|| {
        let sp = unsafe { borrow(species, "species") }?;
        let o = unsafe { out(out_lattice, "out_lattice") }?;
        let p1 = lib(Polarization::try_from(pol1))?;
        let p2 = lib(Polarization::try_from(pol2))?;
        let config = SuperlatticeConfig::new(sp.0.clone(), lambda1, lambda2, eta, a, p1, p2);
        let lattice = lib(config.build())?;
        *o = Box::into_raw(Box::new(SlgSuperlattice { config, lattice }));
        Ok(())
    })
}

/// # Safety
/// `lattice` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn slg_superlattice_free(lattice: *mut SlgSuperlattice) {
    if !lattice.is_null() {
        // SAFETY: created by Box::into_raw in this crate
        drop(unsafe { Box::from_raw(lattice) });
    }
}

/// Potential in J at `x` (m) for qubit state 0 or 1.
///
/// # Safety
/// `lattice` must be a live handle; `value` null or writable.
#[no_mangle]
pub unsafe extern "C" fn slg_superlattice_potential(
    lattice: *const SlgSuperlattice,
    qubit: u32,
    x: f64,
    value: *mut f64,
) -> SlgStatus {
    guard(|| {
        let sl = unsafe { borrow(lattice, "lattice") }?;
        let v = unsafe { out(value, "value") }?;
        let state = match qubit {
            0 => QubitState::ZERO,
            1 => QubitState::ONE,
            _ => return invalid("qubit must be 0 or 1"),
        };
        *v = lib(sl.lattice.potential(state, x))?;
        Ok(())
    })
}

/// Microwave addressing of well `target`, or the deepest well when
/// `target` is negative.
///
/// # Safety
/// `lattice` must be a live handle; `result` null or writable.
#[no_mangle]
pub unsafe extern "C" fn slg_addressing_analyze(
    lattice: *const SlgSuperlattice,
    p_t: f64,
    target: i32,
    result: *mut SlgAddressing,
) -> SlgStatus {
    guard(|| {
        let sl = unsafe { borrow(lattice, "lattice") }?;
        let r = unsafe { out(result, "result") }?;
        let threshold = lib(ThresholdSpec::new(p_t))?;
        let choice = if target < 0 {
            TargetChoice::Deepest
        } else {
            TargetChoice::Index(target as usize)
        };
        let a = lib(analyze(&sl.config, threshold, choice))?;
        *r = SlgAddressing {
            min_detuning: a.min_detuning,
            detuning_over_eta_er: a.detuning_over_eta_er,
            gate_time: a.gate_time,
            success_probability: a.success_probability,
            target_site: a.target_site as u32,
            limiting_site: a.limiting_site as u32,
            reduced: a.reduced as u8,
        };
        Ok(())
    })
}

/// Merge model for `lambda2 = lambda1 (n - 1)/n`. Zero for `grid_points`,
/// `dt` or `interior_knots` selects the default.
///
/// # Safety
/// `species` must be a live handle; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn slg_merge_model_new(
    species: *const SlgSpecies,
    lambda1: f64,
    cycles: u32,
    a2: f64,
    grid_points: u32,
    dt: f64,
    interior_knots: u32,
    out_model: *mut *mut SlgMergeModel,
) -> SlgStatus {
    guard(|| {
        let sp = unsafe { borrow(species, "species") }?;
        let o = unsafe { out(out_model, "out_model") }?;
        let d = MergeConfig::default();
        let config = MergeConfig {
            lambda1,
            cycles,
            a2,
            grid_points: grid_points as usize,
            dt: if dt == 0.0 { d.dt } else { dt },
            interior_knots: if interior_knots == 0 {
                d.interior_knots
            } else {
                interior_knots as usize
            },
            ..d
        };
        let m = lib(MergeModel::new(&sp.0, &config))?;
        *o = Box::into_raw(Box::new(SlgMergeModel(m)));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn slg_merge_model_free(model: *mut SlgMergeModel) {
    if !model.is_null() {
        // SAFETY: created by Box::into_raw in this crate
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Pulse with `count >= 2` uniform knots over `tau` seconds.
///
/// # Safety
/// `a1` and `phi` must point to `count` values; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn slg_pulse_new(
    tau: f64,
    count: usize,
    a1: *const f64,
    phi: *const f64,
    out_pulse: *mut *mut SlgPulse,
) -> SlgStatus {
    guard(|| {
        if a1.is_null() || phi.is_null() {
            return Err((SlgStatus::NullPointer, "knot arrays are null".into()));
        }
        let o = unsafe { out(out_pulse, "out_pulse") }?;
        // SAFETY: caller guarantees `count` readable values
        let (a, p) = unsafe {
            (
                std::slice::from_raw_parts(a1, count),
                std::slice::from_raw_parts(phi, count),
            )
        };
        let pulse = lib(ControlPulse::uniform(tau, a, p))?;
        *o = Box::into_raw(Box::new(SlgPulse(pulse)));
        Ok(())
    })
}

/// Default starting pulse of duration `tau` for this model.
///
/// # Safety
/// `model` must be a live handle; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn slg_pulse_seed(
    model: *const SlgMergeModel,
    tau: f64,
    out_pulse: *mut *mut SlgPulse,
) -> SlgStatus {
    guard(|| {
        let m = unsafe { borrow(model, "model") }?;
        let o = unsafe { out(out_pulse, "out_pulse") }?;
        let p = lib(m.0.seed_pulse(tau))?;
        *o = Box::into_raw(Box::new(SlgPulse(p)));
        Ok(())
    })
}

/// Pulse from a file written by `slgate merge`.
///
/// # Safety
/// `file` must be null or a nul-terminated string; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn slg_pulse_read(file: *const c_char, out_pulse: *mut *mut SlgPulse) -> SlgStatus {
    guard(|| {
        let p = unsafe { path(file) }?;
        let o = unsafe { out(out_pulse, "out_pulse") }?;
        let f = File::open(p).map_err(|e| (SlgStatus::InvalidArgument, format!("{p}: {e}")))?;
        let pf = lib(read_pulse(BufReader::new(f)))?;
        *o = Box::into_raw(Box::new(SlgPulse(pf.pulse)));
        Ok(())
    })
}

/// Duration in s, or NaN for a null handle.
///
/// # Safety
/// `pulse` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn slg_pulse_tau(pulse: *const SlgPulse) -> f64 {
    // SAFETY: null or live handle
    unsafe { pulse.as_ref() }.map_or(f64::NAN, |p| p.0.tau)
}

/// # Safety
/// `pulse` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn slg_pulse_free(pulse: *mut SlgPulse) {
    if !pulse.is_null() {
        // SAFETY: created by Box::into_raw in this crate
        drop(unsafe { Box::from_raw(pulse) });
    }
}

/// Forward merge: writes `F_target` and `F_all`. Cheaper than the full report.
///
/// # Safety
/// Handles must be live; outputs null or writable.
#[no_mangle]
pub unsafe extern "C" fn slg_merge_fidelity(
    model: *const SlgMergeModel,
    pulse: *const SlgPulse,
    f_target: *mut f64,
    f_all: *mut f64,
) -> SlgStatus {
    guard(|| {
        let m = unsafe { borrow(model, "model") }?;
        let p = unsafe { borrow(pulse, "pulse") }?;
        let ft = unsafe { out(f_target, "f_target") }?;
        let fa = unsafe { out(f_all, "f_all") }?;
        let e = lib(m.0.evaluate(&p.0, slgate::mergeopt::Detail::All))?;
        *ft = e.f_target;
        *fa = e.f_all;
        if let Some(f) = e.failure {
            set_error(f);
        }
        Ok(())
    })
}

/// Full gate report including the error-box worst case.
///
/// # Safety
/// Handles must be live; `report` null or writable.
#[no_mangle]
pub unsafe extern "C" fn slg_gate_report(
    model: *const SlgMergeModel,
    pulse: *const SlgPulse,
    report: *mut SlgGateReport,
) -> SlgStatus {
    guard(|| {
        let m = unsafe { borrow(model, "model") }?;
        let p = unsafe { borrow(pulse, "pulse") }?;
        let r = unsafe { out(report, "report") }?;
        let g = lib(gate_report(&m.0, &p.0, ""))?;
        *r = SlgGateReport {
            f_target: g.f_target,
            f_all: g.f_all,
            f_error: g.f_error,
            merge_phase: g.merge_phase,
            u_int: g.u_int,
            t_swap: g.t_swap,
            t_sqrt_swap: g.t_sqrt_swap,
            p_sc_swap: g.p_sc_swap,
            p_sc_sqrt_swap: g.p_sc_sqrt_swap,
            failed: g.failure.is_some() as u8,
        };
        if let Some(f) = g.failure {
            set_error(f);
        }
        Ok(())
    })
}

/// Retro-reflector phase `2 pi d dnu / c` in rad.
///
/// # Safety
/// `phase` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn slg_frequency_to_phase(delta_nu: f64, distance: f64, phase: *mut f64) -> SlgStatus {
    guard(|| {
        let o = unsafe { out(phase, "phase") }?;
        *o = lib(slgate::mergeopt::frequency_to_phase(delta_nu, distance))?;
        Ok(())
    })
}
