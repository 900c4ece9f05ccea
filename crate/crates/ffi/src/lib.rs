//! C ABI over the simulator.
//!
//! Handles are opaque; every fallible call returns an [`HosflStatus`] and
//! leaves a thread-local message readable through [`hosfl_last_error`].
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hosfl::comm::{MessageKind, ProtocolKind};
use hosfl::config::{self, ExperimentConfig};
use hosfl::data::Dataset;
use hosfl::latency::{self, DeviceProfile, NetworkProfile, WorkloadProfile};
use hosfl::protocol::Federation;
use hosfl::{runner, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HosflStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    Runtime = 4,
    BufferTooSmall = 5,
    InvalidArgument = 6,
    Panic = 7,
}

/// Opaque simulation handle.
pub struct HosflSimulation {
    fed: Federation,
    protocol: ProtocolKind,
    eval: Dataset,
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

fn status_of(err: &Error) -> HosflStatus {
    match err {
        Error::Parse(_) | Error::InvalidConfig(_) => HosflStatus::InvalidConfig,
        _ => HosflStatus::Runtime,
    }
}

fn guard(f: impl FnOnce() -> Result<(), HosflStatus>) -> HosflStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HosflStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            HosflStatus::Panic
        }
    }
}

fn fail(err: Error) -> HosflStatus {
    let s = status_of(&err);
    set_error(err.to_string());
    s
}

unsafe fn sim_ref<'a>(sim: *const HosflSimulation) -> Result<&'a HosflSimulation, HosflStatus> {
    sim.as_ref().ok_or_else(|| {
        set_error("null simulation handle");
        HosflStatus::NullPointer
    })
}

fn check_out<T>(p: *mut T) -> Result<(), HosflStatus> {
    if p.is_null() {
        set_error("null output pointer");
        return Err(HosflStatus::NullPointer);
    }
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn hosfl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static, NUL-terminated library version.
#[no_mangle]
pub extern "C" fn hosfl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a simulation from a TOML experiment document.
///
/// # Safety
/// `config_toml` must be a valid NUL-terminated string and `out` a valid
/// pointer. The handle must be released with [`hosfl_simulation_free`].
#[no_mangle]
pub unsafe extern "C" fn hosfl_simulation_new(config_toml: *const c_char, out: *mut *mut HosflSimulation) -> HosflStatus {
    guard(|| {
        check_out(out)?;
        if config_toml.is_null() {
            set_error("null config string");
            return Err(HosflStatus::NullPointer);
        }
        let text = CStr::from_ptr(config_toml).to_str().map_err(|_| {
            set_error("config is not valid UTF-8");
            HosflStatus::InvalidUtf8
        })?;
        let cfg: ExperimentConfig = config::parse_config(text).map_err(fail)?;
        let setup = runner::training_setup(&cfg).map_err(fail)?;
        let fed = Federation::new(
            setup.model,
            setup.hp,
            setup.root_seed,
            setup.train,
            setup.shards,
            &setup.initial_theta,
        )
        .map_err(fail)?;
        let sim = HosflSimulation {
            fed,
            protocol: setup.protocol,
            eval: setup.eval,
        };
        *out = Box::into_raw(Box::new(sim));
        Ok(())
    })
}

/// # Safety
/// `sim` must be null or a handle from [`hosfl_simulation_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hosfl_simulation_free(sim: *mut HosflSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Runs one round; writes the mean training loss to `out_loss` if non-null.
/// A failed round leaves the simulation unchanged.
///
/// # Safety
/// `sim` must be a live handle; `out_loss` null or valid.
#[no_mangle]
pub unsafe extern "C" fn hosfl_simulation_step(sim: *mut HosflSimulation, out_loss: *mut f64) -> HosflStatus {
    guard(|| {
        let s = sim.as_mut().ok_or_else(|| {
            set_error("null simulation handle");
            HosflStatus::NullPointer
        })?;
        let m = s.fed.run_round(s.protocol).map_err(fail)?;
        if !out_loss.is_null() {
            *out_loss = m.mean_train_loss;
        }
        Ok(())
    })
}

/// Rounds completed so far.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hosfl_simulation_round(sim: *const HosflSimulation, out: *mut u64) -> HosflStatus {
    guard(|| {
        check_out(out)?;
        *out = sim_ref(sim)?.fed.server.round;
        Ok(())
    })
}

/// Evaluation loss and accuracy; accuracy is NaN for regression.
///
/// # Safety
/// `sim` must be a live handle; outputs valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hosfl_simulation_evaluate(
    sim: *const HosflSimulation,
    out_loss: *mut f64,
    out_accuracy: *mut f64,
) -> HosflStatus {
    guard(|| {
        check_out(out_loss)?;
        check_out(out_accuracy)?;
        let s = sim_ref(sim)?;
        let (loss, acc) = s.fed.evaluate(&s.eval).map_err(fail)?;
        *out_loss = loss;
        *out_accuracy = acc.unwrap_or(f64::NAN);
        Ok(())
    })
}

/// Cumulative live bytes of one message kind. `kind` indexes
/// ActivationUp, LabelUp, GradDown, ModelUp, ModelDown, ScalarUp,
/// ScalarDown, SeedDown in that order.
///
/// # Safety
/// `sim` must be a live handle; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hosfl_simulation_bytes(sim: *const HosflSimulation, kind: u32, out: *mut u64) -> HosflStatus {
    guard(|| {
        check_out(out)?;
        let s = sim_ref(sim)?;
        let k = MessageKind::ALL.get(kind as usize).ok_or_else(|| {
            set_error(format!("message kind {kind} out of range"));
            HosflStatus::InvalidArgument
        })?;
        *out = s.fed.ledger.total(*k);
        Ok(())
    })
}

/// Writes the 64-character hex checksum of the parameters plus NUL into
/// `buf`, which must hold at least 65 bytes.
///
/// # Safety
/// `sim` must be a live handle; `buf` valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn hosfl_simulation_checksum(sim: *const HosflSimulation, buf: *mut c_char, len: usize) -> HosflStatus {
    guard(|| {
        check_out(buf)?;
        let sum = runner::checksum(&sim_ref(sim)?.fed.theta());
        if len < sum.len() + 1 {
            set_error(format!("checksum needs {} bytes", sum.len() + 1));
            return Err(HosflStatus::BufferTooSmall);
        }
        ptr::copy_nonoverlapping(sum.as_ptr().cast::<c_char>(), buf, sum.len());
        *buf.add(sum.len()) = 0;
        Ok(())
    })
}

/// Hideable perturbation passes for the reference edge setup at the given
/// client depth.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hosfl_latency_max_perturbations(client_layers: u64, out: *mut u64) -> HosflStatus {
    guard(|| {
        check_out(out)?;
        let work = WorkloadProfile::llama_1b(client_layers);
        work.validate().map_err(fail)?;
        *out = latency::max_overlapped_perturbations(&NetworkProfile::default(), &DeviceProfile::default(), &work);
        Ok(())
    })
}
