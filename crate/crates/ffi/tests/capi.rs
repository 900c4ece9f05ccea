use std::ffi::{c_char, CStr, CString};
use std::ptr;

use hosfl_ffi::*;

const CONFIG: &str = r#"
protocol = "hosfl"
root_seed = 3

[model]
layer_dims = [4, 6, 3]
activation = "tanh"
cut_index = 1
loss = "softmax_cross_entropy"

[hp]
eta = 0.1
rounds = 10
clients = 4
clients_per_round = 2
batch_size = 8

[partition]
mode = "iid"

[data]
task = "classification_blobs"
n_train = 64
n_eval = 32
"#;

fn new_sim(text: &str) -> (HosflStatus, *mut HosflSimulation) {
    let c = CString::new(text).unwrap();
    let mut sim = ptr::null_mut();
    let status = unsafe { hosfl_simulation_new(c.as_ptr(), &mut sim) };
    (status, sim)
}

fn last_error() -> String {
    let p = hosfl_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn checksum(sim: *const HosflSimulation) -> String {
    let mut buf = [0 as c_char; 65];
    assert_eq!(unsafe { hosfl_simulation_checksum(sim, buf.as_mut_ptr(), buf.len()) }, HosflStatus::Ok);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_owned()
}

#[test]
fn lifecycle_and_determinism() {
    let run = || {
        let (status, sim) = new_sim(CONFIG);
        assert_eq!(status, HosflStatus::Ok);
        let mut losses = Vec::new();
        for _ in 0..5 {
            let mut loss = f64::NAN;
            assert_eq!(unsafe { hosfl_simulation_step(sim, &mut loss) }, HosflStatus::Ok);
            losses.push(loss);
        }
        let mut round = 0;
        assert_eq!(unsafe { hosfl_simulation_round(sim, &mut round) }, HosflStatus::Ok);
        assert_eq!(round, 5);
        let (mut l, mut a) = (0.0, 0.0);
        assert_eq!(unsafe { hosfl_simulation_evaluate(sim, &mut l, &mut a) }, HosflStatus::Ok);
        assert!(l.is_finite() && (0.0..=1.0).contains(&a));
        let sum = checksum(sim);
        unsafe { hosfl_simulation_free(sim) };
        (losses, sum)
    };
    let a = run();
    assert_eq!(a, run());
    assert_eq!(a.1.len(), 64);
}

#[test]
fn traffic_counters() {
    let (_, sim) = new_sim(CONFIG);
    unsafe { hosfl_simulation_step(sim, ptr::null_mut()) };
    let mut scalar_up = 0;
    // ScalarUp: K * P * 8 = 2 * 5 * 8.
    assert_eq!(unsafe { hosfl_simulation_bytes(sim, 5, &mut scalar_up) }, HosflStatus::Ok);
    assert_eq!(scalar_up, 80);
    let mut model_up = 1;
    unsafe { hosfl_simulation_bytes(sim, 3, &mut model_up) };
    assert_eq!(model_up, 0);
    assert_eq!(unsafe { hosfl_simulation_bytes(sim, 8, &mut model_up) }, HosflStatus::InvalidArgument);
    unsafe { hosfl_simulation_free(sim) };
}

#[test]
fn config_errors_are_reported() {
    let (status, sim) = new_sim(&CONFIG.replace("clients_per_round = 2", "clients_per_round = 7"));
    assert_eq!(status, HosflStatus::InvalidConfig);
    assert!(sim.is_null());
    assert!(last_error().contains("clients_per_round"));

    let (status, _) = new_sim("protocol = ");
    assert_eq!(status, HosflStatus::InvalidConfig);
}

#[test]
fn null_and_buffer_handling() {
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { hosfl_simulation_new(ptr::null(), &mut sim) }, HosflStatus::NullPointer);
    assert_eq!(unsafe { hosfl_simulation_step(ptr::null_mut(), ptr::null_mut()) }, HosflStatus::NullPointer);
    unsafe { hosfl_simulation_free(ptr::null_mut()) };

    let (_, sim) = new_sim(CONFIG);
    let mut small = [0 as c_char; 10];
    assert_eq!(
        unsafe { hosfl_simulation_checksum(sim, small.as_mut_ptr(), small.len()) },
        HosflStatus::BufferTooSmall
    );
    unsafe { hosfl_simulation_free(sim) };

    let bad = [0xffu8, 0];
    let mut sim = ptr::null_mut();
    assert_eq!(
        unsafe { hosfl_simulation_new(bad.as_ptr().cast(), &mut sim) },
        HosflStatus::InvalidUtf8
    );
}

#[test]
fn latency_entry_point() {
    let mut p = 0;
    assert_eq!(unsafe { hosfl_latency_max_perturbations(4, &mut p) }, HosflStatus::Ok);
    assert!((3..=5).contains(&p));
    assert_eq!(unsafe { hosfl_latency_max_perturbations(18, &mut p) }, HosflStatus::InvalidConfig);
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(hosfl_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/hosfl.h")).unwrap();
    for name in [
        "hosfl_last_error",
        "hosfl_version",
        "hosfl_simulation_new",
        "hosfl_simulation_free",
        "hosfl_simulation_step",
        "hosfl_simulation_round",
        "hosfl_simulation_evaluate",
        "hosfl_simulation_bytes",
        "hosfl_simulation_checksum",
        "hosfl_latency_max_perturbations",
        "HOSFL_STATUS_OK",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
