use std::f64::consts::PI;
use std::ffi::{c_char, CString};
use std::ptr;

use vortex_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { vortex_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf.iter().take(n.min(255)).map(|c| *c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn plane_solve_through_a_handle() {
    let (xs, ys, mult) = ([0.0f64], [0.0f64], [1u32]);
    let mut h: *mut VortexPlane = ptr::null_mut();
    let st = unsafe { vortex_plane_solve(xs.as_ptr(), ys.as_ptr(), mult.as_ptr(), 1, 12.0, 96, &mut h) };
    assert_eq!(st, VortexStatus::Ok, "{}", last_error());
    assert!(!h.is_null());
    assert_eq!(last_error(), "");
    let (mut e, mut flux) = (0.0, 0.0);
    assert_eq!(unsafe { vortex_plane_energy(h, &mut e, &mut flux) }, VortexStatus::Ok);
    assert!((e / PI - 1.0).abs() < 0.05, "{e}");
    assert!((flux / (2.0 * PI) - 1.0).abs() < 0.05, "{flux}");
    let len = unsafe { vortex_plane_len(h) };
    assert_eq!(len, 96 * 96);
    let mut alpha = vec![f64::NAN; len];
    assert_eq!(unsafe { vortex_plane_alpha(h, alpha.as_mut_ptr(), len) }, VortexStatus::Ok);
    assert!(alpha.iter().all(|a| a.is_finite()));
    unsafe { vortex_plane_free(h) };
}

#[test]
fn short_buffers_are_refused() {
    let mut h: *mut VortexPlane = ptr::null_mut();
    let st = unsafe { vortex_plane_solve(ptr::null(), ptr::null(), ptr::null(), 0, 4.0, 16, &mut h) };
    assert_eq!(st, VortexStatus::Ok);
    let mut small = vec![0.0; 10];
    assert_eq!(unsafe { vortex_plane_alpha(h, small.as_mut_ptr(), small.len()) }, VortexStatus::BufferTooSmall);
    assert!(last_error().contains("256 needed"), "{}", last_error());
    assert_eq!(unsafe { vortex_plane_alpha(h, ptr::null_mut(), 256) }, VortexStatus::NullPointer);
    unsafe { vortex_plane_free(h) };
}

#[test]
fn null_pointers_are_reported() {
    let mut h: *mut VortexPlane = ptr::null_mut();
    let st = unsafe { vortex_plane_solve(ptr::null(), ptr::null(), ptr::null(), 1, 4.0, 16, &mut h) };
    assert_eq!(st, VortexStatus::NullPointer);
    assert!(h.is_null());
    assert!(last_error().contains("xs"));
    assert_eq!(unsafe { vortex_plane_energy(ptr::null(), ptr::null_mut(), ptr::null_mut()) }, VortexStatus::NullPointer);
    assert_eq!(unsafe { vortex_plane_len(ptr::null()) }, 0);
    assert_eq!(unsafe { vortex_bessel_k0(1.0, ptr::null_mut()) }, VortexStatus::NullPointer);
    // freeing null is a no-op
    unsafe {
        vortex_plane_free(ptr::null_mut());
        vortex_surface_free(ptr::null_mut());
        vortex_product_free(ptr::null_mut());
    }
}

#[test]
fn core_errors_map_to_codes() {
    let mut k = 0.0;
    assert_eq!(unsafe { vortex_bessel_k0(-1.0, &mut k) }, VortexStatus::InvalidInput);
    assert_eq!(unsafe { vortex_bessel_k0(1.0, &mut k) }, VortexStatus::Ok);
    assert!((k - 0.421_024_438_240_708_3).abs() < 1e-9);

    let (xs, ys, mult) = ([9.0f64], [0.0f64], [1u32]);
    let mut h: *mut VortexPlane = ptr::null_mut();
    let st = unsafe { vortex_plane_solve(xs.as_ptr(), ys.as_ptr(), mult.as_ptr(), 1, 4.0, 16, &mut h) };
    assert_eq!(st, VortexStatus::InvalidInput);
    assert!(!last_error().is_empty());

    // volume 4 pi leaves no room for a degree-one vortex when K0 = -1
    let (re, im) = ([1.0f64], [0.0f64]);
    let mut s: *mut VortexSurface = ptr::null_mut();
    let st = unsafe { vortex_surface_solve(2.0 * PI, 2.0, 16, 16, -1.0, 1, re.as_ptr(), im.as_ptr(), &mut s) };
    assert_eq!(st, VortexStatus::Solvability);
    assert!(last_error().contains("solvability"), "{}", last_error());
    assert!(s.is_null());
}

#[test]
fn surface_handle_reports_mass() {
    let (re, im) = ([0.8f64], [0.3f64]);
    let mut s: *mut VortexSurface = ptr::null_mut();
    let st = unsafe { vortex_surface_solve(4.0 * PI, 2.0, 32, 32, -1.0, 1, re.as_ptr(), im.as_ptr(), &mut s) };
    assert_eq!(st, VortexStatus::Ok, "{}", last_error());
    let len = unsafe { vortex_surface_len(s) };
    let mut sq = vec![0.0; len];
    assert_eq!(unsafe { vortex_surface_sigma_sq(s, sq.as_mut_ptr(), len) }, VortexStatus::Ok);
    let area = 8.0 * PI / len as f64;
    assert!((sq.iter().sum::<f64>() * area / (4.0 * PI) - 1.0).abs() < 1e-8);
    let (mut res, mut c) = (1.0, 0.0);
    assert_eq!(unsafe { vortex_surface_info(s, &mut res, &mut c) }, VortexStatus::Ok);
    assert!(res < 1e-10);
    assert!((c - 2.0 * PI).abs() < 1e-12);
    unsafe { vortex_surface_free(s) };
}

#[test]
fn product_handle_reports_energies() {
    // f(z) = z on the trivial bundle of a 4 pi torus
    let (re, im) = ([0.0f64, 1.0], [0.0f64, 0.0]);
    let mut p: *mut VortexProduct = ptr::null_mut();
    let st = unsafe { vortex_product_solve(6.0, 24, 4.0 * PI, 8, -1.0, 0, 1, re.as_ptr(), im.as_ptr(), &mut p) };
    assert_eq!(st, VortexStatus::Ok, "{}", last_error());
    let (mut e_an, mut e_top) = (0.0, 0.0);
    assert_eq!(unsafe { vortex_product_energy(p, &mut e_an, &mut e_top) }, VortexStatus::Ok);
    assert!(e_an.is_finite() && e_top.is_finite());
    let len = unsafe { vortex_product_len(p) };
    assert_eq!(len, 24 * 24 * 64);
    let mut alpha = vec![0.0; len];
    assert_eq!(unsafe { vortex_product_alpha(p, alpha.as_mut_ptr(), len) }, VortexStatus::Ok);
    unsafe { vortex_product_free(p) };
}

#[test]
fn errors_are_kept_per_thread() {
    let mut k = 0.0;
    assert_eq!(unsafe { vortex_bessel_k0(0.0, &mut k) }, VortexStatus::InvalidInput);
    let other = std::thread::spawn(last_error).join().unwrap();
    assert_eq!(other, "");
    assert!(!last_error().is_empty());
}

#[test]
fn last_error_truncates_and_reports_length() {
    let mut k = 0.0;
    unsafe { vortex_bessel_k0(-2.0, &mut k) };
    let full = unsafe { vortex_last_error(ptr::null_mut(), 0) };
    let mut buf = [1 as c_char; 4];
    let n = unsafe { vortex_last_error(buf.as_mut_ptr(), buf.len()) };
    assert_eq!(n, full);
    assert!(full > 3);
    assert_eq!(buf[3], 0);
}

#[test]
fn run_config_returns_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "mode = \"solve-plane\"\n[geometry]\nradius = -1.0\n").unwrap();
    let c = CString::new(cfg.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { vortex_run_config(c.as_ptr()) }, 2);
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { vortex_run_config(ptr::null()) }, -1);
}

#[test]
fn header_declares_the_entry_points() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/vortex.h")).unwrap();
    for name in [
        "vortex_last_error",
        "vortex_bessel_k0",
        "vortex_run_config",
        "vortex_plane_solve",
        "vortex_plane_alpha",
        "vortex_plane_free",
        "vortex_surface_solve",
        "vortex_product_solve",
        "VORTEX_STATUS_BUFFER_TOO_SMALL",
        "typedef struct VortexPlane VortexPlane",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
