//! C ABI over the vortex solvers.
//!
//! Every entry point returns a [`VortexStatus`]; on failure the message is
//! kept per thread and can be read with [`vortex_last_error`]. Solutions are
//! opaque handles released with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use num_complex::Complex64;
use vortex_core::bundles::{theta_basis, Divisor, PolynomialMap};
use vortex_core::cli_io::run_file;
use vortex_core::decay_analysis::bessel_k0;
use vortex_core::geometry::{PlaneGrid, ProductGrid, TorusGeometry};
use vortex_core::plane_vortex::{solve_plane, PlaneBackground, PlaneSolution, SolverConfig};
use vortex_core::product_monopole::{solve_product, ProductConfig, ProductSolution};
use vortex_core::surface_vortex::{solve_surface, SurfaceConfig, SurfaceVortex};
use vortex_core::VortexError;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VortexStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Solvability = 3,
    NotConverged = 4,
    GridMismatch = 5,
    Checksum = 6,
    Io = 7,
    Panic = 8,
    BufferTooSmall = 9,
}

impl From<&VortexError> for VortexStatus {
    fn from(e: &VortexError) -> Self {
        match e {
            VortexError::InvalidInput(_)
            | VortexError::Config(_)
            | VortexError::Precondition(_)
            | VortexError::ZeroSection
            | VortexError::SingularPotential => VortexStatus::InvalidInput,
            VortexError::Solvability { .. } => VortexStatus::Solvability,
            VortexError::NotConverged { .. } | VortexError::Stagnation { .. } => VortexStatus::NotConverged,
            VortexError::GridMismatch { .. } => VortexStatus::GridMismatch,
            VortexError::Checksum { .. } => VortexStatus::Checksum,
            VortexError::Io(_) => VortexStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn guard(f: impl FnOnce() -> Result<(), (VortexStatus, String)>) -> VortexStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            VortexStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside the solver".into());
            VortexStatus::Panic
        }
    }
}

fn core(e: VortexError) -> (VortexStatus, String) {
    ((&e).into(), e.to_string())
}

fn null(what: &str) -> (VortexStatus, String) {
    (VortexStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (VortexStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn copy_out(src: &[f64], out: *mut f64, cap: usize) -> Result<(), (VortexStatus, String)> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if cap < src.len() {
        return Err((
            VortexStatus::BufferTooSmall,
            format!("buffer holds {cap} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

/// Copy the calling thread's last error message (NUL-terminated, truncated
/// to `cap`) into `buf`. Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn vortex_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Modified Bessel function K0.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vortex_bessel_k0(r: f64, out: *mut f64) -> VortexStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = bessel_k0(r).map_err(core)?;
        Ok(())
    })
}

/// Run a TOML config as the `vortex` binary would; returns its exit code
/// (or -1 for a bad path string).
///
/// # Safety
/// `config_path` must be null or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn vortex_run_config(config_path: *const c_char) -> i32 {
    if config_path.is_null() {
        set_error("config path is null".into());
        return -1;
    }
    let Ok(path) = CStr::from_ptr(config_path).to_str() else {
        set_error("config path is not UTF-8".into());
        return -1;
    };
    match catch_unwind(|| run_file(Path::new(path), None, false, None)) {
        Ok(outcome) => {
            set_error(outcome.error.map(|e| e.to_string()).unwrap_or_default());
            outcome.exit_code
        }
        Err(_) => {
            set_error("panic inside the solver".into());
            -1
        }
    }
}

pub struct VortexPlane {
    sol: PlaneSolution,
    bg: PlaneBackground,
}

/// Solve for the plane vortex with zeros `(xs[i], ys[i])` of multiplicity
/// `mult[i]` on `[-radius, radius]^2` with `n` cells per side.
///
/// # Safety
/// The three arrays must each hold `count` elements; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn vortex_plane_solve(
    xs: *const f64,
    ys: *const f64,
    mult: *const u32,
    count: usize,
    radius: f64,
    n: usize,
    out: *mut *mut VortexPlane,
) -> VortexStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let xs = slice(xs, count, "xs")?;
        let ys = slice(ys, count, "ys")?;
        let mult = slice(mult, count, "mult")?;
        let div = if count == 0 {
            Divisor::empty()
        } else {
            Divisor::new(xs.iter().copied().zip(ys.iter().copied()).collect(), mult.to_vec()).map_err(core)?
        };
        let grid = PlaneGrid::new(radius, n).map_err(core)?;
        let (sol, bg) = solve_plane(&div, &grid, &SolverConfig::default()).map_err(core)?;
        *out = Box::into_raw(Box::new(VortexPlane { sol, bg }));
        Ok(())
    })
}

/// Number of grid values (`n * n`).
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vortex_plane_len(h: *const VortexPlane) -> usize {
    h.as_ref().map_or(0, |h| h.bg.grid.len())
}

/// Energy (equal to pi times the degree on solutions) and flux.
///
/// # Safety
/// `h` must be a live handle; the outputs must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn vortex_plane_energy(h: *const VortexPlane, energy: *mut f64, flux: *mut f64) -> VortexStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("handle"))?;
        if !energy.is_null() {
            *energy = h.sol.energy;
        }
        if !flux.is_null() {
            *flux = h.sol.flux;
        }
        Ok(())
    })
}

/// Copy the conformal correction alpha (row-major, `ix * n + iy`).
///
/// # Safety
/// `h` must be a live handle and `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn vortex_plane_alpha(h: *const VortexPlane, out: *mut f64, cap: usize) -> VortexStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("handle"))?;
        copy_out(&h.sol.alpha, out, cap)
    })
}

/// # Safety
/// `h` must be null or a handle from [`vortex_plane_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vortex_plane_free(h: *mut VortexPlane) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

pub struct VortexSurface {
    inner: SurfaceVortex,
}

/// Solve the torus vortex equation for the section with theta-basis
/// coefficients `re[i] + i im[i]`, `i < degree`.
///
/// # Safety
/// `re` and `im` must hold `degree` elements; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn vortex_surface_solve(
    period_u: f64,
    period_v: f64,
    n_u: usize,
    n_v: usize,
    k0: f64,
    degree: usize,
    re: *const f64,
    im: *const f64,
    out: *mut *mut VortexSurface,
) -> VortexStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let re = slice(re, degree, "re")?;
        let im = slice(im, degree, "im")?;
        let coeff: Vec<Complex64> = re.iter().zip(im).map(|(a, b)| Complex64::new(*a, *b)).collect();
        let geom = TorusGeometry::new(period_u, period_v, n_u, n_v, k0).map_err(core)?;
        let basis = theta_basis(&geom, degree as i64).map_err(core)?;
        let inner = solve_surface(&geom, &basis, &coeff, &SurfaceConfig::default()).map_err(core)?;
        *out = Box::into_raw(Box::new(VortexSurface { inner }));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vortex_surface_len(h: *const VortexSurface) -> usize {
    h.as_ref().map_or(0, |h| h.inner.w.len())
}

/// Copy `|sigma|^2` (`iu * n_v + iv`).
///
/// # Safety
/// `h` must be a live handle and `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn vortex_surface_sigma_sq(h: *const VortexSurface, out: *mut f64, cap: usize) -> VortexStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("handle"))?;
        let s: Vec<f64> = h.inner.sigma.iter().map(|z| z.norm_sqr()).collect();
        copy_out(&s, out, cap)
    })
}

/// Final residual norm and the solvability constant c.
///
/// # Safety
/// `h` must be a live handle; the outputs must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn vortex_surface_info(h: *const VortexSurface, residual: *mut f64, c: *mut f64) -> VortexStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("handle"))?;
        if !residual.is_null() {
            *residual = h.inner.residual_norm;
        }
        if !c.is_null() {
            *c = h.inner.c;
        }
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from [`vortex_surface_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vortex_surface_free(h: *mut VortexSurface) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

pub struct VortexProduct {
    sol: ProductSolution,
}

/// Solve the product problem for `f(z) = sum_k gamma_k z^k` on a degree-`m`
/// bundle over a square torus of the given volume. `re`/`im` hold
/// `(poly_degree + 1) * max(m, 1)` values, coefficient `k` first.
///
/// # Safety
/// `re` and `im` must hold that many elements; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn vortex_product_solve(
    radius: f64,
    n: usize,
    volume: f64,
    n_torus: usize,
    k0: f64,
    m: usize,
    poly_degree: usize,
    re: *const f64,
    im: *const f64,
    out: *mut *mut VortexProduct,
) -> VortexStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let dim = m.max(1);
        let len = (poly_degree + 1) * dim;
        let re = slice(re, len, "re")?;
        let im = slice(im, len, "im")?;
        let coeff: Vec<Vec<Complex64>> = re
            .chunks(dim)
            .zip(im.chunks(dim))
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| Complex64::new(*x, *y)).collect())
            .collect();
        let f = PolynomialMap::new(coeff).map_err(core)?;
        let torus = TorusGeometry::square(volume, n_torus, k0).map_err(core)?;
        let grid = ProductGrid::new(PlaneGrid::new(radius, n).map_err(core)?, torus.clone());
        let basis = theta_basis(&torus, m as i64).map_err(core)?;
        let (sol, _) = solve_product(&f, &basis, &grid, &ProductConfig::default()).map_err(core)?;
        *out = Box::into_raw(Box::new(VortexProduct { sol }));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vortex_product_len(h: *const VortexProduct) -> usize {
    h.as_ref().map_or(0, |h| h.sol.alpha.len())
}

/// Analytic and topological energy.
///
/// # Safety
/// `h` must be a live handle; the outputs must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn vortex_product_energy(h: *const VortexProduct, e_an: *mut f64, e_top: *mut f64) -> VortexStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("handle"))?;
        if !e_an.is_null() {
            *e_an = h.sol.energy.e_an;
        }
        if !e_top.is_null() {
            *e_top = h.sol.energy.e_top;
        }
        Ok(())
    })
}

/// Copy alpha (plane index major, torus index minor).
///
/// # Safety
/// `h` must be a live handle and `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn vortex_product_alpha(h: *const VortexProduct, out: *mut f64, cap: usize) -> VortexStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("handle"))?;
        copy_out(&h.sol.alpha, out, cap)
    })
}

/// # Safety
/// `h` must be null or a handle from [`vortex_product_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vortex_product_free(h: *mut VortexProduct) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}
