//! Vortices on the flat torus with constant background curvature K0.
//!
//! For a holomorphic section `s` of the degree-m bundle (frame curvature
//! density `F0`), find `w` with `Delta w + |s|^2 e^{2w} / 2 + F0 + K0/2 = 0`.
//! Integrating gives `int |e^w s|^2 = 2c`, `c = -K0 V / 2 - 2 pi m`, which
//! fixes the mean of `w` given its mean-free part.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bundles::{SectionBasis, SectionCalculus};
use crate::error::{Result, VortexError};
use crate::geometry::krylov::{dot, pcg, sum};
use crate::geometry::{TorusGeometry, TorusSpectral};
use crate::plane_vortex::NewtonStep;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurfaceConfig {
    pub tol: f64,
    pub max_newton: usize,
    pub damping_floor: f64,
    pub cg_tol: f64,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_newton: 80,
            damping_floor: 1.0 / 4096.0,
            cg_tol: 1e-12,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SurfaceVortex {
    pub w: Vec<f64>,
    pub sigma: Vec<Complex64>,
    pub curvature_density: Vec<f64>,
    pub residual_norm: f64,
    pub c: f64,
    pub history: Vec<NewtonStep>,
}

/// c = -K0 V / 2 - 2 pi m.
pub fn solvability_constant(geom: &TorusGeometry, m: usize) -> f64 {
    -0.5 * geom.k0 * geom.volume() - 2.0 * PI * m as f64
}

pub fn solve_surface(
    geom: &TorusGeometry,
    basis: &SectionBasis,
    coeff: &[Complex64],
    cfg: &SurfaceConfig,
) -> Result<SurfaceVortex> {
    if *geom != basis.geom {
        return Err(VortexError::GridMismatch {
            expected: format!("{geom:?}"),
            found: format!("{:?}", basis.geom),
        });
    }
    let s = basis.combine(coeff)?;
    solve_section(basis, &s, None, cfg)
}

/// Solve for an arbitrary section of the basis' bundle, optionally from a
/// given initial `w`.
pub fn solve_section(
    basis: &SectionBasis,
    section: &[Complex64],
    init: Option<&[f64]>,
    cfg: &SurfaceConfig,
) -> Result<SurfaceVortex> {
    let ts = TorusSpectral::new(&basis.geom);
    solve_section_with(&ts, basis, section, init, cfg)
}

pub(crate) fn solve_section_with(
    ts: &TorusSpectral,
    basis: &SectionBasis,
    section: &[Complex64],
    init: Option<&[f64]>,
    cfg: &SurfaceConfig,
) -> Result<SurfaceVortex> {
    let geom = &basis.geom;
    let m = basis.degree;
    let c = solvability_constant(geom, m);
    if !(c > 0.0) {
        return Err(VortexError::Solvability {
            c,
            m,
            volume: geom.volume(),
            k0: geom.k0,
        });
    }
    let s2: Vec<f64> = section.iter().map(|z| z.norm_sqr()).collect();
    if s2.iter().all(|&x| x <= 1e-300) {
        return Err(VortexError::ZeroSection);
    }
    let n = geom.len();
    let da = geom.cell_area();
    let kappa: Vec<f64> = basis.curvature_density.iter().map(|f| f + 0.5 * geom.k0).collect();

    let mut wp: Vec<f64> = match init {
        Some(w) => w.to_vec(),
        None => vec![0.0; n],
    };
    remove_mean(&mut wp);

    let mean_of = |wp: &[f64]| -> f64 {
        let i: f64 = s2.iter().zip(wp).map(|(s, w)| s * (2.0 * w).exp()).sum::<f64>() * da;
        0.5 * (2.0 * c / i).ln()
    };
    let residual = |wp: &[f64]| -> (Vec<f64>, f64) {
        let wbar = mean_of(wp);
        let mut r = vec![0.0; n];
        ts.laplacian(wp, &mut r);
        for i in 0..n {
            r[i] += 0.5 * s2[i] * (2.0 * (wp[i] + wbar)).exp() + kappa[i];
        }
        let nr = (dot(&r, &r) * da).sqrt();
        (r, nr)
    };

    let (mut res, mut rnorm) = residual(&wp);
    let mut history = vec![NewtonStep {
        residual: rnorm,
        step: 0.0,
        cg_iterations: 0,
    }];
    let mut it = 0;
    while rnorm >= cfg.tol {
        if it >= cfg.max_newton {
            return Err(VortexError::Stagnation {
                iterations: it,
                history: history.iter().map(|h| h.residual).collect(),
            });
        }
        it += 1;
        let wbar = mean_of(&wp);
        let v: Vec<f64> = (0..n).map(|i| s2[i] * (2.0 * (wp[i] + wbar)).exp()).collect();
        let vsum = sum(&v);
        let vbar = vsum / n as f64;
        let mut rhs: Vec<f64> = res.iter().map(|r| -r).collect();
        remove_mean(&mut rhs);
        let mut phi = vec![0.0; n];
        // Jacobian of the mean-eliminated map: Delta + V (I - <V . > / <V>)
        let stats = pcg(
            |x, y| {
                ts.laplacian(x, y);
                let vx = dot(&v, x) / vsum;
                for i in 0..n {
                    y[i] += v[i] * (x[i] - vx);
                }
            },
            |r, z| {
                ts.solve_shifted(r, vbar, z);
                remove_mean(z);
            },
            &rhs,
            &mut phi,
            cfg.cg_tol,
            2000,
        )?;
        let (mut new_wp, new_res, new_norm, t) =
            crate::plane_vortex::line_search(&wp, &phi, rnorm, cfg.damping_floor, |x| residual(x)).ok_or_else(
                || VortexError::Stagnation {
                    iterations: it,
                    history: history.iter().map(|h| h.residual).collect(),
                },
            )?;
        remove_mean(&mut new_wp);
        wp = new_wp;
        res = new_res;
        rnorm = new_norm;
        history.push(NewtonStep {
            residual: rnorm,
            step: t,
            cg_iterations: stats.iterations,
        });
    }
    let wbar = mean_of(&wp);
    let w: Vec<f64> = wp.iter().map(|x| x + wbar).collect();
    let mut lap = vec![0.0; n];
    ts.laplacian(&w, &mut lap);
    let sigma = section.iter().zip(&w).map(|(s, w)| s * w.exp()).collect();
    let curvature_density = basis.curvature_density.iter().zip(&lap).map(|(f, l)| f + l).collect();
    Ok(SurfaceVortex {
        w,
        sigma,
        curvature_density,
        residual_norm: rnorm,
        c,
        history,
    })
}

fn remove_mean(x: &mut [f64]) {
    let m = sum(x) / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= m);
}

/// Solve for `gamma_d . basis` and rescale the basis by `e^w` so that the
/// leading coefficient is itself a vortex in the new frame.
pub fn normalize_leading_coefficient(
    basis: &SectionBasis,
    gamma_d: &[Complex64],
    cfg: &SurfaceConfig,
) -> Result<(SurfaceVortex, SectionBasis)> {
    let s = basis.combine(gamma_d)?;
    let vortex = solve_section(basis, &s, None, cfg)?;
    let ts = TorusSpectral::new(&basis.geom);
    let mut lap = vec![0.0; vortex.w.len()];
    ts.laplacian(&vortex.w, &mut lap);
    let rescaled = basis.rescaled(&vortex.w, &lap);
    Ok((vortex, rescaled))
}

/// A configuration on one fibre: connection 1-form relative to the frame
/// connection, and a section in the frame trivialisation.
#[derive(Clone, Debug)]
pub struct FiberConfig {
    pub a_u: Vec<f64>,
    pub a_v: Vec<f64>,
    pub section: Vec<Complex64>,
    pub degree: usize,
}

impl FiberConfig {
    /// Configuration obtained from the frame by the complex gauge `e^psi`:
    /// connection shift `*d psi = (psi_v, -psi_u)`.
    pub fn from_conformal(ts: &TorusSpectral, psi: &[f64], section: Vec<Complex64>, degree: usize) -> Self {
        let n = psi.len();
        let mut du = vec![0.0; n];
        let mut dv = vec![0.0; n];
        ts.d_u(psi, &mut du);
        ts.d_v(psi, &mut dv);
        Self {
            a_u: dv,
            a_v: du.iter().map(|x| -x).collect(),
            section,
            degree,
        }
    }

    pub fn unperturbed(section: Vec<Complex64>, degree: usize) -> Self {
        let n = section.len();
        Self {
            a_u: vec![0.0; n],
            a_v: vec![0.0; n],
            section,
            degree,
        }
    }
}

/// Gauge-minimised Sobolev-k distance (k <= 2) between fibre
/// configurations. The exact part of the connection difference is removed
/// first (with the matching gauge applied to `a`'s section), then constant
/// phases are minimised over.
pub fn fiber_distance(a: &FiberConfig, b: &FiberConfig, geom: &TorusGeometry, k: u32) -> Result<f64> {
    if a.degree != b.degree {
        return Err(VortexError::InvalidInput(format!(
            "bundle degrees differ: {} vs {}",
            a.degree, b.degree
        )));
    }
    FiberMetric::new(geom, a.degree, k)?.distance(a, b)
}

/// Reusable transforms for repeated [`fiber_distance`] evaluations.
pub struct FiberMetric {
    geom: TorusGeometry,
    ts: TorusSpectral,
    calc: SectionCalculus,
    k: u32,
}

impl FiberMetric {
    pub fn new(geom: &TorusGeometry, degree: usize, k: u32) -> Result<Self> {
        if k > 2 {
            return Err(VortexError::InvalidInput(format!("Sobolev order {k} not supported (max 2)")));
        }
        Ok(Self {
            geom: geom.clone(),
            ts: TorusSpectral::new(geom),
            calc: SectionCalculus::new(geom, degree),
            k,
        })
    }

    pub fn distance(&self, a: &FiberConfig, b: &FiberConfig) -> Result<f64> {
        let (geom, ts, calc, k) = (&self.geom, &self.ts, &self.calc, self.k);
        let n = geom.len();
        for cfg in [a, b] {
            if cfg.section.len() != n || cfg.a_u.len() != n || cfg.a_v.len() != n {
                return Err(VortexError::GridMismatch {
                    expected: format!("{n} torus values"),
                    found: format!("{} values", cfg.section.len()),
                });
            }
            if cfg.degree != calc.degree {
                return Err(VortexError::InvalidInput(format!(
                    "bundle degree {} does not match metric degree {}",
                    cfg.degree, calc.degree
                )));
            }
        }
        let du: Vec<f64> = a.a_u.iter().zip(&b.a_u).map(|(x, y)| x - y).collect();
        let dv: Vec<f64> = a.a_v.iter().zip(&b.a_v).map(|(x, y)| x - y).collect();

        // Coulomb slice: chi with grad chi = exact part of (du, dv)
        let mut ux = vec![0.0; n];
        let mut vy = vec![0.0; n];
        ts.d_u(&du, &mut ux);
        ts.d_v(&dv, &mut vy);
        let div: Vec<f64> = ux.iter().zip(&vy).map(|(x, y)| -(x + y)).collect();
        let mut chi = vec![0.0; n];
        ts.solve_shifted(&div, 0.0, &mut chi);
        let mut gu = vec![0.0; n];
        let mut gv = vec![0.0; n];
        ts.d_u(&chi, &mut gu);
        ts.d_v(&chi, &mut gv);
        let cu: Vec<f64> = du.iter().zip(&gu).map(|(x, g)| x - g).collect();
        let cv: Vec<f64> = dv.iter().zip(&gv).map(|(x, g)| x - g).collect();
        let conn2 = sobolev_sq_scalar(ts, geom, &cu, k) + sobolev_sq_scalar(ts, geom, &cv, k);

        let sa: Vec<Complex64> = a
            .section
            .iter()
            .zip(&chi)
            .map(|(s, c)| s * Complex64::from_polar(1.0, -c))
            .collect();
        let aa = covariant_inner(calc, geom, &sa, &sa, k).re;
        let bb = covariant_inner(calc, geom, &b.section, &b.section, k).re;
        let ab = covariant_inner(calc, geom, &sa, &b.section, k);
        let f = |theta: f64| (aa + bb - 2.0 * (Complex64::from_polar(1.0, theta) * ab).re).max(0.0);
        let sect2 = minimise_phase(f);
        Ok((conn2 + sect2).sqrt())
    }
}

fn minimise_phase<F: Fn(f64) -> f64>(f: F) -> f64 {
    let grid = 720;
    let step = 2.0 * PI / grid as f64;
    let mut best = (0.0, f(0.0));
    for i in 1..grid {
        let th = i as f64 * step;
        let v = f(th);
        if v < best.1 {
            best = (th, v);
        }
    }
    let (mut lo, mut hi) = (best.0 - step, best.0 + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    best.1.min(f1).min(f2)
}

fn sobolev_sq_scalar(ts: &TorusSpectral, geom: &TorusGeometry, f: &[f64], k: u32) -> f64 {
    let mut buf: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut tmp = Vec::new();
    ts.fft.forward(&mut buf, &mut tmp);
    let n = f.len() as f64;
    let s: f64 = buf
        .iter()
        .zip(&ts.lap)
        .map(|(c, l)| (1.0 + l).powi(k as i32) * c.norm_sqr())
        .sum();
    s * geom.volume() / (n * n)
}

/// Covariant Sobolev pairing `<a, (1 + Delta_B)^k b>` in the frame.
fn covariant_inner(calc: &SectionCalculus, geom: &TorusGeometry, a: &[Complex64], b: &[Complex64], k: u32) -> Complex64 {
    let da = geom.cell_area();
    let ip = |x: &[Complex64], y: &[Complex64]| x.iter().zip(y).map(|(p, q)| p * q.conj()).sum::<Complex64>() * da;
    let mut out = ip(a, b);
    if k >= 1 {
        let d1 = ip(&calc.d_u(a), &calc.d_u(b)) + ip(&calc.d_v(a), &calc.d_v(b));
        out += d1 * k as f64;
    }
    if k >= 2 {
        out += ip(&calc.bochner(a), &calc.bochner(b));
    }
    out
}

/// Helper for tests and reports: the L^2 norm of a torus field.
pub fn l2_torus(f: &[f64], geom: &TorusGeometry) -> f64 {
    (dot(f, f) * geom.cell_area()).sqrt()
}
