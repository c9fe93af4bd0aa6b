//! Vortices on the plane with prescribed zeros.
//!
//! The unknown is a correction `alpha` to the background conformal factor
//! `alpha0 = -sum (n_i/2) log(1 + |z - z_i|^2)`; the vortex is
//! `Phi = exp(alpha) Phi1`, `Phi1 = exp(alpha0) prod (z - z_i)^{n_i}`, and
//! the equation is `Delta alpha + |Phi1|^2 (e^{2 alpha} - 1)/2 + h = 0`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bundles::{zero_locus, Divisor, ZeroLocus};
use crate::error::{Result, VortexError};
use crate::geometry::krylov::{dot, pcg};
use crate::geometry::plane::{central_gradient, stencil_laplacian};
use crate::geometry::{ComplexField, Ghosts, Grid, PlaneBc, PlaneGhosts, PlaneGrid, SeparableInverse};

/// Closure of the truncated square.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryRule {
    /// alpha = 0 one cell outside the square.
    DirichletZero,
    /// alpha equals its far-field limit one cell outside the square.
    #[default]
    Asymptotic,
}

#[derive(Clone, Debug)]
pub struct PlaneBackground {
    pub grid: PlaneGrid,
    pub divisor: Divisor,
    pub alpha0: Vec<f64>,
    pub phi1: Vec<Complex64>,
    /// Delta alpha0 (closed form).
    pub lap_alpha0: Vec<f64>,
    pub h: Vec<f64>,
    /// e^{alpha0} (d_z Phi0 + 2 d_z alpha0 Phi0), regular at the zeros.
    pub c1: Vec<Complex64>,
    pub ghosts: PlaneGhosts,
    pub rule: BoundaryRule,
}

impl PlaneBackground {
    pub fn ghosts(&self) -> Ghosts<'_> {
        match self.rule {
            BoundaryRule::DirichletZero => Ghosts::Zero,
            BoundaryRule::Asymptotic => Ghosts::Values(&self.ghosts),
        }
    }

    pub fn degree(&self) -> u32 {
        self.divisor.degree()
    }
}

/// Far-field value of alpha at a point.
pub fn asymptotic_alpha(divisor: &Divisor, x: f64, y: f64) -> f64 {
    divisor
        .points
        .iter()
        .zip(&divisor.multiplicities)
        .map(|(&(px, py), &n)| {
            let r2 = (x - px).powi(2) + (y - py).powi(2);
            0.5 * n as f64 * (1.0 + 1.0 / r2).ln()
        })
        .sum()
}

pub fn background_plane(divisor: &Divisor, grid: &PlaneGrid, rule: BoundaryRule) -> Result<PlaneBackground> {
    divisor.check_inside(grid)?;
    let npts = grid.len();
    let mut alpha0 = vec![0.0; npts];
    let mut phi1 = vec![Complex64::new(0.0, 0.0); npts];
    let mut lap_alpha0 = vec![0.0; npts];
    let mut h = vec![0.0; npts];
    let mut c1 = vec![Complex64::new(0.0, 0.0); npts];
    let pts: Vec<(Complex64, f64)> = divisor
        .points
        .iter()
        .zip(&divisor.multiplicities)
        .map(|(&(x, y), &n)| (Complex64::new(x, y), n as f64))
        .collect();
    for idx in 0..npts {
        let (x, y) = grid.point(idx);
        let z = Complex64::new(x, y);
        let mut a0 = 0.0;
        let mut lap = 0.0;
        let mut phi0 = Complex64::new(1.0, 0.0);
        for &(zi, n) in &pts {
            let w2 = (z - zi).norm_sqr();
            a0 -= 0.5 * n * (1.0 + w2).ln();
            lap += 2.0 * n / (1.0 + w2).powi(2);
            phi0 *= (z - zi).powi(n as i32);
        }
        // sum_i n_i Phi0 / ((z - z_i)(1 + |z - z_i|^2)) without dividing by zero
        let mut c = Complex64::new(0.0, 0.0);
        for (i, &(zi, n)) in pts.iter().enumerate() {
            let mut term = Complex64::new(n, 0.0) * (z - zi).powi(n as i32 - 1);
            for (j, &(zj, nj)) in pts.iter().enumerate() {
                if j != i {
                    term *= (z - zj).powi(nj as i32);
                }
            }
            c += term / (1.0 + (z - zi).norm_sqr());
        }
        let e = a0.exp();
        alpha0[idx] = a0;
        phi1[idx] = phi0 * e;
        lap_alpha0[idx] = lap;
        h[idx] = lap + 0.5 * (phi1[idx].norm_sqr() - 1.0);
        c1[idx] = c * e;
    }
    let ghosts = PlaneGhosts::from_fn(grid.n, 1, |ix, iy, _| {
        asymptotic_alpha(divisor, grid.coord(ix), grid.coord(iy))
    });
    Ok(PlaneBackground {
        grid: grid.clone(),
        divisor: divisor.clone(),
        alpha0,
        phi1,
        lap_alpha0,
        h,
        c1,
        ghosts,
        rule,
    })
}

/// Full residual mu(alpha) + h.
pub fn moment_map_plane(alpha: &[f64], bg: &PlaneBackground) -> Vec<f64> {
    let g = &bg.grid;
    let mut out = vec![0.0; alpha.len()];
    stencil_laplacian(alpha, g.n, 1, g.h(), bg.ghosts(), &mut out);
    for i in 0..alpha.len() {
        out[i] += 0.5 * bg.phi1[i].norm_sqr() * ((2.0 * alpha[i]).exp() - 1.0) + bg.h[i];
    }
    out
}

/// Continuum-normalised L^2 norm on the plane grid.
pub fn l2_plane(f: &[f64], grid: &PlaneGrid) -> f64 {
    (dot(f, f) * grid.cell_area()).sqrt()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_newton: usize,
    /// Smallest line-search step before declaring stagnation.
    pub damping_floor: f64,
    pub cg_tol: f64,
    pub boundary: BoundaryRule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_newton: 60,
            damping_floor: 1.0 / 1024.0,
            cg_tol: 1e-9,
            boundary: BoundaryRule::Asymptotic,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NewtonStep {
    pub residual: f64,
    pub step: f64,
    pub cg_iterations: usize,
}

#[derive(Clone, Debug)]
pub struct PlaneSolution {
    pub alpha: Vec<f64>,
    pub residual_norm: f64,
    pub energy: f64,
    pub flux: f64,
    pub history: Vec<NewtonStep>,
}

impl PlaneSolution {
    pub fn iterations(&self) -> usize {
        self.history.len().saturating_sub(1)
    }
}

pub fn solve_plane(divisor: &Divisor, grid: &PlaneGrid, cfg: &SolverConfig) -> Result<(PlaneSolution, PlaneBackground)> {
    let bg = background_plane(divisor, grid, cfg.boundary)?;
    let sol = solve_plane_from(&bg, vec![0.0; grid.len()], cfg)?;
    Ok((sol, bg))
}

/// Damped Newton from an explicit initial guess.
pub fn solve_plane_from(bg: &PlaneBackground, init: Vec<f64>, cfg: &SolverConfig) -> Result<PlaneSolution> {
    if !(cfg.tol > 0.0) {
        return Err(VortexError::InvalidInput("tolerance must be positive".into()));
    }
    let g = &bg.grid;
    let n = g.len();
    let mut alpha = init;
    if alpha.len() != n {
        return Err(VortexError::GridMismatch {
            expected: format!("{n} values"),
            found: format!("{} values", alpha.len()),
        });
    }
    let inv = SeparableInverse::new(g.n, g.h(), PlaneBc::Dirichlet, None);
    let mut res = moment_map_plane(&alpha, bg);
    let mut rnorm = l2_plane(&res, g);
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
                history: history.iter().map(|s| s.residual).collect(),
            });
        }
        it += 1;
        let v: Vec<f64> = (0..n).map(|i| bg.phi1[i].norm_sqr() * (2.0 * alpha[i]).exp()).collect();
        let vbar = v.iter().sum::<f64>() / n as f64;
        let rhs: Vec<f64> = res.iter().map(|r| -r).collect();
        let mut delta = vec![0.0; n];
        let stats = pcg(
            |x, y| {
                stencil_laplacian(x, g.n, 1, g.h(), Ghosts::Zero, y);
                for i in 0..x.len() {
                    y[i] += v[i] * x[i];
                }
            },
            |r, z| inv.apply(r, vbar, z),
            &rhs,
            &mut delta,
            cfg.cg_tol,
            2000,
        )?;
        let (new_alpha, new_res, new_norm, t) = line_search(&alpha, &delta, rnorm, cfg.damping_floor, |a| {
            let r = moment_map_plane(a, bg);
            let nr = l2_plane(&r, g);
            (r, nr)
        })
        .ok_or_else(|| VortexError::Stagnation {
            iterations: it,
            history: history.iter().map(|s| s.residual).collect(),
        })?;
        alpha = new_alpha;
        res = new_res;
        rnorm = new_norm;
        history.push(NewtonStep {
            residual: rnorm,
            step: t,
            cg_iterations: stats.iterations,
        });
    }
    let energy = energy_plane(&alpha, bg);
    let flux = flux_plane(&alpha, bg);
    Ok(PlaneSolution {
        alpha,
        residual_norm: rnorm,
        energy,
        flux,
        history,
    })
}

/// Halve the step until the residual norm decreases.
pub(crate) fn line_search<F>(
    x: &[f64],
    dir: &[f64],
    current: f64,
    floor: f64,
    mut eval: F,
) -> Option<(Vec<f64>, Vec<f64>, f64, f64)>
where
    F: FnMut(&[f64]) -> (Vec<f64>, f64),
{
    let mut t = 1.0;
    while t >= floor {
        let trial: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + t * d).collect();
        let (r, nr) = eval(&trial);
        if nr < current && nr.is_finite() {
            return Some((trial, r, nr, t));
        }
        t *= 0.5;
    }
    None
}

/// |Phi|^2 = |Phi1|^2 e^{2 alpha}.
pub fn phi_sq(alpha: &[f64], bg: &PlaneBackground) -> Vec<f64> {
    alpha
        .iter()
        .zip(&bg.phi1)
        .map(|(a, p)| p.norm_sqr() * (2.0 * a).exp())
        .collect()
}

pub fn phi_field(alpha: &[f64], bg: &PlaneBackground) -> ComplexField {
    let values = alpha.iter().zip(&bg.phi1).map(|(a, p)| p * a.exp()).collect();
    ComplexField {
        grid: Grid::Plane(bg.grid.clone()),
        values,
        degree: 0,
    }
}

/// Energy density `|F|^2 + |nabla Phi|^2 + (1 - |Phi|^2)^2 / 4` at every
/// node. Curvature of the background and the holomorphic derivative of Phi1
/// are closed-form; only alpha is differenced.
pub fn energy_density_plane(alpha: &[f64], bg: &PlaneBackground) -> Vec<f64> {
    let g = &bg.grid;
    let n = alpha.len();
    let mut lap = vec![0.0; n];
    stencil_laplacian(alpha, g.n, 1, g.h(), bg.ghosts(), &mut lap);
    let mut ax = vec![0.0; n];
    let mut ay = vec![0.0; n];
    central_gradient(alpha, g.n, 1, g.h(), bg.ghosts(), &mut ax, &mut ay);
    (0..n)
        .map(|i| {
            let b = bg.lap_alpha0[i] + lap[i];
            let dz = Complex64::new(0.5 * ax[i], -0.5 * ay[i]);
            let e2a = (2.0 * alpha[i]).exp();
            let cov = bg.c1[i] + 2.0 * dz * bg.phi1[i];
            let grad2 = 2.0 * e2a * cov.norm_sqr();
            let p2 = bg.phi1[i].norm_sqr() * e2a;
            b * b + grad2 + 0.25 * (1.0 - p2).powi(2)
        })
        .collect()
}

/// Analytic energy, reported in the normalisation where a degree-d vortex
/// has energy pi d (half the integral of the density above).
pub fn energy_plane(alpha: &[f64], bg: &PlaneBackground) -> f64 {
    let dens = energy_density_plane(alpha, bg);
    0.5 * dens.iter().sum::<f64>() * bg.grid.cell_area()
}

/// Integral of (1 - |Phi|^2)/2.
pub fn flux_plane(alpha: &[f64], bg: &PlaneBackground) -> f64 {
    let p2 = phi_sq(alpha, bg);
    p2.iter().map(|p| 0.5 * (1.0 - p)).sum::<f64>() * bg.grid.cell_area()
}

/// Total winding of Phi over the grid.
pub fn winding_plane(alpha: &[f64], bg: &PlaneBackground) -> Result<i32> {
    match zero_locus(&phi_field(alpha, bg))? {
        ZeroLocus::Zeros(z) => Ok(z.iter().map(|p| p.multiplicity).sum()),
        ZeroLocus::IdenticallyZero => Err(VortexError::InvalidInput("vortex field vanishes identically".into())),
    }
}

/// Radially symmetric degree-d vortex at the origin, solved as a 1-D
/// boundary-value problem on `[0, r_max]` with `cells` cell-centred nodes.
/// Returns `(r, alpha)` samples.
pub fn radial_profile(d: u32, r_max: f64, cells: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let df = d as f64;
    let dr = r_max / cells as f64;
    let r: Vec<f64> = (0..cells).map(|i| (i as f64 + 0.5) * dr).collect();
    let p1: Vec<f64> = r.iter().map(|&r| (r * r / (1.0 + r * r)).powf(df)).collect();
    let hh: Vec<f64> = r
        .iter()
        .zip(&p1)
        .map(|(&r, &p)| 2.0 * df / (1.0 + r * r).powi(2) + 0.5 * (p - 1.0))
        .collect();
    let outer = 0.5 * df * (1.0 + 1.0 / (r_max + 0.5 * dr).powi(2)).ln();
    let mut a = vec![0.0; cells];
    for _ in 0..100 {
        let mut lo = vec![0.0; cells];
        let mut di = vec![0.0; cells];
        let mut up = vec![0.0; cells];
        let mut f = vec![0.0; cells];
        for i in 0..cells {
            let rm = r[i] - 0.5 * dr;
            let rp = r[i] + 0.5 * dr;
            let c = 1.0 / (r[i] * dr * dr);
            let left = if i > 0 { a[i - 1] } else { a[i] };
            let right = if i + 1 < cells { a[i + 1] } else { outer };
            let e = (2.0 * a[i]).exp();
            f[i] = -c * (rp * (right - a[i]) - rm * (a[i] - left)) + 0.5 * p1[i] * (e - 1.0) + hh[i];
            di[i] = c * (rp + rm) + p1[i] * e;
            if i > 0 {
                lo[i] = -c * rm;
            } else {
                di[i] -= c * rm;
            }
            if i + 1 < cells {
                up[i] = -c * rp;
            }
        }
        let step = thomas(&lo, &di, &up, &f);
        let mut mx = 0.0f64;
        for i in 0..cells {
            a[i] -= step[i];
            mx = mx.max(step[i].abs());
        }
        if mx < 1e-13 {
            return Ok((r, a));
        }
    }
    Err(VortexError::Stagnation {
        iterations: 100,
        history: Vec::new(),
    })
}

fn thomas(lo: &[f64], di: &[f64], up: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = di.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = up[0] / di[0];
    d[0] = rhs[0] / di[0];
    for i in 1..n {
        let m = di[i] - lo[i] * c[i - 1];
        c[i] = up[i] / m;
        d[i] = (rhs[i] - lo[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Linear interpolation into a sampled profile.
pub fn interpolate(r: &[f64], f: &[f64], x: f64) -> f64 {
    if x <= r[0] {
        return f[0];
    }
    let dr = r[1] - r[0];
    let k = (((x - r[0]) / dr).floor() as usize).min(r.len() - 2);
    let t = (x - r[k]) / dr;
    f[k] * (1.0 - t) + f[k + 1] * t
}

/// Topological value 2 pi d of the full (unhalved) energy integral.
pub fn topological_plane(d: u32) -> f64 {
    2.0 * PI * d as f64
}
