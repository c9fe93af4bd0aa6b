//! Monopoles on `C x Sigma` in reduced vortex form.
//!
//! A polynomial map `f(z) = sum gamma_i z^i` into holomorphic sections of the
//! normalised frame gives `sigma0(z, x) = f(z)(x)`. The conformal factor is
//! `psi = alpha + beta + delta` with
//!
//! ```text
//! beta  = -(d/2) log(1 + |z|^2)
//! delta = -rho(|z|^2) (x P - y Q),   rho(s) = s^{d-1} / (1 + s)^d
//! P + iQ = T^{-1}(g_d conj(g_{d-1})),   T = Delta_Sigma + |g_d|^2
//! ```
//!
//! and `alpha` solves `mu(alpha) = mu0 + Delta_X alpha + (e^{2 alpha} - 1) |sigma1|^2 / 2 = 0`.
//! Background quantities (`mu0`, derivatives of `beta` and `delta`) are
//! evaluated in closed form; only `alpha` is differentiated numerically.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundles::{theta_basis, torus_zeros, zero_locus, PolynomialMap, SectionBasis, ZeroLocus, ZeroPoint};
use crate::error::{Result, VortexError};
use crate::geometry::krylov::{dot, pcg, sum};
use crate::geometry::plane::{central_gradient, stencil_laplacian};
use crate::geometry::{
    gauss_legendre, product_laplacian, solve_helmholtz, ComplexField, Ghosts, Grid, PlaneBc, PlaneGhosts, PlaneGrid,
    ProductGrid, ScalarField, SeparableInverse, TorusGeometry, TorusSpectral,
};
use crate::plane_vortex::{line_search, NewtonStep};
use crate::surface_vortex::{normalize_leading_coefficient, solve_section_with, FiberConfig, FiberMetric, SurfaceConfig};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProductMode {
    Monopole,
    /// `c_eff = 0`: no root exists and the residual is driven down instead.
    Reducible,
}

/// Plane-direction closure of the truncated product domain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProductBoundary {
    DirichletZero,
    /// Ghost fibres carry the adiabatic fibre vortex at that `z`.
    #[default]
    Asymptotic,
    Neumann,
}

#[derive(Clone, Debug)]
pub struct ProductBackground {
    pub grid: ProductGrid,
    pub mode: ProductMode,
    pub boundary: ProductBoundary,
    pub map: PolynomialMap,
    /// Normalised basis; `basis.curvature_density` is the frame curvature.
    pub basis: SectionBasis,
    /// Conformal factor taking the raw basis to the normalised one.
    pub frame_w: Vec<f64>,
    /// `g_i = gamma_i . basis`, i = 0..=d.
    pub sections: Vec<Vec<Complex64>>,
    /// Frame curvature plus K0 / 2.
    pub kappa: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    p_u: Vec<f64>,
    p_v: Vec<f64>,
    q_u: Vec<f64>,
    q_v: Vec<f64>,
    lap_p: Vec<f64>,
    lap_q: Vec<f64>,
    /// On the plane grid.
    pub beta: Vec<f64>,
    pub delta: Vec<f64>,
    /// `e^{2 beta + 2 delta} |sigma0|^2`.
    pub sigma1_sq: Vec<f64>,
    pub mu0: Vec<f64>,
    pub c_eff: f64,
    pub ghosts: PlaneGhosts,
}

/// Fibre-constant data at one plane point.
#[derive(Clone, Copy, Debug)]
struct PlanePoint {
    x: f64,
    y: f64,
    s: f64,
    beta: f64,
    beta_x: f64,
    beta_y: f64,
    lap_beta: f64,
    rho: f64,
    rho1: f64,
    rho2: f64,
}

/// Derivatives of alpha at one point of the product grid.
#[derive(Clone, Copy, Debug, Default)]
struct AlphaJet {
    a: f64,
    ax: f64,
    ay: f64,
    lap_c: f64,
    lap_s: f64,
    axu: f64,
    axv: f64,
    ayu: f64,
    ayv: f64,
}

#[derive(Clone, Copy, Debug, Default)]
struct PointDensity {
    energy: f64,
    mu: f64,
    curvature_sq: f64,
    sigma_sq: f64,
}

/// Per-fibre integrals over Sigma.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FibreSums {
    pub energy: f64,
    pub mu_sq: f64,
    pub curvature_sq: f64,
    pub sigma_sq: f64,
}

/// `rho(s) = s^{d-1} / (1 + s)^d` with its first two derivatives.
fn rho_derivs(d: usize, s: f64) -> (f64, f64, f64) {
    if d == 0 {
        return (0.0, 0.0, 0.0);
    }
    let a = (d - 1) as i32;
    let (af, df, di) = (a as f64, d as f64, d as i32);
    let q = 1.0 + s;
    let pw = |k: i32| if k == 0 { 1.0 } else { s.powi(k) };
    let rho = pw(a) / q.powi(di);
    let mut r1 = -df * pw(a) / q.powi(di + 1);
    if a >= 1 {
        r1 += af * pw(a - 1) / q.powi(di);
    }
    let mut r2 = df * (df + 1.0) * pw(a) / q.powi(di + 2);
    if a >= 1 {
        r2 -= 2.0 * af * df * pw(a - 1) / q.powi(di + 1);
    }
    if a >= 2 {
        r2 += af * (af - 1.0) * pw(a - 2) / q.powi(di);
    }
    (rho, r1, r2)
}

impl ProductBackground {
    pub fn degree(&self) -> usize {
        self.map.degree()
    }

    pub fn bundle_degree(&self) -> usize {
        self.basis.degree
    }

    /// `-4 pi^2 d c_eff`.
    pub fn topological_energy(&self) -> f64 {
        -4.0 * PI * PI * self.degree() as f64 * self.c_eff
    }

    pub fn plane_ghosts(&self) -> Ghosts<'_> {
        match self.boundary {
            ProductBoundary::DirichletZero => Ghosts::Zero,
            ProductBoundary::Asymptotic => Ghosts::Values(&self.ghosts),
            ProductBoundary::Neumann => Ghosts::Reflect,
        }
    }

    /// Closure for Newton increments (homogeneous version of the data).
    fn increment_ghosts(&self) -> Ghosts<'static> {
        match self.boundary {
            ProductBoundary::Neumann => Ghosts::Reflect,
            _ => Ghosts::Zero,
        }
    }

    fn plane_point_at(&self, x: f64, y: f64) -> PlanePoint {
        let d = self.degree();
        let df = d as f64;
        let s = x * x + y * y;
        let (rho, rho1, rho2) = rho_derivs(d, s);
        PlanePoint {
            x,
            y,
            s,
            beta: -0.5 * df * (1.0 + s).ln(),
            beta_x: -df * x / (1.0 + s),
            beta_y: -df * y / (1.0 + s),
            lap_beta: 2.0 * df / (1.0 + s).powi(2),
            rho,
            rho1,
            rho2,
        }
    }

    fn plane_point(&self, p: usize) -> PlanePoint {
        let (x, y) = self.grid.plane.point(p);
        self.plane_point_at(x, y)
    }

    /// `(sigma0, d_z sigma0)` at torus point `t`.
    fn sigma0_at(&self, z: Complex64, t: usize) -> (Complex64, Complex64) {
        let mut s = ZERO;
        let mut ds = ZERO;
        for g in self.sections.iter().rev() {
            ds = ds * z + s;
            s = s * z + g[t];
        }
        (s, ds)
    }

    /// `sigma0(z, .)` on the torus.
    pub fn sigma0_fibre(&self, z: Complex64) -> Vec<Complex64> {
        (0..self.grid.torus.len()).map(|t| self.sigma0_at(z, t).0).collect()
    }

    fn delta_at(&self, pp: &PlanePoint, t: usize) -> f64 {
        -pp.rho * (pp.x * self.p[t] - pp.y * self.q[t])
    }

    fn density(&self, pp: &PlanePoint, t: usize, j: &AlphaJet) -> PointDensity {
        let (x, y) = (pp.x, pp.y);
        let l = x * self.p[t] - y * self.q[t];
        let lu = x * self.p_u[t] - y * self.q_u[t];
        let lv = x * self.p_v[t] - y * self.q_v[t];
        let delta = -pp.rho * l;
        let dx = -(2.0 * x * pp.rho1 * l + pp.rho * self.p[t]);
        let dy = -(2.0 * y * pp.rho1 * l - pp.rho * self.q[t]);
        let dxu = -(2.0 * x * pp.rho1 * lu + pp.rho * self.p_u[t]);
        let dxv = -(2.0 * x * pp.rho1 * lv + pp.rho * self.p_v[t]);
        let dyu = -(2.0 * y * pp.rho1 * lu - pp.rho * self.q_u[t]);
        let dyv = -(2.0 * y * pp.rho1 * lv - pp.rho * self.q_v[t]);
        let lapc_delta = 4.0 * l * (2.0 * pp.rho1 + pp.s * pp.rho2);
        let laps_delta = -pp.rho * (x * self.lap_p[t] - y * self.lap_q[t]);

        let psi = j.a + pp.beta + delta;
        let psi_x = j.ax + pp.beta_x + dx;
        let psi_y = j.ay + pp.beta_y + dy;
        let lc = j.lap_c + pp.lap_beta + lapc_delta;
        let ls = j.lap_s + laps_delta;
        let (s0, ds0) = self.sigma0_at(Complex64::new(x, y), t);
        let e2 = (2.0 * psi).exp();
        let sigma_sq = e2 * s0.norm_sqr();
        let f_sigma = self.kappa[t] + ls;
        let fsig = f_sigma + 0.5 * sigma_sq;
        let a = (j.axv + dxv) - (j.ayu + dyu);
        let b = (j.axu + dxu) + (j.ayv + dyv);
        let g = ds0 + Complex64::new(psi_x, -psi_y) * s0;
        let mixed = 2.0 * a * a + 2.0 * b * b;
        PointDensity {
            energy: lc * lc + mixed + 2.0 * e2 * g.norm_sqr() + fsig * fsig,
            mu: lc + fsig,
            curvature_sq: lc * lc + mixed + f_sigma * f_sigma,
            sigma_sq,
        }
    }

    /// `delta` on the fibre over plane point `p`.
    pub fn delta_fibre(&self, p: usize) -> &[f64] {
        let nt = self.grid.torus.len();
        &self.delta[p * nt..(p + 1) * nt]
    }

    /// `sigma1 = e^{beta + delta} sigma0` on the fibre over plane point `p`.
    pub fn sigma1_fibre(&self, p: usize) -> Vec<Complex64> {
        let (x, y) = self.grid.plane.point(p);
        let z = Complex64::new(x, y);
        let b = self.beta[p];
        self.delta_fibre(p)
            .iter()
            .enumerate()
            .map(|(t, dl)| self.sigma0_at(z, t).0 * (b + dl).exp())
            .collect()
    }
}

/// Build the background from a map `f` whose coefficients refer to a basis
/// already normalised for `f`'s leading coefficient.
pub fn background_product(
    f: &PolynomialMap,
    basis: &SectionBasis,
    frame_w: Vec<f64>,
    grid: &ProductGrid,
    boundary: ProductBoundary,
    surface: &SurfaceConfig,
) -> Result<ProductBackground> {
    build_background(f, basis, frame_w, grid, boundary, ProductMode::Monopole, surface)
}

/// `(2 pi m + K0 V / 2) / pi`.
pub fn effective_chern(geom: &TorusGeometry, m: usize) -> f64 {
    (2.0 * PI * m as f64 + 0.5 * geom.k0 * geom.volume()) / PI
}

fn build_background(
    f: &PolynomialMap,
    basis: &SectionBasis,
    frame_w: Vec<f64>,
    grid: &ProductGrid,
    boundary: ProductBoundary,
    mode: ProductMode,
    surface: &SurfaceConfig,
) -> Result<ProductBackground> {
    if basis.geom != grid.torus {
        return Err(VortexError::GridMismatch {
            expected: Grid::Torus(grid.torus.clone()).describe(),
            found: Grid::Torus(basis.geom.clone()).describe(),
        });
    }
    if f.dim() != basis.dim() {
        return Err(VortexError::InvalidInput(format!(
            "polynomial map has coefficient dimension {}, basis has {}",
            f.dim(),
            basis.dim()
        )));
    }
    let nt = grid.torus.len();
    if frame_w.len() != nt {
        return Err(VortexError::GridMismatch {
            expected: format!("{nt} frame values"),
            found: format!("{} frame values", frame_w.len()),
        });
    }
    let geom = &grid.torus;
    let d = f.degree();
    let c_eff = effective_chern(geom, basis.degree);
    if mode == ProductMode::Monopole && c_eff >= 0.0 {
        return Err(VortexError::Solvability {
            c: -PI * c_eff,
            m: basis.degree,
            volume: geom.volume(),
            k0: geom.k0,
        });
    }
    let sections: Vec<Vec<Complex64>> = f
        .coefficients
        .iter()
        .map(|g| basis.combine(g))
        .collect::<Result<_>>()?;
    let kappa: Vec<f64> = basis.curvature_density.iter().map(|c| c + 0.5 * geom.k0).collect();
    let lead_sq: Vec<f64> = sections[d].iter().map(|z| z.norm_sqr()).collect();
    if mode == ProductMode::Monopole {
        let scale = kappa.iter().fold(1.0f64, |m, k| m.max(k.abs()));
        let defect = kappa
            .iter()
            .zip(&lead_sq)
            .map(|(k, g)| (k + 0.5 * g).abs())
            .fold(0.0, f64::max);
        if defect > 1e-6 * scale {
            return Err(VortexError::InvalidInput(format!(
                "frame is not normalised for the leading coefficient (defect {defect:.3e})"
            )));
        }
    }

    let ts = TorusSpectral::new(geom);
    let zeros = vec![0.0; nt];
    let (mut p, mut q) = (zeros.clone(), zeros.clone());
    if d >= 1 {
        let tg = Grid::Torus(geom.clone());
        let w0: Vec<Complex64> = sections[d].iter().zip(&sections[d - 1]).map(|(a, b)| a * b.conj()).collect();
        let v = ScalarField::new(tg.clone(), lead_sq.clone())?;
        let re = ScalarField::new(tg.clone(), w0.iter().map(|z| z.re).collect())?;
        let im = ScalarField::new(tg.clone(), w0.iter().map(|z| z.im).collect())?;
        p = solve_helmholtz(&v, &re, &tg, 1e-13)?.values;
        q = solve_helmholtz(&v, &im, &tg, 1e-13)?.values;
    }
    let deriv = |f: &[f64], which: u8| {
        let mut out = vec![0.0; nt];
        match which {
            0 => ts.d_u(f, &mut out),
            1 => ts.d_v(f, &mut out),
            _ => ts.laplacian(f, &mut out),
        }
        out
    };
    let mut bg = ProductBackground {
        grid: grid.clone(),
        mode,
        boundary,
        map: f.clone(),
        basis: basis.clone(),
        frame_w,
        sections,
        kappa,
        p_u: deriv(&p, 0),
        p_v: deriv(&p, 1),
        q_u: deriv(&q, 0),
        q_v: deriv(&q, 1),
        lap_p: deriv(&p, 2),
        lap_q: deriv(&q, 2),
        p,
        q,
        beta: Vec::new(),
        delta: Vec::new(),
        sigma1_sq: Vec::new(),
        mu0: Vec::new(),
        c_eff,
        ghosts: PlaneGhosts::zeros(grid.plane.n, nt),
    };

    let np = grid.plane.len();
    bg.beta = (0..np).map(|i| bg.plane_point(i).beta).collect();
    let mut delta = vec![0.0; np * nt];
    let mut s1 = vec![0.0; np * nt];
    let mut mu0 = vec![0.0; np * nt];
    {
        let bgr = &bg;
        delta
            .par_chunks_mut(nt)
            .zip(s1.par_chunks_mut(nt))
            .zip(mu0.par_chunks_mut(nt))
            .enumerate()
            .for_each(|(ip, ((dl, s1), mu))| {
                let pp = bgr.plane_point(ip);
                let z = Complex64::new(pp.x, pp.y);
                let jet = AlphaJet::default();
                for t in 0..nt {
                    dl[t] = bgr.delta_at(&pp, t);
                    s1[t] = (2.0 * (pp.beta + dl[t])).exp() * bgr.sigma0_at(z, t).0.norm_sqr();
                    mu[t] = bgr.density(&pp, t, &jet).mu;
                }
            });
    }
    bg.delta = delta;
    bg.sigma1_sq = s1;
    bg.mu0 = mu0;
    if boundary == ProductBoundary::Asymptotic && d >= 1 {
        bg.ghosts = adiabatic_ghosts(&bg, &ts, surface)?;
    }
    Ok(bg)
}

/// Ghost fibres from the fibre vortex equation at each ghost `z`:
/// `Delta_Sigma w + |sigma0(z)|^2 e^{2w} / 2 + kappa = 0`, `alpha = w - beta - delta`.
fn adiabatic_ghosts(bg: &ProductBackground, ts: &TorusSpectral, cfg: &SurfaceConfig) -> Result<PlaneGhosts> {
    let plane = &bg.grid.plane;
    let (n, nt) = (plane.n, bg.grid.torus.len());
    let ni = n as isize;
    let mut out = PlaneGhosts::zeros(n, nt);
    let mut warm: Option<Vec<f64>> = None;
    for side in 0..4 {
        for k in 0..n {
            let ki = k as isize;
            let (ix, iy) = match side {
                0 => (-1, ki),
                1 => (ni, ki),
                2 => (ki, -1),
                _ => (ki, ni),
            };
            let (x, y) = (plane.coord(ix), plane.coord(iy));
            let pp = bg.plane_point_at(x, y);
            let section = bg.sigma0_fibre(Complex64::new(x, y));
            let vortex = solve_section_with(ts, &bg.basis, &section, warm.as_deref(), cfg)?;
            let dst = match side {
                0 => &mut out.west,
                1 => &mut out.east,
                2 => &mut out.south,
                _ => &mut out.north,
            };
            for t in 0..nt {
                dst[k * nt + t] = vortex.w[t] - pp.beta - bg.delta_at(&pp, t);
            }
            warm = Some(vortex.w);
        }
    }
    Ok(out)
}

/// The background for a `c_eff = 0` run: raw basis, `f = s_0`, `d = 0`,
/// zero-flux plane closure.
pub fn reducible_background(grid: &ProductGrid, m: usize) -> Result<ProductBackground> {
    let basis = theta_basis(&grid.torus, m as i64)?;
    let mut lead = vec![ZERO; basis.dim()];
    lead[0] = Complex64::new(1.0, 0.0);
    let f = PolynomialMap::new(vec![lead])?;
    let nt = grid.torus.len();
    build_background(
        &f,
        &basis,
        vec![0.0; nt],
        grid,
        ProductBoundary::Neumann,
        ProductMode::Reducible,
        &SurfaceConfig::default(),
    )
}

/// `mu(alpha) = mu0 + Delta_X alpha + (e^{2 alpha} - 1) |sigma1|^2 / 2`.
pub fn moment_map_product(alpha: &[f64], bg: &ProductBackground) -> Result<Vec<f64>> {
    let ts = TorusSpectral::new(&bg.grid.torus);
    check_len(alpha, bg)?;
    Ok(moment_map_with(&ts, alpha, bg))
}

fn check_len(alpha: &[f64], bg: &ProductBackground) -> Result<()> {
    if alpha.len() != bg.grid.len() {
        return Err(VortexError::GridMismatch {
            expected: format!("{} values", bg.grid.len()),
            found: format!("{} values", alpha.len()),
        });
    }
    Ok(())
}

fn moment_map_with(ts: &TorusSpectral, alpha: &[f64], bg: &ProductBackground) -> Vec<f64> {
    let mut out = vec![0.0; alpha.len()];
    product_laplacian(alpha, &bg.grid, ts, bg.plane_ghosts(), &mut out);
    out.par_iter_mut()
        .zip(alpha.par_iter())
        .zip(bg.mu0.par_iter().zip(bg.sigma1_sq.par_iter()))
        .for_each(|((o, a), (m, s))| *o += m + 0.5 * ((2.0 * a).exp() - 1.0) * s);
    out
}

/// Linearisation `Delta_X gamma + e^{2 alpha} |sigma1|^2 gamma`.
pub fn linearized_product(alpha: &[f64], gamma: &[f64], bg: &ProductBackground) -> Result<Vec<f64>> {
    check_len(alpha, bg)?;
    check_len(gamma, bg)?;
    let ts = TorusSpectral::new(&bg.grid.torus);
    let mut out = vec![0.0; alpha.len()];
    product_laplacian(gamma, &bg.grid, &ts, bg.increment_ghosts(), &mut out);
    for i in 0..out.len() {
        out[i] += (2.0 * alpha[i]).exp() * bg.sigma1_sq[i] * gamma[i];
    }
    Ok(out)
}

/// L^2 norm over the truncated product domain.
pub fn l2_product(f: &[f64], grid: &ProductGrid) -> f64 {
    (dot(f, f) * grid.cell_volume()).sqrt()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProductConfig {
    pub tol: f64,
    pub max_newton: usize,
    pub damping_floor: f64,
    pub cg_tol: f64,
    pub boundary: ProductBoundary,
    /// Boundary-ring |alpha| above which a larger radius is requested.
    pub boundary_warning: f64,
    pub surface: SurfaceConfig,
}

impl Default for ProductConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_newton: 60,
            damping_floor: 1.0 / 1024.0,
            cg_tol: 1e-10,
            boundary: ProductBoundary::Asymptotic,
            boundary_warning: 0.05,
            surface: SurfaceConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductEnergy {
    pub e_an: f64,
    pub e_top: f64,
    /// `int |mu|^2`, box plus exterior.
    pub mu_sq: f64,
    pub identity_gap: f64,
    /// Contribution of the region outside the square (zero-Dirichlet only).
    pub exterior_energy: f64,
    pub exterior_mu_sq: f64,
}

#[derive(Clone, Debug)]
pub struct ProductSolution {
    pub alpha: Vec<f64>,
    pub residual_norm: f64,
    pub energy: ProductEnergy,
    pub history: Vec<NewtonStep>,
    /// max |alpha| over the outermost ring of plane cells.
    pub boundary_max: f64,
    pub boundary_warning: bool,
}

impl ProductSolution {
    pub fn iterations(&self) -> usize {
        self.history.len().saturating_sub(1)
    }
}

/// Normalise the frame for `f`'s leading coefficient, build the background
/// and solve from `alpha = 0`.
pub fn solve_product(
    f: &PolynomialMap,
    raw_basis: &SectionBasis,
    grid: &ProductGrid,
    cfg: &ProductConfig,
) -> Result<(ProductSolution, ProductBackground)> {
    let bg = prepare_product(f, raw_basis, grid, cfg)?;
    let sol = solve_product_from(&bg, vec![0.0; grid.len()], cfg)?;
    Ok((sol, bg))
}

pub fn prepare_product(
    f: &PolynomialMap,
    raw_basis: &SectionBasis,
    grid: &ProductGrid,
    cfg: &ProductConfig,
) -> Result<ProductBackground> {
    if raw_basis.geom != grid.torus {
        return Err(VortexError::GridMismatch {
            expected: Grid::Torus(grid.torus.clone()).describe(),
            found: Grid::Torus(raw_basis.geom.clone()).describe(),
        });
    }
    let c_eff = effective_chern(&grid.torus, raw_basis.degree);
    if c_eff >= 0.0 {
        return Err(VortexError::Solvability {
            c: -PI * c_eff,
            m: raw_basis.degree,
            volume: grid.torus.volume(),
            k0: grid.torus.k0,
        });
    }
    let (vortex, basis) = normalize_leading_coefficient(raw_basis, f.leading(), &cfg.surface)?;
    background_product(f, &basis, vortex.w, grid, cfg.boundary, &cfg.surface)
}

pub fn solve_product_from(bg: &ProductBackground, init: Vec<f64>, cfg: &ProductConfig) -> Result<ProductSolution> {
    if !(cfg.tol > 0.0) || !(cfg.cg_tol > 0.0) {
        return Err(VortexError::InvalidInput("tolerances must be positive".into()));
    }
    check_len(&init, bg)?;
    let ts = TorusSpectral::new(&bg.grid.torus);
    let (alpha, history, rnorm) = newton(bg, &ts, init, cfg, |_, rnorm| rnorm < cfg.tol)?;
    let energy = energy_with(&ts, &alpha, bg);
    let boundary_max = boundary_ring_max(&alpha, &bg.grid);
    Ok(ProductSolution {
        boundary_warning: boundary_max > cfg.boundary_warning,
        boundary_max,
        alpha,
        residual_norm: rnorm,
        energy,
        history,
    })
}

type NewtonOutcome = (Vec<f64>, Vec<NewtonStep>, f64);

/// Damped Newton on `mu(alpha) = 0`, stopping when `done(alpha, |mu|)` holds.
fn newton<D>(
    bg: &ProductBackground,
    ts: &TorusSpectral,
    init: Vec<f64>,
    cfg: &ProductConfig,
    mut done: D,
) -> Result<NewtonOutcome>
where
    D: FnMut(&[f64], f64) -> bool,
{
    let grid = &bg.grid;
    let n = grid.len();
    let bc = if bg.boundary == ProductBoundary::Neumann {
        PlaneBc::Neumann
    } else {
        PlaneBc::Dirichlet
    };
    let inv = SeparableInverse::new(grid.plane.n, grid.plane.h(), bc, Some(ts));
    let inc = bg.increment_ghosts();
    let eval = |a: &[f64]| {
        let r = moment_map_with(ts, a, bg);
        let nr = l2_product(&r, grid);
        (r, nr)
    };
    let mut alpha = init;
    let (mut res, mut rnorm) = eval(&alpha);
    let mut history = vec![NewtonStep {
        residual: rnorm,
        step: 0.0,
        cg_iterations: 0,
    }];
    let mut it = 0;
    while !done(&alpha, rnorm) {
        if it >= cfg.max_newton {
            return Err(VortexError::Stagnation {
                iterations: it,
                history: history.iter().map(|h| h.residual).collect(),
            });
        }
        it += 1;
        let v: Vec<f64> = alpha
            .par_iter()
            .zip(bg.sigma1_sq.par_iter())
            .map(|(a, s)| (2.0 * a).exp() * s)
            .collect();
        let vbar = sum(&v) / n as f64;
        let rhs: Vec<f64> = res.iter().map(|r| -r).collect();
        let mut step = vec![0.0; n];
        let forcing = (0.1 * rnorm).clamp(cfg.cg_tol, 1e-3);
        let stats = pcg(
            |x, y| {
                product_laplacian(x, grid, ts, inc, y);
                y.par_iter_mut()
                    .zip(x.par_iter().zip(v.par_iter()))
                    .for_each(|(y, (x, v))| *y += v * x);
            },
            |r, z| inv.apply(r, vbar, z),
            &rhs,
            &mut step,
            forcing,
            1000,
        )?;
        let (new_alpha, new_res, new_norm, t) =
            line_search(&alpha, &step, rnorm, cfg.damping_floor, eval).ok_or_else(|| VortexError::Stagnation {
                iterations: it,
                history: history.iter().map(|h| h.residual).collect(),
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
    Ok((alpha, history, rnorm))
}

fn boundary_ring_max(alpha: &[f64], grid: &ProductGrid) -> f64 {
    let (n, nt) = (grid.plane.n, grid.torus.len());
    let mut m = 0.0f64;
    for ix in 0..n {
        for iy in 0..n {
            if ix == 0 || iy == 0 || ix + 1 == n || iy + 1 == n {
                let p = ix * n + iy;
                for a in &alpha[p * nt..(p + 1) * nt] {
                    m = m.max(a.abs());
                }
            }
        }
    }
    m
}

/// Analytic energy, topological energy and the defect of
/// `int |mu|^2 = E_an - E_top`. Under the zero-Dirichlet closure alpha
/// vanishes outside the square and that region is added by polar
/// Gauss-Legendre quadrature of the background; the other closures
/// integrate over the square only.
pub fn energy_product(alpha: &[f64], bg: &ProductBackground) -> Result<ProductEnergy> {
    check_len(alpha, bg)?;
    let ts = TorusSpectral::new(&bg.grid.torus);
    Ok(energy_with(&ts, alpha, bg))
}

fn energy_with(ts: &TorusSpectral, alpha: &[f64], bg: &ProductBackground) -> ProductEnergy {
    let sums = fibre_sums(ts, alpha, bg);
    let da = bg.grid.plane.cell_area();
    let e_box = sum(&sums.iter().map(|s| s.energy).collect::<Vec<_>>()) * da;
    let mu_box = sum(&sums.iter().map(|s| s.mu_sq).collect::<Vec<_>>()) * da;
    let (e_ext, mu_ext) = if bg.boundary == ProductBoundary::DirichletZero {
        exterior(bg, 24, 24)
    } else {
        (0.0, 0.0)
    };
    let e_an = e_box + e_ext;
    let mu_sq = mu_box + mu_ext;
    let e_top = bg.topological_energy();
    ProductEnergy {
        e_an,
        e_top,
        mu_sq,
        identity_gap: (mu_sq - (e_an - e_top)).abs(),
        exterior_energy: e_ext,
        exterior_mu_sq: mu_ext,
    }
}

/// Torus integrals of the energy, |mu|^2, curvature and |sigma|^2 densities
/// over every plane point.
pub fn fibre_integrals(alpha: &[f64], bg: &ProductBackground) -> Result<Vec<FibreSums>> {
    check_len(alpha, bg)?;
    let ts = TorusSpectral::new(&bg.grid.torus);
    Ok(fibre_sums(&ts, alpha, bg))
}

fn fibre_sums(ts: &TorusSpectral, alpha: &[f64], bg: &ProductBackground) -> Vec<FibreSums> {
    let g = &bg.grid;
    let (n, nt, h) = (g.plane.n, g.torus.len(), g.plane.h());
    let ghosts = bg.plane_ghosts();
    let mut lap_c = vec![0.0; alpha.len()];
    stencil_laplacian(alpha, n, nt, h, ghosts, &mut lap_c);
    let mut ax = vec![0.0; alpha.len()];
    let mut ay = vec![0.0; alpha.len()];
    central_gradient(alpha, n, nt, h, ghosts, &mut ax, &mut ay);
    let dt = g.torus.cell_area();
    (0..g.plane.len())
        .into_par_iter()
        .map(|ip| {
            let r = ip * nt..(ip + 1) * nt;
            let mut lap_s = vec![0.0; nt];
            let mut xu = vec![0.0; nt];
            let mut xv = vec![0.0; nt];
            let mut yu = vec![0.0; nt];
            let mut yv = vec![0.0; nt];
            ts.laplacian(&alpha[r.clone()], &mut lap_s);
            ts.d_u(&ax[r.clone()], &mut xu);
            ts.d_v(&ax[r.clone()], &mut xv);
            ts.d_u(&ay[r.clone()], &mut yu);
            ts.d_v(&ay[r.clone()], &mut yv);
            let pp = bg.plane_point(ip);
            let mut acc = FibreSums::default();
            for t in 0..nt {
                let i = ip * nt + t;
                let jet = AlphaJet {
                    a: alpha[i],
                    ax: ax[i],
                    ay: ay[i],
                    lap_c: lap_c[i],
                    lap_s: lap_s[t],
                    axu: xu[t],
                    axv: xv[t],
                    ayu: yu[t],
                    ayv: yv[t],
                };
                let pd = bg.density(&pp, t, &jet);
                acc.energy += pd.energy;
                acc.mu_sq += pd.mu * pd.mu;
                acc.curvature_sq += pd.curvature_sq;
                acc.sigma_sq += pd.sigma_sq;
            }
            acc.energy *= dt;
            acc.mu_sq *= dt;
            acc.curvature_sq *= dt;
            acc.sigma_sq *= dt;
            acc
        })
        .collect()
}

/// Integrals of the alpha = 0 energy and |mu0|^2 densities outside the
/// square. Each of the 8 octants is mapped to `t = rho(theta) / r in (0, 1]`.
fn exterior(bg: &ProductBackground, n_theta: usize, n_rad: usize) -> (f64, f64) {
    if bg.degree() == 0 && bg.mode == ProductMode::Monopole {
        return (0.0, 0.0);
    }
    let r0 = bg.grid.plane.radius;
    let nt = bg.grid.torus.len();
    let dt = bg.grid.torus.cell_area();
    let (th, wth) = gauss_legendre(n_theta, 0.0, 0.25 * PI);
    let (tt, wt) = gauss_legendre(n_rad, 0.0, 1.0);
    let jet = AlphaJet::default();
    let parts: Vec<(f64, f64)> = (0..8 * n_theta)
        .into_par_iter()
        .map(|job| {
            let (k, i) = (job / n_theta, job % n_theta);
            let theta = th[i];
            let phi = if k % 2 == 0 {
                k as f64 * 0.25 * PI + theta
            } else {
                (k + 1) as f64 * 0.25 * PI - theta
            };
            let rho = r0 / theta.cos();
            let (mut e, mut m) = (0.0, 0.0);
            for (t, w) in tt.iter().zip(&wt) {
                let r = rho / t;
                let jac = w * wth[i] * rho * rho / (t * t * t);
                let pp = bg.plane_point_at(r * phi.cos(), r * phi.sin());
                let (mut ef, mut mf) = (0.0, 0.0);
                for ti in 0..nt {
                    let pd = bg.density(&pp, ti, &jet);
                    ef += pd.energy;
                    mf += pd.mu * pd.mu;
                }
                e += jac * ef * dt;
                m += jac * mf * dt;
            }
            (e, m)
        })
        .collect();
    parts.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

/// Both sides of the fibrewise Bogomol'nyi identity
///
/// ```text
/// int (F + K/2)^2 + |D sigma|^2 + |sigma|^4 / 4 + K |sigma|^2 / 2
///   = int |D_u sigma + i D_v sigma|^2 + (F + K/2 + |sigma|^2 / 2)^2
/// ```
///
/// for a configuration in the reference trivialisation, with second-order
/// central differences for every derivative (automorphy across the v seam).
pub fn verify_fiber_identity(cfg: &FiberConfig, geom: &TorusGeometry) -> Result<FiberIdentity> {
    let (nu, nv) = (geom.n_u, geom.n_v);
    let npts = geom.len();
    if cfg.section.len() != npts || cfg.a_u.len() != npts || cfg.a_v.len() != npts {
        return Err(VortexError::GridMismatch {
            expected: format!("{npts} torus values"),
            found: format!("{} values", cfg.section.len()),
        });
    }
    let (hu, hv) = (geom.h_u(), geom.h_v());
    let b = 2.0 * PI * cfg.degree as f64 / geom.volume();
    let k = geom.k0;
    let m = cfg.degree as f64;
    let s = &cfg.section;
    let idx = |i: usize, j: usize| i * nv + j;
    let up = |i: usize, j: usize| -> Complex64 {
        if j + 1 < nv {
            s[idx(i, j + 1)]
        } else {
            let u = (i as f64 + 0.5) * hu;
            s[idx(i, 0)] * Complex64::from_polar(1.0, -2.0 * PI * m * u / geom.period_u)
        }
    };
    let down = |i: usize, j: usize| -> Complex64 {
        if j > 0 {
            s[idx(i, j - 1)]
        } else {
            let u = (i as f64 + 0.5) * hu;
            s[idx(i, nv - 1)] * Complex64::from_polar(1.0, 2.0 * PI * m * u / geom.period_u)
        }
    };
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for i in 0..nu {
        let (ip, im) = ((i + 1) % nu, (i + nu - 1) % nu);
        for j in 0..nv {
            let (jp, jm) = ((j + 1) % nv, (j + nv - 1) % nv);
            let v = (j as f64 + 0.5) * hv;
            let c = idx(i, j);
            let au = -b * v + cfg.a_u[c];
            let av = cfg.a_v[c];
            let du = (s[idx(ip, j)] - s[idx(im, j)]) / (2.0 * hu) - Complex64::new(0.0, au) * s[c];
            let dv = (up(i, j) - down(i, j)) / (2.0 * hv) - Complex64::new(0.0, av) * s[c];
            let curl = (cfg.a_v[idx(ip, j)] - cfg.a_v[idx(im, j)]) / (2.0 * hu)
                - (cfg.a_u[idx(i, jp)] - cfg.a_u[idx(i, jm)]) / (2.0 * hv);
            let f = b + curl + 0.5 * k;
            let s2 = s[c].norm_sqr();
            lhs += f * f + du.norm_sqr() + dv.norm_sqr() + 0.25 * s2 * s2 + 0.5 * k * s2;
            let dbar = du + Complex64::new(0.0, 1.0) * dv;
            let g = f + 0.5 * s2;
            rhs += dbar.norm_sqr() + g * g;
        }
    }
    let da = geom.cell_area();
    let (lhs, rhs) = (lhs * da, rhs * da);
    Ok(FiberIdentity {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Reducible,
    Inconsistent,
}

#[derive(Clone, Debug)]
pub struct ReducibleReport {
    pub verdict: Verdict,
    /// Largest fibre integral of |sigma|^2.
    pub sigma_sq: f64,
    /// Largest fibre L^2 norm of the twisted curvature.
    pub curvature: f64,
    pub volume: f64,
    pub history: Vec<NewtonStep>,
    pub diagnostics: String,
}

/// Drive the residual down on a `c_eff = 0` bundle and report whether the
/// section dies and the twisted curvature flattens.
pub fn check_reducible(plane: &PlaneGrid, torus: &TorusGeometry, m: usize, cfg: &ProductConfig) -> Result<ReducibleReport> {
    let pair = 2.0 * PI * m as f64 + 0.5 * torus.k0 * torus.volume();
    if pair.abs() > 1e-12 * (1.0 + 2.0 * PI * m as f64) {
        return Err(VortexError::Precondition(format!(
            "2 pi m + K0 V / 2 = {pair:.6e}; the reducible check needs it to vanish"
        )));
    }
    let grid = ProductGrid::new(plane.clone(), torus.clone());
    let bg = reducible_background(&grid, m)?;
    let ts = TorusSpectral::new(torus);
    let volume = torus.volume();
    let measure = |alpha: &[f64]| -> (f64, f64) {
        let sums = fibre_sums(&ts, alpha, &bg);
        let s = sums.iter().map(|x| x.sigma_sq).fold(0.0, f64::max);
        let c = sums.iter().map(|x| x.curvature_sq).fold(0.0, f64::max).sqrt();
        (s, c)
    };
    let pass = |s: f64, c: f64| s < 1e-6 * volume && c < 1e-6;
    let outcome = newton(&bg, &ts, vec![0.0; grid.len()], cfg, |a, _| {
        let (s, c) = measure(a);
        pass(s, c)
    });
    let (alpha, history, diagnostics) = match outcome {
        Ok((a, h, _)) => (a, h, String::new()),
        Err(VortexError::Stagnation { iterations, history }) => {
            let hist = history
                .iter()
                .map(|&r| NewtonStep {
                    residual: r,
                    step: 0.0,
                    cg_iterations: 0,
                })
                .collect();
            return Ok(ReducibleReport {
                verdict: Verdict::Inconsistent,
                sigma_sq: f64::NAN,
                curvature: f64::NAN,
                volume,
                history: hist,
                diagnostics: format!("residual stalled after {iterations} iterations"),
            });
        }
        Err(e) => return Err(e),
    };
    let (s, c) = measure(&alpha);
    Ok(ReducibleReport {
        verdict: if pass(s, c) { Verdict::Reducible } else { Verdict::Inconsistent },
        sigma_sq: s,
        curvature: c,
        volume,
        history,
        diagnostics,
    })
}

#[derive(Clone, Debug)]
pub struct SliceRow {
    pub x: f64,
    pub y: f64,
    pub r: f64,
    /// Gauge-minimised H^1 distance to the normalised leading vortex.
    pub distance: f64,
    pub zeros: Vec<ZeroPoint>,
    pub reference_zeros: Vec<ZeroPoint>,
}

#[derive(Clone, Debug)]
pub struct SliceReport {
    pub rows: Vec<SliceRow>,
    /// Zeros of `z -> <sigma(z, .), g_d>` on the plane grid.
    pub plane_zeros: ZeroLocus,
    /// Same pairing with `sigma0` in place of `sigma`.
    pub reference_plane_zeros: ZeroLocus,
}

/// Fibre diagnostics along the ray `y = h/2, x > 0`.
pub fn slice_report(sol: &ProductSolution, bg: &ProductBackground) -> Result<SliceReport> {
    check_len(&sol.alpha, bg)?;
    let g = &bg.grid;
    let (n, nt) = (g.plane.n, g.torus.len());
    let ts = TorusSpectral::new(&g.torus);
    let m = bg.bundle_degree();
    let metric = FiberMetric::new(&g.torus, m, 1)?;
    let d = bg.degree();
    let target = FiberConfig::from_conformal(&ts, &bg.frame_w, bg.sections[d].clone(), m);
    let fibre = |p: usize| -> (Vec<f64>, Vec<Complex64>, Vec<Complex64>) {
        let (x, y) = g.plane.point(p);
        let s0 = bg.sigma0_fibre(Complex64::new(x, y));
        let psi: Vec<f64> = (0..nt)
            .map(|t| sol.alpha[p * nt + t] + bg.beta[p] + bg.delta[p * nt + t])
            .collect();
        let s: Vec<Complex64> = s0.iter().zip(&psi).map(|(z, w)| z * w.exp()).collect();
        (psi, s, s0)
    };
    let iy = n / 2;
    let rows: Vec<SliceRow> = (n / 2..n)
        .into_par_iter()
        .map(|ix| -> Result<SliceRow> {
            let p = ix * n + iy;
            let (x, y) = g.plane.point(p);
            let (psi, s, s0) = fibre(p);
            let total: Vec<f64> = psi.iter().zip(&bg.frame_w).map(|(a, b)| a + b).collect();
            let cfg = FiberConfig::from_conformal(&ts, &total, s.clone(), m);
            Ok(SliceRow {
                x,
                y,
                r: x.hypot(y),
                distance: metric.distance(&cfg, &target)?,
                zeros: torus_zeros(&s, &g.torus, m),
                reference_zeros: torus_zeros(&s0, &g.torus, m),
            })
        })
        .collect::<Result<_>>()?;

    let test = &bg.sections[d];
    let da = g.torus.cell_area();
    let pair = |s: &[Complex64]| s.iter().zip(test).map(|(a, b)| a * b.conj()).sum::<Complex64>() * da;
    let (vals, refs): (Vec<Complex64>, Vec<Complex64>) = (0..g.plane.len())
        .into_par_iter()
        .map(|p| {
            let (_, s, s0) = fibre(p);
            (pair(&s), pair(&s0))
        })
        .unzip();
    let pg = Grid::Plane(g.plane.clone());
    Ok(SliceReport {
        rows,
        plane_zeros: zero_locus(&ComplexField::new(pg.clone(), vals, 0)?)?,
        reference_plane_zeros: zero_locus(&ComplexField::new(pg, refs, 0)?)?,
    })
}
