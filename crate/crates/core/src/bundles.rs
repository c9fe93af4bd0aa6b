//! Divisors, theta-function bases of holomorphic sections of degree-m line
//! bundles on the torus, polynomial maps with coefficients in those bases,
//! and a winding-number zero detector.
//!
//! Reference trivialisation for degree m: connection `A_u = -(2 pi m / V) v`,
//! `A_v = 0` with `D = d - iA`. Sections are periodic in u and satisfy
//! `s(u, v + L_v) = exp(-2 pi i m u / L_u) s(u, v)`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VortexError};
use crate::geometry::transforms::signed_freq;
use crate::geometry::{ComplexField, Grid, PlaneGrid, TorusGeometry};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Divisor {
    pub points: Vec<(f64, f64)>,
    pub multiplicities: Vec<u32>,
}

impl Divisor {
    pub fn new(points: Vec<(f64, f64)>, multiplicities: Vec<u32>) -> Result<Self> {
        if points.len() != multiplicities.len() {
            return Err(VortexError::InvalidInput(format!(
                "divisor has {} points but {} multiplicities",
                points.len(),
                multiplicities.len()
            )));
        }
        if multiplicities.iter().any(|&n| n == 0) {
            return Err(VortexError::InvalidInput("divisor multiplicities must be >= 1".into()));
        }
        Ok(Self { points, multiplicities })
    }

    pub fn empty() -> Self {
        Self {
            points: Vec::new(),
            multiplicities: Vec::new(),
        }
    }

    /// Simple zeros at the given points.
    pub fn simple(points: Vec<(f64, f64)>) -> Self {
        let multiplicities = vec![1; points.len()];
        Self { points, multiplicities }
    }

    pub fn degree(&self) -> u32 {
        self.multiplicities.iter().sum()
    }

    /// Largest distance of a point from the origin.
    pub fn spread(&self) -> f64 {
        self.points.iter().map(|&(x, y)| x.hypot(y)).fold(0.0, f64::max)
    }

    pub fn check_inside(&self, grid: &PlaneGrid) -> Result<()> {
        for &(x, y) in &self.points {
            if !grid.contains_strictly(x, y) {
                return Err(VortexError::InvalidInput(format!(
                    "divisor point ({x}, {y}) lies outside the square of half-width {}",
                    grid.radius
                )));
            }
        }
        Ok(())
    }
}

/// Holomorphic sections of the degree-m bundle sampled on the torus grid,
/// together with the curvature density of the frame they are holomorphic for.
#[derive(Clone, Debug)]
pub struct SectionBasis {
    pub geom: TorusGeometry,
    pub degree: usize,
    pub sections: Vec<Vec<Complex64>>,
    /// i*F of the frame connection; the constant 2 pi m / V until rescaled.
    pub curvature_density: Vec<f64>,
}

impl SectionBasis {
    pub fn dim(&self) -> usize {
        self.sections.len()
    }

    /// Pointwise contraction `sum_j c_j s_j`.
    pub fn combine(&self, coeff: &[Complex64]) -> Result<Vec<Complex64>> {
        if coeff.len() != self.dim() {
            return Err(VortexError::InvalidInput(format!(
                "coefficient vector has length {}, basis dimension is {}",
                coeff.len(),
                self.dim()
            )));
        }
        let mut out = vec![ZERO; self.geom.len()];
        for (c, s) in coeff.iter().zip(&self.sections) {
            if *c == ZERO {
                continue;
            }
            for (o, x) in out.iter_mut().zip(s) {
                *o += c * x;
            }
        }
        Ok(out)
    }

    /// L^2 Gram matrix, row-major.
    pub fn gram(&self) -> Vec<Complex64> {
        let k = self.dim();
        let da = self.geom.cell_area();
        let mut g = vec![ZERO; k * k];
        for a in 0..k {
            for b in 0..k {
                g[a * k + b] = self.sections[a]
                    .iter()
                    .zip(&self.sections[b])
                    .map(|(x, y)| x * y.conj())
                    .sum::<Complex64>()
                    * da;
            }
        }
        g
    }

    /// Multiply every section by `exp(w)` and shift the frame curvature by
    /// `Delta w`.
    pub fn rescaled(&self, w: &[f64], lap_w: &[f64]) -> Self {
        let sections = self
            .sections
            .iter()
            .map(|s| s.iter().zip(w).map(|(x, w)| x * w.exp()).collect())
            .collect();
        let curvature_density = self.curvature_density.iter().zip(lap_w).map(|(f, l)| f + l).collect();
        Self {
            geom: self.geom.clone(),
            degree: self.degree,
            sections,
            curvature_density,
        }
    }
}

/// Theta functions with characteristics j/m, j = 0..m-1.
pub fn theta_basis(geom: &TorusGeometry, m: i64) -> Result<SectionBasis> {
    if m < 0 {
        return Err(VortexError::InvalidInput(format!("bundle degree must be >= 0, got {m}")));
    }
    let m = m as usize;
    let npts = geom.len();
    let vol = geom.volume();
    if m == 0 {
        return Ok(SectionBasis {
            geom: geom.clone(),
            degree: 0,
            sections: vec![vec![Complex64::new(1.0, 0.0); npts]],
            curvature_density: vec![0.0; npts],
        });
    }
    let (lu, lv) = (geom.period_u, geom.period_v);
    let mf = m as f64;
    let a = PI * mf * lv / lu;
    // keep terms with exp(-a q^2) > 1e-16 of the peak
    let qmax = (16.0 * 10f64.ln() / a).sqrt();
    let nrange = qmax.ceil() as i64 + 2;
    let mut sections = Vec::with_capacity(m);
    for j in 0..m {
        let mut s = vec![ZERO; npts];
        for (idx, val) in s.iter_mut().enumerate() {
            let (u, v) = geom.point(idx);
            let mut acc = ZERO;
            let mut peak = 0.0f64;
            for n in -nrange..=nrange {
                let q = n as f64 + j as f64 / mf + v / lv;
                let amp = (-a * q * q).exp();
                peak = peak.max(amp);
                if amp < 1e-16 * peak {
                    continue;
                }
                let k = mf * n as f64 + j as f64;
                acc += Complex64::from_polar(amp, 2.0 * PI * k * u / lu);
            }
            *val = acc;
        }
        sections.push(s);
    }
    Ok(SectionBasis {
        geom: geom.clone(),
        degree: m,
        sections,
        curvature_density: vec![2.0 * PI * mf / vol; npts],
    })
}

/// f(z) = sum_i gamma_i z^i with gamma_i in the coefficient space of a basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialMap {
    /// gamma_0 .. gamma_d.
    pub coefficients: Vec<Vec<Complex64>>,
}

impl PolynomialMap {
    pub fn new(coefficients: Vec<Vec<Complex64>>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(VortexError::InvalidInput("polynomial map needs at least one coefficient".into()));
        }
        let dim = coefficients[0].len();
        if dim == 0 || coefficients.iter().any(|c| c.len() != dim) {
            return Err(VortexError::InvalidInput("coefficient vectors must share a nonzero dimension".into()));
        }
        let lead = coefficients.last().unwrap();
        if cnorm2(lead) == 0.0 {
            return Err(VortexError::InvalidInput("leading coefficient must be nonzero".into()));
        }
        Ok(Self { coefficients })
    }

    /// `gamma * f0(z)` for a scalar polynomial with coefficients `f0[i]`.
    pub fn product(gamma: &[Complex64], f0: &[Complex64]) -> Result<Self> {
        Self::new(f0.iter().map(|c| gamma.iter().map(|g| g * c).collect()).collect())
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.coefficients[0].len()
    }

    pub fn leading(&self) -> &[Complex64] {
        self.coefficients.last().unwrap()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            coefficients: self
                .coefficients
                .iter()
                .map(|g| g.iter().map(|x| x * c).collect())
                .collect(),
        }
    }

    /// Coefficient vector of f(z) in the basis.
    pub fn coefficient_at(&self, z: Complex64) -> Vec<Complex64> {
        let mut acc = vec![ZERO; self.dim()];
        for g in self.coefficients.iter().rev() {
            for (a, x) in acc.iter_mut().zip(g) {
                *a = *a * z + x;
            }
        }
        acc
    }

    /// Coefficient vector of f'(z).
    pub fn derivative_at(&self, z: Complex64) -> Vec<Complex64> {
        let mut acc = vec![ZERO; self.dim()];
        for (i, g) in self.coefficients.iter().enumerate().skip(1).rev() {
            for (a, x) in acc.iter_mut().zip(g) {
                *a = *a * z + x * i as f64;
            }
        }
        acc
    }
}

pub(crate) fn cnorm2(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

pub fn evaluate_polynomial_map(f: &PolynomialMap, basis: &SectionBasis, z: Complex64) -> Result<ComplexField> {
    if f.dim() != basis.dim() {
        return Err(VortexError::InvalidInput(format!(
            "polynomial map has coefficient dimension {}, basis has {}",
            f.dim(),
            basis.dim()
        )));
    }
    let values = basis.combine(&f.coefficient_at(z))?;
    ComplexField::new(Grid::Torus(basis.geom.clone()), values, basis.degree)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GapIndex {
    /// Every coefficient is a multiple of the leading one.
    Product,
    Gap(usize),
}

/// Proportionality test by normalised cross-product norm.
pub fn proportional(a: &[Complex64], b: &[Complex64], tol: f64) -> bool {
    let na = cnorm2(a);
    let nb = cnorm2(b);
    if na == 0.0 || nb == 0.0 {
        return true;
    }
    let ip: Complex64 = a.iter().zip(b).map(|(x, y)| x * y.conj()).sum();
    let cross = (na * nb - ip.norm_sqr()).max(0.0) / (na * nb);
    cross < tol
}

pub fn gap_index(f: &PolynomialMap) -> Result<GapIndex> {
    let d = f.degree();
    if d == 0 {
        return Err(VortexError::InvalidInput("gap index needs degree >= 1".into()));
    }
    let lead = f.leading();
    for k in 1..=d {
        if !proportional(&f.coefficients[d - k], lead, 1e-12) {
            return Ok(GapIndex::Gap(k));
        }
    }
    Ok(GapIndex::Product)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZeroPoint {
    pub x: f64,
    pub y: f64,
    pub multiplicity: i32,
    /// Lower-left node of the cell.
    pub cell: (usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ZeroLocus {
    Zeros(Vec<ZeroPoint>),
    IdenticallyZero,
}

impl ZeroLocus {
    pub fn total_multiplicity(&self) -> i32 {
        match self {
            ZeroLocus::Zeros(z) => z.iter().map(|p| p.multiplicity).sum(),
            ZeroLocus::IdenticallyZero => 0,
        }
    }

    pub fn points(&self) -> &[ZeroPoint] {
        match self {
            ZeroLocus::Zeros(z) => z,
            ZeroLocus::IdenticallyZero => &[],
        }
    }
}

/// Winding number of the field around every grid cell, with bilinear
/// refinement of the root position. Torus fields wrap with the automorphy
/// of their degree.
pub fn zero_locus(field: &ComplexField) -> Result<ZeroLocus> {
    let maxabs = field.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if maxabs < 1e-14 {
        return Ok(ZeroLocus::IdenticallyZero);
    }
    match &field.grid {
        Grid::Plane(p) => {
            let n = p.n;
            let h = p.h();
            let get = |i: usize, j: usize| field.values[i * n + j];
            let origin = (p.coord(0), p.coord(0));
            Ok(ZeroLocus::Zeros(scan_cells(n - 1, n - 1, h, h, origin, false, get)))
        }
        Grid::Torus(t) => Ok(ZeroLocus::Zeros(torus_zeros(&field.values, t, field.degree))),
        Grid::Product(_) => Err(VortexError::InvalidInput(
            "zero_locus works on two-dimensional slices; restrict the product field first".into(),
        )),
    }
}

pub(crate) fn torus_zeros(values: &[Complex64], t: &TorusGeometry, degree: usize) -> Vec<ZeroPoint> {
    let (nu, nv) = (t.n_u, t.n_v);
    let get = |i: usize, j: usize| {
        let (iw, jw) = (i % nu, j % nv);
        let val = values[iw * nv + jw];
        if j >= nv && degree != 0 {
            let u = (iw as f64 + 0.5) * t.h_u();
            val * Complex64::from_polar(1.0, -2.0 * PI * degree as f64 * u / t.period_u)
        } else {
            val
        }
    };
    let origin = (0.5 * t.h_u(), 0.5 * t.h_v());
    scan_cells(nu, nv, t.h_u(), t.h_v(), origin, true, get)
}

/// Winding per cell, then same-sign cells touching each other (diagonals
/// included) are merged: near a multiple zero the phase turns by more than pi
/// along one edge and the winding leaks into a neighbour.
#[allow(clippy::too_many_arguments)]
fn scan_cells<G>(ncx: usize, ncy: usize, hx: f64, hy: f64, origin: (f64, f64), periodic: bool, get: G) -> Vec<ZeroPoint>
where
    G: Fn(usize, usize) -> Complex64,
{
    let mut hits = Vec::new();
    for i in 0..ncx {
        for j in 0..ncy {
            let c = [get(i, j), get(i + 1, j), get(i + 1, j + 1), get(i, j + 1)];
            let mut turn = 0.0;
            for k in 0..4 {
                turn += (c[(k + 1) % 4] / c[k]).arg();
            }
            let w = (turn / (2.0 * PI)).round() as i32;
            if w != 0 {
                let (s, t) = bilinear_root(&c);
                hits.push(ZeroPoint {
                    x: origin.0 + (i as f64 + s) * hx,
                    y: origin.1 + (j as f64 + t) * hy,
                    multiplicity: w,
                    cell: (i, j),
                });
            }
        }
    }
    let touching = |a: (usize, usize), b: (usize, usize)| {
        let gap = |p: usize, q: usize, n: usize| {
            let d = p.abs_diff(q);
            if periodic {
                d.min(n - d)
            } else {
                d
            }
        };
        gap(a.0, b.0, ncx) <= 1 && gap(a.1, b.1, ncy) <= 1
    };
    let (lx, ly) = (ncx as f64 * hx, ncy as f64 * hy);
    let mut out: Vec<ZeroPoint> = Vec::new();
    let mut used = vec![false; hits.len()];
    for start in 0..hits.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let mut members = vec![start];
        let mut k = 0;
        while k < members.len() {
            let cur = members[k];
            for (other, flag) in used.iter_mut().enumerate() {
                if !*flag
                    && hits[other].multiplicity.signum() == hits[cur].multiplicity.signum()
                    && touching(hits[cur].cell, hits[other].cell)
                {
                    *flag = true;
                    members.push(other);
                }
            }
            k += 1;
        }
        let first = &hits[start];
        let (mut sx, mut sy, mut total) = (0.0, 0.0, 0);
        for &m in &members {
            let (mut dx, mut dy) = (hits[m].x - first.x, hits[m].y - first.y);
            if periodic {
                dx -= lx * (dx / lx).round();
                dy -= ly * (dy / ly).round();
            }
            let w = hits[m].multiplicity.abs() as f64;
            sx += w * dx;
            sy += w * dy;
            total += hits[m].multiplicity;
        }
        let wsum: f64 = members.iter().map(|&m| hits[m].multiplicity.abs() as f64).sum();
        let (mut x, mut y) = (first.x + sx / wsum, first.y + sy / wsum);
        if periodic {
            x = origin.0 + (x - origin.0).rem_euclid(lx);
            y = origin.1 + (y - origin.1).rem_euclid(ly);
        }
        out.push(ZeroPoint {
            x,
            y,
            multiplicity: total,
            cell: first.cell,
        });
    }
    out
}

fn bilinear_root(c: &[Complex64; 4]) -> (f64, f64) {
    let (mut s, mut t) = (0.5, 0.5);
    for _ in 0..30 {
        let f = c[0] * (1.0 - s) * (1.0 - t) + c[1] * s * (1.0 - t) + c[2] * s * t + c[3] * (1.0 - s) * t;
        let fs = (c[1] - c[0]) * (1.0 - t) + (c[2] - c[3]) * t;
        let ft = (c[3] - c[0]) * (1.0 - s) + (c[2] - c[1]) * s;
        let det = fs.re * ft.im - ft.re * fs.im;
        if det.abs() < 1e-300 {
            break;
        }
        let ds = -(f.re * ft.im - ft.re * f.im) / det;
        let dt = -(fs.re * f.im - f.re * fs.im) / det;
        s = (s + ds).clamp(0.0, 1.0);
        t = (t + dt).clamp(0.0, 1.0);
        if ds.abs() + dt.abs() < 1e-14 {
            break;
        }
    }
    (s, t)
}

/// Spectral covariant derivatives of sections in the reference frame.
pub struct SectionCalculus {
    pub geom: TorusGeometry,
    pub degree: usize,
    fwd_u: Arc<dyn Fft<f64>>,
    inv_u: Arc<dyn Fft<f64>>,
    fwd_v: Arc<dyn Fft<f64>>,
    inv_v: Arc<dyn Fft<f64>>,
}

impl SectionCalculus {
    pub fn new(geom: &TorusGeometry, degree: usize) -> Self {
        let mut p = FftPlanner::new();
        Self {
            geom: geom.clone(),
            degree,
            fwd_u: p.plan_fft_forward(geom.n_u),
            inv_u: p.plan_fft_inverse(geom.n_u),
            fwd_v: p.plan_fft_forward(geom.n_v),
            inv_v: p.plan_fft_inverse(geom.n_v),
        }
    }

    fn spectral_d(line: &mut [Complex64], period: f64, fwd: &Arc<dyn Fft<f64>>, inv: &Arc<dyn Fft<f64>>) {
        let n = line.len();
        fwd.process(line);
        for (k, x) in line.iter_mut().enumerate() {
            let kk = if n % 2 == 0 && k == n / 2 { 0.0 } else { 2.0 * PI * signed_freq(k, n) / period };
            *x *= Complex64::new(0.0, kk / n as f64);
        }
        inv.process(line);
    }

    /// D_u s = d_u s + i (2 pi m / V) v s.
    pub fn d_u(&self, s: &[Complex64]) -> Vec<Complex64> {
        let g = &self.geom;
        let (nu, nv) = (g.n_u, g.n_v);
        let b = 2.0 * PI * self.degree as f64 / g.volume();
        let mut out = vec![ZERO; s.len()];
        let mut line = vec![ZERO; nu];
        for j in 0..nv {
            for i in 0..nu {
                line[i] = s[i * nv + j];
            }
            Self::spectral_d(&mut line, g.period_u, &self.fwd_u, &self.inv_u);
            let v = (j as f64 + 0.5) * g.h_v();
            for i in 0..nu {
                out[i * nv + j] = line[i] + Complex64::new(0.0, b * v) * s[i * nv + j];
            }
        }
        out
    }

    /// D_v s = d_v s, computed in the frame exp(2 pi i m u v / V) s which is
    /// periodic in v.
    pub fn d_v(&self, s: &[Complex64]) -> Vec<Complex64> {
        let g = &self.geom;
        let (nu, nv) = (g.n_u, g.n_v);
        let b = 2.0 * PI * self.degree as f64 / g.volume();
        let mut out = vec![ZERO; s.len()];
        let mut line = vec![ZERO; nv];
        for i in 0..nu {
            let u = (i as f64 + 0.5) * g.h_u();
            for j in 0..nv {
                let v = (j as f64 + 0.5) * g.h_v();
                line[j] = s[i * nv + j] * Complex64::from_polar(1.0, b * u * v);
            }
            let twisted = line.clone();
            Self::spectral_d(&mut line, g.period_v, &self.fwd_v, &self.inv_v);
            for j in 0..nv {
                let v = (j as f64 + 0.5) * g.h_v();
                let dg = line[j] - Complex64::new(0.0, b * u) * twisted[j];
                out[i * nv + j] = dg * Complex64::from_polar(1.0, -b * u * v);
            }
        }
        out
    }

    /// Bochner Laplacian -(D_u^2 + D_v^2) s.
    pub fn bochner(&self, s: &[Complex64]) -> Vec<Complex64> {
        let uu = self.d_u(&self.d_u(s));
        let vv = self.d_v(&self.d_v(s));
        uu.iter().zip(&vv).map(|(a, b)| -(a + b)).collect()
    }
}
