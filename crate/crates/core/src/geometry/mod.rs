//! Discretised domains: a rectangular flat torus (spectral), a truncated
//! square in the plane (5-point stencil, cell-centred) and their product.
//!
//! Laplacians use the geometer's sign, `Delta = -(d_x^2 + d_y^2)`.

pub mod krylov;
pub mod plane;
pub mod torus;
pub mod transforms;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VortexError};
pub use krylov::{dot, norm, pcg, CgStats};
pub use plane::{Ghosts, PlaneBc, PlaneGhosts, SeparableInverse};
pub use torus::TorusSpectral;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusGeometry {
    pub period_u: f64,
    pub period_v: f64,
    pub n_u: usize,
    pub n_v: usize,
    /// Constant background curvature, K0 <= 0.
    pub k0: f64,
}

impl TorusGeometry {
    pub fn new(period_u: f64, period_v: f64, n_u: usize, n_v: usize, k0: f64) -> Result<Self> {
        let mut errs = Vec::new();
        if !(period_u > 0.0 && period_u.is_finite()) || !(period_v > 0.0 && period_v.is_finite()) {
            errs.push(format!("torus periods must be positive, got {period_u} x {period_v}"));
        }
        if !n_u.is_power_of_two() || !n_v.is_power_of_two() || n_u < 4 || n_v < 4 {
            errs.push(format!("torus grid sizes must be powers of two >= 4, got {n_u} x {n_v}"));
        }
        if !(k0 <= 0.0) {
            errs.push(format!("background curvature K0 must be <= 0, got {k0}"));
        }
        if !errs.is_empty() {
            return Err(VortexError::InvalidInput(errs.join("; ")));
        }
        Ok(Self {
            period_u,
            period_v,
            n_u,
            n_v,
            k0,
        })
    }

    /// Square torus of the given volume.
    pub fn square(volume: f64, n: usize, k0: f64) -> Result<Self> {
        let l = volume.sqrt();
        Self::new(l, l, n, n, k0)
    }

    pub fn volume(&self) -> f64 {
        self.period_u * self.period_v
    }

    pub fn h_u(&self) -> f64 {
        self.period_u / self.n_u as f64
    }

    pub fn h_v(&self) -> f64 {
        self.period_v / self.n_v as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.h_u() * self.h_v()
    }

    pub fn len(&self) -> usize {
        self.n_u * self.n_v
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Nodes sit at cell centres, `u_i = (i + 1/2) h_u`.
    pub fn point(&self, idx: usize) -> (f64, f64) {
        let (i, j) = (idx / self.n_v, idx % self.n_v);
        ((i as f64 + 0.5) * self.h_u(), (j as f64 + 0.5) * self.h_v())
    }

    pub fn with_resolution(&self, n_u: usize, n_v: usize) -> Result<Self> {
        Self::new(self.period_u, self.period_v, n_u, n_v, self.k0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneGrid {
    /// Half-width of the square [-R, R]^2.
    pub radius: f64,
    pub n: usize,
}

impl PlaneGrid {
    pub fn new(radius: f64, n: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(VortexError::InvalidInput(format!("plane radius must be positive, got {radius}")));
        }
        if n < 4 || n % 2 != 0 {
            return Err(VortexError::InvalidInput(format!("plane grid size must be even and >= 4, got {n}")));
        }
        Ok(Self { radius, n })
    }

    pub fn h(&self) -> f64 {
        2.0 * self.radius / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.h() * self.h()
    }

    /// Cell-centred coordinate of index `i` (may be -1 or n for ghosts).
    pub fn coord(&self, i: isize) -> f64 {
        -self.radius + (i as f64 + 0.5) * self.h()
    }

    pub fn point(&self, idx: usize) -> (f64, f64) {
        let (ix, iy) = (idx / self.n, idx % self.n);
        (self.coord(ix as isize), self.coord(iy as isize))
    }

    pub fn contains_strictly(&self, x: f64, y: f64) -> bool {
        x.abs() < self.radius && y.abs() < self.radius
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductGrid {
    pub plane: PlaneGrid,
    pub torus: TorusGeometry,
}

impl ProductGrid {
    pub fn new(plane: PlaneGrid, torus: TorusGeometry) -> Self {
        Self { plane, torus }
    }

    pub fn len(&self) -> usize {
        self.plane.len() * self.torus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.plane.cell_area() * self.torus.cell_area()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Grid {
    Torus(TorusGeometry),
    Plane(PlaneGrid),
    Product(ProductGrid),
}

impl Grid {
    pub fn len(&self) -> usize {
        match self {
            Grid::Torus(t) => t.len(),
            Grid::Plane(p) => p.len(),
            Grid::Product(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_measure(&self) -> f64 {
        match self {
            Grid::Torus(t) => t.cell_area(),
            Grid::Plane(p) => p.cell_area(),
            Grid::Product(g) => g.cell_volume(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Grid::Torus(t) => format!("torus {}x{} ({} x {})", t.n_u, t.n_v, t.period_u, t.period_v),
            Grid::Plane(p) => format!("plane {}^2 (R = {})", p.n, p.radius),
            Grid::Product(g) => format!(
                "product plane {}^2 (R = {}) x torus {}x{}",
                g.plane.n, g.plane.radius, g.torus.n_u, g.torus.n_v
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(VortexError::GridMismatch {
                expected: format!("{} values", grid.len()),
                found: format!("{} values", values.len()),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(VortexError::InvalidInput(format!("non-finite field value at index {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n] }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        let n = grid.len();
        Self { grid, values: vec![c; n] }
    }

    pub fn from_fn<F: Fn(usize) -> f64>(grid: Grid, f: F) -> Self {
        let values = (0..grid.len()).map(f).collect();
        Self { grid, values }
    }
}

/// Complex field; on the torus it is a section of the degree-`degree` bundle
/// in the reference trivialisation (periodic in u, twisted in v).
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    pub grid: Grid,
    pub values: Vec<Complex64>,
    pub degree: usize,
}

impl ComplexField {
    pub fn new(grid: Grid, values: Vec<Complex64>, degree: usize) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(VortexError::GridMismatch {
                expected: format!("{} values", grid.len()),
                found: format!("{} values", values.len()),
            });
        }
        Ok(Self { grid, values, degree })
    }
}

fn check_grid(field: &Grid, grid: &Grid) -> Result<()> {
    if field != grid {
        return Err(VortexError::GridMismatch {
            expected: grid.describe(),
            found: field.describe(),
        });
    }
    Ok(())
}

/// Geometer's Laplacian; plane directions use zero Dirichlet ghosts.
pub fn laplacian(field: &ScalarField, grid: &Grid) -> Result<ScalarField> {
    check_grid(&field.grid, grid)?;
    let mut out = vec![0.0; field.values.len()];
    match grid {
        Grid::Torus(t) => TorusSpectral::new(t).laplacian(&field.values, &mut out),
        Grid::Plane(p) => plane::stencil_laplacian(&field.values, p.n, 1, p.h(), Ghosts::Zero, &mut out),
        Grid::Product(g) => product_laplacian(&field.values, g, &TorusSpectral::new(&g.torus), Ghosts::Zero, &mut out),
    }
    Ok(ScalarField {
        grid: grid.clone(),
        values: out,
    })
}

/// Delta_C + Delta_Sigma on the product layout `[plane point][torus point]`.
pub fn product_laplacian(f: &[f64], grid: &ProductGrid, ts: &TorusSpectral, ghosts: Ghosts, out: &mut [f64]) {
    let nt = grid.torus.len();
    plane::stencil_laplacian(f, grid.plane.n, nt, grid.plane.h(), ghosts, out);
    let mut tor = vec![0.0; f.len()];
    ts.laplacian(f, &mut tor);
    krylov::axpy(1.0, &tor, out);
}

/// Uniform-weight quadrature.
pub fn integrate(field: &ScalarField) -> f64 {
    krylov::sum(&field.values) * field.grid.cell_measure()
}

/// Solve `(Delta + V) u = k` by preconditioned conjugate gradients.
pub fn solve_helmholtz(v: &ScalarField, k: &ScalarField, grid: &Grid, tol: f64) -> Result<ScalarField> {
    check_grid(&v.grid, grid)?;
    check_grid(&k.grid, grid)?;
    if v.values.iter().any(|&x| x < 0.0) {
        return Err(VortexError::InvalidInput("potential must be nonnegative".into()));
    }
    let vbar = krylov::sum(&v.values) / v.values.len() as f64;
    if !(vbar > 0.0) {
        return Err(VortexError::SingularPotential);
    }
    let mut u = vec![0.0; k.values.len()];
    let max_iter = 4000;
    match grid {
        Grid::Torus(t) => {
            let ts = TorusSpectral::new(t);
            helmholtz_torus(&ts, &v.values, &k.values, &mut u, tol, max_iter)?;
        }
        Grid::Plane(p) => {
            let inv = SeparableInverse::new(p.n, p.h(), PlaneBc::Dirichlet, None);
            pcg(
                |x, y| {
                    plane::stencil_laplacian(x, p.n, 1, p.h(), Ghosts::Zero, y);
                    for ((y, x), v) in y.iter_mut().zip(x).zip(&v.values) {
                        *y += v * x;
                    }
                },
                |r, z| inv.apply(r, vbar, z),
                &k.values,
                &mut u,
                tol,
                max_iter,
            )?;
        }
        Grid::Product(g) => {
            let ts = TorusSpectral::new(&g.torus);
            let inv = SeparableInverse::new(g.plane.n, g.plane.h(), PlaneBc::Dirichlet, Some(&ts));
            pcg(
                |x, y| {
                    product_laplacian(x, g, &ts, Ghosts::Zero, y);
                    for ((y, x), v) in y.iter_mut().zip(x).zip(&v.values) {
                        *y += v * x;
                    }
                },
                |r, z| inv.apply(r, vbar, z),
                &k.values,
                &mut u,
                tol,
                max_iter,
            )?;
        }
    }
    Ok(ScalarField {
        grid: grid.clone(),
        values: u,
    })
}

/// Torus Helmholtz solve on raw slices; `u` holds the initial guess.
pub fn helmholtz_torus(
    ts: &TorusSpectral,
    v: &[f64],
    k: &[f64],
    u: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgStats> {
    let vbar = krylov::sum(v) / v.len() as f64;
    if !(vbar > 0.0) {
        return Err(VortexError::SingularPotential);
    }
    pcg(
        |x, y| {
            ts.laplacian(x, y);
            for ((y, x), v) in y.iter_mut().zip(x).zip(v) {
                *y += v * x;
            }
        },
        |r, z| ts.solve_shifted(r, vbar, z),
        k,
        u,
        tol,
        max_iter,
    )
}

/// Gauss-Legendre nodes and weights on [a, b].
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
            }
            dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
            let dt = p1 / dp;
            t -= dt;
            if dt.abs() < 1e-15 {
                break;
            }
        }
        x[i] = 0.5 * (b - a) * t + 0.5 * (b + a);
        w[i] = (b - a) / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}
