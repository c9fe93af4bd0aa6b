use num_complex::Complex64;
use rayon::prelude::*;

use super::torus::TorusSpectral;
use super::transforms::{Dct, Dst1};

/// Ghost values one cell outside the plane square, each side stored as
/// `n` blocks of `nt` values (block size 1 for plane-only fields).
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneGhosts {
    pub n: usize,
    pub nt: usize,
    /// ix = -1, indexed by iy.
    pub west: Vec<f64>,
    /// ix = n, indexed by iy.
    pub east: Vec<f64>,
    /// iy = -1, indexed by ix.
    pub south: Vec<f64>,
    /// iy = n, indexed by ix.
    pub north: Vec<f64>,
}

impl PlaneGhosts {
    pub fn zeros(n: usize, nt: usize) -> Self {
        let z = vec![0.0; n * nt];
        Self {
            n,
            nt,
            west: z.clone(),
            east: z.clone(),
            south: z.clone(),
            north: z,
        }
    }

    /// Fill from a closure `g(ix, iy, t)` evaluated at the ghost indices.
    pub fn from_fn<G>(n: usize, nt: usize, g: G) -> Self
    where
        G: Fn(isize, isize, usize) -> f64,
    {
        let mut out = Self::zeros(n, nt);
        let ni = n as isize;
        for k in 0..n {
            for t in 0..nt {
                let ki = k as isize;
                out.west[k * nt + t] = g(-1, ki, t);
                out.east[k * nt + t] = g(ni, ki, t);
                out.south[k * nt + t] = g(ki, -1, t);
                out.north[k * nt + t] = g(ki, ni, t);
            }
        }
        out
    }

    pub fn sides(&self) -> [&[f64]; 4] {
        [&self.west, &self.east, &self.south, &self.north]
    }
}

/// How the 5-point stencil closes at the edge of the square.
#[derive(Clone, Copy, Debug)]
pub enum Ghosts<'a> {
    /// Homogeneous Dirichlet.
    Zero,
    /// Inhomogeneous Dirichlet data.
    Values(&'a PlaneGhosts),
    /// Zero-flux reflection (ghost equals the adjacent interior value).
    Reflect,
}

/// Geometer's 5-point Laplacian on the layout `[ix][iy][t]`, block size `nt`.
pub fn stencil_laplacian(f: &[f64], n: usize, nt: usize, h: f64, ghosts: Ghosts, out: &mut [f64]) {
    let inv = 1.0 / (h * h);
    let row = n * nt;
    out.par_chunks_mut(row).enumerate().for_each(|(ix, orow)| {
        for iy in 0..n {
            let p = (ix * n + iy) * nt;
            for t in 0..nt {
                let c = f[p + t];
                let west = if ix > 0 {
                    f[p - row + t]
                } else {
                    ghost(ghosts, 0, iy, t, nt, c)
                };
                let east = if ix + 1 < n {
                    f[p + row + t]
                } else {
                    ghost(ghosts, 1, iy, t, nt, c)
                };
                let south = if iy > 0 {
                    f[p - nt + t]
                } else {
                    ghost(ghosts, 2, ix, t, nt, c)
                };
                let north = if iy + 1 < n {
                    f[p + nt + t]
                } else {
                    ghost(ghosts, 3, ix, t, nt, c)
                };
                orow[iy * nt + t] = (4.0 * c - west - east - south - north) * inv;
            }
        }
    });
}

#[inline]
fn ghost(g: Ghosts, side: usize, k: usize, t: usize, nt: usize, centre: f64) -> f64 {
    match g {
        Ghosts::Zero => 0.0,
        Ghosts::Reflect => centre,
        Ghosts::Values(gh) => gh.sides()[side][k * nt + t],
    }
}

/// Central first differences in x and y, closing with the given ghosts.
pub fn central_gradient(
    f: &[f64],
    n: usize,
    nt: usize,
    h: f64,
    ghosts: Ghosts,
    dx: &mut [f64],
    dy: &mut [f64],
) {
    let row = n * nt;
    let s = 0.5 / h;
    for ix in 0..n {
        for iy in 0..n {
            let p = (ix * n + iy) * nt;
            for t in 0..nt {
                let c = f[p + t];
                let west = if ix > 0 { f[p - row + t] } else { ghost(ghosts, 0, iy, t, nt, c) };
                let east = if ix + 1 < n { f[p + row + t] } else { ghost(ghosts, 1, iy, t, nt, c) };
                let south = if iy > 0 { f[p - nt + t] } else { ghost(ghosts, 2, ix, t, nt, c) };
                let north = if iy + 1 < n { f[p + nt + t] } else { ghost(ghosts, 3, ix, t, nt, c) };
                dx[p + t] = (east - west) * s;
                dy[p + t] = (north - south) * s;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlaneBc {
    Dirichlet,
    Neumann,
}

enum Line {
    Dst(Dst1),
    Dct(Dct),
}

/// Exact inverse of `Delta_plane (+ Delta_torus) + c` with homogeneous
/// boundary data, by fast diagonalisation.
pub struct SeparableInverse<'a> {
    n: usize,
    nt: usize,
    line: Line,
    plane_eig: Vec<f64>,
    torus: Option<&'a TorusSpectral>,
}

impl<'a> SeparableInverse<'a> {
    pub fn new(n: usize, h: f64, bc: PlaneBc, torus: Option<&'a TorusSpectral>) -> Self {
        let (line, plane_eig) = match bc {
            PlaneBc::Dirichlet => {
                let d = Dst1::new(n);
                let e = d.eigenvalues(h);
                (Line::Dst(d), e)
            }
            PlaneBc::Neumann => {
                let d = Dct::new(n);
                let e = d.eigenvalues(h);
                (Line::Dct(d), e)
            }
        };
        let nt = torus.map_or(1, |t| t.len());
        Self {
            n,
            nt,
            line,
            plane_eig,
            torus,
        }
    }

    fn lines_forward(&self, lines: &mut [Complex64], buf: &mut Vec<Complex64>) {
        match &self.line {
            Line::Dst(d) => d.apply(lines, buf),
            Line::Dct(d) => d.forward(lines, buf),
        }
    }

    fn lines_inverse(&self, lines: &mut [Complex64], buf: &mut Vec<Complex64>) {
        match &self.line {
            Line::Dst(d) => {
                d.apply(lines, buf);
                let s = d.inverse_scale();
                for x in lines.iter_mut() {
                    *x *= s;
                }
            }
            Line::Dct(d) => d.inverse(lines, buf),
        }
    }

    /// Transform along both plane axes of the `[ix][iy][t]` layout.
    fn plane_pass(&self, data: &mut [Complex64], forward: bool) {
        let (n, nt) = (self.n, self.nt);
        let block = n * nt;
        // along iy, one ix block at a time
        data.par_chunks_mut(block).for_each_init(
            || (vec![Complex64::new(0.0, 0.0); block], Vec::new()),
            |(tr, buf), blk| {
                for iy in 0..n {
                    for t in 0..nt {
                        tr[t * n + iy] = blk[iy * nt + t];
                    }
                }
                if forward {
                    self.lines_forward(tr, buf);
                } else {
                    self.lines_inverse(tr, buf);
                }
                for iy in 0..n {
                    for t in 0..nt {
                        blk[iy * nt + t] = tr[t * n + iy];
                    }
                }
            },
        );
        // along ix, one iy column at a time
        let mut tr = vec![Complex64::new(0.0, 0.0); block];
        let mut buf = Vec::new();
        for iy in 0..n {
            for ix in 0..n {
                let p = (ix * n + iy) * nt;
                for t in 0..nt {
                    tr[t * n + ix] = data[p + t];
                }
            }
            if forward {
                self.lines_forward(&mut tr, &mut buf);
            } else {
                self.lines_inverse(&mut tr, &mut buf);
            }
            for ix in 0..n {
                let p = (ix * n + iy) * nt;
                for t in 0..nt {
                    data[p + t] = tr[t * n + ix];
                }
            }
        }
    }

    /// out = (Delta + shift)^{-1} rhs. Zero eigenvalues (Neumann, shift 0)
    /// are projected out.
    pub fn apply(&self, rhs: &[f64], shift: f64, out: &mut [f64]) {
        let (n, nt) = (self.n, self.nt);
        let mut data: Vec<Complex64> = rhs.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        if let Some(ts) = self.torus {
            data.par_chunks_mut(nt).for_each_init(Vec::new, |tmp, f| ts.fft.forward(f, tmp));
        }
        self.plane_pass(&mut data, true);
        let torus_eig: Vec<f64> = match self.torus {
            Some(ts) => ts.lap.clone(),
            None => vec![0.0],
        };
        data.par_chunks_mut(nt).enumerate().for_each(|(p, f)| {
            let (ix, iy) = (p / n, p % n);
            let base = self.plane_eig[ix] + self.plane_eig[iy] + shift;
            for (t, x) in f.iter_mut().enumerate() {
                let d = base + torus_eig[t];
                *x = if d > 1e-300 { *x / d } else { Complex64::new(0.0, 0.0) };
            }
        });
        self.plane_pass(&mut data, false);
        if let Some(ts) = self.torus {
            data.par_chunks_mut(nt).for_each_init(Vec::new, |tmp, f| ts.fft.inverse(f, tmp));
        }
        for (o, x) in out.iter_mut().zip(&data) {
            *o = x.re;
        }
    }
}
