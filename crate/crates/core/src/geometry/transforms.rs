//! FFT-backed sine/cosine transforms and the 2-D torus transform.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Unnormalised DST-I on lines of length `n`. Applying it twice and scaling
/// by `2/(n+1)` is the identity.
pub struct Dst1 {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl Dst1 {
    pub fn new(n: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(2 * (n + 1));
        Self { n, fft }
    }

    /// Transform every consecutive length-`n` line of `lines` in place.
    pub fn apply(&self, lines: &mut [Complex64], buf: &mut Vec<Complex64>) {
        let n = self.n;
        let m = 2 * (n + 1);
        let count = lines.len() / n;
        buf.clear();
        buf.resize(count * m, ZERO);
        for c in 0..count {
            let src = &lines[c * n..(c + 1) * n];
            let dst = &mut buf[c * m..(c + 1) * m];
            for j in 0..n {
                dst[1 + j] = src[j];
                dst[m - 1 - j] = -src[j];
            }
        }
        self.fft.process(buf);
        let half_i = Complex64::new(0.0, 0.5);
        for c in 0..count {
            for k in 0..n {
                lines[c * n + k] = buf[c * m + k + 1] * half_i;
            }
        }
    }

    pub fn inverse_scale(&self) -> f64 {
        2.0 / (self.n as f64 + 1.0)
    }

    /// Eigenvalues of the 1-D Dirichlet stencil, in transform order.
    pub fn eigenvalues(&self, h: f64) -> Vec<f64> {
        let n = self.n;
        (1..=n)
            .map(|k| (2.0 - 2.0 * (PI * k as f64 / (n as f64 + 1.0)).cos()) / (h * h))
            .collect()
    }
}

/// DCT-II / DCT-III pair diagonalising the cell-centred Neumann stencil.
pub struct Dct {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Dct {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(2 * n),
            inv: planner.plan_fft_inverse(2 * n),
        }
    }

    /// C_k = sum_j x_j cos(pi k (j + 1/2) / n), valid for complex input.
    pub fn forward(&self, lines: &mut [Complex64], buf: &mut Vec<Complex64>) {
        let n = self.n;
        let m = 2 * n;
        let count = lines.len() / n;
        buf.clear();
        buf.resize(count * m, ZERO);
        for c in 0..count {
            for j in 0..n {
                let x = lines[c * n + j];
                buf[c * m + j] = x;
                buf[c * m + m - 1 - j] = x;
            }
        }
        self.fwd.process(buf);
        for c in 0..count {
            for k in 0..n {
                let tw = Complex64::from_polar(0.5, -PI * k as f64 / m as f64);
                lines[c * n + k] = buf[c * m + k] * tw;
            }
        }
    }

    /// Exact inverse of [`Dct::forward`].
    pub fn inverse(&self, lines: &mut [Complex64], buf: &mut Vec<Complex64>) {
        let n = self.n;
        let m = 2 * n;
        let count = lines.len() / n;
        // real and imaginary parts go through separate real DCT-III passes
        buf.clear();
        buf.resize(2 * count * m, ZERO);
        for c in 0..count {
            for k in 0..n {
                let w = if k == 0 { 1.0 / n as f64 } else { 2.0 / n as f64 };
                let tw = Complex64::from_polar(w, PI * k as f64 / m as f64);
                let ck = lines[c * n + k];
                buf[2 * c * m + k] = tw * ck.re;
                buf[(2 * c + 1) * m + k] = tw * ck.im;
            }
        }
        self.inv.process(buf);
        for c in 0..count {
            for j in 0..n {
                lines[c * n + j] =
                    Complex64::new(buf[2 * c * m + j].re, buf[(2 * c + 1) * m + j].re);
            }
        }
    }

    pub fn eigenvalues(&self, h: f64) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|k| (2.0 - 2.0 * (PI * k as f64 / n as f64).cos()) / (h * h))
            .collect()
    }
}

/// Complex 2-D FFT on contiguous `n_u x n_v` blocks (v fastest).
pub struct TorusFft {
    pub n_u: usize,
    pub n_v: usize,
    fwd_u: Arc<dyn Fft<f64>>,
    inv_u: Arc<dyn Fft<f64>>,
    fwd_v: Arc<dyn Fft<f64>>,
    inv_v: Arc<dyn Fft<f64>>,
}

impl TorusFft {
    pub fn new(n_u: usize, n_v: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n_u,
            n_v,
            fwd_u: planner.plan_fft_forward(n_u),
            inv_u: planner.plan_fft_inverse(n_u),
            fwd_v: planner.plan_fft_forward(n_v),
            inv_v: planner.plan_fft_inverse(n_v),
        }
    }

    pub fn len(&self) -> usize {
        self.n_u * self.n_v
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn along_u(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>, tmp: &mut Vec<Complex64>) {
        let (nu, nv) = (self.n_u, self.n_v);
        tmp.clear();
        tmp.resize(nu * nv, ZERO);
        for block in data.chunks_exact_mut(nu * nv) {
            for i in 0..nu {
                for j in 0..nv {
                    tmp[j * nu + i] = block[i * nv + j];
                }
            }
            fft.process(tmp);
            for i in 0..nu {
                for j in 0..nv {
                    block[i * nv + j] = tmp[j * nu + i];
                }
            }
        }
    }

    /// Forward transform of every block in `data` (unnormalised).
    pub fn forward(&self, data: &mut [Complex64], tmp: &mut Vec<Complex64>) {
        self.fwd_v.process(data);
        self.along_u(data, &self.fwd_u, tmp);
    }

    /// Inverse transform including the `1/(n_u n_v)` normalisation.
    pub fn inverse(&self, data: &mut [Complex64], tmp: &mut Vec<Complex64>) {
        self.inv_v.process(data);
        self.along_u(data, &self.inv_u, tmp);
        let s = 1.0 / (self.n_u * self.n_v) as f64;
        for x in data.iter_mut() {
            *x *= s;
        }
    }
}

/// Signed integer frequency for FFT index `i` of an `n`-point transform.
pub fn signed_freq(i: usize, n: usize) -> f64 {
    if i <= n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}
