use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::transforms::{signed_freq, TorusFft};
use super::TorusGeometry;

/// Spectral differentiation on a rectangular torus, applied fibre by fibre
/// to any array whose length is a multiple of the torus point count.
pub struct TorusSpectral {
    pub fft: TorusFft,
    /// |xi|^2 per mode (the geometer's Laplacian symbol).
    pub lap: Vec<f64>,
    /// First-derivative wavenumbers, Nyquist zeroed.
    pub ku: Vec<f64>,
    pub kv: Vec<f64>,
}

impl TorusSpectral {
    pub fn new(geom: &TorusGeometry) -> Self {
        let (nu, nv) = (geom.n_u, geom.n_v);
        let mut lap = Vec::with_capacity(nu * nv);
        let mut ku = Vec::with_capacity(nu * nv);
        let mut kv = Vec::with_capacity(nu * nv);
        for i in 0..nu {
            let a = 2.0 * PI * signed_freq(i, nu) / geom.period_u;
            let a1 = if nu % 2 == 0 && i == nu / 2 { 0.0 } else { a };
            for j in 0..nv {
                let b = 2.0 * PI * signed_freq(j, nv) / geom.period_v;
                let b1 = if nv % 2 == 0 && j == nv / 2 { 0.0 } else { b };
                lap.push(a * a + b * b);
                ku.push(a1);
                kv.push(b1);
            }
        }
        Self {
            fft: TorusFft::new(nu, nv),
            lap,
            ku,
            kv,
        }
    }

    pub fn len(&self) -> usize {
        self.lap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lap.is_empty()
    }

    /// out = Re F^{-1}[ symbol(k) F[f] ] on every fibre.
    pub fn apply_symbol<S>(&self, f: &[f64], out: &mut [f64], symbol: S)
    where
        S: Fn(usize) -> Complex64 + Sync,
    {
        let nt = self.len();
        out.par_chunks_mut(nt)
            .zip(f.par_chunks(nt))
            .for_each_init(
                || (vec![Complex64::new(0.0, 0.0); nt], Vec::new()),
                |(buf, tmp), (o, src)| {
                    for (b, &x) in buf.iter_mut().zip(src) {
                        *b = Complex64::new(x, 0.0);
                    }
                    self.fft.forward(buf, tmp);
                    for (k, b) in buf.iter_mut().enumerate() {
                        *b *= symbol(k);
                    }
                    self.fft.inverse(buf, tmp);
                    for (y, b) in o.iter_mut().zip(buf.iter()) {
                        *y = b.re;
                    }
                },
            );
    }

    pub fn laplacian(&self, f: &[f64], out: &mut [f64]) {
        self.apply_symbol(f, out, |k| Complex64::new(self.lap[k], 0.0));
    }

    pub fn d_u(&self, f: &[f64], out: &mut [f64]) {
        self.apply_symbol(f, out, |k| Complex64::new(0.0, self.ku[k]));
    }

    pub fn d_v(&self, f: &[f64], out: &mut [f64]) {
        self.apply_symbol(f, out, |k| Complex64::new(0.0, self.kv[k]));
    }

    /// (Delta + lambda)^{-1} for a constant lambda > 0 (or lambda = 0 on
    /// mean-free data, where the zero mode is left at zero).
    pub fn solve_shifted(&self, f: &[f64], lambda: f64, out: &mut [f64]) {
        self.apply_symbol(f, out, |k| {
            let d = self.lap[k] + lambda;
            Complex64::new(if d > 0.0 { 1.0 / d } else { 0.0 }, 0.0)
        });
    }

    /// Complex-valued fibre transform helper: forward, multiply, inverse.
    pub fn apply_symbol_complex<S>(&self, f: &mut [Complex64], symbol: S)
    where
        S: Fn(usize) -> Complex64,
    {
        let mut tmp = Vec::new();
        for fibre in f.chunks_exact_mut(self.len()) {
            self.fft.forward(fibre, &mut tmp);
            for (k, b) in fibre.iter_mut().enumerate() {
                *b *= symbol(k);
            }
            self.fft.inverse(fibre, &mut tmp);
        }
    }
}
