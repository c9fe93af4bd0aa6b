//! Tail-decay measurement: the K0 kernel, log-linear model fits, and
//! classification of plane and product solutions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bundles::{gap_index, GapIndex, PolynomialMap};
use crate::error::{Result, VortexError};
use crate::geometry::{PlaneBc, PlaneGrid, SeparableInverse};
use crate::plane_vortex::{phi_sq, PlaneBackground, PlaneSolution};
use crate::product_monopole::SliceReport;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Modified Bessel function of the second kind, order zero.
pub fn bessel_k0(r: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(VortexError::InvalidInput(format!("K0 needs a positive finite argument, got {r}")));
    }
    if r <= 2.0 {
        // -(ln(r/2) + gamma) I0(r) + sum_k (r^2/4)^k / (k!)^2 H_k
        let q = 0.25 * r * r;
        let lead = -((0.5 * r).ln() + EULER_GAMMA);
        let (mut term, mut harmonic) = (1.0, 0.0);
        let mut i0 = 1.0;
        let mut tail = 0.0;
        for k in 1..60 {
            let kf = k as f64;
            term *= q / (kf * kf);
            harmonic += 1.0 / kf;
            i0 += term;
            tail += term * harmonic;
            if term < 1e-18 * i0 {
                break;
            }
        }
        Ok(lead * i0 + tail)
    } else {
        // Steed's continued fraction (Temme's form) for K_0
        let mut b = 2.0 * (1.0 + r);
        let mut d = 1.0 / b;
        let mut delh = d;
        let (mut q1, mut q2) = (0.0, 1.0);
        let a1 = 0.25;
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        for i in 2..10_000 {
            let fi = i as f64;
            a -= 2.0 * (fi - 1.0);
            c = -a * c / fi;
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh = (b * d - 1.0) * delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < 1e-17 {
                break;
            }
        }
        Ok((PI / (2.0 * r)).sqrt() * (-r).exp() / s)
    }
}

/// `K0(r) = int_0^inf exp(-r cosh t) dt` by the trapezoid rule, which is
/// spectrally accurate for this integrand.
pub fn k0_quadrature(r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(VortexError::InvalidInput(format!("K0 needs a positive argument, got {r}")));
    }
    // cut where r cosh t exceeds r + 750
    let t_max = ((750.0 + r) / r).acosh();
    let n = 4000;
    let step = t_max / n as f64;
    let mut acc = 0.5 * (-r).exp();
    for i in 1..=n {
        let t = i as f64 * step;
        let w = if i == n { 0.5 } else { 1.0 };
        acc += w * (-r * t.cosh()).exp();
    }
    Ok(acc * step)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayModel {
    /// `v ~ exp(-rate r)`.
    Exponential,
    /// `v ~ r^(-rate)`.
    Power,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub model: DecayModel,
    pub rate: f64,
    pub window: (f64, f64),
    /// R^2 of the chosen log-linear fit.
    pub quality: f64,
    pub competitor_quality: f64,
    pub competitor_rate: f64,
    /// False when the two models cannot be told apart on this window.
    pub decisive: bool,
}

/// Smallest quality margin that decides between the models by itself.
pub const QUALITY_MARGIN: f64 = 0.02;
/// Alternatively, the ratio of unexplained variances that decides.
pub const RESIDUAL_RATIO: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayVerdict {
    Fitted(DecayFit),
    /// Every sample is below the threshold.
    AlreadyZero { max: f64 },
}

impl DecayVerdict {
    pub fn fit(&self) -> Option<&DecayFit> {
        match self {
            DecayVerdict::Fitted(f) => Some(f),
            DecayVerdict::AlreadyZero { .. } => None,
        }
    }
}

/// Least-squares slope and coefficient of determination.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    (slope, r2)
}

/// Fit `log v` against `r` and against `log r` and keep the better model.
pub fn fit_decay(samples: &[(f64, f64)]) -> Result<DecayFit> {
    if samples.len() < 8 {
        return Err(VortexError::InvalidInput(format!(
            "decay fit needs at least 8 samples, got {}",
            samples.len()
        )));
    }
    if let Some(&(r, v)) = samples.iter().find(|&&(r, v)| !(v > 0.0) || !(r > 0.0) || !v.is_finite()) {
        return Err(VortexError::InvalidInput(format!(
            "decay samples must have positive radius and value, got ({r}, {v})"
        )));
    }
    let r_min = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let r_max = samples.iter().map(|s| s.0).fold(0.0, f64::max);
    if r_max < 2.0 * r_min {
        return Err(VortexError::InvalidInput(format!(
            "degenerate window [{r_min}, {r_max}]: radii must span a factor of 2"
        )));
    }
    let r: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let lr: Vec<f64> = r.iter().map(|x| x.ln()).collect();
    let lv: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let (se, qe) = linear_fit(&r, &lv);
    let (sp, qp) = linear_fit(&lr, &lv);
    let (model, rate, quality, competitor_rate, competitor_quality) = if qe >= qp {
        (DecayModel::Exponential, -se, qe, -sp, qp)
    } else {
        (DecayModel::Power, -sp, qp, -se, qe)
    };
    let margin = quality - competitor_quality;
    let unexplained = (1.0 - quality).max(1e-300);
    let decisive = margin >= QUALITY_MARGIN || (1.0 - competitor_quality) / unexplained >= RESIDUAL_RATIO;
    Ok(DecayFit {
        model,
        rate,
        window: (r_min, r_max),
        quality,
        competitor_quality,
        competitor_rate,
        decisive,
    })
}

/// Average of a cell-centred plane field over the circle of radius `r`
/// (bilinear interpolation).
pub fn circle_average(field: &[f64], grid: &PlaneGrid, r: f64, n_angles: usize) -> f64 {
    let h = grid.h();
    let n = grid.n;
    let at = |x: f64, y: f64| {
        let fx = ((x + grid.radius) / h - 0.5).clamp(0.0, (n - 1) as f64 - 1e-12);
        let fy = ((y + grid.radius) / h - 0.5).clamp(0.0, (n - 1) as f64 - 1e-12);
        let (i, j) = (fx.floor() as usize, fy.floor() as usize);
        let (s, t) = (fx - i as f64, fy - j as f64);
        let f = |a: usize, b: usize| field[a * n + b];
        f(i, j) * (1.0 - s) * (1.0 - t) + f(i + 1, j) * s * (1.0 - t) + f(i, j + 1) * (1.0 - s) * t + f(i + 1, j + 1) * s * t
    };
    let mut acc = 0.0;
    for k in 0..n_angles {
        let th = 2.0 * PI * (k as f64 + 0.5) / n_angles as f64;
        acc += at(r * th.cos(), r * th.sin());
    }
    acc / n_angles as f64
}

fn radii(r0: f64, r1: f64, step: f64) -> Vec<f64> {
    let k = ((r1 - r0) / step + 1e-9).floor() as usize;
    (0..=k).map(|i| r0 + i as f64 * step).collect()
}

/// Circle-averaged `(1 - |Phi|^2) / 2` fitted on `[3 + spread, R - 2]`
/// unless a window is given.
pub fn classify_plane_decay(
    sol: &PlaneSolution,
    bg: &PlaneBackground,
    window: Option<(f64, f64)>,
) -> Result<DecayVerdict> {
    let grid = &bg.grid;
    let (r0, r1) = window.unwrap_or((3.0 + bg.divisor.spread(), grid.radius - 2.0));
    if !(r1 > r0) || r1 > grid.radius - grid.h() || r1 - r0 < 1.75 {
        return Err(VortexError::InvalidInput(format!(
            "decay window [{r0}, {r1}] is too small for radius {}",
            grid.radius
        )));
    }
    let density: Vec<f64> = phi_sq(&sol.alpha, bg).iter().map(|p| 0.5 * (1.0 - p)).collect();
    let samples: Vec<(f64, f64)> = radii(r0, r1, 0.25)
        .into_iter()
        .map(|r| (r, circle_average(&density, grid, r, 256)))
        .collect();
    let max = samples.iter().map(|s| s.1.abs()).fold(0.0, f64::max);
    if max < 1e-10 {
        return Ok(DecayVerdict::AlreadyZero { max });
    }
    fit_decay(&samples).map(DecayVerdict::Fitted)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictedDecay {
    /// Degree zero: the slices already are the limit.
    Converged,
    Exponential,
    Power(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductDecay {
    pub verdict: DecayVerdict,
    pub predicted: PredictedDecay,
    pub agreement: bool,
}

pub fn predicted_decay(f: &PolynomialMap) -> Result<PredictedDecay> {
    if f.degree() == 0 {
        return Ok(PredictedDecay::Converged);
    }
    Ok(match gap_index(f)? {
        GapIndex::Product => PredictedDecay::Exponential,
        GapIndex::Gap(m) => PredictedDecay::Power(m),
    })
}

/// Fit the slice distances on `[4, R - 2]` and compare with the class the
/// gap index of `f` predicts.
pub fn classify_product_decay(report: &SliceReport, f: &PolynomialMap, radius: f64) -> Result<ProductDecay> {
    let predicted = predicted_decay(f)?;
    let (r0, r1) = (4.0, radius - 2.0);
    let samples: Vec<(f64, f64)> = report
        .rows
        .iter()
        .filter(|row| row.r >= r0 && row.r <= r1)
        .map(|row| (row.r, row.distance))
        .collect();
    let max = samples.iter().map(|s| s.1).fold(0.0, f64::max);
    if max < 1e-8 {
        let verdict = DecayVerdict::AlreadyZero { max };
        return Ok(ProductDecay {
            agreement: predicted == PredictedDecay::Converged,
            verdict,
            predicted,
        });
    }
    let fit = fit_decay(&samples)?;
    let agreement = fit.decisive
        && match predicted {
            PredictedDecay::Converged => false,
            PredictedDecay::Exponential => fit.model == DecayModel::Exponential,
            PredictedDecay::Power(m) => fit.model == DecayModel::Power && (fit.rate - m as f64).abs() <= 0.3,
        };
    Ok(ProductDecay {
        verdict: DecayVerdict::Fitted(fit),
        predicted,
        agreement,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SourceProfile {
    Exponential { rate: f64 },
    Power { exponent: f64 },
}

impl SourceProfile {
    /// Profile value, frozen at its `r = 1` value inside the unit disc.
    pub fn at(&self, r: f64) -> f64 {
        let r = r.max(1.0);
        match *self {
            SourceProfile::Exponential { rate } => (-rate * r).exp(),
            SourceProfile::Power { exponent } => r.powf(-exponent),
        }
    }
}

/// Solve `(Delta + lambda) u = k` on the plane grid (zero Dirichlet data)
/// and fit the circle-averaged tail of `u` on `[4, min(R - 6, r_floor)]`,
/// where `r_floor` is where `u` drops below `1e-10` of its maximum.
pub fn linear_decay_oracle(lambda: f64, profile: SourceProfile, grid: &PlaneGrid) -> Result<(DecayFit, Vec<f64>)> {
    if !(lambda > 0.0) {
        return Err(VortexError::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    let k: Vec<f64> = (0..grid.len())
        .map(|i| {
            let (x, y) = grid.point(i);
            profile.at(x.hypot(y))
        })
        .collect();
    let inv = SeparableInverse::new(grid.n, grid.h(), PlaneBc::Dirichlet, None);
    let mut u = vec![0.0; k.len()];
    inv.apply(&k, lambda, &mut u);
    let umax = u.iter().cloned().fold(0.0, f64::max);
    let mut r1 = grid.radius - 6.0;
    for r in radii(4.0, r1, 0.25) {
        if circle_average(&u, grid, r, 64) < 1e-10 * umax {
            r1 = r - 0.25;
            break;
        }
    }
    if r1 < 8.0 {
        return Err(VortexError::InvalidInput(format!(
            "oracle window [4, {r1}] too small; enlarge the grid"
        )));
    }
    let samples: Vec<(f64, f64)> = radii(4.0, r1, 0.25)
        .into_iter()
        .map(|r| (r, circle_average(&u, grid, r, 256)))
        .collect();
    Ok((fit_decay(&samples)?, u))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branches_agree_at_the_switch() {
        // both expansions evaluated slightly either side of r = 2
        let a = bessel_k0(2.0).unwrap();
        let b = bessel_k0(2.0 + 1e-12).unwrap();
        assert!((a - b).abs() < 1e-11, "{a} {b}");
    }

    #[test]
    fn rejects_bad_samples() {
        let s: Vec<(f64, f64)> = (1..10).map(|i| (i as f64, -1.0)).collect();
        assert!(fit_decay(&s).is_err());
        let s: Vec<(f64, f64)> = (0..10).map(|i| (10.0 + 0.1 * i as f64, 1.0)).collect();
        assert!(fit_decay(&s).is_err());
    }
}
