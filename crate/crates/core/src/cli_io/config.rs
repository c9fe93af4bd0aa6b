use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bundles::{Divisor, PolynomialMap};
use crate::error::{Result, VortexError};
use crate::geometry::{PlaneGrid, TorusGeometry};
use crate::plane_vortex::{BoundaryRule, SolverConfig};
use crate::product_monopole::{effective_chern, ProductBoundary, ProductConfig};
use crate::surface_vortex::{solvability_constant, SurfaceConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SolvePlane,
    SolveSurface,
    SolveProduct,
    Verify,
    Decay,
    Sweep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryBlock {
    /// Plane half-width R.
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Plane cells per side.
    #[serde(default = "default_n")]
    pub n: usize,
    /// Torus periods; a square torus of `volume` when absent.
    #[serde(default)]
    pub periods: Option<[f64; 2]>,
    #[serde(default = "default_volume")]
    pub volume: f64,
    #[serde(default = "default_nt")]
    pub n_u: usize,
    #[serde(default = "default_nt")]
    pub n_v: usize,
    #[serde(default = "default_k0")]
    pub k0: f64,
}

fn default_radius() -> f64 {
    16.0
}
fn default_n() -> usize {
    256
}
fn default_volume() -> f64 {
    8.0 * PI
}
fn default_nt() -> usize {
    32
}
fn default_k0() -> f64 {
    -1.0
}

impl Default for GeometryBlock {
    fn default() -> Self {
        Self {
            radius: default_radius(),
            n: default_n(),
            periods: None,
            volume: default_volume(),
            n_u: default_nt(),
            n_v: default_nt(),
            k0: default_k0(),
        }
    }
}

impl GeometryBlock {
    pub fn plane(&self) -> Result<PlaneGrid> {
        PlaneGrid::new(self.radius, self.n)
    }

    pub fn torus(&self) -> Result<TorusGeometry> {
        let [pu, pv] = self.periods.unwrap_or([self.volume.sqrt(); 2]);
        TorusGeometry::new(pu, pv, self.n_u, self.n_v, self.k0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivisorPoint {
    pub x: f64,
    pub y: f64,
    #[serde(default = "one")]
    pub multiplicity: u32,
}

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    /// Plane problems.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divisor: Option<Vec<DivisorPoint>>,
    /// Surface and product problems.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundle_degree: Option<usize>,
    /// Surface problems: section coefficients in the theta basis, `[re, im]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section: Option<Vec<[f64; 2]>>,
    /// Product problems: `gamma_0 .. gamma_d`, each a list of `[re, im]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<Vec<[f64; 2]>>>,
}

impl ProblemBlock {
    pub fn divisor(&self) -> Result<Divisor> {
        let pts = self.divisor.as_deref().unwrap_or(&[]);
        if pts.is_empty() {
            return Ok(Divisor::empty());
        }
        Divisor::new(
            pts.iter().map(|p| (p.x, p.y)).collect(),
            pts.iter().map(|p| p.multiplicity).collect(),
        )
    }

    pub fn polynomial_map(&self) -> Result<PolynomialMap> {
        let c = self
            .coefficients
            .as_ref()
            .ok_or_else(|| VortexError::InvalidInput("no polynomial map given".into()))?;
        PolynomialMap::new(c.iter().map(|g| g.iter().map(|z| Complex64::new(z[0], z[1])).collect()).collect())
    }

    pub fn section(&self) -> Vec<Complex64> {
        match &self.section {
            Some(s) => s.iter().map(|z| Complex64::new(z[0], z[1])).collect(),
            None => {
                let m = self.bundle_degree.unwrap_or(0).max(1);
                let mut v = vec![Complex64::new(0.0, 0.0); m];
                v[0] = Complex64::new(1.0, 0.0);
                v
            }
        }
    }

    fn has_plane(&self) -> bool {
        self.divisor.is_some()
    }

    fn has_bundle(&self) -> bool {
        self.bundle_degree.is_some() || self.section.is_some() || self.coefficients.is_some()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_newton: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping_floor: Option<f64>,
    /// "asymptotic" (default) or "dirichlet-zero".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryRule>,
}

impl SolverBlock {
    pub fn plane(&self) -> SolverConfig {
        let mut c = SolverConfig::default();
        if let Some(t) = self.tol {
            c.tol = t;
        }
        if let Some(m) = self.max_newton {
            c.max_newton = m;
        }
        if let Some(d) = self.damping_floor {
            c.damping_floor = d;
        }
        if let Some(b) = self.boundary {
            c.boundary = b;
        }
        c
    }

    pub fn surface(&self) -> SurfaceConfig {
        let mut c = SurfaceConfig::default();
        if let Some(t) = self.tol {
            c.tol = t;
        }
        if let Some(m) = self.max_newton {
            c.max_newton = m;
        }
        if let Some(d) = self.damping_floor {
            c.damping_floor = d;
        }
        c
    }

    pub fn product(&self) -> ProductConfig {
        let mut c = ProductConfig::default();
        if let Some(t) = self.tol {
            c.tol = t;
        }
        if let Some(m) = self.max_newton {
            c.max_newton = m;
        }
        if let Some(d) = self.damping_floor {
            c.damping_floor = d;
        }
        if let Some(b) = self.boundary {
            c.boundary = match b {
                BoundaryRule::Asymptotic => ProductBoundary::Asymptotic,
                BoundaryRule::DirichletZero => ProductBoundary::DirichletZero,
            };
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_dir")]
    pub directory: String,
    #[serde(default)]
    pub dump_fields: bool,
}

fn default_dir() -> String {
    "vortex-out".into()
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            directory: default_dir(),
            dump_fields: false,
        }
    }
}

/// Scale of the verification suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyBlock {
    /// Plane cells per side for the plane criteria (R = 16).
    #[serde(default = "default_verify_plane")]
    pub plane_n: usize,
    /// Plane cells per side for the product criteria (R = 12).
    #[serde(default = "default_verify_product")]
    pub product_plane_n: usize,
    #[serde(default = "default_nt")]
    pub torus_n: usize,
    /// Criterion numbers to run; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criteria: Option<Vec<u32>>,
}

fn default_verify_plane() -> usize {
    512
}
fn default_verify_product() -> usize {
    96
}

impl Default for VerifyBlock {
    fn default() -> Self {
        Self {
            plane_n: default_verify_plane(),
            product_plane_n: default_verify_product(),
            torus_n: default_nt(),
            criteria: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    /// Plane resolutions to run the divisor problem at.
    pub plane_n: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub geometry: GeometryBlock,
    #[serde(default)]
    pub problem: ProblemBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
}

impl RunConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            seed: 0,
            geometry: GeometryBlock::default(),
            problem: ProblemBlock::default(),
            solver: SolverBlock::default(),
            output: OutputBlock::default(),
            verify: None,
            sweep: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| VortexError::Config(vec![e.to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| VortexError::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Every violated constraint, not just the first.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let g = &self.geometry;
        let p = &self.problem;
        let s = &self.solver;
        for (name, v) in [("solver.tol", s.tol), ("solver.damping_floor", s.damping_floor)] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    errs.push(format!("{name} must be positive, got {v}"));
                }
            }
        }
        if s.max_newton == Some(0) {
            errs.push("solver.max_newton must be at least 1".into());
        }
        let uses_plane = !matches!(self.mode, Mode::SolveSurface | Mode::Verify);
        let uses_torus = matches!(self.mode, Mode::SolveSurface | Mode::SolveProduct)
            || (self.mode == Mode::Decay && p.has_bundle());
        if uses_plane {
            if let Err(e) = g.plane() {
                errs.push(format!("geometry: {e}"));
            }
        }
        if uses_torus {
            if let Err(e) = g.torus() {
                errs.push(format!("geometry: {e}"));
            }
        }
        match self.mode {
            Mode::SolvePlane | Mode::Sweep => {
                if p.has_bundle() {
                    errs.push(format!("problem: {:?} takes a divisor, not bundle data", self.mode));
                }
                if let Err(e) = p.divisor() {
                    errs.push(format!("problem.divisor: {e}"));
                } else if let (Ok(d), Ok(grid)) = (p.divisor(), g.plane()) {
                    if let Err(e) = d.check_inside(&grid) {
                        errs.push(format!("problem.divisor: {e}"));
                    }
                }
            }
            Mode::SolveSurface => {
                if p.has_plane() || p.coefficients.is_some() {
                    errs.push("problem: solve-surface takes bundle_degree and section only".into());
                }
                match p.bundle_degree {
                    None => errs.push("problem.bundle_degree is required for solve-surface".into()),
                    Some(0) => errs.push("problem.bundle_degree must be >= 1 for solve-surface".into()),
                    Some(m) => {
                        if p.section().len() != m {
                            errs.push(format!(
                                "problem.section has {} coefficients, bundle degree {m} needs {m}",
                                p.section().len()
                            ));
                        }
                        if let Ok(t) = g.torus() {
                            let c = solvability_constant(&t, m);
                            if !(c > 0.0) {
                                errs.push(format!(
                                    "solvability constraint: c = -K0*volume/2 - 2*pi*m = {c:.6} must be positive \
                                     (m = {m}, volume = {:.6}, K0 = {})",
                                    t.volume(),
                                    t.k0
                                ));
                            }
                        }
                    }
                }
            }
            Mode::Decay if !p.has_bundle() => {
                if let Err(e) = p.divisor() {
                    errs.push(format!("problem.divisor: {e}"));
                }
            }
            Mode::SolveProduct | Mode::Decay => {
                if p.has_plane() {
                    errs.push("problem: give either a divisor or bundle data, not both".into());
                }
                match (p.bundle_degree, p.polynomial_map()) {
                    (None, _) => errs.push("problem.bundle_degree is required".into()),
                    (_, Err(e)) => errs.push(format!("problem.coefficients: {e}")),
                    (Some(m), Ok(f)) => {
                        if f.dim() != m.max(1) {
                            errs.push(format!(
                                "problem.coefficients have dimension {}, bundle degree {m} needs {}",
                                f.dim(),
                                m.max(1)
                            ));
                        }
                        if let Ok(t) = g.torus() {
                            if effective_chern(&t, m) >= 0.0 {
                                errs.push(format!(
                                    "solvability constraint: 2*pi*m + K0*volume/2 = {:.6} must be negative",
                                    PI * effective_chern(&t, m)
                                ));
                            }
                        }
                    }
                }
            }
            Mode::Verify => {
                if let Some(v) = &self.verify {
                    if v.plane_n < 16 || v.product_plane_n < 16 {
                        errs.push("verify: plane resolutions must be at least 16".into());
                    }
                    if !v.torus_n.is_power_of_two() || v.torus_n < 8 {
                        errs.push(format!("verify.torus_n must be a power of two >= 8, got {}", v.torus_n));
                    }
                    if let Some(c) = &v.criteria {
                        for k in c.iter().filter(|k| !(1..=13).contains(*k)) {
                            errs.push(format!("verify.criteria: no criterion {k}"));
                        }
                    }
                }
            }
        }
        if self.mode == Mode::Sweep {
            match &self.sweep {
                None => errs.push("sweep mode needs a [sweep] block".into()),
                Some(s) if s.plane_n.is_empty() => errs.push("sweep.plane_n is empty".into()),
                Some(s) => {
                    for &n in &s.plane_n {
                        if let Err(e) = PlaneGrid::new(g.radius, n) {
                            errs.push(format!("sweep.plane_n: {e}"));
                        }
                    }
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(VortexError::Config(errs))
        }
    }
}
