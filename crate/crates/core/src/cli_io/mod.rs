//! Run configuration, manifests and reports, field dumps, and the
//! verification suite behind the `vortex` binary.
//!
//! The CSV report has the fixed columns `name,value,target,tolerance,pass`.
//! A row passes when `|value - target| <= tolerance`; rows that state a
//! one-sided bound carry the bound as `target` and a zero tolerance, with the
//! direction recorded in the manifest.

mod config;
pub mod dump;
mod suite;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{
    DivisorPoint, GeometryBlock, Mode, OutputBlock, ProblemBlock, RunConfig, SolverBlock, SweepBlock, VerifyBlock,
};
pub use suite::{verify_suite, VerifyReport};

use crate::bundles::theta_basis;
use crate::decay_analysis::{classify_plane_decay, classify_product_decay, DecayModel, DecayVerdict, PredictedDecay};
use crate::error::{Result, VortexError};
use crate::geometry::{Grid, ProductGrid};
use crate::plane_vortex::{phi_sq, solve_plane, winding_plane};
use crate::product_monopole::{slice_report, solve_product};
use crate::surface_vortex::solve_surface;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_ACCEPTANCE: i32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    Within,
    AtMost,
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckRow {
    pub fn within(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            target,
            tolerance,
            relation: Relation::Within,
            pass: (value - target).abs() <= tolerance,
            note: None,
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            target: bound,
            tolerance: 0.0,
            relation: Relation::AtMost,
            pass: value <= bound,
            note: None,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            target: bound,
            tolerance: 0.0,
            relation: Relation::AtLeast,
            pass: value >= bound,
            note: None,
        }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self::within(name, if ok { 1.0 } else { 0.0 }, 1.0, 0.0)
    }

    pub fn failed(name: impl Into<String>, err: &VortexError) -> Self {
        let mut row = Self::flag(name, false);
        row.value = f64::NAN;
        row.note = Some(err.to_string());
        row
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: RunConfig,
    pub wall_time_s: f64,
    pub residual_history: Vec<f64>,
    pub results: Vec<CheckRow>,
    pub warnings: Vec<String>,
    pub fields: Vec<String>,
    pub all_pass: bool,
}

impl RunManifest {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serialises")
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub manifest: Option<RunManifest>,
    pub error: Option<VortexError>,
}

/// Exit code for an error raised while running (not validating) a config.
pub fn exit_code_for(err: &VortexError) -> i32 {
    match err {
        VortexError::Config(_) | VortexError::Solvability { .. } => EXIT_VALIDATION,
        _ => EXIT_SOLVER,
    }
}

/// Load, override and run a config file.
pub fn run_file(path: &Path, out: Option<&Path>, dump_fields: bool, seed: Option<u64>) -> RunOutcome {
    let mut cfg = match RunConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            return RunOutcome {
                exit_code: EXIT_VALIDATION,
                manifest: None,
                error: Some(e),
            }
        }
    };
    if let Some(o) = out {
        cfg.output.directory = o.display().to_string();
    }
    cfg.output.dump_fields |= dump_fields;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    run(&cfg)
}

/// Execute the mode's pipeline and write `manifest.toml`, `report.csv` and
/// (optionally) field dumps into the output directory.
pub fn run(cfg: &RunConfig) -> RunOutcome {
    if let Err(e) = cfg.validate() {
        return RunOutcome {
            exit_code: EXIT_VALIDATION,
            manifest: None,
            error: Some(e),
        };
    }
    let start = Instant::now();
    let out = PathBuf::from(&cfg.output.directory);
    let mut art = Artifacts::default();
    let result = execute(cfg, &out, &mut art);
    if let Err(e) = result {
        return RunOutcome {
            exit_code: exit_code_for(&e),
            manifest: None,
            error: Some(e),
        };
    }
    let all_pass = art.rows.iter().all(|r| r.pass);
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        wall_time_s: start.elapsed().as_secs_f64(),
        residual_history: art.history,
        results: art.rows,
        warnings: art.warnings,
        fields: art.fields,
        all_pass,
    };
    if let Err(e) = write_reports(&out, &manifest) {
        return RunOutcome {
            exit_code: EXIT_SOLVER,
            manifest: Some(manifest),
            error: Some(e),
        };
    }
    RunOutcome {
        exit_code: if all_pass { EXIT_PASS } else { EXIT_ACCEPTANCE },
        manifest: Some(manifest),
        error: None,
    }
}

pub fn write_reports(out: &Path, manifest: &RunManifest) -> Result<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("manifest.toml"), manifest.to_toml())?;
    std::fs::write(out.join("report.csv"), report_csv(&manifest.results)?)?;
    Ok(())
}

pub fn report_csv(rows: &[CheckRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| VortexError::InvalidInput(e.to_string());
    w.write_record(["name", "value", "target", "tolerance", "pass"]).map_err(io)?;
    for r in rows {
        w.write_record([
            r.name.clone(),
            format!("{:e}", r.value),
            format!("{:e}", r.target),
            format!("{:e}", r.tolerance),
            r.pass.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| VortexError::InvalidInput(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

#[derive(Default)]
struct Artifacts {
    rows: Vec<CheckRow>,
    history: Vec<f64>,
    warnings: Vec<String>,
    fields: Vec<String>,
}

impl Artifacts {
    fn dump(&mut self, cfg: &RunConfig, out: &Path, name: &str, values: &[f64], grid: Grid) -> Result<()> {
        if cfg.output.dump_fields {
            let p = dump::write_field(&out.join("fields"), name, values, &grid)?;
            self.fields.push(p.display().to_string());
        }
        Ok(())
    }
}

fn execute(cfg: &RunConfig, out: &Path, art: &mut Artifacts) -> Result<()> {
    let g = &cfg.geometry;
    let p = &cfg.problem;
    match cfg.mode {
        Mode::SolvePlane => {
            let grid = g.plane()?;
            let sc = cfg.solver.plane();
            let (sol, bg) = solve_plane(&p.divisor()?, &grid, &sc)?;
            let d = bg.degree() as f64;
            let tol = 0.02 * d.max(1.0);
            art.history = sol.history.iter().map(|s| s.residual).collect();
            art.rows.push(CheckRow::within("plane.energy_over_pi", sol.energy / std::f64::consts::PI, d, tol));
            art.rows.push(CheckRow::within(
                "plane.flux_over_2pi",
                sol.flux / (2.0 * std::f64::consts::PI),
                d,
                tol,
            ));
            art.rows.push(CheckRow::within("plane.winding", winding_plane(&sol.alpha, &bg)? as f64, d, 0.0));
            art.rows.push(CheckRow::at_most("plane.residual", sol.residual_norm, sc.tol));
            art.dump(cfg, out, "alpha", &sol.alpha, Grid::Plane(grid.clone()))?;
            art.dump(cfg, out, "phi_sq", &phi_sq(&sol.alpha, &bg), Grid::Plane(grid))?;
        }
        Mode::SolveSurface => {
            let torus = g.torus()?;
            let m = p.bundle_degree.unwrap_or(1);
            let sc = cfg.solver.surface();
            let basis = theta_basis(&torus, m as i64)?;
            let sv = solve_surface(&torus, &basis, &p.section(), &sc)?;
            art.history = sv.history.iter().map(|s| s.residual).collect();
            let sigma_sq: Vec<f64> = sv.sigma.iter().map(|s| s.norm_sqr()).collect();
            let mass = sigma_sq.iter().sum::<f64>() * torus.cell_area();
            art.rows.push(CheckRow::at_most("surface.residual", sv.residual_norm, sc.tol));
            art.rows.push(CheckRow::within("surface.sigma_l2", mass, 2.0 * sv.c, 1e-8 * 2.0 * sv.c));
            art.dump(cfg, out, "w", &sv.w, Grid::Torus(torus.clone()))?;
            art.dump(cfg, out, "sigma_sq", &sigma_sq, Grid::Torus(torus))?;
        }
        Mode::SolveProduct => {
            let grid = ProductGrid::new(g.plane()?, g.torus()?);
            let pc = cfg.solver.product();
            let basis = theta_basis(&grid.torus, p.bundle_degree.unwrap_or(0) as i64)?;
            let (sol, _bg) = solve_product(&p.polynomial_map()?, &basis, &grid, &pc)?;
            art.history = sol.history.iter().map(|s| s.residual).collect();
            let e = sol.energy;
            let ratio = if e.e_top == 0.0 { e.e_an + 1.0 } else { e.e_an / e.e_top };
            art.rows.push(CheckRow::within("product.energy_ratio", ratio, 1.0, 0.05));
            art.rows.push(CheckRow::at_most("product.residual", sol.residual_norm, pc.tol));
            if sol.boundary_warning {
                art.warnings.push(format!(
                    "alpha reaches {:.3e} on the boundary ring; increase the plane radius",
                    sol.boundary_max
                ));
            }
            art.dump(cfg, out, "alpha", &sol.alpha, Grid::Product(grid))?;
        }
        Mode::Decay if p.coefficients.is_some() => {
            let grid = ProductGrid::new(g.plane()?, g.torus()?);
            let pc = cfg.solver.product();
            let f = p.polynomial_map()?;
            let basis = theta_basis(&grid.torus, p.bundle_degree.unwrap_or(0) as i64)?;
            let (sol, bg) = solve_product(&f, &basis, &grid, &pc)?;
            art.history = sol.history.iter().map(|s| s.residual).collect();
            let rep = slice_report(&sol, &bg)?;
            let dec = classify_product_decay(&rep, &f, grid.plane.radius)?;
            art.rows.push(CheckRow::flag("decay.agreement", dec.agreement).note(format!("{:?}", dec.predicted)));
            if let (PredictedDecay::Power(m), Some(fit)) = (dec.predicted, dec.verdict.fit()) {
                art.rows.push(CheckRow::within("decay.power", fit.rate, m as f64, 0.3));
            }
        }
        Mode::Decay => {
            let grid = g.plane()?;
            let (sol, bg) = solve_plane(&p.divisor()?, &grid, &cfg.solver.plane())?;
            art.history = sol.history.iter().map(|s| s.residual).collect();
            match classify_plane_decay(&sol, &bg, None)? {
                DecayVerdict::AlreadyZero { max } => art.rows.push(CheckRow::at_most("decay.max", max, 1e-10)),
                DecayVerdict::Fitted(fit) => {
                    let exp = fit.model == DecayModel::Exponential && fit.decisive;
                    art.rows.push(CheckRow::flag("decay.exponential", exp));
                    art.rows.push(CheckRow::at_least("decay.rate", fit.rate, 0.8));
                    art.rows.push(CheckRow::at_least("decay.quality", fit.quality, 0.99));
                }
            }
        }
        Mode::Sweep => {
            let div = p.divisor()?;
            let sc = cfg.solver.plane();
            let d = div.degree() as f64;
            for &n in &cfg.sweep.as_ref().expect("validated").plane_n {
                let grid = crate::geometry::PlaneGrid::new(g.radius, n)?;
                let (sol, _) = solve_plane(&div, &grid, &sc)?;
                art.history.push(sol.residual_norm);
                art.rows.push(CheckRow::within(
                    format!("sweep.n{n}.energy_over_pi"),
                    sol.energy / std::f64::consts::PI,
                    d,
                    0.02 * d.max(1.0),
                ));
            }
        }
        Mode::Verify => {
            let v = cfg.verify.clone().unwrap_or_default();
            let rep = verify_suite(&v, cfg.seed);
            art.rows = rep.rows;
            art.warnings = rep.warnings;
        }
    }
    Ok(())
}
