use std::fs;
use std::path::Path;
use std::process::Command;

use proptest::prelude::*;
use vortex_core::cli_io::dump::{read_field, write_field};
use vortex_core::cli_io::*;
use vortex_core::geometry::{Grid, PlaneGrid, TorusGeometry};
use vortex_core::VortexError;

fn vortex(config: &Path, out: &Path, extra: &[&str]) -> (i32, String, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_vortex"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs");
    (
        o.status.code().expect("exit code"),
        String::from_utf8_lossy(&o.stdout).into_owned(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn row<'a>(m: &'a RunManifest, name: &str) -> &'a CheckRow {
    m.results.iter().find(|r| r.name == name).unwrap_or_else(|| panic!("no row {name}"))
}

#[test]
fn empty_divisor_runs_clean() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "mode = \"solve-plane\"\n[geometry]\nradius = 8.0\nn = 32\n");
    let (code, stdout, _) = vortex(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(code, EXIT_PASS);
    assert!(stdout.contains("plane.energy_over_pi"));
    let text = fs::read_to_string(dir.path().join("out/manifest.toml")).unwrap();
    let m: RunManifest = toml::from_str(&text).unwrap();
    assert_eq!(row(&m, "plane.energy_over_pi").value, 0.0);
}

#[test]
fn default_single_vortex_has_quantised_energy() {
    let mut cfg = RunConfig::new(Mode::SolvePlane);
    cfg.problem.divisor = Some(vec![DivisorPoint {
        x: 0.0,
        y: 0.0,
        multiplicity: 1,
    }]);
    let dir = tempfile::tempdir().unwrap();
    cfg.output.directory = dir.path().display().to_string();
    let outcome = run(&cfg);
    assert_eq!(outcome.exit_code, EXIT_PASS, "{:?}", outcome.error);
    let m = outcome.manifest.unwrap();
    let e = row(&m, "plane.energy_over_pi").value;
    assert!((0.98..=1.02).contains(&e), "{e}");
    assert!(!m.residual_history.is_empty());
}

#[test]
fn unsolvable_surface_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "mode = \"solve-surface\"\n[geometry]\nvolume = 12.566370614359172\nn_u = 16\nn_v = 16\n[problem]\nbundle_degree = 1\n",
    );
    let (code, _, stderr) = vortex(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(code, EXIT_VALIDATION);
    assert!(stderr.contains("solvability constraint"), "{stderr}");
}

#[test]
fn every_violation_is_listed() {
    let text = "mode = \"solve-surface\"\n[geometry]\nvolume = 12.566370614359172\n[problem]\nbundle_degree = 1\n[solver]\ntol = -1.0\nmax_newton = 0\n";
    let err = RunConfig::from_toml(text).unwrap_err();
    match err {
        VortexError::Config(list) => {
            assert!(list.iter().any(|e| e.contains("solver.tol")));
            assert!(list.iter().any(|e| e.contains("max_newton")));
            assert!(list.iter().any(|e| e.contains("solvability")));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn unreadable_configs_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "mode = \"solve-plane\"\n[geometry]\nradius = 8.0\nbogus = 1\n");
    assert_eq!(vortex(&cfg, &dir.path().join("out"), &[]).0, EXIT_VALIDATION);
    let missing = dir.path().join("nope.toml");
    assert_eq!(vortex(&missing, &dir.path().join("out"), &[]).0, EXIT_VALIDATION);
    let outside = write_config(dir.path(), "mode = \"solve-plane\"\n[geometry]\nradius = 4.0\nn = 16\n[problem]\ndivisor = [{ x = 9.0, y = 0.0 }]\n");
    assert_eq!(vortex(&outside, &dir.path().join("out"), &[]).0, EXIT_VALIDATION);
}

#[test]
fn solver_failure_has_its_own_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "mode = \"solve-plane\"\n[geometry]\nradius = 8.0\nn = 32\n[problem]\ndivisor = [{ x = 0.0, y = 0.0, multiplicity = 3 }]\n[solver]\nmax_newton = 1\ntol = 1e-13\n",
    );
    let (code, _, stderr) = vortex(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(code, EXIT_SOLVER, "{stderr}");
    assert!(stderr.contains("Newton"));
}

#[test]
fn manifests_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "mode = \"solve-plane\"\n[geometry]\nradius = 8.0\nn = 48\n[problem]\ndivisor = [{ x = 0.5, y = -0.5 }, { x = -1.0, y = 1.0 }]\n",
    );
    let out = dir.path().join("out");
    let strip = |t: String| t.lines().filter(|l| !l.starts_with("wall_time_s")).collect::<Vec<_>>().join("\n");
    let mut seen = Vec::new();
    for _ in 0..2 {
        let code = vortex(&cfg, &out, &["--dump-fields"]).0;
        seen.push((
            code,
            strip(fs::read_to_string(out.join("manifest.toml")).unwrap()),
            fs::read(out.join("report.csv")).unwrap(),
            fs::read(out.join("fields/alpha.f64")).unwrap(),
        ));
    }
    assert_eq!(seen[0], seen[1]);
}

#[test]
fn report_has_the_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "mode = \"solve-plane\"\n[geometry]\nradius = 8.0\nn = 32\n");
    vortex(&cfg, &dir.path().join("out"), &[]);
    let mut rdr = csv::Reader::from_path(dir.path().join("out/report.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["name", "value", "target", "tolerance", "pass"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r[4] == *"true" || r[4] == *"false"));
}

#[test]
fn coarse_verify_grid_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "mode = \"verify\"\n[verify]\nplane_n = 32\ncriteria = [1]\n",
    );
    let (code, stdout, stderr) = vortex(&cfg, &dir.path().join("out"), &[]);
    assert!(stdout.contains("c01."), "{stdout}");
    assert!(stderr.contains("widened"), "{stderr}");
    let m: RunManifest = toml::from_str(&fs::read_to_string(dir.path().join("out/manifest.toml")).unwrap()).unwrap();
    assert!(!m.warnings.is_empty());
    assert_eq!(code, if m.all_pass { EXIT_PASS } else { EXIT_ACCEPTANCE });
}

#[test]
fn corrupted_dump_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "mode = \"solve-plane\"\n[geometry]\nradius = 8.0\nn = 32\n[problem]\ndivisor = [{ x = 0.0, y = 0.0 }]\n",
    );
    let out = dir.path().join("out");
    assert_eq!(vortex(&cfg, &out, &["--dump-fields"]).0, EXIT_PASS);
    let data = out.join("fields/alpha.f64");
    let (values, header) = read_field(&data).unwrap();
    assert_eq!(values.len(), 32 * 32);
    assert_eq!(header.grid, Grid::Plane(PlaneGrid::new(8.0, 32).unwrap()));
    let mut bytes = fs::read(&data).unwrap();
    bytes[17] ^= 0x40;
    fs::write(&data, bytes).unwrap();
    assert!(matches!(read_field(&data), Err(VortexError::Checksum { .. })));
}

#[test]
fn dump_rejects_wrong_length() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid::Plane(PlaneGrid::new(1.0, 4).unwrap());
    assert!(write_field(dir.path(), "x", &[1.0; 3], &grid).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dumps_round_trip_bitwise(bits in prop::collection::vec(any::<u64>(), 16)) {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid::Torus(TorusGeometry::new(1.0, 2.0, 4, 4, 0.0).unwrap());
        // arbitrary bit patterns, NaN payloads and signed zeros included
        let values: Vec<f64> = bits.iter().map(|b| f64::from_bits(*b)).collect();
        let path = write_field(dir.path(), "f", &values, &grid).unwrap();
        let (back, header) = read_field(&path).unwrap();
        prop_assert_eq!(header.grid, grid);
        prop_assert_eq!(
            back.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            bits
        );
    }
}
