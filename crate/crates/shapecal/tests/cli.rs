//! End-to-end tests of the `shapecal` binary: CSV contents, exit codes, and
//! file outputs for each subcommand.

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

fn shapecal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shapecal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).expect("utf-8 stderr")
}

/// Parses CSV text into (header, rows of string cells).
fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader
        .headers()
        .expect("header row")
        .iter()
        .map(str::to_owned)
        .collect();
    let rows = reader
        .records()
        .map(|r| r.expect("row").iter().map(str::to_owned).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("column {name} in {header:?}"))
}

fn floats(rows: &[Vec<String>], idx: usize) -> Vec<f64> {
    rows.iter().map(|r| r[idx].parse().expect("float cell")).collect()
}

#[test]
fn geometry_check_passes_on_the_unit_sphere() {
    let out = shapecal(&["geometry-check", "--surface", "sphere(1)"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let (header, rows) = parse_csv(&stdout(&out));
    let name = column(&header, "check_name");
    let err = column(&header, "max_error");
    let pass = column(&header, "pass");
    assert!(!rows.is_empty());
    for row in &rows {
        assert_eq!(row[pass], "true", "check {} failed", row[name]);
    }
    let gb = rows.iter().find(|r| r[name] == "gauss_bonnet").unwrap();
    assert!(gb[err].parse::<f64>().unwrap() <= 1e-8);
}

#[test]
fn geometry_check_passes_on_the_torus() {
    let out = shapecal(&["geometry-check", "--surface", "torus(2,1)"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let (header, rows) = parse_csv(&stdout(&out));
    let name = column(&header, "check_name");
    let err = column(&header, "max_error");
    for row in &rows {
        assert_eq!(row[column(&header, "pass")], "true", "check {} failed", row[name]);
    }
    // Genus one: the total Gauss curvature vanishes.
    let gb = rows.iter().find(|r| r[name] == "gauss_bonnet").unwrap();
    assert!(gb[err].parse::<f64>().unwrap() <= 1e-8);
}

#[test]
fn unknown_surface_family_exits_with_config_error() {
    let out = shapecal(&["geometry-check", "--surface", "cube(1)"]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).contains("cube"), "stderr names the bad family: {}", stderr(&out));
}

#[test]
fn config_files_with_unknown_keys_exit_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("experiment.json");
    std::fs::write(&path, r#"{"command": "geometry-check", "surfac": "sphere(1)"}"#).unwrap();
    let out = shapecal(&["geometry-check", "--config", path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).contains("surfac"), "stderr names the key: {}", stderr(&out));
}

#[test]
fn radial_velocity_on_the_unit_sphere_differentiates_curvature_to_minus_two() {
    let out = shapecal(&["verify-derivatives", "--surface", "sphere(1)", "--velocity", "radial"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let (header, rows) = parse_csv(&stdout(&out));
    let quantity = column(&header, "quantity");
    let analytic = column(&header, "analytic");
    let oracle = column(&header, "oracle");
    let row = rows.iter().find(|r| r[quantity] == "kappa_prime").unwrap();
    let a: f64 = row[analytic].parse().unwrap();
    let o: f64 = row[oracle].parse().unwrap();
    assert!((a + 2.0).abs() <= 1e-9, "κ' = -κ² v_n = -2 on the unit sphere, got {a}");
    assert!((o + 2.0).abs() <= 1e-6, "oracle agrees, got {o}");
}

#[test]
fn translation_leaves_sphere_curvatures_stationary() {
    let out = shapecal(&[
        "verify-derivatives",
        "--surface",
        "sphere(1)",
        "--velocity",
        "translation(0,0,1)",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let (header, rows) = parse_csv(&stdout(&out));
    let quantity = column(&header, "quantity");
    let analytic = column(&header, "analytic");
    let row = rows
        .iter()
        .find(|r| r[quantity] == "gauss_curvature_prime")
        .unwrap();
    let worst: f64 = row[analytic].parse().unwrap();
    assert!(worst.abs() <= 1e-8, "rigid motion, got {worst}");
}

#[test]
fn random_velocity_on_the_torus_matches_the_oracle() {
    let out = shapecal(&[
        "verify-derivatives",
        "--surface",
        "torus(2,1)",
        "--velocity",
        "random_polynomial(2,5)",
        "--seed",
        "5",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let (header, rows) = parse_csv(&stdout(&out));
    let rel = column(&header, "rel_err");
    let pass = column(&header, "pass");
    assert!(!rows.is_empty());
    for row in &rows {
        assert!(row[rel].parse::<f64>().unwrap() <= 1e-5);
        assert_eq!(row[pass], "true");
    }
}

#[test]
fn damped_area_newton_reports_half_strength_updates() {
    let out = shapecal(&[
        "newton",
        "--surface",
        "icosphere(3)",
        "--functional",
        "area",
        "--max-iter",
        "2",
        "--alpha",
        "0.5",
    ]);
    // Two damped steps cannot converge: the numeric-failure exit.
    assert_eq!(exit_code(&out), 1);
    assert!(stderr(&out).contains("iteration limit"));
    let (header, rows) = parse_csv(&stdout(&out));
    let j = floats(&rows, column(&header, "J"));
    let u_inf = floats(&rows, column(&header, "u_inf"));
    // The continuous Newton update on the unit sphere is u = -1; the damped
    // applied update is close to 0.5 in size and halves each step.
    assert!((u_inf[0] - 0.5).abs() <= 2e-2, "first applied update {:.4}", u_inf[0]);
    assert!((u_inf[1] - 0.25).abs() <= 2e-2, "second applied update {:.4}", u_inf[1]);
    assert!(j[1] < j[0], "area decreases: {} -> {}", j[0], j[1]);
}

#[test]
fn missing_mesh_file_exits_with_config_error() {
    let out = shapecal(&["newton", "--mesh", "/nonexistent/surface.off"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn newton_writes_the_iterate_sequence_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    let dumps = dir.path().join("iterates");
    let out = shapecal(&[
        "newton",
        "--surface",
        "icosphere(2)",
        "--functional",
        "area",
        "--max-iter",
        "2",
        "--dump-dir",
        dumps.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 1); // iteration limit
    for k in 0..=2 {
        let path = dumps.join(format!("iterate_{k:04}.off"));
        assert!(path.exists(), "missing {}", path.display());
        assert!(Path::new(&path).metadata().unwrap().len() > 0);
    }
}

#[test]
fn dilation_flow_scales_area_exponentially() {
    let out = shapecal(&["flow", "--surface", "icosphere(3)", "--velocity", "dilation"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let (header, rows) = parse_csv(&stdout(&out));
    let area = floats(&rows, column(&header, "area"));
    // Area scales as e^{2t}; the default horizon is t = 0.1.
    let ratio = area.last().unwrap() / area.first().unwrap();
    assert!((ratio - (0.2f64).exp()).abs() <= 1e-4, "area ratio {ratio}");
}

#[test]
fn generic_flows_preserve_the_total_gauss_curvature_of_the_sphere() {
    let out = shapecal(&[
        "flow",
        "--surface",
        "icosphere(4)",
        "--velocity",
        "random_polynomial(2,9)",
        "--seed",
        "9",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let (header, rows) = parse_csv(&stdout(&out));
    for value in floats(&rows, column(&header, "total_gauss")) {
        assert!((value - 4.0 * PI).abs() <= 0.1, "total Gauss {value}");
    }
}

#[test]
fn rigid_translation_leaves_all_flow_columns_constant() {
    let dir = tempfile::tempdir().unwrap();
    let mesh_path = dir.path().join("torus.off");
    let mesh = shapecal::mesh::TriMesh::torus_grid(2.0, 1.0, 64, 32);
    shapecal::meshio::write_off(&mesh, &mesh_path).unwrap();
    let out = shapecal(&[
        "flow",
        "--mesh",
        mesh_path.to_str().unwrap(),
        "--velocity",
        "translation(0.3,-0.2,0.5)",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let (header, rows) = parse_csv(&stdout(&out));
    for name in ["area", "willmore", "total_gauss", "volume"] {
        let values = floats(&rows, column(&header, name));
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(max - min <= 1e-9, "column {name} drifts by {}", max - min);
    }
}

#[test]
fn flow_writes_the_mesh_sequence_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    let dumps = dir.path().join("frames");
    let out = shapecal(&[
        "flow",
        "--surface",
        "icosphere(2)",
        "--velocity",
        "dilation",
        "--dump-dir",
        dumps.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    // Default time grid: ten steps, eleven frames including t = 0.
    for k in 0..=10 {
        assert!(dumps.join(format!("flow_{k:04}.off")).exists(), "missing frame {k}");
    }
}
