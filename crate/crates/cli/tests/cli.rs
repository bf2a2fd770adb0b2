use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use darcy_vem::io::read_poly_mesh_str;
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_darcy-vem"));
    c.env("RUST_LOG", "warn");
    c
}

fn config(dir: &Path, name: &str, inclusion: Option<(f64, f64)>, bases: &[usize], extra: &str) -> PathBuf {
    let inc = match inclusion {
        Some((pp, pm)) => format!(r#""inclusion": {{"a": [0.25, 0.5], "b": [0.75, 0.5], "p_plus": {pp}, "p_minus": {pm}}},"#),
        None => String::new(),
    };
    let levels: Vec<String> = bases
        .iter()
        .map(|n| format!(r#"{{"base_resolution": {n}, "tip_refinement_levels": 1, "measure_threshold_ratio": 0.5}}"#))
        .collect();
    let text = format!(
        r#"{{
  "schema_version": 1,
  {inc}
  "levels": [{}],
  "reference": {{"base_resolution": 32, "tip_refinement_levels": 3}},
  {extra}
  "output_dir": "unused"
}}"#,
        levels.join(", ")
    );
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn mesh_writes_one_file_per_level_with_two_cut_cells() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "c.json", Some((1.0, 1.0)), &[4, 8, 12, 16], "");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = run(&["mesh", "--config", s(&cfg), "--out", s(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for i in 0..4 {
        let name = format!("mesh_level{i}.poly");
        let text = fs::read_to_string(a.join(&name)).unwrap();
        assert_eq!(read_poly_mesh_str(&text).unwrap().cut_cell_count(), 2);
        assert_eq!(text, fs::read_to_string(b.join(&name)).unwrap());
        assert!(a.join(format!("mesh_level{i}.vtk")).exists());
    }
}

#[test]
fn mesh_without_inclusion_has_no_cut_cells() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "c.json", None, &[4], "");
    let o = run(&["mesh", "--config", s(&cfg), "--out", s(tmp.path())]);
    assert!(o.status.success());
    let text = fs::read_to_string(tmp.path().join("mesh_level0.poly")).unwrap();
    assert_eq!(read_poly_mesh_str(&text).unwrap().cut_cell_count(), 0);
}

fn solve_report(inclusion: Option<(f64, f64)>, extra: &str, flags: &[&str]) -> Value {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "c.json", inclusion, &[8, 16], extra);
    let mut args = vec!["solve", "--config", s(&cfg), "--out", s(tmp.path()), "--level", "1"];
    args.extend_from_slice(flags);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let vtk = fs::read_to_string(tmp.path().join("solution_level1.vtk")).unwrap();
    assert!(vtk.contains("SCALARS p double 1"));
    serde_json::from_str(&fs::read_to_string(tmp.path().join("solve_level1.json")).unwrap()).unwrap()
}

#[test]
fn solve_continuous_pressure_range() {
    for flags in [&[][..], &["--solver", "schur"], &["--stabilization", "measure"]] {
        let r = solve_report(Some((1.0, 1.0)), "", flags);
        let (lo, hi) = (r["pressure_min"].as_f64().unwrap(), r["pressure_max"].as_f64().unwrap());
        assert!(lo > -1e-8 && hi < 1.0 + 1e-8 && hi > 0.5, "[{lo}, {hi}]");
        assert!(r["max_conservation_residual"].as_f64().unwrap() <= 1e-10);
        assert!(r["solver_residual"].as_f64().unwrap() <= 1e-10);
        assert_eq!(r["cut_cells"], 2);
    }
}

#[test]
fn solve_discontinuous_pressure_range() {
    let r = solve_report(Some((1.0, -1.0)), "", &[]);
    let (lo, hi) = (r["pressure_min"].as_f64().unwrap(), r["pressure_max"].as_f64().unwrap());
    assert!(lo > -1.0 - 1e-8 && lo < -0.5 && hi < 1.0 + 1e-8 && hi > 0.5, "[{lo}, {hi}]");
}

#[test]
fn solve_zero_data_is_zero() {
    let r = solve_report(Some((0.0, 0.0)), "", &[]);
    assert_eq!(r["pressure_min"], 0.0);
    assert_eq!(r["pressure_max"], 0.0);
}

#[test]
fn convergence_is_byte_deterministic() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "c.json", Some((1.0, -1.0)), &[4, 8], "");
    let mut csv = Vec::new();
    for (dir, parallel) in [("a", false), ("a", false), ("b", true)] {
        let out = tmp.path().join(dir);
        let mut args = vec!["convergence", "--config", s(&cfg), "--out", s(&out)];
        if parallel {
            args.push("--parallel-levels");
        }
        let o = run(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        csv.push(fs::read(out.join("convergence.csv")).unwrap());
        for f in ["convergence.txt", "metadata.json", "error_level1.vtk", "reference.vtk"] {
            assert!(out.join(f).exists(), "{f}");
        }
    }
    assert_eq!(csv[0], csv[1]);
    assert_eq!(csv[0], csv[2]);
    let text = String::from_utf8(csv[0].clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "h,err,rate");
    assert_eq!(lines.len(), 3);
    let vtk = fs::read_to_string(tmp.path().join("a/error_level0.vtk")).unwrap();
    assert!(vtk.contains("SCALARS err_p double 1"));
}

#[test]
fn single_level_convergence_has_no_rate() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "c.json", Some((1.0, 1.0)), &[8], "");
    let o = run(&["convergence", "--config", s(&cfg), "--out", s(tmp.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("convergence.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].ends_with(','), "{}", rows[1]);
}

#[test]
fn exit_codes_by_failure_class() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");

    let broken = tmp.path().join("broken.json");
    fs::write(&broken, "{\n  \"schema_version\": 1,\n  \"levels\": [\n}\n").unwrap();
    let o = run(&["mesh", "--config", s(&broken), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));

    let cfg = config(tmp.path(), "c.json", Some((1.0, 1.0)), &[8], "");
    let o = run(&["solve", "--config", s(&cfg), "--out", s(&out), "--level", "3"]);
    assert_eq!(o.status.code(), Some(2));

    // Inclusion tips are not lattice vertices at N = 6.
    let cfg = config(tmp.path(), "m.json", Some((1.0, 1.0)), &[6], "");
    let o = run(&["mesh", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3));

    // Zero data: the reference pressure has no range to normalize by.
    let cfg = config(tmp.path(), "z.json", Some((0.0, 0.0)), &[8], "");
    let o = run(&["convergence", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(5));

    // A file where the output directory should be.
    let blocker = tmp.path().join("blocker");
    fs::write(&blocker, "").unwrap();
    let cfg = config(tmp.path(), "o.json", Some((1.0, 1.0)), &[8], "");
    let o = run(&["mesh", "--config", s(&cfg), "--out", s(&blocker.join("sub"))]);
    assert_eq!(o.status.code(), Some(6));
}

#[test]
fn failed_level_keeps_earlier_results() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "c.json", Some((1.0, -1.0)), &[4, 6, 8], "");
    let o = run(&["convergence", "--config", s(&cfg), "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(3));
    let partial = fs::read_to_string(tmp.path().join("levels_partial.csv")).unwrap();
    assert_eq!(partial.lines().count(), 2, "{partial}");
    assert!(tmp.path().join("solution_level0.vtk").exists());
    assert!(!tmp.path().join("convergence.csv").exists());
}

#[test]
fn presets_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets");
    for name in ["continuous.json", "discontinuous.json"] {
        let cfg = darcy_vem::study::RunConfig::from_path(&root.join(name)).unwrap();
        assert_eq!(cfg.levels.len(), 4);
        assert!(cfg.reference.is_some());
    }
}
