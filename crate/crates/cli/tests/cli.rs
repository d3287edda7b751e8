use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const FIXTURE_UNIT: &str = "-315+126*sqrt(5)-44*sqrt(41)+22*sqrt(205)";

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quadtower")).args(args).output().expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = run(args);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn error_code(out: &Output) -> String {
    let v: Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    v["error"]["code"].as_str().unwrap().to_string()
}

fn build_fixture(dir: &Path) -> (String, String) {
    let tower = dir.join("tower.json").to_string_lossy().into_owned();
    let domain = dir.join("domain.json").to_string_lossy().into_owned();
    let unit = format!("--unit={FIXTURE_UNIT}");
    assert_eq!(run(&["tower", "build", "--primes", "5,41", &unit, "-o", &tower]).status.code(), Some(0));
    assert_eq!(run(&["domain", "build", "--tower", &tower, "-o", &domain]).status.code(), Some(0));
    (tower, domain)
}

#[test]
fn unramified_certificate() {
    let v = ok_json(&["unramified", "check", "--field", r#"{"level1":[-5]}"#, "--w", "-1", "--beta", "sqrt(-5)"]);
    assert_eq!(v["valid"], true);
    assert_eq!(v["extension"]["relative_discriminant_trivial"], true);
    assert_eq!(v["extension"]["discriminant"], "400");
}

#[test]
fn invalid_certificate_is_not_an_error() {
    let v = ok_json(&["unramified", "check", "--field", r#"{"level1":[]}"#, "--w", "-1", "--beta", "1"]);
    assert_eq!(v["valid"], false);
}

#[test]
fn witness_search_without_beta() {
    let v = ok_json(&["unramified", "check", "--field", r#"{"level1":[-15]}"#, "--w", "5"]);
    assert_eq!(v["valid"], true);
}

#[test]
fn cyclo_scan_csv() {
    let out = run(&["cyclo", "scan", "--max-m", "100", "--epsilon", "0.1", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "m,phi_m,log_delta,threshold,verdict,exceptional_flag");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 100);
    let failing: Vec<u64> =
        rows.iter().filter(|r| r.contains(",fails,")).map(|r| r.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(failing, [3, 5, 6, 10, 12, 15, 21, 30, 35, 42, 45, 60, 70, 90]);
}

#[test]
fn tower_domain_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (_, domain) = build_fixture(dir.path());
    let out = run(&["domain", "report", "--domain", &domain, "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "8");
    assert_eq!(row[3], "1.448041718188");
    assert_eq!(row[4], "1.412189714616");
    assert_eq!(row[5], "41");
    assert_eq!(row[6], "1.265480931117");
    let v = ok_json(&["domain", "report", "--domain", &domain]);
    assert_eq!(v["index"]["by_norms"], "41");
    assert_eq!(v["index"]["by_determinant"], "41");
    assert_eq!(v["covolume_squared"]["equal"], true);
}

#[test]
fn reduce_point_in_box_is_fixed() {
    let dir = tempfile::tempdir().unwrap();
    let (_, domain) = build_fixture(dir.path());
    let v = ok_json(&["domain", "reduce", "--domain", &domain, "--point", "1/3+1/5*sqrt(41)"]);
    assert_eq!(v["in_box"], true);
    assert_eq!(v["residue"], v["input"]);
    assert_eq!(v["shift"], "0");
    for row in v["shift_coordinates"].as_array().unwrap() {
        assert!(row.as_array().unwrap().iter().all(|c| c == "0"));
    }
}

#[test]
fn reduce_moves_point_into_box() {
    let dir = tempfile::tempdir().unwrap();
    let (_, domain) = build_fixture(dir.path());
    let v = ok_json(&["domain", "reduce", "--domain", &domain, "--point", "100/3+7*sqrt(5)*q(0)"]);
    assert_eq!(v["in_box"], true);
    assert_ne!(v["shift"], "0");
}

#[test]
fn search_units_feed_tower_build() {
    let dir = tempfile::tempdir().unwrap();
    let units = dir.path().join("units.json").to_string_lossy().into_owned();
    let out = run(&["tower", "search-units", "--primes", "5,41", "-o", &units]);
    assert_eq!(out.status.code(), Some(0));
    let v = ok_json(&["tower", "build", "--primes", "5,41", "--units-from", &units]);
    assert_eq!(v["report"]["degree_n"], 8);
}

#[test]
fn negative_control_has_no_units() {
    let v = ok_json(&["tower", "search-units", "--primes", "5"]);
    assert_eq!(v["units"].as_array().unwrap().len(), 0);
}

#[test]
fn voronoi_field_report() {
    let v = ok_json(&["voronoi", "field", "--field", "Q(zeta_3)"]);
    assert_eq!(v["discriminant"], "3");
    assert_eq!(v["min_norm"]["equality"], true);
    assert_eq!(v["volume"]["holds"], true);
}

#[test]
fn lattice_subcommands() {
    let lat = r#"{"gram":[[2,1],[1,2]]}"#;
    let v = ok_json(&["lattice", "svp", "--lattice", lat]);
    assert_eq!(v["norm_sq"], "2/1");
    let v = ok_json(&["lattice", "cover", "--lattice", lat]);
    assert_eq!(v["sq_upper"], "2/3");
    let v = ok_json(&["lattice", "cvp", "--lattice", lat, "--target", "1/2,1/3"]);
    assert_eq!(v["dist_sq"], "7/18");
    let v = ok_json(&["lattice", "lll", "--lattice", r#"{"basis":[[1,1,1],[-1,0,2],[3,5,6]]}"#]);
    assert_eq!(v["transform"].as_array().unwrap().len(), 3);
    let v = ok_json(&["lattice", "svp", "--norm", "linf", "--lattice", r#"{"basis":[[1,1,1],[-1,0,2],[3,5,6]]}"#]);
    assert_eq!(v["coeffs"].as_array().unwrap().len(), 3);
}

#[test]
fn exit_codes() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(64));
    assert_eq!(error_code(&out), "usage");

    let out = run(&["domain", "report", "--domain", "{not json"]);
    assert_eq!(out.status.code(), Some(65));
    assert_eq!(error_code(&out), "malformed_input");

    let out = run(&["domain", "report", "--domain", "/nonexistent/domain.json"]);
    assert_eq!(out.status.code(), Some(65));

    let out = run(&["tower", "build", "--primes", "5,5"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["--vertex-cap", "0", "cyclo", "scan", "--max-m", "10", "--epsilon", "0.1"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["tower", "search-units", "--primes", "5,41", "--max-candidates", "10"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_code(&out), "budget_exhausted");
}

#[test]
fn outputs_are_byte_stable() {
    let a = run(&["cyclo", "scan", "--max-m", "2000", "--epsilon", "1/10", "--format", "csv", "--workers", "1"]);
    let b = run(&["cyclo", "scan", "--max-m", "2000", "--epsilon", "1/10", "--format", "csv"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);

    let dir = tempfile::tempdir().unwrap();
    let (tower, domain) = build_fixture(dir.path());
    let again = dir.path().join("again.json");
    let again = again.to_string_lossy();
    assert_eq!(run(&["domain", "build", "--tower", &tower, "-o", &again]).status.code(), Some(0));
    assert_eq!(std::fs::read(&domain).unwrap(), std::fs::read(&*again).unwrap());
}
