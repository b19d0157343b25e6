use std::f64::consts::{FRAC_PI_4, PI};
use std::path::PathBuf;
use std::process::{Command, Output};

use billiard_counting::cli::{parse_polygon_file, AverageReport, BridgeReport, Envelope, VerifyReport};
use billiard_counting::counting::{position_counting_flow, CountingSeries};
use billiard_counting::geom::{Model, Point};
use billiard_counting::unfold::SplitOptions;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn bilcount(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bilcount")).args(args).env_remove("BILCOUNT_WORKERS").output().unwrap()
}

fn run_json<T: serde::de::DeserializeOwned>(args: &[&str]) -> (i32, Envelope<T>) {
    let out = bilcount(args);
    let env = serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)));
    (out.status.code().unwrap(), env)
}

fn path(name: &str) -> String {
    fixture(name).to_str().unwrap().to_string()
}

#[test]
fn bundled_square_has_four_planar_corners() {
    let (p, hash) = parse_polygon_file(&fixture("square.json")).unwrap();
    assert_eq!(p.model(), Model::Euclidean);
    assert_eq!(p.corner_count(), 4);
    assert_eq!(hash.len(), 64);
}

#[test]
fn bundled_octant_satisfies_angle_area_identity() {
    let (p, _) = parse_polygon_file(&fixture("octant.json")).unwrap();
    assert_eq!(p.model(), Model::Spherical);
    assert!(p.angle_area_identity().unwrap().residual < 1e-8);
}

#[test]
fn bundled_hyperbolic_triangle_has_quarter_turn_angles() {
    let (p, _) = parse_polygon_file(&fixture("hyperbolic_triangle.json")).unwrap();
    assert_eq!(p.model(), Model::Hyperbolic);
    for &a in p.angles() {
        assert!((a - FRAC_PI_4).abs() < 1e-12, "{a}");
    }
}

#[test]
fn bundled_obstacle_square_has_one_obstacle() {
    let (p, _) = parse_polygon_file(&fixture("square_with_obstacle.json")).unwrap();
    assert_eq!(p.obstacle_count(), 1);
    assert_eq!(p.corner_count(), 8);
}

#[test]
fn malformed_json_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"model\": \"euclidean\", \"loops\": [[[0,0],[1,0]").unwrap();
    let out = bilcount(&["count-position", "--l", "1", "--z", "0.5,0.5", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));

    std::fs::write(&bad, "{\"model\": \"euclidean\", \"loops\": [], \"extra\": 1}").unwrap();
    let out = bilcount(&["count-position", "--l", "1", "--z", "0.5,0.5", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn invalid_polygon_missing_file_and_bad_usage() {
    let dir = tempfile::tempdir().unwrap();
    let bowtie = dir.path().join("bowtie.json");
    std::fs::write(&bowtie, "{\"model\": \"euclidean\", \"loops\": [[[0,0],[1,1],[1,0],[0,1]]]}").unwrap();
    let out = bilcount(&["count-position", "--l", "1", "--z", "0.5,0.2", bowtie.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("loop 0"));

    let missing = dir.path().join("missing.json");
    let out = bilcount(&["count-position", "--l", "1", "--z", "0.5,0.5", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));

    let out = bilcount(&["count-position", "--l", "1", &path("square.json")]);
    assert_eq!(out.status.code(), Some(2));
    let out = bilcount(&["average", "position", "--samples", "10", &path("square.json")]);
    assert_eq!(out.status.code(), Some(2));
    let out = bilcount(&["average", "position", "--l", "1", "--seed", "1", "--samples", "10", &path("square.json")]);
    assert_eq!(out.status.code(), Some(0));
    let out = bilcount(&["count-position", "--l", "1", "--z", "1.5,0.5", &path("square.json")]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn exceptional_direction_exit_code() {
    let out = bilcount(&["count-direction", "--theta", "0", "--n", "3", &path("square.json")]);
    assert_eq!(out.status.code(), Some(7));
}

#[test]
fn position_average_on_square_matches_four_pi() {
    let (code, env): (_, Envelope<AverageReport>) =
        run_json(&["average", "position", "--l", "2", "--samples", "2000", "--seed", "7", &path("square.json")]);
    assert_eq!(code, 0);
    assert_eq!(env.seed, Some(7));
    assert!(env.complete);
    assert_eq!(env.budget.samples, Some(2000));
    let r = env.result.unwrap();
    assert_eq!(r.closed_form.normalized, 4.0 * PI);
    assert!((r.estimate.mean - 4.0 * PI).abs() <= 3.0 * r.estimate.std_error);
}

#[test]
fn bridge_at_square_centre() {
    let (code, env): (_, Envelope<BridgeReport>) =
        run_json(&["bridge", "--l", "3", "--z", "0.5,0.5", &path("square.json")]);
    assert_eq!(code, 0);
    let r = env.result.unwrap();
    assert_eq!(r.offset, 0);
    assert!((r.threshold - 0.5f64.sqrt()).abs() < 1e-9);
}

#[test]
fn verify_square_passes() {
    let out = bilcount(&["verify", &path("square.json")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let env: Envelope<VerifyReport> = serde_json::from_slice(&out.stdout).unwrap();
    let r = env.result.unwrap();
    assert!(r.passed);
    assert_eq!(r.outcomes.len(), 12);
    assert!(env.polygon_sha256.is_some());
}

#[test]
fn emitted_series_round_trips_exactly() {
    let z = format!("0.3,0.2,{}", (1.0f64 + 0.09 + 0.04).sqrt());
    let (code, env): (_, Envelope<CountingSeries>) =
        run_json(&["count-position", "--l", "4", "--z", &z, &path("hyperbolic_triangle.json")]);
    assert_eq!(code, 0);
    assert!(env.result.as_ref().unwrap().len() > 10);
    let text = serde_json::to_string(&env).unwrap();
    let back: Envelope<CountingSeries> = serde_json::from_str(&text).unwrap();
    assert_eq!(back, env);

    let (code, env): (_, Envelope<CountingSeries>) =
        run_json(&["count-position", "--l", "3", "--z", "0.3,0.2", &path("square.json")]);
    assert_eq!(code, 0);
    let (sq, _) = parse_polygon_file(&fixture("square.json")).unwrap();
    let direct = position_counting_flow(&sq, &Point::euclidean(0.3, 0.2), 3.0, SplitOptions::default()).unwrap();
    assert_eq!(env.result.unwrap(), direct);
}

#[test]
fn identical_configs_give_identical_bytes() {
    let args = ["average", "direction", "--n", "10", "--samples", "50", "--seed", "3", &path("square.json")];
    let a = bilcount(&[&["--workers", "1"], &args[..]].concat());
    let b = bilcount(&[&["--workers", "4"], &args[..]].concat());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = Command::new(env!("CARGO_BIN_EXE_bilcount")).args(args).env("BILCOUNT_WORKERS", "2").output().unwrap();
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn tile_cap_writes_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("partial.json");
    let out = bilcount(&[
        "--max-tiles",
        "50",
        "count-position",
        "--l",
        "5",
        "--z",
        "0.3,0.2",
        "-o",
        out_path.to_str().unwrap(),
        &path("square.json"),
    ]);
    assert_eq!(out.status.code(), Some(6));
    let env: Envelope<CountingSeries> = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert!(!env.complete);
    assert!(!env.result.unwrap().complete);

    let (code, env): (_, Envelope<AverageReport>) = run_json(&[
        "--max-tiles",
        "20",
        "average",
        "position",
        "--l",
        "5",
        "--samples",
        "4",
        "--seed",
        "1",
        &path("square.json"),
    ]);
    assert_eq!(code, 6);
    assert!(!env.complete);
    assert!(env.result.is_none());
}

#[test]
fn csv_output_carries_metadata() {
    let out = bilcount(&["--format", "csv", "complexity-position", "--l", "2", "--z", "0.3,0.2", &path("square.json")]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# tool=bilcount");
    assert!(lines.iter().any(|l| l.starts_with("# polygon_sha256=") && l.len() == 17 + 64));
    assert!(lines.contains(&"# budget_length=2"));
    assert!(lines.contains(&"# complete=true"));
    let body: Vec<&str> = lines.iter().copied().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "abscissa,value");
    assert_eq!(body[1], "0,1");
}

#[test]
fn boundary_and_tail_commands_run() {
    let out = bilcount(&["count-boundary", "--side", "0", "--at", "0.3", "--n", "3", &path("square.json")]);
    assert_eq!(out.status.code(), Some(0));
    let out = bilcount(&["count-boundary", "--global", "0", "--n", "3", &path("square.json")]);
    assert_eq!(out.status.code(), Some(5));
    let out = bilcount(&[
        "tail-check", "direction", "--n", "30", "--threshold", "10", "--samples", "20", "--seed", "5", &path("square.json"),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = bilcount(&[
        "average", "position-map", "--corner", "0", "--n", "2", "--samples", "50", "--seed", "5", &path("square.json"),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}
