mod common;

use common::{assert_valid, bin, fixture, run, Schemas};
use serde_json::{json, Value};

fn fx(name: &str) -> String {
    fixture(name).display().to_string()
}

#[test]
fn certify_quadric_conic_at_infinity_passes() {
    let (code, rep, _) = run(&["certify", "--system", &fx("quadric.json"), "--check", "conic-at-infinity"]);
    assert_eq!(code, 0);
    assert_eq!(rep["status"], "pass");
    let cert = &rep["result"];
    assert_eq!(cert["kind"], "certificate");
    assert!(cert["margin"].as_f64().unwrap() >= 1e-6);
    let subs: Vec<&str> = cert["sub"].as_array().unwrap().iter().map(|c| c["check"].as_str().unwrap()).collect();
    assert_eq!(subs, ["smooth", "link_smooth", "transversality_at_infinity"]);
    assert!(cert["notes"].as_array().unwrap().iter().any(|n| n.as_str().unwrap().contains("irreducibility")));
    assert_valid(&Schemas::load(), "report.schema.json", &rep);
}

#[test]
fn certify_exit_codes_follow_status() {
    let (code, rep, _) = run(&["certify", "--system", &fx("umbrella.json"), "--check", "smooth", "--radius", "1", "--starts", "64"]);
    assert_eq!(code, 1);
    assert_eq!(rep["status"], "fail");
    let w = &rep["result"]["witness"]["point"];
    assert!(w[0].as_f64().unwrap().abs() < 1e-6 && w[1].as_f64().unwrap().abs() < 1e-6);
    let (code, rep, _) = run(&["certify", "--system", &fx("paraboloid.json"), "--check", "transversality-at-infinity", "--starts", "64"]);
    assert_eq!((code, rep["status"].as_str()), (1, Some("fail")));
}

#[test]
fn lne_parabola_is_divergent() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("ratios.csv");
    let (code, rep, _) = run(&[
        "lne",
        "--system",
        &fx("parabola.json"),
        "--radii",
        "4,8,16",
        "--cylinder",
        "0",
        "--csv",
        table.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(rep["result"]["fit"]["trend"], "divergent");
    let text = std::fs::read_to_string(&table).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "radius,ratio");
    assert_eq!(rows.len(), 4);
    assert!(rows[3].starts_with("16,"));
    assert_valid(&Schemas::load(), "report.schema.json", &rep);
}

#[test]
fn lne_parabola_ball_cut_grows_like_sqrt_radius() {
    // |x| ≤ R on the parabola only reaches |x| ≈ √R, so the slope sits just under 1/2
    let (code, rep, _) = run(&["lne", "--system", &fx("parabola.json"), "--radii", "4,8,16", "--count", "1000"]);
    let fit = &rep["result"]["fit"];
    let slope = fit["slope"].as_f64().unwrap();
    assert!(slope > 0.4 && slope < 0.5, "{fit}");
    assert_eq!(fit["trend"], "inconclusive");
    assert_eq!(code, 2);
}

#[test]
fn maps_inversion_is_an_involution() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = dir.path().join("cloud.csv");
    std::fs::write(&cloud, "x0,x1,x2\n1,2,3\n-0.5,0.25,4\n").unwrap();
    let once = dir.path().join("once.csv");
    let twice = dir.path().join("twice.json");
    let (code, rep, _) = run(&["maps", "--apply", "inversion", "--in", cloud.to_str().unwrap(), "--cloud-out", once.to_str().unwrap()]);
    assert_eq!(code, 0);
    let p = &rep["result"]["cloud"]["points"][0];
    assert!((p[0].as_f64().unwrap() - 1.0 / 14.0).abs() < 1e-15);
    let (code, _, _) = run(&["maps", "--apply", "inversion", "--in", once.to_str().unwrap(), "--cloud-out", twice.to_str().unwrap()]);
    assert_eq!(code, 0);
    let back: Value = serde_json::from_str(&std::fs::read_to_string(&twice).unwrap()).unwrap();
    let want = [[1.0, 2.0, 3.0], [-0.5, 0.25, 4.0]];
    for (row, w) in back["points"].as_array().unwrap().iter().zip(want) {
        for (a, b) in row.as_array().unwrap().iter().zip(w) {
            assert!((a.as_f64().unwrap() - b).abs() < 1e-14);
        }
    }
    assert_valid(&Schemas::load(), "cloud.schema.json", &back);
}

#[test]
fn numerical_failure_exits_2_with_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = dir.path().join("cloud.csv");
    std::fs::write(&cloud, "x0,x1\n1,0\n0,0\n2,0\n").unwrap();
    let (code, rep, out) = run(&["maps", "--apply", "inversion", "--in", cloud.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert_eq!(rep["status"], "inconclusive");
    assert!(rep["error"].as_str().unwrap().starts_with("point 1"));
    assert_eq!(rep["result"]["cloud"]["points"], json!([[1.0, 0.0]]));
    assert!(String::from_utf8_lossy(&out.stderr).contains("point 1"));
    assert_valid(&Schemas::load(), "report.schema.json", &rep);
}

#[test]
fn malformed_input_exits_64() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"format_version\": 1, \"seed\": 0}").unwrap();
    let cases: Vec<Vec<String>> = vec![
        vec!["--config".into(), bad.display().to_string()],
        vec!["--config".into(), dir.path().join("missing.json").display().to_string()],
        vec!["certify".into(), "--system".into(), fx("quadric.json"), "--check".into(), "nonsense".into()],
        vec!["certify".into(), "--system".into(), fx("quadric.json"), "--check".into(), "affine-trace".into()],
        vec!["lne".into(), "--system".into(), fx("parabola.json"), "--radii".into(), "8,4".into()],
        vec!["sample".into(), "--system".into(), fx("circle.json"), "--center".into(), "0,0,0".into()],
        vec!["sample".into(), "--expr".into(), "x^2 +".into(), "--vars".into(), "2".into()],
        vec!["frobnicate".into()],
        vec![],
    ];
    for args in cases {
        let out = bin().args(&args).output().unwrap();
        assert_eq!(out.status.code(), Some(64), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
    let mut wrong_version: Value = serde_json::from_str(&std::fs::read_to_string(fixture("circle.json")).unwrap()).unwrap();
    wrong_version["format_version"] = json!(7);
    let sys = dir.path().join("v7.json");
    std::fs::write(&sys, wrong_version.to_string()).unwrap();
    let out = bin().args(["sample", "--system", sys.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(64));
    let out = bin().args(["--workers", "0", "demo"]).output().unwrap();
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn config_rerun_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let cloud = dir.path().join("cloud.csv");
    let status = bin()
        .args(["--seed", "17", "--out", report.to_str().unwrap()])
        .args(["sample", "--system", &fx("circle.json"), "--count", "120", "--radius", "2"])
        .args(["--cloud-out", cloud.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let first = std::fs::read(&report).unwrap();
    let first_cloud = std::fs::read(&cloud).unwrap();
    let status = bin().args(["--config", report.to_str().unwrap()]).status().unwrap();
    assert_eq!(status.code(), Some(0));
    assert_eq!(std::fs::read(&report).unwrap(), first);
    assert_eq!(std::fs::read(&cloud).unwrap(), first_cloud);
    let rep: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(rep["config"]["seed"], 17);
    assert_eq!(rep["result"]["cloud"]["header"]["seed"], 17);
    assert_valid(&Schemas::load(), "report.schema.json", &rep);
    assert_valid(&Schemas::load(), "config.schema.json", &rep["config"]);
    // the header line of the CSV records hash, seed and tolerances
    let text = String::from_utf8(first_cloud).unwrap();
    for key in ["# format_version=1", "# system_hash=", "# seed=17", "# residual_tol=", "# shell_tol="] {
        assert!(text.contains(key), "{key}");
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let args = ["sample", "--system", &fx("circle.json"), "--count", "150", "--radius", "2"];
    let one = bin().args(["--workers", "1"]).args(args).output().unwrap();
    let env = bin().env("LNECERT_WORKERS", "3").args(args).output().unwrap();
    let default = bin().args(args).output().unwrap();
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, env.stdout);
    assert_eq!(one.stdout, default.stdout);
}

#[test]
fn collar_perturbed_cone_report() {
    let (code, rep, _) = run(&[
        "collar", "--expr", "x^2 + y^2 - z^2 + z^4", "--vars", "3", "--r0", "0.5", "--radii", "0.4,0.1", "--link-count", "16",
    ]);
    assert_eq!(code, 0);
    let r = &rep["result"];
    assert_eq!(r["r0"], 0.5);
    assert!(r["radius_error"].as_f64().unwrap() <= 1e-8);
    assert!(r["max_residual"].as_f64().unwrap() <= 1e-10);
    assert_eq!(r["flowlines"].as_array().unwrap().len(), 32);
    assert_valid(&Schemas::load(), "report.schema.json", &rep);
}

#[test]
fn demo_writes_valid_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("demo");
    let (code, rep, _) = run(&["demo", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let schemas = Schemas::load();
    assert_valid(&schemas, "report.schema.json", &rep);
    let cases = rep["result"]["cases"].as_array().unwrap();
    let names: Vec<&str> = cases.iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["parabola", "circle", "cone", "quadric-at-infinity", "icis-quadric"]);
    for case in cases {
        assert_eq!(case["ok"], true, "{}", case["name"]);
        let path = out.join(format!("{}.json", case["name"].as_str().unwrap()));
        let saved: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(saved, case["report"]);
        assert_valid(&schemas, "report.schema.json", &saved);
    }
}

#[test]
fn schemas_reject_wrong_documents() {
    let schemas = Schemas::load();
    assert_eq!(schemas.ids().len(), 5);
    let sys: Value = serde_json::from_str(&std::fs::read_to_string(fixture("quadric.json")).unwrap()).unwrap();
    assert_valid(&schemas, "system.schema.json", &sys);
    let mut bad = sys.clone();
    bad["polys"][0]["terms"][0]["re"] = json!("one half");
    assert!(!schemas.validate("system.schema.json", &bad).is_empty());
    let mut bad = sys.clone();
    bad["polys"][0]["field"] = json!("quaternion");
    assert!(!schemas.validate("system.schema.json", &bad).is_empty());
    let mut bad = sys;
    bad["extra"] = json!(1);
    assert!(!schemas.validate("system.schema.json", &bad).is_empty());
    let cfg = json!({"format_version": 1, "seed": 0, "job": {"subcommand": "demo", "radii": [1]}});
    assert!(!schemas.validate("config.schema.json", &cfg).is_empty());
    let cfg = json!({"format_version": 1, "seed": 0, "job": {"subcommand": "demo"}});
    assert_valid(&schemas, "config.schema.json", &cfg);
}

#[test]
fn help_and_version_exit_zero() {
    for flag in ["--help", "--version"] {
        let out = bin().arg(flag).output().unwrap();
        assert_eq!(out.status.code(), Some(0));
    }
    let out = bin().args(["certify", "--help"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("conic-at-infinity") && text.contains("--workers"));
    assert!(text.contains("LNECERT_WORKERS"));
}
