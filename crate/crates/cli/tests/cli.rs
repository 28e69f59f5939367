use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn singmap(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_singmap")).args(args).output().expect("binary runs").status.code().unwrap()
}

fn results(dir: &Path) -> Value {
    let text = std::fs::read_to_string(dir.join("report.json")).unwrap();
    serde_json::from_str::<Value>(&text).unwrap()["results"].clone()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

fn path(d: &Path) -> &str {
    d.to_str().unwrap()
}

#[test]
fn residual_orders_for_closed_forms() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, args) in [
        ("kerr", vec!["--source", "kerr", "--m", "1"]),
        ("tangent", vec!["--source", "tangent", "--a", "1", "--b", "0.5"]),
    ] {
        let out = tmp.path().join(name);
        let mut a = vec!["residual", "--out", path(&out)];
        a.extend(args);
        assert_eq!(singmap(&a), 0);
        let order = f(&results(&out)["order"]);
        assert!((1.8..=2.2).contains(&order), "{name}: {order}");
    }
}

#[test]
fn constant_state_residual_is_one_and_exits_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("c");
    assert_eq!(singmap(&["residual", "--source", "constant", "--out", path(&out)]), 5);
    for row in results(&out)["table"].as_array().unwrap() {
        assert!((f(&row["residual_phi"]) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn twist_spectrum_column() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("s");
    assert_eq!(singmap(&["spectrum", "--twist", "-k", "5", "--out", path(&out)]), 0);
    let r = results(&out);
    for (x, e) in r["eigenvalues"].as_array().unwrap().iter().zip([4.0, 10.0, 18.0, 28.0, 40.0]) {
        assert!((f(x) - e).abs() < 5e-3 * e);
    }
    let csv = std::fs::read_to_string(out.join("fields/eigenfunctions.csv")).unwrap();
    assert!(csv.starts_with("theta,mode_1,"));
}

#[test]
fn tangent_fit_on_kerr() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("t");
    let args = ["tangent-fit", "--source", "kerr", "--m", "1", "--t-min", "2", "--t-max", "10", "--n-t", "81", "--out"];
    let mut a = args.to_vec();
    a.push(path(&out));
    assert_eq!(singmap(&a), 0);
    let p = &results(&out)["fit"]["params"];
    assert!((f(&p["a"]) - 2.0).abs() < 1e-3 && f(&p["b"]).abs() < 1e-3);
}

#[test]
fn nhg_on_tangent_reports_the_defect_difference() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("n");
    let a = [
        "nhg", "--source", "tangent", "--a", "1", "--b", "0.6", "--t-min", "0", "--t-max", "6", "--n-t", "49",
        "--n-theta", "512", "--out", path(&out),
    ];
    assert_eq!(singmap(&a), 0);
    let d = f(&results(&out)["defects"]["difference"]);
    assert!((d - 4f64.ln()).abs() < 1e-3, "{d}");
}

#[test]
fn solve_pipes_into_tangent_fit_and_verify() {
    let tmp = tempfile::tempdir().unwrap();
    let solve = tmp.path().join("solve");
    assert_eq!(singmap(&["solve", "--source", "kerr", "--out", path(&solve)]), 0);
    let state = solve.join("state.json");
    let fit = tmp.path().join("fit");
    assert_eq!(singmap(&["tangent-fit", "--input", path(&state), "--out", path(&fit)]), 0);
    assert!((f(&results(&fit)["fit"]["params"]["a"]) - 2.0).abs() < 1e-9);
    assert_eq!(singmap(&["verify", "--out", path(&fit)]), 0);
    assert_eq!(singmap(&["verify", "--out", path(&solve)]), 0);
    // tampering is detected
    std::fs::write(solve.join("fields/phi.csv"), "t,theta,value\n").unwrap();
    assert_eq!(singmap(&["verify", "--out", path(&solve)]), 5);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    let out = tmp.path().join("r");
    for _ in 0..2 {
        let a = ["solve", "--source", "tangent", "--a", "1", "--b", "0.2", "--perturb", "0.05", "--seed", "7",
            "--n-theta", "24", "--n-t", "17", "--out", path(&out)];
        assert_eq!(singmap(&a), 0);
        bytes.push((std::fs::read(out.join("report.json")).unwrap(), std::fs::read(out.join("fields/phi.csv")).unwrap()));
    }
    assert!(bytes[0] == bytes[1]);
    let other = tmp.path().join("other");
    let a = ["solve", "--source", "tangent", "--a", "1", "--b", "0.2", "--perturb", "0.05", "--seed", "8",
        "--n-theta", "24", "--n-t", "17", "--out", path(&other)];
    assert_eq!(singmap(&a), 0);
    assert!(std::fs::read(other.join("fields/phi.csv")).unwrap() != bytes[0].1);
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "[source]\nkind = \"tangent\"\na = 1.0\nb = 0.5\n[spectrum]\nk = 2\nn_theta = 128\n").unwrap();
    let out = tmp.path().join("o");
    assert_eq!(singmap(&["spectrum", "--config", path(&cfg), "-k", "3", "--out", path(&out)]), 0);
    let r = results(&out);
    assert_eq!(r["eigenvalues"].as_array().unwrap().len(), 3);
    assert_eq!(f(&r["params"]["b"]), 0.5);
    let echoed = &serde_json::from_str::<Value>(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
        ["manifest"]["config"];
    assert_eq!(echoed["spectrum"]["k"], 3);
}

#[test]
fn exit_codes_for_bad_input() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    assert_eq!(singmap(&["spectrum", "--source", "tangent", "--b", "1.5", "--out", path(&out)]), 2);
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "nonsense = 1\n").unwrap();
    assert_eq!(singmap(&["residual", "--config", path(&cfg), "--out", path(&out)]), 2);
    // hypotheses of the fits: enough e-folds, the right renormalizer
    let a = ["tangent-fit", "--t-min", "2", "--t-max", "3", "--out", path(&out)];
    assert_eq!(singmap(&a), 5);
    assert_eq!(singmap(&["infinity-fit", "--out", path(&out)]), 5);
    // a perfect fit demanded of a state that is not a tangent map
    let a = ["tangent-fit", "--source", "kerr", "--t-min", "0", "--t-max", "4", "--min-r2", "1.5", "--out", path(&out)];
    assert_eq!(singmap(&a), 4);
    let status = Command::new(env!("CARGO_BIN_EXE_singmap"))
        .args(["spectrum", "--twist", "-k", "2", "--n-theta", "64", "--out", path(&out)])
        .env("SINGMAP_THREADS", "zero")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}
