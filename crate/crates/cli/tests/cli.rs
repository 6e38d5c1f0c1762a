use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hardy(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hardy-lt")).args(args).current_dir(cwd).output().expect("spawn hardy-lt")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn check_status<'a>(report: &'a Value, name: &str) -> &'a str {
    report["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap()["status"].as_str().unwrap()
}

#[test]
fn optimize_matches_ground_state() {
    let dir = tempfile::tempdir().unwrap();
    let o = hardy(&["optimize", "--out", "run"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = hardy(&["oracle", "--out", "gs"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let m = json(&dir.path().join("run/manifest.json"));
    assert_eq!(m["command"], "optimize");
    assert_eq!(m["summary"]["converged"], true);
    let got = m["summary"]["objective"].as_f64().unwrap();
    let want = json(&dir.path().join("gs/ground_report.json"))["C1"].as_f64().unwrap();
    assert!((got - want).abs() / want < 1e-3, "{got} vs {want}");

    let names: Vec<&str> = m["files"].as_array().unwrap().iter().map(|f| f["name"].as_str().unwrap()).collect();
    for f in ["potential.csv", "levels.json", "trace.csv"] {
        assert!(names.contains(&f), "{names:?}");
    }
}

#[test]
fn oracle_identities() {
    let dir = tempfile::tempdir().unwrap();
    let o = hardy(&["oracle", "--out", "gs"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(&dir.path().join("gs/ground_report.json"));
    assert!((r["lambda1_check"].as_f64().unwrap() + 1.0).abs() <= 1e-6);
    let c1 = r["C1"].as_f64().unwrap();
    let back = r["C1_from_C_HGN"].as_f64().unwrap();
    assert!((c1 - back).abs() / c1 <= 1e-12);
    assert_eq!(r["passed"], true);
    let rows = read_csv(&dir.path().join("gs/groundstate.csv"));
    assert!(rows.len() > 1000);
}

#[test]
fn oracle_rejects_higher_rank() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&hardy(&["oracle", "--N", "2"], dir.path())), 64);
}

#[test]
fn low_dimension_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = hardy(&["optimize", "--d", "2"], dir.path());
    assert_eq!(code(&o), 64);
    assert!(stderr(&o).contains("d must be ≥ 3"), "{}", stderr(&o));
}

#[test]
fn malformed_and_unknown_config() {
    let dir = tempfile::tempdir().unwrap();
    for (text, why) in [("d = 3\nbogus = 1\n", "unknown key"), ("d 3\n", "no ="), ("d = 3\nd = 4\n", "duplicate"), ("s = x\n", "number")] {
        std::fs::write(dir.path().join("bad.conf"), text).unwrap();
        let o = hardy(&["optimize", "--config", "bad.conf"], dir.path());
        assert_eq!(code(&o), 64, "{why}: {}", stderr(&o));
    }
    let o = hardy(&["optimize", "--config", "absent.conf"], dir.path());
    assert_eq!(code(&o), 66);
    assert_eq!(code(&hardy(&["optimize", "--no-such-flag"], dir.path())), 64);
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.conf"), "# flat coupling\nc = 0\nmax-iters = 400\nout = from_file\n").unwrap();
    let o = hardy(&["optimize", "--config", "run.conf", "--N", "2"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = json(&dir.path().join("from_file/manifest.json"));
    assert_eq!(m["config"]["c"][0], 0.0);
    assert_eq!(m["config"]["N"][0], 2);
    assert_eq!(m["config"]["max_iters"], 400);
    assert_eq!(m["inputs"].as_object().unwrap().len(), 1);
}

#[test]
fn reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = hardy(&["optimize", "--N", "2", "--seed", "7", "--jitter", "0.05", "--out", out], dir.path());
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for f in ["levels.json", "potential.csv", "trace.csv"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn verify_fresh_runs() {
    let dir = tempfile::tempdir().unwrap();
    for (rank, out) in [("1", "v1"), ("2", "v2")] {
        let o = hardy(&["verify", "--N", rank, "--out", out], dir.path());
        assert_eq!(code(&o), 0, "N = {rank}: {}\n{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
        let r = json(&dir.path().join(out).join("verify_report.json"));
        assert_eq!(r["passed"], true);
        for name in ["normalization", "hardy_positivity", "scaling_invariance", "dense_oracle", "fixed_point"] {
            assert_eq!(check_status(&r, name), "pass", "N = {rank}: {name}");
        }
        assert!(dir.path().join(out).join("manifest.json").exists());
    }
}

#[test]
fn verify_stored_run_and_tamper() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&hardy(&["optimize", "--out", "run"], dir.path())), 0);
    let o = hardy(&["verify", "--input", "run"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let r = json(&dir.path().join("run/verify_report.json"));
    assert_eq!(r["inputs"].as_object().unwrap().len(), 2);

    std::fs::create_dir(dir.path().join("bad")).unwrap();
    std::fs::copy(dir.path().join("run/manifest.json"), dir.path().join("bad/manifest.json")).unwrap();
    let text = std::fs::read_to_string(dir.path().join("run/potential.csv")).unwrap();
    let mut doubled = String::from("t,r,V\n");
    for line in text.lines().skip(1) {
        let c: Vec<&str> = line.split(',').collect();
        let v: f64 = c[2].parse().unwrap();
        doubled.push_str(&format!("{},{},{:.16e}\n", c[0], c[1], 2.0 * v));
    }
    std::fs::write(dir.path().join("bad/potential.csv"), doubled).unwrap();
    let o = hardy(&["verify", "--input", "bad"], dir.path());
    assert_eq!(code(&o), 1);
    let r = json(&dir.path().join("bad/verify_report.json"));
    assert_eq!(check_status(&r, "normalization"), "fail");
    assert_eq!(r["passed"], false);
}

#[test]
fn verify_refuses_duality_outside_range() {
    let dir = tempfile::tempdir().unwrap();
    let o = hardy(&["verify", "--N", "2", "--s", "0.5", "--out", "half"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let r = json(&dir.path().join("half/verify_report.json"));
    let duality = r["checks"].as_array().unwrap().iter().find(|c| c["name"] == "duality").unwrap();
    assert_eq!(duality["status"], "skipped");
    assert!(duality["detail"].as_str().unwrap().starts_with("skipped: validity range"));
}

#[test]
fn verify_missing_input() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&hardy(&["verify", "--input", "nowhere"], dir.path())), 66);
    std::fs::create_dir(dir.path().join("half")).unwrap();
    assert_eq!(code(&hardy(&["optimize", "--out", "half"], dir.path())), 0);
    std::fs::remove_file(dir.path().join("half/potential.csv")).unwrap();
    assert_eq!(code(&hardy(&["verify", "--input", "half"], dir.path())), 66);
}

#[test]
fn sweep_over_rank() {
    let dir = tempfile::tempdir().unwrap();
    let o = hardy(&["sweep", "--N", "1,2,3", "--out", "sw"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = read_csv(&dir.path().join("sw/sweep.csv"));
    assert_eq!(rows.len(), 3);
    let obj: Vec<f64> = rows.iter().map(|r| r[8].parse().unwrap()).collect();
    assert!(obj.windows(2).all(|w| w[1] >= w[0]), "{obj:?}");
    for i in 0..3 {
        assert!(dir.path().join(format!("sw/cell_{i:03}/manifest.json")).exists());
    }
}

#[test]
fn sweep_over_coupling() {
    let dir = tempfile::tempdir().unwrap();
    let o = hardy(&["sweep", "--c", "0,0.125,critical", "--out", "sw"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = read_csv(&dir.path().join("sw/sweep.csv"));
    let cs: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    assert_eq!(cs, [0.0, 0.125, 0.25]);
    let reference: Vec<f64> = rows.iter().map(|r| r[9].parse().unwrap()).collect();
    assert!(reference.windows(2).all(|w| w[1] >= w[0]), "{reference:?}");
    let obj: Vec<f64> = rows.iter().map(|r| r[8].parse().unwrap()).collect();
    assert!(obj.windows(2).all(|w| w[1] >= w[0]), "{obj:?}");
}

#[test]
fn sweep_rejects_empty_list() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&hardy(&["sweep", "--N", ""], dir.path())), 64);
    assert_eq!(code(&hardy(&["sweep", "--s", "1,,2"], dir.path())), 64);
}

#[test]
fn spectrum_of_stored_potential() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&hardy(&["optimize", "--out", "run"], dir.path())), 0);
    let o = hardy(&["spectrum", "--input", "run/potential.csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("ell,multiplicity,index,lambda,boundary_mass"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    let lambda: f64 = first[3].parse().unwrap();
    let objective = json(&dir.path().join("run/manifest.json"))["summary"]["objective"].as_f64().unwrap();
    assert!((lambda.abs() - objective).abs() < 1e-12);
    assert_eq!(code(&hardy(&["spectrum", "--input", "missing.csv"], dir.path())), 66);
}
