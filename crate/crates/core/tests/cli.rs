use std::path::Path;
use std::process::{Command, Output};

use pws_core::ensemble::{run_member, ExitSpec};
use pws_core::integrate::IntegratorConfig;
use pws_core::io::read_trajectory_csv;
use pws_core::Preset;
use serde_json::Value;

fn pws(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pws")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = pws(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("spiral.csv");
    ok(&["simulate", "--preset", "spiral", "--tau", "1e-3", "--t-end", "0.5", "--seed", "3", "--out", s(&out)]);
    let file = std::fs::File::open(&out).unwrap();
    let traj = read_trajectory_csv(std::io::BufReader::new(file)).unwrap();
    assert_eq!(traj.dim, 3);
    assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
    // the last random step ends past the horizon but within one step of it
    let end = *traj.times.last().unwrap();
    assert!((0.5..0.5 + 2e-3).contains(&end), "{end}");
    assert_eq!(traj.state(0), Preset::Spiral.default_initial_condition().as_slice());

    let m = json(&dir.path().join("spiral.csv.manifest.json"));
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["preset"], "spiral");
    assert_eq!(m["seed"], 3);
    assert_eq!(m["outputs"][0], s(&out));
}

#[test]
fn simulate_regularized_stiff() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    ok(&[
        "simulate", "--preset", "nontangential", "--method", "regularized-stiff", "--eps-alpha", "1e-4", "--eps-beta",
        "1e-4", "--t-end", "2", "--out", s(&out),
    ]);
    let traj = read_trajectory_csv(std::io::BufReader::new(std::fs::File::open(&out).unwrap())).unwrap();
    assert!((traj.last_state()[2] - traj.state(0)[2] - 2.0).abs() < 1e-6);
}

#[test]
fn ensemble_of_one_matches_library_member() {
    let dir = tempfile::tempdir().unwrap();
    let stats = dir.path().join("stats.json");
    ok(&["ensemble", "--preset", "nontangential", "--n", "1", "--tau", "1e-3", "--seed", "11", "--stats", s(&stats)]);
    let v = json(&stats);
    assert_eq!(v["n"], 1);

    let preset = Preset::Nontangential;
    let mut base = preset.default_initial_condition();
    base[0] = 0.0;
    base[1] = 0.0;
    let cfg = IntegratorConfig::euler(1e-3, ExitSpec::default_horizon(preset), 11);
    let exit = run_member(&preset.system(), &base, 0, &cfg, &ExitSpec::for_preset(preset)).unwrap().unwrap();
    assert_eq!(v["exits"][0]["slow_coordinate"].as_f64().unwrap(), exit.slow_coordinate);
    assert_eq!(v["mean"].as_f64().unwrap(), exit.slow_coordinate);
    assert_eq!(v["std"].as_f64().unwrap(), 0.0);
    assert!(dir.path().join("stats.json.manifest.json").exists());
}

#[test]
fn ensemble_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for threads in ["1", "3"] {
        let stats = dir.path().join(format!("s{threads}.json"));
        let out = Command::new(env!("CARGO_BIN_EXE_pws"))
            .env("PWS_THREADS", threads)
            .args(["ensemble", "--preset", "spiral", "--n", "6", "--tau", "1e-3", "--seed", "5", "--stats", s(&stats)])
            .output()
            .unwrap();
        assert!(out.status.success());
        runs.push(std::fs::read(&stats).unwrap());
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn ensemble_average_csv() {
    let dir = tempfile::tempdir().unwrap();
    let stats = dir.path().join("stats.json");
    let avg = dir.path().join("avg.csv");
    ok(&[
        "ensemble", "--preset", "spiral", "--n", "3", "--tau", "1e-3", "--t-end", "0.3", "--stats", s(&stats), "--avg",
        s(&avg),
    ]);
    let traj = read_trajectory_csv(std::io::BufReader::new(std::fs::File::open(&avg).unwrap())).unwrap();
    assert!(traj.len() > 2);
}

fn hopf_values(v: &Value) -> Vec<f64> {
    v["reports"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["kind"] == "Hopf")
        .map(|r| r["slow_value"].as_f64().unwrap())
        .collect()
}

#[test]
fn bifurcate_locates_hopf_points() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&[&str], f64); 3] = [
        (&["--preset", "spiral", "--y-min", "1", "--y-max", "2"], 1.4085644),
        (&["--preset", "spiral", "--y-min", "1", "--y-max", "2", "--dummy"], 1.4179808),
        (&["--preset", "nontangential", "--y-min", "3", "--y-max", "3.45", "--dummy"], 3.4476082),
    ];
    for (k, (args, expected)) in cases.iter().enumerate() {
        let out = dir.path().join(format!("b{k}.json"));
        let mut full = vec!["bifurcate"];
        full.extend_from_slice(args);
        full.extend(["--tol", "1e-6", "--out", s(&out)]);
        ok(&full);
        let hopf = hopf_values(&json(&out));
        assert_eq!(hopf.len(), 1, "{args:?}");
        assert!((hopf[0] - expected).abs() < 1e-5, "{args:?}: {}", hopf[0]);
    }
}

#[test]
fn bifurcate_empty_range() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.json");
    ok(&["bifurcate", "--preset", "spiral", "--y-min", "1.5", "--y-max", "1.5", "--out", s(&out)]);
    assert!(json(&out)["reports"].as_array().unwrap().is_empty());
}

#[test]
fn fastslow_reports_double_root() {
    let out = ok(&["fastslow", "--preset", "ambiguous", "--y", "3,1"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let roots = v["roots"].as_array().unwrap();
    assert_eq!(roots.len(), 1);
    assert!((roots[0]["alpha"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((roots[0]["beta"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert!(roots[0]["determinant"].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn fastslow_portrait_and_orbit_without_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    let (portrait, orbit) = (dir.path().join("p.csv"), dir.path().join("o.csv"));
    let out = ok(&[
        "fastslow", "--preset", "nontangential", "--y", "3.8", "--eta", "1", "--portrait", s(&portrait), "--orbit",
        s(&orbit),
    ]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["equilibrium"].is_null());
    let p = std::fs::read_to_string(&portrait).unwrap();
    assert_eq!(p.lines().next(), Some("alpha,beta,dalpha,dbeta"));
    assert_eq!(p.lines().count(), 1 + 21 * 21);
    let o = std::fs::read_to_string(&orbit).unwrap();
    assert_eq!(o.lines().next(), Some("s,alpha,beta"));
    assert!(o.lines().count() > 2);
}

#[test]
fn fastslow_stable_equilibrium_below_hopf() {
    let out = ok(&["fastslow", "--preset", "spiral", "--y", "1.0"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let eig = v["eigenvalues"].as_array().unwrap();
    assert!(eig.iter().all(|z| z[0].as_f64().unwrap() < 0.0));
}

#[test]
fn list_shows_presets() {
    let out = ok(&["list"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["tangential", "nontangential", "spiral", "ambiguous"] {
        assert!(text.contains(name), "{name}");
    }
}

#[test]
fn exit_codes() {
    assert_eq!(pws(&["simulate", "--preset", "nope", "--out", "x.csv"]).status.code(), Some(2));
    assert_eq!(pws(&["simulate", "--preset", "spiral", "--ic", "1,2", "--out", "x.csv"]).status.code(), Some(2));
    assert_eq!(pws(&["ensemble", "--preset", "spiral", "--n", "0", "--stats", "x.json"]).status.code(), Some(2));
    let unwritable = pws(&["simulate", "--preset", "spiral", "--tau", "1e-2", "--out", "/nonexistent/dir/x.csv"]);
    assert_eq!(unwritable.status.code(), Some(1));
    assert_eq!(pws(&["--help"]).status.code(), Some(0));
}
