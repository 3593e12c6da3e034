// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const ZGATE_RUN: &str = r#"
[model]
preset = "zgate"

[solver]
kind = "fixed_time"
tf = 0.85
max_iters = 4
u_max = [0.8]

[seed]
relative_amplitude = 0.01
rng_seed = 3
"#;

fn lyagate(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lyagate"))
        .current_dir(dir)
        .env_remove("LYAGATE_OUTPUT_DIR")
        .args(args)
        .output()
        .expect("spawn lyagate")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_writes_artifacts_and_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "z.toml", ZGATE_RUN);

    let out = lyagate(d, &["run", "z.toml", "-o", "a"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["iterations.csv", "final_control.csv", "summary.json"] {
        assert!(d.join("a").join(f).is_file(), "{f}");
    }
    let summary = json(&d.join("a/summary.json"));
    let inf = summary["infidelity"].as_f64().unwrap();
    assert!(inf <= 0.07, "{inf}");
    assert_eq!(summary["corrected_infidelity"].as_f64().unwrap(), inf);
    assert_eq!(summary["stop"], "iteration_cap");
    assert_eq!(summary["rng_seed"], 3);
    assert_eq!(summary["tf"], 0.85);
    assert!(summary["epsilon_num"].as_f64().unwrap() <= 1e-5);
    assert!(summary["wall_time_s"].as_f64().unwrap() > 0.0);
    assert_eq!(summary["config"]["solver"]["u_min"][0], -0.8);

    let iters = std::fs::read_to_string(d.join("a/iterations.csv")).unwrap();
    let mut lines = iters.lines();
    assert_eq!(
        lines.next().unwrap(),
        "ell,V0,VTf,handoff_err,infidelity,corrected_infidelity,Tf,stat_residual,u_l2_change"
    );
    assert_eq!(lines.count(), 4);

    let again = lyagate(d, &["run", "z.toml", "-o", "b", "--threads", "1"]);
    assert_eq!(again.status.code(), Some(2));
    assert_eq!(iters, std::fs::read_to_string(d.join("b/iterations.csv")).unwrap());

    // the summary alone reproduces the run
    std::fs::copy(d.join("a/summary.json"), d.join("replay_src.json")).unwrap();
    let cfg = &json(&d.join("replay_src.json"))["config"];
    write(d, "replay.json", &serde_json::to_string_pretty(cfg).unwrap());
    let replay = lyagate(d, &["run", "replay.json", "-o", "c"]);
    assert_eq!(replay.status.code(), Some(2), "{}", String::from_utf8_lossy(&replay.stderr));
    assert_eq!(iters, std::fs::read_to_string(d.join("c/iterations.csv")).unwrap());
    assert_eq!(
        std::fs::read(d.join("a/final_control.csv")).unwrap(),
        std::fs::read(d.join("c/final_control.csv")).unwrap()
    );
}

#[test]
fn tolerance_met_exits_zero() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "z.toml", &ZGATE_RUN.replace("max_iters = 4", "max_iters = 4\ninfidelity_tol = 0.1\nn_sim = 300"));
    let out = lyagate(d, &["run", "z.toml", "-o", "out"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&d.join("out/summary.json"))["stop"], "converged");
}

#[test]
fn malformed_config_exits_one_without_outputs() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let cases = [
        ("typo.toml", ZGATE_RUN.replace("max_iters", "max_iter")),
        ("value.toml", ZGATE_RUN.replace("tf = 0.85", "tf = 0.0")),
        ("syntax.toml", "[model\npreset = ".to_string()),
        ("nosolver.toml", "[model]\npreset = \"zgate\"\n".to_string()),
    ];
    for (name, text) in &cases {
        write(d, name, text);
        let out = lyagate(d, &["run", name, "-o", "out"]);
        assert_eq!(out.status.code(), Some(1), "{name}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains("config error"), "{name}: {err}");
        assert!(!d.join("out").exists(), "{name}");
    }
    let typo = lyagate(d, &["run", "typo.toml"]);
    assert!(String::from_utf8_lossy(&typo.stderr).contains("solver.max_iter"));
    let value = lyagate(d, &["run", "value.toml"]);
    assert!(String::from_utf8_lossy(&value.stderr).contains("solver.tf"));
    let missing = lyagate(d, &["run", "absent.toml"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(!d.join("lyagate-out").exists());
}

#[test]
fn output_dir_from_environment() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "z.toml", &ZGATE_RUN.replace("max_iters = 4", "max_iters = 1\nn_sim = 200"));
    let out = Command::new(env!("CARGO_BIN_EXE_lyagate"))
        .current_dir(d)
        .env("LYAGATE_OUTPUT_DIR", d.join("from-env"))
        .args(["run", "z.toml"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(d.join("from-env/summary.json").is_file());
}

#[test]
fn large_models_need_full_profile() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(
        d,
        "c.toml",
        "[model]\npreset = \"cnot\"\nn_fock = 17\n[solver]\nkind = \"clock\"\ntf = 1.5\n",
    );
    let out = lyagate(d, &["run", "c.toml", "-o", "out"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--profile full"));
    assert!(!d.join("out").exists());
}

#[test]
fn sweep_reproduces_adiabatic_baseline() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "s.toml", "[model]\npreset = \"zgate\"\n[sweep]\ntf = [0.6, 0.85, 1.1]\n");
    let out = lyagate(d, &["sweep-adiabatic", "s.toml", "-o", "out"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut r = csv::Reader::from_path(d.join("out/sweep.csv")).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["Tf", "infidelity", "corrected_infidelity"]);
    let rows: Vec<Vec<f64>> = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1][0], 0.85);
    assert!((rows[1][1] - 0.0696).abs() <= 0.005, "{}", rows[1][1]);
    // 0.85 sits below both neighbours
    assert!(rows[1][1] < rows[0][1] && rows[1][1] < rows[2][1]);

    write(d, "empty.toml", "[model]\npreset = \"zgate\"\n[sweep]\ntf = []\n");
    let out = lyagate(d, &["sweep-adiabatic", "empty.toml", "-o", "empty"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!d.join("empty").exists());
}

#[test]
fn inspect_control_files() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "c.csv", "time,u_1\n0,0.5\n0.5,0.5\n1,0.5\n1.5,0.5\n2,0.5\n");
    let out = lyagate(d, &["inspect", "c.csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("channels: 1"), "{text}");
    assert!(text.contains("5 nodes on [0, 2]"), "{text}");
    assert!(text.contains("integral 1\n"), "{text}");

    write(d, "nan.csv", "time,u_1\n0,0.5\n1,0.5\n2,nan\n");
    let out = lyagate(d, &["inspect", "nan.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 3"));
}

#[test]
fn usage_errors_exit_one() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(lyagate(tmp.path(), &["nonsense"]).status.code(), Some(1));
    assert_eq!(lyagate(tmp.path(), &["--help"]).status.code(), Some(0));
}
