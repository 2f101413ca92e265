use lowrank_experiments::exit;
use lowrank_experiments::output::TRACE_HEADER;
use std::path::Path;
use std::process::{Command, Output};

fn lowrank(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lowrank"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SMALL: &str = r#"name = "small"
methods = ["gd", "nag"]
seeds = [3, 1]

[problem]
kind = "mf"
m = 8
n = 6
rank = 2
sigma1 = 1.0
sigma_r = 0.5

[init]
scheme = "mf-sketch"
d = 3
c_sqrt_d = 5.0

[stop]
eps = 1e-10
max_iters = 20000
"#;

#[test]
fn preset_list_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let out = lowrank(&["preset", "--list"], dir.path());
    assert_eq!(code(&out), exit::OK);
    let names = String::from_utf8(out.stdout).unwrap();
    for name in ["fig1", "fig2-mf", "fig6", "prop1", "tiny"] {
        assert!(names.lines().any(|l| l == name), "{name}");
    }
    let out = lowrank(&["preset", "fig3", "--out", "cfg"], dir.path());
    assert_eq!(code(&out), exit::OK);
    let text = std::fs::read_to_string(dir.path().join("cfg/fig3.toml")).unwrap();
    assert!(text.contains("c_sqrt_d = 200.0"));
    assert_eq!(code(&lowrank(&["preset", "fig9"], dir.path())), exit::CONFIG);
}

#[test]
fn run_writes_traces_with_the_documented_header() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    let out = lowrank(&["run", "small.toml", "--out", "res"], dir.path());
    assert_eq!(code(&out), exit::OK, "{}", stderr(&out));
    let res = dir.path().join("res");
    for file in ["trace_base_gd.csv", "trace_base_nag.csv", "mean_base_gd.csv", "summary.csv"] {
        assert!(res.join(file).exists(), "{file}");
    }
    let trace = std::fs::read_to_string(res.join("trace_base_gd.csv")).unwrap();
    assert!(!trace.contains('\r'));
    let mut lines = trace.lines();
    assert_eq!(lines.next().unwrap(), TRACE_HEADER.join(","));
    // rows follow the configured seed order
    let first = lines.next().unwrap();
    assert!(first.starts_with("base/gd/3,gd,3,0,"), "{first}");
    assert!(trace.lines().any(|l| l.starts_with("base/gd/1,gd,1,0,")));
    let summary = std::fs::read_to_string(res.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 4);
    assert!(summary.lines().skip(1).all(|l| l.contains(",converged,")));
}

#[test]
fn identical_invocations_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    let a = Command::new(env!("CARGO_BIN_EXE_lowrank"))
        .args(["run", "small.toml", "--out", "a"])
        .env("LOWRANK_THREADS", "1")
        .current_dir(dir.path())
        .output()
        .unwrap();
    let b = Command::new(env!("CARGO_BIN_EXE_lowrank"))
        .args(["run", "small.toml", "--out", "b"])
        .env("LOWRANK_THREADS", "4")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&a), exit::OK);
    assert_eq!(code(&b), exit::OK);
    let mut names: Vec<_> = std::fs::read_dir(dir.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 5);
    for name in names {
        let x = std::fs::read(dir.path().join("a").join(&name)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(&name)).unwrap();
        assert!(x == y, "{name:?} differs");
    }
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = SMALL.replace("d = 3", "d = 3\nwidth = 2");
    std::fs::write(dir.path().join("bad.toml"), bad).unwrap();
    let out = lowrank(&["run", "bad.toml"], dir.path());
    assert_eq!(code(&out), exit::CONFIG);
    let msg = stderr(&out);
    assert!(msg.contains("bad.toml: line 16"), "{msg}");
    assert!(msg.contains("width"), "{msg}");

    let bad = SMALL.replace("rank = 2", "rank = 7");
    std::fs::write(dir.path().join("rank.toml"), bad).unwrap();
    let out = lowrank(&["run", "rank.toml"], dir.path());
    assert_eq!(code(&out), exit::CONFIG);
    assert!(stderr(&out).contains("line "), "{}", stderr(&out));

    let out = lowrank(&["run", "small.toml", "--eps=-1"], dir.path());
    assert_eq!(code(&out), exit::OTHER, "missing file is not a config error");
    std::fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    let out = lowrank(&["run", "small.toml", "--eps=-1"], dir.path());
    assert_eq!(code(&out), exit::CONFIG, "{}", stderr(&out));
}

#[test]
fn divergence_has_its_own_status() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}\n[hyperparams]\nmode = \"manual\"\neta = 5.0\n");
    std::fs::write(dir.path().join("div.toml"), text).unwrap();
    let out = lowrank(&["run", "div.toml", "--out", "res"], dir.path());
    assert_eq!(code(&out), exit::DIVERGED, "{}", stderr(&out));
    let summary = std::fs::read_to_string(dir.path().join("res/summary.csv")).unwrap();
    assert!(summary.contains(",diverged,"));
}

#[test]
fn verify_passes_on_tiny_and_reports_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = lowrank(&["verify", "tiny", "--seeds", "2", "--out", "v"], dir.path());
    assert_eq!(code(&out), exit::OK, "{}", stderr(&out));
    let report = std::fs::read_to_string(dir.path().join("v/verify.csv")).unwrap();
    assert!(report.starts_with("check,scope,measured,threshold,passed\n"));
    assert!(!report.contains(",false\n"));

    // tau near one puts the lower singular-value bound above typical draws
    let text = lowrank_experiments::presets::text("prop1")
        .unwrap()
        .replace("tau = 0.05", "tau = 0.99")
        .replace("count = 1000", "count = 20");
    std::fs::write(dir.path().join("p.toml"), text).unwrap();
    let out = lowrank(&["verify", "p.toml", "--out", "p"], dir.path());
    assert_eq!(code(&out), exit::VERIFY_FAILED);
    assert!(stderr(&out).contains("prop1-lower"), "{}", stderr(&out));
}

#[test]
fn theory_writes_curves_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = lowrank(
        &["theory", "fig2-mf", "--seeds", "1", "--t-max", "20", "--stride", "10", "--out", "t"],
        dir.path(),
    );
    assert_eq!(code(&out), exit::OK, "{}", stderr(&out));
    let curves = std::fs::read_to_string(dir.path().join("t/theory_curves.csv")).unwrap();
    // 3 widths × 2 methods × (loss curve + residual bound) × 3 points
    assert_eq!(curves.lines().count(), 1 + 3 * 2 * 2 * 3);
    let summary = std::fs::read_to_string(dir.path().join("t/theory_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 6);
}
