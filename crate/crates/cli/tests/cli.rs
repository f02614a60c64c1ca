use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conebundle")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn scene_gen_writes_views() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["scene-gen", "--scene", "two-planes", "--resolution", "24", "--out", s(dir.path())]);
    for f in ["scene.json", "rig.json", "target.png", "target_depth.pfm", "source_0.png", "source_2_depth.pfm"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    // the written spec and rig load back
    let scene = dir.path().join("scene.json");
    let rig = dir.path().join("rig.json");
    let out = dir.path().join("r");
    ok(&["render", "--scene", s(&scene), "--rig", s(&rig), "--k", "2", "--out", s(&out)]);
}

#[test]
fn render_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&[
        "render",
        "--scene",
        "flat-card",
        "--resolution",
        "32",
        "--k",
        "4",
        "--n-max",
        "3",
        "--threads",
        "2",
        "--out",
        s(dir.path()),
    ]);
    assert!(stdout.contains("K=4 N_max=3"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["K"], 4);
    assert_eq!(report["N_max"], 3);
    assert!(report["psnr"].as_f64().unwrap() > 20.0);
    assert!(report["per_stage_ms"]["decoding"].is_number());
    assert!(dir.path().join("render.png").is_file());
}

#[test]
fn render_from_depth_file_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    ok(&["scene-gen", "--scene", "two-planes", "--resolution", "32", "--out", s(&gen)]);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["render", "--resolution", "32", "--out", s(&a)]);
    ok(&["render", "--resolution", "32", "--depth", s(&gen.join("target_depth.pfm")), "--out", s(&b)]);
    let ra = a.join("render.png");
    let rb = b.join("render.png");
    let diff = dir.path().join("diff.png");
    let same: serde_json::Value = serde_json::from_str(&ok(&["compare", s(&ra), s(&rb), "--diff", s(&diff)])).unwrap();
    assert_eq!(same["psnr"], "inf");
    assert!(diff.is_file());
    let vs_truth: serde_json::Value =
        serde_json::from_str(&ok(&["compare", s(&ra), s(&gen.join("target.png"))])).unwrap();
    assert!(vs_truth["psnr"].as_f64().unwrap() > 15.0);
}

#[test]
fn oracle_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.png");
    ok(&["oracle", "--scene", "textured-planes", "--resolution", "24", "--n", "4", "--out", s(&out)]);
    assert!(out.is_file());
}

#[test]
fn bench_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.json");
    std::fs::write(
        &cfg,
        r#"{"scenes": ["two-planes"], "resolution": 16, "k_values": [1, 2], "n_max_values": [6], "repetitions": 2}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    ok(&["bench", "--config", s(&cfg), "--out", s(&out)]);
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn validation_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    for args in [
        vec!["render", "--k", "0", "--out", out],
        vec!["render", "--n-max", "0", "--out", out],
        vec!["render", "--delta-s-fraction", "-1", "--out", out],
        vec!["render", "--scene", "no-such-scene", "--out", out],
        vec!["render", "--provider", "constant", "--out", out],
        vec!["oracle", "--n", "0", "--out", out],
        vec!["bench", "--config", "/nonexistent.json", "--out", out],
        vec!["compare", "/nonexistent/a.png", "/nonexistent/b.png"],
        vec!["render", "--level-selection", "bogus", "--out", out],
    ] {
        let o = run(&args);
        assert!(!o.status.success(), "{args:?} should fail");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("render.json");
    std::fs::write(&cfg, r#"{"k": 4, "n_max": 2, "sampling": "uniform"}"#).unwrap();
    let stdout = ok(&["render", "--resolution", "16", "--config", s(&cfg), "--k", "2", "--out", s(dir.path())]);
    assert!(stdout.contains("K=2 N_max=2"));
    // uniform sampling: every 2x2 bundle takes both samples
    assert!(stdout.contains("0.500 samples/ray"));
    std::fs::write(&cfg, r#"{"k": 4, "typo": 1}"#).unwrap();
    assert!(!run(&["render", "--config", s(&cfg), "--out", s(dir.path())]).status.success());
}
