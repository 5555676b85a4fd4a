use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fieldtrack"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn metric(summary: &str, name: &str) -> f64 {
    summary
        .lines()
        .find_map(|l| l.strip_prefix(name).filter(|rest| rest.starts_with(' ')))
        .unwrap_or_else(|| panic!("{name} missing from {summary}"))
        .trim()
        .parse()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_track_eval_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    let pred = dir.path().join("pred.txt");
    let summary = ok(&["simulate", "--out", p(&seq)]);
    assert!(summary.contains("20 frames, 3 objects"), "{summary}");
    ok(&["track", p(&seq), p(&pred)]);
    assert!(dir.path().join("pred.txt.diagnostics.json").exists());
    let eval = ok(&["eval", p(&seq.join("gt.txt")), p(&pred)]);
    assert_eq!(metric(&eval, "HOTA"), 1.0);
    assert_eq!(metric(&eval, "IDF1"), 1.0);
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["simulate", "--out", p(&a), "--seed", "7"]);
    ok(&["simulate", "--out", p(&b), "--seed", "7"]);
    for name in ["gt.txt", "manifest.json"] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn zero_memory_splits_reentering_object() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("scene.json");
    std::fs::write(
        &config,
        r#"{"objects": [
            {"center": [-0.8, 0.0, 0.3], "radius": 0.3, "visible": [[1, 8], [10, 20]]},
            {"center": [0.8, 0.2, 0.3], "radius": 0.3}
        ]}"#,
    )
    .unwrap();
    let seq = dir.path().join("seq");
    ok(&["simulate", "--config", p(&config), "--out", p(&seq)]);
    let keep = ok(&["track", p(&seq), p(&dir.path().join("keep.txt"))]);
    let forget = ok(&[
        "track",
        p(&seq),
        p(&dir.path().join("forget.txt")),
        "--memory-frames",
        "0",
    ]);
    assert!(keep.contains(" 2 identities"), "{keep}");
    assert!(forget.contains(" 3 identities"), "{forget}");
}

#[test]
fn empty_scene_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("scene.json");
    std::fs::write(&config, r#"{"object_count": 0, "frames": 8}"#).unwrap();
    let seq = dir.path().join("seq");
    ok(&["simulate", "--config", p(&config), "--out", p(&seq)]);
    let pred = dir.path().join("pred.txt");
    ok(&["track", p(&seq), p(&pred)]);
    assert_eq!(std::fs::read_to_string(pred).unwrap(), "");
}

#[test]
fn bad_window_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    ok(&["simulate", "--out", p(&seq)]);
    let out = run(&[
        "track",
        p(&seq),
        p(&dir.path().join("x.txt")),
        "--window-size",
        "10",
        "--overlap",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("overlap"));
}

#[test]
fn missing_input_is_a_data_error() {
    let out = run(&["eval", "/nonexistent/gt.txt", "/nonexistent/pred.txt"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_split_identity() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt.txt");
    let pred = dir.path().join("pred.txt");
    let row = |f: u32, id: u32| format!("{f},{id},10,10,20,20,1,0,0,0\n");
    std::fs::write(&gt, (1..=6).map(|f| row(f, 1)).collect::<String>()).unwrap();
    std::fs::write(
        &pred,
        (1..=6)
            .map(|f| row(f, if f <= 3 { 1 } else { 2 }))
            .collect::<String>(),
    )
    .unwrap();
    let same = ok(&["eval", p(&gt), p(&gt)]);
    assert_eq!(metric(&same, "HOTA"), 1.0);
    assert_eq!(metric(&same, "Frag"), 0.0);
    let split = ok(&["eval", p(&gt), p(&pred)]);
    assert!((metric(&split, "HOTA") - 0.5f64.sqrt()).abs() < 1e-6);
    assert_eq!(metric(&split, "IDF1"), 0.5);
}

#[test]
fn malformed_row_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt.txt");
    std::fs::write(&gt, "1,1,10,10,20,20,1,0,0,0\n2,1,10,10,20\n").unwrap();
    let out = run(&["eval", p(&gt), p(&gt)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}
