use std::fs;
use std::process::{Command, Output};

fn wgqed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wgqed")).args(args).output().unwrap()
}

const TWO_LEVEL: &str = r#"
[[emitter]]
id = "A"
levels = [{ id = "g", kind = "ground" }, { id = "e", kind = "excited" }]

[[transition]]
emitter = "A"
excited = "e"
ground = "g"
gamma1d_right = 0.5
gamma1d_left = 0.5

[run]
mode = "spectrum"
outputs = ["T2", "R2"]

[run.sweep]
label = "delta"
grid = { values = [0.0, 0.5] }
targets = [{ path = "detuning" }]
"#;

#[test]
fn runs_a_file_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.toml");
    fs::write(&path, TWO_LEVEL).unwrap();
    let out = wgqed(&["run", path.to_str().unwrap(), "--no-provenance"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "delta,T2,R2\n0,4.93038065763e-32,1\n0.5,0.5,0.5\n");
    assert!(out.stderr.is_empty());
}

#[test]
fn writes_output_file_with_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let out = wgqed(&["run", "--preset", "fig9a", "--output", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# wgqed "));
    assert!(lines[1].starts_with("# scenario sha256 "));
    assert_eq!(lines[4], "tc_over_T,F");
    assert_eq!(lines.len(), 5 + 201);
}

#[test]
fn output_is_identical_across_thread_counts() {
    for preset in ["fig3b", "fig6a", "fig9b"] {
        let one = wgqed(&["run", "--preset", preset, "--threads", "1"]);
        let many = wgqed(&["run", "--preset", preset, "--threads", "4"]);
        assert_eq!(one.status.code(), Some(0));
        assert_eq!(one.stdout, many.stdout, "{preset}");
    }
}

#[test]
fn validation_failure_exits_1_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, TWO_LEVEL.replace("gamma1d_left = 0.5", "gamma1d_left = -0.5")).unwrap();
    let out = wgqed(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("ERROR negative_rate line 6: "), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn unknown_key_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, TWO_LEVEL.replace("[run]", "[run]\nspeed = 3")).unwrap();
    let out = wgqed(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("ERROR schema line 14: ") && err.contains("speed"), "{err}");
}

#[test]
fn unknown_preset_exits_1() {
    let out = wgqed(&["run", "--preset", "fig99"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("ERROR unknown_preset "));
}

#[test]
fn out_of_range_detection_time_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.toml");
    let text = wgqed::presets::preset_text("fig9a").unwrap().replace("stop = 1.0", "stop = 1.5");
    fs::write(&path, text).unwrap();
    let out = wgqed(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("ERROR out_of_range "));
}

#[test]
fn lists_presets() {
    let out = wgqed(&["presets"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 8);
}
