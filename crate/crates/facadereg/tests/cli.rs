//! End-to-end checks of the command-line interface via the built binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_facadereg")
}

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn tmpdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("facadereg-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn regularize_perfect_grid_reports_equal_counts() {
    let dir = tmpdir("perfect");
    let synth = run(
        &["synth", "--rows", "3", "--cols", "2", "-o", "grid.json"],
        &dir,
    );
    assert!(synth.status.success());
    let reg = run(
        &["regularize", "grid.json", "-o", "results.json"],
        &dir,
    );
    assert!(reg.status.success());
    let stdout = String::from_utf8(reg.stdout).unwrap();
    // Perfect grid: detected == regularized == (2, 3, 1, 1).
    assert!(stdout.contains("proven optimal"), "{stdout}");
    let line = stdout.lines().find(|l| l.starts_with("window")).unwrap();
    let fields: Vec<&str> = line.split_whitespace().collect();
    assert_eq!(&fields[2..6], &["2", "3", "1", "1"]);
    assert_eq!(&fields[7..11], &["2", "3", "1", "1"]);
}

#[test]
fn regularize_jittered_grid_recovers_columns() {
    let dir = tmpdir("jitter");
    assert!(run(
        &[
            "synth", "--rows", "6", "--cols", "8", "--jitter", "2", "--seed", "11", "-o",
            "grid.json"
        ],
        &dir,
    )
    .status
    .success());
    let reg = run(
        &["regularize", "grid.json", "-o", "results.json", "--svg", "grid.svg"],
        &dir,
    );
    assert!(reg.status.success());
    let stdout = String::from_utf8(reg.stdout).unwrap();
    let line = stdout.lines().find(|l| l.starts_with("window")).unwrap();
    let fields: Vec<&str> = line.split_whitespace().collect();
    assert_eq!(&fields[7..11], &["8", "6", "1", "1"], "{stdout}");

    // Overlay holds one black and one red rectangle per box.
    let svg = std::fs::read_to_string(dir.join("grid.svg")).unwrap();
    assert_eq!(svg.matches("<rect").count(), 96);
}

#[test]
fn missing_input_exits_2_and_names_path() {
    let dir = tmpdir("missing");
    let out = run(&["regularize", "no-such-file.json", "-o", "x.json"], &dir);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("no-such-file.json"), "{stderr}");
}

#[test]
fn malformed_input_exits_2() {
    let dir = tmpdir("malformed");
    std::fs::write(dir.join("bad.json"), b"{ this is not json").unwrap();
    let out = run(&["regularize", "bad.json", "-o", "x.json"], &dir);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_is_deterministic_under_seed() {
    let dir = tmpdir("synthdet");
    for name in ["a.json", "b.json"] {
        assert!(run(
            &[
                "synth", "--rows", "4", "--cols", "5", "--jitter", "1.5", "--dropout", "0.2",
                "--seed", "9", "-o", name
            ],
            &dir,
        )
        .status
        .success());
    }
    let a = std::fs::read(dir.join("a.json")).unwrap();
    let b = std::fs::read(dir.join("b.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn render_matches_inline_svg() {
    let dir = tmpdir("render");
    assert!(run(
        &["synth", "--rows", "2", "--cols", "2", "--jitter", "1", "--seed", "5", "-o", "g.json"],
        &dir,
    )
    .status
    .success());
    assert!(run(
        &["regularize", "g.json", "-o", "r.json", "--svg", "direct.svg"],
        &dir,
    )
    .status
    .success());
    assert!(run(&["render", "r.json", "-o", "from-results.svg"], &dir)
        .status
        .success());
    let direct = std::fs::read(dir.join("direct.svg")).unwrap();
    let rendered = std::fs::read(dir.join("from-results.svg")).unwrap();
    assert_eq!(direct, rendered);
}

#[test]
fn export_lp_minimal_problem_shape() {
    let dir = tmpdir("lp");
    std::fs::write(
        dir.join("one.json"),
        br#"{
            "version": 1,
            "image": { "width": 100, "height": 100, "source_id": "one" },
            "boxes": [ { "class": "window", "score": 1.0, "x": 5, "y": 5, "w": 5, "h": 5 } ]
        }"#,
    )
    .unwrap();
    assert!(run(&["export-lp", "one.json", "-o", "one.lp"], &dir)
        .status
        .success());
    let lp = std::fs::read_to_string(dir.join("one.lp")).unwrap();
    // One box: per attribute one selection + one usage variable, one
    // one-hot and one linking constraint.
    assert_eq!(lp.matches("onehot_").count(), 4);
    assert_eq!(lp.matches("link_").count(), 4);
    for name in ["a_x_0_0", "u_x_0", "a_h_0_0", "u_h_0"] {
        assert!(lp.contains(name), "missing {name}\n{lp}");
    }
    assert!(lp.trim_end().ends_with("End"));
}

#[test]
fn bench_runs_and_reports_agreement() {
    let dir = tmpdir("bench");
    let out = run(&["bench", "--seed", "3"], &dir);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.matches("yes").count(), 6, "{stdout}");
}
