//! End-to-end tests of the `poincare` binary: exit codes, file outputs,
//! determinism, and the env-variable overrides.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TWO_POINT: &str =
    r#"{"atoms":[{"value":1.0,"prob":0.5},{"value":-1.0,"prob":0.5}],"tau":1.0}"#;
const GAUSSIAN: &str = r#"{"atoms":[{"value":0.0,"prob":1.0}],"tau":1.0}"#;

fn workdir(tag: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(tag);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn poincare(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_poincare"));
    for key in [
        "POINCARE_MIXTURE",
        "POINCARE_GRID",
        "POINCARE_WIDTH",
        "POINCARE_LEVELS",
        "POINCARE_DEGREE",
        "POINCARE_OUT",
        "POINCARE_SEED",
        "POINCARE_U1",
        "POINCARE_STEPS",
        "POINCARE_ATOM_CAP",
        "POINCARE_MERGE_TOL",
        "POINCARE_QUAD_TOL",
    ] {
        cmd.env_remove(key);
    }
    cmd.args(args).envs(envs.iter().copied());
    cmd.output().expect("binary runs")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

#[test]
fn bound_writes_the_reference_report() {
    let dir = workdir("bound");
    let mixture = dir.join("two_point.json");
    std::fs::write(&mixture, TWO_POINT).unwrap();

    let out = poincare(
        &[
            "bound",
            "--mixture",
            mixture.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(
        code(&out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("bound_report.json")).unwrap())
            .unwrap();
    let thm13 = report["bounds"]["thm13_ub"].as_f64().unwrap();
    assert!((thm13 - 15.778).abs() < 1e-3, "thm13 = {thm13}");
    assert_eq!(report["format_version"], "1");
    assert!(report["config"]["grid"].is_string());
    let lower = report["chosen_lower"].as_f64().unwrap();
    assert!(lower >= 2.0);
    assert!(report["chosen_upper"].as_f64().unwrap() >= lower);
}

#[test]
fn spectrum_recovers_the_ou_gap() {
    let dir = workdir("spectrum");
    let mixture = dir.join("gaussian1.json");
    std::fs::write(&mixture, GAUSSIAN).unwrap();

    let out = poincare(
        &[
            "spectrum",
            "--mixture",
            mixture.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(
        code(&out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    let gap: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("gap_result.json")).unwrap())
            .unwrap();
    let r = gap["r_estimate"].as_f64().unwrap();
    assert!((r - 1.0).abs() <= 1e-3, "r = {r}");
    assert_eq!(gap["grid"]["n_points"].as_u64().unwrap(), 4001);

    let csv = std::fs::read_to_string(dir.join("eigenfunction.csv")).unwrap();
    assert!(csv.starts_with("# format_version=1\n"));
    assert!(csv.contains("x,g,density"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 4002);
}

#[test]
fn bu_scan_emits_the_curve() {
    let dir = workdir("bu_scan");
    let mixture = dir.join("two_point.json");
    std::fs::write(&mixture, TWO_POINT).unwrap();

    let out = poincare(
        &[
            "bu-scan",
            "--mixture",
            mixture.to_str().unwrap(),
            "--grid",
            "501",
            "--out",
            dir.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 0);
    let csv = std::fs::read_to_string(dir.join("bu_curve.csv")).unwrap();
    assert!(csv.contains("x,tail_moment,density,ratio"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 502);
}

#[test]
fn clt_runs_a_short_doubling() {
    let dir = workdir("clt");
    let mixture = dir.join("start.json");
    std::fs::write(
        &mixture,
        r#"{"atoms":[{"value":1.0,"prob":0.5},{"value":-1.0,"prob":0.5}],"tau":0.5}"#,
    )
    .unwrap();

    let out = poincare(
        &[
            "clt",
            "--mixture",
            mixture.to_str().unwrap(),
            "--levels",
            "2",
            "--grid",
            "1001",
            "--out",
            dir.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(
        code(&out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.join("clt_trace.csv")).unwrap();
    let data: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), 4); // header + levels 0..2
    assert!(data[0].starts_with("k,n,r_estimate"));
}

#[test]
fn recursion_checks_its_bounds() {
    let dir = workdir("recursion");
    let out = poincare(
        &[
            "recursion",
            "--u1",
            "1.0",
            "--steps",
            "1024",
            "--out",
            dir.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("pow2_bound_ok=true"));
    assert!(stdout.contains("fill_bound_ok=true"));
    let csv = std::fs::read_to_string(dir.join("recursion_trace.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1025);
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir_a = workdir("determinism_a");
    let dir_b = workdir("determinism_b");
    let mixture_a = dir_a.join("m.json");
    let mixture_b = dir_b.join("m.json");
    std::fs::write(&mixture_a, TWO_POINT).unwrap();
    std::fs::write(&mixture_b, TWO_POINT).unwrap();

    // Same mixture content at a path with identical textual form relative to
    // the config echo: pass the same --mixture string both times.
    for (dir, mixture) in [(&dir_a, &mixture_a), (&dir_b, &mixture_b)] {
        let out = poincare(
            &[
                "bu-scan",
                "--mixture",
                mixture.to_str().unwrap(),
                "--grid",
                "301",
                "--out",
                dir.to_str().unwrap(),
            ],
            &[],
        );
        assert_eq!(code(&out), 0);
    }
    let a = std::fs::read(dir_a.join("bu_curve.csv")).unwrap();
    let b = std::fs::read(dir_b.join("bu_curve.csv")).unwrap();
    // Outputs differ only in the echoed mixture path; strip the config lines.
    let strip = |bytes: &[u8]| {
        String::from_utf8(bytes.to_vec())
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("# mixture="))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&a), strip(&b));

    // And a bit-exact rerun into the same directory.
    let out = poincare(
        &[
            "bu-scan",
            "--mixture",
            mixture_a.to_str().unwrap(),
            "--grid",
            "301",
            "--out",
            dir_a.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 0);
    assert_eq!(a, std::fs::read(dir_a.join("bu_curve.csv")).unwrap());
}

#[test]
fn env_variables_override_defaults() {
    let dir = workdir("env_override");
    let mixture = dir.join("g.json");
    std::fs::write(&mixture, GAUSSIAN).unwrap();

    let out = poincare(
        &["spectrum", "--mixture", mixture.to_str().unwrap()],
        &[
            ("POINCARE_GRID", "2001"),
            ("POINCARE_OUT", dir.to_str().unwrap()),
        ],
    );
    assert_eq!(
        code(&out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let gap: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("gap_result.json")).unwrap())
            .unwrap();
    assert_eq!(gap["grid"]["n_points"].as_u64().unwrap(), 2001);
}

#[test]
fn validation_failures_exit_with_one() {
    let dir = workdir("validation");

    // Malformed JSON -> 1 with a position diagnostic.
    let broken = dir.join("broken.json");
    std::fs::write(&broken, "{\"atoms\": [").unwrap();
    let out = poincare(&["bound", "--mixture", broken.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));

    // Probabilities off by more than the gate -> 1.
    let bad = dir.join("bad.json");
    std::fs::write(
        &bad,
        r#"{"atoms":[{"value":0.0,"prob":0.6},{"value":1.0,"prob":0.5}],"tau":1.0}"#,
    )
    .unwrap();
    let out = poincare(&["bound", "--mixture", bad.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 1);

    // Unknown flag, bad grid, missing mixture, unknown subcommand.
    assert_eq!(code(&poincare(&["bound", "--bogus", "1"], &[])), 1);
    assert_eq!(code(&poincare(&["spectrum", "--grid", "100"], &[])), 1);
    assert_eq!(code(&poincare(&["spectrum"], &[])), 1);
    assert_eq!(code(&poincare(&["frobnicate"], &[])), 1);
    assert_eq!(code(&poincare(&[], &[])), 1);

    // --help is a success.
    assert_eq!(code(&poincare(&["--help"], &[])), 0);
}

#[test]
fn numerical_failures_exit_with_two() {
    let dir = workdir("numerical");
    let mixture = dir.join("m.json");
    std::fs::write(&mixture, TWO_POINT).unwrap();

    // Atom cap far below what six doubling levels need.
    let out = poincare(
        &[
            "clt",
            "--mixture",
            mixture.to_str().unwrap(),
            "--levels",
            "6",
            "--grid",
            "1001",
            "--atom-cap",
            "8",
            "--out",
            dir.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("halted"), "stderr: {stderr}");
    // The partial trace still lands on disk.
    assert!(dir.join("clt_trace.csv").exists());
}
