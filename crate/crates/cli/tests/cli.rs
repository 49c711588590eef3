//! End-to-end checks of the binary: shipped scenarios, exit codes, file
//! outputs, determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_delay-consensus"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn bounds_on_triangle_scenario() {
    let out = run(&[
        "bounds",
        "--scenario",
        scenario("triangle-bounds.toml").to_str().unwrap(),
        "--zero-class",
        "2",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(
        text.contains("constant_uniform = 0.5235987755982988"),
        "{text}"
    );
    assert!(text.contains("timevarying_uniform = 0.5\n"), "{text}");
    assert!(text.contains("norm_mode = radius"), "{text}");
    assert!(text.contains("delay_independent = {2: Fails}"), "{text}");
}

#[test]
fn bounds_from_family_flags() {
    let out = run(&["bounds", "--family", "complete", "--n", "10"]);
    assert!(out.status.success());
    let expected = std::f64::consts::PI / 20.0;
    assert!(
        stdout(&out).contains(&format!("constant_uniform = {expected}")),
        "{}",
        stdout(&out)
    );
}

#[test]
fn bounds_two_norm_mode_is_no_larger() {
    let pick = |text: &str| -> f64 {
        text.lines()
            .find(|l| l.starts_with("timevarying_nonuniform = "))
            .and_then(|l| l.rsplit(' ').next())
            .unwrap()
            .parse()
            .unwrap()
    };
    // On the per-edge complete triangle the conventions genuinely differ:
    // shared-node products have radius 1 but two-norm 2, so the two-norm
    // margin is strictly smaller (1/8 vs 1/6).
    let radius = stdout(&run(&["bounds", "--family", "complete", "--n", "3"]));
    let two_norm = stdout(&run(&[
        "bounds",
        "--family",
        "complete",
        "--n",
        "3",
        "--norm-mode",
        "two-norm",
    ]));
    assert!(two_norm.contains("norm_mode = two-norm"));
    assert!((pick(&radius) - 1.0 / 6.0).abs() < 1e-9);
    assert!((pick(&two_norm) - 1.0 / 8.0).abs() < 1e-9);

    // On the two-class triangle the product operators happen to be
    // symmetric, so the two margins agree to rounding.
    let path = scenario("triangle-bounds.toml");
    let radius = stdout(&run(&["bounds", "--scenario", path.to_str().unwrap()]));
    let two_norm = stdout(&run(&[
        "bounds",
        "--scenario",
        path.to_str().unwrap(),
        "--norm-mode",
        "two-norm",
    ]));
    assert!(pick(&two_norm) <= pick(&radius) + 1e-12);
}

#[test]
fn bounds_rejects_disconnected_graph_with_exit_2() {
    let out = run(&[
        "bounds",
        "--scenario",
        scenario("two-components.toml").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(err.starts_with("error: 2 GraphDisconnected"), "{err}");
    assert!(err.contains("connected"), "{err}");
}

#[test]
fn shipped_experiments_reproduce_their_verdicts() {
    for (file, verdict) in [
        ("triangle-exp1.toml", "Converged"),
        ("triangle-exp2.toml", "Diverged"),
        ("triangle-exp3.toml", "Converged"),
        ("weighted-path-independent.toml", "Converged"),
    ] {
        let out = run(&["simulate", "--scenario", scenario(file).to_str().unwrap()]);
        assert!(out.status.success(), "{file}");
        let text = stdout(&out);
        assert!(
            text.contains(&format!("classification = {verdict}")),
            "{file}: {text}"
        );
    }
}

#[test]
fn simulate_writes_csv_and_verdict() {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("sim-out");
    let out = run(&[
        "simulate",
        "--scenario",
        scenario("triangle-exp3.toml").to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let verdict = std::fs::read_to_string(dir.join("verdict.txt")).unwrap();
    assert!(verdict.contains("classification = Converged"));
    assert!(verdict.contains("average_drift = "));
    let csv = std::fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,agent,dim,value,disagreement"));
    // Strided output: 60000 steps / 20 + endpoints, times 3 agents x 2 dims.
    let rows = lines.count();
    assert_eq!(rows % 6, 0);
    assert!(rows >= 6 * 3000);
    let first_data = csv.lines().nth(1).unwrap();
    assert!(first_data.starts_with("0,1,1,2,"), "{first_data}");
}

#[test]
fn simulate_step_too_large_exits_3() {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR"));
    let path = dir.join("bad-step.toml");
    std::fs::write(
        &path,
        r#"
n = 2
d = 1

[[edges]]
u = 1
v = 2
w = 1.0
class = 1

[[signals]]
class = 1
kind = "constant"
tau = 0.1

[initial]
values = [[1.0], [0.0]]

[simulation]
horizon = 10.0
h_step = 0.05
"#,
    )
    .unwrap();
    let out = run(&["simulate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: 3 StepTooLarge"));
}

#[test]
fn sweep_without_boundary_exits_4() {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR"));
    let path = dir.join("no-boundary.toml");
    std::fs::write(
        &path,
        r#"
n = 2
d = 1

[[edges]]
u = 1
v = 2
w = 1.0
class = 1

[initial]
values = [[1.0], [0.0]]

[simulation]
horizon = 40.0
h_step = 0.02

[sweep]
lo = 0.1
hi = 0.3
points = 3
"#,
    )
    .unwrap();
    let out = run(&["sweep", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: 4 NoSignChange"));
}

#[test]
fn sweep_locates_the_triangle_boundary() {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("sweep-out");
    let out = run(&[
        "sweep",
        "--scenario",
        scenario("triangle-sweep.toml").to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let critical: f64 = text
        .lines()
        .find(|l| l.starts_with("critical = "))
        .and_then(|l| l.rsplit(' ').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(
        (critical - std::f64::consts::PI / 6.0).abs() < 0.01,
        "critical {critical}"
    );
    let csv = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert!(csv.starts_with("tau,verdict,final_disagreement\n"));
    assert!(csv.contains("Converged"));
    assert!(csv.contains("Diverged"));
}

#[test]
fn crosscheck_families_pass() {
    let complete = run(&["crosscheck", "--family", "complete", "--n", "2..12"]);
    assert!(complete.status.success());
    assert!(!stdout(&complete).contains("fail"));

    let ring = run(&["crosscheck", "--family", "loop", "--n", "3..24"]);
    assert!(ring.status.success());
    assert!(!stdout(&ring).contains("fail"));
}

#[test]
fn loop_three_matches_complete_three() {
    let a = stdout(&run(&["bounds", "--family", "loop", "--n", "3"]));
    let b = stdout(&run(&["bounds", "--family", "complete", "--n", "3"]));
    assert_eq!(a, b);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let path = scenario("triangle-bounds.toml");
    let args = [
        "bounds",
        "--scenario",
        path.to_str().unwrap(),
        "--zero-class",
        "1",
    ];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(first.stdout, second.stdout);
}
