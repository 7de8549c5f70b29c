use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_volterra-sweep");
const SCENARIOS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn scenario(name: &str) -> String {
    format!("{SCENARIOS}/{name}.toml")
}

fn csv_rows(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn trivial_run_passes_with_constant_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "run",
        &scenario("trivial-static"),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).lines().all(|l| !l.starts_with("FAIL")));

    let (header, rows) = csv_rows(&dir.path().join("trajectory.csv"));
    assert_eq!(header, "t,x1,x2,d1,d2");
    assert_eq!(rows.len(), 401);
    for row in &rows {
        assert_eq!(&row[1..], &[1.0, 0.0, 0.0, 0.0]);
    }
    let (header, _) = csv_rows(&dir.path().join("envelope.csv"));
    assert_eq!(header, "t,‖x‖,r,‖d‖,θ");
    let (header, rows) = csv_rows(&dir.path().join("slow.csv"));
    assert_eq!(header, "t,residual");
    assert!(rows.iter().all(|r| r[1] == 0.0));
}

#[test]
fn understated_growth_exits_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(
        &path,
        "name = \"bad\"\ndimension = 1\ninterval = [0.0, 1.0]\nx0 = [0.0]\n\n[set]\nkind = \"whole-space\"\n\n[forcing]\nmatrix = [[3.0]]\nbeta = 1.0\n",
    )
    .unwrap();
    let out = run(&[
        "run",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("bad.toml:9:"), "{err}");
    assert!(err.contains("t = ") && err.contains("x = "), "{err}");
}

#[test]
fn malformed_file_exits_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("typo.toml");
    fs::write(
        &path,
        "name = \"typo\"\ndimension = 1\ninterval = [0.0, 1.0]\nx0 = [0.0]\n[set]\nkind = \"cube\"\n",
    )
    .unwrap();
    let out = run(&["run", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("typo.toml:6:"), "{}", stderr(&out));
}

#[test]
fn study_on_static_scenario_reports_exact() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "study",
        &scenario("trivial-static"),
        "--grids",
        "10,20,40",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("n,h,error,order\n"), "{text}");
    assert!(text.contains("fitted order exact"), "{text}");
    assert_eq!(
        fs::read_to_string(dir.path().join("study.csv"))
            .unwrap()
            .lines()
            .count(),
        4
    );
}

#[test]
fn study_on_linear_ode_is_first_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "study",
        &scenario("linear-ode"),
        "--grids",
        "50,100,200",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let line = stdout(&out)
        .lines()
        .find(|l| l.contains("fitted order"))
        .unwrap()
        .to_string();
    let p: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!((0.9..=1.1).contains(&p), "{line}");
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = run(&["run", &scenario("ball-volterra"), "--out", dir.path().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    }
    for file in ["trajectory.csv", "envelope.csv", "slow.csv"] {
        assert_eq!(
            fs::read(a.path().join(file)).unwrap(),
            fs::read(b.path().join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn dependence_against_sibling_file() {
    let dir = tempfile::tempdir().unwrap();
    let base = "dimension = 1\ninterval = [0.0, 1.0]\n\n[set]\nkind = \"half-space\"\nnormal = [1.0]\n";
    fs::write(
        dir.path().join("perturbed.toml"),
        format!("name = \"perturbed\"\nx0 = [0.05]\n{base}\n[forcing]\noffset = [0.1]\n"),
    )
    .unwrap();
    let main = dir.path().join("main.toml");
    fs::write(
        &main,
        format!("name = \"main\"\nx0 = [0.0]\n{base}\n[verify]\ndependence = \"perturbed.toml\"\ndependence_variant = \"shared-z\"\n"),
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&["run", main.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("PASS dependence (shared-z)"), "{}", stdout(&out));
    let (header, rows) = csv_rows(&out_dir.join("dependence.csv"));
    assert_eq!(header, "t,measured,bound,Δ,δ,ε,ν");
    // x₂ − x₁ = 0.05 + 0.1t
    let last = rows.last().unwrap();
    assert!((last[1] - 0.15).abs() < 1e-12);
    assert!(last[2] >= last[1]);
}

#[test]
fn verification_failure_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("slow.toml");
    // a sphere has no tangent-cone projection, so the requested slow check cannot pass
    fs::write(
        &path,
        "name = \"slow\"\ndimension = 2\ninterval = [0.0, 1.0]\nx0 = [1.0, 0.0]\n\n[set]\nkind = \"sphere\"\ncenter = [0.0, 0.0]\nradius = 1.0\n\n[verify]\nslow = true\n",
    )
    .unwrap();
    let out = run(&[
        "run",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("FAIL slow"), "{}", stdout(&out));
}

#[test]
fn selftest_passes() {
    let out = run(&["selftest"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).lines().count() >= 6 + 11);
}
