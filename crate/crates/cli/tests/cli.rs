//! End-to-end runs of the binary: exit codes, diagnostics, overrides and
//! reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use calderon_core::fixtures;
use calderon_core::opfile::read_operator;
use calderon_core::symbol::CospherePoint;
use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture(name: &str) -> PathBuf {
    root().join("fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    run_env(args, &[])
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_calderon-lab"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn fixture_files_match_the_builtin_operators() {
    let pt = CospherePoint::new(vec![0.3], vec![1.0]).unwrap();
    for name in fixtures::NAMES {
        let file = read_operator(&fixture(&format!("{name}.json"))).unwrap();
        let built = fixtures::by_name(name, 7).unwrap();
        assert_eq!((file.m, file.rank(), file.geometry), (built.m, built.rank(), built.geometry), "{name}");
        let pt = if built.geometry.boundary_dim() == 2 {
            CospherePoint::new(vec![0.1, 0.2], vec![0.6, 0.8]).unwrap()
        } else {
            pt.clone()
        };
        for l in 0..=built.m {
            assert_eq!(file.coefficient_at(l, &pt).unwrap(), built.coefficient_at(l, &pt).unwrap(), "{name} l={l}");
        }
    }
}

#[test]
fn rank_deficient_projector_is_reported_not_elliptic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sl.json");
    let o = run(&[
        "sl-check",
        "--op",
        p(&fixture("laplace_circle.json")),
        "--proj",
        p(&fixture("projectors/rank_deficient.json")),
        "--grid",
        "circle:128",
        "--json",
        p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = report(&out);
    assert_eq!(r["results"]["verdict"], "not_elliptic");
    assert_eq!(r["results"]["regularity"], "neither");
    assert!(r["results"]["failing_points"].as_u64().unwrap() >= 1);
    assert_eq!(r["conventions"]["boundary_condition"], "B = ker P");
}

#[test]
fn dirichlet_laplace_is_elliptic() {
    let o = run(&[
        "sl-check",
        "--op",
        p(&fixture("laplace_circle.json")),
        "--proj",
        p(&fixture("projectors/dirichlet.json")),
        "--grid",
        "circle:32",
    ]);
    assert_eq!(code(&o), 0);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["results"]["verdict"], "elliptic");
    assert!(r["results"]["relative_margin"].as_f64().unwrap() > 0.1);
}

#[test]
fn malformed_operator_exits_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(fixture("laplace_circle.json")).unwrap()).unwrap();
    v["coeffs"][1]["l"] = Value::from("two");
    std::fs::write(&bad, v.to_string()).unwrap();
    let o = run(&["symbol", "--op", p(&bad)]);
    assert_eq!(code(&o), 2);
    let e = stderr(&o);
    assert!(e.contains("$.coeffs[1].l"), "{e}");
    assert!(e.contains("bad.json"), "{e}");
}

#[test]
fn truncated_json_exits_2_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("cut.json");
    std::fs::write(&bad, "{\"geometry\": \"circle\",\n \"coeffs\": [\n").unwrap();
    let o = run(&["symbol", "--op", p(&bad)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn unknown_projector_kind_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("proj.json");
    std::fs::write(&bad, r#"{"kind": "sideways"}"#).unwrap();
    let o = run(&["sl-check", "--op", p(&fixture("laplace_circle.json")), "--proj", p(&bad)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("$.kind"));
}

#[test]
fn real_conormal_roots_exit_3_with_context() {
    let dir = tempfile::tempdir().unwrap();
    let hyp = dir.path().join("wave.json");
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(fixture("laplace_circle.json")).unwrap()).unwrap();
    // D_t^2 - xi^2: roots +-xi on the real axis
    for c in v["coeffs"].as_array_mut().unwrap() {
        if c["l"] == 2 {
            c["entries"][0]["monomials"][0]["coef"] = serde_json::json!([-1.0, 0.0]);
        }
    }
    std::fs::write(&hyp, v.to_string()).unwrap();
    let o = run(&["symbol", "--op", p(&hyp), "--grid", "circle:8"]);
    assert_eq!(code(&o), 3);
    let e = stderr(&o);
    assert!(e.contains("symbol") && e.contains("real axis"), "{e}");
}

#[test]
fn tolerance_override_changes_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w.json");
    let base = ["weyl", "--manifold", "disc", "--bc", "dirichlet", "--count", "2000", "--json", p(&out)];
    let o = run(&base);
    // the boundary term keeps the median about 2.6% above c_D at this count
    assert_eq!(code(&o), 1);
    let r = report(&out);
    assert_eq!(r["tolerances"]["weyl_median"], 0.02);
    assert!((r["results"]["c_d"].as_f64().unwrap() - 4.0).abs() < 1e-9);

    let mut args = base.to_vec();
    args.extend(["--tol-override", "weyl_median=0.03"]);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(report(&out)["tolerances"]["weyl_median"], 0.03);

    let o = run(&["index", "--trunc", "8", "--tol-override", "no_such_key=1"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("unknown tolerance"));
}

#[test]
fn aps_index_follows_the_cut() {
    for k in [-2, 0, 3] {
        let ks = k.to_string();
        let o = run(&["index", "--model", "d0", "--aps-cut", &ks, "--trunc", "32"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let r: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(r["results"]["index"]["index"], k);
    }
}

#[test]
fn adjoint_condition_of_aps_for_dirac() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("adj.csv");
    let o = run(&[
        "adjoint-bc",
        "--op",
        p(&fixture("dirac_circle.json")),
        "--proj",
        p(&fixture("projectors/aps.json")),
        "--csv",
        p(&csv),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["results"]["adjoint_verdict"], "elliptic");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("index,covector,pairing_residual,dim_b,dim_b_star"));
    assert_eq!(text.lines().count(), 1 + 32);
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let op = fixture("random_order3_rank2.json");
    let args = ["symbol", "--op", p(&op), "--grid", "circle:32"];
    let one = run_env(&args, &[("CALDERON_THREADS", "1")]);
    let four = run_env(&args, &[("CALDERON_THREADS", "4")]);
    assert_eq!(code(&one), 0, "{}", stderr(&one));
    assert_eq!(one.stdout, four.stdout);
    let again = run_env(&args, &[("CALDERON_THREADS", "1")]);
    assert_eq!(one.stdout, again.stdout);
}

#[test]
fn bad_thread_count_is_an_input_error() {
    let o = run_env(&["index", "--trunc", "8"], &[("CALDERON_THREADS", "many")]);
    assert_eq!(code(&o), 2);
}

#[test]
fn disc_writes_per_mode_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("modes.csv");
    let o = run(&["disc", "--model", "d0", "--trunc", "8", "--csv", p(&csv)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    // 17 modes, two 2x2 matrices each
    assert_eq!(text.lines().count(), 1 + 17 * 2 * 4);
    assert!(text.lines().any(|l| l.starts_with("0,chi_plus,")));
}
