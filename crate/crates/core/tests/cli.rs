use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn quasihom(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quasihom")).args(args).current_dir(dir).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMOOTH: &str = r#"
[matrix]
builtin = "fibonacci"

[model]
family = "power-law"
p = 3.0
coefficient = { terms = [
    { coefficient = 2.0, k = [0, 0], kind = "cos" },
    { coefficient = 0.5, k = [1, 0], kind = "cos" },
    { coefficient = 0.5, k = [1, 1], kind = "cos" },
] }

[cell]
bandlimit = 8
"#;

#[test]
fn usage_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(quasihom(&["bogus"], dir.path()).status.code(), Some(2));
    assert_eq!(quasihom(&["cell"], dir.path()).status.code(), Some(2));
    assert_eq!(quasihom(&["cell", "--config", "missing.toml"], dir.path()).status.code(), Some(2));
    let unknown = write(dir.path(), "unknown.toml", "[matrix]\nbuiltin = \"fibonacci\"\ncolour = 3\n");
    let o = quasihom(&["check-matrix", "--config", &unknown], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"), "{}", stderr(&o));
    let no_point = write(dir.path(), "nopoint.toml", SMOOTH);
    assert_eq!(quasihom(&["cell", "--config", &no_point], dir.path()).status.code(), Some(2));
    assert_eq!(quasihom(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn invalid_worker_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("fib_linear.toml");
    let o = Command::new(env!("CARGO_BIN_EXE_quasihom"))
        .args(["check-matrix", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .env("QUASIHOM_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failing_criterion_reports_the_witness() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("counterexample.toml");
    let o = quasihom(&["check-matrix", "--config", cfg.to_str().unwrap(), "--out", "ce"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("[2, -1]"), "{}", stderr(&o));
    let report = std::fs::read_to_string(dir.path().join("ce/report.json")).unwrap();
    assert!(report.contains("\"exact-fail\""));
}

#[test]
fn check_matrix_writes_report_and_meta() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("fib_linear.toml");
    let o = quasihom(&["check-matrix", "--config", cfg.to_str().unwrap(), "--out", "run"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/report.json")).unwrap()).unwrap();
    assert_eq!(report["artifact"], "quasihom");
    assert_eq!(report["command"], "check-matrix");
    assert_eq!(report["config"]["check"]["radius"], 16);
    assert_eq!(report["result"]["criterion"]["certificate"]["kind"], "exact-pass");
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/meta.json")).unwrap()).unwrap();
    assert!(meta["workers"].as_u64().unwrap() >= 1);
}

#[test]
fn misdeclared_model_fails_audit() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMOOTH.replace("p = 3.0", "p = 3.0\nconstants = { c2 = 0.5 }");
    let cfg = write(dir.path(), "bad.toml", &text);
    let o = quasihom(&["audit-model", "--config", &cfg, "--out", "a"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let good = write(dir.path(), "good.toml", SMOOTH);
    assert_eq!(quasihom(&["audit-model", "--config", &good, "--out", "b"], dir.path()).status.code(), Some(0));
}

#[test]
fn zero_gradient_cell_has_zero_flux() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "zero.toml", &format!("{SMOOTH}\n[point]\nx = [0.5]\nxi = [0.0]\n"));
    let o = quasihom(&["cell", "--config", &cfg, "--out", "c"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("c/report.json")).unwrap()).unwrap();
    assert_eq!(report["result"]["hom_flux"][0].as_f64(), Some(0.0));
    assert!(dir.path().join("c/cell_history.csv").exists());
}

#[test]
fn non_converging_cell_solve_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMOOTH.replace("bandlimit = 8", "bandlimit = 8\nmax_iters = 1") + "\n[point]\nx = [0.5]\nxi = [1.0]\n";
    let cfg = write(dir.path(), "short.toml", &text);
    let o = quasihom(&["cell", "--config", &cfg, "--out", "c"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn under_resolved_sweep_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SMOOTH}\n[macro]\nmesh_size = 16\n\n[sweep]\nrefinement = 10\n");
    let cfg = write(dir.path(), "coarse.toml", &text);
    assert_eq!(quasihom(&["converge", "--config", &cfg, "--out", "s"], dir.path()).status.code(), Some(2));
}

#[test]
fn small_sweep_writes_tables_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{}\n[macro]\nmesh_size = 2000\n\n[sweep]\neta0 = 0.05\ncount = 2\nrefinement = 20\n\n\
         [[test_functions]]\npsi = \"x\"\nk = [0, 0]\n",
        SMOOTH.replace("family = \"power-law\"\np = 3.0", "family = \"linear-scalar\"")
    );
    let cfg = write(dir.path(), "sweep.toml", &text);
    let o = quasihom(&["converge", "--config", &cfg, "--out", "s"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("s/errors.csv")).unwrap();
    assert!(csv.starts_with("eta,l2_error,"));
    assert_eq!(csv.lines().count(), 3);
    assert!(std::fs::read_to_string(dir.path().join("s/errors.svg")).unwrap().starts_with("<svg"));
    let o = quasihom(&["plot", "s/errors.csv", "--out", "p/plot.svg", "--scale", "linear"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("p/plot.svg").exists());
}

#[test]
fn ergodic_and_fine_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("fib_linear.toml");
    let cfg = cfg.to_str().unwrap();
    assert_eq!(quasihom(&["ergodic", "--config", cfg, "--out", "e"], dir.path()).status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("e/ergodic.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,error,bound"));
    assert_eq!(csv.lines().count(), 4);
    let o = quasihom(&["fine", "--config", cfg, "--out", "f"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let solution = std::fs::read_to_string(dir.path().join("f/solution.csv")).unwrap();
    assert_eq!(solution.lines().next(), Some("x,value"));
    assert_eq!(solution.lines().count(), 131072 + 2);
}
