use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn sbmq(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbmq"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn help_lists_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = sbmq(dir.path(), &["sweep", "--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for needle in ["[default: 5]", "[default: 0.000001]", "[default: min(30, N/10)]", "[default: 10]"] {
        assert!(text.contains(needle), "missing {needle}");
    }
}

#[test]
fn spectral_counts_football_conferences() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("football.txt");
    let o = sbmq(dir.path(), &["spectral", "--matrix", "nb", "--input", input.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("q_star=10"));
    assert!(dir.path().join("spectral.json").exists());
}

#[test]
fn sweep_writes_reports_deterministically() {
    let input = fixture("karate.txt");
    let args = [
        "--seed", "7", "sweep", "--input", input.to_str().unwrap(), "--qmax", "3", "--restarts", "2",
        "--greedy-runs", "2",
    ];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let oa = sbmq(a.path(), &args);
    assert!(oa.status.success(), "{}", String::from_utf8_lossy(&oa.stderr));
    let ob = sbmq(b.path(), &args);
    assert!(ob.status.success());
    for file in ["sweep.csv", "sweep.json"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert_eq!(x, y, "{file} differs between runs");
    }
    let csv = std::fs::read_to_string(a.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("q,"));
}

#[test]
fn generate_then_infer() {
    let dir = tempfile::tempdir().unwrap();
    let o = sbmq(dir.path(), &["--seed", "3", "generate", "--n", "200", "--q", "2", "--c", "8", "--eps", "0.1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for file in ["edges.txt", "labels.txt", "generate.json"] {
        assert!(dir.path().join(file).exists(), "{file}");
    }
    let edges = dir.path().join("edges.txt");
    let o = sbmq(dir.path(), &["infer", "--input", edges.to_str().unwrap(), "--q", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let labels = std::fs::read_to_string(dir.path().join("labels_q2.txt")).unwrap();
    assert_eq!(labels.lines().filter(|l| !l.starts_with('#')).count(), 200);
    assert!(dir.path().join("infer_q2.json").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(sbmq(dir.path(), &["sweep"]).status.code(), Some(2));
    assert_eq!(sbmq(dir.path(), &["greedy", "--input", "/nonexistent/edges"]).status.code(), Some(3));
    let input = fixture("karate.txt");
    let o = sbmq(dir.path(), &["infer", "--input", input.to_str().unwrap(), "--q", "0"]);
    assert_eq!(o.status.code(), Some(2));
}
