mod common;

use std::fs;
use std::path::{Path, PathBuf};

use mibrv::io::write_dataset;
use mibrv::synthetic::{generate, SyntheticConfig};

use common::run_cli;

fn write_synthetic(dir: &Path, name: &str, cfg: &SyntheticConfig) -> PathBuf {
    let path = dir.join(name);
    write_dataset(&generate(cfg).unwrap(), fs::File::create(&path).unwrap()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn featurize_two_bags_by_hand() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("tiny.txt");
    fs::write(&data, "A,1,0,0\nA,1,3,0\nB,-1,0,0\nB,-1,0,4\n").unwrap();
    let (code, out, err) = run_cli(&["featurize", s(&data), "--ops", "3", "--k", "1"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out, "1 2:1\n-1 1:1\n");

    let file = dir.path().join("tiny.svm");
    let (code, _, _) = run_cli(&["featurize", s(&data), "--ops", "3", "--k", "1", "-o", s(&file)]);
    assert_eq!(code, 0);
    assert_eq!(fs::read_to_string(file).unwrap(), out);

    let (code, out, _) = run_cli(&["featurize", s(&data), "--refs", s(&data), "--ops", "3", "--k", "1"]);
    assert_eq!((code, out.as_str()), (0, "1 2:1\n-1 1:1\n"));
}

#[test]
fn usage_and_input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_synthetic(dir.path(), "d.txt", &SyntheticConfig { bags: 8, ..SyntheticConfig::default() });
    for args in [
        vec!["featurize", "/nonexistent/file.txt"],
        vec!["featurize", s(&data), "--ops", ""],
        vec!["featurize", s(&data), "--ops", "7"],
        vec!["featurize", s(&data), "--bogus"],
        vec!["sweep", s(&data), "--k", ""],
        vec!["cv", s(&data), "--folds", "9"],
        vec!["cv", s(&data), "--c", "1", "--c-grid", "auto"],
    ] {
        let (code, _, err) = run_cli(&args);
        assert_eq!(code, 2, "{args:?}: {err}");
        assert!(!err.is_empty());
    }
}

#[test]
fn train_then_predict() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_synthetic(dir.path(), "d.txt", &SyntheticConfig { bags: 60, ..SyntheticConfig::default() });
    let model = dir.path().join("m.txt");
    let (code, _, err) = run_cli(&["train", s(&data), "-o", s(&model)]);
    assert_eq!(code, 0, "{err}");
    let (code, out, err) = run_cli(&["predict", s(&model), s(&data), s(&data)]);
    assert_eq!(code, 0, "{err}");

    let truth: std::collections::HashMap<String, String> = fs::read_to_string(&data)
        .unwrap()
        .lines()
        .map(|l| {
            let mut f = l.split(',');
            (f.next().unwrap().to_string(), f.next().unwrap().to_string())
        })
        .collect();
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 60);
    let mut correct = 0;
    for line in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        let d: f64 = f[2].parse().unwrap();
        assert_eq!(f[1], if d >= 0.0 { "1" } else { "-1" });
        correct += usize::from(truth[f[0]] == f[1]);
    }
    assert!(correct as f64 / 60.0 >= 0.95);

    let other = write_synthetic(dir.path(), "o.txt", &SyntheticConfig { bags: 60, seed: 99, ..SyntheticConfig::default() });
    let (code, _, err) = run_cli(&["predict", s(&model), s(&other), s(&data)]);
    assert_eq!(code, 2);
    assert!(err.contains("fingerprint"), "{err}");
}

#[test]
fn train_with_c_grid_records_selection() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_synthetic(dir.path(), "d.txt", &SyntheticConfig { bags: 30, ..SyntheticConfig::default() });
    let model = dir.path().join("m.txt");
    let (code, _, err) = run_cli(&["train", s(&data), "-o", s(&model), "--c-grid", "auto", "--ops", "2,4,5"]);
    assert_eq!(code, 0, "{err}");
    let text = fs::read_to_string(model).unwrap();
    assert!(text.contains("ops 2,4,5"));
}

#[test]
fn cv_reports_shape_and_records() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_synthetic(dir.path(), "d.txt", &SyntheticConfig::default());
    let records = dir.path().join("r.txt");
    let (code, out, err) = run_cli(&["cv", s(&data), "--records", s(&records)]);
    assert_eq!(code, 0, "{err}");
    let mean: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("mean_accuracy: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(mean >= 0.95);
    let rec = fs::read_to_string(records).unwrap();
    assert_eq!(rec.lines().count(), 100);
    assert!(rec.lines().all(|l| l.split_whitespace().count() == 5));
}

#[test]
fn sweep_single_point_equals_cv() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_synthetic(dir.path(), "d.txt", &SyntheticConfig { bags: 40, ..SyntheticConfig::default() });
    let common = ["--repeats", "2", "--folds", "4", "--seed", "3"];
    let mut cv = vec!["cv", s(&data), "--k", "3", "--ops", "2,4,5", "--c", "0.5"];
    cv.extend(common);
    let (code, cv_out, _) = run_cli(&cv);
    assert_eq!(code, 0);
    let mut sweep = vec!["sweep", s(&data), "--k", "3", "--ops", "2,4,5", "--c", "0.5"];
    sweep.extend(common);
    let (code, sweep_out, _) = run_cli(&sweep);
    assert_eq!(code, 0);
    let summary = cv_out.lines().find_map(|l| l.strip_prefix("summary: ")).unwrap();
    let rows: Vec<&str> = sweep_out.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].ends_with(summary), "{} vs {summary}", rows[0]);

    let (code, table, _) = run_cli(&["sweep", s(&data), "--repeats", "1", "--folds", "4"]);
    assert_eq!(code, 0);
    let ks: Vec<&str> = table.lines().skip(1).map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(ks, ["1", "2", "3", "4"]);
}

#[test]
fn help_goes_to_stdout() {
    let (code, out, _) = run_cli(&["--help"]);
    assert_eq!(code, 0);
    for cmd in ["featurize", "train", "predict", "cv", "sweep"] {
        assert!(out.contains(cmd));
    }
}

#[test]
fn brv_export_matches_scikit_learn_reader() {
    let script = r#"
import sys
from sklearn.datasets import load_svmlight_file
X, y = load_svmlight_file(sys.argv[1], n_features=int(sys.argv[2]))
print(X.shape[0], X.shape[1], int((y > 0).sum()))
"#;
    let probe = std::process::Command::new("python3").args(["-c", "import sklearn"]).output();
    if !matches!(probe, Ok(ref o) if o.status.success()) {
        eprintln!("skipping: python3 with scikit-learn not available");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let data = write_synthetic(dir.path(), "d.txt", &SyntheticConfig { bags: 20, ..SyntheticConfig::default() });
    let svm = dir.path().join("d.svm");
    let (code, _, _) = run_cli(&["featurize", s(&data), "-o", s(&svm)]);
    assert_eq!(code, 0);
    let out = std::process::Command::new("python3")
        .args(["-c", script, s(&svm), "120"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "20 120 10");
}
