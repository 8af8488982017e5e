use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use wsvd_core::{generate_synthetic, SyntheticSpec};

fn wsvd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wsvd")).args(args).output().unwrap()
}

/// A small synthetic rating file in ml100k layout.
fn write_ratings(dir: &Path) -> PathBuf {
    let ds = generate_synthetic(&SyntheticSpec {
        users: 30,
        items: 25,
        ratings_per_user: 6,
        k_true: 2,
        weights: vec![1.5, 0.5],
        noise_sd: 0.2,
        seed: 4,
    })
    .unwrap();
    let text: String = ds
        .ratings()
        .iter()
        .map(|r| {
            format!(
                "{}\t{}\t{}\t0\n",
                ds.users().raw_id(r.user).unwrap(),
                ds.items().raw_id(r.item).unwrap(),
                r.value
            )
        })
        .collect();
    let path = dir.join("ratings.tsv");
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn zero_epochs_writes_header_only_curve() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_ratings(dir.path());
    let out = dir.path().join("out");
    let o = wsvd(&["run", "--dataset", s(&data), "--epochs", "0", "--output-dir", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read_to_string(out.join("curve.csv")).unwrap(),
        "epoch,train_rmse,test_rmse,epoch_seconds\n"
    );
    assert_eq!(fs::read_to_string(out.join("weights.csv")).unwrap().lines().count(), 1);
    let summary = fs::read_to_string(out.join("summary.toml")).unwrap();
    assert!(summary.contains("epochs = 0"), "{summary}");
    assert!(out.join("model.wsvd").is_file());
}

#[test]
fn identical_runs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_ratings(dir.path());
    let config = dir.path().join("run.toml");
    fs::write(&config, "model = \"svdpp\"\nk = 3\nepochs = 4\nseed = 8\n").unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = wsvd(&["run", "--config", s(&config), "--dataset", s(&data), "--output-dir", s(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["summary.toml", "model.wsvd"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    // curves agree once the timing column is dropped
    let strip = |p: PathBuf| -> Vec<String> {
        fs::read_to_string(p)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_owned())
            .collect()
    };
    assert_eq!(strip(a.join("curve.csv")), strip(b.join("curve.csv")));
    let summary = fs::read_to_string(a.join("summary.toml")).unwrap();
    assert!(summary.contains("model = \"svdpp\"") && summary.contains("factors = 3"), "{summary}");
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_ratings(dir.path());
    let config = dir.path().join("run.toml");
    fs::write(&config, "model = \"svd\"\nepochs = 2\n").unwrap();
    let out = dir.path().join("o");
    let o = wsvd(&["run", "--config", s(&config), "--dataset", s(&data), "--model", "pmf", "--output-dir", s(&out)]);
    assert!(o.status.success());
    let summary = fs::read_to_string(out.join("summary.toml")).unwrap();
    assert!(summary.contains("model = \"pmf\"") && summary.contains("epochs = 2"), "{summary}");
}

#[test]
fn predict_and_inspect_use_the_saved_model() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_ratings(dir.path());
    let out = dir.path().join("o");
    let o = wsvd(&["run", "--dataset", s(&data), "--epochs", "3", "--k", "4", "--output-dir", s(&out)]);
    assert!(o.status.success());
    let model = out.join("model.wsvd");

    let o = wsvd(&["predict", "--model", s(&model), "--user", "0", "--item", "1"]);
    assert!(o.status.success());
    let r: f64 = String::from_utf8(o.stdout).unwrap().trim().parse().unwrap();
    assert!(r.is_finite());
    let o = wsvd(&["predict", "--model", s(&model), "--user", "nobody", "--item", "nothing", "--clip"]);
    let r: f64 = String::from_utf8(o.stdout).unwrap().trim().parse().unwrap();
    assert!((1.0..=5.0).contains(&r));

    let o = wsvd(&["inspect", "--model", s(&model)]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("relative"), "{text}");
    assert_eq!(text.lines().filter(|l| l.trim_start().starts_with(char::is_numeric)).count(), 4);

    let o = wsvd(&["inspect", "--kind", "wsvd", "--users", "943", "--items", "1682"]);
    let text = String::from_utf8(o.stdout).unwrap();
    for want in ["pmf             39375", "svd             42000", "svdpp           67230", "wsvd            42015"] {
        assert!(text.contains(want), "{text}");
    }
}

#[test]
fn sweep_writes_sorted_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_ratings(dir.path());
    let out = dir.path().join("sw");
    let o = wsvd(&[
        "sweep", "--dataset", s(&data), "--epochs", "2", "--ks", "4,2", "--lambdas", "0.1",
        "--models", "wsvd,svd", "--workers", "2", "--output-dir", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let keys: Vec<String> = csv.lines().map(|l| l.rsplit_once(',').unwrap().0.to_owned()).collect();
    assert_eq!(keys, ["k,lambda,model", "2,0.1,svd", "2,0.1,wsvd", "4,0.1,svd", "4,0.1,wsvd"]);
}

#[test]
fn failures_map_to_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_ratings(dir.path());

    let o = wsvd(&["run", "--dataset", s(&dir.path().join("missing.tsv")), "--output-dir", s(dir.path())]);
    assert_eq!(o.status.code(), Some(3));

    let o = wsvd(&["run", "--dataset", s(&data), "--lr", "1e200", "--epochs", "3", "--output-dir", s(dir.path())]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));

    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = wsvd(&["run", "--dataset", s(&data), "--epochs", "1", "--output-dir", s(&blocker.join("sub"))]);
    assert_eq!(o.status.code(), Some(5));

    let o = wsvd(&["run", "--dataset", s(&data), "--model", "knn"]);
    assert_eq!(o.status.code(), Some(2));

    let o = wsvd(&["predict", "--model", s(&data), "--user", "1", "--item", "1"]);
    assert_eq!(o.status.code(), Some(6));
}
