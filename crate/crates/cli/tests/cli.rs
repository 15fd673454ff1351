use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL_WORLD: &str = r#"
seed = 3

[data.world]
n_stations = 8
n_passengers = 150
seed = 11
train = 900
holdout = 450
test = 450

[privacy.attack.forest]
n_trees = 20

[utility.prediction]
folds = 2

[[models]]
kind = "independent"

[[models]]
kind = "gmm"

[models.config]
n_components = 3
"#;

fn rpu(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rpu")).args(args).current_dir(cwd).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_config(dir: &Path) -> String {
    let p = dir.join("small.toml");
    fs::write(&p, SMALL_WORLD).unwrap();
    p.to_string_lossy().into_owned()
}

fn sim(dir: &Path, cfg: &str) {
    let o = rpu(&["--config", cfg, "--out", "data", "simulate"], dir);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn generate_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    for name in ["a.csv", "b.csv"] {
        let o = rpu(&["--config", &cfg, "generate", "--model", "gmm", "--n", "700", "--output", name], dir.path());
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 701);

    let o = rpu(&["--config", &cfg, "--seed", "99", "generate", "--model", "gmm", "--n", "700", "--output", "c.csv"], dir.path());
    assert_eq!(code(&o), 0);
    assert_ne!(fs::read(dir.path().join("a.csv")).unwrap(), fs::read(dir.path().join("c.csv")).unwrap());
}

#[test]
fn saved_model_resamples_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let o = rpu(
        &["--config", &cfg, "generate", "--model", "independent", "--n", "300", "--output", "fit.csv", "--save-model", "m.json"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = rpu(&["--config", &cfg, "generate", "--model-file", "m.json", "--n", "300", "--output", "file.csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read(dir.path().join("fit.csv")).unwrap(), fs::read(dir.path().join("file.csv")).unwrap());
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let o = rpu(&["--config", &cfg, "generate", "--model", "vae"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bayes_net"), "{}", stderr(&o));

    assert_eq!(code(&rpu(&["--config", &cfg, "--jobs", "0", "benchmark"], dir.path())), 2);
    assert_eq!(code(&rpu(&["frobnicate"], dir.path())), 2);

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, format!("{SMALL_WORLD}\nbogus = 1\n")).unwrap();
    let o = rpu(&["--config", bad.to_str().unwrap(), "benchmark"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bogus"), "{}", stderr(&o));

    let empty = dir.path().join("empty.toml");
    fs::write(&empty, "[data.world]\ntrain = 300\nholdout = 100\ntest = 100\n").unwrap();
    assert_eq!(code(&rpu(&["--config", empty.to_str().unwrap(), "benchmark"], dir.path())), 2);
}

#[test]
fn missing_input_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("csv.toml");
    fs::write(&cfg, "[data]\ntrain = \"nope/train.csv\"\nholdout = \"nope/holdout.csv\"\n").unwrap();
    let o = rpu(&["--config", cfg.to_str().unwrap(), "evaluate", "x.csv"], dir.path());
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

/// Two copies of real splits plus one broken file: the copies are scored,
/// the broken file becomes a failure entry, and the report validates.
#[test]
fn evaluate_copies_and_partial_failure() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    sim(d, &small_config(d));
    fs::write(d.join("broken.csv"), "origin,destination\n1,2,3\n").unwrap();
    fs::write(
        d.join("csv.toml"),
        "[data]\ntrain = \"data/train.csv\"\nholdout = \"data/holdout.csv\"\n\n[privacy.knn]\nk = 1\n\n[privacy.attack.forest]\nn_trees = 20\n\n[utility.prediction]\nfolds = 2\n",
    )
    .unwrap();
    let o = rpu(
        &["--config", "csv.toml", "--out", "ev", "evaluate", "data/holdout.csv", "data/train.csv", "broken.csv"],
        d,
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let report: Value = serde_json::from_str(&fs::read_to_string(d.join("ev/report.json")).unwrap()).unwrap();
    assert_eq!(report["data"]["test_source"], "holdout");
    let failures = report["failures"].as_array().unwrap();
    assert_eq!(failures.len(), 1);
    assert_eq!(failures[0]["model"], "broken");
    assert_eq!(failures[0]["stage"], "load");

    let models = report["models"].as_array().unwrap();
    let by = |name: &str| models.iter().find(|m| m["model"] == name).unwrap();
    let (hold, train) = (by("holdout"), by("train"));
    for scale in ["r_pop", "r_group"] {
        for d in ["kld", "jsd", "emd"] {
            assert_eq!(hold["raw"][scale][d].as_f64().unwrap(), 0.0, "{scale}.{d}");
        }
    }
    assert_eq!(hold["raw"]["r_record"].as_f64().unwrap(), 1.0);
    assert_eq!(train["raw"]["p_knn_pop_ratio"].as_f64().unwrap(), 0.0);

    let cards = report["scorecard"]["cards"].as_array().unwrap();
    assert_eq!(cards.len(), 2);
    let card = |name: &str| cards.iter().find(|c| c["model"] == name).unwrap();
    assert_eq!(card("holdout")["R"].as_f64().unwrap(), 1.0);
    assert_eq!(card("train")["P_p"].as_f64().unwrap(), 0.0);

    let o = rpu(&["report", "ev"], d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("holdout"));
    for f in ["leaderboard.txt", "scorecard.csv", "scorecard.json", "manifest.json", "plots/divergence_population.csv"] {
        assert!(d.join("ev").join(f).is_file(), "{f}");
    }
}

#[test]
fn benchmark_report_validates_and_tampering_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = small_config(d);
    let o = rpu(&["--config", &cfg, "--out", "bench", "--jobs", "2", "benchmark"], d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let board = String::from_utf8_lossy(&o.stdout).into_owned();
    assert!(board.contains("independent") && board.contains("gmm"), "{board}");
    assert_eq!(code(&rpu(&["report", "bench/report.json"], d)), 0);

    let mut report: Value = serde_json::from_str(&fs::read_to_string(d.join("bench/report.json")).unwrap()).unwrap();
    report["scorecard"]["cards"][0]["overall"] = Value::from(1.5);
    fs::write(d.join("tampered.json"), serde_json::to_string(&report).unwrap()).unwrap();
    let o = rpu(&["--out", "t", "report", "tampered.json"], d);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("overall"), "{}", stderr(&o));
}
