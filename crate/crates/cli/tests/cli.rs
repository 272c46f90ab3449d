use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infant-motion"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = bin(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn count(dir: &Path, suffix: &str) -> usize {
    fs::read_dir(dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(suffix))
        .count()
}

fn synth(dir: &Path, subjects: &str, duration: &str, seed: &str) {
    ok(&["synth", "--out", p(dir), "--subjects", subjects, "--duration", duration, "--seed", seed]);
}

#[test]
fn synth_writes_expected_files() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    synth(&a, "12", "30", "1");
    assert_eq!(count(&a, ".rec.csv"), 12);
    assert_eq!(count(&a, ".jsonl") - count(&a, ".truth.jsonl"), 36);
    assert_eq!(count(&a, ".truth.jsonl"), 12);

    let b = tmp.path().join("b");
    synth(&b, "12", "30", "2");
    let ra = fs::read_to_string(a.join("S01.rec.csv")).unwrap();
    let rb = fs::read_to_string(b.join("S01.rec.csv")).unwrap();
    assert_ne!(ra, rb);
    assert_eq!(ra.lines().next(), rb.lines().next());
}

#[test]
fn synth_eval_report_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "3", "90", "0");

    let run = |out: &Path| {
        ok(&[
            "eval", "--data", p(&data), "--out", p(out), "--classifier", "svm", "--iar", "off", "--jobs", "1",
        ])
    };
    let e1 = tmp.path().join("e1");
    let stdout = run(&e1);
    assert!(stdout.contains("**Full agreement frames**") && stdout.contains("**All frames**"));
    let e2 = tmp.path().join("e2");
    run(&e2);
    let m1 = fs::read(e1.join("metrics.json")).unwrap();
    assert_eq!(m1, fs::read(e2.join("metrics.json")).unwrap());

    let metrics: serde_json::Value = serde_json::from_slice(&m1).unwrap();
    assert_eq!(metrics["run_config"]["classifier"], "svm");
    assert_eq!(metrics["run_config"]["iar"]["enabled"], false);
    let tracks = metrics["loso"]["tracks"].as_array().unwrap();
    assert_eq!(tracks.len(), 2);
    for t in tracks {
        assert_eq!(t["subsets"].as_array().unwrap().len(), 2);
        for s in t["subsets"].as_array().unwrap() {
            for m in ["acc", "uar", "uap", "uaf"] {
                assert!(s["pooled"][m].is_number());
            }
        }
    }

    let ab = tmp.path().join("ab");
    ok(&[
        "ablate", "--data", p(&data), "--out", p(&ab), "--classifier", "svm", "--iar", "off", "--track", "posture",
        "--configs", "la;all",
    ]);
    let rendered = tmp.path().join("rendered");
    ok(&["report", "--bundle", p(&e1), "--bundle", p(&ab), "--out", p(&rendered)]);
    for f in ["table1.md", "ablation.md", "ablation_posture.svg", "profiles_movement.svg", "per_class_f_posture.svg"] {
        assert!(rendered.join(f).is_file(), "{f}");
    }
    for e in fs::read_dir(&rendered).unwrap() {
        let path = e.unwrap().path();
        if path.extension().is_some_and(|x| x == "svg") {
            let text = fs::read_to_string(&path).unwrap();
            roxmltree::Document::parse(&text).unwrap_or_else(|err| panic!("{}: {err}", path.display()));
        }
    }
}

#[test]
fn network_eval_records_refinement_settings() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "3", "40", "5");
    let out = tmp.path().join("out");
    ok(&[
        "eval", "--data", p(&data), "--out", p(&out), "--classifier", "cnn", "--iar", "on", "--iterations", "5",
        "--epochs", "1",
    ]);
    let metrics: serde_json::Value = serde_json::from_slice(&fs::read(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["run_config"]["iar"]["iterations"], 5);
    assert_eq!(metrics["run_config"]["classifier"], "cnn");
}

#[test]
fn config_file_overrides_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "3", "90", "0");
    let cfg = tmp.path().join("run.json");
    fs::write(&cfg, r#"{"track": "posture", "svm": {"epochs": 3}, "iar": {"enabled": false}}"#).unwrap();
    let out = tmp.path().join("out");
    ok(&[
        "eval", "--data", p(&data), "--out", p(&out), "--classifier", "svm", "--iar", "on", "--config", p(&cfg),
    ]);
    let metrics: serde_json::Value = serde_json::from_slice(&fs::read(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["run_config"]["track"], "posture");
    assert_eq!(metrics["run_config"]["svm"]["epochs"], 3);
    assert_eq!(metrics["run_config"]["iar"]["enabled"], false);
    assert_eq!(metrics["loso"]["tracks"].as_array().unwrap().len(), 1);

    fs::write(&cfg, r#"{"unknown_field": 1}"#).unwrap();
    let bad = bin(&["eval", "--data", p(&data), "--out", p(&out), "--config", p(&cfg)]);
    assert!(!bad.status.success());
}

#[test]
fn train_refine_featurize_write_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "3", "40", "7");
    let f = tmp.path().join("f");
    ok(&["featurize", "--data", p(&data), "--out", p(&f), "--sensors", "la"]);
    let header = fs::read_to_string(f.join("S01.features.csv")).unwrap();
    assert_eq!(header.lines().next().unwrap().split(',').count(), 1 + 84);

    let m = tmp.path().join("m");
    ok(&["train", "--data", p(&data), "--out", p(&m), "--classifier", "svm", "--iar", "off"]);
    assert!(m.join("model_posture.json").is_file() && m.join("model_movement.json").is_file());

    let r = tmp.path().join("r");
    ok(&["refine", "--data", p(&data), "--out", p(&r), "--classifier", "svm", "--iterations", "2", "--track", "movement"]);
    let refined = fs::read_to_string(r.join("refined_movement.jsonl")).unwrap();
    let priors = fs::read_to_string(r.join("priors_movement.jsonl")).unwrap();
    assert_eq!(refined.lines().count(), priors.lines().count());
    assert!(refined.lines().count() > 0);
}

#[test]
fn failures_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope");
    let out = bin(&["eval", "--data", p(&missing), "--out", p(&tmp.path().join("o"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist"));

    let scenario = tmp.path().join("scenario.json");
    fs::write(&scenario, r#"{"sample_rate": "fast"}"#).unwrap();
    let out = bin(&["synth", "--out", p(&tmp.path().join("s")), "--scenario", p(&scenario)]);
    assert!(!out.status.success());

    let bundle = tmp.path().join("bundle");
    fs::create_dir_all(&bundle).unwrap();
    fs::write(bundle.join("metrics.json"), "{ not json").unwrap();
    let out = bin(&["report", "--bundle", p(&bundle)]);
    assert!(!out.status.success());

    let out = bin(&["eval", "--out", p(&tmp.path().join("o")), "--sensors", "tail"]);
    assert!(!out.status.success());
}

#[test]
fn partial_dataset_warnings_reach_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "4", "40", "8");
    for e in fs::read_dir(&data).unwrap() {
        let path = e.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        if name.starts_with("S04.annot") {
            fs::remove_file(path).unwrap();
        }
    }
    let out = tmp.path().join("out");
    ok(&["eval", "--data", p(&data), "--out", p(&out), "--classifier", "svm", "--iar", "off"]);
    let metrics: serde_json::Value = serde_json::from_slice(&fs::read(out.join("metrics.json")).unwrap()).unwrap();
    let warnings = metrics["loso"]["warnings"].as_array().unwrap();
    assert!(warnings.iter().any(|w| w.as_str().unwrap().contains("S04")));
    assert_eq!(metrics["loso"]["subjects"].as_array().unwrap().len(), 3);
}
