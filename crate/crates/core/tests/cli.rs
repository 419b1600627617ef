mod common;

use std::path::Path;

use common::run_cli;

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_corpus(dir: &Path, profile: &str) -> std::path::PathBuf {
    let data = dir.join(profile);
    run_cli(&[
        "gen-synthetic", "--out", p(&data), "--profile", profile, "--users", "200", "--sites", "120",
    ]);
    data
}

#[test]
fn planted_sweep_recovers_gender() {
    let dir = tempfile::tempdir().unwrap();
    let json = common::cli_planted_sweep(dir.path(), 0);
    assert!(common::report_accuracy(&json) >= 0.9);
}

#[test]
fn train_predict_evaluate_round() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_corpus(dir.path(), "planted");
    let model = dir.path().join("model.json");
    let d = p(&data);
    run_cli(&["train", "--data", d, "--scheme", "ad", "--aggregate", "la", "--model", p(&model)]);
    let bundle: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(bundle["scheme"], "ad");
    assert_eq!(bundle["model"]["kind"], "svm_classifier");

    let preds = dir.path().join("pred.tsv");
    run_cli(&["predict", "--data", d, "--model", p(&model), "--out", p(&preds)]);
    let text = std::fs::read_to_string(&preds).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("user_id\tpredicted_gender"));
    assert!(lines.all(|l| l.ends_with("\tmale") || l.ends_with("\tfemale")));

    let out = run_cli(&["evaluate", "--data", d, "--model", p(&model)]);
    let metrics: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(metrics["accuracy"].as_f64().unwrap() >= 0.85, "{metrics}");

    let out = run_cli(&["train", "--data", d, "--classifier", "logistic", "--attribute", "age", "--c", "1", "--model", p(&model)]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("trained on"));
}

#[test]
fn stats_sitevec_and_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_corpus(dir.path(), "planted");
    let d = p(&data);
    let out = run_cli(&["stats", "--data", d]);
    let stats: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stats["filter_stages"].as_array().unwrap().len(), 5);
    assert_eq!(stats["mask"], "hpai");

    let store = dir.path().join("sites.svec");
    run_cli(&["sitevec", "--data", d, "--scheme", "ls", "--out", p(&store)]);
    let records = audience::representation::load_site_vectors(&store).unwrap();
    assert!(!records.is_empty());
    assert!(records.windows(2).all(|w| w[0].0 < w[1].0));
    assert!(records.iter().all(|r| r.1.len() == 50));

    let out = run_cli(&["aggregate", "--data", d, "--aggregate", "wa"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let first = text.lines().next().unwrap();
    assert_eq!(first.split('\t').count(), 51);
}

#[test]
fn extract_file_and_directory() {
    let dir = tempfile::tempdir().unwrap();
    let page = dir.path().join("site.html");
    std::fs::write(&page, "<title>Hello</title><p>World <a>link</a></p><div>skip</div>").unwrap();
    let out = run_cli(&["extract", p(&page), "--tags", "p"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "site_id\ttokens\ttext\nsite\t3\thello world link\n");
    let out = run_cli(&["extract", p(dir.path()), "--tags", "v"]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("hello world link skip"));
}

#[test]
fn sweeps_write_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_corpus(dir.path(), "planted");
    let d = p(&data);
    let json = dir.path().join("agg.json");
    let csv = dir.path().join("agg.csv");
    run_cli(&["sweep-aggregation", "--data", d, "--out", p(&json), "--csv", p(&csv)]);
    let report = audience::pipeline::ExperimentReport::from_json(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report.cells.len(), 3);
    let csv_text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(csv_text.lines().count(), 4);

    let out = run_cli(&["sweep-schemes", "--data", d, "--scheme", "du,bu", "--classifier", "logistic"]);
    let report = audience::pipeline::ExperimentReport::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let names: Vec<&str> = report.cells.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, ["du/la/logistic/gender", "bu/la/logistic/gender"]);
}

#[test]
fn tag_sweep_with_mask_list() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_corpus(dir.path(), "tags");
    let out = run_cli(&["sweep-tags", "--data", p(&data), "--tags", "t,p,hpai"]);
    let report = audience::pipeline::ExperimentReport::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(report.cells.len(), 3);
    assert!(report.cells.iter().all(|c| c.test.rmse.is_some()));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_corpus(dir.path(), "planted");
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "seed = 3\n[weighting]\nscheme = \"du\"\n[aggregation]\nmethod = \"sa\"\n[input]\ndata = {:?}\n",
            p(&data)
        ),
    )
    .unwrap();
    let out = run_cli(&["sweep-schemes", "--config", p(&cfg)]);
    let report = audience::pipeline::ExperimentReport::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(report.cells[0].name, "du/sa/svm/gender");
    assert_eq!(report.config.seed, 3);
    let out = run_cli(&["sweep-schemes", "--config", p(&cfg), "--scheme", "ad", "--seed", "4"]);
    let report = audience::pipeline::ExperimentReport::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(report.cells[0].name, "ad/sa/svm/gender");
    assert_eq!(report.config.seed, 4);
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = common::audience_bin()
        .args(["stats", "--data", p(dir.path())])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
    let out = common::audience_bin().args(["sweep-schemes", "--scheme", "zz"]).output().unwrap();
    assert!(!out.status.success());
}
