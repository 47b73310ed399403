use std::path::Path;
use std::process::{Command, Output};

fn ctxrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctxrec")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = ctxrec(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_data(dir: &Path, seed: &str) {
    ok(&[
        "gen", "--seed", seed, "--users", "40", "--items", "30", "--gamma", "0.9", "--density", "0.01", "--out", p(dir),
    ]);
}

#[test]
fn gen_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    small_data(&a, "7");
    small_data(&b, "7");
    let ra = std::fs::read(a.join("ratings.csv")).unwrap();
    assert_eq!(ra, std::fs::read(b.join("ratings.csv")).unwrap());
    assert!(ra.starts_with(b"user_id,item_id,day,time,companion,weather,rating\n"));
    assert!(a.join("ground_truth.json").exists());
}

#[test]
fn train_then_recommend() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_data(&data, "1");
    let ratings = data.join("ratings.csv");
    let model = tmp.path().join("model");
    ok(&["train", "--ratings", p(&ratings), "--out", p(&model)]);
    let ctx = [
        "--day", "Weekday", "--time", "Night", "--companion", "Family", "--weather", "Cold/Rainy",
    ];
    let mut args = vec!["recommend", "--model", p(&model), "--user", "u00", "--topn", "3"];
    args.extend(ctx);
    let text = ok(&args);
    assert_eq!(text.lines().count(), 3, "{text}");
    assert!(text.starts_with("1\ti"));

    args[4] = "nobody";
    let out = ctxrec(&args);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nobody"));

    let out = ctxrec(&[
        "recommend", "--model", p(&model), "--user", "u00", "--day", "Someday", "--time", "Night", "--companion",
        "Family", "--weather", "Cold/Rainy",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Someday"));
}

#[test]
fn usage_and_data_exit_codes() {
    assert_eq!(ctxrec(&[]).status.code(), Some(1));
    assert_eq!(ctxrec(&["compare", "--bogus"]).status.code(), Some(1));
    assert_eq!(ctxrec(&["--help"]).status.code(), Some(0));
    assert_eq!(ctxrec(&["compare", "--train-frac", "0"]).status.code(), Some(1));
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.csv");
    assert_eq!(ctxrec(&["split", "--ratings", p(&missing)]).status.code(), Some(2));
    let bad = tmp.path().join("bad.csv");
    std::fs::write(&bad, "user_id,item_id,day,time,companion,weather,rating\nu,i,Weekday,Evening,Family,Cold,9\n").unwrap();
    let out = ctxrec(&["split", "--ratings", p(&bad), "--out", p(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn split_train_eval_matches_compare() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_data(&data, "2");
    let ratings = data.join("ratings.csv");
    let split = tmp.path().join("split");
    ok(&["split", "--seed", "2", "--ratings", p(&ratings), "--out", p(&split)]);
    let (train, test) = (split.join("train.csv"), split.join("test.csv"));
    let model = tmp.path().join("model");
    ok(&["train", "--seed", "2", "--system", "baseline", "--ratings", p(&train), "--out", p(&model)]);
    let ev = tmp.path().join("eval");
    ok(&[
        "eval", "--seed", "2", "--model", p(&model), "--train", p(&train), "--ratings", p(&test), "--out", p(&ev),
    ]);
    let cmp = tmp.path().join("cmp");
    ok(&["compare", "--seed", "2", "--ratings", p(&ratings), "--out", p(&cmp)]);
    assert_eq!(
        std::fs::read_to_string(ev.join("baseline_topn.csv")).unwrap(),
        std::fs::read_to_string(cmp.join("baseline_topn.csv")).unwrap()
    );
    assert_eq!(
        std::fs::read_to_string(ev.join("baseline_clusters.csv")).unwrap(),
        std::fs::read_to_string(cmp.join("baseline_clusters.csv")).unwrap()
    );
}

#[test]
fn reports_embed_resolved_config() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_data(&data, "3");
    let out = tmp.path().join("cmp");
    ok(&[
        "compare", "--seed", "3", "--ratings", p(&data.join("ratings.csv")), "--neurons-phase3", "9", "--topn", "5,10",
        "--out", p(&out),
    ]);
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("compare_report.json")).unwrap()).unwrap();
    let cfg = &doc["config"];
    assert_eq!(cfg["seed"], 3);
    assert_eq!(cfg["phase1"]["neuron_count"], 6);
    assert_eq!(cfg["phase3"]["neuron_count"], 9);
    assert_eq!(cfg["baseline"]["neuron_count"], 19);
    assert_eq!(cfg["eval"]["relevance_threshold"], 4);
    assert_eq!(cfg["eval"]["top_ns"], serde_json::json!([5, 10]));
    assert_eq!(doc["comparison"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(out.join("compare_topn.csv")).unwrap();
    assert!(csv.starts_with("n,pipeline_f1,baseline_f1,difference\n"));
    let topn = std::fs::read_to_string(out.join("pipeline_topn.csv")).unwrap();
    assert!(topn.starts_with("n,mean_f1,mean_precision,mean_recall\n"));
}

#[test]
fn sweep_writes_curves() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_data(&data, "4");
    let out = tmp.path().join("sweep");
    let text = ok(&[
        "sweep", "--role", "baseline", "--min", "2", "--max", "4", "--ratings", p(&data.join("ratings.csv")), "--out",
        p(&out),
    ]);
    assert!(text.starts_with("baseline: best "));
    let csv = std::fs::read_to_string(out.join("sweep_baseline.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(out.join("sweep_report.json").exists());
}
