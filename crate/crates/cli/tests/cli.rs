use std::path::Path;
use std::process::{Command, Output};

use cliptbp::io::{parse_ground_truth, write_ctb1, Settings};
use cliptbp::toy::query_objective;
use cliptbp::ClipEmbeddings;

fn cliptbp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cliptbp"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const GT: &str = "{\"qid\":1,\"query\":\"a\",\"vid\":\"v1\",\"duration\":150,\"relevant_windows\":[[10,20],[40,60]]}\n\
                  {\"qid\":2,\"query\":\"b\",\"vid\":\"v2\",\"duration\":150,\"relevant_windows\":[[0,30]]}\n";

fn eval_fixture(pred: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("gt.jsonl"), GT).unwrap();
    std::fs::write(dir.path().join("pred.jsonl"), pred).unwrap();
    dir
}

#[test]
fn eval_perfect_predictions_golden() {
    let dir = eval_fixture(
        "{\"qid\":1,\"pred_relevant_windows\":[[10,20,0.9],[40,60,0.8]]}\n\
         {\"qid\":2,\"pred_relevant_windows\":[[0,30,0.5]]}\n",
    );
    let out = cliptbp(dir.path(), &["eval", "--gt", "gt.jsonl", "--pred", "pred.jsonl"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let expected = "\
R1@0.5    100.00
R1@0.7    100.00
mAP@0.5   100.00
mAP@0.55  100.00
mAP@0.6   100.00
mAP@0.65  100.00
mAP@0.7   100.00
mAP@0.75  100.00
mAP@0.8   100.00
mAP@0.85  100.00
mAP@0.9   100.00
mAP@0.95  100.00
mAP@Avg   100.00
queries        2
";
    assert_eq!(stdout(&out), expected);
}

#[test]
fn eval_json_half_recall() {
    // qid 2 ranks a miss first; its AP at 0.5 is 1/2.
    let dir = eval_fixture(
        "{\"qid\":1,\"pred_relevant_windows\":[[10,20,0.9],[40,60,0.8]]}\n\
         {\"qid\":2,\"pred_relevant_windows\":[[100,140,0.9],[0,30,0.5]]}\n",
    );
    let out = cliptbp(dir.path(), &["eval", "--gt", "gt.jsonl", "--pred", "pred.jsonl", "--json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["num_queries"], 2);
    assert_eq!(v["r1"]["0.5"], 50.0);
    assert_eq!(v["map"]["0.5"], 75.0);
    assert_eq!(v["map_avg"], 75.0);
}

#[test]
fn cap_truncates_ranked_predictions() {
    let dir = eval_fixture(
        "{\"qid\":1,\"pred_relevant_windows\":[[10,20,0.9],[40,60,0.8]]}\n\
         {\"qid\":2,\"pred_relevant_windows\":[[100,140,0.9],[0,30,0.5]]}\n",
    );
    let out = cliptbp(dir.path(), &["eval", "--gt", "gt.jsonl", "--pred", "pred.jsonl", "--json", "--cap", "1"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["map"]["0.5"], 25.0);
}

#[test]
fn missing_file_exits_two() {
    let dir = eval_fixture("");
    let out = cliptbp(dir.path(), &["eval", "--gt", "nope.jsonl", "--pred", "pred.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.starts_with("error: "), "{err}");
    assert!(err.contains("nope.jsonl"), "{err}");
    assert_eq!(err.matches("No such file").count(), 1, "{err}");
}

#[test]
fn malformed_line_is_reported_with_line_number() {
    let dir = eval_fixture("{\"qid\":1,\"pred_relevant_windows\":[[10,20,0.9]]}\n{oops\n");
    let out = cliptbp(dir.path(), &["eval", "--gt", "gt.jsonl", "--pred", "pred.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains(":2"), "{}", stderr(&out));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = cliptbp(dir.path(), &["eval", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).is_empty());
}

#[test]
fn unknown_config_key_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = cliptbp(dir.path(), &["gen-data", "--out", "d", "--set", "lamda_clip=0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("lamda_clip"));
    assert!(!dir.path().join("d").exists());
}

#[test]
fn gradcheck_reports_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = cliptbp(dir.path(), &["gradcheck", "--trials", "3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().last(), Some("PASS"));
    for name in ["clip_similarity", "boundary", "aux_boundary"] {
        let row = text.lines().find(|l| l.starts_with(name)).unwrap();
        assert_eq!(row.split_whitespace().nth(1), Some("3"), "{row}");
    }
}

#[test]
fn loss_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let values: Vec<f64> = (0..24).map(|i| ((i * 7 % 11) as f64 - 5.0) / 4.0).collect();
    let emb = ClipEmbeddings::new(8, 3, values).unwrap();
    write_ctb1(dir.path().join("emb.ctb"), &emb).unwrap();
    std::fs::write(
        dir.path().join("gt.jsonl"),
        "{\"qid\":7,\"vid\":\"v\",\"duration\":80,\"relevant_windows\":[[20,50]]}\n",
    )
    .unwrap();
    let out = cliptbp(dir.path(), &["loss", "--features", "emb.ctb", "--gt", "gt.jsonl", "--qid", "7", "--set", "k=2"]);
    assert!(out.status.success(), "{}", stderr(&out));

    let gts = parse_ground_truth(dir.path().join("gt.jsonl")).unwrap();
    let mut settings = Settings::default();
    settings.apply_override("k=2").unwrap();
    let obj = query_objective(&emb, &gts[0], &settings.train.objective).unwrap();
    let c = obj.components;
    let expected = format!(
        "basic     {:.4}\nclip      {:.4}\nboundary  {:.4}\naux       {:.4}\ntotal     {:.4}\n",
        c.basic, c.clip, c.boundary, c.aux, obj.total
    );
    assert_eq!(stdout(&out), expected);
    assert!(c.clip > 0.0 && c.basic > 0.0, "{expected}");
}

#[test]
fn loss_unknown_qid_fails() {
    let dir = tempfile::tempdir().unwrap();
    let emb = ClipEmbeddings::new(2, 1, vec![1.0, 2.0]).unwrap();
    write_ctb1(dir.path().join("emb.ctb"), &emb).unwrap();
    std::fs::write(dir.path().join("gt.jsonl"), "{\"qid\":7,\"vid\":\"v\",\"duration\":4,\"relevant_windows\":[[0,2]]}\n")
        .unwrap();
    let out = cliptbp(dir.path(), &["loss", "--features", "emb.ctb", "--gt", "gt.jsonl", "--qid", "8"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("qid 8"));
}

#[test]
fn gen_data_writes_dataset_and_spec() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("spec.cfg"), "num_queries = 5\nclips = 36\n").unwrap();
    let out = cliptbp(dir.path(), &["gen-data", "--spec", "spec.cfg", "--out", "d", "--set", "clips=40"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let d = dir.path().join("d");
    let gts = parse_ground_truth(d.join("gt.jsonl")).unwrap();
    assert_eq!(gts.len(), 5);
    for g in &gts {
        let emb = cliptbp::io::read_ctb1(d.join(format!("features/{}.ctb", g.query_id()))).unwrap();
        assert_eq!(emb.clips(), 40);
    }
    let saved = std::fs::read_to_string(d.join("spec.cfg")).unwrap();
    assert!(saved.contains("num_queries = 5\n") && saved.contains("clips = 40\n"));
}

#[test]
fn train_toy_writes_trace_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let out = cliptbp(dir.path(), &["train-toy", "--steps", "4", "--out", "t", "--set", "num_queries=6"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let trace = std::fs::read_to_string(dir.path().join("t/loss_trace.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines[0], "step,basic,clip,boun,b_aux,total");
    assert_eq!(lines.len(), 5);
    let eval: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("t/eval.json")).unwrap()).unwrap();
    assert_eq!(eval["trained"]["num_queries"], 6);
    assert!(eval["threshold"].is_number());
}

#[test]
fn train_toy_rejects_zero_steps() {
    let dir = tempfile::tempdir().unwrap();
    let out = cliptbp(dir.path(), &["train-toy", "--steps", "0", "--out", "t"]);
    assert_eq!(out.status.code(), Some(2));
}
