mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use common::bundled_path;
use outline_refine::cli::cmd_gradcheck;
use outline_refine::config::Config;
use outline_refine::corpus::{load_corpus, CorpusRecord};
use outline_refine::metrics::MetricsRow;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_outline-refine"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn ok(args: &[&str]) -> String {
    let (code, stdout, stderr) = run(args);
    assert_eq!(code, 0, "{args:?}: {stderr}");
    stdout
}

#[test]
fn oracle_pipeline_never_lowers_a_label() {
    let dir = tempfile::tempdir().unwrap();
    let [n, l, r, rl] = ["n", "l", "r", "rl"].map(|s| dir.path().join(format!("{s}.jsonl")));
    ok(&["normalize", p(&bundled_path()), p(&n)]);
    ok(&["label", p(&n), p(&l)]);
    ok(&["refine", p(&l), p(&r)]);
    ok(&["label", p(&r), p(&rl)]);
    let before = load_corpus(&l).unwrap();
    let after = load_corpus(&rl).unwrap();
    assert_eq!(before.len(), after.len());
    for (a, b) in before.iter().zip(&after) {
        let (la, lb) = (a.labels.as_ref().unwrap(), b.labels.as_ref().unwrap());
        assert_eq!(la.continuity.len(), lb.continuity.len(), "{}", a.glyph_id);
        for (x, y) in la.continuity.iter().zip(&lb.continuity) {
            assert!(y >= x, "{}: {la:?} -> {lb:?}", a.glyph_id);
        }
        assert_eq!(la.alignment, lb.alignment, "{}", a.glyph_id);
    }
}

#[test]
fn self_metrics_are_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("m.jsonl");
    ok(&["metrics", p(&bundled_path()), p(&bundled_path()), "--output", p(&report)]);
    let rows: Vec<MetricsRow> = fs::read_to_string(&report)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), load_corpus(bundled_path()).unwrap().len() + 1);
    for r in &rows {
        assert_eq!((r.iou, r.l1, r.re), (1.0, 0.0, 0.0), "{}", r.glyph_id);
    }
    assert_eq!(rows.last().unwrap().glyph_id, "mean");
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    ok(&["refine", p(&bundled_path()), p(&a)]);
    ok(&["refine", p(&bundled_path()), p(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(ok(&["gradcheck", "--count", "56", "--seed", "3"]), ok(&["gradcheck", "--count", "56", "--seed", "3"]));
}

#[test]
fn uniform_predictions_keep_the_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let labeled = dir.path().join("l.jsonl");
    ok(&["label", p(&bundled_path()), p(&labeled)]);
    let preds: String = load_corpus(&labeled)
        .unwrap()
        .iter()
        .map(|r| {
            let l = r.labels.as_ref().unwrap();
            let u = [1.0 / 3.0; 3];
            serde_json::json!({
                "font_id": r.font_id, "glyph_id": r.glyph_id,
                "continuity": vec![u; l.continuity.len()], "alignment": vec![u; l.alignment.len()],
            })
            .to_string()
                + "\n"
        })
        .collect();
    let pred_path = dir.path().join("p.jsonl");
    fs::write(&pred_path, preds).unwrap();
    let out = dir.path().join("r.jsonl");
    ok(&["refine", p(&labeled), p(&out), "--predictions", p(&pred_path)]);
    let report = dir.path().join("m.jsonl");
    ok(&["metrics", p(&labeled), p(&out), "-o", p(&report)]);
    for line in fs::read_to_string(&report).unwrap().lines() {
        let r: MetricsRow = serde_json::from_str(line).unwrap();
        assert_eq!((r.iou, r.l1, r.re), (1.0, 0.0, 0.0), "{}", r.glyph_id);
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.jsonl");

    assert_eq!(run(&[]).0, 1);
    assert_eq!(run(&["frobnicate"]).0, 1);
    assert_eq!(run(&["label", "/nonexistent/in.jsonl", p(&out)]).0, 1);

    let bad_json = dir.path().join("bad.jsonl");
    fs::write(&bad_json, "{\"font_id\": \n").unwrap();
    let (code, _, err) = run(&["label", p(&bad_json), p(&out)]);
    assert_eq!(code, 2, "{err}");

    let bad_path = dir.path().join("badpath.jsonl");
    fs::write(&bad_path, r#"{"font_id":"f","glyph_id":"g","units_per_em":1000,"paths":["M 0 0 A 1 1 0 0 0 1 1"]}"#).unwrap();
    let (code, _, err) = run(&["label", p(&bad_path), p(&out)]);
    assert_eq!(code, 2);
    assert!(err.contains("record 0"), "{err}");

    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "confidence = 2.0\n").unwrap();
    assert_eq!(run(&["--config", p(&cfg), "label", p(&bundled_path()), p(&out)]).0, 3);

    let preds = dir.path().join("p.jsonl");
    fs::write(&preds, r#"{"font_id":"bundled","glyph_id":"square","continuity":[],"alignment":[]}"#).unwrap();
    assert_eq!(run(&["refine", p(&bundled_path()), p(&out), "--predictions", p(&preds)]).0, 3);

    let mut records: Vec<CorpusRecord> = load_corpus(bundled_path()).unwrap();
    records.pop();
    let fewer = dir.path().join("fewer.jsonl");
    outline_refine::corpus::save_corpus(&records, &fewer).unwrap();
    assert_eq!(run(&["metrics", p(&bundled_path()), p(&fewer)]).0, 4);
}

#[test]
fn print_config_round_trips() {
    let text = ok(&["--print-config", "--confidence", "0.8", "--resolution", "64"]);
    let cfg = Config::from_toml(&text).unwrap();
    assert_eq!(cfg.confidence, 0.8);
    assert_eq!(cfg.raster.resolution, 64);
}

#[test]
fn gradcheck_pass_rate() {
    let report = cmd_gradcheck(42, 1000, &Config::default());
    assert_eq!(report.cases.len(), 1000);
    assert!(report.pass_rate() >= 0.99, "{}", report.pass_rate());
}
