use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn fx(path: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(path).display().to_string()
}

fn adg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adg")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(adg(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(adg(&["stats", "--scale", "nine-level"]).status.code(), Some(2));
    assert_eq!(adg(&["generate", "--corpus", &fx("fig3/corpus.json")]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1_with_a_message() {
    let out =
        adg(&["generate", "--corpus", &fx("fig3/corpus.json"), "--adg", &fx("fig3/adg.json"), "--response", "nope"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown response \"nope\""));
    assert_eq!(adg(&["validate", "--adg", "/nonexistent/graph.json"]).status.code(), Some(1));
}

#[test]
fn validate_reports_in_text() {
    let ok = adg(&[
        "validate",
        "--adg",
        &fx("fig3/adg.json"),
        "--corpus",
        &fx("fig3/corpus.json"),
        "--templates",
        &fx("fig3/templates.json"),
    ]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).trim_end().ends_with("ok (0 warning(s))"), "{}", stdout(&ok));

    let bad = adg(&["validate", "--adg", &fx("defects/adg/self-loop.json")]);
    assert_eq!(bad.status.code(), Some(1));
    let text = stdout(&bad);
    assert!(text.contains("error[self-loop]"), "{text}");
    assert!(text.trim_end().ends_with("failed: 1 error(s), 0 warning(s)"), "{text}");
}

#[test]
fn stats_exit_code_tracks_published_markers() {
    let matching = adg(&["stats", "--table5", &fx("tables/table5.tsv")]);
    assert_eq!(matching.status.code(), Some(0));
    assert!(stdout(&matching).contains("reproduced 2/2 published row(s)"));

    let table1 = adg(&["stats", "--table1", &fx("tables/table1.tsv")]);
    assert_eq!(table1.status.code(), Some(1));
    let text = stdout(&table1);
    assert_eq!(text.matches("MISMATCH").count(), 1, "{text}");
    assert!(text.contains("reproduced 7/8 published row(s)"));
}

#[test]
fn dist_reads_points_from_stdin() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_adg"))
        .args(["dist", "--points", "-"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"t 0 5\nchi2 0 3\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let lines: Vec<Vec<String>> = stdout(&out).lines().map(|l| l.split('\t').map(String::from).collect()).collect();
    assert_eq!(lines.len(), 2);
    // a zero statistic leaves the whole distribution in the tail
    for line in &lines {
        assert_eq!(line[3].parse::<f64>().unwrap(), 1.0, "{line:?}");
    }

    let bad =
        Command::new(env!("CARGO_BIN_EXE_adg")).args(["dist", "--points", &fx("fig3/adg.json")]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn align_prints_one_row_per_cue() {
    let out = adg(&["align", "--corpus", &fx("fig3/corpus.json"), "--adg", &fx("fig3/adg.json")]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let walkthrough_b = text.lines().find(|l| l.starts_with("walkthrough\tB\t")).unwrap();
    let cols: Vec<&str> = walkthrough_b.split('\t').collect();
    assert_eq!((cols[2], cols[3], cols[5]), ("c3a", "1.0000", "aligned"));
    // A1 has no cue in the walkthrough, so there is nothing to align
    assert!(!text.contains("walkthrough\tA1"));
}

#[test]
fn generate_text_report_for_the_walkthrough() {
    let out = adg(&[
        "generate",
        "--corpus",
        &fx("fig3/corpus.json"),
        "--adg",
        &fx("fig3/adg.json"),
        "--templates",
        &fx("fig3/templates.json"),
        "--response",
        "walkthrough",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("== walkthrough\n"), "{text}");
    assert!(
        text.contains("[B] 1/2\nIn paragraph 2 you point to the right part of the text (\"Language is a symbol,\")")
    );
    assert!(text.contains("Total 2/6"));
}

#[test]
fn generate_writes_japanese_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = adg(&[
        "generate",
        "--corpus",
        &fx("ja/corpus.json"),
        "--adg",
        &fx("ja/adg.json"),
        "--templates",
        &fx("fig3/templates.json"),
        "--language",
        "ja",
        "--format",
        "json",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let files: Vec<_> = std::fs::read_dir(&out_dir).unwrap().map(|e| e.unwrap().path()).collect();
    assert!(!files.is_empty());
    for file in files {
        assert_eq!(file.extension().unwrap(), "json");
        let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&file).unwrap()).unwrap();
        assert_eq!(report["language"], "ja");
    }
}

#[test]
fn serve_rejects_a_missing_data_dir() {
    let out = adg(&["serve", "--data-dir", "/nonexistent/adg-data", "--listen", "127.0.0.1:0"]);
    assert_eq!(out.status.code(), Some(1));
}
