#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture(path: &str) -> String {
    fs::read_to_string(fixtures().join(path)).unwrap()
}

/// A data directory holding the English walkthrough prompt and the Japanese prompt.
pub fn data_dir(root: &Path) -> PathBuf {
    let dir = root.join("data");
    for sub in ["adg", "corpora", "templates"] {
        fs::create_dir_all(dir.join(sub)).unwrap();
    }
    let copy = |from: &str, to: &str| fs::copy(fixtures().join(from), dir.join(to)).unwrap();
    copy("fig3/adg.json", "adg/fig3.json");
    copy("fig3/corpus.json", "corpora/fig3.json");
    copy("fig3/templates.json", "templates/fig3.json");
    copy("ja/adg.json", "adg/ja.json");
    copy("ja/corpus.json", "corpora/ja.json");
    dir
}

/// The walkthrough response as request fields: partial on B, cue on C, no cue on A1.
pub fn walkthrough_scores() -> Value {
    json!({
        "A1": {"score": 0},
        "B": {"score": 1, "cue_span": [0, 21]},
        "C": {"score": 1, "cue_span": [22, 72]}
    })
}

pub const WALKTHROUGH_TEXT: &str =
    "Language is a symbol, and because words carve the world into categories, we notice things.";
