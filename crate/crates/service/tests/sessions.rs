mod common;

use std::sync::Arc;
use std::thread;

use adg_service::app::{AttemptRequest, CreateSession};
use adg_service::sessions::Condition;
use adg_service::{App, ServiceConfig};
use serde_json::Value;

use common::{data_dir, walkthrough_scores, WALKTHROUGH_TEXT};

fn attempt() -> AttemptRequest {
    serde_json::from_value(serde_json::json!({"text": WALKTHROUGH_TEXT, "per_criterion": walkthrough_scores()}))
        .unwrap()
}

fn create(app: &App, max_attempts: Option<u32>) -> String {
    let request = CreateSession { prompt_id: "lang-thought".into(), condition: Condition::Feedback, max_attempts };
    app.create_session(request).unwrap().session_id
}

#[test]
fn sessions_survive_a_restart_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let data = data_dir(dir.path());
    let (id, before, latest_before) = {
        let (app, _) = App::open(ServiceConfig::new(&data)).unwrap();
        let id = create(&app, None);
        app.submit_attempt(&id, attempt()).unwrap();
        let record = serde_json::to_string(&app.session(&id).unwrap()).unwrap();
        let latest = serde_json::to_string(&app.latest_feedback(&id).unwrap()).unwrap();
        (id, record, latest)
    };
    let (app, _) = App::open(ServiceConfig::new(&data)).unwrap();
    assert_eq!(serde_json::to_string(&app.session(&id).unwrap()).unwrap(), before);
    assert_eq!(serde_json::to_string(&app.latest_feedback(&id).unwrap()).unwrap(), latest_before);

    // the second attempt still sees the first one after the restart
    let accepted = app.submit_attempt(&id, attempt()).unwrap();
    assert_eq!(accepted.attempt.index, 2);
    assert_eq!(accepted.attempt.delta, Some(0));
}

#[test]
fn concurrent_submissions_never_exceed_the_limit() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = App::open(ServiceConfig::new(&data_dir(dir.path()))).unwrap();
    let app = Arc::new(app);
    let id = create(&app, Some(3));

    let handles: Vec<_> = (0..12)
        .map(|_| {
            let (app, id) = (app.clone(), id.clone());
            thread::spawn(move || app.submit_attempt(&id, attempt()))
        })
        .collect();
    let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();

    let accepted = results.iter().filter(|r| r.is_ok()).count();
    assert_eq!(accepted, 3);
    for err in results.iter().filter_map(|r| r.as_ref().err()) {
        assert_eq!(err.code, "session-closed");
    }
    let record = app.session(&id).unwrap();
    let indices: Vec<_> = record.attempts.iter().map(|a| a.index).collect();
    assert_eq!(indices, [1, 2, 3]);
    assert!(record.closed);

    // each log line is a complete JSON event
    let log = std::fs::read_to_string(dir.path().join("data/sessions").join(format!("{id}.jsonl"))).unwrap();
    let events: Vec<Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(events.len(), 4);
}
