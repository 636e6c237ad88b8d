mod common;

use base64::Engine;
use clothpile::harness::{run_experiment, ExperimentConfig, RemoteSettings};
use clothpile::pile::BoundaryKind;
use clothpile::pipeline::{validate_log, Ablation, TerminalStatus};
use clothpile::reasoner::{ReasonerKind, WireRequest};
use common::{bin, well_formed_reply, Stub};
use serde_json::{json, Value};

fn remote_cfg(url: &str, episodes: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(BoundaryKind::Closed, episodes, 21).with_ablations([Ablation::Affordance]);
    cfg.reasoner = ReasonerKind::Remote;
    cfg.remote = Some(RemoteSettings {
        url: url.to_string(),
        timeout_ms: 5000,
    });
    cfg
}

#[test]
fn all_query_kinds_round_trip() {
    let stub = Stub::well_formed();
    let (logs, _) = run_experiment(&remote_cfg(&stub.url, 2)).unwrap();
    for log in &logs {
        validate_log(log).unwrap();
        assert!(log.remote_failure().is_none());
    }
    let kinds = stub.kinds();
    for k in ["adjust", "select", "cooperate"] {
        assert!(kinds.iter().any(|x| x == k), "no {k} query in {kinds:?}");
    }
    for req in stub.requests.lock().unwrap().iter() {
        // Every request parses back into the typed schema.
        let typed: WireRequest = serde_json::from_value(req.clone()).unwrap();
        assert!(!typed.mask_summaries.is_empty());
        let images = req["images"].as_object().expect("images attached");
        let mut keys = vec!["border_ppm_b64", "fill_ppm_b64"];
        if req["query_kind"] == "cooperate" {
            keys.push("post_lift_ppm_b64");
            assert!(req["lift"]["picked_area"].as_u64().is_some());
        }
        for key in keys {
            let bytes = base64::engine::general_purpose::STANDARD.decode(images[key].as_str().unwrap()).unwrap();
            assert!(bytes.starts_with(b"P6\n"), "{key} is not a PPM");
        }
    }
}

#[test]
fn flagged_masks_trigger_fine_tuning() {
    let stub = Stub::start(|req| {
        if req["query_kind"] == "adjust" {
            let id = req["mask_summaries"][0]["marker_id"].clone();
            (200, json!({ "adjust_ids": [id] }).to_string())
        } else {
            (200, well_formed_reply(req))
        }
    });
    let (logs, _) = run_experiment(&remote_cfg(&stub.url, 1)).unwrap();
    validate_log(&logs[0]).unwrap();
    assert!(logs[0].attempts[0].fine_tune_triggered);
}

fn malformed_cases() -> Vec<(&'static str, u16, &'static str)> {
    vec![
        ("adjust", 200, r#"{"adjust_ids":"all"}"#),
        ("adjust", 200, r#"{"adjust_ids":[999]}"#),
        ("select", 200, r#"{"selected_id":999}"#),
        ("select", 200, r#"{"selected":1}"#),
        ("select", 500, r#"{"selected_id":1}"#),
        ("cooperate", 200, r#"{"x_error":2,"x_dual":0}"#),
        ("cooperate", 200, r#"{"x_error":0}"#),
        ("cooperate", 200, "not json"),
    ]
}

fn breaking_stub(kind: &'static str, status: u16, body: &'static str) -> Stub {
    Stub::start(move |req: &Value| {
        if req["query_kind"] == kind {
            (status, body.to_string())
        } else {
            (200, well_formed_reply(req))
        }
    })
}

#[test]
fn malformed_responses_fail_the_attempt() {
    for (kind, status, body) in malformed_cases() {
        let stub = breaking_stub(kind, status, body);
        let (logs, _) = run_experiment(&remote_cfg(&stub.url, 1)).unwrap();
        let log = &logs[0];
        validate_log(log).unwrap();
        let last = log.attempts.last().unwrap();
        assert_eq!(last.terminal_status, TerminalStatus::Failed, "{kind} {body}");
        assert!(last.remote_error, "{kind} {body}");
        assert!(!log.task_completed);
    }
}

#[test]
fn malformed_responses_exit_3() {
    for (kind, status, body) in malformed_cases() {
        let stub = breaking_stub(kind, status, body);
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("log.jsonl");
        let res = bin()
            .args(["run", "--task", "a", "--boundary", "closed", "--episodes", "1", "--seed", "21", "--ablate", "affordance", "--reasoner", "remote", "--reasoner-url", &stub.url, "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert_eq!(res.status.code(), Some(3), "{kind} {body}: {}", String::from_utf8_lossy(&res.stderr));
        assert!(out.exists());
    }
}
