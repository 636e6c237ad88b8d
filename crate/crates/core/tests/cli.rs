mod common;

use clothpile::affordance::AffordanceModel;
use clothpile::harness::load_logs;
use clothpile::pile::PileScene;
use clothpile::pipeline::validate_log;
use common::{bin, Stub};

fn code(cmd: &mut std::process::Command) -> (i32, String, String) {
    let out = cmd.output().expect("spawn binary");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn gen_scene_writes_loadable_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scene.json");
    let (c, _, err) = code(bin().args(["gen-scene", "--boundary", "closed", "--count-min", "3", "--count-max", "5", "--seed", "4", "--out"]).arg(&out));
    assert_eq!(c, 0, "{err}");
    let scene = PileScene::load(&out).unwrap();
    assert!((3..=5).contains(&scene.len()));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    // Unparseable flag values.
    let (c, _, _) = code(bin().args(["gen-scene", "--boundary", "round", "--count-min", "1", "--count-max", "2", "--seed", "1", "--out"]).arg(&out));
    assert_eq!(c, 2);
    // Empty count range.
    let (c, _, _) = code(bin().args(["gen-scene", "--boundary", "open", "--count-min", "9", "--count-max", "2", "--seed", "1", "--out"]).arg(&out));
    assert_eq!(c, 2);
    // No model and affordance not ablated.
    let (c, _, _) = code(bin().args(["run", "--task", "a", "--boundary", "closed", "--episodes", "1", "--seed", "1", "--out"]).arg(&out));
    assert_eq!(c, 2);
    // Task B without a target.
    let (c, _, _) = code(bin().args(["run", "--task", "b", "--boundary", "closed", "--episodes", "1", "--seed", "1", "--ablate", "affordance", "--out"]).arg(&out));
    assert_eq!(c, 2);
    // Remote reasoner without an endpoint.
    let (c, _, _) = code(bin().args(["run", "--task", "a", "--boundary", "closed", "--episodes", "1", "--seed", "1", "--ablate", "affordance", "--reasoner", "remote", "--out"]).arg(&out));
    assert_eq!(c, 2);
    let (c, _, _) = code(bin().args(["train-affordance", "--scenes", "0", "--samples-per-scene", "5", "--seed", "1", "--out"]).arg(&out));
    assert_eq!(c, 2);
    let (c, _, _) = code(bin().args(["report", "--in"]).arg(dir.path().join("missing.jsonl")));
    assert_eq!(c, 2);
}

#[test]
fn train_run_report() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let data = dir.path().join("data.jsonl");
    let (c, stdout, err) = code(
        bin().args(["train-affordance", "--scenes", "20", "--samples-per-scene", "10", "--seed", "3", "--epochs", "5", "--lr", "0.05", "--hidden", "8", "--out"])
            .arg(&model)
            .arg("--dataset-out")
            .arg(&data),
    );
    assert_eq!(c, 0, "{err}");
    assert!(stdout.contains("examples 200"), "{stdout}");
    AffordanceModel::load(&model).unwrap();
    assert_eq!(std::fs::read_to_string(&data).unwrap().lines().count(), 200);

    let full = dir.path().join("full.jsonl");
    let (c, stdout, err) = code(
        bin().args(["run", "--task", "a", "--boundary", "closed", "--episodes", "3", "--seed", "10", "--model"])
            .arg(&model)
            .arg("--out")
            .arg(&full)
            .arg("--report"),
    );
    assert_eq!(c, 0, "{err}");
    assert!(stdout.contains("ASR_A") && stdout.contains("full"), "{stdout}");
    let logs = load_logs(&full).unwrap();
    assert_eq!(logs.len(), 3);
    for log in &logs {
        validate_log(log).unwrap();
    }

    let ablated = dir.path().join("ablated.jsonl");
    let (c, _, err) = code(
        bin().args(["run", "--task", "b", "--target", "red", "--boundary", "open", "--episodes", "2", "--seed", "10", "--ablate", "affordance,dual-arm", "--reasoner", "privileged", "--out"])
            .arg(&ablated),
    );
    assert_eq!(c, 0, "{err}");

    let mut both = full.into_os_string();
    both.push(",");
    both.push(ablated.as_os_str());
    let (c, stdout, err) = code(bin().arg("report").arg("--in").arg(both));
    assert_eq!(c, 0, "{err}");
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 3, "{stdout}");
    assert!(lines[2].starts_with("w/o affordance & dual_arm"), "{stdout}");
}

#[test]
fn remote_run_via_env() {
    let stub = Stub::well_formed();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("remote.jsonl");
    let (c, _, err) = code(
        bin().env("REASONER_URL", &stub.url)
            .env("REASONER_TIMEOUT_MS", "5000")
            .args(["run", "--task", "a", "--boundary", "closed", "--episodes", "1", "--seed", "2", "--ablate", "affordance", "--reasoner", "remote", "--out"])
            .arg(&out),
    );
    assert_eq!(c, 0, "{err}");
    let logs = load_logs(&out).unwrap();
    assert_eq!(logs[0].header.reasoner, "remote");
    assert!(stub.kinds().iter().any(|k| k == "select"));
}

#[test]
fn unreachable_service_exits_3() {
    // Bind then drop to get a port nobody listens on.
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("down.jsonl");
    let (c, _, err) = code(
        bin().args(["run", "--task", "a", "--boundary", "closed", "--episodes", "2", "--seed", "2", "--ablate", "affordance", "--reasoner", "remote", "--reasoner-timeout-ms", "2000", "--reasoner-url"])
            .arg(format!("http://127.0.0.1:{port}"))
            .arg("--out")
            .arg(&out),
    );
    assert_eq!(c, 3, "{err}");
    // Logs are still written, with the failure recorded.
    let logs = load_logs(&out).unwrap();
    assert!(logs.iter().all(|l| l.remote_failure().is_some()));
}
