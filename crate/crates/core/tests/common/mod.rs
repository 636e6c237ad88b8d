#![allow(dead_code)]

use serde_json::{json, Value};
use std::sync::{Arc, Mutex};

/// A local stand-in for the decision service.
pub struct Stub {
    pub url: String,
    pub requests: Arc<Mutex<Vec<Value>>>,
}

impl Stub {
    /// Serves every request with `respond(body) -> (status, body)` on a background thread.
    pub fn start<F>(respond: F) -> Stub
    where
        F: Fn(&Value) -> (u16, String) + Send + 'static,
    {
        let server = tiny_http::Server::http("127.0.0.1:0").expect("bind stub");
        let url = format!("http://{}", server.server_addr().to_ip().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let seen = Arc::clone(&requests);
        std::thread::spawn(move || {
            for mut req in server.incoming_requests() {
                let mut body = String::new();
                let _ = req.as_reader().read_to_string(&mut body);
                let value: Value = serde_json::from_str(&body).unwrap_or(Value::Null);
                let (status, reply) = if req.url() == "/decide" {
                    respond(&value)
                } else {
                    (404, String::new())
                };
                seen.lock().unwrap().push(value);
                let _ = req.respond(tiny_http::Response::from_string(reply).with_status_code(status));
            }
        });
        Stub { url, requests }
    }

    /// Well-formed answers: nothing to adjust, first mask, no cooperation.
    pub fn well_formed() -> Stub {
        Stub::start(|req| (200, well_formed_reply(req)))
    }

    pub fn kinds(&self) -> Vec<String> {
        self.requests
            .lock()
            .unwrap()
            .iter()
            .filter_map(|r| r["query_kind"].as_str().map(String::from))
            .collect()
    }
}

pub fn well_formed_reply(req: &Value) -> String {
    match req["query_kind"].as_str() {
        Some("adjust") => json!({ "adjust_ids": [] }).to_string(),
        Some("select") => {
            let id = req["mask_summaries"][0]["marker_id"].as_u64().unwrap_or(1);
            json!({ "selected_id": id }).to_string()
        }
        Some("cooperate") => json!({ "x_error": 0, "x_dual": 0 }).to_string(),
        _ => "{}".into(),
    }
}

pub fn bin() -> std::process::Command {
    let mut cmd = std::process::Command::new(env!("CARGO_BIN_EXE_clothpile"));
    cmd.env_remove("REASONER_URL").env_remove("REASONER_TIMEOUT_MS");
    cmd
}
