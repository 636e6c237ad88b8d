//! HTTP client for an external decision service.
//!
//! Every query is a `POST /decide` with a JSON body; responses are validated
//! strictly and anything unexpected is a protocol error.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::time::Duration;

use super::{Context, CoopAnswer, LiftInfo, MaskSummary, Reasoner, TaskSpec};
use crate::error::{Error, Result};
use crate::grid::Cell;

pub const DEFAULT_TIMEOUT_MS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    Adjust,
    Select,
    Cooperate,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WireImages {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub border_ppm_b64: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fill_ppm_b64: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub post_lift_ppm_b64: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireLift {
    pub grasp: Cell,
    pub picked_area: usize,
    pub selected_area: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub query_kind: QueryKind,
    pub task: TaskSpec,
    pub mask_summaries: Vec<MaskSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub images: Option<WireImages>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lift: Option<WireLift>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AdjustWire {
    adjust_ids: Vec<u32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SelectWire {
    selected_id: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoopWire {
    pub x_error: u8,
    pub x_dual: u8,
}

pub struct RemoteReasoner {
    endpoint: String,
    agent: ureq::Agent,
}

impl std::fmt::Debug for RemoteReasoner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteReasoner").field("endpoint", &self.endpoint).finish()
    }
}

fn b64(bytes: &[u8]) -> String {
    STANDARD.encode(bytes)
}

fn parse<T: for<'de> Deserialize<'de>>(kind: &str, body: &str) -> Result<T> {
    serde_json::from_str(body).map_err(|e| Error::Protocol(format!("malformed {kind} response: {e}")))
}

impl RemoteReasoner {
    /// `url` is the service base (`/decide` is appended unless already present).
    pub fn new(url: &str, timeout_ms: u64) -> Result<Self> {
        let url = url.trim().trim_end_matches('/');
        if !(url.starts_with("http://") || url.starts_with("https://")) {
            return Err(Error::Config(format!("reasoner url `{url}` is not http(s)")));
        }
        if timeout_ms == 0 {
            return Err(Error::Config("reasoner timeout must be positive".into()));
        }
        let endpoint = if url.ends_with("/decide") {
            url.to_string()
        } else {
            format!("{url}/decide")
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(RemoteReasoner { endpoint, agent })
    }

    /// Reads `REASONER_URL` and `REASONER_TIMEOUT_MS`.
    pub fn from_env() -> Result<Self> {
        let url = std::env::var("REASONER_URL").map_err(|_| Error::Config("REASONER_URL is not set".into()))?;
        let timeout = match std::env::var("REASONER_TIMEOUT_MS") {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad REASONER_TIMEOUT_MS `{v}`")))?,
            Err(_) => DEFAULT_TIMEOUT_MS,
        };
        RemoteReasoner::new(&url, timeout)
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn request(&self, ctx: &Context, kind: QueryKind) -> WireRequest {
        let images = ctx.images.map(|(border, fill)| WireImages {
            border_ppm_b64: Some(b64(&border.to_ppm())),
            fill_ppm_b64: Some(b64(&fill.to_ppm())),
            post_lift_ppm_b64: None,
        });
        WireRequest {
            query_kind: kind,
            task: ctx.task,
            mask_summaries: ctx.summaries.to_vec(),
            images,
            lift: None,
        }
    }

    fn post(&self, req: &WireRequest) -> Result<String> {
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(req)
            .map_err(|e| Error::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::Transport(e.to_string()))?;
        if status != 200 {
            return Err(Error::Protocol(format!("service answered HTTP {status}")));
        }
        Ok(body)
    }
}

impl Reasoner for RemoteReasoner {
    fn name(&self) -> &'static str {
        "remote"
    }

    fn decide_adjust(&self, ctx: &Context) -> Result<BTreeSet<u32>> {
        let body = self.post(&self.request(ctx, QueryKind::Adjust))?;
        let wire: AdjustWire = parse("adjust", &body)?;
        let known: BTreeSet<u32> = ctx.summaries.iter().map(|s| s.marker_id).collect();
        if let Some(bad) = wire.adjust_ids.iter().find(|id| !known.contains(id)) {
            return Err(Error::Protocol(format!("adjust_ids names unknown mask {bad}")));
        }
        Ok(wire.adjust_ids.into_iter().collect())
    }

    fn select_target(&self, ctx: &Context, task: &TaskSpec) -> Result<u32> {
        super::require_masks(ctx)?;
        let mut req = self.request(ctx, QueryKind::Select);
        req.task = *task;
        let wire: SelectWire = parse("select", &self.post(&req)?)?;
        if !ctx.summaries.iter().any(|s| s.marker_id == wire.selected_id) {
            return Err(Error::Protocol(format!("selected_id {} is not a mask", wire.selected_id)));
        }
        Ok(wire.selected_id)
    }

    fn decide_cooperation(&self, ctx: &Context, lift: &LiftInfo) -> Result<CoopAnswer> {
        let mut req = self.request(ctx, QueryKind::Cooperate);
        req.images.get_or_insert_with(WireImages::default).post_lift_ppm_b64 = Some(b64(&lift.observation.to_ppm()));
        req.lift = Some(WireLift {
            grasp: lift.grasp,
            picked_area: lift.picked.count(),
            selected_area: lift.selected_area,
        });
        let wire: CoopWire = parse("cooperate", &self.post(&req)?)?;
        if wire.x_error > 1 || wire.x_dual > 1 {
            return Err(Error::Protocol(format!(
                "cooperation flags must be 0 or 1, got ({}, {})",
                wire.x_error, wire.x_dual
            )));
        }
        Ok(CoopAnswer {
            x_error: wire.x_error,
            x_dual: wire.x_dual,
        })
    }
}
