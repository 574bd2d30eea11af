//! HTTP/JSON session service. Every request goes through
//! [`Service::handle`], which the axum router wraps; tests call it directly.
//!
//! Routes:
//! `POST /sessions`, `GET /sessions/{id}/state`, `GET /sessions/{id}/actions`,
//! `POST /sessions/{id}/query`, `POST /sessions/{id}/step`,
//! `GET /sessions/{id}/history`.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::{Body, Bytes};
use axum::http::{header, Method, StatusCode, Uri};
use axum::response::Response;
use axum::Router;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::bench;
use crate::counting::CountingState;
use crate::error::{Error, Result};
use crate::lifted::LiftedModel;
use crate::model::{parse_model, RfMdpModel};
use crate::planner_approx::{default_alpha, plan_approx};
use crate::planner_exact::{exact_constraint_count, exact_guard, plan_exact, Alpha};
use crate::queries::{conditional_action_query, parse_threshold, Plan, RestrictionPredicate};
use crate::rewards::reward;
use crate::transition::sample_next_with;

/// Sessions refuse exact planning above this many Bellman constraints.
pub const SESSION_EXACT_CONSTRAINTS: u128 = 30_000;

pub struct Session {
    pub id: String,
    pub lm: LiftedModel,
    pub plan: Plan,
    pub state: CountingState,
    pub history: Vec<Value>,
    pub seed: u64,
    rng: ChaCha8Rng,
}

struct Failure(u16, String);

impl Failure {
    fn bad(msg: impl Into<String>) -> Self {
        Failure(400, msg.into())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Guard(_) => 413,
            Error::Lp(_) | Error::LpStatus(_) | Error::Io(_) | Error::Timeout => 500,
            _ => 400,
        };
        Failure(code, e.to_string())
    }
}

type Reply = std::result::Result<(u16, Value), Failure>;

pub struct Service {
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    default_model: Option<RfMdpModel>,
    next_id: AtomicU64,
}

impl Service {
    /// `default_model` is used by `POST /sessions` bodies that name no model.
    pub fn new(default_model: Option<RfMdpModel>) -> Self {
        Service { sessions: Mutex::new(HashMap::new()), default_model, next_id: AtomicU64::new(1) }
    }

    pub fn session(&self, id: &str) -> Option<Arc<Mutex<Session>>> {
        self.sessions.lock().unwrap().get(id).cloned()
    }

    /// Dispatches one request; returns the status code and the JSON body.
    pub fn handle(&self, method: &str, path: &str, body: &[u8]) -> (u16, Value) {
        let parts: Vec<&str> = path.trim_matches('/').split('/').filter(|p| !p.is_empty()).collect();
        let reply = match (method, parts.as_slice()) {
            ("POST", ["sessions"]) => parse_body(body).and_then(|b| self.create(&b)),
            ("GET", ["sessions", id, "state"]) => self.with(id, |s| Ok(get_state(s))),
            ("GET", ["sessions", id, "actions"]) => self.with(id, |s| Ok(get_actions(s))),
            ("GET", ["sessions", id, "history"]) => self.with(id, |s| Ok(get_history(s))),
            ("POST", ["sessions", id, "query"]) => {
                self.with(id, |s| parse_body(body).and_then(|b| post_query(s, &b)))
            }
            ("POST", ["sessions", id, "step"]) => self.with(id, |s| parse_body(body).and_then(|b| post_step(s, &b))),
            _ => Err(Failure(404, format!("no route for {method} {path}"))),
        };
        match reply {
            Ok(r) => r,
            Err(Failure(code, msg)) => (code, json!({ "error": msg })),
        }
    }

    fn with(&self, id: &str, f: impl FnOnce(&mut Session) -> Reply) -> Reply {
        let s = self.session(id).ok_or_else(|| Failure(404, format!("unknown session {id}")))?;
        let mut guard = s.lock().unwrap();
        f(&mut guard)
    }

    fn create(&self, body: &Value) -> Reply {
        let model = if let Some(doc) = body.get("model") {
            match doc {
                Value::Object(_) => parse_model(&doc.to_string())?,
                _ => return Err(Failure::bad("model must be a JSON object")),
            }
        } else if let Some(family) = body.get("family") {
            let family = family.as_str().ok_or_else(|| Failure::bad("family must be a string"))?;
            let n = body.get("n").and_then(Value::as_u64).ok_or_else(|| Failure::bad("family needs a positive integer n"))?;
            bench::family_model(family, n)?
        } else if let Some(m) = &self.default_model {
            m.clone()
        } else {
            return Err(Failure::bad("give family and n, or a model document"));
        };
        let lm = LiftedModel::compile(&model)?;
        let mode = match body.get("mode") {
            None | Some(Value::Null) => "approx",
            Some(Value::String(m)) if m == "approx" || m == "exact" => m.as_str(),
            Some(_) => return Err(Failure::bad("mode must be approx or exact")),
        };
        let seed = match body.get("seed") {
            None | Some(Value::Null) => 0,
            Some(v) => v.as_u64().ok_or_else(|| Failure::bad("seed must be a nonnegative integer"))?,
        };
        let state = match body.get("state") {
            None | Some(Value::Null) => lm.all_false_state(),
            Some(v) => lm.state_from_json(v)?,
        };
        let plan = if mode == "exact" {
            let rows = exact_constraint_count(&lm);
            if rows > SESSION_EXACT_CONSTRAINTS {
                return Err(Failure(413, format!("exact planning needs {rows} constraints (limit {SESSION_EXACT_CONSTRAINTS})")));
            }
            exact_guard(&lm)?;
            Plan::Exact(plan_exact(&lm, &Alpha::Uniform)?)
        } else {
            Plan::Approx(plan_approx(&lm, &default_alpha(&lm))?)
        };
        let id = format!("s{}", self.next_id.fetch_add(1, Ordering::SeqCst));
        let reply = json!({
            "session_id": id,
            "mode": plan.mode(),
            "model": lm.fingerprint,
            "state": lm.state_to_json(&state),
        });
        let session = Session { id: id.clone(), lm, plan, state, history: Vec::new(), seed, rng: ChaCha8Rng::seed_from_u64(seed) };
        self.sessions.lock().unwrap().insert(id, Arc::new(Mutex::new(session)));
        Ok((200, reply))
    }
}

fn parse_body(body: &[u8]) -> std::result::Result<Value, Failure> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(json!({}));
    }
    let v: Value = serde_json::from_slice(body).map_err(|e| Failure::bad(format!("malformed JSON: {e}")))?;
    if !v.is_object() {
        return Err(Failure::bad("body must be a JSON object"));
    }
    Ok(v)
}

fn get_state(s: &Session) -> (u16, Value) {
    (200, json!({ "session_id": s.id, "state": s.lm.state_to_json(&s.state), "reward": reward(&s.lm, &s.state) }))
}

fn get_actions(s: &Session) -> (u16, Value) {
    let actions: Vec<Value> = s.lm.actions(&s.state).iter().map(|a| s.lm.action_to_json(a)).collect();
    (200, json!({ "session_id": s.id, "state": s.lm.state_to_json(&s.state), "count": actions.len(), "actions": actions }))
}

fn get_history(s: &Session) -> (u16, Value) {
    (200, json!({ "session_id": s.id, "seed": s.seed, "history": s.history }))
}

fn post_query(s: &mut Session, body: &Value) -> Reply {
    let t = parse_threshold(body.get("min_reward").unwrap_or(&Value::Null))?;
    let text = match body.get("restriction") {
        None | Some(Value::Null) => "true",
        Some(Value::String(r)) => r.as_str(),
        Some(_) => return Err(Failure::bad("restriction must be a string")),
    };
    let p = match body.get("min_prob") {
        None | Some(Value::Null) => 0.0,
        Some(v) => v.as_f64().ok_or_else(|| Failure::bad("min_prob must be a number"))?,
    };
    let pred = RestrictionPredicate::parse(&s.lm, text)?;
    let result = conditional_action_query(&s.lm, &s.plan, &s.state, t, &pred, p)?.to_json(&s.lm);
    s.history.push(json!({
        "kind": "query",
        "state": s.lm.state_to_json(&s.state),
        "request": { "min_reward": result["t"], "restriction": text, "min_prob": p },
        "result": result,
    }));
    Ok((200, result))
}

fn post_step(s: &mut Session, body: &Value) -> Reply {
    let a = s.lm.action_from_json(body.get("action").ok_or_else(|| Failure::bad("body needs an action"))?)?;
    if let Err(e) = s.lm.check_action(&s.state, &a) {
        return Err(Failure(409, e.to_string()));
    }
    let r = reward(&s.lm, &s.state);
    let next = sample_next_with(&s.lm, &s.state, &a, &mut s.rng)?;
    let reply = json!({
        "state": s.lm.state_to_json(&s.state),
        "action": s.lm.action_to_json(&a),
        "next_state": s.lm.state_to_json(&next),
        "reward": r,
    });
    s.history.push(json!({ "kind": "step", "state": reply["state"], "action": reply["action"], "next_state": reply["next_state"], "reward": r }));
    s.state = next;
    Ok((200, reply))
}

fn respond(code: u16, body: Option<Value>) -> Response {
    let builder = Response::builder()
        .status(StatusCode::from_u16(code).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR))
        .header(header::ACCESS_CONTROL_ALLOW_ORIGIN, "*")
        .header(header::ACCESS_CONTROL_ALLOW_METHODS, "GET, POST, OPTIONS")
        .header(header::ACCESS_CONTROL_ALLOW_HEADERS, "content-type");
    match body {
        Some(v) => builder.header(header::CONTENT_TYPE, "application/json").body(Body::from(v.to_string())),
        None => builder.body(Body::empty()),
    }
    .expect("response")
}

/// Axum router forwarding everything to [`Service::handle`].
pub fn router(svc: Arc<Service>) -> Router {
    Router::new().fallback(move |method: Method, uri: Uri, body: Bytes| {
        let svc = svc.clone();
        async move {
            if method == Method::OPTIONS {
                return respond(204, None);
            }
            let path = uri.path().to_string();
            let joined = tokio::task::spawn_blocking(move || svc.handle(method.as_str(), &path, &body)).await;
            match joined {
                Ok((code, v)) => respond(code, Some(v)),
                Err(e) => respond(500, Some(json!({ "error": e.to_string() }))),
            }
        }
    })
}

pub async fn serve(svc: Arc<Service>, listener: tokio::net::TcpListener) -> Result<()> {
    axum::serve(listener, router(svc)).await?;
    Ok(())
}
