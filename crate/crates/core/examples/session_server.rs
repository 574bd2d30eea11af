//! Drives the session service without a socket, then serves it when given
//! `--listen`.

use std::sync::Arc;

use rfmdp::epidemic;
use rfmdp::service::{serve, Service};
use serde_json::json;

fn main() -> rfmdp::Result<()> {
    let svc = Arc::new(Service::new(Some(epidemic(5))));
    let (code, created) = svc.handle("POST", "/sessions", br#"{"seed": 1, "state": {"Sick": [3, 2], "Travel": [2, 3], "Epidemic": false}}"#);
    println!("{code} {created}");
    let id = created["session_id"].as_str().unwrap().to_string();

    let body = json!({"min_reward": "-inf", "restriction": "count(Sick,false) >= half", "min_prob": 0.5});
    let (code, answer) = svc.handle("POST", &format!("/sessions/{id}/query"), body.to_string().as_bytes());
    println!("{code} {} actions", answer["actions"].as_array().map_or(0, Vec::len));
    let best = answer["actions"][0]["action"].clone();
    let (code, step) = svc.handle("POST", &format!("/sessions/{id}/step"), json!({ "action": best }).to_string().as_bytes());
    println!("{code} {step}");

    if std::env::args().any(|a| a == "--listen") {
        let rt = tokio::runtime::Runtime::new()?;
        rt.block_on(async {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:8080").await?;
            println!("listening on http://127.0.0.1:8080");
            serve(svc, listener).await
        })?;
    }
    Ok(())
}
