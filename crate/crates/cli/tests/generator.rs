use std::sync::Arc;
use std::time::Duration;

use axum::http::HeaderMap;
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use convxai_cli::generator::HttpGenerator;
use convxai_core::explain::{GeneratorError, TextGenerator};

async fn complete(headers: HeaderMap, Json(body): Json<Value>) -> Json<Value> {
    let prompt = body["prompt"].as_str().unwrap_or_default();
    if prompt == "slow" {
        tokio::time::sleep(Duration::from_millis(800)).await;
    }
    let auth = headers.get("authorization").and_then(|v| v.to_str().ok()).unwrap_or("none");
    Json(json!({ "text": format!("{prompt}|{}|{auth}", body["max_length"]) }))
}

/// Serves the stub on a background runtime; the blocking client must not
/// be built or dropped inside one.
fn endpoint() -> String {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            let app = Router::new().route("/complete", post(complete));
            axum::serve(listener, app).await.unwrap()
        })
    });
    format!("http://{}/complete", rx.recv().unwrap())
}

#[test]
fn request_shape_timeout_and_bound() {
    let url = endpoint();

    let g = HttpGenerator::new(&url, Some("k1".into()), Duration::from_secs(5), 2).unwrap();
    let text = g.complete("Rewrite x into label method", 40);
    assert_eq!(text.unwrap(), "Rewrite x into label method|40|Bearer k1");

    let g = HttpGenerator::new(&url, None, Duration::from_millis(100), 2).unwrap();
    let r = g.complete("slow", 10);
    assert_eq!(r, Err(GeneratorError::Timeout));

    // one slot: a second concurrent request is turned away
    let g = Arc::new(HttpGenerator::new(&url, None, Duration::from_secs(5), 1).unwrap());
    let first = {
        let g = g.clone();
        std::thread::spawn(move || g.complete("slow", 10))
    };
    std::thread::sleep(Duration::from_millis(200));
    let second = g.complete("fast", 10);
    assert_eq!(second, Err(GeneratorError::Busy));
    assert!(first.join().unwrap().is_ok());
    // the slot is released afterwards
    let again = g.complete("fast", 10);
    assert!(again.is_ok());

    let g = HttpGenerator::new("http://127.0.0.1:9/none", None, Duration::from_secs(2), 1).unwrap();
    let r = g.complete("x", 1);
    assert!(matches!(r, Err(GeneratorError::Transport(_))));
}
