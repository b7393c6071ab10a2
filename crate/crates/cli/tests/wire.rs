use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use convxai_cli::server::router;
use convxai_core::artifacts::{Artifacts, TrainConfig};
use convxai_core::service::{Service, ServiceConfig};
use convxai_core::synth::{synth_corpus, SynthConfig};

const TEXT: &str = "We introduce a novel approach to neural parsing under realistic constraints. \
Recent years have seen growing interest in sparse translation. \
We fine tune a pretrained transformer on robust summarization with a shared decoder. \
Experiments show that our approach to efficient parsing yields state of the art accuracy.";

fn artifacts() -> Arc<Artifacts> {
    static CELL: OnceLock<Arc<Artifacts>> = OnceLock::new();
    CELL.get_or_init(|| {
        let corpus = synth_corpus(&SynthConfig {
            conferences: vec!["acl".into(), "chi".into()],
            sentences_per_conference: 300,
            ..Default::default()
        });
        Arc::new(Artifacts::train(&corpus, &TrainConfig::default()).unwrap())
    })
    .clone()
}

fn schema() -> &'static Value {
    static CELL: OnceLock<Value> = OnceLock::new();
    CELL.get_or_init(|| {
        let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../schema/wire-v1.json");
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
    })
}

/// Checks `value` against the subset of JSON Schema the wire file uses.
fn conforms(value: &Value, schema: &Value, path: &str) -> Result<(), String> {
    if let Some(r) = schema.get("$ref").and_then(Value::as_str) {
        let name = r.trim_start_matches("#/$defs/");
        return conforms(value, &self::schema()["$defs"][name], path);
    }
    if let Some(options) = schema.get("oneOf").and_then(Value::as_array) {
        let matching = options.iter().filter(|o| conforms(value, o, path).is_ok()).count();
        return if matching == 1 { Ok(()) } else { Err(format!("{path}: {matching} oneOf branches match {value}")) };
    }
    if let Some(c) = schema.get("const") {
        if c != value {
            return Err(format!("{path}: expected {c}, got {value}"));
        }
    }
    if let Some(options) = schema.get("enum").and_then(Value::as_array) {
        if !options.contains(value) {
            return Err(format!("{path}: {value} not in enum"));
        }
    }
    if let Some(t) = schema.get("type") {
        let types: Vec<&str> = match t {
            Value::String(s) => vec![s.as_str()],
            Value::Array(a) => a.iter().filter_map(Value::as_str).collect(),
            _ => vec![],
        };
        let ok = types.iter().any(|t| match *t {
            "object" => value.is_object(),
            "array" => value.is_array(),
            "string" => value.is_string(),
            "integer" => value.is_u64() || value.is_i64(),
            "number" => value.is_number(),
            "boolean" => value.is_boolean(),
            "null" => value.is_null(),
            _ => false,
        });
        if !ok {
            return Err(format!("{path}: {value} is not {types:?}"));
        }
    }
    if let Some(obj) = value.as_object() {
        let props = schema.get("properties").and_then(Value::as_object);
        for req in schema.get("required").and_then(Value::as_array).into_iter().flatten() {
            let key = req.as_str().unwrap();
            if !obj.contains_key(key) {
                return Err(format!("{path}: missing `{key}`"));
            }
        }
        for (k, v) in obj {
            match props.and_then(|p| p.get(k)) {
                Some(s) => conforms(v, s, &format!("{path}.{k}"))?,
                None => match schema.get("additionalProperties") {
                    Some(Value::Bool(false)) => return Err(format!("{path}: undocumented field `{k}`")),
                    Some(s @ Value::Object(_)) => conforms(v, s, &format!("{path}.{k}"))?,
                    _ => {}
                },
            }
        }
    }
    if let (Some(items), Some(arr)) = (schema.get("items"), value.as_array()) {
        for (i, v) in arr.iter().enumerate() {
            conforms(v, items, &format!("{path}[{i}]"))?;
        }
    }
    Ok(())
}

fn assert_conforms(value: &Value, def: &str) {
    if let Err(e) = conforms(value, &schema()["$defs"][def], def) {
        panic!("{e}");
    }
}

struct Client {
    app: axum::Router,
}

impl Client {
    fn new() -> Self {
        let service = Service::new(artifacts(), ServiceConfig::default()).unwrap();
        Self { app: router(Arc::new(service)) }
    }

    async fn call(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
        let req = req.body(body.map_or_else(Body::empty, |b| Body::from(b.to_string()))).unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or(Value::Null) };
        (status, value)
    }

    async fn post(&self, uri: &str, body: Value) -> (StatusCode, Value) {
        self.call(Method::POST, uri, Some(body)).await
    }

    async fn get(&self, uri: &str) -> (StatusCode, Value) {
        self.call(Method::GET, uri, None).await
    }

    async fn session(&self) -> String {
        let (status, body) = self.post("/v1/sessions", json!({"conference": "acl"})).await;
        assert_eq!(status, StatusCode::CREATED);
        body["session_id"].as_str().unwrap().to_string()
    }
}

#[tokio::test]
async fn health_and_session_creation() {
    let c = Client::new();
    let (status, health) = c.get("/v1/health").await;
    assert_eq!(status, StatusCode::OK);
    assert_conforms(&health, "Health");
    assert_eq!(health["conferences"], json!(["acl", "chi"]));

    let (status, info) = c.post("/v1/sessions", json!({"conference": "chi", "theme": "dark"})).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_conforms(&info, "SessionInfo");
    let other = c.session().await;
    assert_ne!(info["session_id"].as_str().unwrap(), other);

    let (status, err) = c.post("/v1/sessions", json!({"conference": "nips"})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_conforms(&err, "Error");
    assert_eq!(err["error"]["available"], json!(["acl", "chi"]));

    let (status, err) = c.post("/v1/sessions", json!({"venue": "acl"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_conforms(&err, "Error");
}

#[tokio::test]
async fn full_exchange_conforms_to_schema() {
    let c = Client::new();
    let id = c.session().await;
    let (status, doc) = c.post(&format!("/v1/sessions/{id}/abstract"), json!({"text": TEXT, "draft": true})).await;
    assert_eq!(status, StatusCode::OK);
    assert_conforms(&doc, "AbstractDocument");
    assert_eq!(doc["sentences"].as_array().unwrap().len(), 4);

    let (status, sel) = c.post(&format!("/v1/sessions/{id}/select"), json!({"sentence_index": 0, "revision": 1})).await;
    assert_eq!(status, StatusCode::OK);
    assert_conforms(&sel, "DialogueResponse");
    assert_eq!(sel["turn_index"], Value::Null);

    for u in [
        "which words are important?",
        "top 3",
        "show me similar examples",
        "2 + background",
        "rewrite it",
        "how confident is the model?",
        "what data was used?",
        "how are the labels distributed?",
        "what does the quality score mean?",
        "is this sentence too long?",
        "what kind of model is used?",
        "can you explain this review?",
        "qwerty",
    ] {
        let (status, r) = c.post(&format!("/v1/sessions/{id}/chat"), json!({"utterance": u})).await;
        assert_eq!(status, StatusCode::OK, "{u}");
        assert_conforms(&r, "DialogueResponse");
    }
    let (_, r) = c.post(&format!("/v1/sessions/{id}/chat"), json!({"utterance": "highlight important words, top 3"})).await;
    let map = &r["payload"]["attachments"][0];
    assert_eq!(map["kind"], "attribution_map");
    assert_eq!(map["highlighted"].as_array().unwrap().len(), 3);

    let (_, log) = c.get(&format!("/v1/sessions/{id}/log")).await;
    assert_conforms(&log, "SessionLog");
    let (_, usage) = c.get(&format!("/v1/usage?session={id}")).await;
    assert_conforms(&usage, "UsageStats");
    assert_eq!(usage["turns"], 14);
    assert_eq!(usage["fallback"], 1);
}

#[tokio::test]
async fn unknown_tokens_are_refused_without_side_effects() {
    let c = Client::new();
    let id = c.session().await;
    let (status, err) = c.post("/v1/sessions/0123/chat", json!({"utterance": "hi"})).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    assert_eq!(err["error"]["code"], "unknown_session");
    let (status, _) = c.get("/v1/sessions/0123/log").await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let (_, usage) = c.get("/v1/usage").await;
    assert_eq!(usage["turns"], 0);

    let (_, log) = c.get(&format!("/v1/sessions/{id}/log")).await;
    let before = log["events"].as_array().unwrap().len();
    let (status, err) = c.post(&format!("/v1/sessions/{id}/abstract"), json!({"text": "x".repeat(10_001)})).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(err["error"]["code"], "abstract_too_long");
    let (status, _) = c.post(&format!("/v1/sessions/{id}/select"), json!({"sentence_index": 0})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (_, log) = c.get(&format!("/v1/sessions/{id}/log")).await;
    assert_eq!(log["events"].as_array().unwrap().len(), before);

    // each chat call appends exactly one event
    c.post(&format!("/v1/sessions/{id}/chat"), json!({"utterance": "what data was used?"})).await;
    let (_, log) = c.get(&format!("/v1/sessions/{id}/log")).await;
    assert_eq!(log["events"].as_array().unwrap().len(), before + 1);
}

#[tokio::test]
async fn websocket_chat_round_trip() {
    use futures_util::{SinkExt, StreamExt};
    use tokio_tungstenite::tungstenite::Message;

    let service = Arc::new(Service::new(artifacts(), ServiceConfig::default()).unwrap());
    let id = service.create_session("acl").unwrap().session_id;
    service.submit_abstract(&id, TEXT).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = router(service.clone());
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });

    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/v1/sessions/{id}/stream")).await.unwrap();
    ws.send(Message::text(json!({"type": "select", "sentence_index": 1}).to_string())).await.unwrap();
    ws.send(Message::text(json!({"type": "chat", "utterance": "show me examples"}).to_string())).await.unwrap();
    ws.send(Message::text("not json")).await.unwrap();
    let mut replies = Vec::new();
    while replies.len() < 3 {
        if let Some(Ok(Message::Text(t))) = ws.next().await {
            replies.push(serde_json::from_str::<Value>(&t).unwrap());
        }
    }
    for r in &replies {
        assert_conforms(r, "StreamMessage");
    }
    assert_eq!(replies[1]["response"]["intent"], "example");
    assert_eq!(replies[2]["error"]["code"], "bad_request");
    assert_eq!(service.session_log(&id).unwrap().len(), 4);

    let refused = tokio_tungstenite::connect_async(format!("ws://{addr}/v1/sessions/nope/stream")).await;
    assert!(refused.is_err());
}
