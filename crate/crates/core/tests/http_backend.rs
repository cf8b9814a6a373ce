use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use labelflow_core::agent::{
    run_agent, AgentConfig, AgentError, HttpBackend, HttpBackendConfig, RetryPolicy, Role,
};
use labelflow_core::ehr::Store;
use labelflow_core::tools::Registry;
use serde_json::{json, Value};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

#[derive(Clone)]
struct Mock {
    hits: Arc<AtomicUsize>,
    fail_first: usize,
    status: StatusCode,
}

async fn completions(State(mock): State<Mock>, headers: HeaderMap, Json(body): Json<Value>) -> (StatusCode, Json<Value>) {
    let n = mock.hits.fetch_add(1, Ordering::SeqCst);
    if n < mock.fail_first {
        return (mock.status, Json(json!({"error": "busy"})));
    }
    assert_eq!(headers.get("authorization").unwrap(), "Bearer k3y");
    assert!(body["tools"].as_array().unwrap().len() > 10);
    let messages = body["messages"].as_array().unwrap();
    let reply = if messages.iter().any(|m| m["role"] == "tool") {
        let tool = messages.iter().find(|m| m["role"] == "tool").unwrap();
        assert!(tool["content"].as_str().unwrap().contains("Ada"));
        json!({"role": "assistant", "content": "```json\n{\"ok\": true}\n```"})
    } else {
        json!({"role": "assistant", "content": null, "tool_calls": [{
            "id": "call_a", "type": "function",
            "function": {"name": "get_patient_details", "arguments": "{\"patient_id\": \"P0001\"}"}
        }]})
    };
    (StatusCode::OK, Json(json!({"choices": [{"index": 0, "message": reply}]})))
}

async fn serve(mock: Mock) -> String {
    let app = Router::new().route("/v1/chat/completions", post(completions)).with_state(mock);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}/v1/chat/completions")
}

fn backend(endpoint: String) -> HttpBackend {
    HttpBackend::new(HttpBackendConfig {
        endpoint,
        api_key: Some("k3y".into()),
        model: "test-model".into(),
        timeout: Duration::from_secs(5),
    })
    .unwrap()
}

fn config() -> AgentConfig {
    AgentConfig {
        retry: RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(1),
        },
        ..AgentConfig::default()
    }
}

fn store() -> Store {
    Store::load(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/store")).unwrap()
}

#[tokio::test]
async fn round_trip_through_http_backend() {
    let mock = Mock {
        hits: Arc::new(AtomicUsize::new(0)),
        fail_first: 2,
        status: StatusCode::SERVICE_UNAVAILABLE,
    };
    let hits = mock.hits.clone();
    let url = serve(mock).await;
    let t = run_agent("P0001", "Describe P0001.", &Registry::standard(), &store(), &backend(url), &config())
        .await
        .unwrap();
    assert_eq!(t.turns, 2);
    assert_eq!(t.tool_call_log[0].name, "get_patient_details");
    assert_eq!(t.messages.iter().filter(|m| m.role == Role::Tool).count(), 1);
    assert!(t.final_text.contains("\"ok\""));
    assert_eq!(hits.load(Ordering::SeqCst), 4);
}

#[tokio::test]
async fn client_errors_are_not_retried() {
    let mock = Mock {
        hits: Arc::new(AtomicUsize::new(0)),
        fail_first: 100,
        status: StatusCode::BAD_REQUEST,
    };
    let hits = mock.hits.clone();
    let url = serve(mock).await;
    let err = run_agent("P0001", "x", &Registry::standard(), &store(), &backend(url), &config())
        .await
        .unwrap_err();
    assert!(matches!(err, AgentError::BackendFailure { retriable: false, .. }));
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[tokio::test]
async fn unreachable_endpoint_is_retriable() {
    let err = run_agent(
        "P0001",
        "x",
        &Registry::standard(),
        &store(),
        &backend("http://127.0.0.1:9/v1/chat/completions".into()),
        &config(),
    )
    .await
    .unwrap_err();
    assert!(matches!(err, AgentError::BackendFailure { retriable: true, .. }));
}
