//! Chat-completions HTTP adapter.
//!
//! Speaks the widely implemented `POST .../chat/completions` shape: `messages`
//! plus `tools`, answering with either `tool_calls` or plain `content`.

use super::backend::{BackendError, BackendReply, ModelBackend};
use super::conversation::{Conversation, Role};
use crate::tools::{FunctionSpec, ToolCall};
use async_trait::async_trait;
use serde_json::{json, Map, Value};
use std::time::Duration;

pub const ENV_ENDPOINT: &str = "MODEL_ENDPOINT";
pub const ENV_KEY: &str = "MODEL_KEY";
pub const ENV_MODEL: &str = "MODEL_NAME";

#[derive(Debug, Clone)]
pub struct HttpBackendConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
}

impl HttpBackendConfig {
    pub fn from_env() -> Result<Self, String> {
        let endpoint = std::env::var(ENV_ENDPOINT).map_err(|_| format!("{ENV_ENDPOINT} is not set"))?;
        let model = std::env::var(ENV_MODEL).map_err(|_| format!("{ENV_MODEL} is not set"))?;
        Ok(HttpBackendConfig {
            endpoint,
            api_key: std::env::var(ENV_KEY).ok().filter(|k| !k.is_empty()),
            model,
            timeout: Duration::from_secs(120),
        })
    }
}

pub struct HttpBackend {
    client: reqwest::Client,
    config: HttpBackendConfig,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Result<Self, BackendError> {
        let client = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::fatal(format!("http client: {e}")))?;
        Ok(HttpBackend { client, config })
    }
}

/// Request body for one completion.
pub fn request_body(model: &str, conversation: &Conversation, functions: &[FunctionSpec]) -> Value {
    let messages: Vec<Value> = conversation
        .messages()
        .iter()
        .map(|m| match m.role {
            Role::System => json!({"role": "system", "content": m.content}),
            Role::User => json!({"role": "user", "content": m.content}),
            Role::Assistant => match &m.tool_calls {
                Some(calls) => json!({
                    "role": "assistant",
                    "content": if m.content.is_empty() { Value::Null } else { Value::String(m.content.clone()) },
                    "tool_calls": calls.iter().map(|c| json!({
                        "id": c.call_id,
                        "type": "function",
                        "function": {"name": c.name, "arguments": Value::Object(c.args.clone()).to_string()}
                    })).collect::<Vec<_>>()
                }),
                None => json!({"role": "assistant", "content": m.content}),
            },
            Role::Tool => json!({
                "role": "tool",
                "tool_call_id": m.tool_result.as_ref().map(|r| r.call_id.as_str()).unwrap_or_default(),
                "content": m.content
            }),
        })
        .collect();
    let mut body = json!({"model": model, "messages": messages});
    if !functions.is_empty() {
        body["tools"] = Value::Array(functions.iter().map(FunctionSpec::to_wire).collect());
        body["tool_choice"] = json!("auto");
    }
    body
}

/// Interpret a chat-completions response body.
pub fn parse_response(body: &Value) -> Result<BackendReply, BackendError> {
    let message = body
        .pointer("/choices/0/message")
        .ok_or_else(|| BackendError::fatal("response has no choices[0].message"))?;
    if let Some(calls) = message.get("tool_calls").and_then(Value::as_array).filter(|c| !c.is_empty()) {
        let mut out = Vec::with_capacity(calls.len());
        for (i, call) in calls.iter().enumerate() {
            let name = call
                .pointer("/function/name")
                .and_then(Value::as_str)
                .ok_or_else(|| BackendError::fatal("tool call without a function name"))?;
            let raw_args = call.pointer("/function/arguments").cloned().unwrap_or(Value::Null);
            let args = match raw_args {
                Value::String(s) if s.trim().is_empty() => Map::new(),
                Value::String(s) => match serde_json::from_str::<Value>(&s) {
                    Ok(Value::Object(m)) => m,
                    // Let argument validation report it back to the model.
                    _ => Map::from_iter([("_unparsed_arguments".to_string(), Value::String(s))]),
                },
                Value::Object(m) => m,
                _ => Map::new(),
            };
            out.push(ToolCall {
                call_id: call
                    .get("id")
                    .and_then(Value::as_str)
                    .map(str::to_string)
                    .unwrap_or_else(|| format!("call_{i}")),
                name: name.to_string(),
                args,
            });
        }
        return Ok(BackendReply::ToolCalls(out));
    }
    match message.get("content").and_then(Value::as_str) {
        Some(text) => Ok(BackendReply::Final(text.to_string())),
        None => Err(BackendError::fatal("response carries neither tool_calls nor content")),
    }
}

#[async_trait]
impl ModelBackend for HttpBackend {
    async fn complete(
        &self,
        conversation: &Conversation,
        functions: &[FunctionSpec],
    ) -> Result<BackendReply, BackendError> {
        let body = request_body(&self.config.model, conversation, functions);
        let mut req = self.client.post(&self.config.endpoint).json(&body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .await
            .map_err(|e| BackendError::retriable(format!("request failed: {e}")))?;
        let status = resp.status();
        if !status.is_success() {
            let text = resp.text().await.unwrap_or_default();
            let detail = format!("endpoint answered {status}: {}", text.chars().take(300).collect::<String>());
            return Err(if status.as_u16() == 429 || status.is_server_error() {
                BackendError::retriable(detail)
            } else {
                BackendError::fatal(detail)
            });
        }
        let value: Value = resp
            .json()
            .await
            .map_err(|e| BackendError::fatal(format!("undecodable response: {e}")))?;
        parse_response(&value)
    }

    fn name(&self) -> &str {
        "http"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tools::{Registry, ToolResult, ToolStatus};

    #[test]
    fn request_carries_tools_and_tool_messages() {
        let mut conv = Conversation::new("sys");
        conv.push_user("hello");
        let call = ToolCall {
            call_id: "c9".into(),
            name: "add".into(),
            args: serde_json::from_str(r#"{"a":1,"b":2}"#).unwrap(),
        };
        conv.push_assistant_calls(vec![call]);
        conv.push_tool_result(ToolResult {
            call_id: "c9".into(),
            status: ToolStatus::Ok,
            body: "3".into(),
            records_count: 0,
        })
        .unwrap();
        let reg = Registry::standard();
        let body = request_body("m", &conv, reg.list_specs());
        assert_eq!(body["messages"][2]["tool_calls"][0]["function"]["arguments"], r#"{"a":1,"b":2}"#);
        assert_eq!(body["messages"][3]["tool_call_id"], "c9");
        assert_eq!(body["tools"].as_array().unwrap().len(), reg.list_specs().len());
    }

    #[test]
    fn parses_both_reply_shapes() {
        let calls = json!({"choices": [{"message": {"tool_calls": [
            {"id": "x", "type": "function", "function": {"name": "add", "arguments": "{\"a\": 1, \"b\": 2}"}}
        ]}}]});
        let BackendReply::ToolCalls(c) = parse_response(&calls).unwrap() else { panic!() };
        assert_eq!(c[0].name, "add");
        assert_eq!(c[0].args["b"], 2);
        let text = json!({"choices": [{"message": {"content": "done"}}]});
        assert_eq!(parse_response(&text).unwrap(), BackendReply::Final("done".into()));
        assert!(parse_response(&json!({})).is_err());
    }
}
