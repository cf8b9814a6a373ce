use super::backend::{BackendError, BackendReply, ModelBackend};
use super::conversation::{Conversation, Message};
use super::prune::{prune_in_place, PruneError, PrunerConfig};
use super::tokens::{HeuristicCounter, TokenCounter};
use crate::ehr::Store;
use crate::tools::{Registry, ToolResult, ToolStatus};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::sync::Arc;
use std::time::Duration;
use thiserror::Error;

pub const DEFAULT_MAX_TURNS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

#[derive(Clone)]
pub struct AgentConfig {
    pub max_turns: usize,
    pub pruner: PrunerConfig,
    pub counter: Arc<dyn TokenCounter>,
    pub retry: RetryPolicy,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            max_turns: DEFAULT_MAX_TURNS,
            pruner: PrunerConfig::default(),
            counter: Arc::new(HeuristicCounter),
            retry: RetryPolicy::default(),
        }
    }
}

impl std::fmt::Debug for AgentConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AgentConfig")
            .field("max_turns", &self.max_turns)
            .field("pruner", &self.pruner)
            .field("retry", &self.retry)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCallRecord {
    pub name: String,
    pub args: Map<String, Value>,
    pub records_count: usize,
    pub status: ToolStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTranscript {
    pub patient_id: String,
    pub final_text: String,
    pub messages: Vec<Message>,
    pub tool_call_log: Vec<ToolCallRecord>,
    pub turns: usize,
    pub pruned_tokens_total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("no final answer within {0} turns")]
    TurnLimitExceeded(usize),
    #[error("backend failure ({}): {detail}", if *.retriable { "retriable" } else { "fatal" })]
    BackendFailure { detail: String, retriable: bool },
    #[error("context infeasible: {needed} tokens needed, budget {budget}")]
    ContextInfeasible { needed: usize, budget: usize },
}

impl AgentError {
    pub fn kind(&self) -> &'static str {
        match self {
            AgentError::EmptyPrompt => "empty_prompt",
            AgentError::TurnLimitExceeded(_) => "turn_limit_exceeded",
            AgentError::BackendFailure { .. } => "backend_failure",
            AgentError::ContextInfeasible { .. } => "context_infeasible",
        }
    }
}

impl From<PruneError> for AgentError {
    fn from(e: PruneError) -> Self {
        match e {
            PruneError::ContextInfeasible { needed, budget } => AgentError::ContextInfeasible { needed, budget },
            PruneError::InvalidConfig(reason) => AgentError::BackendFailure {
                detail: format!("invalid pruner config: {reason}"),
                retriable: false,
            },
        }
    }
}

/// System message: role statement followed by the function catalog.
pub fn system_prompt(registry: &Registry) -> String {
    let mut text = String::from(
        "You are a clinical data abstraction assistant with read-only access to a patient record system. \
         Use the functions below to retrieve the information you need, then answer in the format requested.\n\n\
         Available functions:\n",
    );
    for spec in registry.list_specs() {
        text.push_str(&spec.to_prompt_text());
        text.push('\n');
    }
    text
}

/// Drive one conversation to a final answer.
pub async fn run_agent(
    patient_id: &str,
    prompt: &str,
    registry: &Registry,
    store: &Store,
    backend: &dyn ModelBackend,
    config: &AgentConfig,
) -> Result<AgentTranscript, AgentError> {
    if prompt.trim().is_empty() {
        return Err(AgentError::EmptyPrompt);
    }
    let counter = config.counter.as_ref();
    let mut conv = Conversation::new(system_prompt(registry));
    conv.push_user(prompt);
    let mut pruned_tokens_total = prune_in_place(&mut conv, &config.pruner, counter)?.removed_tokens();

    let mut log = Vec::new();
    for turn in 1..=config.max_turns {
        let reply = complete_with_retry(backend, &conv, registry, &config.retry).await?;
        match reply {
            BackendReply::Final(text) => {
                conv.push_assistant_text(text.clone());
                return Ok(AgentTranscript {
                    patient_id: patient_id.to_string(),
                    final_text: text,
                    messages: conv.messages().to_vec(),
                    tool_call_log: log,
                    turns: turn,
                    pruned_tokens_total,
                });
            }
            BackendReply::ToolCalls(calls) => {
                if calls.is_empty() {
                    return Err(AgentError::BackendFailure {
                        detail: "backend returned an empty tool call list".into(),
                        retriable: false,
                    });
                }
                conv.push_assistant_calls(calls.clone());
                for call in &calls {
                    let result = registry
                        .dispatch(call, store)
                        .unwrap_or_else(|e| ToolResult::failure(&call.call_id, &e));
                    log.push(ToolCallRecord {
                        name: call.name.clone(),
                        args: call.args.clone(),
                        records_count: result.records_count,
                        status: result.status,
                    });
                    conv.push_tool_result(result).map_err(|e| AgentError::BackendFailure {
                        detail: e.to_string(),
                        retriable: false,
                    })?;
                    pruned_tokens_total += prune_in_place(&mut conv, &config.pruner, counter)?.removed_tokens();
                }
            }
        }
    }
    Err(AgentError::TurnLimitExceeded(config.max_turns))
}

async fn complete_with_retry(
    backend: &dyn ModelBackend,
    conv: &Conversation,
    registry: &Registry,
    policy: &RetryPolicy,
) -> Result<BackendReply, AgentError> {
    let attempts = policy.attempts.max(1);
    let mut attempt = 0;
    loop {
        attempt += 1;
        match backend.complete(conv, registry.list_specs()).await {
            Ok(reply) => return Ok(reply),
            Err(BackendError { detail, retriable }) => {
                if !retriable || attempt >= attempts {
                    return Err(AgentError::BackendFailure { detail, retriable });
                }
                tracing::warn!(attempt, %detail, "retrying backend call");
                let delay = policy.base_delay * 2u32.pow(attempt - 1);
                if !delay.is_zero() {
                    tokio::time::sleep(delay).await;
                }
            }
        }
    }
}
