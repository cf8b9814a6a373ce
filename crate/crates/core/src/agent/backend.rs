use super::conversation::Conversation;
use crate::tools::{FunctionSpec, ToolCall};
use async_trait::async_trait;
use thiserror::Error;

/// What the model decided this turn.
#[derive(Debug, Clone, PartialEq)]
pub enum BackendReply {
    ToolCalls(Vec<ToolCall>),
    Final(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{detail}")]
pub struct BackendError {
    pub detail: String,
    pub retriable: bool,
}

impl BackendError {
    pub fn retriable(detail: impl Into<String>) -> Self {
        BackendError {
            detail: detail.into(),
            retriable: true,
        }
    }

    pub fn fatal(detail: impl Into<String>) -> Self {
        BackendError {
            detail: detail.into(),
            retriable: false,
        }
    }
}

/// A chat model that can either call functions or answer.
///
/// Implementations are shared across concurrently running conversations.
#[async_trait]
pub trait ModelBackend: Send + Sync {
    async fn complete(
        &self,
        conversation: &Conversation,
        functions: &[FunctionSpec],
    ) -> Result<BackendReply, BackendError>;

    fn name(&self) -> &str {
        "backend"
    }
}
