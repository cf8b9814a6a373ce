//! Multi-turn tool-calling loop with context pruning.

mod backend;
mod conversation;
pub mod http;
mod prune;
mod run;
mod tokens;

pub use backend::{BackendError, BackendReply, ModelBackend};
pub use conversation::{Conversation, Message, Role, UnmatchedToolResult};
pub use http::{HttpBackend, HttpBackendConfig};
pub use prune::{conversation_tokens, prune_context, prune_in_place, PruneError, PrunePass, PruneStats, PrunerConfig};
pub use run::{
    run_agent, system_prompt, AgentConfig, AgentError, AgentTranscript, RetryPolicy, ToolCallRecord, DEFAULT_MAX_TURNS,
};
pub use tokens::{count_tokens, word_count, HeuristicCounter, TokenCounter, WordCounter};
