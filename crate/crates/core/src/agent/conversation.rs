use crate::tools::{ToolCall, ToolResult};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    /// Text the model sees; for tool messages this starts as the result body
    /// and may later be shortened by pruning.
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_calls: Option<Vec<ToolCall>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_result: Option<ToolResult>,
    pub created_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("tool result {0:?} does not answer any earlier tool call")]
pub struct UnmatchedToolResult(pub String);

/// System prompt at index 0 followed by the ordered exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conversation {
    messages: Vec<Message>,
}

impl Conversation {
    pub fn new(system_prompt: impl Into<String>) -> Conversation {
        Conversation {
            messages: vec![Message {
                role: Role::System,
                content: system_prompt.into(),
                tool_calls: None,
                tool_result: None,
                created_seq: 0,
            }],
        }
    }

    fn next_seq(&self) -> u64 {
        self.messages.len() as u64
    }

    fn push(&mut self, role: Role, content: String, tool_calls: Option<Vec<ToolCall>>, tool_result: Option<ToolResult>) {
        let created_seq = self.next_seq();
        self.messages.push(Message {
            role,
            content,
            tool_calls,
            tool_result,
            created_seq,
        });
    }

    pub fn push_user(&mut self, content: impl Into<String>) {
        self.push(Role::User, content.into(), None, None);
    }

    pub fn push_assistant_text(&mut self, content: impl Into<String>) {
        self.push(Role::Assistant, content.into(), None, None);
    }

    pub fn push_assistant_calls(&mut self, calls: Vec<ToolCall>) {
        self.push(Role::Assistant, String::new(), Some(calls), None);
    }

    pub fn push_tool_result(&mut self, result: ToolResult) -> Result<(), UnmatchedToolResult> {
        let answered = self
            .messages
            .iter()
            .filter_map(|m| m.tool_calls.as_ref())
            .flatten()
            .any(|c| c.call_id == result.call_id);
        if !answered {
            return Err(UnmatchedToolResult(result.call_id));
        }
        self.push(Role::Tool, result.body.clone(), None, Some(result));
        Ok(())
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub(crate) fn messages_mut(&mut self) -> &mut [Message] {
        &mut self.messages
    }

    pub fn system(&self) -> &Message {
        &self.messages[0]
    }

    /// The user prompt that opened the exchange.
    pub fn first_user_message(&self) -> Option<&Message> {
        self.messages.iter().find(|m| m.role == Role::User)
    }

    pub fn last(&self) -> &Message {
        self.messages.last().expect("system message always present")
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Test helper: a conversation with arbitrary non-system contents.
    pub fn with_contents<S: Into<String>>(system_prompt: impl Into<String>, contents: impl IntoIterator<Item = S>) -> Conversation {
        let mut conv = Conversation::new(system_prompt);
        for (i, c) in contents.into_iter().enumerate() {
            let role = if i % 2 == 0 { Role::User } else { Role::Assistant };
            conv.push(role, c.into(), None, None);
        }
        conv
    }
}
