//! Context-window pruning.
//!
//! When the conversation exceeds `max_history_tokens`, words are cut from the
//! end of the oldest non-system messages, `words_per_pass` at a time, with the
//! total recounted after every pass. A single skip threshold `T` starts at
//! `min_threshold_tokens`: messages at or below `T` are left alone, and a
//! message being pruned is abandoned for the next-oldest once it drops to `T`.
//! When every message is at or below `T` and the total is still too large,
//! `T` falls by `threshold_decrement_tokens`; at `T <= 0` messages are emptied
//! oldest first. The system message is never touched.

use super::conversation::Conversation;
use super::tokens::TokenCounter;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrunerConfig {
    pub max_history_tokens: usize,
    pub words_per_pass: usize,
    pub min_threshold_tokens: usize,
    pub threshold_decrement_tokens: usize,
}

impl Default for PrunerConfig {
    fn default() -> Self {
        PrunerConfig {
            max_history_tokens: 95_000,
            words_per_pass: 250,
            min_threshold_tokens: 10_000,
            threshold_decrement_tokens: 2_500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PruneError {
    #[error("invalid pruner config: {0}")]
    InvalidConfig(&'static str),
    #[error("system prompt and newest message need {needed} tokens, budget is {budget}")]
    ContextInfeasible { needed: usize, budget: usize },
}

impl PrunerConfig {
    pub fn validate(&self) -> Result<(), PruneError> {
        if self.max_history_tokens == 0
            || self.words_per_pass == 0
            || self.min_threshold_tokens == 0
            || self.threshold_decrement_tokens == 0
        {
            return Err(PruneError::InvalidConfig("all parameters must be positive"));
        }
        if self.min_threshold_tokens >= self.max_history_tokens {
            return Err(PruneError::InvalidConfig("min_threshold_tokens must be below max_history_tokens"));
        }
        Ok(())
    }
}

/// One removal pass over one message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrunePass {
    pub message_index: usize,
    pub threshold: i64,
    pub tokens_after: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PruneStats {
    pub tokens_before: usize,
    pub tokens_after: usize,
    pub passes: Vec<PrunePass>,
}

impl PruneStats {
    pub fn removed_tokens(&self) -> usize {
        self.tokens_before - self.tokens_after
    }
}

pub fn conversation_tokens(conv: &Conversation, counter: &dyn TokenCounter) -> usize {
    conv.messages().iter().map(|m| counter.count(&m.content)).sum()
}

/// Functional form: returns the pruned copy.
pub fn prune_context(
    conv: &Conversation,
    config: &PrunerConfig,
    counter: &dyn TokenCounter,
) -> Result<Conversation, PruneError> {
    let mut out = conv.clone();
    prune_in_place(&mut out, config, counter)?;
    Ok(out)
}

pub fn prune_in_place(
    conv: &mut Conversation,
    config: &PrunerConfig,
    counter: &dyn TokenCounter,
) -> Result<PruneStats, PruneError> {
    config.validate()?;
    let max = config.max_history_tokens;
    let mut counts: Vec<usize> = conv.messages().iter().map(|m| counter.count(&m.content)).collect();
    let tokens_before: usize = counts.iter().sum();
    let mut total = tokens_before;
    let mut stats = PruneStats {
        tokens_before,
        tokens_after: total,
        passes: Vec::new(),
    };
    if total <= max {
        return Ok(stats);
    }

    let floor = counts[0] + counts.get(1..).and_then(|r| r.last()).copied().unwrap_or(0);
    if floor > max {
        return Err(PruneError::ContextInfeasible {
            needed: floor,
            budget: max,
        });
    }

    let messages = conv.messages_mut();
    let mut threshold = config.min_threshold_tokens as i64;
    'sweeps: loop {
        for i in 1..messages.len() {
            if total <= max {
                break 'sweeps;
            }
            if counts[i] as i64 <= threshold {
                continue;
            }
            let content = &mut messages[i].content;
            let ends = word_ends(content);
            let mut words = ends.len();
            while counts[i] as i64 > threshold && total > max && words > 0 {
                words = words.saturating_sub(config.words_per_pass);
                let keep = if words == 0 { 0 } else { ends[words - 1] };
                content.truncate(keep);
                let now = counter
                    .count_for_words(words)
                    .unwrap_or_else(|| counter.count(content));
                total = total - counts[i] + now;
                counts[i] = now;
                stats.passes.push(PrunePass {
                    message_index: i,
                    threshold,
                    tokens_after: now,
                });
            }
        }
        if total <= max {
            break;
        }
        if threshold <= 0 {
            // Everything prunable is gone; only a counter that scores empty
            // text above zero can land here.
            return Err(PruneError::ContextInfeasible { needed: total, budget: max });
        }
        threshold -= config.threshold_decrement_tokens as i64;
    }
    stats.tokens_after = total;
    Ok(stats)
}

/// Byte offsets just past each whitespace-separated word.
fn word_ends(text: &str) -> Vec<usize> {
    let mut ends = Vec::new();
    let mut in_word = false;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if in_word {
                ends.push(i);
            }
            in_word = false;
        } else {
            in_word = true;
        }
    }
    if in_word {
        ends.push(text.len());
    }
    ends
}
