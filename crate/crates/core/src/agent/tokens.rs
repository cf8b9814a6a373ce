/// Pluggable token counting. Implementations must be deterministic and
/// monotone under concatenation.
pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> usize;

    /// Counters that are a pure function of the whitespace word count return
    /// it here so the pruner can skip re-tokenizing each pass.
    fn count_for_words(&self, _words: usize) -> Option<usize> {
        None
    }
}

pub fn count_tokens(text: &str, counter: &dyn TokenCounter) -> usize {
    counter.count(text)
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// One token per whitespace-separated word.
#[derive(Debug, Clone, Copy, Default)]
pub struct WordCounter;

impl TokenCounter for WordCounter {
    fn count(&self, text: &str) -> usize {
        word_count(text)
    }

    fn count_for_words(&self, words: usize) -> Option<usize> {
        Some(words)
    }
}

/// `ceil(words * 4 / 3)`, a rough stand-in for a BPE tokenizer on English text.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicCounter;

impl TokenCounter for HeuristicCounter {
    fn count(&self, text: &str) -> usize {
        heuristic(word_count(text))
    }

    fn count_for_words(&self, words: usize) -> Option<usize> {
        Some(heuristic(words))
    }
}

fn heuristic(words: usize) -> usize {
    (words * 4).div_ceil(3)
}
