//! Punctuation-based chunking of agent replies.
//!
//! A reply is first segmented after each run of terminator characters, then
//! rebalanced: over-long chunks are split into near-equal pieces at word
//! boundaries (with a break mark appended where the split would otherwise be
//! unpunctuated) and very short chunks are merged into their neighbours.
//! Equal-ish chunk lengths keep each chunk's synthesis shorter than the
//! playback of the one before it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of maximal whitespace-delimited runs. Punctuation stays attached
/// to its word.
pub fn token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChunkingConfigError {
    #[error("max_tokens ({max}) must be at least max(1, min_tokens = {min})")]
    Bounds { max: usize, min: usize },
    #[error("character {0:?} is both a terminator and a soft break")]
    Overlap(char),
    #[error("insert_mark must not be whitespace")]
    WhitespaceMark,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChunkingConfig {
    /// Characters that end a segment.
    pub terminators: String,
    /// Characters that already read as a pause, so no mark is inserted after them.
    pub soft_breaks: String,
    pub max_tokens: usize,
    pub min_tokens: usize,
    pub insert_mark: char,
    pub merge_short: bool,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        Self {
            terminators: ".!?;:".into(),
            soft_breaks: ",".into(),
            max_tokens: 12,
            min_tokens: 3,
            insert_mark: ',',
            merge_short: true,
        }
    }
}

impl ChunkingConfig {
    pub fn with_max_tokens(mut self, max_tokens: usize) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    pub fn with_min_tokens(mut self, min_tokens: usize) -> Self {
        self.min_tokens = min_tokens;
        self
    }

    pub fn validate(&self) -> Result<(), ChunkingConfigError> {
        if self.max_tokens < self.min_tokens.max(1) {
            return Err(ChunkingConfigError::Bounds {
                max: self.max_tokens,
                min: self.min_tokens,
            });
        }
        if let Some(c) = self.terminators.chars().find(|c| self.soft_breaks.contains(*c)) {
            return Err(ChunkingConfigError::Overlap(c));
        }
        if self.insert_mark.is_whitespace() {
            return Err(ChunkingConfigError::WhitespaceMark);
        }
        Ok(())
    }

    fn is_terminator(&self, c: char) -> bool {
        self.terminators.contains(c)
    }

    fn is_break(&self, c: char) -> bool {
        self.terminators.contains(c) || self.soft_breaks.contains(c)
    }
}

/// One piece of a reply, synthesized and streamed on its own.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    text: String,
    token_count: usize,
    /// Indices of tokens whose final character is an inserted mark.
    marked_tokens: Vec<usize>,
}

impl Chunk {
    /// Chunk with no inserted marks. Whitespace is normalized to single spaces.
    pub fn new(text: &str) -> Self {
        let tokens: Vec<String> = text.split_whitespace().map(str::to_owned).collect();
        Self::from_tokens(tokens, Vec::new())
    }

    fn from_tokens(tokens: Vec<String>, marked_tokens: Vec<usize>) -> Self {
        Chunk {
            token_count: tokens.len(),
            text: tokens.join(" "),
            marked_tokens,
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn token_count(&self) -> usize {
        self.token_count
    }

    pub fn inserted_break_count(&self) -> usize {
        self.marked_tokens.len()
    }

    fn tokens(&self) -> Vec<String> {
        self.text.split_whitespace().map(str::to_owned).collect()
    }

    /// Tokens with every inserted mark removed.
    pub fn original_tokens(&self) -> Vec<String> {
        let mut tokens = self.tokens();
        for &i in &self.marked_tokens {
            tokens[i].pop();
        }
        tokens
    }
}

/// Splits after every run of terminators that ends a token.
///
/// A terminator inside a token ("3.5", "a.b") does not split, so every chunk
/// boundary is also a word boundary.
pub fn segment(text: &str, cfg: &ChunkingConfig) -> Vec<Chunk> {
    let mut chunks = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();

    while let Some(c) = chars.next() {
        current.push(c);
        if !cfg.is_terminator(c) {
            continue;
        }
        while let Some(&next) = chars.peek() {
            if !cfg.is_terminator(next) {
                break;
            }
            current.push(next);
            chars.next();
        }
        if chars.peek().is_none_or(|c| c.is_whitespace()) {
            flush(&mut current, &mut chunks);
        }
    }
    flush(&mut current, &mut chunks);
    chunks
}

fn flush(current: &mut String, chunks: &mut Vec<Chunk>) {
    if !current.trim().is_empty() {
        chunks.push(Chunk::new(current));
    }
    current.clear();
}

/// Near-equal partition of `total` tokens into `ceil(total / max)` pieces.
/// Remainders go to the earliest pieces, so sizes are non-increasing.
pub fn piece_sizes(total: usize, max_tokens: usize) -> Vec<usize> {
    if total == 0 {
        return Vec::new();
    }
    let max_tokens = max_tokens.max(1);
    let k = total.div_ceil(max_tokens);
    let (base, extra) = (total / k, total % k);
    (0..k).map(|i| base + usize::from(i < extra)).collect()
}

pub fn rebalance(chunks: Vec<Chunk>, cfg: &ChunkingConfig) -> Vec<Chunk> {
    let split: Vec<Chunk> = chunks
        .into_iter()
        .flat_map(|chunk| split_long(chunk, cfg))
        .collect();
    if cfg.merge_short {
        merge_short(split, cfg)
    } else {
        split
    }
}

fn split_long(chunk: Chunk, cfg: &ChunkingConfig) -> Vec<Chunk> {
    if chunk.token_count <= cfg.max_tokens {
        return vec![chunk];
    }
    let sizes = piece_sizes(chunk.token_count, cfg.max_tokens);
    let mut tokens = chunk.tokens().into_iter();
    let mut marks = chunk.marked_tokens.iter().copied().peekable();
    let mut offset = 0;
    let last = sizes.len() - 1;

    sizes
        .iter()
        .enumerate()
        .map(|(i, &size)| {
            let mut piece: Vec<String> = tokens.by_ref().take(size).collect();
            let mut piece_marks = Vec::new();
            while let Some(m) = marks.next_if(|&m| m < offset + size) {
                piece_marks.push(m - offset);
            }
            offset += size;
            if i != last {
                let tail = piece.last_mut().expect("pieces are non-empty");
                if !tail.chars().last().is_some_and(|c| cfg.is_break(c)) {
                    tail.push(cfg.insert_mark);
                    piece_marks.push(size - 1);
                }
            }
            Chunk::from_tokens(piece, piece_marks)
        })
        .collect()
}

fn merge_short(mut chunks: Vec<Chunk>, cfg: &ChunkingConfig) -> Vec<Chunk> {
    let mut i = 0;
    while i < chunks.len() {
        let short = chunks[i].token_count < cfg.min_tokens;
        if short && i + 1 < chunks.len() {
            if chunks[i].token_count + chunks[i + 1].token_count <= cfg.max_tokens {
                let next = chunks.remove(i + 1);
                let cur = chunks.remove(i);
                chunks.insert(i, join(cur, next));
                // the merged chunk may itself still be short
                continue;
            }
        } else if short && i > 0 && chunks[i - 1].token_count + chunks[i].token_count <= cfg.max_tokens {
            let cur = chunks.remove(i);
            let prev = chunks.remove(i - 1);
            chunks.insert(i - 1, join(prev, cur));
            break;
        }
        i += 1;
    }
    chunks
}

fn join(first: Chunk, second: Chunk) -> Chunk {
    let offset = first.token_count;
    let mut tokens = first.tokens();
    tokens.extend(second.tokens());
    let mut marks = first.marked_tokens;
    marks.extend(second.marked_tokens.iter().map(|m| m + offset));
    Chunk::from_tokens(tokens, marks)
}

/// Full production path: segment, then rebalance.
pub fn chunk_response(text: &str, cfg: &ChunkingConfig) -> Vec<Chunk> {
    rebalance(segment(text, cfg), cfg)
}
