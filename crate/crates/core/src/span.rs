//! Character spans. Offsets count Unicode scalar values, never bytes.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Half-open `[start, end)` range serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub const fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn is_well_formed(&self) -> bool {
        self.start <= self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// True when the span is well formed and ends at or before `len` scalars.
    pub fn fits(&self, len: usize) -> bool {
        self.is_well_formed() && self.end <= len
    }

    /// Returns the substring covered by the span, or `None` if out of bounds.
    pub fn slice<'a>(&self, text: &'a str) -> Option<&'a str> {
        if !self.is_well_formed() {
            return None;
        }
        let start = byte_offset(text, self.start)?;
        let end = byte_offset(text, self.end)?;
        Some(&text[start..end])
    }
}

impl From<[usize; 2]> for Span {
    fn from([start, end]: [usize; 2]) -> Self {
        Span { start, end }
    }
}

impl From<Span> for [usize; 2] {
    fn from(s: Span) -> Self {
        [s.start, s.end]
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// Number of Unicode scalar values in `text`.
pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Byte offset of the `chars`-th scalar, allowing one-past-the-end.
pub fn byte_offset(text: &str, chars: usize) -> Option<usize> {
    if chars == 0 {
        return Some(0);
    }
    match text.char_indices().nth(chars) {
        Some((b, _)) => Some(b),
        None if char_len(text) == chars => Some(text.len()),
        None => None,
    }
}
