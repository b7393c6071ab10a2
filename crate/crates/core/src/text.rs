//! Tokenization and sentence segmentation.

use std::ops::Range;

use serde::{Deserialize, Serialize};

/// Abbreviations whose trailing period never ends a sentence.
pub const ABBREVIATIONS: &[&str] = &[
    "e.g.", "i.e.", "al.", "et al.", "fig.", "figs.", "vs.", "cf.", "eq.", "eqs.", "sec.",
    "approx.", "resp.", "no.", "dr.", "mr.", "ms.", "prof.",
];

/// Lowercased word tokens: maximal runs of alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn token_count(text: &str) -> usize {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .count()
}

/// One sentence of a segmented text, as a byte range into the source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub start: usize,
    pub end: usize,
}

impl SentenceSpan {
    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }

    pub fn text<'a>(&self, source: &'a str) -> &'a str {
        &source[self.range()]
    }
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '?' | '!')
}

fn is_closer(c: char) -> bool {
    matches!(c, ')' | ']' | '"' | '\'' | '\u{201d}' | '\u{2019}')
}

/// Splits `text` into sentences.
///
/// A boundary is a run of `.?!` (plus closing quotes or brackets) followed by
/// whitespace and then an uppercase letter or digit. Periods ending one of
/// [`ABBREVIATIONS`] never split.
pub fn segment_abstract(text: &str) -> Vec<SentenceSpan> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut spans = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;

    while i < chars.len() {
        let (pos, c) = chars[i];
        if !is_terminal(c) {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < chars.len() && (is_terminal(chars[j].1) || is_closer(chars[j].1)) {
            j += 1;
        }
        let end = chars.get(j).map_or(text.len(), |(p, _)| *p);
        let mut k = j;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        let boundary = k > j
            && k < chars.len()
            && (chars[k].1.is_uppercase() || chars[k].1.is_ascii_digit())
            && !(c == '.' && ends_with_abbreviation(&text[start..pos + 1]));
        if boundary {
            push_trimmed(text, start, end, &mut spans);
            start = chars[k].0;
            i = k;
        } else {
            i = j;
        }
    }
    push_trimmed(text, start, text.len(), &mut spans);
    spans
}

fn ends_with_abbreviation(segment: &str) -> bool {
    let lower = segment.to_lowercase();
    ABBREVIATIONS.iter().any(|abbr| {
        lower.ends_with(abbr) && {
            let before = &lower[..lower.len() - abbr.len()];
            before.is_empty() || before.ends_with(|c: char| !c.is_alphanumeric())
        }
    })
}

fn push_trimmed(text: &str, start: usize, end: usize, spans: &mut Vec<SentenceSpan>) {
    let slice = &text[start..end];
    let leading = slice.len() - slice.trim_start().len();
    let trimmed = slice.trim();
    if !trimmed.is_empty() {
        let s = start + leading;
        spans.push(SentenceSpan { start: s, end: s + trimmed.len() });
    }
}

/// Convenience: segment and return the owned sentence strings.
pub fn split_sentences(text: &str) -> Vec<String> {
    segment_abstract(text)
        .iter()
        .map(|s| s.text(text).to_string())
        .collect()
}
