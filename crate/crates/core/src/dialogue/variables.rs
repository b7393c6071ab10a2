//! Customization variables typed into the chat.
//!
//! Grammar (fragments may appear anywhere in the utterance):
//! `<int> + <label>`, `top <int>`, a bare integer, a bare label name, a quoted
//! keyword, and the rank words `similar` / `quality`.

use serde::{Deserialize, Serialize};

use crate::explain::{ExplanationVariables, RankMethod};
use crate::intent::Intent;
use crate::label::AspectLabel;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableNotice {
    pub variable: String,
    pub requested: usize,
    pub applied: usize,
}

/// Everything recognized in an utterance, before it is narrowed to an intent.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawVariables {
    pub count: Option<usize>,
    pub top: Option<usize>,
    pub label: Option<AspectLabel>,
    pub keyword: Option<String>,
    pub rank: Option<RankMethod>,
    /// Words that are not part of any variable fragment.
    pub unrecognized: Vec<String>,
}

impl RawVariables {
    pub fn is_empty(&self) -> bool {
        self.count.is_none()
            && self.top.is_none()
            && self.label.is_none()
            && self.keyword.is_none()
            && self.rank.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Lexeme {
    Word(String),
    Number(usize),
    Plus,
    Quoted(String),
}

fn lex(utterance: &str) -> Vec<Lexeme> {
    let mut out = Vec::new();
    let mut chars = utterance.chars().peekable();
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut Vec<Lexeme>| {
        if word.is_empty() {
            return;
        }
        let w = std::mem::take(word);
        match w.parse::<usize>() {
            Ok(n) => out.push(Lexeme::Number(n)),
            // absurdly long digit runs saturate
            Err(_) if w.bytes().all(|b| b.is_ascii_digit()) => out.push(Lexeme::Number(usize::MAX)),
            Err(_) => out.push(Lexeme::Word(w)),
        }
    };
    while let Some(c) = chars.next() {
        match c {
            '"' | '\u{201c}' | '\u{201d}' => {
                flush(&mut word, &mut out);
                let mut quoted = String::new();
                for d in chars.by_ref() {
                    if matches!(d, '"' | '\u{201c}' | '\u{201d}') {
                        break;
                    }
                    quoted.push(d);
                }
                let q = quoted.trim();
                if !q.is_empty() {
                    out.push(Lexeme::Quoted(q.to_string()));
                }
            }
            '+' => {
                flush(&mut word, &mut out);
                out.push(Lexeme::Plus);
            }
            c if c.is_alphanumeric() || c == '/' || c == '_' => word.extend(c.to_lowercase()),
            _ => flush(&mut word, &mut out),
        }
    }
    flush(&mut word, &mut out);
    out
}

fn label_of(word: &str) -> Option<AspectLabel> {
    AspectLabel::parse_alias(word)
}

/// Scans an utterance for every variable fragment.
pub fn scan_variables(utterance: &str) -> RawVariables {
    let lexemes = lex(utterance);
    let mut raw = RawVariables::default();
    let mut i = 0;
    while i < lexemes.len() {
        match &lexemes[i] {
            Lexeme::Number(n) => {
                // <int> + <label>
                if let (Some(Lexeme::Plus), Some(Lexeme::Word(w))) = (lexemes.get(i + 1), lexemes.get(i + 2)) {
                    if let Some(l) = label_of(w) {
                        raw.count = Some(*n);
                        raw.label = Some(l);
                        i += 3;
                        continue;
                    }
                }
                raw.count.get_or_insert(*n);
            }
            Lexeme::Word(w) if w == "top" => {
                if let Some(Lexeme::Number(n)) = lexemes.get(i + 1) {
                    raw.top = Some(*n);
                    i += 2;
                    continue;
                }
                raw.unrecognized.push(w.clone());
            }
            Lexeme::Word(w) => {
                if let Some(l) = label_of(w) {
                    raw.label.get_or_insert(l);
                } else if matches!(w.as_str(), "similar" | "similarity" | "similarly") {
                    raw.rank = Some(RankMethod::Similarity);
                } else if w == "quality" {
                    raw.rank = Some(RankMethod::Quality);
                } else {
                    raw.unrecognized.push(w.clone());
                }
            }
            Lexeme::Quoted(q) => {
                raw.keyword.get_or_insert_with(|| q.clone());
            }
            Lexeme::Plus => {}
        }
        i += 1;
    }
    raw
}

/// Narrows scanned fragments to the variables `intent` understands.
/// A bare number or `top <int>` means the example count for
/// [`Intent::Example`] and the highlighted-word count for
/// [`Intent::Attribution`]. Counts are clamped to `[1, max_examples]` and
/// `top_k` to at least 1, with a notice per adjustment.
pub fn variables_for(raw: &RawVariables, intent: Intent, max_examples: usize) -> (ExplanationVariables, Vec<VariableNotice>) {
    let mut vars = ExplanationVariables::default();
    let mut notices = Vec::new();
    let mut clamp = |name: &str, requested: usize, lo: usize, hi: usize| {
        let applied = requested.clamp(lo, hi);
        if applied != requested {
            notices.push(VariableNotice { variable: name.to_string(), requested, applied });
        }
        applied
    };
    match intent {
        Intent::Example => {
            vars.target_label = raw.label;
            vars.rank_method = raw.rank;
            vars.keyword = raw.keyword.clone();
            if let Some(n) = raw.top.or(raw.count) {
                vars.example_count = Some(clamp("example count", n, 1, max_examples));
            }
        }
        Intent::Attribution => {
            vars.target_label = raw.label;
            if let Some(n) = raw.top.or(raw.count) {
                vars.top_k = Some(clamp("number of words", n, 1, usize::MAX));
            }
        }
        Intent::Counterfactual => vars.target_label = raw.label,
        _ => {}
    }
    (vars, notices)
}

/// `scan_variables` followed by [`variables_for`].
pub fn parse_variables(utterance: &str, intent: Intent, max_examples: usize) -> (ExplanationVariables, Vec<VariableNotice>) {
    variables_for(&scan_variables(utterance), intent, max_examples)
}
