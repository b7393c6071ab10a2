//! Research-aspect labels carried by every abstract sentence.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Rhetorical role of a sentence inside an abstract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AspectLabel {
    Background,
    Purpose,
    Method,
    Finding,
    Other,
}

pub const LABEL_COUNT: usize = 5;

impl AspectLabel {
    pub const ALL: [AspectLabel; LABEL_COUNT] = [
        AspectLabel::Background,
        AspectLabel::Purpose,
        AspectLabel::Method,
        AspectLabel::Finding,
        AspectLabel::Other,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AspectLabel::Background => "background",
            AspectLabel::Purpose => "purpose",
            AspectLabel::Method => "method",
            AspectLabel::Finding => "finding",
            AspectLabel::Other => "other",
        }
    }

    /// Single-letter code used in compact pattern renderings.
    pub fn short(self) -> char {
        match self {
            AspectLabel::Background => 'B',
            AspectLabel::Purpose => 'P',
            AspectLabel::Method => 'M',
            AspectLabel::Finding => 'F',
            AspectLabel::Other => 'O',
        }
    }

    /// Resolves a label name or one of its accepted aliases, case-insensitively.
    pub fn parse_alias(raw: &str) -> Option<Self> {
        let key = raw.trim().to_ascii_lowercase();
        LABEL_ALIASES
            .iter()
            .find(|(alias, _)| *alias == key)
            .map(|(_, label)| *label)
    }
}

/// Accepted spellings for each label, as found in annotated corpora.
pub const LABEL_ALIASES: &[(&str, AspectLabel)] = &[
    ("background", AspectLabel::Background),
    ("purpose", AspectLabel::Purpose),
    ("method", AspectLabel::Method),
    ("methods", AspectLabel::Method),
    ("finding", AspectLabel::Finding),
    ("findings", AspectLabel::Finding),
    ("contribution", AspectLabel::Finding),
    ("finding/contribution", AspectLabel::Finding),
    ("finding_contribution", AspectLabel::Finding),
    ("other", AspectLabel::Other),
];

impl fmt::Display for AspectLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown aspect label `{0}`")]
pub struct UnknownLabel(pub String);

impl FromStr for AspectLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse_alias(s).ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

/// Fixed-size per-label container.
pub type PerLabel<T> = [T; LABEL_COUNT];
