//! Labeled abstract corpora and their line-delimited file format.
//!
//! Each line of a corpus file is one JSON object:
//!
//! ```text
//! {"conference":"acl","year":2021,"abstract_id":"a-17",
//!  "sentences":[{"text":"...","label":"background"}, ...]}
//! ```
//!
//! Labels accept the aliases in [`crate::label::LABEL_ALIASES`].

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::label::AspectLabel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSentence {
    pub text: String,
    pub label: AspectLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub conference: String,
    pub year: i32,
    pub abstract_id: String,
    pub sentences: Vec<LabeledSentence>,
}

impl CorpusRecord {
    pub fn labels(&self) -> Vec<AspectLabel> {
        self.sentences.iter().map(|s| s.label).collect()
    }

    fn validate(&self) -> Result<(), String> {
        if self.conference.trim().is_empty() {
            return Err("empty conference".into());
        }
        if self.abstract_id.trim().is_empty() {
            return Err("empty abstract_id".into());
        }
        if self.sentences.is_empty() {
            return Err("record has no sentences".into());
        }
        if let Some(i) = self.sentences.iter().position(|s| s.text.trim().is_empty()) {
            return Err(format!("sentence {i} is empty"));
        }
        Ok(())
    }
}

/// Raw line shape; labels stay strings until alias resolution.
#[derive(Deserialize)]
struct RawRecord {
    conference: String,
    year: i32,
    abstract_id: String,
    sentences: Vec<RawSentence>,
}

#[derive(Deserialize)]
struct RawSentence {
    text: String,
    label: String,
}

impl TryFrom<RawRecord> for CorpusRecord {
    type Error = String;

    fn try_from(raw: RawRecord) -> Result<Self, Self::Error> {
        let sentences = raw
            .sentences
            .into_iter()
            .map(|s| {
                let label = s.label.parse::<AspectLabel>().map_err(|e| e.to_string())?;
                Ok(LabeledSentence { text: s.text, label })
            })
            .collect::<Result<Vec<_>, String>>()?;
        Ok(CorpusRecord {
            conference: raw.conference,
            year: raw.year,
            abstract_id: raw.abstract_id,
            sentences,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Unreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate abstract ({conference}, {abstract_id})")]
    Duplicate { conference: String, abstract_id: String },
}

/// A problem found while ingesting; in lenient mode the line is skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestIssue {
    /// 1-based line number, 0 for file-level warnings.
    pub line: usize,
    pub message: String,
}

/// Validated collection of labeled abstracts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    records: Vec<CorpusRecord>,
}

impl Corpus {
    /// Builds a corpus, enforcing per-record validity and key uniqueness.
    pub fn new(records: Vec<CorpusRecord>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for (i, r) in records.iter().enumerate() {
            r.validate()
                .map_err(|message| CorpusError::Malformed { line: i + 1, message })?;
            if !seen.insert((r.conference.clone(), r.abstract_id.clone())) {
                return Err(CorpusError::Duplicate {
                    conference: r.conference.clone(),
                    abstract_id: r.abstract_id.clone(),
                });
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[CorpusRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn conferences(&self) -> BTreeSet<String> {
        self.records.iter().map(|r| r.conference.clone()).collect()
    }

    pub fn for_conference<'a>(&'a self, conference: &'a str) -> impl Iterator<Item = &'a CorpusRecord> + 'a {
        self.records.iter().filter(move |r| r.conference == conference)
    }

    /// Every sentence of the corpus, in record order.
    pub fn sentences(&self) -> impl Iterator<Item = &LabeledSentence> {
        self.records.iter().flat_map(|r| r.sentences.iter())
    }

    pub fn sentence_count(&self) -> usize {
        self.records.iter().map(|r| r.sentences.len()).sum()
    }

    /// Sub-corpus restricted to one conference.
    pub fn filter_conference(&self, conference: &str) -> Corpus {
        Corpus {
            records: self.for_conference(conference).cloned().collect(),
        }
    }

    /// Serializes to the line-delimited file format.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

/// Result of [`ingest_corpus`]: the validated corpus and any reported issues.
#[derive(Debug)]
pub struct Ingested {
    pub corpus: Corpus,
    pub issues: Vec<IngestIssue>,
}

/// Reads a corpus file. With `strict`, the first bad line is fatal; otherwise
/// bad lines are skipped and reported.
pub fn ingest_corpus(path: impl AsRef<Path>, strict: bool) -> Result<Ingested, CorpusError> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|source| CorpusError::Unreadable {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus(&content, strict)
}

pub fn parse_corpus(content: &str, strict: bool) -> Result<Ingested, CorpusError> {
    let mut records = Vec::new();
    let mut issues = Vec::new();
    let mut seen = HashSet::new();

    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<RawRecord>(line)
            .map_err(|e| e.to_string())
            .and_then(CorpusRecord::try_from)
            .and_then(|r| r.validate().map(|_| r))
            .and_then(|r| {
                if seen.insert((r.conference.clone(), r.abstract_id.clone())) {
                    Ok(r)
                } else {
                    Err(format!(
                        "duplicate abstract ({}, {})",
                        r.conference, r.abstract_id
                    ))
                }
            });
        match parsed {
            Ok(r) => records.push(r),
            Err(message) if strict => return Err(CorpusError::Malformed { line: line_no, message }),
            Err(message) => {
                tracing::warn!(line = line_no, %message, "skipping corpus line");
                issues.push(IngestIssue { line: line_no, message });
            }
        }
    }
    if records.is_empty() {
        tracing::warn!("corpus is empty");
        issues.push(IngestIssue { line: 0, message: "corpus is empty".into() });
    }
    Ok(Ingested { corpus: Corpus { records }, issues })
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINE_A: &str = r#"{"conference":"acl","year":2020,"abstract_id":"a1","sentences":[{"text":"Models are big.","label":"background"},{"text":"We win.","label":"finding/contribution"}]}"#;
    const LINE_B: &str = r#"{"conference":"chi","year":2021,"abstract_id":"b1","sentences":[{"text":"We study users.","label":"Purpose"}]}"#;

    #[test]
    fn two_valid_lines() {
        let got = parse_corpus(&format!("{LINE_A}\n{LINE_B}\n"), true).unwrap();
        assert_eq!(got.corpus.len(), 2);
        assert!(got.issues.is_empty());
        assert_eq!(got.corpus.records()[0].sentences[1].label, AspectLabel::Finding);
        assert_eq!(got.corpus.records()[1].sentences[0].label, AspectLabel::Purpose);
    }

    #[test]
    fn empty_file_warns() {
        let got = parse_corpus("", false).unwrap();
        assert!(got.corpus.is_empty());
        assert_eq!(got.issues.len(), 1);
        assert_eq!(got.issues[0].line, 0);
    }

    #[test]
    fn unknown_label_is_reported_with_line_number() {
        let bad = LINE_B.replace("Purpose", "results");
        let lenient = parse_corpus(&format!("{LINE_A}\n{bad}\n"), false).unwrap();
        assert_eq!(lenient.corpus.len(), 1);
        assert_eq!(lenient.issues[0].line, 2);
        assert!(lenient.issues[0].message.contains("results"));

        match parse_corpus(&format!("{LINE_A}\n{bad}\n"), true) {
            Err(CorpusError::Malformed { line: 2, .. }) => {}
            other => panic!("expected strict failure on line 2, got {other:?}"),
        }
    }

    #[test]
    fn malformed_json_and_duplicates() {
        let got = parse_corpus(&format!("{LINE_A}\nnot json\n{LINE_A}\n"), false).unwrap();
        assert_eq!(got.corpus.len(), 1);
        assert_eq!(got.issues.iter().map(|i| i.line).collect::<Vec<_>>(), vec![2, 3]);
    }

    #[test]
    fn empty_sentence_text_rejected() {
        let bad = LINE_B.replace("We study users.", "   ");
        assert!(parse_corpus(&bad, true).is_err());
    }

    #[test]
    fn unreadable_path() {
        assert!(matches!(
            ingest_corpus("/nonexistent/corpus.jsonl", false),
            Err(CorpusError::Unreadable { .. })
        ));
    }

    #[test]
    fn jsonl_round_trip() {
        let got = parse_corpus(&format!("{LINE_A}\n{LINE_B}\n"), true).unwrap();
        let again = parse_corpus(&got.corpus.to_jsonl(), true).unwrap();
        assert_eq!(got.corpus, again.corpus);
    }
}
