//! Retrieval index over a conference's published sentences.

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::exec::Exec;
use crate::label::AspectLabel;
use crate::models::{quantize_quality, AspectClassifier, QualityBoundaries, SentenceEmbedding, StyleModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleEntry {
    pub text: String,
    /// Gold corpus label.
    pub label: AspectLabel,
    pub quality: u8,
    #[serde(skip)]
    pub embedding: SentenceEmbedding,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExampleIndex {
    entries: Vec<ExampleEntry>,
}

impl ExampleIndex {
    /// Embeds and scores every sentence of `conference` in the corpus.
    pub fn build(
        corpus: &Corpus,
        conference: &str,
        classifier: &AspectClassifier,
        style: &StyleModel,
        boundaries: &QualityBoundaries,
        exec: Exec,
    ) -> Self {
        let sentences: Vec<(&str, AspectLabel)> = corpus
            .for_conference(conference)
            .flat_map(|r| r.sentences.iter().map(|s| (s.text.as_str(), s.label)))
            .collect();
        let entries = exec.map(&sentences, |&(text, label)| {
            let quality = quantize_quality(style.perplexity(text), boundaries).unwrap_or(1);
            ExampleEntry {
                text: text.to_string(),
                label,
                quality,
                embedding: classifier.embed(text),
            }
        });
        Self { entries }
    }

    /// Rebuilds embeddings for entries loaded without them.
    pub fn from_entries(mut entries: Vec<ExampleEntry>, classifier: &AspectClassifier, exec: Exec) -> Self {
        let embeddings = exec.map(&entries, |e| classifier.embed(&e.text));
        for (e, emb) in entries.iter_mut().zip(embeddings) {
            e.embedding = emb;
        }
        Self { entries }
    }

    pub fn entries(&self) -> &[ExampleEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries satisfying `keep`, paired with their similarity to `query`,
    /// most similar first (index order on ties).
    pub fn ranked_by_similarity(
        &self,
        query: &SentenceEmbedding,
        keep: impl Fn(&ExampleEntry) -> bool,
    ) -> Vec<(usize, f64)> {
        let mut hits: Vec<(usize, f64)> = self
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| keep(e))
            .map(|(i, e)| (i, query.similarity(&e.embedding)))
            .collect();
        hits.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        hits
    }
}
