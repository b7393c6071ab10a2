//! Additive-smoothed n-gram language model used to score writing style.
//!
//! Sentences are padded with `n - 1` begin markers and one end marker. The
//! conditional probability of token `w` after context `h` is
//! `(c(h, w) + alpha) / (c(h) + alpha * V)` where `V` counts every predictable
//! token type (vocabulary, end marker, unknown marker).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::corpus::Corpus;
use crate::text::tokenize;

const BOS: u32 = 0;
const EOS: u32 = 1;
const UNK: u32 = 2;
const RESERVED: [&str; 3] = ["<s>", "</s>", "<unk>"];

/// Serialized form: sorted count tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StyleModelData {
    order: usize,
    alpha: f64,
    vocab: Vec<String>,
    ngrams: Vec<(Vec<u32>, u64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StyleModelData", into = "StyleModelData")]
pub struct StyleModel {
    order: usize,
    alpha: f64,
    /// Token strings by id; ids 0..3 are the reserved markers.
    vocab: Vec<String>,
    ids: HashMap<String, u32>,
    ngrams: HashMap<Vec<u32>, u64>,
    contexts: HashMap<Vec<u32>, u64>,
}

impl TryFrom<StyleModelData> for StyleModel {
    type Error = ModelError;

    fn try_from(d: StyleModelData) -> Result<Self, Self::Error> {
        if d.order == 0 {
            return Err(ModelError::InvalidParameter("n-gram order must be >= 1".into()));
        }
        if !(d.alpha.is_finite() && d.alpha > 0.0) {
            return Err(ModelError::InvalidParameter("alpha must be positive".into()));
        }
        if d.vocab.len() < RESERVED.len() || d.vocab[..3] != RESERVED {
            return Err(ModelError::Shape("vocabulary lacks reserved markers".into()));
        }
        let ids = d
            .vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        let mut model = StyleModel {
            order: d.order,
            alpha: d.alpha,
            vocab: d.vocab,
            ids,
            ngrams: HashMap::new(),
            contexts: HashMap::new(),
        };
        for (gram, count) in d.ngrams {
            if gram.len() != model.order || gram.iter().any(|&t| t as usize >= model.vocab.len()) {
                return Err(ModelError::Shape("malformed n-gram entry".into()));
            }
            model.add(gram, count);
        }
        Ok(model)
    }
}

impl From<StyleModel> for StyleModelData {
    fn from(m: StyleModel) -> Self {
        let mut ngrams: Vec<(Vec<u32>, u64)> = m.ngrams.into_iter().collect();
        ngrams.sort();
        StyleModelData { order: m.order, alpha: m.alpha, vocab: m.vocab, ngrams }
    }
}

impl StyleModel {
    fn add(&mut self, gram: Vec<u32>, count: u64) {
        *self.contexts.entry(gram[..gram.len() - 1].to_vec()).or_default() += count;
        *self.ngrams.entry(gram).or_default() += count;
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Number of predictable token types (`V` in the smoothing formula).
    pub fn vocab_size(&self) -> usize {
        self.vocab.len() - 1
    }

    fn encode(&self, sentence: &str) -> Vec<u32> {
        let mut ids = vec![BOS; self.order - 1];
        ids.extend(
            tokenize(sentence)
                .iter()
                .map(|t| self.ids.get(t).copied().unwrap_or(UNK)),
        );
        ids.push(EOS);
        ids
    }

    /// Raw count of an n-gram given as surface tokens (`<s>`/`</s>` allowed).
    pub fn ngram_count(&self, tokens: &[&str]) -> u64 {
        let ids: Option<Vec<u32>> = tokens.iter().map(|t| self.ids.get(*t).copied()).collect();
        ids.and_then(|ids| {
            if ids.len() == self.order {
                self.ngrams.get(&ids).copied()
            } else {
                None
            }
        })
        .unwrap_or(0)
    }

    fn probability(&self, gram: &[u32]) -> f64 {
        let c = self.ngrams.get(gram).copied().unwrap_or(0) as f64;
        let h = self.contexts.get(&gram[..gram.len() - 1]).copied().unwrap_or(0) as f64;
        (c + self.alpha) / (h + self.alpha * self.vocab_size() as f64)
    }

    /// Natural-log probability of every predicted token, end marker included.
    pub fn token_log_probs(&self, sentence: &str) -> Vec<f64> {
        let ids = self.encode(sentence);
        ids.windows(self.order).map(|g| self.probability(g).ln()).collect()
    }

    /// `exp(-(1/T) * sum(log P))` over the `T` predicted tokens.
    pub fn perplexity(&self, sentence: &str) -> f64 {
        perplexity_from_log_probs(&self.token_log_probs(sentence))
    }
}

/// Perplexity of a sequence given its per-token natural-log probabilities.
pub fn perplexity_from_log_probs(log_probs: &[f64]) -> f64 {
    if log_probs.is_empty() {
        return 1.0;
    }
    let mean_nll = -log_probs.iter().sum::<f64>() / log_probs.len() as f64;
    mean_nll.exp().max(1.0)
}

/// Counts n-grams over every sentence of the corpus.
pub fn train_style_lm(corpus: &Corpus, order: usize, alpha: f64) -> Result<StyleModel, ModelError> {
    if order == 0 {
        return Err(ModelError::InvalidParameter("n-gram order must be >= 1".into()));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(ModelError::InvalidParameter("alpha must be positive".into()));
    }
    if corpus.sentence_count() == 0 {
        return Err(ModelError::EmptyCorpus);
    }
    let tokenized: Vec<Vec<String>> = corpus.sentences().map(|s| tokenize(&s.text)).collect();
    let mut words: Vec<&str> = tokenized.iter().flatten().map(String::as_str).collect();
    words.sort_unstable();
    words.dedup();

    let vocab: Vec<String> = RESERVED
        .iter()
        .copied()
        .chain(words.into_iter().filter(|w| !RESERVED.contains(w)))
        .map(str::to_string)
        .collect();
    let ids = vocab
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i as u32))
        .collect();
    let mut model = StyleModel {
        order,
        alpha,
        vocab,
        ids,
        ngrams: HashMap::new(),
        contexts: HashMap::new(),
    };
    for tokens in &tokenized {
        let mut ids = vec![BOS; order - 1];
        ids.extend(tokens.iter().map(|t| model.ids[t]));
        ids.push(EOS);
        for gram in ids.windows(order) {
            model.add(gram.to_vec(), 1);
        }
    }
    Ok(model)
}
