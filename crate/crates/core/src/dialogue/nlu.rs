//! Intent classification: weighted keyword rules with typo tolerance, then
//! character-trigram similarity against canonical phrasings.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Deserialize;

use crate::intent::Intent;
use crate::text::tokenize;

pub const PHRASINGS_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.55;
/// Minimum summed rule weight for stage one to decide.
pub const MIN_RULE_SCORE: f64 = 1.0;
pub const MIN_PHRASINGS_PER_INTENT: usize = 5;

const DEFAULT_PHRASINGS: &str = include_str!("../../data/phrasings.toml");

/// `(intent, space-separated keyword phrase, weight)`.
const RULES: &[(Intent, &str, f64)] = &[
    (Intent::DataStats, "data", 1.5),
    (Intent::DataStats, "dataset", 2.0),
    (Intent::DataStats, "training data", 1.0),
    (Intent::DataStats, "statistics", 2.0),
    (Intent::DataStats, "corpus", 2.0),
    (Intent::DataStats, "trained on", 1.5),
    (Intent::DataStats, "used to train", 1.5),
    (Intent::DataStats, "abstracts", 1.0),
    (Intent::DataStats, "collected", 1.5),
    (Intent::ModelDescription, "model", 1.0),
    (Intent::ModelDescription, "architecture", 2.0),
    (Intent::ModelDescription, "kind of model", 1.5),
    (Intent::ModelDescription, "algorithm", 2.0),
    (Intent::ModelDescription, "model card", 1.5),
    (Intent::ModelDescription, "classifier", 1.5),
    (Intent::ModelDescription, "model work", 1.0),
    (Intent::QualityScoreMeaning, "quality", 1.5),
    (Intent::QualityScoreMeaning, "score", 1.0),
    (Intent::QualityScoreMeaning, "quality score", 1.0),
    (Intent::QualityScoreMeaning, "style score", 1.5),
    (Intent::QualityScoreMeaning, "perplexity", 2.5),
    (Intent::QualityScoreMeaning, "levels", 1.0),
    (Intent::QualityScoreMeaning, "scale", 1.0),
    (Intent::QualityScoreMeaning, "criteria", 1.5),
    (Intent::QualityScoreMeaning, "rating", 1.5),
    (Intent::LabelDistribution, "distribution", 2.5),
    (Intent::LabelDistribution, "distributed", 2.0),
    (Intent::LabelDistribution, "proportion", 2.0),
    (Intent::LabelDistribution, "percentage", 2.0),
    (Intent::LabelDistribution, "fraction", 2.0),
    (Intent::LabelDistribution, "breakdown", 2.0),
    (Intent::LabelDistribution, "labels", 1.0),
    (Intent::LabelDistribution, "aspects", 1.0),
    (Intent::LabelDistribution, "how often", 1.0),
    (Intent::SentenceLength, "length", 2.5),
    (Intent::SentenceLength, "long", 1.5),
    (Intent::SentenceLength, "short", 1.5),
    (Intent::SentenceLength, "too long", 1.0),
    (Intent::SentenceLength, "lengthy", 2.0),
    (Intent::SentenceLength, "how many words", 2.0),
    (Intent::SentenceLength, "word count", 2.5),
    (Intent::SentenceLength, "verbose", 2.0),
    (Intent::SentenceLength, "wordy", 2.0),
    (Intent::Confidence, "confidence", 3.0),
    (Intent::Confidence, "confident", 3.0),
    (Intent::Confidence, "sure", 2.0),
    (Intent::Confidence, "certain", 2.0),
    (Intent::Confidence, "certainty", 2.0),
    (Intent::Confidence, "probability", 2.0),
    (Intent::Confidence, "trust", 1.5),
    (Intent::Confidence, "reliable", 1.5),
    (Intent::Example, "example", 2.0),
    (Intent::Example, "examples", 2.0),
    (Intent::Example, "similar", 1.5),
    (Intent::Example, "show me", 0.5),
    (Intent::Example, "published", 1.0),
    (Intent::Example, "other papers", 1.5),
    (Intent::Example, "like this", 1.0),
    (Intent::Example, "instances", 1.5),
    (Intent::Attribution, "important", 2.5),
    (Intent::Attribution, "importance", 2.5),
    (Intent::Attribution, "words", 0.5),
    (Intent::Attribution, "which words", 1.5),
    (Intent::Attribution, "highlight", 2.0),
    (Intent::Attribution, "attribution", 3.0),
    (Intent::Attribution, "contribute", 2.0),
    (Intent::Attribution, "influence", 2.0),
    (Intent::Attribution, "why", 1.0),
    (Intent::Attribution, "predicted", 0.5),
    (Intent::Attribution, "keywords", 2.0),
    (Intent::Counterfactual, "rewrite", 3.0),
    (Intent::Counterfactual, "rephrase", 2.5),
    (Intent::Counterfactual, "revise", 2.0),
    (Intent::Counterfactual, "revised", 2.0),
    (Intent::Counterfactual, "change", 1.5),
    (Intent::Counterfactual, "different label", 2.0),
    (Intent::Counterfactual, "counterfactual", 3.0),
    (Intent::Counterfactual, "what if", 1.5),
    (Intent::Counterfactual, "instead", 1.0),
    (Intent::Counterfactual, "flip", 2.0),
    (Intent::Counterfactual, "turn into", 1.0),
    (Intent::Counterfactual, "convert", 2.0),
    (Intent::Counterfactual, "modify", 2.0),
    (Intent::Counterfactual, "edit", 2.0),
    (Intent::Counterfactual, "to describe", 1.0),
    (Intent::Suggestion, "suggestion", 3.0),
    (Intent::Suggestion, "suggestions", 3.0),
    (Intent::Suggestion, "suggested", 2.0),
    (Intent::Suggestion, "review", 2.0),
    (Intent::Suggestion, "comment", 2.0),
    (Intent::Suggestion, "flagged", 2.5),
    (Intent::Suggestion, "feedback", 2.5),
    (Intent::Suggestion, "recommendation", 2.5),
    (Intent::Suggestion, "improve", 1.5),
    (Intent::Suggestion, "fix", 1.5),
    (Intent::Suggestion, "tutorial", 2.0),
    (Intent::Suggestion, "why", 0.5),
];

/// Common domain words that must never be read as a misspelled keyword
/// ("conference" is two edits from "confidence").
const PROTECTED_WORDS: &[&str] = &["conference", "conferences", "sentence", "sentences", "prediction", "predictions"];

#[derive(Debug, thiserror::Error)]
pub enum PhrasingError {
    #[error("phrasing file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("phrasing file has format_version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("unknown intent `{0}` in phrasing file")]
    UnknownIntent(String),
    #[error("intent `{intent}` has {found} phrasings, at least {MIN_PHRASINGS_PER_INTENT} required")]
    TooFew { intent: Intent, found: usize },
}

#[derive(Deserialize)]
struct PhrasingFile {
    format_version: u32,
    phrasings: BTreeMap<String, Vec<String>>,
}

/// Which stage decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Rules,
    Similarity,
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub intent: Intent,
    pub confidence: f64,
    pub stage: Stage,
}

type Trigrams = HashMap<[char; 3], f64>;

struct Rule {
    intent: Intent,
    words: Vec<String>,
    weight: f64,
}

pub struct IntentClassifier {
    rules: Vec<Rule>,
    lexicon: HashSet<String>,
    phrasings: Vec<(Intent, String, Trigrams, f64)>,
    threshold: f64,
    source: String,
}

impl std::fmt::Debug for IntentClassifier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IntentClassifier")
            .field("rules", &self.rules.len())
            .field("phrasings", &self.phrasings.len())
            .field("threshold", &self.threshold)
            .finish()
    }
}

impl Default for IntentClassifier {
    fn default() -> Self {
        Self::from_toml(DEFAULT_PHRASINGS).expect("bundled phrasings are valid")
    }
}

/// Allowed edit distance between a token and a keyword, by the shorter length.
/// Distances count an adjacent transposition as one edit.
pub fn typo_tolerance(len: usize) -> usize {
    match len {
        0..=3 => 0,
        4..=5 => 1,
        _ => 2,
    }
}

fn trigrams(text: &str) -> Trigrams {
    let norm = format!(" {} ", tokenize(text).join(" "));
    let chars: Vec<char> = norm.chars().collect();
    let mut out = Trigrams::new();
    for w in chars.windows(3) {
        *out.entry([w[0], w[1], w[2]]).or_insert(0.0) += 1.0;
    }
    out
}

fn norm(v: &Trigrams) -> f64 {
    v.values().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine similarity of the character-trigram count vectors of two texts.
pub fn trigram_cosine(a: &str, b: &str) -> f64 {
    let (ta, tb) = (trigrams(a), trigrams(b));
    cosine(&ta, norm(&ta), &tb, norm(&tb))
}

fn cosine(a: &Trigrams, na: f64, b: &Trigrams, nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().filter_map(|(k, x)| b.get(k).map(|y| x * y)).sum();
    dot / (na * nb)
}

impl IntentClassifier {
    pub fn from_toml(src: &str) -> Result<Self, PhrasingError> {
        let file: PhrasingFile = toml::from_str(src)?;
        if file.format_version != PHRASINGS_FORMAT_VERSION {
            return Err(PhrasingError::Version { found: file.format_version, expected: PHRASINGS_FORMAT_VERSION });
        }
        let mut phrasings = Vec::new();
        for (name, list) in &file.phrasings {
            let intent = Intent::from_str_opt(name).ok_or_else(|| PhrasingError::UnknownIntent(name.clone()))?;
            for p in list {
                let t = trigrams(p);
                let n = norm(&t);
                phrasings.push((intent, p.clone(), t, n));
            }
        }
        for intent in Intent::EXPLANATIONS {
            let found = phrasings.iter().filter(|p| p.0 == intent).count();
            if found < MIN_PHRASINGS_PER_INTENT {
                return Err(PhrasingError::TooFew { intent, found });
            }
        }
        let rules: Vec<Rule> = RULES
            .iter()
            .map(|&(intent, phrase, weight)| Rule {
                intent,
                words: phrase.split(' ').map(str::to_string).collect(),
                weight,
            })
            .collect();
        let lexicon = rules
            .iter()
            .flat_map(|r| r.words.iter().cloned())
            .chain(PROTECTED_WORDS.iter().map(|w| w.to_string()))
            .collect();
        Ok(Self { rules, lexicon, phrasings, threshold: DEFAULT_SIMILARITY_THRESHOLD, source: src.to_string() })
    }

    /// The TOML text the phrasing inventory was loaded from.
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn phrasings(&self, intent: Intent) -> impl Iterator<Item = &str> {
        self.phrasings.iter().filter(move |p| p.0 == intent).map(|p| p.1.as_str())
    }

    /// Exact match, or (for tokens that are not themselves keywords) an edit
    /// distance within [`typo_tolerance`].
    pub fn token_matches(&self, token: &str, keyword: &str) -> bool {
        if token == keyword {
            return true;
        }
        if self.lexicon.contains(token) {
            return false;
        }
        let shorter = token.chars().count().min(keyword.chars().count());
        strsim::osa_distance(token, keyword) <= typo_tolerance(shorter)
    }

    fn rule_scores(&self, tokens: &[String]) -> BTreeMap<Intent, f64> {
        let mut scores = BTreeMap::new();
        for rule in &self.rules {
            let n = rule.words.len();
            let hit = tokens.len() >= n
                && (0..=tokens.len() - n)
                    .any(|i| rule.words.iter().zip(&tokens[i..i + n]).all(|(k, t)| self.token_matches(t, k)));
            if hit {
                *scores.entry(rule.intent).or_insert(0.0) += rule.weight;
            }
        }
        scores
    }

    /// Best phrasing similarity per intent.
    fn similarities(&self, utterance: &str) -> BTreeMap<Intent, f64> {
        let q = trigrams(utterance);
        let nq = norm(&q);
        let mut best = BTreeMap::new();
        for (intent, _, t, n) in &self.phrasings {
            let s = cosine(&q, nq, t, *n);
            let e = best.entry(*intent).or_insert(0.0);
            if s > *e {
                *e = s;
            }
        }
        best
    }

    /// Total: every utterance resolves to exactly one intent. Rule ties are
    /// broken by phrasing similarity, then by enumeration order.
    pub fn classify(&self, utterance: &str) -> Classification {
        let tokens = tokenize(utterance);
        let scores = self.rule_scores(&tokens);
        let total: f64 = scores.values().sum();
        let top = scores.values().copied().fold(0.0, f64::max);
        if top >= MIN_RULE_SCORE {
            let tied: Vec<Intent> = scores.iter().filter(|(_, &s)| s == top).map(|(i, _)| *i).collect();
            let intent = if tied.len() == 1 {
                tied[0]
            } else {
                let sims = self.similarities(utterance);
                let mut pick = tied[0];
                for &i in &tied[1..] {
                    if sims.get(&i).unwrap_or(&0.0) > sims.get(&pick).unwrap_or(&0.0) {
                        pick = i;
                    }
                }
                pick
            };
            return Classification { intent, confidence: top / total, stage: Stage::Rules };
        }
        let sims = self.similarities(utterance);
        let mut best: Option<(Intent, f64)> = None;
        for (&i, &s) in &sims {
            if best.is_none_or(|b| s > b.1) {
                best = Some((i, s));
            }
        }
        match best {
            Some((intent, s)) if s >= self.threshold => {
                Classification { intent, confidence: s, stage: Stage::Similarity }
            }
            _ => Classification {
                intent: Intent::Fallback,
                confidence: best.map_or(0.0, |b| 1.0 - b.1),
                stage: Stage::Fallback,
            },
        }
    }
}
