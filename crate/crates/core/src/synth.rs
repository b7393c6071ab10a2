//! Deterministic synthetic corpora: label-specific sentence frames over a
//! shared topic vocabulary, arranged into abstracts that follow a few
//! conference-specific structures.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, CorpusRecord, LabeledSentence};
use crate::label::AspectLabel::{self, Background as B, Finding as F, Method as M, Other as O, Purpose as P};

const ADJECTIVES: &[&str] = &[
    "neural", "sparse", "multilingual", "robust", "efficient", "low resource", "structured", "interactive",
    "contextual", "scalable", "few shot", "explainable",
];

const NOUNS: &[&str] = &[
    "parsing", "translation", "summarization", "question answering", "dialogue systems", "entity linking",
    "document retrieval", "speech recognition", "graph learning", "code generation", "sentiment analysis",
    "relation extraction", "text classification", "language modeling",
];

/// `(label, openers, closers)`; a sentence is `opener topic closer`.
const FRAMES: &[(AspectLabel, &[&str], &[&str])] = &[
    (
        B,
        &[
            "Recent years have seen growing interest in",
            "A long line of prior research studies",
            "Many real world applications depend on",
            "Existing approaches to",
            "Traditionally, most systems for",
            "Over the last decade, work on",
        ],
        &[
            "remains a challenging open problem",
            "has attracted considerable attention",
            "is widely deployed in practice",
            "still suffers from scarce annotations",
            "is known to be brittle",
        ],
    ),
    (
        P,
        &[
            "In this paper we propose a new framework for",
            "This work aims to improve",
            "We introduce a novel approach to",
            "Our goal is to rethink",
            "We set out to investigate",
            "This paper presents a principled study of",
        ],
        &[
            "under realistic constraints",
            "without extra supervision",
            "for unseen domains",
            "with a unified objective",
            "at web scale",
        ],
    ),
    (
        M,
        &[
            "We train an encoder with attention layers on",
            "Our method combines a retriever and a generator for",
            "We fine tune a pretrained transformer on",
            "The architecture stacks convolution blocks over",
            "We optimize a contrastive loss over",
            "Concretely, we build a pipeline of annotators for",
        ],
        &[
            "using paired training examples",
            "with a shared decoder",
            "via stochastic gradient descent",
            "through iterative refinement",
            "with curriculum sampling",
        ],
    ),
    (
        F,
        &[
            "Experiments show that our approach to",
            "Results demonstrate that the proposed method for",
            "We find that careful modeling of",
            "Our analysis reveals that improvements in",
            "Evaluation confirms that our system for",
            "Extensive ablations indicate that progress on",
        ],
        &[
            "outperforms strong baselines by a wide margin",
            "yields state of the art accuracy",
            "reduces errors by a third",
            "generalizes well across benchmarks",
            "improves human ratings significantly",
        ],
    ),
    (
        O,
        &[
            "Code and data for",
            "Our implementation of",
            "All resources related to",
            "A public demo of",
            "Annotations collected for",
            "Trained checkpoints for",
        ],
        &[
            "are publicly released",
            "will be made available online",
            "can be downloaded from our project page",
            "are shared under an open license",
            "are included in the supplementary material",
        ],
    ),
];

/// Structures assigned round-robin to conferences; each conference uses
/// three of them.
const STRUCTURES: &[&[AspectLabel]] = &[
    &[B, P, M, F],
    &[B, B, P, M, F, F],
    &[P, M, M, F, O],
    &[B, P, M, M, F, O],
    &[B, B, B, P, F],
    &[P, F, F, M],
    &[B, M, F, F, O],
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub conferences: Vec<String>,
    /// Exact number of sentences generated per conference.
    pub sentences_per_conference: usize,
    pub seed: u64,
    pub first_year: i32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            conferences: vec!["acl".into(), "chi".into(), "iclr".into()],
            sentences_per_conference: 1000,
            seed: 2022,
            first_year: 2018,
        }
    }
}

/// Label sequences the generator uses for `conference_index`.
pub fn conference_structures(conference_index: usize) -> Vec<&'static [AspectLabel]> {
    (0..3).map(|k| STRUCTURES[(conference_index * 2 + k) % STRUCTURES.len()]).collect()
}

struct SentenceMaker {
    rng: ChaCha8Rng,
    used: HashSet<String>,
}

impl SentenceMaker {
    fn make(&mut self, label: AspectLabel) -> String {
        let (_, openers, closers) = FRAMES.iter().find(|f| f.0 == label).expect("frame per label");
        for attempt in 0usize.. {
            let opener = openers.choose(&mut self.rng).expect("non-empty");
            let closer = closers.choose(&mut self.rng).expect("non-empty");
            let adjective = ADJECTIVES.choose(&mut self.rng).expect("non-empty");
            let noun = NOUNS.choose(&mut self.rng).expect("non-empty");
            // once the frames run dry, a setting number keeps sentences unique
            let text = if attempt < 64 {
                format!("{opener} {adjective} {noun} {closer}.")
            } else {
                format!("{opener} {adjective} {noun} in setting {attempt} {closer}.")
            };
            if self.used.insert(text.clone()) {
                return text;
            }
        }
        unreachable!()
    }
}

/// Builds the corpus. Every sentence is unique across the whole corpus.
pub fn synth_corpus(config: &SynthConfig) -> Corpus {
    let mut maker = SentenceMaker { rng: ChaCha8Rng::seed_from_u64(config.seed), used: HashSet::new() };
    let mut records = Vec::new();
    for (ci, conference) in config.conferences.iter().enumerate() {
        let structures = conference_structures(ci);
        let mut remaining = config.sentences_per_conference;
        let mut n = 0;
        while remaining > 0 {
            let mut labels = structures.choose(&mut maker.rng).expect("structures").to_vec();
            // occasional repeated step keeps lengths varied
            if maker.rng.gen_bool(0.3) {
                let at = maker.rng.gen_range(0..labels.len());
                labels.insert(at, labels[at]);
            }
            labels.truncate(remaining);
            remaining -= labels.len();
            let sentences = labels
                .iter()
                .map(|&label| LabeledSentence { text: maker.make(label), label })
                .collect();
            records.push(CorpusRecord {
                conference: conference.clone(),
                year: config.first_year + (n % 4),
                abstract_id: format!("{conference}-{n:05}"),
                sentences,
            });
            n += 1;
        }
    }
    Corpus::new(records).expect("generated records are valid and unique")
}
