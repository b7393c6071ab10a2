//! Softmax-regression aspect classifier over hashed n-gram counts.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{Featurizer, FeaturizerConfig, SparseVector};
use super::ModelError;
use crate::corpus::Corpus;
use crate::label::{AspectLabel, PerLabel, LABEL_COUNT};
use crate::text::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub epochs: usize,
    pub learning_rate: f64,
    pub feature_dim: usize,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self { epochs: 8, learning_rate: 0.1, feature_dim: 1 << 14, seed: 17 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub params: TrainParams,
    pub sentences: usize,
    pub label_counts: PerLabel<usize>,
    /// Mean cross-entropy observed during each epoch.
    pub epoch_loss: Vec<f64>,
}

/// Label, full softmax vector and its maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: AspectLabel,
    pub confidence: f64,
    pub probabilities: PerLabel<f64>,
}

impl Prediction {
    pub fn from_probabilities(probabilities: PerLabel<f64>) -> Self {
        let mut best = 0;
        for i in 1..LABEL_COUNT {
            if probabilities[i] > probabilities[best] {
                best = i;
            }
        }
        Prediction {
            label: AspectLabel::ALL[best],
            confidence: probabilities[best],
            probabilities,
        }
    }

    /// Confidence as shown to writers.
    pub fn confidence_display(&self) -> String {
        format!("{:.2}", self.confidence)
    }
}

/// L2-normalized TF-IDF vector (zero for sentences without tokens).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SentenceEmbedding(pub SparseVector);

impl SentenceEmbedding {
    pub fn similarity(&self, other: &SentenceEmbedding) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &PerLabel<f64>) -> PerLabel<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; LABEL_COUNT];
    let mut total = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        total += *o;
    }
    for o in &mut out {
        *o /= total;
    }
    out
}

/// A model whose per-class logit can be differentiated with respect to its
/// input features, as integrated gradients needs.
pub trait DifferentiableModel {
    fn logit(&self, features: &SparseVector, class: AspectLabel) -> f64;
    /// Partial derivatives of the class logit, evaluated at `features`, for
    /// every index present in `support` (same order).
    fn gradient(&self, features: &SparseVector, support: &SparseVector, class: AspectLabel) -> Vec<f64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectClassifier {
    featurizer: Featurizer,
    /// Row-major `LABEL_COUNT x feature_dim`.
    weights: Vec<f64>,
    bias: PerLabel<f64>,
    /// Smoothed inverse document frequency per hashed feature.
    idf: Vec<f64>,
    summary: TrainingSummary,
}

impl AspectClassifier {
    /// Zero-weight classifier: every prediction is uniform.
    pub fn untrained(config: FeaturizerConfig) -> Self {
        let dim = config.feature_dim;
        Self {
            featurizer: Featurizer::new(config),
            weights: vec![0.0; LABEL_COUNT * dim],
            bias: [0.0; LABEL_COUNT],
            idf: vec![1.0; dim],
            summary: TrainingSummary {
                params: TrainParams { epochs: 0, feature_dim: dim, ..TrainParams::default() },
                sentences: 0,
                label_counts: [0; LABEL_COUNT],
                epoch_loss: Vec::new(),
            },
        }
    }

    /// Builds a classifier from explicit parameters (tests, imports).
    pub fn from_parts(
        config: FeaturizerConfig,
        weights: Vec<f64>,
        bias: PerLabel<f64>,
        idf: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let dim = config.feature_dim;
        if weights.len() != LABEL_COUNT * dim || idf.len() != dim {
            return Err(ModelError::Shape(format!(
                "expected {} weights and {dim} idf entries",
                LABEL_COUNT * dim
            )));
        }
        if weights.iter().chain(&bias).chain(&idf).any(|w| !w.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        let mut clf = Self::untrained(config);
        clf.weights = weights;
        clf.bias = bias;
        clf.idf = idf;
        Ok(clf)
    }

    pub fn featurizer(&self) -> &Featurizer {
        &self.featurizer
    }

    pub fn summary(&self) -> &TrainingSummary {
        &self.summary
    }

    pub fn weight(&self, class: AspectLabel, feature: u32) -> f64 {
        self.weights[class.index() * self.featurizer.dim() + feature as usize]
    }

    pub fn bias(&self) -> &PerLabel<f64> {
        &self.bias
    }

    fn row(&self, class: usize) -> &[f64] {
        let dim = self.featurizer.dim();
        &self.weights[class * dim..(class + 1) * dim]
    }

    pub fn logits(&self, features: &SparseVector) -> PerLabel<f64> {
        let mut out = self.bias;
        for (c, o) in out.iter_mut().enumerate() {
            *o += features.dot_dense(self.row(c));
        }
        out
    }

    pub fn predict_features(&self, features: &SparseVector) -> Prediction {
        Prediction::from_probabilities(softmax(&self.logits(features)))
    }

    pub fn predict(&self, sentence: &str) -> Prediction {
        self.predict_features(&self.featurizer.features(sentence))
    }

    pub fn embed(&self, sentence: &str) -> SentenceEmbedding {
        let features = self.featurizer.features(sentence);
        let weighted: Vec<(u32, f64)> = features
            .entries
            .iter()
            .map(|&(i, v)| (i, v * self.idf[i as usize]))
            .collect();
        let norm = weighted.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return SentenceEmbedding::default();
        }
        SentenceEmbedding(SparseVector {
            entries: weighted.into_iter().map(|(i, v)| (i, v / norm)).collect(),
        })
    }
}

impl DifferentiableModel for AspectClassifier {
    fn logit(&self, features: &SparseVector, class: AspectLabel) -> f64 {
        self.bias[class.index()] + features.dot_dense(self.row(class.index()))
    }

    fn gradient(&self, _features: &SparseVector, support: &SparseVector, class: AspectLabel) -> Vec<f64> {
        let row = self.row(class.index());
        support.entries.iter().map(|&(i, _)| row[i as usize]).collect()
    }
}

/// Trains the classifier by per-example SGD on the cross-entropy loss.
/// Weights start at zero; example order is reshuffled every epoch from `seed`.
pub fn train_classifier(corpus: &Corpus, params: TrainParams) -> Result<AspectClassifier, ModelError> {
    if params.feature_dim == 0 {
        return Err(ModelError::InvalidParameter("feature_dim must be positive".into()));
    }
    if !(params.learning_rate.is_finite() && params.learning_rate > 0.0) {
        return Err(ModelError::InvalidParameter("learning rate must be positive".into()));
    }
    let config = FeaturizerConfig { feature_dim: params.feature_dim, ..FeaturizerConfig::default() };
    let mut clf = AspectClassifier::untrained(config);
    let dim = params.feature_dim;

    let examples: Vec<(SparseVector, usize)> = corpus
        .sentences()
        .map(|s| (clf.featurizer.features_of_tokens(&tokenize(&s.text)), s.label.index()))
        .collect();
    if examples.is_empty() {
        return Err(ModelError::EmptyCorpus);
    }
    let mut label_counts = [0usize; LABEL_COUNT];
    for (_, y) in &examples {
        label_counts[*y] += 1;
    }
    if label_counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(ModelError::SingleLabel);
    }

    let mut df = vec![0usize; dim];
    for (x, _) in &examples {
        for &(i, _) in &x.entries {
            df[i as usize] += 1;
        }
    }
    let n = examples.len() as f64;
    clf.idf = df.iter().map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut epoch_loss = Vec::with_capacity(params.epochs);
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        let mut loss = 0.0;
        for &e in &order {
            let (x, y) = &examples[e];
            let probs = softmax(&clf.logits(x));
            loss -= probs[*y].max(f64::MIN_POSITIVE).ln();
            for (c, &p) in probs.iter().enumerate() {
                let g = p - if c == *y { 1.0 } else { 0.0 };
                let step = params.learning_rate * g;
                clf.bias[c] -= step;
                let row = &mut clf.weights[c * dim..(c + 1) * dim];
                for &(i, v) in &x.entries {
                    row[i as usize] -= step * v;
                }
            }
        }
        epoch_loss.push(loss / n);
    }
    clf.summary = TrainingSummary { params, sentences: examples.len(), label_counts, epoch_loss };
    Ok(clf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CorpusRecord, LabeledSentence};
    use proptest::prelude::*;

    fn toy_corpus(pairs: &[(&str, AspectLabel)]) -> Corpus {
        Corpus::new(vec![CorpusRecord {
            conference: "toy".into(),
            year: 2022,
            abstract_id: "t1".into(),
            sentences: pairs
                .iter()
                .map(|(t, l)| LabeledSentence { text: t.to_string(), label: *l })
                .collect(),
        }])
        .unwrap()
    }

    #[test]
    fn zero_weight_classifier_is_uniform() {
        let clf = AspectClassifier::untrained(FeaturizerConfig::default());
        let p = clf.predict("anything at all");
        assert!(p.probabilities.iter().all(|&q| q == 0.2));
        assert_eq!(p.confidence, 0.2);
        assert_eq!(p.confidence_display(), "0.20");
        // empty sentence: bias only
        assert_eq!(clf.predict("").confidence, 0.2);
    }

    #[test]
    fn zero_epochs_gives_uniform_probabilities() {
        let corpus = toy_corpus(&[("alpha beta", AspectLabel::Background), ("gamma delta", AspectLabel::Method)]);
        let clf = train_classifier(&corpus, TrainParams { epochs: 0, ..Default::default() }).unwrap();
        assert!(clf.predict("alpha beta").probabilities.iter().all(|&q| q == 0.2));
    }

    #[test]
    fn disjoint_vocabulary_pair_is_learned() {
        let corpus = toy_corpus(&[
            ("recent advances motivate this", AspectLabel::Background),
            ("experiments reveal large gains", AspectLabel::Finding),
        ]);
        let clf = train_classifier(&corpus, TrainParams::default()).unwrap();
        assert_eq!(clf.predict("recent advances motivate this").label, AspectLabel::Background);
        assert_eq!(clf.predict("experiments reveal large gains").label, AspectLabel::Finding);
        let loss = &clf.summary().epoch_loss;
        assert!(loss.last().unwrap() < loss.first().unwrap());
    }

    #[test]
    fn training_is_deterministic() {
        let corpus = toy_corpus(&[
            ("a b c", AspectLabel::Background),
            ("d e f", AspectLabel::Purpose),
            ("g h i", AspectLabel::Method),
        ]);
        let a = train_classifier(&corpus, TrainParams::default()).unwrap();
        let b = train_classifier(&corpus, TrainParams::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_label_corpus_is_refused() {
        let corpus = toy_corpus(&[("a", AspectLabel::Other), ("b", AspectLabel::Other)]);
        assert!(matches!(
            train_classifier(&corpus, TrainParams::default()),
            Err(ModelError::SingleLabel)
        ));
    }

    #[test]
    fn identical_sentences_have_unit_similarity() {
        let corpus = toy_corpus(&[("we propose a model", AspectLabel::Purpose), ("results improve", AspectLabel::Finding)]);
        let clf = train_classifier(&corpus, TrainParams::default()).unwrap();
        let e = clf.embed("We propose a model.");
        assert!((e.similarity(&clf.embed("we propose a model")) - 1.0).abs() < 1e-9);
        assert!((e.norm() - 1.0).abs() < 1e-9);
        let empty = clf.embed("   ");
        assert_eq!(empty.norm(), 0.0);
        assert_eq!(empty.similarity(&e), 0.0);
    }

    #[test]
    fn token_disjoint_sentences_are_orthogonal() {
        let corpus = toy_corpus(&[("a", AspectLabel::Purpose), ("b", AspectLabel::Finding)]);
        let clf = train_classifier(&corpus, TrainParams::default()).unwrap();
        let (s1, s2) = ("neural parsing works", "users prefer chat");
        // unhashed oracle: distinct n-gram strings must land in distinct buckets
        let grams = |s: &str| {
            let t = tokenize(s);
            let mut g: Vec<Vec<String>> = t.iter().map(|w| vec![w.clone()]).collect();
            g.extend(t.windows(2).map(|w| w.to_vec()));
            g
        };
        let f = clf.featurizer();
        let idx = |g: &Vec<String>| f.feature_index(&g.iter().map(String::as_str).collect::<Vec<_>>());
        let b1: std::collections::HashSet<u32> = grams(s1).iter().map(idx).collect();
        let b2: std::collections::HashSet<u32> = grams(s2).iter().map(idx).collect();
        assert!(b1.is_disjoint(&b2), "hash collision in fixture");
        assert_eq!(clf.embed(s1).similarity(&clf.embed(s2)), 0.0);
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_is_shift_invariant(
            logits in proptest::array::uniform5(-30.0f64..30.0),
            shift in -100.0f64..100.0,
        ) {
            let p = softmax(&logits);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let shifted = logits.map(|l| l + shift);
            let q = softmax(&shifted);
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            let pred = Prediction::from_probabilities(p);
            prop_assert_eq!(pred.confidence, p.iter().copied().fold(f64::MIN, f64::max));
            prop_assert_eq!(pred.probabilities[pred.label.index()], pred.confidence);
        }
    }
}
