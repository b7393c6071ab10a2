//! Per-conference profiles: quality percentile boundaries, label and length
//! statistics, and benchmark structure patterns.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, CorpusRecord};
use crate::exec::Exec;
use crate::label::{AspectLabel, PerLabel, LABEL_COUNT};
use crate::models::{ModelError, QualityBoundaries};
use crate::review::dtw::label_dtw;
use crate::stats::{mean, nearest_rank, sorted};
use crate::text::token_count;

pub const DEFAULT_PATTERN_COUNT: usize = 5;
pub const DEFAULT_PATTERN_LENGTH: usize = 12;
pub const MIN_PROFILE_SENTENCES: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum ProfileError {
    #[error("conference `{conference}` has {found} sentences; at least {MIN_PROFILE_SENTENCES} are required")]
    TooFewSentences { conference: String, found: usize },
    #[error("conference `{conference}` has {found} abstracts but {k} patterns were requested")]
    TooFewAbstracts { conference: String, found: usize, k: usize },
    #[error("pattern count and length must be positive")]
    InvalidPatternShape,
    #[error("non-finite perplexity {value} for sentence {index}")]
    NonFinitePerplexity { index: usize, value: f64 },
    #[error(transparent)]
    Boundaries(#[from] ModelError),
}

/// A benchmark label sequence, resampled to a fixed length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructurePattern {
    pub sequence: Vec<AspectLabel>,
    /// Number of corpus abstracts assigned to this pattern's cluster.
    pub support: usize,
}

impl StructurePattern {
    pub fn new(sequence: Vec<AspectLabel>, support: usize) -> Self {
        Self { sequence, support }
    }

    /// Run-length form with the percentage of the sequence each run covers.
    pub fn runs(&self) -> Vec<(AspectLabel, f64)> {
        let total = self.sequence.len() as f64;
        let mut runs: Vec<(AspectLabel, usize)> = Vec::new();
        for &l in &self.sequence {
            match runs.last_mut() {
                Some((last, n)) if *last == l => *n += 1,
                _ => runs.push((l, 1)),
            }
        }
        runs.into_iter()
            .map(|(l, n)| (l, 100.0 * n as f64 / total))
            .collect()
    }

    /// e.g. `"background" (25.0%) -> "purpose" (16.7%) -> ...`
    pub fn display_form(&self) -> String {
        self.runs()
            .iter()
            .map(|(l, pct)| format!("\"{l}\" ({pct:.1}%)"))
            .collect::<Vec<_>>()
            .join(" -> ")
    }

    pub fn compact(&self) -> String {
        self.sequence.iter().map(|l| l.short()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub mean: f64,
    pub p5: usize,
    pub p95: usize,
}

impl LengthStats {
    pub fn contains(&self, tokens: usize) -> bool {
        (self.p5..=self.p95).contains(&tokens)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConferenceProfile {
    pub conference: String,
    pub abstract_count: usize,
    pub sentence_count: usize,
    pub quality_boundaries: QualityBoundaries,
    pub label_distribution: PerLabel<f64>,
    pub length_stats: LengthStats,
    pub patterns: Vec<StructurePattern>,
    pub data_card: String,
    pub model_card: String,
}

impl ConferenceProfile {
    pub fn label_fraction(&self, label: AspectLabel) -> f64 {
        self.label_distribution[label.index()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileOptions {
    pub pattern_count: usize,
    pub pattern_length: usize,
    pub seed: u64,
    /// Free text describing the models, copied into the profile's model card.
    pub model_card: String,
    pub exec: Exec,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            pattern_count: DEFAULT_PATTERN_COUNT,
            pattern_length: DEFAULT_PATTERN_LENGTH,
            seed: 7,
            model_card: String::new(),
            exec: Exec::default(),
        }
    }
}

/// Builds the profile of `conference` from the corpus.
///
/// Boundaries are the nearest-rank 20/40/60/80th percentiles of all sentence
/// perplexities. When the conference has fewer abstracts than
/// `pattern_count`, one pattern per abstract is extracted instead.
pub fn build_profile<F>(
    corpus: &Corpus,
    conference: &str,
    perplexity_fn: F,
    options: &ProfileOptions,
) -> Result<ConferenceProfile, ProfileError>
where
    F: Fn(&str) -> f64 + Sync + Send,
{
    let records: Vec<&CorpusRecord> = corpus.for_conference(conference).collect();
    let sentences: Vec<(&str, AspectLabel)> = records
        .iter()
        .flat_map(|r| r.sentences.iter().map(|s| (s.text.as_str(), s.label)))
        .collect();
    if sentences.len() < MIN_PROFILE_SENTENCES {
        return Err(ProfileError::TooFewSentences {
            conference: conference.to_string(),
            found: sentences.len(),
        });
    }

    let perplexities = options.exec.map(&sentences, |(text, _)| perplexity_fn(text));
    if let Some((index, &value)) = perplexities.iter().enumerate().find(|(_, p)| !p.is_finite()) {
        return Err(ProfileError::NonFinitePerplexity { index, value });
    }
    let sorted_ppl = sorted(&perplexities);
    let boundaries = QualityBoundaries::new([20, 40, 60, 80].map(|p| {
        nearest_rank(&sorted_ppl, p).expect("non-empty")
    }))?;

    let mut label_counts = [0usize; LABEL_COUNT];
    for (_, l) in &sentences {
        label_counts[l.index()] += 1;
    }
    let total = sentences.len() as f64;
    let label_distribution = label_counts.map(|c| c as f64 / total);

    let lengths: Vec<f64> = sentences.iter().map(|(t, _)| token_count(t) as f64).collect();
    let sorted_len = sorted(&lengths);
    let length_stats = LengthStats {
        mean: mean(&lengths),
        p5: nearest_rank(&sorted_len, 5).expect("non-empty") as usize,
        p95: nearest_rank(&sorted_len, 95).expect("non-empty") as usize,
    };

    let k = options.pattern_count.min(records.len());
    let patterns = extract_patterns_with(corpus, conference, k, options.pattern_length, options.seed, options.exec)?;

    let data_card = render_data_card(conference, &records, sentences.len(), &label_distribution, &length_stats);
    Ok(ConferenceProfile {
        conference: conference.to_string(),
        abstract_count: records.len(),
        sentence_count: sentences.len(),
        quality_boundaries: boundaries,
        label_distribution,
        length_stats,
        patterns,
        data_card,
        model_card: options.model_card.clone(),
    })
}

fn render_data_card(
    conference: &str,
    records: &[&CorpusRecord],
    sentences: usize,
    dist: &PerLabel<f64>,
    lengths: &LengthStats,
) -> String {
    let years = records.iter().map(|r| r.year);
    let (lo, hi) = (years.clone().min().unwrap_or(0), years.max().unwrap_or(0));
    let fractions = AspectLabel::ALL
        .iter()
        .map(|l| format!("{l} {:.1}%", 100.0 * dist[l.index()]))
        .collect::<Vec<_>>()
        .join(", ");
    format!(
        "Dataset: {} abstracts ({sentences} sentences) published at {conference} between {lo} and {hi}. \
         Aspect labels: {fractions}. Sentence length: mean {:.1} tokens, 90% of sentences between {} and {} tokens.",
        records.len(),
        lengths.mean,
        lengths.p5,
        lengths.p95,
    )
}

/// Nearest-index resampling to `length` positions: output cell `i` takes the
/// source element under the cell's centre, `floor((2i + 1) * n / (2 * length))`.
pub fn resample(labels: &[AspectLabel], length: usize) -> Vec<AspectLabel> {
    let n = labels.len();
    (0..length)
        .map(|i| labels[((2 * i + 1) * n) / (2 * length)])
        .collect()
}

/// Benchmark patterns: k-medoids under 0/1-cost DTW over resampled label
/// sequences. Records are ordered by `abstract_id` first, so the result does
/// not depend on corpus order.
pub fn extract_patterns(
    corpus: &Corpus,
    conference: &str,
    k: usize,
    length: usize,
    seed: u64,
) -> Result<Vec<StructurePattern>, ProfileError> {
    extract_patterns_with(corpus, conference, k, length, seed, Exec::default())
}

pub fn extract_patterns_with(
    corpus: &Corpus,
    conference: &str,
    k: usize,
    length: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<StructurePattern>, ProfileError> {
    if k == 0 || length == 0 {
        return Err(ProfileError::InvalidPatternShape);
    }
    let mut records: Vec<&CorpusRecord> = corpus.for_conference(conference).collect();
    if records.len() < k {
        return Err(ProfileError::TooFewAbstracts {
            conference: conference.to_string(),
            found: records.len(),
            k,
        });
    }
    records.sort_by(|a, b| a.abstract_id.cmp(&b.abstract_id));
    let sequences: Vec<Vec<AspectLabel>> = records.iter().map(|r| resample(&r.labels(), length)).collect();
    let distances = pairwise_dtw(&sequences, exec);
    let clustering = k_medoids(&distances, k, seed);

    let mut patterns: Vec<StructurePattern> = clustering
        .medoids
        .iter()
        .zip(&clustering.sizes)
        .map(|(&m, &size)| StructurePattern::new(sequences[m].clone(), size))
        .collect();
    patterns.sort_by(|a, b| b.support.cmp(&a.support).then_with(|| a.sequence.cmp(&b.sequence)));
    Ok(patterns)
}

/// Square distance matrix, row-major, computed row by row under `exec`.
pub fn pairwise_dtw(sequences: &[Vec<AspectLabel>], exec: Exec) -> DistanceMatrix {
    let n = sequences.len();
    let rows = exec.map_range(n, |i| {
        (0..n)
            .map(|j| {
                if i == j {
                    0.0
                } else {
                    label_dtw(&sequences[i], &sequences[j]).expect("non-empty").distance
                }
            })
            .collect::<Vec<f64>>()
    });
    DistanceMatrix { n, values: rows.concat() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(i, j));
            }
        }
        Self { n, values }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub medoids: Vec<usize>,
    pub sizes: Vec<usize>,
    pub cost: f64,
}

/// Total distance of every point to its nearest medoid, with assignments.
/// Ties go to the earlier medoid in `medoids`.
fn assign(d: &DistanceMatrix, medoids: &[usize]) -> (f64, Vec<usize>) {
    let mut cost = 0.0;
    let mut owner = Vec::with_capacity(d.len());
    for p in 0..d.len() {
        let (best, dist) = medoids
            .iter()
            .enumerate()
            .map(|(c, &m)| (c, d.get(p, m)))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        cost += dist;
        owner.push(best);
    }
    (cost, owner)
}

/// Seeded k-medoids: k-medoids++ initialization followed by PAM swaps until
/// no single medoid/non-medoid exchange lowers the total cost.
pub fn k_medoids(d: &DistanceMatrix, k: usize, seed: u64) -> Clustering {
    let n = d.len();
    assert!(k >= 1 && k <= n, "k must lie in 1..=n");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut medoids = vec![rng.gen_range(0..n)];
    while medoids.len() < k {
        let weights: Vec<f64> = (0..n)
            .map(|p| {
                if medoids.contains(&p) {
                    0.0
                } else {
                    medoids.iter().map(|&m| d.get(p, m)).fold(f64::INFINITY, f64::min).powi(2)
                }
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = None;
            for (p, &w) in weights.iter().enumerate() {
                if w > 0.0 {
                    chosen = Some(p);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            chosen.expect("positive total weight")
        } else {
            // every remaining point coincides with a medoid
            (0..n).find(|p| !medoids.contains(p)).expect("k <= n")
        };
        medoids.push(next);
    }

    let (mut cost, _) = assign(d, &medoids);
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for slot in 0..k {
            for candidate in 0..n {
                if medoids.contains(&candidate) {
                    continue;
                }
                let mut trial = medoids.clone();
                trial[slot] = candidate;
                let (c, _) = assign(d, &trial);
                if c + 1e-12 < best.map_or(cost, |b| b.2) {
                    best = Some((slot, candidate, c));
                }
            }
        }
        match best {
            Some((slot, candidate, c)) => {
                medoids[slot] = candidate;
                cost = c;
            }
            None => break,
        }
    }

    let (cost, owner) = assign(d, &medoids);
    let mut sizes = vec![0; k];
    for o in owner {
        sizes[o] += 1;
    }
    Clustering { medoids, sizes, cost }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LabeledSentence;
    use crate::label::AspectLabel::{Background as B, Finding as F, Method as M, Other as O, Purpose as P};

    fn record(id: &str, labels: &[AspectLabel]) -> CorpusRecord {
        CorpusRecord {
            conference: "conf".into(),
            year: 2021,
            abstract_id: id.into(),
            sentences: labels
                .iter()
                .enumerate()
                .map(|(i, l)| LabeledSentence { text: format!("sentence {id} {i} about {l}"), label: *l })
                .collect(),
        }
    }

    #[test]
    fn resampling_spreads_evenly() {
        assert_eq!(resample(&[B, P, M, F], 12), vec![B, B, B, P, P, P, M, M, M, F, F, F]);
        assert_eq!(resample(&[B, P, M, F], 4), vec![B, P, M, F]);
        assert_eq!(resample(&[B, P, M, F, F, O], 3), vec![P, F, O]);
        assert_eq!(resample(&[P], 3), vec![P, P, P]);
    }

    #[test]
    fn display_form_percentages_sum_to_hundred() {
        let p = StructurePattern::new(vec![B, B, P, M, F, F], 1);
        assert_eq!(
            p.display_form(),
            "\"background\" (33.3%) -> \"purpose\" (16.7%) -> \"method\" (16.7%) -> \"finding\" (33.3%)"
        );
        let total: f64 = p.runs().iter().map(|r| r.1).sum();
        assert!((total - 100.0).abs() < 0.1);
    }

    #[test]
    fn unanimous_corpus_yields_its_sequence() {
        let corpus = Corpus::new((0..4).map(|i| record(&format!("a{i}"), &[B, P, M, F])).collect()).unwrap();
        let patterns = extract_patterns(&corpus, "conf", 1, 12, 3).unwrap();
        assert_eq!(patterns.len(), 1);
        assert_eq!(patterns[0].sequence, resample(&[B, P, M, F], 12));
        assert_eq!(patterns[0].support, 4);
    }

    /// Exhaustive medoid search over all k-subsets.
    fn best_medoids(d: &DistanceMatrix, k: usize) -> (Vec<usize>, f64) {
        fn subsets(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for i in start..n {
                cur.push(i);
                subsets(n, k, i + 1, cur, out);
                cur.pop();
            }
        }
        let mut all = Vec::new();
        subsets(d.len(), k, 0, &mut Vec::new(), &mut all);
        all.into_iter()
            .map(|m| {
                let c: f64 = (0..d.len())
                    .map(|p| m.iter().map(|&q| d.get(p, q)).fold(f64::INFINITY, f64::min))
                    .sum();
                (m, c)
            })
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap()
    }

    #[test]
    fn two_groups_match_exhaustive_search() {
        let group_a: [&[AspectLabel]; 4] = [&[B, P, M, F], &[B, B, P, M, F], &[B, P, M, M, F], &[B, P, P, M, F]];
        let group_b: [&[AspectLabel]; 4] = [&[M, F, O], &[M, F, F, O], &[M, M, F, O], &[M, F, O, O]];
        let records: Vec<CorpusRecord> = group_a
            .iter()
            .chain(&group_b)
            .enumerate()
            .map(|(i, l)| record(&format!("r{i}"), l))
            .collect();
        let corpus = Corpus::new(records.clone()).unwrap();
        let seqs: Vec<Vec<AspectLabel>> = records.iter().map(|r| resample(&r.labels(), 12)).collect();
        let d = pairwise_dtw(&seqs, Exec::Sequential);
        let (_, oracle_cost) = best_medoids(&d, 2);
        // several medoid pairs can tie; any optimal one is acceptable
        for seed in 0..5 {
            let c = k_medoids(&d, 2, seed);
            assert_eq!(c.cost, oracle_cost, "seed {seed}");
        }
        let patterns = extract_patterns(&corpus, "conf", 2, 12, 11).unwrap();
        let cost: f64 = seqs
            .iter()
            .map(|s| {
                patterns
                    .iter()
                    .map(|p| label_dtw(s, &p.sequence).unwrap().distance)
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        assert_eq!(cost, oracle_cost);
        assert_eq!(patterns.iter().map(|p| p.support).sum::<usize>(), 8);
    }

    #[test]
    fn order_invariant_and_deterministic() {
        let labels: [&[AspectLabel]; 6] = [&[B, P, M, F], &[P, M, F], &[B, B, M, F, O], &[B, P, F], &[M, F], &[B, P, M, M, F, F]];
        let records: Vec<CorpusRecord> = labels.iter().enumerate().map(|(i, l)| record(&format!("x{i}"), l)).collect();
        let mut reversed = records.clone();
        reversed.reverse();
        let a = extract_patterns(&Corpus::new(records).unwrap(), "conf", 3, 12, 5).unwrap();
        let b = extract_patterns(&Corpus::new(reversed).unwrap(), "conf", 3, 12, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_abstracts() {
        let corpus = Corpus::new(vec![record("a", &[B, P])]).unwrap();
        assert!(matches!(
            extract_patterns(&corpus, "conf", 2, 12, 0),
            Err(ProfileError::TooFewAbstracts { found: 1, k: 2, .. })
        ));
    }

    #[test]
    fn boundaries_use_nearest_rank() {
        let labels = vec![B; 100];
        let corpus = Corpus::new(vec![record("a", &labels)]).unwrap();
        // perplexity = sentence index + 1, parsed back from the text
        let ppl = |t: &str| t.split_whitespace().nth(2).unwrap().parse::<f64>().unwrap() + 1.0;
        let p = build_profile(&corpus, "conf", ppl, &ProfileOptions::default()).unwrap();
        assert_eq!(p.quality_boundaries.values(), [20.0, 40.0, 60.0, 80.0]);
        assert_eq!(p.label_distribution, [1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(p.patterns.len(), 1);
        assert!(p.data_card.contains("1 abstracts (100 sentences)"));
    }

    #[test]
    fn constant_perplexity_is_rejected() {
        let corpus = Corpus::new(vec![record("a", &[B, P, M, F, F, O])]).unwrap();
        assert!(matches!(
            build_profile(&corpus, "conf", |_| 12.0, &ProfileOptions::default()),
            Err(ProfileError::Boundaries(ModelError::BoundariesNotAscending(_)))
        ));
    }

    #[test]
    fn too_few_sentences_and_non_finite() {
        let corpus = Corpus::new(vec![record("a", &[B, P])]).unwrap();
        assert!(matches!(
            build_profile(&corpus, "conf", |_| 1.0, &ProfileOptions::default()),
            Err(ProfileError::TooFewSentences { found: 2, .. })
        ));
        let corpus = Corpus::new(vec![record("a", &[B, P, M, F, O])]).unwrap();
        assert!(matches!(
            build_profile(&corpus, "conf", |_| f64::NAN, &ProfileOptions::default()),
            Err(ProfileError::NonFinitePerplexity { index: 0, .. })
        ));
    }
}
