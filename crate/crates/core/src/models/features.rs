//! Hashed unigram + bigram featurization shared by the classifier and the
//! sentence embeddings.

use serde::{Deserialize, Serialize};

use crate::text::tokenize;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(seed: u64, parts: &[&str]) -> u64 {
    let mut h = FNV_OFFSET ^ seed.wrapping_mul(FNV_PRIME);
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            h ^= 0x1f;
            h = h.wrapping_mul(FNV_PRIME);
        }
        for b in part.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    // order tag keeps "a b" (bigram) and "a\x1fb" (unigram) apart
    h ^= parts.len() as u64;
    h.wrapping_mul(FNV_PRIME)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeaturizerConfig {
    pub feature_dim: usize,
    pub hash_seed: u64,
    /// Highest n-gram order (1 = unigrams only, 2 = unigrams + bigrams).
    pub max_order: usize,
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        Self { feature_dim: 1 << 14, hash_seed: 0x5eed, max_order: 2 }
    }
}

/// One n-gram occurrence: the hashed feature it lands in and the token
/// positions it spans.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramOccurrence {
    pub feature: u32,
    pub tokens: Vec<usize>,
}

/// Sparse real vector with strictly increasing indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub entries: Vec<(u32, f64)>,
}

impl SparseVector {
    /// Sums duplicate indices.
    pub fn from_unsorted(mut entries: Vec<(u32, f64)>) -> Self {
        entries.sort_by_key(|e| e.0);
        let mut out: Vec<(u32, f64)> = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => out.push((i, v)),
            }
        }
        Self { entries: out }
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// Dot product against a dense vector.
    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| v * dense[i as usize]).sum()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: u32) -> f64 {
        self.entries
            .binary_search_by_key(&index, |e| e.0)
            .map_or(0.0, |p| self.entries[p].1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Featurizer {
    pub config: FeaturizerConfig,
}

impl Featurizer {
    pub fn new(config: FeaturizerConfig) -> Self {
        Self { config }
    }

    pub fn dim(&self) -> usize {
        self.config.feature_dim
    }

    pub fn feature_index(&self, ngram: &[&str]) -> u32 {
        (fnv1a(self.config.hash_seed, ngram) % self.config.feature_dim as u64) as u32
    }

    /// All n-gram occurrences of a token sequence, unigrams first.
    pub fn occurrences(&self, tokens: &[String]) -> Vec<NgramOccurrence> {
        let mut out = Vec::new();
        for order in 1..=self.config.max_order {
            if tokens.len() < order {
                break;
            }
            for start in 0..=tokens.len() - order {
                let parts: Vec<&str> = tokens[start..start + order].iter().map(String::as_str).collect();
                out.push(NgramOccurrence {
                    feature: self.feature_index(&parts),
                    tokens: (start..start + order).collect(),
                });
            }
        }
        out
    }

    /// Count vector of hashed n-grams.
    pub fn features_of_tokens(&self, tokens: &[String]) -> SparseVector {
        SparseVector::from_unsorted(
            self.occurrences(tokens)
                .into_iter()
                .map(|o| (o.feature, 1.0))
                .collect(),
        )
    }

    pub fn features(&self, sentence: &str) -> SparseVector {
        self.features_of_tokens(&tokenize(sentence))
    }
}
