//! The integrated writing review: structure suggestions from DTW alignment
//! against the closest benchmark pattern, style and length flags, and the
//! three overall scores.

pub mod dtw;

use serde::{Deserialize, Serialize};

use crate::label::{AspectLabel, LABEL_COUNT};
use crate::profile::{ConferenceProfile, LengthStats, StructurePattern};
use crate::templates::{Slots, TemplateSet};
use crate::text::token_count;
use dtw::label_dtw;

pub const DEFAULT_STYLE_THRESHOLD: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReviewKind {
    Structure,
    Style,
    Length,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub kind: ReviewKind,
    pub sentence_index: usize,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub current_label: Option<AspectLabel>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub suggested_label: Option<AspectLabel>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub quality_score: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub token_count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractReview {
    /// Submission revision this review belongs to.
    pub revision: u64,
    pub items: Vec<ReviewItem>,
    pub overall_style: f64,
    pub overall_structure: f64,
    pub overall: f64,
    /// Index into the profile's patterns of the closest one.
    pub closest_pattern: usize,
    pub pattern_distance: f64,
}

impl AbstractReview {
    pub fn items_for(&self, sentence: usize) -> impl Iterator<Item = &ReviewItem> {
        self.items.iter().filter(move |i| i.sentence_index == sentence)
    }

    pub fn structure_item(&self, sentence: usize) -> Option<&ReviewItem> {
        self.items_for(sentence).find(|i| i.kind == ReviewKind::Structure)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReviewConfig {
    /// Sentences scoring at or below this quality are flagged.
    pub style_threshold: u8,
}

impl Default for ReviewConfig {
    fn default() -> Self {
        Self { style_threshold: DEFAULT_STYLE_THRESHOLD }
    }
}

/// Closest pattern (first on ties) and its per-sentence suggested labels.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureMatch {
    pub pattern: usize,
    pub distance: f64,
    /// Majority pattern label aligned to each predicted sentence.
    pub aligned: Vec<AspectLabel>,
}

/// Aligns `predicted` to every pattern and keeps the closest.
///
/// For each sentence the suggestion is the most frequent pattern label among
/// the positions aligned to it; ties go to the label met first along the path.
pub fn match_structure(predicted: &[AspectLabel], patterns: &[StructurePattern]) -> Option<StructureMatch> {
    if predicted.is_empty() {
        return None;
    }
    let mut best: Option<(usize, dtw::DtwResult)> = None;
    for (p, pattern) in patterns.iter().enumerate() {
        let Ok(r) = label_dtw(predicted, &pattern.sequence) else { continue };
        if best.as_ref().is_none_or(|b| r.distance < b.1.distance) {
            best = Some((p, r));
        }
    }
    let (p, result) = best?;
    let sequence = &patterns[p].sequence;
    let aligned = (0..predicted.len())
        .map(|i| {
            let mut counts = [0usize; LABEL_COUNT];
            let mut first_seen: Vec<AspectLabel> = Vec::new();
            for &(_, j) in result.path.iter().filter(|(a, _)| *a == i) {
                let l = sequence[j];
                counts[l.index()] += 1;
                if !first_seen.contains(&l) {
                    first_seen.push(l);
                }
            }
            let top = *counts.iter().max().expect("five labels");
            *first_seen
                .iter()
                .find(|l| counts[l.index()] == top)
                .expect("every sentence is on the path")
        })
        .collect();
    Some(StructureMatch { pattern: p, distance: result.distance, aligned })
}

/// Structure items for every sentence whose aligned label differs from its
/// predicted label.
pub fn structure_review(
    predicted: &[AspectLabel],
    patterns: &[StructurePattern],
    templates: &TemplateSet,
) -> (Vec<ReviewItem>, Option<StructureMatch>) {
    let Some(m) = match_structure(predicted, patterns) else {
        return (Vec::new(), None);
    };
    let pattern = &patterns[m.pattern];
    let items = predicted
        .iter()
        .zip(&m.aligned)
        .enumerate()
        .filter(|(_, (p, a))| p != a)
        .map(|(i, (&current, &suggested))| {
            let slots = Slots::new()
                .set("sentence", i + 1)
                .set("current", current)
                .set("suggested", suggested)
                .set("pattern", pattern.display_form());
            ReviewItem {
                kind: ReviewKind::Structure,
                sentence_index: i,
                message: templates.render("review.structure", &slots),
                current_label: Some(current),
                suggested_label: Some(suggested),
                quality_score: None,
                token_count: None,
            }
        })
        .collect();
    (items, Some(m))
}

/// Style items for low quality scores and length items for sentences outside
/// the conference's 5th-95th percentile token band.
pub fn style_and_length_review(
    sentences: &[String],
    quality_scores: &[u8],
    lengths: &LengthStats,
    config: &ReviewConfig,
    templates: &TemplateSet,
) -> Vec<ReviewItem> {
    assert_eq!(sentences.len(), quality_scores.len(), "one score per sentence");
    let mut items = Vec::new();
    for (i, (sentence, &score)) in sentences.iter().zip(quality_scores).enumerate() {
        if score <= config.style_threshold {
            let slots = Slots::new()
                .set("sentence", i + 1)
                .set("score", score)
                .set("threshold", config.style_threshold);
            items.push(ReviewItem {
                kind: ReviewKind::Style,
                sentence_index: i,
                message: templates.render("review.style", &slots),
                current_label: None,
                suggested_label: None,
                quality_score: Some(score),
                token_count: None,
            });
        }
        let tokens = token_count(sentence);
        if !lengths.contains(tokens) {
            let direction = if tokens < lengths.p5 { "shorter" } else { "longer" };
            let slots = Slots::new()
                .set("sentence", i + 1)
                .set("tokens", tokens)
                .set("direction", direction)
                .set("low", lengths.p5)
                .set("high", lengths.p95);
            items.push(ReviewItem {
                kind: ReviewKind::Length,
                sentence_index: i,
                message: templates.render("review.length", &slots),
                current_label: None,
                suggested_label: None,
                quality_score: None,
                token_count: Some(tokens),
            });
        }
    }
    items
}

/// `(overall_style, overall_structure, overall)`: the mean quality score,
/// `5 - 0.5 * #structure items` clamped to `[0, 5]`, and their mean.
pub fn overall_scores(items: &[ReviewItem], quality_scores: &[u8]) -> (f64, f64, f64) {
    let style = if quality_scores.is_empty() {
        0.0
    } else {
        quality_scores.iter().map(|&q| f64::from(q)).sum::<f64>() / quality_scores.len() as f64
    };
    let structure_items = items.iter().filter(|i| i.kind == ReviewKind::Structure).count();
    let structure = (5.0 - 0.5 * structure_items as f64).clamp(0.0, 5.0);
    (style, structure, (style + structure) / 2.0)
}

/// Full review of one submission.
pub fn build_review(
    revision: u64,
    sentences: &[String],
    predicted: &[AspectLabel],
    quality_scores: &[u8],
    profile: &ConferenceProfile,
    config: &ReviewConfig,
    templates: &TemplateSet,
) -> AbstractReview {
    let (mut items, matched) = structure_review(predicted, &profile.patterns, templates);
    items.extend(style_and_length_review(sentences, quality_scores, &profile.length_stats, config, templates));
    items.sort_by_key(|i| (i.sentence_index, i.kind as u8));
    let (overall_style, overall_structure, overall) = overall_scores(&items, quality_scores);
    AbstractReview {
        revision,
        items,
        overall_style,
        overall_structure,
        overall,
        closest_pattern: matched.as_ref().map_or(0, |m| m.pattern),
        pattern_distance: matched.map_or(0.0, |m| m.distance),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::AspectLabel::{Background as B, Finding as F, Method as M, Purpose as P};

    fn t() -> TemplateSet {
        TemplateSet::default()
    }

    fn structure_items(n: usize) -> Vec<ReviewItem> {
        (0..n)
            .map(|i| ReviewItem {
                kind: ReviewKind::Structure,
                sentence_index: i,
                message: String::new(),
                current_label: Some(P),
                suggested_label: Some(B),
                quality_score: None,
                token_count: None,
            })
            .collect()
    }

    #[test]
    fn matching_pattern_yields_no_items() {
        let patterns = vec![StructurePattern::new(vec![B, P, M, F], 1)];
        let (items, m) = structure_review(&[B, P, M, F], &patterns, &t());
        assert!(items.is_empty());
        assert_eq!(m.unwrap().distance, 0.0);
    }

    #[test]
    fn swapped_opening_is_flagged_on_both_sentences() {
        let patterns = vec![StructurePattern::new(vec![B, P, M, F], 1)];
        let (items, _) = structure_review(&[P, B, M, F], &patterns, &t());
        let got: Vec<(usize, Option<AspectLabel>)> = items.iter().map(|i| (i.sentence_index, i.suggested_label)).collect();
        assert_eq!(got, vec![(0, Some(B)), (1, Some(P))]);
        assert!(items[0].message.contains("suggested to describe **background**"), "{}", items[0].message);
        for i in &items {
            assert_ne!(i.suggested_label, i.current_label);
        }
    }

    #[test]
    fn closest_pattern_wins_and_majority_vote_applies() {
        let patterns = vec![
            StructurePattern::new(vec![M, M, M, F, F, F], 1),
            StructurePattern::new(vec![B, B, B, B, P, P, M, M, M, F, F, F], 1),
        ];
        let m = match_structure(&[B, P, P, M, F], &patterns).unwrap();
        assert_eq!(m.pattern, 1);
        assert_eq!(m.distance, 0.0);
        assert_eq!(m.aligned, vec![B, P, P, M, F]);
    }

    #[test]
    fn style_and_length_thresholds() {
        let lengths = LengthStats { mean: 20.0, p5: 5, p95: 45 };
        let short = "one two three four five six".to_string();
        let long = (0..60).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        let cfg = ReviewConfig::default();
        assert!(style_and_length_review(&[short.clone(), short.clone()], &[3, 5], &lengths, &cfg, &t()).is_empty());

        let items = style_and_length_review(std::slice::from_ref(&short), &[1], &lengths, &cfg, &t());
        assert_eq!(items.len(), 1);
        assert_eq!((items[0].kind, items[0].quality_score), (ReviewKind::Style, Some(1)));

        let items = style_and_length_review(&[long], &[4], &lengths, &cfg, &t());
        assert_eq!(items.len(), 1);
        assert_eq!((items[0].kind, items[0].token_count), (ReviewKind::Length, Some(60)));
    }

    #[test]
    fn overall_score_formulas() {
        assert_eq!(overall_scores(&[], &[3]).1, 5.0);
        assert_eq!(overall_scores(&structure_items(2), &[3]).1, 4.0);
        assert_eq!(overall_scores(&structure_items(2), &[5, 5, 3, 3]), (4.0, 4.0, 4.0));
        assert_eq!(overall_scores(&structure_items(12), &[1]).1, 0.0);
        for n in 0..10 {
            let a = overall_scores(&structure_items(n), &[3]).1;
            let b = overall_scores(&structure_items(n + 1), &[3]).1;
            assert_eq!(a - b, 0.5);
        }
    }
}
