//! A submitted abstract run through both writing models and the review.

use serde::{Deserialize, Serialize};

use crate::explain::ExplainContext;
use crate::models::{quantize_quality, ModelError, Prediction};
use crate::review::{build_review, AbstractReview, ReviewConfig};
use crate::text::{segment_abstract, token_count};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzedSentence {
    /// Byte offsets into the submitted text.
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub prediction: Prediction,
    pub perplexity: f64,
    pub quality_score: u8,
    pub token_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractDocument {
    pub text: String,
    pub revision: u64,
    pub sentences: Vec<AnalyzedSentence>,
    pub review: AbstractReview,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AnalysisError {
    #[error("the abstract is empty")]
    Empty,
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub fn analyze_abstract(
    text: &str,
    revision: u64,
    ctx: &ExplainContext<'_>,
    config: &ReviewConfig,
) -> Result<AbstractDocument, AnalysisError> {
    let spans = segment_abstract(text);
    if spans.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let mut sentences = Vec::with_capacity(spans.len());
    for span in spans {
        let s = span.text(text);
        let perplexity = ctx.style.perplexity(s);
        sentences.push(AnalyzedSentence {
            start: span.start,
            end: span.end,
            text: s.to_string(),
            prediction: ctx.classifier.predict(s),
            perplexity,
            quality_score: quantize_quality(perplexity, &ctx.profile.quality_boundaries)?,
            token_count: token_count(s),
        });
    }
    let texts: Vec<String> = sentences.iter().map(|s| s.text.clone()).collect();
    let predicted: Vec<_> = sentences.iter().map(|s| s.prediction.label).collect();
    let scores: Vec<u8> = sentences.iter().map(|s| s.quality_score).collect();
    let review = build_review(revision, &texts, &predicted, &scores, ctx.profile, config, ctx.templates);
    Ok(AbstractDocument { text: text.to_string(), revision, sentences, review })
}
