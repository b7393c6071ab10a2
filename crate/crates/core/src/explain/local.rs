//! Prediction confidence and similar-example retrieval.

use serde::{Deserialize, Serialize};

use super::{
    fmt2, Attachment, ExampleRow, ExplainContext, ExplainError, ExplanationPayload, ExplanationVariables,
    RankMethod,
};
use crate::intent::Intent;
use crate::label::AspectLabel;
use crate::models::Prediction;
use crate::templates::{Slots, TemplateSet};

/// Which writing model a question is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelTarget {
    Structure,
    Style,
}

pub fn explain_confidence(
    prediction: &Prediction,
    target: ModelTarget,
    templates: &TemplateSet,
) -> Result<ExplanationPayload, ExplainError> {
    if target == ModelTarget::Style {
        return Err(ExplainError::ConfidenceNotAvailable);
    }
    let slots = Slots::new()
        .set("label", prediction.label)
        .set("confidence", prediction.confidence_display());
    let id = "confidence.structure";
    Ok(ExplanationPayload::new(Intent::Confidence, id, templates.render(id, &slots)))
}

/// Similar published sentences.
///
/// Candidates are filtered by `target_label` (default: `predicted`) and by
/// case-insensitive keyword substring, ranked by embedding dot product or by
/// quality score (dot product breaks ties), and truncated to `example_count`.
pub fn explain_examples(
    query: &str,
    predicted: AspectLabel,
    vars: &ExplanationVariables,
    ctx: &ExplainContext<'_>,
) -> Result<ExplanationPayload, ExplainError> {
    if ctx.index.is_empty() {
        return Err(ExplainError::EmptyIndex);
    }
    let target = vars.target_label.unwrap_or(predicted);
    let count = vars
        .example_count
        .unwrap_or(ctx.config.default_examples)
        .clamp(1, ctx.config.max_examples);
    let rank = vars.rank_method.unwrap_or(RankMethod::Similarity);
    let keyword = vars.keyword.as_ref().map(|k| k.to_lowercase());
    let query_norm = query.trim();

    let embedding = ctx.classifier.embed(query);
    let mut hits = ctx.index.ranked_by_similarity(&embedding, |e| {
        e.label == target
            && e.text.trim() != query_norm
            && keyword.as_ref().is_none_or(|k| e.text.to_lowercase().contains(k))
    });
    if hits.is_empty() {
        return Err(ExplainError::NoMatchingExamples);
    }
    let entries = ctx.index.entries();
    if rank == RankMethod::Quality {
        // stable: similarity order survives among equal quality
        hits.sort_by(|a, b| entries[b.0].quality.cmp(&entries[a.0].quality));
    }
    hits.truncate(count);

    let rows: Vec<ExampleRow> = hits
        .iter()
        .map(|&(i, sim)| ExampleRow {
            sentence: entries[i].text.clone(),
            label: entries[i].label,
            similarity: sim,
            quality: entries[i].quality,
        })
        .collect();
    let listing = rows
        .iter()
        .enumerate()
        .map(|(n, r)| format!("{}. \"{}\" (similarity {}, quality {})", n + 1, r.sentence, fmt2(r.similarity), r.quality))
        .collect::<Vec<_>>()
        .join("\n");
    let slots = Slots::new()
        .set("count", rows.len())
        .set("label", target)
        .set("conference", &ctx.profile.conference)
        .set("rank", match rank {
            RankMethod::Similarity => "similarity",
            RankMethod::Quality => "quality score",
        })
        .set("examples", listing);
    let id = "examples.list";
    Ok(ExplanationPayload::new(Intent::Example, id, ctx.templates.render(id, &slots)).with_attachment(
        Attachment::ExampleList { target_label: target, rank_method: rank, examples: rows },
    ))
}
